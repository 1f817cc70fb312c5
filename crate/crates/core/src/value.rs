//! Runtime values, asset contents, and memories.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::json;

use crate::fixed::Fixed4;

/// A non-linear runtime value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Real(Fixed4),
    Str(String),
    Bool(bool),
    /// Non-negative seconds on the global clock.
    Time(u64),
    Party(String),
    /// Usage code minted by `uses`/`use_once`.
    Code(String),
    Pair(Box<Value>, Box<Value>),
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Real(_) => "real",
            Value::Str(_) => "string",
            Value::Bool(_) => "bool",
            Value::Time(_) => "time",
            Value::Party(_) => "party",
            Value::Code(_) => "code",
            Value::Pair(..) => "pair",
        }
    }

    /// Seconds view used when scheduling events: times directly, reals when
    /// they are non-negative integers.
    pub fn as_time(&self) -> Option<u64> {
        match self {
            Value::Time(t) => Some(*t),
            Value::Real(v) => v.as_seconds(),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Real(v) => write!(f, "{v}"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Time(t) => write!(f, "t{t}"),
            Value::Party(p) => write!(f, "{p}"),
            Value::Code(c) => write!(f, "{c}"),
            Value::Pair(a, b) => write!(f, "({a}, {b})"),
        }
    }
}

// Values serialize as single-key objects so scripts and traces stay typed:
// {"real":"2.0000"}, {"str":"hi"}, {"bool":true}, {"time":3}, {"party":"A"},
// {"code":"use:t#0"}, {"pair":[..,..]}.
impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let v = match self {
            Value::Real(x) => json!({ "real": x.to_string() }),
            Value::Str(x) => json!({ "str": x }),
            Value::Bool(x) => json!({ "bool": x }),
            Value::Time(x) => json!({ "time": x }),
            Value::Party(x) => json!({ "party": x }),
            Value::Code(x) => json!({ "code": x }),
            Value::Pair(a, b) => json!({ "pair": [a, b] }),
        };
        v.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Value, D::Error> {
        let raw = serde_json::Value::deserialize(d)?;
        let obj = raw
            .as_object()
            .ok_or_else(|| D::Error::custom("value must be a single-key object"))?;
        if obj.len() != 1 {
            return Err(D::Error::custom("value must be a single-key object"));
        }
        let (k, v) = obj.iter().next().expect("len checked");
        let parsed = match k.as_str() {
            "real" => Value::Real(
                v.as_str()
                    .ok_or_else(|| D::Error::custom("real must be a string"))?
                    .parse()
                    .map_err(D::Error::custom)?,
            ),
            "str" => Value::Str(
                v.as_str()
                    .ok_or_else(|| D::Error::custom("str must be a string"))?
                    .to_string(),
            ),
            "bool" => Value::Bool(
                v.as_bool()
                    .ok_or_else(|| D::Error::custom("bool must be a boolean"))?,
            ),
            "time" => Value::Time(
                v.as_u64()
                    .ok_or_else(|| D::Error::custom("time must be a non-negative integer"))?,
            ),
            "party" => Value::Party(
                v.as_str()
                    .ok_or_else(|| D::Error::custom("party must be a string"))?
                    .to_string(),
            ),
            "code" => Value::Code(
                v.as_str()
                    .ok_or_else(|| D::Error::custom("code must be a string"))?
                    .to_string(),
            ),
            "pair" => {
                let arr = v
                    .as_array()
                    .filter(|a| a.len() == 2)
                    .ok_or_else(|| D::Error::custom("pair must be a 2-element array"))?;
                let a: Value =
                    serde_json::from_value(arr[0].clone()).map_err(D::Error::custom)?;
                let b: Value =
                    serde_json::from_value(arr[1].clone()).map_err(D::Error::custom)?;
                Value::Pair(Box::new(a), Box::new(b))
            }
            other => return Err(D::Error::custom(format!("unknown value kind `{other}`"))),
        };
        Ok(parsed)
    }
}

/// Content of a linear asset cell.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AssetValue {
    /// Divisible currency amount; never negative.
    Fungible(Fixed4),
    /// Indivisible token. `held` is false once the token has moved out; the
    /// empty slot remembers the id.
    Token { id: String, held: bool },
}

impl AssetValue {
    pub fn empty() -> AssetValue {
        AssetValue::Fungible(Fixed4::ZERO)
    }

    pub fn is_drained(&self) -> bool {
        match self {
            AssetValue::Fungible(a) => a.is_zero(),
            AssetValue::Token { held, .. } => !held,
        }
    }
}

impl fmt::Display for AssetValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AssetValue::Fungible(a) => write!(f, "{a}"),
            AssetValue::Token { id, held: true } => write!(f, "token:{id}"),
            AssetValue::Token { id, held: false } => write!(f, "token:{id} (gone)"),
        }
    }
}

/// One binding in a contract memory.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Slot {
    Val(Value),
    Asset(AssetValue),
}

/// The memory ℓ: fields, assets, bound parties and (transiently) function
/// parameters, by name.
pub type Memory = BTreeMap<String, Slot>;
