//! Bounded universes: the finite alphabets and horizon a checker run closes
//! over. Definition-level bisimilarity quantifies over all values and all
//! future instants; a universe makes that decidable at desk scale.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::runtime::{AgreeLabel, CallLabel};

pub const DEFAULT_MAX_BLOCK: usize = 8;
pub const DEFAULT_NODE_CAP: usize = 50_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Universe {
    /// How many clock advances the exploration follows from its start.
    pub horizon: u64,
    /// Concrete agreement labels to close each node under.
    #[serde(default)]
    pub agrees: Vec<AgreeLabel>,
    /// Concrete call labels to close each node under.
    #[serde(default)]
    pub calls: Vec<CallLabel>,
    /// Cap on observable labels per tick-block in the bisimulation game.
    #[serde(default = "default_max_block")]
    pub max_block: usize,
    /// Cap on explored configurations before giving up with ExplosionError.
    #[serde(default = "default_node_cap")]
    pub node_cap: usize,
}

fn default_max_block() -> usize {
    DEFAULT_MAX_BLOCK
}

fn default_node_cap() -> usize {
    DEFAULT_NODE_CAP
}

#[derive(Debug, Error)]
pub enum UniverseError {
    #[error("bad universe file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("universe horizon must be at least 1")]
    ZeroHorizon,
}

impl Universe {
    pub fn new(horizon: u64, agrees: Vec<AgreeLabel>, calls: Vec<CallLabel>) -> Universe {
        Universe {
            horizon,
            agrees,
            calls,
            max_block: DEFAULT_MAX_BLOCK,
            node_cap: DEFAULT_NODE_CAP,
        }
    }

    pub fn from_json(text: &str) -> Result<Universe, UniverseError> {
        let u: Universe = serde_json::from_str(text)?;
        if u.horizon == 0 {
            return Err(UniverseError::ZeroHorizon);
        }
        Ok(u)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("universe serialization cannot fail")
    }

    /// Apply the STIPULA_NODE_CAP environment override, when set and valid.
    pub fn with_env_node_cap(mut self) -> Universe {
        if let Ok(v) = std::env::var("STIPULA_NODE_CAP") {
            if let Ok(cap) = v.parse::<usize>() {
                if cap > 0 {
                    self.node_cap = cap;
                }
            }
        }
        self
    }
}
