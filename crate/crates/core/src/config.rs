use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::NoiseParams;
use crate::protocol::{Context, EngineKind, MrStrategy};

/// How Bob picks his measurement context round by round.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextSchedule {
    /// `M1, M2, M1, …`
    #[default]
    Alternate,
    /// Independent fair coin between `M1` and `M2`.
    UniformRandom,
    /// `n` rounds of `M1`, then `n` of `M2`, repeating.
    Blocks(u64),
    /// `M1, M2, none, …`: the game contexts interleaved with the no-measurement control.
    Cycle,
    /// Supplied per round by the caller (interactive play).
    External,
}

fn default_odds() -> f64 {
    2.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub engine: EngineKind,
    #[serde(default)]
    pub noise: NoiseParams,
    #[serde(default)]
    pub mr_strategy: Option<MrStrategy<f64>>,
    pub rounds: u64,
    #[serde(default)]
    pub context_schedule: ContextSchedule,
    #[serde(default = "default_odds")]
    pub odds: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SessionConfig {
    pub fn quantum(noise: NoiseParams, rounds: u64, seed: u64) -> Self {
        Self {
            engine: EngineKind::Quantum,
            noise,
            mr_strategy: None,
            rounds,
            context_schedule: ContextSchedule::Alternate,
            odds: default_odds(),
            seed,
        }
    }

    pub fn macroreal(strategy: MrStrategy<f64>, rounds: u64, seed: u64) -> Self {
        Self {
            engine: EngineKind::Macroreal,
            noise: NoiseParams::ideal(),
            mr_strategy: Some(strategy),
            rounds,
            context_schedule: ContextSchedule::Alternate,
            odds: default_odds(),
            seed,
        }
    }

    pub fn with_schedule(mut self, schedule: ContextSchedule) -> Self {
        self.context_schedule = schedule;
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::InvalidConfig("rounds must be at least 1".into()));
        }
        if !(self.odds.is_finite() && self.odds > 1.0) {
            return Err(Error::InvalidConfig(format!("odds must exceed 1, got {}", self.odds)));
        }
        if let ContextSchedule::Blocks(0) = self.context_schedule {
            return Err(Error::InvalidConfig("block length must be at least 1".into()));
        }
        self.noise.validate()?;
        match (self.engine, &self.mr_strategy) {
            (EngineKind::Macroreal, None) => {
                Err(Error::InvalidConfig("engine \"macroreal\" requires an mr_strategy".into()))
            }
            (EngineKind::Quantum, Some(_)) => {
                Err(Error::InvalidConfig("mr_strategy is only valid with engine \"macroreal\"".into()))
            }
            (EngineKind::Macroreal, Some(s)) => s.validate(),
            (EngineKind::Quantum, None) => Ok(()),
        }
    }

    /// Scheduled context for a 1-based round, or `None` when the schedule is
    /// external. `coin` is consumed only by [`ContextSchedule::UniformRandom`].
    pub fn scheduled_context(&self, round_id: u64, coin: impl FnOnce() -> bool) -> Option<Context> {
        let idx = round_id.saturating_sub(1);
        match self.context_schedule {
            ContextSchedule::Alternate => Some(if idx.is_multiple_of(2) { Context::M1 } else { Context::M2 }),
            ContextSchedule::UniformRandom => Some(if coin() { Context::M1 } else { Context::M2 }),
            ContextSchedule::Blocks(n) => {
                Some(if (idx / n.max(1)).is_multiple_of(2) { Context::M1 } else { Context::M2 })
            }
            ContextSchedule::Cycle => Some([Context::M1, Context::M2, Context::NoneChosen][(idx % 3) as usize]),
            ContextSchedule::External => None,
        }
    }
}
