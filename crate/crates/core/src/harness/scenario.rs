use crate::error::{Error, Result};
use crate::estimation::{FilterKind, TriggerPolicy};
use crate::model::SystemModel;

/// Everything needed to reproduce a batch of trajectories.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: SystemModel,
    pub trigger: TriggerPolicy,
    pub filter: FilterKind,
    pub horizon: usize,
    pub runs: usize,
    pub seed: u64,
    /// Steps discarded before stationary time averages.
    pub burn_in: usize,
    /// Plant steps simulated before `k = 0`; the filter prior is propagated
    /// alongside so it stays exact.
    pub preroll: usize,
}

impl Scenario {
    /// Scenario with the natural filter for `trigger`, one run of 100 steps.
    pub fn new(model: SystemModel, trigger: TriggerPolicy) -> Result<Self> {
        let filter = FilterKind::for_trigger(&trigger);
        Self::with_filter(model, trigger, filter)
    }

    pub fn with_filter(model: SystemModel, trigger: TriggerPolicy, filter: FilterKind) -> Result<Self> {
        let s = Self {
            model,
            trigger,
            filter,
            horizon: 100,
            runs: 1,
            seed: 0,
            burn_in: 0,
            preroll: 0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn runs(mut self, runs: usize) -> Self {
        self.runs = runs;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn preroll(mut self, preroll: usize) -> Self {
        self.preroll = preroll;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.trigger.validate(self.model.m())?;
        if !self.filter.accepts(&self.trigger) {
            return Err(Error::InconsistentArgs(format!(
                "filter {} cannot run with trigger {}",
                self.filter.name(),
                self.trigger.name()
            )));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be positive".into()));
        }
        if self.runs == 0 {
            return Err(Error::InvalidParameter("runs must be positive".into()));
        }
        Ok(())
    }
}
