//! Continuous-outcome world with a shrunk-mean personalization response.
//!
//! `y = u_i + learning(k) + direct * w + response * (p - prior_mean) + noise`,
//! where `p` is the served shrunk mean of past outcomes and `k` counts past
//! treated periods.

use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{ActionRecord, BehaviorWorld, PreferenceState, SystemState};
use crate::rng::{purpose, rng_from};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSpec {
    pub n: usize,
    pub prior_mean: f64,
    pub baseline_sd: f64,
    pub direct: f64,
    pub response: f64,
    pub learning: f64,
    pub learning_rate: f64,
    pub noise_sd: f64,
    /// Pseudo-count pulling the personalization mean toward `prior_mean`.
    pub prior_strength: f64,
    pub seed: u64,
}

impl Default for LinearSpec {
    fn default() -> Self {
        Self {
            n: 1000,
            prior_mean: 1.0,
            baseline_sd: 0.2,
            direct: 0.5,
            response: 0.5,
            learning: 0.0,
            learning_rate: 0.1,
            noise_sd: 0.5,
            prior_strength: 5.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearWorld {
    spec: LinearSpec,
    baseline: Vec<f64>,
}

impl LinearWorld {
    pub fn new(spec: LinearSpec) -> Result<Self> {
        if spec.noise_sd < 0.0 || spec.prior_strength <= 0.0 || spec.baseline_sd < 0.0 {
            return Err(Error::InvalidWorld("noise and baseline sd must be non-negative, prior strength positive".into()));
        }
        let dist = Normal::new(spec.prior_mean, spec.baseline_sd).map_err(|e| Error::InvalidWorld(e.to_string()))?;
        let baseline = (0..spec.n).map(|i| dist.sample(&mut rng_from(&[spec.seed, 0xBA5E, i as u64]))).collect();
        Ok(Self { spec, baseline })
    }

    pub fn spec(&self) -> &LinearSpec {
        &self.spec
    }
}

impl BehaviorWorld for LinearWorld {
    fn population(&self) -> usize {
        self.spec.n
    }

    fn feature_dim(&self) -> usize {
        2
    }

    fn preferences(&self, user: usize, history: &[bool]) -> Vec<f64> {
        let k = history.iter().filter(|&&b| b).count() as f64;
        vec![self.baseline[user] + self.spec.learning * (1.0 - (-self.spec.learning_rate * k).exp())]
    }

    fn personalize(&self, features: &[f64]) -> Vec<f64> {
        let m = self.spec.prior_strength;
        vec![(features[0] + m * self.spec.prior_mean) / (features[1] + m)]
    }

    fn choose(&self, state: &SystemState, prefs: &PreferenceState) -> ActionRecord {
        let s = &self.spec;
        let eps: f64 = StandardNormal.sample(&mut prefs.stream.rng(purpose::NOISE));
        let y = prefs.values[0]
            + s.direct * state.treated as u8 as f64
            + s.response * (state.personalization[0] - s.prior_mean)
            + s.noise_sd * eps;
        ActionRecord { code: 0, contribution: vec![y, 1.0], outcome: y }
    }
}
