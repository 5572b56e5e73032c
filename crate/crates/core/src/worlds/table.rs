//! Hashed potential-outcome tables for exhaustive enumeration.
//!
//! Every outcome is a dyadic value read from a hash of the user, the step,
//! the treatment, the served vector, and the treatment-history code, so any
//! counterfactual can be evaluated without storing a table.

use crate::model::{ActionRecord, BehaviorWorld, PreferenceState, SystemState};
use crate::rng::mix;

/// Which additive structure the outcome table has.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Separability {
    /// One joint draw per (state, preferences).
    None,
    /// `A(w, p) + B(u)`: preference effects do not depend on the state.
    Preferences,
    /// `D(w) + C(p) + B(u)`: direct effects do not depend on personalization.
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableWorld {
    n: usize,
    periods: usize,
    mode: Separability,
    seed: u64,
    learning: bool,
}

impl TableWorld {
    pub fn new(n: usize, periods: usize, mode: Separability, seed: u64) -> Self {
        Self { n, periods, mode, seed, learning: true }
    }

    /// Makes preferences ignore treatment history.
    pub fn without_learning(mut self) -> Self {
        self.learning = false;
        self
    }

    fn unit(&self, words: &[u64]) -> f64 {
        let mut all = vec![self.seed];
        all.extend_from_slice(words);
        // 16-bit dyadic values keep sums exact
        (mix(&all) >> 48) as f64 / 65536.0
    }
}

fn vector_bits(v: &[f64]) -> u64 {
    mix(&v.iter().map(|x| x.to_bits()).collect::<Vec<_>>())
}

impl BehaviorWorld for TableWorld {
    fn population(&self) -> usize {
        self.n
    }

    fn feature_dim(&self) -> usize {
        2
    }

    fn max_periods(&self) -> Option<usize> {
        Some(self.periods)
    }

    fn preferences(&self, _user: usize, history: &[bool]) -> Vec<f64> {
        if !self.learning {
            return vec![0.0];
        }
        let code: u64 = history.iter().enumerate().map(|(k, &b)| (b as u64) << k).sum();
        vec![code as f64]
    }

    fn personalize(&self, features: &[f64]) -> Vec<f64> {
        features.to_vec()
    }

    fn choose(&self, state: &SystemState, prefs: &PreferenceState) -> ActionRecord {
        let u = prefs.stream.user as u64;
        let s = prefs.stream.step as u64;
        let w = state.treated as u64;
        let p = vector_bits(&state.personalization);
        let c = prefs.values[0].to_bits();
        let outcome = match self.mode {
            Separability::None => self.unit(&[1, u, s, w, p, c]),
            Separability::Preferences => self.unit(&[2, u, s, w, p]) + self.unit(&[3, u, s, c]),
            Separability::Full => self.unit(&[4, u, s, w]) + self.unit(&[5, u, s, p]) + self.unit(&[3, u, s, c]),
        };
        let bit = (mix(&[self.seed, 6, u, s, w, p, c]) & 1) as f64;
        ActionRecord { code: bit as u32, contribution: vec![bit, 1.0 - bit], outcome }
    }
}
