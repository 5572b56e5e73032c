//! Small fixed-item catalogs served by a greedy posterior-mean recommender.
//!
//! Outcomes are expected watch rates rather than sampled watches, so these
//! worlds are deterministic.

use crate::model::{ActionRecord, BehaviorWorld, PreferenceState, SystemState};
use crate::rng::mix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Item {
    pub control_rate: f64,
    pub treated_rate: f64,
    pub in_house: bool,
}

impl Item {
    pub fn new(control_rate: f64, treated_rate: f64, in_house: bool) -> Self {
        Self { control_rate, treated_rate, in_house }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CatalogOutcome {
    /// Mean watch rate over the served slate.
    ServedWatchRate,
    /// Mean watch rate over in-house items in the slate; 0 if there are none.
    InHouseWatchRate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatalogWorld {
    n: usize,
    items: Vec<Item>,
    slate: usize,
    outcome: CatalogOutcome,
    jitter: f64,
    seed: u64,
}

impl CatalogWorld {
    pub fn new(n: usize, items: Vec<Item>, slate: usize, outcome: CatalogOutcome) -> Self {
        assert!(slate >= 1 && slate <= items.len(), "slate must fit the catalog");
        Self { n, items, slate, outcome, jitter: 0.0, seed: 0 }
    }

    /// Perturbs every user's item rates by a uniform draw on [-jitter, jitter].
    pub fn with_jitter(mut self, jitter: f64, seed: u64) -> Self {
        self.jitter = jitter;
        self.seed = seed;
        self
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    fn offset(&self, user: usize, item: usize) -> f64 {
        if self.jitter == 0.0 {
            return 0.0;
        }
        let u = (mix(&[self.seed, user as u64, item as u64]) >> 11) as f64 / (1u64 << 53) as f64;
        self.jitter * (2.0 * u - 1.0)
    }

    /// Items ranked by posterior mean (1 + watches) / (2 + serves), best first,
    /// ties toward the lower index.
    fn ranking(&self, features: &[f64]) -> Vec<usize> {
        let mean = |k: usize| (1.0 + features[2 * k]) / (2.0 + features[2 * k + 1]);
        let mut order: Vec<usize> = (0..self.items.len()).collect();
        order.sort_by(|&a, &b| mean(b).total_cmp(&mean(a)).then(a.cmp(&b)));
        order
    }
}

impl BehaviorWorld for CatalogWorld {
    fn population(&self) -> usize {
        self.n
    }

    fn feature_dim(&self) -> usize {
        2 * self.items.len()
    }

    fn preferences(&self, user: usize, _history: &[bool]) -> Vec<f64> {
        self.items
            .iter()
            .enumerate()
            .flat_map(|(k, it)| {
                let o = self.offset(user, k);
                [(it.control_rate + o).clamp(0.0, 1.0), (it.treated_rate + o).clamp(0.0, 1.0)]
            })
            .collect()
    }

    fn personalize(&self, features: &[f64]) -> Vec<f64> {
        features.to_vec()
    }

    fn choose(&self, state: &SystemState, prefs: &PreferenceState) -> ActionRecord {
        let served: Vec<usize> = self.ranking(&state.personalization).into_iter().take(self.slate).collect();
        let rate = |k: usize| prefs.values[2 * k + state.treated as usize];
        let mut contribution = vec![0.0; self.feature_dim()];
        let mut code = 0u32;
        for &k in &served {
            contribution[2 * k] = rate(k);
            contribution[2 * k + 1] = 1.0;
            code |= 1 << k;
        }
        let pool: Vec<usize> = match self.outcome {
            CatalogOutcome::ServedWatchRate => served,
            CatalogOutcome::InHouseWatchRate => served.into_iter().filter(|&k| self.items[k].in_house).collect(),
        };
        let outcome = if pool.is_empty() {
            0.0
        } else {
            pool.iter().map(|&k| rate(k)).sum::<f64>() / pool.len() as f64
        };
        ActionRecord { code, contribution, outcome }
    }
}

/// Two movies: an award-eligible one watched at 5% (20% annotated) and a
/// plain one watched at 10% either way.
pub fn figure2_world(n: usize) -> CatalogWorld {
    CatalogWorld::new(
        n,
        vec![Item::new(0.05, 0.20, true), Item::new(0.10, 0.10, false)],
        1,
        CatalogOutcome::ServedWatchRate,
    )
}

/// In-house studio catalogs measured by in-house watch rate. Items are
/// (plain in-house, award-eligible in-house, external), two served per
/// period. In the first, treated histories swap the weak plain in-house title
/// for the annotated one. In the second, the annotated title replaces the
/// external one next to a strong plain in-house title, lowering the in-house
/// average.
pub fn appendix_d_worlds(n: usize) -> (CatalogWorld, CatalogWorld) {
    let positive = CatalogWorld::new(
        n,
        vec![Item::new(0.10, 0.10, true), Item::new(0.05, 0.40, true), Item::new(0.30, 0.30, false)],
        2,
        CatalogOutcome::InHouseWatchRate,
    );
    let negative = CatalogWorld::new(
        n,
        vec![Item::new(0.40, 0.40, true), Item::new(0.05, 0.30, true), Item::new(0.20, 0.20, false)],
        2,
        CatalogOutcome::InHouseWatchRate,
    );
    (positive, negative)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Counterfactual;
    use crate::rng::StreamKey;

    #[test]
    fn ranking_breaks_ties_toward_lower_index() {
        let w = figure2_world(1);
        assert_eq!(w.ranking(&[0.0; 4]), vec![0, 1]);
        assert_eq!(w.ranking(&[0.0, 3.0, 0.0, 0.0]), vec![1, 0]);
    }

    #[test]
    fn in_house_rate_ignores_external_items() {
        let (pos, _) = appendix_d_worlds(1);
        // features make the external title and the plain in-house title lead
        let f = [1.0, 2.0, 0.0, 8.0, 2.0, 2.0];
        let state = SystemState { treated: true, personalization: f.to_vec() };
        let prefs = PreferenceState { values: pos.preferences(0, &[]), stream: StreamKey::new(0, 0, 0) };
        let rec = pos.choose(&state, &prefs);
        assert_eq!(rec.code, 0b101);
        assert!((rec.outcome - 0.10).abs() < 1e-15);
    }

    #[test]
    fn figure2_oracle_has_no_learning_and_converges() {
        let w = figure2_world(4);
        let truth = Counterfactual::with_burn_in(&w, 0, 10).effects(60).unwrap();
        assert!(truth.user_learning.values().iter().all(|&v| v == 0.0));
        // the control path still re-tries the annotated title now and then
        let settled = truth.personalization.values()[40..].iter().filter(|&&v| (v - 0.10).abs() < 1e-12).count();
        assert!(settled >= 18, "{settled}");
        assert!((truth.total.window_mean(41, 60) - 0.10).abs() < 0.01);
        assert!(truth.residual() < 1e-12);
    }
}
