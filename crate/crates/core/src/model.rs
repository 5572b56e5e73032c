//! Potential outcomes and exact counterfactual effects.
//!
//! A user's outcome at period `t` depends on the current treatment, on
//! preferences shaped by past treatments, and on a personalization state
//! computed from past actions. The oracle here evaluates any mix of those
//! histories by re-simulating a user's action path, sharing random streams
//! across arms so the four effects decompose exactly.

use rayon::prelude::*;

use crate::engine::{run_burn_in, FeatureStore};
use crate::error::{Error, Result};
use crate::rng::StreamKey;
use crate::series::{EffectKind, EffectSeries};

/// Ordered treatment indicators, one per elapsed period.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TreatmentHistory {
    bits: Vec<bool>,
}

impl TreatmentHistory {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn ones(len: usize) -> Self {
        Self { bits: vec![true; len] }
    }

    pub fn zeros(len: usize) -> Self {
        Self { bits: vec![false; len] }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn treated_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Preferences at one period, plus the stream that resolves any randomness
/// in the user's choice. Given both, actions are deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceState {
    pub values: Vec<f64>,
    pub stream: StreamKey,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub treated: bool,
    pub personalization: Vec<f64>,
}

/// What a user did in one period.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionRecord {
    /// World-specific action code (e.g. the category served).
    pub code: u32,
    /// Additive update to the user's personalization features.
    pub contribution: Vec<f64>,
    pub outcome: f64,
}

/// A user and system model that the engine and the oracle can both drive.
///
/// `history` passed to [`BehaviorWorld::preferences`] holds the experiment
/// treatments strictly before the current period; burn-in periods are control
/// and pass an empty history. Features are running sums of action
/// contributions and start at zero.
pub trait BehaviorWorld: Sync {
    fn population(&self) -> usize;

    fn feature_dim(&self) -> usize;

    /// Largest experiment period the world can evaluate, if bounded.
    fn max_periods(&self) -> Option<usize> {
        None
    }

    fn preferences(&self, user: usize, history: &[bool]) -> Vec<f64>;

    fn personalize(&self, features: &[f64]) -> Vec<f64>;

    fn system(&self, treated: bool, personalization: Vec<f64>) -> SystemState {
        SystemState { treated, personalization }
    }

    fn choose(&self, state: &SystemState, prefs: &PreferenceState) -> ActionRecord;

    /// The vector served to a user with no history.
    fn default_personalization(&self) -> Vec<f64> {
        self.personalize(&vec![0.0; self.feature_dim()])
    }
}

/// One simulated user-period.
pub(crate) fn act(
    world: &dyn BehaviorWorld,
    key: StreamKey,
    treated: bool,
    features: &[f64],
    history: &[bool],
) -> (Vec<f64>, ActionRecord) {
    let served = world.personalize(features);
    let state = world.system(treated, served);
    let prefs = PreferenceState { values: world.preferences(key.user, history), stream: key };
    let rec = world.choose(&state, &prefs);
    (state.personalization, rec)
}

pub(crate) fn accumulate(features: &mut [f64], contribution: &[f64]) {
    for (f, c) in features.iter_mut().zip(contribution) {
        *f += c;
    }
}

/// Exact counterfactual evaluation starting from a feature store.
pub struct Counterfactual<'w> {
    world: &'w dyn BehaviorWorld,
    seed: u64,
    start: FeatureStore,
}

/// Per-user arms at each period: `a` fully treated, `b` treated preferences
/// with control personalization, `c` control history but treated now, `d`
/// fully control.
#[derive(Debug, Clone, Default)]
pub struct UserArms {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct EffectTruth {
    pub total: EffectSeries,
    pub user_learning: EffectSeries,
    pub personalization: EffectSeries,
    pub direct: EffectSeries,
}

impl EffectTruth {
    pub fn get(&self, kind: EffectKind) -> &EffectSeries {
        match kind {
            EffectKind::Total => &self.total,
            EffectKind::UserLearning => &self.user_learning,
            EffectKind::Personalization => &self.personalization,
            EffectKind::Direct => &self.direct,
        }
    }

    pub fn residual(&self) -> f64 {
        crate::series::decomposition_residual(
            &self.total,
            &self.user_learning,
            &self.personalization,
            &self.direct,
        )
        .expect("oracle series share a horizon")
    }
}

impl<'w> Counterfactual<'w> {
    /// Oracle with no pre-experiment periods.
    pub fn new(world: &'w dyn BehaviorWorld, seed: u64) -> Self {
        Self::with_burn_in(world, seed, 0)
    }

    /// Oracle whose experiment starts after `burn_in` control periods, run
    /// with the same seed as the engine would use.
    pub fn with_burn_in(world: &'w dyn BehaviorWorld, seed: u64, burn_in: usize) -> Self {
        let start = run_burn_in(world, burn_in, seed);
        Self { world, seed, start }
    }

    pub fn from_store(world: &'w dyn BehaviorWorld, seed: u64, start: FeatureStore) -> Self {
        Self { world, seed, start }
    }

    pub fn store(&self) -> &FeatureStore {
        &self.start
    }

    fn key(&self, user: usize, t: usize) -> StreamKey {
        StreamKey::new(self.seed, user, self.start.start_step() + t - 1)
    }

    fn check_period(&self, t: usize) -> Result<()> {
        let max = self.world.max_periods();
        if t == 0 || max.is_some_and(|m| t > m) {
            return Err(Error::PeriodOutOfRange {
                period: t,
                valid: match max {
                    Some(m) => format!("1..={m}"),
                    None => "1..".into(),
                },
            });
        }
        Ok(())
    }

    fn check_user(&self, user: usize) -> Result<()> {
        let n = self.world.population();
        if user >= n {
            return Err(Error::UserOutOfRange { user, n });
        }
        Ok(())
    }

    /// Features at the start of periods 1..=bits.len()+1 along `bits`.
    fn feature_path(&self, user: usize, bits: &[bool]) -> Vec<Vec<f64>> {
        let mut f = self.start.own(user).to_vec();
        let mut out = Vec::with_capacity(bits.len() + 1);
        out.push(f.clone());
        for (k, &w) in bits.iter().enumerate() {
            let (_, rec) = act(self.world, self.key(user, k + 1), w, &f, &bits[..k]);
            accumulate(&mut f, &rec.contribution);
            out.push(f.clone());
        }
        out
    }

    /// Outcome at `t` with preferences shaped by `history` and personalization
    /// computed from the action path simulated under `personalization_history`.
    pub fn potential_outcome(
        &self,
        user: usize,
        t: usize,
        current: bool,
        history: &TreatmentHistory,
        personalization_history: &TreatmentHistory,
    ) -> Result<f64> {
        self.check_period(t)?;
        self.check_user(user)?;
        for h in [history, personalization_history] {
            if h.len() != t - 1 {
                return Err(Error::HistoryLength { expected: t - 1, actual: h.len() });
            }
        }
        let f = self
            .feature_path(user, personalization_history.bits())
            .pop()
            .expect("path has a final entry");
        let state = self.world.system(current, self.world.personalize(&f));
        let prefs = PreferenceState {
            values: self.world.preferences(user, history.bits()),
            stream: self.key(user, t),
        };
        Ok(self.world.choose(&state, &prefs).outcome)
    }

    /// All four arms for one user over periods 1..=horizon.
    pub fn user_arms(&self, user: usize, horizon: usize) -> Result<UserArms> {
        if horizon == 0 {
            return Err(Error::InvalidHorizon(0));
        }
        self.check_period(horizon)?;
        self.check_user(user)?;
        let ones = vec![true; horizon - 1];
        let zeros = vec![false; horizon - 1];
        let treated_path = self.feature_path(user, &ones);
        let control_path = self.feature_path(user, &zeros);
        let mut arms = UserArms::default();
        for t in 1..=horizon {
            let key = self.key(user, t);
            let p1 = self.world.personalize(&treated_path[t - 1]);
            let p0 = self.world.personalize(&control_path[t - 1]);
            let u1 = PreferenceState { values: self.world.preferences(user, &ones[..t - 1]), stream: key };
            let u0 = PreferenceState { values: self.world.preferences(user, &zeros[..t - 1]), stream: key };
            let y = |treated: bool, p: &Vec<f64>, u: &PreferenceState| {
                self.world.choose(&self.world.system(treated, p.clone()), u).outcome
            };
            arms.a.push(y(true, &p1, &u1));
            arms.b.push(y(true, &p0, &u1));
            arms.c.push(y(true, &p0, &u0));
            arms.d.push(y(false, &p0, &u0));
        }
        Ok(arms)
    }

    /// Population-average effects for every kind, summed in user order.
    pub fn effects(&self, horizon: usize) -> Result<EffectTruth> {
        let n = self.world.population();
        let arms: Vec<UserArms> = (0..n)
            .into_par_iter()
            .map(|i| self.user_arms(i, horizon))
            .collect::<Result<_>>()?;
        let mut sums = [vec![0.0; horizon], vec![0.0; horizon], vec![0.0; horizon], vec![0.0; horizon]];
        for u in &arms {
            for t in 0..horizon {
                sums[0][t] += u.a[t] - u.d[t];
                sums[1][t] += u.b[t] - u.c[t];
                sums[2][t] += u.a[t] - u.b[t];
                sums[3][t] += u.c[t] - u.d[t];
            }
        }
        let scale = |v: &Vec<f64>| v.iter().map(|x| x / n as f64).collect::<Vec<_>>();
        Ok(EffectTruth {
            total: EffectSeries::new(EffectKind::Total, scale(&sums[0])),
            user_learning: EffectSeries::new(EffectKind::UserLearning, scale(&sums[1])),
            personalization: EffectSeries::new(EffectKind::Personalization, scale(&sums[2])),
            direct: EffectSeries::new(EffectKind::Direct, scale(&sums[3])),
        })
    }

    pub fn effect_series(&self, horizon: usize, kind: EffectKind) -> Result<EffectSeries> {
        Ok(self.effects(horizon)?.get(kind).clone())
    }

    /// Mean over users of |[Y(s,U1) − Y(s,U0)] − [Y(s',U1) − Y(s',U0)]| at `t`.
    pub fn separability_gap(&self, t: usize, states: (&SystemState, &SystemState)) -> Result<f64> {
        self.check_period(t)?;
        let n = self.world.population();
        let ones = vec![true; t - 1];
        let zeros = vec![false; t - 1];
        let gaps: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let key = self.key(i, t);
                let u1 = PreferenceState { values: self.world.preferences(i, &ones), stream: key };
                let u0 = PreferenceState { values: self.world.preferences(i, &zeros), stream: key };
                let lift = |s: &SystemState| {
                    self.world.choose(s, &u1).outcome - self.world.choose(s, &u0).outcome
                };
                (lift(states.0) - lift(states.1)).abs()
            })
            .collect();
        Ok(gaps.iter().sum::<f64>() / n as f64)
    }
}

/// Exact effect series of one kind with no burn-in.
pub fn effect_series_oracle(
    world: &dyn BehaviorWorld,
    horizon: usize,
    kind: EffectKind,
    seed: u64,
) -> Result<EffectSeries> {
    if horizon == 0 {
        return Err(Error::InvalidHorizon(0));
    }
    Counterfactual::new(world, seed).effect_series(horizon, kind)
}

pub fn separability_gap(
    world: &dyn BehaviorWorld,
    t: usize,
    states: (&SystemState, &SystemState),
    seed: u64,
) -> Result<f64> {
    Counterfactual::new(world, seed).separability_gap(t, states)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two users, outcomes read from a hand-written table indexed by
    /// (user, current, past treatment) at t = 2. Personalization is inert.
    struct Tabulated;

    const TABLE: [[[f64; 2]; 2]; 2] = [[[0.1, 0.4], [0.7, 0.9]], [[0.2, 0.3], [0.5, 1.5]]];

    impl BehaviorWorld for Tabulated {
        fn population(&self) -> usize {
            2
        }
        fn feature_dim(&self) -> usize {
            1
        }
        fn max_periods(&self) -> Option<usize> {
            Some(2)
        }
        fn preferences(&self, _user: usize, history: &[bool]) -> Vec<f64> {
            vec![history.first().map_or(0.0, |&b| b as u8 as f64)]
        }
        fn personalize(&self, _features: &[f64]) -> Vec<f64> {
            vec![0.0]
        }
        fn choose(&self, state: &SystemState, prefs: &PreferenceState) -> ActionRecord {
            let u = prefs.stream.user;
            let past = prefs.values[0] as usize;
            ActionRecord {
                code: 0,
                contribution: vec![1.0],
                outcome: TABLE[u][state.treated as usize][past],
            }
        }
    }

    #[test]
    fn reads_each_table_entry() {
        let world = Tabulated;
        let cf = Counterfactual::new(&world, 3);
        for u in 0..2 {
            for cur in [false, true] {
                for past in [false, true] {
                    let h = TreatmentHistory::new(vec![past]);
                    let y = cf.potential_outcome(u, 2, cur, &h, &h).unwrap();
                    assert_eq!(y, TABLE[u][cur as usize][past as usize]);
                }
            }
        }
    }

    #[test]
    fn validates_arguments() {
        let world = Tabulated;
        let cf = Counterfactual::new(&world, 3);
        let empty = TreatmentHistory::default();
        let one = TreatmentHistory::zeros(1);
        assert!(matches!(
            cf.potential_outcome(0, 0, true, &empty, &empty),
            Err(Error::PeriodOutOfRange { .. })
        ));
        assert!(matches!(
            cf.potential_outcome(0, 3, true, &TreatmentHistory::zeros(2), &TreatmentHistory::zeros(2)),
            Err(Error::PeriodOutOfRange { .. })
        ));
        assert!(matches!(
            cf.potential_outcome(0, 2, true, &empty, &one),
            Err(Error::HistoryLength { expected: 1, actual: 0 })
        ));
        assert!(matches!(
            cf.potential_outcome(5, 1, true, &empty, &empty),
            Err(Error::UserOutOfRange { .. })
        ));
        assert!(matches!(cf.effects(0), Err(Error::InvalidHorizon(0))));
    }

    #[test]
    fn effects_match_table_differences() {
        let world = Tabulated;
        let truth = Counterfactual::new(&world, 3).effects(2).unwrap();
        // personalization is inert, so learning is Y(1, past=1) - Y(1, past=0)
        let learning = ((0.9 - 0.7) + (1.5 - 0.5)) / 2.0;
        let direct = ((0.7 - 0.1) + (0.5 - 0.2)) / 2.0;
        assert!((truth.user_learning.at(2) - learning).abs() < 1e-15);
        assert!((truth.direct.at(2) - direct).abs() < 1e-15);
        assert_eq!(truth.personalization.values(), &[0.0, 0.0]);
        assert!(truth.residual() < 1e-15);
    }

    #[test]
    fn separability_gap_of_inert_states_is_zero() {
        let world = Tabulated;
        let s = SystemState { treated: true, personalization: vec![0.0] };
        assert_eq!(separability_gap(&world, 2, (&s, &s), 1).unwrap(), 0.0);
    }
}
