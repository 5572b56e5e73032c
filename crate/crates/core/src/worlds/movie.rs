//! Two-category movie recommendation world with a Thompson-sampling
//! recommender and an award annotation treatment.

use std::io::Write;

use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::design::{CohortSchedule, UserAssignment};
use crate::engine::{run_burn_in, run_experiment};
use crate::error::{Error, Result};
use crate::model::{ActionRecord, BehaviorWorld, PreferenceState, SystemState};
use crate::rng::{purpose, rng_from};

const TAG_CENTERS: u64 = 0xCE17;
const TAG_PREFS: u64 = 0x9EF5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Award,
    Standard,
}

impl Category {
    pub fn code(self) -> u32 {
        match self {
            Category::Award => 0,
            Category::Standard => 1,
        }
    }
}

/// Watches and recommendations per category.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CategoryCounts {
    pub award_watches: f64,
    pub award_trials: f64,
    pub standard_watches: f64,
    pub standard_trials: f64,
}

impl CategoryCounts {
    /// Reads the feature layout `[aw_watches, aw_trials, s_watches, s_trials]`.
    pub fn from_features(f: &[f64]) -> Self {
        Self { award_watches: f[0], award_trials: f[1], standard_watches: f[2], standard_trials: f[3] }
    }
}

/// One Beta(1 + watches, 1 + declines) draw per category; the larger wins,
/// ties going to the award category.
pub fn thompson_recommend<R: Rng + ?Sized>(counts: &CategoryCounts, rng: &mut R) -> Category {
    let draw = |w: f64, n: f64, rng: &mut R| {
        Beta::new(1.0 + w, 1.0 + (n - w).max(0.0)).expect("positive shape parameters").sample(rng)
    };
    let aw = draw(counts.award_watches, counts.award_trials, rng);
    let s = draw(counts.standard_watches, counts.standard_trials, rng);
    if aw >= s {
        Category::Award
    } else {
        Category::Standard
    }
}

/// Watch probability: the annotation adds `lift` to award movies only.
pub fn watch_probability(u_award: f64, u_standard: f64, category: Category, treated: bool, lift: f64) -> f64 {
    match category {
        Category::Standard => u_standard,
        Category::Award => (u_award + if treated { lift } else { 0.0 }).min(1.0),
    }
}

/// How the Beta shape-parameter sum depends on the cluster mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Concentration {
    /// Shape sum `scale / (1 - mean)`.
    InverseComplement { scale: f64 },
    Fixed(f64),
}

impl Default for Concentration {
    fn default() -> Self {
        Concentration::InverseComplement { scale: 100.0 }
    }
}

impl Concentration {
    pub fn shape_sum(self, mean: f64) -> f64 {
        match self {
            Concentration::InverseComplement { scale } => scale / (1.0 - mean),
            Concentration::Fixed(v) => v,
        }
    }

    /// Beta (alpha, beta) for a given mean.
    pub fn shapes(self, mean: f64) -> (f64, f64) {
        let nu = self.shape_sum(mean);
        (mean * nu, (1.0 - mean) * nu)
    }
}

/// Per-user watch propensities and their generating clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct MoviePrefs {
    pub award: Vec<f64>,
    pub standard: Vec<f64>,
    pub cluster: Vec<usize>,
    /// Shifted cluster centers (award, standard).
    pub centers: Vec<[f64; 2]>,
}

impl MoviePrefs {
    pub fn n(&self) -> usize {
        self.award.len()
    }

    /// Builds preferences from explicit centers without shifting.
    pub fn from_centers(n: usize, centers: &[[f64; 2]], rule: Concentration, seed: u64) -> Result<Self> {
        let k = centers.len();
        if k == 0 || n % k != 0 {
            return Err(Error::InvalidWorld(format!("{k} clusters do not divide {n} users")));
        }
        let size = n / k;
        let mut award = Vec::with_capacity(n);
        let mut standard = Vec::with_capacity(n);
        let mut cluster = Vec::with_capacity(n);
        for i in 0..n {
            let c = i / size;
            let mut rng = rng_from(&[seed, TAG_PREFS, i as u64]);
            let mut draw = |mean: f64| -> Result<f64> {
                let (a, b) = rule.shapes(mean);
                Ok(Beta::new(a, b)
                    .map_err(|e| Error::InvalidWorld(format!("beta({a}, {b}): {e}")))?
                    .sample(&mut rng))
            };
            award.push(draw(centers[c][0])?);
            standard.push(draw(centers[c][1])?);
            cluster.push(c);
        }
        Ok(Self { award, standard, cluster, centers: centers.to_vec() })
    }

    /// Population dump: `user,cluster,u_aw,u_s`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["user", "cluster", "u_aw", "u_s"])?;
        for i in 0..self.n() {
            w.write_record([
                i.to_string(),
                self.cluster[i].to_string(),
                self.award[i].to_string(),
                self.standard[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shifts centers so each coordinate averages `target`, clamping into
/// [0.01, 0.99] and repeating the shift until the clamp no longer moves the
/// mean.
fn shift_centers(centers: &mut [[f64; 2]], target: f64) -> Result<()> {
    for m in 0..2 {
        for _ in 0..100 {
            let mean = centers.iter().map(|c| c[m]).sum::<f64>() / centers.len() as f64;
            let gap = target - mean;
            if gap.abs() < 1e-15 {
                break;
            }
            for c in centers.iter_mut() {
                c[m] = (c[m] + gap).clamp(0.01, 0.99);
            }
        }
        let mean = centers.iter().map(|c| c[m]).sum::<f64>() / centers.len() as f64;
        if (mean - target).abs() > 1e-9 {
            return Err(Error::InvalidWorld(format!(
                "centers cannot be shifted to mean {target} without collapsing to the boundary"
            )));
        }
    }
    Ok(())
}

/// Draws `k` centers on [0.05, 0.5]^2, shifts them to average `target_mean`,
/// and samples each user's preferences around their cluster center.
pub fn sample_population(n: usize, k: usize, rule: Concentration, target_mean: f64, seed: u64) -> Result<MoviePrefs> {
    if k == 0 || n % k != 0 {
        return Err(Error::InvalidWorld(format!("{k} clusters do not divide {n} users")));
    }
    let mut rng = rng_from(&[seed, TAG_CENTERS]);
    let mut centers: Vec<[f64; 2]> =
        (0..k).map(|_| [rng.random_range(0.05..0.5), rng.random_range(0.05..0.5)]).collect();
    shift_centers(&mut centers, target_mean)?;
    MoviePrefs::from_centers(n, &centers, rule, seed)
}

/// Optional user learning: treatment raises award propensity by
/// `shift * (1 - exp(-rate * k))` after `k` treated periods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AwardLearning {
    pub shift: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MovieWorld {
    prefs: MoviePrefs,
    lift: f64,
    personalized: bool,
    learning: Option<AwardLearning>,
}

impl MovieWorld {
    pub fn new(prefs: MoviePrefs, lift: f64) -> Result<Self> {
        if !(lift >= 0.0) {
            return Err(Error::InvalidWorld(format!("lift must be non-negative, got {lift}")));
        }
        Ok(Self { prefs, lift, personalized: true, learning: None })
    }

    /// Serves every user the prior instead of their history.
    pub fn without_personalization(mut self) -> Self {
        self.personalized = false;
        self
    }

    pub fn with_learning(mut self, learning: AwardLearning) -> Self {
        self.learning = Some(learning);
        self
    }

    pub fn prefs(&self) -> &MoviePrefs {
        &self.prefs
    }

    pub fn lift(&self) -> f64 {
        self.lift
    }

    pub fn watch_probability(&self, user: usize, category: Category, treated: bool) -> f64 {
        watch_probability(self.prefs.award[user], self.prefs.standard[user], category, treated, self.lift)
    }
}

impl BehaviorWorld for MovieWorld {
    fn population(&self) -> usize {
        self.prefs.n()
    }

    fn feature_dim(&self) -> usize {
        4
    }

    fn preferences(&self, user: usize, history: &[bool]) -> Vec<f64> {
        let mut award = self.prefs.award[user];
        if let Some(l) = self.learning {
            let k = history.iter().filter(|&&b| b).count() as f64;
            award = (award + l.shift * (1.0 - (-l.rate * k).exp())).clamp(0.0, 1.0);
        }
        vec![award, self.prefs.standard[user]]
    }

    fn personalize(&self, features: &[f64]) -> Vec<f64> {
        if self.personalized {
            features.to_vec()
        } else {
            vec![0.0; 4]
        }
    }

    fn choose(&self, state: &SystemState, prefs: &PreferenceState) -> ActionRecord {
        let counts = CategoryCounts::from_features(&state.personalization);
        let category = thompson_recommend(&counts, &mut prefs.stream.rng(purpose::RECOMMEND));
        let p = watch_probability(prefs.values[0], prefs.values[1], category, state.treated, self.lift);
        let watched = (prefs.stream.uniform(purpose::WATCH) < p) as u8 as f64;
        let contribution = match category {
            Category::Award => vec![watched, 1.0, 0.0, 0.0],
            Category::Standard => vec![0.0, 0.0, watched, 1.0],
        };
        ActionRecord { code: category.code(), contribution, outcome: watched }
    }
}

/// Per-user final-period watch gap between a run treating everyone
/// throughout and a run treating everyone only in the final period.
pub fn asymptotic_personalization_gaps(
    world: &MovieWorld,
    burn_in: usize,
    horizon: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if horizon == 0 {
        return Err(Error::InvalidHorizon(0));
    }
    let n = world.population();
    let store = run_burn_in(world, burn_in, seed);
    let always = CohortSchedule::uniform(n, burn_in, &vec![true; horizon], UserAssignment::Treated);
    let mut last = vec![false; horizon];
    last[horizon - 1] = true;
    let late = CohortSchedule::uniform(n, burn_in, &last, UserAssignment::Control);
    let a = run_experiment(world, &always, &store, seed)?;
    let b = run_experiment(world, &late, &store, seed)?;
    Ok((0..n).map(|i| a.outcome(i, horizon) - b.outcome(i, horizon)).collect())
}

/// Mean of [`asymptotic_personalization_gaps`].
pub fn asymptotic_personalization_oracle(
    world: &MovieWorld,
    burn_in: usize,
    horizon: usize,
    seed: u64,
) -> Result<f64> {
    let gaps = asymptotic_personalization_gaps(world, burn_in, horizon, seed)?;
    Ok(gaps.iter().sum::<f64>() / gaps.len() as f64)
}
