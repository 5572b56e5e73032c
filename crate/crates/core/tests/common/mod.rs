#![allow(dead_code)]

use std::collections::BTreeMap;

use ccd_core::design::{PeriodProbs, UserAssignment};
use ccd_core::worlds::{sample_population, Concentration, MovieWorld};
use ccd_core::{
    generate, run_burn_in, run_experiment, Assignment, Cohort, CohortSchedule, DesignKind, DesignSpec, FeatureStore,
    MatchMode, Panel, Result,
};

pub const USERS: usize = 4000;
pub const HORIZON: usize = 50;
pub const BURN_IN: usize = 10;

pub fn movie_world(population_seed: u64) -> MovieWorld {
    let prefs = sample_population(USERS, 4, Concentration::default(), 0.25, population_seed).unwrap();
    MovieWorld::new(prefs, 0.5).unwrap()
}

/// Cohort layouts used for the movie-world runs.
pub fn movie_spec(kind: DesignKind, seed: u64) -> DesignSpec {
    let mut s = DesignSpec::new(kind, USERS, HORIZON, seed);
    s.burn_in = BURN_IN;
    match kind {
        DesignKind::CcdSwitch => {
            s.fractions.cookie = 0.4;
            s.fractions.switch = 0.2;
            s.matching = MatchMode::RandomWithinCluster;
            s.assignment = Assignment::Complete { cdt_per_day: 32 };
        }
        DesignKind::CcdFreeze => {
            s.fractions.cookie = 0.4;
            s.fractions.freeze = 0.2;
            s.assignment = Assignment::Complete { cdt_per_day: 32 };
        }
        DesignKind::ClusteredCcd => {
            s.cluster_count = Some(4);
            s.leave_one_out = true;
            s.assignment = Assignment::Complete { cdt_per_day: 40 };
        }
        _ => s.assignment = Assignment::Complete { cdt_per_day: 40 },
    }
    s
}

pub struct MovieRun {
    pub schedule: CohortSchedule,
    pub panel: Panel,
    pub store: FeatureStore,
}

pub fn run_movie(world: &MovieWorld, spec: &DesignSpec) -> Result<MovieRun> {
    let store = run_burn_in(world, spec.burn_in, spec.seed);
    let clusters = world.prefs().cluster.clone();
    let schedule = generate(spec, store.snapshot(), Some(&clusters))?;
    let panel = run_experiment(world, &schedule, &store, spec.seed)?;
    Ok(MovieRun { schedule, panel, store })
}

/// Mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Every joint assignment of `n` users, each drawn independently from
/// `options`, with its probability.
pub fn enumerate(options: &[(UserAssignment, f64)], n: usize) -> Vec<(Vec<UserAssignment>, f64)> {
    let mut out = vec![(Vec::new(), 1.0)];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|(a, p)| {
                options.iter().map(move |&(o, q)| {
                    let mut a = a.clone();
                    a.push(o);
                    (a, p * q)
                })
            })
            .collect();
    }
    out
}

/// Marginal Pr(label = cohort) per period under a weighted assignment list,
/// computed for user 0 (all fixtures are exchangeable across users).
pub fn marginals(joint: &[(Vec<UserAssignment>, f64)], horizon: usize) -> Vec<PeriodProbs> {
    let total: f64 = joint.iter().map(|(_, p)| p).sum();
    (1..=horizon)
        .map(|t| {
            let mut m: BTreeMap<Cohort, f64> = BTreeMap::new();
            for (a, p) in joint {
                *m.entry(a[0].label(t)).or_default() += p / total;
            }
            m
        })
        .collect()
}
