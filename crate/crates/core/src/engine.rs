//! Period-by-period execution of a schedule against a world.

use std::io::Write;

use rayon::prelude::*;

use crate::design::{Cohort, CohortSchedule, Directive, DesignKind, PeriodProbs};
use crate::error::{Error, Result};
use crate::model::{accumulate, act, BehaviorWorld};
use crate::rng::{mix, StreamKey};

/// Per-user personalization features: running sums of action contributions,
/// plus the snapshot taken when the experiment starts.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStore {
    start_step: usize,
    dim: usize,
    own: Vec<Vec<f64>>,
    snapshot: Vec<Vec<f64>>,
}

impl FeatureStore {
    pub fn empty(n: usize, dim: usize) -> Self {
        Self { start_step: 0, dim, own: vec![vec![0.0; dim]; n], snapshot: vec![vec![0.0; dim]; n] }
    }

    /// Number of simulated steps before the first experiment period.
    pub fn start_step(&self) -> usize {
        self.start_step
    }

    pub fn n(&self) -> usize {
        self.own.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn own(&self, user: usize) -> &[f64] {
        &self.own[user]
    }

    /// Pre-experiment features of every user.
    pub fn snapshot(&self) -> &[Vec<f64>] {
        &self.snapshot
    }

    /// Sum of members' features per cluster.
    pub fn cluster_sums(&self, map: &[usize]) -> Vec<Vec<f64>> {
        let k = map.iter().copied().max().map_or(0, |m| m + 1);
        let mut sums = vec![vec![0.0; self.dim]; k];
        for (i, &c) in map.iter().enumerate() {
            accumulate(&mut sums[c], &self.own[i]);
        }
        sums
    }
}

/// Simulates `periods` control periods with own-history personalization.
pub fn run_burn_in(world: &dyn BehaviorWorld, periods: usize, seed: u64) -> FeatureStore {
    let n = world.population();
    let dim = world.feature_dim();
    let own: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut f = vec![0.0; dim];
            for step in 0..periods {
                let (_, rec) = act(world, StreamKey::new(seed, i, step), false, &f, &[]);
                accumulate(&mut f, &rec.contribution);
            }
            f
        })
        .collect();
    FeatureStore { start_step: periods, dim, snapshot: own.clone(), own }
}

/// Observed record of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    kind: DesignKind,
    n: usize,
    horizon: usize,
    labels: Vec<Cohort>,
    days: Vec<Option<usize>>,
    w: Vec<bool>,
    y: Vec<f64>,
    action: Vec<u32>,
    served_dim: usize,
    served: Vec<f64>,
    probs: Vec<PeriodProbs>,
    clusters: Option<Vec<usize>>,
}

/// One row of a panel, as read back from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelRow {
    pub user: usize,
    pub t: usize,
    pub cohort: Cohort,
    pub day: Option<usize>,
    pub w: bool,
    pub y: f64,
    pub action: u32,
}

impl Panel {
    /// Assembles a panel from rows covering every user-period exactly once.
    pub fn from_rows(
        kind: DesignKind,
        rows: &[PanelRow],
        probs: Vec<PeriodProbs>,
        clusters: Option<Vec<usize>>,
        served: Option<(usize, Vec<f64>)>,
    ) -> Result<Self> {
        let n = rows.iter().map(|r| r.user + 1).max().unwrap_or(0);
        let horizon = rows.iter().map(|r| r.t).max().unwrap_or(0);
        if n * horizon != rows.len() {
            return Err(Error::Data(format!(
                "panel has {} rows, expected {n} users x {horizon} periods",
                rows.len()
            )));
        }
        let mut seen = vec![false; n * horizon];
        let mut p = Panel {
            kind,
            n,
            horizon,
            labels: vec![Cohort::Control; n * horizon],
            days: vec![None; n],
            w: vec![false; n * horizon],
            y: vec![0.0; n * horizon],
            action: vec![0; n * horizon],
            served_dim: 0,
            served: Vec::new(),
            probs,
            clusters,
        };
        for (k, r) in rows.iter().enumerate() {
            if r.t == 0 {
                return Err(Error::Data(format!("row {}: period must be at least 1", k + 2)));
            }
            let idx = r.user * horizon + r.t - 1;
            if seen[idx] {
                return Err(Error::Data(format!("row {}: duplicate user {} period {}", k + 2, r.user, r.t)));
            }
            seen[idx] = true;
            p.labels[idx] = r.cohort;
            p.w[idx] = r.w;
            p.y[idx] = r.y;
            p.action[idx] = r.action;
            if r.day.is_some() {
                p.days[r.user] = r.day;
            }
        }
        if let Some((dim, v)) = served {
            if v.len() != n * horizon * dim {
                return Err(Error::Data(format!("features hold {} values, expected {}", v.len(), n * horizon * dim)));
            }
            p.served_dim = dim;
            p.served = v;
        }
        if p.probs.len() != horizon {
            return Err(Error::HorizonMismatch(format!("{} probability maps for {horizon} periods", p.probs.len())));
        }
        Ok(p)
    }

    pub fn kind(&self) -> DesignKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    fn idx(&self, user: usize, t: usize) -> usize {
        user * self.horizon + t - 1
    }

    pub fn label(&self, user: usize, t: usize) -> Cohort {
        self.labels[self.idx(user, t)]
    }

    pub fn treated(&self, user: usize, t: usize) -> bool {
        self.w[self.idx(user, t)]
    }

    pub fn outcome(&self, user: usize, t: usize) -> f64 {
        self.y[self.idx(user, t)]
    }

    pub fn action(&self, user: usize, t: usize) -> u32 {
        self.action[self.idx(user, t)]
    }

    pub fn day(&self, user: usize) -> Option<usize> {
        self.days[user]
    }

    pub fn served_dim(&self) -> usize {
        self.served_dim
    }

    /// Personalization vector served to `user` at `t`, if logged.
    pub fn served(&self, user: usize, t: usize) -> Option<&[f64]> {
        if self.served_dim == 0 {
            return None;
        }
        let k = self.idx(user, t) * self.served_dim;
        Some(&self.served[k..k + self.served_dim])
    }

    pub fn probs(&self) -> &[PeriodProbs] {
        &self.probs
    }

    pub fn prob(&self, cohort: Cohort, t: usize) -> Option<f64> {
        self.probs.get(t - 1).and_then(|m| m.get(&cohort)).copied()
    }

    pub fn clusters(&self) -> Option<&[usize]> {
        self.clusters.as_deref()
    }

    pub fn members(&self, cohort: Cohort, t: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&i| self.label(i, t) == cohort)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record(["user", "t", "cohort", "day", "w", "y", "action", "served_vector_hash"])?;
        for i in 0..self.n {
            let day = self.days[i].map(|d| d.to_string()).unwrap_or_default();
            for t in 1..=self.horizon {
                let hash = self
                    .served(i, t)
                    .map(|v| format!("{:016x}", mix(&v.iter().map(|x| x.to_bits()).collect::<Vec<_>>())))
                    .unwrap_or_default();
                wr.write_record([
                    i.to_string(),
                    t.to_string(),
                    self.label(i, t).code().to_string(),
                    day.clone(),
                    (self.treated(i, t) as u8).to_string(),
                    self.outcome(i, t).to_string(),
                    self.action(i, t).to_string(),
                    hash,
                ])?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    /// Served vectors in long form: `user,t,component,value`.
    pub fn write_features_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record(["user", "t", "component", "value"])?;
        for i in 0..self.n {
            for t in 1..=self.horizon {
                if let Some(v) = self.served(i, t) {
                    for (k, x) in v.iter().enumerate() {
                        wr.write_record([i.to_string(), t.to_string(), k.to_string(), x.to_string()])?;
                    }
                }
            }
        }
        wr.flush()?;
        Ok(())
    }
}

fn resolve(
    store: &FeatureStore,
    cluster_sums: &[Vec<f64>],
    directive: Directive,
    user: usize,
    t: usize,
) -> Result<Vec<f64>> {
    Ok(match directive {
        Directive::OwnHistory => store.own[user].clone(),
        Directive::Frozen(_) => store.snapshot[user].clone(),
        Directive::Mirror(j) => store
            .own
            .get(j)
            .ok_or(Error::MissingMatch { user, period: t, target: j })?
            .clone(),
        Directive::Cluster { id, leave_one_out } => {
            let mut v = cluster_sums
                .get(id)
                .ok_or_else(|| Error::InvalidDesign(format!("cluster {id} has no members")))?
                .clone();
            if leave_one_out {
                for (a, b) in v.iter_mut().zip(&store.own[user]) {
                    *a -= b;
                }
            }
            v
        }
        Directive::GlobalConstant => vec![0.0; store.dim],
    })
}

/// Per-user outcome of one period.
pub(crate) struct Step {
    served: Vec<f64>,
    outcome: f64,
    code: u32,
    contribution: Vec<f64>,
}

/// Simulates `users` (all of them when `None`) through the schedule.
///
/// Only the listed users are stepped, so the subset must be closed under the
/// directives it uses (e.g. a whole cluster).
pub(crate) fn simulate(
    world: &dyn BehaviorWorld,
    schedule: &CohortSchedule,
    store: &FeatureStore,
    seed: u64,
    users: Option<&[usize]>,
) -> Result<(Vec<Vec<Step>>, FeatureStore)> {
    let n = schedule.n();
    if world.population() != n || store.n() != n {
        return Err(Error::PopulationMismatch(format!(
            "schedule has {n} users, world {}, store {}",
            world.population(),
            store.n()
        )));
    }
    if let Some(max) = world.max_periods() {
        if schedule.horizon() > max {
            return Err(Error::PeriodOutOfRange { period: schedule.horizon(), valid: format!("1..={max}") });
        }
    }
    let all: Vec<usize>;
    let users = match users {
        Some(u) => u,
        None => {
            all = (0..n).collect();
            &all
        }
    };
    let clustered = users
        .iter()
        .any(|&i| (1..=schedule.horizon()).any(|t| matches!(schedule.directive(i, t), Directive::Cluster { .. })));
    let map = if clustered {
        Some(schedule.clusters().ok_or_else(|| Error::InvalidDesign("cluster directives without a cluster map".into()))?)
    } else {
        None
    };
    let mut store = store.clone();
    let mut log: Vec<Vec<Step>> = Vec::with_capacity(schedule.horizon());
    for t in 1..=schedule.horizon() {
        let sums = match map {
            Some(m) => cluster_sums_of(&store, m, users),
            None => Vec::new(),
        };
        let snap = &store;
        let steps: Vec<Step> = users
            .par_iter()
            .map(|&i| {
                let f = resolve(snap, &sums, schedule.directive(i, t), i, t)?;
                let key = StreamKey::new(seed, i, snap.start_step + t - 1);
                let (served, rec) = act(world, key, schedule.treated(i, t), &f, &schedule.w_row(i)[..t - 1]);
                Ok(Step { served, outcome: rec.outcome, code: rec.code, contribution: rec.contribution })
            })
            .collect::<Result<_>>()?;
        for (&i, s) in users.iter().zip(&steps) {
            accumulate(&mut store.own[i], &s.contribution);
        }
        log.push(steps);
    }
    Ok((log, store))
}

fn cluster_sums_of(store: &FeatureStore, map: &[usize], users: &[usize]) -> Vec<Vec<f64>> {
    let k = map.iter().copied().max().map_or(0, |m| m + 1);
    let mut sums = vec![vec![0.0; store.dim]; k];
    let mut sorted = users.to_vec();
    sorted.sort_unstable();
    for i in sorted {
        accumulate(&mut sums[map[i]], &store.own[i]);
    }
    sums
}

/// Runs the experiment and records the panel.
pub fn run_experiment(
    world: &dyn BehaviorWorld,
    schedule: &CohortSchedule,
    store: &FeatureStore,
    seed: u64,
) -> Result<Panel> {
    let (log, _) = simulate(world, schedule, store, seed, None)?;
    let (n, h) = (schedule.n(), schedule.horizon());
    let served_dim = log.first().and_then(|s| s.first()).map_or(0, |s| s.served.len());
    let mut panel = Panel {
        kind: schedule.kind(),
        n,
        horizon: h,
        labels: Vec::with_capacity(n * h),
        days: (0..n).map(|i| schedule.assignment(i).day()).collect(),
        w: Vec::with_capacity(n * h),
        y: vec![0.0; n * h],
        action: vec![0; n * h],
        served_dim,
        served: vec![0.0; n * h * served_dim],
        probs: schedule.probs().to_vec(),
        clusters: if schedule.kind() == DesignKind::ClusteredCcd {
            schedule.clusters().map(<[usize]>::to_vec)
        } else {
            None
        },
    };
    for i in 0..n {
        for t in 1..=h {
            panel.labels.push(schedule.label(i, t));
            panel.w.push(schedule.treated(i, t));
        }
    }
    for (t0, steps) in log.iter().enumerate() {
        for (i, s) in steps.iter().enumerate() {
            let idx = i * h + t0;
            panel.y[idx] = s.outcome;
            panel.action[idx] = s.code;
            if s.served.len() != served_dim {
                return Err(Error::DimensionMismatch("personalization vectors change length".into()));
            }
            panel.served[idx * served_dim..(idx + 1) * served_dim].copy_from_slice(&s.served);
        }
    }
    Ok(panel)
}

/// Vectors served to `user` over the horizon when only `members` are
/// simulated under `schedule`.
pub(crate) fn served_path(
    world: &dyn BehaviorWorld,
    schedule: &CohortSchedule,
    store: &FeatureStore,
    seed: u64,
    members: &[usize],
    user: usize,
) -> Result<Vec<Vec<f64>>> {
    let pos = members
        .iter()
        .position(|&m| m == user)
        .ok_or_else(|| Error::InvalidDesign(format!("user {user} is not among the simulated members")))?;
    let (log, _) = simulate(world, schedule, store, seed, Some(members))?;
    Ok(log.into_iter().map(|mut steps| steps.swap_remove(pos).served).collect())
}
