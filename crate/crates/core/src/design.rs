//! Cohort schedules for the five experiment designs.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{mix, rng_from};

const TAG_ASSIGN: u64 = 0xA551;
const TAG_CLUSTER: u64 = 0xC1A5;
const TAG_MATCH: u64 = 0x3A7C;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    Ab,
    Ccd,
    CcdSwitch,
    CcdFreeze,
    ClusteredCcd,
}

impl DesignKind {
    pub fn name(self) -> &'static str {
        match self {
            DesignKind::Ab => "ab",
            DesignKind::Ccd => "ccd",
            DesignKind::CcdSwitch => "ccd_switch",
            DesignKind::CcdFreeze => "ccd_freeze",
            DesignKind::ClusteredCcd => "clustered_ccd",
        }
    }
}

/// Cohort label of a user in one period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cohort {
    Treated,
    Control,
    CookieTreated,
    CookieControl,
    /// Cookie-day user treated in this period.
    DayTreated,
    /// Cookie-day user not treated in this period.
    DayControl,
    Switch,
    Freeze,
}

impl Cohort {
    pub const ALL: [Cohort; 8] = [
        Cohort::Treated,
        Cohort::Control,
        Cohort::CookieTreated,
        Cohort::CookieControl,
        Cohort::DayTreated,
        Cohort::DayControl,
        Cohort::Switch,
        Cohort::Freeze,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Cohort::Treated => "T",
            Cohort::Control => "C",
            Cohort::CookieTreated => "CT",
            Cohort::CookieControl => "CC",
            Cohort::DayTreated => "CDT",
            Cohort::DayControl => "CDC",
            Cohort::Switch => "CS",
            Cohort::Freeze => "CF",
        }
    }

    pub fn is_treated(self) -> bool {
        matches!(
            self,
            Cohort::Treated | Cohort::CookieTreated | Cohort::DayTreated | Cohort::Switch | Cohort::Freeze
        )
    }
}

impl fmt::Display for Cohort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Cohort {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Cohort::ALL
            .into_iter()
            .find(|c| c.code() == s)
            .ok_or_else(|| Error::Data(format!("unknown cohort `{s}`")))
    }
}

/// Which personalization input a user is served.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Directive {
    OwnHistory,
    /// Features as of the end of the burn-in (argument is its length).
    Frozen(usize),
    /// Another user's own features.
    Mirror(usize),
    Cluster { id: usize, leave_one_out: bool },
    GlobalConstant,
}

impl Directive {
    pub fn name(&self) -> &'static str {
        match self {
            Directive::OwnHistory => "own",
            Directive::Frozen(_) => "frozen",
            Directive::Mirror(_) => "mirror",
            Directive::Cluster { leave_one_out: false, .. } => "cluster",
            Directive::Cluster { leave_one_out: true, .. } => "cluster_loo",
            Directive::GlobalConstant => "global",
        }
    }

    pub fn arg(&self) -> Option<usize> {
        match *self {
            Directive::Frozen(p) => Some(p),
            Directive::Mirror(j) => Some(j),
            Directive::Cluster { id, .. } => Some(id),
            _ => None,
        }
    }

    pub fn parse(name: &str, arg: Option<usize>) -> Result<Self> {
        let need = |a: Option<usize>| a.ok_or_else(|| Error::Data(format!("directive `{name}` needs an argument")));
        Ok(match name {
            "own" => Directive::OwnHistory,
            "global" => Directive::GlobalConstant,
            "frozen" => Directive::Frozen(need(arg)?),
            "mirror" => Directive::Mirror(need(arg)?),
            "cluster" => Directive::Cluster { id: need(arg)?, leave_one_out: false },
            "cluster_loo" => Directive::Cluster { id: need(arg)?, leave_one_out: true },
            other => return Err(Error::Data(format!("unknown directive `{other}`"))),
        })
    }
}

/// How cookie-day users are spread over days.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Assignment {
    /// Fixed cohort sizes from a random permutation; exactly `cdt_per_day`
    /// cookie-day users are treated each day.
    Complete { cdt_per_day: usize },
    /// Independent per-user draws; each cookie-day user is treated on day t
    /// with probability `cdt_rate`, and never with the remaining mass.
    Bernoulli { cdt_rate: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    #[default]
    NearestNeighbor,
    RandomWithinCluster,
}

/// Cohort shares. The cookie-day pool is whatever `cookie`, `switch`, and
/// `freeze` leave over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fractions {
    /// Share labeled T in an A/B test.
    pub treated: f64,
    /// Share of users in the cookie cohort.
    pub cookie: f64,
    /// Share of the cookie cohort that is treated.
    pub cookie_treated: f64,
    pub switch: f64,
    pub freeze: f64,
}

impl Default for Fractions {
    fn default() -> Self {
        Self { treated: 0.5, cookie: 0.5, cookie_treated: 0.5, switch: 0.0, freeze: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpec {
    pub kind: DesignKind,
    pub n: usize,
    pub horizon: usize,
    pub fractions: Fractions,
    pub assignment: Assignment,
    pub cluster_count: Option<usize>,
    pub leave_one_out: bool,
    pub burn_in: usize,
    pub matching: MatchMode,
    /// When false every user is served the global default vector.
    pub personalized: bool,
    pub seed: u64,
}

impl DesignSpec {
    pub fn new(kind: DesignKind, n: usize, horizon: usize, seed: u64) -> Self {
        Self {
            kind,
            n,
            horizon,
            fractions: Fractions::default(),
            assignment: Assignment::Complete { cdt_per_day: 0 },
            cluster_count: None,
            leave_one_out: false,
            burn_in: 0,
            matching: MatchMode::NearestNeighbor,
            personalized: true,
            seed,
        }
    }
}

/// A user's cohort for the whole experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UserAssignment {
    Treated,
    Control,
    CookieTreated,
    CookieControl,
    /// Cookie-day user treated on the given day, if any.
    CookieDay(Option<usize>),
    Switch,
    Freeze,
}

impl UserAssignment {
    pub fn label(self, t: usize) -> Cohort {
        match self {
            UserAssignment::Treated => Cohort::Treated,
            UserAssignment::Control => Cohort::Control,
            UserAssignment::CookieTreated => Cohort::CookieTreated,
            UserAssignment::CookieControl => Cohort::CookieControl,
            UserAssignment::CookieDay(Some(d)) if d == t => Cohort::DayTreated,
            UserAssignment::CookieDay(_) => Cohort::DayControl,
            UserAssignment::Switch => Cohort::Switch,
            UserAssignment::Freeze => Cohort::Freeze,
        }
    }

    pub fn day(self) -> Option<usize> {
        match self {
            UserAssignment::CookieDay(d) => d,
            _ => None,
        }
    }
}

pub type PeriodProbs = BTreeMap<Cohort, f64>;

/// Cohort labels, treatments, and serving directives for every user-period.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortSchedule {
    kind: DesignKind,
    horizon: usize,
    burn_in: usize,
    assignments: Vec<UserAssignment>,
    w: Vec<bool>,
    directives: Vec<Directive>,
    probs: Vec<PeriodProbs>,
    clusters: Option<Vec<usize>>,
}

struct Counts {
    ct: usize,
    cc: usize,
    cs: usize,
    cf: usize,
    cd: usize,
}

fn validate_fractions(spec: &DesignSpec) -> Result<()> {
    let f = &spec.fractions;
    for (name, v) in [
        ("treated", f.treated),
        ("cookie", f.cookie),
        ("cookie_treated", f.cookie_treated),
        ("switch", f.switch),
        ("freeze", f.freeze),
    ] {
        if !(0.0..=1.0).contains(&v) || v.is_nan() {
            return Err(Error::InvalidFractions(format!("{name} = {v} is outside [0, 1]")));
        }
    }
    if f.cookie + f.switch + f.freeze > 1.0 + 1e-12 {
        return Err(Error::InvalidFractions(format!(
            "cookie + switch + freeze = {} exceeds 1",
            f.cookie + f.switch + f.freeze
        )));
    }
    if f.switch > 0.0 && spec.kind != DesignKind::CcdSwitch {
        return Err(Error::InvalidFractions("a switch cohort requires the ccd_switch design".into()));
    }
    if f.freeze > 0.0 && spec.kind != DesignKind::CcdFreeze {
        return Err(Error::InvalidFractions("a freeze cohort requires the ccd_freeze design".into()));
    }
    if spec.horizon == 0 {
        return Err(Error::InvalidHorizon(0));
    }
    if spec.n == 0 {
        return Err(Error::InvalidDesign("population is empty".into()));
    }
    Ok(())
}

fn complete_counts(spec: &DesignSpec, per_day: usize) -> Result<Counts> {
    let f = &spec.fractions;
    let n = spec.n;
    let round = |x: f64| (x * n as f64).round() as usize;
    let c = round(f.cookie);
    let ct = (f.cookie_treated * c as f64).round() as usize;
    let cs = round(f.switch);
    let cf = round(f.freeze);
    let used = c + cs + cf;
    if used > n {
        return Err(Error::InvalidFractions(format!("cohorts need {used} users, population has {n}")));
    }
    let cd = n - used;
    let needed = per_day * spec.horizon;
    if needed > cd {
        return Err(Error::PoolExhausted { needed, available: cd });
    }
    Ok(Counts { ct, cc: c - ct, cs, cf, cd })
}

/// Design-declared Pr(G_it = ·) for every period.
pub fn design_probabilities(spec: &DesignSpec) -> Result<Vec<PeriodProbs>> {
    validate_fractions(spec)?;
    let mut base = PeriodProbs::new();
    let (cdt, cdc) = if spec.kind == DesignKind::Ab {
        base.insert(Cohort::Treated, spec.fractions.treated);
        base.insert(Cohort::Control, 1.0 - spec.fractions.treated);
        (0.0, 0.0)
    } else {
        match spec.assignment {
            Assignment::Complete { cdt_per_day } => {
                let c = complete_counts(spec, cdt_per_day)?;
                let n = spec.n as f64;
                base.insert(Cohort::CookieTreated, c.ct as f64 / n);
                base.insert(Cohort::CookieControl, c.cc as f64 / n);
                base.insert(Cohort::Switch, c.cs as f64 / n);
                base.insert(Cohort::Freeze, c.cf as f64 / n);
                (cdt_per_day as f64 / n, (c.cd - cdt_per_day) as f64 / n)
            }
            Assignment::Bernoulli { cdt_rate } => {
                let f = &spec.fractions;
                if !(0.0..=1.0).contains(&cdt_rate) || cdt_rate * spec.horizon as f64 > 1.0 + 1e-12 {
                    return Err(Error::InvalidFractions(format!(
                        "cdt_rate {cdt_rate} over {} days exceeds the cookie-day pool",
                        spec.horizon
                    )));
                }
                let cd = (1.0 - f.cookie - f.switch - f.freeze).max(0.0);
                base.insert(Cohort::CookieTreated, f.cookie * f.cookie_treated);
                base.insert(Cohort::CookieControl, f.cookie * (1.0 - f.cookie_treated));
                base.insert(Cohort::Switch, f.switch);
                base.insert(Cohort::Freeze, f.freeze);
                (cd * cdt_rate, cd * (1.0 - cdt_rate))
            }
        }
    };
    base.insert(Cohort::DayTreated, cdt);
    base.insert(Cohort::DayControl, cdc);
    base.retain(|_, p| *p > 0.0);
    Ok(vec![base; spec.horizon])
}

fn draw_assignments(spec: &DesignSpec) -> Result<Vec<UserAssignment>> {
    let mut rng = rng_from(&[spec.seed, TAG_ASSIGN]);
    let n = spec.n;
    if spec.kind == DesignKind::Ab {
        let p = spec.fractions.treated;
        return Ok((0..n)
            .map(|_| if rng.random::<f64>() < p { UserAssignment::Treated } else { UserAssignment::Control })
            .collect());
    }
    match spec.assignment {
        Assignment::Complete { cdt_per_day } => {
            let c = complete_counts(spec, cdt_per_day)?;
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let mut out = vec![UserAssignment::CookieDay(None); n];
            let mut it = order.into_iter();
            for (count, label) in [
                (c.ct, UserAssignment::CookieTreated),
                (c.cc, UserAssignment::CookieControl),
                (c.cs, UserAssignment::Switch),
                (c.cf, UserAssignment::Freeze),
            ] {
                for u in it.by_ref().take(count) {
                    out[u] = label;
                }
            }
            // The remaining users form the cookie-day pool, already in random
            // order, so consecutive blocks give a without-replacement draw.
            for (k, u) in it.enumerate() {
                let day = k / cdt_per_day.max(1) + 1;
                if cdt_per_day > 0 && day <= spec.horizon {
                    out[u] = UserAssignment::CookieDay(Some(day));
                }
            }
            Ok(out)
        }
        Assignment::Bernoulli { cdt_rate } => {
            let f = spec.fractions;
            Ok((0..n)
                .map(|_| {
                    let u: f64 = rng.random();
                    let v: f64 = rng.random();
                    if u < f.cookie {
                        if v < f.cookie_treated {
                            UserAssignment::CookieTreated
                        } else {
                            UserAssignment::CookieControl
                        }
                    } else if u < f.cookie + f.switch {
                        UserAssignment::Switch
                    } else if u < f.cookie + f.switch + f.freeze {
                        UserAssignment::Freeze
                    } else if cdt_rate > 0.0 && v < cdt_rate * spec.horizon as f64 {
                        let day = ((v / cdt_rate) as usize + 1).min(spec.horizon);
                        UserAssignment::CookieDay(Some(day))
                    } else {
                        UserAssignment::CookieDay(None)
                    }
                })
                .collect())
        }
    }
}

fn validate_clusters(map: &[usize], n: usize, k: usize) -> Result<()> {
    if map.len() != n {
        return Err(Error::PopulationMismatch(format!("cluster map has {} entries for {n} users", map.len())));
    }
    let mut sizes = vec![0usize; k];
    for &c in map {
        if c >= k {
            return Err(Error::InvalidDesign(format!("cluster id {c} outside 0..{k}")));
        }
        sizes[c] += 1;
    }
    if sizes.iter().any(|&s| s != n / k) {
        return Err(Error::InvalidDesign(format!("clusters must all have {} members", n / k)));
    }
    Ok(())
}

/// Equal-size clusters drawn independently of treatment.
pub fn random_clusters(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k == 0 || n % k != 0 {
        return Err(Error::InvalidDesign(format!("{k} clusters do not divide {n} users")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from(&[seed, TAG_CLUSTER]));
    let size = n / k;
    let mut map = vec![0; n];
    for (pos, u) in order.into_iter().enumerate() {
        map[u] = pos / size;
    }
    Ok(map)
}

/// Flags a cluster map that splits users exactly by treatment: every cluster
/// of at least four members is pure, and both arms are present.
fn derived_from_treatment(map: &[usize], assignments: &[UserAssignment], k: usize) -> bool {
    if k < 2 {
        return false;
    }
    let mut seen = vec![(0usize, 0usize); k];
    for (u, &c) in map.iter().enumerate() {
        if assignments[u] == UserAssignment::CookieTreated {
            seen[c].0 += 1;
        } else {
            seen[c].1 += 1;
        }
    }
    let any_t = seen.iter().any(|s| s.0 > 0);
    let any_c = seen.iter().any(|s| s.1 > 0);
    any_t && any_c && seen.iter().all(|&(a, b)| a + b >= 4 && (a == 0 || b == 0))
}

/// Maps each switch user to a cookie-day-treated user.
pub fn match_switch(
    pre_features: &[Vec<f64>],
    cs_users: &[usize],
    cdt_users: &[usize],
    mode: MatchMode,
    cluster_map: Option<&[usize]>,
    seed: u64,
) -> Result<BTreeMap<usize, usize>> {
    let mut out = BTreeMap::new();
    if cs_users.is_empty() {
        return Ok(out);
    }
    if cdt_users.is_empty() {
        return Err(Error::EmptyCandidates(cs_users[0]));
    }
    let mut cdt: Vec<usize> = cdt_users.to_vec();
    cdt.sort_unstable();
    match mode {
        MatchMode::NearestNeighbor => {
            for &i in cs_users {
                let fi = &pre_features[i];
                let mut best = (f64::INFINITY, usize::MAX);
                for &j in &cdt {
                    let d: f64 = fi.iter().zip(&pre_features[j]).map(|(a, b)| (a - b) * (a - b)).sum();
                    if d < best.0 {
                        best = (d, j);
                    }
                }
                out.insert(i, best.1);
            }
        }
        MatchMode::RandomWithinCluster => {
            let map = cluster_map
                .ok_or_else(|| Error::InvalidDesign("random-within-cluster matching needs a cluster map".into()))?;
            for &i in cs_users {
                let local: Vec<usize> = cdt.iter().copied().filter(|&j| map[j] == map[i]).collect();
                let pool = if local.is_empty() { &cdt } else { &local };
                let mut rng = rng_from(&[seed, TAG_MATCH, i as u64]);
                out.insert(i, pool[rng.random_range(0..pool.len())]);
            }
        }
    }
    Ok(out)
}

impl CohortSchedule {
    /// Builds a schedule from explicit per-user cohorts and declared
    /// probabilities.
    pub fn from_assignments(
        spec: &DesignSpec,
        assignments: Vec<UserAssignment>,
        probs: Vec<PeriodProbs>,
        pre_features: Option<&[Vec<f64>]>,
        clusters: Option<Vec<usize>>,
    ) -> Result<Self> {
        let (n, h) = (spec.n, spec.horizon);
        if assignments.len() != n {
            return Err(Error::PopulationMismatch(format!("{} assignments for {n} users", assignments.len())));
        }
        if probs.len() != h {
            return Err(Error::HorizonMismatch(format!("{} probability maps for {h} periods", probs.len())));
        }
        if spec.kind == DesignKind::CcdFreeze && spec.burn_in == 0 {
            return Err(Error::InvalidDesign("freeze needs at least one burn-in period".into()));
        }
        if let Some(map) = &clusters {
            if map.len() != n {
                return Err(Error::PopulationMismatch(format!("cluster map has {} entries for {n} users", map.len())));
            }
        }
        let mut w = vec![false; n * h];
        for (i, a) in assignments.iter().enumerate() {
            for t in 1..=h {
                w[i * h + t - 1] = a.label(t).is_treated();
            }
        }
        let mut directives = vec![Directive::OwnHistory; n * h];
        for (i, a) in assignments.iter().enumerate() {
            for t in 1..=h {
                let d = &mut directives[i * h + t - 1];
                if !spec.personalized {
                    *d = Directive::GlobalConstant;
                } else if spec.kind == DesignKind::ClusteredCcd {
                    let map = clusters.as_ref().ok_or_else(|| Error::InvalidDesign("clustered design needs a cluster map".into()))?;
                    *d = Directive::Cluster { id: map[i], leave_one_out: spec.leave_one_out };
                } else if *a == UserAssignment::Freeze {
                    *d = Directive::Frozen(spec.burn_in);
                }
            }
        }
        let cs: Vec<usize> = (0..n).filter(|&i| assignments[i] == UserAssignment::Switch).collect();
        if spec.personalized && !cs.is_empty() {
            let pre = pre_features
                .ok_or_else(|| Error::InvalidDesign("switch matching needs pre-experiment features".into()))?;
            if pre.len() != n {
                return Err(Error::PopulationMismatch(format!("{} feature rows for {n} users", pre.len())));
            }
            for t in 1..=h {
                let cdt: Vec<usize> = (0..n).filter(|&i| assignments[i].day() == Some(t)).collect();
                if cdt.is_empty() {
                    return Err(Error::EmptyCdt(t));
                }
                let m = match_switch(pre, &cs, &cdt, spec.matching, clusters.as_deref(), mix(&[spec.seed, t as u64]))?;
                for (i, j) in m {
                    directives[i * h + t - 1] = Directive::Mirror(j);
                }
            }
        }
        Ok(Self { kind: spec.kind, horizon: h, burn_in: spec.burn_in, assignments, w, directives, probs, clusters })
    }

    /// A schedule with every user on the same treatment row and label.
    pub fn uniform(n: usize, burn_in: usize, row: &[bool], label: UserAssignment) -> Self {
        let h = row.len();
        let mut w = Vec::with_capacity(n * h);
        for _ in 0..n {
            w.extend_from_slice(row);
        }
        let mut probs = PeriodProbs::new();
        probs.insert(label.label(0), 1.0);
        Self {
            kind: DesignKind::Ab,
            horizon: h,
            burn_in,
            assignments: vec![label; n],
            w,
            directives: vec![Directive::OwnHistory; n * h],
            probs: vec![probs; h],
            clusters: None,
        }
    }

    pub fn kind(&self) -> DesignKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.assignments.len()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in
    }

    pub fn assignment(&self, user: usize) -> UserAssignment {
        self.assignments[user]
    }

    pub fn assignments(&self) -> &[UserAssignment] {
        &self.assignments
    }

    pub fn label(&self, user: usize, t: usize) -> Cohort {
        self.assignments[user].label(t)
    }

    pub fn treated(&self, user: usize, t: usize) -> bool {
        self.w[user * self.horizon + t - 1]
    }

    pub fn w_row(&self, user: usize) -> &[bool] {
        &self.w[user * self.horizon..(user + 1) * self.horizon]
    }

    pub fn directive(&self, user: usize, t: usize) -> Directive {
        self.directives[user * self.horizon + t - 1]
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

    pub fn members(&self, cohort: Cohort, t: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.label(i, t) == cohort).collect()
    }

    /// Replaces one user's treatment row, leaving labels untouched. Used by
    /// oracles that force a counterfactual history.
    pub(crate) fn with_w_row(&self, user: usize, row: &[bool]) -> Self {
        let mut out = self.clone();
        out.w[user * self.horizon..(user + 1) * self.horizon].copy_from_slice(row);
        out
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record(["user", "t", "cohort", "day", "w", "directive", "directive_arg"])?;
        for i in 0..self.n() {
            let day = self.assignments[i].day().map(|d| d.to_string()).unwrap_or_default();
            for t in 1..=self.horizon {
                let d = self.directive(i, t);
                wr.write_record([
                    i.to_string(),
                    t.to_string(),
                    self.label(i, t).code().to_string(),
                    day.clone(),
                    (self.treated(i, t) as u8).to_string(),
                    d.name().to_string(),
                    d.arg().map(|a| a.to_string()).unwrap_or_default(),
                ])?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}

pub fn assign_ab(spec: &DesignSpec) -> Result<CohortSchedule> {
    expect_kind(spec, DesignKind::Ab)?;
    let probs = design_probabilities(spec)?;
    CohortSchedule::from_assignments(spec, draw_assignments(spec)?, probs, None, None)
}

pub fn assign_ccd(spec: &DesignSpec) -> Result<CohortSchedule> {
    expect_kind(spec, DesignKind::Ccd)?;
    let probs = design_probabilities(spec)?;
    CohortSchedule::from_assignments(spec, draw_assignments(spec)?, probs, None, None)
}

pub fn assign_ccd_switch(
    spec: &DesignSpec,
    pre_features: &[Vec<f64>],
    cluster_map: Option<&[usize]>,
) -> Result<CohortSchedule> {
    expect_kind(spec, DesignKind::CcdSwitch)?;
    let probs = design_probabilities(spec)?;
    CohortSchedule::from_assignments(
        spec,
        draw_assignments(spec)?,
        probs,
        Some(pre_features),
        cluster_map.map(<[usize]>::to_vec),
    )
}

pub fn assign_ccd_freeze(spec: &DesignSpec) -> Result<CohortSchedule> {
    expect_kind(spec, DesignKind::CcdFreeze)?;
    if spec.burn_in == 0 {
        return Err(Error::InvalidDesign("freeze needs at least one burn-in period".into()));
    }
    let probs = design_probabilities(spec)?;
    CohortSchedule::from_assignments(spec, draw_assignments(spec)?, probs, None, None)
}

/// Clustered CCD. A supplied cluster map must have `cluster_count` equal
/// clusters; otherwise clusters are drawn at random.
pub fn assign_clustered_ccd(spec: &DesignSpec, cluster_map: Option<&[usize]>) -> Result<CohortSchedule> {
    expect_kind(spec, DesignKind::ClusteredCcd)?;
    let k = spec.cluster_count.ok_or_else(|| Error::InvalidDesign("cluster_count is required".into()))?;
    if k == 0 || spec.n % k != 0 {
        return Err(Error::InvalidDesign(format!("{k} clusters do not divide {} users", spec.n)));
    }
    let map = match cluster_map {
        Some(m) => {
            validate_clusters(m, spec.n, k)?;
            m.to_vec()
        }
        None => random_clusters(spec.n, k, spec.seed)?,
    };
    let probs = design_probabilities(spec)?;
    let assignments = draw_assignments(spec)?;
    if cluster_map.is_some() && derived_from_treatment(&map, &assignments, k) {
        return Err(Error::ClusterTreatmentDependence);
    }
    CohortSchedule::from_assignments(spec, assignments, probs, None, Some(map))
}

/// Dispatches on the design kind.
pub fn generate(
    spec: &DesignSpec,
    pre_features: &[Vec<f64>],
    cluster_map: Option<&[usize]>,
) -> Result<CohortSchedule> {
    match spec.kind {
        DesignKind::Ab => assign_ab(spec),
        DesignKind::Ccd => assign_ccd(spec),
        DesignKind::CcdSwitch => assign_ccd_switch(spec, pre_features, cluster_map),
        DesignKind::CcdFreeze => assign_ccd_freeze(spec),
        DesignKind::ClusteredCcd => assign_clustered_ccd(spec, cluster_map),
    }
}

fn expect_kind(spec: &DesignSpec, kind: DesignKind) -> Result<()> {
    if spec.kind != kind {
        return Err(Error::InvalidDesign(format!("expected a {} spec, got {}", kind.name(), spec.kind.name())));
    }
    Ok(())
}
