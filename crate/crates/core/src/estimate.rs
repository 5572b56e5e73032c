//! Cohort contrasts, bias oracles, personalization imbalance, and the
//! bias-versus-imbalance meta-fit.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{Cohort, CohortSchedule, DesignKind};
use crate::engine::{run_experiment, served_path, FeatureStore, Panel};
use crate::error::{Error, Result};
use crate::model::{BehaviorWorld, Counterfactual, PreferenceState};
use crate::rng::StreamKey;
use crate::series::{EffectKind, EffectSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// (1/n)[sum_a Y/Pr(a) - sum_b Y/Pr(b)] with design probabilities.
    #[default]
    HorvitzThompson,
    /// Difference of realized cohort means.
    Hajek,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContrastSpec {
    pub a: Cohort,
    pub b: Cohort,
    pub weighting: Weighting,
    /// Lets a Horvitz-Thompson contrast treat an empty cohort as contributing
    /// zero instead of failing. Needed when averaging over every possible
    /// assignment.
    pub allow_empty: bool,
}

impl ContrastSpec {
    pub fn new(a: Cohort, b: Cohort, weighting: Weighting) -> Self {
        Self { a, b, weighting, allow_empty: false }
    }
}

struct CohortStats {
    n: usize,
    sum: f64,
    mean: f64,
    var: f64,
}

fn stats(values: &[f64]) -> CohortStats {
    let n = values.len();
    let sum: f64 = values.iter().sum();
    let mean = if n > 0 { sum / n as f64 } else { 0.0 };
    let var = if n > 1 { values.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
    CohortStats { n, sum, mean, var }
}

/// Standard error of a difference of cohort means, aggregating residuals by
/// cluster so that users sharing a cluster are not treated as independent.
fn cluster_robust_se(panel: &Panel, t: usize, a: &[usize], b: &[usize], ma: f64, mb: f64, map: &[usize]) -> f64 {
    let k = map.iter().copied().max().map_or(0, |m| m + 1);
    let mut score = vec![0.0; k];
    for &i in a {
        score[map[i]] += (panel.outcome(i, t) - ma) / a.len() as f64;
    }
    for &i in b {
        score[map[i]] -= (panel.outcome(i, t) - mb) / b.len() as f64;
    }
    let used = score.iter().filter(|s| **s != 0.0).count().max(2) as f64;
    (score.iter().map(|s| s * s).sum::<f64>() * used / (used - 1.0)).sqrt()
}

/// Per-period contrast between two cohorts.
pub fn contrast(panel: &Panel, spec: ContrastSpec) -> Result<EffectSeries> {
    if spec.a == spec.b {
        return Err(Error::InvalidContrast(format!("cohorts must differ, got {} twice", spec.a)));
    }
    let n = panel.n() as f64;
    let mut values = Vec::with_capacity(panel.horizon());
    let mut ses = Vec::with_capacity(panel.horizon());
    for t in 1..=panel.horizon() {
        let ia: Vec<usize> = panel.members(spec.a, t).collect();
        let ib: Vec<usize> = panel.members(spec.b, t).collect();
        let ya: Vec<f64> = ia.iter().map(|&i| panel.outcome(i, t)).collect();
        let yb: Vec<f64> = ib.iter().map(|&i| panel.outcome(i, t)).collect();
        let (sa, sb) = (stats(&ya), stats(&yb));
        let empty_ok = spec.allow_empty && spec.weighting == Weighting::HorvitzThompson;
        for (c, s) in [(spec.a, &sa), (spec.b, &sb)] {
            if s.n == 0 && !empty_ok {
                return Err(Error::EmptyCohort { cohort: c.code().into(), period: t });
            }
        }
        let value = match spec.weighting {
            Weighting::HorvitzThompson => {
                let pa = panel.prob(spec.a, t).ok_or_else(|| Error::MissingProbability(spec.a.code().into()))?;
                let pb = panel.prob(spec.b, t).ok_or_else(|| Error::MissingProbability(spec.b.code().into()))?;
                (sa.sum / pa - sb.sum / pb) / n
            }
            Weighting::Hajek => sa.mean - sb.mean,
        };
        let se = match panel.clusters() {
            Some(map) if sa.n > 0 && sb.n > 0 => cluster_robust_se(panel, t, &ia, &ib, sa.mean, sb.mean, map),
            _ => {
                let part = |s: &CohortStats| if s.n > 0 { s.var / s.n as f64 } else { 0.0 };
                (part(&sa) + part(&sb)).sqrt()
            }
        };
        values.push(value);
        ses.push(se);
    }
    EffectSeries::with_stderr(EffectKind::Total, values, ses)
}

/// Named estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Total,
    CcdLearning,
    CcdDirect,
    SwitchLearning,
    SwitchPersonalization,
    FreezeLearning,
    FreezePersonalization,
    ClusteredLearning,
}

impl Estimator {
    pub const ALL: [Estimator; 8] = [
        Estimator::Total,
        Estimator::CcdLearning,
        Estimator::CcdDirect,
        Estimator::SwitchLearning,
        Estimator::SwitchPersonalization,
        Estimator::FreezeLearning,
        Estimator::FreezePersonalization,
        Estimator::ClusteredLearning,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Total => "total",
            Estimator::CcdLearning => "ccd_learning",
            Estimator::CcdDirect => "ccd_direct",
            Estimator::SwitchLearning => "switch_learning",
            Estimator::SwitchPersonalization => "switch_personalization",
            Estimator::FreezeLearning => "freeze_learning",
            Estimator::FreezePersonalization => "freeze_personalization",
            Estimator::ClusteredLearning => "clustered_learning",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == name)
    }

    pub fn target(self) -> EffectKind {
        match self {
            Estimator::Total => EffectKind::Total,
            Estimator::CcdDirect => EffectKind::Direct,
            Estimator::SwitchPersonalization | Estimator::FreezePersonalization => EffectKind::Personalization,
            _ => EffectKind::UserLearning,
        }
    }

    pub fn applies_to(self, kind: DesignKind) -> bool {
        use DesignKind::*;
        match self {
            Estimator::Total => kind != ClusteredCcd,
            Estimator::CcdLearning => matches!(kind, Ccd | CcdSwitch | CcdFreeze),
            Estimator::CcdDirect => matches!(kind, Ccd | CcdSwitch | CcdFreeze | ClusteredCcd),
            Estimator::SwitchLearning | Estimator::SwitchPersonalization => kind == CcdSwitch,
            Estimator::FreezeLearning | Estimator::FreezePersonalization => kind == CcdFreeze,
            Estimator::ClusteredLearning => kind == ClusteredCcd,
        }
    }

    fn cohorts(self, kind: DesignKind) -> (Cohort, Cohort) {
        use Cohort::*;
        match self {
            Estimator::Total if kind == DesignKind::Ab => (Treated, Control),
            Estimator::Total => (CookieTreated, CookieControl),
            Estimator::CcdLearning | Estimator::ClusteredLearning => (CookieTreated, DayTreated),
            Estimator::CcdDirect => (DayTreated, CookieControl),
            Estimator::SwitchLearning => (Switch, DayTreated),
            Estimator::SwitchPersonalization => (CookieTreated, Switch),
            Estimator::FreezeLearning => (Freeze, DayTreated),
            Estimator::FreezePersonalization => (CookieTreated, Freeze),
        }
    }

    pub fn estimate(self, panel: &Panel, weighting: Weighting) -> Result<EffectSeries> {
        if self == Estimator::ClusteredLearning && panel.clusters().is_none() {
            return Err(Error::InvalidContrast("clustered learning needs a clustered panel".into()));
        }
        let (a, b) = self.cohorts(panel.kind());
        let s = contrast(panel, ContrastSpec::new(a, b, weighting))?;
        relabel(s, self)
    }
}

fn relabel(s: EffectSeries, e: Estimator) -> Result<EffectSeries> {
    let stderr = s.stderr().expect("contrast sets stderr").to_vec();
    Ok(EffectSeries::with_stderr(e.target(), s.values().to_vec(), stderr)?.labeled(e.name()))
}

pub fn est_total(panel: &Panel, weighting: Weighting) -> Result<EffectSeries> {
    Estimator::Total.estimate(panel, weighting)
}

pub fn est_ccd_learning(panel: &Panel, weighting: Weighting) -> Result<EffectSeries> {
    Estimator::CcdLearning.estimate(panel, weighting)
}

pub fn est_ccd_direct(panel: &Panel, weighting: Weighting) -> Result<EffectSeries> {
    Estimator::CcdDirect.estimate(panel, weighting)
}

pub fn est_switch_learning(panel: &Panel, weighting: Weighting) -> Result<EffectSeries> {
    Estimator::SwitchLearning.estimate(panel, weighting)
}

pub fn est_switch_personalization(panel: &Panel, weighting: Weighting) -> Result<EffectSeries> {
    Estimator::SwitchPersonalization.estimate(panel, weighting)
}

pub fn est_freeze_learning(panel: &Panel, weighting: Weighting) -> Result<EffectSeries> {
    Estimator::FreezeLearning.estimate(panel, weighting)
}

pub fn est_freeze_personalization(panel: &Panel, weighting: Weighting) -> Result<EffectSeries> {
    Estimator::FreezePersonalization.estimate(panel, weighting)
}

pub fn est_clustered_learning(panel: &Panel, weighting: Weighting) -> Result<EffectSeries> {
    Estimator::ClusteredLearning.estimate(panel, weighting)
}

/// Switch-design bias: for each switch user, the observed outcome (served the
/// matched user's features) minus the oracle outcome under the user's own
/// control-path personalization, both with treated-path preferences.
/// Horvitz-Thompson weighted, so its assignment average is exactly the gap
/// between the expected switch learning estimate and the true learning effect.
pub fn bias_switch_oracle(
    world: &dyn BehaviorWorld,
    schedule: &CohortSchedule,
    store: &FeatureStore,
    seed: u64,
) -> Result<EffectSeries> {
    if schedule.kind() != DesignKind::CcdSwitch {
        return Err(Error::InvalidDesign("switch bias needs a ccd_switch schedule".into()));
    }
    let h = schedule.horizon();
    let panel = run_experiment(world, schedule, store, seed)?;
    let cf = Counterfactual::from_store(world, seed, store.clone());
    let cs = schedule.members(Cohort::Switch, 1);
    let arms: Vec<Vec<f64>> = cs.par_iter().map(|&i| cf.user_arms(i, h).map(|a| a.b)).collect::<Result<_>>()?;
    let n = schedule.n() as f64;
    let mut values = vec![0.0; h];
    for t in 1..=h {
        if cs.is_empty() {
            continue;
        }
        let p = schedule.prob(Cohort::Switch, t).ok_or_else(|| Error::MissingProbability("CS".into()))?;
        let gap: f64 = cs.iter().zip(&arms).map(|(&i, b)| panel.outcome(i, t) - b[t - 1]).sum();
        values[t - 1] = gap / p / n;
    }
    Ok(EffectSeries::new(EffectKind::UserLearning, values).labeled("switch_bias"))
}

/// Clustered-design bias: for each user, the outcome under control-path
/// preferences when the cluster is simulated with the user's history forced
/// to treated, minus the same with it forced to control. Averaged over the
/// supplied weighted schedules, which stand for the distribution of the other
/// members' assignments.
pub fn bias_cluster_oracle(
    world: &dyn BehaviorWorld,
    schedules: &[(CohortSchedule, f64)],
    store: &FeatureStore,
    seed: u64,
    users: Option<&[usize]>,
) -> Result<EffectSeries> {
    let first = &schedules.first().ok_or_else(|| Error::InvalidDesign("no schedules supplied".into()))?.0;
    let h = first.horizon();
    let n = first.n();
    let all: Vec<usize> = (0..n).collect();
    let users = users.unwrap_or(&all);
    let total_weight: f64 = schedules.iter().map(|(_, w)| w).sum();
    if !(total_weight > 0.0) {
        return Err(Error::InvalidDesign("schedule weights must sum to a positive value".into()));
    }
    let mut values = vec![0.0; h];
    for (schedule, weight) in schedules {
        if schedule.kind() != DesignKind::ClusteredCcd || schedule.horizon() != h {
            return Err(Error::InvalidDesign("cluster bias needs clustered schedules of one horizon".into()));
        }
        let map = schedule.clusters().expect("clustered schedules carry a map");
        let per_user: Vec<Vec<f64>> = users
            .par_iter()
            .map(|&i| {
                let members: Vec<usize> = (0..n).filter(|&j| map[j] == map[i]).collect();
                let forced = |bit: bool| served_path(world, &schedule.with_w_row(i, &vec![bit; h]), store, seed, &members, i);
                let (treated, control) = (forced(true)?, forced(false)?);
                Ok((1..=h)
                    .map(|t| {
                        let prefs = PreferenceState {
                            values: world.preferences(i, &vec![false; t - 1]),
                            stream: StreamKey::new(seed, i, store.start_step() + t - 1),
                        };
                        let y = |p: &Vec<f64>| world.choose(&world.system(true, p.clone()), &prefs).outcome;
                        y(&treated[t - 1]) - y(&control[t - 1])
                    })
                    .collect())
            })
            .collect::<Result<_>>()?;
        for d in &per_user {
            for t in 0..h {
                values[t] += weight / total_weight * d[t] / users.len() as f64;
            }
        }
    }
    Ok(EffectSeries::new(EffectKind::UserLearning, values).labeled("cluster_bias"))
}

fn cohort_vectors(panel: &Panel, cohort: Cohort, t: usize) -> Result<Vec<&[f64]>> {
    panel
        .members(cohort, t)
        .map(|i| panel.served(i, t).ok_or_else(|| Error::Data("served vectors were not logged".into())))
        .collect()
}

fn mean_and_var(rows: &[&[f64]], d: usize) -> (f64, f64) {
    let n = rows.len() as f64;
    let m = rows.iter().map(|r| r[d]).sum::<f64>() / n;
    let v = rows.iter().map(|r| (r[d] - m).powi(2)).sum::<f64>();
    (m, v)
}

fn standardized_gaps(panel: &Panel, a: Cohort, b: Cohort, t: usize) -> Result<Vec<f64>> {
    let va = cohort_vectors(panel, a, t)?;
    let vb = cohort_vectors(panel, b, t)?;
    if va.is_empty() || vb.is_empty() {
        let c = if va.is_empty() { a } else { b };
        return Err(Error::EmptyCohort { cohort: c.code().into(), period: t });
    }
    let dim = va[0].len();
    if va.iter().chain(&vb).any(|v| v.len() != dim) {
        return Err(Error::DimensionMismatch("served vectors differ in length".into()));
    }
    let dof = (va.len() + vb.len()).saturating_sub(2).max(1) as f64;
    Ok((0..dim)
        .map(|d| {
            let (ma, sa) = mean_and_var(&va, d);
            let (mb, sb) = mean_and_var(&vb, d);
            let sd = ((sa + sb) / dof).sqrt();
            let gap = ma - mb;
            if sd > 0.0 {
                gap / sd
            } else {
                gap
            }
        })
        .collect())
}

/// Distance between cohort-mean served vectors, each coordinate scaled by
/// the pooled within-cohort standard deviation. Coordinates with no spread
/// contribute their raw gap.
pub fn personalization_imbalance(panel: &Panel, a: Cohort, b: Cohort) -> Result<Vec<f64>> {
    (1..=panel.horizon())
        .map(|t| Ok(standardized_gaps(panel, a, b, t)?.iter().map(|g| g * g).sum::<f64>().sqrt()))
        .collect()
}

/// Standardized gap along one served coordinate, keeping its sign.
pub fn signed_imbalance(panel: &Panel, a: Cohort, b: Cohort, coordinate: usize) -> Result<Vec<f64>> {
    (1..=panel.horizon())
        .map(|t| {
            standardized_gaps(panel, a, b, t)?
                .get(coordinate)
                .copied()
                .ok_or_else(|| Error::DimensionMismatch(format!("no served coordinate {coordinate}")))
        })
        .collect()
}

/// One experiment's bias and imbalance summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub study: String,
    pub imbalance: f64,
    pub bias: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
}

/// Weighted least squares of bias on imbalance with weights 1/variance.
pub fn wls_line_fit(studies: &[StudySummary]) -> Result<LineFit> {
    if studies.len() < 2 {
        return Err(Error::DegenerateDesign(format!("need at least 2 studies, got {}", studies.len())));
    }
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for s in studies {
        if !(s.variance > 0.0) {
            return Err(Error::Data(format!("study {} has non-positive variance", s.study)));
        }
        let w = 1.0 / s.variance;
        sw += w;
        sx += w * s.imbalance;
        sy += w * s.bias;
        sxx += w * s.imbalance * s.imbalance;
        sxy += w * s.imbalance * s.bias;
    }
    let det = sw * sxx - sx * sx;
    if det <= 1e-12 * sw * sxx.max(f64::MIN_POSITIVE) {
        return Err(Error::DegenerateDesign("all imbalances are equal".into()));
    }
    Ok(LineFit {
        slope: (sw * sxy - sx * sy) / det,
        intercept: (sxx * sy - sx * sxy) / det,
        slope_se: (sw / det).sqrt(),
        intercept_se: (sxx / det).sqrt(),
    })
}

pub fn write_studies_csv<W: Write>(out: W, studies: &[StudySummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if studies.is_empty() {
        w.write_record(["study", "imbalance", "bias", "variance"])?;
    }
    for s in studies {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_studies_csv<R: Read>(input: R) -> Result<Vec<StudySummary>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize()
        .enumerate()
        .map(|(k, row)| row.map_err(|e| Error::Data(format!("row {}: {e}", k + 2))))
        .collect()
}

/// Layout of a suite of synthetic CCD studies on linear worlds. Study `k`
/// draws a direct effect of random sign and a personalization response, then
/// runs the same CCD experiment with and without personalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudySuiteSpec {
    pub studies: usize,
    pub n: usize,
    pub horizon: usize,
    pub burn_in: usize,
    pub cdt_per_day: usize,
    /// Periods averaged at the end of each study.
    pub window: usize,
    pub seed: u64,
}

impl Default for StudySuiteSpec {
    fn default() -> Self {
        Self { studies: 40, n: 2000, horizon: 20, burn_in: 5, cdt_per_day: 40, window: 10, seed: 0 }
    }
}

/// Summaries for a synthetic study suite. Bias is the windowed CT minus CDT
/// contrast of the paired outcome difference between the personalized and
/// unpersonalized runs; imbalance is the windowed signed standardized gap of
/// the served vector between CT and CDT in the personalized run.
pub fn synthetic_study_suite(spec: &StudySuiteSpec) -> Result<Vec<StudySummary>> {
    use crate::design::{generate, Assignment, DesignSpec};
    use crate::engine::run_burn_in;
    use crate::rng::{mix, rng_from};
    use crate::worlds::{LinearSpec, LinearWorld};
    use rand::Rng;

    if spec.window == 0 || spec.window > spec.horizon {
        return Err(Error::InvalidHorizon(spec.window));
    }
    (0..spec.studies)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_from(&[spec.seed, 0x5707, k as u64]);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let world = LinearWorld::new(LinearSpec {
                n: spec.n,
                direct: sign * rng.random_range(0.2..1.0),
                response: rng.random_range(0.1..0.9),
                learning: rng.random_range(-0.3..0.3),
                seed: mix(&[spec.seed, k as u64]),
                ..LinearSpec::default()
            })?;
            let mut design = DesignSpec::new(DesignKind::Ccd, spec.n, spec.horizon, mix(&[spec.seed, k as u64, 1]));
            design.burn_in = spec.burn_in;
            design.assignment = Assignment::Complete { cdt_per_day: spec.cdt_per_day };
            let store = run_burn_in(&world, spec.burn_in, design.seed);
            let with = generate(&design, store.snapshot(), None)?;
            design.personalized = false;
            let without = generate(&design, store.snapshot(), None)?;
            let wp = run_experiment(&world, &with, &store, design.seed)?;
            let np = run_experiment(&world, &without, &store, design.seed)?;
            let gaps = signed_imbalance(&wp, Cohort::CookieTreated, Cohort::DayTreated, 0)?;
            let first = spec.horizon - spec.window + 1;
            let (mut bias, mut var, mut imbalance) = (0.0, 0.0, 0.0);
            for t in first..=spec.horizon {
                let diffs = |c: Cohort| -> Vec<f64> { wp.members(c, t).map(|i| wp.outcome(i, t) - np.outcome(i, t)).collect() };
                let (ma, va, na) = moments(&diffs(Cohort::CookieTreated));
                let (mb, vb, nb) = moments(&diffs(Cohort::DayTreated));
                bias += ma - mb;
                var += va / na + vb / nb;
                imbalance += gaps[t - 1];
            }
            let w = spec.window as f64;
            Ok(StudySummary {
                study: format!("study{k}"),
                imbalance: imbalance / w,
                bias: bias / w,
                variance: (var / (w * w)).max(f64::MIN_POSITIVE),
            })
        })
        .collect()
}

fn moments(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = if xs.len() > 1 { xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (m, v, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn study(x: f64, y: f64, v: f64) -> StudySummary {
        StudySummary { study: format!("{x}"), imbalance: x, bias: y, variance: v }
    }

    #[test]
    fn two_points_are_interpolated() {
        let f = wls_line_fit(&[study(1.0, 3.0, 0.5), study(3.0, 7.0, 2.0)]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.intercept - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equal_weights_match_hand_ols() {
        // x = 0,1,2; y = 1,2,4: slope = 1.5, intercept = 5/6
        let f = wls_line_fit(&[study(0.0, 1.0, 1.0), study(1.0, 2.0, 1.0), study(2.0, 4.0, 1.0)]).unwrap();
        assert!((f.slope - 1.5).abs() < 1e-12);
        assert!((f.intercept - 5.0 / 6.0).abs() < 1e-12);
        // unit variances: Var(slope) = 1 / Sxx_centered = 1/2
        assert!((f.slope_se - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs_fail() {
        assert!(matches!(wls_line_fit(&[study(1.0, 1.0, 1.0)]), Err(Error::DegenerateDesign(_))));
        assert!(matches!(
            wls_line_fit(&[study(1.0, 1.0, 1.0), study(1.0, 2.0, 1.0)]),
            Err(Error::DegenerateDesign(_))
        ));
        assert!(matches!(wls_line_fit(&[study(1.0, 1.0, 0.0), study(2.0, 2.0, 1.0)]), Err(Error::Data(_))));
    }

    #[test]
    fn studies_round_trip() {
        let s = vec![study(0.5, 0.1, 0.01), study(-0.5, -0.2, 0.02)];
        let mut buf = Vec::new();
        write_studies_csv(&mut buf, &s).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("study,imbalance,bias,variance\n"));
        assert_eq!(read_studies_csv(&buf[..]).unwrap(), s);
    }

    #[test]
    fn estimator_names_round_trip() {
        for e in Estimator::ALL {
            assert_eq!(Estimator::parse(e.name()), Some(e));
        }
    }

    #[test]
    fn small_suite_bias_follows_imbalance_sign() {
        let spec = StudySuiteSpec { studies: 6, n: 300, horizon: 8, burn_in: 2, cdt_per_day: 10, window: 4, seed: 3 };
        let suite = synthetic_study_suite(&spec).unwrap();
        assert_eq!(suite.len(), 6);
        for s in &suite {
            assert!(s.variance > 0.0);
            assert_eq!(s.bias.signum(), s.imbalance.signum(), "{s:?}");
        }
        assert!(matches!(
            synthetic_study_suite(&StudySuiteSpec { window: 9, ..spec }),
            Err(Error::InvalidHorizon(9))
        ));
    }
}
