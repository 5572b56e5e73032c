//! Saturating-curve fits to short effect series and long-run extrapolation.

use std::collections::BTreeMap;
use std::io::Write;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::rng_from;
use crate::series::{EffectKind, EffectSeries};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurveFamily {
    /// `asymptote * (1 - exp(-rate * t))`.
    ExponentialSaturation { asymptote: f64, rate: f64 },
    Constant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    ExponentialSaturation,
    Constant,
}

impl FamilyKind {
    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::ExponentialSaturation => "exp_saturation",
            FamilyKind::Constant => "constant",
        }
    }
}

impl CurveFamily {
    pub fn kind(&self) -> FamilyKind {
        match self {
            CurveFamily::ExponentialSaturation { .. } => FamilyKind::ExponentialSaturation,
            CurveFamily::Constant(_) => FamilyKind::Constant,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match *self {
            CurveFamily::ExponentialSaturation { asymptote, rate } => asymptote * (1.0 - (-rate * t).exp()),
            CurveFamily::Constant(b) => b,
        }
    }

    /// Limit as t grows.
    pub fn asymptote(&self) -> f64 {
        match *self {
            CurveFamily::ExponentialSaturation { asymptote, .. } => asymptote,
            CurveFamily::Constant(b) => b,
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            CurveFamily::ExponentialSaturation { asymptote, rate } => vec![asymptote, rate],
            CurveFamily::Constant(b) => vec![b],
        }
    }
}

/// Partial derivatives of the saturation curve in (asymptote, rate).
pub fn jacobian(asymptote: f64, rate: f64, t: f64) -> [f64; 2] {
    let e = (-rate * t).exp();
    [1.0 - e, asymptote * t * e]
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub family: CurveFamily,
    pub rss: f64,
    /// Standard errors in the order of `CurveFamily::params`.
    pub stderr: Vec<f64>,
    pub converged: bool,
    /// False when the rate ran to a search bound, the curve is insensitive to
    /// the rate, or the information matrix is singular.
    pub identifiable: bool,
    pub iterations: usize,
}

const START_RATES: usize = 16;
const MAX_ITER: usize = 200;
const TOL: f64 = 1e-10;
/// Search bounds on log(rate).
const LOG_RATE_MIN: f64 = -9.210_340_371_976_182; // ln 1e-4
const LOG_RATE_MAX: f64 = 4.605_170_185_988_092; // ln 100

fn sse(y: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    y.iter().enumerate().map(|(k, v)| (v - f((k + 1) as f64)).powi(2)).sum()
}

fn profile_asymptote(y: &[f64], rate: f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (k, v) in y.iter().enumerate() {
        let g = 1.0 - (-rate * (k + 1) as f64).exp();
        num += v * g;
        den += g * g;
    }
    num / den
}

struct Refined {
    asymptote: f64,
    log_rate: f64,
    rss: f64,
    converged: bool,
    iterations: usize,
}

/// Damped Gauss-Newton in (asymptote, log rate).
fn refine(y: &[f64], mut b0: f64, mut phi: f64) -> Refined {
    let curve = |b0: f64, phi: f64| move |t: f64| b0 * (1.0 - (-phi.exp() * t).exp());
    let mut rss = sse(y, curve(b0, phi));
    for it in 1..=MAX_ITER {
        let rate = phi.exp();
        let (mut a11, mut a12, mut a22, mut g1, mut g2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (k, v) in y.iter().enumerate() {
            let t = (k + 1) as f64;
            let [j1, jr] = jacobian(b0, rate, t);
            let j2 = jr * rate;
            let r = v - b0 * j1;
            a11 += j1 * j1;
            a12 += j1 * j2;
            a22 += j2 * j2;
            g1 += j1 * r;
            g2 += j2 * r;
        }
        let det = a11 * a22 - a12 * a12;
        let (d0, d1) = if det.abs() > 1e-300 && det.is_finite() {
            ((a22 * g1 - a12 * g2) / det, (a11 * g2 - a12 * g1) / det)
        } else if a11 > 0.0 {
            (g1 / a11, 0.0)
        } else {
            return Refined { asymptote: b0, log_rate: phi, rss, converged: true, iterations: it };
        };
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let nb = b0 + step * d0;
            let np = (phi + step * d1).clamp(LOG_RATE_MIN, LOG_RATE_MAX);
            let nr = sse(y, curve(nb, np));
            if nr <= rss {
                accepted = Some((nb, np, nr));
                break;
            }
            step *= 0.5;
        }
        let Some((nb, np, nr)) = accepted else {
            return Refined { asymptote: b0, log_rate: phi, rss, converged: true, iterations: it };
        };
        let change = ((nb - b0).powi(2) + (np - phi).powi(2)).sqrt();
        let scale = (nb * nb + np * np).sqrt();
        b0 = nb;
        phi = np;
        rss = nr;
        if change <= TOL * (scale + TOL) {
            return Refined { asymptote: b0, log_rate: phi, rss, converged: true, iterations: it };
        }
    }
    Refined { asymptote: b0, log_rate: phi, rss, converged: false, iterations: MAX_ITER }
}

fn fit_saturation(y: &[f64]) -> FitResult {
    let mut best: Option<Refined> = None;
    for k in 0..START_RATES {
        let phi = (1e-3f64).ln() + (k as f64) / (START_RATES - 1) as f64 * (1e3f64).ln();
        let r = refine(y, profile_asymptote(y, phi.exp()), phi);
        if best.as_ref().is_none_or(|b| r.rss < b.rss) {
            best = Some(r);
        }
    }
    let best = best.expect("at least one start");
    let rate = best.log_rate.exp();
    let m = y.len();
    let (mut a11, mut a12, mut a22) = (0.0, 0.0, 0.0);
    let mut log_sensitivity = 0.0;
    for k in 0..m {
        let [j1, j2] = jacobian(best.asymptote, rate, (k + 1) as f64);
        a11 += j1 * j1;
        a12 += j1 * j2;
        a22 += j2 * j2;
        log_sensitivity += (j2 * rate).powi(2);
    }
    // the curve barely moves when log(rate) moves
    let flat = log_sensitivity.sqrt() <= 1e-6 * a11.sqrt() * best.asymptote.abs();
    let det = a11 * a22 - a12 * a12;
    let sigma2 = best.rss / (m as f64 - 2.0);
    let singular = !(det > 1e-14 * a11 * a22) || !det.is_finite();
    let stderr = if singular {
        vec![f64::INFINITY, f64::INFINITY]
    } else {
        vec![(sigma2 * a22 / det).sqrt(), (sigma2 * a11 / det).sqrt()]
    };
    let at_bound = best.log_rate <= LOG_RATE_MIN + 1e-9 || best.log_rate >= LOG_RATE_MAX - 1e-9;
    FitResult {
        family: CurveFamily::ExponentialSaturation { asymptote: best.asymptote, rate },
        rss: best.rss,
        stderr,
        converged: best.converged,
        identifiable: !singular && !at_bound && !flat,
        iterations: best.iterations,
    }
}

/// Least-squares fit of a curve family to a series indexed t = 1..T.
pub fn nls_fit(series: &EffectSeries, family: FamilyKind) -> Result<FitResult> {
    let y = series.values();
    let params = match family {
        FamilyKind::ExponentialSaturation => 2,
        FamilyKind::Constant => 1,
    };
    if y.len() < params + 1 {
        return Err(Error::InvalidHorizon(y.len()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("series has non-finite values".into()));
    }
    Ok(match family {
        FamilyKind::ExponentialSaturation => fit_saturation(y),
        FamilyKind::Constant => {
            let m = y.len() as f64;
            let mean = y.iter().sum::<f64>() / m;
            let rss = sse(y, |_| mean);
            FitResult {
                family: CurveFamily::Constant(mean),
                rss,
                stderr: vec![(rss / (m - 1.0) / m).sqrt()],
                converged: true,
                identifiable: true,
                iterations: 0,
            }
        }
    })
}

pub fn predict(fit: &FitResult, t: f64) -> Result<f64> {
    if !fit.converged {
        return Err(Error::Unconverged);
    }
    Ok(fit.family.value(t))
}

/// Sum of the fitted asymptotes of user learning, personalization, and
/// direct effects.
pub fn long_run_total(fits: &BTreeMap<EffectKind, FitResult>) -> Result<f64> {
    let mut total = 0.0;
    for kind in [EffectKind::UserLearning, EffectKind::Personalization, EffectKind::Direct] {
        let fit = fits.get(&kind).ok_or_else(|| Error::MissingFit(kind.name().into()))?;
        if !fit.converged {
            return Err(Error::Unconverged);
        }
        if let CurveFamily::ExponentialSaturation { rate, .. } = fit.family {
            if rate <= LOG_RATE_MIN.exp() * (1.0 + 1e-9) {
                return Err(Error::NonSaturating(kind.name().into()));
            }
        }
        total += fit.family.asymptote();
    }
    Ok(total)
}

/// Default family for each effect kind: direct effects are flat, the others
/// saturate.
pub fn default_family(kind: EffectKind) -> FamilyKind {
    match kind {
        EffectKind::Direct => FamilyKind::Constant,
        _ => FamilyKind::ExponentialSaturation,
    }
}

/// Writes one row per fitted series, plus a `long_run_total` row when given.
pub fn write_fits_csv<W: Write>(out: W, fits: &[(String, FitResult)], long_run: Option<f64>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kind", "family", "beta0", "beta1", "rss", "stderr0", "stderr1", "converged"])?;
    for (tag, fit) in fits {
        let p = fit.family.params();
        let opt = |v: Option<&f64>| v.map(|x| x.to_string()).unwrap_or_default();
        w.write_record([
            tag.clone(),
            fit.family.kind().name().to_string(),
            p[0].to_string(),
            opt(p.get(1)),
            fit.rss.to_string(),
            fit.stderr[0].to_string(),
            opt(fit.stderr.get(1)),
            fit.converged.to_string(),
        ])?;
    }
    if let Some(total) = long_run {
        w.write_record(["long_run_total", "sum", &total.to_string(), "", "", "", "", "true"])?;
    }
    w.flush()?;
    Ok(())
}

/// Synthetic effect curves with additive Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub horizon: usize,
    pub personalization_asymptote: f64,
    pub personalization_rate: f64,
    pub learning_asymptote: f64,
    pub learning_rate: f64,
    pub direct: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            horizon: 45,
            personalization_asymptote: 1.0,
            personalization_rate: 0.075,
            learning_asymptote: -3.0,
            learning_rate: 0.025,
            direct: 5.0,
            noise_sd: 0.1,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn true_asymptote(&self, kind: EffectKind) -> f64 {
        match kind {
            EffectKind::UserLearning => self.learning_asymptote,
            EffectKind::Personalization => self.personalization_asymptote,
            EffectKind::Direct => self.direct,
            EffectKind::Total => self.learning_asymptote + self.personalization_asymptote + self.direct,
        }
    }
}

/// The three noisy series. Noise for period t depends only on the seed, the
/// kind, and t, so shorter horizons see prefixes of longer ones.
pub fn synth_series(spec: &SynthSpec) -> Result<BTreeMap<EffectKind, EffectSeries>> {
    if spec.horizon == 0 {
        return Err(Error::InvalidHorizon(0));
    }
    if !(spec.noise_sd >= 0.0) {
        return Err(Error::InvalidWorld("noise sd must be non-negative".into()));
    }
    let curves = [
        (EffectKind::UserLearning, CurveFamily::ExponentialSaturation { asymptote: spec.learning_asymptote, rate: spec.learning_rate }),
        (
            EffectKind::Personalization,
            CurveFamily::ExponentialSaturation { asymptote: spec.personalization_asymptote, rate: spec.personalization_rate },
        ),
        (EffectKind::Direct, CurveFamily::Constant(spec.direct)),
    ];
    Ok(curves
        .into_iter()
        .enumerate()
        .map(|(tag, (kind, curve))| {
            let values = (1..=spec.horizon)
                .map(|t| {
                    let eps: f64 = StandardNormal.sample(&mut rng_from(&[spec.seed, 0x5E, tag as u64, t as u64]));
                    curve.value(t as f64) + spec.noise_sd * eps
                })
                .collect();
            (kind, EffectSeries::new(kind, values))
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseRow {
    pub horizon: usize,
    pub kind: EffectKind,
    pub mse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LongRunSummary {
    pub horizon: usize,
    pub mean: f64,
    pub stderr: f64,
    /// Replicates whose total could not be formed.
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MseStudy {
    pub rows: Vec<MseRow>,
    pub long_run: Vec<LongRunSummary>,
}

/// Fits every replicate at every horizon and reports the mean squared error
/// of each fitted asymptote.
pub fn mse_study(template: &SynthSpec, horizons: &[usize], replicates: usize) -> Result<MseStudy> {
    if replicates == 0 {
        return Err(Error::InvalidDesign("need at least one replicate".into()));
    }
    let kinds = [EffectKind::UserLearning, EffectKind::Personalization, EffectKind::Direct];
    let mut rows = Vec::new();
    let mut long_run = Vec::new();
    for &h in horizons {
        let per_rep: Vec<(Vec<f64>, Option<f64>)> = (0..replicates)
            .into_par_iter()
            .map(|r| {
                let spec = SynthSpec { horizon: h, seed: crate::rng::mix(&[template.seed, r as u64]), ..*template };
                let series = synth_series(&spec)?;
                let mut fits = BTreeMap::new();
                let mut errs = Vec::new();
                for kind in kinds {
                    let fit = nls_fit(&series[&kind], default_family(kind))?;
                    errs.push((fit.family.asymptote() - spec.true_asymptote(kind)).powi(2));
                    fits.insert(kind, fit);
                }
                Ok((errs, long_run_total(&fits).ok()))
            })
            .collect::<Result<_>>()?;
        for (k, kind) in kinds.into_iter().enumerate() {
            let mse = per_rep.iter().map(|(e, _)| e[k]).sum::<f64>() / replicates as f64;
            rows.push(MseRow { horizon: h, kind, mse });
        }
        let totals: Vec<f64> = per_rep.iter().filter_map(|(_, t)| *t).collect();
        let m = totals.len() as f64;
        let mean = totals.iter().sum::<f64>() / m;
        let var = totals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
        long_run.push(LongRunSummary { horizon: h, mean, stderr: (var / m).sqrt(), failures: replicates - totals.len() });
    }
    Ok(MseStudy { rows, long_run })
}

pub fn write_mse_csv<W: Write>(out: W, rows: &[MseRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["horizon", "kind", "mse"])?;
    for r in rows {
        w.write_record([r.horizon.to_string(), r.kind.name().to_string(), r.mse.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
