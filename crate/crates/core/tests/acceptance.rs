//! Acceptance suite: one line per criterion, non-zero exit on any failure.

mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config as PtConfig, TestRunner};
use rand::Rng;

use ccd_core::cli::{cmd_simulate, Overrides};
use ccd_core::design::{PeriodProbs, UserAssignment};
use ccd_core::estimate::{
    bias_cluster_oracle, bias_switch_oracle, contrast, est_ccd_direct, est_ccd_learning, est_clustered_learning,
    est_freeze_learning, est_freeze_personalization, est_switch_learning, est_switch_personalization,
    synthetic_study_suite, wls_line_fit, StudySuiteSpec,
};
use ccd_core::extrapolate::{jacobian, mse_study, nls_fit, SynthSpec};
use ccd_core::model::Counterfactual;
use ccd_core::rng::rng_from;
use ccd_core::worlds::{
    appendix_d_worlds, asymptotic_personalization_gaps, figure2_world, CatalogWorld, LinearSpec, LinearWorld,
    Separability, TableWorld,
};
use ccd_core::{
    generate, run_burn_in, run_experiment, Assignment, BehaviorWorld, Cohort, CohortSchedule, ContrastSpec, DesignKind,
    DesignSpec, EffectKind, EffectSeries, FamilyKind, MatchMode, Weighting,
};

use common::{enumerate, marginals, mean_se, movie_spec, movie_world, run_movie, BURN_IN, HORIZON};

type Outcome = Result<(bool, String), String>;

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("decomposition identity", decomposition),
        ("direct effect", direct_effect),
        ("spurious learning", spurious_learning),
        ("corrective designs", corrective_designs),
        ("personalization recovery", personalization_recovery),
        ("unbiasedness by enumeration", enumeration),
        ("telescoping identities", telescoping),
        ("extrapolation error", extrapolation),
        ("fit optimality and gradients", fit_optimality),
        ("bias follows imbalance", bias_vs_imbalance),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        if !ok {
            failed += 1;
        }
        let tag = if ok { "PASS" } else { "FAIL" };
        println!("[{tag}] {:>2} {name}: {detail} ({:.1}s)", k + 1, start.elapsed().as_secs_f64());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn decomposition() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut slowest = Duration::ZERO;
    for seed in [1u64, 2, 3] {
        let start = Instant::now();
        let world = movie_world(seed);
        let truth = Counterfactual::with_burn_in(&world, seed, BURN_IN).effects(HORIZON).map_err(err)?;
        worst = worst.max(truth.residual());
        slowest = slowest.max(start.elapsed());
    }
    let ok = worst <= 1e-12 && slowest < Duration::from_secs(60);
    Ok((ok, format!("max residual {worst:.2e}, slowest seed {:.2}s", slowest.as_secs_f64())))
}

const REPLICATES: u64 = 48;

/// Replicate-averaged window mean of `estimator` on the movie world.
fn movie_average(
    kind: DesignKind,
    tweak: impl Fn(&mut DesignSpec),
    estimator: impl Fn(&ccd_core::Panel) -> ccd_core::Result<EffectSeries>,
    window: (usize, usize),
) -> Result<(f64, f64), String> {
    let mut means = Vec::new();
    for r in 0..REPLICATES {
        let world = movie_world(100 + r);
        let mut spec = movie_spec(kind, 1000 + r);
        tweak(&mut spec);
        let run = run_movie(&world, &spec).map_err(err)?;
        means.push(estimator(&run.panel).map_err(err)?.window_mean(window.0, window.1));
    }
    Ok(mean_se(&means))
}

fn direct_effect() -> Outcome {
    let (ccd, ccd_se) = movie_average(DesignKind::Ccd, |_| {}, |p| est_ccd_direct(p, Weighting::Hajek), (20, 50))?;
    let (clu, clu_se) =
        movie_average(DesignKind::ClusteredCcd, |_| {}, |p| est_ccd_direct(p, Weighting::Hajek), (20, 50))?;
    let ok = (ccd - 0.25).abs() <= 0.02 && clu - 0.25 >= 0.01;
    Ok((ok, format!("ccd {ccd:.4} (se {ccd_se:.4}), clustered {clu:.4} (se {clu_se:.4})")))
}

/// CCD on a catalog world; returns the learning estimate and the oracle.
fn catalog_ccd(world: &CatalogWorld, seed: u64) -> Result<(EffectSeries, EffectSeries), String> {
    let (n, horizon, burn_in) = (world.population(), 100, 10);
    let mut spec = DesignSpec::new(DesignKind::Ccd, n, horizon, seed);
    spec.burn_in = burn_in;
    spec.assignment = Assignment::Complete { cdt_per_day: n / 2 / horizon };
    let store = run_burn_in(world, burn_in, seed);
    let schedule = generate(&spec, store.snapshot(), None).map_err(err)?;
    let panel = run_experiment(world, &schedule, &store, seed).map_err(err)?;
    let est = est_ccd_learning(&panel, Weighting::Hajek).map_err(err)?;
    let truth = Counterfactual::with_burn_in(world, seed, burn_in).effects(horizon).map_err(err)?;
    Ok((est, truth.user_learning))
}

fn window_stats(s: &EffectSeries, from: usize, to: usize) -> (f64, f64) {
    let se = s.stderr().map_or(0.0, |e| e[from - 1..to].iter().map(|v| v * v).sum::<f64>().sqrt());
    (s.window_mean(from, to), se / (to - from + 1) as f64)
}

fn spurious_learning() -> Outcome {
    let n = 2000;
    let (est, truth) = catalog_ccd(&figure2_world(n).with_jitter(0.01, 7), 7)?;
    let (fig2, _) = window_stats(&est, 81, 100);
    let fig2_zero = truth.values().iter().all(|&v| v == 0.0);
    let (pos, neg) = appendix_d_worlds(n);
    let (pos_est, pos_truth) = catalog_ccd(&pos.with_jitter(0.01, 8), 8)?;
    let (neg_est, neg_truth) = catalog_ccd(&neg.with_jitter(0.01, 9), 9)?;
    let (p, p_se) = window_stats(&pos_est, 81, 100);
    let (q, q_se) = window_stats(&neg_est, 81, 100);
    let zero = |s: &EffectSeries| s.values().iter().all(|&v| v == 0.0);
    let ok = (fig2 - 0.10).abs() <= 0.01
        && fig2_zero
        && p > 3.0 * p_se
        && q < -3.0 * q_se
        && zero(&pos_truth)
        && zero(&neg_truth);
    Ok((
        ok,
        format!(
            "figure-2 {fig2:.4} (oracle zero: {fig2_zero}), positive world {p:.4} (se {p_se:.4}), negative world {q:.4} (se {q_se:.4})"
        ),
    ))
}

fn corrective_designs() -> Outcome {
    let w = (41, 50);
    let hajek = Weighting::Hajek;
    let (sw, _) = movie_average(DesignKind::CcdSwitch, |_| {}, |p| est_switch_learning(p, hajek), w)?;
    let (fr, _) = movie_average(DesignKind::CcdFreeze, |_| {}, |p| est_freeze_learning(p, hajek), w)?;
    let (cl, _) = movie_average(DesignKind::ClusteredCcd, |_| {}, |p| est_clustered_learning(p, hajek), w)?;
    let (np, _) = movie_average(DesignKind::Ccd, |s| s.personalized = false, |p| est_ccd_learning(p, hajek), w)?;
    let (ccd, _) = movie_average(DesignKind::Ccd, |_| {}, |p| est_ccd_learning(p, hajek), w)?;
    let ok = [sw, fr, cl, np].iter().all(|v| v.abs() < 0.03) && ccd > 0.03;
    Ok((
        ok,
        format!("switch {sw:.4}, freeze {fr:.4}, clustered {cl:.4}, unpersonalized {np:.4}, ccd {ccd:.4}"),
    ))
}

fn personalization_recovery() -> Outcome {
    let seed = 5;
    let world = movie_world(seed);
    let gaps = asymptotic_personalization_gaps(&world, BURN_IN, 200, seed).map_err(err)?;
    let (oracle, oracle_se) = mean_se(&gaps);
    let mut detail = vec![format!("oracle {oracle:.4} (se {oracle_se:.4})")];
    let mut ok = true;
    for (kind, name) in [(DesignKind::CcdSwitch, "switch"), (DesignKind::CcdFreeze, "freeze")] {
        let run = run_movie(&world, &movie_spec(kind, seed)).map_err(err)?;
        let est = match kind {
            DesignKind::CcdSwitch => est_switch_personalization(&run.panel, Weighting::Hajek),
            _ => est_freeze_personalization(&run.panel, Weighting::Hajek),
        }
        .map_err(err)?;
        let value = est.at(HORIZON);
        let se = est.stderr().map_or(0.0, |s| s[HORIZON - 1]);
        let tol = 3.0 * (se * se + oracle_se * oracle_se).sqrt();
        ok &= (value - oracle).abs() <= tol;
        detail.push(format!("{name} {value:.4} (tolerance {tol:.4})"));
    }
    Ok((ok, detail.join(", ")))
}

/// Expectation of an estimator over weighted assignments.
fn expectation(
    joint: &[(Vec<UserAssignment>, f64)],
    build: impl Fn(&[UserAssignment]) -> ccd_core::Result<CohortSchedule> + Sync,
    estimate: impl Fn(&CohortSchedule) -> ccd_core::Result<Vec<f64>> + Sync,
    horizon: usize,
) -> Result<Vec<f64>, String> {
    let total: f64 = joint.iter().map(|(_, p)| p).sum();
    let mut acc = vec![0.0; horizon];
    for (a, p) in joint {
        let schedule = build(a).map_err(err)?;
        for (slot, v) in acc.iter_mut().zip(estimate(&schedule).map_err(err)?) {
            *slot += p / total * v;
        }
    }
    Ok(acc)
}

fn ht(a: Cohort, b: Cohort) -> ContrastSpec {
    ContrastSpec { allow_empty: true, ..ContrastSpec::new(a, b, Weighting::HorvitzThompson) }
}

fn max_gap(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

fn probs_of(entries: &[(Cohort, f64)]) -> PeriodProbs {
    entries.iter().copied().collect()
}

fn enumeration() -> Outcome {
    let start = Instant::now();
    let (n, h, seed) = (4, 3, 11);
    let pre = vec![vec![0.0; 2]; n];
    let world = TableWorld::new(n, h, Separability::None, 21);
    let truth = Counterfactual::new(&world, seed).effects(h).map_err(err)?;
    let store = run_burn_in(&world, 0, seed);
    let sum = |a: &EffectSeries, b: &EffectSeries| a.values().iter().zip(b.values()).map(|(x, y)| x + y).collect::<Vec<_>>();
    let mut gaps = BTreeMap::new();

    // A/B
    let spec = DesignSpec::new(DesignKind::Ab, n, h, seed);
    let opts = [(UserAssignment::Treated, 0.5), (UserAssignment::Control, 0.5)];
    let probs = vec![probs_of(&[(Cohort::Treated, 0.5), (Cohort::Control, 0.5)]); h];
    let joint = enumerate(&opts, n);
    let build = |a: &[UserAssignment]| CohortSchedule::from_assignments(&spec, a.to_vec(), probs.clone(), None, None);
    let panel_contrast = |s: &CohortSchedule, c: ContrastSpec| -> ccd_core::Result<Vec<f64>> {
        let panel = run_experiment(&world, s, &store, seed)?;
        Ok(contrast(&panel, c)?.values().to_vec())
    };
    let total = expectation(&joint, build, |s| panel_contrast(s, ht(Cohort::Treated, Cohort::Control)), h)?;
    gaps.insert("total", max_gap(&total, truth.total.values()));

    // CCD
    let spec = DesignSpec::new(DesignKind::Ccd, n, h, seed);
    let mut opts = vec![(UserAssignment::CookieTreated, 0.25), (UserAssignment::CookieControl, 0.25)];
    opts.extend((1..=h).map(|d| (UserAssignment::CookieDay(Some(d)), 0.125)));
    opts.push((UserAssignment::CookieDay(None), 0.125));
    let joint = enumerate(&opts, n);
    let probs = marginals(&joint, h);
    let build = |a: &[UserAssignment]| CohortSchedule::from_assignments(&spec, a.to_vec(), probs.clone(), None, None);
    let learning = expectation(
        &joint,
        build,
        |s| panel_contrast(s, ht(Cohort::CookieTreated, Cohort::DayTreated)),
        h,
    )?;
    gaps.insert("learning+personalization", max_gap(&learning, &sum(&truth.user_learning, &truth.personalization)));
    let direct = expectation(&joint, build, |s| panel_contrast(s, ht(Cohort::DayTreated, Cohort::CookieControl)), h)?;
    gaps.insert("direct", max_gap(&direct, truth.direct.values()));

    // switch, conditioned on a treated cookie-day user every period
    let mut spec = DesignSpec::new(DesignKind::CcdSwitch, n, h, seed);
    spec.matching = MatchMode::NearestNeighbor;
    let mut opts = vec![
        (UserAssignment::CookieTreated, 0.125),
        (UserAssignment::CookieControl, 0.125),
        (UserAssignment::Switch, 0.25),
    ];
    opts.extend((1..=h).map(|d| (UserAssignment::CookieDay(Some(d)), 0.125)));
    opts.push((UserAssignment::CookieDay(None), 0.125));
    let joint: Vec<_> = enumerate(&opts, n)
        .into_iter()
        .filter(|(a, _)| (1..=h).all(|t| a.iter().any(|x| x.day() == Some(t))))
        .collect();
    let probs = marginals(&joint, h);
    let build =
        |a: &[UserAssignment]| CohortSchedule::from_assignments(&spec, a.to_vec(), probs.clone(), Some(&pre), None);
    let sl = expectation(&joint, build, |s| panel_contrast(s, ht(Cohort::Switch, Cohort::DayTreated)), h)?;
    let sp = expectation(&joint, build, |s| panel_contrast(s, ht(Cohort::CookieTreated, Cohort::Switch)), h)?;
    let bias = expectation(&joint, build, |s| Ok(bias_switch_oracle(&world, s, &store, seed)?.values().to_vec()), h)?;
    let sl_target: Vec<f64> = truth.user_learning.values().iter().zip(&bias).map(|(u, b)| u + b).collect();
    let sp_target: Vec<f64> = truth.personalization.values().iter().zip(&bias).map(|(p, b)| p - b).collect();
    gaps.insert("switch learning", max_gap(&sl, &sl_target));
    gaps.insert("switch personalization", max_gap(&sp, &sp_target));

    // clustered, two clusters of two with leave-one-out
    let world = TableWorld::new(n, h, Separability::Preferences, 22);
    let truth = Counterfactual::new(&world, seed).effects(h).map_err(err)?;
    let mut spec = DesignSpec::new(DesignKind::ClusteredCcd, n, h, seed);
    spec.cluster_count = Some(2);
    spec.leave_one_out = true;
    let map = vec![0, 0, 1, 1];
    let mut opts = vec![(UserAssignment::CookieTreated, 0.25), (UserAssignment::CookieControl, 0.25)];
    opts.extend((1..=h).map(|d| (UserAssignment::CookieDay(Some(d)), 0.125)));
    opts.push((UserAssignment::CookieDay(None), 0.125));
    let joint = enumerate(&opts, n);
    let probs = marginals(&joint, h);
    let build = |a: &[UserAssignment]| {
        CohortSchedule::from_assignments(&spec, a.to_vec(), probs.clone(), None, Some(map.clone()))
    };
    let cl = expectation(
        &joint,
        build,
        |s| {
            let panel = run_experiment(&world, s, &store, seed)?;
            Ok(contrast(&panel, ht(Cohort::CookieTreated, Cohort::DayTreated))?.values().to_vec())
        },
        h,
    )?;
    let schedules: Vec<(CohortSchedule, f64)> =
        joint.iter().map(|(a, p)| build(a).map(|s| (s, *p))).collect::<ccd_core::Result<_>>().map_err(err)?;
    let cluster_bias = bias_cluster_oracle(&world, &schedules, &store, seed, None).map_err(err)?;
    let target: Vec<f64> =
        truth.user_learning.values().iter().zip(cluster_bias.values()).map(|(u, b)| u + b).collect();
    gaps.insert("clustered learning", max_gap(&cl, &target));

    let worst = gaps.values().copied().fold(0.0, f64::max);
    let elapsed = start.elapsed();
    let ok = worst <= 1e-12 && elapsed < Duration::from_secs(10);
    let listed: Vec<String> = gaps.iter().map(|(k, v)| format!("{k} {v:.1e}")).collect();
    Ok((ok, format!("max gap {worst:.2e} [{}]", listed.join(", "))))
}

fn telescoping() -> Outcome {
    let mut runner = TestRunner::new(PtConfig { cases: 100, failure_persistence: None, ..PtConfig::default() });
    let strategy = (any::<bool>(), 40usize..200, 2usize..8, 1usize..4, any::<usize>(), any::<u64>());
    let checked = std::cell::Cell::new(0usize);
    let result = runner.run(&strategy, |(switch, n, horizon, burn_in, draw, seed)| {
        // the cookie-day pool holds at least 35% of users
        let per_day = 1 + draw % (n * 35 / 100 / horizon);
        let world = LinearWorld::new(LinearSpec { n, seed, ..LinearSpec::default() }).unwrap();
        let kind = if switch { DesignKind::CcdSwitch } else { DesignKind::CcdFreeze };
        let mut spec = DesignSpec::new(kind, n, horizon, seed);
        spec.burn_in = burn_in;
        spec.fractions.cookie = 0.4;
        if switch {
            spec.fractions.switch = 0.2;
        } else {
            spec.fractions.freeze = 0.2;
        }
        spec.assignment = Assignment::Complete { cdt_per_day: per_day };
        let store = run_burn_in(&world, burn_in, seed);
        let schedule = generate(&spec, store.snapshot(), None).unwrap();
        let panel = run_experiment(&world, &schedule, &store, seed).unwrap();
        for w in [Weighting::HorvitzThompson, Weighting::Hajek] {
            let whole = est_ccd_learning(&panel, w).unwrap();
            let (l, p) = if switch {
                (est_switch_learning(&panel, w).unwrap(), est_switch_personalization(&panel, w).unwrap())
            } else {
                (est_freeze_learning(&panel, w).unwrap(), est_freeze_personalization(&panel, w).unwrap())
            };
            for t in 1..=horizon {
                let gap = (l.at(t) + p.at(t) - whole.at(t)).abs();
                prop_assert!(gap <= 1e-12 * (1.0 + whole.at(t).abs()), "t={t} gap={gap:e}");
            }
        }
        checked.set(checked.get() + 1);
        Ok(())
    });
    Ok((result.is_ok(), format!("{} random panels checked{}", checked.get(), result.err().map(|e| format!(": {e}")).unwrap_or_default())))
}

fn extrapolation() -> Outcome {
    let start = Instant::now();
    let horizons: Vec<usize> = (1..=9).map(|k| 5 * k).collect();
    let study = mse_study(&SynthSpec::default(), &horizons, 300).map_err(err)?;
    let mse = |t: usize, kind: EffectKind| {
        study.rows.iter().find(|r| r.horizon == t && r.kind == kind).map(|r| r.mse).unwrap_or(f64::NAN)
    };
    let learning_drop = mse(45, EffectKind::UserLearning) < mse(5, EffectKind::UserLearning) / 10.0;
    let direct_small = horizons.iter().all(|&t| mse(t, EffectKind::Direct) < 0.01);
    let ordering = horizons
        .iter()
        .filter(|&&t| t <= 15)
        .all(|&t| mse(t, EffectKind::UserLearning) > mse(t, EffectKind::Personalization));
    let last = study.long_run.iter().find(|l| l.horizon == 45).ok_or("no long-run summary at 45")?;
    let long_run = (last.mean - 3.0).abs() <= 3.0 * last.stderr;
    let elapsed = start.elapsed();
    let ok = learning_drop && direct_small && ordering && long_run && elapsed < Duration::from_secs(120);
    Ok((
        ok,
        format!(
            "learning mse {:.3} -> {:.4}, max direct mse {:.5}, learning>personalization for T<=15: {ordering}, long-run {:.3} (se {:.3}, {} failures)",
            mse(5, EffectKind::UserLearning),
            mse(45, EffectKind::UserLearning),
            horizons.iter().map(|&t| mse(t, EffectKind::Direct)).fold(0.0, f64::max),
            last.mean,
            last.stderr,
            last.failures
        ),
    ))
}

fn grid_rss(y: &[f64]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..400 {
        let rate = 1e-3 * 1000f64.powf(i as f64 / 399.0);
        let shape: Vec<f64> = (1..=y.len()).map(|t| 1.0 - (-rate * t as f64).exp()).collect();
        for j in 0..400 {
            let a = -12.0 + 24.0 * j as f64 / 399.0;
            let rss: f64 = y.iter().zip(&shape).map(|(v, s)| (v - a * s).powi(2)).sum();
            best = best.min(rss);
        }
    }
    best
}

fn fit_optimality() -> Outcome {
    let mut rng = rng_from(&[0xF17]);
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_jac: f64 = 0.0;
    for _ in 0..50 {
        let m = rng.random_range(10..60);
        let a = rng.random_range(-6.0..6.0);
        let rate = 10f64.powf(rng.random_range(-2.5..-0.3));
        let y: Vec<f64> = (1..=m)
            .map(|t| a * (1.0 - (-rate * t as f64).exp()) + 0.1 * rng.random_range(-1.7..1.7))
            .collect();
        let fit = nls_fit(&EffectSeries::new(EffectKind::Personalization, y.clone()), FamilyKind::ExponentialSaturation)
            .map_err(err)?;
        worst_excess = worst_excess.max(fit.rss - grid_rss(&y));
        for t in [1.0, 7.0, m as f64] {
            let j = jacobian(a, rate, t);
            let f = |a: f64, r: f64| a * (1.0 - (-r * t).exp());
            let (ha, hr) = (1e-6 * a.abs().max(1.0), 1e-6 * rate);
            let fd = [(f(a + ha, rate) - f(a - ha, rate)) / (2.0 * ha), (f(a, rate + hr) - f(a, rate - hr)) / (2.0 * hr)];
            let norm = j[0].hypot(j[1]);
            worst_jac = worst_jac.max((j[0] - fd[0]).hypot(j[1] - fd[1]) / norm);
        }
    }
    let ok = worst_excess <= 1e-9 && worst_jac <= 1e-5;
    Ok((ok, format!("worst rss excess over grid {worst_excess:.2e}, worst jacobian error {worst_jac:.2e}")))
}

fn bias_vs_imbalance() -> Outcome {
    let studies = synthetic_study_suite(&StudySuiteSpec::default()).map_err(err)?;
    let fit = wls_line_fit(&studies).map_err(err)?;
    let agree = studies.iter().filter(|s| s.bias.signum() == s.imbalance.signum()).count();
    let share = agree as f64 / studies.len() as f64;
    let ok = fit.slope > 3.0 * fit.slope_se && share >= 0.9;
    Ok((
        ok,
        format!(
            "slope {:.4} (se {:.4}) over {} studies, signs agree in {:.0}%",
            fit.slope,
            fit.slope_se,
            studies.len(),
            100.0 * share
        ),
    ))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        "[world]\nkind = \"movie\"\nseed = 4\nn = 500\n\n[design]\nkind = \"ccd_switch\"\nhorizon = 8\nseed = 9\nburn_in = 3\ncdt_per_day = 10\nmatching = \"random_within_cluster\"\n\n[design.fractions]\ncookie = 0.4\nswitch = 0.2\n\n[output]\nfeatures = true\n",
    )
    .map_err(err)?;
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = Overrides { out: Some(out.clone()), seed: None, workers: None };
        cmd_simulate(&config, &o).map_err(err)?;
        let mut files = BTreeMap::new();
        for entry in std::fs::read_dir(&out).map_err(err)? {
            let path = entry.map_err(err)?.path();
            files.insert(path.file_name().unwrap().to_owned(), std::fs::read(&path).map_err(err)?);
        }
        outputs.push(files);
    }
    let same = outputs[0] == outputs[1] && !outputs[0].is_empty();
    Ok((same, format!("{} files compared", outputs[0].len())))
}
