use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::config::{load_config, ClusterSource, RunConfig, WorldConfig, WorldKind, Variant};
use super::CliError;
use crate::design::{design_probabilities, generate, random_clusters, Cohort, CohortSchedule, DesignKind, DesignSpec};
use crate::engine::{run_burn_in, run_experiment, FeatureStore, Panel, PanelRow};
use crate::error::{Error, Result};
use crate::estimate::personalization_imbalance;
use crate::extrapolate::{default_family, long_run_total, mse_study, nls_fit, predict, synth_series, write_fits_csv, write_mse_csv, FitResult};
use crate::model::{BehaviorWorld, Counterfactual};
use crate::series::{read_series_csv, write_series_csv, EffectKind, EffectSeries};
use crate::worlds::{
    appendix_d_worlds, asymptotic_personalization_oracle, centroid_clusters, figure2_world, sample_population,
    CatalogWorld, Concentration, MovieWorld,
};

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

type CmdResult = std::result::Result<(), CliError>;

enum World {
    Movie(MovieWorld),
    Catalog(CatalogWorld),
}

impl World {
    fn behavior(&self) -> &dyn BehaviorWorld {
        match self {
            World::Movie(w) => w,
            World::Catalog(w) => w,
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn load(path: &Path, o: &Overrides) -> std::result::Result<RunConfig, CliError> {
    let mut cfg = load_config(path)?;
    if let Some(seed) = o.seed {
        if let Some(d) = cfg.design.as_mut() {
            d.seed = seed;
        } else if let Some(w) = cfg.world.as_mut() {
            w.seed = seed;
        }
    }
    if o.workers.is_some() {
        cfg.workers = o.workers;
    }
    if o.out.is_some() {
        cfg.output.dir = o.out.clone();
    }
    if cfg.workers == Some(0) {
        return Err(config_err("workers must be at least 1"));
    }
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> std::result::Result<PathBuf, CliError> {
    let dir = cfg.output.dir.clone().ok_or_else(|| config_err("missing key `output.dir` (or pass --out)"))?;
    fs::create_dir_all(&dir).map_err(Error::from)?;
    Ok(dir)
}

fn with_workers<T: Send>(cfg: &RunConfig, f: impl FnOnce() -> T + Send) -> std::result::Result<T, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.workers {
        b = b.num_threads(w);
    }
    let pool = b.build().map_err(|e| config_err(format!("worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, body: impl FnOnce(&mut BufWriter<fs::File>) -> Result<()>) -> Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    let mut w = BufWriter::new(fs::File::create(&tmp)?);
    body(&mut w)?;
    w.flush()?;
    drop(w);
    fs::rename(&tmp, path)?;
    Ok(())
}

fn build_world(w: &WorldConfig) -> std::result::Result<World, CliError> {
    let n = || w.n.ok_or_else(|| config_err("missing key `world.n`"));
    Ok(match w.kind {
        WorldKind::Movie => {
            let prefs = sample_population(
                n()?,
                w.clusters,
                Concentration::InverseComplement { scale: w.concentration },
                w.target_mean,
                w.seed,
            )?;
            let world = MovieWorld::new(prefs, w.lift)?;
            World::Movie(if w.personalized { world } else { world.without_personalization() })
        }
        WorldKind::Figure2 => World::Catalog(figure2_world(n()?)),
        WorldKind::AppendixD => {
            let (pos, neg) = appendix_d_worlds(n()?);
            World::Catalog(match w.variant.ok_or_else(|| config_err("missing key `world.variant`"))? {
                Variant::Positive => pos,
                Variant::Negative => neg,
            })
        }
        WorldKind::Synthetic => return Err(config_err("synthetic worlds only support `fit` and `mse-study`")),
    })
}

struct Prepared {
    world: World,
    spec: DesignSpec,
    store: FeatureStore,
    clusters: Option<Vec<usize>>,
}

fn prepare(cfg: &RunConfig) -> std::result::Result<Prepared, CliError> {
    let wc = cfg.world()?;
    let world = build_world(wc)?;
    let n = world.behavior().population();
    let spec = cfg.design()?.spec(n).map_err(CliError::Config)?;
    let store = run_burn_in(world.behavior(), spec.burn_in, spec.seed);
    let needs_map = spec.kind == DesignKind::ClusteredCcd
        || (spec.kind == DesignKind::CcdSwitch && spec.matching == crate::design::MatchMode::RandomWithinCluster);
    let clusters = if needs_map {
        let k = spec.cluster_count.unwrap_or(wc.clusters);
        let source = cfg.design()?.cluster_source.unwrap_or(match world {
            World::Movie(_) => ClusterSource::Population,
            World::Catalog(_) => ClusterSource::Centroid,
        });
        Some(match (source, &world) {
            (ClusterSource::Population, World::Movie(m)) => {
                if k != wc.clusters {
                    return Err(config_err("design.cluster_count must equal world.clusters for population clusters"));
                }
                m.prefs().cluster.clone()
            }
            (ClusterSource::Population, _) => return Err(config_err("population clusters need a movie world")),
            (ClusterSource::Centroid, _) => centroid_clusters(store.snapshot(), k, spec.seed)?,
            (ClusterSource::Random, _) => random_clusters(n, k, spec.seed)?,
        })
    } else {
        None
    };
    Ok(Prepared { world, spec, store, clusters })
}

fn schedule_of(p: &Prepared) -> Result<CohortSchedule> {
    generate(&p.spec, p.store.snapshot(), p.clusters.as_deref())
}

fn write_population(path: &Path, world: &World) -> Result<()> {
    write_atomic(path, |w| match world {
        World::Movie(m) => m.prefs().write_csv(w),
        World::Catalog(c) => {
            let mut wr = csv::Writer::from_writer(w);
            wr.write_record(["user", "item", "control_rate", "treated_rate", "in_house"])?;
            for i in 0..c.population() {
                let rates = c.preferences(i, &[]);
                for (k, item) in c.items().iter().enumerate() {
                    wr.write_record([
                        i.to_string(),
                        k.to_string(),
                        rates[2 * k].to_string(),
                        rates[2 * k + 1].to_string(),
                        (item.in_house as u8).to_string(),
                    ])?;
                }
            }
            wr.flush()?;
            Ok(())
        }
    })
}

pub fn cmd_simulate(config: &Path, o: &Overrides) -> CmdResult {
    let cfg = load(config, o)?;
    let dir = out_dir(&cfg)?;
    with_workers(&cfg, || -> CmdResult {
        let p = prepare(&cfg)?;
        let schedule = schedule_of(&p)?;
        let panel = run_experiment(p.world.behavior(), &schedule, &p.store, p.spec.seed)?;
        write_population(&dir.join("population.csv"), &p.world)?;
        write_atomic(&dir.join("schedule.csv"), |w| schedule.write_csv(w))?;
        write_atomic(&dir.join("panel.csv"), |w| panel.write_csv(w))?;
        if cfg.output.features {
            write_atomic(&dir.join("features.csv"), |w| panel.write_features_csv(w))?;
        }
        Ok(())
    })?
}

pub fn cmd_oracle(config: &Path, o: &Overrides) -> CmdResult {
    let cfg = load(config, o)?;
    let dir = out_dir(&cfg)?;
    with_workers(&cfg, || -> CmdResult {
        let p = prepare(&cfg)?;
        let cf = Counterfactual::from_store(p.world.behavior(), p.spec.seed, p.store.clone());
        let truth = cf.effects(p.spec.horizon)?;
        let reference = match &p.world {
            World::Movie(m) => Some(asymptotic_personalization_oracle(
                m,
                p.spec.burn_in,
                cfg.analysis.oracle_horizon,
                p.spec.seed,
            )?),
            World::Catalog(_) => None,
        };
        write_atomic(&dir.join("truth.csv"), |w| {
            let mut wr = csv::Writer::from_writer(w);
            wr.write_record(["t", "total", "user_learning", "personalization", "direct", "asymptotic_personalization"])?;
            for t in 1..=p.spec.horizon {
                wr.write_record([
                    t.to_string(),
                    truth.total.at(t).to_string(),
                    truth.user_learning.at(t).to_string(),
                    truth.personalization.at(t).to_string(),
                    truth.direct.at(t).to_string(),
                    reference.map(|r| r.to_string()).unwrap_or_default(),
                ])?;
            }
            wr.flush()?;
            Ok(())
        })?;
        Ok(())
    })?
}

#[derive(Debug, Deserialize)]
struct PanelRecord {
    user: usize,
    t: usize,
    cohort: String,
    day: Option<usize>,
    w: u8,
    y: f64,
    action: u32,
    #[allow(dead_code)]
    served_vector_hash: Option<String>,
}

fn read_panel_rows(path: &Path) -> Result<Vec<PanelRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let expected = ["user", "t", "cohort", "day", "w", "y", "action", "served_vector_hash"];
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Data(format!("{}: expected header {}", path.display(), expected.join(","))));
    }
    r.deserialize::<PanelRecord>()
        .enumerate()
        .map(|(k, rec)| {
            let row = k + 2;
            let rec = rec.map_err(|e| Error::Data(format!("{} row {row}: {e}", path.display())))?;
            let cohort: Cohort =
                rec.cohort.parse().map_err(|e| Error::Data(format!("{} row {row}: {e}", path.display())))?;
            if rec.w > 1 {
                return Err(Error::Data(format!("{} row {row}: w must be 0 or 1", path.display())));
            }
            Ok(PanelRow { user: rec.user, t: rec.t, cohort, day: rec.day, w: rec.w == 1, y: rec.y, action: rec.action })
        })
        .collect()
}

fn read_features(path: &Path, n: usize, horizon: usize) -> Result<(usize, Vec<f64>)> {
    #[derive(Deserialize)]
    struct Rec {
        user: usize,
        t: usize,
        component: usize,
        value: f64,
    }
    let mut r = csv::Reader::from_path(path)?;
    let recs: Vec<Rec> = r
        .deserialize()
        .enumerate()
        .map(|(k, x)| x.map_err(|e| Error::Data(format!("{} row {}: {e}", path.display(), k + 2))))
        .collect::<Result<_>>()?;
    let dim = recs.iter().map(|x| x.component + 1).max().unwrap_or(0);
    let mut out = vec![f64::NAN; n * horizon * dim];
    for (k, x) in recs.iter().enumerate() {
        if x.user >= n || x.t == 0 || x.t > horizon {
            return Err(Error::Data(format!("{} row {}: user or period out of range", path.display(), k + 2)));
        }
        out[((x.user * horizon) + x.t - 1) * dim + x.component] = x.value;
    }
    if out.iter().any(|v| v.is_nan()) {
        return Err(Error::Data(format!("{}: missing served components", path.display())));
    }
    Ok((dim, out))
}

pub fn cmd_estimate(config: &Path, panel_path: &Path, o: &Overrides) -> CmdResult {
    let cfg = load(config, o)?;
    let dir = out_dir(&cfg)?;
    let requested = cfg.analysis.estimators().map_err(CliError::Config)?;
    let explicit = !cfg.analysis.estimators.is_empty();
    with_workers(&cfg, || -> CmdResult {
        let rows = read_panel_rows(panel_path)?;
        let p = prepare(&cfg)?;
        let n = rows.iter().map(|r| r.user + 1).max().unwrap_or(0);
        if n != p.spec.n {
            return Err(Error::Data(format!("panel has {n} users, config describes {}", p.spec.n)).into());
        }
        let probs = design_probabilities(&p.spec)?;
        let features = panel_path.with_file_name("features.csv");
        let served = if features.exists() { Some(read_features(&features, n, p.spec.horizon)?) } else { None };
        let clusters = if p.spec.kind == DesignKind::ClusteredCcd { p.clusters.clone() } else { None };
        let panel = Panel::from_rows(p.spec.kind, &rows, probs, clusters, served)?;
        let mut out: Vec<EffectSeries> = Vec::new();
        for e in requested {
            if !e.applies_to(panel.kind()) {
                if explicit {
                    eprintln!("warning: estimator {} does not apply to a {} panel; skipped", e.name(), panel.kind().name());
                }
                continue;
            }
            out.push(e.estimate(&panel, cfg.analysis.weighting)?);
        }
        if panel.served_dim() > 0 && panel.kind() != DesignKind::Ab {
            let values = personalization_imbalance(&panel, Cohort::CookieTreated, Cohort::DayTreated)?;
            out.push(EffectSeries::new(EffectKind::Total, values).labeled("imbalance"));
        }
        write_atomic(&dir.join("effects.csv"), |w| write_series_csv(w, &out))?;
        Ok(())
    })?
}

/// Series used for each component of the long-run sum, most trusted first.
fn preferred(kind: EffectKind) -> &'static [&'static str] {
    match kind {
        EffectKind::UserLearning => {
            &["switch_learning", "freeze_learning", "clustered_learning", "user_learning", "ccd_learning"]
        }
        EffectKind::Personalization => &["switch_personalization", "freeze_personalization", "personalization"],
        EffectKind::Direct => &["ccd_direct", "direct"],
        EffectKind::Total => &["total"],
    }
}

pub fn cmd_fit(effects: &Path, config: &Path, o: &Overrides) -> CmdResult {
    let cfg = load(config, o)?;
    let dir = out_dir(&cfg)?;
    let file = fs::File::open(effects).map_err(|e| Error::Data(format!("{}: {e}", effects.display())))?;
    let series = read_series_csv(file)?;
    let fitted: Vec<(String, EffectKind, FitResult)> = with_workers(&cfg, || {
        series
            .iter()
            .filter(|s| EffectKind::from_tag(s.tag()).is_some())
            .map(|s| Ok((s.tag().to_string(), s.kind(), nls_fit(s, default_family(s.kind()))?)))
            .collect::<Result<_>>()
    })??;
    let mut chosen = BTreeMap::new();
    for kind in [EffectKind::UserLearning, EffectKind::Personalization, EffectKind::Direct] {
        if let Some((_, _, fit)) =
            preferred(kind).iter().find_map(|tag| fitted.iter().find(|(t, _, _)| t == tag))
        {
            chosen.insert(kind, fit.clone());
        }
    }
    let total = match long_run_total(&chosen) {
        Ok(v) => Some(v),
        Err(e) => {
            eprintln!("warning: no long-run total: {e}");
            None
        }
    };
    let labeled: Vec<(String, FitResult)> = fitted.iter().map(|(t, _, f)| (t.clone(), f.clone())).collect();
    write_atomic(&dir.join("fits.csv"), |w| write_fits_csv(w, &labeled, total))?;
    write_atomic(&dir.join("extrapolation.csv"), |w| {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["kind", "s", "value"])?;
        for (tag, _, fit) in &fitted {
            for &s in &cfg.analysis.extrapolate_to {
                match predict(fit, s as f64) {
                    Ok(v) => wr.write_record([tag.clone(), s.to_string(), v.to_string()])?,
                    Err(e) => eprintln!("warning: {tag} at {s}: {e}"),
                }
            }
        }
        wr.flush()?;
        Ok(())
    })?;
    Ok(())
}

pub fn cmd_mse_study(config: &Path, o: &Overrides) -> CmdResult {
    let cfg = load(config, o)?;
    let dir = out_dir(&cfg)?;
    let w = cfg.world()?;
    if w.kind != WorldKind::Synthetic {
        return Err(config_err("mse-study needs world.kind = \"synthetic\""));
    }
    let template = w.synthetic.spec(w.seed);
    // validates the template before the replicated run
    synth_series(&template)?;
    let study = with_workers(&cfg, || mse_study(&template, &cfg.analysis.horizons, cfg.analysis.replicates))??;
    write_atomic(&dir.join("mse.csv"), |w| write_mse_csv(w, &study.rows))?;
    write_atomic(&dir.join("long_run.csv"), |w| {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["horizon", "mean", "stderr", "failures"])?;
        for r in &study.long_run {
            wr.write_record([r.horizon.to_string(), r.mean.to_string(), r.stderr.to_string(), r.failures.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    })?;
    Ok(())
}
