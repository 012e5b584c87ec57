//! Experiment grids: configuration, per-point execution, persistence and
//! plot-ready reports.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{ParamSet, RpKind};
use crate::error::{Error, Result};
use crate::rng;
use crate::sim::{profile_by_name, NoiseProfile};
use crate::thermo::{GibbsTarget, TfimParams};
use crate::verify::{default_sweep_grid, verify_trained, BetaSweepResult};
use crate::vqa::{train, CostMode, Selection, ShotsPlan, SpsaConfig, TrainConfig};

const MAX_N: usize = 6;

/// Inverse-temperature grid used by the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub beta_min: f64,
    pub beta_max: f64,
    pub points: usize,
    /// Prepend `1e-8` as the infinite-temperature proxy.
    pub include_infinite_temperature: bool,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self { beta_min: 0.05, beta_max: 6.0, points: 60, include_infinite_temperature: true }
    }
}

impl SweepGrid {
    pub fn grid(&self) -> Vec<f64> {
        if *self == Self::default() {
            return default_sweep_grid();
        }
        let mut g = Vec::with_capacity(self.points + 1);
        if self.include_infinite_temperature {
            g.push(1e-8);
        }
        match self.points {
            0 => {}
            1 => g.push(self.beta_min),
            p => g.extend((0..p).map(|i| self.beta_min + (self.beta_max - self.beta_min) * i as f64 / (p - 1) as f64)),
        }
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostModeName {
    #[default]
    Shots,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: Vec<usize>,
    pub h: Vec<f64>,
    pub beta: Vec<f64>,
    pub device_profile: String,
    #[serde(default = "one")]
    pub ancilla_layers: usize,
    #[serde(default = "one")]
    pub system_layers: usize,
    #[serde(default = "one")]
    pub restarts: usize,
    #[serde(default = "hundred")]
    pub max_iterations: usize,
    #[serde(default)]
    pub shots: ShotsPlan,
    #[serde(default)]
    pub cost_mode: CostModeName,
    #[serde(default = "tomo_default")]
    pub tomography_shots: u64,
    #[serde(default)]
    pub sweep: SweepGrid,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "out_default")]
    pub output_directory: PathBuf,
    #[serde(default)]
    pub rp: RpKind,
    /// Records measured wall time; off by default so reruns are byte-identical.
    #[serde(default)]
    pub record_wall_time: bool,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub workers: usize,
}

fn one() -> usize {
    1
}

fn hundred() -> usize {
    100
}

fn tomo_default() -> u64 {
    1024
}

fn out_default() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    /// A config with defaults for everything but the grid and profile.
    pub fn new(n: Vec<usize>, h: Vec<f64>, beta: Vec<f64>, device_profile: &str) -> Self {
        Self {
            n,
            h,
            beta,
            device_profile: device_profile.into(),
            ancilla_layers: 1,
            system_layers: 1,
            restarts: 1,
            max_iterations: 100,
            shots: ShotsPlan::default(),
            cost_mode: CostModeName::Shots,
            tomography_shots: 1024,
            sweep: SweepGrid::default(),
            master_seed: 0,
            output_directory: out_default(),
            rp: RpKind::default(),
            record_wall_time: false,
            workers: 0,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.n.is_empty() || self.h.is_empty() || self.beta.is_empty() {
            return bad("n, h and beta lists must be nonempty");
        }
        if self.n.iter().any(|&n| !(2..=MAX_N).contains(&n)) {
            return bad("every n must lie in 2..=6");
        }
        if self.h.iter().any(|h| !h.is_finite()) {
            return bad("field strengths must be finite");
        }
        if self.beta.iter().any(|&b| !(b > 0.0 && b.is_finite())) {
            return bad("every beta must be finite and > 0");
        }
        if self.ancilla_layers == 0 || self.system_layers == 0 || self.restarts == 0 {
            return bad("layers and restarts must be at least 1");
        }
        if self.tomography_shots == 0 || self.shots.system_x == 0 || self.shots.system_z == 0 || self.shots.ancilla_z == 0 {
            return bad("shot counts must be positive");
        }
        let grid = self.sweep.grid();
        if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) || grid[0] < 0.0 {
            return bad("sweep grid must be nonempty, nonnegative and strictly increasing");
        }
        profile_by_name(&self.device_profile)?;
        Ok(())
    }

    pub fn profile(&self) -> Result<NoiseProfile> {
        profile_by_name(&self.device_profile)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            restarts: 1,
            ancilla_layers: self.ancilla_layers,
            system_layers: self.system_layers,
            rp: self.rp,
            mode: match self.cost_mode {
                CostModeName::Shots => CostMode::Shots(self.shots),
                CostModeName::Exact => CostMode::Exact,
            },
            selection: Selection::Cost,
            spsa: SpsaConfig { max_iter: self.max_iterations, ..Default::default() },
        }
    }

    /// Cartesian product `n × h × β × restart`, in that nesting order.
    pub fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &n in &self.n {
            for &h in &self.h {
                for &beta in &self.beta {
                    for restart in 0..self.restarts {
                        out.push(GridPoint {
                            profile: self.device_profile.clone(),
                            n,
                            h,
                            beta,
                            restart,
                            seed: point_seed(self.master_seed, n, h, beta, restart),
                        });
                    }
                }
            }
        }
        out
    }
}

pub fn point_seed(master: u64, n: usize, h: f64, beta: f64, restart: usize) -> u64 {
    rng::derive_seed(master, &[n as u64, rng::float_label(h), rng::float_label(beta), restart as u64])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub profile: String,
    pub n: usize,
    pub h: f64,
    pub beta: f64,
    pub restart: usize,
    pub seed: u64,
}

impl GridPoint {
    pub fn record_file_name(&self) -> String {
        format!("point_{}_{}_{}_r{}.json", self.n, self.h, self.beta, self.restart)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMetrics {
    pub params: ParamSet,
    pub iterations: usize,
    pub final_cost: f64,
    pub fidelity: f64,
    pub beta_star: f64,
    pub delta_beta: f64,
    pub even_parity_fraction: f64,
    pub sweep: BetaSweepResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub point: GridPoint,
    pub metrics: Option<PointMetrics>,
    pub failure: Option<StageFailure>,
    pub wall_time_s: f64,
}

fn stage<T>(name: &str, r: Result<T>) -> std::result::Result<T, StageFailure> {
    r.map_err(|e| StageFailure { stage: name.into(), message: e.to_string() })
}

/// Train, prepare, tomograph, reconstruct, score and sweep one grid point.
/// Stage failures are captured in the record rather than returned.
pub fn run_point(cfg: &ExperimentConfig, point: &GridPoint) -> ExperimentRecord {
    let start = Instant::now();
    let outcome = (|| -> std::result::Result<PointMetrics, StageFailure> {
        let noise = stage("config", profile_by_name(&point.profile))?;
        let target = stage("target", TfimParams::new(point.n, point.h).and_then(|p| GibbsTarget::new(p, point.beta)))?;
        let tc = cfg.train_config();
        let training = stage("train", train(&target, &noise, &tc, point.seed))?;
        let best = training.best().result.clone();
        let mut r = rng::stream(point.seed, &[0x746f_6d6f]);
        let v = stage(
            "verify",
            verify_trained(&target, &noise, training, tc.rp, cfg.tomography_shots, &cfg.sweep.grid(), &mut r),
        )?;
        Ok(PointMetrics {
            params: best.best_params,
            iterations: best.iterations,
            final_cost: best.best_cost,
            fidelity: v.fidelity,
            beta_star: v.sweep.beta_star,
            delta_beta: v.sweep.delta_beta,
            even_parity_fraction: v.even_parity_fraction,
            sweep: v.sweep,
        })
    })();
    let wall_time_s = if cfg.record_wall_time { start.elapsed().as_secs_f64() } else { 0.0 };
    let (metrics, failure) = match outcome {
        Ok(m) => (Some(m), None),
        Err(f) => (None, Some(f)),
    };
    ExperimentRecord { point: point.clone(), metrics, failure, wall_time_s }
}

/// Writes `bytes` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn records_dir(out: &Path) -> PathBuf {
    out.join("records")
}

fn load_record(path: &Path, point: &GridPoint) -> Option<ExperimentRecord> {
    let text = fs::read_to_string(path).ok()?;
    let rec: ExperimentRecord = serde_json::from_str(&text).ok()?;
    (rec.point == *point).then_some(rec)
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))
}

/// Runs every grid point not already recorded under the output directory.
pub fn run_grid(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    cfg.validate()?;
    let dir = records_dir(&cfg.output_directory);
    fs::create_dir_all(&dir)?;
    let pool = thread_pool(cfg.workers)?;
    let points = cfg.points();
    pool.install(|| {
        points
            .par_iter()
            .map(|p| {
                let path = dir.join(p.record_file_name());
                if let Some(rec) = load_record(&path, p) {
                    return Ok(rec);
                }
                let rec = run_point(cfg, p);
                write_atomic(&path, serde_json::to_string_pretty(&rec)?.as_bytes())?;
                Ok(rec)
            })
            .collect()
    })
}

/// Reads every record file in `<out>/records`, sorted by grid position.
pub fn load_records(out: &Path) -> Result<Vec<ExperimentRecord>> {
    let mut recs = Vec::new();
    for entry in fs::read_dir(records_dir(out))? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) == Some("json") {
            recs.push(serde_json::from_str::<ExperimentRecord>(&fs::read_to_string(&path)?)?);
        }
    }
    sort_records(&mut recs);
    Ok(recs)
}

fn sort_records(recs: &mut [ExperimentRecord]) {
    recs.sort_by(|a, b| {
        let (p, q) = (&a.point, &b.point);
        p.n.cmp(&q.n)
            .then(p.h.total_cmp(&q.h))
            .then(p.beta.total_cmp(&q.beta))
            .then(p.restart.cmp(&q.restart))
    });
}

pub const RESULTS_HEADER: &str = "profile,n,h,beta,seed,restart,iterations,final_cost,fidelity,beta_star,delta_beta,even_parity_fraction,wall_time_s";

fn e17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn results_csv(records: &[ExperimentRecord]) -> String {
    let mut out = format!("{RESULTS_HEADER}\n");
    for r in records {
        let p = &r.point;
        let metrics = match &r.metrics {
            Some(m) => format!(
                "{},{},{},{},{},{},{}",
                m.iterations,
                e17(m.final_cost),
                e17(m.fidelity),
                e17(m.beta_star),
                e17(m.delta_beta),
                e17(m.even_parity_fraction),
                e17(r.wall_time_s)
            ),
            None => format!(",,,,,,{}", e17(r.wall_time_s)),
        };
        out.push_str(&format!("{},{},{},{},{},{},{metrics}\n", p.profile, p.n, e17(p.h), e17(p.beta), p.seed, p.restart));
    }
    out
}

/// Highest-fidelity successful record for each `(n, h, β)`.
pub fn best_of_restarts(records: &[ExperimentRecord]) -> Vec<&ExperimentRecord> {
    let mut best: BTreeMap<(usize, u64, u64), &ExperimentRecord> = BTreeMap::new();
    for r in records.iter().filter(|r| r.metrics.is_some()) {
        let key = (r.point.n, r.point.h.to_bits(), r.point.beta.to_bits());
        let fid = r.metrics.as_ref().map(|m| m.fidelity).unwrap_or(f64::NEG_INFINITY);
        match best.get(&key) {
            Some(b) if b.metrics.as_ref().map(|m| m.fidelity).unwrap_or(f64::NEG_INFINITY) >= fid => {}
            _ => {
                best.insert(key, r);
            }
        }
    }
    let mut out: Vec<&ExperimentRecord> = best.into_values().collect();
    out.sort_by(|a, b| {
        a.point.n.cmp(&b.point.n).then(a.point.beta.total_cmp(&b.point.beta)).then(a.point.h.total_cmp(&b.point.h))
    });
    out
}

pub fn delta_beta_csv(records: &[ExperimentRecord]) -> String {
    let mut out = String::from("profile,n,h,beta,beta_star,delta_beta,fidelity\n");
    for r in best_of_restarts(records) {
        let (p, m) = (&r.point, r.metrics.as_ref().expect("filtered"));
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            p.profile,
            p.n,
            e17(p.h),
            e17(p.beta),
            e17(m.beta_star),
            e17(m.delta_beta),
            e17(m.fidelity)
        ));
    }
    out
}

/// `(n, h, β)` cells whose best-of-restarts fidelity rises with `n` by more than `slack`.
pub fn fidelity_trend_violations(records: &[ExperimentRecord], slack: f64) -> Vec<(usize, f64, f64)> {
    let best = best_of_restarts(records);
    let mut out = Vec::new();
    for a in &best {
        for b in &best {
            let (pa, pb) = (&a.point, &b.point);
            if pb.n > pa.n && pa.h == pb.h && pa.beta == pb.beta {
                let (fa, fb) = (a.metrics.as_ref().unwrap().fidelity, b.metrics.as_ref().unwrap().fidelity);
                if fb > fa + slack {
                    out.push((pb.n, pb.h, pb.beta));
                }
            }
        }
    }
    out
}

/// Writes `results.csv`, `delta_beta.csv` and one `sweep_<n>_<h>_<beta>.csv`
/// per grid cell (best restart) into `out`.
pub fn report(records: &[ExperimentRecord], out: &Path) -> Result<Vec<PathBuf>> {
    if records.is_empty() {
        return Err(Error::InvalidParameter("report needs at least one record".into()));
    }
    let mut sorted = records.to_vec();
    sort_records(&mut sorted);
    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    let results = out.join("results.csv");
    write_atomic(&results, results_csv(&sorted).as_bytes())?;
    written.push(results);
    let delta = out.join("delta_beta.csv");
    write_atomic(&delta, delta_beta_csv(&sorted).as_bytes())?;
    written.push(delta);
    for r in best_of_restarts(&sorted) {
        let m = r.metrics.as_ref().expect("filtered");
        let path = out.join(format!("sweep_{}_{}_{}.csv", r.point.n, r.point.h, r.point.beta));
        write_atomic(&path, m.sweep.to_csv().as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            max_iterations: 5,
            tomography_shots: 64,
            cost_mode: CostModeName::Exact,
            sweep: SweepGrid { beta_min: 0.5, beta_max: 2.0, points: 4, include_infinite_temperature: true },
            master_seed: 3,
            output_directory: dir.to_path_buf(),
            ..ExperimentConfig::new(vec![2], vec![1.0], vec![1.0, 5.0], "noiseless")
        }
    }

    #[test]
    fn config_parsing_and_validation() {
        let text = r#"
            n = [2, 3]
            h = [1.0]
            beta = [1e-8, 5.0]
            device_profile = "aria1"
            master_seed = 9
            [shots]
            system_x = 100
            system_z = 100
            ancilla_z = 200
        "#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.max_iterations, 100);
        assert_eq!(cfg.tomography_shots, 1024);
        assert_eq!(cfg.shots.ancilla_z, 200);
        assert_eq!(cfg.points().len(), 4);
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);

        assert!(ExperimentConfig::from_toml(&text.replace("master_seed", "master_sed")).is_err());
        assert!(ExperimentConfig::from_toml(&text.replace("[1e-8, 5.0]", "[]")).is_err());
        assert!(ExperimentConfig::from_toml(&text.replace("[1e-8, 5.0]", "[0.0]")).is_err());
        assert!(ExperimentConfig::from_toml(&text.replace("aria1", "nope")).is_err());
        assert!(ExperimentConfig::from_toml(&text.replace("[2, 3]", "[1]")).is_err());
    }

    #[test]
    fn grid_size_and_seeds() {
        let cfg = ExperimentConfig::new(vec![2, 3, 4], vec![0.5, 1.0, 1.5], vec![1e-8, 1.0, 5.0], "noiseless");
        let pts = cfg.points();
        assert_eq!(pts.len(), 27);
        let mut seeds: Vec<u64> = pts.iter().map(|p| p.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 27);
        assert_eq!(SweepGrid::default().grid(), default_sweep_grid());
    }

    #[test]
    fn grid_runs_resumes_and_reports() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path());
        let recs = run_grid(&cfg).unwrap();
        assert_eq!(recs.len(), 2);
        assert!(recs.iter().all(|r| r.metrics.is_some()));

        let files = report(&recs, dir.path()).unwrap();
        let results = fs::read_to_string(dir.path().join("results.csv")).unwrap();
        assert_eq!(results.lines().count(), 3);
        assert!(results.starts_with(RESULTS_HEADER));
        let sweep = fs::read_to_string(dir.path().join("sweep_2_1_5.csv")).unwrap();
        assert_eq!(sweep.lines().filter(|l| !l.starts_with('#')).count(), 1 + 5);
        assert_eq!(files.len(), 4);

        // Remove one record: only that point is recomputed, bytes match.
        let victim = records_dir(dir.path()).join(cfg.points()[1].record_file_name());
        let before = fs::read(&victim).unwrap();
        fs::remove_file(&victim).unwrap();
        let again = run_grid(&cfg).unwrap();
        assert_eq!(again, recs);
        assert_eq!(fs::read(&victim).unwrap(), before);
        assert_eq!(load_records(dir.path()).unwrap(), recs);
    }

    #[test]
    fn failures_are_recorded_per_stage() {
        let cfg = small_config(Path::new("unused"));
        let mut p = cfg.points()[0].clone();
        p.profile = "missing".into();
        let rec = run_point(&cfg, &p);
        assert!(rec.metrics.is_none());
        assert_eq!(rec.failure.unwrap().stage, "config");
        assert!(report(&[], Path::new("unused")).is_err());
    }
}
