use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use configbounds_core::bounds::{massart_bound, pwc_rad_bound};
use configbounds_core::bounds::{BoundCurve, BoundMode, CurveSettings};
use configbounds_core::configspace::{
    approx_profile, extract_dual, generate_instance, select_kappa, DualExtraction, KappaSelection,
    WdpGenConfig, DEFAULT_GRID_EPS, DEFAULT_R_GRID,
};
use configbounds_core::counterexample::{run_suite, SuiteReport};
use configbounds_core::dpfit::{fit, FitResult};
use configbounds_core::rademacher::{
    distinct_vectors, empirical_rad_exact, empirical_rad_mc, DualSample, EXACT_MAX_N,
};
use configbounds_core::solver::{IntegerProgram, RulePair, ScoringRule};
use configbounds_core::PiecewiseConstant;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "CONFIGBOUNDS_THREADS";

pub const INSTANCES_DIR: &str = "instances";
pub const DUALS_DIR: &str = "duals";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const KAPPA_FILE: &str = "kappa.json";
pub const PROFILE_FILE: &str = "profile.csv";
pub const BOUNDS_FILE: &str = "bounds.csv";
pub const COUNTEREXAMPLE_FILE: &str = "counterexample.json";

pub const DEFAULT_HARD_CAP: u64 = 2000;

/// Worker count from [`THREADS_ENV`], if set.
pub fn threads_from_env() -> CliResult<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Precondition(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
    }
}

/// Runs `f` inside a pool of `threads` workers (or rayon's default).
pub fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Precondition(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

pub fn instance_file(id: usize) -> String {
    format!("inst_{id:04}.json")
}

pub fn dual_file(id: usize) -> String {
    format!("dual_{id:04}.json")
}

fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Writes pretty JSON through a temporary file so a crash never leaves a
/// truncated output behind.
fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: usize,
    pub seed: u64,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub root_seed: u64,
    /// Generator settings; each instance replaces `seed` with its own.
    pub generator: WdpGenConfig,
    pub instances: Vec<ManifestEntry>,
}

/// Per-instance seeds: successive outputs of a ChaCha8 stream keyed by the
/// root seed.
pub fn instance_seeds(root_seed: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(root_seed);
    (0..count).map(|_| rng.next_u64()).collect()
}

/// Writes `count` instances and their manifest under `out/instances`.
pub fn cmd_gen(
    out: &Path,
    root_seed: u64,
    count: usize,
    generator: &WdpGenConfig,
) -> CliResult<Manifest> {
    let dir = out.join(INSTANCES_DIR);
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let mut instances = Vec::with_capacity(count);
    for (id, seed) in instance_seeds(root_seed, count).into_iter().enumerate() {
        let ip = generate_instance(&WdpGenConfig {
            seed,
            ..generator.clone()
        })?;
        let file = instance_file(id);
        write_json(&dir.join(&file), &ip)?;
        instances.push(ManifestEntry { id, seed, file });
    }
    let manifest = Manifest {
        root_seed,
        generator: WdpGenConfig {
            seed: root_seed,
            ..generator.clone()
        },
        instances,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

pub fn load_manifest(out: &Path) -> CliResult<Manifest> {
    let path = out.join(INSTANCES_DIR).join(MANIFEST_FILE);
    if !path.exists() {
        return Err(CliError::Precondition(format!(
            "no instance manifest at {}; run `gen` first",
            path.display()
        )));
    }
    read_json(&path)
}

/// Loads every instance in the manifest, failing with the list of missing
/// ids if any file is absent.
pub fn load_instances(out: &Path, manifest: &Manifest) -> CliResult<Vec<IntegerProgram>> {
    let dir = out.join(INSTANCES_DIR);
    let missing: Vec<String> = manifest
        .instances
        .iter()
        .filter(|e| !dir.join(&e.file).exists())
        .map(|e| e.id.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Precondition(format!(
            "missing instance files for ids: {}",
            missing.join(", ")
        )));
    }
    manifest
        .instances
        .iter()
        .map(|e| read_json(&dir.join(&e.file)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KappaSpec {
    Auto { r_grid: usize, hard_cap: u64 },
    Fixed(u64),
}

impl Default for KappaSpec {
    fn default() -> Self {
        KappaSpec::Auto {
            r_grid: DEFAULT_R_GRID,
            hard_cap: DEFAULT_HARD_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaRecord {
    pub rules: RulePair,
    pub r_grid: usize,
    pub hard_cap: u64,
    #[serde(flatten)]
    pub selection: KappaSelection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualsSummary {
    pub kappa: u64,
    pub extracted: Vec<usize>,
    pub skipped: Vec<usize>,
}

/// Extracts one dual per instance into `out/duals`, skipping instances
/// whose dual file already exists.
pub fn cmd_duals(
    out: &Path,
    rules: RulePair,
    kappa: KappaSpec,
    grid_eps: f64,
    threads: Option<usize>,
) -> CliResult<DualsSummary> {
    let manifest = load_manifest(out)?;
    let instances = load_instances(out, &manifest)?;
    let dir = out.join(DUALS_DIR);
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;

    let kappa = match kappa {
        KappaSpec::Fixed(0) => return Err(CliError::Precondition("kappa must be >= 1".into())),
        KappaSpec::Fixed(k) => k,
        KappaSpec::Auto { r_grid, hard_cap } => {
            let path = dir.join(KAPPA_FILE);
            let reuse = if path.exists() {
                let rec: KappaRecord = read_json(&path)?;
                (rec.rules == rules && rec.r_grid == r_grid && rec.hard_cap == hard_cap)
                    .then_some(rec)
            } else {
                None
            };
            match reuse {
                Some(rec) => rec.selection.kappa,
                None if instances.is_empty() => 1,
                None => {
                    let selection = with_pool(threads, || {
                        select_kappa(&instances, rules, r_grid, hard_cap)
                    })??;
                    write_json(
                        &path,
                        &KappaRecord {
                            rules,
                            r_grid,
                            hard_cap,
                            selection,
                        },
                    )?;
                    selection.kappa
                }
            }
        }
    };

    let (todo, skipped): (Vec<_>, Vec<_>) = manifest
        .instances
        .iter()
        .map(|e| e.id)
        .partition(|&id| !dir.join(dual_file(id)).exists());
    with_pool(threads, || {
        todo.par_iter()
            .map(|&id| {
                let d = extract_dual(id, &instances[id], rules, kappa, grid_eps)?;
                write_json(&dir.join(dual_file(id)), &d)
            })
            .collect::<CliResult<Vec<()>>>()
    })??;
    Ok(DualsSummary {
        kappa,
        extracted: todo,
        skipped,
    })
}

/// Dual files under `out/duals`, sorted by instance id.
pub fn load_duals(out: &Path) -> CliResult<Vec<DualExtraction>> {
    let dir = out.join(DUALS_DIR);
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(|e| CliError::io(&dir, e))?
        .map(|entry| entry.map(|e| e.path()).map_err(|e| CliError::io(&dir, e)))
        .collect::<CliResult<Vec<_>>>()?
        .into_iter()
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("dual_") && n.ends_with(".json"))
        })
        .collect();
    paths.sort();
    let mut duals: Vec<DualExtraction> = paths
        .iter()
        .map(|p| read_json(p))
        .collect::<CliResult<_>>()?;
    duals.sort_by_key(|d| d.instance);
    Ok(duals)
}

/// `count` training-set sizes spaced evenly in log scale from `lo` to `hi`,
/// rounded to integers.
pub fn log_schedule(lo: u64, hi: u64, per_decade: usize) -> Vec<u64> {
    let (a, b) = ((lo as f64).log10(), (hi as f64).log10());
    let steps = ((b - a) * per_decade as f64).round().max(0.0) as usize;
    let mut out: Vec<u64> = (0..=steps)
        .map(|k| {
            10f64
                .powf(a + (b - a) * k as f64 / steps.max(1) as f64)
                .round() as u64
        })
        .collect();
    out.dedup();
    out
}

pub fn default_schedule() -> Vec<u64> {
    log_schedule(100, 100_000_000, 4)
}

/// Parses `"A..B"`, `"A-B"`, `"A:B"` or a bare upper end `"B"` (meaning
/// `1..=B`).
pub fn parse_j_range(s: &str) -> CliResult<RangeInclusive<usize>> {
    let bad = || CliError::Precondition(format!("j range {s:?} should look like 1..64"));
    let s = s.trim();
    let (lo, hi) = if let Some((a, b)) = s.split_once("..") {
        (a, b.trim_start_matches('='))
    } else if let Some((a, b)) = s.split_once(['-', ':']) {
        (a, b)
    } else {
        ("1", s)
    };
    let lo: usize = lo.trim().parse().map_err(|_| bad())?;
    let hi: usize = hi.trim().parse().map_err(|_| bad())?;
    if lo == 0 || lo > hi {
        return Err(bad());
    }
    Ok(lo..=hi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsOptions {
    pub j_range: RangeInclusive<usize>,
    pub delta: f64,
    pub reference_mode: bool,
    pub schedule: Vec<u64>,
    /// Overrides the variable count read from the instances.
    pub n_vars: Option<u64>,
    /// Overrides the κ recorded in the dual files.
    pub kappa: Option<u64>,
}

impl Default for BoundsOptions {
    fn default() -> Self {
        BoundsOptions {
            j_range: 1..=64,
            delta: 0.01,
            reference_mode: false,
            schedule: default_schedule(),
            n_vars: None,
            kappa: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    pub curve: BoundCurve,
    pub profile: configbounds_core::bounds::ApproxProfile,
    pub n_vars: u64,
    pub kappa: u64,
}

/// Builds the approximation profile from the dual files and writes
/// `profile.csv` and `bounds.csv`.
pub fn cmd_bounds(out: &Path, opts: &BoundsOptions) -> CliResult<BoundsReport> {
    if !(opts.delta > 0.0 && opts.delta < 1.0) {
        return Err(CliError::Precondition(format!(
            "delta must lie in (0, 1), got {}",
            opts.delta
        )));
    }
    if opts.schedule.is_empty() || opts.schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Precondition(
            "N schedule must be nonempty and strictly increasing".into(),
        ));
    }
    let duals = load_duals(out)?;
    if duals.is_empty() {
        return Err(CliError::Precondition(format!(
            "no dual files under {}; run `duals` first",
            out.join(DUALS_DIR).display()
        )));
    }
    let kappa = match opts.kappa {
        Some(k) => k,
        None => {
            let k = duals[0].kappa;
            if duals.iter().any(|d| d.kappa != k) {
                return Err(CliError::Precondition(
                    "dual files disagree on kappa".into(),
                ));
            }
            k
        }
    };
    let n_vars = match opts.n_vars {
        Some(n) => n,
        None => {
            let manifest = load_manifest(out)?;
            let instances = load_instances(out, &manifest)?;
            instances.iter().map(|ip| ip.n() as u64).max().unwrap_or(0)
        }
    };
    let functions: Vec<PiecewiseConstant> = duals.into_iter().map(|d| d.dual).collect();
    let profile = approx_profile(&functions, opts.j_range.clone())?;
    let settings = CurveSettings {
        delta: opts.delta,
        n_vars,
        kappa,
        profile: profile.clone(),
        j_range: opts.j_range.clone(),
        mode: if opts.reference_mode {
            BoundMode::Reference
        } else {
            BoundMode::Generic
        },
    };
    let curve = BoundCurve::compute(&opts.schedule, &settings)?;

    let mut text = String::from("j,e_hat\n");
    for (j, e) in &profile.e_hat {
        text.push_str(&format!("{j},{e}\n"));
    }
    write_atomic(&out.join(PROFILE_FILE), text.as_bytes())?;
    let mut buf = Vec::new();
    curve.write_csv(&mut buf).expect("writing to memory");
    write_atomic(&out.join(BOUNDS_FILE), &buf)?;
    Ok(BoundsReport {
        curve,
        profile,
        n_vars,
        kappa,
    })
}

/// Reads `profile.csv` back.
pub fn read_profile_csv(path: &Path) -> CliResult<Vec<(usize, f64)>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let parse_err = |message: String| CliError::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut lines = text.lines();
    if lines.next() != Some("j,e_hat") {
        return Err(parse_err("missing `j,e_hat` header".into()));
    }
    lines
        .map(|line| {
            let (j, e) = line
                .split_once(',')
                .ok_or_else(|| parse_err(format!("bad row {line:?}")))?;
            Ok((
                j.parse()
                    .map_err(|_| parse_err(format!("bad j in {line:?}")))?,
                e.parse()
                    .map_err(|_| parse_err(format!("bad e_hat in {line:?}")))?,
            ))
        })
        .collect()
}

pub fn read_bounds_csv(path: &Path) -> CliResult<BoundCurve> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    BoundCurve::read_csv(BufReader::new(file)).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CounterexampleOptions {
    pub gammas: Vec<f64>,
    pub ps: Vec<f64>,
    pub ns: Vec<usize>,
    pub cs: Vec<f64>,
}

impl Default for CounterexampleOptions {
    fn default() -> Self {
        CounterexampleOptions {
            gammas: vec![0.05, 0.1, 0.2],
            ps: vec![1.0, 2.0, 3.0],
            ns: vec![4, 8, 12],
            cs: vec![0.4, 0.45],
        }
    }
}

/// Runs the cosine-family checks and writes `counterexample.json`.
pub fn cmd_counterexample(out: &Path, opts: &CounterexampleOptions) -> CliResult<SuiteReport> {
    let report = run_suite(&opts.gammas, &opts.ps, &opts.ns, &opts.cs)?;
    write_json(&out.join(COUNTEREXAMPLE_FILE), &report)?;
    Ok(report)
}

/// Reads a dual from either a dual-extraction file or a bare piecewise
/// function.
pub fn read_dual(path: &Path) -> CliResult<PiecewiseConstant> {
    let value: serde_json::Value = read_json(path)?;
    serde_json::from_value::<PiecewiseConstant>(value).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn cmd_fit(dual: &Path, k: usize) -> CliResult<FitResult> {
    Ok(fit(&read_dual(dual)?, k)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadReport {
    pub n: usize,
    pub max_pieces: usize,
    pub distinct_vectors: usize,
    /// Exact value, when `N` is small enough to enumerate.
    pub exact: Option<f64>,
    pub mc_estimate: Option<f64>,
    pub mc_stderr: Option<f64>,
    pub massart: f64,
    pub pwc: f64,
}

/// Empirical Rademacher complexity of the duals under `out/duals`: exact
/// when `N ≤ 20`, plus a Monte-Carlo estimate when `draws > 0`.
pub fn cmd_rad(out: &Path, draws: u64, seed: u64, threads: Option<usize>) -> CliResult<RadReport> {
    let duals = load_duals(out)?;
    if duals.is_empty() {
        return Err(CliError::Precondition("no dual files to analyse".into()));
    }
    let sample = DualSample::new(duals.into_iter().map(|d| d.dual).collect())?;
    let n = sample.len();
    let distinct = distinct_vectors(&sample).len();
    let exact = if n <= EXACT_MAX_N {
        Some(empirical_rad_exact(&sample)?)
    } else {
        None
    };
    let mc = if draws > 0 {
        Some(with_pool(threads, || {
            empirical_rad_mc(&sample, draws, seed)
        })??)
    } else {
        None
    };
    Ok(RadReport {
        n,
        max_pieces: sample.max_pieces(),
        distinct_vectors: distinct,
        exact,
        mc_estimate: mc.map(|m| m.estimate),
        mc_stderr: mc.map(|m| m.stderr),
        massart: massart_bound(distinct as u64, n as u64),
        pwc: pwc_rad_bound(n as u64, sample.max_pieces() as u64),
    })
}

/// Settings for a full `gen → duals → bounds → counterexample` run.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub out: PathBuf,
    pub seed: u64,
    pub instances: usize,
    pub generator: WdpGenConfig,
    pub rules: RulePair,
    pub kappa: KappaSpec,
    pub grid_eps: f64,
    pub bounds: BoundsOptions,
    pub counterexample: CounterexampleOptions,
    pub threads: Option<usize>,
}

impl PipelineConfig {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            out: out.into(),
            seed: 0,
            instances: 50,
            generator: WdpGenConfig::default(),
            rules: RulePair(ScoringRule::L, ScoringRule::S),
            kappa: KappaSpec::default(),
            grid_eps: DEFAULT_GRID_EPS,
            bounds: BoundsOptions::default(),
            counterexample: CounterexampleOptions::default(),
            threads: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineReport {
    pub duals: DualsSummary,
    pub bounds: BoundsReport,
    pub counterexample: SuiteReport,
}

pub fn run_pipeline(cfg: &PipelineConfig) -> CliResult<PipelineReport> {
    cmd_gen(&cfg.out, cfg.seed, cfg.instances, &cfg.generator)?;
    let duals = cmd_duals(&cfg.out, cfg.rules, cfg.kappa, cfg.grid_eps, cfg.threads)?;
    let bounds = cmd_bounds(&cfg.out, &cfg.bounds)?;
    let counterexample = cmd_counterexample(&cfg.out, &cfg.counterexample)?;
    Ok(PipelineReport {
        duals,
        bounds,
        counterexample,
    })
}

/// Writes `value` as pretty JSON to `path`, or to stdout when `path` is
/// `None`.
pub fn emit_json<T: Serialize>(path: Option<&Path>, value: &T) -> CliResult<()> {
    match path {
        Some(p) => write_json(p, value),
        None => {
            let stdout = std::io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            serde_json::to_writer_pretty(&mut w, value).expect("serializable value");
            writeln!(w).map_err(|e| CliError::io("<stdout>", e))
        }
    }
}
