//! Batch driver: flat key-value configuration, task dispatch and artifacts.
//!
//! A config file holds one `key = value` pair per line (TOML scalar syntax,
//! `#` comments, no tables). Every task writes its artifacts under
//! `output_dir` and reports an exit status: 0 success, 1 bad config,
//! 2 solver failure, 3 regime rejection, 4 failed property.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::dynamics::{orbital_distance, perturb, probe_time_step, refine_on_grid, evolve_with, ComplexState};
use crate::energy::{Classification, SolutionRecord, StatePair};
use crate::error::{Error, Result};
use crate::model::{compute_thresholds, GeometryConstants, GnConstants, Params, Regime};
use crate::scalar::{ground_state, ground_summary};
use crate::solvers::{
    beta1, fibering_curve, initial_pair, linking_solve, local_minimize, mountain_pass, subadditivity_check, SolverOptions,
};
use crate::suite::{property_suite, PropertyResult, SuiteScale};

/// Exit status for a failed property check.
pub const EXIT_PROPERTY: i32 = 4;

/// Environment variable capping the worker threads of parallel sweeps.
pub const THREADS_ENV: &str = "NLS_NORMSOLVE_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Task {
    Constants,
    ScalarGround,
    SolveLocal,
    SolveMP,
    SolveLink,
    Landscape,
    SubaddCheck,
    Evolve,
    PropertySuite,
}

impl Task {
    pub fn parse(s: &str) -> Option<Task> {
        Some(match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "constants" => Task::Constants,
            "scalarground" => Task::ScalarGround,
            "solvelocal" => Task::SolveLocal,
            "solvemp" => Task::SolveMP,
            "solvelink" => Task::SolveLink,
            "landscape" => Task::Landscape,
            "subaddcheck" => Task::SubaddCheck,
            "evolve" => Task::Evolve,
            "propertysuite" => Task::PropertySuite,
            _ => return None,
        })
    }

    /// Whether the task needs the coupled-system parameters.
    fn needs_params(self) -> bool {
        !matches!(self, Task::ScalarGround | Task::Evolve | Task::PropertySuite)
    }
}

/// Coupling given directly or as a fraction of the admissible threshold
/// (`beta0` under H0, `min(beta0, beta1)` under H1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Beta {
    Value(f64),
    Fraction(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub task: Task,
    /// Present when the task needs it; `beta` holds a placeholder until
    /// [`RunConfig::resolve_params`] applies [`RunConfig::beta`].
    pub params: Option<Params>,
    pub beta: Beta,
    pub opts: SolverOptions,
    pub output_dir: PathBuf,
    /// `N` as given, also for tasks without coupled parameters.
    pub dim: Option<usize>,
    /// `scalar-ground` exponent.
    pub p: Option<f64>,
    /// Existing local minimizer record for `solve-mp`.
    pub local: Option<PathBuf>,
    /// Record for `evolve` and `landscape`.
    pub solution: Option<PathBuf>,
    pub t_end: f64,
    pub dt: Option<f64>,
    pub perturb: f64,
    /// Rows written by `evolve` are every `stride`-th step.
    pub stride: Option<usize>,
    pub d: Option<(f64, f64)>,
    pub splits: usize,
    pub scale: SuiteScale,
}

/// Raw key-value pairs with the line each came from.
#[derive(Debug, Clone, Default)]
pub struct ConfigMap {
    entries: BTreeMap<String, (Option<usize>, toml::Value)>,
}

const KEYS: &[&str] = &[
    "task", "N", "p1", "p2", "r1", "r2", "mu1", "mu2", "beta", "beta_fraction", "a1", "a2", "p", "grid_n", "final_n",
    "r_max", "tol", "seed", "output_dir", "max_iter", "rho_bar_fraction", "local", "solution", "T", "dt", "perturb",
    "stride", "d1", "d2", "splits", "scale",
];

impl ConfigMap {
    /// Parses `key = value` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = ConfigMap::default();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            if trimmed.starts_with('[') {
                return Err(cfg_err(Some(line), "tables are not allowed; use flat key = value lines"));
            }
            let table: toml::Table = toml::from_str(trimmed)
                .map_err(|e| cfg_err(Some(line), format!("cannot parse `{trimmed}`: {}", e.message())))?;
            for (key, value) in table {
                if value.is_table() || value.is_array() {
                    return Err(cfg_err(Some(line), format!("`{key}` must be a scalar")));
                }
                map.insert(key, value, Some(line))?;
            }
        }
        Ok(map)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| cfg_err(None, format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn insert(&mut self, key: String, value: toml::Value, line: Option<usize>) -> Result<()> {
        if !KEYS.contains(&key.as_str()) {
            return Err(cfg_err(line, format!("unknown key `{key}`")));
        }
        if let Some((Some(prev), _)) = self.entries.get(&key) {
            if line.is_some() {
                return Err(cfg_err(line, format!("duplicate key `{key}` (first set at line {prev})")));
            }
        }
        self.entries.insert(key, (line, value));
        Ok(())
    }

    /// Sets or overrides a key from the command line; the value uses the
    /// same scalar syntax as the file, bare words are taken as strings.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));
        self.insert(key.to_string(), parsed, None)
    }

    /// Parses a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| cfg_err(None, format!("override `{pair}` is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn float(&self, key: &str) -> Result<Option<f64>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => match v {
                toml::Value::Float(x) => Ok(Some(*x)),
                toml::Value::Integer(i) => Ok(Some(*i as f64)),
                _ => Err(cfg_err(*line, format!("`{key}` must be a number"))),
            },
        }
    }

    fn uint(&self, key: &str) -> Result<Option<u64>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((_, toml::Value::Integer(i))) if *i >= 0 => Ok(Some(*i as u64)),
            Some((line, _)) => Err(cfg_err(*line, format!("`{key}` must be a nonnegative integer"))),
        }
    }

    fn string(&self, key: &str) -> Result<Option<String>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((_, toml::Value::String(s))) => Ok(Some(s.clone())),
            Some((line, _)) => Err(cfg_err(*line, format!("`{key}` must be a string"))),
        }
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.entries.get(key).and_then(|(l, _)| *l)
    }

    fn require_float(&self, key: &str, task: Task) -> Result<f64> {
        self.float(key)?
            .ok_or_else(|| cfg_err(None, format!("task {task:?} requires `{key}`")))
    }
}

fn cfg_err(line: Option<usize>, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

impl RunConfig {
    /// Builds a validated config; `task` may come from the map or be forced
    /// by the caller (the CLI subcommand).
    pub fn from_map(map: &ConfigMap, task: Option<Task>) -> Result<Self> {
        let task = match (task, map.string("task")?) {
            (Some(t), _) => t,
            (None, Some(s)) => Task::parse(&s).ok_or_else(|| cfg_err(map.line("task"), format!("unknown task `{s}`")))?,
            (None, None) => return Err(cfg_err(None, "missing `task`")),
        };
        let beta = match (map.float("beta")?, map.float("beta_fraction")?) {
            (Some(_), Some(_)) => return Err(cfg_err(map.line("beta_fraction"), "give either `beta` or `beta_fraction`")),
            (Some(b), None) => Beta::Value(b),
            (None, Some(f)) => Beta::Fraction(f),
            (None, None) => Beta::Fraction(0.5),
        };
        // a stored record carries its own parameters
        let needs = task.needs_params() && !(task == Task::Landscape && map.contains("solution"));
        let params = if needs {
            let dim = map
                .uint("N")?
                .ok_or_else(|| cfg_err(None, format!("task {task:?} requires `N`")))? as usize;
            let p = Params {
                dim,
                p1: map.require_float("p1", task)?,
                p2: map.require_float("p2", task)?,
                r1: map.require_float("r1", task)?,
                r2: map.require_float("r2", task)?,
                mu1: map.float("mu1")?.unwrap_or(1.0),
                mu2: map.float("mu2")?.unwrap_or(1.0),
                beta: match beta {
                    Beta::Value(b) => b,
                    Beta::Fraction(_) => 0.0,
                },
                a1: map.require_float("a1", task)?,
                a2: map.require_float("a2", task)?,
            };
            p.validate()?;
            Some(p)
        } else {
            None
        };

        let mut opts = SolverOptions::default();
        if let Some(n) = map.uint("grid_n")? {
            opts.grid_n = n as usize;
        }
        if let Some(n) = map.uint("final_n")? {
            opts.final_n = n as usize;
        }
        opts.r_max = map.float("r_max")?;
        if let Some(t) = map.float("tol")? {
            opts.tol = t;
        }
        if let Some(s) = map.uint("seed")? {
            opts.seed = s;
        }
        if let Some(m) = map.uint("max_iter")? {
            opts.max_iter = m as usize;
        }
        if let Some(f) = map.float("rho_bar_fraction")? {
            opts.rho_bar_fraction = f;
        }
        if !(opts.tol > 0.0) {
            return Err(cfg_err(map.line("tol"), "`tol` must be positive"));
        }
        if opts.grid_n < 17 || opts.final_n < 17 {
            return Err(cfg_err(map.line("grid_n").or(map.line("final_n")), "grid sizes must be at least 17"));
        }
        if !(opts.rho_bar_fraction > 0.0 && opts.rho_bar_fraction < 1.0) {
            return Err(cfg_err(map.line("rho_bar_fraction"), "`rho_bar_fraction` must lie in (0, 1)"));
        }
        if let Some(r) = opts.r_max {
            if !(r > 0.0) {
                return Err(cfg_err(map.line("r_max"), "`r_max` must be positive"));
            }
        }

        let d = match (map.float("d1")?, map.float("d2")?) {
            (Some(a), Some(b)) => Some((a, b)),
            (None, None) => None,
            _ => return Err(cfg_err(None, "give both `d1` and `d2`")),
        };
        let scale = match map.string("scale")?.as_deref() {
            None | Some("desk") => SuiteScale::default(),
            Some("acceptance") => SuiteScale::acceptance(),
            Some(other) => return Err(cfg_err(map.line("scale"), format!("unknown scale `{other}` (desk or acceptance)"))),
        };
        let cfg = RunConfig {
            task,
            params,
            beta,
            opts,
            output_dir: PathBuf::from(map.string("output_dir")?.unwrap_or_else(|| "out".into())),
            dim: map.uint("N")?.map(|n| n as usize),
            p: map.float("p")?,
            local: map.string("local")?.map(PathBuf::from),
            solution: map.string("solution")?.map(PathBuf::from),
            t_end: map.float("T")?.unwrap_or(10.0),
            dt: map.float("dt")?,
            perturb: map.float("perturb")?.unwrap_or(0.0),
            stride: map.uint("stride")?.map(|s| s.max(1) as usize),
            d,
            splits: map.uint("splits")?.unwrap_or(5) as usize,
            scale,
        };
        match task {
            Task::ScalarGround if cfg.p.is_none() || cfg.dim.is_none() => {
                return Err(cfg_err(None, "task ScalarGround requires `N` and `p`"))
            }
            Task::Evolve if cfg.solution.is_none() => return Err(cfg_err(None, "task Evolve requires `solution`")),
            _ => {}
        }
        if !(cfg.t_end > 0.0) {
            return Err(cfg_err(map.line("T"), "`T` must be positive"));
        }
        if let Some(dt) = cfg.dt {
            if !(dt > 0.0) {
                return Err(cfg_err(map.line("dt"), "`dt` must be positive"));
            }
        }
        if !(0.0..1.0).contains(&cfg.perturb) {
            return Err(cfg_err(map.line("perturb"), "`perturb` must lie in [0, 1)"));
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path, task: Option<Task>) -> Result<Self> {
        Self::from_map(&ConfigMap::from_file(path)?, task)
    }

    /// Parameters with the coupling resolved and the constants computed.
    pub fn resolve_params(&self) -> Result<(Params, GeometryConstants)> {
        let p = self
            .params
            .ok_or_else(|| cfg_err(None, format!("task {:?} has no coupled-system parameters", self.task)))?;
        let gn = GnConstants::sharp_or_analytic(&p)?;
        let constants = compute_thresholds(&p, &gn)?;
        let p = match self.beta {
            Beta::Value(_) => p,
            Beta::Fraction(f) => {
                let limit = match constants.regime {
                    Regime::H1 => constants.beta0.min(beta1(&p)?),
                    _ => constants.beta0,
                };
                p.with_beta(f * limit)
            }
        };
        // K1..K3 and rho0 do not depend on beta
        Ok((p, compute_thresholds(&p, &gn)?))
    }
}

/// Result of a run: written files and the exit status to report.
#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub artifacts: Vec<PathBuf>,
    pub exit_code: i32,
    pub summary: serde_json::Value,
}

impl Outcome {
    fn ok(artifacts: Vec<PathBuf>, summary: serde_json::Value) -> Self {
        Self {
            artifacts,
            exit_code: 0,
            summary,
        }
    }
}

/// Caps rayon's global pool by `NLS_NORMSOLVE_THREADS`, if set. Returns the
/// cap applied.
pub fn install_thread_cap() -> Result<Option<usize>> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| cfg_err(None, format!("{THREADS_ENV}={raw} is not a positive integer")))?;
    // a second call (tests) finds the pool already built; that is fine
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(Some(n))
}

fn write_json(path: PathBuf, value: &impl Serialize) -> Result<PathBuf> {
    std::fs::write(&path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(path)
}

/// Runs the configured task.
pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    let dir = cfg.output_dir.as_path();
    match cfg.task {
        Task::Constants => run_constants(cfg, dir),
        Task::ScalarGround => run_scalar_ground(cfg, dir),
        Task::SolveLocal => {
            let (p, k) = cfg.resolve_params()?;
            let rec = solve_local(&p, &k, &cfg.opts)?;
            let path = rec.save(dir, "local")?;
            Ok(Outcome::ok(artifacts_of(&path), record_summary(&rec)))
        }
        Task::SolveMP => run_mountain_pass(cfg, dir),
        Task::SolveLink => {
            let (p, k) = cfg.resolve_params()?;
            let (rec, report) = linking_solve(&p, &k, &cfg.opts)?;
            let path = rec.save(dir, "linking")?;
            let mut arts = artifacts_of(&path);
            arts.push(write_json(dir.join("linking_report.json"), &report)?);
            Ok(Outcome::ok(arts, record_summary(&rec)))
        }
        Task::Landscape => run_landscape(cfg, dir),
        Task::SubaddCheck => run_subadd(cfg, dir),
        Task::Evolve => run_evolve(cfg, dir),
        Task::PropertySuite => {
            let results = property_suite(&cfg.scale, cfg.opts.seed, &cfg.opts, dir);
            let failed = results.iter().filter(|r| !r.passed).count();
            let path = write_json(dir.join("property_suite.json"), &suite_json(&results))?;
            Ok(Outcome {
                artifacts: vec![path],
                exit_code: if failed == 0 { 0 } else { EXIT_PROPERTY },
                summary: json!({ "properties": results.len(), "failed": failed }),
            })
        }
    }
}

fn suite_json(results: &[PropertyResult]) -> serde_json::Value {
    json!({
        "passed": results.iter().all(|r| r.passed),
        "results": results,
    })
}

fn artifacts_of(record: &Path) -> Vec<PathBuf> {
    let stem = record.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
    let dir = record.parent().unwrap_or(Path::new("."));
    vec![
        record.to_path_buf(),
        dir.join(format!("{stem}_u1.bin")),
        dir.join(format!("{stem}_u2.bin")),
    ]
}

fn record_summary(rec: &SolutionRecord) -> serde_json::Value {
    json!({
        "classification": rec.classification,
        "energy": rec.energy,
        "lambda1": rec.lambda1,
        "lambda2": rec.lambda2,
        "Q_residual": rec.pohozaev_residual,
        "grad_residual": rec.grad_residual,
        "kinetic": rec.kinetic(),
    })
}

fn solve_local(p: &Params, k: &GeometryConstants, opts: &SolverOptions) -> Result<SolutionRecord> {
    let init = initial_pair(p, k, opts)?;
    local_minimize(p, k, &init, opts)
}

fn run_constants(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let (p, k) = cfg.resolve_params()?;
    let report = k.report(&p);
    let b1 = if k.regime == Regime::H1 { Some(beta1(&p)?) } else { None };
    let value = json!({
        "rho0": k.rho0,
        "beta0": k.beta0,
        "K1": k.k1,
        "K2": k.k2,
        "K3": k.k3,
        "q": k.holder_q,
        "beta1": b1,
        "beta": p.beta,
        "regime": k.regime,
        "inequalities": {
            "rho_condition": report.rho_condition,
            "beta_condition": report.beta_condition,
            "bound": 0.125,
            "hold": report.rho_condition <= 0.125 * (1.0 + 1e-12) && report.beta_condition <= 0.125 * (1.0 + 1e-12),
        },
        "gn": {
            "source": k.gn_source,
            "alpha_p1": k.gn_alpha_p1,
            "alpha_p2": k.gn_alpha_p2,
            "c_p1": k.gn_c_p1,
            "c_p2": k.gn_c_p2,
            "c_cross": k.gn_c_cross,
        },
        "params": p,
        "metadata": { "holder_split": "q = (r1+r2)/r1; beta0 depends on this choice" },
    });
    let path = write_json(dir.join("constants.json"), &value)?;
    Ok(Outcome::ok(vec![path], value))
}

fn run_scalar_ground(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    // from_map guarantees both are present for this task
    let p = cfg.p.unwrap_or_default();
    let dim = cfg.dim.unwrap_or_default();
    let summary = ground_summary(dim, p)?;
    let gs = ground_state(dim, p)?;
    let bin = dir.join(format!("ground_N{dim}_p{p}.bin"));
    gs.w0.write_binary(&bin)?;
    let value = serde_json::to_value(&summary)?;
    let path = write_json(dir.join("scalar_ground.json"), &value)?;
    Ok(Outcome::ok(vec![path, bin], value))
}

fn run_mountain_pass(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let (p, k) = cfg.resolve_params()?;
    if k.regime != Regime::H0 {
        return Err(Error::Regime(format!("solve-mp needs (H0); parameters are in {:?}", k.regime)));
    }
    let local = match &cfg.local {
        Some(path) => {
            let rec = SolutionRecord::load(path)?;
            if rec.classification != Classification::LocalMin {
                return Err(cfg_err(None, format!("{} is not a local minimizer record", path.display())));
            }
            rec
        }
        None => solve_local(&p, &k, &cfg.opts)?,
    };
    let mut arts = Vec::new();
    if cfg.local.is_none() {
        arts.extend(artifacts_of(&local.save(dir, "local")?));
    }
    let rec = mountain_pass(&p, &k, &local, &cfg.opts)?;
    arts.extend(artifacts_of(&rec.save(dir, "mountain_pass")?));
    let mut summary = record_summary(&rec);
    summary["local_energy"] = json!(local.energy);
    Ok(Outcome::ok(arts, summary))
}

fn run_landscape(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let (state, params): (StatePair, Params) = match &cfg.solution {
        Some(path) => {
            let rec = SolutionRecord::load(path)?;
            (rec.state, rec.params)
        }
        None => {
            let (p, k) = cfg.resolve_params()?;
            (initial_pair(&p, &k, &cfg.opts)?, p)
        }
    };
    let curve = fibering_curve(&state, &params);
    let csv = dir.join("landscape.csv");
    let mut w = BufWriter::new(File::create(&csv)?);
    writeln!(w, "t,theta")?;
    for (t, th) in &curve.samples {
        writeln!(w, "{t:e},{th:e}")?;
    }
    w.flush()?;
    let value = json!({
        "coeffs": curve.coeffs,
        "stationary_points": curve.stationary_points,
    });
    let path = write_json(dir.join("landscape.json"), &value)?;
    Ok(Outcome::ok(vec![csv, path], value))
}

fn run_subadd(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let (p, k) = cfg.resolve_params()?;
    if k.regime != Regime::H0 {
        return Err(Error::Regime(format!("subadd-check needs (H0); parameters are in {:?}", k.regime)));
    }
    let splits: Vec<(f64, f64)> = match cfg.d {
        Some(d) => vec![d],
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.opts.seed);
            (0..cfg.splits)
                .map(|_| (rng.gen_range(0.1..0.9) * p.a1, rng.gen_range(0.1..0.9) * p.a2))
                .collect()
        }
    };
    let mut reports = Vec::new();
    for (d1, d2) in splits {
        reports.push(subadditivity_check(&p, &k, d1, d2, &cfg.opts)?);
    }
    let all = reports.iter().all(|r| r.holds && r.total_negative);
    let value = json!({ "holds": all, "tol": cfg.opts.tol, "reports": reports });
    let path = write_json(dir.join("subadditivity.json"), &value)?;
    Ok(Outcome {
        artifacts: vec![path],
        exit_code: if all { 0 } else { EXIT_PROPERTY },
        summary: value,
    })
}

fn run_evolve(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    // from_map guarantees a solution path for this task
    let path = cfg.solution.as_deref().unwrap_or(Path::new("solution.json"));
    let rec = refine_on_grid(&SolutionRecord::load(path)?, cfg.opts.grid_n)?;
    let dt = cfg.dt.unwrap_or_else(|| probe_time_step(&rec, 200));
    let start = if cfg.perturb > 0.0 {
        perturb(&rec.state, cfg.perturb, cfg.opts.seed)?
    } else {
        rec.state.clone()
    };
    let init = ComplexState::from_real(&start);
    // land exactly on T
    let steps = (cfg.t_end / dt).ceil().max(1.0) as usize;
    let dt = cfg.t_end / steps as f64;
    let stride = cfg.stride.unwrap_or((steps / 1000).max(1));
    let csv = dir.join("evolve.csv");
    let mut w = BufWriter::new(File::create(&csv)?);
    writeln!(w, "t,mass1,mass2,energy,orbital_distance")?;
    let mut io_err = None;
    let mut dmax = 0.0f64;
    let mut d0 = None;
    evolve_with(&init, &rec.params, cfg.t_end, dt, |k, t, s| {
        if k % stride != 0 && k != steps {
            return;
        }
        let (m1, m2) = s.masses();
        let d = orbital_distance(s, &rec).unwrap_or(f64::NAN);
        d0.get_or_insert(d);
        dmax = dmax.max(d);
        if let Err(e) = writeln!(w, "{t:e},{m1:e},{m2:e},{:e},{d:e}", s.energy(&rec.params)) {
            io_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = io_err {
        return Err(e.into());
    }
    w.flush()?;
    let value = json!({
        "dt": dt,
        "T": cfg.t_end,
        "grid_n": cfg.opts.grid_n,
        "perturb": cfg.perturb,
        "initial_distance": d0,
        "max_distance": dmax,
    });
    Ok(Outcome::ok(vec![csv], value))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "N = 3\np1 = 2.5\np2 = 2.5\nr1 = 2\nr2 = 2\na1 = 1\na2 = 1\n";

    fn line_of(err: Error) -> Option<usize> {
        match err {
            Error::Config { line, .. } => line,
            other => panic!("not a config error: {other}"),
        }
    }

    #[test]
    fn comments_defaults_and_task_names() {
        let text = format!("# comment\n\ntask = \"solve-mp\"  # trailing\n{BASE}");
        let cfg = RunConfig::from_map(&ConfigMap::parse(&text).unwrap(), None).unwrap();
        assert_eq!(cfg.task, Task::SolveMP);
        assert_eq!(cfg.beta, Beta::Fraction(0.5));
        assert_eq!(cfg.opts, SolverOptions::default());
        assert_eq!(Task::parse("Solve_Link"), Some(Task::SolveLink));
        assert_eq!(Task::parse("solve"), None);
    }

    #[test]
    fn diagnostics_carry_line_numbers() {
        assert_eq!(line_of(ConfigMap::parse("N = 3\nwhat = 1\n").unwrap_err()), Some(2));
        assert_eq!(line_of(ConfigMap::parse("N = 3\nN = 4\n").unwrap_err()), Some(2));
        assert_eq!(line_of(ConfigMap::parse("N = 3\n[t]\n").unwrap_err()), Some(2));
        let map = ConfigMap::parse(&format!("{BASE}tol = \"small\"\n")).unwrap();
        assert_eq!(line_of(RunConfig::from_map(&map, Some(Task::SolveLocal)).unwrap_err()), Some(8));
        let map = ConfigMap::parse(&format!("{BASE}beta = 1\nbeta_fraction = 0.5\n")).unwrap();
        assert_eq!(line_of(RunConfig::from_map(&map, Some(Task::Constants)).unwrap_err()), Some(9));
    }

    #[test]
    fn task_requirements() {
        let empty = ConfigMap::default();
        assert!(RunConfig::from_map(&empty, None).is_err());
        assert!(RunConfig::from_map(&empty, Some(Task::SolveLocal)).is_err());
        assert!(RunConfig::from_map(&empty, Some(Task::Evolve)).is_err());
        assert!(RunConfig::from_map(&empty, Some(Task::PropertySuite)).is_ok());
        let mut m = ConfigMap::default();
        m.set("N", "2").unwrap();
        m.set("p", "3.5").unwrap();
        let cfg = RunConfig::from_map(&m, Some(Task::ScalarGround)).unwrap();
        assert_eq!((cfg.dim, cfg.p), (Some(2), Some(3.5)));
    }

    #[test]
    fn beta_fraction_resolves_against_the_threshold() {
        let map = ConfigMap::parse(&format!("{BASE}beta_fraction = 0.25\n")).unwrap();
        let cfg = RunConfig::from_map(&map, Some(Task::Constants)).unwrap();
        let (p, k) = cfg.resolve_params().unwrap();
        assert!((p.beta - 0.25 * k.beta0).abs() <= 1e-15 * k.beta0);
    }

    #[test]
    fn overrides_replace_file_values() {
        let mut map = ConfigMap::parse(&format!("{BASE}tol = 1e-6\n")).unwrap();
        map.set_pair("tol=1e-7").unwrap();
        map.set_pair("output_dir=results").unwrap();
        let cfg = RunConfig::from_map(&map, Some(Task::SolveLocal)).unwrap();
        assert_eq!(cfg.opts.tol, 1e-7);
        assert_eq!(cfg.output_dir, PathBuf::from("results"));
        assert!(map.set_pair("tol").is_err());
    }
}
