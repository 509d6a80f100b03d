//! The `aqm` command line: one `run` subcommand per experiment.
//!
//! A run is configured by an optional JSON file and flag overrides (flags
//! win). Every run writes `result.json` (tool version, the fully resolved
//! config, summary statistics and pass flags) and, unless disabled, CSV
//! streams. Exit codes: 0 success, 1 configuration error, 2 a check failed
//! or the particle model could not reproduce the pattern.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::algebra::{masa_from, Observable};
use crate::ensemble::{self, QuantumState};
use crate::error::AqmError;
use crate::interferometer::{self, BuiltinPolicy, Detector, DeviceConfig, SplitterRatio};
use crate::linalg::{self, c};
use crate::random;
use crate::rng::derive_seed;
use crate::serial::{self, MatrixRows};
use crate::two_slit::{self, SlitGeometry};

pub const TOOL: &str = "aqm";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(
    name = "aqm",
    version,
    about = "Algebraic quantum mechanics experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment and write its result files.
    Run(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    TwoSlit,
    DelayedChoice,
    Postulates,
    Khinchin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum M4Choice {
    Present,
    Absent,
    DelayedRandom,
    DelayedAlternating,
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    pub experiment: Experiment,
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of events (two-slit, delayed-choice).
    #[arg(long)]
    pub n: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Two-slit geometry preset.
    #[arg(long)]
    pub preset: Option<String>,
    /// Mirror M4 policy (delayed-choice).
    #[arg(long, value_enum)]
    pub m4: Option<M4Choice>,
    /// Insertion probability for `--m4 delayed-random`.
    #[arg(long)]
    pub p: Option<f64>,
    /// Hilbert-space dimension (postulates).
    #[arg(long)]
    pub dim: Option<usize>,
    /// Random instances (postulates).
    #[arg(long)]
    pub trials: Option<u64>,
    /// Number of seeds (khinchin).
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long)]
    pub n_small: Option<u64>,
    #[arg(long)]
    pub n_large: Option<u64>,
    /// Skip CSV outputs.
    #[arg(long)]
    pub no_csv: bool,
}

fn default_seed() -> u64 {
    0
}
fn default_n() -> u64 {
    100_000
}
fn default_out() -> PathBuf {
    PathBuf::from("aqm-out")
}
fn default_true() -> bool {
    true
}

/// Full run configuration as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_n")]
    pub n_events: u64,
    /// Not echoed in results, so runs replayed into different directories
    /// produce identical result files.
    #[serde(default = "default_out", skip_serializing)]
    pub out: PathBuf,
    #[serde(default = "default_true")]
    pub write_csv: bool,
    #[serde(default)]
    pub two_slit: TwoSlitConfig,
    #[serde(default)]
    pub delayed_choice: DelayedChoiceConfig,
    #[serde(default)]
    pub postulates: PostulatesConfig,
    #[serde(default)]
    pub khinchin: KhinchinConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoSlitConfig {
    /// `symmetric64` unless `geometry` is given.
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub geometry: Option<SlitGeometry>,
    /// Source amplitudes as `[re, im]` pairs; uniform when absent.
    #[serde(default)]
    pub source: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DelayedChoiceConfig {
    pub m4: M4Choice,
    pub p: f64,
    /// Seed of the experimenter's decisions; derived from the run seed when
    /// absent.
    pub policy_seed: Option<u64>,
    pub splitter: Option<SplitterRatio>,
}

impl Default for DelayedChoiceConfig {
    fn default() -> Self {
        Self {
            m4: M4Choice::DelayedRandom,
            p: 0.5,
            policy_seed: None,
            splitter: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PostulatesConfig {
    pub dim: usize,
    pub trials: u64,
    /// Total measure/re-measure pairs, spread over `trials` instances.
    pub luders_trials: u64,
    /// Samples per context in the KS smoke test.
    pub ks_samples: u64,
}

impl Default for PostulatesConfig {
    fn default() -> Self {
        Self {
            dim: 8,
            trials: 100,
            luders_trials: 10_000,
            ks_samples: 2_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KhinchinConfig {
    /// State amplitudes; `|+⟩` when absent.
    pub state: Option<Vec<[f64; 2]>>,
    /// Observable; `σ_z` when absent.
    pub observable: Option<MatrixRows>,
    pub seeds: usize,
    pub n_small: u64,
    pub n_large: u64,
}

impl Default for KhinchinConfig {
    fn default() -> Self {
        Self {
            state: None,
            observable: None,
            seeds: 50,
            n_small: 10_000,
            n_large: 1_000_000,
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    /// Malformed or invalid configuration (exit 1).
    Config(String),
    /// A model-violation diagnostic or failed check (exit 2).
    Failed(String),
}

impl From<AqmError> for CliError {
    fn from(e: AqmError) -> Self {
        match e {
            AqmError::ModelViolation { .. } => CliError::Failed(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Failed(_) => 2,
        }
    }
}

impl RunConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            seed: default_seed(),
            n_events: default_n(),
            out: default_out(),
            write_csv: true,
            two_slit: TwoSlitConfig::default(),
            delayed_choice: DelayedChoiceConfig::default(),
            postulates: PostulatesConfig::default(),
            khinchin: KhinchinConfig::default(),
        }
    }

    /// Loads the JSON file (if any) and applies flag overrides.
    pub fn resolve(args: &RunArgs) -> Result<Self, CliError> {
        let mut cfg = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                let cfg: RunConfig = serde_json::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                if cfg.experiment != args.experiment {
                    return Err(CliError::Config(format!(
                        "config is for experiment {:?}, command line asks for {:?}",
                        cfg.experiment, args.experiment
                    )));
                }
                cfg
            }
            None => RunConfig::new(args.experiment),
        };
        if let Some(s) = args.seed {
            cfg.seed = s;
        }
        if let Some(n) = args.n {
            cfg.n_events = n;
        }
        if let Some(out) = &args.out {
            cfg.out = out.clone();
        }
        if args.no_csv {
            cfg.write_csv = false;
        }
        if let Some(preset) = &args.preset {
            cfg.two_slit.preset = Some(preset.clone());
            cfg.two_slit.geometry = None;
        }
        if let Some(m4) = args.m4 {
            cfg.delayed_choice.m4 = m4;
        }
        if let Some(p) = args.p {
            cfg.delayed_choice.p = p;
        }
        if let Some(d) = args.dim {
            cfg.postulates.dim = d;
        }
        if let Some(t) = args.trials {
            cfg.postulates.trials = t;
        }
        if let Some(s) = args.seeds {
            cfg.khinchin.seeds = s;
        }
        if let Some(n) = args.n_small {
            cfg.khinchin.n_small = n;
        }
        if let Some(n) = args.n_large {
            cfg.khinchin.n_large = n;
        }
        cfg.finish()?;
        Ok(cfg)
    }

    /// Fills derived defaults and validates values.
    fn finish(&mut self) -> Result<(), CliError> {
        if self.n_events == 0 {
            return Err(CliError::Config("n_events must be at least 1".into()));
        }
        match self.experiment {
            Experiment::TwoSlit => {
                if self.two_slit.geometry.is_none() {
                    let preset = self
                        .two_slit
                        .preset
                        .get_or_insert_with(|| "symmetric64".to_owned());
                    self.two_slit.geometry = Some(geometry_preset(preset)?);
                }
                self.two_slit
                    .geometry
                    .as_ref()
                    .expect("set above")
                    .validate()?;
            }
            Experiment::DelayedChoice => {
                let dc = &mut self.delayed_choice;
                if !(0.0..=1.0).contains(&dc.p) {
                    return Err(CliError::Config(format!("p = {} outside [0, 1]", dc.p)));
                }
                dc.policy_seed.get_or_insert(derive_seed(self.seed, 0xDC));
                dc.splitter
                    .get_or_insert_with(SplitterRatio::default)
                    .validate()?;
            }
            Experiment::Postulates => {
                let p = &self.postulates;
                if p.dim < 2 || p.trials == 0 || p.ks_samples == 0 {
                    return Err(CliError::Config(
                        "postulates need dim >= 2, trials >= 1, ks_samples >= 1".into(),
                    ));
                }
            }
            Experiment::Khinchin => {
                let k = &self.khinchin;
                if k.seeds == 0 || k.n_small == 0 || k.n_large == 0 {
                    return Err(CliError::Config(
                        "khinchin needs seeds, n_small, n_large >= 1".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

pub fn geometry_preset(name: &str) -> Result<SlitGeometry, CliError> {
    match name {
        "symmetric64" => Ok(SlitGeometry::symmetric64()),
        "wide64" => Ok(SlitGeometry {
            sites: 64,
            slit_a: vec![14, 15, 16, 17],
            slit_b: vec![46, 47, 48, 49],
        }),
        "symmetric16" => Ok(SlitGeometry {
            sites: 16,
            slit_a: vec![4],
            slit_b: vec![12],
        }),
        other => Err(CliError::Config(format!(
            "unknown preset `{other}` (known: symmetric64, wide64, symmetric16)"
        ))),
    }
}

/// Files produced by a run, written atomically at the end.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub result: Value,
    pub pass: bool,
    pub csv: Vec<(String, Vec<u8>)>,
}

/// Executes a resolved configuration without touching the filesystem.
pub fn execute(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let (summary, pass, csv) = match cfg.experiment {
        Experiment::TwoSlit => run_two_slit(cfg)?,
        Experiment::DelayedChoice => run_delayed_choice(cfg)?,
        Experiment::Postulates => run_postulates(cfg)?,
        Experiment::Khinchin => run_khinchin(cfg)?,
    };
    let result = json!({
        "tool": TOOL,
        "version": VERSION,
        "experiment": cfg.experiment,
        "config": cfg,
        "summary": summary,
        "pass": pass,
    });
    Ok(RunOutput {
        result,
        pass,
        csv: if cfg.write_csv { csv } else { Vec::new() },
    })
}

type Outcome = (Value, bool, Vec<(String, Vec<u8>)>);

fn csv_bytes<S: Serialize>(rows: impl IntoIterator<Item = S>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)
            .map_err(|e| CliError::Config(format!("csv: {e}")))?;
    }
    w.into_inner()
        .map_err(|e| CliError::Config(format!("csv: {e}")))
}

fn run_two_slit(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let geom = cfg.two_slit.geometry.clone().expect("resolved");
    let psi0 = match &cfg.two_slit.source {
        Some(pairs) => {
            if pairs.len() != geom.sites {
                return Err(CliError::Config(format!(
                    "source has {} amplitudes, lattice has {} sites",
                    pairs.len(),
                    geom.sites
                )));
            }
            QuantumState::pure(&serial::amplitudes_from_pairs(pairs))?
        }
        None => two_slit::uniform_source(geom.sites),
    };
    let (p_a, p_b) = two_slit::slit_projectors(&geom)?;
    let psi_ab = two_slit::prepare_conditioned(&psi0, &p_a, &p_b)?;
    let pattern = two_slit::pattern(&psi_ab, &geom)?;
    let model = two_slit::KernelModel::new(&psi0, &geom)?;
    let run = two_slit::stacked_screens(&psi0, &geom, cfg.n_events, cfg.seed)?;
    let intensity = pattern.intensity();
    let tv = run.tv_distance(&intensity);
    let bound = two_slit::tv_bound(geom.sites, cfg.n_events);
    let closure = pattern
        .bins
        .iter()
        .map(|b| b.closure_residual())
        .fold(0.0, f64::max);
    let normalization = (intensity.iter().sum::<f64>() - 1.0).abs();
    let one_slit_each = run.slit_tally.0 + run.slit_tally.1 == cfg.n_events;
    let pass =
        tv <= bound && closure <= two_slit::CLOSURE_TOL && normalization <= 1e-9 && one_slit_each;

    let bins: Vec<Value> = pattern
        .bins
        .iter()
        .enumerate()
        .map(|(k, b)| {
            json!({
                "k": k,
                "direct_a": b.direct_a,
                "direct_b": b.direct_b,
                "interference": b.interference,
                "total": b.total,
                "count": run.histogram[k],
            })
        })
        .collect();
    let summary = json!({
        "slit_prob_a": model.slit_probs[0],
        "slit_prob_b": model.slit_probs[1],
        "clamped_mass": model.clamped_mass,
        "slit_tally": { "a": run.slit_tally.0, "b": run.slit_tally.1 },
        "tv_distance": tv,
        "tv_bound": bound,
        "closure_max_residual": closure,
        "normalization_residual": normalization,
        "visibility": pattern.visibility(),
        "bins": bins,
    });

    #[derive(Serialize)]
    struct Row {
        k: usize,
        prob: f64,
        count: u64,
    }
    let pattern_csv = csv_bytes(intensity.iter().enumerate().map(|(k, &prob)| Row {
        k,
        prob,
        count: run.histogram[k],
    }))?;
    Ok((summary, pass, vec![("pattern.csv".into(), pattern_csv)]))
}

fn run_delayed_choice(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let dc = &cfg.delayed_choice;
    let splitter = dc.splitter.expect("resolved");
    let policy = match dc.m4 {
        M4Choice::Present => BuiltinPolicy::Always { m4_present: true },
        M4Choice::Absent => BuiltinPolicy::Always { m4_present: false },
        M4Choice::DelayedRandom => BuiltinPolicy::DelayedRandom {
            p: dc.p,
            seed: dc.policy_seed.expect("resolved"),
        },
        M4Choice::DelayedAlternating => BuiltinPolicy::DelayedAlternating,
    };
    let events = interferometer::simulate(
        &interferometer::KernelDarkField,
        &splitter,
        &policy,
        cfg.n_events,
        cfg.seed,
    )?;
    let report = interferometer::summarize(&events, &splitter, cfg.n_events, cfg.seed)?;
    let base = DeviceConfig {
        m4_present: false,
        splitter,
        path_a_phase: 0.0,
    };
    let (a_da, a_db) = interferometer::wave_probabilities(&base)?;
    let (b_da, b_db) = interferometer::wave_probabilities(&base.with_m4(true))?;
    let db = events.iter().filter(|e| e.detector == Detector::DB).count() as f64;
    let n = events.len() as f64;
    let summary = json!({
        "p_DA": (n - db) / n,
        "p_DB": db / n,
        "wave": {
            "position_a": { "p_DA": a_da, "p_DB": a_db },
            "position_b": { "p_DA": b_da, "p_DB": b_db },
        },
        "equivalence": report,
    });

    #[derive(Serialize)]
    struct Row {
        event: u64,
        seed: u64,
        kernel_path: interferometer::Path,
        m4: bool,
        detector: Detector,
    }
    let rows = events.iter().map(|e| Row {
        event: e.event,
        seed: e.seed,
        kernel_path: e.kernel_path,
        m4: e.m4_at_arrival,
        detector: e.detector,
    });
    let csv = csv_bytes(rows)?;
    Ok((summary, report.pass, vec![("events.csv".into(), csv)]))
}

/// Upper limit on KS rejections among `trials` independent smoke tests at
/// level α: mean plus four binomial standard deviations, plus one.
fn ks_rejection_limit(trials: u64) -> u64 {
    let a = ensemble::KS_ALPHA;
    let t = trials as f64;
    (t * a + 4.0 * (t * a * (1.0 - a)).sqrt() + 1.0).floor() as u64
}

fn run_postulates(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let p = &cfg.postulates;
    let dim = p.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut p5_exact_max = 0.0_f64;
    let mut p5_ks_rejections = 0u64;
    let mut p6_max = 0.0_f64;
    let mut positivity_min = f64::INFINITY;
    let mut homomorphism_max = 0.0_f64;
    let mut luders = ensemble::Reproducibility {
        trials: 0,
        agreements: 0,
    };
    let per_instance = (p.luders_trials / p.trials).max(1);

    for i in 0..p.trials {
        let psi = random::mixed_state(dim, &mut rng);
        let q = random::maximal_context("Q", dim, &mut rng)?;
        let a = random::in_context(&q, 3, &mut rng);
        let qp = masa_from("Q'", &a, Some(&random::unitary(dim, &mut rng)))?;

        let r5 =
            ensemble::check_postulate5(&psi, &a, &q, &qp, p.ks_samples, derive_seed(cfg.seed, i))?;
        p5_exact_max = p5_exact_max.max(r5.exact_distance);
        if r5.ks_statistic >= r5.ks_critical {
            p5_ks_rejections += 1;
        }

        let r = ensemble::luders_reproducibility(
            &psi,
            &a,
            &q,
            &qp,
            per_instance,
            derive_seed(cfg.seed, 1_000_000 + i),
        )?;
        luders.trials += r.trials;
        luders.agreements += r.agreements;

        let x = random::hermitian(dim, &mut rng);
        let y = random::hermitian(dim, &mut rng);
        p6_max = p6_max.max(ensemble::postulate6_residual(&psi, &x, &y)?);

        let g = random::ginibre(dim, &mut rng);
        positivity_min = positivity_min.min(psi.expectation(&(g.adjoint() * &g))?.re);

        let u = random::generic_in_context(&q, &mut rng);
        let v = random::generic_in_context(&q, &mut rng);
        let uv = Observable::new(u.matrix() * v.matrix())?;
        let u_plus_v = u.add(&v)?;
        for chi in q.characters() {
            let (eu, ev) = (q.evaluate(&chi, &u)?, q.evaluate(&chi, &v)?);
            homomorphism_max = homomorphism_max
                .max((q.evaluate(&chi, &uv)? - eu * ev).abs())
                .max((q.evaluate(&chi, &u_plus_v)? - eu - ev).abs());
        }
    }

    let ks_limit = ks_rejection_limit(p.trials);
    let checks = json!({
        "postulate5_exact": { "max_distance": p5_exact_max, "tolerance": ensemble::EXACT_TOL,
                              "pass": p5_exact_max <= ensemble::EXACT_TOL },
        "postulate5_ks": { "rejections": p5_ks_rejections, "limit": ks_limit,
                           "alpha": ensemble::KS_ALPHA, "pass": p5_ks_rejections <= ks_limit },
        "postulate6": { "max_residual": p6_max, "tolerance": ensemble::EXACT_TOL,
                        "pass": p6_max <= ensemble::EXACT_TOL },
        "luders": { "trials": luders.trials, "agreements": luders.agreements,
                    "pass": luders.agreements == luders.trials },
        "positivity": { "min": positivity_min, "pass": positivity_min >= -1e-10 },
        "character_homomorphism": { "max_residual": homomorphism_max,
                                    "pass": homomorphism_max <= 1e-9 },
    });
    let pass = checks
        .as_object()
        .expect("object")
        .values()
        .all(|c| c["pass"] == Value::Bool(true));
    Ok((
        json!({ "dim": dim, "trials": p.trials, "checks": checks }),
        pass,
        Vec::new(),
    ))
}

fn run_khinchin(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let k = &cfg.khinchin;
    let psi = match &k.state {
        Some(pairs) => QuantumState::pure(&serial::amplitudes_from_pairs(pairs))?,
        None => QuantumState::pure(&[c(1.0, 0.0), c(1.0, 0.0)])?,
    };
    let a = match &k.observable {
        Some(rows) => Observable::new(serial::matrix_from_rows(rows)?)?,
        None => Observable::new(linalg::pauli_z())?,
    }
    .labeled("A");
    let q = masa_from("masa(A)", &a, None)?;
    let seeds: Vec<u64> = (0..k.seeds as u64)
        .map(|i| derive_seed(cfg.seed, i))
        .collect();
    let report = ensemble::khinchin_scaling(&psi, &a, &q, k.n_small, k.n_large, &seeds)?;
    let records = ensemble::measurement_records(&psi, &a, &q, k.n_small, seeds[0])?;
    let mut buf = Vec::new();
    ensemble::write_records_csv(&mut buf, &records)?;
    let pass = report.pass;
    Ok((json!(report), pass, vec![("measurements.csv".into(), buf)]))
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(dir.join(name)).map_err(|e| e.error)?;
    Ok(())
}

/// Resolves, executes and writes a run; returns the process exit code.
pub fn run(args: &RunArgs) -> i32 {
    let cfg = match RunConfig::resolve(args) {
        Ok(cfg) => cfg,
        Err(e) => return report_error(&e),
    };
    let output = match execute(&cfg) {
        Ok(o) => o,
        Err(e) => return report_error(&e),
    };
    let written = fs::create_dir_all(&cfg.out).and_then(|_| {
        let mut text = serde_json::to_string_pretty(&output.result)?;
        text.push('\n');
        write_atomic(&cfg.out, "result.json", text.as_bytes())?;
        for (name, bytes) in &output.csv {
            write_atomic(&cfg.out, name, bytes)?;
        }
        Ok(())
    });
    if let Err(e) = written {
        eprintln!("error: writing {}: {e}", cfg.out.display());
        return 1;
    }
    println!(
        "{} {}: {} ({})",
        TOOL,
        serde_json::to_string(&cfg.experiment)
            .unwrap_or_default()
            .trim_matches('"'),
        if output.pass { "PASS" } else { "FAIL" },
        cfg.out.join("result.json").display()
    );
    if output.pass {
        0
    } else {
        2
    }
}

fn report_error(e: &CliError) -> i32 {
    match e {
        CliError::Config(msg) => eprintln!("config error: {msg}"),
        CliError::Failed(msg) => eprintln!("failed: {msg}"),
    }
    e.exit_code()
}

pub fn main() -> i32 {
    if let Ok(threads) = std::env::var("AQM_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
            _ => {
                eprintln!("config error: AQM_THREADS must be a positive integer");
                return 1;
            }
        }
    }
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => run(&args),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(experiment: Experiment) -> RunArgs {
        RunArgs {
            experiment,
            config: None,
            seed: None,
            n: None,
            out: None,
            preset: None,
            m4: None,
            p: None,
            dim: None,
            trials: None,
            seeds: None,
            n_small: None,
            n_large: None,
            no_csv: false,
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = r#"{"experiment": "two-slit", "bogus": 1}"#;
        assert!(serde_json::from_str::<RunConfig>(text).is_err());
        let text = r#"{"experiment": "two-slit", "two_slit": {"preset": "symmetric64", "x": 2}}"#;
        assert!(serde_json::from_str::<RunConfig>(text).is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        fs::write(
            &path,
            r#"{"experiment": "delayed-choice", "seed": 1, "n_events": 50,
            "delayed_choice": {"m4": "absent", "p": 0.5}}"#,
        )
        .unwrap();
        let mut a = args(Experiment::DelayedChoice);
        a.config = Some(path);
        a.seed = Some(9);
        a.m4 = Some(M4Choice::Present);
        let cfg = RunConfig::resolve(&a).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.n_events, 50);
        assert_eq!(cfg.delayed_choice.m4, M4Choice::Present);
        assert!(cfg.delayed_choice.policy_seed.is_some());
    }

    #[test]
    fn experiment_mismatch_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        fs::write(&path, r#"{"experiment": "khinchin"}"#).unwrap();
        let mut a = args(Experiment::TwoSlit);
        a.config = Some(path);
        assert_eq!(RunConfig::resolve(&a).unwrap_err().exit_code(), 1);
    }

    #[test]
    fn bad_preset_and_probability() {
        let mut a = args(Experiment::TwoSlit);
        a.preset = Some("nope".into());
        assert_eq!(RunConfig::resolve(&a).unwrap_err().exit_code(), 1);
        let mut a = args(Experiment::DelayedChoice);
        a.p = Some(1.5);
        assert_eq!(RunConfig::resolve(&a).unwrap_err().exit_code(), 1);
    }

    #[test]
    fn model_violation_exit_code() {
        let mut a = args(Experiment::TwoSlit);
        a.n = Some(10);
        let mut cfg = RunConfig::resolve(&a).unwrap();
        cfg.two_slit.geometry = Some(SlitGeometry::new(8, vec![0], vec![4]).unwrap());
        let mut src = vec![[0.0, 0.0]; 8];
        src[0] = [1.0, 0.0];
        src[4] = [2.0, 0.0];
        cfg.two_slit.source = Some(src);
        assert_eq!(execute(&cfg).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn ks_limit_values() {
        assert_eq!(ks_rejection_limit(100), 5);
    }
}
