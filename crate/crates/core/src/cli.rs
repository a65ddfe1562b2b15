//! Command-line front end.
//!
//! Every command writes rows with the fixed schema of [`CSV_HEADER`] (or the
//! same fields as JSON) to `--output`, or to stdout when no path is given.
//! A `--config` file holds a flat JSON object whose keys are flag names;
//! its entries are applied first, so flags on the command line win.
//!
//! Exit codes: 0 success, 2 invalid configuration, 3 IO failure, 4 oracle
//! mismatch. Finding no violation is not an error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bell::{mk_expansion, Correlator, FockCorrelator, MeasurementSettings, PhaseSpaceModel, SignChoice};
use crate::error::Error;
use crate::fock_oracle::{build_state, pi_operator, FockCutoff, FockState};
use crate::noise::{DetectionEfficiency, NoiseModel, ThermalChannel};
use crate::optimize::{
    crossing_amplitude_in, damping_curve, maximize_model, random_settings, scan_s, threshold_efficiency,
    Inequality, OptimizerConfig, Threshold, ZETA_TOLERANCE,
};
use crate::states::{Mode, SParameter, StateModel, StateSpec};

pub const CSV_HEADER: [&str; 21] = [
    "state", "param", "s", "eta", "gamma_tau", "nbar", "sign", "mk", "svet", "alpha_re", "alpha_im", "alphap_re",
    "alphap_im", "beta_re", "beta_im", "betap_re", "betap_im", "gamma_re", "gamma_im", "gammap_re", "gammap_im",
];

/// Environment variable giving the default number of worker threads.
pub const THREADS_ENV: &str = "PHASEBELL_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("oracle mismatch: {0}")]
    OracleMismatch(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::OracleMismatch(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "phasebell", version, about = "Phase-space Bell tests for three-mode states")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimized MK and Svetlichny parameters along a grid of s.
    ScanS(ScanArgs),
    /// Optimize one parameter at a single s.
    Optimize(OptimizeArgs),
    /// Smallest detection efficiency that still violates the bound.
    EffThreshold(ThresholdArgs),
    /// Optimized Svetlichny parameter along a grid of damping times.
    DampingCurve(DampingArgs),
    /// ECS amplitude where the s = -1 and s = 0 Svetlichny optima cross.
    Crossing(CrossingArgs),
    /// Compare closed forms with truncated Fock-space traces.
    OracleCheck(OracleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StateKind {
    W,
    Sqz,
    Ecs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct StateArgs {
    #[arg(long, value_enum)]
    pub state: StateKind,
    /// W-state weight of the first mode.
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    /// Squeezing parameter.
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    /// ECS amplitude.
    #[arg(long, default_value_t = 1.0)]
    pub zeta: f64,
}

impl StateArgs {
    pub fn spec(&self) -> Result<StateSpec, CliError> {
        let spec = match self.state {
            StateKind::W => StateSpec::SinglePhotonW { p: self.p },
            StateKind::Sqz => StateSpec::SqueezedVacuum3 { r: self.r },
            StateKind::Ecs => StateSpec::GhzEcs { zeta: self.zeta },
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Args)]
pub struct NoiseArgs {
    /// Symmetric detection efficiency.
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    /// Damping time Γτ.
    #[arg(long = "gamma-tau", default_value_t = 0.0)]
    pub gamma_tau: f64,
    /// Mean thermal photon number of the bath.
    #[arg(long, default_value_t = 0.0)]
    pub nbar: f64,
}

impl NoiseArgs {
    pub fn model(&self) -> Result<NoiseModel, CliError> {
        let mut m = NoiseModel::ideal();
        if self.eta != 1.0 {
            m.efficiency = Some(DetectionEfficiency::symmetric(self.eta)?);
        }
        let ch = ThermalChannel::new(self.gamma_tau, self.nbar)?;
        if !ch.is_identity() {
            m.damping = Some(ch);
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Args)]
pub struct OptArgs {
    /// Number of random restarts.
    #[arg(long, default_value_t = 32)]
    pub restarts: usize,
    #[arg(long = "max-iter", default_value_t = 4000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Standard deviation of initial amplitudes (per-state default if absent).
    #[arg(long)]
    pub scale: Option<f64>,
}

impl OptArgs {
    pub fn config(&self) -> Result<OptimizerConfig, CliError> {
        let c = OptimizerConfig {
            multistart_count: self.restarts,
            max_iterations: self.max_iter,
            tolerance: self.tol,
            rng_seed: self.seed,
            search_scale: self.scale,
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Flat JSON object of flag values, overridden by explicit flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub state: StateArgs,
    #[arg(long = "s-min", default_value_t = -2.0, allow_negative_numbers = true)]
    pub s_min: f64,
    #[arg(long = "s-max", default_value_t = 0.0, allow_negative_numbers = true)]
    pub s_max: f64,
    #[arg(long, default_value_t = 0.02)]
    pub step: f64,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[command(flatten)]
    pub opt: OptArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub state: StateArgs,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub s: f64,
    /// 2 optimizes |M|, 4 optimizes |S|.
    #[arg(long, default_value_t = 4.0)]
    pub bound: f64,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[command(flatten)]
    pub opt: OptArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ThresholdArgs {
    #[command(flatten)]
    pub state: StateArgs,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub s: f64,
    #[arg(long, default_value_t = 4.0)]
    pub bound: f64,
    #[command(flatten)]
    pub opt: OptArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DampingArgs {
    #[command(flatten)]
    pub state: StateArgs,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub s: f64,
    #[arg(long = "gt-max", default_value_t = 1.0)]
    pub gt_max: f64,
    #[arg(long = "gt-step", default_value_t = 0.05)]
    pub gt_step: f64,
    #[arg(long, default_value_t = 0.0)]
    pub nbar: f64,
    #[command(flatten)]
    pub opt: OptArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CrossingArgs {
    #[arg(long = "zeta-lo", default_value_t = 0.2)]
    pub zeta_lo: f64,
    #[arg(long = "zeta-hi", default_value_t = 1.0)]
    pub zeta_hi: f64,
    #[command(flatten)]
    pub opt: OptArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub state: StateArgs,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Residual tolerance (1e-8, or 1e-6 for the squeezed state, if absent).
    #[arg(long)]
    pub tol: Option<f64>,
    #[command(flatten)]
    pub out: OutArgs,
}

/// One output record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Row {
    pub state: &'static str,
    pub param: f64,
    pub s: f64,
    pub eta: f64,
    pub gamma_tau: f64,
    pub nbar: f64,
    pub sign: SignChoice,
    pub mk: f64,
    pub svet: f64,
    pub settings: MeasurementSettings,
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.11e}")
}

/// Writes `rows` as CSV with the fixed header; floats carry 12 significant
/// digits.
pub fn emit_csv<W: Write>(rows: &[Row], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in rows {
        let mut rec: Vec<String> = vec![r.state.to_string()];
        rec.extend([r.param, r.s, r.eta, r.gamma_tau, r.nbar].map(fmt_f64));
        rec.push(r.sign.symbol().to_string());
        rec.push(fmt_f64(r.mk));
        rec.push(fmt_f64(r.svet));
        rec.extend(r.settings.to_reals().map(fmt_f64));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a CSV produced by [`emit_csv`].
pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<Row>, CliError> {
    let mut rd = csv::Reader::from_reader(input);
    let bad = |m: String| CliError::Config(m);
    let header = rd.headers().map_err(|e| CliError::Io(e.to_string()))?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(bad("unexpected CSV header".into()));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| CliError::Io(e.to_string()))?;
        let num = |i: usize| -> Result<f64, CliError> {
            rec[i].parse::<f64>().map_err(|e| bad(format!("column {}: {e}", CSV_HEADER[i])))
        };
        let state = match &rec[0] {
            "w" => "w",
            "sqz" => "sqz",
            "ecs" => "ecs",
            other => return Err(bad(format!("unknown state tag {other}"))),
        };
        let sign = match &rec[6] {
            "+" => SignChoice::Plus,
            "-" => SignChoice::Minus,
            other => return Err(bad(format!("unknown sign {other}"))),
        };
        let mut x = [0.0; 12];
        for (k, v) in x.iter_mut().enumerate() {
            *v = num(9 + k)?;
        }
        rows.push(Row {
            state,
            param: num(1)?,
            s: num(2)?,
            eta: num(3)?,
            gamma_tau: num(4)?,
            nbar: num(5)?,
            sign,
            mk: num(7)?,
            svet: num(8)?,
            settings: MeasurementSettings::from_reals(&x),
        });
    }
    Ok(rows)
}

fn emit(rows: &[Row], out: &OutArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut buf: Vec<u8> = Vec::new();
    match out.format {
        Format::Csv => emit_csv(rows, &mut buf)?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut buf, rows).map_err(|e| CliError::Io(e.to_string()))?;
            buf.push(b'\n');
        }
    }
    match &out.output {
        Some(path) => fs::write(path, buf).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => Ok(stdout.write_all(&buf)?),
    }
}

/// `lo, lo + step, ..., hi` with the endpoint included when it lies on the
/// grid up to rounding.
pub fn grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>, CliError> {
    if !(step > 0.0 && step.is_finite() && lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(CliError::Config(format!("bad grid: {lo}..{hi} step {step}")));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| if i == n && ((lo + n as f64 * step) - hi).abs() < 1e-9 { hi } else { lo + i as f64 * step }).collect())
}

fn row_for(
    spec: &StateSpec,
    s: f64,
    noise: &NoiseModel,
    settings: MeasurementSettings,
    sign: SignChoice,
) -> Result<Row, CliError> {
    let model = PhaseSpaceModel::new(*spec, SParameter::new(s)?, *noise)?;
    let r = model.evaluate(&settings, Some(sign));
    let (gamma_tau, nbar) = noise.damping.map(|c| (c.gamma_tau(), c.nbar())).unwrap_or((0.0, 0.0));
    Ok(Row {
        state: spec.tag(),
        param: spec.parameter(),
        s,
        eta: noise.efficiency.map(|e| e.eta(Mode::A)).unwrap_or(1.0),
        gamma_tau,
        nbar,
        sign: r.sign,
        mk: r.mk,
        svet: r.svetlichny,
        settings,
    })
}

/// Splices the entries of `--config FILE` in front of the other flags of
/// the subcommand, so explicit flags override them.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let pos = args.iter().position(|a| a == "--config");
    let Some(pos) = pos else {
        return Ok(args);
    };
    let path = args
        .get(pos + 1)
        .ok_or_else(|| CliError::Config("--config needs a path".into()))?
        .clone();
    let text = fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.to_string_lossy())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("config file: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| CliError::Config("config file must hold a JSON object".into()))?;
    let mut injected: Vec<OsString> = Vec::new();
    for (k, v) in obj {
        let flag = format!("--{}", k.replace('_', "-"));
        match v {
            serde_json::Value::Bool(true) => injected.push(flag.into()),
            serde_json::Value::Bool(false) | serde_json::Value::Null => {}
            serde_json::Value::Number(n) => injected.push(format!("{flag}={n}").into()),
            serde_json::Value::String(s) => injected.push(format!("{flag}={s}").into()),
            _ => return Err(CliError::Config(format!("config key {k}: nested values are not supported"))),
        }
    }
    let mut rest: Vec<OsString> = args[..pos].to_vec();
    rest.extend_from_slice(&args[pos + 2..]);
    // program name, subcommand, then config entries, then explicit flags
    let split = rest.len().min(2);
    let mut out: Vec<OsString> = rest[..split].to_vec();
    out.extend(injected);
    out.extend_from_slice(&rest[split..]);
    Ok(out)
}

/// Parses `args` (including the program name) and runs the command,
/// writing to `stdout` when no output path is set.
pub fn run(args: Vec<OsString>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let args = expand_config(args)?;
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            write!(stdout, "{e}")?;
            return Ok(());
        }
        Err(e) => return Err(CliError::Config(e.to_string())),
    };
    match cli.command {
        Command::ScanS(a) => run_scan(&a, stdout),
        Command::Optimize(a) => run_optimize(&a, stdout),
        Command::EffThreshold(a) => run_threshold(&a, stdout),
        Command::DampingCurve(a) => run_damping(&a, stdout),
        Command::Crossing(a) => run_crossing(&a, stdout),
        Command::OracleCheck(a) => run_oracle(&a, stdout),
    }
}

fn run_scan(a: &ScanArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let spec = a.state.spec()?;
    let noise = a.noise.model()?;
    let cfg = a.opt.config()?;
    let s_grid = grid(a.s_min, a.s_max, a.step)?;
    if s_grid.iter().any(|&s| s > 0.0) {
        return Err(CliError::Config("s grid must stay at or below 0".into()));
    }
    let points = scan_s(spec, &s_grid, noise, &cfg)?;
    let mut rows = Vec::with_capacity(points.len());
    for p in &points {
        let mut row = row_for(&spec, p.s, &noise, p.svetlichny.settings, p.svetlichny.sign)?;
        row.mk = p.mk.value;
        rows.push(row);
    }
    emit(&rows, &a.out, stdout)
}

fn run_optimize(a: &OptimizeArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let spec = a.state.spec()?;
    let noise = a.noise.model()?;
    let cfg = a.opt.config()?;
    let inequality = Inequality::from_bound(a.bound)?;
    let model = PhaseSpaceModel::new(spec, SParameter::new(a.s)?, noise)?;
    let opt = maximize_model(&model, &spec, inequality, &cfg, &[])?;
    let sign = match inequality {
        Inequality::Mk => model.evaluate(&opt.settings, None).sign,
        Inequality::Svetlichny => opt.sign,
    };
    emit(&[row_for(&spec, a.s, &noise, opt.settings, sign)?], &a.out, stdout)
}

fn run_threshold(a: &ThresholdArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let spec = a.state.spec()?;
    let cfg = a.opt.config()?;
    let inequality = Inequality::from_bound(a.bound)?;
    match threshold_efficiency(spec, a.s, a.bound, &cfg)? {
        Threshold::NoViolationAtUnitEfficiency => {
            if a.out.output.is_some() {
                writeln!(stdout, "no violation at eta = 1")?;
            }
            emit(&[], &a.out, stdout)
        }
        Threshold::Eta(eta) => {
            let noise = NoiseModel::detection(DetectionEfficiency::symmetric(eta)?);
            let model = PhaseSpaceModel::new(spec, SParameter::new(a.s)?, noise)?;
            let opt = maximize_model(&model, &spec, inequality, &cfg, &[])?;
            let row = row_for(&spec, a.s, &noise, opt.settings, model.evaluate(&opt.settings, None).sign)?;
            if a.out.output.is_some() {
                writeln!(stdout, "eta* = {eta:.4} (+/- 0.002)")?;
            }
            emit(&[row], &a.out, stdout)
        }
    }
}

fn run_damping(a: &DampingArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let spec = a.state.spec()?;
    let cfg = a.opt.config()?;
    let channels = grid(0.0, a.gt_max, a.gt_step)?
        .into_iter()
        .map(|gt| ThermalChannel::new(gt, a.nbar))
        .collect::<Result<Vec<_>, _>>()?;
    let curve = damping_curve(spec, a.s, &channels, &cfg)?;
    let rows = curve
        .iter()
        .map(|p| {
            let mut noise = NoiseModel::ideal();
            noise.damping = Some(p.channel);
            let mut row = row_for(&spec, a.s, &noise, p.svetlichny.settings, p.svetlichny.sign)?;
            row.gamma_tau = p.channel.gamma_tau();
            row.nbar = p.channel.nbar();
            Ok(row)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    emit(&rows, &a.out, stdout)
}

#[derive(Debug, Serialize)]
struct CrossingReport {
    zeta_star: f64,
    tolerance: f64,
}

fn run_crossing(a: &CrossingArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = a.opt.config()?;
    let zeta = crossing_amplitude_in(a.zeta_lo, a.zeta_hi, &cfg)?;
    let report = CrossingReport {
        zeta_star: zeta,
        tolerance: ZETA_TOLERANCE,
    };
    let text = match a.out.format {
        Format::Csv => format!("zeta_star,tolerance\n{},{}\n", fmt_f64(zeta), fmt_f64(ZETA_TOLERANCE)),
        Format::Json => serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))? + "\n",
    };
    match &a.out.output {
        Some(p) => {
            writeln!(stdout, "zeta* = {zeta:.4} (+/- {ZETA_TOLERANCE})")?;
            fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
        }
        None => Ok(stdout.write_all(text.as_bytes())?),
    }
}

/// Largest residuals between closed forms and Fock-space traces.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct OracleReport {
    pub samples: usize,
    pub w3: f64,
    pub w2: f64,
    pub w1: f64,
    pub mk: f64,
}

impl OracleReport {
    pub fn worst(&self) -> f64 {
        self.w3.max(self.w2).max(self.w1).max(self.mk)
    }
}

fn fock_w(state: &FockState, points: &[Option<Complex64>], s: SParameter, cutoff: FockCutoff) -> Result<f64, Error> {
    let ops = points
        .iter()
        .map(|p| p.map(|x| pi_operator(x, s, cutoff)).transpose())
        .collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<_> = ops.iter().map(|o| o.as_ref()).collect();
    let pi = state.expectation(&refs)?.re;
    let k = points.iter().filter(|p| p.is_some()).count() as i32;
    Ok(pi * (2.0 / (std::f64::consts::PI * (1.0 - s.value()))).powi(k))
}

/// Compares `w3`, the three pair marginals, the single-mode marginals and
/// the MK expansion with Fock-space traces at `samples` random inputs.
pub fn oracle_check(spec: StateSpec, samples: usize, seed: u64) -> Result<OracleReport, Error> {
    let cutoff = FockCutoff::for_state(&spec);
    let rho = build_state(&spec, cutoff)?;
    let model = StateModel::new(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = OracleReport {
        samples,
        ..OracleReport::default()
    };
    let pairs = [(Mode::A, Mode::B), (Mode::B, Mode::C), (Mode::A, Mode::C)];
    for i in 0..samples {
        let s = SParameter::new(-2.0 * rng.random::<f64>())?;
        let mut pt = || Complex64::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
        let p = [pt(), pt(), pt()];
        let sv = [s.value(); 3];
        let w3 = model.marginal(&Mode::ALL, &sv)?.eval(&p);
        rep.w3 = rep.w3.max((w3 - fock_w(&rho, &[Some(p[0]), Some(p[1]), Some(p[2])], s, cutoff)?).abs());
        let (m1, m2) = pairs[i % 3];
        let w2 = model.marginal(&[m1, m2], &sv[..2])?.eval(&[p[m1.index()], p[m2.index()]]);
        let mut slots = [None; 3];
        slots[m1.index()] = Some(p[m1.index()]);
        slots[m2.index()] = Some(p[m2.index()]);
        rep.w2 = rep.w2.max((w2 - fock_w(&rho, &slots, s, cutoff)?).abs());
        let m = Mode::ALL[i % 3];
        let w1 = model.marginal(&[m], &sv[..1])?.eval(&[p[m.index()]]);
        let mut slots = [None; 3];
        slots[m.index()] = Some(p[m.index()]);
        rep.w1 = rep.w1.max((w1 - fock_w(&rho, &slots, s, cutoff)?).abs());
        let st = random_settings(&mut rng, 0.8);
        let closed = mk_expansion(&PhaseSpaceModel::ideal(spec, s)?, &st);
        let fock = FockCorrelator::new(rho.clone(), s)?.mk(&st);
        rep.mk = rep.mk.max((closed - fock).abs());
    }
    Ok(rep)
}

fn run_oracle(a: &OracleArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let spec = a.state.spec()?;
    let tol = a.tol.unwrap_or(match spec {
        StateSpec::SqueezedVacuum3 { .. } => 1e-6,
        _ => 1e-8,
    });
    let rep = oracle_check(spec, a.samples, a.seed)?;
    let text = match a.out.format {
        Format::Csv => format!(
            "samples,w3,w2,w1,mk\n{},{},{},{},{}\n",
            rep.samples,
            fmt_f64(rep.w3),
            fmt_f64(rep.w2),
            fmt_f64(rep.w1),
            fmt_f64(rep.mk)
        ),
        Format::Json => serde_json::to_string_pretty(&rep).map_err(|e| CliError::Io(e.to_string()))? + "\n",
    };
    match &a.out.output {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?,
        None => stdout.write_all(text.as_bytes())?,
    }
    if rep.worst() > tol {
        return Err(CliError::OracleMismatch(format!(
            "largest residual {:.3e} exceeds {tol:.1e}",
            rep.worst()
        )));
    }
    Ok(())
}

/// Sizes the global thread pool from [`THREADS_ENV`] when it is set.
pub fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {v}")))?;
        if n == 0 {
            return Err(CliError::Config(format!("{THREADS_ENV} must be positive")));
        }
        // a pool installed earlier in the process keeps its size
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_includes_endpoint() {
        let g = grid(-2.0, 0.0, 0.02).unwrap();
        assert_eq!(g.len(), 101);
        assert_eq!(g[0], -2.0);
        assert_eq!(g[100], 0.0);
        assert!(grid(0.0, -1.0, 0.1).is_err());
    }

    #[test]
    fn config_entries_precede_flags() {
        let dir = std::env::temp_dir().join(format!("phasebell-cfg-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("c.json");
        fs::write(&path, r#"{"state": "ecs", "zeta": 0.5, "s": -1}"#).unwrap();
        let args: Vec<OsString> = ["phasebell", "optimize", "--config", path.to_str().unwrap(), "--zeta", "0.7"]
            .iter()
            .map(OsString::from)
            .collect();
        let expanded = expand_config(args).unwrap();
        let cli = Cli::try_parse_from(expanded).unwrap();
        match cli.command {
            Command::Optimize(a) => {
                assert_eq!(a.state.zeta, 0.7);
                assert_eq!(a.s, -1.0);
                assert_eq!(a.state.state, StateKind::Ecs);
            }
            _ => panic!("wrong command"),
        }
        fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config(String::new()).exit_code(), 2);
        assert_eq!(CliError::Io(String::new()).exit_code(), 3);
        assert_eq!(CliError::OracleMismatch(String::new()).exit_code(), 4);
    }
}
