//! Command-line front end: `sample`, `simulate`, `channel` and `estimate`.
//!
//! Exit codes: 0 success, 1 argument error, 2 I/O error, 3 corrupt input,
//! 4 task/data mismatch.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::estimators::{self, EstimateWithError};
use crate::format::{self, ResultRow};
use crate::sampling::{self, RngSeed};
use crate::shadows::{self, CalibrationVector};
use crate::shallow;
use crate::sim::{self, Mps, NoiseModel, QuantumState, StateVector};
use crate::stats;
use crate::types::{MeasurementGroup, MeasurementSetting, PauliObservable, Subsystem};
use crate::Error;

/// Environment variable holding the default worker-thread count.
pub const THREADS_ENV: &str = "RANDMEAS_THREADS";

#[derive(Debug, Parser)]
#[command(name = "randmeas", version, about = "Randomized measurements: sample settings, simulate data, estimate properties")]
pub struct Cli {
    /// Worker threads (default: $RANDMEAS_THREADS, else all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Ensemble {
    /// Haar-random single-qubit rotations.
    Haar,
    /// Uniformly random Pauli bases.
    Pauli,
    /// No rotation.
    Computational,
    /// Brickwork circuits of Haar two-qubit gates.
    Shallow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Task {
    Expect,
    Moments,
    Purity,
    Overlap,
    Fidelity,
    Xeb,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw measurement settings and write a settings file.
    Sample {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        nu: usize,
        #[arg(long, value_enum, default_value = "haar")]
        ensemble: Ensemble,
        /// Circuit depth for the shallow ensemble.
        #[arg(long, default_value_t = 1)]
        depth: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate measurements of a state for every setting of a settings file.
    Simulate {
        /// ghz[:N], zero[:N], haar[:N] or random-mps:CHI.
        #[arg(long)]
        state: String,
        /// Seed for random states.
        #[arg(long, default_value_t = 0)]
        state_seed: u64,
        #[arg(long)]
        settings: PathBuf,
        /// Shots per setting.
        #[arg(long)]
        nm: usize,
        /// Depolarizing strengths drawn per qubit from a normal MEAN:SD.
        #[arg(long)]
        noise: Option<String>,
        #[arg(long, default_value_t = 0)]
        noise_seed: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the measurement channel of a brickwork ensemble.
    Channel {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        depth: usize,
        #[arg(long, default_value_t = 2000)]
        circuits: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Post-process a measurement group.
    Estimate {
        #[arg(long)]
        group: PathBuf,
        /// Second group for overlap and fidelity.
        #[arg(long)]
        group2: Option<PathBuf>,
        #[arg(long, value_enum)]
        task: Task,
        /// Pauli strings, comma separated.
        #[arg(long)]
        pauli: Option<String>,
        /// Subsystem, e.g. `1,2,4` or `1-3`.
        #[arg(long)]
        sites: Option<String>,
        /// Moment orders, e.g. `2:5` or `2,3`.
        #[arg(long, default_value = "2")]
        k: String,
        #[arg(long)]
        batches: Option<usize>,
        /// Group measured on |0…0⟩ with the same device, for robust shadows.
        #[arg(long)]
        calibration: Option<PathBuf>,
        /// Channel file for shallow-circuit data.
        #[arg(long)]
        channel: Option<PathBuf>,
        /// Report standard errors.
        #[arg(long)]
        sem: bool,
        /// Report the jackknife covariance of moments.
        #[arg(long)]
        cov: bool,
        /// Ideal state for xeb, same syntax as `simulate --state`.
        #[arg(long)]
        ideal: Option<String>,
        #[arg(long, default_value_t = 0)]
        ideal_seed: u64,
        /// Machine-readable result file (manifest path).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure of one CLI invocation.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Lib(Error::Io { .. }) => 2,
            CliError::Lib(Error::Corrupt { .. }) => 3,
            CliError::Lib(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parses and runs one invocation, writing the table to `out` and
/// diagnostics to `err`. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let sink: &mut dyn Write = if code == 0 { out } else { err };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    let threads = cli
        .threads
        .or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok()));
    if let Some(t) = threads {
        // fails harmlessly when a pool already exists in this process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(command: Command, out: &mut dyn Write) -> CliResult<()> {
    match command {
        Command::Sample { n, nu, ensemble, depth, seed, out: path } => {
            let settings = sample(n, nu, ensemble, depth, seed)?;
            format::write_settings(&path, &settings)?;
            let _ = writeln!(out, "wrote {nu} settings on {n} qubits to {}", path.display());
            Ok(())
        }
        Command::Simulate { state, state_seed, settings, nm, noise, noise_seed, seed, out: path } => {
            let settings = format::read_settings(&settings)?;
            let n = settings[0].n_qubits();
            let state = parse_state(&state, n, state_seed)?;
            let noise = noise
                .map(|text| parse_noise(&text, n, noise_seed))
                .transpose()?;
            let group = simulate(&state, &settings, nm, noise.as_ref(), seed)?;
            format::write_group(&path, &group)?;
            let _ = writeln!(
                out,
                "wrote {} settings × {nm} shots on {n} qubits to {}",
                settings.len(),
                path.display()
            );
            Ok(())
        }
        Command::Channel { n, depth, circuits, seed, out: path } => {
            let ch = shallow::estimate_channel(n, depth, circuits, seed)?;
            let inv = shallow::invert_channel(&ch, shallow::DEFAULT_RCOND)?;
            format::write_channel(&path, &ch)?;
            let _ = writeln!(
                out,
                "wrote channel (N={n}, depth={depth}, {circuits} circuits, rank {}, condition number {:.3e}) to {}",
                inv.rank(),
                inv.condition_number(),
                path.display()
            );
            Ok(())
        }
        Command::Estimate {
            group,
            group2,
            task,
            pauli,
            sites,
            k,
            batches,
            calibration,
            channel,
            sem,
            cov,
            ideal,
            ideal_seed,
            out: result_path,
        } => {
            let g = format::read_group(&group)?;
            let ctx = EstimateArgs {
                group2,
                pauli,
                sites,
                k,
                batches,
                calibration,
                channel,
                sem,
                cov,
                ideal,
                ideal_seed,
            };
            let rows = estimate(&g, task, &ctx)?;
            write_table(out, &rows, sem);
            if let Some(p) = result_path {
                format::write_results(&p, g.n_qubits(), &rows)?;
            }
            Ok(())
        }
    }
}

fn sample(n: usize, nu: usize, ensemble: Ensemble, depth: usize, seed: u64) -> CliResult<Vec<MeasurementSetting>> {
    if n == 0 || nu == 0 {
        return Err(usage("--n and --nu must be positive"));
    }
    let settings = match ensemble {
        Ensemble::Haar => sampling::sample_settings(nu, seed, |rng| sampling::local_unitary_setting(n, rng)),
        Ensemble::Pauli => sampling::sample_settings(nu, seed, |rng| sampling::pauli_basis_setting(n, rng)),
        Ensemble::Computational => sampling::sample_settings(nu, seed, |_| sampling::computational_setting(n)),
        Ensemble::Shallow => {
            if depth > 0 && n < 2 {
                return Err(usage("shallow circuits of nonzero depth need --n ≥ 2"));
            }
            sampling::sample_settings(nu, seed, |rng| sampling::shallow_setting(n, depth, rng))
        }
    };
    Ok(settings?)
}

/// A state parsed from the command line.
pub enum StateSpec {
    Mps(Mps),
    Dense(StateVector),
}

impl StateSpec {
    fn as_state(&self) -> &(dyn QuantumState + Sync) {
        match self {
            StateSpec::Mps(m) => m,
            StateSpec::Dense(v) => v,
        }
    }
}

/// Parses `ghz[:N]`, `zero[:N]`, `haar[:N]` or `random-mps:CHI` for an
/// `n`-qubit register.
pub fn parse_state(text: &str, n: usize, seed: u64) -> CliResult<StateSpec> {
    let (name, arg) = match text.split_once(':') {
        Some((a, b)) => (a, Some(b)),
        None => (text, None),
    };
    let num = |s: &str| -> CliResult<usize> {
        s.parse().map_err(|_| usage(format!("`{s}` in state `{text}` is not a number")))
    };
    let check_n = |arg: Option<&str>| -> CliResult<()> {
        if let Some(a) = arg {
            let given = num(a)?;
            if given != n {
                return Err(CliError::Lib(Error::SizeMismatch(format!(
                    "state `{text}` has {given} qubits, settings have {n}"
                ))));
            }
        }
        Ok(())
    };
    let mut rng = RngSeed::new(seed, 0).rng();
    Ok(match name {
        "ghz" => {
            check_n(arg)?;
            StateSpec::Mps(Mps::ghz(n)?)
        }
        "zero" => {
            check_n(arg)?;
            StateSpec::Mps(Mps::product_zero(n)?)
        }
        "haar" => {
            check_n(arg)?;
            StateSpec::Dense(StateVector::random(n, &mut rng)?)
        }
        "random-mps" => {
            let chi = num(arg.ok_or_else(|| usage("random-mps needs a bond dimension, e.g. random-mps:2"))?)?;
            StateSpec::Mps(Mps::random(n, chi, &mut rng)?)
        }
        _ => return Err(usage(format!("unknown state `{text}`"))),
    })
}

/// Parses `MEAN:SD` and draws per-qubit strengths from stream `(seed, 0)`.
pub fn parse_noise(text: &str, n: usize, seed: u64) -> CliResult<NoiseModel> {
    let (m, s) = text
        .split_once(':')
        .ok_or_else(|| usage(format!("noise `{text}` is not MEAN:SD")))?;
    let parse = |x: &str| -> CliResult<f64> { x.parse().map_err(|_| usage(format!("noise `{text}` is not MEAN:SD"))) };
    let (mean, sd) = (parse(m)?, parse(s)?);
    if !(0.0..=1.0).contains(&mean) || sd < 0.0 {
        return Err(usage(format!("noise `{text}` needs 0 ≤ MEAN ≤ 1 and SD ≥ 0")));
    }
    Ok(NoiseModel::random_normal(n, mean, sd, &mut RngSeed::new(seed, 0).rng())?)
}

fn simulate(
    state: &StateSpec,
    settings: &[MeasurementSetting],
    nm: usize,
    noise: Option<&NoiseModel>,
    seed: u64,
) -> CliResult<MeasurementGroup> {
    // MPS sampling handles product-form settings; circuits need a dense vector
    let needs_dense = settings.iter().any(|s| !s.is_local());
    match state {
        StateSpec::Mps(m) if needs_dense => {
            let v = StateVector::new(m.to_dense()?)?;
            Ok(sim::simulate_group(&v, settings, nm, noise, seed)?)
        }
        _ => Ok(sim::simulate_group(state.as_state(), settings, nm, noise, seed)?),
    }
}

struct EstimateArgs {
    group2: Option<PathBuf>,
    pauli: Option<String>,
    sites: Option<String>,
    k: String,
    batches: Option<usize>,
    calibration: Option<PathBuf>,
    channel: Option<PathBuf>,
    sem: bool,
    cov: bool,
    ideal: Option<String>,
    ideal_seed: u64,
}

/// Parses `1,2,4`, `1-3` or mixtures such as `1-2,5`.
pub fn parse_sites(text: &str) -> CliResult<Subsystem> {
    let mut sites = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let num = |s: &str| -> CliResult<usize> { s.trim().parse().map_err(|_| usage(format!("bad site list `{text}`"))) };
        match part.split_once('-') {
            Some((a, b)) => sites.extend(num(a)?..=num(b)?),
            None => sites.push(num(part)?),
        }
    }
    Subsystem::new(sites).map_err(|e| usage(e.to_string()))
}

/// Parses `2:5` (inclusive) or `2,3,4`.
pub fn parse_orders(text: &str) -> CliResult<Vec<usize>> {
    let num = |s: &str| -> CliResult<usize> { s.trim().parse().map_err(|_| usage(format!("bad moment orders `{text}`"))) };
    let ks: Vec<usize> = match text.split_once(':') {
        Some((a, b)) => (num(a)?..=num(b)?).collect(),
        None => text.split(',').map(num).collect::<CliResult<_>>()?,
    };
    if ks.is_empty() || ks.iter().any(|&k| k < 2) {
        return Err(usage(format!("moment orders `{text}` must be at least 2")));
    }
    Ok(ks)
}

fn row(quantity: String, est: EstimateWithError, group: &MeasurementGroup, n_b: usize) -> ResultRow {
    ResultRow {
        quantity,
        value: est.value,
        sigma: est.sem,
        n_u: group.n_settings(),
        n_m: group.uniform_shots().unwrap_or(0),
        n_b,
    }
}

fn calibration(path: &PathBuf, n: usize) -> CliResult<CalibrationVector> {
    let cal_group = format::read_group(path)?;
    if cal_group.n_qubits() != n {
        return Err(CliError::Lib(Error::SizeMismatch(format!(
            "calibration data on {} qubits, measurement on {n}",
            cal_group.n_qubits()
        ))));
    }
    Ok(shadows::calibration_vector(&Mps::product_zero(n)?, &cal_group)?)
}

fn is_shallow(group: &MeasurementGroup) -> bool {
    group.settings().any(|s| matches!(s, MeasurementSetting::Shallow(_)))
}

fn inverse_channel(ctx: &EstimateArgs, group: &MeasurementGroup) -> CliResult<shallow::InverseChannel> {
    let path = ctx
        .channel
        .as_ref()
        .ok_or_else(|| CliError::Lib(Error::UnsupportedSetting("shallow-circuit data needs --channel".into())))?;
    let ch = format::read_channel(path)?;
    if ch.n_qubits() != group.n_qubits() {
        return Err(CliError::Lib(Error::EnsembleMismatch(format!(
            "channel on {} qubits, data on {}",
            ch.n_qubits(),
            group.n_qubits()
        ))));
    }
    Ok(shallow::invert_channel(&ch, shallow::DEFAULT_RCOND)?)
}

fn estimate(group: &MeasurementGroup, task: Task, ctx: &EstimateArgs) -> CliResult<Vec<ResultRow>> {
    let n = group.n_qubits();
    let sub = ctx.sites.as_deref().map(parse_sites).transpose()?;
    if let Some(s) = &sub {
        s.check_within(n)?;
    }
    let g = ctx.calibration.as_ref().map(|p| calibration(p, n)).transpose()?;
    match task {
        Task::Expect => {
            let text = ctx.pauli.as_deref().ok_or_else(|| usage("--task expect needs --pauli"))?;
            let shallow_shadows = if is_shallow(group) {
                Some(shallow::shallow_shadows(group, &inverse_channel(ctx, group)?)?)
            } else {
                None
            };
            let mut rows = Vec::new();
            for letters in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let obs = match &sub {
                    Some(s) if letters.len() == s.len() => {
                        let local = PauliObservable::from_str_letters(letters)?;
                        let pairs: Vec<_> = s.sites().iter().copied().zip(local.terms()[0].letters.iter().copied()).collect();
                        PauliObservable::on_sites(n, &pairs)?
                    }
                    _ => PauliObservable::from_str_letters(letters)?,
                };
                let (est, n_b) = match &shallow_shadows {
                    Some(sh) => (estimators::expect_shadow(&obs, sh, ctx.sem)?, sh.len()),
                    None => {
                        let est = estimators::expect_group(&obs, group, g.as_ref(), ctx.batches, ctx.sem)?;
                        (est, est.n_samples)
                    }
                };
                rows.push(row(format!("<{letters}>"), est, group, n_b));
            }
            Ok(rows)
        }
        Task::Moments => {
            let ks = parse_orders(&ctx.k)?;
            let n_b = ctx.batches.unwrap_or_else(|| group.n_settings().min(stats::MAX_BATCHES_HIGH_ORDER));
            let set = if is_shallow(group) {
                if sub.is_some() {
                    return Err(usage("--sites is not supported for shallow-circuit data"));
                }
                shallow::shallow_batch_shadows(group, &inverse_channel(ctx, group)?, Some(n_b))?
            } else {
                let s = sub.clone().unwrap_or_else(|| Subsystem::full(n));
                shadows::batch_shadows_on(group, &s, Some(n_b), g.as_ref())?
            };
            let mut rows = Vec::new();
            if ctx.sem || ctx.cov {
                let jk = stats::jackknife_moments(&set, &ks, ctx.cov)?;
                for (k, r) in ks.iter().zip(&jk.results) {
                    let est = EstimateWithError::new(r.raw_estimate, ctx.sem.then(|| r.std_error()), n_b);
                    rows.push(row(format!("p{k}"), est, group, n_b));
                }
                if let Some(c) = jk.covariance {
                    for (a, ka) in ks.iter().enumerate() {
                        for (b, kb) in ks.iter().enumerate().skip(a) {
                            let est = EstimateWithError::new(c[(a, b)], None, n_b);
                            rows.push(row(format!("cov(p{ka},p{kb})"), est, group, n_b));
                        }
                    }
                }
            } else {
                for (k, est) in ks.iter().zip(estimators::trace_moments(&set, &ks, false)?) {
                    rows.push(row(format!("p{k}"), est, group, n_b));
                }
            }
            Ok(rows)
        }
        Task::Purity => {
            let reduced = match &sub {
                Some(s) => group.reduce(s)?,
                None => group.clone(),
            };
            let est = estimators::purity_direct(&reduced, ctx.sem)?;
            Ok(vec![row("purity".into(), est, group, group.n_settings())])
        }
        Task::Overlap | Task::Fidelity => {
            let path = ctx.group2.as_ref().ok_or_else(|| usage("this task needs --group2"))?;
            let mut g2 = format::read_group(path)?;
            let mut g1 = group.clone();
            if let Some(s) = &sub {
                g1 = g1.reduce(s)?;
                g2 = g2.reduce(s)?;
            }
            let (name, est) = if task == Task::Overlap {
                ("overlap", estimators::overlap_direct(&g1, &g2, ctx.sem)?)
            } else {
                ("fidelity", estimators::cross_platform_fidelity(&g1, &g2, ctx.sem)?)
            };
            Ok(vec![row(name.into(), est, group, group.n_settings())])
        }
        Task::Xeb => {
            let text = ctx.ideal.as_deref().ok_or_else(|| usage("--task xeb needs --ideal"))?;
            let ideal = parse_state(text, n, ctx.ideal_seed)?;
            let state = ideal.as_state();
            let x = estimators::xeb_group(state, group)?;
            let sx = estimators::self_xeb(state)?;
            let n_u = group.n_settings();
            let plain = |v: f64| EstimateWithError::new(v, None, n_u);
            Ok(vec![
                row("xeb".into(), plain(x), group, n_u),
                row("self_xeb".into(), plain(sx), group, n_u),
                row("xeb_corrected".into(), plain(x / sx), group, n_u),
            ])
        }
    }
}

fn fmt_num(x: f64) -> String {
    if x == 0.0 || (1e-3..1e5).contains(&x.abs()) {
        format!("{x:.6}")
    } else {
        format!("{x:.4e}")
    }
}

/// Aligned table with columns quantity, value, 2σ, σ, N_U, N_M, N_B.
pub fn write_table(out: &mut dyn Write, rows: &[ResultRow], with_errors: bool) {
    let header = ["quantity", "value", "2σ", "σ", "N_U", "N_M", "N_B"];
    let cells: Vec<[String; 7]> = rows
        .iter()
        .map(|r| {
            let (two, one) = match r.sigma {
                Some(s) if with_errors => (fmt_num(2.0 * s), fmt_num(s)),
                _ => ("-".into(), "-".into()),
            };
            [r.quantity.clone(), fmt_num(r.value), two, one, r.n_u.to_string(), r.n_m.to_string(), r.n_b.to_string()]
        })
        .collect();
    let mut widths = header.map(|h| h.chars().count());
    for c in &cells {
        for (w, s) in widths.iter_mut().zip(c) {
            *w = (*w).max(s.chars().count());
        }
    }
    let line = |fields: Vec<&str>| -> String {
        fields
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (f, &w))| {
                let pad = w - f.chars().count();
                if i == 0 { format!("{f}{}", " ".repeat(pad)) } else { format!("{}{f}", " ".repeat(pad)) }
            })
            .collect::<Vec<_>>()
            .join("  ")
    };
    let _ = writeln!(out, "{}", line(header.to_vec()));
    for c in &cells {
        let _ = writeln!(out, "{}", line(c.iter().map(String::as_str).collect()));
    }
}
