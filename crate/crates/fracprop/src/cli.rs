//! `fracprop` command line. Exit codes: 0 success, 2 bad input or
//! configuration, 3 numerical or simulation failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use fracprop_core::circuit::{validate, Circuit};
use fracprop_core::dynamics::{simulate, DriveSet, SimConfig};
use fracprop_core::eqprop::{agreement, train, SIGN_CONVENTION};
use fracprop_core::error::{EqpropError, SimError};
use fracprop_core::frac_ops::Signal;
use fracprop_core::lagrangian::{el_residual, lagrangian_along};
use fracprop_core::topology::Topology;

use crate::bench::{self, Operator};
use crate::config::{parse_drive, parse_train_config, SimSettings};
use crate::netlist::{format_number, parse_netlist, serialize_netlist};
use crate::output::{self, OutputSet, RunManifest, SweepRow};
use crate::parallel;

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "fracprop", version, about = "Fractional-memristor circuit simulation and two-phase gradient estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a netlist and write its trajectory.
    Simulate(SimulateArgs),
    /// Compare the two-phase gradient estimate with finite differences.
    Gradcheck(GradcheckArgs),
    /// Train the trainable synapses of a netlist.
    Train(TrainArgs),
    /// Apply a fractional operator to a `t,value` CSV.
    FracBench(BenchArgs),
}

#[derive(Debug, Args)]
struct GridArgs {
    /// Time step, seconds.
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 0.0)]
    t_start: f64,
    #[arg(long, default_value_t = 1.0)]
    t_end: f64,
    /// Newton tolerance on the cut-set current imbalance, amperes.
    #[arg(long, default_value_t = SimConfig::DEFAULT_TOL)]
    newton_tol: f64,
    #[arg(long, default_value_t = SimConfig::DEFAULT_MAX_ITERS)]
    max_iters: usize,
    /// Truncate fractional history to this many samples.
    #[arg(long)]
    window: Option<usize>,
}

impl GridArgs {
    fn settings(&self) -> SimSettings {
        SimSettings {
            t_start: self.t_start,
            t_end: self.t_end,
            dt: self.dt,
            newton_tol: self.newton_tol,
            newton_max_iters: self.max_iters,
            window: self.window,
        }
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    netlist: PathBuf,
    /// `name=waveform` overrides for sources and targets.
    #[arg(long)]
    drive: Option<PathBuf>,
    /// Nudging strength; defaults to the netlist's `.coupling beta`.
    #[arg(long)]
    beta: Option<f64>,
    #[command(flatten)]
    grid: GridArgs,
    /// Also write Q, B and the tree/link partition.
    #[arg(long)]
    dump_topology: bool,
    /// Also write the Lagrangian breakdown and Euler-Lagrange residuals.
    #[arg(long)]
    dump_action: bool,
    #[arg(long, short, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    netlist: PathBuf,
    #[arg(long)]
    drive: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-3)]
    beta: f64,
    /// Finite-difference step in siemens.
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
    #[command(flatten)]
    grid: GridArgs,
    /// Also sweep beta and dt and report the agreement of each run.
    #[arg(long)]
    sweep: bool,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, short, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    netlist: PathBuf,
    config: PathBuf,
    #[arg(long, short, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// CSV with `t,value` columns on a uniform grid.
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Operator::Caputo)]
    op: Operator,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Run the analytic power-law matrix and print the errors.
    #[arg(long)]
    self_test: bool,
    #[arg(long, short, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Input(_) => EXIT_INPUT,
            Failure::Numeric(_) => EXIT_NUMERIC,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Numeric(m) => m,
        }
    }
}

fn sim_failure(e: SimError) -> Failure {
    match e {
        SimError::UnknownDrive(_) | SimError::WaveformRange { .. } | SimError::Config(_) | SimError::NegativeBeta(_) => {
            Failure::Input(e.to_string())
        }
        _ => Failure::Numeric(e.to_string()),
    }
}

fn eqprop_failure(e: EqpropError) -> Failure {
    let code = match &e {
        EqpropError::Simulation { source, .. } => sim_failure(source.clone()).code(),
        EqpropError::Training { source, .. } => eqprop_failure((**source).clone()).code(),
        EqpropError::Frac(_) | EqpropError::Lagrangian(_) => EXIT_NUMERIC,
        _ => EXIT_INPUT,
    };
    if code == EXIT_INPUT {
        Failure::Input(e.to_string())
    } else {
        Failure::Numeric(e.to_string())
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))
}

fn text(path: &Path, bytes: &[u8]) -> Result<String, Failure> {
    String::from_utf8(bytes.to_vec()).map_err(|_| Failure::Input(format!("{}: not valid UTF-8", path.display())))
}

fn load_netlist(path: &Path, manifest: &mut RunManifest) -> Result<Circuit, Failure> {
    let bytes = read(path)?;
    manifest.input(path, &bytes);
    parse_netlist(&text(path, &bytes)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_drive(path: Option<&Path>, circuit: &Circuit, manifest: &mut RunManifest) -> Result<DriveSet, Failure> {
    let Some(path) = path else { return Ok(DriveSet::new()) };
    let bytes = read(path)?;
    manifest.input(path, &bytes);
    parse_drive(&text(path, &bytes)?, circuit).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn ready(circuit: &Circuit, path: &Path) -> Result<(), Failure> {
    let report = validate(circuit);
    if report.is_ready() {
        Ok(())
    } else {
        Err(Failure::Input(format!("{}: circuit is not simulation-ready\n{report}", path.display())))
    }
}

fn record_grid(m: &mut RunManifest, s: &SimSettings) {
    m.set("dt", format_number(s.dt));
    m.set("t_start", format_number(s.t_start));
    m.set("t_end", format_number(s.t_end));
    m.set("newton_tol", format_number(s.newton_tol));
    m.set("newton_max_iters", s.newton_max_iters);
    m.set("history", s.window.map(|w| w.to_string()).unwrap_or_else(|| "full".into()));
}

fn commit(set: OutputSet, manifest: RunManifest) -> Result<(), Failure> {
    let written = set
        .commit(manifest)
        .map_err(|e| Failure::Input(format!("cannot write outputs: {e}")))?;
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

fn cmd_simulate(a: SimulateArgs, mut m: RunManifest) -> Result<(), Failure> {
    let circuit = load_netlist(&a.netlist, &mut m)?;
    let drive = load_drive(a.drive.as_deref(), &circuit, &mut m)?;
    let settings = a.grid.settings();
    let cfg = settings.build().map_err(Failure::Input)?;
    let beta = a.beta.unwrap_or(circuit.coupling().beta);
    if !(beta >= 0.0) {
        return Err(Failure::Input(format!("--beta must be non-negative, got {beta}")));
    }
    let circuit = circuit.with_beta(beta);
    ready(&circuit, &a.netlist)?;
    record_grid(&mut m, &settings);
    m.set("beta", format_number(beta));

    let traj = simulate(&circuit, &drive, beta, &cfg).map_err(sim_failure)?;
    let mut set = OutputSet::new(&a.out);
    set.add("trajectory.csv", output::trajectory_csv(&traj));
    if a.dump_topology {
        let topo = Topology::analyze(&circuit).map_err(|e| Failure::Input(e.to_string()))?;
        let (q, b, part) = output::topology_csvs(&circuit, &topo);
        set.add("topology_q.csv", q);
        set.add("topology_b.csv", b);
        set.add("topology_partition.csv", part);
    }
    if a.dump_action {
        let values = lagrangian_along(&circuit, &traj).map_err(|e| Failure::Numeric(e.to_string()))?;
        set.add("action.csv", output::action_csv(&traj, &values));
        let res = el_residual(&circuit, &traj).map_err(|e| Failure::Numeric(e.to_string()))?;
        set.add("el_residual.csv", output::el_residual_csv(&circuit, &res));
    }
    commit(set, m)
}

/// Least-squares factor `s` with `estimate ≈ s * oracle`.
fn scale(est: &[f64], oracle: &[f64]) -> f64 {
    let num: f64 = est.iter().zip(oracle).map(|(a, b)| a * b).sum();
    let den: f64 = oracle.iter().map(|b| b * b).sum();
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn cmd_gradcheck(a: GradcheckArgs, mut m: RunManifest) -> Result<(), Failure> {
    if !(a.beta > 0.0) || !a.beta.is_finite() {
        return Err(Failure::Input(format!(
            "--beta must be positive (the estimator is undefined at beta = 0), got {}",
            a.beta
        )));
    }
    let circuit = load_netlist(&a.netlist, &mut m)?;
    let drive = load_drive(a.drive.as_deref(), &circuit, &mut m)?;
    let settings = a.grid.settings();
    let cfg = settings.build().map_err(Failure::Input)?;
    ready(&circuit, &a.netlist)?;
    let jobs = a.jobs.unwrap_or_else(parallel::default_jobs).max(1);
    record_grid(&mut m, &settings);
    m.set("beta", format_number(a.beta));
    m.set("eps", format_number(a.eps));
    m.set("sign_convention", format_number(SIGN_CONVENTION));

    let run = |beta: f64, cfg: &SimConfig| -> Result<_, Failure> {
        let fd = parallel::fd_gradient(&circuit, &drive, a.eps, cfg, jobs).map_err(eqprop_failure)?;
        let est = parallel::estimate_gradient(&circuit, &drive, beta, cfg, jobs)
            .map_err(eqprop_failure)?
            .with_agreement(&fd);
        Ok((est, fd))
    };
    let (est, fd) = run(a.beta, &cfg)?;
    let ag = agreement(&est.values, &fd);
    let mut set = OutputSet::new(&a.out);
    set.add("gradcheck.csv", output::gradcheck_csv(&circuit, &est, &fd));
    set.add(
        "gradcheck_summary.csv",
        output::summary_csv(&[
            ("cosine", format_number(ag.cosine)),
            ("max_relative_error", format_number(ag.max_relative_error)),
            ("all_signs_match", ag.signs_match.to_string()),
            ("scale", format_number(scale(&est.values, &fd))),
            ("beta", format_number(a.beta)),
            ("eps", format_number(a.eps)),
            ("dt", format_number(settings.dt)),
            ("sign_convention", format_number(est.sign_convention)),
            ("free_loss", format_number(est.free_loss)),
        ]),
    );
    if a.sweep {
        let mut rows = Vec::new();
        for dt_factor in [1.0, 2.0, 4.0] {
            let s = SimSettings {
                dt: settings.dt * dt_factor,
                ..settings
            };
            let Ok(cfg) = s.build() else { continue };
            for beta_factor in [10.0, 1.0, 0.1] {
                let beta = a.beta * beta_factor;
                let (e, f) = run(beta, &cfg)?;
                let ag = agreement(&e.values, &f);
                rows.push(SweepRow {
                    beta,
                    dt: s.dt,
                    cosine: ag.cosine,
                    scale: scale(&e.values, &f),
                    signs_match: ag.signs_match,
                });
            }
        }
        set.add("gradcheck_sweep.csv", output::sweep_csv(&rows));
    }
    eprintln!(
        "cosine {:.6}, signs match: {}, scale {:.6}",
        ag.cosine,
        ag.signs_match,
        scale(&est.values, &fd)
    );
    commit(set, m)
}

fn cmd_train(a: TrainArgs, mut m: RunManifest) -> Result<(), Failure> {
    let circuit = load_netlist(&a.netlist, &mut m)?;
    let bytes = read(&a.config)?;
    m.input(&a.config, &bytes);
    let tf = parse_train_config(&text(&a.config, &bytes)?, &circuit)
        .map_err(|e| Failure::Input(format!("{}: {e}", a.config.display())))?;
    ready(&circuit, &a.netlist)?;
    m.seed = Some(tf.config.seed);
    m.set("sign_convention", format_number(SIGN_CONVENTION));
    for (k, v) in &tf.entries {
        m.set(k, v);
    }
    let mut set = OutputSet::new(&a.out);
    match train(&circuit, &tf.config) {
        Ok((trained, log)) => {
            set.add("training_log.csv", output::training_csv(&log));
            set.add("trained.net", serialize_netlist(&trained).into_bytes());
            commit(set, m)
        }
        Err(fail) => {
            set.add("training_log.csv", output::training_csv(&fail.log));
            m.set("status", "failed");
            commit(set, m)?;
            Err(eqprop_failure(fail.error))
        }
    }
}

fn cmd_bench(a: BenchArgs, mut m: RunManifest) -> Result<(), Failure> {
    if a.self_test {
        let cases = bench::self_test();
        println!("op,alpha,power,max_error,threshold,pass");
        for c in &cases {
            println!(
                "{:?},{},{},{:e},{:e},{}",
                c.op,
                c.alpha,
                c.power,
                c.max_error,
                c.threshold,
                c.passed()
            );
        }
        return if cases.iter().all(|c| c.passed()) {
            Ok(())
        } else {
            Err(Failure::Numeric("self-test thresholds exceeded".into()))
        };
    }
    let path = a
        .input
        .ok_or_else(|| Failure::Input("frac-bench needs an input CSV or --self-test".into()))?;
    let bytes = read(&path)?;
    m.input(&path, &bytes);
    let (t, v) = output::read_series(&bytes).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let grid = bench::grid_from_times(&t).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let x = Signal::new(grid, v).map_err(|e| Failure::Input(e.to_string()))?;
    let y = bench::apply(a.op, &x, a.alpha).map_err(|e| Failure::Input(e.to_string()))?;
    m.set("op", format!("{:?}", a.op));
    m.set("alpha", format_number(a.alpha));
    let mut set = OutputSet::new(&a.out);
    set.add("frac_bench.csv", output::series_csv(grid.times(), y.values()));
    commit(set, m)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let argv: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a, RunManifest::new("simulate", argv)),
        Command::Gradcheck(a) => cmd_gradcheck(a, RunManifest::new("gradcheck", argv)),
        Command::Train(a) => cmd_train(a, RunManifest::new("train", argv)),
        Command::FracBench(a) => cmd_bench(a, RunManifest::new("frac-bench", argv)),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}
