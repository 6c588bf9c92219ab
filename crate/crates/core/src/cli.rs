//! Command-line front end.
//!
//! Every command resolves an [`ExperimentConfig`] from an optional JSON file
//! plus flags, writes its data files to the output directory and records a
//! `<command>.manifest.json` holding the effective config, its hash, the seed,
//! the crate version and the hashes of all inputs and outputs.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{ControllerKind, ExperimentConfig};
use crate::controllers::{AnyController, RnnController};
use crate::deploy::emulate_loop;
use crate::error::{Error, Result};
use crate::evaluation::{
    align_and_compare, loss_landscape, settling_time, sweep, ContextMode, GainTrace, LandscapeSpec, Signal,
    TrajectoryLog,
};
use crate::plant::State;
use crate::svg::{line_plot, ContourPlot, Series};
use crate::training::{gradient_check, train_with, CsvLogWriter, GradCheckConfig, TrainConfig, TrainLog};

/// Status line on stdout; a closed pipe is ignored rather than fatal.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Debug, Parser)]
#[command(
    name = "simgap",
    version,
    about = "Cart-pole RNN control: training, sweeps and sim-to-real gap analysis"
)]
pub struct Cli {
    /// Upper bound on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train an RNN controller; writes weights.json and train_log.csv.
    Train(TrainArgs),
    /// Settling-time sweep over the (M, m) or (D_c, D_p) plane.
    Sweep(SweepArgs),
    /// Smoothed equivalent gains from a training log.
    GainsTrace(GainsTraceArgs),
    /// Peak alignment of a simulated and a recorded trajectory.
    Align(AlignArgs),
    /// Single closed-loop episode, optionally through the deployment chain.
    Simulate(SimulateArgs),
    /// Compare the analytic gradient with finite differences on a small network.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

impl Switch {
    fn on(self) -> bool {
        self == Switch::On
    }
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON experiment config; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (default: config value, then $SIMGAP_OUT_DIR, then ./out).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ControllerArgs {
    /// RNN weight file.
    #[arg(long, conflicts_with = "proportional")]
    pub weights: Option<PathBuf>,
    /// Use the proportional controller instead of an RNN.
    #[arg(long)]
    pub proportional: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Desk-scale preset: 32 hidden units, 300 epochs, episodes of at most 200 ticks.
    #[arg(long)]
    pub desk: bool,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    /// Gain regularization term.
    #[arg(long, value_enum)]
    pub gc: Option<Switch>,
    /// Domain randomization.
    #[arg(long, value_enum)]
    pub dr: Option<Switch>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub controller: ControllerArgs,
    #[arg(long, value_parser = ["mm", "dd"])]
    pub plane: Option<String>,
    /// Context given to the controller (default: matched on mm, nominal on dd).
    #[arg(long, value_parser = ["nominal", "2x", "far", "matched"])]
    pub context: Option<String>,
    /// Points per axis.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Also render an SVG contour plot.
    #[arg(long)]
    pub svg: bool,
    /// Also compute the per-plant state-loss landscape.
    #[arg(long)]
    pub landscape: bool,
    /// Training log whose final batch is overlaid on the landscape.
    #[arg(long, requires = "landscape")]
    pub train_log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GainsTraceArgs {
    /// Training log CSV.
    pub log: PathBuf,
    /// Moving-average window [epochs].
    #[arg(long, default_value_t = 50)]
    pub window: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    /// Simulated trajectory CSV.
    pub sim: PathBuf,
    /// Recorded trajectory CSV.
    pub real: PathBuf,
    #[arg(long, value_parser = ["theta", "omega"], default_value = "omega")]
    pub signal: String,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub controller: ControllerArgs,
    /// Run through the motor model, velocity smoothing and period jitter.
    #[arg(long)]
    pub emulate_deploy: bool,
    /// Random control period (with --emulate-deploy).
    #[arg(long, requires = "emulate_deploy")]
    pub jitter: bool,
    /// Initial pole angle [rad].
    #[arg(long, allow_hyphen_values = true)]
    pub theta0: Option<f64>,
    /// Simulated time [s].
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long, value_parser = ["nominal", "2x", "far", "matched"])]
    pub context: Option<String>,
    /// Total mass M [kg].
    #[arg(long)]
    pub total_mass: Option<f64>,
    /// Pole mass m [kg].
    #[arg(long)]
    pub pole_mass: Option<f64>,
    /// Pole length l [m].
    #[arg(long)]
    pub length: Option<f64>,
    #[arg(long)]
    pub d_c: Option<f64>,
    #[arg(long)]
    pub d_p: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 6)]
    pub hidden: usize,
    #[arg(long, default_value_t = 10)]
    pub steps: usize,
    #[arg(long, default_value_t = 2)]
    pub episodes: usize,
    #[arg(long, value_enum, default_value = "on")]
    pub gc: Switch,
    /// Output scale of the test network; small values keep the force unsaturated.
    #[arg(long, default_value_t = 5.0)]
    pub c_out: f64,
    /// Largest acceptable relative error.
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("`--threads`: must be >= 1".into()));
        }
        // A pool that is already built keeps its size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::GainsTrace(a) => cmd_gains_trace(&a),
        Command::Align(a) => cmd_align(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Gradcheck(a) => cmd_gradcheck(&a),
    }
}

fn base_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn resolve_common(c: &CommonArgs) -> Result<ExperimentConfig> {
    let mut cfg = base_config(c.config.as_deref())?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.output_dir = Some(o.clone());
    }
    Ok(cfg)
}

fn apply_controller(cfg: &mut ExperimentConfig, c: &ControllerArgs) {
    if c.proportional {
        cfg.controller.kind = ControllerKind::Proportional;
    } else if let Some(w) = &c.weights {
        cfg.controller.kind = ControllerKind::Rnn;
        cfg.controller.weights = Some(w.clone());
    }
}

fn load_controller(cfg: &ExperimentConfig) -> Result<AnyController> {
    match cfg.controller.kind {
        ControllerKind::Proportional => Ok(AnyController::Proportional(cfg.controller.gains)),
        ControllerKind::Rnn => {
            let path = cfg.controller.weights.as_ref().ok_or_else(|| {
                Error::Config("`controller.weights`: an RNN needs --weights (or use --proportional)".into())
            })?;
            Ok(AnyController::Rnn(RnnController::load(path)?))
        }
    }
}

fn out_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let dir = cfg.output_dir();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

fn write_manifest(
    dir: &Path,
    command: &str,
    cfg: &ExperimentConfig,
    inputs: &[&Path],
    outputs: &[PathBuf],
) -> Result<()> {
    let mut ins = serde_json::Map::new();
    for p in inputs {
        ins.insert(p.display().to_string(), json!(file_sha256(p)?));
    }
    let mut outs = serde_json::Map::new();
    for p in outputs {
        let name = p
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        outs.insert(name, json!(file_sha256(p)?));
    }
    let manifest = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cfg.seed,
        "config_sha256": cfg.sha256(),
        "config": serde_json::to_value(cfg)?,
        "inputs": ins,
        "outputs": outs,
    });
    let path = dir.join(format!("{command}.manifest.json"));
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let mut cfg = resolve_common(&a.common)?;
    if a.desk {
        let d = TrainConfig::desk();
        cfg.controller.n_hidden = d.n_hidden;
        cfg.training.epochs = d.epochs;
        cfg.training.schedule.steps_cap = d.schedule.steps_cap;
    }
    if let Some(e) = a.epochs {
        cfg.training.epochs = e;
    }
    if let Some(h) = a.hidden {
        cfg.controller.n_hidden = h;
    }
    if let Some(b) = a.batch {
        cfg.training.batch = b;
    }
    if let Some(g) = a.gc {
        cfg.training.gc_enabled = g.on();
    }
    if let Some(d) = a.dr {
        cfg.training.dr_enabled = d.on();
    }
    cfg.controller.kind = ControllerKind::Rnn;
    cfg.validate()?;
    let tc = cfg.train_config();
    let dir = out_dir(&cfg)?;
    let log_path = dir.join("train_log.csv");
    let weights_path = dir.join("weights.json");

    let file = std::fs::File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
    let mut writer = CsvLogWriter::new(std::io::BufWriter::new(file), tc.batch)?;
    let epochs = tc.epochs;
    let (ctrl, log) = train_with(&tc, |rec| {
        if rec.epoch % 50 == 0 || rec.epoch + 1 == epochs {
            eprintln!(
                "epoch {:>5}  steps {:>3}  total {:.4}  g_omega {:.3}",
                rec.epoch, rec.steps, rec.total, rec.gains[3]
            );
        }
        writer.write(rec)
    })?;
    drop(writer);
    ctrl.save(&weights_path)?;
    write_manifest(&dir, "train", &cfg, &[], &[weights_path.clone(), log_path.clone()])?;
    if let Some(last) = log.last() {
        say!(
            "trained {} epochs: total {:.4}, g = [{:.3}, {:.3}, {:.3}, {:.3}]",
            log.records.len(),
            last.total,
            last.gains[0],
            last.gains[1],
            last.gains[2],
            last.gains[3]
        );
    }
    say!("weights: {}", weights_path.display());
    say!("log: {}", log_path.display());
    Ok(())
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let mut cfg = resolve_common(&a.common)?;
    apply_controller(&mut cfg, &a.controller);
    if let Some(p) = &a.plane {
        cfg.evaluation.plane = p.clone();
    }
    if let Some(c) = &a.context {
        cfg.evaluation.context = Some(c.clone());
    }
    if let Some(n) = a.grid {
        cfg.evaluation.grid = n;
    }
    cfg.validate()?;
    let ctrl = load_controller(&cfg)?;
    let spec = cfg.sweep_spec()?;
    let grid = sweep(&ctrl, &spec)?;
    let dir = out_dir(&cfg)?;
    let stem = format!("sweep_{}", spec.plane);
    let csv_path = dir.join(format!("{stem}.csv"));
    grid.save(&csv_path)?;
    let mut outputs = vec![csv_path.clone()];
    if a.svg {
        let svg_path = dir.join(format!("{stem}.svg"));
        let title = format!("5% settling time [s] ({} context)", context_name(&spec.context));
        let z = grid.matrix();
        let svg = ContourPlot {
            title: &title,
            x_label: &grid.axis_names[0],
            y_label: &grid.axis_names[1],
            xs: &grid.axis1,
            ys: &grid.axis2,
            z: &z,
            levels: &[0.5, 1.0, 2.0, 3.0, 4.0],
            points: &[],
        }
        .render();
        write_text(&svg_path, &svg)?;
        outputs.push(svg_path);
    }
    let mut inputs: Vec<&Path> = cfg.controller.weights.iter().map(PathBuf::as_path).collect();
    if cfg.controller.kind == ControllerKind::Proportional {
        inputs.clear();
    }
    if a.landscape {
        let log = a.train_log.as_deref().map(TrainLog::load).transpose()?;
        let mut ls = LandscapeSpec::new(
            spec.plane,
            cfg.evaluation.grid,
            cfg.training.batch,
            &cfg.training.noise,
            cfg.seed,
        );
        ls.base = spec.base;
        ls.context = spec.context;
        ls.steps = spec.steps;
        ls.limits = spec.limits;
        ls.scales = cfg.training.base;
        let land = loss_landscape(&ctrl, &ls, log.as_ref())?;
        let grid_path = dir.join(format!("landscape_{}.csv", spec.plane));
        let overlay_path = dir.join(format!("landscape_{}_batch.csv", spec.plane));
        land.save(&grid_path, &overlay_path)?;
        outputs.push(grid_path);
        outputs.push(overlay_path);
        if a.svg {
            let z = land.omega_matrix();
            let svg_path = dir.join(format!("landscape_{}.svg", spec.plane));
            let svg = ContourPlot {
                title: "angular-velocity loss",
                x_label: &land.axis_names[0],
                y_label: &land.axis_names[1],
                xs: &land.axis1,
                ys: &land.axis2,
                z: &z,
                levels: &[0.1, 0.2, 0.5, 1.0, 2.0],
                points: &land.overlay,
            }
            .render();
            write_text(&svg_path, &svg)?;
            outputs.push(svg_path);
        }
        if let Some(p) = a.train_log.as_deref() {
            inputs.push(p);
        }
    }
    write_manifest(&dir, "sweep", &cfg, &inputs, &outputs)?;
    say!(
        "settled cells: {}/{} ({} plane)",
        grid.settled_count(),
        grid.cells.len(),
        spec.plane
    );
    say!("grid: {}", csv_path.display());
    Ok(())
}

fn context_name(c: &ContextMode) -> &'static str {
    match c {
        ContextMode::Matched => "matched",
        ContextMode::Nominal => "nominal",
        ContextMode::TwiceDamping => "2x damping",
        ContextMode::Far => "far",
        ContextMode::Explicit(_) => "explicit",
    }
}

fn cmd_gains_trace(a: &GainsTraceArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.evaluation.smoothing_window = a.window;
    cfg.output_dir = a.out.clone();
    cfg.validate()?;
    let log = TrainLog::load(&a.log)?;
    let trace = GainTrace::from_log(&log, a.window)?;
    let dir = out_dir(&cfg)?;
    let csv_path = dir.join("gains_trace.csv");
    trace.save(&csv_path)?;
    let mut outputs = vec![csv_path.clone()];
    if a.svg {
        let epochs: Vec<f64> = trace.epoch.iter().map(|&e| e as f64).collect();
        let g_omega = trace.column(3);
        let target = vec![cfg.controller.gains.k_omega.nominal; epochs.len()];
        let svg = line_plot(
            &format!("equivalent gain g_omega (window {})", a.window),
            "epoch",
            "g_omega",
            &[
                Series {
                    label: "g_omega",
                    x: &epochs,
                    y: &g_omega,
                },
                Series {
                    label: "k_omega",
                    x: &epochs,
                    y: &target,
                },
            ],
        );
        let svg_path = dir.join("gains_trace.svg");
        write_text(&svg_path, &svg)?;
        outputs.push(svg_path);
    }
    write_manifest(&dir, "gains-trace", &cfg, &[&a.log], &outputs)?;
    let last = trace.last();
    let max_w = trace.max(3);
    say!(
        "max smoothed g_omega = {max_w:.4} ({} 2.0); final g = [{:.3}, {:.3}, {:.3}, {:.3}]; window {}",
        if max_w < 2.0 { "below" } else { "not below" },
        last[0],
        last[1],
        last[2],
        last[3],
        a.window
    );
    say!("trace: {}", csv_path.display());
    Ok(())
}

fn cmd_align(a: &AlignArgs) -> Result<()> {
    let mut cfg = base_config(a.config.as_deref())?;
    cfg.evaluation.signal = a.signal.clone();
    if let Some(o) = &a.out {
        cfg.output_dir = Some(o.clone());
    }
    cfg.validate()?;
    let signal: Signal = cfg.signal()?;
    let sim = TrajectoryLog::load(&a.sim)?;
    let real = TrajectoryLog::load(&a.real)?;
    let report = align_and_compare(&sim, &real, signal, &cfg.evaluation.align)?;
    let dir = out_dir(&cfg)?;
    let path = dir.join("gap_report.txt");
    report.save(&path)?;
    write_manifest(&dir, "align", &cfg, &[&a.sim, &a.real], std::slice::from_ref(&path))?;
    say!(
        "offset {:.4} s, matched {} peaks, mean |delta| {:.4} s, oscillation sim {:.4} real {:.4}",
        report.offset,
        report.matched.len(),
        report.mean_abs_delta(),
        report.oscillation_sim,
        report.oscillation_real
    );
    say!("report: {}", path.display());
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let mut cfg = resolve_common(&a.common)?;
    apply_controller(&mut cfg, &a.controller);
    for (slot, v) in [
        (&mut cfg.plant.total_mass, a.total_mass),
        (&mut cfg.plant.m, a.pole_mass),
        (&mut cfg.plant.l, a.length),
        (&mut cfg.plant.d_c, a.d_c),
        (&mut cfg.plant.d_p, a.d_p),
    ] {
        if v.is_some() {
            *slot = v;
        }
    }
    if let Some(t) = a.theta0 {
        cfg.evaluation.theta0 = t;
    }
    if let Some(d) = a.duration {
        cfg.deploy.duration = d;
    }
    if let Some(c) = &a.context {
        cfg.evaluation.context = Some(c.clone());
    }
    if a.jitter {
        cfg.deploy.jitter.enabled = true;
    }
    cfg.validate()?;
    let ctrl = load_controller(&cfg)?;
    let plant = cfg.plant_params()?;
    let context = match &cfg.evaluation.context {
        Some(c) => c.parse::<ContextMode>()?,
        None => ContextMode::Matched,
    };
    let cond = context.conditioning(&plant)?;
    let initial = State::new(0.0, 0.0, cfg.evaluation.theta0, 0.0);
    let lim = cfg.training.limits;
    let mut policy = ctrl.policy();
    let log = if a.emulate_deploy {
        emulate_loop(policy.as_mut(), &plant, &cond, initial, &cfg.emulator_config()?, &lim)?
    } else {
        let steps = (cfg.deploy.duration / lim.dt).round() as usize;
        let trace = crate::training::run_episode_from(policy.as_mut(), &plant, &cond, initial, 0.0, steps, &lim);
        TrajectoryLog::from_trace(&trace, lim.dt)
    };
    let dir = out_dir(&cfg)?;
    let path = dir.join("trajectory.csv");
    log.save(&path)?;
    let inputs: Vec<&Path> = match cfg.controller.kind {
        ControllerKind::Rnn => cfg.controller.weights.iter().map(PathBuf::as_path).collect(),
        ControllerKind::Proportional => Vec::new(),
    };
    write_manifest(&dir, "simulate", &cfg, &inputs, std::slice::from_ref(&path))?;
    let settle = if log.is_empty() {
        None
    } else {
        settling_time(&log, Signal::Theta, cfg.evaluation.band_fraction)?.settling_time
    };
    say!(
        "status={} rows={} settling_time_s={}",
        log.status,
        log.len(),
        settle.map_or_else(|| "none".to_string(), |t| format!("{t:.3}"))
    );
    say!("trajectory: {}", path.display());
    Ok(())
}

fn cmd_gradcheck(a: &GradcheckArgs) -> Result<()> {
    if a.hidden == 0 || a.steps == 0 || a.episodes == 0 {
        return Err(Error::Config(
            "`--hidden`, `--steps` and `--episodes` must be >= 1".into(),
        ));
    }
    let tc = TrainConfig {
        seed: a.seed,
        n_hidden: a.hidden,
        c_out: a.c_out,
        batch: a.episodes,
        gc_enabled: a.gc.on(),
        ..TrainConfig::default()
    };
    tc.validate()?;
    let ctrl = RnnController::init_weights(&mut tc.init_rng(), tc.n_hidden, tc.n_inputs(), tc.c_out)?;
    // A late-curriculum epoch so that randomization and bias are active.
    let sched = tc.schedule.at(tc.schedule.n_finetune_end);
    let inputs = (0..tc.batch).map(|b| tc.episode_input(&sched, b)).collect();
    let report = gradient_check(
        &ctrl,
        &GradCheckConfig {
            inputs,
            spec: tc.loss_spec(a.steps),
            step: 1e-6,
            floor: 1e-8,
        },
    );
    say!(
        "params={} loss={:.6e} max_abs_grad={:.3e} max_rel_err={:.3e} worst_index={}",
        report.n_params,
        report.loss,
        report.max_abs_grad,
        report.max_rel_err,
        report.worst_index
    );
    if report.max_rel_err < a.tol {
        say!("gradcheck passed (tolerance {:e})", a.tol);
        Ok(())
    } else {
        Err(Error::CheckFailed(format!(
            "max relative error {:e} exceeds {:e}",
            report.max_rel_err, a.tol
        )))
    }
}
