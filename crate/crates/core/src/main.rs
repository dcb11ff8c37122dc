//! Command-line front end: wave synthesis, plant simulation, single OCP
//! solves, receding-horizon runs, trade-off sweeps, and the scripted
//! studies. All outputs are CSV.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use degwec::config::{self, Config};
use degwec::experiments;
use degwec::mpc::{run_mpc, MpcConfig, WeightPolicy};
use degwec::objectives::{continuous_energy_audit, discrete_costs, DamageMode, Weights};
use degwec::ocp::{solve, OcpInstance};
use degwec::pareto;
use degwec::plant::{simulate, ExtendedState};
use degwec::waves::{realize_wave, sample_excitation, WaveRealization};
use degwec::weight_adapt::{WeightController, WeightSchedule};

#[derive(Parser)]
#[command(name = "degwec", version, about = "DEG wave-energy converter simulation and control")]
struct Cli {
    /// Configuration file (falls back to $DEGWEC_CONFIG, then the embedded
    /// default).
    #[arg(long, global = true, env = "DEGWEC_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ParetoMode {
    Ocp,
    Mpc,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a sea-state realization and print the excitation torque.
    Wave {
        #[arg(long)]
        seed: Option<u64>,
        /// Sampled duration [s].
        #[arg(long, default_value_t = 60.0)]
        duration: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate the plant on an input/excitation CSV with columns t,u,d.
    Simulate {
        input: PathBuf,
        /// Also print the energy bookkeeping audit.
        #[arg(long)]
        audit: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve one finite-horizon optimal control problem.
    Ocp {
        /// Horizon [s]; defaults to the configured prediction horizon.
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long, default_value_t = 0.5)]
        w2: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the receding-horizon controller.
    Mpc {
        /// Prediction horizon [s]; defaults to the configured one.
        #[arg(long)]
        horizon: Option<f64>,
        /// Run duration [s]; defaults to the configured one.
        #[arg(long)]
        duration: Option<f64>,
        /// Fixed damage weight; mutually exclusive with --adaptive.
        #[arg(long, conflicts_with = "adaptive")]
        w2: Option<f64>,
        /// Use the adaptive weight controller.
        #[arg(long)]
        adaptive: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep the weight schedule and print the energy/damage front.
    Pareto {
        #[arg(long, value_enum, default_value_t = ParetoMode::Ocp)]
        mode: ParetoMode,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Preview-horizon accuracy study against the full-knowledge solution.
    HorizonSweep {
        #[arg(long)]
        quick: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Damage-budget tracking study with the adaptive controller.
    WeightControl {
        #[arg(long)]
        quick: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fixed weights versus the adaptive controller on shared realizations.
    FixedVsAdaptive {
        #[arg(long)]
        quick: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let cfg = config::load(cli.config.as_deref()).context("loading configuration")?;
    match cli.command {
        Command::Wave { seed, duration, out } => cmd_wave(&cfg, seed, duration, out.as_deref()),
        Command::Simulate { input, audit, out } => cmd_simulate(&cfg, &input, audit, out.as_deref()),
        Command::Ocp { horizon, w2, seed, out } => cmd_ocp(&cfg, horizon, w2, seed, out.as_deref()),
        Command::Mpc { horizon, duration, w2, adaptive, seed, out } => {
            cmd_mpc(&cfg, horizon, duration, w2, adaptive, seed, out.as_deref())
        }
        Command::Pareto { mode, seed, out } => cmd_pareto(&cfg, mode, seed, out.as_deref()),
        Command::HorizonSweep { quick, out } => {
            let dir = experiments::output_dir(&cfg, out.as_deref());
            let rows = experiments::run_horizon_sweep(&cfg, quick, &dir)?;
            println!("horizon sweep: {} rows -> {}", rows.len(), dir.join("horizon_sweep.csv").display());
            Ok(())
        }
        Command::WeightControl { quick, out } => {
            let dir = experiments::output_dir(&cfg, out.as_deref());
            let rows = experiments::run_weight_control_study(&cfg, quick, &dir)?;
            for r in &rows {
                println!(
                    "seed {} budget {:.3e}: damage {:.3e} energy {:.4e} J within_budget={}",
                    r.seed, r.budget, r.damage, r.energy, r.within_budget
                );
            }
            println!("-> {}", dir.join("weight_control.csv").display());
            Ok(())
        }
        Command::FixedVsAdaptive { quick, out } => {
            let dir = experiments::output_dir(&cfg, out.as_deref());
            let rows = experiments::run_fixed_vs_adaptive(&cfg, quick, &dir)?;
            println!(
                "fixed vs adaptive: {} rows -> {}",
                rows.len(),
                dir.join("fixed_vs_adaptive.csv").display()
            );
            Ok(())
        }
    }
}

fn wave_for_seed(cfg: &Config, seed: Option<u64>) -> anyhow::Result<WaveRealization> {
    let mut wave_cfg = cfg.wave.clone();
    if let Some(s) = seed {
        wave_cfg.seed = s;
    }
    Ok(realize_wave(&wave_cfg)?)
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(path, text)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_wave(cfg: &Config, seed: Option<u64>, duration: f64, out: Option<&Path>) -> anyhow::Result<()> {
    let wave = wave_for_seed(cfg, seed)?;
    let step = cfg.discretization.delta;
    let count = (duration / step).round() as usize + 1;
    let d = sample_excitation(&wave, 0, count, step);
    let mut text = String::from("t,d\n");
    for (k, v) in d.iter().enumerate() {
        text.push_str(&format!("{:.6},{v:.12e}\n", k as f64 * step));
    }
    emit(out, &text)
}

fn read_tud_csv(path: &Path, step: f64) -> anyhow::Result<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().context("empty input file")?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let (ti, ui, di) = (
        cols.iter().position(|&c| c == "t").context("missing column t")?,
        cols.iter().position(|&c| c == "u").context("missing column u")?,
        cols.iter().position(|&c| c == "d").context("missing column d")?,
    );
    let mut u = Vec::new();
    let mut d = Vec::new();
    for (row, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parse = |i: usize| -> anyhow::Result<f64> {
            fields
                .get(i)
                .with_context(|| format!("row {row}: missing field {i}"))?
                .parse::<f64>()
                .with_context(|| format!("row {row}: not a number"))
        };
        let t = parse(ti)?;
        let expected = u.len() as f64 * step;
        if (t - expected).abs() > 1e-6 * step.max(1.0) {
            bail!("row {row}: time {t} is off the configured {step} s grid (expected {expected})");
        }
        u.push(parse(ui)?);
        d.push(parse(di)?);
    }
    if u.len() < 2 {
        bail!("input needs at least two knots");
    }
    Ok((u, d))
}

fn cmd_simulate(cfg: &Config, input: &Path, audit: bool, out: Option<&Path>) -> anyhow::Result<()> {
    let step = cfg.discretization.delta;
    let (u, d) = read_tud_csv(input, step)?;
    let xi0 = ExtendedState::zero(cfg.plant.radiation.order());
    let traj = simulate(&xi0, &u, &d, step, &cfg.plant, DamageMode::Exact)?;
    let costs = discrete_costs(&traj)?;

    let mut text = String::from("t,u,d,theta,delta,upsilon1,upsilon2\n");
    for (k, s) in traj.iter().enumerate() {
        text.push_str(&format!(
            "{:.6},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
            k as f64 * step,
            u[k],
            d[k],
            s.theta,
            s.delta,
            s.upsilon1,
            s.upsilon2
        ));
    }
    emit(out, &text)?;
    eprintln!(
        "J1 = {:.6e} J (extracted {:.6e} J), J2 = {:.6e}",
        costs.j1,
        costs.extracted_energy(),
        costs.j2
    );
    if audit {
        let a = continuous_energy_audit(&traj, &u, &d, step, &cfg.plant)?;
        eprintln!(
            "energy audit: dPsi {:.4e}, viscous {:.4e}, radiation {:.4e}, electrical {:.4e}, \
             wave work {:.4e}, residual {:.4e} J",
            a.delta_psi, a.viscous_loss, a.radiation_loss, a.electrical_loss, a.wave_work, a.residual
        );
    }
    Ok(())
}

fn cmd_ocp(
    cfg: &Config,
    horizon: Option<f64>,
    w2: f64,
    seed: Option<u64>,
    out: Option<&Path>,
) -> anyhow::Result<()> {
    let wave = wave_for_seed(cfg, seed)?;
    let step = cfg.discretization.delta;
    let knots = match horizon {
        Some(h) => (h / step).round() as usize + 1,
        None => cfg.discretization.horizon_steps,
    };
    let inst = OcpInstance {
        plant: cfg.plant.clone(),
        xi0: ExtendedState::zero(cfg.plant.radiation.order()),
        u0: cfg.mpc.initial_input,
        d: sample_excitation(&wave, 0, knots, step),
        weights: Weights::from_w2(w2)?,
        step,
        kappa: cfg.discretization.kappa,
        energy_scale: cfg.mpc.energy_scale,
    };
    let res = solve(&inst, None, &cfg.solver)?;
    let mut text = String::from("t,u,d\n");
    for k in 0..knots {
        text.push_str(&format!("{:.6},{:.12e},{:.12e}\n", k as f64 * step, res.u[k], inst.d[k]));
    }
    emit(out, &text)?;
    eprintln!(
        "status {:?} after {} iterations, stationarity {:.2e}; J1 = {:.6e} J, J2 = {:.6e}",
        res.status, res.iterations, res.stationarity, res.costs.j1, res.costs.j2
    );
    Ok(())
}

fn cmd_mpc(
    cfg: &Config,
    horizon: Option<f64>,
    duration: Option<f64>,
    w2: Option<f64>,
    adaptive: bool,
    seed: Option<u64>,
    out: Option<&Path>,
) -> anyhow::Result<()> {
    let wave = wave_for_seed(cfg, seed)?;
    let mut mpc = MpcConfig::from_config(cfg);
    if let Some(h) = horizon {
        mpc.horizon_steps = (h / cfg.discretization.delta).round() as usize + 1;
        mpc.applied_steps = mpc.applied_steps.min(mpc.horizon_steps - 1);
    }
    if let Some(t) = duration {
        mpc.total_steps = (t / cfg.discretization.delta).round() as usize;
    }
    let policy = if adaptive {
        let controller = WeightController::from_config(&cfg.weight_control, mpc.sampling_time())?;
        WeightPolicy::Adaptive(controller)
    } else {
        WeightPolicy::Fixed(Weights::from_w2(w2.unwrap_or(0.5))?)
    };
    let log = run_mpc(&mpc, policy, &cfg.plant, &wave, &cfg.solver)?;

    let mut text = String::from("t,u,theta,delta,upsilon1,upsilon2,weight_index\n");
    for s in log.steps.iter().step_by(cfg.experiment.log_every) {
        text.push_str(&format!(
            "{:.6},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{}\n",
            s.t,
            s.u,
            s.theta,
            s.delta,
            s.upsilon1,
            s.upsilon2,
            s.weight_index.map_or(String::new(), |i| i.to_string())
        ));
    }
    emit(out, &text)?;
    let held = log.solves.iter().filter(|s| s.held).count();
    eprintln!(
        "{} solves ({held} held); J1 = {:.6e} J (extracted {:.6e} J), J2 = {:.6e}; realization {:016x}",
        log.solves.len(),
        log.costs.j1,
        log.costs.extracted_energy(),
        log.costs.j2,
        log.realization_hash
    );
    for c in &log.controller {
        eprintln!(
            "  t={:.1}s rate={:.3e} predicted={:.3e} index={} skipped={}",
            c.t, c.damage_rate, c.predicted_damage, c.index, c.skipped
        );
    }
    Ok(())
}

fn cmd_pareto(cfg: &Config, mode: ParetoMode, seed: Option<u64>, out: Option<&Path>) -> anyhow::Result<()> {
    let wave = wave_for_seed(cfg, seed)?;
    let schedule = WeightSchedule::evenly_spaced(
        cfg.weight_control.schedule_size,
        cfg.weight_control.w2_min,
        cfg.weight_control.w2_max,
    )?;
    let points = match mode {
        ParetoMode::Ocp => pareto::sweep_ocp(
            &cfg.plant,
            &wave,
            cfg.discretization.horizon_steps,
            cfg.discretization.delta,
            cfg.discretization.kappa,
            cfg.mpc.energy_scale,
            schedule.w2_values(),
            &cfg.solver,
        )?,
        ParetoMode::Mpc => {
            let mpc = MpcConfig::from_config(cfg);
            pareto::sweep_mpc_fixed_weights(cfg, &mpc, &wave, schedule.w2_values())?
        }
    };
    let mut text = String::from("w2,j1,j2,extracted_energy,dominated\n");
    for p in &points {
        text.push_str(&format!(
            "{:.6},{:.12e},{:.12e},{:.12e},{}\n",
            p.w2,
            p.costs.j1,
            p.costs.j2,
            p.costs.extracted_energy(),
            p.dominated
        ));
    }
    emit(out, &text)
}
