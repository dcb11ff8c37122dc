//! Scripted studies: preview-horizon sweep against a full-knowledge
//! solution, damage-budget tracking with the adaptive weight controller, and
//! fixed-weight versus adaptive comparison. Each study returns its rows and
//! writes a deterministic CSV.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::mpc::{control_deviation, run_mpc, MpcConfig, MpcLog, WeightPolicy};
use crate::objectives::Weights;
use crate::ocp::{solve, OcpInstance};
use crate::plant::ExtendedState;
use crate::waves::{realize_wave, sample_excitation, WaveRealization};
use crate::weight_adapt::{WeightController, WeightSchedule};

/// Scale the long-duration settings down for a fast run: durations, target
/// time and the ground-truth window shrink by 10x, and the prediction
/// horizon is capped at 20 s.
pub fn scaled_config(cfg: &Config, quick: bool) -> Config {
    if !quick {
        return cfg.clone();
    }
    let mut out = cfg.clone();
    out.mpc.duration /= 10.0;
    out.experiment.duration /= 10.0;
    out.experiment.ground_truth_horizon /= 10.0;
    // The evaluation period scales with the target time so the controller
    // keeps the same number of adjustment opportunities. The pilot stays at
    // full length so the calibration window sees representative damage.
    // Budget tracking is looser at this scale: the shortened windows no
    // longer average over whole wave groups.
    out.weight_control.target_time /= 10.0;
    out.weight_control.evaluation_period /= 10.0;
    out.discretization.horizon_steps = out.discretization.horizon_steps.min(201);
    out
}

fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)
            .map_err(|e| Error::Io { path: dir.display().to_string(), source: e })?;
    }
    let mut file = fs::File::create(path)
        .map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
    let mut out = String::with_capacity(rows.len() * 64 + header.len() + 1);
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(row);
        out.push('\n');
    }
    file.write_all(out.as_bytes())
        .map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
    Ok(())
}

fn fnum(v: f64) -> String {
    format!("{v:.12e}")
}

fn realization_for_seed(cfg: &Config, seed: u64) -> Result<WaveRealization> {
    let mut wave_cfg = cfg.wave.clone();
    wave_cfg.seed = seed;
    realize_wave(&wave_cfg)
}

fn base_mpc(cfg: &Config) -> MpcConfig {
    MpcConfig::from_config(cfg)
}

/// Full-knowledge reference: one optimal control solve spanning the whole
/// run, with the same pinned first input as the receding-horizon loop.
pub fn ground_truth_solution(
    cfg: &Config,
    wave: &WaveRealization,
    duration: f64,
    w2: f64,
) -> Result<crate::ocp::SolveResult> {
    let steps = (duration / cfg.discretization.delta).round() as usize;
    let inst = OcpInstance {
        plant: cfg.plant.clone(),
        xi0: ExtendedState::zero(cfg.plant.radiation.order()),
        u0: cfg.mpc.initial_input,
        d: sample_excitation(wave, 0, steps + 1, cfg.discretization.delta),
        weights: Weights::from_w2(w2)?,
        step: cfg.discretization.delta,
        kappa: cfg.discretization.kappa,
        energy_scale: cfg.mpc.energy_scale,
    };
    solve(&inst, None, &cfg.solver)
}

/// One row of the preview-horizon sweep.
#[derive(Debug, Clone)]
pub struct HorizonRow {
    pub seed: u64,
    /// Prediction horizon [s].
    pub horizon_seconds: f64,
    /// Mean absolute input deviation from the full-knowledge solution [V^2].
    pub mae: f64,
    pub rmse: f64,
    /// MAE normalized by the input bound.
    pub mae_normalized: f64,
    /// Extracted energy of the receding-horizon run [J].
    pub energy: f64,
    /// Energy relative to the full-knowledge solution.
    pub energy_ratio: f64,
    pub realization_hash: u64,
}

/// Sweep prediction horizons against the full-knowledge solution on the
/// same realizations; one CSV row per (seed, horizon).
pub fn run_horizon_sweep(cfg: &Config, quick: bool, out_dir: &Path) -> Result<Vec<HorizonRow>> {
    let cfg = scaled_config(cfg, quick);
    let duration = cfg.experiment.ground_truth_horizon;
    let w2 = 0.5;

    let mut rows = Vec::new();
    for &seed in &cfg.experiment.seeds {
        let wave = realization_for_seed(&cfg, seed)?;
        let truth = ground_truth_solution(&cfg, &wave, duration, w2)?;
        let truth_energy = truth.costs.extracted_energy();
        let hash = crate::mpc::realization_hash(&wave);

        let horizons: Vec<f64> = cfg
            .experiment
            .horizons
            .iter()
            .map(|&h| if quick { h / 10.0 } else { h })
            .collect();
        let per_horizon: Vec<Result<HorizonRow>> = horizons
            .par_iter()
            .map(|&horizon_s| {
                let mut mpc = base_mpc(&cfg);
                mpc.horizon_steps =
                    (horizon_s / cfg.discretization.delta).round() as usize + 1;
                mpc.applied_steps = mpc.applied_steps.min(mpc.horizon_steps - 1);
                mpc.total_steps = (duration / cfg.discretization.delta).round() as usize;
                let log = run_mpc(
                    &mpc,
                    WeightPolicy::Fixed(Weights::from_w2(w2)?),
                    &cfg.plant,
                    &wave,
                    &cfg.solver,
                )?;
                let (mae, rmse) = control_deviation(&log.applied_inputs(), &truth.u)?;
                let energy = -log.costs.j1;
                Ok(HorizonRow {
                    seed,
                    horizon_seconds: horizon_s,
                    mae,
                    rmse,
                    mae_normalized: mae / cfg.plant.u_max,
                    energy,
                    energy_ratio: energy / truth_energy,
                    realization_hash: hash,
                })
            })
            .collect();
        for row in per_horizon {
            rows.push(row?);
        }
    }

    let header = "seed,horizon_s,mae,rmse,mae_normalized,energy,energy_ratio,config_hash,realization_hash";
    let lines: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{},{},{},{}",
                r.seed,
                fnum(r.horizon_seconds),
                fnum(r.mae),
                fnum(r.rmse),
                fnum(r.mae_normalized),
                fnum(r.energy),
                fnum(r.energy_ratio),
                cfg.hash,
                r.realization_hash
            )
        })
        .collect();
    write_csv(&out_dir.join("horizon_sweep.csv"), header, &lines)?;
    Ok(rows)
}

/// One row of the damage-budget study.
#[derive(Debug, Clone)]
pub struct BudgetRow {
    pub seed: u64,
    /// Budget as a fraction of the calibrated reference damage.
    pub budget_fraction: f64,
    /// Reference damage: pilot rate extrapolated to the target time.
    pub reference_damage: f64,
    pub budget: f64,
    /// Accumulated damage at the target time.
    pub damage: f64,
    /// Extracted energy at the target time [J].
    pub energy: f64,
    pub within_budget: bool,
    pub realization_hash: u64,
}

/// Pilot calibration: damage accumulation rate of a short fixed-weight run
/// at w2 = 0.5, extrapolated to the target time.
pub fn calibrate_reference_damage(cfg: &Config, wave: &WaveRealization) -> Result<f64> {
    let mut mpc = base_mpc(cfg);
    mpc.total_steps =
        (cfg.experiment.pilot_duration / cfg.discretization.delta).round() as usize;
    let log = run_mpc(
        &mpc,
        WeightPolicy::Fixed(Weights::from_w2(0.5)?),
        &cfg.plant,
        wave,
        &cfg.solver,
    )?;
    let rate = log.costs.j2 / cfg.experiment.pilot_duration;
    Ok(rate * cfg.weight_control.target_time)
}

fn adaptive_run(cfg: &Config, wave: &WaveRealization, budget: f64) -> Result<MpcLog> {
    let mut mpc = base_mpc(cfg);
    mpc.total_steps =
        (cfg.weight_control.target_time / cfg.discretization.delta).round() as usize;
    let mut wc = cfg.weight_control;
    wc.damage_budget = budget;
    let controller = WeightController::from_config(&wc, mpc.sampling_time())?;
    run_mpc(&mpc, WeightPolicy::Adaptive(controller), &cfg.plant, wave, &cfg.solver)
}

/// Run the adaptive controller to the target time under two damage budgets
/// per seed, calibrated from a pilot run on the same realization.
pub fn run_weight_control_study(
    cfg: &Config,
    quick: bool,
    out_dir: &Path,
) -> Result<Vec<BudgetRow>> {
    let cfg = scaled_config(cfg, quick);
    let fractions = [0.3, 0.5];

    let cases: Vec<(u64, f64)> = cfg
        .experiment
        .seeds
        .iter()
        .flat_map(|&s| fractions.iter().map(move |&f| (s, f)))
        .collect();
    let rows: Vec<BudgetRow> = cases
        .par_iter()
        .map(|&(seed, fraction)| {
            let wave = realization_for_seed(&cfg, seed)?;
            let reference = calibrate_reference_damage(&cfg, &wave)?;
            let budget = fraction * reference;
            let log = adaptive_run(&cfg, &wave, budget)?;
            Ok(BudgetRow {
                seed,
                budget_fraction: fraction,
                reference_damage: reference,
                budget,
                damage: log.costs.j2,
                energy: -log.costs.j1,
                within_budget: log.costs.j2 <= 1.03 * budget,
                realization_hash: crate::mpc::realization_hash(&wave),
            })
        })
        .collect::<Result<_>>()?;

    let header = "seed,budget_fraction,reference_damage,budget,damage,energy,within_budget,config_hash,realization_hash";
    let lines: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{},{},{},{}",
                r.seed,
                fnum(r.budget_fraction),
                fnum(r.reference_damage),
                fnum(r.budget),
                fnum(r.damage),
                fnum(r.energy),
                r.within_budget,
                cfg.hash,
                r.realization_hash
            )
        })
        .collect();
    write_csv(&out_dir.join("weight_control.csv"), header, &lines)?;
    Ok(rows)
}

/// One row of the fixed-versus-adaptive comparison.
#[derive(Debug, Clone)]
pub struct PolicyRow {
    pub seed: u64,
    /// "fixed" or "adaptive".
    pub policy: &'static str,
    /// Fixed damage weight; NaN for the adaptive run.
    pub w2: f64,
    pub damage: f64,
    pub energy: f64,
    /// Whether the run stayed within the damage budget.
    pub feasible: bool,
    pub budget: f64,
    pub realization_hash: u64,
}

/// Compare every fixed weight (schedule plus the 0.99/0.01 extremes) with
/// the adaptive controller on the same realization and budget.
pub fn run_fixed_vs_adaptive(cfg: &Config, quick: bool, out_dir: &Path) -> Result<Vec<PolicyRow>> {
    let cfg = scaled_config(cfg, quick);
    let schedule =
        WeightSchedule::evenly_spaced(cfg.weight_control.schedule_size, cfg.weight_control.w2_min, cfg.weight_control.w2_max)?;
    let mut w2_values: Vec<f64> = vec![0.99];
    w2_values.extend_from_slice(schedule.w2_values());
    w2_values.push(0.01);

    let mut rows = Vec::new();
    for &seed in &cfg.experiment.seeds {
        let wave = realization_for_seed(&cfg, seed)?;
        let hash = crate::mpc::realization_hash(&wave);
        let reference = calibrate_reference_damage(&cfg, &wave)?;
        let budget = 0.5 * reference;

        let mut mpc = base_mpc(&cfg);
        mpc.total_steps =
            (cfg.weight_control.target_time / cfg.discretization.delta).round() as usize;

        let fixed: Vec<PolicyRow> = w2_values
            .par_iter()
            .map(|&w2| {
                let log = run_mpc(
                    &mpc,
                    WeightPolicy::Fixed(Weights::from_w2(w2)?),
                    &cfg.plant,
                    &wave,
                    &cfg.solver,
                )?;
                Ok(PolicyRow {
                    seed,
                    policy: "fixed",
                    w2,
                    damage: log.costs.j2,
                    energy: -log.costs.j1,
                    feasible: log.costs.j2 <= budget,
                    budget,
                    realization_hash: hash,
                })
            })
            .collect::<Result<_>>()?;
        rows.extend(fixed);

        let log = adaptive_run(&cfg, &wave, budget)?;
        rows.push(PolicyRow {
            seed,
            policy: "adaptive",
            w2: f64::NAN,
            damage: log.costs.j2,
            energy: -log.costs.j1,
            feasible: log.costs.j2 <= 1.03 * budget,
            budget,
            realization_hash: hash,
        });
    }

    let header = "seed,policy,w2,damage,energy,feasible,budget,config_hash,realization_hash";
    let lines: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{},{},{},{}",
                r.seed,
                r.policy,
                fnum(r.w2),
                fnum(r.damage),
                fnum(r.energy),
                r.feasible,
                fnum(r.budget),
                cfg.hash,
                r.realization_hash
            )
        })
        .collect();
    write_csv(&out_dir.join("fixed_vs_adaptive.csv"), header, &lines)?;
    Ok(rows)
}

/// Output directory from the configuration, optionally overridden.
pub fn output_dir(cfg: &Config, override_dir: Option<&Path>) -> PathBuf {
    override_dir.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(&cfg.experiment.output_dir))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::load_default;

    #[test]
    fn quick_scaling_shrinks_durations() {
        let cfg = load_default();
        let q = scaled_config(&cfg, true);
        approx::assert_relative_eq!(q.mpc.duration, cfg.mpc.duration / 10.0);
        approx::assert_relative_eq!(q.weight_control.target_time, cfg.weight_control.target_time / 10.0);
        assert!(q.discretization.horizon_steps <= 201);
        let same = scaled_config(&cfg, false);
        assert_eq!(same.mpc.duration, cfg.mpc.duration);
    }

    #[test]
    fn csv_rows_are_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = load_default();
        // Tiny study: one seed, two short horizons.
        cfg.experiment.seeds = vec![1];
        cfg.experiment.horizons = vec![20.0, 40.0];
        cfg.experiment.ground_truth_horizon = 60.0;
        let a = run_horizon_sweep(&cfg, true, dir.path()).unwrap();
        let text_a = std::fs::read_to_string(dir.path().join("horizon_sweep.csv")).unwrap();
        let b = run_horizon_sweep(&cfg, true, dir.path()).unwrap();
        let text_b = std::fs::read_to_string(dir.path().join("horizon_sweep.csv")).unwrap();
        assert_eq!(text_a, text_b);
        assert_eq!(a.len(), b.len());
        assert_eq!(a.len(), 2);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.mae, y.mae);
            assert_eq!(x.energy, y.energy);
        }
        assert!(text_a.starts_with("seed,horizon_s,"));
    }

    #[test]
    fn pilot_calibration_is_positive_on_an_energetic_sea() {
        let mut cfg = scaled_config(&load_default(), true);
        cfg.experiment.pilot_duration = 30.0;
        let wave = realization_for_seed(&cfg, 1).unwrap();
        let reference = calibrate_reference_damage(&cfg, &wave).unwrap();
        assert!(reference.is_finite());
        assert!(reference >= 0.0);
    }
}
