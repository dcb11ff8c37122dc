//! Receding-horizon loop: at each sampling instant solve an OCP on the
//! shifted window from the current extended state, apply the first `r`
//! knots to the plant in exact damage mode, warm-start the next solve with
//! the shifted tail, and log everything needed to replay the run.

use std::hash::{Hash, Hasher};

use crate::config::{Config, PlantParams, SolverConfig};
use crate::error::{Error, Result};
use crate::objectives::{CostPair, DamageMode, Weights};
use crate::ocp::{solve, OcpInstance, SolveResult};
use crate::optim::Status;
use crate::plant::{simulate, ExtendedState};
use crate::waves::{sample_excitation, WaveRealization};
use crate::weight_adapt::WeightController;

/// Receding-horizon run settings.
#[derive(Debug, Clone)]
pub struct MpcConfig {
    /// Knots per prediction horizon (N).
    pub horizon_steps: usize,
    /// Knots applied per iteration (r); sampling time is r * step.
    pub applied_steps: usize,
    /// Total number of integration steps in the run.
    pub total_steps: usize,
    /// Integration step [s].
    pub step: f64,
    /// Softplus sharpness used inside the solver.
    pub kappa: f64,
    /// Energy normalization in the scalarized objective [J].
    pub energy_scale: f64,
    pub initial_state: ExtendedState,
    /// Pinned first input of the first solve [V^2].
    pub initial_input: f64,
}

impl MpcConfig {
    /// Derive a run from the loaded configuration.
    pub fn from_config(cfg: &Config) -> Self {
        let d = &cfg.discretization;
        MpcConfig {
            horizon_steps: d.horizon_steps,
            applied_steps: d.applied_steps,
            total_steps: (cfg.mpc.duration / d.delta).round() as usize,
            step: d.delta,
            kappa: d.kappa,
            energy_scale: cfg.mpc.energy_scale,
            initial_state: ExtendedState::zero(cfg.plant.radiation.order()),
            initial_input: cfg.mpc.initial_input,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon_steps < 2 {
            return Err(Error::validation("mpc.horizon_steps", "must be >= 2"));
        }
        if self.applied_steps < 1 || self.applied_steps > self.horizon_steps - 1 {
            return Err(Error::validation("mpc.applied_steps", "must satisfy 1 <= r <= N-1"));
        }
        if self.total_steps < 1 {
            return Err(Error::validation("mpc.total_steps", "must be >= 1"));
        }
        if !(self.step > 0.0) {
            return Err(Error::validation("mpc.step", "must be > 0"));
        }
        if !(self.initial_input >= 0.0) {
            return Err(Error::validation("mpc.initial_input", "must be >= 0"));
        }
        Ok(())
    }

    /// Sampling time t_s = r * step [s].
    pub fn sampling_time(&self) -> f64 {
        self.applied_steps as f64 * self.step
    }
}

/// Weighting used by the loop: fixed, or driven by the adaptive controller.
#[derive(Debug, Clone)]
pub enum WeightPolicy {
    Fixed(Weights),
    Adaptive(WeightController),
}

impl WeightPolicy {
    fn current(&self) -> Weights {
        match self {
            WeightPolicy::Fixed(w) => *w,
            WeightPolicy::Adaptive(c) => c.current_weights(),
        }
    }

    fn index(&self) -> Option<usize> {
        match self {
            WeightPolicy::Fixed(_) => None,
            WeightPolicy::Adaptive(c) => Some(c.index()),
        }
    }
}

/// One applied knot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpcStepRecord {
    pub t: f64,
    /// Applied input knot [V^2].
    pub u: f64,
    pub theta: f64,
    pub delta: f64,
    pub upsilon1: f64,
    pub upsilon2: f64,
    /// Active weight index (adaptive runs only).
    pub weight_index: Option<usize>,
}

/// Diagnostics of one OCP solve.
#[derive(Debug, Clone, Copy)]
pub struct SolveRecord {
    pub t: f64,
    pub w2: f64,
    pub cost: f64,
    pub iterations: usize,
    pub stationarity: f64,
    pub status: Status,
    /// True when the loop held the previous input instead of applying the
    /// solve result.
    pub held: bool,
}

/// One weight-controller evaluation.
#[derive(Debug, Clone, Copy)]
pub struct ControllerRecord {
    pub t: f64,
    pub damage_rate: f64,
    pub predicted_damage: f64,
    pub index: usize,
    pub skipped: bool,
}

/// Time-stamped record of a full receding-horizon run.
#[derive(Debug, Clone)]
pub struct MpcLog {
    pub steps: Vec<MpcStepRecord>,
    pub solves: Vec<SolveRecord>,
    pub controller: Vec<ControllerRecord>,
    /// Endpoint costs of the applied trajectory (exact damage mode).
    pub costs: CostPair,
    /// Hash of the wave realization driving the run.
    pub realization_hash: u64,
}

impl MpcLog {
    /// Applied input knots in time order.
    pub fn applied_inputs(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.u).collect()
    }
}

/// Hash a realization for provenance checks across runs.
pub fn realization_hash(w: &WaveRealization) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    w.seed.hash(&mut h);
    for v in w
        .frequencies
        .iter()
        .chain(&w.amplitudes)
        .chain(&w.phases)
        .chain(&w.drift_rates)
        .chain(&w.gammas)
    {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

/// Run the receding-horizon loop with perfect excitation preview.
pub fn run_mpc(
    cfg: &MpcConfig,
    mut policy: WeightPolicy,
    plant: &PlantParams,
    wave: &WaveRealization,
    solver: &SolverConfig,
) -> Result<MpcLog> {
    cfg.validate()?;
    let n = cfg.horizon_steps;
    let mut xi = cfg.initial_state.clone();
    let mut pinned_input = cfg.initial_input.clamp(0.0, plant.u_max);
    let mut warm: Option<Vec<f64>> = None;

    let mut steps = Vec::with_capacity(cfg.total_steps + 1);
    let mut solves = Vec::new();
    let mut controller_records = Vec::new();

    let mut k = 0usize;
    while k < cfg.total_steps {
        let apply = cfg.applied_steps.min(cfg.total_steps - k);
        let weights = policy.current();
        let instance = OcpInstance {
            plant: plant.clone(),
            xi0: xi.clone(),
            u0: pinned_input,
            d: sample_excitation(wave, k, n, cfg.step),
            weights,
            step: cfg.step,
            kappa: cfg.kappa,
            energy_scale: cfg.energy_scale,
        };

        let t_now = k as f64 * cfg.step;
        let solved: Option<SolveResult> = match solve(&instance, warm.as_deref(), solver) {
            Ok(res) if res.status != Status::Diverged => Some(res),
            Ok(res) => {
                solves.push(SolveRecord {
                    t: t_now,
                    w2: weights.w2,
                    cost: res.cost,
                    iterations: res.iterations,
                    stationarity: res.stationarity,
                    status: res.status,
                    held: true,
                });
                None
            }
            Err(_) => None,
        };
        let plan: Vec<f64> = match &solved {
            Some(res) => {
                solves.push(SolveRecord {
                    t: t_now,
                    w2: weights.w2,
                    cost: res.cost,
                    iterations: res.iterations,
                    stationarity: res.stationarity,
                    status: res.status,
                    held: false,
                });
                res.u.clone()
            }
            // Failure policy: hold the pinned input for this interval.
            None => vec![pinned_input; n],
        };

        // Apply the first knots to the true plant in exact damage mode.
        let d_true = sample_excitation(wave, k, apply + 1, cfg.step);
        let trajectory =
            simulate(&xi, &plan[..=apply], &d_true, cfg.step, plant, DamageMode::Exact)?;

        let index = policy.index();
        for j in 0..apply {
            let s = &trajectory[j];
            steps.push(MpcStepRecord {
                t: (k + j) as f64 * cfg.step,
                u: plan[j],
                theta: s.theta,
                delta: s.delta,
                upsilon1: s.upsilon1,
                upsilon2: s.upsilon2,
                weight_index: index,
            });
        }

        xi = trajectory[apply].clone();
        pinned_input = plan[apply];
        let actuated = plan[..apply].iter().any(|&u| u > 1e-6 * plant.u_max);
        if let WeightPolicy::Adaptive(controller) = &mut policy {
            let t_end = (k + apply) as f64 * cfg.step;
            if let Some(eval) = controller.observe(t_end, xi.upsilon2, actuated) {
                controller_records.push(ControllerRecord {
                    t: eval.t,
                    damage_rate: eval.damage_rate,
                    predicted_damage: eval.predicted_damage,
                    index: eval.index,
                    skipped: eval.skipped,
                });
            }
        }

        warm = Some((0..n).map(|i| plan[(i + apply).min(n - 1)]).collect());
        k += apply;
    }

    // Final knot: the state at the end of the run and the input that would
    // be pinned next.
    steps.push(MpcStepRecord {
        t: cfg.total_steps as f64 * cfg.step,
        u: pinned_input,
        theta: xi.theta,
        delta: xi.delta,
        upsilon1: xi.upsilon1,
        upsilon2: xi.upsilon2,
        weight_index: policy.index(),
    });

    let costs = CostPair { j1: xi.upsilon1, j2: xi.upsilon2 };
    Ok(MpcLog {
        steps,
        solves,
        controller: controller_records,
        costs,
        realization_hash: realization_hash(wave),
    })
}

/// Mean absolute error and root-mean-square error between an applied input
/// sequence and a ground-truth sequence over the same knots.
pub fn control_deviation(applied: &[f64], ground_truth: &[f64]) -> Result<(f64, f64)> {
    if applied.len() != ground_truth.len() {
        return Err(Error::Length { expected: ground_truth.len(), actual: applied.len() });
    }
    if applied.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let n = applied.len() as f64;
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    for (a, b) in applied.iter().zip(ground_truth) {
        let e = a - b;
        abs_sum += e.abs();
        sq_sum += e * e;
    }
    Ok((abs_sum / n, (sq_sum / n).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::load_default;
    use crate::objectives::discrete_costs;
    use crate::waves::realize_wave;

    #[test]
    fn deviation_metrics() {
        let a = vec![1.0, 2.0, 3.0];
        assert_eq!(control_deviation(&a, &a).unwrap(), (0.0, 0.0));
        let b: Vec<f64> = a.iter().map(|v| v + 0.5).collect();
        let (mae, rmse) = control_deviation(&b, &a).unwrap();
        approx::assert_relative_eq!(mae, 0.5);
        approx::assert_relative_eq!(rmse, 0.5);
        assert!(control_deviation(&a, &a[..2]).is_err());
    }

    #[test]
    fn calm_sea_keeps_the_plant_at_rest() {
        let cfg = load_default();
        let mut wave = realize_wave(&cfg.wave).unwrap();
        wave.amplitudes.iter_mut().for_each(|a| *a = 0.0);
        let mpc = MpcConfig {
            horizon_steps: 31,
            applied_steps: 10,
            total_steps: 60,
            step: cfg.discretization.delta,
            kappa: cfg.discretization.kappa,
            energy_scale: cfg.mpc.energy_scale,
            initial_state: ExtendedState::zero(cfg.plant.radiation.order()),
            initial_input: 0.0,
        };
        let log = run_mpc(
            &mpc,
            WeightPolicy::Fixed(Weights::from_w2(0.5).unwrap()),
            &cfg.plant,
            &wave,
            &cfg.solver,
        )
        .unwrap();
        for s in &log.steps {
            assert!(s.u.abs() < 1e-9 * cfg.plant.u_max);
            assert_eq!(s.theta, 0.0);
        }
        assert_eq!(log.costs.j2, 0.0);
    }

    #[test]
    fn degenerate_horizon_equals_single_ocp_solve() {
        let cfg = load_default();
        let wave = realize_wave(&cfg.wave).unwrap();
        let n = 61;
        let mpc = MpcConfig {
            horizon_steps: n,
            applied_steps: n - 1,
            total_steps: n - 1,
            step: cfg.discretization.delta,
            kappa: cfg.discretization.kappa,
            energy_scale: cfg.mpc.energy_scale,
            initial_state: ExtendedState::zero(cfg.plant.radiation.order()),
            initial_input: 0.0,
        };
        let weights = Weights::from_w2(0.3).unwrap();
        let log =
            run_mpc(&mpc, WeightPolicy::Fixed(weights), &cfg.plant, &wave, &cfg.solver).unwrap();

        let instance = OcpInstance {
            plant: cfg.plant.clone(),
            xi0: ExtendedState::zero(cfg.plant.radiation.order()),
            u0: 0.0,
            d: sample_excitation(&wave, 0, n, cfg.discretization.delta),
            weights,
            step: cfg.discretization.delta,
            kappa: cfg.discretization.kappa,
            energy_scale: cfg.mpc.energy_scale,
        };
        let res = solve(&instance, None, &cfg.solver).unwrap();
        assert_eq!(log.applied_inputs(), res.u);
    }

    #[test]
    fn log_replays_to_identical_damage() {
        let cfg = load_default();
        let wave = realize_wave(&cfg.wave).unwrap();
        let mpc = MpcConfig {
            horizon_steps: 101,
            applied_steps: 10,
            total_steps: 100,
            step: cfg.discretization.delta,
            kappa: cfg.discretization.kappa,
            energy_scale: cfg.mpc.energy_scale,
            initial_state: ExtendedState::zero(cfg.plant.radiation.order()),
            initial_input: 0.0,
        };
        let log = run_mpc(
            &mpc,
            WeightPolicy::Fixed(Weights::from_w2(0.2).unwrap()),
            &cfg.plant,
            &wave,
            &cfg.solver,
        )
        .unwrap();

        // Replay the applied inputs through the plant.
        let u = log.applied_inputs();
        let d = sample_excitation(&wave, 0, u.len(), cfg.discretization.delta);
        let traj = simulate(
            &ExtendedState::zero(cfg.plant.radiation.order()),
            &u,
            &d,
            cfg.discretization.delta,
            &cfg.plant,
            DamageMode::Exact,
        )
        .unwrap();
        let replayed = discrete_costs(&traj).unwrap();
        assert!((replayed.j2 - log.costs.j2).abs() <= 1e-12);
        assert!((replayed.j1 - log.costs.j1).abs() <= 1e-12 * log.costs.j1.abs().max(1.0));

        // Time strictly increasing, inputs in the box, damage non-decreasing.
        for w in log.steps.windows(2) {
            assert!(w[1].t > w[0].t);
            assert!(w[1].upsilon2 >= w[0].upsilon2 - 1e-12);
        }
        assert!(log.steps.iter().all(|s| (0.0..=cfg.plant.u_max).contains(&s.u)));
    }

    #[test]
    fn bang_bang_character_at_small_damage_weight() {
        let cfg = load_default();
        let wave = realize_wave(&cfg.wave).unwrap();
        let mpc = MpcConfig {
            horizon_steps: 201,
            applied_steps: 10,
            total_steps: 300,
            step: cfg.discretization.delta,
            kappa: cfg.discretization.kappa,
            energy_scale: cfg.mpc.energy_scale,
            initial_state: ExtendedState::zero(cfg.plant.radiation.order()),
            initial_input: 0.0,
        };
        let log = run_mpc(
            &mpc,
            WeightPolicy::Fixed(Weights::from_w2(0.01).unwrap()),
            &cfg.plant,
            &wave,
            &cfg.solver,
        )
        .unwrap();
        let u_max = cfg.plant.u_max;
        let near_bound = log
            .steps
            .iter()
            .filter(|s| s.u <= 0.05 * u_max || s.u >= 0.95 * u_max)
            .count();
        let fraction = near_bound as f64 / log.steps.len() as f64;
        assert!(fraction > 0.5, "bang-bang fraction {fraction}");
    }
}
