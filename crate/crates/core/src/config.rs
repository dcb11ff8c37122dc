//! Configuration loading and validation.
//!
//! All physical, numerical, and experiment parameters come from a TOML file
//! with sections `[plant]`, `[radiation]`, `[wave]`, `[discretization]`,
//! `[solver]`, `[mpc]`, `[weight_control]`, and `[experiment]`. Matrices are
//! nested numeric arrays in row-major order. A documented default set is
//! embedded in the binary.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::waves::WaveSpectrumConfig;

/// The configuration shipped with the toolkit.
pub const DEFAULT_CONFIG: &str = include_str!("../default.toml");

/// Environment variable consulted for the config path when no `--config`
/// flag is given.
pub const CONFIG_ENV_VAR: &str = "DEGWEC_CONFIG";

/// Radiation-force state-space model of order `n`.
///
/// `z_dot = A z + B delta`, radiation torque `C z`, storage `z' Q z / 2`,
/// dissipation rate `z' S z`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiationModel {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    /// Output row `C_r`, stored as a column vector.
    pub c: DVector<f64>,
    pub q: DMatrix<f64>,
    pub s: DMatrix<f64>,
}

impl RadiationModel {
    pub fn order(&self) -> usize {
        self.a.nrows()
    }
}

/// Physical constants of the plant dynamics plus the cost constants.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantParams {
    /// Flap inertia I_h [kg m^2]
    pub inertia: f64,
    /// Hydrostatic stiffness K_h [N m / rad]
    pub hydrostatic_stiffness: f64,
    /// Hydrodynamic damping B_h [N m s / rad]
    pub hydrodynamic_damping: f64,
    /// DEG capacitance coefficient C_0 [F]
    pub capacitance: f64,
    /// Loss resistance R_0 [Ohm]
    pub loss_resistance: f64,
    /// Membrane thickness-related length h_l [m]
    pub membrane_length: f64,
    /// Breakdown field E_bd [V/m]
    pub breakdown_field: f64,
    /// Damage-threshold field E_th [V/m]
    pub threshold_field: f64,
    /// Damage normalization alpha [1/(V^2 s)]
    pub damage_normalization: f64,
    /// Model-validity bound on |theta| [rad]
    pub theta_valid: f64,
    pub radiation: RadiationModel,
    /// Input upper bound (E_bd * h_l)^2 [V^2], derived.
    pub u_max: f64,
    /// Damage threshold (E_th * h_l)^2 [V^2], derived.
    pub u_th: f64,
}

/// Time grid and smoothing parameters shared by the OCP and the MPC.
#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
pub struct DiscretizationConfig {
    /// Integration step Delta [s]
    pub delta: f64,
    /// Knots per prediction horizon (N); the horizon spans (N-1)*Delta.
    pub horizon_steps: usize,
    /// Knots applied per MPC iteration (r); sampling time t_s = r*Delta.
    pub applied_steps: usize,
    /// Softplus sharpness for the smoothed damage integrand [1/V^2]
    pub kappa: f64,
}

impl DiscretizationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::validation("discretization.delta", "must be > 0"));
        }
        if self.horizon_steps < 2 {
            return Err(Error::validation("discretization.horizon_steps", "must be >= 2"));
        }
        if self.applied_steps < 1 || self.applied_steps > self.horizon_steps - 1 {
            return Err(Error::validation(
                "discretization.applied_steps",
                "must satisfy 1 <= r <= N-1",
            ));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::validation("discretization.kappa", "must be > 0"));
        }
        Ok(())
    }

    /// Horizon length in seconds, (N-1)*Delta.
    pub fn horizon_seconds(&self) -> f64 {
        (self.horizon_steps - 1) as f64 * self.delta
    }
}

/// Settings for the box-constrained solver.
#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
pub struct SolverConfig {
    pub stationarity_tol: f64,
    pub max_iterations: usize,
    pub memory: usize,
    pub armijo_c1: f64,
    pub backtrack_factor: f64,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.stationarity_tol > 0.0) {
            return Err(Error::validation("solver.stationarity_tol", "must be > 0"));
        }
        if self.max_iterations == 0 {
            return Err(Error::validation("solver.max_iterations", "must be >= 1"));
        }
        if self.memory == 0 {
            return Err(Error::validation("solver.memory", "must be >= 1"));
        }
        if !(self.armijo_c1 > 0.0 && self.armijo_c1 < 1.0) {
            return Err(Error::validation("solver.armijo_c1", "must be in (0, 1)"));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::validation("solver.backtrack_factor", "must be in (0, 1)"));
        }
        Ok(())
    }
}

/// MPC run settings.
#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
pub struct MpcSettings {
    /// Total run duration [s]
    pub duration: f64,
    /// Pinned first input of the first solve [V^2]
    pub initial_input: f64,
    /// Energy normalization for the scalarized objective [J]
    pub energy_scale: f64,
}

impl MpcSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) {
            return Err(Error::validation("mpc.duration", "must be > 0"));
        }
        if !(self.initial_input >= 0.0) {
            return Err(Error::validation("mpc.initial_input", "must be >= 0"));
        }
        if !(self.energy_scale > 0.0) {
            return Err(Error::validation("mpc.energy_scale", "must be > 0"));
        }
        Ok(())
    }
}

/// Parameters of the adaptive weight-selection heuristic.
#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
pub struct WeightControlConfig {
    pub schedule_size: usize,
    pub w2_min: f64,
    pub w2_max: f64,
    /// Damage budget J_d
    pub damage_budget: f64,
    /// Target time t_bd [s]
    pub target_time: f64,
    /// Slack factor c_d in [0, 1]
    pub slack_factor: f64,
    /// Wall-clock period between weight evaluations [s]
    pub evaluation_period: f64,
    /// Initial weight index i_w (1-based)
    pub initial_index: usize,
}

impl WeightControlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schedule_size < 2 {
            return Err(Error::validation("weight_control.schedule_size", "must be >= 2"));
        }
        if !(self.w2_min > 0.0 && self.w2_max < 1.0 && self.w2_min < self.w2_max) {
            return Err(Error::validation(
                "weight_control.w2_min/w2_max",
                "must satisfy 0 < w2_min < w2_max < 1",
            ));
        }
        if !(self.damage_budget > 0.0) {
            return Err(Error::validation("weight_control.damage_budget", "must be > 0"));
        }
        if !(self.target_time > 0.0) {
            return Err(Error::validation("weight_control.target_time", "must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.slack_factor) {
            return Err(Error::validation("weight_control.slack_factor", "must be in [0, 1]"));
        }
        if !(self.evaluation_period > 0.0) {
            return Err(Error::validation("weight_control.evaluation_period", "must be > 0"));
        }
        if self.initial_index < 1 || self.initial_index > self.schedule_size {
            return Err(Error::validation(
                "weight_control.initial_index",
                "must be in [1, schedule_size]",
            ));
        }
        Ok(())
    }
}

/// Seeds, horizons, and output settings for the scripted experiments.
#[derive(Debug, Clone, Deserialize, PartialEq)]
pub struct ExperimentSettings {
    pub seeds: Vec<u64>,
    /// MPC horizons for the accuracy study [s]
    pub horizons: Vec<f64>,
    /// Ground-truth OCP horizon [s]
    pub ground_truth_horizon: f64,
    /// Duration of the accuracy-study runs [s]
    pub duration: f64,
    /// Duration of the fixed-weight pilot used to calibrate the damage scale [s]
    pub pilot_duration: f64,
    pub output_dir: String,
    pub log_every: usize,
}

impl ExperimentSettings {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::validation("experiment.seeds", "must be non-empty"));
        }
        if self.horizons.is_empty() {
            return Err(Error::validation("experiment.horizons", "must be non-empty"));
        }
        let max_h = self.horizons.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if self.ground_truth_horizon < max_h {
            return Err(Error::validation(
                "experiment.ground_truth_horizon",
                "must be >= max(horizons)",
            ));
        }
        if !(self.duration > 0.0) {
            return Err(Error::validation("experiment.duration", "must be > 0"));
        }
        if !(self.pilot_duration > 0.0) {
            return Err(Error::validation("experiment.pilot_duration", "must be > 0"));
        }
        if self.log_every == 0 {
            return Err(Error::validation("experiment.log_every", "must be >= 1"));
        }
        Ok(())
    }
}

/// Fully validated toolkit configuration. Immutable after load; safe to
/// share read-only across workers.
#[derive(Debug, Clone)]
pub struct Config {
    pub plant: PlantParams,
    pub wave: WaveSpectrumConfig,
    pub discretization: DiscretizationConfig,
    pub solver: SolverConfig,
    pub mpc: MpcSettings,
    pub weight_control: WeightControlConfig,
    pub experiment: ExperimentSettings,
    /// Hash of the source bytes, carried for provenance in outputs.
    pub hash: u64,
}

/// Residuals of the radiation energy-bookkeeping relations.
#[derive(Debug, Clone, Copy)]
pub struct ConsistencyReport {
    /// Frobenius norm of A'Q + QA + 2S.
    pub lyapunov_residual: f64,
    /// Norm of QB - C'.
    pub output_residual: f64,
    pub tol: f64,
    pub pass: bool,
}

// ---------------------------------------------------------------------------
// Raw (serde) layer

#[derive(Deserialize)]
struct RawConfig {
    plant: RawPlant,
    radiation: RawRadiation,
    wave: RawWave,
    discretization: DiscretizationConfig,
    solver: SolverConfig,
    mpc: MpcSettings,
    weight_control: WeightControlConfig,
    experiment: ExperimentSettings,
}

#[derive(Deserialize)]
struct RawPlant {
    inertia: f64,
    hydrostatic_stiffness: f64,
    hydrodynamic_damping: f64,
    capacitance: f64,
    loss_resistance: f64,
    membrane_length: f64,
    breakdown_field: f64,
    threshold_field: f64,
    damage_normalization: f64,
    theta_valid: f64,
}

#[derive(Deserialize)]
struct RawRadiation {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: Vec<f64>,
    q: Vec<Vec<f64>>,
    s: Vec<Vec<f64>>,
    #[serde(default = "default_consistency_tol")]
    consistency_tol: f64,
}

fn default_consistency_tol() -> f64 {
    1e-8
}

#[derive(Deserialize)]
struct RawWave {
    scale: f64,
    shape: f64,
    harmonics: usize,
    omega_offset: f64,
    omega_spacing: f64,
    phase_drift_bound: f64,
    gamma_table: Vec<[f64; 2]>,
    seed: u64,
}

// ---------------------------------------------------------------------------
// Loading

/// Load and validate a configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<Config> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

/// Load the embedded default configuration.
pub fn load_default() -> Config {
    parse_config(DEFAULT_CONFIG).expect("embedded default config must validate")
}

/// Resolve the config source: explicit flag, then the `DEGWEC_CONFIG`
/// environment variable, then the embedded default.
pub fn load(flag: Option<&Path>) -> Result<Config> {
    if let Some(p) = flag {
        return load_config(p);
    }
    if let Ok(p) = std::env::var(CONFIG_ENV_VAR) {
        return load_config(PathBuf::from(p));
    }
    Ok(load_default())
}

/// Parse and validate configuration text.
pub fn parse_config(text: &str) -> Result<Config> {
    let raw: RawConfig = toml::from_str(text)?;

    let radiation = build_radiation(&raw.radiation)?;
    let plant = build_plant(&raw.plant, radiation)?;

    // Radiation energy-bookkeeping relations: a warning with reported
    // residuals, not a hard error.
    let report = validate_radiation_consistency(&plant, raw.radiation.consistency_tol)?;
    if !report.pass {
        eprintln!(
            "warning: radiation model fails the energy-bookkeeping relations \
             (Lyapunov residual {:.3e}, output residual {:.3e}, tol {:.1e}); \
             J1 will not be exact dissipation bookkeeping",
            report.lyapunov_residual, report.output_residual, report.tol
        );
    }

    let wave = WaveSpectrumConfig {
        scale: raw.wave.scale,
        shape: raw.wave.shape,
        harmonics: raw.wave.harmonics,
        omega_offset: raw.wave.omega_offset,
        omega_spacing: raw.wave.omega_spacing,
        phase_drift_bound: raw.wave.phase_drift_bound,
        gamma_table: raw.wave.gamma_table.iter().map(|p| (p[0], p[1])).collect(),
        seed: raw.wave.seed,
    };
    wave.validate()?;

    raw.discretization.validate()?;
    raw.solver.validate()?;
    raw.mpc.validate()?;
    raw.weight_control.validate()?;
    raw.experiment.validate()?;

    let mut hasher = DefaultHasher::new();
    text.hash(&mut hasher);

    Ok(Config {
        plant,
        wave,
        discretization: raw.discretization,
        solver: raw.solver,
        mpc: raw.mpc,
        weight_control: raw.weight_control,
        experiment: raw.experiment,
        hash: hasher.finish(),
    })
}

fn build_matrix(field: &'static str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::validation(field, "matrix must be non-empty"));
    }
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::validation(field, "matrix must be square"));
    }
    let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation(field, "matrix entries must be finite"));
    }
    Ok(m)
}

fn build_radiation(raw: &RawRadiation) -> Result<RadiationModel> {
    let a = build_matrix("radiation.a", &raw.a)?;
    let q = build_matrix("radiation.q", &raw.q)?;
    let s = build_matrix("radiation.s", &raw.s)?;
    let n = a.nrows();
    if raw.b.len() != n || raw.c.len() != n || q.nrows() != n || s.nrows() != n {
        return Err(Error::Dimension(format!(
            "radiation matrices disagree on order: a is {n}x{n}, b has {}, c has {}, \
             q is {}x{}, s is {}x{}",
            raw.b.len(),
            raw.c.len(),
            q.nrows(),
            q.ncols(),
            s.nrows(),
            s.ncols()
        )));
    }
    let model = RadiationModel {
        a,
        b: DVector::from_vec(raw.b.clone()),
        c: DVector::from_vec(raw.c.clone()),
        q,
        s,
    };

    if !is_hurwitz(&model.a) {
        return Err(Error::validation("radiation.a", "radiation matrix not Hurwitz"));
    }
    check_symmetric_psd("radiation.q", &model.q)?;
    check_symmetric_psd("radiation.s", &model.s)?;
    Ok(model)
}

fn is_hurwitz(a: &DMatrix<f64>) -> bool {
    a.clone().complex_eigenvalues().iter().all(|ev| ev.re < 0.0)
}

fn check_symmetric_psd(field: &'static str, m: &DMatrix<f64>) -> Result<()> {
    let scale = m.norm().max(1.0);
    if (m - m.transpose()).norm() > 1e-9 * scale {
        return Err(Error::validation(field, "matrix must be symmetric"));
    }
    let sym = nalgebra::SymmetricEigen::new(m.clone());
    if sym.eigenvalues.iter().any(|&ev| ev < -1e-9 * scale) {
        return Err(Error::validation(field, "matrix must be positive semidefinite"));
    }
    Ok(())
}

fn build_plant(raw: &RawPlant, radiation: RadiationModel) -> Result<PlantParams> {
    let positive: [(&'static str, f64); 7] = [
        ("plant.inertia", raw.inertia),
        ("plant.hydrostatic_stiffness", raw.hydrostatic_stiffness),
        ("plant.capacitance", raw.capacitance),
        ("plant.loss_resistance", raw.loss_resistance),
        ("plant.membrane_length", raw.membrane_length),
        ("plant.damage_normalization", raw.damage_normalization),
        ("plant.theta_valid", raw.theta_valid),
    ];
    for (field, v) in positive {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::validation(field, "must be > 0"));
        }
    }
    if !(raw.hydrodynamic_damping >= 0.0 && raw.hydrodynamic_damping.is_finite()) {
        return Err(Error::validation("plant.hydrodynamic_damping", "must be >= 0"));
    }
    if !(raw.threshold_field >= 0.0) {
        return Err(Error::validation("plant.threshold_field", "must be >= 0"));
    }
    if raw.threshold_field > raw.breakdown_field {
        return Err(Error::validation("plant.threshold_field", "threshold exceeds breakdown"));
    }

    let u_max = (raw.breakdown_field * raw.membrane_length).powi(2);
    let u_th = (raw.threshold_field * raw.membrane_length).powi(2);
    Ok(PlantParams {
        inertia: raw.inertia,
        hydrostatic_stiffness: raw.hydrostatic_stiffness,
        hydrodynamic_damping: raw.hydrodynamic_damping,
        capacitance: raw.capacitance,
        loss_resistance: raw.loss_resistance,
        membrane_length: raw.membrane_length,
        breakdown_field: raw.breakdown_field,
        threshold_field: raw.threshold_field,
        damage_normalization: raw.damage_normalization,
        theta_valid: raw.theta_valid,
        radiation,
        u_max,
        u_th,
    })
}

/// Report the residuals of A'Q + QA = -2S and QB = C' against `tol`
/// (relative to the norms of S and C).
pub fn validate_radiation_consistency(p: &PlantParams, tol: f64) -> Result<ConsistencyReport> {
    let r = &p.radiation;
    let n = r.order();
    if r.q.nrows() != n || r.s.nrows() != n || r.b.len() != n || r.c.len() != n {
        return Err(Error::Dimension("radiation matrices disagree on order".into()));
    }
    let lyap = r.a.transpose() * &r.q + &r.q * &r.a + 2.0 * &r.s;
    let out = &r.q * &r.b - &r.c;
    let lyapunov_residual = lyap.norm();
    let output_residual = out.norm();
    let pass = lyapunov_residual <= tol * r.s.norm().max(f64::MIN_POSITIVE)
        && output_residual <= tol * r.c.norm().max(f64::MIN_POSITIVE);
    Ok(ConsistencyReport { lyapunov_residual, output_residual, tol, pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_loads_with_derived_bounds() {
        let cfg = load_default();
        let expected = (cfg.plant.breakdown_field * cfg.plant.membrane_length).powi(2);
        assert_eq!(cfg.plant.u_max, expected);
        assert!(cfg.plant.u_th < cfg.plant.u_max);
    }

    #[test]
    fn threshold_above_breakdown_rejected() {
        let text = DEFAULT_CONFIG.replace("threshold_field = 3.8e7", "threshold_field = 6.0e7");
        let err = parse_config(&text).unwrap_err();
        match err {
            Error::Validation { field, message } => {
                assert_eq!(field, "plant.threshold_field");
                assert!(message.contains("threshold exceeds breakdown"));
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn non_hurwitz_radiation_rejected() {
        // 2x2 example with an eigenvalue at +0.1: diag(0.1, -1). Oracle: the
        // characteristic polynomial (x - 0.1)(x + 1) has the root +0.1.
        let text = DEFAULT_CONFIG.replace(
            "a = [[-0.5, 1.0], [-1.0, -0.5]]",
            "a = [[0.1, 0.0], [0.0, -1.0]]",
        );
        let err = parse_config(&text).unwrap_err();
        match err {
            Error::Validation { field, message } => {
                assert_eq!(field, "radiation.a");
                assert!(message.contains("not Hurwitz"));
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn scalar_radiation_consistency_pass_and_fail() {
        let mut cfg = load_default();
        // n=1 identity case: residuals are exactly zero.
        cfg.plant.radiation = RadiationModel {
            a: DMatrix::from_element(1, 1, -1.0),
            b: DVector::from_element(1, 1.0),
            c: DVector::from_element(1, 1.0),
            q: DMatrix::from_element(1, 1, 1.0),
            s: DMatrix::from_element(1, 1, 1.0),
        };
        let rep = validate_radiation_consistency(&cfg.plant, 1e-8).unwrap();
        assert_eq!(rep.lyapunov_residual, 0.0);
        assert_eq!(rep.output_residual, 0.0);
        assert!(rep.pass);

        cfg.plant.radiation.s[(0, 0)] = 2.0;
        let rep = validate_radiation_consistency(&cfg.plant, 1e-8).unwrap();
        assert_eq!(rep.lyapunov_residual, 2.0);
        assert!(!rep.pass);
    }

    #[test]
    fn shipped_radiation_model_is_consistent() {
        let cfg = load_default();
        let rep = validate_radiation_consistency(&cfg.plant, 1e-8).unwrap();
        assert!(rep.lyapunov_residual < 1e-10, "residual {}", rep.lyapunov_residual);
        assert!(rep.output_residual < 1e-10, "residual {}", rep.output_residual);
        assert!(rep.pass);
    }

    #[test]
    fn loading_is_deterministic() {
        let a = parse_config(DEFAULT_CONFIG).unwrap();
        let b = parse_config(DEFAULT_CONFIG).unwrap();
        assert_eq!(a.hash, b.hash);
        assert_eq!(a.plant, b.plant);
        assert_eq!(a.discretization, b.discretization);
    }

    #[test]
    fn boundary_fuzz_matches_invariant_predicates() {
        // Fields near their boundaries: acceptance must match the invariant
        // predicate exactly.
        for (field, needle, bad, good) in [
            ("delta", "delta = 0.1", "delta = 0.0", "delta = 1.0e-9"),
            ("kappa", "kappa = 4.0e-6", "kappa = 0.0", "kappa = 1.0e-12"),
            (
                "applied_steps",
                "applied_steps = 10",
                "applied_steps = 601",
                "applied_steps = 600",
            ),
        ] {
            let t = DEFAULT_CONFIG.replace(needle, bad);
            assert!(parse_config(&t).is_err(), "{field} boundary violation accepted");
            let t = DEFAULT_CONFIG.replace(needle, good);
            assert!(parse_config(&t).is_ok(), "{field} valid boundary rejected");
        }
    }
}
