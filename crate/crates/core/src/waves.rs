//! Stochastic sea excitation from a Bretschneider spectrum.
//!
//! A realization is a finite superposition of harmonics whose amplitudes
//! follow the spectral density and whose phases drift slowly (linearly in
//! time) to break periodicity. The excitation torque is
//! `d(t) = sum_i Gamma_F(omega_i) A_i sin(omega_i t + phi_i(t))`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Spectrum and synthesis parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveSpectrumConfig {
    /// Bretschneider scale A_B
    pub scale: f64,
    /// Bretschneider shape B_B [s^-4]
    pub shape: f64,
    /// Number of harmonics n_f
    pub harmonics: usize,
    /// Frequency offset omega_0 [rad/s]; omega_i = omega_0 + i*spacing
    pub omega_offset: f64,
    /// Constant frequency spacing Delta-omega [rad/s]
    pub omega_spacing: f64,
    /// Phase drift rates are uniform on [-bound, bound] [rad/s]
    pub phase_drift_bound: f64,
    /// Excitation coefficient Gamma_F(omega) as (omega, value) pairs with
    /// linear interpolation [N m per m of wave amplitude]
    pub gamma_table: Vec<(f64, f64)>,
    pub seed: u64,
}

impl WaveSpectrumConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0) {
            return Err(Error::validation("wave.scale", "must be > 0"));
        }
        if !(self.shape > 0.0) {
            return Err(Error::validation("wave.shape", "must be > 0"));
        }
        if self.harmonics < 1 {
            return Err(Error::validation("wave.harmonics", "must be >= 1"));
        }
        if !(self.omega_spacing > 0.0) {
            return Err(Error::validation("wave.omega_spacing", "must be > 0"));
        }
        if !(self.omega_offset >= 0.0) {
            return Err(Error::validation("wave.omega_offset", "must be >= 0"));
        }
        if !(self.phase_drift_bound >= 0.0) {
            return Err(Error::validation("wave.phase_drift_bound", "must be >= 0"));
        }
        if self.gamma_table.len() < 2 {
            return Err(Error::validation("wave.gamma_table", "needs at least two rows"));
        }
        if self.gamma_table.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::validation(
                "wave.gamma_table",
                "frequencies must be strictly increasing",
            ));
        }
        if self.gamma_table.iter().any(|&(w, g)| !w.is_finite() || !g.is_finite()) {
            return Err(Error::validation("wave.gamma_table", "entries must be finite"));
        }
        let lo = self.omega_offset + self.omega_spacing;
        let hi = self.omega_offset + self.harmonics as f64 * self.omega_spacing;
        let (t_lo, t_hi) = (self.gamma_table[0].0, self.gamma_table.last().unwrap().0);
        if t_lo > lo || t_hi < hi {
            return Err(Error::validation(
                "wave.gamma_table",
                format!("must cover [{lo:.4}, {hi:.4}] rad/s, covers [{t_lo:.4}, {t_hi:.4}]"),
            ));
        }
        Ok(())
    }

    /// Frequency of the i-th harmonic (1-based).
    pub fn omega(&self, i: usize) -> f64 {
        self.omega_offset + i as f64 * self.omega_spacing
    }
}

/// A concrete sampled excitation; immutable after creation.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveRealization {
    /// Strictly increasing frequencies [rad/s]
    pub frequencies: Vec<f64>,
    /// Harmonic amplitudes A_i = sqrt(2 S_B(omega_i) Delta-omega) [m]
    pub amplitudes: Vec<f64>,
    /// Initial phases [rad]
    pub phases: Vec<f64>,
    /// Linear phase drift rates [rad/s]
    pub drift_rates: Vec<f64>,
    /// Excitation coefficients Gamma_F(omega_i)
    pub gammas: Vec<f64>,
    pub seed: u64,
}

/// Bretschneider spectral density `S_B(omega) = A_B w^-5 exp(-B_B w^-4)`.
pub fn bretschneider_density(omega: f64, scale: f64, shape: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::validation("omega", "must be > 0"));
    }
    Ok(scale * omega.powi(-5) * (-shape * omega.powi(-4)).exp())
}

/// Linear interpolation in the gamma table.
fn interpolate_gamma(table: &[(f64, f64)], omega: f64) -> f64 {
    match table.iter().position(|&(w, _)| w >= omega) {
        Some(0) => table[0].1,
        Some(j) => {
            let (w0, g0) = table[j - 1];
            let (w1, g1) = table[j];
            let c = (omega - w0) / (w1 - w0);
            (1.0 - c) * g0 + c * g1
        }
        None => table.last().unwrap().1,
    }
}

/// Draw a realization: amplitudes from the spectrum, phases uniform on
/// [0, 2pi), drift rates uniform on [-bound, bound]. Deterministic given
/// the seed in the config.
pub fn realize_wave(cfg: &WaveSpectrumConfig) -> Result<WaveRealization> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.harmonics;
    let mut frequencies = Vec::with_capacity(n);
    let mut amplitudes = Vec::with_capacity(n);
    let mut phases = Vec::with_capacity(n);
    let mut drift_rates = Vec::with_capacity(n);
    let mut gammas = Vec::with_capacity(n);
    for i in 1..=n {
        let omega = cfg.omega(i);
        let density = bretschneider_density(omega, cfg.scale, cfg.shape)?;
        frequencies.push(omega);
        amplitudes.push((2.0 * density * cfg.omega_spacing).sqrt());
        phases.push(rng.gen_range(0.0..std::f64::consts::TAU));
        let rho = cfg.phase_drift_bound;
        drift_rates.push(if rho > 0.0 { rng.gen_range(-rho..=rho) } else { 0.0 });
        gammas.push(interpolate_gamma(&cfg.gamma_table, omega));
    }
    Ok(WaveRealization { frequencies, amplitudes, phases, drift_rates, gammas, seed: cfg.seed })
}

/// Excitation torque d(t) [N m]; pure in `t`.
pub fn excitation_torque(w: &WaveRealization, t: f64) -> f64 {
    let mut d = 0.0;
    for i in 0..w.frequencies.len() {
        let phase = w.frequencies[i] * t + w.phases[i] + w.drift_rates[i] * t;
        d += w.gammas[i] * w.amplitudes[i] * phase.sin();
    }
    d
}

/// Sample the torque on a uniform knot grid starting at knot `k0`.
pub fn sample_excitation(w: &WaveRealization, k0: usize, count: usize, delta: f64) -> Vec<f64> {
    (0..count).map(|j| excitation_torque(w, (k0 + j) as f64 * delta)).collect()
}

/// Frequency of the largest-amplitude harmonic; ties go to the lowest index.
pub fn dominant_frequency(w: &WaveRealization) -> f64 {
    let mut best = 0;
    for i in 1..w.amplitudes.len() {
        if w.amplitudes[i] > w.amplitudes[best] {
            best = i;
        }
    }
    w.frequencies[best]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn default_wave_config() -> WaveSpectrumConfig {
        crate::config::load_default().wave
    }

    #[test]
    fn density_decays_at_high_frequency() {
        let hi = bretschneider_density(100.0, 0.0032, 0.1054).unwrap();
        let lo = bretschneider_density(1.0, 0.0032, 0.1054).unwrap();
        // Pure w^-5 falloff: two decades in frequency are ten decades in
        // density.
        assert!(hi < 1.2e-10 * lo);
        assert!(bretschneider_density(0.0, 0.0032, 0.1054).is_err());
    }

    #[test]
    fn density_peak_matches_grid_search() {
        // Oracle: dense grid search for the maximum of S_B.
        let (a_b, b_b) = (0.0032, 0.1054);
        let mut best = (0.0, f64::NEG_INFINITY);
        let mut w = 0.01;
        while w < 5.0 {
            let s = bretschneider_density(w, a_b, b_b).unwrap();
            if s > best.1 {
                best = (w, s);
            }
            w += 1e-4;
        }
        let peak = (4.0 * b_b / 5.0).powf(0.25);
        assert_relative_eq!(peak, 0.5389, max_relative = 1e-3);
        assert_relative_eq!(best.0, peak, max_relative = 1e-3);
        let s_peak = bretschneider_density(peak, a_b, b_b).unwrap();
        assert_relative_eq!(s_peak, 0.0202, max_relative = 1e-2);
        // Stationarity of the analytic peak.
        for eps in [0.99, 1.01] {
            assert!(bretschneider_density(peak * eps, a_b, b_b).unwrap() < s_peak);
        }
    }

    #[test]
    fn realization_is_deterministic() {
        let cfg = default_wave_config();
        let a = realize_wave(&cfg).unwrap();
        let b = realize_wave(&cfg).unwrap();
        assert_eq!(a, b);
        for t in [0.0, 1.7, 100.3] {
            assert_eq!(excitation_torque(&a, t), excitation_torque(&b, t));
        }
    }

    #[test]
    fn zero_drift_matches_independent_sine_sum() {
        let mut cfg = default_wave_config();
        cfg.phase_drift_bound = 0.0;
        let w = realize_wave(&cfg).unwrap();
        assert!(w.drift_rates.iter().all(|&r| r == 0.0));
        // Independent recomputation of the constant-phase sum.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let t: f64 = rng.gen_range(0.0..500.0);
            let oracle: f64 = (0..w.frequencies.len())
                .map(|i| {
                    w.gammas[i] * w.amplitudes[i] * (w.frequencies[i] * t + w.phases[i]).sin()
                })
                .sum();
            assert_relative_eq!(excitation_torque(&w, t), oracle, max_relative = 1e-12);
        }
    }

    #[test]
    fn amplitude_formula_holds() {
        let cfg = default_wave_config();
        let w = realize_wave(&cfg).unwrap();
        for i in 0..w.frequencies.len() {
            let s = bretschneider_density(w.frequencies[i], cfg.scale, cfg.shape).unwrap();
            assert_relative_eq!(
                w.amplitudes[i] * w.amplitudes[i],
                2.0 * s * cfg.omega_spacing,
                max_relative = 1e-12
            );
        }
        // Spot value: S_B = 0.02 at spacing 0.0628 gives A ~= 0.0501.
        assert_relative_eq!((2.0f64 * 0.02 * 0.0628).sqrt(), 0.0501, max_relative = 1e-3);
    }

    #[test]
    fn torque_respects_triangle_inequality_bound() {
        let cfg = default_wave_config();
        let w = realize_wave(&cfg).unwrap();
        let bound: f64 = (0..w.frequencies.len())
            .map(|i| (w.gammas[i] * w.amplitudes[i]).abs())
            .sum();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let t: f64 = rng.gen_range(0.0..3000.0);
            assert!(excitation_torque(&w, t).abs() <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn torque_is_lipschitz_continuous() {
        let cfg = default_wave_config();
        let w = realize_wave(&cfg).unwrap();
        let lip: f64 = (0..w.frequencies.len())
            .map(|i| {
                (w.gammas[i] * w.amplitudes[i]).abs()
                    * (w.frequencies[i] + cfg.phase_drift_bound)
            })
            .sum();
        let h = 1e-3;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..1000 {
            let t: f64 = rng.gen_range(0.0..1000.0);
            let diff = (excitation_torque(&w, t + h) - excitation_torque(&w, t)).abs();
            assert!(diff <= lip * h * (1.0 + 1e-9));
        }
    }

    #[test]
    fn drift_is_slow_in_default_config() {
        let cfg = default_wave_config();
        let w = realize_wave(&cfg).unwrap();
        let min_omega = w.frequencies[0];
        assert!(w.drift_rates.iter().all(|r| r.abs() <= cfg.phase_drift_bound));
        assert!(cfg.phase_drift_bound / min_omega <= 0.02);
    }

    #[test]
    fn dominant_frequency_argmax_and_ties() {
        let w = WaveRealization {
            frequencies: vec![0.5, 0.6, 0.7],
            amplitudes: vec![1.0, 3.0, 2.0],
            phases: vec![0.0; 3],
            drift_rates: vec![0.0; 3],
            gammas: vec![1.0; 3],
            seed: 0,
        };
        assert_eq!(dominant_frequency(&w), 0.6);
        let tie = WaveRealization { amplitudes: vec![2.0, 2.0, 2.0], ..w };
        assert_eq!(dominant_frequency(&tie), 0.5);
    }

    #[test]
    fn dominant_frequency_near_analytic_peak() {
        let cfg = default_wave_config();
        let w = realize_wave(&cfg).unwrap();
        let peak = (4.0 * cfg.shape / 5.0).powf(0.25);
        assert!((dominant_frequency(&w) - peak).abs() <= cfg.omega_spacing);
    }

    #[test]
    fn single_harmonic_sine_identity_and_zero_amplitudes() {
        let w = WaveRealization {
            frequencies: vec![1.0],
            amplitudes: vec![2.0],
            phases: vec![0.0],
            drift_rates: vec![0.0],
            gammas: vec![1.0],
            seed: 0,
        };
        assert_relative_eq!(
            excitation_torque(&w, std::f64::consts::FRAC_PI_2),
            2.0,
            max_relative = 1e-12
        );
        let zero = WaveRealization { amplitudes: vec![0.0], ..w };
        for t in [0.0, 1.0, 10.0] {
            assert_eq!(excitation_torque(&zero, t), 0.0);
        }
    }

    proptest::proptest! {
        // The torque can never exceed the sum of the per-harmonic
        // amplitude-gamma products, at any time and for any seed.
        #[test]
        fn torque_is_bounded_by_total_amplitude(seed in 0u64..1000, t in 0.0..1.0e4f64) {
            let mut cfg = crate::config::load_default().wave;
            cfg.seed = seed;
            let w = realize_wave(&cfg).unwrap();
            let bound: f64 = w
                .amplitudes
                .iter()
                .zip(&w.gammas)
                .map(|(a, g)| (a * g).abs())
                .sum();
            proptest::prop_assert!(excitation_torque(&w, t).abs() <= bound * (1.0 + 1e-12));
        }
    }
}
