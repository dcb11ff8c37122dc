//! Adaptive weight selection: monitor the damage accumulation rate over a
//! trailing window, project it to the target time, and step the weight index
//! to keep the predicted damage inside the budget.
//!
//! Index orientation: index 1 carries the LARGEST damage weight w2 and the
//! last index the smallest, so decrementing the index weights damage more
//! heavily.

use std::collections::VecDeque;

use crate::config::WeightControlConfig;
use crate::error::{Error, Result};
use crate::objectives::Weights;

/// Ordered list of weight pairs; w2 strictly decreasing in index.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSchedule {
    w2: Vec<f64>,
}

impl WeightSchedule {
    /// Evenly spaced w2 values between `w2_min` and `w2_max`, ordered so
    /// that index 1 holds `w2_max`.
    pub fn evenly_spaced(count: usize, w2_min: f64, w2_max: f64) -> Result<Self> {
        if count < 2 {
            return Err(Error::validation("schedule", "needs at least two entries"));
        }
        if !(w2_min > 0.0 && w2_max < 1.0 && w2_min < w2_max) {
            return Err(Error::validation("schedule", "requires 0 < w2_min < w2_max < 1"));
        }
        let spacing = (w2_max - w2_min) / (count - 1) as f64;
        Ok(WeightSchedule {
            w2: (0..count).map(|i| w2_max - i as f64 * spacing).collect(),
        })
    }

    /// The 15 evenly distributed weights between 0.05 and 0.95.
    pub fn default_schedule() -> Self {
        Self::evenly_spaced(15, 0.05, 0.95).expect("static arguments are valid")
    }

    pub fn len(&self) -> usize {
        self.w2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w2.is_empty()
    }

    /// Weights at 1-based index.
    pub fn weights(&self, index: usize) -> Weights {
        let w2 = self.w2[index - 1];
        Weights { w1: 1.0 - w2, w2 }
    }

    pub fn w2_values(&self) -> &[f64] {
        &self.w2
    }
}

/// One damage sample per MPC sampling step.
#[derive(Debug, Clone, Copy)]
struct Sample {
    t: f64,
    damage: f64,
    actuated: bool,
}

/// Result of one controller evaluation.
#[derive(Debug, Clone, Copy)]
pub struct Evaluation {
    pub t: f64,
    /// Estimated damage accumulation rate [1/s].
    pub damage_rate: f64,
    /// Damage projected to the target time.
    pub predicted_damage: f64,
    /// Index after the evaluation.
    pub index: usize,
    /// Whether the window was skipped for lack of actuation.
    pub skipped: bool,
}

/// Average damage rate over a window of (t, damage) samples: endpoint
/// difference over the spanned time.
pub fn estimate_damage_rate(window: &[(f64, f64)]) -> Option<f64> {
    let first = window.first()?;
    let last = window.last()?;
    let span = last.0 - first.0;
    if span <= 0.0 {
        return None;
    }
    Some((last.1 - first.1) / span)
}

/// Weight-controller state: the current index, the trailing damage window,
/// and the relax cooldown.
#[derive(Debug, Clone)]
pub struct WeightController {
    schedule: WeightSchedule,
    index: usize,
    /// Damage budget J_d.
    damage_budget: f64,
    /// Target time t_bd [s].
    target_time: f64,
    /// Slack factor c_d.
    slack: f64,
    /// Sampling steps per evaluation window (N_p).
    window_steps: usize,
    window: VecDeque<Sample>,
    /// Evaluations remaining before an index increase is allowed again.
    cooldown: usize,
}

impl WeightController {
    pub fn new(
        schedule: WeightSchedule,
        initial_index: usize,
        damage_budget: f64,
        target_time: f64,
        slack: f64,
        window_steps: usize,
    ) -> Result<Self> {
        if initial_index < 1 || initial_index > schedule.len() {
            return Err(Error::validation("initial_index", "outside [1, schedule length]"));
        }
        if !(0.0..=1.0).contains(&slack) {
            return Err(Error::validation("slack", "must be in [0, 1]"));
        }
        if window_steps == 0 {
            return Err(Error::validation("window_steps", "must be >= 1"));
        }
        Ok(WeightController {
            schedule,
            index: initial_index,
            damage_budget,
            target_time,
            slack,
            window_steps,
            window: VecDeque::new(),
            cooldown: 0,
        })
    }

    /// Build from the config section; the window length is derived from the
    /// wall-clock evaluation period and the sampling time.
    pub fn from_config(cfg: &WeightControlConfig, sampling_time: f64) -> Result<Self> {
        let schedule = WeightSchedule::evenly_spaced(cfg.schedule_size, cfg.w2_min, cfg.w2_max)?;
        let window_steps = (cfg.evaluation_period / sampling_time).round().max(1.0) as usize;
        WeightController::new(
            schedule,
            cfg.initial_index,
            cfg.damage_budget,
            cfg.target_time,
            cfg.slack_factor,
            window_steps,
        )
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn schedule(&self) -> &WeightSchedule {
        &self.schedule
    }

    pub fn current_weights(&self) -> Weights {
        self.schedule.weights(self.index)
    }

    pub fn damage_budget(&self) -> f64 {
        self.damage_budget
    }

    /// Record one sampling step. Every `window_steps` records the window is
    /// evaluated; windows without actuation are skipped entirely.
    pub fn observe(&mut self, t: f64, damage: f64, actuated: bool) -> Option<Evaluation> {
        self.window.push_back(Sample { t, damage, actuated });
        if self.window.len() < self.window_steps + 1 {
            return None;
        }
        let first = *self.window.front().expect("window non-empty");
        let last = *self.window.back().expect("window non-empty");
        let any_actuation = self.window.iter().skip(1).any(|s| s.actuated);
        // Start the next window from the current sample.
        self.window.clear();
        self.window.push_back(last);

        if !any_actuation {
            return Some(Evaluation {
                t,
                damage_rate: 0.0,
                predicted_damage: last.damage,
                index: self.index,
                skipped: true,
            });
        }

        let rate = estimate_damage_rate(&[(first.t, first.damage), (last.t, last.damage)])
            .unwrap_or(0.0);
        let predicted = last.damage + rate * (self.target_time - t).max(0.0);

        if predicted > self.damage_budget {
            // Weight damage more heavily; allowed at every evaluation.
            self.index = self.index.saturating_sub(1).max(1);
        } else if predicted < self.slack * self.damage_budget {
            // Relax toward energy; conservatively allowed every second
            // evaluation.
            if self.cooldown == 0 {
                if self.index < self.schedule.len() {
                    self.index += 1;
                }
                self.cooldown = 1;
            } else {
                self.cooldown -= 1;
            }
        } else if self.cooldown > 0 {
            self.cooldown -= 1;
        }

        Some(Evaluation {
            t,
            damage_rate: rate,
            predicted_damage: predicted,
            index: self.index,
            skipped: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn controller(initial: usize, j_d: f64) -> WeightController {
        WeightController::new(WeightSchedule::default_schedule(), initial, j_d, 3000.0, 0.8, 1)
            .unwrap()
    }

    #[test]
    fn default_schedule_shape() {
        let s = WeightSchedule::default_schedule();
        assert_eq!(s.len(), 15);
        assert_relative_eq!(s.weights(1).w2, 0.95);
        assert_relative_eq!(s.weights(15).w2, 0.05);
        let spacing = 0.9 / 14.0;
        for i in 1..15 {
            assert_relative_eq!(
                s.weights(i).w2 - s.weights(i + 1).w2,
                spacing,
                max_relative = 1e-12
            );
            assert_relative_eq!(s.weights(i).w1 + s.weights(i).w2, 1.0);
        }
        assert_relative_eq!(spacing, 0.0643, max_relative = 1e-2);
    }

    #[test]
    fn rate_estimator_is_exact_for_affine_histories() {
        // Constant history.
        assert_eq!(estimate_damage_rate(&[(0.0, 0.3), (25.0, 0.3)]), Some(0.0));
        // 0.05 over 25 s.
        assert_relative_eq!(
            estimate_damage_rate(&[(100.0, 0.10), (125.0, 0.15)]).unwrap(),
            0.002
        );
        // Linear ramp with slope m is recovered exactly.
        let m = 3.7e-4;
        let window: Vec<(f64, f64)> = (0..26).map(|k| (k as f64, m * k as f64)).collect();
        assert_relative_eq!(estimate_damage_rate(&window).unwrap(), m, max_relative = 1e-12);
        assert_eq!(estimate_damage_rate(&[]), None);
    }

    #[test]
    fn over_budget_prediction_decrements_index() {
        // J_pred = 0.2 + 0.0005 * 2000 = 1.2 > 0.5.
        let mut c = controller(8, 0.5);
        c.observe(999.0, 0.2 - 0.0005, true);
        let eval = c.observe(1000.0, 0.2, true).unwrap();
        assert!(eval.predicted_damage > 0.5, "predicted {}", eval.predicted_damage);
        assert_eq!(eval.index, 7);
    }

    #[test]
    fn under_budget_prediction_increments_with_cooldown() {
        let mut c = controller(8, 0.5);
        // Flat damage at 0.1 < 0.8 * 0.5: relax.
        c.observe(0.0, 0.1, true);
        assert_eq!(c.observe(25.0, 0.1, true).unwrap().index, 9);
        // Next evaluation is blocked by the cooldown.
        assert_eq!(c.observe(50.0, 0.1, true).unwrap().index, 9);
        // The one after is allowed again.
        assert_eq!(c.observe(75.0, 0.1, true).unwrap().index, 10);
    }

    #[test]
    fn index_clamps_at_both_ends() {
        let mut c = controller(1, 0.5);
        c.observe(0.0, 0.0, true);
        let eval = c.observe(25.0, 10.0, true).unwrap();
        assert_eq!(eval.index, 1);

        let mut c = controller(15, 0.5);
        c.observe(0.0, 0.0, true);
        assert_eq!(c.observe(25.0, 0.0, true).unwrap().index, 15);
        c.observe(50.0, 0.0, true);
        assert_eq!(c.observe(75.0, 0.0, true).unwrap().index, 15);
    }

    #[test]
    fn calm_windows_are_skipped() {
        let mut c = controller(8, 0.5);
        c.observe(0.0, 0.0, false);
        let eval = c.observe(25.0, 0.0, false).unwrap();
        assert!(eval.skipped);
        assert_eq!(eval.index, 8);
    }

    #[test]
    fn index_moves_at_most_one_per_evaluation() {
        let mut c = controller(8, 0.5);
        let mut last = 8usize;
        let mut damage = 0.0;
        for k in 0..200 {
            damage += if k % 7 < 3 { 2e-3 } else { 0.0 };
            if let Some(eval) = c.observe(k as f64 * 25.0, damage, true) {
                assert!(eval.index.abs_diff(last) <= 1);
                assert!((1..=15).contains(&eval.index));
                last = eval.index;
            }
        }
    }

    #[test]
    fn replaying_a_history_reproduces_the_index_sequence() {
        let history: Vec<(f64, f64, bool)> =
            (0..50).map(|k| (k as f64 * 25.0, 0.001 * k as f64, k % 3 != 0)).collect();
        let run = || {
            let mut c = controller(8, 0.5);
            history
                .iter()
                .filter_map(|&(t, d, a)| c.observe(t, d, a).map(|e| e.index))
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
