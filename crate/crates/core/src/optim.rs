//! Projected limited-memory quasi-Newton minimizer for box-constrained
//! problems with pinned coordinates. Feasibility is enforced by projection
//! after every trial step; Armijo backtracking provides monotone descent.

use std::collections::VecDeque;

use crate::config::SolverConfig;
use crate::error::{Error, Result};

/// A box-constrained problem: coordinate bounds, pinned coordinates, and
/// termination settings.
#[derive(Debug, Clone)]
pub struct BoxProblem {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Coordinates held at fixed values (e.g. the input-continuity pin).
    pub pins: Vec<(usize, f64)>,
    /// Termination: projected-gradient infinity norm.
    pub tol: f64,
    pub max_iterations: usize,
    /// Quasi-Newton memory (number of curvature pairs).
    pub memory: usize,
    /// Armijo sufficient-decrease constant.
    pub armijo_c1: f64,
    /// Backtracking factor in (0, 1).
    pub backtrack: f64,
}

impl BoxProblem {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, solver: &SolverConfig) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Length { expected: lower.len(), actual: upper.len() });
        }
        if lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return Err(Error::validation("bounds", "lower must be <= upper per coordinate"));
        }
        Ok(BoxProblem {
            lower,
            upper,
            pins: Vec::new(),
            tol: solver.stationarity_tol,
            max_iterations: solver.max_iterations,
            memory: solver.memory,
            armijo_c1: solver.armijo_c1,
            backtrack: solver.backtrack_factor,
        })
    }

    pub fn with_pin(mut self, index: usize, value: f64) -> Result<Self> {
        if value < self.lower[index] || value > self.upper[index] {
            return Err(Error::validation("pins", "pinned value outside bounds"));
        }
        self.pins.push((index, value));
        Ok(self)
    }

    fn clamp(&self, x: &mut [f64]) {
        for i in 0..x.len() {
            x[i] = x[i].clamp(self.lower[i], self.upper[i]);
        }
        for &(i, v) in &self.pins {
            x[i] = v;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    /// Projected-gradient infinity norm reached the tolerance.
    Converged,
    /// Iteration cap reached; best iterate returned.
    MaxIterations,
    /// Backtracking could not find a decreasing step; best iterate returned.
    Stalled,
    /// The callback produced a non-finite value at the start point.
    Diverged,
}

#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub projected_gradient_norm: f64,
    pub status: Status,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Two-loop recursion producing the quasi-Newton direction -H g.
fn two_loop(memory: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, g: &[f64]) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let a = rho * dot(s, &q);
        for i in 0..q.len() {
            q[i] -= a * y[i];
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = memory.back() {
        let gamma = dot(s, y) / dot(y, y);
        for v in &mut q {
            *v *= gamma;
        }
    }
    for ((s, y, rho), a) in memory.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for i in 0..q.len() {
            q[i] += (a - b) * s[i];
        }
    }
    for v in &mut q {
        *v = -*v;
    }
    q
}

/// Minimize `f` over the box. The callback evaluates the objective at `x`
/// and fills the gradient; returning a non-finite value rejects the point
/// (the line search backtracks past it).
pub fn minimize<F>(prob: &BoxProblem, mut f: F, x0: &[f64]) -> MinimizeResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = prob.lower.len();
    assert_eq!(x0.len(), n, "start point dimension mismatch");
    let mut pinned = vec![false; n];
    for &(i, _) in &prob.pins {
        pinned[i] = true;
    }

    let mut x = x0.to_vec();
    prob.clamp(&mut x);
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    if !fx.is_finite() {
        return MinimizeResult {
            x,
            value: fx,
            iterations: 0,
            projected_gradient_norm: f64::INFINITY,
            status: Status::Diverged,
        };
    }

    let pg_norm = |x: &[f64], g: &[f64]| -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..n {
            if pinned[i] {
                continue;
            }
            let stepped = (x[i] - g[i]).clamp(prob.lower[i], prob.upper[i]);
            worst = worst.max((stepped - x[i]).abs());
        }
        worst
    };

    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut g_new = vec![0.0; n];
    let mut iterations = 0;
    let mut status = Status::MaxIterations;

    for _ in 0..prob.max_iterations {
        let pg = pg_norm(&x, &g);
        if pg <= prob.tol {
            status = Status::Converged;
            break;
        }

        // Active-set identification by the projected-gradient sign: bound
        // coordinates whose gradient pushes outward stay put this iteration.
        let eps_i =
            |i: usize| 1e-10 * (prob.upper[i] - prob.lower[i]).abs().max(1.0);
        let mut active = vec![false; n];
        let mut masked = g.clone();
        for i in 0..n {
            active[i] = pinned[i]
                || (x[i] <= prob.lower[i] + eps_i(i) && g[i] > 0.0)
                || (x[i] >= prob.upper[i] - eps_i(i) && g[i] < 0.0);
            if active[i] {
                masked[i] = 0.0;
            }
        }

        let mut direction = two_loop(&memory, &masked);
        for i in 0..n {
            if active[i] {
                direction[i] = 0.0;
            }
        }
        let descent = dot(&masked, &direction);
        if !descent.is_finite() || descent >= -1e-14 * norm(&masked) * norm(&direction) {
            // Not a descent direction; fall back to steepest descent.
            memory.clear();
            direction = masked.iter().map(|v| -v).collect();
        }

        // Weak-Wolfe line search along the projection arc, by bracketing:
        // halve on an Armijo failure, expand while the curvature condition
        // fails (otherwise s'y <= 0 and the pair is useless), bisect once
        // bracketed. Falls back to the last Armijo point.
        let wolfe_c2 = 0.9;
        let mut lo = 0.0_f64;
        let mut hi = f64::INFINITY;
        let mut alpha = 1.0_f64;
        let mut accepted = false;
        let mut x_new = vec![0.0; n];
        let mut f_new = fx;
        let mut best: Option<(Vec<f64>, Vec<f64>, f64)> = None;
        for _ in 0..60 {
            for i in 0..n {
                x_new[i] = x[i] + alpha * direction[i];
            }
            prob.clamp(&mut x_new);
            let step: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
            if norm(&step) == 0.0 {
                break;
            }
            f_new = f(&x_new, &mut g_new);
            let armijo =
                f_new.is_finite() && f_new <= fx + prob.armijo_c1 * dot(&g, &step);
            if !armijo {
                hi = alpha;
                alpha = lo + (hi - lo) * prob.backtrack;
                continue;
            }
            if best.as_ref().is_none_or(|(_, _, fb)| f_new <= *fb) {
                best = Some((x_new.clone(), g_new.clone(), f_new));
            }
            // Clamping caps the usable step; expansion cannot help then.
            let clamped = step
                .iter()
                .zip(&direction)
                .any(|(s, d)| (s - alpha * d).abs() > 1e-12 * (alpha * d).abs().max(1e-300));
            let curvature = dot(&g_new, &direction) >= wolfe_c2 * dot(&g, &direction);
            if curvature || clamped || alpha >= 1e6 {
                accepted = true;
                break;
            }
            lo = alpha;
            alpha = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * alpha };
        }
        if !accepted {
            // Accept the best Armijo point if bracketing ran out of budget.
            match best {
                Some((bx, bg, bf)) => {
                    x_new.copy_from_slice(&bx);
                    g_new.copy_from_slice(&bg);
                    f_new = bf;
                }
                None => {
                    status = Status::Stalled;
                    break;
                }
            }
        }

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        // Discard pairs that break the secant condition under projection.
        if sy > 1e-10 * norm(&s) * norm(&y) {
            memory.push_back((s, y, 1.0 / sy));
            if memory.len() > prob.memory {
                memory.pop_front();
            }
        }

        x.copy_from_slice(&x_new);
        g.copy_from_slice(&g_new);
        fx = f_new;
        iterations += 1;
    }

    let projected_gradient_norm = pg_norm(&x, &g);
    if status == Status::MaxIterations && projected_gradient_norm <= prob.tol {
        status = Status::Converged;
    }
    MinimizeResult { x, value: fx, iterations, projected_gradient_norm, status }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn solver() -> SolverConfig {
        SolverConfig {
            stationarity_tol: 1e-9,
            max_iterations: 500,
            memory: 10,
            armijo_c1: 1e-4,
            backtrack_factor: 0.5,
        }
    }

    fn quadratic(c: Vec<f64>) -> impl FnMut(&[f64], &mut [f64]) -> f64 {
        move |x, g| {
            let mut v = 0.0;
            for i in 0..x.len() {
                let r = x[i] - c[i];
                v += r * r;
                g[i] = 2.0 * r;
            }
            v
        }
    }

    #[test]
    fn unconstrained_quadratic_hits_center() {
        let prob = BoxProblem::new(vec![-10.0; 3], vec![10.0; 3], &solver()).unwrap();
        let res = minimize(&prob, quadratic(vec![1.0, -2.0, 3.0]), &[0.0; 3]);
        assert_eq!(res.status, Status::Converged);
        for (xi, ci) in res.x.iter().zip([1.0, -2.0, 3.0]) {
            assert!((xi - ci).abs() < 1e-8);
        }
    }

    #[test]
    fn exterior_center_projects_onto_box() {
        // Analytic oracle: the minimizer of ||x - c||^2 over a box is the
        // coordinate-wise clamp of c.
        let prob = BoxProblem::new(vec![-1.0; 3], vec![1.0; 3], &solver()).unwrap();
        let c = vec![5.0, -3.0, 0.25];
        let res = minimize(&prob, quadratic(c.clone()), &[0.0; 3]);
        let oracle: Vec<f64> = c.iter().map(|v| v.clamp(-1.0, 1.0)).collect();
        for (xi, oi) in res.x.iter().zip(&oracle) {
            assert!((xi - oi).abs() < 1e-8);
        }
    }

    #[test]
    fn rosenbrock_in_a_box() {
        let prob = BoxProblem::new(vec![-2.0; 2], vec![2.0; 2], &solver()).unwrap();
        let rosenbrock = |x: &[f64], g: &mut [f64]| {
            let (a, b) = (x[0], x[1]);
            g[0] = -400.0 * a * (b - a * a) - 2.0 * (1.0 - a);
            g[1] = 200.0 * (b - a * a);
            100.0 * (b - a * a).powi(2) + (1.0 - a).powi(2)
        };
        let res = minimize(&prob, rosenbrock, &[-1.2, 1.0]);
        assert!(res.value < 1e-6, "f* = {}", res.value);
        assert!(res.iterations <= 200, "iterations {}", res.iterations);
        assert_relative_eq!(res.x[0], 1.0, max_relative = 1e-3);
        assert_relative_eq!(res.x[1], 1.0, max_relative = 1e-3);
    }

    #[test]
    fn pinned_coordinates_are_bit_identical() {
        let prob = BoxProblem::new(vec![-10.0; 4], vec![10.0; 4], &solver())
            .unwrap()
            .with_pin(0, 0.5)
            .unwrap()
            .with_pin(2, -0.25)
            .unwrap();
        let res = minimize(&prob, quadratic(vec![3.0; 4]), &[0.0; 4]);
        assert_eq!(res.x[0], 0.5);
        assert_eq!(res.x[2], -0.25);
        assert!((res.x[1] - 3.0).abs() < 1e-8);
        assert!((res.x[3] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn iterates_stay_feasible_and_descend() {
        let prob = BoxProblem::new(vec![0.0; 5], vec![1.0; 5], &solver()).unwrap();
        let mut values = Vec::new();
        let res = minimize(
            &prob,
            |x, g| {
                let mut v = 0.0;
                for i in 0..x.len() {
                    assert!((0.0..=1.0).contains(&x[i]), "infeasible iterate");
                    let r = x[i] - 2.0;
                    v += (i + 1) as f64 * r * r;
                    g[i] = 2.0 * (i + 1) as f64 * r;
                }
                values.push(v);
                v
            },
            &[0.5; 5],
        );
        assert_eq!(res.status, Status::Converged);
        assert!(res.x.iter().all(|&v| (v - 1.0).abs() < 1e-8));
    }

    #[test]
    fn convex_quadratic_converges_quickly() {
        // Sanity bound: dimension + memory iterations on an exact-gradient
        // convex quadratic.
        let dim = 20;
        let prob = BoxProblem::new(vec![-50.0; dim], vec![50.0; dim], &solver()).unwrap();
        let c: Vec<f64> = (0..dim).map(|i| (i as f64) / 3.0 - 2.0).collect();
        let res = minimize(
            &prob,
            move |x, g| {
                let mut v = 0.0;
                for i in 0..x.len() {
                    let w = 1.0 + i as f64;
                    let r = x[i] - c[i];
                    v += w * r * r;
                    g[i] = 2.0 * w * r;
                }
                v
            },
            &[0.0; 20],
        );
        assert_eq!(res.status, Status::Converged);
        // With memory 10 on 20 distinct eigenvalues, expect roughly CG-like
        // behavior: well under 3x the dimension.
        assert!(res.iterations <= 3 * dim, "iterations {}", res.iterations);
    }

    #[test]
    fn non_finite_start_reports_divergence() {
        let prob = BoxProblem::new(vec![-1.0], vec![1.0], &solver()).unwrap();
        let res = minimize(&prob, |_, g| {
            g[0] = 0.0;
            f64::NAN
        }, &[0.0]);
        assert_eq!(res.status, Status::Diverged);
    }
}
