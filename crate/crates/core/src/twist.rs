//! The standard-type twist map `(x, r) -> (x + r + f(x), r + f(x))`, its
//! orbits, the generating-function action of a finite segment, and discrete
//! Euler-Lagrange residuals.

use serde::{Deserialize, Serialize};

use crate::error::{QcError, Result};
use crate::fourier::FourierSeries;

/// Momentum magnitude beyond which orbits are treated as diffusing.
pub const DIFFUSION_GUARD: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderState {
    /// Lift coordinate; the projected phase is `x mod 1`.
    pub x: f64,
    pub r: f64,
}

/// A finite segment of a configuration `(x_n)`, with `base_index` giving the
/// index of the first entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Configuration {
    pub points: Vec<f64>,
    pub base_index: i64,
}

impl Configuration {
    pub fn new(points: Vec<f64>) -> Self {
        Configuration {
            points,
            base_index: 0,
        }
    }
}

/// One forward step of the lifted twist map.
pub fn twist_step(f: &FourierSeries, s: CylinderState) -> CylinderState {
    let kick = f.eval(s.x.rem_euclid(1.0));
    CylinderState {
        x: s.x + s.r + kick,
        r: s.r + kick,
    }
}

/// One backward step: `(x, r) -> (x - r, r - f(x - r))`.
pub fn twist_step_back(f: &FourierSeries, s: CylinderState) -> CylinderState {
    let x_prev = s.x - s.r;
    CylinderState {
        x: x_prev,
        r: s.r - f.eval(x_prev.rem_euclid(1.0)),
    }
}

/// Forward orbit of length `n + 1` (the initial state included). Negative
/// `n` is not supported here; use `orbit_back`.
pub fn orbit(f: &FourierSeries, start: CylinderState, n: usize) -> Result<Vec<CylinderState>> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(start);
    let mut s = start;
    for step in 0..n {
        s = twist_step(f, s);
        if s.r.abs() > DIFFUSION_GUARD {
            return Err(QcError::Overflow { r: s.r, step });
        }
        out.push(s);
    }
    Ok(out)
}

pub fn orbit_back(f: &FourierSeries, start: CylinderState, n: usize) -> Result<Vec<CylinderState>> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(start);
    let mut s = start;
    for step in 0..n {
        s = twist_step_back(f, s);
        if s.r.abs() > DIFFUSION_GUARD {
            return Err(QcError::Overflow { r: s.r, step });
        }
        out.push(s);
    }
    Ok(out)
}

/// Action of a finite segment:
/// `sum_n 1/2 (x_{n+1} - x_n - a)^2 + F(x_n)` with the generating-function
/// convention that `F` is evaluated at the left endpoint of each bond, so the
/// final point contributes no potential term.
pub fn segment_action(f: &FourierSeries, a: f64, c: &Configuration) -> f64 {
    let antider = f.antiderivative_zero_mean();
    let mut action = 0.0;
    for w in c.points.windows(2) {
        let d = w[1] - w[0] - a;
        action += 0.5 * d * d + antider.eval(w[0].rem_euclid(1.0));
    }
    action
}

/// Discrete Euler-Lagrange residuals
/// `x_{n+1} - 2 x_n + x_{n-1} - f(x_n)` on interior indices.
/// A configuration is an orbit segment iff all residuals vanish.
pub fn euler_lagrange_residual(f: &FourierSeries, c: &Configuration) -> Vec<f64> {
    c.points
        .windows(3)
        .map(|w| w[2] - 2.0 * w[1] + w[0] - f.eval(w[1].rem_euclid(1.0)))
        .collect()
}

/// The standard-map forcing `lambda sin(2 pi x) / (2 pi)`.
pub fn standard_forcing(lambda: f64, n_modes: usize) -> FourierSeries {
    FourierSeries::from_harmonics(&[(1, 0.0, lambda / (2.0 * std::f64::consts::PI))], n_modes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn integrable_shear() {
        let f = FourierSeries::zero(4);
        let s = twist_step(&f, CylinderState { x: 0.2, r: 0.5 });
        assert_abs_diff_eq!(s.x, 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(s.r, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn standard_map_fixed_point() {
        let f = standard_forcing(0.7, 8);
        let s = twist_step(&f, CylinderState { x: 0.0, r: 0.0 });
        assert_abs_diff_eq!(s.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.r, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn free_orbit_is_arithmetic_progression() {
        let f = FourierSeries::zero(2);
        let orb = orbit(&f, CylinderState { x: 0.1, r: 0.37 }, 20).unwrap();
        for (n, s) in orb.iter().enumerate() {
            assert_abs_diff_eq!(s.x, 0.1 + n as f64 * 0.37, epsilon = 1e-12);
        }
    }

    #[test]
    fn forward_then_backward_returns_start() {
        let f = standard_forcing(0.5, 16);
        let start = CylinderState { x: 0.1, r: 0.6 };
        let fwd = orbit(&f, start, 50).unwrap();
        let back = orbit_back(&f, *fwd.last().unwrap(), 50).unwrap();
        let end = back.last().unwrap();
        assert_abs_diff_eq!(end.x, start.x, epsilon = 1e-9);
        assert_abs_diff_eq!(end.r, start.r, epsilon = 1e-9);
    }

    #[test]
    fn long_standard_orbit_matches_duplicate_loop() {
        let lambda = 0.5;
        let f = standard_forcing(lambda, 16);
        let orb = orbit(&f, CylinderState { x: 0.1, r: 0.6 }, 10_000).unwrap();
        // independent re-implementation with a closed-form sine kick
        let (mut x, mut r) = (0.1f64, 0.6f64);
        for s in &orb {
            assert!((s.x - x).abs() < 1e-6 * (1.0 + x.abs()), "x drifted");
            assert!((s.r - r).abs() < 1e-6 * (1.0 + r.abs()), "r drifted");
            assert!(s.x.is_finite() && s.r.is_finite());
            let kick = lambda / (2.0 * std::f64::consts::PI)
                * (2.0 * std::f64::consts::PI * x.rem_euclid(1.0)).sin();
            r += kick;
            x += r;
        }
    }

    #[test]
    fn action_zero_for_perfect_progression() {
        let f = FourierSeries::zero(2);
        let c = Configuration::new((0..10).map(|n| 0.5 * n as f64).collect());
        assert_abs_diff_eq!(segment_action(&f, 0.5, &c), 0.0, epsilon = 1e-15);
        let constant = Configuration::new(vec![0.3; 5]);
        assert_abs_diff_eq!(segment_action(&f, 0.0, &constant), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn action_matches_term_by_term_oracle() {
        let lambda = 0.5;
        let f = standard_forcing(lambda, 16);
        let a = 0.3;
        let pts = [0.1, 0.3, 0.6];
        let c = Configuration::new(pts.to_vec());
        // brute-force summation of h(x_n, x_{n+1}) with the closed-form
        // antiderivative F(x) = -lambda cos(2 pi x) / (2 pi)^2
        let tp = 2.0 * std::f64::consts::PI;
        let cap_f = |x: f64| -lambda * (tp * x).cos() / (tp * tp);
        let oracle: f64 = (0..2)
            .map(|n| {
                let d = pts[n + 1] - pts[n] - a;
                0.5 * d * d + cap_f(pts[n])
            })
            .sum();
        assert_abs_diff_eq!(segment_action(&f, a, &c), oracle, epsilon = 1e-12);
    }

    #[test]
    fn residual_vanishes_on_orbits() {
        let f = standard_forcing(0.5, 16);
        let orb = orbit(&f, CylinderState { x: 0.1, r: 0.6 }, 30).unwrap();
        let c = Configuration::new(orb.iter().map(|s| s.x).collect());
        for r in euler_lagrange_residual(&f, &c) {
            assert!(r.abs() < 1e-12);
        }
    }

    #[test]
    fn perturbation_leaves_laplacian_fingerprint() {
        let f = FourierSeries::zero(2);
        let mut pts: Vec<f64> = (0..9).map(|n| 0.25 * n as f64).collect();
        let delta = 1e-3;
        pts[4] += delta;
        let res = euler_lagrange_residual(&f, &Configuration::new(pts));
        // interior indices 1..=7 -> residual vector indices 0..=6
        assert_abs_diff_eq!(res[2], delta, epsilon = 1e-15);
        assert_abs_diff_eq!(res[3], -2.0 * delta, epsilon = 1e-15);
        assert_abs_diff_eq!(res[4], delta, epsilon = 1e-15);
    }

    #[test]
    fn diffusion_guard_trips() {
        let f = FourierSeries::zero(2);
        let res = orbit(&f, CylinderState { x: 0.0, r: 2e9 }, 3);
        assert!(matches!(res, Err(QcError::Overflow { .. })));
    }
}
