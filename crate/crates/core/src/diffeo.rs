//! Orientation-preserving circle diffeomorphisms stored through their lift
//! `x -> x + p(x)` with `p` a 1-periodic Fourier series.

use crate::error::{QcError, Result};
use crate::fourier::FourierSeries;

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CircleDiffeo {
    periodic_part: FourierSeries,
}

impl CircleDiffeo {
    /// Builds the diffeomorphism with lift `x + p(x)`, checking `1 + p' > 0`
    /// on a dense grid.
    pub fn new(periodic_part: FourierSeries) -> Result<Self> {
        let grid = (8 * periodic_part.n_modes()).max(256);
        for j in 0..grid {
            let x = j as f64 / grid as f64;
            let d = 1.0 + periodic_part.eval_derivative(x);
            if d <= 0.0 {
                return Err(QcError::NonInvertible { x, value: d });
            }
        }
        Ok(CircleDiffeo { periodic_part })
    }

    pub fn identity() -> Self {
        CircleDiffeo {
            periodic_part: FourierSeries::zero(0),
        }
    }

    /// Rigid rotation by `alpha`, as a lift `x -> x + alpha`.
    pub fn rotation(alpha: f64) -> Self {
        CircleDiffeo {
            periodic_part: FourierSeries::constant(alpha, 0),
        }
    }

    pub fn periodic_part(&self) -> &FourierSeries {
        &self.periodic_part
    }

    /// Lift evaluation; satisfies `lift(x + 1) = lift(x) + 1` by construction.
    pub fn lift(&self, x: f64) -> f64 {
        x + self.periodic_part.eval(x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        1.0 + self.periodic_part.eval_derivative(x)
    }

    /// Inverse lift value at a single point by safeguarded Newton
    /// (bisection fallback on the bracketing interval).
    pub fn invert_point(&self, y: f64, tol: f64) -> Result<f64> {
        // lift is increasing with lift(x) - x bounded by |p|_inf, so
        // [y - 1 - |p|, y + 1 + |p|] brackets the solution comfortably.
        let bound = self.periodic_part.l1_norm() + 1.0;
        let mut lo = y - bound;
        let mut hi = y + bound;
        let mut x = y - self.periodic_part.eval(y); // first-order guess
        for iter in 0..200 {
            let fx = self.lift(x) - y;
            if fx.abs() < tol {
                return Ok(x);
            }
            if fx > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let d = self.derivative(x);
            let step = fx / d;
            let next = x - step;
            x = if next <= lo || next >= hi {
                0.5 * (lo + hi)
            } else {
                next
            };
            if iter == 199 {
                return Err(QcError::NoConvergence {
                    x: y,
                    residual: fx.abs(),
                    iters: 200,
                });
            }
        }
        unreachable!()
    }

    /// Full inverse diffeomorphism: pointwise inversion on a uniform grid of
    /// at least `4 * n_modes` points, then an FFT refit.
    pub fn invert(&self, tol: f64) -> Result<CircleDiffeo> {
        let n_modes = self.periodic_part.n_modes().max(1);
        let grid = (4 * n_modes).max(64);
        let mut samples = Vec::with_capacity(grid);
        for j in 0..grid {
            let y = j as f64 / grid as f64;
            let x = self.invert_point(y, tol * 0.1)?;
            samples.push(x - y); // periodic part of the inverse lift
        }
        let q = FourierSeries::fit_samples(&samples, n_modes)?;
        CircleDiffeo::new(q)
    }

    /// Lift of the composition `self(other(x))`, refit to Fourier modes.
    pub fn compose(&self, other: &CircleDiffeo) -> Result<CircleDiffeo> {
        let n_modes = self
            .periodic_part
            .n_modes()
            .max(other.periodic_part.n_modes())
            .max(1);
        let grid = (4 * n_modes).max(64);
        let samples: Vec<f64> = (0..grid)
            .map(|j| {
                let x = j as f64 / grid as f64;
                self.lift(other.lift(x)) - x
            })
            .collect();
        let p = FourierSeries::fit_samples(&samples, n_modes)?;
        CircleDiffeo::new(p)
    }

    /// Sup-norm of `self(other(x)) - x` on a dense grid: residual of a
    /// claimed inverse pair.
    pub fn round_trip_residual(&self, inverse: &CircleDiffeo, grid: usize) -> f64 {
        (0..grid)
            .map(|j| {
                let x = j as f64 / grid as f64;
                (self.lift(inverse.lift(x)) - x).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Rotation number estimate of a lifted circle homeomorphism.
///
/// Birkhoff averages `(G^n(x0) - x0)/n` are recorded along the orbit and the
/// final value is read off at the largest continued-fraction denominator of
/// the running estimate (error decays fastest at denominators). The second
/// field is a coarse error estimate from the last two denominator readings.
pub fn rotation_number<G: Fn(f64) -> f64>(lift: G, x0: f64, n_iter: usize) -> (f64, f64) {
    assert!(n_iter >= 1);
    let mut x = x0;
    let mut displacements = Vec::with_capacity(n_iter + 1);
    displacements.push(0.0);
    for _ in 0..n_iter {
        x = lift(x);
        displacements.push(x - x0);
    }
    let crude = displacements[n_iter] / n_iter as f64;
    // Denominators of the crude estimate's continued fraction, capped at n_iter.
    let mut denoms = vec![1usize];
    let mut a = crude.rem_euclid(1.0);
    let (mut q_prev, mut q_cur) = (0usize, 1usize);
    for _ in 0..40 {
        if a.abs() < 1e-12 {
            break;
        }
        a = 1.0 / a;
        let ai = a.floor() as usize;
        a -= ai as f64;
        let q_next = match ai.checked_mul(q_cur).and_then(|v| v.checked_add(q_prev)) {
            Some(q) if q <= n_iter => q,
            _ => break,
        };
        q_prev = q_cur;
        q_cur = q_next;
        denoms.push(q_cur);
    }
    let &q_best = denoms.last().unwrap();
    let best = displacements[q_best] / q_best as f64;
    let err = if denoms.len() >= 2 {
        let q2 = denoms[denoms.len() - 2];
        (best - displacements[q2] / q2 as f64).abs()
    } else {
        (best - crude).abs().max(1.0 / n_iter as f64)
    };
    (best, err.max(f64::EPSILON))
}
