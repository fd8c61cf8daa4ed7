//! Symmetric tridiagonal operators with unit off-diagonals and Dirichlet
//! boundary, and their eigenvalues via Sturm-sequence bisection.
//!
//! The Sturm count doubles as an exact eigenvalue-counting function, which is
//! what the integrated density of states needs.

use serde::{Deserialize, Serialize};

/// Dirichlet truncation of `u -> u_{n+1} + u_{n-1} + d_n u_n` to a finite
/// window; off-diagonal entries are all 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TridiagonalOperator {
    pub diagonal: Vec<f64>,
}

impl TridiagonalOperator {
    pub fn new(diagonal: Vec<f64>) -> Self {
        assert!(!diagonal.is_empty());
        TridiagonalOperator { diagonal }
    }

    pub fn size(&self) -> usize {
        self.diagonal.len()
    }

    /// Number of eigenvalues strictly below `x` (Sturm / LDL^T sign count).
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0f64;
        for &d in &self.diagonal {
            q = d - x - if q == 0.0 { 1.0 / f64::EPSILON } else { 1.0 / q };
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Gershgorin bounds: all eigenvalues lie in `[lo, hi]`.
    pub fn bounds(&self) -> (f64, f64) {
        let lo = self.diagonal.iter().copied().fold(f64::INFINITY, f64::min) - 2.0;
        let hi = self.diagonal.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 2.0;
        (lo, hi)
    }

    /// The `j`-th eigenvalue in ascending order, `0 <= j < n`.
    pub fn eigenvalue(&self, j: usize) -> f64 {
        assert!(j < self.size());
        let (mut lo, mut hi) = self.bounds();
        // bisection to machine precision relative to the spectral width
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.count_below(mid) <= j {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-14 * (1.0 + lo.abs().max(hi.abs())) {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn top_eigenvalue(&self) -> f64 {
        self.eigenvalue(self.size() - 1)
    }

    /// All eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        (0..self.size()).map(|j| self.eigenvalue(j)).collect()
    }

    /// Matrix-vector product with Dirichlet boundary.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let n = self.size();
        assert_eq!(u.len(), n);
        (0..n)
            .map(|i| {
                let mut v = self.diagonal[i] * u[i];
                if i > 0 {
                    v += u[i - 1];
                }
                if i + 1 < n {
                    v += u[i + 1];
                }
                v
            })
            .collect()
    }

    /// Rayleigh quotient `(Hu, u) / (u, u)`.
    pub fn rayleigh(&self, u: &[f64]) -> f64 {
        let hu = self.apply(u);
        let num: f64 = hu.iter().zip(u).map(|(a, b)| a * b).sum();
        let den: f64 = u.iter().map(|v| v * v).sum();
        num / den
    }
}
