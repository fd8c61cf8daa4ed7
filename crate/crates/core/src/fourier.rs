//! Truncated Fourier series of real-valued 1-periodic functions.
//!
//! This is the universal representation for every analytic function in the
//! library: the forcing `f`, its antiderivative `F`, the curve `gamma`, the
//! potential `V`, and the various coboundary solutions. Coefficients are
//! stored for wave-numbers `k = -N..=N` and kept Hermitian-symmetric so that
//! evaluation is real up to rounding.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{QcError, Result};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Default number of modes used by fits when the caller does not specify one.
pub const DEFAULT_MODES: usize = 256;

/// Tail-to-total ratio above which fitting operations refuse the result.
pub const TAIL_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct FourierSeries {
    /// Coefficients for k = -N..=N, stored at index k + N.
    coeffs: Vec<Complex64>,
    n_modes: usize,
}

impl FourierSeries {
    pub fn zero(n_modes: usize) -> Self {
        FourierSeries {
            coeffs: vec![Complex64::ZERO; 2 * n_modes + 1],
            n_modes,
        }
    }

    /// Constant function.
    pub fn constant(value: f64, n_modes: usize) -> Self {
        let mut s = Self::zero(n_modes);
        s.coeffs[n_modes] = Complex64::new(value, 0.0);
        s
    }

    /// Builds a series from coefficients indexed k = -N..=N.
    /// Symmetrizes so the result is exactly Hermitian.
    pub fn from_coeffs(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() % 2 == 0 {
            return Err(QcError::InvalidInput(
                "coefficient array must have odd length 2N+1".into(),
            ));
        }
        let n_modes = coeffs.len() / 2;
        let mut s = FourierSeries { coeffs, n_modes };
        s.symmetrize();
        Ok(s)
    }

    /// Builds the real trigonometric polynomial
    /// `sum_k a_k cos(2 pi k x) + b_k sin(2 pi k x)` from `(k, a_k, b_k)` triples.
    pub fn from_harmonics(harmonics: &[(usize, f64, f64)], n_modes: usize) -> Self {
        let mut s = Self::zero(n_modes);
        for &(k, a, b) in harmonics {
            if k == 0 {
                s.coeffs[n_modes] += Complex64::new(a, 0.0);
            } else if k <= n_modes {
                // cos -> (a/2, a/2), sin -> (-b/2i at +k) i.e. c_k = (a - i b)/2
                s.coeffs[n_modes + k] += Complex64::new(a / 2.0, -b / 2.0);
                s.coeffs[n_modes - k] += Complex64::new(a / 2.0, b / 2.0);
            }
        }
        s
    }

    /// Least-squares fit on a uniform grid via FFT. The grid length must be
    /// at least `2 * n_modes + 1`; 4x oversampling is the usual choice.
    pub fn fit<F: Fn(f64) -> f64>(f: F, n_modes: usize, grid_len: usize) -> Result<Self> {
        let samples: Vec<f64> = (0..grid_len).map(|j| f(j as f64 / grid_len as f64)).collect();
        Self::fit_samples(&samples, n_modes)
    }

    /// Fit from samples `values[j] = f(j / M)` on the uniform grid.
    pub fn fit_samples(values: &[f64], n_modes: usize) -> Result<Self> {
        let m = values.len();
        if m < 2 * n_modes + 1 {
            return Err(QcError::InvalidInput(format!(
                "grid of {m} points cannot resolve {n_modes} modes"
            )));
        }
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(m).process(&mut buf);
        let mut coeffs = vec![Complex64::ZERO; 2 * n_modes + 1];
        let scale = 1.0 / m as f64;
        for k in -(n_modes as i64)..=(n_modes as i64) {
            let idx = k.rem_euclid(m as i64) as usize;
            coeffs[(k + n_modes as i64) as usize] = buf[idx] * scale;
        }
        let mut s = FourierSeries { coeffs, n_modes };
        s.symmetrize();
        Ok(s)
    }

    /// Fit that refuses when the relative spectral tail exceeds `TAIL_LIMIT`.
    pub fn fit_checked<F: Fn(f64) -> f64>(f: F, n_modes: usize, grid_len: usize) -> Result<Self> {
        let s = Self::fit(f, n_modes, grid_len)?;
        let ratio = s.tail_ratio();
        if ratio > TAIL_LIMIT {
            return Err(QcError::TruncationOverflow {
                ratio,
                limit: TAIL_LIMIT,
            });
        }
        Ok(s)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// Coefficient at wave-number `k`, zero outside the stored window.
    pub fn coeff(&self, k: i64) -> Complex64 {
        let n = self.n_modes as i64;
        if k < -n || k > n {
            Complex64::ZERO
        } else {
            self.coeffs[(k + n) as usize]
        }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[self.n_modes].re
    }

    /// Evaluates the real part of `sum c_k e^{2 pi i k x}`.
    pub fn eval(&self, x: f64) -> f64 {
        // c_0 + 2 Re(sum_{k>0} c_k e^{2 pi i k x}) by Hermitian symmetry.
        let base = Complex64::from_polar(1.0, TWO_PI * x);
        let mut z = Complex64::new(1.0, 0.0);
        let mut acc = Complex64::ZERO;
        for k in 1..=self.n_modes {
            z *= base;
            acc += self.coeffs[self.n_modes + k] * z;
        }
        self.mean() + 2.0 * acc.re
    }

    pub fn eval_derivative(&self, x: f64) -> f64 {
        let base = Complex64::from_polar(1.0, TWO_PI * x);
        let mut z = Complex64::new(1.0, 0.0);
        let mut acc = Complex64::ZERO;
        for k in 1..=self.n_modes {
            z *= base;
            acc += self.coeffs[self.n_modes + k] * z * Complex64::new(0.0, TWO_PI * k as f64);
        }
        2.0 * acc.re
    }

    /// Evaluates at the complex point `x + i delta` (strip evaluation).
    pub fn eval_complex(&self, x: f64, delta: f64) -> Complex64 {
        let mut acc = Complex64::ZERO;
        for k in -(self.n_modes as i64)..=(self.n_modes as i64) {
            let c = self.coeff(k);
            if c == Complex64::ZERO {
                continue;
            }
            let damp = (-TWO_PI * k as f64 * delta).exp();
            acc += c * damp * Complex64::from_polar(1.0, TWO_PI * k as f64 * x);
        }
        acc
    }

    /// Term-by-term derivative (multiplier `2 pi i k`).
    pub fn derivative(&self) -> FourierSeries {
        let n = self.n_modes as i64;
        let coeffs = (-n..=n)
            .map(|k| self.coeff(k) * Complex64::new(0.0, TWO_PI * k as f64))
            .collect();
        FourierSeries {
            coeffs,
            n_modes: self.n_modes,
        }
    }

    /// Zero-mean antiderivative; requires the mean to vanish (checked loosely,
    /// the k = 0 coefficient is dropped either way).
    pub fn antiderivative_zero_mean(&self) -> FourierSeries {
        let n = self.n_modes as i64;
        let coeffs = (-n..=n)
            .map(|k| {
                if k == 0 {
                    Complex64::ZERO
                } else {
                    self.coeff(k) / Complex64::new(0.0, TWO_PI * k as f64)
                }
            })
            .collect();
        FourierSeries {
            coeffs,
            n_modes: self.n_modes,
        }
    }

    /// Returns a copy with the mean removed.
    pub fn without_mean(&self) -> FourierSeries {
        let mut s = self.clone();
        s.coeffs[s.n_modes] = Complex64::new(0.0, 0.0);
        s
    }

    pub fn scaled(&self, factor: f64) -> FourierSeries {
        let coeffs = self.coeffs.iter().map(|c| c * factor).collect();
        FourierSeries {
            coeffs,
            n_modes: self.n_modes,
        }
    }

    pub fn add(&self, other: &FourierSeries) -> FourierSeries {
        let n = self.n_modes.max(other.n_modes) as i64;
        let coeffs = (-n..=n).map(|k| self.coeff(k) + other.coeff(k)).collect();
        FourierSeries {
            coeffs,
            n_modes: n as usize,
        }
    }

    pub fn l1_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }

    /// l1 mass of the top quarter of the mode window relative to the total.
    pub fn tail_ratio(&self) -> f64 {
        let total = self.l1_norm();
        if total == 0.0 {
            return 0.0;
        }
        let cut = (3 * self.n_modes) / 4;
        let tail: f64 = (-(self.n_modes as i64)..=(self.n_modes as i64))
            .filter(|k| k.unsigned_abs() as usize > cut)
            .map(|k| self.coeff(k).norm())
            .sum();
        tail / total
    }

    /// Fits `|c_k| ~ C e^{-2 pi h |k|}` and returns the width `h`.
    /// Modes below 1e-15 in magnitude are excluded from the fit.
    pub fn decay_width(&self) -> f64 {
        let pts: Vec<(f64, f64)> = (1..=self.n_modes)
            .filter_map(|k| {
                let m = self.coeff(k as i64).norm();
                (m > 1e-15).then(|| (k as f64, m.ln()))
            })
            .collect();
        if pts.len() < 2 {
            // Pure constants are entire; report a conventional unit width.
            return 1.0;
        }
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        (-slope / TWO_PI).max(0.0)
    }

    /// Max Hermitian-symmetry defect relative to the total l1 mass.
    pub fn hermitian_defect(&self) -> f64 {
        let total = self.l1_norm().max(1e-300);
        (1..=self.n_modes as i64)
            .map(|k| (self.coeff(-k) - self.coeff(k).conj()).norm())
            .fold(0.0, f64::max)
            / total
    }

    fn symmetrize(&mut self) {
        let n = self.n_modes;
        self.coeffs[n] = Complex64::new(self.coeffs[n].re, 0.0);
        for k in 1..=n {
            let avg = (self.coeffs[n + k] + self.coeffs[n - k].conj()) * 0.5;
            self.coeffs[n + k] = avg;
            self.coeffs[n - k] = avg.conj();
        }
    }
}

/// Wire format: `{"re": [...], "im": [...], "n_modes": N}` with k = -N..N order.
#[derive(Serialize, Deserialize)]
struct SeriesWire {
    re: Vec<f64>,
    im: Vec<f64>,
    n_modes: usize,
}

impl Serialize for FourierSeries {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        SeriesWire {
            re: self.coeffs.iter().map(|c| c.re).collect(),
            im: self.coeffs.iter().map(|c| c.im).collect(),
            n_modes: self.n_modes,
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for FourierSeries {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let w = SeriesWire::deserialize(de)?;
        if w.re.len() != 2 * w.n_modes + 1 || w.im.len() != w.re.len() {
            return Err(serde::de::Error::custom("coefficient arrays do not match n_modes"));
        }
        let coeffs = w
            .re
            .iter()
            .zip(&w.im)
            .map(|(&re, &im)| Complex64::new(re, im))
            .collect();
        Ok(FourierSeries {
            coeffs,
            n_modes: w.n_modes,
        })
    }
}

/// A real function stored as mean value plus zero-mean Fourier part.
/// Used for `gamma` (mean alpha) and `V` (mean near -2), which are not
/// zero-mean and should not be conflated with the forcing-type objects.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesWithMean {
    pub mean: f64,
    pub series: FourierSeries,
}

impl SeriesWithMean {
    pub fn new(mean: f64, series: FourierSeries) -> Self {
        SeriesWithMean {
            mean,
            series: series.without_mean(),
        }
    }

    /// Splits a plain series into mean + zero-mean part.
    pub fn from_series(s: &FourierSeries) -> Self {
        SeriesWithMean {
            mean: s.mean(),
            series: s.without_mean(),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.mean + self.series.eval(x)
    }

    pub fn eval_derivative(&self, x: f64) -> f64 {
        self.series.eval_derivative(x)
    }

    /// Recombines into a single series including the mean coefficient.
    pub fn to_series(&self) -> FourierSeries {
        self.series.add(&FourierSeries::constant(self.mean, 0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_series_evaluates_to_zero() {
        let s = FourierSeries::zero(8);
        assert_eq!(s.eval(0.0), 0.0);
        assert_eq!(s.eval(0.37), 0.0);
    }

    #[test]
    fn cosine_at_zero() {
        // c_1 = c_{-1} = 1/2 is cos(2 pi x)
        let s = FourierSeries::from_harmonics(&[(1, 1.0, 0.0)], 4);
        assert_abs_diff_eq!(s.eval(0.0), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.eval(0.5), -1.0, epsilon = 1e-14);
    }

    #[test]
    fn sine_closed_form() {
        let amp = 1.0 / (2.0 * std::f64::consts::PI);
        let s = FourierSeries::from_harmonics(&[(1, 0.0, amp)], 4);
        assert_abs_diff_eq!(s.eval(0.25), amp, epsilon = 1e-15);
    }

    #[test]
    fn fit_recovers_harmonics() {
        let target = FourierSeries::from_harmonics(&[(1, 0.3, 0.1), (3, 0.0, -0.2)], 16);
        let fitted = FourierSeries::fit(|x| target.eval(x), 16, 128).unwrap();
        for k in -16..=16 {
            assert_abs_diff_eq!(fitted.coeff(k).re, target.coeff(k).re, epsilon = 1e-13);
            assert_abs_diff_eq!(fitted.coeff(k).im, target.coeff(k).im, epsilon = 1e-13);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let s = FourierSeries::from_harmonics(&[(1, 0.5, 0.2), (2, -0.1, 0.3)], 8);
        let h = 1e-6;
        for &x in &[0.1, 0.33, 0.9] {
            let fd = (s.eval(x + h) - s.eval(x - h)) / (2.0 * h);
            assert_abs_diff_eq!(s.eval_derivative(x), fd, epsilon = 1e-7);
        }
    }

    #[test]
    fn antiderivative_inverts_derivative() {
        let s = FourierSeries::from_harmonics(&[(1, 0.0, 1.0), (2, 0.4, 0.0)], 8);
        let back = s.derivative().antiderivative_zero_mean();
        for k in -8i64..=8 {
            assert_abs_diff_eq!(back.coeff(k).re, s.without_mean().coeff(k).re, epsilon = 1e-14);
        }
    }

    #[test]
    fn hermitian_symmetry_and_real_evaluation() {
        let s = FourierSeries::fit(|x| (2.0 * std::f64::consts::PI * x).sin().exp(), 32, 256).unwrap();
        assert!(s.hermitian_defect() < 1e-14);
        // eval uses only the Hermitian structure, so realness is structural;
        // check complex evaluation at delta = 0 instead.
        let z = s.eval_complex(0.3, 0.0);
        assert!(z.im.abs() <= 1e-12 * s.l1_norm());
        assert_abs_diff_eq!(z.re, s.eval(0.3), epsilon = 1e-12);
    }

    #[test]
    fn strip_evaluation_matches_analytic_continuation() {
        // cos(2 pi x) continued to x + i d is cos(2 pi x) cosh(2 pi d) - i sin(...) sinh(...)
        let s = FourierSeries::from_harmonics(&[(1, 1.0, 0.0)], 4);
        let (x, d) = (0.2, 0.05);
        let z = s.eval_complex(x, d);
        let tp = 2.0 * std::f64::consts::PI;
        assert_abs_diff_eq!(z.re, (tp * x).cos() * (tp * d).cosh(), epsilon = 1e-13);
        assert_abs_diff_eq!(z.im, -(tp * x).sin() * (tp * d).sinh(), epsilon = 1e-13);
    }

    #[test]
    fn decay_width_of_poisson_kernel_like_series() {
        // c_k = e^{-2 pi h |k|} has width exactly h.
        let h = 0.12;
        let n = 32;
        let coeffs: Vec<Complex64> = (-(n as i64)..=(n as i64))
            .map(|k| Complex64::new((-TWO_PI * h * k.abs() as f64).exp(), 0.0))
            .collect();
        let s = FourierSeries::from_coeffs(coeffs).unwrap();
        assert_abs_diff_eq!(s.decay_width(), h, epsilon = 1e-6);
    }

    #[test]
    fn json_round_trip() {
        let s = FourierSeries::from_harmonics(&[(2, 0.3, -0.7)], 4);
        let text = serde_json::to_string(&s).unwrap();
        let back: FourierSeries = serde_json::from_str(&text).unwrap();
        assert_eq!(s, back);
    }
}
