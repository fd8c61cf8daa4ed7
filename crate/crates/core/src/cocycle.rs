//! SL(2,R) cocycles over rotations and circle maps: iteration, Lyapunov
//! exponents, fibered rotation numbers, conjugation, the small-divisor
//! coboundary solver, and the parabolic reduction at the spectral edge.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::curves::TwistModel;
use crate::diffeo::CircleDiffeo;
use crate::error::{QcError, Result};
use crate::fourier::{FourierSeries, SeriesWithMean};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Norm beyond which cocycle products are considered overflowed.
pub const NORM_GUARD: f64 = 1e150;

// ---------------------------------------------------------------------------
// 2x2 matrices

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2 { a, b, c, d }
    }

    pub fn det(self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn mul(self, rhs: Mat2) -> Mat2 {
        Mat2 {
            a: self.a * rhs.a + self.b * rhs.c,
            b: self.a * rhs.b + self.b * rhs.d,
            c: self.c * rhs.a + self.d * rhs.c,
            d: self.c * rhs.b + self.d * rhs.d,
        }
    }

    pub fn inverse(self) -> Mat2 {
        let det = self.det();
        Mat2 {
            a: self.d / det,
            b: -self.b / det,
            c: -self.c / det,
            d: self.a / det,
        }
    }

    pub fn apply(self, v: (f64, f64)) -> (f64, f64) {
        (self.a * v.0 + self.b * v.1, self.c * v.0 + self.d * v.1)
    }

    pub fn frobenius(self) -> f64 {
        (self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d).sqrt()
    }

    /// Spectral (operator) norm, exact for 2x2.
    pub fn op_norm(self) -> f64 {
        let t = self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d;
        let det = self.det();
        let disc = (t * t - 4.0 * det * det).max(0.0).sqrt();
        (0.5 * (t + disc)).sqrt()
    }

    pub fn scaled(self, s: f64) -> Mat2 {
        Mat2::new(self.a * s, self.b * s, self.c * s, self.d * s)
    }

    pub fn sub(self, rhs: Mat2) -> Mat2 {
        Mat2::new(self.a - rhs.a, self.b - rhs.b, self.c - rhs.c, self.d - rhs.d)
    }
}

/// Complex 2x2 used for strip-evaluated products.
#[derive(Debug, Clone, Copy)]
struct Mat2c {
    a: Complex64,
    b: Complex64,
    c: Complex64,
    d: Complex64,
}

impl Mat2c {
    fn mul(self, rhs: Mat2c) -> Mat2c {
        Mat2c {
            a: self.a * rhs.a + self.b * rhs.c,
            b: self.a * rhs.b + self.b * rhs.d,
            c: self.c * rhs.a + self.d * rhs.c,
            d: self.c * rhs.b + self.d * rhs.d,
        }
    }

    fn frobenius(self) -> f64 {
        (self.a.norm_sqr() + self.b.norm_sqr() + self.c.norm_sqr() + self.d.norm_sqr()).sqrt()
    }

    fn scaled(self, s: f64) -> Mat2c {
        Mat2c {
            a: self.a * s,
            b: self.b * s,
            c: self.c * s,
            d: self.d * s,
        }
    }
}

// ---------------------------------------------------------------------------
// Cocycles

/// Base dynamics of a cocycle: a rigid rotation or a circle diffeomorphism.
#[derive(Debug, Clone)]
pub enum Base {
    Rotation(f64),
    Map(CircleDiffeo),
}

impl Base {
    pub fn step(&self, phi: f64) -> f64 {
        match self {
            Base::Rotation(alpha) => phi + alpha,
            Base::Map(g) => g.lift(phi),
        }
    }
}

/// A 2x2 matrix-valued periodic function over a base dynamic. Entries are
/// stored as Fourier series (row major: a, b, c, d).
#[derive(Debug, Clone)]
pub struct MatrixCocycle {
    pub base: Base,
    entries: [FourierSeries; 4],
}

impl MatrixCocycle {
    pub fn new(base: Base, entries: [FourierSeries; 4]) -> Self {
        MatrixCocycle { base, entries }
    }

    pub fn constant(base: Base, m: Mat2) -> Self {
        MatrixCocycle {
            base,
            entries: [
                FourierSeries::constant(m.a, 0),
                FourierSeries::constant(m.b, 0),
                FourierSeries::constant(m.c, 0),
                FourierSeries::constant(m.d, 0),
            ],
        }
    }

    pub fn eval(&self, phi: f64) -> Mat2 {
        let x = phi.rem_euclid(1.0);
        Mat2::new(
            self.entries[0].eval(x),
            self.entries[1].eval(x),
            self.entries[2].eval(x),
            self.entries[3].eval(x),
        )
    }

    fn eval_strip(&self, phi: f64, delta: f64) -> Mat2c {
        let x = phi.rem_euclid(1.0);
        Mat2c {
            a: self.entries[0].eval_complex(x, delta),
            b: self.entries[1].eval_complex(x, delta),
            c: self.entries[2].eval_complex(x, delta),
            d: self.entries[3].eval_complex(x, delta),
        }
    }

    /// Min fitted analyticity width over non-constant entries.
    pub fn strip_width(&self) -> f64 {
        self.entries
            .iter()
            .filter(|s| s.without_mean().l1_norm() > 1e-14)
            .map(|s| s.decay_width())
            .fold(1.0, f64::min)
    }

    /// Max determinant defect on a grid (SL2 contract).
    pub fn det_defect(&self, grid: usize) -> f64 {
        (0..grid)
            .map(|j| (self.eval(j as f64 / grid as f64).det() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Derivative cocycle of the twist map restricted to the invariant curve,
/// over the induced circle map: `[[1 + f', 1], [f', 1]]`.
pub fn derivative_cocycle(model: &TwistModel) -> Result<MatrixCocycle> {
    let g = model.induced_circle_map()?;
    let fp = model.f.derivative();
    let one = FourierSeries::constant(1.0, 0);
    Ok(MatrixCocycle::new(
        Base::Map(g),
        [fp.add(&one), one.clone(), fp, one],
    ))
}

/// Schrödinger cocycle `[[E - V, -1], [1, 0]]` over the rotation.
pub fn schrodinger_cocycle(v: &SeriesWithMean, alpha: f64, energy: f64) -> MatrixCocycle {
    let e_minus_v = v.to_series().scaled(-1.0).add(&FourierSeries::constant(energy, 0));
    MatrixCocycle::new(
        Base::Rotation(alpha),
        [
            e_minus_v,
            FourierSeries::constant(-1.0, 0),
            FourierSeries::constant(1.0, 0),
            FourierSeries::constant(0.0, 0),
        ],
    )
}

/// The involution `M = [[1, 0], [1, -1]]` conjugating the derivative cocycle
/// to the Schrödinger cocycle at energy 0.
pub const M_CONJUGATOR: Mat2 = Mat2 {
    a: 1.0,
    b: 0.0,
    c: 1.0,
    d: -1.0,
};

/// Products `A_k = A(phi_{k-1}) ... A(phi_0)` for `k = 1..=n`.
pub fn iterates(c: &MatrixCocycle, phi0: f64, n: usize) -> Result<Vec<Mat2>> {
    let mut out = Vec::with_capacity(n);
    let mut prod = Mat2::IDENTITY;
    let mut phi = phi0;
    for step in 0..n {
        prod = c.eval(phi).mul(prod);
        if prod.frobenius() > NORM_GUARD {
            return Err(QcError::IterateOverflow { step });
        }
        phi = c.base.step(phi);
        out.push(prod);
    }
    Ok(out)
}

/// `sup_phi ||A_k(phi)||` over a phase grid, for `k = 1..=n`. Truncated and
/// flagged on overflow.
pub struct SupNormTrack {
    pub sup_norms: Vec<f64>,
    pub overflowed: bool,
}

pub fn sup_norms(c: &MatrixCocycle, n: usize, phase_grid: usize) -> SupNormTrack {
    let mut sup = vec![0.0f64; n];
    let mut overflowed = false;
    for j in 0..phase_grid {
        let mut prod = Mat2::IDENTITY;
        let mut phi = j as f64 / phase_grid as f64;
        for (k, s) in sup.iter_mut().enumerate() {
            prod = c.eval(phi).mul(prod);
            let norm = prod.op_norm();
            if norm > NORM_GUARD {
                overflowed = true;
                sup.truncate(k);
                return SupNormTrack {
                    sup_norms: sup,
                    overflowed,
                };
            }
            if norm > *s {
                *s = norm;
            }
            phi = c.base.step(phi);
        }
    }
    SupNormTrack {
        sup_norms: sup,
        overflowed,
    }
}

const RENORM_CADENCE: usize = 32;

/// Lyapunov exponent by renormalized products, averaged over a phase grid.
/// For `delta != 0` the entries are evaluated at `phi + i delta`; the strip
/// must stay inside the fitted analyticity width of the entries.
pub fn lyapunov_exponent(c: &MatrixCocycle, n: usize, delta: f64, phase_grid: usize) -> Result<f64> {
    if delta != 0.0 {
        let h0 = c.strip_width();
        if delta.abs() >= h0 {
            return Err(QcError::StripTooWide {
                delta: delta.abs(),
                h0,
            });
        }
    }
    let mut total = 0.0;
    for j in 0..phase_grid {
        let phi0 = j as f64 / phase_grid as f64;
        total += if delta == 0.0 {
            le_single_real(c, phi0, n)
        } else {
            le_single_strip(c, phi0, delta, n)
        };
    }
    Ok(total / phase_grid as f64)
}

fn le_single_real(c: &MatrixCocycle, phi0: f64, n: usize) -> f64 {
    let mut prod = Mat2::IDENTITY;
    let mut phi = phi0;
    let mut log_acc = 0.0;
    for k in 0..n {
        prod = c.eval(phi).mul(prod);
        phi = c.base.step(phi);
        if (k + 1) % RENORM_CADENCE == 0 {
            let s = prod.frobenius();
            log_acc += s.ln();
            prod = prod.scaled(1.0 / s);
        }
    }
    (log_acc + prod.frobenius().ln()) / n as f64
}

fn le_single_strip(c: &MatrixCocycle, phi0: f64, delta: f64, n: usize) -> f64 {
    let mut prod = Mat2c {
        a: Complex64::ONE,
        b: Complex64::ZERO,
        c: Complex64::ZERO,
        d: Complex64::ONE,
    };
    let mut phi = phi0;
    let mut log_acc = 0.0;
    for k in 0..n {
        prod = c.eval_strip(phi, delta).mul(prod);
        phi = c.base.step(phi);
        if (k + 1) % RENORM_CADENCE == 0 {
            let s = prod.frobenius();
            log_acc += s.ln();
            prod = prod.scaled(1.0 / s);
        }
    }
    (log_acc + prod.frobenius().ln()) / n as f64
}

/// Winding number of the first column as the phase goes once around.
fn first_column_winding(c: &MatrixCocycle, grid: usize) -> i64 {
    let mut total = 0.0;
    let mut prev = {
        let m = c.eval(0.0);
        m.c.atan2(m.a)
    };
    for j in 1..=grid {
        let m = c.eval(j as f64 / grid as f64);
        let ang = m.c.atan2(m.a);
        let mut d = ang - prev;
        while d > std::f64::consts::PI {
            d -= TWO_PI;
        }
        while d < -std::f64::consts::PI {
            d += TWO_PI;
        }
        total += d;
        prev = ang;
    }
    (total / TWO_PI).round() as i64
}

/// Fibered rotation number of a cocycle homotopic to the identity: average
/// angular increment of the projective action along the orbit of `phi0 = 0`.
pub fn fibered_rotation_number(c: &MatrixCocycle, n: usize) -> Result<f64> {
    let winding = first_column_winding(c, 512);
    if winding != 0 {
        return Err(QcError::WindingNonzero { winding });
    }
    let mut phi = 0.0f64;
    let mut v = (1.0f64, 0.0f64);
    let mut total = 0.0;
    for _ in 0..n {
        let w = c.eval(phi).apply(v);
        let cross = v.0 * w.1 - v.1 * w.0;
        let dot = v.0 * w.0 + v.1 * w.1;
        total += cross.atan2(dot);
        let norm = (w.0 * w.0 + w.1 * w.1).sqrt();
        v = (w.0 / norm, w.1 / norm);
        phi = c.base.step(phi);
    }
    Ok((total / (TWO_PI * n as f64)).abs())
}

/// Conjugated cocycle `B(base(phi))^{-1} A(phi) B(phi)`, refit to Fourier
/// entries on a grid.
pub fn conjugate_cocycle<F: Fn(f64) -> Mat2>(
    c: &MatrixCocycle,
    conjugator: F,
    n_modes: usize,
) -> Result<MatrixCocycle> {
    let grid = (4 * n_modes).max(64);
    let mut samples = [const { Vec::new() }; 4];
    for j in 0..grid {
        let phi = j as f64 / grid as f64;
        let b = conjugator(phi);
        if b.det().abs() < 1e-12 {
            return Err(QcError::SingularConjugator {
                x: phi,
                det: b.det(),
            });
        }
        let b_next = conjugator(c.base.step(phi).rem_euclid(1.0));
        let m = b_next.inverse().mul(c.eval(phi)).mul(b);
        samples[0].push(m.a);
        samples[1].push(m.b);
        samples[2].push(m.c);
        samples[3].push(m.d);
    }
    let fit = |s: &[f64]| FourierSeries::fit_samples(s, n_modes);
    Ok(MatrixCocycle::new(
        c.base.clone(),
        [
            fit(&samples[0])?,
            fit(&samples[1])?,
            fit(&samples[2])?,
            fit(&samples[3])?,
        ],
    ))
}

// ---------------------------------------------------------------------------
// Cohomological equation and parabolic reduction

/// Solves `mu(phi + alpha) - mu(phi) = nu(phi)` for zero-mean analytic `nu`,
/// mode by mode: `mu_k = nu_k / (e^{2 pi i k alpha} - 1)`, `mu_0 = 0`.
///
/// A divisor smaller than `divisor_floor` while the corresponding numerator
/// is above the truncation tail is an error, never a silent zero.
pub fn solve_cohomological(
    nu: &FourierSeries,
    alpha: f64,
    divisor_floor: f64,
) -> Result<FourierSeries> {
    let n = nu.n_modes() as i64;
    let tail = nu.l1_norm() * 1e-14;
    let mut coeffs = Vec::with_capacity(2 * n as usize + 1);
    for k in -n..=n {
        if k == 0 {
            coeffs.push(Complex64::ZERO);
            continue;
        }
        let divisor = Complex64::from_polar(1.0, TWO_PI * k as f64 * alpha) - 1.0;
        let numer = nu.coeff(k);
        if divisor.norm() < divisor_floor {
            if numer.norm() > tail {
                return Err(QcError::SmallDivisorBreakdown {
                    k,
                    divisor: divisor.norm(),
                    coeff: numer.norm(),
                });
            }
            coeffs.push(Complex64::ZERO);
            continue;
        }
        coeffs.push(numer / divisor);
    }
    FourierSeries::from_coeffs(coeffs)
}

/// Sup-norm residual of the coboundary equation on a grid.
pub fn coboundary_residual(mu: &FourierSeries, nu: &FourierSeries, alpha: f64, grid: usize) -> f64 {
    (0..grid)
        .map(|j| {
            let phi = j as f64 / grid as f64;
            (mu.eval((phi + alpha).rem_euclid(1.0)) - mu.eval(phi) - nu.eval(phi)).abs()
        })
        .fold(0.0, f64::max)
}

/// Output of the parabolic reduction at the spectral edge.
#[derive(Debug, Clone)]
pub struct ReductionResult {
    pub nu0: f64,
    /// `nu(phi) = -1/(phi'(phi) phi'(phi + alpha))`, mean split off.
    pub nu: SeriesWithMean,
    /// Coboundary solution, zero mean.
    pub mu: FourierSeries,
    /// sup `|Z(phi+alpha)^{-1} S_0^V(phi) Z(phi) - B_0|` over the grid.
    pub residual: f64,
    phi: CircleDiffeo,
    alpha: f64,
}

impl ReductionResult {
    pub fn b0(&self) -> Mat2 {
        Mat2::new(1.0, self.nu0, 0.0, 1.0)
    }

    /// The explicit conjugacy matrix
    /// `[[phi', mu phi'], [phi'(.-alpha), 1/phi' + mu phi'(.-alpha)]]`.
    pub fn z_at(&self, phi: f64) -> Mat2 {
        let dp = self.phi.derivative(phi.rem_euclid(1.0));
        let dm = self.phi.derivative((phi - self.alpha).rem_euclid(1.0));
        let mu = self.mu.eval(phi.rem_euclid(1.0));
        Mat2::new(dp, mu * dp, dm, 1.0 / dp + mu * dm)
    }

    /// Sup operator norm of the explicit conjugacy on a grid.
    pub fn z_sup_norm(&self, grid: usize) -> f64 {
        (0..grid)
            .map(|j| self.z_at(j as f64 / grid as f64).op_norm())
            .fold(0.0, f64::max)
    }
}

/// Default divisor floor relative to the l1 mass of `nu`.
pub fn default_divisor_floor(nu: &FourierSeries) -> f64 {
    1e-12 * nu.l1_norm()
}

/// Reduces the edge Schrödinger cocycle of a certified model to the constant
/// parabolic `B_0 = [[1, nu0], [0, 1]]` through the chain
/// `Z = M Z_1(phi(.)) diag(phi', -1/phi') [[1, mu], [0, 1]]`.
pub fn parabolic_reduce(model: &TwistModel) -> Result<ReductionResult> {
    let alpha = model.alpha.value();
    let n_modes = model.meta.modes;
    let grid = model.meta.grid;
    let nu_samples: Vec<f64> = (0..grid)
        .map(|j| {
            let phi = j as f64 / grid as f64;
            -1.0 / (model.phi_prime(phi) * model.phi_prime((phi + alpha).rem_euclid(1.0)))
        })
        .collect();
    let nu_full = FourierSeries::fit_samples(&nu_samples, n_modes)?;
    let nu = SeriesWithMean::from_series(&nu_full);
    let nu0 = nu.mean;
    let mu = solve_cohomological(&nu.series, alpha, default_divisor_floor(&nu.series))?;

    let result = ReductionResult {
        nu0,
        nu,
        mu,
        residual: 0.0,
        phi: model.phi.clone(),
        alpha,
    };
    let b0 = result.b0();
    let s = schrodinger_cocycle(&model.v, alpha, 0.0);
    let residual = (0..grid)
        .map(|j| {
            let phi = j as f64 / grid as f64;
            let z_next = result.z_at(phi + alpha);
            let conj = z_next.inverse().mul(s.eval(phi)).mul(result.z_at(phi));
            conj.sub(b0).op_norm()
        })
        .fold(0.0, f64::max);
    Ok(ReductionResult { residual, ..result })
}

/// Chain form of the conjugacy, `M Z_1(phi(x)) diag(phi', -1/phi') [[1, mu], [0, 1]]`,
/// for cross-checking against the explicit matrix.
pub fn z_chain_at(model: &TwistModel, red: &ReductionResult, phi: f64) -> Mat2 {
    let x = phi.rem_euclid(1.0);
    let phix = model.phi.lift(x).rem_euclid(1.0);
    let z1 = Mat2::new(1.0, 0.0, model.gamma.eval_derivative(phix), 1.0);
    let dp = model.phi_prime(x);
    let diag = Mat2::new(dp, 0.0, 0.0, -1.0 / dp);
    let shear = Mat2::new(1.0, red.mu.eval(x), 0.0, 1.0);
    M_CONJUGATOR.mul(z1).mul(diag).mul(shear)
}

/// Residual of the Bloch-section identity
/// `S_0^V(phi) (phi'(phi), phi'(phi-alpha)) = (phi'(phi+alpha), phi'(phi))`,
/// together with its scalar form `V phi' + phi'(.+alpha) + phi'(.-alpha) = 0`.
pub fn bloch_section_check(model: &TwistModel) -> (f64, f64) {
    let alpha = model.alpha.value();
    let s = schrodinger_cocycle(&model.v, alpha, 0.0);
    let grid = model.meta.grid;
    let mut vec_res: f64 = 0.0;
    let mut scalar_res: f64 = 0.0;
    for j in 0..grid {
        let phi = j as f64 / grid as f64;
        let u = (
            model.phi_prime(phi),
            model.phi_prime((phi - alpha).rem_euclid(1.0)),
        );
        let image = s.eval(phi).apply(u);
        let target = (model.phi_prime((phi + alpha).rem_euclid(1.0)), u.0);
        vec_res = vec_res
            .max((image.0 - target.0).abs())
            .max((image.1 - target.1).abs());
        let v = model.v.eval(phi);
        scalar_res = scalar_res.max(
            (v * u.0
                + model.phi_prime((phi + alpha).rem_euclid(1.0))
                + model.phi_prime((phi - alpha).rem_euclid(1.0)))
            .abs(),
        );
    }
    (vec_res, scalar_res)
}

/// Normalizing matrix `Q_0` conjugating `B_0` to the free Schrödinger
/// matrix `[[2, -1], [1, 0]]`; only the `nu0 < 0` branch is supported.
pub fn q0_normalize(nu0: f64) -> Result<(Mat2, f64)> {
    if nu0 >= 0.0 {
        return Err(QcError::PositiveNu0 { nu0 });
    }
    let nu1 = (-nu0).sqrt();
    let q0 = Mat2::new(-0.5 * nu1, -0.5 * nu1, 1.0 / nu1, -1.0 / nu1);
    let b0 = Mat2::new(1.0, nu0, 0.0, 1.0);
    let free = Mat2::new(2.0, -1.0, 1.0, 0.0);
    let check = q0.inverse().mul(b0).mul(q0).sub(free).op_norm();
    Ok((q0, check))
}

/// Sup norm of the first-order perturbation
/// `(Z_0(phi+alpha)^{-1} S_eps^V(phi) Z_0(phi) - S_0^0) / eps` with
/// `Z_0 = Z Q_0`, reported for small energy offsets.
pub fn perturbation_norm(model: &TwistModel, red: &ReductionResult, eps: f64) -> Result<f64> {
    let (q0, _) = q0_normalize(red.nu0)?;
    let alpha = model.alpha.value();
    let s = schrodinger_cocycle(&model.v, alpha, eps);
    let free = Mat2::new(2.0, -1.0, 1.0, 0.0);
    let grid = model.meta.grid;
    Ok((0..grid)
        .map(|j| {
            let phi = j as f64 / grid as f64;
            let z0 = red.z_at(phi).mul(q0);
            let z0_next = red.z_at(phi + alpha).mul(q0);
            z0_next
                .inverse()
                .mul(s.eval(phi))
                .mul(z0)
                .sub(free)
                .op_norm()
                / eps.abs()
        })
        .fold(0.0, f64::max))
}

// ---------------------------------------------------------------------------
// Uniform hyperbolicity probe

#[derive(Debug, Clone, Copy)]
pub struct UhReport {
    pub uniformly_hyperbolic: bool,
    /// Min over the phase grid of the exponential growth rate, after
    /// subtracting the polynomial allowance.
    pub margin: f64,
    /// Max angle (sine) between the forward images of two transverse
    /// starting directions; small means they collapsed onto an unstable
    /// direction.
    pub alignment: f64,
}

/// Exponential-dichotomy probe: uniformly hyperbolic cocycles show uniform
/// exponential norm growth and collapse transverse directions onto a single
/// unstable direction. Margins inside the noise floor are inconclusive.
pub fn uh_test(c: &MatrixCocycle, n: usize, phase_grid: usize) -> Result<UhReport> {
    let mut min_rate = f64::INFINITY;
    let mut worst_alignment: f64 = 0.0;
    for j in 0..phase_grid {
        let phi0 = j as f64 / phase_grid as f64;
        let mut phi = phi0;
        let mut u = (1.0f64, 0.0f64);
        let mut w = (0.0f64, 1.0f64);
        let mut log_u = 0.0;
        let mut log_w = 0.0;
        for _ in 0..n {
            let m = c.eval(phi);
            u = m.apply(u);
            w = m.apply(w);
            let nu = (u.0 * u.0 + u.1 * u.1).sqrt();
            let nw = (w.0 * w.0 + w.1 * w.1).sqrt();
            log_u += nu.ln();
            log_w += nw.ln();
            u = (u.0 / nu, u.1 / nu);
            w = (w.0 / nw, w.1 / nw);
            phi = c.base.step(phi);
        }
        let rate = log_u.max(log_w) / n as f64;
        min_rate = min_rate.min(rate);
        // projective alignment: |sin angle| between the two images
        worst_alignment = worst_alignment.max((u.0 * w.1 - u.1 * w.0).abs());
    }
    let allowance = 2.0 * ((n + 1) as f64).ln() / n as f64;
    let noise = ((n + 1) as f64).ln() / n as f64;
    let margin = min_rate - allowance;
    if margin.abs() < noise && margin > -noise {
        return Err(QcError::Inconclusive { margin, noise });
    }
    Ok(UhReport {
        uniformly_hyperbolic: margin > 0.0 && worst_alignment < 0.1,
        margin,
        alignment: worst_alignment,
    })
}
