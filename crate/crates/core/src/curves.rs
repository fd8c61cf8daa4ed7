//! Forward construction of twist maps with an exact analytic invariant
//! curve from a circle-diffeomorphism conjugacy, and certification of the
//! invariance on an oversampled grid.
//!
//! Given an irrational `alpha` and a diffeomorphism `phi`, the curve data is
//!
//! ```text
//! gamma = I - phi r_alpha^{-1} phi^{-1}
//! f     = phi r_alpha phi^{-1} - 2 I + phi r_alpha^{-1} phi^{-1}
//! g     = phi r_alpha phi^{-1}
//! V     = -f' o phi - 2
//! ```
//!
//! and the graph of `gamma` is invariant under the twist map driven by `f`.

use serde::{Deserialize, Serialize};

use crate::contfrac::Irrational;
use crate::diffeo::CircleDiffeo;
use crate::error::{QcError, Result};
use crate::fourier::{FourierSeries, SeriesWithMean};
use crate::twist::{twist_step, CylinderState};

/// Residual threshold for certification of a freshly constructed model.
pub const CERT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelResiduals {
    /// sup |f - (gamma o g - gamma)| on the grid.
    pub invariance: f64,
    /// |mean f|
    pub mean_f: f64,
    /// sup distance between the two constructions of g.
    pub g_consistency: f64,
    /// sup |g'(phi) (1 - gamma'(g(phi))) - 1| on the grid.
    pub derivative_identity: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelMeta {
    pub modes: usize,
    pub grid: usize,
    pub residuals: ModelResiduals,
}

/// A twist map bundled with a certified analytic invariant curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TwistModel {
    pub alpha: Irrational,
    pub phi: CircleDiffeo,
    /// Inverse of `phi`, cached at construction.
    pub phi_inv: CircleDiffeo,
    /// Zero-mean forcing of the twist map.
    pub f: FourierSeries,
    /// Curve height; mean is the rotation number alpha.
    pub gamma: SeriesWithMean,
    /// Potential `-f' o phi - 2`.
    pub v: SeriesWithMean,
    /// Analyticity-width estimate from the decay of the f coefficients.
    pub strip_h0: f64,
    pub meta: ModelMeta,
}

impl TwistModel {
    /// Builds and certifies a model. The grid is at least 4x the mode count
    /// so residual evaluation is alias-safe.
    pub fn construct(alpha: Irrational, phi: CircleDiffeo, n_modes: usize, grid: usize) -> Result<Self> {
        let a = alpha.value();
        let grid = grid.max(4 * n_modes).max(64);
        let phi_inv = phi.invert(1e-13)?;

        // Lift-level samples. The linear parts of the lifts cancel in both
        // f and gamma, so the sampled values are periodic; this is checked
        // implicitly by the Fourier refit and the certification residual.
        let mut f_samples = Vec::with_capacity(grid);
        let mut gamma_samples = Vec::with_capacity(grid);
        let mut g_samples = Vec::with_capacity(grid);
        for j in 0..grid {
            let x = j as f64 / grid as f64;
            let y = phi_inv.lift(x);
            let fwd = phi.lift(y + a);
            let bwd = phi.lift(y - a);
            f_samples.push(fwd - 2.0 * x + bwd);
            gamma_samples.push(x - bwd);
            g_samples.push(fwd - x);
        }
        let f = FourierSeries::fit_samples(&f_samples, n_modes)?;
        let gamma_full = FourierSeries::fit_samples(&gamma_samples, n_modes)?;
        let gamma = SeriesWithMean::from_series(&gamma_full);
        let g = CircleDiffeo::new(FourierSeries::fit_samples(&g_samples, n_modes)?)?;

        // V = -f' o phi - 2 sampled directly
        let fprime = f.derivative();
        let v_samples: Vec<f64> = (0..grid)
            .map(|j| {
                let x = j as f64 / grid as f64;
                -fprime.eval(phi.lift(x).rem_euclid(1.0)) - 2.0
            })
            .collect();
        let v = SeriesWithMean::from_series(&FourierSeries::fit_samples(&v_samples, n_modes)?);

        let residuals = certify(&f, &gamma, &g, a, &phi, &phi_inv, grid)?;
        let strip_h0 = if f.l1_norm() < 1e-14 {
            // free model: every entry is entire, use the conventional width
            1.0
        } else {
            f.decay_width()
        };
        Ok(TwistModel {
            alpha,
            phi,
            phi_inv,
            f,
            gamma,
            v,
            strip_h0,
            meta: ModelMeta {
                modes: n_modes,
                grid,
                residuals,
            },
        })
    }

    /// The induced circle map `g`, as the conjugacy `phi r_alpha phi^{-1}`.
    /// Construction via `phi + gamma + f` agrees within the certified
    /// g-consistency residual.
    pub fn induced_circle_map(&self) -> Result<CircleDiffeo> {
        let a = self.alpha.value();
        let n = self.meta.modes;
        let grid = self.meta.grid;
        let samples: Vec<f64> = (0..grid)
            .map(|j| {
                let x = j as f64 / grid as f64;
                self.phi.lift(self.phi_inv.lift(x) + a) - x
            })
            .collect();
        CircleDiffeo::new(FourierSeries::fit_samples(&samples, n)?)
    }

    /// Direct evaluation of `g` as a lift.
    pub fn g_lift(&self, x: f64) -> f64 {
        let frac = x.rem_euclid(1.0);
        let base = x - frac;
        base + self.phi.lift(self.phi_inv.lift(frac) + self.alpha.value())
    }

    /// Derivative of the conjugacy lift, `phi'`.
    pub fn phi_prime(&self, x: f64) -> f64 {
        self.phi.derivative(x)
    }

    /// Point on the invariant curve at phase `phi0`.
    pub fn curve_point(&self, phi0: f64) -> CylinderState {
        CylinderState {
            x: phi0,
            r: self.gamma.eval(phi0.rem_euclid(1.0)),
        }
    }

    /// Max over the grid of the second-coordinate defect of
    /// `psi(phi, gamma(phi)) - (g(phi), gamma(g(phi)))`.
    pub fn invariance_residual(&self) -> f64 {
        invariance_residual(&self.f, &self.gamma, |x| self.g_lift(x), self.meta.grid)
    }

    /// Distance of a cylinder point to the graph of gamma.
    pub fn graph_distance(&self, s: CylinderState) -> f64 {
        (s.r - self.gamma.eval(s.x.rem_euclid(1.0))).abs()
    }
}

/// Residual of graph invariance for arbitrary `(f, gamma)` data: the image
/// of `(phi, gamma(phi))` under the twist map must land on the graph again.
pub fn invariance_residual<G: Fn(f64) -> f64>(
    f: &FourierSeries,
    gamma: &SeriesWithMean,
    g_lift: G,
    grid: usize,
) -> f64 {
    (0..grid)
        .map(|j| {
            let phi = j as f64 / grid as f64;
            let image = twist_step(f, CylinderState { x: phi, r: gamma.eval(phi) });
            let target = gamma.eval(g_lift(phi).rem_euclid(1.0));
            (image.r - target).abs()
        })
        .fold(0.0, f64::max)
}

/// Recovers `gamma = I - g^{-1}` from the circle map alone; the mean of the
/// result is the rotation number of the displacement.
pub fn gamma_from_g(g: &CircleDiffeo) -> Result<SeriesWithMean> {
    let g_inv = g.invert(1e-13)?;
    let n = g.periodic_part().n_modes().max(1);
    let grid = (4 * n).max(64);
    let samples: Vec<f64> = (0..grid)
        .map(|j| {
            let x = j as f64 / grid as f64;
            x - g_inv.lift(x)
        })
        .collect();
    Ok(SeriesWithMean::from_series(&FourierSeries::fit_samples(
        &samples, n,
    )?))
}

fn certify(
    f: &FourierSeries,
    gamma: &SeriesWithMean,
    g: &CircleDiffeo,
    alpha: f64,
    phi: &CircleDiffeo,
    phi_inv: &CircleDiffeo,
    grid: usize,
) -> Result<ModelResiduals> {
    let mut invariance: f64 = 0.0;
    let mut g_consistency: f64 = 0.0;
    let mut derivative_identity: f64 = 0.0;
    for j in 0..grid {
        let x = j as f64 / grid as f64;
        let g_conj = phi.lift(phi_inv.lift(x) + alpha);
        let g_sum = x + gamma.eval(x) + f.eval(x);
        g_consistency = g_consistency.max((g_conj - g_sum).abs());
        let coboundary = gamma.eval(g_conj.rem_euclid(1.0)) - gamma.eval(x);
        invariance = invariance.max((f.eval(x) - coboundary).abs());
        let gp = g.derivative(x);
        let gamma_p_at_g = gamma.eval_derivative(g_conj.rem_euclid(1.0));
        derivative_identity = derivative_identity.max((gp * (1.0 - gamma_p_at_g) - 1.0).abs());
    }
    let mean_f = f.mean().abs();
    if invariance > CERT_TOL || mean_f > CERT_TOL {
        return Err(QcError::InvarianceCertificationFailed {
            residual: invariance.max(mean_f),
            tol: CERT_TOL,
        });
    }
    if g_consistency > CERT_TOL {
        return Err(QcError::ConsistencyFailure { sup: g_consistency });
    }
    Ok(ModelResiduals {
        invariance,
        mean_f,
        g_consistency,
        derivative_identity,
    })
}

/// The single-harmonic conjugacy `x + c sin(2 pi x)/(2 pi)` used throughout
/// the examples and the test suite.
pub fn single_harmonic_phi(c: f64, n_modes: usize) -> Result<CircleDiffeo> {
    let amp = c / (2.0 * std::f64::consts::PI);
    CircleDiffeo::new(FourierSeries::from_harmonics(&[(1, 0.0, amp)], n_modes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn golden_model(c: f64) -> TwistModel {
        TwistModel::construct(
            Irrational::Golden,
            single_harmonic_phi(c, 256).unwrap(),
            256,
            2048,
        )
        .unwrap()
    }

    #[test]
    fn identity_conjugacy_gives_rigid_rotation() {
        let model = TwistModel::construct(Irrational::Golden, CircleDiffeo::identity(), 16, 128)
            .unwrap();
        assert!(model.f.l1_norm() < 1e-12);
        assert_abs_diff_eq!(model.gamma.mean, Irrational::Golden.value(), epsilon = 1e-12);
        assert!(model.gamma.series.l1_norm() < 1e-12);
        assert_abs_diff_eq!(model.v.eval(0.3), -2.0, epsilon = 1e-12);
    }

    #[test]
    fn certified_residuals_single_harmonic() {
        let model = golden_model(0.3);
        assert!(model.meta.residuals.invariance < 1e-10);
        assert!(model.meta.residuals.mean_f < 1e-12);
        assert!(model.meta.residuals.g_consistency < 1e-10);
        assert!(model.meta.residuals.derivative_identity < 1e-9);
    }

    #[test]
    fn curve_point_maps_to_curve_point() {
        let model = golden_model(0.3);
        for &phi0 in &[0.0, 0.17, 0.5, 0.83] {
            let image = twist_step(&model.f, model.curve_point(phi0));
            let g_phi0 = model.g_lift(phi0);
            assert_abs_diff_eq!(image.x, g_phi0, epsilon = 1e-9);
            assert!(model.graph_distance(image) < 1e-9);
        }
    }

    #[test]
    fn induced_map_rotation_number() {
        let model = golden_model(0.3);
        let (rho, _) = crate::diffeo::rotation_number(|x| model.g_lift(x), 0.1, 100_000);
        assert!((rho - Irrational::Golden.value()).abs() < 1e-6);
    }

    #[test]
    fn gamma_round_trip_through_g() {
        let model = golden_model(0.3);
        let g = model.induced_circle_map().unwrap();
        let recovered = gamma_from_g(&g).unwrap();
        assert_abs_diff_eq!(recovered.mean, model.gamma.mean, epsilon = 1e-8);
        let sup = (0..512)
            .map(|j| {
                let x = j as f64 / 512.0;
                (recovered.eval(x) - model.gamma.eval(x)).abs()
            })
            .fold(0.0, f64::max);
        assert!(sup < 1e-8, "gamma round-trip sup = {sup:e}");
        // defining identity g(x) = x + gamma(g(x))
        let ident = (0..512)
            .map(|j| {
                let x = j as f64 / 512.0;
                let gx = g.lift(x);
                (gx - x - recovered.eval(gx.rem_euclid(1.0))).abs()
            })
            .fold(0.0, f64::max);
        assert!(ident < 1e-10, "identity residual = {ident:e}");
    }

    #[test]
    fn gamma_of_rigid_rotation_is_constant() {
        let alpha = Irrational::Golden.value();
        let g = CircleDiffeo::rotation(alpha);
        let gamma = gamma_from_g(&g).unwrap();
        assert_abs_diff_eq!(gamma.mean, alpha, epsilon = 1e-12);
        assert!(gamma.series.l1_norm() < 1e-12);
    }

    #[test]
    fn perturbed_gamma_breaks_invariance() {
        let model = golden_model(0.3);
        let bump = FourierSeries::from_harmonics(&[(1, 0.01, 0.0)], 4);
        let perturbed = SeriesWithMean::new(model.gamma.mean, model.gamma.series.add(&bump));
        let res = invariance_residual(&model.f, &perturbed, |x| model.g_lift(x), 2048);
        assert!(
            (1e-3..1e-1).contains(&res),
            "residual {res:e} should be of the perturbation's order"
        );
    }

    #[test]
    fn coefficients_decay_exponentially() {
        let model = golden_model(0.3);
        assert!(model.strip_h0 > 0.0, "fitted width {}", model.strip_h0);
        // spot-check the fitted envelope on a few modes
        let c0 = model.f.coeff(1).norm();
        for k in [4i64, 8, 16] {
            let bound = c0 * (-2.0 * std::f64::consts::PI * model.strip_h0 * 0.5 * (k - 1) as f64).exp();
            assert!(
                model.f.coeff(k).norm() < bound,
                "mode {k} above half-width envelope"
            );
        }
    }

    #[test]
    fn model_json_round_trip() {
        let model = golden_model(0.2);
        let text = serde_json::to_string(&model).unwrap();
        let back: TwistModel = serde_json::from_str(&text).unwrap();
        assert_abs_diff_eq!(back.gamma.mean, model.gamma.mean, epsilon = 0.0);
        assert!(back.invariance_residual() < 1e-9);
    }
}
