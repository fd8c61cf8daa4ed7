//! Finite-section spectra, integrated density of states, the dual (Aubry)
//! operator, resonances, and the quantitative spectral-measure factor.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cocycle::{fibered_rotation_number, schrodinger_cocycle, sup_norms};
use crate::curves::TwistModel;
use crate::error::{QcError, Result};
use crate::fourier::SeriesWithMean;
use crate::tridiag::TridiagonalOperator;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Circle distance to the nearest integer.
pub fn torus_dist(x: f64) -> f64 {
    let frac = x.rem_euclid(1.0);
    frac.min(1.0 - frac)
}

// ---------------------------------------------------------------------------
// Finite sections

/// Dirichlet section of size `n`: diagonal `V(phi0 + k alpha)`, unit
/// off-diagonals.
pub fn finite_section(v: &SeriesWithMean, alpha: f64, phi0: f64, n: usize) -> TridiagonalOperator {
    let diagonal = (0..n)
        .map(|k| v.eval((phi0 + k as f64 * alpha).rem_euclid(1.0)))
        .collect();
    TridiagonalOperator::new(diagonal)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralReport {
    pub eigenvalues: Vec<f64>,
    pub ids_samples: Vec<(f64, f64)>,
    pub top_eigenvalue: f64,
    pub section_size: usize,
    pub phase: f64,
}

/// Full Dirichlet-section spectrum plus IDS samples read off the same
/// section by eigenvalue counting.
pub fn finite_section_eigs(
    v: &SeriesWithMean,
    alpha: f64,
    phi0: f64,
    n: usize,
) -> Result<SpectralReport> {
    if n < 2 {
        return Err(QcError::InvalidInput(format!("section size {n} < 2")));
    }
    let op = finite_section(v, alpha, phi0, n);
    let eigenvalues = op.eigenvalues();
    let (lo, hi) = op.bounds();
    let ids_samples = (0..=32)
        .map(|j| {
            let e = lo + (hi - lo) * j as f64 / 32.0;
            (e, op.count_below(e) as f64 / n as f64)
        })
        .collect();
    let top_eigenvalue = *eigenvalues.last().unwrap();
    Ok(SpectralReport {
        eigenvalues,
        ids_samples,
        top_eigenvalue,
        section_size: n,
        phase: phi0,
    })
}

/// Per-size edge diagnostics: Dirichlet top eigenvalue and the windowed
/// Bloch-wave Rayleigh quotient that bounds it from below.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeProbe {
    pub sizes: Vec<usize>,
    pub top_eigenvalues: Vec<f64>,
    pub rayleigh_bounds: Vec<f64>,
}

/// Tracks the finite-section edge toward 0. The trial vector is the Bloch
/// section phi' tapered by a raised cosine, giving an O(1/n^2) defect.
pub fn edge_probe(model: &TwistModel, sizes: &[usize]) -> EdgeProbe {
    let alpha = model.alpha.value();
    let phi0 = 0.0;
    let mut tops = Vec::with_capacity(sizes.len());
    let mut bounds = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let op = finite_section(&model.v, alpha, phi0, n);
        tops.push(op.top_eigenvalue());
        let u: Vec<f64> = (0..n)
            .map(|k| {
                let taper = 0.5 * (1.0 - (TWO_PI * (k + 1) as f64 / (n + 1) as f64).cos());
                taper * model.phi_prime((phi0 + k as f64 * alpha).rem_euclid(1.0))
            })
            .collect();
        bounds.push(op.rayleigh(&u));
    }
    EdgeProbe {
        sizes: sizes.to_vec(),
        top_eigenvalues: tops,
        rayleigh_bounds: bounds,
    }
}

// ---------------------------------------------------------------------------
// Integrated density of states

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IdsEstimate {
    pub counting: f64,
    pub rotation: f64,
    /// Set when the two methods differ by more than 0.02; a flag, not an
    /// error — both values are still reported.
    pub disagreement: bool,
}

pub const IDS_DISAGREEMENT_TOL: f64 = 0.02;

/// IDS by eigenvalue counting on a Dirichlet section and by the
/// gap-labelling relation `N = 1 - 2 rho`, cross-validated.
pub fn ids_estimate(
    v: &SeriesWithMean,
    alpha: f64,
    phi0: f64,
    energy: f64,
    n: usize,
    rho_iters: usize,
) -> Result<IdsEstimate> {
    let op = finite_section(v, alpha, phi0, n);
    let counting = op.count_below(energy) as f64 / n as f64;
    let cocycle = schrodinger_cocycle(v, alpha, energy);
    let rho = fibered_rotation_number(&cocycle, rho_iters)?;
    let rotation = (1.0 - 2.0 * rho).clamp(0.0, 1.0);
    Ok(IdsEstimate {
        counting,
        rotation,
        disagreement: (counting - rotation).abs() > IDS_DISAGREEMENT_TOL,
    })
}

// ---------------------------------------------------------------------------
// Dual (Aubry) operator

/// Applies the dual operator to a coefficient window `u` centered at 0
/// (length 2m+1): `(H u)_n = sum_k v_{n-k} u_k + 2 cos(2 pi (phi0 + n alpha)) u_n`.
///
/// The convolution must stay inside the stored potential modes: `2m` may not
/// exceed the mode count of `v`.
pub fn dual_apply(
    v: &SeriesWithMean,
    alpha: f64,
    phi0: f64,
    u: &[Complex64],
) -> Result<Vec<Complex64>> {
    if u.len() % 2 != 1 {
        return Err(QcError::InvalidInput(format!(
            "dual window length {} is even",
            u.len()
        )));
    }
    let m = (u.len() / 2) as i64;
    let v_series = v.to_series();
    let n_modes = v_series.n_modes() as i64;
    if 2 * m > n_modes {
        return Err(QcError::WindowTooSmall {
            support: 2 * m as usize,
            window: n_modes as usize,
        });
    }
    let mut out = vec![Complex64::ZERO; u.len()];
    for n in -m..=m {
        let mut acc = Complex64::ZERO;
        for k in -m..=m {
            acc += v_series.coeff(n - k) * u[(k + m) as usize];
        }
        acc += 2.0 * (TWO_PI * (phi0 + n as f64 * alpha)).cos() * u[(n + m) as usize];
        out[(n + m) as usize] = acc;
    }
    Ok(out)
}

fn l2_norm(u: &[Complex64]) -> f64 {
    u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DualCheck {
    /// Relative l2 residual of the dual operator on the phi' coefficients.
    pub residual: f64,
    /// Log-linear slope of |phi'_k| against |k|; negative for analytic phi.
    pub decay_rate: f64,
    /// Grid sup of `|V phi' + phi'(. + alpha) + phi'(. - alpha)|`.
    pub potential_identity: f64,
}

/// Certifies that the phi' coefficient sequence is a dual eigenvector at
/// phase 0 with eigenvalue 0, with exponential decay.
pub fn dual_eigencheck(model: &TwistModel) -> Result<DualCheck> {
    let alpha = model.alpha.value();
    let phi_prime = model
        .phi
        .periodic_part()
        .derivative()
        .add(&crate::fourier::FourierSeries::constant(1.0, 0));
    let n_modes = phi_prime.n_modes() as i64;
    let m = (model.v.series.n_modes() as i64 / 2).min(n_modes);
    let u: Vec<Complex64> = (-m..=m).map(|k| phi_prime.coeff(k)).collect();
    let image = dual_apply(&model.v, alpha, 0.0, &u)?;
    let norm = l2_norm(&u);
    let residual = l2_norm(&image) / norm;

    // decay fit over the coefficients above the noise floor
    let mut pts = Vec::new();
    for k in 1..=n_modes {
        let mag = phi_prime.coeff(k).norm().max(phi_prime.coeff(-k).norm());
        if mag > 1e-14 * norm {
            pts.push((k as f64, mag.ln()));
        }
    }
    let decay_rate = if pts.len() < 2 {
        // spectrum concentrated at k = 0: decay is immediate
        -TWO_PI
    } else {
        let n = pts.len() as f64;
        let (sx, sy, sxx, sxy) = pts.iter().fold((0.0, 0.0, 0.0, 0.0), |acc, &(x, y)| {
            (acc.0 + x, acc.1 + y, acc.2 + x * x, acc.3 + x * y)
        });
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    };

    let grid = model.meta.grid;
    let potential_identity = (0..grid)
        .map(|j| {
            let phi = j as f64 / grid as f64;
            (model.v.eval(phi) * model.phi_prime(phi)
                + model.phi_prime((phi + alpha).rem_euclid(1.0))
                + model.phi_prime((phi - alpha).rem_euclid(1.0)))
            .abs()
        })
        .fold(0.0, f64::max);

    Ok(DualCheck {
        residual,
        decay_rate,
        potential_identity,
    })
}

// ---------------------------------------------------------------------------
// Resonances

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResonanceReport {
    pub epsilon0: f64,
    pub resonances: Vec<i64>,
    pub phase: f64,
    pub scan_bound: i64,
}

/// Scans `|k| <= K` for epsilon0-resonances of the phase: `|2 phi0 - k alpha|`
/// on the torus at most `e^{-epsilon0 |k|}` and minimal among all `|l| <= |k|`.
pub fn resonance_scan(phi0: f64, alpha: f64, epsilon0: f64, k_max: i64) -> ResonanceReport {
    let dist = |k: i64| torus_dist(2.0 * phi0 - k as f64 * alpha);
    let mut resonances = Vec::new();
    for abs_k in 0..=k_max {
        for &k in &[abs_k, -abs_k] {
            if k == 0 && abs_k != 0 {
                continue;
            }
            let d = dist(k);
            if d > (-epsilon0 * abs_k as f64).exp() {
                continue;
            }
            let minimal = (-abs_k..=abs_k).all(|l| dist(l) >= d);
            if minimal {
                resonances.push(k);
            }
        }
    }
    resonances.sort_by_key(|k| (k.abs(), *k));
    ResonanceReport {
        epsilon0,
        resonances,
        phase: phi0,
        scan_bound: k_max,
    }
}

// ---------------------------------------------------------------------------
// Spectral-measure factor and homogeneity

/// The constant-free factor `eps * sup_{0 <= k <= ceil(1/eps)} ||A_k||^2` of
/// the spectral-measure bound; the universal constant multiplying it is not
/// asserted.
pub fn spectral_measure_bound(
    model: &TwistModel,
    energy: f64,
    eps: f64,
    phase_grid: usize,
) -> Result<f64> {
    if eps <= 0.0 {
        return Err(QcError::InvalidInput(format!(
            "radius {eps} must be positive"
        )));
    }
    let cocycle = schrodinger_cocycle(&model.v, model.alpha.value(), energy);
    let n = (1.0 / eps).ceil() as usize;
    let track = sup_norms(&cocycle, n, phase_grid);
    if track.overflowed {
        return Err(QcError::IterateOverflow {
            step: track.sup_norms.len(),
        });
    }
    // k = 0 contributes ||I|| = 1
    let sup = track.sup_norms.iter().fold(1.0f64, |a, &b| a.max(b));
    Ok(eps * sup * sup)
}

/// Fraction of an eps-net of `(e - eps, e + eps)` lying within `2/n` of a
/// finite-section eigenvalue — an empirical homogeneity curve, not a gate.
pub fn homogeneity_fraction(eigenvalues: &[f64], e: f64, eps: f64, n: usize) -> f64 {
    let net: Vec<f64> = (0..=32).map(|j| e - eps + 2.0 * eps * j as f64 / 32.0).collect();
    let tol = 2.0 / n as f64;
    let hits = net
        .iter()
        .filter(|&&x| eigenvalues.iter().any(|&ev| (ev - x).abs() <= tol))
        .count();
    hits as f64 / net.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contfrac::Irrational;
    use crate::curves::{single_harmonic_phi, TwistModel};
    use crate::diffeo::CircleDiffeo;
    use crate::fourier::FourierSeries;
    use approx::assert_abs_diff_eq;

    fn free_v() -> SeriesWithMean {
        SeriesWithMean::new(-2.0, FourierSeries::zero(8))
    }

    fn golden_model(c: f64) -> TwistModel {
        TwistModel::construct(
            Irrational::Golden,
            single_harmonic_phi(c, 128).unwrap(),
            128,
            1024,
        )
        .unwrap()
    }

    #[test]
    fn free_sections_match_closed_form() {
        let report = finite_section_eigs(&free_v(), Irrational::Golden.value(), 0.0, 100).unwrap();
        for (j, &ev) in report.eigenvalues.iter().enumerate() {
            let expected =
                2.0 * ((100 - j) as f64 * std::f64::consts::PI / 101.0).cos() - 2.0;
            assert_abs_diff_eq!(ev, expected, epsilon = 1e-10);
        }
        let top = 2.0 * (std::f64::consts::PI / 101.0).cos() - 2.0;
        assert_abs_diff_eq!(report.top_eigenvalue, top, epsilon = 1e-10);
    }

    #[test]
    fn report_invariants() {
        let model = golden_model(0.3);
        let report =
            finite_section_eigs(&model.v, model.alpha.value(), 0.33, 200).unwrap();
        assert!(report.eigenvalues.windows(2).all(|w| w[0] <= w[1] + 1e-12));
        assert!(report
            .ids_samples
            .windows(2)
            .all(|w| w[0].1 <= w[1].1 && (0.0..=1.0).contains(&w[0].1)));
    }

    #[test]
    fn model_sections_nonpositive() {
        let model = golden_model(0.3);
        for &n in &[100usize, 500, 2000] {
            let op = finite_section(&model.v, model.alpha.value(), 0.0, n);
            assert!(
                op.top_eigenvalue() <= 1e-10,
                "n = {n}: top = {:e}",
                op.top_eigenvalue()
            );
        }
    }

    #[test]
    fn free_edge_probe_rate() {
        let free =
            TwistModel::construct(Irrational::Golden, CircleDiffeo::identity(), 8, 64).unwrap();
        let probe = edge_probe(&free, &[100, 627]);
        assert_abs_diff_eq!(probe.top_eigenvalues[0], -9.67e-4, epsilon = 1e-6);
        assert_abs_diff_eq!(probe.top_eigenvalues[1], -2.5e-5, epsilon = 5e-7);
        for (&n, &b) in probe.sizes.iter().zip(&probe.rayleigh_bounds) {
            assert!(b <= 1e-12, "Rayleigh bound must be nonpositive");
            assert!(b > -40.0 / (n * n) as f64, "n = {n}: bound {b}");
        }
    }

    #[test]
    fn model_edge_probe_monotone_and_tight() {
        let model = golden_model(0.3);
        let probe = edge_probe(&model, &[250, 500, 1000, 2000]);
        for w in probe.top_eigenvalues.windows(2) {
            assert!(w[0] < w[1], "tops must increase with n: {w:?}");
        }
        for (&n, &t) in probe.sizes.iter().zip(&probe.top_eigenvalues) {
            assert!(t <= 1e-10);
            assert!(t > -10.0 / (n * n) as f64, "n = {n}: top {t}");
        }
    }

    #[test]
    fn free_ids_closed_forms() {
        let alpha = Irrational::Golden.value();
        let v = free_v();
        let est = ids_estimate(&v, alpha, 0.0, -2.0, 2000, 50_000).unwrap();
        assert!((est.counting - 0.5).abs() < 0.01);
        assert!((est.rotation - 0.5).abs() < 1e-3);
        assert!(!est.disagreement);

        let est = ids_estimate(&v, alpha, 0.0, 0.0, 2000, 50_000).unwrap();
        assert!(est.rotation > 0.999);
        let est = ids_estimate(&v, alpha, 0.0, -4.0, 2000, 50_000).unwrap();
        assert!(est.rotation < 0.001);
    }

    #[test]
    fn model_ids_cross_method() {
        let model = golden_model(0.3);
        let est =
            ids_estimate(&model.v, model.alpha.value(), 0.0, -1.0, 2000, 100_000).unwrap();
        assert!(
            (est.counting - est.rotation).abs() < 0.01,
            "counting {} vs rotation {}",
            est.counting,
            est.rotation
        );
    }

    #[test]
    fn dual_free_delta_is_kernel() {
        let v = free_v();
        let u = vec![Complex64::ZERO, Complex64::ONE, Complex64::ZERO];
        let out = dual_apply(&v, Irrational::Golden.value(), 0.0, &u).unwrap();
        assert!(l2_norm(&out) < 1e-14);
    }

    #[test]
    fn dual_zero_maps_to_zero() {
        let v = free_v();
        let u = vec![Complex64::ZERO; 5];
        let out = dual_apply(&v, 0.5477, 0.123, &u).unwrap();
        assert!(l2_norm(&out) == 0.0);
    }

    #[test]
    fn dual_window_guard() {
        let v = free_v(); // 8 modes stored
        let u = vec![Complex64::ONE; 11]; // m = 5, needs 10 > 8
        assert!(matches!(
            dual_apply(&v, 0.5477, 0.0, &u),
            Err(QcError::WindowTooSmall { .. })
        ));
    }

    #[test]
    fn dual_eigencheck_model() {
        let model = golden_model(0.3);
        let check = dual_eigencheck(&model).unwrap();
        assert!(check.residual < 1e-8, "residual {:e}", check.residual);
        assert!(check.decay_rate < 0.0, "decay rate {}", check.decay_rate);
        assert!(
            check.potential_identity < 1e-9,
            "identity residual {:e}",
            check.potential_identity
        );
    }

    #[test]
    fn dual_eigencheck_free() {
        let free =
            TwistModel::construct(Irrational::Golden, CircleDiffeo::identity(), 8, 64).unwrap();
        let check = dual_eigencheck(&free).unwrap();
        assert!(check.residual < 1e-12);
        assert!(check.decay_rate < 0.0);
    }

    #[test]
    fn resonance_trivial_cases() {
        let alpha = Irrational::Golden.value();
        let rep = resonance_scan(0.0, alpha, 1.0, 100);
        assert!(rep.resonances.contains(&0));

        let rep = resonance_scan(alpha / 2.0, alpha, 1.0, 100);
        assert!(rep.resonances.contains(&1), "{:?}", rep.resonances);
    }

    #[test]
    fn resonance_brute_force_agreement() {
        let alpha = Irrational::Golden.value();
        let (phi0, eps0, k_max) = (0.17, 1.0, 10_000);
        let rep = resonance_scan(phi0, alpha, eps0, k_max);
        // exhaustive re-check of both defining conditions
        let dist = |k: i64| torus_dist(2.0 * phi0 - k as f64 * alpha);
        let mut brute = Vec::new();
        for k in -k_max..=k_max {
            let d = dist(k);
            if d <= (-eps0 * k.abs() as f64).exp()
                && (-k.abs()..=k.abs()).all(|l| dist(l) >= d)
            {
                brute.push(k);
            }
        }
        brute.sort_by_key(|k| (k.abs(), *k));
        assert_eq!(rep.resonances, brute);
        assert!(rep.resonances.windows(2).all(|w| w[0].abs() < w[1].abs() || w[0] == -w[1]));
    }

    #[test]
    fn resonance_reflection() {
        let alpha = Irrational::Golden.value();
        let rep = resonance_scan(0.29, alpha, 0.8, 2000);
        let refl = resonance_scan(1.0 - 0.29, alpha, 0.8, 2000);
        let negated: Vec<i64> = {
            let mut v: Vec<i64> = rep.resonances.iter().map(|k| -k).collect();
            v.sort_by_key(|k| (k.abs(), *k));
            v
        };
        assert_eq!(refl.resonances, negated);
    }

    #[test]
    fn measure_factor_constant_cocycle() {
        // V congruent to 0, E = 0 gives S = [[0, -1], [1, 0]], a rotation:
        // all products have norm 1, factor = eps.
        let free = TwistModel::construct(Irrational::Golden, CircleDiffeo::identity(), 8, 64)
            .unwrap();
        let mut v = free.clone();
        v.v = SeriesWithMean::new(0.0, FourierSeries::zero(8));
        let eps = 0.01;
        let factor = spectral_measure_bound(&v, 0.0, eps, 16).unwrap();
        assert_abs_diff_eq!(factor, eps, epsilon = 1e-12);
    }

    #[test]
    fn measure_factor_free_elliptic() {
        // free case at E = -2: S = [[0, -1], [1, 0]] again; direct products
        // oracle over one phase
        let free = TwistModel::construct(Irrational::Golden, CircleDiffeo::identity(), 8, 64)
            .unwrap();
        let eps = 0.01;
        let factor = spectral_measure_bound(&free, -2.0, eps, 16).unwrap();
        let c = schrodinger_cocycle(&free.v, free.alpha.value(), -2.0);
        let prods = crate::cocycle::iterates(&c, 0.0, 100).unwrap();
        let sup = prods.iter().map(|p| p.op_norm()).fold(1.0f64, f64::max);
        assert_abs_diff_eq!(factor, eps * sup * sup, epsilon = 1e-10);
    }

    #[test]
    fn measure_factor_model_vs_reduction_bound() {
        let model = golden_model(0.3);
        let red = crate::cocycle::parabolic_reduce(&model).unwrap();
        let eps = 0.01;
        let factor = spectral_measure_bound(&model, 0.0, eps, 32).unwrap();
        let z_sup = red.z_sup_norm(512);
        let bound = {
            let linear = z_sup * z_sup * (1.0 + red.nu0.abs() / eps);
            eps * linear * linear
        };
        assert!(factor <= bound, "factor {factor:e} vs bound {bound:e}");
        assert!(factor * 2.0 >= eps, "factor cannot collapse below eps/2");
    }

    #[test]
    fn homogeneity_probe_reports_fraction() {
        let model = golden_model(0.3);
        let report =
            finite_section_eigs(&model.v, model.alpha.value(), 0.0, 500).unwrap();
        let inner: Vec<f64> = report
            .eigenvalues
            .iter()
            .copied()
            .filter(|&e| e > -0.05 && e < 0.0)
            .collect();
        if let Some(&e) = inner.first() {
            let frac = homogeneity_fraction(&report.eigenvalues, e, e.abs() / 2.0, 500);
            assert!((0.0..=1.0).contains(&frac));
            assert!(frac > 0.0, "the center point itself is within 2/n");
        }
    }
}
