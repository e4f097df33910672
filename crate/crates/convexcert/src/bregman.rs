//! Bregman distances, two-sided relative bounds against a reference
//! function, and the scale-variance probe for the sup-gap quantification.

use crate::error::{Error, Result};
use crate::linalg::{sample_pairs, SampleCloud, Vector};
use crate::objectives::Objective;
use serde::Serialize;

/// Reference denominators at or below this threshold are treated as a
/// coincident pair: skipped by the bound check, rejected by the ratio.
pub const DEGENERATE_DENOMINATOR: f64 = 1e-14;

/// Pass threshold on normalized margins (matches the certifier).
const PASS_TOL: f64 = 1e-9;

/// `D_f(x, y) = f(x) - f(y) - <grad f(y), x - y>`.
pub fn bregman(f: &Objective, x: &Vector, y: &Vector) -> Result<f64> {
    let fx = f.value_checked(x)?;
    let fy = f.value_checked(y)?;
    let gy = f.gradient_checked(y)?;
    Ok(fx - fy - gy.dot(&x.sub(y)))
}

/// Ratio `D_f(x, y) / D_phi(x, y)` for a strictly convex reference `phi`.
pub fn bregman_ratio(f: &Objective, phi: &Objective, x: &Vector, y: &Vector) -> Result<f64> {
    let denom = bregman(phi, x, y)?;
    if denom <= DEGENERATE_DENOMINATOR {
        return Err(Error::DegenerateReference { value: denom });
    }
    Ok(bregman(f, x, y)? / denom)
}

/// Outcome of checking `mu * D_phi <= D_f <= L * D_phi` over a sampled
/// cloud. Margins are normalized by `max(1, |D_phi|)` so the thresholds
/// survive large boxes.
#[derive(Clone, Debug, Serialize)]
pub struct BregmanBoundsReport {
    pub mu_tested: f64,
    pub l_tested: f64,
    pub n_pairs: usize,
    pub n_skipped: usize,
    pub lower_pass: bool,
    pub upper_pass: bool,
    pub worst_lower_margin: f64,
    pub worst_upper_margin: f64,
    pub worst_pair: Option<(Vector, Vector)>,
}

/// Evaluates both relative bounds on every sampled pair.
///
/// Pairs whose reference distance falls below [`DEGENERATE_DENOMINATOR`]
/// are counted as skipped rather than failed; the report keeps the pair
/// attaining the overall worst margin.
pub fn relative_bounds_check(
    f: &Objective,
    phi: &Objective,
    mu: f64,
    l: f64,
    cloud: &SampleCloud,
) -> Result<BregmanBoundsReport> {
    assert!(mu <= l, "lower constant must not exceed upper constant");
    let pairs = sample_pairs(cloud)?;
    let mut report = BregmanBoundsReport {
        mu_tested: mu,
        l_tested: l,
        n_pairs: 0,
        n_skipped: 0,
        lower_pass: true,
        upper_pass: true,
        worst_lower_margin: f64::INFINITY,
        worst_upper_margin: f64::INFINITY,
        worst_pair: None,
    };
    for (x, y) in &pairs {
        let d_phi = bregman(phi, x, y)?;
        if d_phi <= DEGENERATE_DENOMINATOR {
            report.n_skipped += 1;
            continue;
        }
        let d_f = bregman(f, x, y)?;
        let scale = d_phi.abs().max(1.0);
        let lower = (d_f - mu * d_phi) / scale;
        let upper = (l * d_phi - d_f) / scale;
        report.n_pairs += 1;
        let this_worst = lower.min(upper);
        if this_worst < report.worst_lower_margin.min(report.worst_upper_margin) {
            report.worst_pair = Some((x.clone(), y.clone()));
        }
        report.worst_lower_margin = report.worst_lower_margin.min(lower);
        report.worst_upper_margin = report.worst_upper_margin.min(upper);
    }
    report.lower_pass = report.worst_lower_margin >= -PASS_TOL;
    report.upper_pass = report.worst_upper_margin >= -PASS_TOL;
    Ok(report)
}

/// Measures how the sup-gap quantification `sup |D_phi - D_f|` reacts to
/// scaling both functions by `gamma`.
///
/// Returns `(G, G_scaled)` over the sampled pairs. The per-pair scaled gap
/// is obtained through the linearity of the Bregman distance in its
/// function slot, `D_{gamma h} = gamma * D_h`, so the contract
/// `G_scaled = gamma * G` holds exactly on the shared sample set.
pub fn gap_scaling_probe(
    f: &Objective,
    phi: &Objective,
    gamma: f64,
    cloud: &SampleCloud,
) -> Result<(f64, f64)> {
    assert!(gamma > 0.0, "scale factor must be positive");
    let pairs = sample_pairs(cloud)?;
    let mut g = 0.0f64;
    let mut g_scaled = 0.0f64;
    for (x, y) in &pairs {
        let gap = (bregman(phi, x, y)? - bregman(f, x, y)?).abs();
        g = g.max(gap);
        g_scaled = g_scaled.max(gamma * gap);
    }
    Ok((g, g_scaled))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::SymMatrix;
    use crate::objectives::{make_phi0, make_quadratic, scaled_shift, ShiftMode};

    fn diag14() -> Objective {
        make_quadratic(SymMatrix::diag(&[1.0, 4.0]), Vector::zeros(2)).unwrap()
    }

    #[test]
    fn bregman_of_phi0_is_half_squared_distance() {
        let phi0 = make_phi0(2);
        let cloud = SampleCloud::with_defaults(2, 3);
        for (x, y) in sample_pairs(&cloud).unwrap().into_iter().take(50) {
            let d = bregman(&phi0, &x, &y).unwrap();
            let expect = 0.5 * x.sub(&y).dot(&x.sub(&y));
            assert!((d - expect).abs() <= 1e-12 * expect.max(1.0));
        }
    }

    #[test]
    fn bregman_of_quadratic() {
        let f = diag14();
        let d = bregman(
            &f,
            &Vector::from_slice(&[1.0, 1.0]),
            &Vector::from_slice(&[0.0, 0.0]),
        )
        .unwrap();
        assert_eq!(d, 2.5);
    }

    #[test]
    fn bregman_collapses_on_diagonal() {
        let f = diag14();
        let x = Vector::from_slice(&[0.3, -1.2]);
        assert_eq!(bregman(&f, &x, &x).unwrap(), 0.0);
    }

    #[test]
    fn ratio_along_axes() {
        let f = diag14();
        let phi0 = make_phi0(2);
        let x = Vector::from_slice(&[1.0, 0.7]);
        let e1 = Vector::from_slice(&[1.8, 0.7]);
        let e2 = Vector::from_slice(&[1.0, -0.4]);
        assert!((bregman_ratio(&f, &phi0, &e1, &x).unwrap() - 1.0).abs() < 1e-12);
        assert!((bregman_ratio(&f, &phi0, &e2, &x).unwrap() - 4.0).abs() < 1e-12);
        assert!((bregman_ratio(&phi0, &phi0, &e1, &x).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ratio_rejects_degenerate_reference() {
        let f = diag14();
        let phi0 = make_phi0(2);
        let x = Vector::from_slice(&[1.0, 1.0]);
        let y = Vector::from_slice(&[1.0, 1.0 + 1e-9]);
        assert!(matches!(
            bregman_ratio(&f, &phi0, &x, &y),
            Err(Error::DegenerateReference { .. })
        ));
    }

    #[test]
    fn relative_bounds_spectral() {
        let f = diag14();
        let phi0 = make_phi0(2);
        let cloud = SampleCloud::with_defaults(2, 7);
        let report = relative_bounds_check(&f, &phi0, 1.0, 4.0, &cloud).unwrap();
        assert!(report.lower_pass && report.upper_pass, "{report:?}");

        let report = relative_bounds_check(&f, &phi0, 1.5, 4.0, &cloud).unwrap();
        assert!(!report.lower_pass);
        assert!(report.upper_pass);
        assert!(report.worst_lower_margin < -1e-3);
        // The violating pair is dominated by the low-curvature axis.
        let (x, y) = report.worst_pair.unwrap();
        let d = x.sub(&y);
        assert!(d[0].abs() > d[1].abs());
    }

    #[test]
    fn relative_bounds_tight_on_phi0() {
        let phi0 = make_phi0(2);
        let cloud = SampleCloud::with_defaults(2, 9);
        let report = relative_bounds_check(&phi0, &phi0, 1.0, 1.0, &cloud).unwrap();
        assert!(report.lower_pass && report.upper_pass);
        assert!(report.worst_lower_margin.abs() <= 1e-12);
        assert!(report.worst_upper_margin.abs() <= 1e-12);
    }

    #[test]
    fn bregman_linearity_on_quadratics() {
        let f = diag14();
        let g = make_quadratic(
            SymMatrix::from_row_major(2, vec![2.0, 1.0, 1.0, 2.0]).unwrap(),
            Vector::zeros(2),
        )
        .unwrap();
        let combo = make_quadratic(
            SymMatrix::from_row_major(
                2,
                vec![
                    0.5 * 1.0 + 2.0 * 2.0,
                    2.0 * 1.0,
                    2.0 * 1.0,
                    0.5 * 4.0 + 2.0 * 2.0,
                ],
            )
            .unwrap(),
            Vector::zeros(2),
        )
        .unwrap();
        let cloud = SampleCloud::with_defaults(2, 21);
        for (x, y) in sample_pairs(&cloud).unwrap().into_iter().take(100) {
            let lhs = bregman(&combo, &x, &y).unwrap();
            let rhs = 0.5 * bregman(&f, &x, &y).unwrap() + 2.0 * bregman(&g, &x, &y).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn shifted_bregman_identity() {
        let f = diag14();
        let phi0 = make_phi0(2);
        let l = 4.0;
        let shifted = scaled_shift(&f, l, ShiftMode::LMinusF);
        let cloud = SampleCloud::with_defaults(2, 23);
        for (x, y) in sample_pairs(&cloud).unwrap().into_iter().take(100) {
            let lhs = bregman(&shifted, &x, &y).unwrap();
            let rhs = l * bregman(&phi0, &x, &y).unwrap() - bregman(&f, &x, &y).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn convex_catalog_has_nonnegative_bregman() {
        for f in crate::objectives::sample_catalog() {
            if !f.meta().is_convex {
                continue;
            }
            let cloud = SampleCloud::with_defaults(f.dim(), 31);
            for (x, y) in sample_pairs(&cloud).unwrap().into_iter().take(500) {
                assert!(bregman(&f, &x, &y).unwrap() >= -1e-12, "{}", f.name());
            }
        }
    }

    #[test]
    fn ratio_stays_in_spectral_interval() {
        let f = diag14();
        let phi0 = make_phi0(2);
        let cloud = SampleCloud::with_defaults(2, 37);
        for (x, y) in sample_pairs(&cloud).unwrap() {
            let r = bregman_ratio(&f, &phi0, &x, &y).unwrap();
            assert!(r >= 1.0 - 1e-9 && r <= 4.0 + 1e-9, "ratio {r}");
        }
    }

    #[test]
    fn gap_scaling_examples() {
        let f = diag14();
        let phi0 = make_phi0(2);
        let cloud = SampleCloud::with_defaults(2, 7);
        let (g, g2) = gap_scaling_probe(&f, &phi0, 2.0, &cloud).unwrap();
        assert!(g > 0.0);
        assert_eq!(g2, 2.0 * g);
        let (g, g1) = gap_scaling_probe(&f, &phi0, 1.0, &cloud).unwrap();
        assert_eq!(g1, g);
        let (z, z2) = gap_scaling_probe(&phi0, &phi0, 3.0, &cloud).unwrap();
        assert_eq!((z, z2), (0.0, 0.0));
    }

    #[test]
    fn gap_scaling_exact_for_arbitrary_gamma() {
        let f = diag14();
        let phi0 = make_phi0(2);
        let cloud = SampleCloud::with_box(2, -2.0, 2.0, 200, 11).unwrap();
        for gamma in [0.3, 1.7, 3.0, 7.5] {
            let (g, gs) = gap_scaling_probe(&f, &phi0, gamma, &cloud).unwrap();
            assert_eq!(gs, gamma * g);
        }
    }
}
