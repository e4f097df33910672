//! Numeric Fenchel conjugation, the inverse-gradient map, and the duality
//! switch between smoothness of a function and strong convexity of its
//! conjugate.
//!
//! The conjugate value `f*(u) = sup_x { <x, u> - f(x) }` is computed by
//! gradient ascent on the concave inner problem, warm-started at `u` with a
//! backtracking halving line search. Conjugate gradients are read off as
//! argmax points (the inverse-gradient property), never by differencing
//! conjugate values.

use crate::certify::{self, CertReport, ConditionId, Constants, Witness};
use crate::error::{Error, Result};
use crate::linalg::{sample_pairs, SampleCloud, Vector};
use crate::matrix::SymMatrix;
use crate::objectives::{scaled_shift, Objective, ShiftMode};
use serde::Serialize;

/// Sufficient-increase fraction for the backtracking line search.
const SUFFICIENT_INCREASE: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

/// Inner-solver settings for conjugate evaluations.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ConjugateSolverParams {
    /// First-order optimality tolerance on `|grad f(x) - u|`.
    pub grad_tol: f64,
    pub max_iters: usize,
    /// Line-search starting step; halved until sufficient increase.
    pub initial_step: f64,
}

impl Default for ConjugateSolverParams {
    fn default() -> Self {
        ConjugateSolverParams {
            grad_tol: 1e-10,
            max_iters: 10_000,
            initial_step: 1.0,
        }
    }
}

/// A solved inner maximization.
#[derive(Clone, Debug)]
pub struct ConjugateSolution {
    /// The conjugate value `<argmax, u> - f(argmax)`.
    pub value: f64,
    /// The maximizer, which equals the conjugate gradient at `u`.
    pub argmax: Vector,
    /// Final first-order residual `|grad f(argmax) - u|`.
    pub residual: f64,
    pub iters: usize,
}

fn inner_value(f: &Objective, u: &Vector, x: &Vector) -> Result<f64> {
    Ok(u.dot(x) - f.value_checked(x)?)
}

/// Gradient ascent on `x -> <x, u> - f(x)` from an explicit starting point.
///
/// Well-posedness of the conjugate is the caller's responsibility; the
/// public entry points gate on the objective's metadata.
pub(crate) fn solve_from(
    f: &Objective,
    u: &Vector,
    start: &Vector,
    params: &ConjugateSolverParams,
) -> Result<ConjugateSolution> {
    let mut x = start.clone();
    let mut value = inner_value(f, u, &x)?;
    let mut iters = 0;
    loop {
        let ascent = u.sub(&f.gradient_checked(&x)?);
        let residual = ascent.norm();
        if residual <= params.grad_tol {
            return Ok(ConjugateSolution {
                value,
                argmax: x,
                residual,
                iters,
            });
        }
        if iters >= params.max_iters {
            return Err(Error::NonConvergence {
                tol: params.grad_tol,
                residual,
                iters,
                best: Box::new(x),
            });
        }
        let dir_sq = residual * residual;
        let mut step = params.initial_step;
        let mut moved = false;
        for _ in 0..MAX_HALVINGS {
            let cand = x.add(&ascent.scale(step));
            let cand_value = inner_value(f, u, &cand)?;
            if cand_value >= value + SUFFICIENT_INCREASE * step * dir_sq {
                x = cand;
                value = cand_value;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        iters += 1;
        if !moved {
            // Line search stalled at rounding level short of the tolerance.
            return Err(Error::NonConvergence {
                tol: params.grad_tol,
                residual,
                iters,
                best: Box::new(x),
            });
        }
    }
}

fn require_well_posed(f: &Objective) -> Result<()> {
    if f.meta().conjugate_well_posed {
        Ok(())
    } else {
        Err(Error::IllPosedConjugate {
            name: f.name().to_string(),
        })
    }
}

/// Numeric conjugate value and maximizer at `u`, warm-started at `u`.
///
/// Requires a strongly convex objective (the sup is then attained and the
/// conjugate differentiable). The returned argmax satisfies
/// `|grad f(argmax) - u| <= grad_tol`.
pub fn conjugate_numeric(
    f: &Objective,
    u: &Vector,
    params: &ConjugateSolverParams,
) -> Result<ConjugateSolution> {
    require_well_posed(f)?;
    solve_from(f, u, u, params)
}

/// Closed-form conjugate of the quadratic `x' Q x / 2`:
/// `u' inv(Q) u / 2` through an internally solved linear system.
pub fn conjugate_quadratic(q: &SymMatrix, u: &Vector) -> Result<f64> {
    let z = q.solve(u)?;
    Ok(0.5 * u.dot(&z))
}

/// The inverse-gradient map: the point where `grad f` attains `u`, i.e.
/// the conjugate gradient at `u`.
pub fn inverse_gradient(
    f: &Objective,
    u: &Vector,
    params: &ConjugateSolverParams,
) -> Result<Vector> {
    Ok(conjugate_numeric(f, u, params)?.argmax)
}

/// Residual `|f(x) + f*(grad f(x)) - <x, grad f(x)>|`; a small value
/// certifies the conjugacy equality at `x`.
pub fn fenchel_identity_residual(
    f: &Objective,
    x: &Vector,
    params: &ConjugateSolverParams,
) -> Result<f64> {
    require_well_posed(f)?;
    let u = f.gradient_checked(x)?;
    let conj = conjugate_numeric(f, &u, params)?;
    Ok((f.value_checked(x)? + conj.value - x.dot(&u)).abs())
}

/// Checks the shift duality: `gamma * phi0 - f` is convex exactly when
/// `f* - (1/gamma) * phi0` is convex.
///
/// The primal side runs the gradient-monotonicity convexity check on the
/// shifted function over the sampled pairs; the dual side runs the same
/// check on the conjugate shift, over the gradient image of the same pairs,
/// with conjugate gradients recovered as argmax points. Both reports carry
/// the primal pair as witness.
pub fn dual_shift_check(
    f: &Objective,
    gamma: f64,
    cloud: &SampleCloud,
    params: &ConjugateSolverParams,
) -> Result<(CertReport, CertReport)> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidConstants(format!(
            "shift scale must be positive, got {gamma}"
        )));
    }
    require_well_posed(f)?;
    let pairs = sample_pairs(cloud)?;

    let shifted = scaled_shift(f, gamma, ShiftMode::LMinusF);
    let mut primal = worst_tracker();
    let mut dual = worst_tracker();
    for (x, y) in &pairs {
        // Primal: monotone gradients of gamma*phi0 - f.
        let gx = shifted.gradient_checked(x)?;
        let gy = shifted.gradient_checked(y)?;
        let m = certify::normalized_margin(0.0, gx.sub(&gy).dot(&x.sub(y)));
        primal.observe(m, x, y);

        // Dual: monotone gradients of f* - (1/gamma)*phi0 at u = grad f.
        let u = f.gradient_checked(x)?;
        let v = f.gradient_checked(y)?;
        let du = solve_from(f, &u, x, params)?.argmax;
        let dv = solve_from(f, &v, y, params)?.argmax;
        let hu = du.sub(&u.scale(1.0 / gamma));
        let hv = dv.sub(&v.scale(1.0 / gamma));
        let m = certify::normalized_margin(0.0, hu.sub(&hv).dot(&u.sub(&v)));
        dual.observe(m, x, y);
    }

    let n = pairs.len();
    Ok((
        primal.into_report(cloud.seed(), n),
        dual.into_report(cloud.seed(), n),
    ))
}

struct WorstTracker {
    worst: f64,
    witness: Option<(Vector, Vector)>,
}

fn worst_tracker() -> WorstTracker {
    WorstTracker {
        worst: f64::INFINITY,
        witness: None,
    }
}

impl WorstTracker {
    fn observe(&mut self, margin: f64, x: &Vector, y: &Vector) {
        if margin < self.worst {
            self.worst = margin;
            self.witness = Some((x.clone(), y.clone()));
        }
    }

    fn into_report(self, seed: u64, n: usize) -> CertReport {
        CertReport {
            condition: ConditionId::Conv2,
            constants: Constants::default(),
            n_checks: n,
            n_skipped: 0,
            pass: self.worst >= -1e-9,
            worst_margin: self.worst,
            witness: self.witness.map(|(x, y)| Witness {
                x,
                y,
                lambda: None,
            }),
            seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{sample_points, SampleCloud};
    use crate::matrix::DenseMatrix;
    use crate::objectives::{make_least_squares, make_phi0, make_quadratic};

    fn diag14() -> Objective {
        make_quadratic(SymMatrix::diag(&[1.0, 4.0]), Vector::zeros(2)).unwrap()
    }

    fn params() -> ConjugateSolverParams {
        ConjugateSolverParams::default()
    }

    #[test]
    fn phi0_is_self_conjugate() {
        let phi0 = make_phi0(2);
        let u = Vector::from_slice(&[1.0, 2.0]);
        let sol = conjugate_numeric(&phi0, &u, &params()).unwrap();
        assert_eq!(sol.value, 2.5);
        assert_eq!(sol.argmax, u);
        assert_eq!(sol.iters, 0);
    }

    #[test]
    fn quadratic_conjugate_value() {
        let f = diag14();
        let sol = conjugate_numeric(&f, &Vector::from_slice(&[1.0, 1.0]), &params()).unwrap();
        assert!((sol.value - 0.625).abs() < 1e-10, "value {}", sol.value);
    }

    #[test]
    fn ill_posed_conjugate_is_rejected() {
        let a = DenseMatrix::from_row_major(2, 2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let f = make_least_squares(a, Vector::from_slice(&[1.0, 0.0])).unwrap();
        assert!(matches!(
            conjugate_numeric(&f, &Vector::from_slice(&[1.0, 0.0]), &params()),
            Err(Error::IllPosedConjugate { .. })
        ));
    }

    #[test]
    fn non_convergence_carries_best_iterate() {
        let f = make_quadratic(
            SymMatrix::from_row_major(2, vec![2.0, 1.0, 1.0, 2.0]).unwrap(),
            Vector::zeros(2),
        )
        .unwrap();
        let starved = ConjugateSolverParams {
            max_iters: 1,
            ..params()
        };
        let err = conjugate_numeric(&f, &Vector::from_slice(&[1.0, 1.0]), &starved).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }));
    }

    #[test]
    fn conjugate_quadratic_examples() {
        let q = SymMatrix::diag(&[1.0, 4.0]);
        assert_eq!(
            conjugate_quadratic(&q, &Vector::from_slice(&[1.0, 1.0])).unwrap(),
            0.625
        );
        assert_eq!(
            conjugate_quadratic(&q, &Vector::from_slice(&[0.0, 2.0])).unwrap(),
            0.5
        );
        let id = SymMatrix::identity(3);
        let u = Vector::from_slice(&[1.0, -2.0, 0.5]);
        assert_eq!(conjugate_quadratic(&id, &u).unwrap(), 0.5 * u.dot(&u));
        let singular = SymMatrix::diag(&[1.0, 0.0]);
        assert!(matches!(
            conjugate_quadratic(&singular, &Vector::from_slice(&[1.0, 1.0])),
            Err(Error::SingularMatrix(_))
        ));
    }

    #[test]
    fn inverse_gradient_examples() {
        let f = diag14();
        let x = inverse_gradient(&f, &Vector::from_slice(&[1.0, 4.0]), &params()).unwrap();
        assert!(x.sub(&Vector::from_slice(&[1.0, 1.0])).norm() < 1e-9);
        let phi0 = make_phi0(2);
        let u = Vector::from_slice(&[0.3, -0.9]);
        assert_eq!(inverse_gradient(&phi0, &u, &params()).unwrap(), u);
        let zero = inverse_gradient(&f, &Vector::zeros(2), &params()).unwrap();
        assert!(zero.norm() < 1e-10);
    }

    #[test]
    fn fenchel_identity_examples() {
        let phi0 = make_phi0(2);
        let cloud = SampleCloud::with_defaults(2, 13);
        for x in sample_points(&cloud, 20) {
            assert!(fenchel_identity_residual(&phi0, &x, &params()).unwrap() <= 1e-9);
        }
        let f = diag14();
        let r = fenchel_identity_residual(&f, &Vector::from_slice(&[1.0, 1.0]), &params()).unwrap();
        assert!(r <= 1e-8, "residual {r}");
        let r = fenchel_identity_residual(&f, &Vector::zeros(2), &params()).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn fenchel_young_inequality() {
        let f = diag14();
        let cloud = SampleCloud::with_defaults(2, 29);
        let points = sample_points(&cloud, 60);
        for chunk in points.chunks(2) {
            if chunk.len() < 2 {
                break;
            }
            let (x, u) = (&chunk[0], &chunk[1]);
            let conj = conjugate_numeric(&f, u, &params()).unwrap();
            assert!(f.value(x) + conj.value - x.dot(u) >= -1e-8);
        }
    }

    #[test]
    fn numeric_matches_analytic_on_quadratics() {
        let f = diag14();
        let q = SymMatrix::diag(&[1.0, 4.0]);
        let cloud = SampleCloud::with_defaults(2, 41);
        for u in sample_points(&cloud, 100) {
            let numeric = conjugate_numeric(&f, &u, &params()).unwrap().value;
            let analytic = conjugate_quadratic(&q, &u).unwrap();
            assert!((numeric - analytic).abs() <= 1e-6, "{numeric} vs {analytic}");
        }
    }

    #[test]
    fn inverse_gradient_round_trip() {
        let f = diag14();
        let cloud = SampleCloud::with_defaults(2, 43);
        for u in sample_points(&cloud, 100) {
            let x = inverse_gradient(&f, &u, &params()).unwrap();
            assert!(f.gradient(&x).sub(&u).norm() <= 1e-6);
        }
    }

    #[test]
    fn phi0_numeric_self_conjugacy() {
        let phi0 = make_phi0(2);
        let cloud = SampleCloud::with_defaults(2, 47);
        for u in sample_points(&cloud, 100) {
            let sol = conjugate_numeric(&phi0, &u, &params()).unwrap();
            assert!((sol.value - phi0.value(&u)).abs() <= 1e-8);
        }
    }

    #[test]
    fn dual_shift_agrees_on_quadratic() {
        let f = diag14();
        let cloud = SampleCloud::with_defaults(2, 7);
        let (p, d) = dual_shift_check(&f, 4.0 + 1e-6, &cloud, &params()).unwrap();
        assert!(p.pass, "primal {p:?}");
        assert!(d.pass, "dual {d:?}");

        let (p, d) = dual_shift_check(&f, 3.0, &cloud, &params()).unwrap();
        assert!(!p.pass);
        assert!(!d.pass);
        assert!(p.worst_margin < -1e-3);
        assert!(d.worst_margin < -1e-3);
    }

    #[test]
    fn dual_shift_tight_on_phi0() {
        let phi0 = make_phi0(2);
        let cloud = SampleCloud::with_defaults(2, 7);
        let (p, d) = dual_shift_check(&phi0, 1.0, &cloud, &params()).unwrap();
        assert!(p.pass && d.pass);
        assert!(p.worst_margin.abs() <= 1e-12, "primal {}", p.worst_margin);
        assert!(d.worst_margin.abs() <= 1e-9, "dual {}", d.worst_margin);
    }
}
