//! Catalog of differentiable test objectives with analytic gradients and
//! ground-truth metadata.
//!
//! Each entry carries the constants the certifier is supposed to recover
//! (smoothness constant, strong-convexity constant, gradient-dominance
//! constant, optimal value), computed from spectra by the internal Jacobi
//! solver rather than by hand.
//!
//! Objectives close over immutable data only; they can be evaluated from
//! many threads at once.

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::matrix::{DenseMatrix, SymMatrix};
use std::fmt;
use std::sync::Arc;

/// Eigenvalues below this (relative) threshold count as zero when deciding
/// rank, positivity and conjugate well-posedness.
const SPECTRUM_TOL: f64 = 1e-10;

type ValueFn = Arc<dyn Fn(&Vector) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;

/// Ground-truth metadata attached to a catalog objective.
///
/// `conjugate_well_posed` marks membership in the class of strongly convex
/// objectives whose conjugate is differentiable, which is what the dual
/// certification route requires.
#[derive(Clone)]
pub struct ObjectiveMeta {
    pub is_convex: bool,
    pub l_true: Option<f64>,
    pub mu_true: Option<f64>,
    pub pl_true: Option<f64>,
    pub f_star: Option<f64>,
    pub minimizer: Option<Vector>,
    pub conjugate_well_posed: bool,
    pub analytic_conjugate: Option<ValueFn>,
}

impl ObjectiveMeta {
    fn empty() -> Self {
        ObjectiveMeta {
            is_convex: false,
            l_true: None,
            mu_true: None,
            pl_true: None,
            f_star: None,
            minimizer: None,
            conjugate_well_posed: false,
            analytic_conjugate: None,
        }
    }

    fn check_invariants(&self) {
        if let Some(mu) = self.mu_true {
            if mu > 0.0 {
                debug_assert!(self.is_convex && self.conjugate_well_posed);
            }
            if let Some(l) = self.l_true {
                debug_assert!(mu <= l + 1e-12);
            }
        }
        if let (Some(pl), Some(l)) = (self.pl_true, self.l_true) {
            debug_assert!(pl <= l + 1e-12);
        }
    }
}

impl fmt::Debug for ObjectiveMeta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObjectiveMeta")
            .field("is_convex", &self.is_convex)
            .field("l_true", &self.l_true)
            .field("mu_true", &self.mu_true)
            .field("pl_true", &self.pl_true)
            .field("f_star", &self.f_star)
            .field("minimizer", &self.minimizer)
            .field("conjugate_well_posed", &self.conjugate_well_posed)
            .field(
                "analytic_conjugate",
                &self.analytic_conjugate.as_ref().map(|_| "<fn>"),
            )
            .finish()
    }
}

/// An evaluatable differentiable function together with its metadata.
#[derive(Clone)]
pub struct Objective {
    name: String,
    dim: usize,
    value: ValueFn,
    gradient: GradFn,
    meta: ObjectiveMeta,
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Objective({}, dim {})", self.name, self.dim)
    }
}

impl Objective {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        value: ValueFn,
        gradient: GradFn,
        meta: ObjectiveMeta,
    ) -> Self {
        assert!(dim >= 1);
        meta.check_invariants();
        Objective {
            name: name.into(),
            dim,
            value,
            gradient,
            meta,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn meta(&self) -> &ObjectiveMeta {
        &self.meta
    }

    pub fn value(&self, x: &Vector) -> f64 {
        assert_eq!(x.dim(), self.dim, "objective dimension mismatch");
        (self.value)(x)
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        assert_eq!(x.dim(), self.dim, "objective dimension mismatch");
        (self.gradient)(x)
    }

    /// Value with dimension and finiteness checks, for callers that must
    /// surface evaluation failures as errors.
    pub fn value_checked(&self, x: &Vector) -> Result<f64> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.dim(),
            });
        }
        let v = (self.value)(x);
        if !v.is_finite() {
            return Err(Error::NonFiniteEvaluation {
                what: format!("value of {}", self.name),
                point: x.clone(),
            });
        }
        Ok(v)
    }

    pub fn gradient_checked(&self, x: &Vector) -> Result<Vector> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.dim(),
            });
        }
        let g = (self.gradient)(x);
        if !g.is_finite() {
            return Err(Error::NonFiniteEvaluation {
                what: format!("gradient of {}", self.name),
                point: x.clone(),
            });
        }
        Ok(g)
    }
}

fn format_reals(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Quadratic objective `x' Q x / 2 - b' x` for symmetric positive
/// semi-definite `Q` (row-major), with spectral metadata.
///
/// The smoothness constant is the largest eigenvalue, the strong-convexity
/// constant the smallest; the gradient-dominance constant is the smallest
/// positive eigenvalue whenever `Q x = b` is consistent. An analytic
/// conjugate `u' inv(Q) u / 2` is attached only for nonsingular `Q` with
/// `b = 0`.
pub fn make_quadratic(q: SymMatrix, b: Vector) -> Result<Objective> {
    let n = q.order();
    if b.dim() != n {
        return Err(Error::InvalidObjective(format!(
            "linear term has dimension {}, matrix has order {n}",
            b.dim()
        )));
    }
    let eigenvalues = q.eigenvalues();
    let lambda_max = *eigenvalues.last().unwrap();
    let lambda_min = eigenvalues[0];
    if lambda_min < -SPECTRUM_TOL * lambda_max.abs().max(1.0) {
        return Err(Error::InvalidObjective(format!(
            "matrix is not positive semi-definite (eigenvalue {lambda_min})"
        )));
    }
    let zero_tol = SPECTRUM_TOL * lambda_max.abs().max(1.0);
    let lambda_min = lambda_min.max(0.0);
    let smallest_positive = eigenvalues.iter().copied().find(|l| *l > zero_tol);
    let nonsingular = lambda_min > zero_tol;
    let b_is_zero = b.as_slice().iter().all(|c| *c == 0.0);

    let (minimizer, consistent) = q.pseudo_solve(&b);
    let name = if q.is_diagonal() {
        let diag: Vec<f64> = (0..n).map(|i| q.get(i, i)).collect();
        if b_is_zero {
            format!("quadratic:diag:{}", format_reals(&diag))
        } else {
            format!(
                "quadratic:diag:{}:b:{}",
                format_reals(&diag),
                format_reals(b.as_slice())
            )
        }
    } else {
        format!("quadratic:dense:{n}")
    };

    let q_val = q.clone();
    let b_val = b.clone();
    let value: ValueFn = Arc::new(move |x: &Vector| 0.5 * q_val.quad_form(x) - b_val.dot(x));
    let q_grad = q.clone();
    let b_grad = b.clone();
    let gradient: GradFn = Arc::new(move |x: &Vector| q_grad.matvec(x).sub(&b_grad));

    let analytic_conjugate: Option<ValueFn> = if nonsingular && b_is_zero {
        let q_conj = q.clone();
        Some(Arc::new(move |u: &Vector| {
            let z = q_conj.solve(u).expect("nonsingular by construction");
            0.5 * u.dot(&z)
        }))
    } else {
        None
    };

    let (f_star, minimizer, pl_true) = if consistent {
        let f_star = 0.5 * q.quad_form(&minimizer) - b.dot(&minimizer);
        (Some(f_star), Some(minimizer), smallest_positive)
    } else {
        (None, None, None)
    };

    let meta = ObjectiveMeta {
        is_convex: true,
        l_true: Some(lambda_max.max(0.0)),
        mu_true: Some(lambda_min),
        pl_true,
        f_star,
        minimizer,
        conjugate_well_posed: nonsingular,
        analytic_conjugate,
    };
    Ok(Objective::new(name, n, value, gradient, meta))
}

/// The reference function `|x|^2 / 2`, i.e. the identity quadratic.
pub fn make_phi0(dim: usize) -> Objective {
    let mut obj = make_quadratic(SymMatrix::identity(dim), Vector::zeros(dim))
        .expect("identity quadratic is valid");
    obj.name = format!("phi0:{dim}");
    obj
}

/// Least-squares objective `|A x - b|^2 / 2` with Gram-spectral metadata.
///
/// A singular Gram matrix leaves the strong-convexity constant at zero while
/// the gradient-dominance constant stays positive (the smallest positive
/// Gram eigenvalue), which is exactly the regime separating the two rate
/// guarantees.
pub fn make_least_squares(a: DenseMatrix, b: Vector) -> Result<Objective> {
    if b.dim() != a.rows() {
        return Err(Error::InvalidObjective(format!(
            "rhs has dimension {}, matrix has {} rows",
            b.dim(),
            a.rows()
        )));
    }
    let gram = a.gram();
    let eigenvalues = gram.eigenvalues();
    let lambda_max = eigenvalues.last().unwrap().max(0.0);
    let zero_tol = SPECTRUM_TOL * lambda_max.max(1.0);
    let lambda_min = eigenvalues[0].max(0.0);
    let nonsingular = lambda_min > zero_tol;
    let smallest_positive = eigenvalues.iter().copied().find(|l| *l > zero_tol);

    // Normal equations are always consistent, so the optimum is attained.
    let (solution, _) = gram.pseudo_solve(&a.t_matvec(&b));
    let residual = a.matvec(&solution).sub(&b);
    let f_star = 0.5 * residual.dot(&residual);

    let name = format!("least_squares:{}x{}", a.rows(), a.cols());
    let dim = a.cols();
    let a_val = a.clone();
    let b_val = b.clone();
    let value: ValueFn = Arc::new(move |x: &Vector| {
        let r = a_val.matvec(x).sub(&b_val);
        0.5 * r.dot(&r)
    });
    let a_grad = a.clone();
    let b_grad = b.clone();
    let gradient: GradFn = Arc::new(move |x: &Vector| {
        let r = a_grad.matvec(x).sub(&b_grad);
        a_grad.t_matvec(&r)
    });

    let meta = ObjectiveMeta {
        is_convex: true,
        l_true: Some(lambda_max),
        mu_true: Some(if nonsingular { lambda_min } else { 0.0 }),
        pl_true: smallest_positive,
        f_star: Some(f_star),
        minimizer: Some(solution),
        conjugate_well_posed: nonsingular,
        analytic_conjugate: None,
    };
    Ok(Objective::new(name, dim, value, gradient, meta))
}

/// One-dimensional quartic `x^4`: convex, but with no global smoothness
/// constant, so every smoothness certificate must eventually fail on a
/// large enough box.
pub fn make_quartic_1d() -> Objective {
    let value: ValueFn = Arc::new(|x: &Vector| x[0].powi(4));
    let gradient: GradFn =
        Arc::new(|x: &Vector| Vector::from_slice(&[4.0 * x[0] * x[0] * x[0]]));
    let meta = ObjectiveMeta {
        is_convex: true,
        l_true: None,
        mu_true: Some(0.0),
        pl_true: None,
        f_star: Some(0.0),
        minimizer: Some(Vector::zeros(1)),
        conjugate_well_posed: false,
        analytic_conjugate: None,
    };
    Objective::new("quartic1d", 1, value, gradient, meta)
}

/// The concave mirror `-|x|^2 / 2`: nonconvex, yet 1-smooth in the Bregman
/// sense, so it passes the plain smoothness certificates while failing
/// every certificate that implies convexity.
pub fn make_negative_phi0(dim: usize) -> Objective {
    assert!(dim >= 1);
    let value: ValueFn = Arc::new(|x: &Vector| -0.5 * x.dot(x));
    let gradient: GradFn = Arc::new(|x: &Vector| x.scale(-1.0));
    let meta = ObjectiveMeta {
        is_convex: false,
        l_true: Some(1.0),
        mu_true: None,
        pl_true: None,
        f_star: None,
        minimizer: None,
        conjugate_well_posed: false,
        analytic_conjugate: None,
    };
    Objective::new(format!("negative_phi0:{dim}"), dim, value, gradient, meta)
}

/// Direction of the shifted combination built by [`scaled_shift`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShiftMode {
    /// `alpha * phi0 - f`, whose convexity certifies that `f` is
    /// `alpha`-smooth.
    LMinusF,
    /// `f - alpha * phi0`, whose convexity certifies that `f` is
    /// `alpha`-strongly-convex.
    FMinusMu,
}

/// Pointwise combination of `f` with the scaled reference `alpha * phi0`.
///
/// All metadata is cleared except the dimension: the shifted function is a
/// probe, not a catalog entry.
pub fn scaled_shift(f: &Objective, alpha: f64, mode: ShiftMode) -> Objective {
    assert!(alpha >= 0.0, "shift scale must be nonnegative");
    let dim = f.dim();
    let fv = f.value.clone();
    let fg = f.gradient.clone();
    let (name, value, gradient): (String, ValueFn, GradFn) = match mode {
        ShiftMode::LMinusF => (
            format!("{alpha}*phi0-{}", f.name()),
            Arc::new(move |x: &Vector| alpha * 0.5 * x.dot(x) - fv(x)),
            Arc::new(move |x: &Vector| x.scale(alpha).sub(&fg(x))),
        ),
        ShiftMode::FMinusMu => (
            format!("{}-{alpha}*phi0", f.name()),
            Arc::new(move |x: &Vector| fv(x) - alpha * 0.5 * x.dot(x)),
            Arc::new(move |x: &Vector| fg(x).sub(&x.scale(alpha))),
        ),
    };
    Objective::new(name, dim, value, gradient, ObjectiveMeta::empty())
}

/// Parses a catalog name into an objective.
///
/// Grammar (segments separated by `:`, parameters as comma-separated reals):
///
/// ```text
/// phi0:<d>
/// quadratic:diag:<c1,...,cd>[:b:<b1,...,bd>]
/// least_squares:diag:<a1,...,ad>[:b:<b1,...,bd>]
/// quartic1d
/// negative_phi0:<d>
/// ```
pub fn from_spec(spec: &str) -> Result<Objective> {
    let segments: Vec<&str> = spec.split(':').collect();
    let usage = |msg: &str| Error::Usage(format!("function spec `{spec}`: {msg}"));

    let parse_dim = |s: &str| -> Result<usize> {
        s.parse::<usize>()
            .ok()
            .filter(|d| *d >= 1)
            .ok_or_else(|| usage("expected a positive dimension"))
    };
    let parse_reals = |s: &str| -> Result<Vec<f64>> {
        s.split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| usage("expected comma-separated reals"))
    };

    match segments.as_slice() {
        ["phi0", d] => Ok(make_phi0(parse_dim(d)?)),
        ["quartic1d"] => Ok(make_quartic_1d()),
        ["negative_phi0", d] => Ok(make_negative_phi0(parse_dim(d)?)),
        ["quadratic", "diag", diag] => {
            let diag = parse_reals(diag)?;
            make_quadratic(SymMatrix::diag(&diag), Vector::zeros(diag.len()))
        }
        ["quadratic", "diag", diag, "b", b] => {
            let diag = parse_reals(diag)?;
            let b = Vector::new(parse_reals(b)?)?;
            make_quadratic(SymMatrix::diag(&diag), b)
        }
        ["least_squares", "diag", diag] => {
            let diag = parse_reals(diag)?;
            let n = diag.len();
            let mut data = vec![0.0; n * n];
            for (i, &a) in diag.iter().enumerate() {
                data[i * n + i] = a;
            }
            make_least_squares(DenseMatrix::from_row_major(n, n, data)?, Vector::zeros(n))
        }
        ["least_squares", "diag", diag, "b", b] => {
            let diag = parse_reals(diag)?;
            let n = diag.len();
            let mut data = vec![0.0; n * n];
            for (i, &a) in diag.iter().enumerate() {
                data[i * n + i] = a;
            }
            make_least_squares(
                DenseMatrix::from_row_major(n, n, data)?,
                Vector::new(parse_reals(b)?)?,
            )
        }
        _ => Err(usage("unrecognized catalog entry")),
    }
}

/// A representative slice of the catalog, used by cross-cutting tests.
pub fn sample_catalog() -> Vec<Objective> {
    vec![
        make_phi0(2),
        make_quadratic(SymMatrix::diag(&[1.0, 4.0]), Vector::zeros(2)).unwrap(),
        make_quadratic(
            SymMatrix::from_row_major(2, vec![2.0, 1.0, 1.0, 2.0]).unwrap(),
            Vector::from_slice(&[1.0, -1.0]),
        )
        .unwrap(),
        make_least_squares(
            DenseMatrix::from_row_major(2, 2, vec![1.0, 0.0, 0.0, 0.0]).unwrap(),
            Vector::from_slice(&[1.0, 0.0]),
        )
        .unwrap(),
        make_least_squares(
            DenseMatrix::from_row_major(1, 1, vec![2.0]).unwrap(),
            Vector::from_slice(&[2.0]),
        )
        .unwrap(),
        make_quartic_1d(),
        make_negative_phi0(2),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{fd_gradient, fd_step_for, sample_points, SampleCloud};

    fn diag14() -> Objective {
        make_quadratic(SymMatrix::diag(&[1.0, 4.0]), Vector::zeros(2)).unwrap()
    }

    #[test]
    fn quadratic_examples() {
        let f = diag14();
        let x = Vector::from_slice(&[1.0, 1.0]);
        assert_eq!(f.value(&x), 2.5);
        assert_eq!(f.gradient(&x), Vector::from_slice(&[1.0, 4.0]));
        assert_eq!(f.meta().l_true, Some(4.0));
        assert_eq!(f.meta().mu_true, Some(1.0));
        assert_eq!(f.meta().pl_true, Some(1.0));
        assert_eq!(f.meta().f_star, Some(0.0));
        assert!(f.meta().conjugate_well_posed);
        assert!(f.meta().analytic_conjugate.is_some());
    }

    #[test]
    fn quadratic_identity_is_phi0() {
        let f = make_quadratic(SymMatrix::identity(3), Vector::zeros(3)).unwrap();
        assert_eq!(f.meta().l_true, Some(1.0));
        assert_eq!(f.meta().mu_true, Some(1.0));
        let phi0 = make_phi0(3);
        let cloud = SampleCloud::with_defaults(3, 5);
        for p in sample_points(&cloud, 100) {
            assert!((f.value(&p) - phi0.value(&p)).abs() <= 1e-15);
        }
    }

    #[test]
    fn quadratic_rejects_bad_matrices() {
        let asym = SymMatrix::from_row_major(2, vec![1.0, 2.0, 0.0, 1.0]);
        assert!(asym.is_err());
        let indefinite = make_quadratic(SymMatrix::diag(&[1.0, -1.0]), Vector::zeros(2));
        assert!(matches!(indefinite, Err(Error::InvalidObjective(_))));
    }

    #[test]
    fn least_squares_rank_one() {
        let a = DenseMatrix::from_row_major(2, 2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let f = make_least_squares(a, Vector::from_slice(&[1.0, 0.0])).unwrap();
        assert_eq!(f.meta().pl_true, Some(1.0));
        assert_eq!(f.meta().mu_true, Some(0.0));
        assert_eq!(f.meta().l_true, Some(1.0));
        assert_eq!(f.meta().f_star, Some(0.0));
        assert!(!f.meta().conjugate_well_posed);
        // Gradient is (x1 - 1, 0).
        let g = f.gradient(&Vector::from_slice(&[3.0, 5.0]));
        assert_eq!(g, Vector::from_slice(&[2.0, 0.0]));
    }

    #[test]
    fn least_squares_identity_reduces_to_phi0() {
        let a = DenseMatrix::from_row_major(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let f = make_least_squares(a, Vector::zeros(2)).unwrap();
        let x = Vector::from_slice(&[1.5, -0.5]);
        assert!((f.value(&x) - 0.5 * x.dot(&x)).abs() < 1e-15);
    }

    #[test]
    fn least_squares_scalar() {
        let a = DenseMatrix::from_row_major(1, 1, vec![2.0]).unwrap();
        let f = make_least_squares(a, Vector::from_slice(&[2.0])).unwrap();
        assert_eq!(f.meta().l_true, Some(4.0));
        assert_eq!(f.meta().f_star, Some(0.0));
        let m = f.meta().minimizer.clone().unwrap();
        assert!((m[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quartic_examples() {
        let f = make_quartic_1d();
        assert_eq!(f.value(&Vector::from_slice(&[2.0])), 16.0);
        assert_eq!(f.gradient(&Vector::from_slice(&[3.0]))[0], 108.0);
        assert_eq!(f.gradient(&Vector::from_slice(&[0.0]))[0], 0.0);
        assert!(f.meta().is_convex);
        assert!(f.meta().l_true.is_none());
        assert_eq!(f.meta().mu_true, Some(0.0));
    }

    #[test]
    fn negative_phi0_examples() {
        let f = make_negative_phi0(2);
        assert_eq!(f.value(&Vector::from_slice(&[1.0, 1.0])), -1.0);
        assert_eq!(
            f.gradient(&Vector::from_slice(&[2.0, 0.0])),
            Vector::from_slice(&[-2.0, 0.0])
        );
        assert!(!f.meta().is_convex);
        assert_eq!(f.meta().l_true, Some(1.0));
        assert_eq!(f.meta().mu_true, None);
    }

    #[test]
    fn scaled_shift_examples() {
        let f = diag14();
        // 4 * phi0 - f has Hessian diag(3, 0).
        let shifted = scaled_shift(&f, 4.0, ShiftMode::LMinusF);
        let x = Vector::from_slice(&[1.0, 1.0]);
        assert_eq!(shifted.value(&x), 4.0 - 2.5);
        assert_eq!(shifted.gradient(&x), Vector::from_slice(&[3.0, 0.0]));
        // phi0 - phi0 is the zero function.
        let phi0 = make_phi0(2);
        let zero = scaled_shift(&phi0, 1.0, ShiftMode::LMinusF);
        assert_eq!(zero.value(&x), 0.0);
        assert_eq!(zero.gradient(&x), Vector::zeros(2));
        // f - 1 * phi0 has Hessian diag(0, 3).
        let lower = scaled_shift(&f, 1.0, ShiftMode::FMinusMu);
        assert_eq!(lower.gradient(&x), Vector::from_slice(&[0.0, 3.0]));
        assert!(lower.meta().l_true.is_none());
        assert!(!lower.meta().conjugate_well_posed);
    }

    #[test]
    fn scaled_shift_linearity_is_exact() {
        let f = diag14();
        let shifted = scaled_shift(&f, 3.0, ShiftMode::LMinusF);
        let cloud = SampleCloud::with_defaults(2, 8);
        for p in sample_points(&cloud, 50) {
            let lhs = shifted.value(&p) + f.value(&p);
            let rhs = 3.0 * 0.5 * p.dot(&p);
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn catalog_gradients_match_finite_differences() {
        for f in sample_catalog() {
            let cloud = SampleCloud::with_defaults(f.dim(), 17);
            for x in sample_points(&cloud, 100) {
                let h = fd_step_for(&x);
                let fd = fd_gradient(|p| f.value(p), &x, h).unwrap();
                let g = f.gradient(&x);
                let err = fd.sub(&g).norm() / g.norm().max(1.0);
                assert!(err <= 1e-5, "{}: fd mismatch {err} at {x:?}", f.name());
            }
        }
    }

    #[test]
    fn catalog_metadata_ordering() {
        for f in sample_catalog() {
            let meta = f.meta();
            if let (Some(mu), Some(pl), Some(l)) = (meta.mu_true, meta.pl_true, meta.l_true) {
                assert!(mu <= pl + 1e-12, "{}", f.name());
                assert!(pl <= l + 1e-12, "{}", f.name());
                if mu > 0.0 {
                    assert_eq!(mu, pl, "{}", f.name());
                }
            }
        }
    }

    #[test]
    fn spec_grammar_round_trips() {
        let f = from_spec("quadratic:diag:1,4").unwrap();
        assert_eq!(f.name(), "quadratic:diag:1,4");
        assert_eq!(f.dim(), 2);
        assert!(from_spec("phi0:3").is_ok());
        assert!(from_spec("quartic1d").is_ok());
        assert!(from_spec("negative_phi0:2").is_ok());
        assert!(from_spec("least_squares:diag:1,0:b:1,0").is_ok());
        assert!(matches!(from_spec("bogus:1"), Err(Error::Usage(_))));
        assert!(matches!(from_spec("quadratic:diag:a,b"), Err(Error::Usage(_))));
        assert!(matches!(from_spec("phi0:0"), Err(Error::Usage(_))));
    }
}
