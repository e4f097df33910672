//! Constant-step gradient descent with trace recording, per-step descent
//! verification and linear-rate comparison.

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::objectives::Objective;
use serde::Serialize;
use std::io::Write;

/// Optimality gaps at or below this threshold no longer produce gap ratios;
/// the quotient is rounding noise there.
const GAP_FLOOR: f64 = 1e-15;

/// Relative blow-up that triggers the divergence detector.
const DIVERGENCE_FACTOR: f64 = 1e6;

/// Normalized-margin pass threshold, shared with the certifier.
const PASS_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Serialize)]
pub struct GdConfig {
    /// Step size multiplying the gradient (the reciprocal of the model
    /// curvature used by [`model_argmin`]).
    pub step: f64,
    pub max_iters: usize,
    /// Stop once the gradient norm falls to this value or below.
    pub grad_stop: f64,
    /// Record the full iterate sequence, not just scalars.
    pub record_trace: bool,
}

impl GdConfig {
    pub fn new(step: f64, max_iters: usize) -> Self {
        assert!(step > 0.0, "step must be positive");
        GdConfig {
            step,
            max_iters,
            grad_stop: 0.0,
            record_trace: true,
        }
    }
}

/// History of one gradient-descent run.
///
/// `values` and `grad_norms` carry one entry per visited iterate;
/// `gap_ratios` carries one entry per step, `None` where the optimal value
/// was not supplied or the remaining gap is at rounding level. `iterates`
/// is populated only when the run recorded its trace.
#[derive(Clone, Debug, Serialize)]
pub struct GdTrace {
    pub step: f64,
    pub iterates: Vec<Vector>,
    pub values: Vec<f64>,
    pub grad_norms: Vec<f64>,
    pub gap_ratios: Vec<Option<f64>>,
}

impl GdTrace {
    pub fn steps_taken(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    pub fn final_value(&self) -> f64 {
        *self.values.last().expect("trace has at least one value")
    }
}

/// The two linear contraction factors under comparison: the classical
/// `1 - nu/L` and the sharper `(L - nu)/(L + nu)` available when the
/// objective is additionally convex.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RatePair {
    pub standard: f64,
    pub improved: f64,
}

/// One move `x - step * grad f(x)`.
pub fn gd_step(f: &Objective, x: &Vector, step: f64) -> Result<Vector> {
    assert!(step > 0.0, "step must be positive");
    let g = f.gradient_checked(x)?;
    Ok(x.sub_scaled(step, &g))
}

/// Exact minimizer of the quadratic model
/// `f(x) + <grad f(x), z - x> + (t/2) |z - x|^2`, namely
/// `x - (1/t) grad f(x)`. Identical, bit for bit, to [`gd_step`] with step
/// `1/t`.
pub fn model_argmin(f: &Objective, x: &Vector, t: f64) -> Result<Vector> {
    assert!(t > 0.0, "model curvature must be positive");
    gd_step(f, x, 1.0 / t)
}

/// Runs gradient descent from `x0`, stopping at `max_iters` steps or when
/// the gradient norm reaches `grad_stop`.
///
/// When `f_bar` is supplied, per-step gap ratios
/// `(f(x_{k+1}) - f_bar) / (f(x_k) - f_bar)` are recorded while the
/// denominator stays above rounding level. A relative value blow-up beyond
/// `1e6` aborts with a divergence error carrying the partial trace.
pub fn gd_run(f: &Objective, x0: &Vector, cfg: &GdConfig, f_bar: Option<f64>) -> Result<GdTrace> {
    assert!(cfg.step > 0.0, "step must be positive");
    let mut trace = GdTrace {
        step: cfg.step,
        iterates: Vec::new(),
        values: Vec::new(),
        grad_norms: Vec::new(),
        gap_ratios: Vec::new(),
    };
    let mut x = x0.clone();
    let v0 = f.value_checked(&x)?;
    let blowup = v0 + DIVERGENCE_FACTOR * v0.abs().max(1.0);

    let mut value = v0;
    for iteration in 0..=cfg.max_iters {
        let g = f.gradient_checked(&x)?;
        let gn = g.norm();
        if cfg.record_trace {
            trace.iterates.push(x.clone());
        }
        trace.values.push(value);
        trace.grad_norms.push(gn);

        if iteration == cfg.max_iters || gn <= cfg.grad_stop {
            break;
        }
        let next = x.sub_scaled(cfg.step, &g);
        let next_value = f.value_checked(&next)?;
        if next_value > blowup {
            trace.push_gap_ratios(f_bar);
            return Err(Error::Divergence {
                iteration: iteration + 1,
                value: next_value,
                partial: Box::new(trace),
            });
        }
        x = next;
        value = next_value;
    }
    trace.push_gap_ratios(f_bar);
    Ok(trace)
}

impl GdTrace {
    fn push_gap_ratios(&mut self, f_bar: Option<f64>) {
        self.gap_ratios.clear();
        for k in 0..self.values.len().saturating_sub(1) {
            let ratio = f_bar.and_then(|fb| {
                let denom = self.values[k] - fb;
                if denom > GAP_FLOOR {
                    Some((self.values[k + 1] - fb) / denom)
                } else {
                    None
                }
            });
            self.gap_ratios.push(ratio);
        }
    }
}

/// Result of checking one per-step descent inequality along a trace.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct StepCheck {
    pub pass: bool,
    pub worst_margin: f64,
    pub worst_index: usize,
}

/// Per-step descent verification along a recorded trace.
#[derive(Clone, Debug, Serialize)]
pub struct DescentReport {
    pub l: f64,
    pub n_steps: usize,
    /// `f(x_{k+1}) <= f(x_k) - |grad f(x_k)|^2 / (2L)`, from smoothness.
    pub step1: StepCheck,
    /// The convexity-strengthened variant with the extra
    /// `-|grad f(x_{k+1})|^2 / (2L)` term; only evaluated for objectives
    /// flagged convex.
    pub step3: Option<StepCheck>,
}

fn normalized_margin(small: f64, big: f64) -> f64 {
    (big - small) / small.abs().max(big.abs()).max(1.0)
}

/// Verifies the one-step decrease inequalities along `trace`, which must
/// have been produced with step `1/l` and with trace recording enabled.
pub fn verify_descent_inequalities(f: &Objective, l: f64, trace: &GdTrace) -> Result<DescentReport> {
    if !(l > 0.0) {
        return Err(Error::InvalidConstants("L must be positive".into()));
    }
    if trace.iterates.len() < 2 {
        return Err(Error::Usage(
            "descent verification needs a recorded trace with at least one step".into(),
        ));
    }
    if (trace.step * l - 1.0).abs() > 1e-12 {
        return Err(Error::Usage(format!(
            "trace was produced with step {}, not 1/L = {}",
            trace.step,
            1.0 / l
        )));
    }

    let mut step1 = StepCheck {
        pass: true,
        worst_margin: f64::INFINITY,
        worst_index: 0,
    };
    let mut step3 = f.meta().is_convex.then_some(StepCheck {
        pass: true,
        worst_margin: f64::INFINITY,
        worst_index: 0,
    });

    for k in 0..trace.iterates.len() - 1 {
        let xk = &trace.iterates[k];
        let xn = &trace.iterates[k + 1];
        let fk = f.value_checked(xk)?;
        let fn_ = f.value_checked(xn)?;
        let gk = f.gradient_checked(xk)?;
        let gn = f.gradient_checked(xn)?;
        let gk_sq = gk.dot(&gk);
        let gn_sq = gn.dot(&gn);

        let rhs1 = fk - gk_sq / (2.0 * l);
        let m1 = normalized_margin(fn_, rhs1);
        if m1 < step1.worst_margin {
            step1.worst_margin = m1;
            step1.worst_index = k;
        }
        if let Some(check) = step3.as_mut() {
            let rhs3 = fk - gk_sq / (2.0 * l) - gn_sq / (2.0 * l);
            let m3 = normalized_margin(fn_, rhs3);
            if m3 < check.worst_margin {
                check.worst_margin = m3;
                check.worst_index = k;
            }
        }
    }
    step1.pass = step1.worst_margin >= -PASS_TOL;
    if let Some(check) = step3.as_mut() {
        check.pass = check.worst_margin >= -PASS_TOL;
    }
    Ok(DescentReport {
        l,
        n_steps: trace.iterates.len() - 1,
        step1,
        step3,
    })
}

/// Computes both contraction factors for constants `0 < nu <= L`.
pub fn compare_rates(l: f64, nu: f64) -> Result<RatePair> {
    if !(nu > 0.0) || !(l > 0.0) {
        return Err(Error::InvalidConstants(format!(
            "rate constants must be positive (got L = {l}, nu = {nu})"
        )));
    }
    if nu > l {
        return Err(Error::InvalidConstants(format!(
            "nu = {nu} exceeds L = {l}"
        )));
    }
    Ok(RatePair {
        standard: 1.0 - nu / l,
        improved: (l - nu) / (l + nu),
    })
}

/// Outcome of checking every recorded gap ratio against a factor.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RateReport {
    pub factor: f64,
    pub pass: bool,
    pub worst_ratio: f64,
    pub worst_index: usize,
    pub n_ratios: usize,
}

/// Passes when every recorded gap ratio is at most `factor + 1e-9`.
pub fn verify_rate(trace: &GdTrace, factor: f64) -> Result<RateReport> {
    let mut worst = f64::NEG_INFINITY;
    let mut worst_index = 0;
    let mut n_ratios = 0;
    for (k, ratio) in trace.gap_ratios.iter().enumerate() {
        if let Some(r) = ratio {
            n_ratios += 1;
            if *r > worst {
                worst = *r;
                worst_index = k;
            }
        }
    }
    if n_ratios == 0 {
        return Err(Error::Usage(
            "trace has no gap ratios (optimal value not supplied or gap at rounding level)".into(),
        ));
    }
    Ok(RateReport {
        factor,
        pass: worst <= factor + PASS_TOL,
        worst_ratio: worst,
        worst_index,
        n_ratios,
    })
}

/// Writes a trace as CSV with columns `iter,value,grad_norm,gap_ratio`.
/// The gap-ratio field of row `k` is the ratio of the step arriving at
/// iterate `k`, empty when absent.
pub fn write_trace_csv<W: Write>(trace: &GdTrace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iter", "value", "grad_norm", "gap_ratio"])
        .map_err(csv_io)?;
    for k in 0..trace.values.len() {
        let ratio = if k == 0 {
            None
        } else {
            trace.gap_ratios.get(k - 1).copied().flatten()
        };
        w.write_record([
            k.to_string(),
            trace.values[k].to_string(),
            trace.grad_norms[k].to_string(),
            ratio.map(|r| r.to_string()).unwrap_or_default(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{sample_points, SampleCloud};
    use crate::matrix::SymMatrix;
    use crate::objectives::{
        make_least_squares, make_phi0, make_quadratic, make_quartic_1d, sample_catalog,
    };
    use crate::matrix::DenseMatrix;

    fn diag14() -> Objective {
        make_quadratic(SymMatrix::diag(&[1.0, 4.0]), Vector::zeros(2)).unwrap()
    }

    #[test]
    fn gd_step_examples() {
        let phi0 = make_phi0(2);
        let x = Vector::from_slice(&[0.4, -1.1]);
        assert_eq!(gd_step(&phi0, &x, 1.0).unwrap(), Vector::zeros(2));

        let f = diag14();
        let moved = gd_step(&f, &Vector::from_slice(&[1.0, 1.0]), 0.25).unwrap();
        assert_eq!(moved, Vector::from_slice(&[0.75, 0.0]));

        // A stationary point is a fixed point for any step.
        let origin = Vector::zeros(2);
        assert_eq!(gd_step(&f, &origin, 3.7).unwrap(), origin);
    }

    #[test]
    fn model_argmin_examples() {
        let f = diag14();
        let z = model_argmin(&f, &Vector::from_slice(&[1.0, 1.0]), 4.0).unwrap();
        assert_eq!(z, Vector::from_slice(&[0.75, 0.0]));
        let phi0 = make_phi0(2);
        assert_eq!(
            model_argmin(&phi0, &Vector::from_slice(&[2.0, -1.0]), 1.0).unwrap(),
            Vector::zeros(2)
        );
    }

    #[test]
    fn model_argmin_equals_gd_step_bitwise() {
        let cloud = SampleCloud::with_defaults(2, 77);
        let points = sample_points(&cloud, 100);
        let f = diag14();
        for (i, x) in points.iter().enumerate() {
            let t = 0.1 + (i as f64) * 0.37 + 0.01;
            let a = model_argmin(&f, x, t).unwrap();
            let b = gd_step(&f, x, 1.0 / t).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn gd_run_on_quadratic() {
        let f = diag14();
        let cfg = GdConfig::new(0.25, 3);
        let trace = gd_run(&f, &Vector::from_slice(&[1.0, 1.0]), &cfg, Some(0.0)).unwrap();
        assert_eq!(trace.values[0], 2.5);
        assert_eq!(trace.values[1], 0.28125);
        let first = trace.gap_ratios[0].unwrap();
        assert!((first - 0.1125).abs() < 1e-15);
        for r in trace.gap_ratios.iter().flatten() {
            assert!(*r >= 0.0);
        }
    }

    #[test]
    fn gd_run_one_step_on_phi0() {
        let phi0 = make_phi0(2);
        let mut cfg = GdConfig::new(1.0, 50);
        cfg.grad_stop = 0.0;
        let trace = gd_run(&phi0, &Vector::from_slice(&[1.5, -2.0]), &cfg, Some(0.0)).unwrap();
        // After one exact step the gradient is exactly zero and the run
        // stalls at the optimum.
        assert_eq!(trace.grad_norms[1], 0.0);
        assert_eq!(trace.final_value(), 0.0);
    }

    #[test]
    fn gd_run_divergence() {
        let f = diag14();
        let cfg = GdConfig::new(10.0 / 4.0, 50);
        let err = gd_run(&f, &Vector::from_slice(&[1.0, 1.0]), &cfg, Some(0.0)).unwrap_err();
        match err {
            Error::Divergence { partial, .. } => assert!(partial.values.len() >= 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn descent_inequalities_on_quadratic() {
        let f = diag14();
        let cfg = GdConfig::new(0.25, 40);
        let trace = gd_run(&f, &Vector::from_slice(&[1.0, 1.0]), &cfg, Some(0.0)).unwrap();
        let report = verify_descent_inequalities(&f, 4.0, &trace).unwrap();
        assert!(report.step1.pass);
        let step3 = report.step3.unwrap();
        assert!(step3.pass, "{step3:?}");
    }

    #[test]
    fn descent_equality_on_phi0() {
        let phi0 = make_phi0(2);
        let cfg = GdConfig::new(1.0, 1);
        let trace = gd_run(&phi0, &Vector::from_slice(&[1.0, 0.5]), &cfg, Some(0.0)).unwrap();
        let report = verify_descent_inequalities(&phi0, 1.0, &trace).unwrap();
        // One exact step lands on the optimum: both inequalities are tight
        // and the strengthened form degenerates to the plain one.
        assert!(report.step1.worst_margin.abs() <= 1e-15);
        let step3 = report.step3.unwrap();
        assert!(step3.worst_margin.abs() <= 1e-15);
    }

    #[test]
    fn descent_fails_with_undersized_constant() {
        let f = make_quartic_1d();
        let cfg = GdConfig::new(1.0 / 8.0, 1);
        let trace = gd_run(&f, &Vector::from_slice(&[3.0]), &cfg, Some(0.0)).unwrap();
        let report = verify_descent_inequalities(&f, 8.0, &trace).unwrap();
        assert!(!report.step1.pass);
        assert!(report.step1.worst_margin < -1e-3);
    }

    #[test]
    fn descent_rejects_mismatched_step() {
        let f = diag14();
        let cfg = GdConfig::new(0.2, 5);
        let trace = gd_run(&f, &Vector::from_slice(&[1.0, 1.0]), &cfg, None).unwrap();
        assert!(matches!(
            verify_descent_inequalities(&f, 4.0, &trace),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn compare_rates_examples() {
        let r = compare_rates(4.0, 1.0).unwrap();
        assert_eq!(r.standard, 0.75);
        assert_eq!(r.improved, 0.6);
        let r = compare_rates(2.0, 2.0).unwrap();
        assert_eq!(r.standard, 0.0);
        assert_eq!(r.improved, 0.0);
        let r = compare_rates(2.0, 1.0).unwrap();
        assert_eq!(r.standard, 0.5);
        assert!((r.improved - 1.0 / 3.0).abs() < 1e-15);
        assert!(matches!(
            compare_rates(1.0, 2.0),
            Err(Error::InvalidConstants(_))
        ));
    }

    #[test]
    fn improved_factor_beats_standard() {
        let l = 4.0;
        for i in 1..10 {
            let nu = l * (i as f64) / 10.0;
            let r = compare_rates(l, nu).unwrap();
            assert!(r.improved < r.standard);
            assert!(r.improved > 0.0 || nu == l);
            assert!(r.standard < 1.0);
        }
    }

    #[test]
    fn verify_rate_examples() {
        let f = diag14();
        let cfg = GdConfig::new(0.25, 60);
        let trace = gd_run(&f, &Vector::from_slice(&[1.0, 1.0]), &cfg, Some(0.0)).unwrap();
        let r = verify_rate(&trace, 0.6).unwrap();
        assert!(r.pass);
        assert!((r.worst_ratio - 0.5625).abs() < 1e-12);
        assert!(verify_rate(&trace, 0.75).unwrap().pass);
        let r = verify_rate(&trace, 0.5).unwrap();
        assert!(!r.pass);
    }

    #[test]
    fn verify_rate_needs_ratios() {
        let f = diag14();
        let cfg = GdConfig::new(0.25, 5);
        let trace = gd_run(&f, &Vector::from_slice(&[1.0, 1.0]), &cfg, None).unwrap();
        assert!(matches!(verify_rate(&trace, 0.6), Err(Error::Usage(_))));
    }

    #[test]
    fn rate_soundness_across_catalog() {
        for f in sample_catalog() {
            let meta = f.meta();
            let (Some(l), Some(nu), Some(f_star)) = (meta.l_true, meta.pl_true, meta.f_star)
            else {
                continue;
            };
            if l <= 0.0 || nu <= 0.0 {
                continue;
            }
            let rates = compare_rates(l, nu).unwrap();
            let cloud = SampleCloud::with_defaults(f.dim(), 99);
            for x0 in sample_points(&cloud, 20) {
                let cfg = GdConfig::new(1.0 / l, 60);
                let trace = gd_run(&f, &x0, &cfg, Some(f_star)).unwrap();
                for v in trace.values.windows(2) {
                    assert!(v[1] <= v[0] + 1e-12, "{} not monotone", f.name());
                }
                if trace.gap_ratios.iter().flatten().next().is_none() {
                    continue;
                }
                let standard = verify_rate(&trace, rates.standard).unwrap();
                assert!(standard.pass, "{}: {standard:?}", f.name());
                let improved = verify_rate(&trace, rates.improved).unwrap();
                assert!(improved.pass, "{}: {improved:?}", f.name());
            }
        }
    }

    #[test]
    fn rank_one_least_squares_converges_in_one_step() {
        let a = DenseMatrix::from_row_major(2, 2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let f = make_least_squares(a, Vector::from_slice(&[1.0, 0.0])).unwrap();
        let cfg = GdConfig::new(1.0, 5);
        let trace = gd_run(&f, &Vector::from_slice(&[-1.5, 0.8]), &cfg, Some(0.0)).unwrap();
        let first = trace.gap_ratios[0].unwrap();
        assert!(first.abs() <= 1e-9, "ratio {first}");
    }

    #[test]
    fn trace_csv_shape() {
        let f = diag14();
        let cfg = GdConfig::new(0.25, 3);
        let trace = gd_run(&f, &Vector::from_slice(&[1.0, 1.0]), &cfg, Some(0.0)).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "iter,value,grad_norm,gap_ratio");
        let first = lines.next().unwrap();
        assert!(first.starts_with("0,2.5,"));
        assert!(first.ends_with(','), "row 0 has no incoming ratio: {first}");
    }
}
