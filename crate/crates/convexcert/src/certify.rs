//! The condition certifier: every equivalent inequality characterization of
//! convexity, smoothness, strong convexity, their dual and gradient forms,
//! the joint interpolation conditions and the gradient-dominance inequality,
//! each evaluated as a sampled falsification check; plus empirical
//! estimation of the three constants.
//!
//! Margins are normalized as `(big - small) / max(1, |small|, |big|)` where
//! the checked inequality is `small <= big`; a report passes when the worst
//! margin stays above `-1e-9`. Genuine counterexamples produce margins
//! below `-1e-3`, so the threshold separates violation from rounding noise.
//!
//! Condition identifiers (stable strings, also used in CSV output):
//!
//! | id | inequality |
//! |----|------------|
//! | CONV1 | `f(lx+(1-l)y) <= l f(x) + (1-l) f(y)` |
//! | CONV2 | `<gx-gy, x-y> >= 0` |
//! | CONV3 | `f(y) >= f(x) + <gx, y-x>` |
//! | SM1  | `f(lx+(1-l)y) >= l f(x) + (1-l) f(y) - (L/2) l(1-l) |x-y|^2` |
//! | SM2  | `<gx-gy, x-y> <= L |x-y|^2` |
//! | SM3  | `f(y) <= f(x) + <gx, y-x> + (L/2) |x-y|^2` |
//! | PSM1 | `<gx-gy, x-y> >= (1/L) |gx-gy|^2` |
//! | PSM2 | `f(y) >= f(x) + <gx, y-x> + (1/2L) |gx-gy|^2` |
//! | PSM3 | `|gx-gy| <= L |x-y|` |
//! | DSM1 | `f*(lu+(1-l)v) <= l f*(u) + (1-l) f*(v) - (1/2L) l(1-l) |u-v|^2` |
//! | DSM2 | `<Xu-Xv, u-v> >= (1/L) |u-v|^2` |
//! | DSM3 | `f*(u) >= f*(v) + <Xv, u-v> + (1/2L) |u-v|^2` |
//! | SC1  | `f(lx+(1-l)y) <= l f(x) + (1-l) f(y) - (mu/2) l(1-l) |x-y|^2` |
//! | SC2  | `<gx-gy, x-y> >= mu |x-y|^2` |
//! | SC3  | `f(y) >= f(x) + <gx, y-x> + (mu/2) |x-y|^2` |
//! | PSC1 | `<gx-gy, x-y> <= (1/mu) |gx-gy|^2` |
//! | PSC2 | `f(y) <= f(x) + <gx, y-x> + (1/2mu) |gx-gy|^2` |
//! | PSC3 | `|gx-gy| >= mu |x-y|` |
//! | DSC1 | `f*(lu+(1-l)v) >= l f*(u) + (1-l) f*(v) - (1/2mu) l(1-l) |u-v|^2` |
//! | DSC2 | `<Xu-Xv, u-v> <= (1/mu) |u-v|^2` |
//! | DSC3 | `f*(u) <= f*(v) + <Xv, u-v> + (1/2mu) |u-v|^2` |
//! | SMSC1 | `<gx-gy, x-y> >= (Lmu/(L+mu)) |x-y|^2 + (1/(L+mu)) |gx-gy|^2` |
//! | SMSC2 | `f(y) >= f(x) + <gx, y-x> + (1/2L)|gx-gy|^2 + (muL/2(L-mu)) |x-y-(gx-gy)/L|^2` |
//! | PL | `|gx|^2 / 2 >= nu (f(x) - fbar)` |
//! | BRE_UP | `D_f(x,y) <= L D_phi0(x,y)` |
//! | BRE_LO | `mu D_phi0(x,y) <= D_f(x,y)` |
//!
//! where `gx = grad f(x)`, `u = grad f(x)`, `v = grad f(y)`, `Xu = grad
//! f*(u)` (recovered as an argmax), and `D` is the Bregman distance.
//!
//! Conditions whose two sides are not symmetric in the pair are evaluated
//! on both orderings; interpolation conditions sweep every lambda in the
//! cloud's grid (endpoints are tight by construction and count as passes).
//! Dual conditions draw their points as gradient images of the primal pair
//! and gate on conjugate well-posedness. Inner conjugate solves for the
//! dual conditions default to a tolerance of `1e-12` (tighter than the
//! standalone solver default) so that solver noise stays well under the
//! pass threshold; they warm-start at the known primal preimages, which
//! preserves the first-order optimality contract.

use crate::conjugate::{solve_from, ConjugateSolverParams};
use crate::error::{Error, Result};
use crate::linalg::{sample_pairs, SampleCloud, Vector};
use crate::objectives::Objective;
use serde::Serialize;
use std::fmt;
use std::str::FromStr;

/// Pass threshold on normalized margins.
pub const PASS_TOL: f64 = 1e-9;

/// Default inner-solver settings for dual-condition checks.
pub fn dual_check_params() -> ConjugateSolverParams {
    ConjugateSolverParams {
        grad_tol: 1e-12,
        max_iters: 10_000,
        initial_step: 1.0,
    }
}

/// Minimum pair separation enforced while refining constant estimates;
/// closer pairs make the Bregman and gradient ratios rounding-dominated.
const REFINE_MIN_SEPARATION: f64 = 1e-3;
/// Sweeps of coordinate hill climbing during refinement.
const REFINE_SWEEPS: usize = 200;

macro_rules! condition_ids {
    ($(($variant:ident, $name:literal)),+ $(,)?) => {
        /// Identifier of one inequality characterization.
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
        pub enum ConditionId {
            $(#[serde(rename = $name)] $variant),+
        }

        impl ConditionId {
            pub const ALL: &'static [ConditionId] = &[$(ConditionId::$variant),+];

            pub fn as_str(&self) -> &'static str {
                match self {
                    $(ConditionId::$variant => $name),+
                }
            }
        }

        impl FromStr for ConditionId {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok(ConditionId::$variant),)+
                    _ => Err(Error::Usage(format!("unknown condition id `{s}`"))),
                }
            }
        }
    };
}

condition_ids![
    (Conv1, "CONV1"),
    (Conv2, "CONV2"),
    (Conv3, "CONV3"),
    (Sm1, "SM1"),
    (Sm2, "SM2"),
    (Sm3, "SM3"),
    (Psm1, "PSM1"),
    (Psm2, "PSM2"),
    (Psm3, "PSM3"),
    (Dsm1, "DSM1"),
    (Dsm2, "DSM2"),
    (Dsm3, "DSM3"),
    (Sc1, "SC1"),
    (Sc2, "SC2"),
    (Sc3, "SC3"),
    (Psc1, "PSC1"),
    (Psc2, "PSC2"),
    (Psc3, "PSC3"),
    (Dsc1, "DSC1"),
    (Dsc2, "DSC2"),
    (Dsc3, "DSC3"),
    (Smsc1, "SMSC1"),
    (Smsc2, "SMSC2"),
    (Pl, "PL"),
    (BreUp, "BRE_UP"),
    (BreLo, "BRE_LO"),
];

impl fmt::Display for ConditionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl ConditionId {
    /// Conditions on the conjugate, evaluated at gradient-image points.
    pub fn is_dual(&self) -> bool {
        use ConditionId::*;
        matches!(self, Dsm1 | Dsm2 | Dsm3 | Dsc1 | Dsc2 | Dsc3)
    }

    /// Conditions swept over the interpolation grid.
    pub fn uses_lambda(&self) -> bool {
        use ConditionId::*;
        matches!(self, Conv1 | Sm1 | Sc1 | Dsm1 | Dsc1)
    }

    /// Conditions whose inequality is not invariant under swapping the
    /// pair; these are evaluated on both orderings. The gradient-dominance
    /// condition is per-point and uses the swap to visit both pair members.
    fn check_swapped(&self) -> bool {
        use ConditionId::*;
        matches!(
            self,
            Conv1 | Conv3 | Sm1 | Sm3 | Psm2 | Dsm1 | Dsm3 | Sc1 | Sc3 | Psc2 | Dsc1 | Dsc3
                | Smsc2 | Pl | BreUp | BreLo
        )
    }

    fn requires_l(&self) -> bool {
        use ConditionId::*;
        matches!(
            self,
            Sm1 | Sm2 | Sm3 | Psm1 | Psm2 | Psm3 | Dsm1 | Dsm2 | Dsm3 | Smsc1 | Smsc2 | BreUp
        )
    }

    fn requires_mu(&self) -> bool {
        use ConditionId::*;
        matches!(
            self,
            Sc1 | Sc2 | Sc3 | Psc1 | Psc2 | Psc3 | Dsc1 | Dsc2 | Dsc3 | Smsc1 | Smsc2 | BreLo
        )
    }

    /// Conditions placing the constant in a denominator, hence requiring it
    /// strictly positive.
    fn requires_positive_constant(&self) -> bool {
        use ConditionId::*;
        matches!(
            self,
            Psm1 | Psm2 | Dsm1 | Dsm2 | Dsm3 | Psc1 | Psc2 | Dsc1 | Dsc2 | Dsc3 | Smsc1 | Smsc2
        )
    }
}

/// The named constants a condition may consume.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Constants {
    pub l: Option<f64>,
    pub mu: Option<f64>,
    pub nu: Option<f64>,
    pub f_bar: Option<f64>,
}

impl Constants {
    pub fn with_l(l: f64) -> Self {
        Constants {
            l: Some(l),
            ..Default::default()
        }
    }

    pub fn with_mu(mu: f64) -> Self {
        Constants {
            mu: Some(mu),
            ..Default::default()
        }
    }

    pub fn with_l_mu(l: f64, mu: f64) -> Self {
        Constants {
            l: Some(l),
            mu: Some(mu),
            ..Default::default()
        }
    }

    pub fn with_pl(nu: f64, f_bar: f64) -> Self {
        Constants {
            nu: Some(nu),
            f_bar: Some(f_bar),
            ..Default::default()
        }
    }

    /// Compact `name=value` rendering of the set constants, used in CSV.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if let Some(l) = self.l {
            parts.push(format!("L={l}"));
        }
        if let Some(mu) = self.mu {
            parts.push(format!("mu={mu}"));
        }
        if let Some(nu) = self.nu {
            parts.push(format!("nu={nu}"));
        }
        if let Some(fb) = self.f_bar {
            parts.push(format!("fbar={fb}"));
        }
        parts.join(";")
    }
}

/// The sampled evaluation at which a report's worst margin is attained.
/// For dual conditions this is the primal preimage pair; re-evaluating the
/// condition at the witness reproduces the margin bit for bit.
#[derive(Clone, Debug, Serialize)]
pub struct Witness {
    pub x: Vector,
    pub y: Vector,
    pub lambda: Option<f64>,
}

/// Outcome of sampling one condition.
#[derive(Clone, Debug, Serialize)]
pub struct CertReport {
    pub condition: ConditionId,
    pub constants: Constants,
    pub n_checks: usize,
    pub n_skipped: usize,
    pub pass: bool,
    pub worst_margin: f64,
    pub witness: Option<Witness>,
    pub seed: u64,
}

pub(crate) fn normalized_margin(small: f64, big: f64) -> f64 {
    (big - small) / small.abs().max(big.abs()).max(1.0)
}

fn validate_constants(cond: ConditionId, c: &Constants) -> Result<()> {
    if cond.requires_l() && c.l.is_none() {
        return Err(Error::MissingConstant {
            condition: cond.as_str(),
            name: "L",
        });
    }
    if cond.requires_mu() && c.mu.is_none() {
        return Err(Error::MissingConstant {
            condition: cond.as_str(),
            name: "mu",
        });
    }
    if cond == ConditionId::Pl {
        if c.nu.is_none() {
            return Err(Error::MissingConstant {
                condition: cond.as_str(),
                name: "nu",
            });
        }
        if c.f_bar.is_none() {
            return Err(Error::MissingConstant {
                condition: cond.as_str(),
                name: "f_bar",
            });
        }
    }
    if cond.requires_positive_constant() {
        if cond.requires_l() && c.l.unwrap() <= 0.0 {
            return Err(Error::InvalidConstants(format!(
                "{cond} needs L > 0, got {}",
                c.l.unwrap()
            )));
        }
        if cond.requires_mu() && c.mu.unwrap() <= 0.0 {
            return Err(Error::InvalidConstants(format!(
                "{cond} needs mu > 0, got {}",
                c.mu.unwrap()
            )));
        }
    }
    if cond == ConditionId::Smsc2 {
        let (l, mu) = (c.l.unwrap(), c.mu.unwrap());
        if l <= mu + 1e-12 {
            return Err(Error::DegenerateInterpolation { mu, l });
        }
    }
    Ok(())
}

/// Evaluates one condition's normalized margin at a single configuration.
///
/// `x`/`y` are always primal points; dual conditions derive their dual pair
/// as `(grad f(x), grad f(y))` internally. This is the same code path the
/// sampling sweep uses, so a report's witness replays exactly.
pub fn evaluate_condition_at(
    f: &Objective,
    cond: ConditionId,
    constants: &Constants,
    x: &Vector,
    y: &Vector,
    lambda: Option<f64>,
    conj_params: Option<&ConjugateSolverParams>,
) -> Result<f64> {
    validate_constants(cond, constants)?;
    if cond.is_dual() {
        if !f.meta().conjugate_well_posed {
            return Err(Error::IllPosedConjugate {
                name: f.name().to_string(),
            });
        }
        let params = conj_params.copied().unwrap_or_else(dual_check_params);
        return dual_margin(f, cond, constants, x, y, lambda, &params);
    }
    primal_margin(f, cond, constants, x, y, lambda)
}

fn primal_margin(
    f: &Objective,
    cond: ConditionId,
    c: &Constants,
    x: &Vector,
    y: &Vector,
    lambda: Option<f64>,
) -> Result<f64> {
    use ConditionId::*;
    let margin = match cond {
        Conv1 | Sm1 | Sc1 => {
            let lam = lambda.expect("lambda grid supplies interpolation conditions");
            let fx = f.value_checked(x)?;
            let fy = f.value_checked(y)?;
            let mix = f.value_checked(&x.lerp(y, lam))?;
            let chord = lam * fx + (1.0 - lam) * fy;
            let spread = lam * (1.0 - lam) * x.sub(y).dot(&x.sub(y));
            match cond {
                Conv1 => normalized_margin(mix, chord),
                Sm1 => normalized_margin(chord - 0.5 * c.l.unwrap() * spread, mix),
                _ => normalized_margin(mix, chord - 0.5 * c.mu.unwrap() * spread),
            }
        }
        Conv2 | Sm2 | Sc2 | Psm1 | Psm3 | Psc1 | Psc3 | Smsc1 => {
            let gx = f.gradient_checked(x)?;
            let gy = f.gradient_checked(y)?;
            let dx = x.sub(y);
            let dg = gx.sub(&gy);
            let inner = dg.dot(&dx);
            let dist_sq = dx.dot(&dx);
            let grad_sq = dg.dot(&dg);
            match cond {
                Conv2 => normalized_margin(0.0, inner),
                Sm2 => normalized_margin(inner, c.l.unwrap() * dist_sq),
                Sc2 => normalized_margin(c.mu.unwrap() * dist_sq, inner),
                Psm1 => normalized_margin(grad_sq / c.l.unwrap(), inner),
                Psm3 => normalized_margin(grad_sq.sqrt(), c.l.unwrap() * dist_sq.sqrt()),
                Psc1 => normalized_margin(inner, grad_sq / c.mu.unwrap()),
                Psc3 => normalized_margin(c.mu.unwrap() * dist_sq.sqrt(), grad_sq.sqrt()),
                _ => {
                    let (l, mu) = (c.l.unwrap(), c.mu.unwrap());
                    normalized_margin(
                        l * mu / (l + mu) * dist_sq + grad_sq / (l + mu),
                        inner,
                    )
                }
            }
        }
        Conv3 | Sm3 | Sc3 | Psm2 | Psc2 | Smsc2 => {
            let fx = f.value_checked(x)?;
            let fy = f.value_checked(y)?;
            let gx = f.gradient_checked(x)?;
            let linear = fx + gx.dot(&y.sub(x));
            match cond {
                Conv3 => normalized_margin(linear, fy),
                Sm3 => {
                    let d = x.sub(y);
                    normalized_margin(fy, linear + 0.5 * c.l.unwrap() * d.dot(&d))
                }
                Sc3 => {
                    let d = x.sub(y);
                    normalized_margin(linear + 0.5 * c.mu.unwrap() * d.dot(&d), fy)
                }
                Psm2 => {
                    let dg = gx.sub(&f.gradient_checked(y)?);
                    normalized_margin(linear + dg.dot(&dg) / (2.0 * c.l.unwrap()), fy)
                }
                Psc2 => {
                    let dg = gx.sub(&f.gradient_checked(y)?);
                    normalized_margin(fy, linear + dg.dot(&dg) / (2.0 * c.mu.unwrap()))
                }
                _ => {
                    let (l, mu) = (c.l.unwrap(), c.mu.unwrap());
                    let dg = gx.sub(&f.gradient_checked(y)?);
                    let twist = x.sub(y).sub_scaled(1.0 / l, &dg);
                    normalized_margin(
                        linear
                            + dg.dot(&dg) / (2.0 * l)
                            + mu * l / (2.0 * (l - mu)) * twist.dot(&twist),
                        fy,
                    )
                }
            }
        }
        Pl => {
            let gx = f.gradient_checked(x)?;
            let gap = f.value_checked(x)? - c.f_bar.unwrap();
            normalized_margin(c.nu.unwrap() * gap, 0.5 * gx.dot(&gx))
        }
        BreUp | BreLo => {
            let fx = f.value_checked(x)?;
            let fy = f.value_checked(y)?;
            let gy = f.gradient_checked(y)?;
            let d = x.sub(y);
            let d_f = fx - fy - gy.dot(&d);
            let d_phi0 = 0.5 * d.dot(&d);
            if cond == BreUp {
                normalized_margin(d_f, c.l.unwrap() * d_phi0)
            } else {
                normalized_margin(c.mu.unwrap() * d_phi0, d_f)
            }
        }
        Dsm1 | Dsm2 | Dsm3 | Dsc1 | Dsc2 | Dsc3 => {
            unreachable!("dual conditions dispatch through dual_margin")
        }
    };
    Ok(margin)
}

fn dual_margin(
    f: &Objective,
    cond: ConditionId,
    c: &Constants,
    x: &Vector,
    y: &Vector,
    lambda: Option<f64>,
    params: &ConjugateSolverParams,
) -> Result<f64> {
    use ConditionId::*;
    let u = f.gradient_checked(x)?;
    let v = f.gradient_checked(y)?;
    let su = solve_from(f, &u, x, params)?;
    let sv = solve_from(f, &v, y, params)?;
    let duv = u.sub(&v);
    let dist_sq = duv.dot(&duv);
    let margin = match cond {
        Dsm1 | Dsc1 => {
            let lam = lambda.expect("lambda grid supplies interpolation conditions");
            let mix_u = u.lerp(&v, lam);
            let mix_hint = x.lerp(y, lam);
            let sm = solve_from(f, &mix_u, &mix_hint, params)?;
            let chord = lam * su.value + (1.0 - lam) * sv.value;
            let spread = lam * (1.0 - lam) * dist_sq;
            if cond == Dsm1 {
                normalized_margin(sm.value, chord - spread / (2.0 * c.l.unwrap()))
            } else {
                normalized_margin(chord - spread / (2.0 * c.mu.unwrap()), sm.value)
            }
        }
        Dsm2 => {
            let inner = su.argmax.sub(&sv.argmax).dot(&duv);
            normalized_margin(dist_sq / c.l.unwrap(), inner)
        }
        Dsc2 => {
            let inner = su.argmax.sub(&sv.argmax).dot(&duv);
            normalized_margin(inner, dist_sq / c.mu.unwrap())
        }
        Dsm3 => normalized_margin(
            sv.value + sv.argmax.dot(&duv) + dist_sq / (2.0 * c.l.unwrap()),
            su.value,
        ),
        Dsc3 => normalized_margin(
            su.value,
            sv.value + sv.argmax.dot(&duv) + dist_sq / (2.0 * c.mu.unwrap()),
        ),
        _ => unreachable!("primal conditions dispatch through primal_margin"),
    };
    Ok(margin)
}

/// Samples the cloud and evaluates `cond` on every pair (both orderings
/// where the inequality is asymmetric, every grid lambda where it
/// interpolates), reporting the worst normalized margin and its witness.
pub fn check_condition(
    f: &Objective,
    cond: ConditionId,
    constants: &Constants,
    cloud: &SampleCloud,
    conj_params: Option<&ConjugateSolverParams>,
) -> Result<CertReport> {
    validate_constants(cond, constants)?;
    if cond.is_dual() && !f.meta().conjugate_well_posed {
        return Err(Error::IllPosedConjugate {
            name: f.name().to_string(),
        });
    }
    let pairs = sample_pairs(cloud)?;
    check_condition_on_pairs(f, cond, constants, &pairs, cloud, conj_params)
}

fn check_condition_on_pairs(
    f: &Objective,
    cond: ConditionId,
    constants: &Constants,
    pairs: &[(Vector, Vector)],
    cloud: &SampleCloud,
    conj_params: Option<&ConjugateSolverParams>,
) -> Result<CertReport> {
    let lambdas: Vec<Option<f64>> = if cond.uses_lambda() {
        cloud.lambda_grid().iter().map(|l| Some(*l)).collect()
    } else {
        vec![None]
    };
    let mut worst = f64::INFINITY;
    let mut witness = None;
    let mut n_checks = 0;

    for (x, y) in pairs {
        let orderings: &[(&Vector, &Vector)] = if cond.check_swapped() {
            &[(x, y), (y, x)]
        } else {
            &[(x, y)]
        };
        for (a, b) in orderings {
            for lam in &lambdas {
                let margin = evaluate_condition_at(f, cond, constants, a, b, *lam, conj_params)?;
                n_checks += 1;
                if margin < worst {
                    worst = margin;
                    witness = Some(Witness {
                        x: (*a).clone(),
                        y: (*b).clone(),
                        lambda: *lam,
                    });
                }
            }
        }
    }
    Ok(CertReport {
        condition: cond,
        constants: *constants,
        n_checks,
        n_skipped: 0,
        pass: worst >= -PASS_TOL,
        worst_margin: worst,
        witness,
        seed: cloud.seed(),
    })
}

/// A report recording that a condition was not evaluated (for example a
/// dual condition on an objective without a well-posed conjugate).
pub fn skipped_report(
    cond: ConditionId,
    constants: &Constants,
    cloud: &SampleCloud,
) -> CertReport {
    CertReport {
        condition: cond,
        constants: *constants,
        n_checks: 0,
        n_skipped: cloud.pair_count(),
        pass: true,
        worst_margin: f64::INFINITY,
        witness: None,
        seed: cloud.seed(),
    }
}

/// A group of equivalent characterizations checked together.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Family {
    Convex,
    Smooth,
    Strong,
    Joint,
}

impl Family {
    pub fn members(&self) -> &'static [ConditionId] {
        use ConditionId::*;
        match self {
            Family::Convex => &[Conv1, Conv2, Conv3],
            Family::Smooth => &[Sm1, Sm2, Sm3, Psm1, Psm2, Psm3, Dsm1, Dsm2, Dsm3, BreUp],
            Family::Strong => &[Sc1, Sc2, Sc3, Psc1, Psc2, Psc3, Dsc1, Dsc2, Dsc3, BreLo],
            Family::Joint => &[Smsc1, Smsc2],
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Convex => "CONVEX",
            Family::Smooth => "SMOOTH",
            Family::Strong => "STRONG",
            Family::Joint => "JOINT",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Runs every member condition of `family` on the same cloud, in
/// identifier order. A member's failure to evaluate does not abort its
/// siblings; dual members on objectives without a well-posed conjugate are
/// recorded as skipped.
pub fn check_family(
    f: &Objective,
    family: Family,
    constants: &Constants,
    cloud: &SampleCloud,
    conj_params: Option<&ConjugateSolverParams>,
) -> Vec<(ConditionId, Result<CertReport>)> {
    family
        .members()
        .iter()
        .map(|cond| {
            if cond.is_dual() && !f.meta().conjugate_well_posed {
                return (*cond, Ok(skipped_report(*cond, constants, cloud)));
            }
            (
                *cond,
                check_condition(f, *cond, constants, cloud, conj_params),
            )
        })
        .collect()
}

/// Which constant an estimate targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ConstantKind {
    L,
    Mu,
    Pl,
}

/// Direction of the sampling bias: a sampled supremum can only
/// underestimate, a sampled infimum only overestimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Bias {
    LowerBound,
    UpperBound,
}

/// Where an estimate's extremal ratio was observed.
#[derive(Clone, Debug, Serialize)]
pub enum EstimateWitness {
    Pair(Vector, Vector),
    Point(Vector),
}

/// An empirical constant estimate.
///
/// `raw_value` keeps the unclamped extremum: a negative raw minimum for the
/// strong-convexity estimate is direct evidence of a convexity violation
/// and is surfaced rather than silently clamped.
#[derive(Clone, Debug, Serialize)]
pub struct ConstantEstimate {
    pub kind: ConstantKind,
    pub value: f64,
    pub raw_value: f64,
    pub bias: Bias,
    pub witness: EstimateWitness,
    pub n_samples: usize,
    pub refined: bool,
}

fn grad_ratio(f: &Objective, x: &Vector, y: &Vector) -> Result<f64> {
    let dg = f.gradient_checked(x)?.sub(&f.gradient_checked(y)?);
    Ok(dg.norm() / x.dist(y))
}

fn bregman_ratio_raw(f: &Objective, x: &Vector, y: &Vector) -> Result<Option<f64>> {
    let d = x.sub(y);
    let d_phi0 = 0.5 * d.dot(&d);
    if d_phi0 <= 1e-14 {
        return Ok(None);
    }
    let d_f = f.value_checked(x)? - f.value_checked(y)? - f.gradient_checked(y)?.dot(&d);
    Ok(Some(d_f / d_phi0))
}

/// Coordinate hill climbing over a pair, staying inside the box and above
/// the refinement separation floor. `improves` orders candidate ratios.
fn refine_pair(
    cloud: &SampleCloud,
    mut x: Vector,
    mut y: Vector,
    mut best: f64,
    eval: impl Fn(&Vector, &Vector) -> Option<f64>,
    improves: impl Fn(f64, f64) -> bool,
) -> (Vector, Vector, f64) {
    let floor = cloud.min_separation().max(REFINE_MIN_SEPARATION);
    let mut step = (0..cloud.dim())
        .map(|i| cloud.box_high()[i] - cloud.box_low()[i])
        .fold(0.0f64, f64::max)
        / 4.0;
    for _ in 0..REFINE_SWEEPS {
        let mut improved = false;
        for side in 0..2 {
            for coord in 0..cloud.dim() {
                for sign in [1.0, -1.0] {
                    let (cx, cy) = perturb_pair(cloud, &x, &y, side, coord, sign * step);
                    if cx.dist(&cy) < floor {
                        continue;
                    }
                    if let Some(r) = eval(&cx, &cy) {
                        if improves(r, best) {
                            best = r;
                            x = cx;
                            y = cy;
                            improved = true;
                        }
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
            if step < 1e-12 {
                break;
            }
        }
    }
    (x, y, best)
}

fn perturb_pair(
    cloud: &SampleCloud,
    x: &Vector,
    y: &Vector,
    side: usize,
    coord: usize,
    delta: f64,
) -> (Vector, Vector) {
    let mut cx = x.as_slice().to_vec();
    let mut cy = y.as_slice().to_vec();
    if side == 0 {
        cx[coord] += delta;
    } else {
        cy[coord] += delta;
    }
    let cx = cloud.clamp(&Vector::new(cx).unwrap_or_else(|_| x.clone()));
    let cy = cloud.clamp(&Vector::new(cy).unwrap_or_else(|_| y.clone()));
    (cx, cy)
}

fn refine_point(
    cloud: &SampleCloud,
    mut x: Vector,
    mut best: f64,
    eval: impl Fn(&Vector) -> Option<f64>,
    improves: impl Fn(f64, f64) -> bool,
) -> (Vector, f64) {
    let mut step = (0..cloud.dim())
        .map(|i| cloud.box_high()[i] - cloud.box_low()[i])
        .fold(0.0f64, f64::max)
        / 4.0;
    for _ in 0..REFINE_SWEEPS {
        let mut improved = false;
        for coord in 0..cloud.dim() {
            for sign in [1.0, -1.0] {
                let mut cand = x.as_slice().to_vec();
                cand[coord] += sign * step;
                let cand = cloud.clamp(&match Vector::new(cand) {
                    Ok(v) => v,
                    Err(_) => continue,
                });
                if let Some(r) = eval(&cand) {
                    if improves(r, best) {
                        best = r;
                        x = cand;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
            if step < 1e-12 {
                break;
            }
        }
    }
    (x, best)
}

/// Empirical smoothness constant: the largest sampled gradient-difference
/// ratio `|grad f(x) - grad f(y)| / |x - y|`, optionally sharpened by
/// coordinate hill climbing from the best witness. Sampling a supremum
/// biases the estimate low.
pub fn estimate_l(f: &Objective, cloud: &SampleCloud, refine: bool) -> Result<ConstantEstimate> {
    let pairs = sample_pairs(cloud)?;
    let mut best = f64::NEG_INFINITY;
    let mut witness = (pairs[0].0.clone(), pairs[0].1.clone());
    for (x, y) in &pairs {
        let r = grad_ratio(f, x, y)?;
        if r > best {
            best = r;
            witness = (x.clone(), y.clone());
        }
    }
    let n_samples = pairs.len();
    let (x, y, best) = if refine {
        refine_pair(
            cloud,
            witness.0,
            witness.1,
            best,
            |x, y| grad_ratio(f, x, y).ok(),
            |new, cur| new > cur,
        )
    } else {
        (witness.0, witness.1, best)
    };
    Ok(ConstantEstimate {
        kind: ConstantKind::L,
        value: best,
        raw_value: best,
        bias: Bias::LowerBound,
        witness: EstimateWitness::Pair(x, y),
        n_samples,
        refined: refine,
    })
}

/// Empirical strong-convexity constant: the smallest sampled Bregman ratio
/// against the reference `|.|^2 / 2`, clamped at zero. A negative raw
/// minimum is kept in `raw_value` as convexity-violation evidence.
pub fn estimate_mu(f: &Objective, cloud: &SampleCloud, refine: bool) -> Result<ConstantEstimate> {
    let pairs = sample_pairs(cloud)?;
    let mut best = f64::INFINITY;
    let mut witness = (pairs[0].0.clone(), pairs[0].1.clone());
    let mut n_samples = 0;
    for (x, y) in &pairs {
        if let Some(r) = bregman_ratio_raw(f, x, y)? {
            n_samples += 1;
            if r < best {
                best = r;
                witness = (x.clone(), y.clone());
            }
        }
    }
    let (x, y, raw) = if refine {
        refine_pair(
            cloud,
            witness.0,
            witness.1,
            best,
            |x, y| bregman_ratio_raw(f, x, y).ok().flatten(),
            |new, cur| new < cur,
        )
    } else {
        (witness.0, witness.1, best)
    };
    Ok(ConstantEstimate {
        kind: ConstantKind::Mu,
        value: raw.max(0.0),
        raw_value: raw,
        bias: Bias::UpperBound,
        witness: EstimateWitness::Pair(x, y),
        n_samples,
        refined: refine,
    })
}

/// Empirical gradient-dominance constant with respect to the optimal value
/// `f_bar`: the smallest sampled ratio `|grad f(x)|^2 / 2 / (f(x) - f_bar)`
/// over points with a gap above rounding level.
pub fn estimate_pl(
    f: &Objective,
    f_bar: f64,
    cloud: &SampleCloud,
    refine: bool,
) -> Result<ConstantEstimate> {
    let pairs = sample_pairs(cloud)?;
    let ratio = |x: &Vector| -> Result<Option<f64>> {
        let gap = f.value_checked(x)? - f_bar;
        if gap < -1e-9 {
            return Err(Error::InconsistentOptimum {
                point: x.clone(),
                value: gap + f_bar,
                f_bar,
            });
        }
        if gap <= 1e-12 {
            return Ok(None);
        }
        let g = f.gradient_checked(x)?;
        Ok(Some(0.5 * g.dot(&g) / gap))
    };

    let mut best = f64::INFINITY;
    let mut witness: Option<Vector> = None;
    let mut n_samples = 0;
    for (x, y) in &pairs {
        for p in [x, y] {
            if let Some(r) = ratio(p)? {
                n_samples += 1;
                if r < best {
                    best = r;
                    witness = Some(p.clone());
                }
            }
        }
    }
    let witness = witness.ok_or_else(|| {
        Error::InvalidConstants("every sampled point sits at the optimum; no ratio defined".into())
    })?;
    let (point, best) = if refine {
        refine_point(
            cloud,
            witness,
            best,
            |x| ratio(x).ok().flatten(),
            |new, cur| new < cur,
        )
    } else {
        (witness, best)
    };
    Ok(ConstantEstimate {
        kind: ConstantKind::Pl,
        value: best.max(0.0),
        raw_value: best,
        bias: Bias::UpperBound,
        witness: EstimateWitness::Point(point),
        n_samples,
        refined: refine,
    })
}
