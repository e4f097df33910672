//! Dense vectors, deterministic box sampling and a finite-difference
//! gradient oracle.
//!
//! Everything here is pure: values are immutable after construction and can
//! be shared across threads freely.
//!
//! Randomness is produced by the counter-based ChaCha8 stream cipher
//! ([`rand_chacha::ChaCha8Rng`]), seeded from the cloud's 64-bit seed.
//! Independent sampling purposes use distinct stream numbers of the same
//! seed, so a single seed reproduces the entire experiment bit for bit:
//!
//! | stream | purpose                         |
//! |--------|---------------------------------|
//! | 0      | paired box samples              |
//! | 1      | extra lambda draws              |
//! | 2      | unpaired box samples            |

use crate::error::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fmt;
use std::ops::Index;

const PAIR_STREAM: u64 = 0;
const LAMBDA_STREAM: u64 = 1;
const POINT_STREAM: u64 = 2;

/// Maximum consecutive rejections before pair sampling gives up.
const MAX_REJECTIONS: usize = 1000;

/// A dense point of a finite-dimensional real space.
///
/// Invariants: at least one component, every component finite.
#[derive(Clone, PartialEq, Serialize)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidVector("dimension must be at least 1".into()));
        }
        if let Some(c) = components.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidVector(format!("non-finite component {c}")));
        }
        Ok(Vector(components))
    }

    /// Builds from components, panicking on invariant violation.
    /// Intended for literals in code and tests.
    pub fn from_slice(components: &[f64]) -> Self {
        Self::new(components.to_vec()).expect("invalid vector literal")
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        Vector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dot: dimension mismatch");
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim(), "add: dimension mismatch");
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim(), "sub: dimension mismatch");
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, s: f64) -> Self {
        Vector(self.0.iter().map(|a| s * a).collect())
    }

    /// `self - s * other`, the gradient-step shape.
    pub fn sub_scaled(&self, s: f64, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim(), "sub_scaled: dimension mismatch");
        Vector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a - s * b)
                .collect(),
        )
    }

    /// Convex combination `lambda * self + (1 - lambda) * other`.
    pub fn lerp(&self, other: &Self, lambda: f64) -> Self {
        assert_eq!(self.dim(), other.dim(), "lerp: dimension mismatch");
        Vector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
                .collect(),
        )
    }

    pub fn dist(&self, other: &Self) -> f64 {
        self.sub(other).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Inner product of two vectors of equal dimension.
pub fn dot(x: &Vector, y: &Vector) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            got: y.dim(),
        });
    }
    Ok(x.dot(y))
}

/// Euclidean norm induced by [`dot`].
pub fn norm(x: &Vector) -> f64 {
    x.norm()
}

/// Configuration of a deterministic cloud of sampled point pairs.
///
/// The cloud stands in for the "for all x, y" quantifier of the certified
/// inequalities: it fixes a box, a pair budget, a grid of interpolation
/// parameters and a seed, so that every run over it is replayable.
#[derive(Clone, Debug, Serialize)]
pub struct SampleCloud {
    dim: usize,
    box_low: Vec<f64>,
    box_high: Vec<f64>,
    pair_count: usize,
    lambda_grid: Vec<f64>,
    seed: u64,
    min_separation: f64,
}

/// Default box bound: `[-2, 2]` in every coordinate.
pub const DEFAULT_BOX_HALF_WIDTH: f64 = 2.0;
/// Default number of sampled pairs.
pub const DEFAULT_PAIR_COUNT: usize = 2000;
/// Default minimum separation between the two points of a pair.
pub const DEFAULT_MIN_SEPARATION: f64 = 1e-8;
/// Fixed part of the default lambda grid; 8 seeded uniform draws are added.
pub const LAMBDA_GRID_FIXED: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
const LAMBDA_GRID_EXTRA: usize = 8;

impl SampleCloud {
    pub fn new(
        dim: usize,
        box_low: Vec<f64>,
        box_high: Vec<f64>,
        pair_count: usize,
        lambda_grid: Vec<f64>,
        seed: u64,
        min_separation: f64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidCloud("dimension must be at least 1".into()));
        }
        if box_low.len() != dim || box_high.len() != dim {
            return Err(Error::InvalidCloud("box bounds must match dimension".into()));
        }
        if box_low
            .iter()
            .zip(&box_high)
            .any(|(lo, hi)| !lo.is_finite() || !hi.is_finite() || lo >= hi)
        {
            return Err(Error::InvalidCloud(
                "box_low must be coordinatewise below box_high".into(),
            ));
        }
        if pair_count == 0 {
            return Err(Error::InvalidCloud("pair_count must be positive".into()));
        }
        if lambda_grid.iter().any(|l| !(0.0..=1.0).contains(l)) {
            return Err(Error::InvalidCloud("lambda grid must lie in [0, 1]".into()));
        }
        if !lambda_grid.contains(&0.0) || !lambda_grid.contains(&1.0) {
            return Err(Error::InvalidCloud("lambda grid must contain 0 and 1".into()));
        }
        if !(min_separation > 0.0) {
            return Err(Error::InvalidCloud("min_separation must be positive".into()));
        }
        Ok(SampleCloud {
            dim,
            box_low,
            box_high,
            pair_count,
            lambda_grid,
            seed,
            min_separation,
        })
    }

    /// Default cloud for a given dimension and seed: box `[-2, 2]^d`,
    /// 2000 pairs, lambda grid `{0, 0.25, 0.5, 0.75, 1}` plus 8 seeded
    /// uniform draws, minimum separation `1e-8`.
    pub fn with_defaults(dim: usize, seed: u64) -> Self {
        Self::with_box(
            dim,
            -DEFAULT_BOX_HALF_WIDTH,
            DEFAULT_BOX_HALF_WIDTH,
            DEFAULT_PAIR_COUNT,
            seed,
        )
        .expect("default cloud construction cannot fail")
    }

    /// Cloud with a uniform scalar box `[low, high]^d` and otherwise
    /// default lambda grid and separation.
    pub fn with_box(dim: usize, low: f64, high: f64, pair_count: usize, seed: u64) -> Result<Self> {
        let mut grid = LAMBDA_GRID_FIXED.to_vec();
        let mut rng = seeded_rng(seed, LAMBDA_STREAM);
        for _ in 0..LAMBDA_GRID_EXTRA {
            grid.push(rng.gen::<f64>());
        }
        Self::new(
            dim,
            vec![low; dim],
            vec![high; dim],
            pair_count,
            grid,
            seed,
            DEFAULT_MIN_SEPARATION,
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn pair_count(&self) -> usize {
        self.pair_count
    }
    pub fn lambda_grid(&self) -> &[f64] {
        &self.lambda_grid
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn min_separation(&self) -> f64 {
        self.min_separation
    }
    pub fn box_low(&self) -> &[f64] {
        &self.box_low
    }
    pub fn box_high(&self) -> &[f64] {
        &self.box_high
    }

    /// Clamps a candidate point into the cloud's box, coordinatewise.
    pub fn clamp(&self, x: &Vector) -> Vector {
        Vector(
            x.as_slice()
                .iter()
                .enumerate()
                .map(|(i, c)| c.clamp(self.box_low[i], self.box_high[i]))
                .collect(),
        )
    }

    fn draw_point(&self, rng: &mut ChaCha8Rng) -> Vector {
        Vector(
            (0..self.dim)
                .map(|i| {
                    let u: f64 = rng.gen();
                    self.box_low[i] + u * (self.box_high[i] - self.box_low[i])
                })
                .collect(),
        )
    }
}

pub(crate) fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws exactly `pair_count` uniform pairs from the cloud's box.
///
/// Pairs closer than the minimum separation are rejected and redrawn; after
/// 1000 consecutive rejections the box is considered degenerate and a
/// [`Error::SamplingExhausted`] is returned. Identical cloud configuration
/// reproduces the identical list bit for bit.
pub fn sample_pairs(cloud: &SampleCloud) -> Result<Vec<(Vector, Vector)>> {
    let mut rng = seeded_rng(cloud.seed, PAIR_STREAM);
    let mut pairs = Vec::with_capacity(cloud.pair_count);
    while pairs.len() < cloud.pair_count {
        let mut rejected = 0;
        loop {
            let x = cloud.draw_point(&mut rng);
            let y = cloud.draw_point(&mut rng);
            if x.dist(&y) >= cloud.min_separation {
                pairs.push((x, y));
                break;
            }
            rejected += 1;
            if rejected >= MAX_REJECTIONS {
                return Err(Error::SamplingExhausted {
                    attempts: rejected,
                });
            }
        }
    }
    Ok(pairs)
}

/// Draws `count` unpaired points from the cloud's box (no separation
/// constraint), on an independent stream of the cloud's seed.
pub fn sample_points(cloud: &SampleCloud, count: usize) -> Vec<Vector> {
    let mut rng = seeded_rng(cloud.seed, POINT_STREAM);
    (0..count).map(|_| cloud.draw_point(&mut rng)).collect()
}

/// Central-difference gradient of `f` at `x` with step `h > 0`.
///
/// Component `i` is `(f(x + h e_i) - f(x - h e_i)) / (2h)`. Any non-finite
/// function value aborts with an error carrying the offending point.
pub fn fd_gradient<F: Fn(&Vector) -> f64>(f: F, x: &Vector, h: f64) -> Result<Vector> {
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut grad = Vec::with_capacity(x.dim());
    let mut probe = x.0.clone();
    for i in 0..x.dim() {
        let xi = probe[i];
        probe[i] = xi + h;
        let fp = f(&Vector(probe.clone()));
        probe[i] = xi - h;
        let fm = f(&Vector(probe.clone()));
        probe[i] = xi;
        if !fp.is_finite() || !fm.is_finite() {
            let mut bad = x.0.clone();
            bad[i] = if fp.is_finite() { xi - h } else { xi + h };
            return Err(Error::NonFiniteEvaluation {
                what: "finite-difference probe".into(),
                point: Vector(bad),
            });
        }
        grad.push((fp - fm) / (2.0 * h));
    }
    Ok(Vector(grad))
}

/// Step size used by the gradient self-checks: `1e-5 * max(1, |x|)`.
pub fn fd_step_for(x: &Vector) -> f64 {
    1e-5 * x.norm().max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(c: &[f64]) -> Vector {
        Vector::from_slice(c)
    }

    #[test]
    fn dot_examples() {
        assert_eq!(dot(&v(&[1.0, 2.0]), &v(&[3.0, 4.0])).unwrap(), 11.0);
        assert_eq!(dot(&v(&[0.0, 0.0]), &v(&[5.0, -7.0])).unwrap(), 0.0);
        assert_eq!(dot(&v(&[1.0, 1.0]), &v(&[1.0, -1.0])).unwrap(), 0.0);
    }

    #[test]
    fn dot_dimension_mismatch() {
        let err = dot(&v(&[1.0, 2.0]), &v(&[1.0])).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 2, got: 1 }));
    }

    #[test]
    fn norm_examples() {
        assert_eq!(norm(&v(&[3.0, 4.0])), 5.0);
        assert_eq!(norm(&v(&[0.0, 0.0, 0.0])), 0.0);
        assert!((norm(&v(&[1.0, 1.0])) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn vector_invariants() {
        assert!(Vector::new(vec![]).is_err());
        assert!(Vector::new(vec![1.0, f64::NAN]).is_err());
        assert!(Vector::new(vec![f64::INFINITY]).is_err());
        assert!(Vector::new(vec![1.0, -2.0]).is_ok());
    }

    #[test]
    fn dot_symmetric_and_bilinear() {
        let mut rng = seeded_rng(42, 9);
        for _ in 0..10_000 {
            let x = v(&[rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5]);
            let y = v(&[rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5]);
            let z = v(&[rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5]);
            let (a, b) = (rng.gen::<f64>() * 4.0 - 2.0, rng.gen::<f64>() * 4.0 - 2.0);
            assert_eq!(x.dot(&y), y.dot(&x));
            let lhs = x.scale(a).add(&y.scale(b)).dot(&z);
            let rhs = a * x.dot(&z) + b * y.dot(&z);
            let scale = lhs.abs().max(rhs.abs()).max(1.0);
            assert!((lhs - rhs).abs() / scale < 1e-12, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn norm_triangle_and_homogeneity() {
        let mut rng = seeded_rng(43, 9);
        for _ in 0..1000 {
            let x = v(&[rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5]);
            let y = v(&[rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5]);
            let a = rng.gen::<f64>() * 6.0 - 3.0;
            assert!(x.add(&y).norm() <= x.norm() + y.norm() + 1e-12);
            assert!((x.scale(a).norm() - a.abs() * x.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn sample_pairs_contract() {
        let cloud = SampleCloud::with_box(2, -2.0, 2.0, 100, 7).unwrap();
        let pairs = sample_pairs(&cloud).unwrap();
        assert_eq!(pairs.len(), 100);
        for (x, y) in &pairs {
            for i in 0..2 {
                assert!(x[i] >= -2.0 && x[i] <= 2.0);
                assert!(y[i] >= -2.0 && y[i] <= 2.0);
            }
            assert!(x.dist(y) >= cloud.min_separation());
        }
    }

    #[test]
    fn sample_pairs_deterministic() {
        let cloud = SampleCloud::with_defaults(3, 7);
        let a = sample_pairs(&cloud).unwrap();
        let b = sample_pairs(&cloud).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sample_pairs_infeasible_separation() {
        // Separation larger than the box diameter can never be met.
        let cloud = SampleCloud::new(
            2,
            vec![-1.0, -1.0],
            vec![1.0, 1.0],
            10,
            vec![0.0, 1.0],
            7,
            100.0,
        )
        .unwrap();
        assert!(matches!(
            sample_pairs(&cloud),
            Err(Error::SamplingExhausted { .. })
        ));
    }

    #[test]
    fn cloud_invariants() {
        assert!(SampleCloud::new(2, vec![1.0, 0.0], vec![0.0, 1.0], 1, vec![0.0, 1.0], 0, 1e-8).is_err());
        assert!(SampleCloud::new(2, vec![0.0; 2], vec![1.0; 2], 1, vec![0.5, 1.0], 0, 1e-8).is_err());
        assert!(SampleCloud::new(2, vec![0.0; 2], vec![1.0; 2], 1, vec![0.0, 1.0], 0, 0.0).is_err());
        let cloud = SampleCloud::with_defaults(2, 11);
        assert!(cloud.lambda_grid().contains(&0.0));
        assert!(cloud.lambda_grid().contains(&1.0));
        assert_eq!(cloud.lambda_grid().len(), 13);
        assert!(cloud.lambda_grid().iter().all(|l| (0.0..=1.0).contains(l)));
    }

    #[test]
    fn fd_gradient_of_half_norm_squared() {
        let f = |p: &Vector| 0.5 * p.dot(p);
        let x = v(&[1.0, 2.0]);
        let g = fd_gradient(f, &x, 1e-5).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-8);
        assert!((g[1] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn fd_gradient_of_diagonal_quadratic() {
        let f = |p: &Vector| 0.5 * (p[0] * p[0] + 4.0 * p[1] * p[1]);
        let x = v(&[1.0, 1.0]);
        let g = fd_gradient(f, &x, 1e-5).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-6);
        assert!((g[1] - 4.0).abs() < 1e-6);
    }

    #[test]
    fn fd_gradient_of_quartic() {
        let f = |p: &Vector| p[0].powi(4);
        let g = fd_gradient(f, &v(&[2.0]), 1e-4).unwrap();
        assert!((g[0] - 32.0).abs() < 1e-5);
    }

    #[test]
    fn fd_gradient_reports_offending_point() {
        let f = |p: &Vector| if p[0] > 1.5 { f64::NAN } else { p[0] };
        let err = fd_gradient(f, &v(&[1.5]), 0.25).unwrap_err();
        match err {
            Error::NonFiniteEvaluation { point, .. } => assert!((point[0] - 1.75).abs() < 1e-15),
            other => panic!("unexpected error {other:?}"),
        }
    }
}
