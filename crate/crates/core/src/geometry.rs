//! Homographies: normalized DLT, seeded RANSAC, and ground-truth
//! verification of putative matches.

use std::path::Path;

use nalgebra::{DMatrix, Matrix3, Point2, Vector3};
use thiserror::Error;

use crate::features::Keypoint;
use crate::matcher::MatchCandidate;
use crate::rng::XorShift64;

/// Smallest |det| accepted after normalization.
pub const DET_FLOOR: f64 = 1e-12;
/// Smallest |w| accepted in the perspective divide.
pub const W_FLOOR: f64 = 1e-12;
/// Default ground-truth tolerance in pixels.
pub const DEFAULT_EPS: f64 = 3.0;
pub const DEFAULT_RANSAC_ITERS: usize = 2000;

const SINGULAR_RATIO_LIMIT: f64 = 0.99;
const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("homography is singular (|det| = {0:e})")]
    Singular(f64),
    #[error("point maps to infinity (w = {0:e})")]
    PointAtInfinity(f64),
    #[error("need at least 4 correspondences, got {0}")]
    TooFewPoints(usize),
    #[error("degenerate point configuration")]
    Degenerate,
    #[error("no model reached 4 inliers")]
    NoConsensus,
    #[error("invalid RANSAC parameters: {0}")]
    InvalidParams(&'static str),
    #[error("malformed homography text: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("match refers to keypoint {index} but only {len} exist")]
    IndexOutOfRange { index: usize, len: usize },
}

pub type Point = Point2<f64>;

/// Invertible 3×3 projective transform. Scaled so `h[2][2] == 1` when that
/// entry is non-zero, otherwise to unit Frobenius norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography(Matrix3<f64>);

impl Homography {
    pub fn new(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::Singular(f64::NAN));
        }
        let norm = m.norm();
        if norm == 0.0 {
            return Err(GeometryError::Singular(0.0));
        }
        let m = if m[(2, 2)].abs() > 1e-12 * norm {
            m / m[(2, 2)]
        } else {
            m / norm
        };
        let det = m.determinant();
        if !(det.abs() > DET_FLOOR) {
            return Err(GeometryError::Singular(det));
        }
        Ok(Self(m))
    }

    pub fn from_row_slice(rows: &[f64; 9]) -> Result<Self, GeometryError> {
        Self::new(Matrix3::from_row_slice(rows))
    }

    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn inverse(&self) -> Result<Self, GeometryError> {
        let inv = self
            .0
            .try_inverse()
            .ok_or(GeometryError::Singular(self.0.determinant()))?;
        Self::new(inv)
    }

    /// Similarity or projective composition `self · other`.
    pub fn compose(&self, other: &Homography) -> Result<Self, GeometryError> {
        Self::new(self.0 * other.0)
    }

    pub fn apply(&self, p: &Point) -> Result<Point, GeometryError> {
        let v = self.0 * Vector3::new(p.x, p.y, 1.0);
        if v.z.abs() < W_FLOOR {
            return Err(GeometryError::PointAtInfinity(v.z));
        }
        Ok(Point::new(v.x / v.z, v.y / v.z))
    }

    /// Largest absolute entry-wise difference.
    pub fn max_abs_diff(&self, other: &Homography) -> f64 {
        (self.0 - other.0).amax()
    }

    /// Euclidean reprojection error of `dst` against the image of `src`.
    pub fn transfer_error(&self, src: &Point, dst: &Point) -> Result<f64, GeometryError> {
        Ok((self.apply(src)? - dst).norm())
    }
}

/// Free-function form of [`Homography::apply`].
pub fn apply(h: &Homography, p: &Point) -> Result<Point, GeometryError> {
    h.apply(p)
}

/// Parses nine whitespace-separated reals, row-major.
pub fn parse_homography(text: &str) -> Result<Homography, GeometryError> {
    let vals = text
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| GeometryError::Parse(format!("not a finite number: {t:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let rows: [f64; 9] = vals
        .as_slice()
        .try_into()
        .map_err(|_| GeometryError::Parse(format!("expected 9 values, found {}", vals.len())))?;
    Homography::from_row_slice(&rows)
}

pub fn load_homography(path: impl AsRef<Path>) -> Result<Homography, GeometryError> {
    parse_homography(&std::fs::read_to_string(path)?)
}

/// Similarity that moves the centroid to the origin and scales the mean
/// distance from it to √2.
fn hartley_transform(pts: &[Point]) -> Result<Matrix3<f64>, GeometryError> {
    let n = pts.len() as f64;
    let c = pts.iter().fold(nalgebra::Vector2::zeros(), |acc, p| acc + p.coords) / n;
    let mean = pts.iter().map(|p| (p.coords - c).norm()).sum::<f64>() / n;
    if !(mean > 1e-12) || !mean.is_finite() {
        return Err(GeometryError::Degenerate);
    }
    let s = std::f64::consts::SQRT_2 / mean;
    Ok(Matrix3::new(s, 0.0, -s * c.x, 0.0, s, -s * c.y, 0.0, 0.0, 1.0))
}

fn transform(t: &Matrix3<f64>, p: &Point) -> Point {
    Point::new(
        t[(0, 0)] * p.x + t[(0, 2)],
        t[(1, 1)] * p.y + t[(1, 2)],
    )
}

/// Normalized direct linear transform from `(src, dst)` pairs.
pub fn dlt(pairs: &[(Point, Point)]) -> Result<Homography, GeometryError> {
    if pairs.len() < 4 {
        return Err(GeometryError::TooFewPoints(pairs.len()));
    }
    let src: Vec<Point> = pairs.iter().map(|p| p.0).collect();
    let dst: Vec<Point> = pairs.iter().map(|p| p.1).collect();
    let ts = hartley_transform(&src)?;
    let td = hartley_transform(&dst)?;

    // zero rows pad the 4-point case to a square system so the SVD exposes
    // the full right null space
    let rows = (2 * pairs.len()).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (k, (s, d)) in src.iter().zip(&dst).enumerate() {
        let s = transform(&ts, s);
        let d = transform(&td, d);
        let (x, y, u, v) = (s.x, s.y, d.x, d.y);
        let r = 2 * k;
        a.row_mut(r)
            .copy_from_slice(&[-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u]);
        a.row_mut(r + 1)
            .copy_from_slice(&[0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v]);
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.as_ref().ok_or(GeometryError::Degenerate)?;
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[i].total_cmp(&sv[j]));
    let (s_min, s_second, s_max) = (sv[order[0]], sv[order[1]], sv[order[sv.len() - 1]]);
    if s_second <= RANK_TOL * s_max || s_min / s_second > SINGULAR_RATIO_LIMIT {
        return Err(GeometryError::Degenerate);
    }
    let h = v_t.row(order[0]);
    let hn = Matrix3::from_row_slice(&[h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]]);
    let td_inv = td.try_inverse().ok_or(GeometryError::Degenerate)?;
    Homography::new(td_inv * hn * ts)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacParams {
    pub iters: usize,
    pub inlier_eps: f64,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            iters: DEFAULT_RANSAC_ITERS,
            inlier_eps: DEFAULT_EPS,
            seed: crate::features::DEFAULT_PATTERN_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacResult {
    /// DLT refit on every inlier of the best sampled model.
    pub homography: Homography,
    /// Consensus set of the best sampled model.
    pub inliers: Vec<bool>,
}

impl RansacResult {
    pub fn inlier_count(&self) -> usize {
        self.inliers.iter().filter(|&&f| f).count()
    }
}

fn keypoint_point(kps: &[Keypoint], index: usize) -> Result<Point, GeometryError> {
    kps.get(index)
        .map(|k| Point::new(k.x as f64, k.y as f64))
        .ok_or(GeometryError::IndexOutOfRange {
            index,
            len: kps.len(),
        })
}

/// Resolves matches into `(point in A, point in B)` pairs.
pub fn correspondences(
    matches: &[MatchCandidate],
    kps_a: &[Keypoint],
    kps_b: &[Keypoint],
) -> Result<Vec<(Point, Point)>, GeometryError> {
    matches
        .iter()
        .map(|m| Ok((keypoint_point(kps_a, m.index_a)?, keypoint_point(kps_b, m.index_b)?)))
        .collect()
}

fn consensus(h: &Homography, pairs: &[(Point, Point)], eps: f64) -> Vec<bool> {
    pairs
        .iter()
        .map(|(s, d)| h.transfer_error(s, d).is_ok_and(|e| e <= eps))
        .collect()
}

/// Seeded RANSAC over point correspondences. Ties in consensus size keep
/// the earlier iteration.
pub fn ransac_points(
    pairs: &[(Point, Point)],
    params: &RansacParams,
) -> Result<RansacResult, GeometryError> {
    let n = pairs.len();
    if n < 4 {
        return Err(GeometryError::TooFewPoints(n));
    }
    if params.iters == 0 {
        return Err(GeometryError::InvalidParams("iters must be >= 1"));
    }
    if !(params.inlier_eps > 0.0) {
        return Err(GeometryError::InvalidParams("inlier_eps must be > 0"));
    }
    let mut rng = XorShift64::new(params.seed)
        .ok_or(GeometryError::InvalidParams("seed must be non-zero"))?;

    let mut best: Option<(usize, Vec<bool>, Homography)> = None;
    for _ in 0..params.iters {
        let mut idx = [0usize; 4];
        let mut k = 0;
        while k < 4 {
            let i = rng.below(n as u64) as usize;
            if !idx[..k].contains(&i) {
                idx[k] = i;
                k += 1;
            }
        }
        let sample = idx.map(|i| pairs[i]);
        let Ok(h) = dlt(&sample) else { continue };
        let flags = consensus(&h, pairs, params.inlier_eps);
        let count = flags.iter().filter(|&&f| f).count();
        if best.as_ref().is_none_or(|(c, _, _)| count > *c) {
            best = Some((count, flags, h));
        }
    }
    let (count, inliers, h) = best.ok_or(GeometryError::NoConsensus)?;
    if count < 4 {
        return Err(GeometryError::NoConsensus);
    }
    let support: Vec<(Point, Point)> = pairs
        .iter()
        .zip(&inliers)
        .filter_map(|(p, &f)| f.then_some(*p))
        .collect();
    let homography = dlt(&support).unwrap_or(h);
    Ok(RansacResult {
        homography,
        inliers,
    })
}

pub fn ransac_homography(
    matches: &[MatchCandidate],
    kps_a: &[Keypoint],
    kps_b: &[Keypoint],
    params: &RansacParams,
) -> Result<RansacResult, GeometryError> {
    ransac_points(&correspondences(matches, kps_a, kps_b)?, params)
}

/// Number of matches whose B keypoint lies within `eps` pixels of the
/// ground-truth image of its A keypoint. Matches with out-of-range indices
/// or points mapped to infinity count as incorrect.
pub fn count_correct(
    matches: &[MatchCandidate],
    kps_a: &[Keypoint],
    kps_b: &[Keypoint],
    h_gt: &Homography,
    eps: f64,
) -> usize {
    matches
        .iter()
        .filter(|m| {
            match (
                keypoint_point(kps_a, m.index_a),
                keypoint_point(kps_b, m.index_b),
            ) {
                (Ok(a), Ok(b)) => h_gt.transfer_error(&a, &b).is_ok_and(|e| e <= eps),
                _ => false,
            }
        })
        .count()
}
