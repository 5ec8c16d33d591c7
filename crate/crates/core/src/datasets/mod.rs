//! Synthetic point clouds, noise models and scale normalization.

mod arclength;
mod io;

pub use arclength::ArcLengthTable;
pub use io::{load_csv, save_csv};

use ndarray::{Array1, Array2};

use crate::error::invalid;
use crate::numerics::{orthonormal_columns, DenseMatrix, SeededRng};
use crate::transport::CostMatrix;
use crate::{Error, Result};
use std::f64::consts::TAU;

/// Trapezoid steps used to tabulate arc length.
const ARC_STEPS: usize = 100_000;

/// `N` points in `D` dimensions with optional curve parameters and class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    points: DenseMatrix,
    params: Option<Vec<f64>>,
    labels: Option<Vec<usize>>,
}

impl PointCloud {
    pub fn new(points: DenseMatrix) -> Result<Self> {
        Self::with_metadata(points, None, None)
    }

    pub fn with_metadata(points: DenseMatrix, params: Option<Vec<f64>>, labels: Option<Vec<usize>>) -> Result<Self> {
        let n = points.nrows();
        if n == 0 || points.ncols() == 0 {
            return Err(invalid("point cloud must have at least one point and one dimension"));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(invalid("point coordinates must be finite"));
        }
        if params.as_ref().is_some_and(|p| p.len() != n) {
            return Err(invalid(format!("expected {n} curve parameters")));
        }
        if labels.as_ref().is_some_and(|l| l.len() != n) {
            return Err(invalid(format!("expected {n} labels")));
        }
        Ok(Self { points, params, labels })
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &DenseMatrix {
        &self.points
    }

    pub fn params(&self) -> Option<&[f64]> {
        self.params.as_deref()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Number of classes, `max(label) + 1`.
    pub fn num_classes(&self) -> Option<usize> {
        self.labels.as_ref().map(|l| l.iter().max().map_or(0, |m| m + 1))
    }

    fn require_params(&self) -> Result<&[f64]> {
        self.params
            .as_deref()
            .ok_or_else(|| Error::Usage("point cloud has no curve parameters".into()))
    }
}

/// Point-dependent noise magnitude as a function of the curve parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseSpec {
    /// `0.05 + 0.95 (1 + cos 6t) / 2`
    ClosedSpiral,
    /// `1 - sin(3t)^4`
    MultiArm,
}

impl NoiseSpec {
    pub fn magnitude(self, t: f64) -> f64 {
        match self {
            NoiseSpec::ClosedSpiral => 0.05 + 0.95 * (1.0 + (6.0 * t).cos()) / 2.0,
            NoiseSpec::MultiArm => 1.0 - (3.0 * t).sin().powi(4),
        }
    }
}

/// Closed 3D spiral `(cos t (0.5 cos 6t + 1), sin t (0.4 cos 6t + 1), 0.4 sin 6t)`.
pub fn closed_spiral_point(t: f64) -> [f64; 3] {
    let (s6, c6) = (6.0 * t).sin_cos();
    [t.cos() * (0.5 * c6 + 1.0), t.sin() * (0.4 * c6 + 1.0), 0.4 * s6]
}

fn closed_spiral_speed(t: f64) -> f64 {
    let (s, c) = t.sin_cos();
    let (s6, c6) = (6.0 * t).sin_cos();
    let dx = -s * (0.5 * c6 + 1.0) - 3.0 * c * s6;
    let dy = c * (0.4 * c6 + 1.0) - 2.4 * s * s6;
    let dz = 2.4 * c6;
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// `n` points on the closed spiral, evenly spaced in arc length starting at `t = 0`.
pub fn closed_spiral(n: usize) -> Result<PointCloud> {
    if n < 3 {
        return Err(invalid(format!("closed spiral needs at least 3 points, got {n}")));
    }
    let table = ArcLengthTable::new(closed_spiral_speed, 0.0, TAU, ARC_STEPS);
    let total = table.total();
    let ts: Vec<f64> = (0..n).map(|k| table.invert(total * k as f64 / n as f64)).collect();
    let mut points = Array2::zeros((n, 3));
    for (i, &t) in ts.iter().enumerate() {
        let p = closed_spiral_point(t);
        for d in 0..3 {
            points[[i, d]] = p[d];
        }
    }
    PointCloud::with_metadata(points, Some(ts), None)
}

/// How points are placed along each spiral arm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArmSpacing {
    /// Evenly spaced in arc length, both endpoints included.
    ArcUniform,
    /// Curve parameter drawn uniformly from `[t0, t1)`.
    ParamRandom,
}

/// Multi-armed planar spiral: arm `k` is `(t cos t, t sin t)` rotated by `2 pi k / arms`.
///
/// Points are stored arm by arm; labels hold the arm index and params the curve parameter.
pub fn multi_arm_spiral(
    arms: usize,
    per_arm: usize,
    t0: f64,
    t1: f64,
    spacing: ArmSpacing,
    rng: &mut SeededRng,
) -> Result<PointCloud> {
    if arms == 0 {
        return Err(invalid("need at least one arm"));
    }
    if per_arm == 0 {
        return Err(invalid("points per arm must be positive"));
    }
    if !(t0 > 0.0 && t1 > t0) {
        return Err(invalid(format!("need 0 < t0 < t1, got t0={t0}, t1={t1}")));
    }
    let uniform_ts: Option<Vec<f64>> = match spacing {
        ArmSpacing::ArcUniform => {
            let table = ArcLengthTable::new(|t| (1.0 + t * t).sqrt(), t0, t1, ARC_STEPS);
            let total = table.total();
            Some(if per_arm == 1 {
                vec![t0]
            } else {
                (0..per_arm)
                    .map(|k| table.invert(total * k as f64 / (per_arm - 1) as f64))
                    .collect()
            })
        }
        ArmSpacing::ParamRandom => None,
    };
    let n = arms * per_arm;
    let mut points = Array2::zeros((n, 2));
    let mut params = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for arm in 0..arms {
        let theta = TAU * arm as f64 / arms as f64;
        for k in 0..per_arm {
            let t = match &uniform_ts {
                Some(ts) => ts[k],
                None => rng.uniform_in(t0, t1),
            };
            let [x, y] = rotate(theta, [t * t.cos(), t * t.sin()]);
            let i = arm * per_arm + k;
            points[[i, 0]] = x;
            points[[i, 1]] = y;
            params.push(t);
            labels.push(arm);
        }
    }
    PointCloud::with_metadata(points, Some(params), Some(labels))
}

pub(crate) fn rotate(theta: f64, [x, y]: [f64; 2]) -> [f64; 2] {
    let (s, c) = theta.sin_cos();
    [c * x - s * y, s * x + c * y]
}

/// A noisy high-dimensional embedding together with the basis used.
#[derive(Clone, Debug)]
pub struct NoisyEmbedding {
    pub cloud: PointCloud,
    /// `ambient x D` matrix with orthonormal columns.
    pub basis: DenseMatrix,
}

impl NoisyEmbedding {
    /// The noise-free embedded points `R x_i`, one per row.
    pub fn clean_embedded(&self, clean: &PointCloud) -> DenseMatrix {
        clean.points().dot(&self.basis.t())
    }
}

/// `x_i -> R x_i + eta_i` with `R` orthonormal and `||eta_i|| = noise.magnitude(t_i)`
/// in a uniformly random direction.
pub fn embed_with_noise(
    pc: &PointCloud,
    rng: &mut SeededRng,
    ambient: usize,
    noise: NoiseSpec,
) -> Result<NoisyEmbedding> {
    let params = pc.require_params()?;
    let basis = orthonormal_columns(rng, ambient, pc.dim())?;
    let mut out = pc.points().dot(&basis.t());
    for (i, &t) in params.iter().enumerate() {
        let z = loop {
            let z = Array1::from(rng.gaussian_vec(ambient));
            let nz = z.dot(&z).sqrt();
            if nz > 0.0 {
                break z / nz;
            }
        };
        out.row_mut(i).scaled_add(noise.magnitude(t), &z);
    }
    let cloud = PointCloud::with_metadata(out, pc.params.clone(), pc.labels.clone())?;
    Ok(NoisyEmbedding { cloud, basis })
}

/// Closed-spiral heteroskedastic noise model in `ambient` dimensions.
pub fn embed_hetero_noise(pc: &PointCloud, rng: &mut SeededRng, ambient: usize) -> Result<PointCloud> {
    Ok(embed_with_noise(pc, rng, ambient, NoiseSpec::ClosedSpiral)?.cloud)
}

/// Multi-arm spiral noise model in `ambient` dimensions.
pub fn embed_ssl_noise(pc: &PointCloud, rng: &mut SeededRng, ambient: usize) -> Result<PointCloud> {
    Ok(embed_with_noise(pc, rng, ambient, NoiseSpec::MultiArm)?.cloud)
}

/// `N^{-2} sum_{ij} ||x_i - x_j||^2`, computed as twice the mean squared deviation from the centroid.
pub fn mean_pairwise_sq_distance(points: &DenseMatrix) -> f64 {
    let n = points.nrows() as f64;
    let mean = points.mean_axis(ndarray::Axis(0)).expect("non-empty");
    let spread: f64 = points
        .rows()
        .into_iter()
        .map(|r| r.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum();
    2.0 * spread / n
}

/// Rescales (without centering) so that `N^{-2} sum_{ij} ||x_i - x_j||^2 = 1`.
pub fn normalize_scale(pc: &PointCloud) -> Result<PointCloud> {
    if pc.len() < 2 {
        return Err(invalid("scale normalization needs at least two points"));
    }
    let s = mean_pairwise_sq_distance(pc.points());
    if !(s > 0.0) {
        return Err(Error::DegenerateInput("all points coincide; scale is undefined".into()));
    }
    let factor = 1.0 / s.sqrt();
    PointCloud::with_metadata(pc.points() * factor, pc.params.clone(), pc.labels.clone())
}

/// Dense matrix of squared Euclidean distances; exactly symmetric with zero diagonal.
pub fn squared_distances(points: &DenseMatrix) -> DenseMatrix {
    let n = points.nrows();
    let mut d = Array2::zeros((n, n));
    let rows: Vec<&[f64]> = (0..n)
        .map(|i| points.row(i).to_slice().expect("standard layout"))
        .collect();
    for i in 0..n {
        for j in i + 1..n {
            let s: f64 = rows[i].iter().zip(rows[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            d[[i, j]] = s;
            d[[j, i]] = s;
        }
    }
    d
}

/// Transport cost `c_ij = ||x_i - x_j||^p`.
pub fn pairwise_cost(pc: &PointCloud, p: f64) -> Result<CostMatrix> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(invalid(format!("cost exponent must be positive, got {p}")));
    }
    let points = pc.points().as_standard_layout().to_owned();
    let mut c = squared_distances(&points);
    if p != 2.0 {
        c.mapv_inplace(|d2| d2.powf(p / 2.0));
    }
    CostMatrix::with_exponent(c, p)
}

/// Random labelled subset, sorted ascending.
///
/// With `per_class`, each class contributes `max(1, ceil(fraction * n_class))`
/// points; otherwise `max(1, ceil(fraction * N))` points are drawn overall.
pub fn label_subset(pc: &PointCloud, fraction: f64, per_class: bool, rng: &mut SeededRng) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(invalid(format!("label fraction must lie in (0, 1], got {fraction}")));
    }
    let labels = pc
        .labels()
        .ok_or_else(|| Error::Usage("point cloud has no labels".into()))?;
    let quota = |n: usize| ((fraction * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    let mut chosen = Vec::new();
    if per_class {
        let classes = pc.num_classes().unwrap_or(0);
        for c in 0..classes {
            let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
            if members.is_empty() {
                continue;
            }
            let picks = rng.sample_without_replacement(members.len(), quota(members.len()));
            chosen.extend(picks.into_iter().map(|k| members[k]));
        }
    } else {
        chosen = rng.sample_without_replacement(labels.len(), quota(labels.len()));
    }
    chosen.sort_unstable();
    Ok(chosen)
}
