//! Two manifolds that are hard to tell apart from samples, for lower bounds on risk.
//!
//! Both densities equal the same constant on the shared part. On whichever of
//! the two difference sets is larger, the density is exactly the floor `a`;
//! the other difference set gets the same total mass spread evenly, so the
//! two distributions differ by `a * max(vol)` in total variation.

use super::profile::{nearest_piece, pair_profile, Piece, Region};
use super::{pair_region_volumes, ManifoldSpec};
use crate::error::{Error, Result};
use crate::geometry::PointCloud;

/// Region-wise constant density on the union of the pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairDensity {
    pub common: f64,
    pub only_first: f64,
    pub only_second: f64,
}

#[derive(Debug, Clone)]
pub struct LowerBoundPair {
    pub m1: ManifoldSpec,
    pub m2: ManifoldSpec,
    pub p1: PairDensity,
    pub p2: PairDensity,
    pub vol_common: f64,
    pub vol_w1: f64,
    pub vol_w2: f64,
    pub a: f64,
}

/// Pair at unit extent centered at the origin.
pub fn build_lower_bound_pair(
    d: usize,
    ambient: usize,
    tau: f64,
    a: f64,
) -> Result<LowerBoundPair> {
    build_pair_with(d, ambient, tau, a, 1.0, None)
}

/// Like [`build_lower_bound_pair`] with the pair scaled by `extent` and
/// translated to `center`.
pub fn build_pair_with(
    d: usize,
    ambient: usize,
    tau: f64,
    a: f64,
    extent: f64,
    center: Option<Vec<f64>>,
) -> Result<LowerBoundPair> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::invalid(format!(
            "density floor must be positive, got {a}"
        )));
    }
    let mut m1 = ManifoldSpec::m1(d, ambient, tau).with_extent(extent);
    m1.center = center;
    let mut m2 = m1.clone();
    m2.family = super::Family::M2;
    // structural checks only; the floor is checked below
    m1.validate()?;
    m2.validate()?;

    let (vc, v1, v2) = pair_region_volumes(d, tau, extent);
    let vmax = v1.max(v2);
    let common = (1.0 - a * vmax) / vc;
    if common < a {
        return Err(Error::invalid(format!(
            "mass balance fails: floor a = {a} needs a <= 1 / (vol(common) + max vol(W)) = {}",
            1.0 / (vc + vmax)
        )));
    }
    let (w1, w2) = if v1 >= v2 {
        (a, a * v1 / v2)
    } else {
        (a * v2 / v1, a)
    };
    let p1 = PairDensity {
        common,
        only_first: w1,
        only_second: 0.0,
    };
    let p2 = PairDensity {
        common,
        only_first: 0.0,
        only_second: w2,
    };
    Ok(LowerBoundPair {
        m1: m1.with_floor(a),
        m2: m2.with_floor(a),
        p1,
        p2,
        vol_common: vc,
        vol_w1: v1,
        vol_w2: v2,
        a,
    })
}

impl LowerBoundPair {
    /// `a * max(vol W1, vol W2)`.
    pub fn tv_closed_form(&self) -> f64 {
        self.a * self.vol_w1.max(self.vol_w2)
    }

    fn union_profile(&self) -> Vec<Piece> {
        let mut pieces = pair_profile(true, self.m1.tau, self.m1.extent);
        pieces.extend(
            pair_profile(false, self.m1.tau, self.m1.extent)
                .into_iter()
                .filter(|p| p.region == Region::OnlySecond),
        );
        pieces
    }

    fn eval(&self, density: &PairDensity, x: &[f64]) -> f64 {
        let (rho, z, _) = self.m1.pair_coords(x);
        density.value(nearest_piece(&self.union_profile(), rho, z).region)
    }

    /// First density at a point of `M1 ∪ M2` (zero off `M1`).
    pub fn density1(&self, x: &[f64]) -> f64 {
        self.eval(&self.p1, x)
    }

    /// Second density at a point of `M1 ∪ M2` (zero off `M2`).
    pub fn density2(&self, x: &[f64]) -> f64 {
        self.eval(&self.p2, x)
    }

    /// Whether a point of the union lies in `W1 ∪ W2`.
    pub fn in_difference(&self, x: &[f64]) -> bool {
        let (rho, z, _) = self.m1.pair_coords(x);
        nearest_piece(&self.union_profile(), rho, z).region != Region::Common
    }

    /// Midpoint quadrature of `M1 ∪ M2` with `cells` nodes per profile piece.
    pub fn discretize(&self, cells: usize) -> PairDiscretization {
        let d = self.m1.intrinsic_dim;
        let c = self.m1.center();
        let mut points = PointCloud::new(self.m1.ambient_dim).expect("positive dimension");
        let mut weights = Vec::new();
        for piece in self.union_profile() {
            let len = piece.shape.length();
            for k in 0..cells {
                let s = (k as f64 + 0.5) / cells as f64;
                let (rho, z) = piece.shape.at(s);
                let ds = len / cells as f64;
                // mirrored copy (d = 1) or full revolution (d = 2)
                let w = if d == 1 {
                    2.0 * ds
                } else {
                    2.0 * std::f64::consts::PI * rho * ds
                };
                let mut x = c.clone();
                x[0] += rho;
                x[d] += z;
                points.push(&x).expect("matching dimension");
                weights.push(w);
            }
        }
        PairDiscretization { points, weights }
    }
}

/// Quadrature nodes with volume weights.
#[derive(Debug, Clone)]
pub struct PairDiscretization {
    pub points: PointCloud,
    pub weights: Vec<f64>,
}
