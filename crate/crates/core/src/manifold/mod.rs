//! Test manifolds, densities on them, and the noise models.

mod noise;
mod pair;
pub mod profile;

pub use noise::{apply_noise, sample, NoiseDensity, NoiseSpec, Sample};
pub use pair::{
    build_lower_bound_pair, build_pair_with, LowerBoundPair, PairDensity, PairDiscretization,
};

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{norm, unit_ball_volume, PointCloud};
use crate::homology::HomologyProfile;
use crate::rng::{stream_rng, Stream};
use profile::{pair_profile, profile_distance, region_volume, Piece, Region, Shape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Circle,
    #[serde(alias = "sphere_d")]
    Sphere,
    Torus,
    /// Two parallel d-balls joined along their rims.
    #[serde(alias = "m1_pair_of_balls")]
    M1,
    /// Two parallel d-annuli joined along both rims.
    #[serde(alias = "m2_pair_of_annuli")]
    M2,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Circle => "circle",
            Family::Sphere => "sphere",
            Family::Torus => "torus",
            Family::M1 => "m1",
            Family::M2 => "m2",
        }
    }
}

/// A compact test manifold with condition number `tau` and an optional
/// density floor.
///
/// Sizes are tied to `tau`: the circle and sphere have radius `tau`, the torus
/// has tube radius `tau` and core radius `2 tau`. The M1/M2 pair reaches
/// `extent` from its axis. Without a floor, points are uniform by volume. With
/// floor `a`, circle, sphere and torus put density `a` on the half
/// `x_0 <= center_0` and the rest of the mass uniformly on the other half;
/// M1/M2 use the lower-bound densities of [`build_lower_bound_pair`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldSpec {
    pub family: Family,
    pub intrinsic_dim: usize,
    pub ambient_dim: usize,
    pub tau: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_floor: Option<f64>,
    #[serde(default = "default_extent")]
    pub extent: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
}

fn default_extent() -> f64 {
    1.0
}

/// How mass is spread over the manifold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensityModel {
    Uniform,
    /// `low` on `x_0 <= c_0`, `high` elsewhere.
    Halves {
        low: f64,
        high: f64,
    },
    /// Per-region constants for the M1/M2 pair.
    Regions(PairDensity),
}

impl ManifoldSpec {
    fn base(family: Family, d: usize, ambient: usize, tau: f64) -> Self {
        ManifoldSpec {
            family,
            intrinsic_dim: d,
            ambient_dim: ambient,
            tau,
            density_floor: None,
            extent: 1.0,
            center: None,
        }
    }

    pub fn circle(tau: f64, ambient: usize) -> Self {
        Self::base(Family::Circle, 1, ambient, tau)
    }

    pub fn sphere(d: usize, ambient: usize, tau: f64) -> Self {
        Self::base(Family::Sphere, d, ambient, tau)
    }

    pub fn torus(ambient: usize, tau: f64) -> Self {
        Self::base(Family::Torus, 2, ambient, tau)
    }

    pub fn m1(d: usize, ambient: usize, tau: f64) -> Self {
        Self::base(Family::M1, d, ambient, tau)
    }

    pub fn m2(d: usize, ambient: usize, tau: f64) -> Self {
        Self::base(Family::M2, d, ambient, tau)
    }

    pub fn with_floor(mut self, a: f64) -> Self {
        self.density_floor = Some(a);
        self
    }

    pub fn with_center(mut self, center: Vec<f64>) -> Self {
        self.center = Some(center);
        self
    }

    pub fn with_extent(mut self, extent: f64) -> Self {
        self.extent = extent;
        self
    }

    pub fn center(&self) -> Vec<f64> {
        self.center
            .clone()
            .unwrap_or_else(|| vec![0.0; self.ambient_dim])
    }

    /// Checks every structural constraint, naming the one that fails.
    pub fn validate(&self) -> Result<()> {
        let (d, dd, tau) = (self.intrinsic_dim, self.ambient_dim, self.tau);
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::invalid(format!("tau must be positive, got {tau}")));
        }
        if d == 0 || d >= dd {
            return Err(Error::invalid(format!(
                "need 0 < d < D, got d = {d}, D = {dd}"
            )));
        }
        match self.family {
            Family::Circle if d != 1 => {
                return Err(Error::invalid("a circle has intrinsic dimension 1"))
            }
            Family::Torus if d != 2 || dd < 3 => {
                return Err(Error::invalid("the torus needs d = 2 and D >= 3"))
            }
            Family::M1 | Family::M2 => {
                if d > 2 {
                    return Err(Error::Unsupported(format!(
                        "lower-bound pair is implemented for d = 1, 2, got {d}"
                    )));
                }
                if !(4.0 * tau < self.extent - tau) {
                    return Err(Error::invalid(format!(
                        "pair needs 4 tau < extent - tau (inner radius inside outer), got tau = {tau}, extent = {}",
                        self.extent
                    )));
                }
            }
            _ => {}
        }
        if let Some(c) = &self.center {
            if c.len() != dd {
                return Err(Error::invalid(format!(
                    "center has {} coordinates, ambient dimension is {dd}",
                    c.len()
                )));
            }
        }
        if let Some(a) = self.density_floor {
            if !(a > 0.0) || !a.is_finite() {
                return Err(Error::invalid(format!(
                    "density floor must be positive, got {a}"
                )));
            }
            self.density_model()?;
        }
        Ok(())
    }

    /// Betti numbers of the manifold itself.
    pub fn true_homology(&self) -> HomologyProfile {
        let d = self.intrinsic_dim;
        let betti = match self.family {
            Family::Circle => vec![1, 1],
            Family::Sphere => {
                let mut b = vec![0; d + 1];
                b[0] = 1;
                b[d] = 1;
                b
            }
            Family::Torus => vec![1, 2, 1],
            // d = 1: one stadium-shaped loop; d = 2: a sphere
            Family::M1 => {
                if d == 1 {
                    vec![1, 1]
                } else {
                    vec![1, 0, 1]
                }
            }
            // d = 1: two disjoint loops; d = 2: a torus
            Family::M2 => {
                if d == 1 {
                    vec![2, 2]
                } else {
                    vec![1, 2, 1]
                }
            }
        };
        HomologyProfile::new(betti)
    }

    pub(crate) fn profile(&self) -> Option<Vec<Piece>> {
        match self.family {
            Family::M1 => Some(pair_profile(true, self.tau, self.extent)),
            Family::M2 => Some(pair_profile(false, self.tau, self.extent)),
            _ => None,
        }
    }

    /// d-dimensional volume.
    pub fn volume(&self) -> f64 {
        let (d, tau) = (self.intrinsic_dim, self.tau);
        match self.family {
            Family::Circle => 2.0 * PI * tau,
            Family::Sphere => (d + 1) as f64 * unit_ball_volume(d + 1) * tau.powi(d as i32),
            Family::Torus => 4.0 * PI * PI * (2.0 * tau) * tau,
            Family::M1 | Family::M2 => {
                let p = self.profile().unwrap();
                p.iter().map(|piece| piece.shape.volume(d)).sum()
            }
        }
    }

    pub fn density_model(&self) -> Result<DensityModel> {
        let Some(a) = self.density_floor else {
            return Ok(DensityModel::Uniform);
        };
        match self.family {
            Family::M1 | Family::M2 => {
                let pair = build_lower_bound_pair_from(self)?;
                Ok(DensityModel::Regions(if self.family == Family::M1 {
                    pair.p1
                } else {
                    pair.p2
                }))
            }
            _ => {
                let half = 0.5 * self.volume();
                if a * 2.0 * half > 1.0 + 1e-12 {
                    return Err(Error::invalid(format!(
                        "density floor {a} exceeds 1/vol(M) = {}: mass cannot balance",
                        1.0 / (2.0 * half)
                    )));
                }
                Ok(DensityModel::Halves {
                    low: a,
                    high: (1.0 - a * half) / half,
                })
            }
        }
    }

    /// Density (with respect to volume) at a point of the manifold.
    pub fn density_at(&self, x: &[f64]) -> Result<f64> {
        Ok(match self.density_model()? {
            DensityModel::Uniform => 1.0 / self.volume(),
            DensityModel::Halves { low, high } => {
                if x[0] <= self.center()[0] {
                    low
                } else {
                    high
                }
            }
            DensityModel::Regions(p) => {
                let (rho, z, _) = self.pair_coords(x);
                let pieces = self.profile().unwrap();
                p.value(profile::nearest_piece(&pieces, rho, z).region)
            }
        })
    }

    /// `(rho, z, residual)` of a point relative to the pair's axis, where
    /// `residual` is the norm of the coordinates the pair does not use.
    fn pair_coords(&self, x: &[f64]) -> (f64, f64, f64) {
        let c = self.center();
        let u: Vec<f64> = x.iter().zip(&c).map(|(a, b)| a - b).collect();
        let d = self.intrinsic_dim;
        let (rho, z) = if d == 1 {
            (u[0].abs(), u[1])
        } else {
            (u[0].hypot(u[1]), u[2])
        };
        (rho, z, norm(&u[d + 1..]))
    }

    /// Euclidean distance from `x` to the manifold.
    pub fn distance(&self, x: &[f64]) -> f64 {
        let c = self.center();
        let u: Vec<f64> = x.iter().zip(&c).map(|(a, b)| a - b).collect();
        let tau = self.tau;
        match self.family {
            Family::Circle => (u[0].hypot(u[1]) - tau).hypot(norm(&u[2..])),
            Family::Sphere => {
                let k = self.intrinsic_dim + 1;
                (norm(&u[..k]) - tau).hypot(norm(&u[k..]))
            }
            Family::Torus => {
                let rho = u[0].hypot(u[1]);
                let to_core = (rho - 2.0 * tau).hypot(u[2]);
                (to_core - tau).hypot(norm(&u[3..]))
            }
            Family::M1 | Family::M2 => {
                let (rho, z, rest) = self.pair_coords(x);
                profile_distance(&self.profile().unwrap(), rho, z).hypot(rest)
            }
        }
    }

    /// One point uniform by volume.
    fn uniform_point<R: Rng>(
        &self,
        rng: &mut R,
        pieces: Option<&[Piece]>,
        weights: &[f64],
    ) -> Vec<f64> {
        let dd = self.ambient_dim;
        let tau = self.tau;
        let mut u = vec![0.0; dd];
        match self.family {
            Family::Circle => {
                let t = rng.gen::<f64>() * 2.0 * PI;
                u[0] = tau * t.cos();
                u[1] = tau * t.sin();
            }
            Family::Sphere => {
                let k = self.intrinsic_dim + 1;
                loop {
                    for v in &mut u[..k] {
                        *v = rng.sample(StandardNormal);
                    }
                    let n = norm(&u[..k]);
                    if n > 1e-300 {
                        for v in &mut u[..k] {
                            *v *= tau / n;
                        }
                        break;
                    }
                }
            }
            Family::Torus => {
                let (big, small) = (2.0 * tau, tau);
                // area element is proportional to big + small cos(v)
                let v = loop {
                    let v = rng.gen::<f64>() * 2.0 * PI;
                    if rng.gen::<f64>() * (big + small) <= big + small * v.cos() {
                        break v;
                    }
                };
                let w = rng.gen::<f64>() * 2.0 * PI;
                let rho = big + small * v.cos();
                u[0] = rho * w.cos();
                u[1] = rho * w.sin();
                u[2] = small * v.sin();
            }
            Family::M1 | Family::M2 => {
                let pieces = pieces.expect("pair profile");
                let total: f64 = weights.iter().sum();
                let mut pick = rng.gen::<f64>() * total;
                let mut k = 0;
                while k + 1 < weights.len() && pick >= weights[k] {
                    pick -= weights[k];
                    k += 1;
                }
                let (rho, z) = sample_on_piece(rng, &pieces[k].shape, self.intrinsic_dim);
                if self.intrinsic_dim == 1 {
                    u[0] = if rng.gen::<bool>() { rho } else { -rho };
                    u[1] = z;
                } else {
                    let w = rng.gen::<f64>() * 2.0 * PI;
                    u[0] = rho * w.cos();
                    u[1] = rho * w.sin();
                    u[2] = z;
                }
            }
        }
        u
    }
}

/// `(rho, z)` uniform on a piece after mirroring (`d = 1`) or revolving.
fn sample_on_piece<R: Rng>(rng: &mut R, shape: &Shape, d: usize) -> (f64, f64) {
    match (*shape, d) {
        (Shape::Segment { z, rho0, rho1 }, 2) => {
            // annulus: rho^2 uniform
            let s = rho0 * rho0 + rng.gen::<f64>() * (rho1 * rho1 - rho0 * rho0);
            (s.sqrt(), z)
        }
        (Shape::Arc { rho_c, r, .. }, 2) => loop {
            let p = shape.at(rng.gen::<f64>());
            if rng.gen::<f64>() * (rho_c + r) <= p.0 {
                break p;
            }
        },
        _ => shape.at(rng.gen::<f64>()),
    }
}

pub(crate) fn build_lower_bound_pair_from(spec: &ManifoldSpec) -> Result<LowerBoundPair> {
    pair::build_pair_with(
        spec.intrinsic_dim,
        spec.ambient_dim,
        spec.tau,
        spec.density_floor.unwrap_or(f64::NAN),
        spec.extent,
        spec.center.clone(),
    )
}

/// `n` points on the manifold drawn from its density.
pub fn sample_manifold(spec: &ManifoldSpec, n: usize, seed: u64) -> Result<PointCloud> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    let mut rng = stream_rng(seed, Stream::Manifold);
    let model = spec.density_model()?;
    let pieces = spec.profile();
    let weights: Vec<f64> = pieces.as_ref().map_or_else(Vec::new, |ps| {
        ps.iter()
            .map(|p| {
                let dens = match model {
                    DensityModel::Regions(pd) => pd.value(p.region),
                    _ => 1.0,
                };
                dens * p.shape.volume(spec.intrinsic_dim)
            })
            .collect()
    });
    let c = spec.center();
    let low_mass = match model {
        DensityModel::Halves { low, .. } => Some(low * 0.5 * spec.volume()),
        _ => None,
    };
    let mut cloud = PointCloud::new(spec.ambient_dim)?;
    for _ in 0..n {
        let mut u = spec.uniform_point(&mut rng, pieces.as_deref(), &weights);
        if let Some(m) = low_mass {
            // every family here is symmetric under u_0 -> -u_0
            let want_low = rng.gen::<f64>() < m;
            if (u[0] <= 0.0) != want_low {
                u[0] = -u[0];
            }
        }
        for (x, o) in u.iter_mut().zip(&c) {
            *x += o;
        }
        cloud.push(&u)?;
    }
    Ok(cloud)
}

/// Distance from every point of `cloud` to the manifold.
pub fn tube_distance(cloud: &PointCloud, spec: &ManifoldSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    if cloud.dim() != spec.ambient_dim {
        return Err(Error::invalid(format!(
            "cloud dimension {} differs from manifold ambient dimension {}",
            cloud.dim(),
            spec.ambient_dim
        )));
    }
    Ok(cloud.iter().map(|p| spec.distance(p)).collect())
}

impl PairDensity {
    pub fn value(&self, region: Region) -> f64 {
        match region {
            Region::Common => self.common,
            Region::OnlyFirst => self.only_first,
            Region::OnlySecond => self.only_second,
        }
    }
}

pub(crate) fn pair_region_volumes(d: usize, tau: f64, extent: f64) -> (f64, f64, f64) {
    let p1 = pair_profile(true, tau, extent);
    let p2 = pair_profile(false, tau, extent);
    (
        region_volume(&p1, d, Region::Common),
        region_volume(&p1, d, Region::OnlyFirst),
        region_volume(&p2, d, Region::OnlySecond),
    )
}
