//! Euclidean primitives: point storage, fixed-radius neighbor search and
//! minimum enclosing balls.

mod io;
mod miniball;
mod neighbors;

pub use io::{format_point_cloud, parse_point_cloud, read_point_cloud, write_point_cloud};
pub use miniball::{min_enclosing_ball, min_enclosing_radius_sq};
pub use neighbors::{neighbor_degrees, pairwise_within, NeighborGrid};

use crate::error::{Error, Result};

/// A finite set of points in `R^D`, stored row-major.
///
/// Indices `0..len()` are stable identifiers; nothing reorders points after
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    /// An empty cloud in `R^dim`.
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("ambient dimension must be positive"));
        }
        Ok(PointCloud {
            dim,
            coords: Vec::new(),
        })
    }

    /// Builds a cloud from a flat row-major coordinate buffer.
    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("ambient dimension must be positive"));
        }
        if coords.len() % dim != 0 {
            return Err(Error::invalid(format!(
                "{} coordinates do not split into rows of length {dim}",
                coords.len()
            )));
        }
        Ok(PointCloud { dim, coords })
    }

    pub fn from_rows<R: AsRef<[f64]>>(dim: usize, rows: &[R]) -> Result<Self> {
        let mut cloud = PointCloud::new(dim)?;
        for row in rows {
            cloud.push(row.as_ref())?;
        }
        Ok(cloud)
    }

    pub fn push(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim {
            return Err(Error::invalid(format!(
                "point of length {} in a cloud of dimension {}",
                p.len(),
                self.dim
            )));
        }
        self.coords.extend_from_slice(p);
        Ok(())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn point_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }

    /// The points at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> PointCloud {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            coords.extend_from_slice(self.point(i));
        }
        PointCloud {
            dim: self.dim,
            coords,
        }
    }

    /// Axis-aligned bounding box, `None` when empty.
    pub fn bounds(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let mut it = self.iter();
        let first = it.next()?;
        let mut lo = first.to_vec();
        let mut hi = first.to_vec();
        for p in it {
            for k in 0..self.dim {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        Some((lo, hi))
    }
}

/// A closed Euclidean ball.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        dist(&self.center, p) <= self.radius + tol
    }
}

#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Volume of the unit ball in `R^k`.
pub fn unit_ball_volume(k: usize) -> f64 {
    // v_0 = 1, v_1 = 2, v_k = v_{k-2} * 2 pi / k
    let (mut v, start) = if k % 2 == 0 { (1.0, 2) } else { (2.0, 3) };
    let mut j = start;
    while j <= k {
        v *= 2.0 * std::f64::consts::PI / j as f64;
        j += 2;
    }
    v
}
