//! Fixed-radius neighbor search.
//!
//! Points are bucketed on a uniform grid over (at most) their first three
//! coordinates. Projection never increases distances, so scanning the cells
//! that overlap the query box and then checking the full distance is exact.
//! Above 20 ambient dimensions the grid buys nothing and we scan all pairs.

use super::{dist_sq, PointCloud};

const BRUTE_FORCE_DIM: usize = 20;
const MAX_GRID_AXES: usize = 3;

/// Bucketed point indices for radius queries against one cloud.
pub struct NeighborGrid<'a> {
    cloud: &'a PointCloud,
    axes: usize,
    lo: [f64; MAX_GRID_AXES],
    cell: f64,
    dims: [usize; MAX_GRID_AXES],
    strides: [usize; MAX_GRID_AXES],
    starts: Vec<u32>,
    items: Vec<u32>,
}

impl<'a> NeighborGrid<'a> {
    /// Builds a grid tuned for queries of radius `r`.
    pub fn new(cloud: &'a PointCloud, r: f64) -> Self {
        let axes = if cloud.dim() > BRUTE_FORCE_DIM {
            0
        } else {
            cloud.dim().min(MAX_GRID_AXES)
        };
        let mut lo = [0.0; MAX_GRID_AXES];
        let mut hi = [0.0; MAX_GRID_AXES];
        if let Some((blo, bhi)) = cloud.bounds() {
            lo[..axes].copy_from_slice(&blo[..axes]);
            hi[..axes].copy_from_slice(&bhi[..axes]);
        }
        let extent = (0..axes).map(|k| hi[k] - lo[k]).fold(0.0, f64::max);
        let limit = (4 * cloud.len()).max(64) as f64;
        let mut cell = if r > 0.0 {
            r
        } else {
            (extent / limit).max(1e-12)
        };
        if !cell.is_finite() || cell <= 0.0 {
            cell = 1.0;
        }
        let cells_for = |c: f64| -> f64 {
            (0..axes)
                .map(|k| ((hi[k] - lo[k]) / c).floor() + 1.0)
                .product()
        };
        while cells_for(cell) > limit {
            cell *= 1.5;
        }
        let mut dims = [1usize; MAX_GRID_AXES];
        for k in 0..axes {
            dims[k] = ((hi[k] - lo[k]) / cell).floor() as usize + 1;
        }
        let mut strides = [0usize; MAX_GRID_AXES];
        let mut s = 1;
        for k in 0..axes {
            strides[k] = s;
            s *= dims[k];
        }
        let ncells = s;

        let mut grid = NeighborGrid {
            cloud,
            axes,
            lo,
            cell,
            dims,
            strides,
            starts: vec![0; ncells + 1],
            items: vec![0; cloud.len()],
        };
        let keys: Vec<usize> = cloud.iter().map(|p| grid.cell_of(p)).collect();
        for &key in &keys {
            grid.starts[key + 1] += 1;
        }
        for c in 0..ncells {
            grid.starts[c + 1] += grid.starts[c];
        }
        let mut fill = grid.starts.clone();
        for (i, &key) in keys.iter().enumerate() {
            grid.items[fill[key] as usize] = i as u32;
            fill[key] += 1;
        }
        grid
    }

    fn axis_cell(&self, k: usize, x: f64) -> usize {
        let c = ((x - self.lo[k]) / self.cell).floor();
        if c <= 0.0 {
            0
        } else {
            (c as usize).min(self.dims[k] - 1)
        }
    }

    fn cell_of(&self, p: &[f64]) -> usize {
        (0..self.axes)
            .map(|k| self.axis_cell(k, p[k]) * self.strides[k])
            .sum()
    }

    /// Calls `f(j)` for every point `j` with `|p_j - q| <= r`.
    pub fn for_each_within(&self, q: &[f64], r: f64, mut f: impl FnMut(usize)) {
        let r2 = r * r;
        if self.axes == 0 {
            for (j, p) in self.cloud.iter().enumerate() {
                if dist_sq(p, q) <= r2 {
                    f(j);
                }
            }
            return;
        }
        let mut first = [0usize; MAX_GRID_AXES];
        let mut last = [0usize; MAX_GRID_AXES];
        for k in 0..self.axes {
            first[k] = self.axis_cell(k, q[k] - r);
            last[k] = self.axis_cell(k, q[k] + r);
        }
        let mut idx = first;
        loop {
            let key: usize = (0..self.axes).map(|k| idx[k] * self.strides[k]).sum();
            let (a, b) = (self.starts[key] as usize, self.starts[key + 1] as usize);
            for &j in &self.items[a..b] {
                let j = j as usize;
                if dist_sq(self.cloud.point(j), q) <= r2 {
                    f(j);
                }
            }
            // odometer over the cell box
            let mut k = 0;
            loop {
                if k == self.axes {
                    return;
                }
                if idx[k] < last[k] {
                    idx[k] += 1;
                    break;
                }
                idx[k] = first[k];
                k += 1;
            }
        }
    }

    /// Sorted neighbor lists (self excluded) at radius `r`.
    pub fn adjacency(&self, r: f64) -> Vec<Vec<u32>> {
        (0..self.cloud.len())
            .map(|i| {
                let mut nb = Vec::new();
                self.for_each_within(self.cloud.point(i), r, |j| {
                    if j != i {
                        nb.push(j as u32);
                    }
                });
                nb.sort_unstable();
                nb
            })
            .collect()
    }
}

/// All unordered pairs `(i, j)`, `i < j`, with `|X_i - X_j| <= r`, sorted.
pub fn pairwise_within(cloud: &PointCloud, r: f64) -> Vec<(usize, usize)> {
    assert!(r >= 0.0, "radius must be nonnegative");
    let grid = NeighborGrid::new(cloud, r);
    let mut pairs = Vec::new();
    for i in 0..cloud.len() {
        let start = pairs.len();
        grid.for_each_within(cloud.point(i), r, |j| {
            if j > i {
                pairs.push((i, j));
            }
        });
        pairs[start..].sort_unstable();
    }
    pairs
}

/// `deg[i] = |{ j != i : |X_i - X_j| <= r }|`.
pub fn neighbor_degrees(cloud: &PointCloud, r: f64) -> Vec<usize> {
    assert!(r >= 0.0, "radius must be nonnegative");
    if cloud.dim() == 2 && cloud.len() > 4096 && r > 0.0 {
        if let Some(counter) = PlanarCounter::new(cloud, r) {
            return counter.degrees();
        }
    }
    let grid = NeighborGrid::new(cloud, r);
    (0..cloud.len())
        .map(|i| {
            let mut n = 0usize;
            grid.for_each_within(cloud.point(i), r, |_| n += 1);
            n - 1
        })
        .collect()
}

/// Disk counting in the plane for large clouds.
///
/// Points are bucketed into horizontal strips much thinner than `r` and
/// sorted by x within each strip. In one strip the disk covers an x-interval
/// that is certain for every point of the strip and a slightly wider one that
/// is possible for some; the certain part is counted by binary search and
/// only the two slivers between them are checked point by point.
struct PlanarCounter<'a> {
    cloud: &'a PointCloud,
    r: f64,
    lo_y: f64,
    height: f64,
    // strip s holds sorted[starts[s]..starts[s + 1]], ordered by x
    starts: Vec<usize>,
    sorted: Vec<[f64; 2]>,
    order: Vec<u32>,
    // actual y extent of each strip's points
    y_range: Vec<(f64, f64)>,
}

impl<'a> PlanarCounter<'a> {
    const SUBDIVISIONS: f64 = 12.0;

    fn new(cloud: &'a PointCloud, r: f64) -> Option<Self> {
        let (lo, hi) = cloud.bounds()?;
        let height = r / Self::SUBDIVISIONS;
        let strips = ((hi[1] - lo[1]) / height).floor() + 1.0;
        if strips > cloud.len() as f64 {
            return None;
        }
        let strips = strips as usize;
        let strip_of = |y: f64| (((y - lo[1]) / height).floor() as usize).min(strips - 1);
        let mut keyed: Vec<(usize, f64, u32)> = cloud
            .iter()
            .enumerate()
            .map(|(i, p)| (strip_of(p[1]), p[0], i as u32))
            .collect();
        keyed.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
        let order: Vec<u32> = keyed.into_iter().map(|k| k.2).collect();
        let sorted: Vec<[f64; 2]> = order
            .iter()
            .map(|&i| {
                let p = cloud.point(i as usize);
                [p[0], p[1]]
            })
            .collect();
        let mut starts = vec![0usize; strips + 1];
        let mut y_range = vec![(f64::INFINITY, f64::NEG_INFINITY); strips];
        for p in &sorted {
            let k = strip_of(p[1]);
            starts[k + 1] += 1;
            y_range[k] = (y_range[k].0.min(p[1]), y_range[k].1.max(p[1]));
        }
        for k in 0..strips {
            starts[k + 1] += starts[k];
        }
        Some(PlanarCounter {
            cloud,
            r,
            lo_y: lo[1],
            height,
            starts,
            sorted,
            order,
            y_range,
        })
    }

    /// `count` with `hints[k]` holding the four interval ends found for
    /// strip `k` by the previous query, which is a nearby point when queries
    /// come in strip order.
    fn count(&self, q: &[f64], hints: &mut [[usize; 4]]) -> usize {
        let r2 = self.r * self.r;
        // margins keep rounding in the interval bounds from deciding a point
        let inner2 = r2 * (1.0 - 1e-9);
        let outer2 = r2 * (1.0 + 1e-9);
        let strips = self.y_range.len();
        let s0 = ((q[1] - self.r - self.lo_y) / self.height).floor().max(0.0) as usize;
        let s1 =
            (((q[1] + self.r - self.lo_y) / self.height).floor().max(0.0) as usize).min(strips - 1);
        let mut total = 0usize;
        for k in s0.min(strips)..=s1 {
            let (ya, yb) = self.y_range[k];
            if ya > yb {
                continue;
            }
            let dy_near = if q[1] < ya {
                ya - q[1]
            } else if q[1] > yb {
                q[1] - yb
            } else {
                0.0
            };
            if dy_near * dy_near > outer2 {
                continue;
            }
            let dy_far = (q[1] - ya).abs().max((q[1] - yb).abs());
            let strip = &self.sorted[self.starts[k]..self.starts[k + 1]];
            let w_out = (outer2 - dy_near * dy_near).sqrt();
            let h = &mut hints[k];
            let a = gallop(strip, h[0], |p| p[0] < q[0] - w_out);
            let b = gallop(strip, h[3], |p| p[0] <= q[0] + w_out);
            let (ia, ib) = if dy_far * dy_far < inner2 {
                let w_in = (inner2 - dy_far * dy_far).sqrt();
                let ia = gallop(strip, h[1].clamp(a, b), |p| p[0] < q[0] - w_in).clamp(a, b);
                let ib = gallop(strip, h[2].clamp(ia, b), |p| p[0] <= q[0] + w_in).clamp(ia, b);
                (ia, ib)
            } else {
                (a, a)
            };
            *h = [a, ia, ib, b];
            total += ib - ia;
            let within =
                |p: &&[f64; 2]| (p[0] - q[0]) * (p[0] - q[0]) + (p[1] - q[1]) * (p[1] - q[1]) <= r2;
            total += strip[a..ia].iter().filter(within).count();
            total += strip[ib..b].iter().filter(within).count();
        }
        total
    }

    fn degrees(&self) -> Vec<usize> {
        // queries in strip order keep consecutive lookups in cache
        let mut deg = vec![0usize; self.cloud.len()];
        let mut hints = vec![[0usize; 4]; self.y_range.len()];
        for (p, &i) in self.sorted.iter().zip(&self.order) {
            deg[i as usize] = self.count(p, &mut hints) - 1;
        }
        deg
    }
}

/// Partition point of `pred` over `xs` (true on a prefix), searched outward
/// from `start` in doubling steps and then by bisection.
fn gallop(xs: &[[f64; 2]], start: usize, pred: impl Fn(&[f64; 2]) -> bool) -> usize {
    let n = xs.len();
    let start = start.min(n);
    let (lo, hi) = if start < n && pred(&xs[start]) {
        // answer lies above start
        let mut step = 1;
        let mut lo = start + 1;
        loop {
            let probe = start + step;
            if probe >= n {
                break (lo, n);
            }
            if !pred(&xs[probe]) {
                break (lo, probe);
            }
            lo = probe + 1;
            step *= 2;
        }
    } else {
        // answer is at most start
        let mut step = 1;
        let mut hi = start;
        loop {
            if step > start {
                break (0, hi);
            }
            let probe = start - step;
            if pred(&xs[probe]) {
                break (probe + 1, hi);
            }
            hi = probe;
            step *= 2;
        }
    };
    lo + xs[lo..hi].partition_point(pred)
}
