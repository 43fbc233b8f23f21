//! Čech, Vietoris–Rips and planar Delaunay–Čech complexes.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{min_enclosing_radius_sq, NeighborGrid, PointCloud};

/// Inclusive slack on the enclosing-radius test, so tangent balls count as
/// intersecting regardless of rounding.
pub const CECH_TOL: f64 = 1e-9;

/// A finite simplicial complex on vertices `0..n_vertices`.
///
/// Simplices of dimension `p` are stored flat with arity `p + 1`, each tuple
/// strictly increasing and the list in lexicographic order, so two complexes
/// with the same simplices compare equal and serialize to the same bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimplicialComplex {
    n_vertices: usize,
    top_dim: usize,
    /// `faces[p]` holds the p-simplices; `faces[0]` is `0..n_vertices`.
    faces: Vec<Vec<u32>>,
}

impl SimplicialComplex {
    /// Closes `simplices` under taking faces. Tuples may be unsorted; any
    /// simplex above `top_dim` is an error.
    pub fn from_simplices<S: AsRef<[u32]>>(
        n_vertices: usize,
        top_dim: usize,
        simplices: &[S],
    ) -> Result<Self> {
        let mut sets: Vec<std::collections::BTreeSet<Vec<u32>>> =
            vec![Default::default(); top_dim + 1];
        for s in simplices {
            let mut t = s.as_ref().to_vec();
            t.sort_unstable();
            if t.is_empty() {
                continue;
            }
            if t.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::invalid(format!("repeated vertex in simplex {t:?}")));
            }
            if *t.last().unwrap() as usize >= n_vertices {
                return Err(Error::invalid(format!("vertex out of range in {t:?}")));
            }
            if t.len() > top_dim + 1 {
                return Err(Error::invalid(format!(
                    "simplex {t:?} exceeds top dimension {top_dim}"
                )));
            }
            // every nonempty subset is a face
            let k = t.len();
            for mask in 1u32..(1u32 << k) {
                let face: Vec<u32> = (0..k)
                    .filter(|i| mask >> i & 1 == 1)
                    .map(|i| t[i])
                    .collect();
                if face.len() > 1 {
                    sets[face.len() - 1].insert(face);
                }
            }
        }
        let mut faces = vec![(0..n_vertices as u32).collect::<Vec<_>>()];
        faces.extend(
            sets.into_iter()
                .skip(1)
                .map(|s| s.into_iter().flatten().collect()),
        );
        Ok(SimplicialComplex {
            n_vertices,
            top_dim,
            faces,
        })
    }

    /// Builds from per-dimension flat lists (index 0 must be the vertex list)
    /// after checking every structural invariant.
    pub fn from_faces(n_vertices: usize, faces: Vec<Vec<u32>>) -> Result<Self> {
        if faces.is_empty() {
            return Err(Error::invalid("a complex needs at least the vertex level"));
        }
        let c = SimplicialComplex {
            n_vertices,
            top_dim: faces.len() - 1,
            faces,
        };
        c.validate()?;
        Ok(c)
    }

    fn from_faces_unchecked(n_vertices: usize, faces: Vec<Vec<u32>>) -> Self {
        SimplicialComplex {
            n_vertices,
            top_dim: faces.len() - 1,
            faces,
        }
    }

    pub fn empty(top_dim: usize) -> Self {
        SimplicialComplex {
            n_vertices: 0,
            top_dim,
            faces: vec![Vec::new(); top_dim + 1],
        }
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    /// Highest dimension the complex was built to hold (it may have no
    /// simplices there).
    pub fn top_dim(&self) -> usize {
        self.top_dim
    }

    /// Number of p-simplices; zero above `top_dim`.
    pub fn count(&self, p: usize) -> usize {
        self.faces.get(p).map_or(0, |f| f.len() / (p + 1))
    }

    pub fn counts(&self) -> Vec<usize> {
        (0..=self.top_dim).map(|p| self.count(p)).collect()
    }

    pub fn total(&self) -> usize {
        self.counts().iter().sum()
    }

    pub fn simplex(&self, p: usize, i: usize) -> &[u32] {
        &self.faces[p][i * (p + 1)..(i + 1) * (p + 1)]
    }

    pub fn simplices(&self, p: usize) -> impl ExactSizeIterator<Item = &[u32]> + '_ {
        self.faces
            .get(p)
            .map_or(&[][..], |f| f.as_slice())
            .chunks_exact(p + 1)
    }

    /// Position of `s` among the p-simplices, where `p = s.len() - 1`.
    pub fn index_of(&self, s: &[u32]) -> Option<usize> {
        let p = s.len().checked_sub(1)?;
        flat_index(self.faces.get(p)?, s)
    }

    pub fn contains(&self, s: &[u32]) -> bool {
        self.index_of(s).is_some()
    }

    /// True when every simplex of `self` is a simplex of `other`.
    pub fn is_subcomplex_of(&self, other: &SimplicialComplex) -> bool {
        (0..=self.top_dim).all(|p| self.simplices(p).all(|s| other.contains(s)))
    }

    /// Alternating simplex count.
    pub fn euler_characteristic(&self) -> i64 {
        (0..=self.top_dim)
            .map(|p| if p % 2 == 0 { 1 } else { -1 } * self.count(p) as i64)
            .sum()
    }

    /// Checks sortedness, range and hereditary closure.
    pub fn validate(&self) -> Result<()> {
        if self.faces[0].len() != self.n_vertices
            || self.faces[0]
                .iter()
                .enumerate()
                .any(|(i, &v)| v as usize != i)
        {
            return Err(Error::invalid("vertex level must list 0..n in order"));
        }
        for p in 1..=self.top_dim {
            if self.faces[p].len() % (p + 1) != 0 {
                return Err(Error::invalid(format!("ragged {p}-simplex list")));
            }
            let mut prev: Option<&[u32]> = None;
            let mut facet = vec![0u32; p];
            for s in self.simplices(p) {
                if s.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::invalid(format!(
                        "simplex {s:?} is not strictly increasing"
                    )));
                }
                if s[p] as usize >= self.n_vertices {
                    return Err(Error::invalid(format!("vertex out of range in {s:?}")));
                }
                if prev.is_some_and(|q| q >= s) {
                    return Err(Error::invalid(format!(
                        "{p}-simplices not in canonical order"
                    )));
                }
                prev = Some(s);
                for skip in 0..=p {
                    fill_facet(s, skip, &mut facet);
                    if !self.contains(&facet) {
                        return Err(Error::invalid(format!(
                            "face {facet:?} of {s:?} missing (not hereditary)"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Complex restricted to dimensions `0..=top`.
    pub fn truncated(&self, top: usize) -> SimplicialComplex {
        let top = top.min(self.top_dim);
        SimplicialComplex::from_faces_unchecked(self.n_vertices, self.faces[..=top].to_vec())
    }
}

/// Binary search for `s` in a lexicographically sorted flat list of tuples of
/// its own arity.
fn flat_index(flat: &[u32], s: &[u32]) -> Option<usize> {
    let k = s.len();
    let (mut lo, mut hi) = (0usize, flat.len() / k);
    while lo < hi {
        let mid = (lo + hi) / 2;
        match flat[mid * k..(mid + 1) * k].cmp(s) {
            std::cmp::Ordering::Less => lo = mid + 1,
            std::cmp::Ordering::Greater => hi = mid,
            std::cmp::Ordering::Equal => return Some(mid),
        }
    }
    None
}

/// The facet of `s` obtained by dropping position `skip`.
#[inline]
pub(crate) fn fill_facet(s: &[u32], skip: usize, out: &mut [u32]) {
    let mut k = 0;
    for (i, &v) in s.iter().enumerate() {
        if i != skip {
            out[k] = v;
            k += 1;
        }
    }
}

/// Čech complex at scale `eps`: a simplex is present when the balls of radius
/// `eps` around its vertices share a point, i.e. when its smallest enclosing
/// ball has radius at most `eps` (plus [`CECH_TOL`]).
pub fn cech_complex(cloud: &PointCloud, eps: f64, top_dim: usize) -> Result<SimplicialComplex> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::invalid(format!(
            "Čech scale must be positive, got {eps}"
        )));
    }
    let limit = (eps + CECH_TOL) * (eps + CECH_TOL);
    Ok(clique_expansion(cloud, 2.0 * eps, top_dim, |pts| {
        min_enclosing_radius_sq(pts) <= limit
    }))
}

/// Vietoris–Rips complex: every clique of the `r`-neighbor graph.
pub fn rips_complex(cloud: &PointCloud, r: f64, top_dim: usize) -> Result<SimplicialComplex> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::invalid(format!(
            "Rips scale must be positive, got {r}"
        )));
    }
    Ok(clique_expansion(cloud, r, top_dim, |_| true))
}

/// Grows simplices one vertex at a time inside the `edge_r` neighbor graph,
/// keeping a candidate only if `accept` passes and all its facets survived.
fn clique_expansion<F>(
    cloud: &PointCloud,
    edge_r: f64,
    top_dim: usize,
    accept: F,
) -> SimplicialComplex
where
    F: Fn(&[&[f64]]) -> bool + Sync,
{
    let n = cloud.len();
    let mut faces = vec![(0..n as u32).collect::<Vec<u32>>()];
    if top_dim == 0 || n == 0 {
        faces.resize(top_dim + 1, Vec::new());
        return SimplicialComplex::from_faces_unchecked(n, faces);
    }
    let grid = NeighborGrid::new(cloud, edge_r);
    let adj = grid.adjacency(edge_r);
    let mut edges = Vec::new();
    for (i, nb) in adj.iter().enumerate() {
        for &j in nb.iter().filter(|&&j| j as usize > i) {
            edges.push(i as u32);
            edges.push(j);
        }
    }
    faces.push(edges);

    for p in 2..=top_dim {
        let lower = &faces[p - 1];
        let next: Vec<Vec<u32>> = lower
            .par_chunks_exact(p)
            .map(|s| {
                let mut out = Vec::new();
                let last = s[p - 1];
                let mut cand = vec![0u32; p + 1];
                let mut facet = vec![0u32; p];
                let mut pts: Vec<&[f64]> = Vec::with_capacity(p + 1);
                let tail = &adj[last as usize];
                let start = tail.partition_point(|&v| v <= last);
                'v: for &v in &tail[start..] {
                    for &u in &s[..p - 1] {
                        if adj[u as usize].binary_search(&v).is_err() {
                            continue 'v;
                        }
                    }
                    cand[..p].copy_from_slice(s);
                    cand[p] = v;
                    // facets other than `s` itself and those made of edges
                    if p >= 3 {
                        for skip in 0..p {
                            fill_facet(&cand, skip, &mut facet);
                            if flat_index(lower, &facet).is_none() {
                                continue 'v;
                            }
                        }
                    }
                    pts.clear();
                    pts.extend(cand.iter().map(|&i| cloud.point(i as usize)));
                    if accept(&pts) {
                        out.extend_from_slice(&cand);
                    }
                }
                out
            })
            .collect();
        faces.push(next.concat());
    }
    SimplicialComplex::from_faces_unchecked(n, faces)
}

/// Delaunay–Čech complex of a planar cloud: the Delaunay simplices whose
/// smallest enclosing ball has radius at most `eps`.
///
/// It has the homotopy type of the union of `eps`-balls (and hence of the full
/// Čech complex) while staying linear in size. Repeated points are collapsed
/// first because their balls coincide; the returned vertex ids index
/// `unique`, which lists one representative index per distinct point.
pub fn delaunay_cech_complex(cloud: &PointCloud, eps: f64) -> Result<DelaunayCech> {
    use spade::{DelaunayTriangulation, Point2, Triangulation};

    if cloud.dim() != 2 {
        return Err(Error::Unsupported(format!(
            "Delaunay–Čech needs planar input, got dimension {}",
            cloud.dim()
        )));
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::invalid(format!(
            "Čech scale must be positive, got {eps}"
        )));
    }
    let limit = (eps + CECH_TOL) * (eps + CECH_TOL);

    // collapse exact duplicates, keeping the lowest index
    let mut order: Vec<usize> = (0..cloud.len()).collect();
    order.sort_by(|&a, &b| {
        let (p, q) = (cloud.point(a), cloud.point(b));
        p[0].total_cmp(&q[0])
            .then(p[1].total_cmp(&q[1]))
            .then(a.cmp(&b))
    });
    order.dedup_by(|b, a| cloud.point(*a) == cloud.point(*b));
    order.sort_unstable();
    let unique = order;
    let m = unique.len();

    let pts: Vec<Point2<f64>> = unique
        .iter()
        .map(|&i| {
            let p = cloud.point(i);
            Point2::new(p[0], p[1])
        })
        .collect();
    let tri: DelaunayTriangulation<Point2<f64>> = DelaunayTriangulation::bulk_load_stable(pts)
        .map_err(|e| Error::invalid(format!("triangulation failed: {e:?}")))?;

    let mut edges: Vec<[u32; 2]> = Vec::new();
    for e in tri.undirected_edges() {
        let [a, b] = e.vertices();
        let (i, j) = (a.index(), b.index());
        if 0.25 * crate::geometry::dist_sq(cloud.point(unique[i]), cloud.point(unique[j])) <= limit
        {
            edges.push([i.min(j) as u32, i.max(j) as u32]);
        }
    }
    edges.sort_unstable();
    let mut tris: Vec<[u32; 3]> = Vec::new();
    for f in tri.inner_faces() {
        let mut v = f.vertices().map(|h| h.index() as u32);
        v.sort_unstable();
        let ps = [0, 1, 2].map(|k| cloud.point(unique[v[k] as usize]));
        if min_enclosing_radius_sq(&ps) <= limit {
            tris.push(v);
        }
    }
    tris.sort_unstable();
    let complex = SimplicialComplex::from_faces_unchecked(
        m,
        vec![(0..m as u32).collect(), edges.concat(), tris.concat()],
    );
    Ok(DelaunayCech { complex, unique })
}

/// Output of [`delaunay_cech_complex`].
#[derive(Debug, Clone)]
pub struct DelaunayCech {
    pub complex: SimplicialComplex,
    /// Complex vertex `k` is cloud point `unique[k]`.
    pub unique: Vec<usize>,
}

/// Complex interchange text: one simplex per line, vertex ids separated by
/// spaces, in dimension-then-lexicographic order.
pub fn format_complex(c: &SimplicialComplex) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# n_vertices={} top_dim={}", c.n_vertices, c.top_dim);
    for p in 0..=c.top_dim {
        for s in c.simplices(p) {
            for (k, v) in s.iter().enumerate() {
                if k > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
    }
    out
}

pub fn parse_complex(text: &str) -> Result<SimplicialComplex> {
    let mut n_vertices = None;
    let mut top_dim = None;
    let mut simplices: Vec<Vec<u32>> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(comment) = line.strip_prefix('#') {
            for kv in comment.split_whitespace() {
                if let Some(v) = kv.strip_prefix("n_vertices=") {
                    n_vertices = v.parse::<usize>().ok();
                } else if let Some(v) = kv.strip_prefix("top_dim=") {
                    top_dim = v.parse::<usize>().ok();
                }
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let s = line
            .split_whitespace()
            .map(|t| t.parse::<u32>())
            .collect::<std::result::Result<Vec<u32>, _>>()
            .map_err(|e| Error::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
        simplices.push(s);
    }
    let n = n_vertices.unwrap_or_else(|| {
        simplices
            .iter()
            .flatten()
            .max()
            .map_or(0, |&v| v as usize + 1)
    });
    let top = top_dim.unwrap_or_else(|| {
        simplices
            .iter()
            .map(|s| s.len().saturating_sub(1))
            .max()
            .unwrap_or(0)
    });
    SimplicialComplex::from_simplices(n, top, &simplices)
}

pub fn write_complex(path: impl AsRef<Path>, c: &SimplicialComplex) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_complex(c)).map_err(|e| Error::io(path, e))
}

pub fn read_complex(path: impl AsRef<Path>) -> Result<SimplicialComplex> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_complex(&text)
}
