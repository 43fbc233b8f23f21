//! Z₂ simplicial homology: boundary matrices, ranks and Betti numbers.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::complexes::{fill_facet, SimplicialComplex};
use crate::error::{Error, Result};

/// Sparse matrix over the two-element field, stored by column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMatrix {
    rows: usize,
    cols: usize,
    /// Row indices of the ones in each column, strictly increasing.
    columns: Vec<Vec<u32>>,
}

impl BinaryMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        BinaryMatrix {
            rows,
            cols,
            columns: vec![Vec::new(); cols],
        }
    }

    /// Builds from `(row, col)` positions; repeated positions collapse.
    pub fn from_entries(rows: usize, cols: usize, entries: &[(usize, usize)]) -> Result<Self> {
        let mut m = BinaryMatrix::zeros(rows, cols);
        for &(r, c) in entries {
            if r >= rows || c >= cols {
                return Err(Error::invalid(format!(
                    "entry ({r}, {c}) outside a {rows}x{cols} matrix"
                )));
            }
            m.columns[c].push(r as u32);
        }
        for col in &mut m.columns {
            col.sort_unstable();
            col.dedup();
        }
        Ok(m)
    }

    pub fn from_columns(rows: usize, mut columns: Vec<Vec<u32>>) -> Result<Self> {
        for col in &mut columns {
            col.sort_unstable();
            col.dedup();
            if col.last().is_some_and(|&r| r as usize >= rows) {
                return Err(Error::invalid("column entry out of range"));
            }
        }
        Ok(BinaryMatrix {
            rows,
            cols: columns.len(),
            columns,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, c: usize) -> &[u32] {
        &self.columns[c]
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.columns[c].binary_search(&(r as u32)).is_ok()
    }

    pub fn nnz(&self) -> usize {
        self.columns.iter().map(Vec::len).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.columns.iter().all(Vec::is_empty)
    }

    /// Product `self * rhs` over Z₂.
    pub fn mul(&self, rhs: &BinaryMatrix) -> Result<BinaryMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::invalid(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let columns = rhs
            .columns
            .iter()
            .map(|col| {
                let mut acc: Vec<u32> = Vec::new();
                for &k in col {
                    acc = symmetric_difference(&acc, &self.columns[k as usize]);
                }
                acc
            })
            .collect();
        Ok(BinaryMatrix {
            rows: self.rows,
            cols: rhs.cols,
            columns,
        })
    }
}

fn symmetric_difference(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Rank over Z₂.
pub fn rank_mod2(m: &BinaryMatrix) -> usize {
    column_basis(m.rows, m.columns.len(), |c| &m.columns[c]).0
}

/// Rank together with a flag per column marking a maximal independent set.
///
/// Boundary columns are mostly of weight two (edges) or become weight two once
/// earlier columns are absorbed, so the bulk of the work is a union-find over
/// rows: a weight-two column glues two row classes, a weight-one column ties a
/// class to the zero vector. Reducing a column modulo what has been absorbed
/// amounts to keeping the classes it meets an odd number of times. Columns
/// still heavier than two after the sweeps stabilise go through ordinary
/// pivot elimination in the quotient.
fn column_basis<'a>(
    rows: usize,
    n_cols: usize,
    column: impl Fn(usize) -> &'a [u32],
) -> (usize, Vec<bool>) {
    let mut uf = ZeroUnionFind::new(rows);
    let mut independent = vec![false; n_cols];
    let mut rank = 0usize;
    let mut pending: Vec<usize> = (0..n_cols).collect();
    let mut scratch: Vec<u32> = Vec::new();

    loop {
        let before = pending.len();
        let mut deferred = Vec::new();
        for &c in &pending {
            uf.reduce(column(c), &mut scratch);
            match scratch.len() {
                0 => {}
                1 => {
                    uf.mark_zero(scratch[0]);
                    independent[c] = true;
                    rank += 1;
                }
                2 => {
                    uf.union(scratch[0], scratch[1]);
                    independent[c] = true;
                    rank += 1;
                }
                _ => deferred.push(c),
            }
        }
        pending = deferred;
        if pending.is_empty() || pending.len() == before {
            break;
        }
    }

    // residual elimination on reduced columns, pivot = largest class id
    let mut pivots: HashMap<u32, Vec<u32>> = HashMap::new();
    for &c in &pending {
        uf.reduce(column(c), &mut scratch);
        let mut col = scratch.clone();
        while let Some(&low) = col.last() {
            match pivots.get(&low) {
                Some(other) => col = symmetric_difference(&col, other),
                None => break,
            }
        }
        if let Some(&low) = col.last() {
            pivots.insert(low, col);
            independent[c] = true;
            rank += 1;
        }
    }
    (rank, independent)
}

/// Union-find over row indices where a class may be flagged as already in the
/// span (identified with zero).
struct ZeroUnionFind {
    parent: Vec<u32>,
    zero: Vec<bool>,
}

impl ZeroUnionFind {
    fn new(n: usize) -> Self {
        ZeroUnionFind {
            parent: (0..n as u32).collect(),
            zero: vec![false; n],
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let g = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = g;
            x = g;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (keep, gone) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[gone as usize] = keep;
            let z = self.zero[gone as usize];
            self.zero[keep as usize] |= z;
        }
    }

    fn mark_zero(&mut self, a: u32) {
        let r = self.find(a);
        self.zero[r as usize] = true;
    }

    /// Sorted class roots met an odd number of times, skipping zero classes.
    fn reduce(&mut self, col: &[u32], out: &mut Vec<u32>) {
        out.clear();
        for &r in col {
            let root = self.find(r);
            if !self.zero[root as usize] {
                out.push(root);
            }
        }
        out.sort_unstable();
        let mut w = 0;
        let mut i = 0;
        while i < out.len() {
            let mut j = i;
            while j < out.len() && out[j] == out[i] {
                j += 1;
            }
            if (j - i) % 2 == 1 {
                out[w] = out[i];
                w += 1;
            }
            i = j;
        }
        out.truncate(w);
    }
}

/// Boundary operator ∂_p as a matrix: rows are (p−1)-simplices, columns are
/// p-simplices, in the complex's canonical order.
pub fn boundary_matrix(complex: &SimplicialComplex, p: usize) -> Result<BinaryMatrix> {
    if p == 0 || p > complex.top_dim() {
        return Err(Error::invalid(format!(
            "boundary ∂_{p} needs 1 <= p <= top_dim = {}",
            complex.top_dim()
        )));
    }
    let flat = boundary_columns(complex, p, None);
    let columns = (0..flat.len()).map(|c| flat.column(c).to_vec()).collect();
    Ok(BinaryMatrix {
        rows: complex.count(p - 1),
        cols: complex.count(p),
        columns,
    })
}

/// Facet-index columns of ∂_p; when `keep` is given, only facets with a
/// `Some` entry survive and are renumbered through it.
fn boundary_columns(
    complex: &SimplicialComplex,
    p: usize,
    keep: Option<&[Option<u32>]>,
) -> FlatColumns {
    use rayon::prelude::*;
    let n = complex.count(p);
    let stride = p + 1;
    let mut data = vec![0u32; n * stride];
    let mut lens = vec![0u8; n];
    data.par_chunks_mut(stride)
        .zip(lens.par_iter_mut())
        .enumerate()
        .for_each_init(
            || vec![0u32; p],
            |facet, (i, (col, len))| {
                let s = complex.simplex(p, i);
                let mut k = 0;
                for skip in 0..=p {
                    fill_facet(s, skip, facet);
                    let f = complex.index_of(facet).expect("complexes are hereditary") as u32;
                    let entry = match keep {
                        None => Some(f),
                        Some(map) => map[f as usize],
                    };
                    if let Some(g) = entry {
                        col[k] = g;
                        k += 1;
                    }
                }
                col[..k].sort_unstable();
                *len = k as u8;
            },
        );
    FlatColumns { stride, data, lens }
}

/// Columns of at most `stride` entries stored back to back.
struct FlatColumns {
    stride: usize,
    data: Vec<u32>,
    lens: Vec<u8>,
}

impl FlatColumns {
    fn len(&self) -> usize {
        self.lens.len()
    }

    fn column(&self, c: usize) -> &[u32] {
        &self.data[c * self.stride..c * self.stride + self.lens[c] as usize]
    }
}

/// Betti numbers over Z₂, β_p = dim Z_p − dim B_p.
#[derive(Debug, Clone, Default)]
pub struct HomologyProfile {
    pub betti: Vec<usize>,
}

impl HomologyProfile {
    pub fn new(betti: Vec<usize>) -> Self {
        HomologyProfile { betti }
    }

    /// β_p, zero past the stored length.
    pub fn get(&self, p: usize) -> usize {
        self.betti.get(p).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.betti.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betti.is_empty()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.betti
            .iter()
            .enumerate()
            .map(|(p, &b)| if p % 2 == 0 { b as i64 } else { -(b as i64) })
            .sum()
    }
}

/// Comparison ignores trailing zeros: (1,1) equals (1,1,0).
impl PartialEq for HomologyProfile {
    fn eq(&self, other: &Self) -> bool {
        let n = self.betti.len().max(other.betti.len());
        (0..n).all(|p| self.get(p) == other.get(p))
    }
}

impl Eq for HomologyProfile {}

impl fmt::Display for HomologyProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, b) in self.betti.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

impl FromStr for HomologyProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(HomologyProfile::default());
        }
        let betti = s
            .split(',')
            .map(|t| t.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::invalid(format!("bad Betti profile {s:?}: {e}")))?;
        Ok(HomologyProfile { betti })
    }
}

/// The 0/1 loss comparator: true iff the profiles agree up to trailing zeros.
pub fn homology_equal(a: &HomologyProfile, b: &HomologyProfile) -> bool {
    a == b
}

/// β_0 ..= β_{max_p}. Needs simplices up to dimension `max_p + 1`.
pub fn betti_numbers(complex: &SimplicialComplex, max_p: usize) -> Result<HomologyProfile> {
    if max_p + 1 > complex.top_dim() {
        return Err(Error::invalid(format!(
            "β_{max_p} needs simplices of dimension {}, complex stops at {}",
            max_p + 1,
            complex.top_dim()
        )));
    }
    // rank ∂_0 = 0
    let mut ranks = vec![0usize; max_p + 2];
    // `keep` renumbers the p-simplices outside a column basis of ∂_p. The
    // image of ∂_{p+1} lies in ker ∂_p, which projects isomorphically onto
    // those coordinates, so dropping the other rows leaves the rank intact.
    let mut keep: Option<Vec<Option<u32>>> = None;
    for p in 1..=max_p + 1 {
        let cols = boundary_columns(complex, p, keep.as_deref());
        let rows = keep.as_ref().map_or(complex.count(p - 1), |k| {
            k.iter().filter(|x| x.is_some()).count()
        });
        let (rank, independent) = column_basis(rows, cols.len(), |c| cols.column(c));
        ranks[p] = rank;
        let mut next = 0u32;
        keep = Some(
            independent
                .iter()
                .map(|&ind| {
                    if ind {
                        None
                    } else {
                        next += 1;
                        Some(next - 1)
                    }
                })
                .collect(),
        );
    }
    let betti: Vec<usize> = (0..=max_p)
        .map(|p| complex.count(p) - ranks[p] - ranks[p + 1])
        .collect();

    let components = connected_components(complex);
    if betti[0] != components {
        return Err(Error::Numerical(format!(
            "β_0 = {} disagrees with {components} connected components",
            betti[0]
        )));
    }
    Ok(HomologyProfile { betti })
}

/// Every Betti number the complex supports, β_0 ..= β_{top_dim - 1}; empty
/// when `top_dim` is zero.
pub fn all_betti_numbers(complex: &SimplicialComplex) -> Result<HomologyProfile> {
    match complex.top_dim() {
        0 => Ok(HomologyProfile::new(vec![complex.n_vertices()])),
        t => betti_numbers(complex, t - 1),
    }
}

/// Components of the 1-skeleton by union-find.
pub fn connected_components(complex: &SimplicialComplex) -> usize {
    let n = complex.n_vertices();
    let mut parent: Vec<u32> = (0..n as u32).collect();
    fn find(parent: &mut [u32], mut x: u32) -> u32 {
        while parent[x as usize] != x {
            parent[x as usize] = parent[parent[x as usize] as usize];
            x = parent[x as usize];
        }
        x
    }
    let mut comps = n;
    for e in complex.simplices(1) {
        let (a, b) = (find(&mut parent, e[0]), find(&mut parent, e[1]));
        if a != b {
            parent[a.max(b) as usize] = a.min(b);
            comps -= 1;
        }
    }
    comps
}
