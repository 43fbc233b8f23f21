//! Deconvolution for additive noise with a known distribution.
//!
//! The target kernel `Psi` is an isotropic Gaussian. The deconvolving kernel
//! `K` solves `K * Phi = Psi`; since every supported `Phi` has i.i.d.
//! coordinates, `K` is a product of one 1-D kernel `k`, obtained by a
//! numerical inverse Fourier transform of `psi*(t) / phi*(t)` and stored as a
//! table on a uniform lattice.

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::geometry::{unit_ball_volume, PointCloud};
use crate::manifold::NoiseDensity;
use crate::rng::{stream_rng, Stream};

/// Smallest Fourier modulus accepted before declaring the noise undeconvolvable.
pub const FOURIER_FLOOR: f64 = 1e-12;
/// Largest accepted `|K * Phi - Psi|` relative to the peak of `Psi`.
pub const RESIDUAL_TOL: f64 = 1e-3;

/// `psi*(BAND / sigma_psi) = exp(-BAND^2 / 2) ~ 1e-14`.
const BAND: f64 = 8.03;
/// Kernel support in units of `sigma_psi`.
const SUPPORT: f64 = 12.0;
const HALF_NODES: usize = 600;
const FREQ_PANELS: usize = 4096;
const FLOOR_STEPS: usize = 256;
const BALL_CELLS: usize = 16;

/// `inf_{|t|_inf <= r} |Phi*(t)|` on a lattice of step `r / 256`.
///
/// `Phi*` is a product of even 1-D factors, so the box minimum is the
/// `dim`-th power of the 1-D minimum on `[0, r]`. A sign change between
/// neighboring nodes means a zero in between and counts as a floor of 0.
pub fn verify_fourier_floor(phi: &NoiseDensity, dim: usize, r: f64) -> Result<f64> {
    phi.validate()?;
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::invalid(format!(
            "band radius must be positive, got {r}"
        )));
    }
    let mut floor1 = f64::INFINITY;
    let mut prev = phi.char_fn_1d(0.0);
    for k in 0..=FLOOR_STEPS {
        let v = phi.char_fn_1d(r * k as f64 / FLOOR_STEPS as f64);
        if v.signum() != prev.signum() {
            floor1 = 0.0;
        }
        floor1 = floor1.min(v.abs());
        prev = v;
    }
    let rho = floor1.powi(dim as i32);
    if !(rho >= FOURIER_FLOOR) {
        return Err(Error::precondition(
            "inf |Φ*| > 0 on the kernel band",
            format!("Fourier floor {rho:e} < {FOURIER_FLOOR:e} on |t|_inf <= {r}"),
        ));
    }
    Ok(rho)
}

/// Mass of an isotropic Gaussian outside the ball of radius `eps`.
pub fn gaussian_tail(sigma: f64, dim: usize, eps: f64) -> f64 {
    let chi = ChiSquared::new(dim as f64).expect("positive degrees of freedom");
    chi.sf((eps / sigma).powi(2))
}

fn gaussian_pdf(x: f64, sigma: f64) -> f64 {
    (-0.5 * (x / sigma).powi(2)).exp() / (sigma * (2.0 * PI).sqrt())
}

fn simpson_weights(m: usize) -> Vec<f64> {
    (0..=m)
        .map(|i| {
            if i == 0 || i == m {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            }
        })
        .collect()
}

/// Symmetric 1-D table `values[j] = k(j * step)`, zero beyond the last node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Table {
    step: f64,
    values: Vec<f64>,
}

impl Table {
    fn support(&self) -> f64 {
        self.step * (self.values.len() - 1) as f64
    }

    fn node(&self, j: isize) -> f64 {
        self.values.get(j.unsigned_abs()).copied().unwrap_or(0.0)
    }

    /// Catmull-Rom interpolation.
    fn at(&self, x: f64) -> f64 {
        let u = x.abs() / self.step;
        let j = u.floor() as isize;
        if j as usize >= self.values.len() - 1 {
            return if j as usize == self.values.len() - 1 && u == j as f64 {
                self.node(j)
            } else {
                0.0
            };
        }
        let s = u - j as f64;
        let (p0, p1, p2, p3) = (
            self.node(j - 1),
            self.node(j),
            self.node(j + 1),
            self.node(j + 2),
        );
        p1 + 0.5
            * s
            * (p2 - p0
                + s * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + s * (3.0 * (p1 - p2) + p3 - p0)))
    }
}

/// Cumulative tables on the half line used for sampling and box integrals.
#[derive(Debug, Clone)]
struct Cumulative {
    /// `int_0^{x_j} k`.
    signed: Vec<f64>,
    /// `int_0^{x_j} |k|`, trapezoidal in `|k|`.
    abs: Vec<f64>,
}

impl Cumulative {
    fn new(t: &Table) -> Self {
        let (mut signed, mut abs) = (vec![0.0], vec![0.0]);
        for w in t.values.windows(2) {
            signed.push(signed.last().unwrap() + 0.5 * t.step * (w[0] + w[1]));
            abs.push(abs.last().unwrap() + 0.5 * t.step * (w[0].abs() + w[1].abs()));
        }
        Cumulative { signed, abs }
    }

    /// `int_0^x k` for `x >= 0`, linear inside a cell.
    fn signed_to(&self, t: &Table, x: f64) -> f64 {
        let u = x / t.step;
        let j = u.floor() as usize;
        if j + 1 >= self.signed.len() {
            return *self.signed.last().unwrap();
        }
        let s = (u - j as f64) * t.step;
        let (f0, f1) = (t.values[j], t.values[j + 1]);
        self.signed[j] + f0 * s + (f1 - f0) * s * s / (2.0 * t.step)
    }

    /// `int_{-inf}^x k`.
    fn cdf(&self, t: &Table, x: f64) -> f64 {
        let half = *self.signed.last().unwrap();
        if x >= 0.0 {
            half + self.signed_to(t, x)
        } else {
            half - self.signed_to(t, -x)
        }
    }

    /// Draw from `|k|` normalized, piecewise-linear density inside a cell.
    fn sample_abs<R: Rng>(&self, t: &Table, rng: &mut R) -> f64 {
        let total = *self.abs.last().unwrap();
        let q = rng.gen::<f64>() * total;
        let j = self
            .abs
            .partition_point(|&c| c <= q)
            .saturating_sub(1)
            .min(self.abs.len() - 2);
        let rem = q - self.abs[j];
        let (f0, f1, h) = (t.values[j].abs(), t.values[j + 1].abs(), t.step);
        let s = if (f1 - f0).abs() < 1e-12 * (f0 + f1).max(f64::MIN_POSITIVE) {
            if f0 > 0.0 {
                rem / f0
            } else {
                0.5 * h
            }
        } else {
            let disc = (f0 * f0 + 2.0 * (f1 - f0) * rem / h).max(0.0);
            (disc.sqrt() - f0) * h / (f1 - f0)
        };
        let x = j as f64 * h + s.clamp(0.0, h);
        if rng.gen::<bool>() {
            x
        } else {
            -x
        }
    }
}

/// `Psi` and `K` with `K * Phi = Psi` and `Psi{|x| >= epsilon} <= gamma`.
#[derive(Debug, Clone)]
pub struct KernelPair {
    phi: NoiseDensity,
    dim: usize,
    sigma_psi: f64,
    epsilon: f64,
    gamma: f64,
    tail: f64,
    residual: f64,
    k: Table,
    cum: Cumulative,
}

/// Serialized form: the preset parameters plus the sampled kernel table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelRecord {
    pub phi: NoiseDensity,
    pub dim: usize,
    pub sigma_psi: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub step: f64,
    pub values: Vec<f64>,
}

/// Builds the pair for noise `phi` on `R^dim`.
///
/// `Psi` has scale `epsilon / 4`, shrunk further if needed so that its mass
/// outside `B_epsilon` is at most `gamma`. With `gamma = None` the tail of
/// the `epsilon / 4` Gaussian is used as `gamma`.
pub fn build_kernel_pair(
    phi: &NoiseDensity,
    dim: usize,
    epsilon: f64,
    gamma: Option<f64>,
) -> Result<KernelPair> {
    phi.validate()?;
    if !(1..=3).contains(&dim) {
        return Err(Error::Unsupported(format!(
            "deconvolution quadrature supports ambient dimension 1 to 3, got {dim}"
        )));
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::invalid(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let mut sigma_psi = epsilon / 4.0;
    let gamma = match gamma {
        None => gaussian_tail(sigma_psi, dim, epsilon),
        Some(g) if g > 0.0 && g < 1.0 => {
            if gaussian_tail(sigma_psi, dim, epsilon) > g {
                // tail grows with sigma; keep the largest sigma meeting the bound
                let (mut lo, mut hi) = (0.0, sigma_psi);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if gaussian_tail(mid, dim, epsilon) <= g {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                if !(lo > 0.0) {
                    return Err(Error::Numerical(format!(
                        "no Gaussian scale meets tail bound {g:e}"
                    )));
                }
                sigma_psi = lo;
            }
            g
        }
        Some(g) => return Err(Error::invalid(format!("gamma must lie in (0, 1), got {g}"))),
    };
    let band = BAND / sigma_psi;
    verify_fourier_floor(phi, dim, band)?;

    let k = invert_1d(phi, sigma_psi, band);
    let mut pair = KernelPair {
        phi: *phi,
        dim,
        sigma_psi,
        epsilon,
        gamma,
        tail: gaussian_tail(sigma_psi, dim, epsilon),
        residual: f64::NAN,
        cum: Cumulative::new(&k),
        k,
    };
    pair.residual = pair.measure_residual();
    if !(pair.residual <= RESIDUAL_TOL) {
        return Err(Error::Numerical(format!(
            "kernel residual |K*Φ - Ψ|_inf = {:e} exceeds {RESIDUAL_TOL:e} of the peak",
            pair.residual
        )));
    }
    Ok(pair)
}

/// `k(x) = (1/pi) int_0^band psi*(t) / phi*(t) cos(t x) dt` on the lattice.
fn invert_1d(phi: &NoiseDensity, sigma_psi: f64, band: f64) -> Table {
    let support = SUPPORT * sigma_psi;
    let step = support / HALF_NODES as f64;
    let h = band / FREQ_PANELS as f64;
    let weighted: Vec<(f64, f64)> = simpson_weights(FREQ_PANELS)
        .into_iter()
        .enumerate()
        .map(|(i, w)| {
            let t = i as f64 * h;
            let g = (-0.5 * (sigma_psi * t).powi(2)).exp() / phi.char_fn_1d(t);
            (t, w * g * h / 3.0)
        })
        .collect();
    let values = (0..=HALF_NODES)
        .map(|j| {
            let x = j as f64 * step;
            weighted
                .iter()
                .map(|&(t, w)| w * (t * x).cos())
                .sum::<f64>()
                / PI
        })
        .collect();
    Table { step, values }
}

impl KernelPair {
    pub fn phi(&self) -> &NoiseDensity {
        &self.phi
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sigma_psi(&self) -> f64 {
        self.sigma_psi
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// The tail bound the pair was built to satisfy.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Actual `Psi{|x| >= epsilon}`.
    pub fn tail(&self) -> f64 {
        self.tail
    }

    /// `|K * Phi - Psi|_inf / Psi(0)` on the probe grid.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Per-axis support of `K`.
    pub fn support(&self) -> f64 {
        self.k.support()
    }

    pub fn k_1d(&self, x: f64) -> f64 {
        self.k.at(x)
    }

    pub fn psi_1d(&self, x: f64) -> f64 {
        gaussian_pdf(x, self.sigma_psi)
    }

    pub fn k_value(&self, x: &[f64]) -> f64 {
        x.iter().map(|&v| self.k.at(v)).product()
    }

    pub fn psi_value(&self, x: &[f64]) -> f64 {
        x.iter().map(|&v| self.psi_1d(v)).product()
    }

    /// `int k` over the real line (1 up to quadrature error).
    pub fn k_integral_1d(&self) -> f64 {
        2.0 * self.cum.signed.last().unwrap()
    }

    /// `int |K|`, the normalization used when sampling.
    pub fn k_abs_mass(&self) -> f64 {
        (2.0 * self.cum.abs.last().unwrap()).powi(self.dim as i32)
    }

    /// `(K * Phi)(x)` for one coordinate, by quadrature over the noise.
    pub fn convolved_1d(&self, x: f64) -> f64 {
        let k = |u: f64| self.k.at(x - u);
        let simpson = |a: f64, b: f64, m: usize, f: &dyn Fn(f64) -> f64| {
            let h = (b - a) / m as f64;
            simpson_weights(m)
                .iter()
                .enumerate()
                .map(|(i, w)| w * f(a + i as f64 * h))
                .sum::<f64>()
                * h
                / 3.0
        };
        match self.phi {
            NoiseDensity::PointMass => k(0.0),
            NoiseDensity::Gaussian { sigma } => simpson(-8.0 * sigma, 8.0 * sigma, 800, &|u| {
                k(u) * gaussian_pdf(u, sigma)
            }),
            NoiseDensity::Uniform { half_width } => {
                simpson(-half_width, half_width, 800, &|u| k(u)) / (2.0 * half_width)
            }
            NoiseDensity::Laplace { scale } => {
                let pdf = |u: f64| (-u.abs() / scale).exp() / (2.0 * scale);
                simpson(-40.0 * scale, 0.0, 2000, &|u| k(u) * pdf(u))
                    + simpson(0.0, 40.0 * scale, 2000, &|u| k(u) * pdf(u))
            }
        }
    }

    fn measure_residual(&self) -> f64 {
        let probes: Vec<f64> = (-24..=24)
            .map(|p| p as f64 * self.sigma_psi / 4.0)
            .collect();
        let conv: Vec<f64> = probes.iter().map(|&x| self.convolved_1d(x)).collect();
        let psi: Vec<f64> = probes.iter().map(|&x| self.psi_1d(x)).collect();
        let peak = self.psi_1d(0.0).powi(self.dim as i32);
        let len = probes.len();
        let mut worst: f64 = 0.0;
        let mut idx = vec![0usize; self.dim];
        loop {
            let a: f64 = idx.iter().map(|&i| conv[i]).product();
            let b: f64 = idx.iter().map(|&i| psi[i]).product();
            worst = worst.max((a - b).abs());
            let mut axis = 0;
            while axis < self.dim {
                idx[axis] += 1;
                if idx[axis] < len {
                    break;
                }
                idx[axis] = 0;
                axis += 1;
            }
            if axis == self.dim {
                break;
            }
        }
        worst / peak
    }

    pub fn record(&self) -> KernelRecord {
        KernelRecord {
            phi: self.phi,
            dim: self.dim,
            sigma_psi: self.sigma_psi,
            epsilon: self.epsilon,
            gamma: self.gamma,
            step: self.k.step,
            values: self.k.values.clone(),
        }
    }

    /// Rebuilds a pair from its record and re-runs the residual check.
    pub fn from_record(rec: &KernelRecord) -> Result<Self> {
        rec.phi.validate()?;
        if rec.values.len() < 4 || !(rec.step > 0.0) || !(rec.sigma_psi > 0.0) {
            return Err(Error::invalid("malformed kernel table"));
        }
        let k = Table {
            step: rec.step,
            values: rec.values.clone(),
        };
        let mut pair = KernelPair {
            phi: rec.phi,
            dim: rec.dim,
            sigma_psi: rec.sigma_psi,
            epsilon: rec.epsilon,
            gamma: rec.gamma,
            tail: gaussian_tail(rec.sigma_psi, rec.dim, rec.epsilon),
            residual: f64::NAN,
            cum: Cumulative::new(&k),
            k,
        };
        pair.residual = pair.measure_residual();
        if !(pair.residual <= RESIDUAL_TOL) {
            return Err(Error::Numerical(format!(
                "kernel residual {:e} in stored table",
                pair.residual
            )));
        }
        Ok(pair)
    }
}

/// Quadrature nodes of a ball, as runs along axis 0: (indices on the other
/// axes, lo, hi).
struct BallLattice {
    radius: f64,
    pitch: f64,
    offsets: Vec<f64>,
    runs: Vec<([usize; 3], usize, usize)>,
}

/// The signed measure `P_n(A) = (1/n) sum_i int_A K(Y_i - u) du`.
#[derive(Debug, Clone)]
pub struct DeconvolvedMeasure {
    data: PointCloud,
    kernel: KernelPair,
    cell: f64,
    buckets: HashMap<[i64; 3], Vec<u32>>,
}

impl DeconvolvedMeasure {
    pub fn new(data: PointCloud, kernel: KernelPair) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::invalid(
                "deconvolved measure needs at least one point",
            ));
        }
        if data.dim() != kernel.dim {
            return Err(Error::invalid(format!(
                "data dimension {} does not match kernel dimension {}",
                data.dim(),
                kernel.dim
            )));
        }
        let cell = kernel.support();
        let mut buckets: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
        for (i, p) in data.iter().enumerate() {
            buckets
                .entry(Self::key(p, cell))
                .or_default()
                .push(i as u32);
        }
        Ok(DeconvolvedMeasure {
            data,
            kernel,
            cell,
            buckets,
        })
    }

    fn key(p: &[f64], cell: f64) -> [i64; 3] {
        let mut k = [0i64; 3];
        for (a, &v) in p.iter().enumerate() {
            k[a] = (v / cell).floor() as i64;
        }
        k
    }

    pub fn data(&self) -> &PointCloud {
        &self.data
    }

    pub fn kernel(&self) -> &KernelPair {
        &self.kernel
    }

    /// Data points within sup-distance `reach` of `c`.
    fn for_each_near(&self, c: &[f64], reach: f64, mut f: impl FnMut(&[f64])) {
        let dim = self.data.dim();
        let lo = Self::key(&c.iter().map(|v| v - reach).collect::<Vec<_>>(), self.cell);
        let hi = Self::key(&c.iter().map(|v| v + reach).collect::<Vec<_>>(), self.cell);
        let mut key = lo;
        loop {
            if let Some(ids) = self.buckets.get(&key) {
                for &i in ids {
                    let p = self.data.point(i as usize);
                    if p.iter().zip(c).all(|(a, b)| (a - b).abs() <= reach) {
                        f(p);
                    }
                }
            }
            let mut axis = 0;
            while axis < dim {
                key[axis] += 1;
                if key[axis] <= hi[axis] {
                    break;
                }
                key[axis] = lo[axis];
                axis += 1;
            }
            if axis == dim {
                break;
            }
        }
    }

    /// `P_n(B_radius(center))` by midpoint quadrature on a lattice aligned
    /// with the center, of pitch `min(radius / 16, sigma_psi)`.
    pub fn eval_on_ball(&self, center: &[f64], radius: f64) -> f64 {
        self.ball_mass(center, &self.ball_lattice(radius))
    }

    fn ball_lattice(&self, radius: f64) -> BallLattice {
        let dim = self.data.dim();
        let half = (BALL_CELLS as f64).max((radius / self.kernel.sigma_psi).ceil()) as usize;
        let pitch = radius / half as f64;
        let side = 2 * half;
        let offsets: Vec<f64> = (0..side)
            .map(|j| (j as f64 + 0.5 - half as f64) * pitch)
            .collect();
        let mut runs = Vec::new();
        let mut idx = [0usize; 3];
        loop {
            let rest: f64 = idx[1..dim].iter().map(|&j| offsets[j] * offsets[j]).sum();
            let span = radius * radius - rest;
            // offsets are symmetric, so the nodes inside form a centered run
            let inside = offsets[half..]
                .iter()
                .take_while(|&&o| o * o <= span)
                .count();
            if inside > 0 {
                runs.push((idx, half - inside, half + inside));
            }
            let mut axis = 1;
            while axis < dim {
                idx[axis] += 1;
                if idx[axis] < side {
                    break;
                }
                idx[axis] = 0;
                axis += 1;
            }
            if axis >= dim {
                break;
            }
        }
        BallLattice {
            radius,
            pitch,
            offsets,
            runs,
        }
    }

    fn ball_mass(&self, center: &[f64], lat: &BallLattice) -> f64 {
        let dim = self.data.dim();
        let side = lat.offsets.len();
        let mut table = vec![0.0; dim * side];
        let mut prefix = vec![0.0; side + 1];
        let mut total = 0.0;
        self.for_each_near(center, lat.radius + self.kernel.support(), |y| {
            for a in 0..dim {
                for (j, o) in lat.offsets.iter().enumerate() {
                    table[a * side + j] = self.kernel.k.at(y[a] - center[a] - o);
                }
            }
            for j in 0..side {
                prefix[j + 1] = prefix[j] + table[j];
            }
            total += lat
                .runs
                .iter()
                .map(|(n, lo, hi)| {
                    (1..dim).map(|a| table[a * side + n[a]]).product::<f64>()
                        * (prefix[*hi] - prefix[*lo])
                })
                .sum::<f64>();
        });
        total * lat.pitch.powi(dim as i32) / self.data.len() as f64
    }

    /// `P_n` of the box `[lo, hi]`, exact up to the table's own error.
    pub fn eval_on_box(&self, lo: &[f64], hi: &[f64]) -> f64 {
        let k = &self.kernel;
        let total: f64 = self
            .data
            .iter()
            .map(|y| {
                (0..y.len())
                    .map(|a| k.cum.cdf(&k.k, hi[a] - y[a]) - k.cum.cdf(&k.k, lo[a] - y[a]))
                    .product::<f64>()
            })
            .sum();
        total / self.data.len() as f64
    }

    /// Mixture draw: a uniform data point plus an offset from the positive
    /// part of `K`, by rejection from `|K|`.
    pub fn resample(&self, count: usize, seed: u64) -> Result<PointCloud> {
        Ok(self.resample_with_offsets(count, seed)?.0)
    }

    pub(crate) fn resample_with_offsets(
        &self,
        count: usize,
        seed: u64,
    ) -> Result<(PointCloud, Vec<f64>)> {
        if count == 0 {
            return Err(Error::invalid("resample count must be at least 1"));
        }
        let k = &self.kernel;
        let positive = 0.5 * (k.k_abs_mass() + k.k_integral_1d().powi(k.dim as i32));
        if !(positive > 0.0) || !positive.is_finite() {
            return Err(Error::Numerical(format!(
                "positive part of K has mass {positive}"
            )));
        }
        let dim = self.data.dim();
        let mut rng = stream_rng(seed, Stream::Resample);
        let mut out = Vec::with_capacity(count * dim);
        let mut offsets = Vec::with_capacity(count * dim);
        let mut off = vec![0.0; dim];
        for _ in 0..count {
            let y = self.data.point(rng.gen_range(0..self.data.len()));
            loop {
                for o in off.iter_mut() {
                    *o = k.cum.sample_abs(&k.k, &mut rng);
                }
                if k.k_value(&off) > 0.0 {
                    break;
                }
            }
            out.extend(y.iter().zip(&off).map(|(a, b)| a + b));
            offsets.extend_from_slice(&off);
        }
        Ok((PointCloud::from_flat(dim, out)?, offsets))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeconCleanReport {
    pub kept: Vec<usize>,
    pub removed: Vec<usize>,
    /// `P_n(B_{4 eps}(Z_i))` for every sample.
    pub masses: Vec<f64>,
}

/// Removes every `Z_i` with `P_n(B_{4 eps}(Z_i)) <= 2 gamma`.
pub fn decon_clean(
    samples: &PointCloud,
    m: &DeconvolvedMeasure,
    epsilon: f64,
    gamma: f64,
) -> DeconCleanReport {
    let lattice = m.ball_lattice(4.0 * epsilon);
    let masses: Vec<f64> = (0..samples.len())
        .into_par_iter()
        .map(|i| m.ball_mass(samples.point(i), &lattice))
        .collect();
    let (kept, removed) = (0..samples.len()).partition(|&i| masses[i] > 2.0 * gamma);
    DeconCleanReport {
        kept,
        removed,
        masses,
    }
}

/// `(epsilon, gamma)` meeting the three conditions of the deconvolution
/// analysis, together with the analytic lower bound on `omega`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeconParams {
    pub epsilon: f64,
    pub gamma: f64,
    /// `a v_d eps^d cos^d(theta) (1 - gamma) - gamma`.
    pub omega_lower: f64,
}

pub fn omega_lower_bound(a: f64, d: usize, tau: f64, epsilon: f64, gamma: f64) -> f64 {
    let cos = (1.0 - (epsilon / (2.0 * tau)).powi(2)).max(0.0).sqrt();
    a * unit_ball_volume(d) * (epsilon * cos).powi(d as i32) * (1.0 - gamma) - gamma
}

/// Largest `epsilon` below `(√9−√8)τ/5` with a 10% margin, then `gamma`
/// (starting from the tail of the `epsilon/4` Gaussian) halved until
/// `omega >= 2 gamma`.
pub fn choose_decon_params(a: f64, d: usize, tau: f64, dim: usize) -> Result<DeconParams> {
    if !(a > 0.0) || !(tau > 0.0) || d == 0 || d > dim {
        return Err(Error::invalid(format!(
            "need a > 0, tau > 0, 0 < d <= D; got a = {a}, tau = {tau}, d = {d}, D = {dim}"
        )));
    }
    let epsilon = 0.9 * crate::cleaning::REACH_FACTOR * tau / 5.0;
    let mut gamma = gaussian_tail(epsilon / 4.0, dim, epsilon);
    while omega_lower_bound(a, d, tau, epsilon, gamma) < 2.0 * gamma {
        gamma *= 0.5;
        if gamma < 1e-300 {
            return Err(Error::Numerical(
                "no gamma satisfies omega >= 2 gamma".into(),
            ));
        }
    }
    Ok(DeconParams {
        epsilon,
        gamma,
        omega_lower: omega_lower_bound(a, d, tau, epsilon, gamma),
    })
}

/// Smallest `omega_hat = P_n(B_{2 eps}(x))` over probe points on `M`.
pub fn pilot_omega(m: &DeconvolvedMeasure, probes: &PointCloud, epsilon: f64) -> f64 {
    probes
        .iter()
        .map(|x| m.eval_on_ball(x, 2.0 * epsilon))
        .fold(f64::INFINITY, f64::min)
}

/// `m = max(floor((ln l + ln(2/delta)) / omega) + 1, ceil(c2 n))`, with the
/// covering number bounded by `l <= vol(M) / (cos^d(theta) v_d (2 eps)^d)`.
pub fn resample_count(
    n: usize,
    omega: f64,
    vol_m: f64,
    d: usize,
    tau: f64,
    epsilon: f64,
    delta: f64,
    c2: f64,
) -> usize {
    let cos = (1.0 - (epsilon / (2.0 * tau)).powi(2)).max(0.0).sqrt();
    let l = (vol_m / (cos.powi(d as i32) * unit_ball_volume(d) * (2.0 * epsilon).powi(d as i32)))
        .max(1.0);
    let bound = ((l.ln() + (2.0 / delta).ln()) / omega).floor() + 1.0;
    let bound = if bound.is_finite() {
        bound.min(1e12) as usize
    } else {
        usize::MAX
    };
    bound.max((c2 * n as f64).ceil() as usize)
}

/// Full linear convolution of two nonnegative sequences on a common lattice.
pub fn discrete_convolve(p: &[f64], phi: &[f64]) -> Vec<f64> {
    if p.is_empty() || phi.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; p.len() + phi.len() - 1];
    for (i, &a) in p.iter().enumerate() {
        for (j, &b) in phi.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

/// `1 - sum min(p, q)` for probability vectors (shorter one zero-padded).
pub fn discrete_tv(p: &[f64], q: &[f64]) -> f64 {
    let len = p.len().max(q.len());
    let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    1.0 - (0..len).map(|i| at(p, i).min(at(q, i))).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gaussian_floor_matches_closed_form() {
        for dim in [1, 2, 3] {
            let rho =
                verify_fourier_floor(&NoiseDensity::Gaussian { sigma: 0.1 }, dim, 10.0).unwrap();
            let closed = (-0.01 * 100.0 * dim as f64 / 2.0).exp();
            assert!((rho - closed).abs() < 1e-6);
        }
        assert_eq!(
            verify_fourier_floor(&NoiseDensity::PointMass, 2, 1e6).unwrap(),
            1.0
        );
    }

    #[test]
    fn uniform_floor_hits_sinc_zero() {
        // first zero at pi / half_width = 31.4
        let phi = NoiseDensity::Uniform { half_width: 0.1 };
        assert!(verify_fourier_floor(&phi, 2, 20.0).is_ok());
        let err = verify_fourier_floor(&phi, 2, 40.0).unwrap_err().to_string();
        assert!(err.contains("Fourier floor"), "{err}");
    }

    #[test]
    fn point_mass_kernel_is_psi() {
        let pair = build_kernel_pair(&NoiseDensity::PointMass, 2, 0.04, None).unwrap();
        for x in [0.0, 0.003, 0.01, 0.02] {
            let rel = (pair.k_1d(x) - pair.psi_1d(x)).abs() / pair.psi_1d(0.0);
            assert!(rel < 1e-6, "x={x}: {rel}");
        }
        assert!(pair.residual() < 1e-6);
    }

    #[test]
    fn gaussian_kernel_matches_closed_form() {
        let (sigma_phi, eps) = (0.004, 0.04);
        let pair =
            build_kernel_pair(&NoiseDensity::Gaussian { sigma: sigma_phi }, 2, eps, None).unwrap();
        let sk = (pair.sigma_psi().powi(2) - sigma_phi * sigma_phi).sqrt();
        let peak = gaussian_pdf(0.0, sk);
        let worst = (-300..=300)
            .map(|j| j as f64 * pair.support() / 300.0)
            .map(|x| (pair.k_1d(x) - gaussian_pdf(x, sk)).abs() / peak)
            .fold(0.0, f64::max);
        assert!(worst < 1e-4, "{worst}");
        assert!(pair.residual() <= RESIDUAL_TOL);
        assert!((pair.k_integral_1d() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn laplace_kernel_is_signed_and_residual_small() {
        let pair =
            build_kernel_pair(&NoiseDensity::Laplace { scale: 0.003 }, 2, 0.04, None).unwrap();
        // k = psi - s^2 psi'' dips below zero in the tails
        assert!((0..600).any(|j| pair.k_1d(j as f64 * pair.support() / 600.0) < 0.0));
        assert!(pair.residual() <= RESIDUAL_TOL);
        assert!(pair.k_abs_mass() > 1.0);
    }

    #[test]
    fn tail_bound() {
        let pair = build_kernel_pair(&NoiseDensity::PointMass, 2, 0.08, None).unwrap();
        assert!((pair.tail() - (-8.0f64).exp()).abs() < 1e-12);
        // radial quadrature of the 2-D Gaussian beyond eps
        let s = pair.sigma_psi();
        let steps = 20_000;
        let (lo, hi) = (0.08, 0.08 + 12.0 * s);
        let h = (hi - lo) / steps as f64;
        let quad: f64 = simpson_weights(steps)
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let r = lo + i as f64 * h;
                w * r / (s * s) * (-0.5 * (r / s).powi(2)).exp()
            })
            .sum::<f64>()
            * h
            / 3.0;
        assert!((quad - pair.tail()).abs() < 1e-3);
        // axis-aligned bound: P(|x|_inf >= 4 sigma)
        for dim in [2, 3] {
            let per_axis = 2.0 * (1.0 - statrs::distribution::Normal::standard().cdf(4.0));
            assert!(1.0 - (1.0 - per_axis).powi(dim) <= 3.2e-4);
        }
        // a stricter gamma shrinks sigma_psi
        let strict = build_kernel_pair(&NoiseDensity::PointMass, 2, 0.08, Some(1e-6)).unwrap();
        assert!(strict.sigma_psi() < 0.02);
        assert!(strict.tail() <= 1e-6 * (1.0 + 1e-9));
    }

    #[test]
    fn residual_failure_is_reported() {
        // noise wider than Psi: the floor holds on the band but the ratio
        // explodes and the lattice cannot represent K
        let res = build_kernel_pair(&NoiseDensity::Gaussian { sigma: 0.0065 }, 1, 0.04, None);
        if let Err(e) = res {
            let msg = e.to_string();
            assert!(
                msg.contains("residual") || msg.contains("Fourier floor"),
                "{msg}"
            );
        }
        let err =
            build_kernel_pair(&NoiseDensity::Gaussian { sigma: 0.05 }, 2, 0.03, None).unwrap_err();
        assert!(err.to_string().contains("Fourier floor"));
    }

    fn circle_measure(n: usize, kernel: KernelPair) -> DeconvolvedMeasure {
        let rows: Vec<[f64; 2]> = (0..n)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / n as f64;
                [t.cos(), t.sin()]
            })
            .collect();
        DeconvolvedMeasure::new(PointCloud::from_rows(2, &rows).unwrap(), kernel).unwrap()
    }

    #[test]
    fn ball_and_box_masses() {
        let pair = build_kernel_pair(&NoiseDensity::PointMass, 2, 0.04, None).unwrap();
        let m = circle_measure(400, pair);
        assert!((m.eval_on_box(&[-2.0, -2.0], &[2.0, 2.0]) - 1.0).abs() < 1e-6);
        let whole = m.eval_on_ball(&[0.0, 0.0], 1.2);
        assert!((whole - 1.0).abs() < 0.02, "{whole}");
        assert_eq!(m.eval_on_ball(&[5.0, 5.0], 0.1), 0.0);
        // a ball of radius 2 eps around a data point holds about its arc share
        let local = m.eval_on_ball(&[1.0, 0.0], 0.08);
        let expected = 2.0 * 0.08 / (2.0 * PI);
        assert!(
            (local - expected).abs() < 0.1 * expected,
            "{local} vs {expected}"
        );
    }

    #[test]
    fn duplicating_data_leaves_mass_unchanged() {
        let pair = build_kernel_pair(&NoiseDensity::PointMass, 2, 0.04, None).unwrap();
        let m = circle_measure(100, pair.clone());
        let mut doubled = m.data().clone();
        for i in 0..100 {
            let p = m.data().point(i).to_vec();
            doubled.push(&p).unwrap();
        }
        let m2 = DeconvolvedMeasure::new(doubled, pair).unwrap();
        let (a, b) = (
            m.eval_on_ball(&[0.0, 1.0], 0.1),
            m2.eval_on_ball(&[0.0, 1.0], 0.1),
        );
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn resample_is_reproducible_and_concentrated() {
        let pair = build_kernel_pair(&NoiseDensity::PointMass, 2, 0.04, None).unwrap();
        let m = circle_measure(300, pair);
        let a = m.resample(300, 9).unwrap();
        assert_eq!(a, m.resample(300, 9).unwrap());
        let far = a
            .iter()
            .filter(|p| ((p[0] * p[0] + p[1] * p[1]).sqrt() - 1.0).abs() > 0.04)
            .count();
        assert!((far as f64) <= 2.0 * m.kernel().tail() * 300.0 + 3.0);
    }

    #[test]
    fn resample_offsets_follow_gaussian_kernel() {
        let sigma_phi = 0.004;
        let pair =
            build_kernel_pair(&NoiseDensity::Gaussian { sigma: sigma_phi }, 2, 0.04, None).unwrap();
        let sk = (pair.sigma_psi().powi(2) - sigma_phi * sigma_phi).sqrt();
        let m = circle_measure(50, pair);
        let n = 100_000;
        let (_, off) = m.resample_with_offsets(n, 3).unwrap();
        let mut xs: Vec<f64> = off.iter().step_by(2).copied().collect();
        xs.sort_by(f64::total_cmp);
        let normal = statrs::distribution::Normal::new(0.0, sk).unwrap();
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = normal.cdf(x);
                (f - i as f64 / n as f64)
                    .abs()
                    .max((f - (i + 1) as f64 / n as f64).abs())
            })
            .fold(0.0, f64::max);
        // Kolmogorov critical value at level 0.01
        assert!(ks < 1.628 / (n as f64).sqrt(), "{ks}");
    }

    #[test]
    fn decon_clean_keeps_near_and_drops_far() {
        let pair = build_kernel_pair(&NoiseDensity::PointMass, 2, 0.04, None).unwrap();
        let gamma = pair.gamma();
        let m = circle_measure(400, pair);
        let z =
            PointCloud::from_rows(2, &[[1.0, 0.0], [0.0, 0.99], [0.0, 0.0], [3.0, 3.0]]).unwrap();
        let rep = decon_clean(&z, &m, 0.04, gamma);
        assert_eq!(rep.kept, vec![0, 1]);
        assert!(rep.masses[2].abs() <= gamma);
        let strict = decon_clean(&z, &m, 0.04, 0.1);
        assert!(rep.removed.iter().all(|i| strict.removed.contains(i)));
    }

    #[test]
    fn chosen_params_meet_conditions() {
        let p = choose_decon_params(1.0 / (2.0 * PI), 1, 1.0, 2).unwrap();
        assert!(p.epsilon < crate::cleaning::REACH_FACTOR / 5.0);
        assert!(p.omega_lower >= 2.0 * p.gamma);
        assert!(p.gamma <= gaussian_tail(p.epsilon / 4.0, 2, p.epsilon));
        let m = resample_count(1000, p.omega_lower, 2.0 * PI, 1, 1.0, p.epsilon, 1e-3, 2.0);
        assert!(m >= 2000);
    }

    #[test]
    fn convolution_does_not_increase_tv() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut rand_prob = |len: usize| {
            let v: Vec<f64> = (0..len).map(|_| rng.gen::<f64>()).collect();
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect::<Vec<_>>()
        };
        for _ in 0..50 {
            let (p, q, phi) = (rand_prob(40), rand_prob(40), rand_prob(9));
            let before = discrete_tv(&p, &q);
            let after = discrete_tv(&discrete_convolve(&p, &phi), &discrete_convolve(&q, &phi));
            assert!(after <= before + 1e-12);
        }
        assert_eq!(discrete_tv(&[1.0, 0.0], &[0.0, 1.0]), 1.0);
    }

    #[test]
    fn record_round_trip() {
        let pair =
            build_kernel_pair(&NoiseDensity::Gaussian { sigma: 0.003 }, 2, 0.04, None).unwrap();
        let text = toml::to_string(&pair.record()).unwrap();
        let back = KernelPair::from_record(&toml::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.record(), pair.record());
    }
}
