//! Degree-threshold denoising and the parameter choices that make it provably
//! separate near-manifold points from far ones.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{neighbor_degrees, unit_ball_volume, PointCloud};

/// `sqrt(9) - sqrt(8)`, the reach fraction that recurs in every radius bound.
pub const REACH_FACTOR: f64 = 3.0 - 2.828_427_124_746_190_1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CleanParams {
    /// Neighbor-graph radius.
    pub radius: f64,
    /// Degree fraction; a vertex survives only if its degree exceeds
    /// `(n - 1) * threshold`.
    pub threshold: f64,
}

impl CleanParams {
    pub fn new(radius: f64, threshold: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::invalid(format!(
                "clean radius must be positive, got {radius}"
            )));
        }
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::invalid(format!(
                "clean threshold must lie in [0, 1], got {threshold}"
            )));
        }
        Ok(CleanParams { radius, threshold })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CleanReport {
    pub kept: Vec<usize>,
    pub removed: Vec<usize>,
    pub degrees: Vec<usize>,
}

/// Removes every vertex whose degree in the `radius` graph is at most
/// `(n - 1) * threshold`.
pub fn clean(cloud: &PointCloud, params: &CleanParams) -> Result<CleanReport> {
    if cloud.is_empty() {
        return Err(Error::invalid("cannot clean an empty cloud"));
    }
    let degrees = neighbor_degrees(cloud, params.radius);
    Ok(split_by_degree(degrees, params.threshold))
}

/// The thresholding step on precomputed degrees.
pub fn split_by_degree(degrees: Vec<usize>, threshold: f64) -> CleanReport {
    let n = degrees.len();
    let cut = n.saturating_sub(1) as f64 * threshold;
    let (mut kept, mut removed) = (Vec::new(), Vec::new());
    for (i, &deg) in degrees.iter().enumerate() {
        if deg as f64 <= cut {
            removed.push(i);
        } else {
            kept.push(i);
        }
    }
    CleanReport {
        kept,
        removed,
        degrees,
    }
}

fn check_dims(d: usize, ambient: usize) -> Result<()> {
    if d == 0 || d > ambient {
        return Err(Error::invalid(format!(
            "need 0 < d <= D, got d = {d}, D = {ambient}"
        )));
    }
    Ok(())
}

/// `cos(asin(x))^d`.
fn cos_asin_pow(x: f64, d: usize) -> f64 {
    (1.0 - x * x).max(0.0).sqrt().powi(d as i32)
}

/// Ball masses bounding near (`alpha`) and far (`beta`) points in the clutter
/// model with graph radius `s = 2r` and a unit box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClutterBounds {
    pub alpha: f64,
    pub beta: f64,
    /// Manifold part of `alpha`: `pi a v_d r^d cos^d(theta)`.
    pub zeta: f64,
    pub theta: f64,
}

pub fn clutter_bounds(
    pi: f64,
    a: f64,
    r: f64,
    tau: f64,
    d: usize,
    ambient: usize,
) -> Result<ClutterBounds> {
    check_dims(d, ambient)?;
    let bound = REACH_FACTOR * tau / 2.0;
    if !(r > 0.0 && r < bound) {
        return Err(Error::precondition(
            "r < (√9−√8)τ/2",
            format!("r = {r}, bound = {bound}"),
        ));
    }
    if !(pi > 0.0 && pi <= 1.0) {
        return Err(Error::invalid(format!(
            "clutter weight must lie in (0, 1], got {pi}"
        )));
    }
    if !(a > 0.0) {
        return Err(Error::invalid(format!(
            "density floor must be positive, got {a}"
        )));
    }
    let theta = (r / (2.0 * tau)).asin();
    let s = 2.0 * r;
    let beta = unit_ball_volume(ambient) * s.powi(ambient as i32) * (1.0 - pi);
    let zeta = pi * a * unit_ball_volume(d) * r.powi(d as i32) * cos_asin_pow(r / (2.0 * tau), d);
    Ok(ClutterBounds {
        alpha: beta + zeta,
        beta,
        zeta,
        theta,
    })
}

/// Threshold `beta + zeta / 2` at radius `2r`.
pub fn clutter_threshold(
    pi: f64,
    a: f64,
    r: f64,
    tau: f64,
    d: usize,
    ambient: usize,
) -> Result<CleanParams> {
    let b = clutter_bounds(pi, a, r, tau, d, ambient)?;
    CleanParams::new(2.0 * r, (b.beta + b.zeta / 2.0).min(1.0))
}

/// The same threshold written as the midpoint `(alpha + beta) / 2`.
pub fn clutter_threshold_midpoint(
    pi: f64,
    a: f64,
    r: f64,
    tau: f64,
    d: usize,
    ambient: usize,
) -> Result<CleanParams> {
    let b = clutter_bounds(pi, a, r, tau, d, ambient)?;
    CleanParams::new(2.0 * r, ((b.alpha + b.beta) / 2.0).min(1.0))
}

/// Sample sizes `(N1, N2)` above which cleaning plus the union of balls
/// succeeds with probability `1 - delta` in the clutter model.
pub fn clutter_sample_sizes(
    pi: f64,
    a: f64,
    r: f64,
    tau: f64,
    d: usize,
    ambient: usize,
    vol_m: f64,
    delta: f64,
) -> Result<(f64, f64)> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    let b = clutter_bounds(pi, a, r, tau, d, ambient)?;
    let kappa = (1.0 + 200.0 / (3.0 * b.zeta) * (2.0 / delta).ln()).max(4.0);
    let n1 = 4.0 * kappa * kappa.ln();
    let covering =
        vol_m / (cos_asin_pow(r / (2.0 * tau), d) * unit_ball_volume(d) * r.powi(d as i32));
    let n2 = (covering.ln() + (2.0 / delta).ln()) / b.zeta;
    Ok((n1, n2))
}

/// Parameters for cleaning under additive Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianCleanParams {
    pub clean: CleanParams,
    /// Base scale; the graph radius is `4r` and the far region starts at `8r`.
    pub r: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Probability that the noise exceeds `2r` in norm.
    pub gamma: f64,
    /// Probability that the noise exceeds `4r` in norm.
    pub t_const: f64,
    /// True when no `r` in `(sqrt(D) sigma, (√9−√8)τ/8]` exists and `r` was
    /// set to `1.25 sqrt(D) sigma` instead.
    pub r_relaxed: bool,
}

/// Chooses `r` and the `(alpha + beta) / 2` threshold at radius `4r`.
pub fn gaussian_clean_params(
    sigma: f64,
    tau: f64,
    a: f64,
    d: usize,
    ambient: usize,
) -> Result<GaussianCleanParams> {
    check_dims(d, ambient)?;
    let root_d_sigma = (ambient as f64).sqrt() * sigma;
    if !(8.0 * root_d_sigma < tau) {
        return Err(Error::precondition(
            "8√Dσ < τ",
            format!("8·√{ambient}·{sigma} = {} ≥ τ = {tau}", 8.0 * root_d_sigma),
        ));
    }
    if !(a > 0.0) {
        return Err(Error::invalid(format!(
            "density floor must be positive, got {a}"
        )));
    }
    let upper = REACH_FACTOR * tau / 8.0;
    let (r, r_relaxed) = if upper > root_d_sigma {
        (upper, false)
    } else {
        (1.25 * root_d_sigma, true)
    };
    let half_dim = ambient as f64 / 2.0;
    let gamma = (4.0 * (-3.0f64).exp()).powf(half_dim);
    let t_const = (16.0 * (-15.0f64).exp()).powf(half_dim);
    let alpha = a
        * unit_ball_volume(d)
        * r.powi(d as i32)
        * cos_asin_pow(r / (2.0 * tau), d)
        * (1.0 - gamma);
    let beta = unit_ball_volume(ambient) * (8.0 * r).powi(ambient as i32) * t_const;
    if beta >= alpha / 2.0 {
        return Err(Error::precondition(
            "β < α/2",
            format!("α = {alpha:e}, β = {beta:e}"),
        ));
    }
    Ok(GaussianCleanParams {
        clean: CleanParams::new(4.0 * r, (alpha + beta) / 2.0)?,
        r,
        alpha,
        beta,
        gamma,
        t_const,
        r_relaxed,
    })
}

/// Smallest integer `n > 4 kappa ln kappa`, `kappa = max(1 + 200/(3 alpha)
/// ln(1/delta), 4)`: enough points for the cleaning step to keep every near
/// point and drop every far one with probability `1 - delta`.
pub fn bernstein_sample_size(alpha: f64, delta: f64) -> Result<u64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::invalid(format!(
            "delta must lie in (0, 1/2), got {delta}"
        )));
    }
    let kappa = (1.0 + 200.0 / (3.0 * alpha) * (1.0 / delta).ln()).max(4.0);
    Ok((4.0 * kappa * kappa.ln()).floor() as u64 + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::dist;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn brute_degrees(c: &PointCloud, r: f64) -> Vec<usize> {
        (0..c.len())
            .map(|i| {
                (0..c.len())
                    .filter(|&j| j != i && dist(c.point(i), c.point(j)) <= r)
                    .count()
            })
            .collect()
    }

    fn random_cloud(n: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PointCloud::from_flat(2, (0..2 * n).map(|_| rng.gen()).collect()).unwrap()
    }

    #[test]
    fn triangle_all_kept() {
        let c = PointCloud::from_rows(2, &[[0.0, 0.0], [0.1, 0.0], [0.0, 0.1]]).unwrap();
        let rep = clean(&c, &CleanParams::new(0.2, 0.5).unwrap()).unwrap();
        assert_eq!(rep.kept, vec![0, 1, 2]);
        assert_eq!(rep.degrees, vec![2, 2, 2]);
    }

    #[test]
    fn isolated_point_removed() {
        let mut rows: Vec<[f64; 2]> = (0..20).map(|i| [0.5 + 0.001 * i as f64, 0.5]).collect();
        rows.push([0.0, 0.0]);
        let c = PointCloud::from_rows(2, &rows).unwrap();
        let rep = clean(&c, &CleanParams::new(0.1, 0.01).unwrap()).unwrap();
        assert_eq!(rep.removed, vec![20]);
    }

    #[test]
    fn matches_brute_force() {
        let c = random_cloud(200, 1);
        let rep = clean(&c, &CleanParams::new(0.15, 0.1).unwrap()).unwrap();
        let deg = brute_degrees(&c, 0.15);
        assert_eq!(rep.degrees, deg);
        let kept: Vec<usize> = (0..200).filter(|&i| deg[i] as f64 > 199.0 * 0.1).collect();
        assert_eq!(rep.kept, kept);
    }

    #[test]
    fn extreme_thresholds() {
        let c = random_cloud(100, 2);
        let rep = clean(&c, &CleanParams::new(0.05, 0.0).unwrap()).unwrap();
        assert!(rep.removed.iter().all(|&i| rep.degrees[i] == 0));
        assert!(rep.kept.iter().all(|&i| rep.degrees[i] > 0));
        let rep = clean(&c, &CleanParams::new(0.05, 1.0).unwrap()).unwrap();
        assert!(rep.kept.is_empty());
    }

    #[test]
    fn clutter_threshold_forms_agree() {
        let tau = 0.1;
        let r = REACH_FACTOR * tau / 4.0;
        let a = 1.0 / (2.0 * PI * tau);
        let t = clutter_threshold(0.8, a, r, tau, 1, 2).unwrap();
        let m = clutter_threshold_midpoint(0.8, a, r, tau, 1, 2).unwrap();
        assert!((t.threshold - m.threshold).abs() < 1e-15);
        assert_eq!(t.radius, 2.0 * r);
        // independent evaluation with v_1 = 2, v_2 = pi
        let theta = (r / (2.0 * tau)).asin();
        let expected = PI * (2.0 * r).powi(2) * 0.2 + 0.8 * a * 2.0 * r * theta.cos() / 2.0;
        assert!((t.threshold - expected).abs() < 1e-15);
        let b = clutter_bounds(0.8, a, r, tau, 1, 2).unwrap();
        assert!(b.beta < t.threshold && t.threshold < b.alpha);
    }

    #[test]
    fn clutter_noiseless_limit() {
        let (tau, a) = (0.1, 1.0);
        let r = REACH_FACTOR * tau / 4.0;
        let t = clutter_threshold(1.0, a, r, tau, 1, 2).unwrap();
        let theta = (r / (2.0 * tau)).asin();
        assert!((t.threshold - a * 2.0 * r * theta.cos() / 2.0).abs() < 1e-15);
        let err = clutter_threshold(1.0, a, REACH_FACTOR * tau, tau, 1, 2).unwrap_err();
        assert!(err.to_string().contains("(√9−√8)τ/2"));
    }

    #[test]
    fn gaussian_constants() {
        let p = gaussian_clean_params(0.001, 1.0, 0.1, 1, 2).unwrap();
        assert!((p.gamma - 0.199_148_273_1).abs() < 1e-9);
        assert!((p.t_const - 4.894_437e-6).abs() < 1e-11);
        assert!(!p.r_relaxed);
        assert_eq!(p.clean.radius, 4.0 * p.r);
        // alpha does not involve sigma
        let q = gaussian_clean_params(0.0001, 1.0, 0.1, 1, 2).unwrap();
        assert_eq!(p.alpha, q.alpha);
        let err = gaussian_clean_params(0.1, 1.0, 0.1, 1, 2)
            .unwrap_err()
            .to_string();
        assert!(err.contains("8√Dσ < τ"), "{err}");
    }

    #[test]
    fn gaussian_ten_dimensions_feasible() {
        for tau in [0.5, 1.0, 2.0] {
            for a in [0.05, 0.2, 1.0] {
                let p = gaussian_clean_params(1e-4, tau, a, 1, 10).unwrap();
                assert!(p.beta / p.alpha < 0.5);
            }
        }
    }

    #[test]
    fn bernstein_examples() {
        assert_eq!(bernstein_sample_size(1e3, 0.25).unwrap(), 23);
        let kappa = 1.0 + 20000.0 / 3.0 * 10f64.ln();
        assert!((kappa - 15_351.57).abs() < 0.01);
        assert_eq!(
            bernstein_sample_size(0.01, 0.1).unwrap(),
            (4.0 * kappa * kappa.ln()).floor() as u64 + 1
        );
        assert!(bernstein_sample_size(0.1, 0.5).is_err());
    }

    proptest! {
        #[test]
        fn bernstein_monotone(a1 in 1e-3f64..10.0, a2 in 1e-3f64..10.0, d1 in 1e-4f64..0.49, d2 in 1e-4f64..0.49) {
            let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
            prop_assert!(bernstein_sample_size(hi, d1).unwrap() <= bernstein_sample_size(lo, d1).unwrap());
            let (small, big) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            prop_assert!(bernstein_sample_size(a1, small).unwrap() >= bernstein_sample_size(a1, big).unwrap());
        }

        #[test]
        fn threshold_monotone(seed in 0u64..10_000, t1 in 0.0f64..1.0, t2 in 0.0f64..1.0, r in 0.01f64..0.3) {
            let c = random_cloud(80, seed);
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let a = clean(&c, &CleanParams::new(r, lo).unwrap()).unwrap();
            let b = clean(&c, &CleanParams::new(r, hi).unwrap()).unwrap();
            prop_assert!(b.kept.iter().all(|i| a.kept.contains(i)));
            prop_assert_eq!(a.kept.len() + a.removed.len(), 80);
        }
    }
}
