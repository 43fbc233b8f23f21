//! Smallest enclosing ball (move-to-front Welzl).
//!
//! The Čech membership test reduces to "does the smallest ball enclosing the
//! vertices have radius <= eps", so this runs in the innermost loop of complex
//! construction. One, two and three points take closed-form shortcuts.

use super::{dist_sq, Ball};
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Smallest ball containing every point of `pts`.
pub fn min_enclosing_ball(pts: &[&[f64]]) -> Result<Ball> {
    let first = pts
        .first()
        .ok_or_else(|| Error::invalid("minimum enclosing ball of an empty point set"))?;
    let dim = first.len();
    if pts.iter().any(|p| p.len() != dim) {
        return Err(Error::invalid("points of mixed dimension"));
    }
    match pts.len() {
        1 => Ok(Ball {
            center: first.to_vec(),
            radius: 0.0,
        }),
        2 => Ok(Ball {
            center: first
                .iter()
                .zip(pts[1])
                .map(|(a, b)| 0.5 * (a + b))
                .collect(),
            radius: 0.5 * dist_sq(first, pts[1]).sqrt(),
        }),
        _ => {
            // fixed shuffle: expected linear time without giving up determinism
            let mut order: Vec<&[f64]> = pts.to_vec();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(0x6d65_625f));
            let mut support: Vec<&[f64]> = Vec::with_capacity(dim + 1);
            let end = order.len();
            let ball = move_to_front(&mut order, end, &mut support, dim);
            Ok(Ball {
                radius: ball.radius_sq.max(0.0).sqrt(),
                center: ball.center,
            })
        }
    }
}

/// Squared radius of the smallest enclosing ball; the hot path used by the
/// complex builders.
pub fn min_enclosing_radius_sq(pts: &[&[f64]]) -> f64 {
    match pts.len() {
        0 => 0.0,
        1 => 0.0,
        2 => 0.25 * dist_sq(pts[0], pts[1]),
        3 => triangle_radius_sq(pts[0], pts[1], pts[2]),
        _ => {
            let b = min_enclosing_ball(pts).expect("nonempty, same dimension");
            b.radius * b.radius
        }
    }
}

fn triangle_radius_sq(p: &[f64], q: &[f64], r: &[f64]) -> f64 {
    let a = dist_sq(q, r);
    let b = dist_sq(p, r);
    let c = dist_sq(p, q);
    let longest = a.max(b).max(c);
    // right or obtuse: the longest side is a diameter
    if longest >= a + b + c - longest {
        return 0.25 * longest;
    }
    let sixteen_area_sq = 2.0 * (a * b + b * c + c * a) - (a * a + b * b + c * c);
    if sixteen_area_sq <= 0.0 {
        return 0.25 * longest;
    }
    a * b * c / sixteen_area_sq
}

struct RawBall {
    center: Vec<f64>,
    radius_sq: f64,
}

impl RawBall {
    fn contains(&self, p: &[f64]) -> bool {
        let r = self.radius_sq.max(0.0).sqrt();
        let slack = 1e-12 * r.max(1.0);
        dist_sq(&self.center, p) <= (r + slack) * (r + slack)
    }
}

fn move_to_front<'a>(
    pts: &mut [&'a [f64]],
    end: usize,
    support: &mut Vec<&'a [f64]>,
    dim: usize,
) -> RawBall {
    let mut ball = circumball(support, dim);
    if support.len() == dim + 1 {
        return ball;
    }
    for i in 0..end {
        if !ball.contains(pts[i]) {
            support.push(pts[i]);
            ball = move_to_front(pts, i, support, dim);
            support.pop();
            pts[..=i].rotate_right(1);
        }
    }
    ball
}

/// Ball through all support points, centered in their affine hull.
fn circumball(support: &[&[f64]], dim: usize) -> RawBall {
    match support.len() {
        0 => RawBall {
            center: vec![0.0; dim],
            radius_sq: -1.0,
        },
        1 => RawBall {
            center: support[0].to_vec(),
            radius_sq: 0.0,
        },
        _ => circumball_affine(support).unwrap_or_else(|| fallback_ball(support)),
    }
}

#[cfg(test)]
fn circumball_affine_pub(support: &[&[f64]]) -> Option<(Vec<f64>, f64)> {
    circumball_affine(support).map(|b| (b.center, b.radius_sq))
}

/// Solves the Gram system for the circumcenter. `None` when the support is
/// affinely dependent.
fn circumball_affine(support: &[&[f64]]) -> Option<RawBall> {
    let p0 = support[0];
    let k = support.len() - 1;
    let diffs: Vec<Vec<f64>> = support[1..]
        .iter()
        .map(|p| p.iter().zip(p0).map(|(a, b)| a - b).collect())
        .collect();
    let dot = |u: &[f64], v: &[f64]| -> f64 { u.iter().zip(v).map(|(a, b)| a * b).sum() };
    let mut m = vec![vec![0.0; k + 1]; k];
    let mut scale: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            m[i][j] = 2.0 * dot(&diffs[i], &diffs[j]);
        }
        m[i][k] = dot(&diffs[i], &diffs[i]);
        scale = scale.max(m[i][i]);
    }
    // Gaussian elimination with partial pivoting
    for col in 0..k {
        let piv = (col..k).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() <= 1e-13 * scale.max(f64::MIN_POSITIVE) {
            return None;
        }
        m.swap(col, piv);
        for row in 0..k {
            if row != col {
                let f = m[row][col] / m[col][col];
                if f != 0.0 {
                    for c in col..=k {
                        m[row][c] -= f * m[col][c];
                    }
                }
            }
        }
    }
    let lambda: Vec<f64> = (0..k).map(|i| m[i][k] / m[i][i]).collect();
    let mut center = p0.to_vec();
    for (l, d) in lambda.iter().zip(&diffs) {
        for (c, x) in center.iter_mut().zip(d) {
            *c += l * x;
        }
    }
    let radius_sq = support
        .iter()
        .map(|p| dist_sq(&center, p))
        .fold(0.0, f64::max);
    Some(RawBall { center, radius_sq })
}

/// Degenerate support (numerically dependent points): smallest ball over all
/// sub-supports that still encloses every support point.
fn fallback_ball(support: &[&[f64]]) -> RawBall {
    let k = support.len();
    let mut best: Option<RawBall> = None;
    for mask in 1u32..(1 << k) {
        let sub: Vec<&[f64]> = (0..k)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| support[i])
            .collect();
        let cand = if sub.len() == 1 {
            Some(RawBall {
                center: sub[0].to_vec(),
                radius_sq: 0.0,
            })
        } else {
            circumball_affine(&sub)
        };
        if let Some(c) = cand {
            if support.iter().all(|p| c.contains(p))
                && best.as_ref().map_or(true, |b| c.radius_sq < b.radius_sq)
            {
                best = Some(c);
            }
        }
    }
    best.expect("some pair of support points spans an enclosing ball")
}
