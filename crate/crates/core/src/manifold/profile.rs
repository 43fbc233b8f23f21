//! Half-plane profiles of the two lower-bound manifolds.
//!
//! Both are described by a curve in the `(rho, z)` half-plane, `rho >= 0`.
//! For `d = 1` the curve is mirrored across `rho = 0` to give a planar closed
//! curve; for `d = 2` it is revolved about the `z` axis. The sheets sit at
//! `z = +-tau`, and every joint is a semicircle of radius `tau`, so the
//! condition number is exactly `tau`.

use std::f64::consts::{FRAC_PI_2, PI};

/// Which part of the pair a piece belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// Shared by both manifolds.
    Common,
    /// Present only in the joined balls: the discs that are holes in the annuli.
    OnlyFirst,
    /// Present only in the joined annuli: the inner rim.
    OnlySecond,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// Horizontal segment at height `z` from `rho0` to `rho1`.
    Segment { z: f64, rho0: f64, rho1: f64 },
    /// Arc of radius `r` centered at `(rho_c, 0)`, angles `t0..t1` measured
    /// from the `+rho` direction.
    Arc {
        rho_c: f64,
        r: f64,
        t0: f64,
        t1: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub shape: Shape,
    pub region: Region,
}

/// Profile of the joined balls (`first = true`) or joined annuli.
pub fn pair_profile(first: bool, tau: f64, extent: f64) -> Vec<Piece> {
    let outer = extent - tau;
    let inner = 4.0 * tau;
    let mut pieces = Vec::new();
    for z in [tau, -tau] {
        pieces.push(Piece {
            shape: Shape::Segment {
                z,
                rho0: inner,
                rho1: outer,
            },
            region: Region::Common,
        });
        if first {
            pieces.push(Piece {
                shape: Shape::Segment {
                    z,
                    rho0: 0.0,
                    rho1: inner,
                },
                region: Region::OnlyFirst,
            });
        }
    }
    pieces.push(Piece {
        shape: Shape::Arc {
            rho_c: outer,
            r: tau,
            t0: -FRAC_PI_2,
            t1: FRAC_PI_2,
        },
        region: Region::Common,
    });
    if !first {
        pieces.push(Piece {
            shape: Shape::Arc {
                rho_c: inner,
                r: tau,
                t0: FRAC_PI_2,
                t1: 3.0 * FRAC_PI_2,
            },
            region: Region::OnlySecond,
        });
    }
    pieces
}

impl Shape {
    /// Point at parameter `s` in `[0, 1]`.
    pub fn at(&self, s: f64) -> (f64, f64) {
        match *self {
            Shape::Segment { z, rho0, rho1 } => (rho0 + s * (rho1 - rho0), z),
            Shape::Arc { rho_c, r, t0, t1 } => {
                let t = t0 + s * (t1 - t0);
                (rho_c + r * t.cos(), r * t.sin())
            }
        }
    }

    pub fn length(&self) -> f64 {
        match *self {
            Shape::Segment { rho0, rho1, .. } => rho1 - rho0,
            Shape::Arc { r, t0, t1, .. } => r * (t1 - t0),
        }
    }

    /// Volume of the piece once mirrored (`d = 1`) or revolved (`d = 2`).
    ///
    /// Revolved arcs are integrated numerically (composite Simpson) rather
    /// than through a closed form.
    pub fn volume(&self, d: usize) -> f64 {
        match d {
            1 => 2.0 * self.length(),
            2 => match *self {
                Shape::Segment { rho0, rho1, .. } => PI * (rho1 * rho1 - rho0 * rho0),
                Shape::Arc { .. } => {
                    let len = self.length();
                    simpson(|s| 2.0 * PI * self.at(s).0 * len, 0.0, 1.0, 2048)
                }
            },
            _ => unreachable!("pair profiles exist for d = 1, 2"),
        }
    }

    /// Euclidean distance from `(rho, z)` to the piece.
    pub fn distance(&self, rho: f64, z: f64) -> f64 {
        match *self {
            Shape::Segment { z: zs, rho0, rho1 } => {
                let dr = if rho < rho0 {
                    rho0 - rho
                } else if rho > rho1 {
                    rho - rho1
                } else {
                    0.0
                };
                dr.hypot(z - zs)
            }
            Shape::Arc { rho_c, r, t0, t1 } => {
                let (dx, dz) = (rho - rho_c, z);
                let mut t = dz.atan2(dx);
                // bring the angle into [t0, t0 + 2pi)
                while t < t0 {
                    t += 2.0 * PI;
                }
                while t >= t0 + 2.0 * PI {
                    t -= 2.0 * PI;
                }
                if t <= t1 {
                    (dx.hypot(dz) - r).abs()
                } else {
                    let (a, b) = (self.at(0.0), self.at(1.0));
                    (rho - a.0).hypot(z - a.1).min((rho - b.0).hypot(z - b.1))
                }
            }
        }
    }
}

/// Composite Simpson rule with `m` (even) panels.
pub(crate) fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let m = m + m % 2;
    let h = (b - a) / m as f64;
    let mut acc = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Distance from `(rho, z)` to a whole profile.
pub fn profile_distance(pieces: &[Piece], rho: f64, z: f64) -> f64 {
    pieces
        .iter()
        .map(|p| p.shape.distance(rho, z))
        .fold(f64::INFINITY, f64::min)
}

/// The piece nearest to `(rho, z)`.
pub fn nearest_piece(pieces: &[Piece], rho: f64, z: f64) -> &Piece {
    pieces
        .iter()
        .min_by(|a, b| {
            a.shape
                .distance(rho, z)
                .total_cmp(&b.shape.distance(rho, z))
        })
        .expect("profiles are nonempty")
}

/// Total volume of the pieces in `region`.
pub fn region_volume(pieces: &[Piece], d: usize, region: Region) -> f64 {
    pieces
        .iter()
        .filter(|p| p.region == region)
        .map(|p| p.shape.volume(d))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hole_volume_matches_ball_formula() {
        let tau = 0.05;
        for d in [1, 2] {
            let p = pair_profile(true, tau, 1.0);
            let w1 = region_volume(&p, d, Region::OnlyFirst);
            let expected = 2.0 * crate::geometry::unit_ball_volume(d) * (4.0 * tau).powi(d as i32);
            assert!((w1 - expected).abs() < 1e-12 * expected.max(1.0), "d={d}");
        }
    }

    #[test]
    fn inner_rim_volume() {
        let tau = 0.05;
        let p = pair_profile(false, tau, 1.0);
        assert!((region_volume(&p, 1, Region::OnlySecond) - 2.0 * PI * tau).abs() < 1e-12);
        // Pappus: semicircle arc of length pi*tau, centroid 2tau/pi inward of 4tau
        let pappus = 2.0 * PI * (4.0 * tau - 2.0 * tau / PI) * PI * tau;
        assert!((region_volume(&p, 2, Region::OnlySecond) - pappus).abs() < 1e-9);
    }

    #[test]
    fn arc_distance() {
        let s = Shape::Arc {
            rho_c: 1.0,
            r: 0.1,
            t0: -FRAC_PI_2,
            t1: FRAC_PI_2,
        };
        assert!((s.distance(1.3, 0.0) - 0.2).abs() < 1e-15);
        // behind the arc: nearest is an endpoint
        assert!((s.distance(0.5, 0.0) - (0.5f64.hypot(0.1))).abs() < 1e-15);
    }
}
