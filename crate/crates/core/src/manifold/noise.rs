//! Noise models applied on top of manifold samples.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{sample_manifold, Family, ManifoldSpec};
use crate::error::{Error, Result};
use crate::geometry::{norm, PointCloud};
use crate::rng::{stream_rng, Stream};

/// A product-form noise distribution on `R^D` with i.i.d. coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseDensity {
    PointMass,
    Gaussian {
        sigma: f64,
    },
    /// Uniform on the cube `[-half_width, half_width]^D`.
    Uniform {
        half_width: f64,
    },
    Laplace {
        scale: f64,
    },
}

impl NoiseDensity {
    pub fn validate(&self) -> Result<()> {
        let (name, v) = match *self {
            NoiseDensity::PointMass => return Ok(()),
            NoiseDensity::Gaussian { sigma } => ("sigma", sigma),
            NoiseDensity::Uniform { half_width } => ("half_width", half_width),
            NoiseDensity::Laplace { scale } => ("scale", scale),
        };
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::invalid(format!(
                "noise {name} must be positive, got {v}"
            )));
        }
        Ok(())
    }

    /// Characteristic function of one coordinate.
    pub fn char_fn_1d(&self, t: f64) -> f64 {
        match *self {
            NoiseDensity::PointMass => 1.0,
            NoiseDensity::Gaussian { sigma } => (-0.5 * sigma * sigma * t * t).exp(),
            NoiseDensity::Uniform { half_width } => {
                let x = half_width * t;
                if x.abs() < 1e-8 {
                    1.0 - x * x / 6.0
                } else {
                    x.sin() / x
                }
            }
            NoiseDensity::Laplace { scale } => 1.0 / (1.0 + scale * scale * t * t),
        }
    }

    /// Characteristic function on `R^D` (a product over coordinates).
    pub fn char_fn(&self, t: &[f64]) -> f64 {
        t.iter().map(|&s| self.char_fn_1d(s)).product()
    }

    /// Density of one coordinate; `None` for the point mass.
    pub fn pdf_1d(&self, x: f64) -> Option<f64> {
        Some(match *self {
            NoiseDensity::PointMass => return None,
            NoiseDensity::Gaussian { sigma } => {
                (-0.5 * (x / sigma).powi(2)).exp() / (sigma * (2.0 * PI).sqrt())
            }
            NoiseDensity::Uniform { half_width } => {
                if x.abs() <= half_width {
                    0.5 / half_width
                } else {
                    0.0
                }
            }
            NoiseDensity::Laplace { scale } => (-x.abs() / scale).exp() / (2.0 * scale),
        })
    }

    pub fn sample_1d<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseDensity::PointMass => 0.0,
            NoiseDensity::Gaussian { sigma } => sigma * rng.sample::<f64, _>(StandardNormal),
            NoiseDensity::Uniform { half_width } => half_width * (2.0 * rng.gen::<f64>() - 1.0),
            NoiseDensity::Laplace { scale } => {
                let e: f64 = rng.sample(Exp1);
                if rng.gen::<bool>() {
                    scale * e
                } else {
                    -scale * e
                }
            }
        }
    }
}

/// Which corruption is applied to the clean manifold draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    #[serde(alias = "none")]
    Noiseless,
    /// With probability `1 - pi` a point is replaced by a uniform draw from
    /// the unit cube.
    Clutter { pi: f64 },
    /// Uniform displacement within a ball of radius `sigma`. With
    /// `exact_tube` the points are instead uniform on the tube itself.
    Tubular {
        sigma: f64,
        #[serde(default)]
        exact_tube: bool,
    },
    /// Additive isotropic Gaussian noise.
    Gaussian { sigma: f64 },
    /// Additive noise from a known distribution.
    AdditiveKnown { phi: NoiseDensity },
}

impl NoiseSpec {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseSpec::Noiseless => "noiseless",
            NoiseSpec::Clutter { .. } => "clutter",
            NoiseSpec::Tubular { .. } => "tubular",
            NoiseSpec::Gaussian { .. } => "gaussian",
            NoiseSpec::AdditiveKnown { .. } => "additive_known",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseSpec::Noiseless => Ok(()),
            NoiseSpec::Clutter { pi } => {
                if (0.0..=1.0).contains(&pi) {
                    Ok(())
                } else {
                    Err(Error::invalid(format!(
                        "clutter weight pi must lie in [0, 1], got {pi}"
                    )))
                }
            }
            NoiseSpec::Tubular { sigma, .. } | NoiseSpec::Gaussian { sigma } => {
                if sigma >= 0.0 && sigma.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid(format!(
                        "sigma must be nonnegative, got {sigma}"
                    )))
                }
            }
            NoiseSpec::AdditiveKnown { phi } => phi.validate(),
        }
    }
}

/// A noisy sample together with what produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub cloud: PointCloud,
    /// `false` for clutter points, which carry no manifold information.
    pub from_manifold: Vec<bool>,
}

/// Draws `n` manifold points and corrupts them. Manifold and noise draws use
/// separate streams of `seed`.
pub fn sample(manifold: &ManifoldSpec, noise: &NoiseSpec, n: usize, seed: u64) -> Result<Sample> {
    noise.validate()?;
    if let NoiseSpec::Tubular {
        sigma,
        exact_tube: true,
    } = *noise
    {
        manifold.validate()?;
        return exact_tube_sample(manifold, sigma, n, seed);
    }
    let clean = sample_manifold(manifold, n, seed)?;
    apply_noise(&clean, noise, manifold, seed)
}

/// Corrupts a clean sample. The clutter box is `[0, 1]^D`.
pub fn apply_noise(
    clean: &PointCloud,
    noise: &NoiseSpec,
    manifold: &ManifoldSpec,
    seed: u64,
) -> Result<Sample> {
    noise.validate()?;
    if clean.is_empty() {
        return Err(Error::invalid("cannot add noise to an empty sample"));
    }
    let dim = clean.dim();
    let mut rng = stream_rng(seed, Stream::Noise);
    let mut out = clean.clone();
    let mut from_manifold = vec![true; clean.len()];
    match *noise {
        NoiseSpec::Noiseless => {}
        NoiseSpec::Clutter { pi } => {
            for i in 0..clean.len() {
                if rng.gen::<f64>() >= pi {
                    from_manifold[i] = false;
                    for x in out.point_mut(i) {
                        *x = rng.gen::<f64>();
                    }
                }
            }
        }
        NoiseSpec::Tubular { sigma, exact_tube } => {
            if exact_tube {
                return exact_tube_sample(manifold, sigma, clean.len(), seed);
            }
            // the displaced point is within sigma of its source, so it always
            // lies in the tube and no rejection is needed
            let mut step = vec![0.0; dim];
            for i in 0..clean.len() {
                uniform_in_ball(&mut rng, sigma, &mut step);
                for (x, s) in out.point_mut(i).iter_mut().zip(&step) {
                    *x += s;
                }
            }
        }
        NoiseSpec::Gaussian { sigma } => {
            let phi = NoiseDensity::Gaussian { sigma };
            add_product_noise(&mut out, &phi, &mut rng, sigma == 0.0);
        }
        NoiseSpec::AdditiveKnown { phi } => {
            add_product_noise(&mut out, &phi, &mut rng, phi == NoiseDensity::PointMass);
        }
    }
    Ok(Sample {
        cloud: out,
        from_manifold,
    })
}

fn add_product_noise<R: Rng>(
    cloud: &mut PointCloud,
    phi: &NoiseDensity,
    rng: &mut R,
    trivial: bool,
) {
    if trivial {
        return;
    }
    for i in 0..cloud.len() {
        for x in cloud.point_mut(i) {
            *x += phi.sample_1d(rng);
        }
    }
}

/// Uniform draw from the centered ball of radius `r` in `R^len`.
fn uniform_in_ball<R: Rng>(rng: &mut R, r: f64, out: &mut [f64]) {
    loop {
        for v in out.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let n = norm(out);
        if n > 1e-300 {
            let scale = r * rng.gen::<f64>().powf(1.0 / out.len() as f64) / n;
            for v in out.iter_mut() {
                *v *= scale;
            }
            return;
        }
    }
}

/// Axis-aligned box containing the manifold.
fn manifold_box(m: &ManifoldSpec) -> (Vec<f64>, Vec<f64>) {
    let c = m.center();
    let tau = m.tau;
    let mut half = vec![0.0; m.ambient_dim];
    match m.family {
        Family::Circle => {
            half[0] = tau;
            half[1] = tau;
        }
        Family::Sphere => half[..=m.intrinsic_dim].iter_mut().for_each(|h| *h = tau),
        Family::Torus => {
            half[0] = 3.0 * tau;
            half[1] = 3.0 * tau;
            half[2] = tau;
        }
        Family::M1 | Family::M2 => {
            let d = m.intrinsic_dim;
            half[..d].iter_mut().for_each(|h| *h = m.extent);
            half[d] = tau;
        }
    }
    let lo = c.iter().zip(&half).map(|(c, h)| c - h).collect();
    let hi = c.iter().zip(&half).map(|(c, h)| c + h).collect();
    (lo, hi)
}

/// Uniform on `tube_sigma(M)` by rejection from the enclosing box.
fn exact_tube_sample(m: &ManifoldSpec, sigma: f64, n: usize, seed: u64) -> Result<Sample> {
    if n == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    let (lo, hi) = manifold_box(m);
    let mut rng = stream_rng(seed, Stream::Noise);
    let mut cloud = PointCloud::new(m.ambient_dim)?;
    let mut x = vec![0.0; m.ambient_dim];
    while cloud.len() < n {
        for k in 0..x.len() {
            x[k] = lo[k] - sigma + rng.gen::<f64>() * (hi[k] - lo[k] + 2.0 * sigma);
        }
        if m.distance(&x) <= sigma {
            cloud.push(&x)?;
        }
    }
    Ok(Sample {
        cloud,
        from_manifold: vec![true; n],
    })
}
