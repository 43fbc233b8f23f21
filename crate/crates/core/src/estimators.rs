//! End-to-end homology estimators: optional cleaning, a union of balls at the
//! prescribed scale, its Čech complex, and Betti numbers.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cleaning::{self, CleanParams, REACH_FACTOR};
use crate::complexes::{cech_complex, delaunay_cech_complex, SimplicialComplex};
use crate::deconvolution::{self, DeconvolvedMeasure};
use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::homology::{betti_numbers, HomologyProfile};
use crate::manifold::{NoiseDensity, NoiseSpec};

/// Which complex realizes the union of balls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComplexKind {
    /// Delaunay–Čech for planar clouds with `top_dim = 2`, full Čech otherwise.
    #[default]
    Auto,
    Cech,
    DelaunayCech,
}

/// Explicit values that replace the derived ones.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    /// Base scale `r` of the clutter and Gaussian estimators.
    pub r: Option<f64>,
    pub clean_radius: Option<f64>,
    pub clean_threshold: Option<f64>,
    pub ball_radius: Option<f64>,
    pub top_dim: Option<usize>,
    pub epsilon: Option<f64>,
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSpec {
    pub noise: NoiseSpec,
    pub tau: f64,
    /// Lower bound on the sampling density over the manifold.
    pub a: f64,
    pub intrinsic_dim: usize,
    pub ambient_dim: usize,
    #[serde(default)]
    pub overrides: Overrides,
    #[serde(default)]
    pub complex: ComplexKind,
    /// `C2` in `m >= C2 n` for the deconvolution resample.
    #[serde(default = "default_resample_factor")]
    pub resample_factor: f64,
    /// Failure probability used in the resample-count bound.
    #[serde(default = "default_decon_delta")]
    pub decon_delta: f64,
}

fn default_resample_factor() -> f64 {
    2.0
}

fn default_decon_delta() -> f64 {
    1e-3
}

impl EstimatorSpec {
    pub fn new(noise: NoiseSpec, tau: f64, a: f64, d: usize, ambient: usize) -> Self {
        EstimatorSpec {
            noise,
            tau,
            a,
            intrinsic_dim: d,
            ambient_dim: ambient,
            overrides: Overrides::default(),
            complex: ComplexKind::Auto,
            resample_factor: default_resample_factor(),
            decon_delta: default_decon_delta(),
        }
    }

    pub fn with_overrides(mut self, overrides: Overrides) -> Self {
        self.overrides = overrides;
        self
    }

    fn top_dim(&self) -> usize {
        self.overrides.top_dim.unwrap_or(self.intrinsic_dim + 1)
    }

    /// Checks the estimator hypotheses and fixes every numeric parameter.
    pub fn resolve(&self, n: usize) -> Result<Plan> {
        self.noise.validate()?;
        let (tau, a, d, ambient) = (self.tau, self.a, self.intrinsic_dim, self.ambient_dim);
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::invalid(format!("tau must be positive, got {tau}")));
        }
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::invalid(format!(
                "density floor a must be positive, got {a}"
            )));
        }
        if d == 0 || d > ambient {
            return Err(Error::invalid(format!(
                "need 0 < d <= D, got d = {d}, D = {ambient}"
            )));
        }
        if self.top_dim() == 0 {
            return Err(Error::invalid("top_dim must be at least 1"));
        }
        let o = &self.overrides;
        let mut params = BTreeMap::new();
        let clean_override = |base: CleanParams| -> Result<CleanParams> {
            CleanParams::new(
                o.clean_radius.unwrap_or(base.radius),
                o.clean_threshold.unwrap_or(base.threshold),
            )
        };
        let stage = match self.noise {
            NoiseSpec::Noiseless => Stage::Direct,
            NoiseSpec::Clutter { pi } => {
                let r = o.r.unwrap_or(REACH_FACTOR * tau / 4.0);
                let c = clean_override(cleaning::clutter_threshold(pi, a, r, tau, d, ambient)?)?;
                params.insert("r".into(), r);
                Stage::Clean(c)
            }
            NoiseSpec::Tubular { sigma, .. } => {
                if !(sigma < tau / 24.0) {
                    return Err(Error::precondition(
                        "σ < τ/24",
                        format!("σ = {sigma}, τ = {tau}"),
                    ));
                }
                Stage::Direct
            }
            NoiseSpec::Gaussian { sigma } => {
                let g = cleaning::gaussian_clean_params(sigma, tau, a, d, ambient)?;
                params.insert("r".into(), g.r);
                params.insert("alpha".into(), g.alpha);
                params.insert("beta".into(), g.beta);
                params.insert("r_relaxed".into(), if g.r_relaxed { 1.0 } else { 0.0 });
                Stage::Clean(clean_override(g.clean)?)
            }
            NoiseSpec::AdditiveKnown { phi } => {
                let chosen = deconvolution::choose_decon_params(a, d, tau, ambient)?;
                let epsilon = o.epsilon.unwrap_or(chosen.epsilon);
                let bound = REACH_FACTOR * tau / 5.0;
                if !(epsilon > 0.0 && epsilon < bound) {
                    return Err(Error::precondition(
                        "ε < (√9−√8)τ/5",
                        format!("ε = {epsilon}, bound = {bound}"),
                    ));
                }
                let gamma = match o.gamma {
                    Some(g) => g,
                    None if o.epsilon.is_some() => {
                        let mut g = deconvolution::gaussian_tail(epsilon / 4.0, ambient, epsilon);
                        while deconvolution::omega_lower_bound(a, d, tau, epsilon, g) < 2.0 * g
                            && g > 1e-300
                        {
                            g *= 0.5;
                        }
                        g
                    }
                    None => chosen.gamma,
                };
                let omega = deconvolution::omega_lower_bound(a, d, tau, epsilon, gamma);
                if !(omega > 0.0) {
                    return Err(Error::precondition(
                        "ω ≥ 2γ",
                        format!("ω lower bound {omega:e} with γ = {gamma:e}"),
                    ));
                }
                // vol(M) <= 1/a because the density is at least a
                let m = deconvolution::resample_count(
                    n,
                    omega,
                    1.0 / a,
                    d,
                    tau,
                    epsilon,
                    self.decon_delta,
                    self.resample_factor,
                );
                params.insert("omega_lower".into(), omega);
                params.insert("resample_count".into(), m as f64);
                Stage::Decon {
                    phi,
                    epsilon,
                    gamma,
                    m,
                }
            }
        };
        let derived_ball = match (&self.noise, &stage) {
            (NoiseSpec::Noiseless, _) => tau / 2.0,
            (NoiseSpec::Clutter { .. }, _) => params["r"] + tau / 2.0,
            (NoiseSpec::Tubular { sigma, .. }, _) => 2.0 * sigma + tau / 2.0,
            (NoiseSpec::Gaussian { .. }, _) => (8.0 * params["r"] + tau) / 2.0,
            (_, Stage::Decon { epsilon, .. }) => (5.0 * epsilon + tau) / 2.0,
            _ => unreachable!("every model has a stage"),
        };
        let ball_radius = o.ball_radius.unwrap_or(derived_ball);
        if !(ball_radius > 0.0) || !ball_radius.is_finite() {
            return Err(Error::invalid(format!(
                "ball radius must be positive, got {ball_radius}"
            )));
        }
        params.insert("ball_radius".into(), ball_radius);
        match &stage {
            Stage::Clean(c) => {
                params.insert("clean_radius".into(), c.radius);
                params.insert("clean_threshold".into(), c.threshold);
            }
            Stage::Decon { epsilon, gamma, .. } => {
                params.insert("epsilon".into(), *epsilon);
                params.insert("gamma".into(), *gamma);
            }
            Stage::Direct => {}
        }
        params.insert("top_dim".into(), self.top_dim() as f64);
        Ok(Plan {
            stage,
            ball_radius,
            top_dim: self.top_dim(),
            params,
        })
    }
}

/// Resolved parameters for one estimator run.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub stage: Stage,
    pub ball_radius: f64,
    pub top_dim: usize,
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stage {
    Direct,
    Clean(CleanParams),
    Decon {
        phi: NoiseDensity,
        epsilon: f64,
        gamma: f64,
        m: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    /// `None` when fewer than `d + 2` points survive cleaning.
    pub profile: Option<HomologyProfile>,
    pub unstable: bool,
    /// Indices of the ball centers in the point set they came from (the
    /// input cloud, or the resample for deconvolution).
    pub kept_indices: Vec<usize>,
    /// Ball centers.
    pub centers: PointCloud,
    pub parameters_used: BTreeMap<String, f64>,
    /// Simplex counts per dimension.
    pub complex_size: Vec<usize>,
    pub complex: SimplicialComplex,
}

impl EstimateResult {
    /// `key=value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let profile = self
            .profile
            .as_ref()
            .map_or("unstable".to_string(), |p| p.to_string());
        let _ = writeln!(s, "profile={profile}");
        let _ = writeln!(s, "unstable={}", self.unstable);
        let _ = writeln!(s, "kept={}", self.kept_indices.len());
        let sizes: Vec<String> = self.complex_size.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(s, "complex_size={}", sizes.join(","));
        for (k, v) in &self.parameters_used {
            let _ = writeln!(s, "{k}={v:?}");
        }
        let kept: Vec<String> = self.kept_indices.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(s, "kept_indices={}", kept.join(","));
        s
    }
}

/// Betti numbers `0..top_dim - 1` of the union of `radius`-balls.
pub fn union_of_balls_homology(
    centers: &PointCloud,
    radius: f64,
    top_dim: usize,
    kind: ComplexKind,
) -> Result<(HomologyProfile, SimplicialComplex)> {
    let planar = centers.dim() == 2 && top_dim == 2;
    let complex = match kind {
        ComplexKind::Auto if planar => delaunay_cech_complex(centers, radius)?.complex,
        ComplexKind::DelaunayCech => {
            if top_dim != 2 {
                return Err(Error::Unsupported(
                    "Delaunay–Čech complexes stop at triangles".into(),
                ));
            }
            delaunay_cech_complex(centers, radius)?.complex
        }
        _ => cech_complex(centers, radius, top_dim)?,
    };
    let profile = betti_numbers(&complex, top_dim - 1)?;
    Ok((profile, complex))
}

/// Runs the estimator selected by `spec.noise`. `seed` only matters for the
/// deconvolution resample.
pub fn estimate(cloud: &PointCloud, spec: &EstimatorSpec, seed: u64) -> Result<EstimateResult> {
    if cloud.dim() != spec.ambient_dim {
        return Err(Error::invalid(format!(
            "cloud dimension {} does not match D = {}",
            cloud.dim(),
            spec.ambient_dim
        )));
    }
    let plan = spec.resolve(cloud.len())?;
    let (centers, kept) = match plan.stage {
        Stage::Direct => (cloud.clone(), (0..cloud.len()).collect()),
        Stage::Clean(c) => {
            if cloud.is_empty() {
                (cloud.clone(), Vec::new())
            } else {
                let rep = cleaning::clean(cloud, &c)?;
                (cloud.subset(&rep.kept), rep.kept)
            }
        }
        Stage::Decon {
            phi,
            epsilon,
            gamma,
            m,
        } => {
            let kernel =
                deconvolution::build_kernel_pair(&phi, spec.ambient_dim, epsilon, Some(gamma))?;
            if cloud.is_empty() {
                (cloud.clone(), Vec::new())
            } else {
                let measure = DeconvolvedMeasure::new(cloud.clone(), kernel)?;
                let z = measure.resample(m, seed)?;
                let rep = deconvolution::decon_clean(&z, &measure, epsilon, gamma);
                (z.subset(&rep.kept), rep.kept)
            }
        }
    };
    if centers.len() < spec.intrinsic_dim + 2 {
        return Ok(EstimateResult {
            profile: None,
            unstable: true,
            kept_indices: kept,
            centers,
            parameters_used: plan.params,
            complex_size: Vec::new(),
            complex: SimplicialComplex::empty(plan.top_dim),
        });
    }
    let (profile, complex) =
        union_of_balls_homology(&centers, plan.ball_radius, plan.top_dim, spec.complex)?;
    Ok(EstimateResult {
        profile: Some(profile),
        unstable: false,
        kept_indices: kept,
        centers,
        parameters_used: plan.params,
        complex_size: complex.counts(),
        complex,
    })
}

fn require(spec: &EstimatorSpec, model: &str) -> Result<()> {
    if spec.noise.name() != model {
        return Err(Error::invalid(format!(
            "estimator for {model} called with a {} spec",
            spec.noise.name()
        )));
    }
    Ok(())
}

pub fn estimate_noiseless(cloud: &PointCloud, spec: &EstimatorSpec) -> Result<EstimateResult> {
    require(spec, "noiseless")?;
    estimate(cloud, spec, 0)
}

pub fn estimate_clutter(cloud: &PointCloud, spec: &EstimatorSpec) -> Result<EstimateResult> {
    require(spec, "clutter")?;
    estimate(cloud, spec, 0)
}

pub fn estimate_tubular(cloud: &PointCloud, spec: &EstimatorSpec) -> Result<EstimateResult> {
    require(spec, "tubular")?;
    estimate(cloud, spec, 0)
}

pub fn estimate_gaussian(cloud: &PointCloud, spec: &EstimatorSpec) -> Result<EstimateResult> {
    require(spec, "gaussian")?;
    estimate(cloud, spec, 0)
}

pub fn estimate_decon(
    cloud: &PointCloud,
    spec: &EstimatorSpec,
    seed: u64,
) -> Result<EstimateResult> {
    require(spec, "additive_known")?;
    estimate(cloud, spec, seed)
}
