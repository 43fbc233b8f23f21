//! Monte Carlo risk estimation, sample-complexity sweeps and the two-point
//! (Le Cam) lower-bound checks.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::estimators::{estimate, EstimatorSpec};
use crate::homology::{homology_equal, HomologyProfile};
use crate::manifold::{sample, LowerBoundPair, ManifoldSpec, NoiseSpec, PairDiscretization};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub manifold: ManifoldSpec,
    pub noise: NoiseSpec,
    pub estimator: EstimatorSpec,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub base_seed: u64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.n_grid.is_empty() {
            return Err(Error::Config("n_grid is empty".into()));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!(
                "n_grid must be strictly increasing, got {:?}",
                self.n_grid
            )));
        }
        self.manifold.validate()?;
        self.noise.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub n: usize,
    pub trial_index: usize,
    pub seed: u64,
    /// `None` when no profile was produced (unstable result or failure).
    pub estimated: Option<HomologyProfile>,
    pub truth: HomologyProfile,
    pub hit: bool,
    pub failure: Option<String>,
    /// Not serialized, so records stay byte-identical across runs.
    pub wall_time: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskPoint {
    pub n: usize,
    pub trials: usize,
    pub misses: usize,
    pub failures: usize,
    pub risk: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskCurve {
    pub points: Vec<RiskPoint>,
}

/// Exact two-sided binomial interval for `k` successes in `n` trials.
pub fn clopper_pearson(k: usize, n: usize, level: f64) -> (f64, f64) {
    assert!(n > 0 && k <= n, "need 0 <= k <= n, n > 0");
    let alpha = 1.0 - level;
    let (kf, nf) = (k as f64, n as f64);
    let lo = if k == 0 {
        0.0
    } else if k == n {
        (alpha / 2.0).powf(1.0 / nf)
    } else {
        beta_quantile(kf, nf - kf + 1.0, alpha / 2.0)
    };
    let hi = if k == n {
        1.0
    } else if k == 0 {
        1.0 - (alpha / 2.0).powf(1.0 / nf)
    } else {
        beta_quantile(kf + 1.0, nf - kf, 1.0 - alpha / 2.0)
    };
    (lo, hi)
}

/// Quantile of Beta(a, b) by bisection on the regularized incomplete beta.
fn beta_quantile(a: f64, b: f64, p: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if beta_reg(a, b, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Seed of trial `i` at sample size `n`.
pub fn trial_seed(base: u64, n: usize, i: usize) -> u64 {
    derive_seed(derive_seed(base, n as u64), i as u64)
}

fn run_trial(
    spec: &ExperimentSpec,
    truth: &HomologyProfile,
    n: usize,
    i: usize,
    plan_error: Option<&str>,
) -> TrialRecord {
    let start = Instant::now();
    let seed = trial_seed(spec.base_seed, n, i);
    let outcome: std::result::Result<Option<HomologyProfile>, String> = if let Some(e) = plan_error
    {
        Err(e.to_string())
    } else if n == 0 {
        Ok(None)
    } else {
        sample(&spec.manifold, &spec.noise, n, seed)
            .and_then(|s| estimate(&s.cloud, &spec.estimator, derive_seed(seed, 1)))
            .map(|r| r.profile)
            .map_err(|e| e.to_string())
    };
    let (estimated, failure) = match outcome {
        Ok(p) => (p, None),
        Err(e) => (None, Some(e)),
    };
    let hit = estimated.as_ref().is_some_and(|p| homology_equal(p, truth));
    TrialRecord {
        n,
        trial_index: i,
        seed,
        estimated,
        truth: truth.clone(),
        hit,
        failure,
        wall_time: start.elapsed(),
    }
}

/// Runs every trial of every grid point. A grid point whose estimator
/// parameters cannot be resolved records the reason on each of its trials.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<(Vec<TrialRecord>, RiskCurve)> {
    spec.validate()?;
    let truth = spec.manifold.true_homology();
    let plan_errors: Vec<Option<String>> = spec
        .n_grid
        .iter()
        .map(|&n| spec.estimator.resolve(n).err().map(|e| e.to_string()))
        .collect();
    let tasks: Vec<(usize, usize)> = (0..spec.n_grid.len())
        .flat_map(|g| (0..spec.trials).map(move |i| (g, i)))
        .collect();
    let mut records: Vec<TrialRecord> = tasks
        .par_iter()
        .map(|&(g, i)| run_trial(spec, &truth, spec.n_grid[g], i, plan_errors[g].as_deref()))
        .collect();
    records.sort_by_key(|r| (r.n, r.trial_index));
    let curve = risk_curve(&records);
    Ok((records, curve))
}

/// Aggregates records (sorted or not) into one point per distinct `n`.
pub fn risk_curve(records: &[TrialRecord]) -> RiskCurve {
    let mut ns: Vec<usize> = records.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    let points = ns
        .into_iter()
        .map(|n| {
            let at: Vec<&TrialRecord> = records.iter().filter(|r| r.n == n).collect();
            let misses = at.iter().filter(|r| !r.hit).count();
            let failures = at.iter().filter(|r| r.failure.is_some()).count();
            let (lo, hi) = clopper_pearson(misses, at.len(), 0.95);
            RiskPoint {
                n,
                trials: at.len(),
                misses,
                failures,
                risk: misses as f64 / at.len() as f64,
                lo,
                hi,
            }
        })
        .collect();
    RiskCurve { points }
}

/// Smallest grid `n` whose upper confidence bound is at most `eps`.
pub fn sample_complexity(curve: &RiskCurve, eps: f64) -> Option<usize> {
    curve.points.iter().find(|p| p.hi <= eps).map(|p| p.n)
}

/// Number of consecutive grid pairs where the risk goes up.
pub fn risk_inversions(curve: &RiskCurve) -> Vec<(usize, f64)> {
    curve
        .points
        .windows(2)
        .filter(|w| w[1].risk > w[0].risk)
        .map(|w| (w[1].n, w[1].risk - w[0].risk))
        .collect()
}

/// Least-squares fit of `ln(risk)` against `n` over points with risk in
/// `(lo, hi)`: `(slope, intercept, r_squared)`.
pub fn log_risk_fit(curve: &RiskCurve, lo: f64, hi: f64) -> Option<(f64, f64, f64)> {
    let pts: Vec<(f64, f64)> = curve
        .points
        .iter()
        .filter(|p| p.risk > lo && p.risk < hi)
        .map(|p| (p.n as f64, p.risk.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Some((slope, my - slope * mx, r2))
}

/// Quadrature TV estimate together with its refinement error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TvEstimate {
    pub tv: f64,
    /// `|TV(cells) - TV(cells / 2)|` at the accepted resolution.
    pub error: f64,
    pub cells: usize,
}

/// Cap on total quadrature nodes.
pub const TV_MAX_CELLS: usize = 1 << 22;

/// `1 - sum min(p1, p2) w`, doubling the resolution until two successive
/// estimates agree within `1e-3`.
pub fn tv_distance_numeric(
    p1: &(dyn Fn(&[f64]) -> f64 + Sync),
    p2: &(dyn Fn(&[f64]) -> f64 + Sync),
    discretize: &dyn Fn(usize) -> PairDiscretization,
) -> Result<TvEstimate> {
    let eval = |cells: usize| -> Result<(f64, usize)> {
        let q = discretize(cells);
        let (i1, i2, overlap) = (0..q.weights.len())
            .into_par_iter()
            .map(|k| {
                let x = q.points.point(k);
                let (a, b) = (p1(x), p2(x));
                let w = q.weights[k];
                (a * w, b * w, a.min(b) * w)
            })
            .reduce(|| (0.0, 0.0, 0.0), |x, y| (x.0 + y.0, x.1 + y.1, x.2 + y.2));
        for (name, total) in [("p1", i1), ("p2", i2)] {
            if (total - 1.0).abs() > 1e-3 {
                return Err(Error::Numerical(format!(
                    "{name} integrates to {total}, not 1"
                )));
            }
        }
        Ok((1.0 - overlap, q.weights.len()))
    };
    let mut cells = 16;
    let (mut prev, _) = eval(cells)?;
    loop {
        cells *= 2;
        let (tv, nodes) = eval(cells)?;
        let error = (tv - prev).abs();
        if error < 1e-3 {
            return Ok(TvEstimate {
                tv,
                error,
                cells: nodes,
            });
        }
        if nodes * 2 > TV_MAX_CELLS {
            return Err(Error::Numerical(format!(
                "TV quadrature did not settle below 1e-3 within {TV_MAX_CELLS} cells (last change {error:e})"
            )));
        }
        prev = tv;
    }
}

/// Numeric TV between the two densities of a lower-bound pair.
pub fn pair_tv(pair: &LowerBoundPair) -> Result<TvEstimate> {
    tv_distance_numeric(&|x| pair.density1(x), &|x| pair.density2(x), &|c| {
        pair.discretize(c)
    })
}

/// `(1/8) (1 - tv)^(2n)`.
pub fn lecam_floor(tv: f64, n: usize) -> f64 {
    assert!((0.0..=1.0).contains(&tv), "TV must lie in [0, 1], got {tv}");
    0.125 * (1.0 - tv).powf(2.0 * n as f64)
}

/// One estimator run on samples from both members of a lower-bound pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeCamCheck {
    pub d: usize,
    pub ambient_dim: usize,
    pub taus: Vec<f64>,
    pub a: f64,
    #[serde(default = "default_extent")]
    pub extent: f64,
    #[serde(default)]
    pub center: Option<Vec<f64>>,
    pub noise: NoiseSpec,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub base_seed: u64,
}

fn default_extent() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeCamRow {
    pub tau: f64,
    pub n: usize,
    pub tv: f64,
    pub floor: f64,
    /// Worse of the two miss rates.
    pub risk: f64,
    pub se: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeCamReport {
    pub rows: Vec<LeCamRow>,
    pub ok: bool,
}

impl LeCamReport {
    pub fn violations(&self) -> Vec<(f64, usize)> {
        self.rows
            .iter()
            .filter(|r| !r.ok)
            .map(|r| (r.tau, r.n))
            .collect()
    }
}

/// For every `tau` and `n`: the empirical risk of the estimator for
/// `check.noise`, taken as the larger miss rate over the two members of the
/// pair, must not fall more than three standard errors below the floor. The
/// standard error is that of a binomial proportion at the floor value.
pub fn check_lower_vs_empirical(check: &LeCamCheck) -> Result<LeCamReport> {
    let mut rows = Vec::new();
    for (ti, &tau) in check.taus.iter().enumerate() {
        let pair = crate::manifold::build_pair_with(
            check.d,
            check.ambient_dim,
            tau,
            check.a,
            check.extent,
            check.center.clone(),
        )?;
        let tv = pair_tv(&pair)?.tv;
        let estimator = EstimatorSpec::new(check.noise, tau, check.a, check.d, check.ambient_dim);
        let mut risks = Vec::new();
        for (k, m) in [&pair.m1, &pair.m2].into_iter().enumerate() {
            let spec = ExperimentSpec {
                manifold: m.clone(),
                noise: check.noise,
                estimator: estimator.clone(),
                n_grid: check.n_grid.clone(),
                trials: check.trials,
                base_seed: derive_seed(check.base_seed, (2 * ti + k) as u64),
            };
            risks.push(run_experiment(&spec)?.1);
        }
        for (g, &n) in check.n_grid.iter().enumerate() {
            let floor = lecam_floor(tv, n);
            let risk = risks[0].points[g].risk.max(risks[1].points[g].risk);
            let se = (floor * (1.0 - floor) / check.trials as f64).sqrt();
            rows.push(LeCamRow {
                tau,
                n,
                tv,
                floor,
                risk,
                se,
                ok: risk >= floor - 3.0 * se,
            });
        }
    }
    let ok = rows.iter().all(|r| r.ok);
    Ok(LeCamReport { rows, ok })
}

/// One `key=value ...` line per record.
pub fn format_records(records: &[TrialRecord]) -> String {
    let mut s = String::new();
    for r in records {
        let est = r
            .estimated
            .as_ref()
            .map_or("none".to_string(), |p| p.to_string());
        let _ = write!(
            s,
            "n={} trial={} seed={} estimated={} truth={} hit={}",
            r.n, r.trial_index, r.seed, est, r.truth, r.hit
        );
        if let Some(f) = &r.failure {
            // keep one record per line and one token per field
            let clean: String = f
                .chars()
                .map(|c| if c.is_whitespace() { '_' } else { c })
                .collect();
            let _ = write!(s, " failure={clean}");
        }
        s.push('\n');
    }
    s
}

/// Inverse of [`format_records`]; failure text comes back with `_` for spaces
/// and `wall_time` is zero.
pub fn parse_records(text: &str) -> Result<Vec<TrialRecord>> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let perr = |m: String| Error::Parse {
            line: ln + 1,
            message: m,
        };
        let mut rec = TrialRecord {
            n: 0,
            trial_index: 0,
            seed: 0,
            estimated: None,
            truth: HomologyProfile::default(),
            hit: false,
            failure: None,
            wall_time: Duration::ZERO,
        };
        let mut seen = 0;
        for tok in line.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| perr(format!("expected key=value, got {tok:?}")))?;
            let bad = |_| perr(format!("bad value for {k}: {v:?}"));
            match k {
                "n" => rec.n = v.parse().map_err(bad)?,
                "trial" => rec.trial_index = v.parse().map_err(bad)?,
                "seed" => rec.seed = v.parse().map_err(bad)?,
                "estimated" if v == "none" => rec.estimated = None,
                "estimated" => {
                    rec.estimated = Some(v.parse().map_err(|e: Error| perr(e.to_string()))?)
                }
                "truth" => rec.truth = v.parse().map_err(|e: Error| perr(e.to_string()))?,
                "hit" => {
                    rec.hit = v
                        .parse()
                        .map_err(|_| perr(format!("bad value for hit: {v:?}")))?
                }
                "failure" => rec.failure = Some(v.to_string()),
                _ => return Err(perr(format!("unknown field {k}"))),
            }
            seen += 1;
        }
        if seen < 6 {
            return Err(perr("missing fields".into()));
        }
        out.push(rec);
    }
    Ok(out)
}

/// `n,risk,lo,hi` rows after a `#` header.
pub fn format_curve(curve: &RiskCurve) -> String {
    let mut s = String::from("# n,risk,lo,hi\n");
    for p in &curve.points {
        let _ = writeln!(s, "{},{:?},{:?},{:?}", p.n, p.risk, p.lo, p.hi);
    }
    s
}
