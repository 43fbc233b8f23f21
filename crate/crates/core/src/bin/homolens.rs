use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use toml::{Table, Value};

use homolens::cleaning::{clean, CleanParams};
use homolens::complexes::{
    cech_complex, delaunay_cech_complex, read_complex, rips_complex, write_complex,
    SimplicialComplex,
};
use homolens::config::{fill_manifold_defaults, load_table, merge, section};
use homolens::estimators::{estimate, EstimatorSpec};
use homolens::geometry::{format_point_cloud, read_point_cloud};
use homolens::homology::betti_numbers;
use homolens::manifold::{build_pair_with, sample, ManifoldSpec, NoiseSpec};
use homolens::risk::{self, ExperimentSpec, LeCamCheck};
use homolens::Error;

#[derive(Parser)]
#[command(
    name = "homolens",
    version,
    about = "Homology inference from noisy manifold samples"
)]
struct Cli {
    /// Print resolved parameters to stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a noisy point cloud from a test manifold.
    Sample(SampleArgs),
    /// Degree-threshold cleaning of a point cloud.
    Clean(CleanArgs),
    /// Build a Čech-type complex of a point cloud.
    Cech(CechArgs),
    /// Betti numbers of a complex file or of a cloud at a given scale.
    Betti(BettiArgs),
    /// Run the estimator for a noise model on a point cloud.
    Estimate(EstimateArgs),
    /// Monte Carlo risk experiment from a config file.
    Experiment(ExperimentArgs),
    /// Total variation and Le Cam floors for the M1/M2 pair.
    Tvcheck(TvArgs),
}

#[derive(Args, Default)]
struct ManifoldArgs {
    /// circle, sphere, torus, m1 or m2.
    #[arg(long)]
    manifold: Option<String>,
    #[arg(long)]
    tau: Option<f64>,
    /// Intrinsic dimension.
    #[arg(long)]
    d: Option<usize>,
    /// Ambient dimension.
    #[arg(long)]
    ambient: Option<usize>,
    /// Density floor.
    #[arg(long)]
    floor: Option<f64>,
    #[arg(long)]
    extent: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    center: Option<Vec<f64>>,
}

#[derive(Args, Default)]
struct NoiseArgs {
    /// none, clutter, tubular, gaussian or additive_known.
    #[arg(long)]
    noise: Option<String>,
    #[arg(long)]
    pi: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    exact_tube: bool,
    /// Known noise law: point_mass, gaussian, uniform or laplace.
    #[arg(long)]
    phi: Option<String>,
    /// Scale of the known noise law.
    #[arg(long)]
    phi_scale: Option<f64>,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    manifold: ManifoldArgs,
    #[command(flatten)]
    noise: NoiseArgs,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// TOML file with [manifold] and [noise] sections.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct CleanArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(long)]
    radius: f64,
    /// Degree fraction; vertices with degree <= (n-1) * threshold are removed.
    #[arg(long)]
    threshold: f64,
    #[arg(short, long)]
    output: PathBuf,
    /// Also write kept indices and degrees.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct CechArgs {
    #[arg(short, long)]
    input: PathBuf,
    /// Ball radius.
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 2)]
    top_dim: usize,
    /// cech, rips or delaunay_cech.
    #[arg(long, default_value = "cech")]
    kind: String,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct BettiArgs {
    /// Complex interchange file.
    #[arg(long, conflicts_with = "input")]
    complex: Option<PathBuf>,
    /// Point cloud; requires --eps.
    #[arg(short, long)]
    input: Option<PathBuf>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = 2)]
    top_dim: usize,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[command(flatten)]
    noise: NoiseArgs,
    #[arg(long)]
    tau: Option<f64>,
    /// Density floor; needed by the clutter, Gaussian and deconvolution estimators.
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    ball_radius: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// TOML file with an [estimator] section.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Write the complex built over the ball centers.
    #[arg(long)]
    emit_complex: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "records.txt")]
    records: PathBuf,
    #[arg(long, default_value = "curve.csv")]
    curve: PathBuf,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
}

#[derive(Args)]
struct TvArgs {
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long)]
    ambient: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.02,0.04,0.08")]
    taus: Vec<f64>,
    #[arg(long, default_value_t = 0.1)]
    a: f64,
    #[arg(long, default_value_t = 1.0)]
    extent: f64,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    center: Option<Vec<f64>>,
    /// Sample sizes at which to report the floor.
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
    /// Run the estimator on both members with this many trials per point.
    #[arg(long)]
    trials: Option<usize>,
    #[command(flatten)]
    noise: NoiseArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

enum Failure {
    Usage(String),
    Lib(Error),
    AllFailed(String),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    let verbose = cli.verbose > 0;
    let res = match cli.command {
        Command::Sample(a) => cmd_sample(a),
        Command::Clean(a) => cmd_clean(a),
        Command::Cech(a) => cmd_cech(a),
        Command::Betti(a) => cmd_betti(a),
        Command::Estimate(a) => cmd_estimate(a, verbose),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Tvcheck(a) => cmd_tvcheck(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, msg) = match f {
                Failure::Usage(m) => (2, m),
                Failure::AllFailed(m) => (4, m),
                Failure::Check(m) => (1, m),
                Failure::Lib(e) => {
                    let code = match e {
                        Error::Precondition { .. } => 3,
                        Error::InvalidInput(_)
                        | Error::Parse { .. }
                        | Error::Config(_)
                        | Error::Io { .. }
                        | Error::Unsupported(_) => 2,
                        Error::Numerical(_) => 1,
                    };
                    (code, e.to_string())
                }
            };
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("HOMOLENS_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| format!("HOMOLENS_THREADS must be a nonnegative integer, got {v:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn write_file(path: &Path, text: &str) -> CmdResult {
    std::fs::write(path, text).map_err(|e| Failure::Lib(Error::io(path, e)))
}

fn set(t: &mut Table, key: &str, v: impl Into<Value>) {
    t.insert(key.into(), v.into());
}

fn sub_table<'a>(t: &'a mut Table, key: &str) -> &'a mut Table {
    t.entry(key)
        .or_insert_with(|| Value::Table(Table::new()))
        .as_table_mut()
        .expect("section is a table")
}

fn manifold_overlay(m: &ManifoldArgs) -> Table {
    let mut t = Table::new();
    if let Some(f) = &m.manifold {
        set(&mut t, "family", f.as_str());
    }
    if let Some(v) = m.tau {
        set(&mut t, "tau", v);
    }
    if let Some(v) = m.d {
        set(&mut t, "intrinsic_dim", v as i64);
    }
    if let Some(v) = m.ambient {
        set(&mut t, "ambient_dim", v as i64);
    }
    if let Some(v) = m.floor {
        set(&mut t, "density_floor", v);
    }
    if let Some(v) = m.extent {
        set(&mut t, "extent", v);
    }
    if let Some(c) = &m.center {
        set(
            &mut t,
            "center",
            Value::Array(c.iter().map(|&x| Value::Float(x)).collect()),
        );
    }
    t
}

/// Applies noise flags on top of `base`, keeping only keys the model uses.
fn apply_noise_flags(base: &mut Table, n: &NoiseArgs) -> std::result::Result<(), Failure> {
    if let Some(model) = &n.noise {
        let same = base.get("model").and_then(Value::as_str) == Some(model.as_str());
        if !same {
            base.clear();
        }
        set(base, "model", model.as_str());
    }
    let model = match base.get("model").and_then(Value::as_str) {
        Some(m) => m.to_string(),
        None => {
            set(base, "model", "noiseless");
            "noiseless".into()
        }
    };
    match model.as_str() {
        "clutter" => {
            if let Some(v) = n.pi {
                set(base, "pi", v);
            }
        }
        "tubular" | "gaussian" => {
            if let Some(v) = n.sigma {
                set(base, "sigma", v);
            }
            if model == "tubular" && n.exact_tube {
                set(base, "exact_tube", true);
            }
        }
        "additive_known" => {
            if let Some(kind) = &n.phi {
                let mut phi = Table::new();
                set(&mut phi, "kind", kind.as_str());
                let key = match kind.as_str() {
                    "gaussian" => Some("sigma"),
                    "uniform" => Some("half_width"),
                    "laplace" => Some("scale"),
                    _ => None,
                };
                if let (Some(k), Some(s)) = (key, n.phi_scale) {
                    set(&mut phi, k, s);
                }
                base.insert("phi".into(), Value::Table(phi));
            }
        }
        _ => {}
    }
    Ok(())
}

fn noise_from(table: &Table) -> std::result::Result<NoiseSpec, Failure> {
    Ok(section(table, "noise")?)
}

fn cmd_sample(a: SampleArgs) -> CmdResult {
    let mut cfg = match &a.config {
        Some(p) => load_table(p)?,
        None => Table::new(),
    };
    merge(
        sub_table(&mut cfg, "manifold"),
        manifold_overlay(&a.manifold),
    );
    apply_noise_flags(sub_table(&mut cfg, "noise"), &a.noise)?;
    if let Some(n) = a.n {
        set(&mut cfg, "n", n as i64);
    }
    if let Some(s) = a.seed {
        set(&mut cfg, "seed", s as i64);
    }
    let m = sub_table(&mut cfg, "manifold");
    if !m.contains_key("family") {
        return Err(Failure::Usage(
            "--manifold is required (or set manifold.family in --config)".into(),
        ));
    }
    if !m.contains_key("tau") {
        return Err(Failure::Usage(
            "--tau is required (or set manifold.tau in --config)".into(),
        ));
    }
    fill_manifold_defaults(m)?;
    let manifold: ManifoldSpec = section(&cfg, "manifold")?;
    let noise = noise_from(&cfg)?;
    let n = cfg
        .get("n")
        .and_then(Value::as_integer)
        .ok_or_else(|| Failure::Usage("--n is required (or set n in --config)".into()))?;
    if n < 1 {
        return Err(Failure::Usage(format!("--n must be positive, got {n}")));
    }
    let seed = cfg.get("seed").and_then(Value::as_integer).unwrap_or(0) as u64;
    let s = sample(&manifold, &noise, n as usize, seed)?;
    write_file(&a.output, &format_point_cloud(&s.cloud))?;
    println!("n={} D={} seed={}", s.cloud.len(), s.cloud.dim(), seed);
    Ok(())
}

fn cmd_clean(a: CleanArgs) -> CmdResult {
    let cloud = read_point_cloud(&a.input)?;
    let rep = clean(&cloud, &CleanParams::new(a.radius, a.threshold)?)?;
    write_file(&a.output, &format_point_cloud(&cloud.subset(&rep.kept)))?;
    if let Some(p) = &a.report {
        let mut s = String::from("# index,degree,kept\n");
        let kept: std::collections::HashSet<usize> = rep.kept.iter().copied().collect();
        for (i, d) in rep.degrees.iter().enumerate() {
            s.push_str(&format!("{i},{d},{}\n", kept.contains(&i)));
        }
        write_file(p, &s)?;
    }
    println!("kept={} removed={}", rep.kept.len(), rep.removed.len());
    Ok(())
}

fn build_complex(
    cloud: &homolens::PointCloud,
    eps: f64,
    top_dim: usize,
    kind: &str,
) -> Result<SimplicialComplex, Failure> {
    Ok(match kind {
        "cech" => cech_complex(cloud, eps, top_dim)?,
        "rips" => rips_complex(cloud, 2.0 * eps, top_dim)?,
        "delaunay_cech" => {
            if top_dim != 2 {
                return Err(Failure::Usage("delaunay_cech needs --top-dim 2".into()));
            }
            delaunay_cech_complex(cloud, eps)?.complex
        }
        other => return Err(Failure::Usage(format!("unknown complex kind {other:?}"))),
    })
}

fn counts_line(c: &SimplicialComplex) -> String {
    c.counts()
        .iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn cmd_cech(a: CechArgs) -> CmdResult {
    let cloud = read_point_cloud(&a.input)?;
    let c = build_complex(&cloud, a.eps, a.top_dim, &a.kind)?;
    write_complex(&a.output, &c)?;
    println!("simplices={}", counts_line(&c));
    Ok(())
}

fn cmd_betti(a: BettiArgs) -> CmdResult {
    let c = match (&a.complex, &a.input) {
        (Some(p), _) => read_complex(p)?,
        (None, Some(p)) => {
            let eps = a
                .eps
                .ok_or_else(|| Failure::Usage("--eps is required with --input".into()))?;
            build_complex(&read_point_cloud(p)?, eps, a.top_dim, "cech")?
        }
        (None, None) => return Err(Failure::Usage("give --complex or --input".into())),
    };
    if c.top_dim() == 0 {
        return Err(Failure::Usage(
            "complex has no edges dimension; Betti numbers need top_dim >= 1".into(),
        ));
    }
    println!("{}", betti_numbers(&c, c.top_dim() - 1)?);
    Ok(())
}

fn cmd_estimate(a: EstimateArgs, verbose: bool) -> CmdResult {
    let cloud = read_point_cloud(&a.input)?;
    let mut cfg = match &a.config {
        Some(p) => load_table(p)?,
        None => Table::new(),
    };
    let est = sub_table(&mut cfg, "estimator");
    apply_noise_flags(sub_table(est, "noise"), &a.noise)?;
    if let Some(v) = a.tau {
        set(est, "tau", v);
    }
    if let Some(v) = a.a {
        set(est, "a", v);
    }
    if let Some(v) = a.d {
        set(est, "intrinsic_dim", v as i64);
    }
    if let Some(v) = a.ball_radius {
        set(sub_table(est, "overrides"), "ball_radius", v);
    }
    if !est.contains_key("tau") {
        return Err(Failure::Usage(
            "--tau is required (or set estimator.tau in --config)".into(),
        ));
    }
    let model = est["noise"]["model"]
        .as_str()
        .unwrap_or("noiseless")
        .to_string();
    if !est.contains_key("a") {
        if matches!(model.as_str(), "noiseless" | "none" | "tubular") {
            // unused by these estimators
            set(est, "a", 1.0);
        } else {
            return Err(Failure::Usage(format!(
                "--a is required for the {model} estimator"
            )));
        }
    }
    if !est.contains_key("intrinsic_dim") {
        set(est, "intrinsic_dim", 1i64);
    }
    set(est, "ambient_dim", cloud.dim() as i64);
    let spec: EstimatorSpec = section(&cfg, "estimator")?;
    let res = estimate(&cloud, &spec, a.seed)?;
    if verbose {
        for (k, v) in &res.parameters_used {
            eprintln!("{k} = {v}");
        }
    }
    if let Some(p) = &a.output {
        write_file(p, &format!("seed={}\n{}", a.seed, res.to_text()))?;
    }
    if let Some(p) = &a.emit_complex {
        write_complex(p, &res.complex)?;
    }
    match &res.profile {
        Some(p) => println!("{p}"),
        None => println!("unstable"),
    }
    Ok(())
}

fn cmd_experiment(a: ExperimentArgs) -> CmdResult {
    let mut cfg = load_table(&a.config)?;
    if let Some(t) = a.trials {
        set(&mut cfg, "trials", t as i64);
    }
    if let Some(s) = a.seed {
        set(&mut cfg, "base_seed", s as i64);
    }
    if let Some(g) = &a.n_grid {
        set(
            &mut cfg,
            "n_grid",
            Value::Array(g.iter().map(|&n| Value::Integer(n as i64)).collect()),
        );
    }
    fill_manifold_defaults(sub_table(&mut cfg, "manifold"))?;
    let spec: ExperimentSpec = Value::Table(cfg)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
    let (records, curve) = risk::run_experiment(&spec)?;
    write_file(&a.records, &risk::format_records(&records))?;
    write_file(&a.curve, &risk::format_curve(&curve))?;
    println!("{:>8} {:>8} {:>8} {:>8}", "n", "risk", "lo", "hi");
    for p in &curve.points {
        println!("{:>8} {:>8.4} {:>8.4} {:>8.4}", p.n, p.risk, p.lo, p.hi);
        if p.failures > 0 {
            eprintln!("warning: n={} had {} failed trials", p.n, p.failures);
        }
    }
    if curve.points.iter().all(|p| p.failures == p.trials) {
        let reason = records
            .iter()
            .find_map(|r| r.failure.clone())
            .unwrap_or_default();
        return Err(Failure::AllFailed(format!(
            "every grid point failed: {reason}"
        )));
    }
    Ok(())
}

fn cmd_tvcheck(a: TvArgs) -> CmdResult {
    let ambient = a.ambient.unwrap_or(a.d + 1);
    let n_grid = a.n_grid.clone().unwrap_or_default();
    println!("tau,tv,closed_form,tv_over_tau");
    for &tau in &a.taus {
        let pair = build_pair_with(a.d, ambient, tau, a.a, a.extent, a.center.clone())?;
        let tv = risk::pair_tv(&pair)?;
        println!(
            "{tau:?},{:?},{:?},{:?}",
            tv.tv,
            pair.tv_closed_form(),
            tv.tv / tau
        );
        for &n in &n_grid {
            println!(
                "  n={n} floor={:?}",
                risk::lecam_floor(tv.tv.clamp(0.0, 1.0), n)
            );
        }
    }
    if let Some(trials) = a.trials {
        if n_grid.is_empty() {
            return Err(Failure::Usage("--trials needs --n-grid".into()));
        }
        let mut noise = Table::new();
        apply_noise_flags(&mut noise, &a.noise)?;
        let noise: NoiseSpec = Value::Table(noise)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        let report = risk::check_lower_vs_empirical(&LeCamCheck {
            d: a.d,
            ambient_dim: ambient,
            taus: a.taus.clone(),
            a: a.a,
            extent: a.extent,
            center: a.center.clone(),
            noise,
            n_grid,
            trials,
            base_seed: a.seed,
        })?;
        println!("tau,n,tv,floor,risk,se,ok");
        for r in &report.rows {
            println!(
                "{:?},{},{:?},{:?},{:?},{:?},{}",
                r.tau, r.n, r.tv, r.floor, r.risk, r.se, r.ok
            );
        }
        if !report.ok {
            return Err(Failure::Check(format!(
                "empirical risk below the floor at {:?}",
                report.violations()
            )));
        }
    }
    Ok(())
}
