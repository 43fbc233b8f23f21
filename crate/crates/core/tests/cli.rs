use std::path::Path;
use std::process::{Command, Output};

fn homolens(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_homolens"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn data_lines(path: &Path) -> usize {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .count()
}

#[test]
fn sample_writes_n_points() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.txt");
    let o = homolens(&[
        "sample",
        "--manifold",
        "circle",
        "--tau",
        "1",
        "--n",
        "100",
        "--seed",
        "7",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).trim(), "n=100 D=2 seed=7");
    assert_eq!(data_lines(&out), 100);
}

#[test]
fn estimate_recovers_circle() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s.txt");
    let s = s.to_str().unwrap();
    let o = homolens(&[
        "sample",
        "--manifold",
        "circle",
        "--tau",
        "1",
        "--noise",
        "tubular",
        "--sigma",
        "0.03",
        "--n",
        "400",
        "--seed",
        "1",
        "-o",
        s,
    ]);
    assert!(o.status.success());
    let res = dir.path().join("r.txt");
    let o = homolens(&[
        "estimate",
        "-i",
        s,
        "--noise",
        "tubular",
        "--sigma",
        "0.03",
        "--tau",
        "1",
        "-o",
        res.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).trim(), "1,1");
    let text = std::fs::read_to_string(res).unwrap();
    assert!(text.contains("profile=1,1"));
    assert!(text.contains("ball_radius=0.56"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        "n = 50\nseed = 3\n[manifold]\nfamily = \"sphere\"\ntau = 1.0\n",
    )
    .unwrap();
    let out = dir.path().join("s.txt");
    let o = homolens(&[
        "sample",
        "--config",
        cfg.to_str().unwrap(),
        "--n",
        "20",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).trim(), "n=20 D=3 seed=3");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s.txt");
    let s = s.to_str().unwrap();
    assert!(homolens(&[
        "sample",
        "--manifold",
        "circle",
        "--tau",
        "1",
        "--n",
        "50",
        "-o",
        s
    ])
    .status
    .success());

    // usage
    assert_eq!(homolens(&["estimate", "-i", s]).status.code(), Some(2));
    assert_eq!(
        homolens(&["estimate", "-i", s, "--tau", "1", "--noise", "clutter", "--pi", "0.5"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(homolens(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        homolens(&["betti", "--complex", "/nonexistent/c.txt"])
            .status
            .code(),
        Some(2)
    );
    // bad config value
    assert_eq!(
        homolens(&[
            "sample",
            "--manifold",
            "klein",
            "--tau",
            "1",
            "--n",
            "5",
            "-o",
            s
        ])
        .status
        .code(),
        Some(2)
    );

    // precondition
    let o = homolens(&[
        "estimate", "-i", s, "--tau", "1", "--noise", "tubular", "--sigma", "0.2",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("σ < τ/24"));

    // every trial fails
    let cfg = dir.path().join("e.toml");
    std::fs::write(
        &cfg,
        "n_grid = [20]\ntrials = 2\nbase_seed = 1\n[manifold]\nfamily = \"circle\"\ntau = 1.0\n[noise]\nmodel = \"tubular\"\nsigma = 0.3\n\
         [estimator]\ntau = 1.0\na = 1.0\nintrinsic_dim = 1\nambient_dim = 2\n[estimator.noise]\nmodel = \"tubular\"\nsigma = 0.3\n",
    )
    .unwrap();
    let rec = dir.path().join("rec.txt");
    let curve = dir.path().join("curve.csv");
    let o = homolens(&[
        "experiment",
        "--config",
        cfg.to_str().unwrap(),
        "--records",
        rec.to_str().unwrap(),
        "--curve",
        curve.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(4));
    assert!(std::fs::read_to_string(rec).unwrap().contains("failure="));
}

#[test]
fn bad_thread_count_is_a_usage_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_homolens"))
        .args(["tvcheck"])
        .env("HOMOLENS_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn cech_then_betti_matches_direct_betti() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s.txt");
    let c = dir.path().join("c.txt");
    let (s, c) = (s.to_str().unwrap(), c.to_str().unwrap());
    assert!(homolens(&[
        "sample",
        "--manifold",
        "circle",
        "--tau",
        "1",
        "--n",
        "60",
        "--seed",
        "2",
        "-o",
        s
    ])
    .status
    .success());
    let o = homolens(&["cech", "-i", s, "--eps", "0.3", "-o", c]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("simplices=60,"));
    let via_file = stdout(&homolens(&["betti", "--complex", c]));
    let direct = stdout(&homolens(&["betti", "-i", s, "--eps", "0.3"]));
    assert_eq!(via_file, direct);
    assert_eq!(direct.trim(), "1,1");
}

#[test]
fn experiment_output_ignores_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("e.toml");
    std::fs::write(
        &cfg,
        "n_grid = [15, 40]\ntrials = 6\nbase_seed = 5\n[manifold]\nfamily = \"circle\"\ntau = 1.0\n[noise]\nmodel = \"noiseless\"\n\
         [estimator]\ntau = 1.0\na = 1.0\nintrinsic_dim = 1\nambient_dim = 2\n[estimator.noise]\nmodel = \"noiseless\"\n",
    )
    .unwrap();
    let run = |threads: &str| {
        let rec = dir.path().join(format!("rec{threads}.txt"));
        let o = Command::new(env!("CARGO_BIN_EXE_homolens"))
            .args([
                "experiment",
                "--config",
                cfg.to_str().unwrap(),
                "--records",
                rec.to_str().unwrap(),
            ])
            .args([
                "--curve",
                dir.path().join(format!("c{threads}.csv")).to_str().unwrap(),
            ])
            .env("HOMOLENS_THREADS", threads)
            .output()
            .unwrap();
        assert!(o.status.success());
        (o.stdout, std::fs::read(rec).unwrap())
    };
    assert_eq!(run("1"), run("3"));
}
