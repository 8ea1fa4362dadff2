use std::fs;
use std::path::Path;
use std::process::Command;

use softqd::domains::{DescriptorScaling, Domain};
use softqd::metrics::{compute_metrics, CentroidsRecord, CvtArchive};
use softqd::seeded_random_population;
use softqd_cli::check::verdict;
use softqd_cli::experiment::Summary;
use softqd_cli::{CliError, RunConfig};

const SMALL: &str = r#"
domain = "lp-4"
seeds = [3, 4]
metric_interval = 2
cvt_samples = 5000
metrics_cells = 64

[squad]
population_size = 32
batch_size = 8
neighbors = 4
epochs = 5
"#;

fn softqd() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_softqd"));
    c.env("RUST_LOG", "warn");
    c
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("config.toml");
    fs::write(&p, text).unwrap();
    p
}

fn code(c: &mut Command) -> i32 {
    c.output().unwrap().status.code().unwrap()
}

#[test]
fn run_writes_every_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("out");
    assert_eq!(
        code(softqd().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out)),
        0
    );
    for seed in [3, 4] {
        let csv = fs::read_to_string(out.join(format!("metrics_{seed}.csv"))).unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "epoch,qd_score,coverage,vendi,qvs,mean_obj,max_obj,s_tilde"
        );
        let epochs: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(epochs, ["0", "2", "4", "5"]);
        let it = fs::read_to_string(out.join(format!("iterations_{seed}.csv"))).unwrap();
        assert!(it.starts_with("epoch,objective_tilde,mean_quality,max_quality,wall_time_s\n"));
        assert_eq!(it.lines().count(), 7);
        assert!(out.join(format!("population_{seed}.json")).exists());
        assert!(fs::read_to_string(out.join(format!("scatter_{seed}.svg")))
            .unwrap()
            .contains("<circle"));
    }
    let summary: Summary = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.per_seed.len(), 2);
    let m: Vec<f64> = summary.per_seed.iter().map(|s| s.last.mean_obj).collect();
    assert!((summary.metrics.mean_obj.mean - (m[0] + m[1]) / 2.0).abs() < 1e-12);
    assert!((summary.metrics.mean_obj.stderr - (m[0] - m[1]).abs() / 2.0).abs() < 1e-12);
}

#[test]
fn seed_override_replaces_seed_list() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("o");
    let status = code(
        softqd()
            .args(["run", "--seed-override", "11", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out),
    );
    assert_eq!(status, 0);
    assert!(out.join("metrics_11.csv").exists());
    assert!(!out.join("metrics_3.csv").exists());
}

#[test]
fn zero_epochs_reports_initial_population() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::from_toml_str(SMALL).unwrap();
    cfg.squad.epochs = 0;
    cfg.seeds = vec![8];
    let summary = softqd_cli::run(&cfg, &tmp.path().join("z")).unwrap();

    let centroids =
        CentroidsRecord::from_json(&fs::read_to_string(tmp.path().join("z/centroids.json")).unwrap()).unwrap();
    let archive = CvtArchive::<f64>::from_record(&centroids).unwrap();
    let problem = Domain::LinearProjection { behavior_dim: 4 }
        .build::<f64>(DescriptorScaling::ChunkMean)
        .unwrap();
    let pop = seeded_random_population(problem.as_ref(), 32, 8, (-5.12, 5.12)).unwrap();
    let m = compute_metrics(&pop, &archive, 4.0 / 6.0).unwrap();
    let s = &summary.per_seed[0].last;
    assert_eq!(s.epoch, 0);
    assert_eq!(
        (s.qd_score, s.coverage, s.vendi, s.qvs, s.mean_obj, s.max_obj),
        (
            m.qd_score,
            m.coverage_percent,
            m.vendi,
            m.qvs,
            m.mean_objective,
            m.max_objective
        )
    );
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    for name in ["a", "b"] {
        assert_eq!(
            code(
                softqd()
                    .args(["run", "--config"])
                    .arg(&cfg)
                    .arg("--out")
                    .arg(tmp.path().join(name))
            ),
            0
        );
    }
    for f in [
        "metrics_3.csv",
        "metrics_4.csv",
        "population_3.json",
        "summary.json",
        "scatter_4.svg",
    ] {
        assert_eq!(
            fs::read(tmp.path().join("a").join(f)).unwrap(),
            fs::read(tmp.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn baseline_run_reports_in_epochs() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("{SMALL}\nalgorithm = \"map_elites\"\n").replace("[squad]", "algorithm = \"ga_me\"\n[squad]");
    let text = text.replace(
        "\nalgorithm = \"map_elites\"\n",
        "\n[map_elites]\narchive_cells = 100\nbatch = 16\n",
    );
    let cfg = write_config(tmp.path(), &text);
    let out = tmp.path().join("ga");
    assert_eq!(
        code(softqd().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out)),
        0
    );
    let summary: Summary = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    // 32 solutions x (5 + 1) epochs of SQUAD budget.
    assert!(summary
        .per_seed
        .iter()
        .all(|s| s.evaluations == 192 && s.last.epoch == 6));
    let pop = fs::read_to_string(out.join("population_3.json")).unwrap();
    assert!(pop.contains("\"params\""));
}

#[test]
fn sweep_writes_tidy_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("sw");
    let status = code(
        softqd()
            .args(["sweep", "--param", "gamma_sq", "--values", "0.01,1", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out),
    );
    assert_eq!(status, 0);
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "param,value,seed,epoch,qd_score,coverage,vendi,qvs,mean_obj,max_obj,s_tilde"
    );
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("gamma_sq,0.01,3,5,") && lines[4].starts_with("gamma_sq,1,4,5,"));
    assert!(out.join("gamma_sq_1/metrics_4.csv").exists());
}

#[test]
fn usage_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    assert_eq!(code(softqd().arg("run").arg("--frobnicate")), 1);
    assert_eq!(code(&mut softqd()), 1);
    assert_eq!(
        code(
            softqd()
                .args(["sweep", "--param", "neighbors", "--values", "", "--config"])
                .arg(&cfg)
        ),
        1
    );
    assert_eq!(
        code(
            softqd()
                .args(["sweep", "--param", "colour", "--values", "1", "--config"])
                .arg(&cfg)
        ),
        1
    );
    assert_eq!(
        code(
            softqd()
                .args(["sweep", "--param", "neighbors", "--values", "x", "--config"])
                .arg(&cfg)
        ),
        1
    );
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "domain = \"lp-7\"\n").unwrap();
    assert_eq!(code(softqd().args(["run", "--config"]).arg(&bad)), 1);
    fs::write(&bad, "seeds = []\n").unwrap();
    assert_eq!(code(softqd().args(["run", "--config"]).arg(&bad)), 1);
    assert_eq!(
        code(softqd().args(["run", "--config"]).arg(tmp.path().join("missing.toml"))),
        1
    );
}

#[test]
fn runtime_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    assert_eq!(
        code(softqd().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&blocker)),
        2
    );
}

#[test]
fn check_prints_one_row_per_property() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[check]\nsandwich = 5\nmonotone_add = 5\nmonotone_quality = 5\nsubmodular = 5\nlimit = 2\nsamples = 256\n",
    );
    let out = softqd().args(["check", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 6);
    for name in [
        "bound_sandwich",
        "monotone_add",
        "monotone_quality",
        "submodular",
        "limit_equivalence",
    ] {
        assert!(text.lines().any(|l| l.starts_with(name) && l.ends_with("ok")), "{name}");
    }
}

#[test]
fn failed_property_maps_to_exit_three() {
    let report = softqd::theory::PropertyReport {
        name: "demo".into(),
        trials: 3,
        failures: 1,
        worst_margin: -0.5,
    };
    let err = verdict(&[report]).unwrap_err();
    assert!(matches!(err, CliError::PropertyFailure(ref m) if m == "demo"));
    assert_eq!(err.exit_code(), 3);
}
