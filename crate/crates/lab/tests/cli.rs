use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rsoup::commands::{FinetuneReport, FrontFile, ScratchReport};
use rsoup::ExperimentConfig;
use rsoup_core::checkpoint;
use rsoup_core::trainer;

const SMALL: &str = r#"
seed = 5
rewards = ["R0", "R1"]

[env]
kind = "pointmass"
horizon = 20

[arch]
hidden = [4]
log_std = { fixed = -0.3 }

[pretrain]
learning_rate = 0.01
updates = 10
optimizer = { kind = "adam", beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8 }

[finetune]
learning_rate = 0.002
updates = 5

[eval]
episodes = 20
selection_episodes = 20
"#;

fn rsoup(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rsoup")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.toml");
    fs::write(&p, text).unwrap();
    p
}

fn run_ok(config: &Path, out: &Path, cmd: &[&str]) {
    let mut args = vec!["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(cmd);
    let o = rsoup(&args);
    assert!(o.status.success(), "{cmd:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn read_json<T: serde::de::DeserializeOwned>(p: &Path) -> T {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn missing_env_section_is_a_usage_error_naming_env() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SMALL.replace("[env]\nkind = \"pointmass\"\nhorizon = 20\n", "");
    let cfg = write_config(tmp.path(), &text);
    let o = rsoup(&["--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap(), "pretrain"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("env"));
}

#[test]
fn rs_without_a_checkpoint_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let o = rsoup(&["--config", cfg.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap(), "rs"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("pretrained.ckpt"));
}

#[test]
fn zero_update_pretraining_saves_the_seeded_init() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &SMALL.replace("updates = 10", "updates = 0"));
    run_ok(&cfg, tmp.path(), &["pretrain"]);
    let config = ExperimentConfig::load(&cfg).unwrap();
    let init = trainer::fresh_init(config.arch_spec().unwrap(), config.seed).unwrap();
    assert_eq!(fs::read(tmp.path().join("pretrained.ckpt")).unwrap(), checkpoint::encode(&init));
}

#[test]
fn pretraining_is_byte_identical_across_runs_and_seed_overrides_apply() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    run_ok(&cfg, &a, &["pretrain"]);
    run_ok(&cfg, &b, &["pretrain", "--jobs", "1"]);
    run_ok(&cfg, &c, &["pretrain", "--seed", "6"]);
    let read = |d: &Path| fs::read(d.join("pretrained.ckpt")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    assert_eq!(fs::read(a.join("pretrain_history.csv")).unwrap(), fs::read(b.join("pretrain_history.csv")).unwrap());
}

#[test]
fn fronts_have_the_documented_shape_and_shared_vertices() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path();
    for cmd in ["pretrain", "finetune", "rs", "morl"] {
        run_ok(&cfg, out, &[cmd]);
    }
    let rs_csv = fs::read_to_string(out.join("front_rs.csv")).unwrap();
    let lines: Vec<&str> = rs_csv.lines().collect();
    assert_eq!(lines[0], "lambda,R0,R1,provenance");
    assert_eq!(lines.len(), 12);
    assert!(lines[1].ends_with("endpoint:R0") && lines[11].ends_with("endpoint:R1"));
    let morl_csv = fs::read_to_string(out.join("front_morl.csv")).unwrap();
    assert_eq!(morl_csv.lines().next().unwrap(), "mu,R0,R1,provenance");
    assert_eq!(morl_csv.lines().count(), 12);

    let ft: FinetuneReport = read_json(&out.join("finetune.json"));
    let rs: FrontFile = read_json(&out.join("front_rs.json"));
    let morl: FrontFile = read_json(&out.join("front_morl.json"));
    assert_eq!(rs.rows[0].eval, ft.evals[0]);
    assert_eq!(rs.rows[10].eval, ft.evals[1]);
    assert_eq!(morl.rows[0].eval, rs.rows[0].eval);
    assert_eq!(morl.rows[10].eval, rs.rows[10].eval);
    assert_eq!(rs.config_hash, ExperimentConfig::load(&cfg).unwrap().hash());

    let lmc = fs::read_to_string(out.join("lmc.csv")).unwrap();
    assert_eq!(lmc.lines().next().unwrap(), "lambda,R0_interpolated,R0_linear,R0_margin,R1_interpolated,R1_linear,R1_margin");
    assert_eq!(lmc.lines().count(), 12);
}

fn front_csv(dir: &Path, name: &str, rows: &[(f64, f64)], ids: (&str, &str)) -> PathBuf {
    let mut text = format!("{},{},provenance\n", ids.0, ids.1);
    for (a, b) in rows {
        text.push_str(&format!("{a},{b},init\n"));
    }
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn compare_reproduces_the_hand_computed_deficiencies() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let two = front_csv(d, "two.csv", &[(1.0, 0.0), (0.0, 1.0)], ("a", "b"));
    let three = front_csv(d, "three.csv", &[(1.0, 0.0), (0.0, 1.0), (0.6, 0.6)], ("a", "b"));
    let o = rsoup(&["--out", d.to_str().unwrap(), "compare", two.to_str().unwrap(), three.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = read_json(&d.join("compare.json"));
    let defs: Vec<f64> = serde_json::from_value(report["deficiency_per_front"].clone()).unwrap();
    assert!((defs[0] - 1.0).abs() < 1e-12 && (defs[1] - 0.64).abs() < 1e-12, "{defs:?}");
    assert_eq!(report["utopia"], serde_json::json!([1.0, 1.0]));
    assert_eq!(report["floor"], serde_json::json!([0.0, 0.0]));

    let o = rsoup(&["--out", d.to_str().unwrap(), "compare", three.to_str().unwrap(), three.to_str().unwrap()]);
    assert!(o.status.success());
    let report: serde_json::Value = read_json(&d.join("compare.json"));
    assert_eq!(report["relative_gap"], serde_json::json!(0.0));

    let other = front_csv(d, "other.csv", &[(1.0, 0.0)], ("a", "c"));
    let o = rsoup(&["--out", d.to_str().unwrap(), "compare", two.to_str().unwrap(), other.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn quad_verify_passes_by_default_and_fails_the_negative_control() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    assert_eq!(rsoup(&["--out", a.to_str().unwrap(), "quad-verify"]).status.code(), Some(0));
    assert_eq!(rsoup(&["--out", b.to_str().unwrap(), "quad-verify"]).status.code(), Some(0));
    assert_eq!(fs::read(a.join("bound_curve.csv")).unwrap(), fs::read(b.join("bound_curve.csv")).unwrap());
    assert_eq!(fs::read(a.join("quad_verify.json")).unwrap(), fs::read(b.join("quad_verify.json")).unwrap());
    let o = rsoup(&["--out", c.to_str().unwrap(), "quad-verify", "--count", "100", "--bound-scale", "0.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("instance"));
    let header = fs::read_to_string(a.join("bound_curve.csv")).unwrap();
    assert_eq!(header.lines().next().unwrap(), "mu_hat,rs_value,lmc_lower,bound_M=1,bound_M=2,bound_M=5,bound_M=10");
    assert_eq!(header.lines().count(), 22);
}

#[test]
fn scratch_control_pairs_share_the_lambda_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("o");
    let o = rsoup(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "scratch-control", "--repeats", "2"]);
    assert!(matches!(o.status.code(), Some(0) | Some(1)), "{}", String::from_utf8_lossy(&o.stderr));
    let r: ScratchReport = read_json(&out.join("scratch_control.json"));
    assert_eq!(r.pairs.len(), 2);
    for p in &r.pairs {
        let a: Vec<f64> = p.pretrained.rows.iter().map(|x| x.lambda).collect();
        let b: Vec<f64> = p.scratch.rows.iter().map(|x| x.lambda).collect();
        assert_eq!(a, b);
        assert_eq!(p.difference, p.pretrained_mean_margin - p.scratch_mean_margin);
    }
    assert_eq!(r.ordering_holds, o.status.code() == Some(0));
}

#[test]
fn shipped_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for name in ["pointmass.toml", "tokenseq.toml"] {
        let c = ExperimentConfig::load(&dir.join(name)).unwrap();
        rsoup::Experiment::new(c).unwrap();
    }
}
