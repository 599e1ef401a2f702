use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &[&str] = &["--samples_per_class", "50", "--dim", "2", "--train_epochs", "20", "--epochs", "3"];

fn cli(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_unlearnkit"))
        .arg("--root")
        .arg(root)
        .args(args)
        .env_remove("UNLEARNKIT_ROOT")
        .output()
        .unwrap()
}

fn with_small<'a>(cmd: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![cmd];
    v.extend_from_slice(SMALL);
    v.extend_from_slice(extra);
    v
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "status {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn run_dir(stdout: &str) -> PathBuf {
    PathBuf::from(stdout.lines().last().unwrap().trim())
}

#[test]
fn forced_rerun_is_byte_identical_for_every_method() {
    let root = tempfile::tempdir().unwrap();
    ok(&cli(root.path(), &with_small("train", &[])));
    for method in ["exact_retrain", "neg_grad", "rand_label", "bad_t", "scrub", "salun", "l1_sparse_ft"] {
        let dir = run_dir(&ok(&cli(root.path(), &with_small("unlearn", &["--unlearn_method", method]))));
        let first_report = fs::read(dir.join("report.json")).unwrap();
        let first_model = fs::read(dir.join("model.json")).unwrap();
        let again = run_dir(&ok(&cli(root.path(), &with_small("unlearn", &["--unlearn_method", method, "--force"]))));
        assert_eq!(again, dir);
        assert_eq!(fs::read(dir.join("report.json")).unwrap(), first_report, "{method}");
        assert_eq!(fs::read(dir.join("model.json")).unwrap(), first_model, "{method}");
    }
}

#[test]
fn completed_run_is_not_redone() {
    let root = tempfile::tempdir().unwrap();
    ok(&cli(root.path(), &with_small("train", &[])));
    let dir = run_dir(&ok(&cli(root.path(), &with_small("unlearn", &[]))));
    let timing = fs::read(dir.join("timing.json")).unwrap();
    let out = cli(root.path(), &with_small("unlearn", &[]));
    assert_eq!(run_dir(&ok(&out)), dir);
    assert!(String::from_utf8_lossy(&out.stderr).contains("already complete"));
    assert_eq!(fs::read(dir.join("timing.json")).unwrap(), timing);
}

#[test]
fn evaluate_reproduces_stored_report() {
    let root = tempfile::tempdir().unwrap();
    ok(&cli(root.path(), &with_small("train", &[])));
    let dir = run_dir(&ok(&cli(root.path(), &with_small("unlearn", &["--del_ratio", "5"]))));
    let stored = fs::read_to_string(dir.join("report.json")).unwrap();
    let printed = ok(&cli(root.path(), &["evaluate", dir.to_str().unwrap()]));
    let a: serde_json::Value = serde_json::from_str(&stored).unwrap();
    let b: serde_json::Value = serde_json::from_str(&printed).unwrap();
    assert_eq!(a, b);
    assert_eq!(a["config_hash"].as_str().unwrap(), dir.file_name().unwrap().to_str().unwrap());
}

#[test]
fn unknown_key_is_a_config_error() {
    let root = tempfile::tempdir().unwrap();
    let out = cli(root.path(), &["train", "--no_such_key", "3"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_key"));
}

#[test]
fn unlearning_without_an_original_is_a_resolution_error() {
    let root = tempfile::tempdir().unwrap();
    let out = cli(root.path(), &with_small("unlearn", &[]));
    assert_eq!(out.status.code(), Some(1));
    assert!(!root.path().join("manifest.json").exists());
}

#[test]
fn help_and_version_exit_zero() {
    let root = tempfile::tempdir().unwrap();
    assert_eq!(cli(root.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(cli(root.path(), &["--version"]).status.code(), Some(0));
    assert_eq!(cli(root.path(), &["bogus"]).status.code(), Some(1));
}

#[test]
fn config_file_and_overrides_combine() {
    let root = tempfile::tempdir().unwrap();
    let file = root.path().join("exp.cfg");
    fs::write(&file, "# small run\nsamples_per_class = 50\ndim = 2\ntrain_epochs = 20\nepochs = 3\ndel_ratio = 2\n").unwrap();
    let cfg = file.to_str().unwrap();
    ok(&cli(root.path(), &["train", "--config", cfg]));
    let dir = run_dir(&ok(&cli(root.path(), &["unlearn", "--config", cfg, "del_ratio=4"])));
    let text = fs::read_to_string(dir.join("config.txt")).unwrap();
    assert!(text.contains("del_ratio = 4"), "{text}");
    assert!(text.contains("samples_per_class = 50"), "{text}");
}

#[test]
fn sweep_resumes_and_reports() {
    let root = tempfile::tempdir().unwrap();
    let grid = ["--methods", "neg_grad,rand_label", "--ratios", "1..2", "--seeds", "0", "--jobs", "2"];
    let mut args = vec!["sweep"];
    args.extend_from_slice(&grid);
    args.extend_from_slice(SMALL);
    let first = ok(&cli(root.path(), &args));
    assert!(first.contains("done 4"), "{first}");
    let second = ok(&cli(root.path(), &args));
    assert!(second.contains("skipped 4") && second.contains("done 0"), "{second}");

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(root.path().join("manifest.json")).unwrap()).unwrap();
    let text = manifest.to_string();
    assert_eq!(text.matches("\"done\"").count(), 4, "{text}");

    let md = ok(&cli(root.path(), &["report"]));
    assert!(md.contains("NegGrad") && md.contains("RandLabel"), "{md}");
    for f in ["leaderboard.md", "leaderboard.csv", "curves.csv", "time_table.md", "mia_table.md", "scaling.csv"] {
        assert!(root.path().join("report").join(f).is_file(), "{f}");
    }
}
