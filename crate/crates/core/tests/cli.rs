use std::fs;
use std::path::Path;
use std::process::Command;

use bosonstar::config::parse_config;
use bosonstar::io::StageStatus;
use bosonstar::orchestrate::orchestrate;

const SMALL: &str = "R = 20\nn = 511\nmultistart = 1\ngn_inputs = 10\nhardy_inputs = 10\npair_inputs = 4\nh_inputs = 3\npair_n = 255\n";

fn small(extra: &str) -> bosonstar::config::RunConfig {
    parse_config(&format!("{SMALL}{extra}")).unwrap()
}

fn manifest_json(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn repeated_runs_produce_identical_files() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = small("subcommand = ineq\nseed = 7\n");
    let ma = orchestrate(&cfg, a.path()).unwrap();
    let mb = orchestrate(&cfg, b.path()).unwrap();
    assert!(ma.all_checks_pass(), "{:?}", ma.checks);
    assert_eq!(ma.files, mb.files);
    for f in &ma.files {
        assert_eq!(fs::read(a.path().join(&f.path)).unwrap(), fs::read(b.path().join(&f.path)).unwrap());
    }
}

#[test]
fn cached_q_is_reused_across_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let gn = orchestrate(&small("subcommand = gn\n"), dir.path()).unwrap();
    assert!(!gn.partial);
    let first = fs::read_to_string(dir.path().join("gn_summary.csv")).unwrap();
    let hartree = orchestrate(&small("subcommand = hartree\na = 1.5\n"), dir.path()).unwrap();
    assert!(!hartree.partial);
    assert!(hartree.files.iter().any(|f| f.path.starts_with("cache")));
    let again = orchestrate(&small("subcommand = gn\n"), dir.path()).unwrap();
    assert_eq!(fs::read_to_string(dir.path().join("gn_summary.csv")).unwrap(), first);
    assert_eq!(gn.files, again.files);
}

#[test]
fn failing_stage_leaves_a_partial_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let m = orchestrate(&small("subcommand = ed\ned_n = 16\ncounts = 40\n"), dir.path()).unwrap();
    assert!(m.partial && !m.all_checks_pass());
    let ed = m.stages.iter().find(|s| s.name == "ed").unwrap();
    assert_eq!(ed.status, StageStatus::Failed);
    assert!(!ed.message.is_empty());
    let json = manifest_json(dir.path());
    assert_eq!(json["partial"], true);
    assert!(dir.path().join("config.txt").exists());
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_bosonstar");
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.txt");
    fs::write(&cfg, SMALL).unwrap();
    let run = |args: &[&str]| {
        Command::new(bin)
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(dir.path().join("out"))
            .args(args)
            .output()
            .unwrap()
    };
    assert_eq!(run(&["--set", "bogus_key=1", "ineq"]).status.code(), Some(2));
    assert_eq!(run(&["hartree", "--a", "3.0"]).status.code(), Some(2));
    let ok = run(&["ineq"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));
    assert!(dir.path().join("out/ineq_report.csv").exists());
    let json = manifest_json(&dir.path().join("out"));
    assert_eq!(json["partial"], false);
}

#[test]
fn config_text_round_trips() {
    let cfg = small("subcommand = ed\nN = 2,3\na_fractions = 0,0.5\ncounts = 4,2\ngamma1 = true\n");
    assert_eq!(parse_config(&cfg.to_text()).unwrap(), cfg);
    assert!(parse_config("not_a_key = 1\n").unwrap_err().to_string().contains("not_a_key"));
}
