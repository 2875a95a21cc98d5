use std::path::Path;
use std::process::{Command, Output};

use credyn::cli::{Paths, RunConfig, StudyOptions};
use credyn::synth::PopulationConfig;

fn credyn(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_credyn"))
        .args(args)
        .current_dir(cwd)
        .env_remove("CREDYN_SEED")
        .env_remove("CREDYN_OUT")
        .output()
        .expect("spawn credyn")
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let cfg = RunConfig {
        last_month: 3,
        population: PopulationConfig::scaled(0.05),
        paths: Paths {
            out: dir.join("out"),
            ..Paths::default()
        },
        study: StudyOptions {
            cv_folds: 4,
            save_models: true,
            ..StudyOptions::default()
        },
        ..RunConfig::default()
    };
    let path = dir.join("credyn.toml");
    std::fs::write(&path, toml::to_string(&cfg).unwrap()).unwrap();
    path
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn same_seed_gives_identical_models() {
    let mut runs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path());
        let cfg = cfg.to_str().unwrap();
        for cmd in ["generate", "study"] {
            let out = credyn(&["--config", cfg, "--seed", "7", cmd], dir.path());
            assert!(out.status.success(), "{cmd}: {}", stderr(&out));
        }
        let models = dir.path().join("out/study/models");
        let mut files: Vec<_> = std::fs::read_dir(&models)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        files.sort();
        assert!(!files.is_empty());
        let contents: Vec<(String, Vec<u8>)> = files
            .iter()
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(p).unwrap()))
            .collect();
        runs.push((dir, contents));
    }
    assert_eq!(runs[0].1, runs[1].1);
}

#[test]
fn missing_panel_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = credyn(&["--config", cfg.to_str().unwrap(), "study"], dir.path());
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.contains("panel.csv"), "{err}");
    assert_eq!(err.lines().count(), 1, "{err}");
}

#[test]
fn malformed_dpd_token_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let cfg = cfg.to_str().unwrap();
    let out = credyn(&["--config", cfg, "generate"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));

    let panel = dir.path().join("out/data/panel.csv");
    let text = std::fs::read_to_string(&panel).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let dpd = header.iter().position(|h| *h == "dpd_bucket").unwrap();
    let lines: Vec<String> = text
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if i + 1 == 412 {
                let mut f: Vec<&str> = l.split(',').collect();
                f[dpd] = "91-120";
                f.join(",")
            } else {
                l.to_string()
            }
        })
        .collect();
    assert!(lines.len() > 412);
    std::fs::write(&panel, lines.join("\n") + "\n").unwrap();

    let out = credyn(&["--config", cfg, "study"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("line 412"), "{err}");
    assert!(err.contains("panel.csv"), "{err}");
}

#[test]
fn help_and_usage_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(credyn(&["--help"], dir.path()).status.code(), Some(0));
    let out = credyn(&["study", "--fast"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("error[usage]: "));
}
