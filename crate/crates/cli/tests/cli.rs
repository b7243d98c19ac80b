use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scratch(name: &str) -> PathBuf {
    let d = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn micromacro(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_micromacro"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("spawn micromacro")
}

fn with_config(dir: &Path, text: &str, cmd: &str) -> Output {
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, text).unwrap();
    micromacro(&[cmd, "--config", cfg.to_str().unwrap()], &dir.join("out"))
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn unknown_key_is_config_error() {
    let d = scratch("unknown");
    let o = with_config(&d, "# comment\nexperiment.eta_h = 0.2\nexperiment.etah = 0.2\n", "curves");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("experiment.etah"), "{}", stderr(&o));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn bad_value_is_config_error() {
    let d = scratch("bad_value");
    let o = with_config(&d, "experiment.eta_h = 1.5\n", "curves");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("experiment.eta_h"), "{}", stderr(&o));
    let o = with_config(&d, "curves.band_samples = many\n", "curves");
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn empty_grid_is_config_error() {
    let d = scratch("empty_grid");
    let o = with_config(&d, "curves.alpha2_min = 10\ncurves.alpha2_max = 5\n", "curves");
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn csv_has_provenance_header() {
    let d = scratch("provenance");
    let o = micromacro(&["hom", "--seed", "5"], &d);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(d.join("hom_summary.csv")).unwrap();
    let header: Vec<&str> = text.lines().take_while(|l| l.starts_with('#')).collect();
    assert!(header.iter().any(|l| l.contains("config_sha256")));
    assert!(header.iter().any(|l| l.contains("seed: 5")));
    assert!(header.iter().any(|l| l.contains(env!("CARGO_PKG_VERSION"))));
    assert!(d.join("hom.config").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (scratch("rerun_a"), scratch("rerun_b"));
    for d in [&a, &b] {
        let o = micromacro(&["tomo", "--seed", "3", "--svg"], d);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    // the resolved .config records the output path, so only results are compared
    let mut names: Vec<PathBuf> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| PathBuf::from(e.unwrap().file_name()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv" || x == "svg"))
        .collect();
    names.sort();
    assert!(names.len() >= 2);
    for n in names {
        let read = |d: &Path| std::fs::read_to_string(d.join(&n)).unwrap();
        assert!(read(&a) == read(&b), "{} differs", n.display());
    }
}

#[test]
fn seed_changes_hash() {
    let (a, b) = (scratch("seed_a"), scratch("seed_b"));
    assert!(micromacro(&["tomo", "--seed", "1"], &a).status.success());
    assert!(micromacro(&["tomo", "--seed", "2"], &b).status.success());
    let line = |d: &Path| -> String {
        std::fs::read_to_string(d.join("tomo_summary.csv"))
            .unwrap()
            .lines()
            .find(|l| l.contains("config_sha256"))
            .unwrap()
            .to_string()
    };
    assert_ne!(line(&a), line(&b));
}

#[test]
fn validate_passes() {
    let d = scratch("validate");
    let o = micromacro(&["validate"], &d);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(d.join("validate.csv").exists());
}
