use std::path::PathBuf;
use std::process::{Command, Output};

fn squadsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_squadsim")).args(args).output().expect("run squadsim")
}

fn scratch(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("squadsim-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

#[test]
fn flags_override_config_file() {
    let cfg = scratch("override.conf", "# run setup\nk = 200\ndelta_grid = 0,0.05\n");
    let out = squadsim(&["analyze", "--config", cfg.to_str().unwrap(), "--delta-grid", "0.02"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("# k=200"));
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "delta,stall_dopings,uncovered,predicted_kd,p_d");
    assert_eq!(rows.len(), 2);
    assert!(rows[1].starts_with("0.02,"));
}

#[test]
fn unknown_config_key_names_the_line() {
    let cfg = scratch("bad.conf", "k = 100\n\nbogus = 3\n");
    let out = squadsim(&["analyze", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.conf:3"), "{err}");
}

#[test]
fn bad_values_are_usage_errors() {
    for args in [
        &["analyze", "--k", "ten"][..],
        &["decode-sim", "--dist", "lt"],
        &["cost", "--h-grid", "log:10:1:0"],
        &["validate", "--criterion", "99"],
    ] {
        let out = squadsim(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn yield_dump_starts_at_the_anchor() {
    let out = squadsim(&["analyze", "--yield-lambda", "1", "--t-max", "5"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "t,p");
    assert_eq!(rows[1], "1,0");
    assert_eq!(rows[2], format!("2,{}", squad_experiments::output::fmt_g9((-2f64).exp())));
    assert_eq!(rows.len(), 6);
}

#[test]
fn out_flag_writes_a_file() {
    let path = scratch("out.csv", "");
    let out = squadsim(&["disseminate", "--k", "9", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# command=disseminate\n"));
    assert!(!text.contains('\r'));
}

#[test]
fn single_validation_criterion() {
    let out = squadsim(&["validate", "--criterion", "2"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("[PASS]  2 yield_anchor"));
}
