use equivar_cli::main_with;
use equivar_cli::output::sha256_hex;
use std::fs;
use std::path::Path;

const QUICK: &str = "group.dihedral = 3\ngrid.R = 4\ngrid.h = 0.2\n";

fn run(dir: &Path, args: &[&str]) -> i32 {
    let mut argv = vec!["equivar", "--quiet", "--out", dir.to_str().unwrap()];
    argv.extend_from_slice(args);
    main_with(argv)
}

fn with_config(dir: &Path, text: &str) -> String {
    let p = dir.join("input.cfg");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn group_reports_order_and_orbit() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["group"]), 0);
    let g = json(&dir.path().join("group.json"));
    assert_eq!(g["order"], 6);
    assert_eq!(g["N"], 3);
    assert_eq!(g["stabilizer_order"], 2);
}

#[test]
fn solve_then_verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_dir = tempfile::tempdir().unwrap();
    let cfg = with_config(cfg_dir.path(), QUICK);
    assert_eq!(run(dir.path(), &["--config", &cfg, "solve"]), 0);
    for f in ["field.csv", "energy_history.csv", "positivity.csv", "flow_result.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    assert_eq!(run(dir.path(), &["verify"]), 0);
    let rep = json(&dir.path().join("verify_report.json"));
    for key in ["kato_min", "subharmonic_min", "positivity_min", "measure_fraction", "decay_k", "decay_R2", "comparison_violations"] {
        assert!(rep[key].is_number(), "{key}");
    }
    assert!(dir.path().join("decay_scatter.csv").is_file());
    assert!(dir.path().join("sigma_profile.csv").is_file());
}

#[test]
fn corrupted_field_fails_a_named_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_dir = tempfile::tempdir().unwrap();
    let cfg = with_config(cfg_dir.path(), QUICK);
    assert_eq!(run(dir.path(), &["--config", &cfg, "solve"]), 0);
    // push every field value far from a1 so the positivity and decay checks break
    let text = fs::read_to_string(dir.path().join("field.csv")).unwrap();
    let mut out = String::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            out.push_str(line);
        } else {
            let cols: Vec<&str> = line.split(',').collect();
            out.push_str(&format!("{},{},-1.0,0.5", cols[0], cols[1]));
        }
        out.push('\n');
    }
    fs::write(dir.path().join("field.csv"), out).unwrap();
    let report = dir.path().join("bad.json");
    let code = run(
        dir.path(),
        &["verify", "--report", report.to_str().unwrap()],
    );
    assert_eq!(code, 1);
    let rep = json(&report);
    let failed: Vec<&str> = rep["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["pass"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert!(failed.contains(&"positivity"), "{failed:?}");
}

#[test]
fn truncated_field_fails_the_field_check() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("field.csv"), "x1,x2,u1,u2\n0,0,1,0\n").unwrap();
    fs::write(dir.path().join("config.txt"), QUICK).unwrap();
    assert_eq!(run(dir.path(), &["verify"]), 1);
    let rep = json(&dir.path().join("verify_report.json"));
    assert_eq!(rep["checks"][0]["name"], "field");
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["frobnicate"]), 2);
    let cfg = with_config(dir.path(), "group.dihedral = 3\ngrid.R = 8\nflow.dt = 1\n");
    assert_eq!(run(dir.path(), &["--config", &cfg, "solve"]), 2);
    let cfg = with_config(dir.path(), "group.dihedral = 3\ngrid.R = 8\nbogus = 1\n");
    assert_eq!(run(dir.path(), &["--config", &cfg, "group"]), 2);
    assert_eq!(run(dir.path(), &["solve", "--h", "9"]), 2);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["--seed", "42", "group"]), 0);
    let cfg = fs::read_to_string(dir.path().join("config.txt")).unwrap();
    assert!(cfg.lines().any(|l| l == "seed = 42"), "{cfg}");
    assert_eq!(json(&dir.path().join("manifest.json"))["seed"], 42);
}

#[test]
fn compare_writes_profiles_and_constants() {
    let dir = tempfile::tempdir().unwrap();
    let code = run(dir.path(), &["compare", "--c", "2.88", "--Qmax", "1.0"]);
    let rep = json(&dir.path().join("compare_report.json"));
    assert_eq!(code, if rep["all_clauses_hold"] == true { 0 } else { 1 });
    assert_eq!(rep["c"], 2.88);
    let profile = fs::read_to_string(dir.path().join("sigma_profile.csv")).unwrap();
    assert!(profile.starts_with("r,value,derivative\n"));
    assert!(profile.lines().count() > 10);
}

#[test]
fn manifest_covers_every_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_dir = tempfile::tempdir().unwrap();
    let cfg = with_config(cfg_dir.path(), QUICK);
    assert_eq!(run(dir.path(), &["--config", &cfg, "solve"]), 0);
    assert_eq!(run(dir.path(), &["verify"]), 0);
    let m = json(&dir.path().join("manifest.json"));
    assert_eq!(m["command"], "verify");
    let listed: Vec<String> = m["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["path"].as_str().unwrap().to_string())
        .collect();
    let mut present: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n != "manifest.json")
        .collect();
    present.sort();
    assert_eq!(listed, present);
    for f in m["files"].as_array().unwrap() {
        let bytes = fs::read(dir.path().join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), sha256_hex(&bytes));
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let root = tempfile::tempdir().unwrap();
    let dir = root.path().join("run");
    let cfg = with_config(root.path(), QUICK);
    let mut runs = Vec::new();
    for _ in 0..2 {
        let _ = fs::remove_dir_all(&dir);
        assert_eq!(run(&dir, &["--config", &cfg, "--seed", "7", "solve"]), 0);
        assert_eq!(run(&dir, &["--seed", "7", "verify"]), 0);
        runs.push(json(&dir.join("manifest.json"))["files"].clone());
    }
    assert_eq!(runs[0], runs[1]);
    assert!(runs[0].as_array().unwrap().len() >= 8);
}

#[test]
fn warm_start_interpolates_from_a_coarser_run() {
    let coarse = tempfile::tempdir().unwrap();
    let fine = tempfile::tempdir().unwrap();
    let cfg_dir = tempfile::tempdir().unwrap();
    let cfg = with_config(cfg_dir.path(), QUICK);
    assert_eq!(run(coarse.path(), &["--config", &cfg, "solve"]), 0);
    let init = coarse.path().join("field.csv");
    let code = run(
        fine.path(),
        &["--config", &cfg, "solve", "--h", "0.1", "--max-steps", "50", "--init", init.to_str().unwrap()],
    );
    assert_eq!(code, 0);
    let r = json(&fine.path().join("flow_result.json"));
    let seed_energy = r["seed_energy"].as_f64().unwrap();
    // the interpolated start is already close to the relaxed energy, far below the affine seed
    let coarse_r = json(&coarse.path().join("flow_result.json"));
    assert!(seed_energy < coarse_r["seed_energy"].as_f64().unwrap());
}
