use std::fs;
use std::path::Path;
use std::process::Command;

use nmq_cli::{run, Command as Cmd, ExperimentConfig};
use nmq_core::diagnostics::{cp_divisibility_map, ChoiSeries};
use nmq_core::lindblad::{damping_basis, lindblad_choi, LindbladParams};

const LINDBLAD: &str = r#"{
  "model": { "lindblad": { "omega_z": 0.5, "gamma_ad": 0.02, "gamma_pd": 0.01 } },
  "grid": { "points": 20 }
}"#;

const ZZ: &str = r#"{
  "model": { "zz": { "n_spectators": 1, "omega_0": 0.05, "J": [0.2],
             "gamma_down": [0.02, 0.01], "gamma_phi": [0.015, 0.0] } },
  "grid": { "points": 20 }
}"#;

fn nmq(dir: &Path, config: &str, args: &[&str]) -> std::process::Output {
    let path = dir.join("config.json");
    fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_nmq"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .output()
        .unwrap()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn manifest_paths(dir: &Path) -> Vec<String> {
    let m: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap();
    m["files"].as_array().unwrap().iter().map(|f| f["path"].as_str().unwrap().to_string()).collect()
}

#[test]
fn seeded_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = nmq(tmp.path(), LINDBLAD, &["tomo", "--shots", "256", "--seed", "11", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (fa, fb) = (files(&a), files(&b));
    assert!(fa.iter().any(|(p, _)| p.starts_with("records")));
    assert_eq!(fa, fb);

    let c = tmp.path().join("c");
    nmq(tmp.path(), LINDBLAD, &["tomo", "--shots", "256", "--seed", "12", "--out", c.to_str().unwrap()]);
    assert_ne!(files(&c), fa);
}

#[test]
fn lindblad_cpdiv_csv_is_nonnegative() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = nmq(tmp.path(), LINDBLAD, &["cpdiv", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("cpdiv.csv")).unwrap();
    let mut rows = 0;
    for line in text.lines().skip(1) {
        let v: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(v >= -1e-7, "{line}");
        rows += 1;
    }
    assert_eq!(rows, 20 * 19 / 2 + 20);
}

#[test]
fn report_lists_every_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let reference = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/zz_reference.json");
    let o = nmq(tmp.path(), &fs::read_to_string(reference).unwrap(), &["report", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let paths = manifest_paths(&out);
    for prefix in ["trajectory_", "tomo_", "cpdiv", "backflow_", "crosstalk", "fit", "kernel_", "summary"] {
        assert!(paths.iter().any(|p| p.starts_with(prefix)), "missing {prefix}: {paths:?}");
    }
    for p in &paths {
        assert!(out.join(p).is_file(), "{p}");
    }
    assert!(!out.join(".nmq-staging").exists());
}

#[test]
fn invalid_config_leaves_nothing_behind() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let bad = LINDBLAD.replace("0.02", "-0.02");
    let o = nmq(tmp.path(), &bad, &["report", "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
    assert!(!out.exists());

    let o = nmq(tmp.path(), LINDBLAD, &["simulate", "--shots", "100", "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(!out.exists());

    let o = nmq(tmp.path(), &LINDBLAD.replace("\"grid\"", "\"grdi\""), &["simulate", "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(!out.exists());
}

#[test]
fn crosstalk_writes_pair_series() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = nmq(tmp.path(), ZZ, &["crosstalk", "--shots", "200", "--seed", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let paths = manifest_paths(&out);
    assert!(paths.contains(&"crosstalk.csv".to_string()));
    assert_eq!(paths.iter().filter(|p| p.starts_with("records/pair_")).count(), 20);
}

#[test]
fn unsupported_command_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = nmq(tmp.path(), LINDBLAD, &["crosstalk", "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(!out.exists());
}

#[test]
fn pipeline_matches_direct_module_calls() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::from_json(LINDBLAD).unwrap();
    cfg.output_dir = tmp.path().join("out");
    run(Cmd::Cpdiv, &cfg).unwrap();

    let p = LindbladParams::new(0.5, 0.02, 0.01).unwrap();
    let basis = damping_basis(&p);
    let times = cfg.grid.times();
    let chois = times.iter().map(|&t| lindblad_choi(&basis, t)).collect();
    let map = cp_divisibility_map(&ChoiSeries::new(times, chois).unwrap()).unwrap();
    let written = fs::read_to_string(cfg.output_dir.join("cpdiv.csv")).unwrap();
    let mut direct = Vec::new();
    map.write_csv(&mut direct).unwrap();
    let direct = String::from_utf8(direct).unwrap();
    for (w, d) in written.lines().zip(direct.lines()).skip(1) {
        let parse = |l: &str| l.split(',').map(|x| x.parse::<f64>().unwrap()).collect::<Vec<_>>();
        let (w, d) = (parse(w), parse(d));
        assert_eq!(w[..2], d[..2]);
        assert!((w[2] - d[2]).abs() < 1e-9, "{w:?} vs {d:?}");
    }
    assert_eq!(written.lines().count(), direct.lines().count());
}

#[test]
fn fit_stage_recovers_lindblad_rates() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::from_json(LINDBLAD).unwrap();
    cfg.output_dir = tmp.path().join("out");
    cfg.main_states = vec![nmq_core::quantum::Ket::Plus];
    run(Cmd::Fit, &cfg).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&fs::read(cfg.output_dir.join("fit.json")).unwrap()).unwrap();
    let f = &v["+"];
    for (key, want) in [("omega_z", 0.5), ("gamma_ad", 0.02), ("gamma_pd", 0.01)] {
        let got = f[key].as_f64().unwrap();
        assert!((got - want).abs() / want < 0.01, "{key}: {got}");
    }
}
