use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use eustwin::dataset::{import_training_set, MANIFEST_FILE};
use eustwin::imaging::{read_pgm, BModeImage};
use serde_json::Value;

fn eustwin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eustwin"))
        .args(args)
        .env("EUSTWIN_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Value {
    let out = eustwin(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap_or(Value::Null)
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate_wire(dir: &Path, id: &str, seed: u64) -> Value {
    ok(&["simulate", "--out", s(dir), "--id", id, "--seed", &seed.to_string()])
}

fn sorted_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

#[test]
fn simulate_wire_writes_pair_and_echoes_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let summary = simulate_wire(tmp.path(), "w", 42);
    assert_eq!(summary["seed"], 42);
    assert_eq!(summary["wires"], 3);
    for tag in ["low", "high"] {
        let (w, h, _) = read_pgm(&tmp.path().join(format!("w_{tag}.pgm"))).unwrap();
        assert_eq!((w, h), (436, 1000));
        let img = BModeImage::read(&tmp.path().join(format!("w_{tag}.pgm"))).unwrap();
        assert_eq!(img.meta.seed, Some(42));
        assert_eq!(img.meta.transducer_id, tag);
    }
    let run = fs::read_to_string(tmp.path().join("w_run.toml")).unwrap();
    assert!(run.contains("seed = 42"), "{run}");
}

#[test]
fn simulate_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        ok(&[
            "simulate",
            "--phantom",
            "tissue",
            "--density",
            "1",
            "--out",
            s(dir),
            "--id",
            "t",
            "--seed",
            "5",
        ]);
    }
    let fa = sorted_files(&a);
    assert_eq!(fa.len(), 9);
    for (x, y) in fa.iter().zip(sorted_files(&b)) {
        assert_eq!(x.file_name(), y.file_name());
        assert_eq!(fs::read(x).unwrap(), fs::read(&y).unwrap(), "{x:?}");
    }
    let c = tmp.path().join("c");
    ok(&[
        "simulate",
        "--phantom",
        "tissue",
        "--density",
        "1",
        "--out",
        s(&c),
        "--id",
        "t",
        "--seed",
        "6",
    ]);
    assert_ne!(
        fs::read(a.join("t_high.pgm")).unwrap(),
        fs::read(c.join("t_high.pgm")).unwrap()
    );
}

#[test]
fn invalid_bandwidth_names_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "[high]\nfractional_bandwidth = 3.0\n").unwrap();
    let out = eustwin(&["simulate", "--config", s(&cfg), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("high.fractional_bandwidth"), "{}", stderr(&out));
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn config_rejects_unknown_keys_and_flags_win() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "seed = 1\n[phantom]\nkind = \"wire\"\nwire_depth = [0.005]\n").unwrap();
    let out = eustwin(&["simulate", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("wire_depth"), "{}", stderr(&out));

    fs::write(&cfg, "seed = 1\nid = \"cfg\"\n[phantom]\nwire_depths_m = [0.008]\n").unwrap();
    let summary = ok(&["simulate", "--config", s(&cfg), "--seed", "9", "--out", s(tmp.path())]);
    assert_eq!(summary["seed"], 9);
    assert_eq!(summary["id"], "cfg");
    assert_eq!(summary["wires"], 1);

    let out = eustwin(&["simulate", "--config", s(&tmp.path().join("missing.toml"))]);
    assert_eq!(out.status.code(), Some(2));
    let out = eustwin(&["simulate", "--noise-sigma=-1", "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("noise_sigma"));
}

#[test]
fn evaluate_wire_resolution_improves_with_frequency() {
    let tmp = tempfile::tempdir().unwrap();
    simulate_wire(tmp.path(), "w", 1);
    let report = ok(&["evaluate", "--dir", s(tmp.path()), "--id", "w"]);
    assert_eq!(report["seed"], 1);
    let low = report["low"]["targets"].as_array().unwrap();
    let high = report["high"]["targets"].as_array().unwrap();
    assert_eq!(low.len(), 3);
    for (l, h) in low.iter().zip(high) {
        for key in ["lateral_fwhm_m", "axial_fwhm_m"] {
            assert!(h[key].as_f64().unwrap() < l[key].as_f64().unwrap(), "{key}");
        }
        assert!(l["esnr_db"].as_f64().unwrap().is_finite());
    }
    let first = fs::read(tmp.path().join("w_report.json")).unwrap();
    ok(&["evaluate", "--dir", s(tmp.path()), "--id", "w"]);
    assert_eq!(fs::read(tmp.path().join("w_report.json")).unwrap(), first);
}

#[test]
fn evaluate_empty_regions_lists_kinds() {
    let tmp = tempfile::tempdir().unwrap();
    simulate_wire(tmp.path(), "w", 1);
    let regions = tmp.path().join("empty.json");
    fs::write(
        &regions,
        r#"{"format":"eustwin-regions","version":1,"image_width":436,"image_height":1000,"regions":[]}"#,
    )
    .unwrap();
    let out = eustwin(&[
        "evaluate",
        "--dir",
        s(tmp.path()),
        "--id",
        "w",
        "--regions",
        s(&regions),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = stderr(&out);
    for kind in ["target", "noise", "background", "homogeneous", "speckle"] {
        assert!(err.contains(kind), "{err}");
    }
}

#[test]
fn patchify_then_reconstruct_is_exact() {
    let tmp = tempfile::tempdir().unwrap();
    simulate_wire(tmp.path(), "w", 2);
    let patches = tmp.path().join("p");
    let summary = ok(&["patchify", "--dir", s(tmp.path()), "--id", "w", "--out", s(&patches)]);
    assert_eq!(summary["patches_per_frequency"], 8);
    assert_eq!(fs::read_dir(&patches).unwrap().count(), 16);
    let rec = tmp.path().join("r");
    for freq in ["low", "high"] {
        let out = eustwin(&[
            "reconstruct",
            "--dir",
            s(&patches),
            "--id",
            "w",
            "--freq",
            freq,
            "--out",
            s(&rec),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        let (_, _, a) = read_pgm(&rec.join(format!("w_{freq}.pgm"))).unwrap();
        let (_, _, b) = read_pgm(&tmp.path().join(format!("w_{freq}.pgm"))).unwrap();
        assert_eq!(a, b);
    }
    fs::remove_file(patches.join("w_0180x0248_high.pgm")).unwrap();
    let out = eustwin(&[
        "reconstruct",
        "--dir",
        s(&patches),
        "--id",
        "w",
        "--freq",
        "high",
        "--out",
        s(&rec),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn split_protocol_fold_sizes() {
    let v = ok(&["split", "--count", "442", "--k", "5", "--seed", "3"]);
    let sizes: Vec<u64> = v["sizes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_u64().unwrap())
        .collect();
    assert_eq!(sizes, vec![90, 88, 88, 88, 88]);
    assert_eq!(v["fold_of"].as_array().unwrap().len(), 442);
    assert_eq!(v, ok(&["split", "--count", "442", "--k", "5", "--seed", "3"]));
    let out = eustwin(&["split", "--count", "3", "--k", "5"]);
    assert_eq!(out.status.code(), Some(2));

    let tmp = tempfile::tempdir().unwrap();
    let groups = tmp.path().join("g.txt");
    let labels: Vec<&str> = (0..20).map(|i| if i < 6 { "phantom" } else { "tissue" }).collect();
    fs::write(&groups, labels.join("\n")).unwrap();
    let v = ok(&["split", "--groups", s(&groups), "--k", "3"]);
    assert_eq!(v["fold_of"].as_array().unwrap().len(), 20);
}

#[test]
fn export_writes_loadable_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let sims = tmp.path().join("sims");
    for (i, id) in ["a", "b", "c"].iter().enumerate() {
        simulate_wire(&sims, id, i as u64);
    }
    let out_dir = tmp.path().join("export");
    let summary = ok(&[
        "export",
        "--dir",
        s(&sims),
        "--out",
        s(&out_dir),
        "--k",
        "3",
        "--seed",
        "11",
    ]);
    assert_eq!(summary["pairs"], 3);
    assert_eq!(summary["root_seed"], 11);
    let (manifest, pairs) = import_training_set(&out_dir).unwrap();
    assert_eq!(manifest.root_seed, Some(11));
    assert_eq!(pairs.len(), 3);
    assert_eq!(
        manifest.pairs.iter().map(|p| p.seed).collect::<Vec<_>>(),
        vec![Some(0), Some(1), Some(2)]
    );
    assert_eq!(fs::read_dir(&out_dir).unwrap().count(), 3 * 16 + 1);
    assert!(out_dir.join(MANIFEST_FILE).exists());

    let again = tmp.path().join("export2");
    ok(&[
        "export",
        "--dir",
        s(&sims),
        "--out",
        s(&again),
        "--k",
        "3",
        "--seed",
        "11",
    ]);
    for (x, y) in sorted_files(&out_dir).iter().zip(sorted_files(&again)) {
        assert_eq!(fs::read(x).unwrap(), fs::read(&y).unwrap(), "{x:?}");
    }
}

#[test]
fn score_identity_and_baseline() {
    let tmp = tempfile::tempdir().unwrap();
    simulate_wire(tmp.path(), "a", 1);
    ok(&[
        "simulate",
        "--phantom",
        "contrast",
        "--density",
        "2",
        "--out",
        s(tmp.path()),
        "--id",
        "b",
        "--seed",
        "2",
    ]);
    let d = s(tmp.path());

    let same = ok(&[
        "score",
        "--generated",
        d,
        "--reference",
        d,
        "--gen-tag",
        "high",
        "--ref-tag",
        "high",
    ]);
    assert_eq!(same["ssim"]["mean"], 1.0);
    assert_eq!(same["rmse"]["mean"], 0.0);
    assert_eq!(same["psnr_infinite_count"], 2);
    assert!(same["psnr_db"].is_null());

    let base = ok(&[
        "score",
        "--generated",
        d,
        "--reference",
        d,
        "--gen-tag",
        "low",
        "--ref-tag",
        "high",
        "--seed",
        "4",
    ]);
    assert_eq!(base["label"], "identity baseline");
    assert_eq!(base["seed"], 4);
    assert_eq!(base["pairs"].as_array().unwrap().len(), 2);
    let psnr = base["psnr_db"]["mean"].as_f64().unwrap();
    let rmse = base["rmse"]["mean"].as_f64().unwrap();
    let ssim = base["ssim"]["mean"].as_f64().unwrap();
    assert!(psnr.is_finite() && psnr > 0.0);
    assert!(rmse > 0.0);
    assert!(ssim < 1.0);

    let only_a = tmp.path().join("only_a");
    fs::create_dir(&only_a).unwrap();
    fs::copy(tmp.path().join("a_high.pgm"), only_a.join("a_high.pgm")).unwrap();
    let out = eustwin(&[
        "score",
        "--generated",
        s(&only_a),
        "--reference",
        d,
        "--gen-tag",
        "high",
        "--ref-tag",
        "high",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("b_high.pgm"), "{}", stderr(&out));
}

#[test]
fn evaluate_contrast_phantom_reports_cnr_and_ssnr() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&[
        "simulate",
        "--phantom",
        "contrast",
        "--density",
        "10",
        "--out",
        s(tmp.path()),
        "--id",
        "c",
        "--seed",
        "0",
    ]);
    let report = ok(&["evaluate", "--dir", s(tmp.path()), "--id", "c"]);
    for f in ["low", "high"] {
        assert!(report[f]["cnr"].as_f64().unwrap() > 0.0);
        assert!(report[f]["ssnr"].as_f64().unwrap() > 0.0);
    }
    assert!(report["high"]["cnr"].as_f64().unwrap() > report["low"]["cnr"].as_f64().unwrap());
}
