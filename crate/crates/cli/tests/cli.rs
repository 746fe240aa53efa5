use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ggrician::dataio::{two_region_image, write_raw_f32};
use ggrician::{GgRicianParams, ModelSpec, RngStream};
use ggrician_cli::{RunManifest, MANIFEST_FILE};

fn ggrician<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_ggrician")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

fn manifests_in(dir: &Path) -> usize {
    fs::read_dir(dir).unwrap().filter(|e| e.as_ref().unwrap().file_name() == MANIFEST_FILE).count()
}

#[test]
fn synth_writes_tagged_csv_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = ggrician([
            "synth", "--alpha", "1.7", "--delta", "2.9", "--gamma", "2.3", "--n", "1500", "--seed", "9", "--out", &s(out),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = fs::read_to_string(a.join("samples.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# domain: amplitude"));
    assert_eq!(lines.count(), 1500);
    assert_eq!(fs::read(a.join("samples.csv")).unwrap(), fs::read(b.join("samples.csv")).unwrap());
    assert_eq!(manifests_in(&a), 1);
    let m = RunManifest::read(&a.join(MANIFEST_FILE)).unwrap();
    assert_eq!(m.command, "synth");
    assert_eq!(m.seed, 9);
    assert_eq!(m.outputs, vec!["samples.csv".to_string()]);
    assert_eq!(m.config["alpha"], 1.7);
}

#[test]
fn synth_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path());
    let base = ["synth", "--alpha", "2", "--gamma", "1", "--delta", "1", "--out", &out];
    assert_eq!(code(&ggrician(base.iter().chain(&["--n", "0"]))), 2);
    let bad = ["synth", "--alpha", "-1", "--gamma", "1", "--delta", "1", "--n", "5", "--out", &out];
    assert_eq!(code(&ggrician(bad)), 2);
    assert_eq!(code(&ggrician(["synth", "--alpha", "2"])), 2);
}

fn synth_to(dir: &Path, alpha: &str, gamma: &str, delta: &str, n: &str) -> std::path::PathBuf {
    let o = ggrician(["synth", "--alpha", alpha, "--gamma", gamma, "--delta", delta, "--n", n, "--out", &s(dir)]);
    assert_eq!(code(&o), 0);
    dir.join("samples.csv")
}

#[test]
fn fit_writes_summary_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let input = synth_to(&dir.path().join("data"), "2", "1", "2", "400");
    let out = dir.path().join("fit");
    let o = ggrician(["fit", "--input", &s(&input), "--n-iter", "60", "--burn-in", "30", "--out", &s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("fit.json")).unwrap()).unwrap();
    for key in ["posterior_mean", "posterior_std", "acceptance", "config", "n_used", "domain"] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
    for p in ["alpha", "gamma", "delta"] {
        assert!(json["posterior_mean"][p].is_f64());
        assert!(json["posterior_std"][p].is_f64());
    }
    let moves: Vec<&str> = json["acceptance"].as_array().unwrap().iter().map(|m| m["move"].as_str().unwrap()).collect();
    assert_eq!(moves, ["M1", "M2", "M3"]);
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("iteration,alpha,delta,gamma,loglik,move,accepted"));
    assert_eq!(trace.lines().count(), 61);
    assert_eq!(manifests_in(&out), 1);
}

#[test]
fn fit_error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let input = synth_to(&dir.path().join("data"), "2", "1", "2", "50");
    let out = s(&dir.path().join("fit"));
    let inp = s(&input);
    assert_eq!(code(&ggrician(["fit", "--input", &inp, "--burn-in", "1000", "--n-iter", "1000", "--out", &out])), 2);
    assert_eq!(code(&ggrician(["fit", "--input", &inp, "--domain", "intensity", "--out", &out])), 2);
    let flat = dir.path().join("flat.csv");
    fs::write(&flat, "3\n3\n3\n3\n").unwrap();
    let o = ggrician(["fit", "--input", &s(&flat), "--n-iter", "10", "--burn-in", "5", "--out", &out]);
    assert_eq!(code(&o), 3);
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
    assert_eq!(code(&ggrician(["fit", "--input", &s(&dir.path().join("nope.csv")), "--out", &out])), 4);
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "1\n2\nabc\n").unwrap();
    assert_eq!(code(&ggrician(["fit", "--input", &s(&bad), "--out", &out])), 4);
}

#[test]
fn compare_ranks_the_generating_model_first() {
    let dir = tempfile::tempdir().unwrap();
    let rician = ModelSpec::Rician { sigma: 1.0, big_delta: 2.0 };
    let data = ggrician::sample_reference(&rician, 3000, &mut RngStream::new(21, 0)).unwrap();
    let input = dir.path().join("rician.csv");
    let mut buf = Vec::new();
    ggrician::dataio::write_samples_csv(data.values(), None, &mut buf).unwrap();
    fs::write(&input, buf).unwrap();
    let out = dir.path().join("cmp");
    let o = ggrician(["compare", "--input", &s(&input), "--models", "rician,weibull", "--out", &s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let scores = fs::read_to_string(out.join("scores.csv")).unwrap();
    let pct = |m: &str| -> f64 {
        scores.lines().find(|l| l.starts_with(&format!("{m},"))).unwrap().split(',').nth(1).unwrap().parse().unwrap()
    };
    assert!(pct("rician") > pct("weibull"), "{scores}");
    assert!((pct("rician") + pct("weibull") - 100.0).abs() < 1e-9);
}

#[test]
fn compare_ggrician_curve_is_normalized() {
    let dir = tempfile::tempdir().unwrap();
    let input = synth_to(&dir.path().join("data"), "1.1", "2", "10", "1500");
    let out = dir.path().join("cmp");
    let o = ggrician([
        "compare", "--input", &s(&input), "--models", "ggrician", "--n-iter", "200", "--burn-in", "100", "--out", &s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let curve = fs::read_to_string(out.join("curve_ggrician.csv")).unwrap();
    let rows: Vec<Vec<f64>> =
        curve.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    let area: f64 = rows.windows(2).map(|w| 0.5 * (w[1][0] - w[0][0]) * (w[1][1] + w[0][1])).sum();
    assert!((area - 1.0).abs() < 1e-3, "{area}");
}

#[test]
fn compare_rejects_bad_model_lists() {
    let dir = tempfile::tempdir().unwrap();
    let input = synth_to(&dir.path().join("data"), "2", "1", "2", "50");
    let out = s(&dir.path().join("cmp"));
    let o = ggrician(["compare", "--input", &s(&input), "--models", "", "--out", &out]);
    assert_eq!(code(&o), 2);
    let o = ggrician(["compare", "--input", &s(&input), "--models", "rician,kdistribution", "--out", &out]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("supported") && err.contains("lognormal"), "{err}");
}

fn composite(dir: &Path, w: usize, h: usize) -> std::path::PathBuf {
    let left = GgRicianParams::new(2.0, 1.0, 0.5).unwrap();
    let right = GgRicianParams::new(2.0, 1.0, 5.0).unwrap();
    let img = two_region_image(w, h, &left, &right, 5).unwrap();
    let path = dir.join("scene.raw");
    write_raw_f32(&img, &path).unwrap();
    path
}

#[test]
fn map_grids_and_manifest_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let input = composite(dir.path(), 40, 40);
    let out = dir.path().join("map");
    let o = ggrician([
        "map", "--input", &s(&input), "--patch-size", "20", "--min-edge", "5", "--n-iter", "40", "--burn-in", "20",
        "--seed", "4", "--out", &s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for grid in ["alpha.csv", "delta.csv", "gamma.csv"] {
        let text = fs::read_to_string(out.join(grid)).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.lines().all(|l| l.split(',').count() == 2));
    }
    let m = RunManifest::read(&out.join(MANIFEST_FILE)).unwrap();
    let map = m.result.as_ref().unwrap();
    assert_eq!(map["rows"], 2);
    assert_eq!(map["records"].as_array().unwrap().len(), 4);
    assert_eq!(manifests_in(&out), 1);

    let again = dir.path().join("again");
    assert_eq!(code(&ggrician(m.args_with_out(&again))), 0);
    for grid in ["alpha.csv", "delta.csv", "gamma.csv"] {
        assert_eq!(fs::read(out.join(grid)).unwrap(), fs::read(again.join(grid)).unwrap());
    }
}

#[test]
fn map_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let input = composite(dir.path(), 8, 8);
    let out = s(&dir.path().join("map"));
    assert_eq!(code(&ggrician(["map", "--input", &s(&input), "--patch-size", "1", "--out", &out])), 2);
    let csv = synth_to(&dir.path().join("data"), "2", "1", "2", "20");
    assert_eq!(code(&ggrician(["map", "--input", &s(&csv), "--out", &out])), 2);
}
