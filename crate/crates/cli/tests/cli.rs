use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use cldmap::SyntheticSpec;
use cldmap_cli::service::{router, AppState};
use serde_json::Value;
use tempfile::TempDir;
use tower::ServiceExt;

fn cldmap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cldmap"))
        .args(args)
        .env_remove("CLDMAP_PORT")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> Value {
    let out = cldmap(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: PathBuf) -> Value {
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

/// Writes a fixture through the CLI and returns its path.
fn fixture(dir: &TempDir, name: &str, args: &[&str]) -> PathBuf {
    let out = dir.path().join(name);
    let mut all = vec!["fixture"];
    all.extend_from_slice(args);
    all.extend_from_slice(&["--out", path(&out)]);
    let res = cldmap(&all);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    out
}

fn composite(dir: &TempDir) -> PathBuf {
    fixture(dir, "composite.png", &["two-texture-composite", "--width", "64", "--height", "64"])
}

#[test]
fn fixture_regenerates_byte_exact() {
    let dir = TempDir::new().unwrap();
    let a = std::fs::read(composite(&dir)).unwrap();
    let b = std::fs::read(composite(&dir)).unwrap();
    assert_eq!(a, b);
    let img = cldmap::load_gray(dir.path().join("composite.png")).unwrap();
    let spec = SyntheticSpec::TwoTextureComposite { width: 64, height: 64, left_cell: 2, right_cell: 8 };
    assert_eq!(img, spec.generate().unwrap());

    let bmp = fixture(&dir, "c.bmp", &["constant", "--width", "4", "--height", "4", "--value", "128"]);
    let bytes = std::fs::read(&bmp).unwrap();
    assert_eq!(&bytes[..2], b"BM");
    assert!(cldmap::load_gray(&bmp).unwrap().pixels().iter().all(|&p| p == 128));
}

#[test]
fn analyze_at_full_tau_collapses() {
    let dir = TempDir::new().unwrap();
    let img = fixture(&dir, "cb.png", &["checkerboard", "--width", "16", "--height", "16", "--cell", "2"]);
    let out = dir.path().join("a");
    let summary = ok(&["analyze", path(&img), "--tau", "100", "--grid", "8", "--out", path(&out)]);
    assert_eq!(summary["tau_percent"], 100.0);
    let cld = read_json(out.join("cld.json"));
    assert_eq!(cld["lengths"].as_array().unwrap().len(), 32);
    assert!(cld["lengths"].as_array().unwrap().iter().all(|l| l.as_f64() == Some(1.0)));
    for f in ["cld.csv", "smap.png", "quality_curve.csv", "summary.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let csv = std::fs::read_to_string(out.join("quality_curve.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "tau,omega,Omega,Pi");
    assert_eq!(csv.lines().count(), 9);
    let csv = std::fs::read_to_string(out.join("cld.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "direction_index,angle_deg,mean_length,support_count");
    assert_eq!(csv.lines().count(), 33);
}

#[test]
fn analyze_constant_image_is_degenerate() {
    let dir = TempDir::new().unwrap();
    let img = fixture(&dir, "c.png", &["constant", "--width", "8", "--height", "8"]);
    let out = cldmap(&["analyze", path(&img), "--auto", "--out", path(&dir.path().join("a"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("degenerate image"));
}

#[test]
fn dmap_zero_coverage_uses_zero_tolerance() {
    let dir = TempDir::new().unwrap();
    let img = composite(&dir);
    let out = dir.path().join("d");
    let s = ok(&["dmap", path(&img), "--tau", "30", "--coverage", "0", "--out", path(&out)]);
    assert_eq!(s["tau_prime"], 0.0);
    let table = read_json(out.join("h_prime.json"));
    assert_eq!(table["k"], 10);
    assert_eq!(table["entries"].as_array().unwrap().len(), 11);
    assert!(out.join("h_prime.csv").exists());
    assert!(out.join("dmap.png").exists());
}

#[test]
fn ddmap_endpoint_percentages() {
    let dir = TempDir::new().unwrap();
    let img = composite(&dir);
    let out = dir.path().join("dd");
    let s = ok(&["ddmap", path(&img), "--tau", "30", "--defect-pct", "0", "--k", "5", "--out", path(&out)]);
    assert_eq!(s["tau_doubleprime"], s["T_doubleprime"]);
    assert_eq!(s["defect_fraction"], 0.0);
    // No red pixel anywhere: every supported pixel is yellow.
    let map = image::open(out.join("ddmap.png")).unwrap().to_rgb8();
    assert!(map.pixels().all(|p| p.0 == [255, 255, 0] || p.0 == [0, 0, 0]));
    let table = read_json(out.join("h_doubleprime.json"));
    let j_max = table["j_max"].as_u64().unwrap() as usize;
    assert_eq!(table["entries"].as_array().unwrap().len(), j_max + 2);

    let alpha_max = s["alpha_max"].as_u64().unwrap();
    let at_max = ok(&[
        "ddmap", path(&img), "--tau", "30", "--defect-pct", &alpha_max.to_string(), "--out", path(&out),
    ]);
    assert_eq!(at_max["tau_doubleprime"], 0.0);

    let over = cldmap(&[
        "ddmap", path(&img), "--tau", "30", "--defect-pct", &(alpha_max + 1).to_string(), "--out", path(&out),
    ]);
    assert!(!over.status.success());
    assert!(String::from_utf8_lossy(&over.stderr).contains(&format!("maximum {alpha_max}%")));
}

#[test]
fn segment_reports_halves() {
    let dir = TempDir::new().unwrap();
    let img = composite(&dir);
    let out = dir.path().join("s");
    let report = ok(&["segment", path(&img), "--coverage", "40,60,80", "--out", path(&out)]);
    let maps = report["maps"].as_array().unwrap();
    assert_eq!(maps.len(), 3);
    for m in maps {
        assert!(out.join(m["file"].as_str().unwrap()).exists());
    }
    let at60 = &maps[1];
    assert_eq!(at60["coverage_percent"], 60.0);
    let share = at60["red_fraction_left"].as_f64().unwrap().max(at60["red_fraction_right"].as_f64().unwrap());
    assert!(share >= 0.7, "dominant half share {share}");
    assert_eq!(read_json(out.join("segment.json")), report);
}

#[test]
fn segment_without_coverages_is_usage_error() {
    let dir = TempDir::new().unwrap();
    let img = composite(&dir);
    let out = cldmap(&["segment", path(&img), "--out", path(&dir.path().join("s"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_port_variable_is_rejected() {
    let out = Command::new(env!("CARGO_BIN_EXE_cldmap"))
        .args(["serve"])
        .env("CLDMAP_PORT", "not-a-port")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not-a-port"));
}

#[tokio::test]
async fn cli_and_service_emit_identical_artifacts() {
    let dir = TempDir::new().unwrap();
    let img = composite(&dir);
    let out = dir.path().join("d");
    ok(&["dmap", path(&img), "--tau", "30", "--coverage", "60", "--out", path(&out)]);
    ok(&["ddmap", path(&img), "--tau", "30", "--defect-pct", "25", "--out", path(&out)]);
    ok(&["analyze", path(&img), "--tau", "30", "--out", path(&out)]);

    let app = router(AppState::default());
    let bytes = std::fs::read(&img).unwrap();
    let boundary = "b0undary";
    let mut body = format!(
        "--{boundary}\r\nContent-Disposition: form-data; name=\"file\"; filename=\"c.png\"\r\n\r\n"
    )
    .into_bytes();
    body.extend_from_slice(&bytes);
    body.extend_from_slice(format!("\r\n--{boundary}--\r\n").as_bytes());
    let req = Request::post("/images")
        .header("content-type", format!("multipart/form-data; boundary={boundary}"))
        .body(Body::from(body))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    let v: Value = serde_json::from_slice(&to_bytes(resp.into_body(), usize::MAX).await.unwrap()).unwrap();
    let id = v["session_id"].as_str().unwrap();

    for (uri, file) in [
        (format!("/sessions/{id}/dmap?tau=30&coverage=60"), "dmap.png"),
        (format!("/sessions/{id}/ddmap?tau=30&defect_pct=25"), "ddmap.png"),
        (format!("/sessions/{id}/smap?tau=30"), "smap.png"),
        (format!("/sessions/{id}/cld?tau=30"), "cld.json"),
    ] {
        let resp = app.clone().oneshot(Request::get(&uri).body(Body::empty()).unwrap()).await.unwrap();
        assert_eq!(resp.status(), StatusCode::OK, "{uri}");
        let served = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
        assert_eq!(served.as_ref(), std::fs::read(out.join(file)).unwrap(), "{file}");
    }

    let resp = app
        .clone()
        .oneshot(Request::get(format!("/sessions/{id}/tables?tau=30")).body(Body::empty()).unwrap())
        .await
        .unwrap();
    let tables: Value = serde_json::from_slice(&to_bytes(resp.into_body(), usize::MAX).await.unwrap()).unwrap();
    assert_eq!(tables["h_prime"], read_json(out.join("h_prime.json")));
    assert_eq!(tables["h_doubleprime"], read_json(out.join("h_doubleprime.json")));
}
