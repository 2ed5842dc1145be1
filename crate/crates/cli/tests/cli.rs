use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ghair_core::edit::RenderMode;
use ghair_core::io;
use ghair_core::model::ScatterParams;
use ghair_service::{RenderRequest, Salon, ServiceConfig};
use serde_json::{json, Value};

fn ghair(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ghair")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = ghair(args);
    assert!(out.status.success(), "ghair {args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, seed: &str) {
    ok(&["synth", "--out", s(dir), "--strands", "40", "--views", "6", "--size", "32", "--seed", seed]);
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(ghair(&["bake"]).status.code(), Some(2));
    assert_eq!(ghair(&["render", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(ghair(&[]).status.code(), Some(2));
    assert_eq!(ghair(&["--help"]).status.code(), Some(0));
}

#[test]
fn stage_failures_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = ghair(&["render", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no model"));

    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, "{ not json").unwrap();
    assert_eq!(ghair(&["fine", "--config", s(&cfg)]).status.code(), Some(1));

    let gh = dir.path().join("broken.ghair");
    fs::write(&gh, b"GHAIR but not really").unwrap();
    let out = ghair(&["export-ply", "--model", s(&gh), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));

    synth(dir.path(), "3");
    let cfg = dir.path().join("config.json");
    let out = ghair(&["render", "--config", s(&cfg), "--mode", "sepia", "--out", s(&dir.path().join("r"))]);
    assert_eq!(out.status.code(), Some(1));
    let empty = dir.path().join("none.json");
    fs::write(&empty, "[]").unwrap();
    let out = ghair(&["relight", "--config", s(&cfg), "--lights", s(&empty), "--out", s(&dir.path().join("r"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn synth_is_deterministic_per_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    synth(a.path(), "11");
    synth(b.path(), "11");
    synth(c.path(), "12");
    let fa = files(a.path());
    assert_eq!(fa, files(b.path()));
    assert_ne!(fa, files(c.path()));
    let names: Vec<String> = fa.iter().map(|(p, _)| p.display().to_string()).collect();
    for want in ["cameras.json", "config.json", "gt.ghair", "init.ghair", "scalp.obj", "lights.json", "images/0.png"] {
        assert!(names.iter().any(|n| n == want), "{want} missing from {names:?}");
    }
    let gt = io::ghair::read(&a.path().join("gt.ghair")).unwrap();
    assert_eq!(gt.strands.len(), 40);
}

#[test]
fn renders_are_deterministic_and_match_the_service() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "5");
    let cfg = dir.path().join("config.json");
    let model = dir.path().join("gt.ghair");
    let run = |mode: &str, sub: &str| {
        let out = dir.path().join(sub);
        ok(&["render", "--config", s(&cfg), "--model", s(&model), "--mode", mode, "--out", s(&out)]);
        files(&out)
    };
    for mode in ["color", "relight", "orientation"] {
        let a = run(mode, &format!("{mode}_a"));
        let b = run(mode, &format!("{mode}_b"));
        assert_eq!(a.len(), 6);
        assert_eq!(a, b, "{mode}");
    }
    let relit = files(&dir.path().join("relight_a"));
    ok(&["relight", "--config", s(&cfg), "--model", s(&model), "--out", s(&dir.path().join("rl"))]);
    assert_eq!(files(&dir.path().join("rl")), relit);

    let lights = io::read_lights(&dir.path().join("lights.json")).unwrap();
    let salon = Salon::with_model(
        ServiceConfig::default(),
        io::ghair::read(&model).unwrap(),
        ScatterParams::default(),
        lights,
    );
    let cams = io::read_cameras(&dir.path().join("cameras.json")).unwrap();
    for (mode, sub) in [(RenderMode::Color, "color_a"), (RenderMode::Relight, "relight_a")] {
        for cam in &cams {
            let req = RenderRequest {
                camera: cam.to_json(),
                lights: None,
                params: None,
                mode,
                version: None,
                strict: false,
                full: false,
            };
            let (png, _) = salon.render(&req).unwrap();
            let cli = fs::read(dir.path().join(sub).join(format!("{}.png", cam.id))).unwrap();
            assert!(png == cli, "service and CLI differ for camera {} in {mode:?}", cam.id);
        }
    }
}

#[test]
fn fine_is_deterministic_and_reports_held_out_views() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "9");
    let cfg = dir.path().join("config.json");
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        ok(&["fine", "--config", s(&cfg), "--iterations", "30", "--out", s(&out)]);
        files(&out)
    };
    let a = run("a");
    assert_eq!(a, run("b"));
    let report: Value = serde_json::from_slice(&fs::read(dir.path().join("a/fine.json")).unwrap()).unwrap();
    assert_eq!(report["iterations"], 30);
    let held = report["held_out"].as_array().unwrap();
    assert_eq!(held.len(), 1);
    assert!(held[0]["psnr"].as_f64().unwrap() > 10.0);
    let state = io::ghopt::read(&dir.path().join("a/fine.ghopt")).unwrap();
    assert_eq!(state.iteration, 30);

    let out = dir.path().join("c");
    ok(&["fine", "--config", s(&cfg), "--iterations", "30", "--seed", "10", "--out", s(&out)]);
    assert_ne!(fs::read(out.join("fine.ghair")).unwrap(), fs::read(dir.path().join("a/fine.ghair")).unwrap());
}

#[test]
fn field_and_strand_stages_run_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "2");
    let mut cfg: Value = serde_json::from_slice(&fs::read(dir.path().join("config.json")).unwrap()).unwrap();
    cfg["ogf"] = json!({ "samples": 3000, "iterations": 10 });
    cfg["strands"] = json!({ "count": 20, "refine_iterations": 3, "search_radius": 0.012 });
    let cfg_path = dir.path().join("small.json");
    fs::write(&cfg_path, cfg.to_string()).unwrap();

    let out = dir.path().join("run");
    let stdout = ok(&["ogf", "--config", s(&cfg_path), "--out", s(&out)]).stdout;
    assert!(String::from_utf8_lossy(&stdout).starts_with("field:"));
    let field = io::ghair::read(&out.join("field.ghair")).unwrap();
    assert!(!field.strands.is_empty());
    assert!(field.strands.iter().all(|s| s.segments.len() == 1));
    let report: Value = serde_json::from_slice(&fs::read(out.join("ogf.json")).unwrap()).unwrap();
    assert_eq!(report["losses"].as_array().unwrap().len(), 10);

    ok(&["strands", "--config", s(&cfg_path), "--field", s(&out.join("field.ghair")), "--out", s(&out)]);
    let strands = io::ghair::read(&out.join("strands.ghair")).unwrap();
    assert!(!strands.strands.is_empty() && strands.strands.len() <= 20);
    assert!(!strands.head.is_empty());

    ok(&["export-ply", "--model", s(&out.join("strands.ghair")), "--out", s(&out)]);
    let ply = fs::read_to_string(out.join("strands.ply")).unwrap();
    assert!(ply.starts_with("ply"));
    assert!(ply.contains(&format!("element edge {}", strands.segment_count())));
}

#[test]
fn play_renders_each_frame() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "4");
    let seq = dir.path().join("seq");
    fs::create_dir(&seq).unwrap();
    let mut m = io::ghair::read(&dir.path().join("gt.ghair")).unwrap();
    m.head.clear();
    for k in 0..3 {
        ghair_core::edit::cut(&mut m, 1.0 - 0.3 * k as f64, None);
        io::ghair::write(&m, &seq.join(format!("{k:02}.ghair"))).unwrap();
    }
    fs::write(seq.join("notes.txt"), "ignored").unwrap();
    let cfg = dir.path().join("config.json");
    let out = dir.path().join("frames");
    ok(&["play", "--config", s(&cfg), "--sequence", s(&seq), "--camera", "2", "--out", s(&out)]);
    let frames = files(&out);
    assert_eq!(frames.len(), 3);
    assert_ne!(frames[0].1, frames[2].1);
    assert_eq!(ghair(&["play", "--config", s(&cfg), "--sequence", s(&seq), "--camera", "99"]).status.code(), Some(1));
}
