use std::path::Path;
use std::process::{Command, Stdio};
use std::io::Write as _;

use koenigs_cli::{run, NetDocument, EXIT_DEGENERATE, EXIT_FAIL, EXIT_INPUT, EXIT_PASS};
use serde_json::Value;

struct Outcome {
    code: i32,
    stdout: String,
    stderr: String,
}

fn koenigs(args: &[&str], stdin: &str) -> Outcome {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("koenigs").chain(args.iter().copied());
    let code = run(argv, &mut stdin.as_bytes(), &mut out, &mut err);
    Outcome {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn generated(args: &[&str]) -> String {
    let o = koenigs(args, "");
    assert_eq!(o.code, EXIT_PASS, "{}", o.stderr);
    o.stdout
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

#[test]
fn grid_is_koenigs_with_unit_products() {
    let grid = generated(&["generate", "grid", "--extents", "5", "5"]);
    let o = koenigs(&["check", "koenigs", "--format", "json"], &grid);
    assert_eq!(o.code, EXIT_PASS);
    let r = json(&o.stdout);
    assert_eq!(r["pass"], true);
    assert_eq!(r["max_residual"], 0.0);
    assert_eq!(r["cycles"], 9);
}

#[test]
fn dual_of_a_moutard_net_is_koenigs() {
    let net = generated(&["generate", "moutard", "--extents", "10", "10", "--seed", "7"]);
    let dual = koenigs(&["dualize"], &net);
    assert_eq!(dual.code, EXIT_PASS, "{}", dual.stderr);
    let o = koenigs(&["check", "koenigs"], &dual.stdout);
    assert_eq!(o.code, EXIT_PASS, "{}", o.stdout);
    assert!(o.stdout.starts_with("check koenigs: PASS"));

    // dualizing twice returns the net up to translation
    let back = koenigs(&["dualize"], &dual.stdout);
    let a = NetDocument::parse(&net).unwrap().net().unwrap();
    let b = NetDocument::parse(&back.stdout).unwrap().net().unwrap();
    assert!(a.distance_up_to_translation(&b) <= 1e-9 * a.diameter());
}

#[test]
fn moutard_net_is_not_isothermic() {
    let net = generated(&["generate", "moutard", "--extents", "6", "6", "--seed", "3"]);
    let o = koenigs(&["check", "isothermic", "--format", "json"], &net);
    assert_eq!(o.code, EXIT_FAIL);
    assert_eq!(json(&o.stdout)["category"], "NotCircular");
    let o = koenigs(&["check", "isothermic"], &net);
    assert!(o.stdout.contains("FAIL (NotCircular)"));
}

#[test]
fn every_generator_passes_its_own_checks() {
    let cases: [(&[&str], &[&str]); 4] = [
        (&["generate", "moutard", "--extents", "5", "5", "--seed", "1"], &["koenigs", "qnet", "geometric"]),
        (&["generate", "moutard", "--extents", "4", "4", "4", "--seed", "1"], &["koenigs", "qnet", "geometric"]),
        (&["generate", "three-leg", "--extents", "6", "6", "--seed", "1"], &["koenigs", "circular", "isothermic"]),
        (&["generate", "lightcone", "--extents", "4", "4", "4", "--seed", "1"], &["koenigs", "circular", "isothermic"]),
    ];
    for (gen, checks) in cases {
        let net = generated(gen);
        for c in checks {
            let o = koenigs(&["check", c], &net);
            assert_eq!(o.code, EXIT_PASS, "{gen:?} check {c}: {}{}", o.stdout, o.stderr);
        }
    }
}

#[test]
fn christoffel_with_limit_signs() {
    let net = generated(&["generate", "three-leg", "--extents", "5", "5", "--seed", "4"]);
    let plain = koenigs(&["christoffel"], &net);
    let shown = koenigs(&["christoffel", "--limit-signs"], &net);
    assert_eq!(plain.code, EXIT_PASS, "{}", plain.stderr);
    let p = NetDocument::parse(&plain.stdout).unwrap();
    let s = NetDocument::parse(&shown.stdout).unwrap();
    assert_eq!(p.vertices, s.vertices);
    assert!(s.s.as_ref().unwrap().iter().all(|&x| x > 0.0));
    let (lp, ls) = (p.labels.unwrap(), s.labels.unwrap());
    assert_eq!(lp[0], ls[0]);
    assert!(lp[1].iter().zip(&ls[1]).all(|(a, b)| *a == -b));
    assert_eq!(koenigs(&["check", "isothermic"], &shown.stdout).code, EXIT_PASS);

    // no limit signs for m = 3
    let cube = generated(&["generate", "lightcone", "--extents", "3", "3", "3", "--seed", "4"]);
    let o = koenigs(&["christoffel", "--limit-signs"], &cube);
    assert_eq!(o.code, EXIT_INPUT);
    assert!(o.stderr.starts_with("error[InvalidInput]"));
}

#[test]
fn lifts_carry_moutard_blocks() {
    let net = generated(&["generate", "moutard", "--extents", "4", "4", "--seed", "5"]);
    let o = koenigs(&["lift", "homogeneous"], &net);
    assert_eq!(o.code, EXIT_PASS, "{}", o.stderr);
    let doc = NetDocument::parse(&o.stdout).unwrap();
    let y = doc.moutard_net().unwrap().unwrap();
    assert_eq!(y.points()[0].dim(), 4);
    assert!(y.moutard_residual() <= 1e-9);

    let iso = generated(&["generate", "three-leg", "--extents", "4", "4", "--seed", "5"]);
    let o = koenigs(&["lift", "lightcone"], &iso);
    assert_eq!(o.code, EXIT_PASS, "{}", o.stderr);
    let doc = NetDocument::parse(&o.stdout).unwrap();
    assert_eq!(doc.moutard.as_ref().unwrap().dim, 5);
    assert!(doc.moutard_net().unwrap().unwrap().moutard_residual() <= 1e-9);

    // a net that is not circular has no light-cone lift
    let o = koenigs(&["lift", "lightcone"], &net);
    assert_eq!(o.code, EXIT_FAIL);
    assert!(o.stderr.starts_with("error[NotCircular]"));
}

#[test]
fn base_values_scale_nu() {
    let net = generated(&["generate", "moutard", "--extents", "4", "4", "--seed", "6"]);
    let one = NetDocument::parse(&koenigs(&["lift", "homogeneous"], &net).stdout).unwrap();
    let o = koenigs(&["lift", "homogeneous", "--base-black", "0,0=2", "--base-white", "1,0=-3"], &net);
    let two = NetDocument::parse(&o.stdout).unwrap();
    for (k, (a, b)) in one.nu.unwrap().iter().zip(two.nu.unwrap()).enumerate() {
        let u = (k / 4 + k % 4) % 2;
        let factor = if u == 0 { 2.0 } else { -3.0 };
        assert!((b / a - factor).abs() < 1e-12);
    }
    let o = koenigs(&["dualize", "--base-black", "1,0=1"], &net);
    assert_eq!(o.code, EXIT_INPUT);
}

#[test]
fn reports_are_deterministic() {
    let a = generated(&["generate", "lightcone", "--extents", "5", "5", "--seed", "9"]);
    let b = generated(&["generate", "lightcone", "--extents", "5", "5", "--seed", "9"]);
    assert_eq!(a, b);
    assert_ne!(a, generated(&["generate", "lightcone", "--extents", "5", "5", "--seed", "10"]));
    let r1 = koenigs(&["report"], &a);
    let r2 = koenigs(&["report"], &b);
    assert_eq!(r1.code, EXIT_PASS);
    assert_eq!(r1.stdout, r2.stdout);
    let r = json(&r1.stdout);
    for c in ["qnet", "koenigs", "circular", "isothermic", "geometric", "moebius"] {
        assert_eq!(r["checks"][c]["pass"], true, "{c}: {}", r["checks"][c]);
    }
}

#[test]
fn report_records_errors_in_place() {
    let grid = generated(&["generate", "grid", "--extents", "3", "3"]);
    let r = json(&koenigs(&["report"], &grid).stdout);
    assert_eq!(r["checks"]["koenigs"]["pass"], true);
    assert_eq!(r["checks"]["circular"]["pass"], true);
    // all interior stars of a flat grid are planar: no vertex carries a verdict
    assert_eq!(r["checks"]["geometric"]["planar_vertices"], 1);
}

#[test]
fn exit_codes_follow_the_contract() {
    // input errors
    assert_eq!(koenigs(&["check", "koenigs"], "{").code, EXIT_INPUT);
    assert_eq!(koenigs(&["check", "bogus"], "").code, EXIT_INPUT);
    assert_eq!(koenigs(&["generate", "grid"], "").code, EXIT_INPUT);
    assert_eq!(koenigs(&["check", "koenigs", "--tol-product", "-1"], "").code, EXIT_INPUT);
    let o = koenigs(&["check", "qnet", "--format", "json"], r#"{"schema_version": 1}"#);
    assert_eq!(o.code, EXIT_INPUT);
    assert_eq!(json(&o.stderr)["category"], "ParseError");

    // a degenerate quad: coincident consecutive vertices
    let degenerate = r#"{"schema_version": 1, "m": 2, "extents": [2, 2], "ambient_dim": 2,
        "vertices": [0, 0, 0, 0, 1, 0, 1, 1]}"#;
    let o = koenigs(&["check", "qnet"], degenerate);
    assert_eq!(o.code, EXIT_DEGENERATE, "{}", o.stdout);
    let o = koenigs(&["check", "koenigs"], degenerate);
    assert_eq!(o.code, EXIT_DEGENERATE, "{}", o.stderr);

    // a failed check
    let skew = r#"{"schema_version": 1, "m": 2, "extents": [2, 2], "ambient_dim": 3,
        "vertices": [0, 0, 0, 0, 1, 0, 1, 0, 0, 1, 1, 1]}"#;
    let o = koenigs(&["check", "qnet", "--format", "json"], skew);
    assert_eq!(o.code, EXIT_FAIL);
    assert_eq!(json(&o.stdout)["category"], "NotPlanar");

    assert_eq!(koenigs(&["--help"], "").code, EXIT_PASS);
}

#[test]
fn config_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gen.json");
    std::fs::write(&cfg, r#"{"extents": [4, 4], "seed": 7, "coefficient_range": [-2.0, -0.5]}"#).unwrap();
    let cfg = cfg.to_str().unwrap();
    let from_cfg = generated(&["generate", "moutard", "--config", cfg]);
    let from_flags = generated(&["generate", "moutard", "--extents", "4", "4", "--seed", "7", "--coefficient-range", "-2,-0.5"]);
    assert_eq!(from_cfg, from_flags);
    let overridden = generated(&["generate", "moutard", "--config", cfg, "--seed", "8"]);
    assert_ne!(from_cfg, overridden);
    assert_eq!(koenigs(&["check", "koenigs"], &from_cfg).code, EXIT_PASS);

    std::fs::write(dir.path().join("bad.json"), r#"{"extent": [4, 4]}"#).unwrap();
    let bad = dir.path().join("bad.json");
    assert_eq!(koenigs(&["generate", "moutard", "--config", bad.to_str().unwrap()], "").code, EXIT_INPUT);
}

#[test]
fn files_in_and_out() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("net.json");
    let obj = dir.path().join("net.obj");
    let (net_s, obj_s) = (net.to_str().unwrap(), obj.to_str().unwrap());
    assert_eq!(koenigs(&["generate", "three-leg", "--extents", "3", "4", "--output", net_s], "").code, EXIT_PASS);
    assert_eq!(koenigs(&["export", net_s, "--output", obj_s], "").code, EXIT_PASS);
    let text = std::fs::read_to_string(&obj).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 12);
    assert_eq!(text.lines().filter(|l| l.starts_with("f ")).count(), 6);
    let o = koenigs(&["check", "isothermic", net_s], "");
    assert_eq!(o.code, EXIT_PASS);
    let missing = koenigs(&["check", "koenigs", dir.path().join("nope.json").to_str().unwrap()], "");
    assert_eq!(missing.code, EXIT_INPUT);
    assert!(missing.stderr.starts_with("error[Io]"));
}

fn binary() -> &'static Path {
    Path::new(env!("CARGO_BIN_EXE_koenigs"))
}

fn pipe(args: &[&str], input: &[u8]) -> (i32, Vec<u8>) {
    let mut child = Command::new(binary())
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input).unwrap();
    let out = child.wait_with_output().unwrap();
    (out.status.code().unwrap(), out.stdout)
}

#[test]
fn binary_pipeline() {
    let (code, net) = pipe(&["generate", "moutard", "--extents", "10", "10", "--seed", "7"], b"");
    assert_eq!(code, 0);
    let (code, dual) = pipe(&["dualize"], &net);
    assert_eq!(code, 0);
    let (code, report) = pipe(&["check", "koenigs"], &dual);
    assert_eq!(code, 0, "{}", String::from_utf8_lossy(&report));
    let (code, _) = pipe(&["check", "isothermic"], &net);
    assert_eq!(code, 1);
    let (code, _) = pipe(&["export"], &pipe(&["generate", "grid", "--extents", "2", "2", "2"], b"").1);
    assert_eq!(code, 2);
}
