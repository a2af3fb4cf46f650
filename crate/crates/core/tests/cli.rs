//! End-to-end checks of the command-line surface and its exit-code contract.

use std::path::Path;
use std::process::{Command, Output};

fn nlcover(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlcover"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) {
    std::fs::write(dir.join(name), body).unwrap();
}

const KC_SPEC: &str = r#"{ "kind": "kc", "n": [2, 4], "m": [1, 5], "demand": [1, 10],
  "family": "uniform-marginals", "max_marginal": 9, "seed": 3 }"#;

#[test]
fn solve_output_passes_its_own_verify() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    write(dir, "spec.json", KC_SPEC);

    let out = nlcover(dir, &["gen", "--spec", "spec.json", "--out", "kc.json"]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");

    let out = nlcover(
        dir,
        &[
            "solve",
            "--algo",
            "pd-kc",
            "--input",
            "kc.json",
            "--audit",
            "--out",
            "sol.json",
            "--cert",
            "cert.json",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["algorithm"], "pd-kc");
    assert!(report["dual_objective"].is_string());

    let out = nlcover(
        dir,
        &[
            "verify",
            "--input",
            "kc.json",
            "--solution",
            "sol.json",
            "--cert",
            "cert.json",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{out:?}");
}

#[test]
fn dp_matches_library_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    write(dir, "spec.json", KC_SPEC);
    nlcover(dir, &["gen", "--spec", "spec.json", "--out", "kc.json"]);

    let out = nlcover(dir, &["solve", "--algo", "dp", "--input", "kc.json"]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();

    let body = std::fs::read_to_string(dir.join("kc.json")).unwrap();
    let nlcover::model::Instance::Kc(kc) = serde_json::from_str(&body).unwrap() else {
        panic!()
    };
    let (opt, _) = nlcover::oracles::exact_kc(&kc).unwrap();
    assert_eq!(report["primal_cost"].as_str().unwrap(), opt.to_string());
}

#[test]
fn ufp_three_item_example_costs_one() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    write(
        dir,
        "ufp.json",
        r#"{ "type": "ufp", "demands": [1, 1], "items": [
            { "interval": [1, 1], "costs": { "model": "list", "values": [1] } },
            { "interval": [2, 2], "costs": { "model": "list", "values": [1] } },
            { "interval": [1, 2], "costs": { "model": "list", "values": [1] } } ] }"#,
    );
    let out = nlcover(
        dir,
        &[
            "solve", "--algo", "pd-ufp", "--input", "ufp.json", "--out", "sol.json",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let sol: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("sol.json")).unwrap()).unwrap();
    assert_eq!(sol["cost"], 1);
    assert_eq!(sol["levels"], serde_json::json!([0, 0, 1]));
}

#[test]
fn tampered_certificate_fails_verify_with_witness() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    write(dir, "spec.json", KC_SPEC);
    nlcover(dir, &["gen", "--spec", "spec.json", "--out", "kc.json"]);
    nlcover(
        dir,
        &[
            "solve",
            "--algo",
            "pd-kc",
            "--input",
            "kc.json",
            "--audit",
            "--out",
            "sol.json",
            "--cert",
            "cert.json",
        ],
    );

    let body = std::fs::read_to_string(dir.join("cert.json")).unwrap();
    let mut cert: serde_json::Value = serde_json::from_str(&body).unwrap();
    let raises = cert["raises"].as_array_mut().unwrap();
    let last = raises.len() - 1;
    raises[last]["delta"] = serde_json::json!("100");
    write(
        dir,
        "cert.json",
        &serde_json::to_string_pretty(&cert).unwrap(),
    );

    let out = nlcover(
        dir,
        &[
            "verify",
            "--input",
            "kc.json",
            "--solution",
            "sol.json",
            "--cert",
            "cert.json",
        ],
    );
    assert_eq!(out.status.code(), Some(4), "{out:?}");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("bucket"),
        "witness names a bucket: {stderr}"
    );
}

#[test]
fn short_solution_fails_feasibility() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    write(
        dir,
        "kc.json",
        r#"{ "type": "kc", "demand": 3, "items": [
            { "costs": { "model": "list", "values": [1, 2, 3] } } ] }"#,
    );
    write(dir, "sol.json", r#"{ "levels": [2], "cost": 2 }"#);
    let out = nlcover(
        dir,
        &["verify", "--input", "kc.json", "--solution", "sol.json"],
    );
    assert_eq!(out.status.code(), Some(4), "{out:?}");
}

#[test]
fn exit_codes_for_bad_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    write(
        dir,
        "decreasing.json",
        r#"{ "type": "kc", "demand": 1, "items": [
            { "costs": { "model": "list", "values": [3, 2] } } ] }"#,
    );
    let out = nlcover(
        dir,
        &["solve", "--algo", "pd-kc", "--input", "decreasing.json"],
    );
    assert_eq!(out.status.code(), Some(2), "{out:?}");

    write(
        dir,
        "short.json",
        r#"{ "type": "kc", "demand": 5, "items": [
            { "costs": { "model": "list", "values": [1] } } ] }"#,
    );
    let out = nlcover(dir, &["solve", "--algo", "pd-kc", "--input", "short.json"]);
    assert_eq!(out.status.code(), Some(3), "{out:?}");

    write(
        dir,
        "ok.json",
        r#"{ "type": "kc", "demand": 1, "items": [
            { "costs": { "model": "list", "values": [1] } } ] }"#,
    );
    let out = nlcover(dir, &["solve", "--algo", "pd-ufp", "--input", "ok.json"]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn repeat_solves_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    write(dir, "spec.json", KC_SPEC);
    nlcover(dir, &["gen", "--spec", "spec.json", "--out", "kc.json"]);
    for pass in ["a", "b"] {
        let out = nlcover(
            dir,
            &[
                "solve",
                "--algo",
                "pd-kc",
                "--input",
                "kc.json",
                "--audit",
                "--out",
                &format!("sol_{pass}.json"),
                "--cert",
                &format!("cert_{pass}.json"),
            ],
        );
        assert_eq!(out.status.code(), Some(0));
    }
    assert_eq!(
        std::fs::read(dir.join("sol_a.json")).unwrap(),
        std::fs::read(dir.join("sol_b.json")).unwrap()
    );
    assert_eq!(
        std::fs::read(dir.join("cert_a.json")).unwrap(),
        std::fs::read(dir.join("cert_b.json")).unwrap()
    );
}

#[test]
fn epsilon_compression_before_solving() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    write(
        dir,
        "kc.json",
        r#"{ "type": "kc", "demand": 6, "items": [
            { "costs": { "model": "list", "values": [1, 2, 3, 4, 5, 6, 7, 8] } },
            { "costs": { "model": "list", "values": [2, 4, 6, 8, 10, 12, 14, 16] } } ] }"#,
    );
    let out = nlcover(
        dir,
        &[
            "solve",
            "--algo",
            "pd-kc",
            "--input",
            "kc.json",
            "--epsilon",
            "1/2",
            "--out",
            "sol.json",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    // the reported cost is under the original curve, so verify accepts it
    let out = nlcover(
        dir,
        &["verify", "--input", "kc.json", "--solution", "sol.json"],
    );
    assert_eq!(out.status.code(), Some(0), "{out:?}");

    let out = nlcover(
        dir,
        &[
            "solve",
            "--algo",
            "pd-kc",
            "--input",
            "kc.json",
            "--epsilon",
            "0",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gen_family_override() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    write(dir, "spec.json", KC_SPEC);
    let out = nlcover(
        dir,
        &[
            "gen",
            "--spec",
            "spec.json",
            "--family",
            "facility",
            "--out",
            "fac.json",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let body = std::fs::read_to_string(dir.join("fac.json")).unwrap();
    let nlcover::model::Instance::Kc(kc) = serde_json::from_str(&body).unwrap() else {
        panic!()
    };
    for item in &kc.items {
        let m = item.costs.m();
        let marginals: Vec<_> = (1..=m).map(|j| item.costs.marginal(j)).collect();
        assert!(
            marginals.windows(2).all(|w| w[0] >= w[1]),
            "flat after start"
        );
    }

    let out = nlcover(dir, &["gen", "--spec", "spec.json", "--family", "bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_header_only_and_ratio_bound() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    write(dir, "spec.json", KC_SPEC);

    let out = nlcover(
        dir,
        &[
            "bench",
            "--spec",
            "spec.json",
            "--trials",
            "0",
            "--seed",
            "1",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 1);
    assert!(stdout.starts_with("trial,"));

    let out = nlcover(
        dir,
        &[
            "bench",
            "--spec",
            "spec.json",
            "--trials",
            "25",
            "--seed",
            "5",
            "--oracle",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 27, "{stdout}");
    let summary = stdout.lines().last().unwrap();
    assert!(summary.starts_with("# summary max_ratio="), "{summary}");
    // every per-trial ratio stays within the 2x guarantee
    for line in stdout.lines().skip(1) {
        if line.starts_with('#') {
            continue;
        }
        let ratio_decimal: f64 = line.split(',').nth(7).unwrap().parse().unwrap();
        assert!(ratio_decimal <= 2.0, "{line}");
    }
}

#[test]
fn audit_env_var_forces_certificates() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    write(dir, "spec.json", KC_SPEC);
    nlcover(dir, &["gen", "--spec", "spec.json", "--out", "kc.json"]);
    let out = Command::new(env!("CARGO_BIN_EXE_nlcover"))
        .current_dir(dir)
        .env("COVER_AUDIT", "1")
        .args([
            "solve",
            "--algo",
            "pd-kc",
            "--input",
            "kc.json",
            "--out",
            "sol.json",
            "--cert",
            "cert.json",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let cert: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("cert.json")).unwrap()).unwrap();
    assert!(cert["raises"][0]["tau"].is_array(), "audit rates recorded");
}
