//! End-to-end runs of the binary against the shipped fixtures.

use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(format!(
        "{}/../../fixtures/{name}",
        env!("CARGO_MANIFEST_DIR")
    ))
}

fn z2n(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_z2n"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn check_cocycle_exit_codes() {
    let pass = z2n(&["check-cocycle", fixture("nvb3_zsp.atl").to_str().unwrap()]);
    assert_eq!(pass.status.code(), Some(0), "{}", stdout(&pass));
    assert!(stdout(&pass).contains("RESULT: PASS"));

    let fail = z2n(&[
        "check-cocycle",
        fixture("nvb3_parity.atl").to_str().unwrap(),
    ]);
    assert_eq!(fail.status.code(), Some(1));
    let text = stdout(&fail);
    assert!(text.contains("RESULT: FAIL"));
    assert!(text.contains("residual xi111 = -6*xi100*xi010*xi001"));

    let signed = z2n(&[
        "check-cocycle",
        fixture("nvb3_parity_signed.atl").to_str().unwrap(),
    ]);
    assert_eq!(signed.status.code(), Some(0));

    // the convention override flips the zsp fixture into the failing reading
    let overridden = z2n(&[
        "check-cocycle",
        fixture("nvb3_zsp.atl").to_str().unwrap(),
        "--convention",
        "parity",
    ]);
    assert_eq!(overridden.status.code(), Some(1));
}

#[test]
fn parse_errors_exit_2() {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let bad = dir.join("bad.atl");
    std::fs::write(&bad, "atlas broken n=2 convention=zsp\nvars x\n").unwrap();
    let out = z2n(&["check-cocycle", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let missing = z2n(&["check-cocycle", dir.join("nope.atl").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn split_then_verify_round_trip() {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    for (name, tag) in [("twist_theta.atl", "a"), ("twist_xi_eta.atl", "b")] {
        let out_path = dir.join(format!("phi_{tag}.mor"));
        let split = z2n(&[
            "split",
            fixture(name).to_str().unwrap(),
            "--k",
            "4",
            "--D",
            "3",
            "--out",
            out_path.to_str().unwrap(),
        ]);
        assert_eq!(split.status.code(), Some(0), "{}", stdout(&split));
        assert!(stdout(&split).contains("RESULT: PASS"));

        let verify = z2n(&[
            "verify",
            fixture(name).to_str().unwrap(),
            out_path.to_str().unwrap(),
            "--k",
            "4",
        ]);
        assert_eq!(verify.status.code(), Some(0), "{}", stdout(&verify));
    }
}

#[test]
fn superize_then_check() {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let out_path = dir.join("dvb_zsp.atl");
    let sup = z2n(&[
        "superize",
        fixture("dvb_comm.atl").to_str().unwrap(),
        "--convention",
        "zsp",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(sup.status.code(), Some(0));
    let check = z2n(&["check-cocycle", out_path.to_str().unwrap(), "--k", "4"]);
    assert_eq!(check.status.code(), Some(0));
}

#[test]
fn tangent_lift_then_check() {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let out_path = dir.join("lifted.atl");
    let lift = z2n(&[
        "tangent-lift",
        fixture("tangent_n1.atl").to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(lift.status.code(), Some(0));
    let check = z2n(&["check-cocycle", out_path.to_str().unwrap(), "--k", "4"]);
    assert_eq!(check.status.code(), Some(0), "{}", stdout(&check));
}

#[test]
fn linearize_bundle_output_parses() {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let out_path = dir.join("lin.bnd");
    let lin = z2n(&[
        "linearize",
        fixture("three_chart.atl").to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(lin.status.code(), Some(0));
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert!(text.starts_with("bundle threeChart n=2"));
}

#[test]
fn eval_is_deterministic() {
    let a = z2n(&["eval", fixture("demo.srs").to_str().unwrap()]);
    let b = z2n(&["eval", fixture("demo.srs").to_str().unwrap()]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert_eq!(text, "x^2 - theta^4\n-eta*theta\n3*x + 2*x*theta^2\n0\n");
}

#[test]
fn reports_are_byte_deterministic() {
    let run = |args: &[&str]| z2n(args).stdout;
    let parity = fixture("nvb3_parity.atl");
    let args = ["check-cocycle", parity.to_str().unwrap()];
    assert_eq!(run(&args), run(&args));
    let twist = fixture("twist_xi_eta.atl");
    let args = ["split", twist.to_str().unwrap(), "--k", "3"];
    assert_eq!(run(&args), run(&args));
}
