use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ssep(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssep"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn summary(out: &Path, name: &str) -> Value {
    let text = std::fs::read_to_string(out.join(format!("{name}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn csv(out: &Path, name: &str) -> String {
    std::fs::read_to_string(out.join(format!("{name}.csv"))).unwrap()
}

#[test]
fn hydro_table_has_hash_and_header() {
    let dir = tempfile::tempdir().unwrap();
    let o = ssep(&["hydro", "--profile", "step 0.8 0.2", "--t-list", "1,2"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = csv(dir.path(), "hydro");
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="));
    assert_eq!(lines.next().unwrap(), "t,v_t,u_t");
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((row[1] - 0.2394).abs() < 1e-3, "{row:?}");
    assert_eq!(lines.count(), 1);
    let s = summary(dir.path(), "hydro");
    assert_eq!(s["experiment"], "hydro");
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    // a key hydro does not take
    let o = ssep(&["hydro", "--rho", "0.3"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    // non-positive value
    let o = ssep(&["lln", "--T", "-1"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    // unknown key in a file
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "seed = 3\n[hydro]\nprofile = \"constant 0.5\"\nwidth = 2\n").unwrap();
    let o = ssep(&["hydro", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("width"));
    let cfg = dir.path().join("top.toml");
    std::fs::write(&cfg, "speed = 3\n").unwrap();
    let o = ssep(&["hydro", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    // nothing written on failure
    assert!(!dir.path().join("hydro.csv").exists());
}

#[test]
fn config_file_and_flags_merge() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "seed = 9\n[hydro]\nprofile = \"step 0.6 0.4\"\nt_list = [1.0]\n[lln]\nn = 5.0\n",
    )
    .unwrap();
    let o = ssep(&["hydro", "--config", cfg.to_str().unwrap(), "--t-list", "2"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(dir.path(), "hydro");
    assert_eq!(s["seed"], 9);
    assert_eq!(s["params"]["profile"], "step 0.6 0.4");
    assert_eq!(s["results"]["rows"][0]["t"], 2.0);
}

#[test]
fn runs_are_reproducible_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["lln", "--N", "10", "--samples", "60", "--seed", "5"];
    let o1 = ssep(&[&args[..], &["--threads", "1"]].concat(), a.path());
    let o2 = ssep(&[&args[..], &["--threads", "3"]].concat(), b.path());
    assert_eq!(o1.status.code(), Some(0));
    assert_eq!(o2.status.code(), Some(0));
    assert_eq!(csv(a.path(), "lln"), csv(b.path(), "lln"));
    // a different seed changes the hash line and the body
    let c = tempfile::tempdir().unwrap();
    ssep(&["lln", "--N", "10", "--samples", "60", "--seed", "6"], c.path());
    let (x, y) = (csv(a.path(), "lln"), csv(c.path(), "lln"));
    assert_ne!(x.lines().next(), y.lines().next());
    assert_ne!(x, y);
}

#[test]
fn lln_mean_matches_hydrodynamics() {
    let dir = tempfile::tempdir().unwrap();
    let o = ssep(&["lln", "--N", "30", "--samples", "200", "--seed", "2"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let s = summary(dir.path(), "lln");
    assert_eq!(s["results"]["within_3se"], true, "{s}");
    assert_eq!(s["results"]["boundary_flags"], 0);
}

#[test]
fn identity_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = ssep(&["identity-suite", "--samples", "500", "--seed", "4"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(dir.path(), "identity-suite");
    assert_eq!(s["results"]["all_passed"], true);
    assert_eq!(s["results"]["failures"], 0);
    assert_eq!(s["results"]["profiles"].as_array().unwrap().len(), 5);
}

#[test]
fn varprob_reports_the_infimum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("v.toml");
    std::fs::write(&cfg, "[varprob]\ngrid = \"64,256\"\nt_list = [100.0]\n").unwrap();
    let o = ssep(&["varprob", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(dir.path(), "varprob");
    let target = 0.5 * std::f64::consts::PI.sqrt();
    assert!((s["results"]["inf_M"].as_f64().unwrap() - target).abs() < 1e-8);
    assert!(csv(dir.path(), "varprob").contains("inf_M,,"));
}

#[test]
fn ldp_fit_guards_and_degenerate_tails() {
    let dir = tempfile::tempdir().unwrap();
    // too few samples for a tail at a = 0.3
    let o = ssep(&["ldp-fit", "--samples", "50", "--max-samples", "100", "--grid", "0,0"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("undersampled"));
    assert!(!dir.path().join("ldp-fit.csv").exists());
    // the block start cannot push 1.2·N particles across the origin
    let o = ssep(
        &["ldp-fit", "--profile", "indicator -1 1", "--a", "1.2", "--n-list", "4,8", "--samples", "300", "--grid", "0,0"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(dir.path(), "ldp-fit");
    assert_eq!(s["results"]["minus_infinity_consistent"], true);
    assert_eq!(s["results"]["slope"], "-inf");
}

#[test]
fn ldp_fit_at_the_typical_value_has_flat_slope() {
    let dir = tempfile::tempdir().unwrap();
    // v_T = 0 for a constant profile, so P(J ≥ 0) stays of order one
    let o = ssep(
        &["ldp-fit", "--a", "0", "--n-list", "4,8,12", "--samples", "2000", "--grid", "0,0"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = &summary(dir.path(), "ldp-fit")["results"];
    let ci = r["slope_ci"].as_array().unwrap();
    let (lo, hi) = (ci[0].as_f64().unwrap(), ci[1].as_f64().unwrap());
    assert!(lo <= 0.0 && hi >= -0.05, "{r}");
}

#[test]
fn ldp_fit_tops_up_thin_tails() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["ldp-fit", "--a", "0.3", "--n-list", "4,8", "--samples", "200", "--max-samples", "20000", "--grid", "0,0"];
    let o = ssep(&args, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = &summary(dir.path(), "ldp-fit")["results"];
    let last = &r["counts"][1];
    // the larger size needed more than one block and stopped once the tail filled
    assert!(last["samples"].as_u64().unwrap() > 200, "{r}");
    assert!(last["successes"].as_u64().unwrap() >= 20, "{r}");
    assert_eq!(last["samples"].as_u64().unwrap() % 200, 0);
    assert!(r["slope"].as_f64().unwrap() < 0.0);
}

#[test]
fn theorem4_block_current_is_bounded() {
    let dir = tempfile::tempdir().unwrap();
    let o = ssep(&["theorem4", "--n-list", "5,10", "--samples", "2000"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = &summary(dir.path(), "theorem4")["results"];
    assert_eq!(r["current_exceeds_n"], 0);
    assert_eq!(r["quadratic_constant_positive"], true);
}

#[test]
fn rate_solve_and_bounds_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = ssep(&["rate-solve", "--a-list", "0.05,-0.05", "--grid", "121,150"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = csv(dir.path(), "rate-solve");
    assert_eq!(text.lines().nth(1).unwrap(), "a,value,kind,feasibility_residual,iterations");
    let vals: Vec<f64> = text.lines().skip(2).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(vals.len(), 2);
    // symmetric profile, symmetric rate
    assert!((vals[0] - vals[1]).abs() <= 0.05 * vals[0], "{vals:?}");

    let o = ssep(&["rate-bounds", "--a-list", "10,20,40"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = &summary(dir.path(), "rate-bounds")["results"];
    let slope = r["upper_loglog_slope_large_a"].as_f64().unwrap();
    assert!((slope - 3.0).abs() <= 0.1, "{slope}");
    let text = csv(dir.path(), "rate-bounds");
    for c in ["upper", "lower", "theorem4"] {
        assert!(text.contains(&format!(",{c},")));
    }
}

#[test]
fn unknown_experiment_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = ssep(&["nonsense"], dir.path());
    assert_ne!(o.status.code(), Some(0));
}
