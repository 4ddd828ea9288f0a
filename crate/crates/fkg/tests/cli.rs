use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
    out: PathBuf,
}

fn fkg(dir: &TempDir, sub: &str, config: &Value, extra: &[&str], env: &[(&str, &str)]) -> Run {
    let cfg = dir.path().join(format!("{sub}-{}.json", extra.len()));
    std::fs::write(&cfg, config.to_string()).unwrap();
    let out = dir.path().join(format!("out-{sub}-{}", rand_suffix(dir)));
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fkg"));
    cmd.arg(sub).arg("--config").arg(&cfg).arg("--out").arg(&out).args(extra);
    cmd.env_remove("FKG_SEED").env_remove("FKG_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let Output { status, stdout, stderr } = cmd.output().unwrap();
    Run {
        code: status.code().unwrap(),
        stdout: String::from_utf8(stdout).unwrap(),
        stderr: String::from_utf8(stderr).unwrap(),
        out,
    }
}

fn rand_suffix(dir: &TempDir) -> usize {
    std::fs::read_dir(dir.path()).unwrap().count()
}

fn rows(out: &Path) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_path(out.join("results.csv")).unwrap();
    assert_eq!(
        r.headers().unwrap().iter().collect::<Vec<_>>(),
        ["experiment_id", "op", "inputs_json", "value", "error", "method", "seed", "n_paths", "n_steps", "timestamp"]
    );
    r.records().map(|x| x.unwrap()).collect()
}

fn without_timestamp(out: &Path) -> String {
    std::fs::read_to_string(out.join("results.csv"))
        .unwrap()
        .lines()
        .map(|l| &l[..l.rfind(',').unwrap()])
        .collect::<Vec<_>>()
        .join("\n")
}

fn value(r: &csv::StringRecord) -> f64 {
    r[3].parse().unwrap()
}

fn inputs(r: &csv::StringRecord) -> Value {
    serde_json::from_str(&r[2]).unwrap()
}

fn singular() -> Value {
    json!({
        "potential": {"form": {"type": "isotropic", "dim": 1, "terms": [{"exponent": -0.5}]}},
        "grids": {"tau": [0.5, 1.0], "p": [1.0, 2.0]},
        "mc": {"n_paths": 3000, "n_steps": 32, "chunk_size": 500}
    })
}

#[test]
fn kernel_is_deterministic_across_threads() {
    let dir = TempDir::new().unwrap();
    let a = fkg(&dir, "kernel", &singular(), &[], &[("FKG_SEED", "77"), ("FKG_THREADS", "1")]);
    let b = fkg(&dir, "kernel", &singular(), &[], &[("FKG_SEED", "77"), ("FKG_THREADS", "3")]);
    assert_eq!(a.code, 0, "{}", a.stderr);
    assert_eq!(b.code, 0, "{}", b.stderr);
    assert_eq!(without_timestamp(&a.out), without_timestamp(&b.out));
    let rs = rows(&a.out);
    assert_eq!(rs.len(), 4);
    assert!(rs.iter().all(|r| &r[6] == "77" && &r[7] == "3000" && &r[8] == "32" && &r[5] == "mc"));
    let c = fkg(&dir, "kernel", &singular(), &[], &[("FKG_SEED", "78")]);
    assert_ne!(without_timestamp(&a.out), without_timestamp(&c.out));
    let plots: Vec<_> = std::fs::read_dir(a.out.join("plots")).unwrap().collect();
    assert_eq!(plots.len(), 2);
}

#[test]
fn seed_override_and_environment() {
    let dir = TempDir::new().unwrap();
    let missing = fkg(&dir, "kernel", &singular(), &[], &[]);
    assert_eq!(missing.code, 1);
    assert!(missing.stderr.contains("mc.seed"), "{}", missing.stderr);
    let from_flag = fkg(&dir, "kernel", &singular(), &["--override", "mc.seed=77"], &[]);
    let from_env = fkg(&dir, "kernel", &singular(), &[], &[("FKG_SEED", "77")]);
    assert_eq!(from_flag.code, 0, "{}", from_flag.stderr);
    assert_eq!(without_timestamp(&from_flag.out), without_timestamp(&from_env.out));
    let bad = fkg(&dir, "kernel", &singular(), &[], &[("FKG_SEED", "-3")]);
    assert_eq!(bad.code, 1);
    assert!(bad.stderr.contains("FKG_SEED"), "{}", bad.stderr);
    let bad = fkg(&dir, "kernel", &singular(), &[], &[("FKG_SEED", "1"), ("FKG_THREADS", "0")]);
    assert_eq!(bad.code, 1);
    assert!(bad.stderr.contains("FKG_THREADS"), "{}", bad.stderr);
}

#[test]
fn invalid_configs_name_the_field() {
    let dir = TempDir::new().unwrap();
    let env = [("FKG_SEED", "1")];
    let mut c = singular();
    c["potential"]["form"]["terms"][0]["exponent"] = json!(-1.2);
    let r = fkg(&dir, "bounds", &c, &[], &env);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("potential.form.terms[0].exponent"), "{}", r.stderr);
    // The same exponent is fine for the position route.
    c["potential"]["form"] = json!({"type": "isotropic", "dim": 3, "terms": [{"exponent": -1.2}]});
    c["grids"]["dx"] = json!({"min": 0.5, "max": 1.0, "n": 2});
    let r = fkg(&dir, "position", &c, &[], &env);
    assert_eq!(r.code, 0, "{}", r.stderr);

    let mut c = singular();
    c["potential"]["form"]["terms"][0]["exponent"] = json!(-2.0);
    let r = fkg(&dir, "bounds", &c, &[], &env);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("potential.form.terms[0]"), "{}", r.stderr);

    let mut c = singular();
    c["potential"]["w"] = json!([{"exponent": -1.0}]);
    let r = fkg(&dir, "green", &c, &[], &env);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("potential.w[0].exponent"), "{}", r.stderr);

    let metric = json!({
        "metric": {"interpretation": "cosmological", "alpha": 0.1, "mass": 1.0, "xi": 0.1},
        "grids": {"tau": [1.0]}
    });
    let r = fkg(&dir, "metric", &metric, &[], &env);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("metric.xi"), "{}", r.stderr);

    let mut c = singular();
    c["grid"] = json!({});
    let r = fkg(&dir, "kernel", &c, &[], &env);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("grid"), "{}", r.stderr);

    let mut c = singular();
    c["grids"]["p"] = json!([]);
    let r = fkg(&dir, "kernel", &c, &[], &env);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("grids.p"), "{}", r.stderr);

    let r = fkg(&dir, "position", &singular(), &[], &env);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("grids.dx"), "{}", r.stderr);
}

#[test]
fn divergence_is_a_numerical_failure() {
    let dir = TempDir::new().unwrap();
    let mut c = singular();
    c["grids"]["p"] = json!([0.0]);
    let r = fkg(&dir, "green", &c, &[], &[("FKG_SEED", "1")]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert!(r.stderr.contains("diverge"), "{}", r.stderr);
}

#[test]
fn metric_compiles_and_round_trips() {
    let dir = TempDir::new().unwrap();
    let env = [("FKG_SEED", "5")];
    let metric = json!({
        "metric": {"interpretation": "cosmological", "alpha": 0.1, "mass": 1.0},
        "grids": {"tau": [0.5, 1.0], "p": [1.0, 3.0], "points": [[0.0, 0.0], [0.2, 0.7]]},
        "quadrature": {"rel_tol": 1e-9}
    });
    let r = fkg(&dir, "metric", &metric, &[], &env);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rs = rows(&r.out);
    let get = |m: &str| rs.iter().find(|x| &x[5] == m).map(value).unwrap();
    assert!((get("nu") - 0.2 / 0.7).abs() < 1e-12);
    assert!((get("sigma") - 0.3 / 0.7).abs() < 1e-12);
    assert_eq!(get("theorem1_regime"), 1.0);
    assert!((get("nu") - 0.2857).abs() < 1e-4 && (get("sigma") - 0.4286).abs() < 1e-4);

    let compiled: Value = serde_json::from_str(&std::fs::read_to_string(r.out.join("compiled_potential.json")).unwrap()).unwrap();
    assert!(compiled.get("metric").is_none());
    assert_eq!(compiled["potential"]["form"]["dim"], 3);
    let direct = fkg(&dir, "bounds", &metric, &[], &env);
    let again = fkg(&dir, "bounds", &compiled, &[], &env);
    assert_eq!(direct.code, 0, "{}", direct.stderr);
    assert_eq!(again.code, 0, "{}", again.stderr);
    assert_eq!(without_timestamp(&direct.out), without_timestamp(&again.out));
    assert_eq!(rows(&direct.out).len(), 16);
}

#[test]
fn constant_potential_green_is_the_free_field() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (0.75, 0.4);
    let c = json!({
        "potential": {"form": {"type": "constant", "dim": 2, "value": a}, "w": [{"amplitude": b, "exponent": 0.0}]},
        "grids": {"p": [1.0, 2.5], "points": [[0.0, 0.0], [0.3, 0.3]]},
        "mc": {"n_paths": 200, "n_steps": 2},
        "quadrature": {"tau_points": 24},
        "fits": {"lambda": 0.5}
    });
    let r = fkg(&dir, "green", &c, &[], &[("FKG_SEED", "9")]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rs = rows(&r.out);
    let mut seen = 0;
    for row in rs.iter().filter(|x| &x[1] == "green") {
        let p = inputs(row)["p"][0].as_f64().unwrap();
        let exact = (2.0 * a * p * p + 2.0 * b).powf(-0.5);
        let v = value(row);
        let tol = match &row[5] {
            "mc" => 3.0 * row[4].parse::<f64>().unwrap() + 1e-12,
            _ => 1e-7 * exact,
        };
        assert!((v - exact).abs() <= tol, "{} at p = {p}: {v} vs {exact}", &row[5]);
        seen += 1;
    }
    // four methods at two points and two momenta
    assert_eq!(seen, 16);
    assert!(rs.iter().filter(|x| &x[1] == "sandwich").all(|x| &x[5] == "pass"));
    assert!(r.stdout.contains("sandwich violations: 0"), "{}", r.stdout);
}

#[test]
fn scaling_moments_and_position_produce_fits() {
    let dir = TempDir::new().unwrap();
    let env = [("FKG_SEED", "3")];
    let c = json!({
        "potential": {"form": {"type": "isotropic", "dim": 3, "terms": [{"exponent": -0.5}]}},
        "grids": {
            "p_log": {"min": 4.0, "max": 64.0, "n": 5},
            "dx": {"min": 0.01, "max": 0.1, "n": 4},
            "points": [[0.0, 0.0], [1.0, 1.0]]
        }
    });
    let r = fkg(&dir, "scaling", &c, &[], &env);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rs = rows(&r.out);
    let find = |op: &str, m: &str, eta: f64| {
        rs.iter()
            .filter(|x| &x[1] == op && &x[5] == m)
            .find(|x| inputs(x).get("eta").and_then(Value::as_f64).or(inputs(x)["theta"].as_f64()) == Some(eta))
            .map(value)
            .unwrap()
    };
    assert!((find("scaling_momentum", "lower_fit", 0.0) + 4.0 / 3.0).abs() < 0.02);
    assert!((find("scaling_momentum", "predicted", 0.0) + 4.0 / 3.0).abs() < 1e-12);
    assert!((find("scaling_position", "upper_fit", 0.0) + 5.0 / 3.0).abs() < 0.05);
    assert!((find("scaling_position", "short_distance_predicted", 0.0) + 5.0 / 3.0).abs() < 1e-12);
    assert!((find("scaling_position", "upper_fit", 1.0) + 2.0).abs() < 0.06);
    assert!(rs.iter().any(|x| &x[1] == "scaling_window"));

    let c = json!({
        "potential": {"form": {"type": "isotropic", "dim": 1, "terms": [{"exponent": -0.5}]}},
        "grids": {"tau": [0.25, 0.5, 1.0, 2.0, 4.0]},
        "mc": {"n_paths": 4000, "n_steps": 64}
    });
    let r = fkg(&dir, "moments", &c, &[], &env);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rs = rows(&r.out);
    let fit = |mode: &str, m: &str| {
        rs.iter()
            .find(|x| &x[1] == "moments_fit" && &x[5] == m && inputs(x)["mode"] == mode)
            .map(value)
            .unwrap()
    };
    assert!((fit("integrated", "fit") - 0.75).abs() < 0.05);
    assert!((fit("fixed", "fit") - 0.25).abs() < 0.05);
    assert_eq!(fit("fixed", "predicted"), 0.25);

    let c = json!({
        "potential": {"form": {"type": "constant", "dim": 3, "value": 0.5}},
        "grids": {"dx": {"min": 0.5, "max": 2.0, "n": 3}, "points": [[0.0, 0.0]]},
        "output": {"plots": false}
    });
    let r = fkg(&dir, "position", &c, &[], &env);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(!r.out.join("plots").exists());
    for row in rows(&r.out) {
        let dx = inputs(&row)["x_p"][0].as_f64().unwrap();
        let exact = 1.0 / (2.0 * std::f64::consts::PI.powi(2) * dx * dx);
        assert!(((value(&row) - exact) / exact).abs() < 1e-5, "{dx}");
    }
}

#[test]
fn composite_bounds_bracket_the_kernel() {
    let dir = TempDir::new().unwrap();
    let c = json!({
        "potential": {"form": {
            "type": "composite",
            "base": {"type": "isotropic", "dim": 1, "terms": [{"exponent": -0.5}]},
            "modulation": {"type": "sinusoid", "mean": 1.0, "amplitude": 0.3, "frequency": 2.0},
            "l_matrix": [[0.2]]
        }},
        "grids": {"tau": [1.0], "p": [2.0]},
        "mc": {"n_paths": 20000, "n_steps": 64}
    });
    let b = fkg(&dir, "bounds", &c, &[], &[("FKG_SEED", "4")]);
    let k = fkg(&dir, "kernel", &c, &[], &[("FKG_SEED", "4")]);
    assert_eq!(b.code, 0, "{}", b.stderr);
    assert_eq!(k.code, 0, "{}", k.stderr);
    let br = rows(&b.out);
    let kr = &rows(&k.out)[0];
    let (lo, hi) = (value(&br[0]), value(&br[1]));
    let (m, se) = (value(kr), kr[4].parse::<f64>().unwrap());
    assert!(lo <= m + 3.0 * se && m - 3.0 * se <= hi, "{lo} {m} {hi}");
}
