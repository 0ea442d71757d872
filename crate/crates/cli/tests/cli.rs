use std::process::{Command, Output};

use serde_json::{json, Value};

fn ramsey(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ramsey"))
        .args(args)
        .env_remove("RAMSEY_SEED")
        .output()
        .expect("binary runs")
}

fn json_out(args: &[&str]) -> (Value, i32) {
    let out = ramsey(args);
    let v = serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "{e}: stdout {:?}, stderr {:?}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    });
    (v, out.status.code().unwrap())
}

#[test]
fn fr_of_small_sequence() {
    let (v, code) = json_out(&["fr", "--seq", "[1,2,4]", "--sig", "plus"]);
    assert_eq!(code, 0);
    assert_eq!(v["fr"], json!([1, 2, 3, 4, 5, 6, 7]));
    assert_eq!(v["version"], json!(1));
}

#[test]
fn pushforward_of_principals() {
    let expr = r#"{"pushforward":{"op":"plus","args":[{"principal":2},{"principal":3}]}}"#;
    let (v, code) = json_out(&["uf", "eval", "--expr", expr]);
    assert_eq!(code, 0);
    assert_eq!(v["result"], json!({"kind": "principal", "point": 5}));
}

#[test]
fn tensor_membership_expression() {
    let expr = r#"{"member":{"set":{"dim":2,"mode":"cofinite","support":[[0,0]]},"in":{"tensor":["cofinite","p1"]}}}"#;
    let (v, code) = json_out(&["uf", "eval", "--expr", expr]);
    assert_eq!(code, 0);
    assert_eq!(v["result"], json!(true));
    assert_eq!(v["trace"].as_array().unwrap().len(), 1);
}

#[test]
fn reduction_answers() {
    let (v, code) = json_out(&["reduction", "--a", "[5]", "--b", "[1,2]", "--sig", "plus"]);
    assert_eq!((v["reduces"].clone(), code), (json!(false), 0));
    let (v, _) = json_out(&["reduction", "--a", "[3]", "--b", "[1,2]", "--sig", "plus"]);
    assert_eq!(v["reduces"], json!(true));
}

#[test]
fn parity_search_is_verified() {
    let (v, code) = json_out(&["search", "--length", "4", "--bound", "200", "--coloring", "parity"]);
    assert_eq!(code, 0);
    assert_eq!(v["status"], json!("found"));
    assert_eq!(v["verified"], json!(true));
    assert_eq!(v["witness"], json!([2, 4, 6, 8]));
}

#[test]
fn budget_exhaustion_exits_one() {
    let (v, code) = json_out(&["search", "--length", "4", "--bound", "300", "--coloring", "mod3", "--nodes", "2"]);
    assert_eq!(v["status"], json!("budget-exhausted"));
    assert_eq!(code, 1);
}

#[test]
fn iterated_search_from_file() {
    let dir = std::env::temp_dir().join(format!("ramsey-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cols = dir.join("cols.json");
    std::fs::write(&cols, r#"[{"kind":"mod","modulus":2},{"kind":"mod","modulus":4}]"#).unwrap();
    let (v, code) = json_out(&[
        "iterated-search",
        "--colorings",
        cols.to_str().unwrap(),
        "--length",
        "4",
        "--bound",
        "300",
    ]);
    assert_eq!(code, 0);
    assert_eq!(v["witness"], json!([2, 4, 8, 12]));
}

#[test]
fn galvin_avoids_a_range() {
    let (v, code) = json_out(&["galvin", "--uf", "cofinite", "--op", "plus", "--avoid", "0..9", "--length", "8"]);
    assert_eq!(code, 0);
    assert_eq!(v["sequence"].as_array().unwrap().len(), 8);
    assert_eq!(v["verified"]["violations"], json!([]));
}

#[test]
fn degeneracy_probe_with_zero() {
    let (v, code) = json_out(&["probe-degeneracy", "--sig", "zero", "--length", "4", "--bound", "100"]);
    assert_eq!(code, 0);
    assert_eq!(v["cardinality"], json!(1));
}

#[test]
fn input_errors_exit_two() {
    let out = ramsey(&["search", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
    let out = ramsey(&["fr", "--seq", "nonsense"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"].as_str().unwrap().contains("nonsense"));
    assert_eq!(ramsey(&["galvin", "--length", "3"]).status.code(), Some(2));
}

#[test]
fn admissibility_uses_the_seed() {
    let (a, code) = json_out(&["admissible-check", "--samples", "32", "--seed", "5"]);
    assert_eq!(code, 0);
    assert_eq!(a["passed"], json!(true));
    assert_eq!(a["seed"], json!(5));
    let out = Command::new(env!("CARGO_BIN_EXE_ramsey"))
        .args(["admissible-check", "--samples", "32"])
        .env("RAMSEY_SEED", "5")
        .output()
        .unwrap();
    assert_eq!(serde_json::from_slice::<Value>(&out.stdout).unwrap(), a);
}

#[test]
fn manifests_replay_identically() {
    let dir = std::env::temp_dir().join(format!("ramsey-manifest-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let manifest = dir.join("m.json");
    let first = ramsey(&[
        "--pretty",
        "search",
        "--length",
        "3",
        "--bound",
        "100",
        "--coloring",
        "mod3",
        "--manifest-out",
        manifest.to_str().unwrap(),
    ]);
    assert_eq!(first.status.code(), Some(0));
    let m: Value = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    assert_eq!(m["command"][0], json!("ramsey"));
    assert!(m["results_digest"].as_str().unwrap().len() == 64);
    let (v, code) = json_out(&["replay", "--manifest", manifest.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(v["identical"], json!(true));

    let mut tampered = m.clone();
    tampered["results_digest"] = json!("00");
    std::fs::write(&manifest, tampered.to_string()).unwrap();
    let (v, code) = json_out(&["replay", "--manifest", manifest.to_str().unwrap()]);
    assert_eq!((v["identical"].clone(), code), (json!(false), 1));
}
