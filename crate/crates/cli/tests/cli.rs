use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn repo() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn scenario(name: &str) -> String {
    repo()
        .join("scenarios")
        .join(format!("{name}.toml"))
        .display()
        .to_string()
}

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .display()
        .to_string()
}

fn mfgset(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfgset"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn example71_writes_the_state_triple() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfgset(dir.path(), &["example71", "--a0", "0.25"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("example71-values.csv")).unwrap();
    for v in ["0.4375", "0.6875", "0.9375"] {
        assert!(csv.contains(&format!("state,{v},")), "{csv}");
    }
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("example71.json")).unwrap())
            .unwrap();
    assert_eq!(json["pass"], true);
    assert_eq!(json["path_value_absent_from_state_set"], true);
}

#[test]
fn broken_table_is_rejected_with_row_sum_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfgset(
        dir.path(),
        &["validate", "--scenario", &fixture("broken_table.toml")],
    );
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("transition rows do not sum to one"), "{err}");
    let diag: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(diag["error"], "input");
}

#[test]
fn shipped_table_validates() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfgset(
        dir.path(),
        &["validate", "--scenario", &scenario("table_game")],
    );
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn unknown_scenario_key_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfgset(
        dir.path(),
        &["validate", "--scenario", &fixture("unknown_key.toml")],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("inital"), "{}", stderr(&o));
}

#[test]
fn nplayer_converge_replays_bitwise() {
    let args = [
        "nplayer",
        "converge",
        "--scenario",
        &scenario("congestion"),
        "--seed",
        "7",
        "--samples",
        "400",
        "--n-list",
        "8,16,32",
    ];
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    assert!(mfgset(a.path(), &args).status.success());
    assert!(mfgset(b.path(), &args).status.success());
    let mut threaded = args.to_vec();
    threaded.extend(["--threads", "2"]);
    assert!(mfgset(c.path(), &threaded).status.success());
    let first = files(a.path());
    assert_eq!(first.len(), 4);
    assert_eq!(first, files(b.path()));
    assert_eq!(first, files(c.path()));
}

#[test]
fn every_file_embeds_the_manifest_hash() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfgset(
        dir.path(),
        &[
            "dpp-check",
            "--scenario",
            &scenario("example71"),
            "--eps",
            "0,0.05",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("dpp-check-manifest.json")).unwrap(),
    )
    .unwrap();
    let hash = manifest["manifest_hash"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    for (name, bytes) in files(dir.path()) {
        assert!(String::from_utf8(bytes).unwrap().contains(hash), "{name}");
    }
}

#[test]
fn seed_changes_the_manifest_hash() {
    let run = |seed: &str| {
        let dir = tempfile::tempdir().unwrap();
        let o = mfgset(
            dir.path(),
            &[
                "nplayer",
                "converge",
                "--scenario",
                &scenario("congestion"),
                "--seed",
                seed,
                "--samples",
                "50",
                "--n-list",
                "8",
            ],
        );
        assert!(o.status.success(), "{}", stderr(&o));
        let json: serde_json::Value = serde_json::from_str(
            &fs::read_to_string(dir.path().join("nplayer-converge.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(json["seed"].as_u64(), Some(seed.parse().unwrap()));
        json["manifest_hash"].as_str().unwrap().to_string()
    };
    assert_ne!(run("1"), run("2"));
}

#[test]
fn size_guard_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfgset(
        dir.path(),
        &["relaxed", "dpp", "--scenario", &scenario("congestion")],
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("size_guard"));
}

#[test]
fn path_game_dpp_check_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfgset(
        dir.path(),
        &["dpp-check", "--scenario", &scenario("path_switching")],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failed_check_exits_one() {
    // the constant top action is far from an equilibrium of the congestion game
    let dir = tempfile::tempdir().unwrap();
    let o = mfgset(
        dir.path(),
        &[
            "nplayer",
            "eq-check",
            "--scenario",
            &scenario("congestion"),
            "--actions",
            "4",
            "--eps",
            "0.001",
        ],
    );
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(dir.path().join("nplayer-eq-check-players.csv").exists());
}

#[test]
fn diffusion_flow_conserves_mass() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfgset(
        dir.path(),
        &[
            "diffusion",
            "flow",
            "--scenario",
            &scenario("diffusion_drift"),
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("diffusion-flow.json")).unwrap())
            .unwrap();
    assert!(json["mass_error"].as_f64().unwrap() < 1e-8);
}
