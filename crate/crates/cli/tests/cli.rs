//! Integration tests for the `clms` binary: flag validation, error exit
//! codes, and the smaller command surfaces (inspect, verify, noop repair).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_clms"))
}

fn kv(out: &Output) -> BTreeMap<String, String> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn encode(input: &Path, out: &Path, args: &[&str]) -> Output {
    let mut cmd = bin();
    cmd.arg("encode").arg(input).args(args);
    cmd.arg("--out").arg(out);
    cmd.output().unwrap()
}

struct Fixture {
    _dir: tempfile::TempDir,
    input: PathBuf,
    shards: PathBuf,
    manifest: PathBuf,
    payload: Vec<u8>,
}

fn fixture(args: &[&str]) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("input.bin");
    let payload: Vec<u8> = (0u32..3000).map(|i| (i * 131 + 7) as u8).collect();
    std::fs::write(&input, &payload).unwrap();
    let shards = dir.path().join("shards");
    let out = encode(&input, &shards, args);
    assert!(out.status.success(), "{out:?}");
    let manifest = shards.join("manifest.txt");
    Fixture {
        _dir: dir,
        input,
        shards,
        manifest,
        payload,
    }
}

#[test]
fn encode_reports_parameters() {
    let f = fixture(&["--q", "2", "--t", "2"]);
    let out = encode(&f.input, &f.shards, &["--q", "2", "--t", "2"]);
    let kv = kv(&out);
    assert_eq!(kv["n"], "4");
    assert_eq!(kv["k"], "2");
    assert_eq!(kv["alpha"], "4");
    assert_eq!(kv["length"], "3000");
    assert!(f.manifest.is_file());
    for node in ["node_0_1", "node_1_1", "node_0_2", "node_1_2"] {
        assert!(f.shards.join(node).join("stripe_0.shard").is_file());
    }
}

#[test]
fn decode_without_enough_nodes_exits_nonzero() {
    let f = fixture(&["--q", "2", "--t", "2"]);
    for node in ["node_0_1", "node_1_1", "node_0_2"] {
        std::fs::remove_dir_all(f.shards.join(node)).unwrap();
    }
    let out = bin()
        .arg("decode")
        .arg(&f.manifest)
        .arg(&f.shards)
        .arg("--out")
        .arg(f.shards.join("out.bin"))
        .output()
        .unwrap();
    assert!(!out.status.success(), "decode must fail below k nodes");
}

#[test]
fn verify_flags_tampering_with_nonzero_exit() {
    let f = fixture(&["--q", "2", "--t", "2"]);
    let out = bin()
        .arg("verify")
        .arg(&f.manifest)
        .arg(&f.shards)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(kv(&out)["ok"], "true");

    // Corrupt one payload byte: exit must turn nonzero and name the shard.
    let victim = f.shards.join("node_0_1/stripe_1.shard");
    let mut bytes = std::fs::read(&victim).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 0x40;
    std::fs::write(&victim, &bytes).unwrap();
    let out = bin()
        .arg("verify")
        .arg(&f.manifest)
        .arg(&f.shards)
        .output()
        .unwrap();
    assert!(!out.status.success());
    let kv = kv(&out);
    assert_eq!(kv["ok"], "false");
    assert_eq!(kv["crc_fail_count"], "1");
    assert_eq!(kv["crc_fail"], "0,1:1");
}

#[test]
fn repair_of_live_node_is_noop() {
    let f = fixture(&["--q", "2", "--t", "2"]);
    let out = bin()
        .arg("repair")
        .arg(&f.manifest)
        .arg(&f.shards)
        .args(["--node", "0,1"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let kv = kv(&out);
    assert_eq!(kv["noop"], "true");
    assert_eq!(kv["symbols_transferred"], "0");
}

#[test]
fn repair_rejects_out_of_range_node() {
    let f = fixture(&["--q", "2", "--t", "2"]);
    let out = bin()
        .arg("repair")
        .arg(&f.manifest)
        .arg(&f.shards)
        .args(["--node", "5,9"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    // A diagnostic, not a crash: exit 101 (panic) also fails the status
    // check above, so pin the failure mode explicitly.
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(!err.contains("panicked"), "stderr: {err}");
    assert!(err.contains("5,9"), "stderr: {err}");
}

#[test]
fn inspect_describes_manifest_and_shard() {
    let f = fixture(&["--q", "2", "--t", "2"]);
    let out = bin().arg("inspect").arg(&f.manifest).output().unwrap();
    assert!(out.status.success());
    let m = kv(&out);
    assert_eq!(m["kind"], "manifest");
    assert_eq!(
        m["stripes"].parse::<u32>().unwrap() * 4,
        m["shards"].parse::<u32>().unwrap()
    );

    let out = bin()
        .arg("inspect")
        .arg(f.shards.join("node_1_2/stripe_0.shard"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let s = kv(&out);
    assert_eq!(s["kind"], "shard");
    assert_eq!(s["node"], "1,2");
    assert_eq!(s["payload_len"], "4");
}

#[test]
fn rdp_base_round_trip() {
    let f = fixture(&["--q", "2", "--t", "3", "--base", "rdp"]);
    std::fs::remove_dir_all(f.shards.join("node_0_3")).unwrap();
    let out = bin()
        .arg("repair")
        .arg(&f.manifest)
        .arg(&f.shards)
        .args(["--node", "0,3"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    assert_eq!(kv(&out)["ratio"], "0.6250");
    std::fs::remove_dir_all(f.shards.join("node_1_1")).unwrap();
    std::fs::remove_dir_all(f.shards.join("node_0_2")).unwrap();
    let restored = f.shards.join("restored.bin");
    let out = bin()
        .arg("decode")
        .arg(&f.manifest)
        .arg(&f.shards)
        .arg("--out")
        .arg(&restored)
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    assert_eq!(std::fs::read(&restored).unwrap(), f.payload);
}

#[test]
fn rdp_base_rejects_bad_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.bin");
    std::fs::write(&input, [0u8; 64]).unwrap();
    // q != 2 and composite q*t-1 are both unusable under the rdp base.
    for (q, t) in [("3", "2"), ("2", "5")] {
        let out = bin()
            .arg("encode")
            .arg(&input)
            .args(["--q", q, "--t", t, "--base", "rdp"])
            .arg("--out")
            .arg(dir.path().join("s"))
            .output()
            .unwrap();
        assert!(!out.status.success(), "rdp base must reject q={q}, t={t}");
    }
}

#[test]
fn n_minus_two_round_trip_with_explicit_aloof() {
    let f = fixture(&["--q", "2", "--t", "3", "--d", "n-2"]);
    std::fs::remove_dir_all(f.shards.join("node_1_2")).unwrap();
    // Aloof in the same section is an invalid helper restriction.
    let out = bin()
        .arg("repair")
        .arg(&f.manifest)
        .arg(&f.shards)
        .args(["--node", "1,2", "--aloof", "0,2"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let out = bin()
        .arg("repair")
        .arg(&f.manifest)
        .arg(&f.shards)
        .args(["--node", "1,2", "--aloof", "0,3"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    let kv = kv(&out);
    assert_eq!(kv["aloof"], "0,3");
    assert_eq!(kv["helpers"], "4");
    let out = bin()
        .arg("verify")
        .arg(&f.manifest)
        .arg(&f.shards)
        .output()
        .unwrap();
    assert!(out.status.success());
}

#[test]
fn bench_is_deterministic_per_seed() {
    let run = |seed: &str| {
        let out = bin()
            .args([
                "bench",
                "--q",
                "2",
                "--t",
                "2",
                "--stripes",
                "3",
                "--seed",
                seed,
            ])
            .output()
            .unwrap();
        assert!(out.status.success());
        String::from_utf8(out.stdout).unwrap()
    };
    assert_eq!(run("11"), run("11"));
    assert_eq!(
        kv(&bin()
            .args([
                "bench",
                "--q",
                "2",
                "--t",
                "2",
                "--stripes",
                "3",
                "--seed",
                "11"
            ])
            .output()
            .unwrap())["repair_symbols"],
        "18"
    );
}
