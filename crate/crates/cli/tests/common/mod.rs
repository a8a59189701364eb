#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const SIZE: &str = "96";
pub const TEMPLATE: &str = "192";

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_beautykit"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn beautykit")
}

pub fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

/// Synthetic portraits, a library and two layers applied to every portrait.
pub fn fixtures(dir: &Path) {
    let d = s(dir);
    ok(&["--seed", "1", "synth-fixtures", "--out-dir", &d, "--size", SIZE, "--identities", "3"]);
    ok(&[
        "--seed",
        "5",
        "make-triplets",
        "--library",
        &s(&dir.join("library")),
        "--std-image",
        &s(&dir.join("standard.png")),
        "--std-landmarks",
        &s(&dir.join("standard.landmarks.json")),
        "--portraits",
        &s(&dir.join("portraits.json")),
        "--layers",
        "2",
        "--out-dir",
        &s(&dir.join("out")),
    ]);
}

pub fn layer_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir.join("out/layers"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    v.sort();
    v
}

pub fn applied(id: &str, layer: &Path) -> String {
    let stem = layer.file_stem().unwrap().to_string_lossy();
    format!("out/applied/{id}__{stem}.png")
}

pub fn bundle(image: &str, id: &str) -> serde_json::Value {
    serde_json::json!({
        "image": image,
        "mask": format!("portraits/{id}_mask.png"),
        "label_map": format!("portraits/{id}_mask.json"),
        "landmarks": format!("portraits/{id}.landmarks.json"),
    })
}

/// Group file: reference is id001 wearing layer 0; samples are id000 with
/// layer 0, bare, and with layer 1.
pub fn group_file(dir: &Path) -> PathBuf {
    let layers = layer_files(dir);
    let g = serde_json::json!({
        "source": "portraits/id000.png",
        "reference": bundle(&applied("id001", &layers[0]), "id001"),
        "generated": [
            bundle(&applied("id000", &layers[0]), "id000"),
            bundle("portraits/id000.png", "id000"),
            bundle(&applied("id000", &layers[1]), "id000"),
        ],
    });
    let p = dir.join("group.json");
    std::fs::write(&p, g.to_string()).unwrap();
    p
}

/// Run manifest where each identity wears layer `layer` and the reference
/// is the next identity wearing it.
pub fn run_file(dir: &Path, method: &str, layer: usize, identity: bool) -> PathBuf {
    let layers = layer_files(dir);
    let ids = ["id000", "id001", "id002"];
    let items: Vec<_> = (0..3)
        .map(|k| {
            let gen = if identity { format!("portraits/{}.png", ids[k]) } else { applied(ids[k], &layers[layer]) };
            serde_json::json!({
                "source": format!("portraits/{}.png", ids[k]),
                "reference": applied(ids[(k + 1) % 3], &layers[layer]),
                "generated": gen,
                "mask": format!("portraits/{}_mask.png", ids[k]),
                "label_map": format!("portraits/{}_mask.json", ids[k]),
            })
        })
        .collect();
    let p = dir.join(format!("{method}.run.json"));
    std::fs::write(&p, serde_json::json!({ "root": ".", "method": method, "items": items }).to_string()).unwrap();
    p
}

/// Every file under `dir`, keyed by relative path.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// One invocation of every seeded subcommand, writing under `out`. Later
/// entries may read what earlier ones wrote.
pub fn seeded_commands(fx: &Path, out: &Path) -> Vec<(&'static str, Vec<String>)> {
    let f = |p: &str| s(&fx.join(p));
    let o = |p: &str| s(&out.join(p));
    let layers = layer_files(fx);
    let group = group_file(fx);
    let run_a = run_file(fx, "wear", 0, false);
    let run_b = run_file(fx, "identity", 0, true);
    let v = |xs: &[&str]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    vec![
        ("compose-layer", v(&[
            "compose-layer", "--library", &f("library"), "--std-image", &f("standard.png"),
            "--std-landmarks", &f("standard.landmarks.json"), "--out-layer", &o("c.mkup"), "--out-image", &o("c.png"),
        ])),
        ("extract-layer", v(&[
            "extract-layer", "--made-up", &o("c.png"), "--bare", &f("standard.png"),
            "--std-landmarks", &f("standard.landmarks.json"), "--out", &o("e.mkup"),
        ])),
        ("apply-layer", v(&[
            "apply-layer", "--layer", &o("e.mkup"), "--image", &f("portraits/id000.png"),
            "--landmarks", &f("portraits/id000.landmarks.json"), "--out", &o("a.png"),
        ])),
        ("make-triplets", v(&[
            "make-triplets", "--library", &f("library"), "--std-image", &f("standard.png"),
            "--std-landmarks", &f("standard.landmarks.json"), "--portraits", &f("portraits.json"),
            "--layers", "2", "--out-dir", &o("trip"),
        ])),
        ("verify", v(&[
            "verify", "--template-size", TEMPLATE, "--image", &f(&applied("id000", &layers[0])),
            "--mask", &f("portraits/id000_mask.png"), "--landmarks", &f("portraits/id000.landmarks.json"),
            "--out", &o("v.png"),
        ])),
        ("reward", v(&[
            "reward", "--stub-provider", "--template-size", TEMPLATE, "--group", &s(&group), "--out", &o("r.json"),
        ])),
        ("advantages", v(&["advantages", "--rewards", "0.3,-1,2.5,0.3"])),
        ("evaluate", v(&[
            "evaluate", "--stub-provider", "--run", &s(&run_a), "--run", &s(&run_b), "--out-dir", &o("eval"), "--scatter",
        ])),
        ("bench-stats", v(&["bench-stats", "--manifest", &f("bench_manifest.json"), "--out", &o("stats.json")])),
        ("pairs", v(&["pairs", "--manifest", &f("bench_manifest.json"), "--n", "50", "--out", &o("pairs.json")])),
        ("flow-demo", v(&[
            "flow-demo", "--trajectories", "300", "--steps", "40", "--fit-iters", "300", "--out", &o("flow.json"),
        ])),
        ("synth-fixtures", v(&["synth-fixtures", "--out-dir", &o("fx"), "--size", "64", "--identities", "2"])),
    ]
}

/// Runs every seeded subcommand twice into fresh directories and returns
/// `(name, identical)` per subcommand.
pub fn determinism_report(fx: &Path, seed: &str) -> Vec<(&'static str, bool)> {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ca = seeded_commands(fx, a.path());
    let cb = seeded_commands(fx, b.path());
    let mut out = Vec::new();
    for ((name, xa), (_, xb)) in ca.iter().zip(&cb) {
        let before_a = snapshot(a.path());
        let before_b = snapshot(b.path());
        let mut args_a = vec!["--seed".to_string(), seed.to_string()];
        args_a.extend(xa.iter().cloned());
        let mut args_b = vec!["--seed".to_string(), seed.to_string()];
        args_b.extend(xb.iter().cloned());
        let ra = bin().args(&args_a).output().unwrap();
        let rb = bin().args(&args_b).output().unwrap();
        let pa = s(a.path());
        let pb = s(b.path());
        let std_a = String::from_utf8_lossy(&ra.stdout).replace(&pa, "<out>");
        let std_b = String::from_utf8_lossy(&rb.stdout).replace(&pb, "<out>");
        let new = |before: &BTreeMap<String, Vec<u8>>, dir: &Path| {
            snapshot(dir).into_iter().filter(|(k, v)| before.get(k) != Some(v)).collect::<BTreeMap<_, _>>()
        };
        let fa = new(&before_a, a.path());
        let fb = new(&before_b, b.path());
        let same = ra.status.success() && rb.status.success() && std_a == std_b && fa == fb && (!fa.is_empty() || !std_a.is_empty());
        if !same {
            eprintln!("{name}: {} / {}", String::from_utf8_lossy(&ra.stderr), String::from_utf8_lossy(&rb.stderr));
        }
        out.push((*name, same));
    }
    out
}
