use std::collections::BTreeMap;
use std::path::Path;

use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::*;
use crate::imgcore::{save_png, BitDepth, ColorSpace};
use crate::rewards::{write_embedding, Embedding, OfflineProvider, StubEmbedder};
use crate::synth::bench_manifest;

fn rgb(w: usize, h: usize, f: impl Fn(usize) -> [f32; 3]) -> ImageBuf {
    let data = (0..w * h).flat_map(|i| f(i)).collect();
    ImageBuf::new(w, h, 3, ColorSpace::Srgb, data).unwrap()
}

fn tiny_manifest(ns: usize, nr: usize) -> BenchManifest {
    let mut m = bench_manifest();
    m.sources.truncate(ns);
    m.references.truncate(nr);
    m
}

#[test]
fn manifest_validation() {
    let m = bench_manifest();
    m.validate().unwrap();
    assert_eq!(BenchManifest::from_json(&m.to_json()).unwrap(), m);

    let mut bad = m.clone();
    bad.sources[3].gender = "other".into();
    assert!(matches!(bad.validate(), Err(BenchError::InvalidManifest(_))));
    let mut dup = m.clone();
    dup.references[1].path = dup.sources[0].path.clone();
    assert!(matches!(dup.validate(), Err(BenchError::InvalidManifest(_))));
    let mut cx = m;
    cx.vocabulary.complex_styles = vec!["baroque".into()];
    assert!(cx.validate().is_err());
}

#[test]
fn pairs_cases() {
    let m = tiny_manifest(5, 7);
    assert!(make_pairs(&m, 0, 1).unwrap().is_empty());
    let a = make_pairs(&m, 50, 9).unwrap();
    assert_eq!(a, make_pairs(&m, 50, 9).unwrap());
    assert_ne!(a, make_pairs(&m, 50, 10).unwrap());
    assert!(a.iter().all(|p| p.source < 5 && p.reference < 7));
    assert!(matches!(make_pairs(&tiny_manifest(0, 7), 3, 0), Err(BenchError::EmptySide("sources"))));
    assert!(matches!(make_pairs(&tiny_manifest(5, 0), 3, 0), Err(BenchError::EmptySide("references"))));
}

fn chi2_p(counts: &[usize], n: usize) -> f64 {
    let e = n as f64 / counts.len() as f64;
    let stat: f64 = counts.iter().map(|c| (*c as f64 - e).powi(2) / e).sum();
    1.0 - ChiSquared::new((counts.len() - 1) as f64).unwrap().cdf(stat)
}

#[test]
fn pairs_marginals_are_uniform() {
    let m = bench_manifest();
    assert_eq!((m.sources.len(), m.references.len()), (300, 512));
    for seed in 0..5 {
        let pairs = make_pairs(&m, 1000, seed).unwrap();
        let mut sc = vec![0usize; 300];
        let mut rc = vec![0usize; 512];
        for p in &pairs {
            sc[p.source] += 1;
            rc[p.reference] += 1;
        }
        assert!(chi2_p(&sc, 1000) > 0.01, "seed {seed} sources");
        assert!(chi2_p(&rc, 1000) > 0.01, "seed {seed} references");
    }
}

#[test]
fn l2m_cases() {
    let (w, h) = (8, 6);
    let none = FaceRegionMask::from_fn(w, h, |_| false);
    let src = rgb(w, h, |i| [i as f32 / 48.0, 0.2, 0.7]);
    assert_eq!(l2m(&src, &src, &none).unwrap(), 0.0);

    let black = rgb(w, h, |_| [0.0; 3]);
    let white = rgb(w, h, |_| [1.0; 3]);
    assert!((l2m(&white, &black, &none).unwrap() - 3f64.sqrt()).abs() < 1e-9);

    // Half the background shifted by 0.1 in red.
    let face = FaceRegionMask::from_fn(w, h, |i| i < 8);
    let base = rgb(w, h, |_| [0.5, 0.5, 0.5]);
    let gen = rgb(w, h, |i| if i >= 8 && i % 2 == 0 { [0.6, 0.5, 0.5] } else { [0.5, 0.5, 0.5] });
    assert!((l2m(&gen, &base, &face).unwrap() - 0.05).abs() < 1e-6);

    let all = FaceRegionMask::from_fn(w, h, |_| true);
    assert!(matches!(l2m(&gen, &base, &all), Err(BenchError::NoBackground)));
    assert!(matches!(l2m(&rgb(4, 4, |_| [0.0; 3]), &base, &face), Err(BenchError::DimensionMismatch(_))));
}

#[test]
fn cxf_and_normalization() {
    assert!((cxf(0.644, 0.901) - 0.580).abs() < 1e-3);
    assert!((cxf(0.541, 0.869) - 0.470).abs() < 1e-3);
    assert_eq!(cxf(0.7, 0.0), 0.0);

    let m: BTreeMap<String, f64> = [("a", 0.2), ("b", 0.5), ("c", 0.8)].map(|(k, v)| (k.to_string(), v)).into();
    let n = minmax_normalize(&m).unwrap();
    assert_eq!(n["a"], 0.0);
    assert!((n["b"] - 0.5).abs() < 1e-12);
    assert_eq!(n["c"], 1.0);
    let flat: BTreeMap<String, f64> = [("x", 0.3), ("y", 0.3)].map(|(k, v)| (k.to_string(), v)).into();
    assert!(minmax_normalize(&flat).unwrap().values().all(|v| *v == 0.0));
    assert!(matches!(minmax_normalize(&BTreeMap::new()), Err(BenchError::NoMethods)));
}

#[test]
fn entropy_cases() {
    assert!((entropy_bits(&[25.0; 4]).unwrap() - 2.0).abs() < 1e-12);
    assert_eq!(entropy_bits(&[17.0]).unwrap(), 0.0);
    // 0.5·1 + 0.25·2 + (1/6)·log2 6 + (1/12)·log2 12
    let oracle = 0.5 + 0.5 + 6f64.log2() / 6.0 + 12f64.log2() / 12.0;
    let h = entropy_bits(&[150.0, 75.0, 50.0, 25.0]).unwrap();
    assert!((h - oracle).abs() < 1e-12 && (h - 1.7295).abs() < 1e-3, "{h}");
    assert_eq!(entropy_bits(&[3.0, 0.0, 3.0]).unwrap(), 1.0);
    assert!(entropy_bits(&[0.0, 0.0]).is_err());
    assert!(entropy_bits(&[]).is_err());
    assert!(entropy_bits(&[2.0, -1.0]).is_err());
}

#[test]
fn composition_statistics() {
    let s = ManifestStats::of(&bench_manifest()).unwrap();
    assert_eq!((s.sources, s.references), (300, 512));
    assert_eq!(s.gender_share["female"], 0.5);
    assert_eq!(s.gender_share["male"], 0.5);
    assert!((s.complex_share - 172.0 / 512.0).abs() < 1e-12);
    assert_eq!(format!("{:.1}", 100.0 * s.complex_share), "33.6");
    assert!((s.pose_share["frontal"] - 0.7).abs() < 1e-12);
    // Three equally filled tones.
    assert!((s.skin_tone_entropy_bits - 3f64.log2()).abs() < 1e-12);
    assert!(ManifestStats::of(&tiny_manifest(0, 3)).is_err());
}

// Run fixtures ------------------------------------------------------------

const S: usize = 16;

fn face_mask() -> FaceRegionMask {
    FaceRegionMask::from_fn(S, S, |i| {
        let (x, y) = (i % S, i / S);
        (4..12).contains(&x) && (3..13).contains(&y)
    })
}

fn portrait(seed: usize) -> ImageBuf {
    rgb(S, S, |i| {
        let v = ((i * 7 + seed * 13) % 31) as f32 / 31.0;
        [v, 0.5 * v + 0.2, 0.9 - 0.5 * v]
    })
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: std::path::PathBuf,
}

/// `n` items. Generated images equal the source when `identity` is set,
/// otherwise they take the reference's colors inside the face.
fn fixture(n: usize, identity: bool) -> (Fixture, RunManifest) {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let mask = face_mask();
    mask.save(root.join("mask.png"), root.join("mask.json")).unwrap();
    let mut items = Vec::new();
    for k in 0..n {
        let src = portrait(k);
        let reference = portrait(k + 100);
        let gen = if identity {
            src.clone()
        } else {
            let mut g = src.clone();
            for i in 0..S * S {
                if mask.is_face(i) {
                    g.px_mut(i).copy_from_slice(reference.px(i));
                }
            }
            g
        };
        for (name, img) in [("src", &src), ("ref", &reference), ("gen", &gen)] {
            save_png(img, root.join(format!("{name}{k}.png")), BitDepth::Sixteen).unwrap();
        }
        items.push(RunItem {
            source: format!("src{k}.png"),
            reference: format!("ref{k}.png"),
            generated: format!("gen{k}.png"),
            mask: "mask.png".into(),
            label_map: "mask.json".into(),
        });
    }
    let run = RunManifest {
        root: root.clone(),
        method: if identity { "identity" } else { "paste" }.into(),
        items,
    };
    (Fixture { _dir: dir, root }, run)
}

fn assert_row_invariants(rep: &MethodReport) {
    for r in rep.rows.iter().filter(|r| r.status == RowStatus::Ok) {
        assert!((r.cxf.unwrap() - r.clip_i.unwrap() * r.face_sim.unwrap()).abs() < 1e-9);
    }
    if let Some(m) = rep.means {
        let ok: Vec<&EvalRow> = rep.rows.iter().filter(|r| r.status == RowStatus::Ok).collect();
        let mean = |f: fn(&EvalRow) -> f64| ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64;
        assert!((m.l2m - mean(|r| r.l2m.unwrap())).abs() < 1e-9);
        assert!((m.clip_i - mean(|r| r.clip_i.unwrap())).abs() < 1e-9);
        assert!((m.face_sim - mean(|r| r.face_sim.unwrap())).abs() < 1e-9);
        assert!((m.cxf - mean(|r| r.cxf.unwrap())).abs() < 1e-9);
    }
}

#[test]
fn identity_method_scores() {
    let (_f, run) = fixture(6, true);
    let rep = evaluate_run(&run, &StubEmbedder::default(), &RunModels::default());
    assert_eq!((rep.evaluated, rep.failed), (6, 0));
    for r in &rep.rows {
        assert!((r.face_sim.unwrap() - 1.0).abs() < 1e-6);
        assert_eq!(r.l2m.unwrap(), 0.0);
    }
    assert_row_invariants(&rep);
    assert_eq!(rep.rows.iter().map(|r| r.index).collect::<Vec<_>>(), (0..6).collect::<Vec<_>>());
}

#[test]
fn paste_method_keeps_background() {
    let (_f, run) = fixture(4, false);
    let rep = evaluate_run(&run, &StubEmbedder::default(), &RunModels::default());
    assert_eq!(rep.failed, 0);
    assert_row_invariants(&rep);
    let m = rep.means.unwrap();
    // Only facial pixels changed, and 16-bit storage is lossless enough.
    assert!(m.l2m < 1e-4, "{}", m.l2m);
    assert!(m.face_sim < 1.0);
}

#[test]
fn missing_artifacts_are_flagged() {
    let (_f, mut run) = fixture(5, true);
    run.items[1].generated = "absent.png".into();
    run.items[3].mask = "nope.png".into();
    let rep = evaluate_run(&run, &StubEmbedder::default(), &RunModels::default());
    assert_eq!((rep.evaluated, rep.failed), (3, 2));
    assert!(matches!(rep.rows[1].status, RowStatus::Failed(_)));
    assert!(rep.rows[1].cxf.is_none());
    assert_row_invariants(&rep);

    let csv = rep.csv_string().unwrap();
    assert_eq!(csv.lines().count(), 6);
    assert!(csv.lines().nth(2).unwrap().contains(",failed,"));
    let v = rep.summary_json();
    assert_eq!(v["failed"], 2);
    assert_eq!(v["evaluated"], 3);

    for item in &mut run.items {
        item.source = "gone.png".into();
    }
    let rep = evaluate_run(&run, &StubEmbedder::default(), &RunModels::default());
    assert!(rep.means.is_none());
    assert!(rep.summary_json()["means"].is_null());
}

fn write_emb(root: &Path, stem: &str, tag: &str, v: Vec<f32>) {
    let f = std::fs::File::create(root.join(format!("{stem}.{tag}.emb"))).unwrap();
    write_embedding(&Embedding::new(v, tag).unwrap(), f).unwrap();
}

/// Unit vector in 8 dimensions at `cos` to the basis vector `e_a`, tilted
/// toward `e_b`.
fn at_angle(a: usize, b: usize, cos: f64) -> Vec<f32> {
    let mut v = vec![0.0f32; 8];
    v[a] = cos as f32;
    v[b] = (1.0 - cos * cos).sqrt() as f32;
    v
}

fn basis(a: usize) -> Vec<f32> {
    let mut v = vec![0.0f32; 8];
    v[a] = 1.0;
    v
}

#[test]
fn preset_embeddings_reproduce_aggregates() {
    let (f, run) = fixture(10, false);
    let models = RunModels::default();
    for k in 0..10 {
        let (a, b) = (k % 8, (k + 3) % 8);
        write_emb(&f.root, &format!("gen{k}"), &models.image_model, basis(a));
        write_emb(&f.root, &format!("ref{k}"), &models.image_model, at_angle(a, b, 0.644));
        write_emb(&f.root, &format!("gen{k}"), &models.face_model, basis(b));
        write_emb(&f.root, &format!("src{k}"), &models.face_model, at_angle(b, a, 0.901));
    }
    let rep = evaluate_run(&run, &OfflineProvider::new(&f.root), &models);
    assert_eq!(rep.failed, 0, "{:?}", rep.rows[0].status);
    let m = rep.means.unwrap();
    assert!((m.clip_i - 0.644).abs() < 1e-6);
    assert!((m.face_sim - 0.901).abs() < 1e-6);
    assert!((m.cxf - 0.580).abs() < 1e-3, "{}", m.cxf);
    assert_row_invariants(&rep);
}

#[test]
fn run_manifest_root_is_relative_to_file() {
    let (f, run) = fixture(2, true);
    let sub = f.root.join("runs");
    std::fs::create_dir(&sub).unwrap();
    let on_disk = RunManifest {
        root: "..".into(),
        ..run
    };
    std::fs::write(sub.join("run.json"), serde_json::to_string(&on_disk).unwrap()).unwrap();
    let loaded = RunManifest::load(sub.join("run.json")).unwrap();
    let rep = evaluate_run(&loaded, &StubEmbedder::default(), &RunModels::default());
    assert_eq!(rep.failed, 0);
}

#[test]
fn scatter_has_one_point_per_method() {
    let (_f, a) = fixture(3, true);
    let (_g, b) = fixture(3, false);
    let stub = StubEmbedder::default();
    let reps = [
        evaluate_run(&a, &stub, &RunModels::default()),
        evaluate_run(&b, &stub, &RunModels::default()),
    ];
    let svg = scatter_svg(&reps).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<circle").count(), 2);
    assert!(svg.contains(">identity<") && svg.contains(">paste<"));
    assert!(scatter_svg(&[]).is_err());
}

proptest! {
    #[test]
    fn entropy_bounded_and_permutation_invariant(
        counts in prop::collection::vec(0u32..50, 1..8), rot in 0usize..8,
    ) {
        let c: Vec<f64> = counts.iter().map(|c| *c as f64).collect();
        prop_assume!(c.iter().sum::<f64>() > 0.0);
        let h = entropy_bits(&c).unwrap();
        let k = c.len() as f64;
        prop_assert!(h <= k.log2() + 1e-12);
        let mut r = c.clone();
        r.rotate_left(rot % c.len());
        prop_assert!((entropy_bits(&r).unwrap() - h).abs() < 1e-12);
        let uniform = c.iter().all(|v| *v == c[0]);
        prop_assert_eq!(uniform, (h - k.log2()).abs() < 1e-9);
    }

    #[test]
    fn minmax_preserves_order(v in prop::collection::vec(-10.0f64..10.0, 1..10)) {
        let m: BTreeMap<String, f64> = v.iter().enumerate().map(|(i, x)| (format!("m{i}"), *x)).collect();
        let n = minmax_normalize(&m).unwrap();
        let mut keys: Vec<&String> = m.keys().collect();
        keys.sort_by(|a, b| m[*a].partial_cmp(&m[*b]).unwrap());
        for w in keys.windows(2) {
            prop_assert!(n[w[0]] <= n[w[1]]);
        }
        prop_assert!(n.values().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn l2m_symmetric_and_blind_to_face(
        seed in 0usize..1000, shift in 1usize..7,
    ) {
        let mask = face_mask();
        let a = portrait(seed);
        let b = portrait(seed + 1);
        let d = l2m(&a, &b, &mask).unwrap();
        prop_assert!((d - l2m(&b, &a, &mask).unwrap()).abs() < 1e-12);
        // Translating facial content inside the face region.
        let mut moved = a.clone();
        for i in 0..S * S {
            if mask.is_face(i) {
                let j = (i + shift) % (S * S);
                moved.px_mut(i).copy_from_slice(b.px(j));
            }
        }
        prop_assert!((l2m(&moved, &b, &mask).unwrap() - d).abs() < 1e-12);
    }
}
