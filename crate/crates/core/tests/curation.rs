use beautykit::geom::{build_warp, canonical_topology, warp_image};
use beautykit::imgcore::{ColorSpace, ImageBuf};
use beautykit::layers::{apply_layer, build_triplets, extract_layer, warp_layer, AppliedRecord};
use beautykit::synth::{identities, random_layer, render_portrait, standard_face};

const SIZE: usize = 128;

#[test]
fn extract_then_apply_reproduces_made_up_face() {
    let bare = standard_face(SIZE);
    let topo = canonical_topology();
    for seed in 0..20 {
        let (made, composed) = random_layer(SIZE, seed);
        let layer = extract_layer(&made, &bare.image, &bare.landmarks).unwrap();
        let back = apply_layer(&layer, &bare.image, &bare.landmarks, topo).unwrap();
        let mut worst = 0.0f32;
        for i in 0..SIZE * SIZE {
            let (m, b) = (made.px(i), back.px(i));
            if !bare.mask.is_face(i) {
                assert_eq!(m[..3], b[..3], "seed {seed} background pixel {i}");
            }
            for k in 0..3 {
                worst = worst.max((m[k] - b[k]).abs());
            }
        }
        assert!(worst < 1e-3, "seed {seed}: {worst}");
        assert!(composed.alpha.data().iter().any(|a| *a > 0.0));
    }
}

fn changed(a: &ImageBuf, b: &ImageBuf, i: usize) -> bool {
    a.px(i)[..3] != b.px(i)[..3]
}

#[test]
fn triplets_differ_only_inside_layer_support() {
    let topo = canonical_topology();
    let people: Vec<_> = identities(3, 7).iter().map(|id| render_portrait(id, SIZE)).collect();
    let layers: Vec<_> = (0..2).map(|k| random_layer(SIZE, 100 + k).1).collect();
    let mut applied = Vec::new();
    let mut images = std::collections::BTreeMap::new();
    for p in &people {
        for l in &layers {
            let tgt = apply_layer(l, &p.image, &p.landmarks, topo).unwrap();
            let tgt_path = format!("{}__{}", p.id, l.layer_id);
            images.insert(tgt_path.clone(), tgt);
            applied.push(AppliedRecord {
                identity_id: p.id.clone(),
                layer_id: l.layer_id.clone(),
                src_path: p.id.clone(),
                tgt_path,
            });
        }
    }
    let triplets = build_triplets(&applied, 3).unwrap();
    assert_eq!(triplets.len(), 12);
    for t in &triplets {
        let src = people.iter().find(|p| p.id == t.src_path).unwrap();
        let layer = layers.iter().find(|l| l.layer_id == t.layer_id).unwrap();
        let tgt = &images[&t.tgt_path];
        assert_ne!(t.identity_id, t.ref_identity_id);
        assert!(t.ref_path.ends_with(&t.layer_id) && t.ref_path.starts_with(&t.ref_identity_id));
        let (_, alpha) = warp_layer(layer, &src.landmarks, topo, SIZE, SIZE).unwrap();
        let mut n_changed = 0;
        for i in 0..SIZE * SIZE {
            let a = alpha.data()[i];
            let c = changed(tgt, &src.image, i);
            assert!(!c || a > 0.0, "{}: pixel {i} changed outside support", t.tgt_path);
            assert!(c || a < 0.05, "{}: pixel {i} alpha {a} unchanged", t.tgt_path);
            n_changed += c as usize;
        }
        assert!(n_changed > 100);
    }
}

fn smooth(w: usize, h: usize) -> ImageBuf {
    let mut img = ImageBuf::zeros(w, h, 3, ColorSpace::Srgb);
    for y in 0..h {
        for x in 0..w {
            let (u, v) = (x as f32 / w as f32, y as f32 / h as f32);
            img.pixel_mut(x, y).copy_from_slice(&[0.5 + 0.4 * (3.0 * u).sin() * (2.0 * v).cos(), u, v * v]);
        }
    }
    img
}

#[test]
fn warp_there_and_back_is_close() {
    let topo = canonical_topology();
    let a = standard_face(SIZE).landmarks;
    for id in identities(4, 21) {
        let b = id.landmarks();
        let img = smooth(2 * SIZE, 2 * SIZE).with_alpha(&ImageBuf::filled(2 * SIZE, 2 * SIZE, ColorSpace::Alpha, &[1.0])).unwrap();
        let there = warp_image(&img, &build_warp(&a, &b, topo, false).unwrap());
        let back = warp_image(&there, &build_warp(&b, &a, topo, false).unwrap());
        let (mut sum, mut n) = (0.0f64, 0usize);
        for i in 0..back.len_pixels() {
            // Interior: fully covered after both passes.
            if back.px(i)[3] < 1.0 {
                continue;
            }
            for k in 0..3 {
                sum += (back.px(i)[k] - img.px(i)[k]).abs() as f64;
            }
            n += 3;
        }
        let mae = sum / n as f64;
        assert!(n > 3 * SIZE * SIZE, "{n}");
        assert!(mae < 0.02, "{}: {mae}", id.id);
    }
}
