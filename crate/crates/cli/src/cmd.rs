use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use beautykit::bench::{evaluate_run, make_pairs, scatter_svg, BenchManifest, ManifestStats, RunManifest, RunModels};
use beautykit::flowlab::{
    dirac_velocity, fit_field, gaussian_data, gaussian_optimal_slope, sample_ode, sample_sde_batch, Moments,
    NoiseSchedule,
};
use beautykit::geom::{canonical_topology, LandmarkSet, MeshTopology};
use beautykit::imgcore::{encode_png, load_png, save_label_png, BitDepth, ImageBuf};
use beautykit::layers::{
    apply_layer as apply, build_triplets, compose_standard_makeup, extract_layer as extract, load_component_library,
    write_triplets, AppliedRecord, ComponentSidecar, MakeupLayer,
};
use beautykit::rewards::{aggregate_reward, grpo_advantages, score_group, FaceBundle, VerifierSetup};
use beautykit::synth;
use beautykit::verifier::{makeup_exclusive_layer, FaceRegionMask, LabelMapFile, Template};
use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::out::{with_temp, write_bytes, write_json};

fn load_image(path: &Path) -> Result<ImageBuf, CliError> {
    load_png(path).map_err(|e| CliError::new("image", format!("{}: {e}", path.display())))
}

fn load_landmarks(path: &Path) -> Result<LandmarkSet, CliError> {
    LandmarkSet::load(path).map_err(|e| CliError::new("geometry", format!("{}: {e}", path.display())))
}

fn topology(path: &Option<PathBuf>) -> Result<MeshTopology, CliError> {
    match path {
        Some(p) => Ok(MeshTopology::load(p)?),
        None => Ok(canonical_topology().clone()),
    }
}

fn print_json(value: &impl Serialize) -> Result<(), CliError> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn emit_json(out: &Option<PathBuf>, value: &impl Serialize) -> Result<(), CliError> {
    match out {
        Some(p) => write_json(p, value),
        None => print_json(value),
    }
}

fn write_png(path: &Path, img: &ImageBuf) -> Result<(), CliError> {
    write_bytes(path, &encode_png(img, BitDepth::Sixteen)?)
}

fn write_layer(path: &Path, layer: &MakeupLayer) -> Result<(), CliError> {
    write_bytes(path, &layer.to_bytes())
}

fn relative_to(base: &Path, p: &str) -> PathBuf {
    base.join(p)
}

fn parent_of(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

// compose-layer -----------------------------------------------------------

#[derive(Debug, Args)]
pub struct ComposeLayer {
    /// Directory of component PNGs with JSON sidecars.
    #[arg(long)]
    library: PathBuf,
    #[arg(long)]
    std_image: PathBuf,
    #[arg(long)]
    std_landmarks: PathBuf,
    #[arg(long)]
    topology: Option<PathBuf>,
    #[arg(long)]
    out_layer: PathBuf,
    /// Also write the made-up standard face.
    #[arg(long)]
    out_image: Option<PathBuf>,
}

pub fn compose_layer(cfg: &RunConfig, a: ComposeLayer) -> Result<(), CliError> {
    let lms = load_landmarks(&a.std_landmarks)?;
    let std_img = load_image(&a.std_image)?;
    let topo = topology(&a.topology)?;
    let lib = load_component_library(&a.library, &lms)?;
    if lib.is_empty() {
        return Err(CliError::new("layer", format!("{}: no components", a.library.display())));
    }
    let (made, layer) = compose_standard_makeup(&lib, &std_img, &lms, &topo, cfg.seed)?;
    write_layer(&a.out_layer, &layer)?;
    if let Some(p) = &a.out_image {
        write_png(p, &made)?;
    }
    print_json(&serde_json::json!({ "layer_id": layer.layer_id, "out_layer": a.out_layer }))
}

// extract-layer -----------------------------------------------------------

#[derive(Debug, Args)]
pub struct ExtractLayer {
    #[arg(long)]
    made_up: PathBuf,
    #[arg(long)]
    bare: PathBuf,
    #[arg(long)]
    std_landmarks: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn coverage(layer: &MakeupLayer) -> f64 {
    let a = layer.alpha.data();
    a.iter().filter(|v| **v > 0.0).count() as f64 / a.len().max(1) as f64
}

pub fn extract_layer(_cfg: &RunConfig, a: ExtractLayer) -> Result<(), CliError> {
    let lms = load_landmarks(&a.std_landmarks)?;
    let layer = extract(&load_image(&a.made_up)?, &load_image(&a.bare)?, &lms)?;
    write_layer(&a.out, &layer)?;
    print_json(&serde_json::json!({ "out": a.out, "coverage": coverage(&layer) }))
}

// apply-layer -------------------------------------------------------------

#[derive(Debug, Args)]
pub struct ApplyLayer {
    #[arg(long)]
    layer: PathBuf,
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    landmarks: PathBuf,
    #[arg(long)]
    topology: Option<PathBuf>,
    /// Defaults to `<image stem>.<layer stem>.png` next to the image.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn apply_layer(_cfg: &RunConfig, a: ApplyLayer) -> Result<(), CliError> {
    let layer = MakeupLayer::load(&a.layer)?;
    let img = load_image(&a.image)?;
    let lms = load_landmarks(&a.landmarks)?;
    let result = apply(&layer, &img, &lms, &topology(&a.topology)?)?;
    let out = a.out.unwrap_or_else(|| {
        let stem = a.image.file_stem().unwrap_or_default().to_string_lossy();
        a.image.with_file_name(format!("{stem}.{}.png", layer.layer_id))
    });
    write_png(&out, &result)?;
    print_json(&serde_json::json!({ "out": out, "layer_id": layer.layer_id }))
}

// make-triplets -----------------------------------------------------------

/// One row of a portrait manifest. Paths are relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortraitEntry {
    pub identity_id: String,
    pub image: String,
    pub landmarks: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_map: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortraitManifest {
    pub portraits: Vec<PortraitEntry>,
}

#[derive(Debug, Args)]
pub struct MakeTriplets {
    #[arg(long)]
    library: PathBuf,
    #[arg(long)]
    std_image: PathBuf,
    #[arg(long)]
    std_landmarks: PathBuf,
    /// Portrait manifest JSON.
    #[arg(long)]
    portraits: PathBuf,
    /// Number of distinct layers to compose.
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long)]
    topology: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
}

fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

pub fn make_triplets(cfg: &RunConfig, a: MakeTriplets) -> Result<(), CliError> {
    if a.layers == 0 {
        return Err(CliError::usage("--layers must be at least 1"));
    }
    let lms = load_landmarks(&a.std_landmarks)?;
    let std_img = load_image(&a.std_image)?;
    let topo = topology(&a.topology)?;
    let lib = load_component_library(&a.library, &lms)?;
    if lib.is_empty() {
        return Err(CliError::new("layer", format!("{}: no components", a.library.display())));
    }
    let manifest: PortraitManifest = serde_json::from_str(&std::fs::read_to_string(&a.portraits)?)?;
    let base = parent_of(&a.portraits);
    let ids: BTreeSet<&str> = manifest.portraits.iter().map(|p| p.identity_id.as_str()).collect();
    if ids.len() != manifest.portraits.len() {
        return Err(CliError::new("layer", "portrait manifest repeats an identity"));
    }

    let mut layers: Vec<MakeupLayer> = Vec::new();
    let mut k = 0u64;
    while layers.len() < a.layers {
        if k >= 50 * a.layers as u64 {
            return Err(CliError::new(
                "layer",
                format!("library yields only {} distinct layers", layers.len()),
            ));
        }
        let (_, layer) = compose_standard_makeup(&lib, &std_img, &lms, &topo, cfg.seed.wrapping_add(k))?;
        k += 1;
        if !layers.iter().any(|l| l.layer_id == layer.layer_id) {
            layers.push(layer);
        }
    }
    for layer in &layers {
        write_layer(&a.out_dir.join("layers").join(format!("{}.mkup", file_safe(&layer.layer_id))), layer)?;
    }

    let portraits: Vec<(&PortraitEntry, ImageBuf, LandmarkSet)> = manifest
        .portraits
        .iter()
        .map(|p| {
            Ok((
                p,
                load_image(&relative_to(&base, &p.image))?,
                load_landmarks(&relative_to(&base, &p.landmarks))?,
            ))
        })
        .collect::<Result<_, CliError>>()?;
    for (p, img, _) in &portraits {
        write_png(&a.out_dir.join("sources").join(format!("{}.png", file_safe(&p.identity_id))), img)?;
    }

    let jobs: Vec<(usize, usize)> = (0..portraits.len())
        .flat_map(|i| (0..layers.len()).map(move |j| (i, j)))
        .collect();
    let applied: Vec<AppliedRecord> = jobs
        .par_iter()
        .map(|&(i, j)| {
            let (p, img, plms) = &portraits[i];
            let layer = &layers[j];
            let result = apply(layer, img, plms, &topo)?;
            let id = file_safe(&p.identity_id);
            let tgt = format!("applied/{id}__{}.png", file_safe(&layer.layer_id));
            write_png(&a.out_dir.join(&tgt), &result)?;
            Ok(AppliedRecord {
                identity_id: p.identity_id.clone(),
                layer_id: layer.layer_id.clone(),
                src_path: format!("sources/{id}.png"),
                tgt_path: tgt,
            })
        })
        .collect::<Result<_, CliError>>()?;
    let triplets = build_triplets(&applied, cfg.seed)?;
    let mut buf = Vec::new();
    write_triplets(&triplets, &mut buf)?;
    write_bytes(&a.out_dir.join("triplets.jsonl"), &buf)?;
    print_json(&serde_json::json!({
        "layers": layers.iter().map(|l| &l.layer_id).collect::<Vec<_>>(),
        "portraits": portraits.len(),
        "triplets": triplets.len(),
    }))
}

// verify ------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct Verify {
    #[arg(long)]
    image: PathBuf,
    /// Label PNG of the face parse.
    #[arg(long)]
    mask: PathBuf,
    /// Label-map JSON; defaults to the mask path with a `.json` extension.
    #[arg(long)]
    label_map: Option<PathBuf>,
    #[arg(long)]
    landmarks: PathBuf,
    #[arg(long)]
    topology: Option<PathBuf>,
    /// 16-bit RGBA layer in the template frame.
    #[arg(long)]
    out: PathBuf,
    /// Baseline and parameters; defaults to the output path with `.json`.
    #[arg(long)]
    meta: Option<PathBuf>,
}

pub fn verify(cfg: &RunConfig, a: Verify) -> Result<(), CliError> {
    let img = load_image(&a.image)?;
    let label_map = a.label_map.unwrap_or_else(|| a.mask.with_extension("json"));
    let mask = FaceRegionMask::load(&a.mask, &label_map)?;
    let lms = load_landmarks(&a.landmarks)?;
    let template = Template::canonical(cfg.template_size);
    let layer = makeup_exclusive_layer(&img, &mask, &lms, &template, &topology(&a.topology)?, &cfg.opacity)?;
    write_png(&a.out, &layer.rgba)?;
    let meta = layer.metadata_json();
    write_bytes(&a.meta.unwrap_or_else(|| a.out.with_extension("json")), meta.as_bytes())?;
    println!("{meta}");
    Ok(())
}

// reward ------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BundlePaths {
    pub image: String,
    pub mask: String,
    pub label_map: String,
    pub landmarks: String,
}

/// A reference, its source portrait and a group of generated samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupFile {
    pub source: String,
    pub reference: BundlePaths,
    pub generated: Vec<BundlePaths>,
}

fn load_bundle(base: &Path, b: &BundlePaths) -> Result<FaceBundle, CliError> {
    Ok(FaceBundle {
        image: load_image(&base.join(&b.image))?,
        mask: FaceRegionMask::load(base.join(&b.mask), base.join(&b.label_map))?,
        landmarks: load_landmarks(&base.join(&b.landmarks))?,
    })
}

#[derive(Debug, Args)]
pub struct Reward {
    /// Group JSON with `source`, `reference` and `generated` entries.
    #[arg(long)]
    group: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn reward(cfg: &RunConfig, a: Reward) -> Result<(), CliError> {
    let provider = cfg.embedding_provider()?;
    let group: GroupFile = serde_json::from_str(&std::fs::read_to_string(&a.group)?)?;
    let base = parent_of(&a.group);
    let src = load_image(&base.join(&group.source))?;
    let reference = load_bundle(&base, &group.reference)?;
    let generated: Vec<FaceBundle> = group
        .generated
        .iter()
        .map(|b| load_bundle(&base, b))
        .collect::<Result<_, _>>()?;
    let setup = VerifierSetup {
        template: Template::canonical(cfg.template_size),
        params: cfg.opacity,
        layer_model: cfg.layer_model.clone(),
        ..VerifierSetup::default()
    };
    let vectors = score_group(&src, &reference, &generated, &setup, provider.as_ref(), &cfg.face_model)?;
    let totals: Vec<f64> = vectors.iter().map(aggregate_reward).collect();
    let advantages = if totals.len() >= 2 {
        Some(grpo_advantages(&totals)?)
    } else {
        None
    };
    let rows: Vec<_> = vectors
        .iter()
        .zip(&totals)
        .map(|(v, t)| {
            serde_json::json!({
                "r_makeup": v.r_makeup, "r_face": v.r_face, "r_ir": v.r_ir, "total": t,
            })
        })
        .collect();
    emit_json(&a.out, &serde_json::json!({ "rewards": rows, "advantages": advantages }))
}

// advantages --------------------------------------------------------------

#[derive(Debug, Args)]
pub struct Advantages {
    /// Comma-separated rewards of one group.
    #[arg(long, allow_hyphen_values = true)]
    rewards: String,
}

/// Four decimals without trailing zeros; negative zero prints as `0`.
fn short(v: f64) -> String {
    let s = format!("{:.4}", v);
    let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.') } else { &s };
    if s == "-0" { "0".into() } else { s.to_string() }
}

pub fn advantages(_cfg: &RunConfig, a: Advantages) -> Result<(), CliError> {
    let rewards: Vec<f64> = a
        .rewards
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| CliError::usage(format!("bad reward '{s}': {e}"))))
        .collect::<Result<_, _>>()?;
    let adv = grpo_advantages(&rewards)?;
    println!("{}", adv.iter().map(|v| short(*v)).collect::<Vec<_>>().join(","));
    Ok(())
}

// evaluate ----------------------------------------------------------------

#[derive(Debug, Args)]
pub struct Evaluate {
    /// Run manifest JSON; repeat for several methods.
    #[arg(long, required = true)]
    run: Vec<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Also write `scatter.svg` of normalized method means.
    #[arg(long)]
    scatter: bool,
}

pub fn evaluate(cfg: &RunConfig, a: Evaluate) -> Result<(), CliError> {
    let provider = cfg.embedding_provider()?;
    let models = RunModels {
        image_model: cfg.image_model.clone(),
        face_model: cfg.face_model.clone(),
    };
    let runs: Vec<RunManifest> = a.run.iter().map(RunManifest::load).collect::<Result<_, _>>()?;
    let names: BTreeSet<String> = runs.iter().map(|r| file_safe(&r.method)).collect();
    if names.len() != runs.len() {
        return Err(CliError::usage("method names must be distinct"));
    }
    let mut reports = Vec::new();
    let mut summaries = Vec::new();
    for run in &runs {
        let rep = evaluate_run(run, provider.as_ref(), &models);
        let name = file_safe(&rep.method);
        write_bytes(&a.out_dir.join(format!("{name}.csv")), rep.csv_string()?.as_bytes())?;
        let summary = rep.summary_json();
        write_json(&a.out_dir.join(format!("{name}.summary.json")), &summary)?;
        summaries.push(summary);
        reports.push(rep);
    }
    if a.scatter {
        write_bytes(&a.out_dir.join("scatter.svg"), scatter_svg(&reports)?.as_bytes())?;
    }
    print_json(&summaries)
}

// bench-stats / pairs -----------------------------------------------------

#[derive(Debug, Args)]
pub struct BenchStats {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn bench_stats(_cfg: &RunConfig, a: BenchStats) -> Result<(), CliError> {
    let m = BenchManifest::load(&a.manifest)?;
    emit_json(&a.out, &ManifestStats::of(&m)?)
}

#[derive(Debug, Args)]
pub struct Pairs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn pairs(cfg: &RunConfig, a: Pairs) -> Result<(), CliError> {
    let m = BenchManifest::load(&a.manifest)?;
    let rows: Vec<_> = make_pairs(&m, a.n, cfg.seed)?
        .iter()
        .map(|p| {
            serde_json::json!({
                "source": m.sources[p.source].path,
                "reference": m.references[p.reference].path,
            })
        })
        .collect();
    emit_json(&a.out, &rows)
}

// flow-demo ---------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScheduleKind {
    Zero,
    Constant,
    Sqrt,
    FlowGrpo,
}

#[derive(Debug, Args)]
pub struct FlowDemo {
    /// Comma-separated data point the flow collapses onto.
    #[arg(long, default_value = "0.5,-1", allow_hyphen_values = true)]
    target: String,
    #[arg(long, default_value_t = 2000)]
    trajectories: usize,
    #[arg(long, default_value_t = 200)]
    steps: usize,
    #[arg(long, value_enum, default_value_t = ScheduleKind::FlowGrpo)]
    schedule: ScheduleKind,
    /// Noise level of the schedule.
    #[arg(long, default_value_t = 0.7)]
    a: f64,
    /// Fit an affine field to standard-normal data for this many iterations.
    #[arg(long, default_value_t = 0)]
    fit_iters: usize,
    #[arg(long, default_value_t = 10)]
    bins: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn flow_demo(cfg: &RunConfig, a: FlowDemo) -> Result<(), CliError> {
    let c: Vec<f64> = a
        .target
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| CliError::usage(format!("bad target '{s}': {e}"))))
        .collect::<Result<_, _>>()?;
    let schedule = match a.schedule {
        ScheduleKind::Zero => NoiseSchedule::Zero,
        ScheduleKind::Constant => NoiseSchedule::Constant(a.a),
        ScheduleKind::Sqrt => NoiseSchedule::Sqrt(a.a),
        ScheduleKind::FlowGrpo => NoiseSchedule::FlowGrpo(a.a),
    };
    let field = dirac_velocity(c.clone());
    let samples = sample_sde_batch(&field, c.len(), a.trajectories, a.steps, &schedule, cfg.seed, None)?;
    let m = Moments::of(&samples)?;
    let ode = sample_ode(&field, &vec![1.0; c.len()], a.steps, None)?;
    let fit = if a.fit_iters > 0 {
        let data = gaussian_data(10_000, 1, cfg.seed);
        let rep = fit_field(&data, a.bins, a.fit_iters, 1e-2, cfg.seed)?;
        let rows: Vec<_> = (0..a.bins)
            .map(|k| {
                let t = rep.field.bin_center(k);
                serde_json::json!({
                    "t": t,
                    "slope": rep.field.slope(k)[0],
                    "intercept": rep.field.intercept(k)[0],
                    "optimal_slope": gaussian_optimal_slope(t),
                })
            })
            .collect();
        Some(rows)
    } else {
        None
    };
    emit_json(
        &a.out,
        &serde_json::json!({
            "target": c,
            "schedule": schedule,
            "steps": a.steps,
            "trajectories": m.count,
            "mean": m.mean,
            "var": m.var,
            "std_error": m.std_error(),
            "ode_from_ones": ode,
            "fit": fit,
        }),
    )
}

// synth-fixtures ----------------------------------------------------------

#[derive(Debug, Args)]
pub struct SynthFixtures {
    #[arg(long)]
    out_dir: PathBuf,
    /// Image side in pixels.
    #[arg(long, default_value_t = 256)]
    size: usize,
    #[arg(long, default_value_t = 3)]
    identities: usize,
}

fn write_mask(png: &Path, json: &Path, mask: &FaceRegionMask) -> Result<(), CliError> {
    with_temp(png, |t| save_label_png(mask.width(), mask.height(), mask.labels(), t))?;
    let map = LabelMapFile {
        face_label_set: mask.face_labels().clone(),
        names: [("face".to_string(), 1)].into(),
    };
    write_json(json, &map)
}

pub fn synth_fixtures(cfg: &RunConfig, a: SynthFixtures) -> Result<(), CliError> {
    if a.size < 32 {
        return Err(CliError::usage("--size must be at least 32"));
    }
    let d = &a.out_dir;
    for c in synth::component_library(a.size) {
        write_png(&d.join("library").join(format!("{}.png", c.name)), &c.rgba)?;
        let sidecar = ComponentSidecar {
            category: c.category,
            anchors: None,
            anchor_points: None,
        };
        write_json(&d.join("library").join(format!("{}.json", c.name)), &sidecar)?;
    }
    let std = synth::standard_face(a.size);
    write_png(&d.join("standard.png"), &std.image)?;
    write_bytes(&d.join("standard.landmarks.json"), std.landmarks.to_json().as_bytes())?;

    let mut portraits = Vec::new();
    for id in synth::identities(a.identities, cfg.seed) {
        let p = synth::render_portrait(&id, a.size);
        let stem = format!("portraits/{}", p.id);
        write_png(&d.join(format!("{stem}.png")), &p.image)?;
        write_bytes(&d.join(format!("{stem}.landmarks.json")), p.landmarks.to_json().as_bytes())?;
        write_mask(&d.join(format!("{stem}_mask.png")), &d.join(format!("{stem}_mask.json")), &p.mask)?;
        portraits.push(PortraitEntry {
            identity_id: p.id.clone(),
            image: format!("{stem}.png"),
            landmarks: format!("{stem}.landmarks.json"),
            mask: Some(format!("{stem}_mask.png")),
            label_map: Some(format!("{stem}_mask.json")),
        });
    }
    let count = portraits.len();
    write_json(&d.join("portraits.json"), &PortraitManifest { portraits })?;
    write_bytes(&d.join("bench_manifest.json"), synth::bench_manifest().to_json().as_bytes())?;
    print_json(&serde_json::json!({ "out_dir": d, "portraits": count }))
}
