use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cxf, l2m, minmax_normalize, BenchError};
use crate::imgcore::{load_png, ImageBuf};
use crate::rewards::{
    cosine_similarity, EmbedKind, EmbedRequest, EmbeddingProvider, DEFAULT_FACE_MODEL, DEFAULT_IMAGE_MODEL,
};
use crate::verifier::FaceRegionMask;

/// One evaluated pair. Paths are relative to the run root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunItem {
    pub source: String,
    pub reference: String,
    pub generated: String,
    /// Label PNG of the source face parse.
    pub mask: String,
    pub label_map: String,
}

/// A method's outputs over a set of pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Resolved against the manifest's directory when relative.
    #[serde(default)]
    pub root: PathBuf,
    pub method: String,
    pub items: Vec<RunItem>,
}

impl RunManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, BenchError> {
        let path = path.as_ref();
        let mut m: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if m.root.is_relative() {
            let dir = path.parent().unwrap_or(Path::new(""));
            m.root = dir.join(&m.root);
        }
        Ok(m)
    }

    fn resolve(&self, p: &str) -> PathBuf {
        self.root.join(p)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunModels {
    pub image_model: String,
    pub face_model: String,
}

impl Default for RunModels {
    fn default() -> Self {
        Self {
            image_model: DEFAULT_IMAGE_MODEL.into(),
            face_model: DEFAULT_FACE_MODEL.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub index: usize,
    pub source: String,
    pub reference: String,
    pub generated: String,
    pub status: RowStatus,
    pub l2m: Option<f64>,
    pub clip_i: Option<f64>,
    pub face_sim: Option<f64>,
    pub cxf: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricMeans {
    pub l2m: f64,
    pub clip_i: f64,
    pub face_sim: f64,
    pub cxf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub rows: Vec<EvalRow>,
    /// Over successful rows only; `None` when every row failed.
    pub means: Option<MetricMeans>,
    pub evaluated: usize,
    pub failed: usize,
}

struct Metrics {
    l2m: f64,
    clip_i: f64,
    face_sim: f64,
}

fn load(path: &Path) -> Result<ImageBuf, BenchError> {
    load_png(path).map_err(|e| BenchError::InvalidManifest(format!("{}: {e}", path.display())))
}

fn row_metrics(
    run: &RunManifest,
    item: &RunItem,
    provider: &dyn EmbeddingProvider,
    models: &RunModels,
) -> Result<Metrics, BenchError> {
    let (sp, rp, gp) = (run.resolve(&item.source), run.resolve(&item.reference), run.resolve(&item.generated));
    let src = load(&sp)?;
    let reference = load(&rp)?;
    let gen = load(&gp)?;
    let mask = FaceRegionMask::load(run.resolve(&item.mask), run.resolve(&item.label_map))?;
    let embed = |kind, tag: &str, img: &ImageBuf, key: &Path| provider.embed(&EmbedRequest::new(kind, tag, img).with_key(key));
    let gi = embed(EmbedKind::Image, &models.image_model, &gen, &gp)?;
    let ri = embed(EmbedKind::Image, &models.image_model, &reference, &rp)?;
    let gf = embed(EmbedKind::Face, &models.face_model, &gen, &gp)?;
    let sf = embed(EmbedKind::Face, &models.face_model, &src, &sp)?;
    Ok(Metrics {
        l2m: l2m(&gen, &src, &mask)?,
        clip_i: cosine_similarity(&gi, &ri)?,
        face_sim: cosine_similarity(&gf, &sf)?,
    })
}

/// Scores every item of a run. Items whose artifacts are missing or
/// unreadable are reported as failed and left out of the means.
pub fn evaluate_run(run: &RunManifest, provider: &dyn EmbeddingProvider, models: &RunModels) -> MethodReport {
    let rows: Vec<EvalRow> = run
        .items
        .par_iter()
        .enumerate()
        .map(|(index, item)| {
            let mut row = EvalRow {
                index,
                source: item.source.clone(),
                reference: item.reference.clone(),
                generated: item.generated.clone(),
                status: RowStatus::Ok,
                l2m: None,
                clip_i: None,
                face_sim: None,
                cxf: None,
            };
            match row_metrics(run, item, provider, models) {
                Ok(m) => {
                    row.l2m = Some(m.l2m);
                    row.clip_i = Some(m.clip_i);
                    row.face_sim = Some(m.face_sim);
                    row.cxf = Some(cxf(m.clip_i, m.face_sim));
                }
                Err(e) => row.status = RowStatus::Failed(e.to_string()),
            }
            row
        })
        .collect();
    MethodReport::from_rows(run.method.clone(), rows)
}

impl MethodReport {
    pub fn from_rows(method: String, rows: Vec<EvalRow>) -> Self {
        let ok: Vec<&EvalRow> = rows.iter().filter(|r| r.status == RowStatus::Ok).collect();
        let n = ok.len();
        let mean = |f: fn(&EvalRow) -> Option<f64>| ok.iter().filter_map(|r| f(r)).sum::<f64>() / n as f64;
        let means = (n > 0).then(|| MetricMeans {
            l2m: mean(|r| r.l2m),
            clip_i: mean(|r| r.clip_i),
            face_sim: mean(|r| r.face_sim),
            cxf: mean(|r| r.cxf),
        });
        Self {
            method,
            failed: rows.len() - n,
            evaluated: n,
            rows,
            means,
        }
    }

    /// One line per row; failed rows carry the reason and empty metrics.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), BenchError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "index", "source", "reference", "generated", "status", "reason", "l2m", "clip_i", "face_sim", "cxf",
        ])?;
        let fmt = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
        for r in &self.rows {
            let (status, reason) = match &r.status {
                RowStatus::Ok => ("ok", ""),
                RowStatus::Failed(why) => ("failed", why.as_str()),
            };
            out.write_record([
                r.index.to_string().as_str(),
                &r.source,
                &r.reference,
                &r.generated,
                status,
                reason,
                &fmt(r.l2m),
                &fmt(r.clip_i),
                &fmt(r.face_sim),
                &fmt(r.cxf),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn csv_string(&self) -> Result<String, BenchError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    /// Method, counts and means without the per-row detail.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "method": self.method,
            "evaluated": self.evaluated,
            "failed": self.failed,
            "means": self.means,
        })
    }
}

/// Scatter plot of min-max normalized mean reference similarity (x) against
/// identity similarity (y), one labelled point per method.
pub fn scatter_svg(reports: &[MethodReport]) -> Result<String, BenchError> {
    let scored: Vec<(&str, MetricMeans)> = reports
        .iter()
        .filter_map(|r| r.means.map(|m| (r.method.as_str(), m)))
        .collect();
    let xs: BTreeMap<String, f64> = scored.iter().map(|(k, m)| (k.to_string(), m.clip_i)).collect();
    let ys: BTreeMap<String, f64> = scored.iter().map(|(k, m)| (k.to_string(), m.face_sim)).collect();
    let (nx, ny) = (minmax_normalize(&xs)?, minmax_normalize(&ys)?);
    const W: f64 = 400.0;
    const PAD: f64 = 40.0;
    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{w}\" viewBox=\"0 0 {w} {w}\">\n",
        w = W + 2.0 * PAD
    ));
    s.push_str(&format!(
        "<rect x=\"{PAD}\" y=\"{PAD}\" width=\"{W}\" height=\"{W}\" fill=\"none\" stroke=\"#888\"/>\n"
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\">CLIP-I (normalized)</text>\n",
        PAD + W / 2.0,
        W + 1.7 * PAD
    ));
    s.push_str(&format!(
        "<text x=\"12\" y=\"{}\" font-size=\"12\" transform=\"rotate(-90 12 {})\" text-anchor=\"middle\">Face Sim (normalized)</text>\n",
        PAD + W / 2.0,
        PAD + W / 2.0
    ));
    for (name, x) in &nx {
        let y = ny[name];
        let (cx, cy) = (PAD + x * W, PAD + (1.0 - y) * W);
        s.push_str(&format!("<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"5\" fill=\"#c0392b\"/>\n"));
        s.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\">{}</text>\n",
            cx + 7.0,
            cy - 7.0,
            xml_escape(name)
        ));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
