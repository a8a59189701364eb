use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::LayerError;

/// One portrait with one layer applied.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppliedRecord {
    pub identity_id: String,
    pub layer_id: String,
    pub src_path: String,
    pub tgt_path: String,
}

/// `⟨source, reference, target⟩`: target shares identity with source and
/// makeup with reference.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TripletRecord {
    pub src_path: String,
    pub ref_path: String,
    pub tgt_path: String,
    pub identity_id: String,
    pub ref_identity_id: String,
    pub layer_id: String,
}

/// Every ordered pair of distinct identities sharing a layer yields one
/// triplet; `m` layers over `k` identities give `m·k·(k−1)`. The output is
/// shuffled by `seed`.
pub fn build_triplets(applied: &[AppliedRecord], seed: u64) -> Result<Vec<TripletRecord>, LayerError> {
    let mut by_layer: BTreeMap<&str, Vec<&AppliedRecord>> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for rec in applied {
        if !seen.insert((rec.identity_id.as_str(), rec.layer_id.as_str())) {
            return Err(LayerError::DuplicateApplication {
                identity: rec.identity_id.clone(),
                layer: rec.layer_id.clone(),
            });
        }
        by_layer.entry(&rec.layer_id).or_default().push(rec);
    }
    let mut out = Vec::new();
    for (layer, recs) in by_layer {
        for a in &recs {
            for b in &recs {
                if a.identity_id == b.identity_id {
                    continue;
                }
                out.push(TripletRecord {
                    src_path: a.src_path.clone(),
                    ref_path: b.tgt_path.clone(),
                    tgt_path: a.tgt_path.clone(),
                    identity_id: a.identity_id.clone(),
                    ref_identity_id: b.identity_id.clone(),
                    layer_id: layer.to_string(),
                });
            }
        }
    }
    out.sort();
    out.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(out)
}

pub fn write_triplets<W: Write>(triplets: &[TripletRecord], mut w: W) -> std::io::Result<()> {
    for t in triplets {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_triplets<R: BufRead>(r: R) -> Result<Vec<TripletRecord>, LayerError> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}
