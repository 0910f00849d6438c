//! Survey definitions: blocks of blinded candidates built from system outputs.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use perspectra::corpus::CorpusStore;
use perspectra::eval::SCALE_MAX;
use perspectra::pairs::PerspectivePair;
use perspectra::rng::substream;
use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::SurveyError;

pub const DEFAULT_BLOCKS: usize = 50;
pub const DEFAULT_CANDIDATES: usize = 7;
/// System id under which gold targets enter a block.
pub const GOLD_SYSTEM: &str = "gold";

/// Server-side candidate: carries the system key that raters never see.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub candidate_id: String,
    pub system_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyBlock {
    pub block_id: String,
    pub source_id: String,
    pub source_text: String,
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyDefinition {
    pub seed: u64,
    pub n_candidates: usize,
    pub blocks: Vec<SurveyBlock>,
}

/// One source sentence with its gold target, if any.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurveySource {
    pub source_id: String,
    pub source_text: String,
    pub gold: Option<String>,
}

/// Sources from mined pairs: one per low sentence, gold target from its first pair.
pub fn sources_from_pairs(pairs: &[PerspectivePair], store: &CorpusStore) -> Vec<SurveySource> {
    let mut out: BTreeMap<&str, SurveySource> = BTreeMap::new();
    for p in pairs {
        let (Some(low), Some(high)) = (store.sentence(&p.low_sentence), store.sentence(&p.high_sentence)) else {
            continue;
        };
        out.entry(p.low_sentence.as_str()).or_insert_with(|| SurveySource {
            source_id: p.low_sentence.clone(),
            source_text: low.text.clone(),
            gold: Some(high.text.clone()),
        });
    }
    out.into_values().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildOptions {
    pub n_blocks: usize,
    pub n_candidates: usize,
    pub seed: u64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            n_blocks: DEFAULT_BLOCKS,
            n_candidates: DEFAULT_CANDIDATES,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedSource {
    pub source_id: String,
    pub available: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildReport {
    pub definition: SurveyDefinition,
    pub skipped: Vec<SkippedSource>,
}

/// Assemble a survey. `outputs` maps system id to (source id to output text).
///
/// Sources with fewer than `n_candidates` candidates are skipped with a warning.
/// When more sources qualify than `n_blocks`, a seeded sample is kept in source order;
/// when a source has more candidates than needed, a seeded subset is kept.
pub fn build_survey(
    outputs: &BTreeMap<String, BTreeMap<String, String>>,
    sources: &[SurveySource],
    options: BuildOptions,
) -> Result<BuildReport, SurveyError> {
    if options.n_candidates == 0 || options.n_blocks == 0 {
        return Err(SurveyError::InvalidOptions("n_blocks and n_candidates must be positive".into()));
    }
    if outputs.contains_key(GOLD_SYSTEM) {
        return Err(SurveyError::InvalidOptions(format!("system id `{GOLD_SYSTEM}` is reserved")));
    }
    let mut eligible = Vec::new();
    let mut skipped = Vec::new();
    let mut seen = BTreeSet::new();
    for src in sources {
        if !seen.insert(src.source_id.as_str()) {
            return Err(SurveyError::InvalidOptions(format!("duplicate source `{}`", src.source_id)));
        }
        let mut pool: Vec<(&str, &str)> = Vec::new();
        if let Some(gold) = &src.gold {
            pool.push((GOLD_SYSTEM, gold));
        }
        for (system, texts) in outputs {
            if let Some(text) = texts.get(&src.source_id) {
                pool.push((system, text));
            }
        }
        if pool.len() < options.n_candidates {
            log::warn!(
                "source `{}` skipped: {} candidate(s) available, {} needed",
                src.source_id,
                pool.len(),
                options.n_candidates
            );
            skipped.push(SkippedSource {
                source_id: src.source_id.clone(),
                available: pool.len(),
            });
            continue;
        }
        eligible.push((src, pool));
    }
    if eligible.is_empty() {
        return Err(SurveyError::NoEligibleSources);
    }
    if eligible.len() > options.n_blocks {
        let mut rng = substream(options.seed, "survey/blocks");
        let keep: BTreeSet<usize> = index::sample(&mut rng, eligible.len(), options.n_blocks).into_iter().collect();
        eligible = eligible
            .into_iter()
            .enumerate()
            .filter(|(i, _)| keep.contains(i))
            .map(|(_, e)| e)
            .collect();
    }

    let mut ids = BTreeSet::new();
    let mut blocks = Vec::with_capacity(eligible.len());
    for (b, (src, pool)) in eligible.into_iter().enumerate() {
        let block_id = format!("block-{:03}", b + 1);
        let chosen: Vec<(&str, &str)> = if pool.len() > options.n_candidates {
            let mut rng = substream(options.seed, &format!("survey/candidates/{}", src.source_id));
            let mut keep = index::sample(&mut rng, pool.len(), options.n_candidates).into_vec();
            keep.sort_unstable();
            keep.into_iter().map(|k| pool[k]).collect()
        } else {
            pool
        };
        let candidates = chosen
            .into_iter()
            .enumerate()
            .map(|(slot, (system, text))| {
                let candidate_id = blinded_id(options.seed, &block_id, system, slot);
                if !ids.insert(candidate_id.clone()) {
                    return Err(SurveyError::InvalidOptions(format!("candidate id collision `{candidate_id}`")));
                }
                Ok(Candidate {
                    candidate_id,
                    system_id: system.to_string(),
                    text: text.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        blocks.push(SurveyBlock {
            block_id,
            source_id: src.source_id.clone(),
            source_text: src.source_text.clone(),
            candidates,
        });
    }
    Ok(BuildReport {
        definition: SurveyDefinition {
            seed: options.seed,
            n_candidates: options.n_candidates,
            blocks,
        },
        skipped,
    })
}

/// Opaque id: a digest of the seed, block, system and slot, so the system cannot be read off it.
fn blinded_id(seed: u64, block_id: &str, system: &str, slot: usize) -> String {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for part in [block_id, system] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    h.update((slot as u64).to_le_bytes());
    let digest = h.finalize();
    format!("c{}", &hex::encode(digest)[..16])
}

/// Rater-facing candidate. Has no system field by construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateView {
    pub candidate_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleView {
    pub name: String,
    pub min: u8,
    pub max: u8,
    pub question: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockView {
    pub index: usize,
    pub total: usize,
    pub block_id: String,
    pub source_text: String,
    pub candidates: Vec<CandidateView>,
    pub scales: Vec<ScaleView>,
}

pub fn scales() -> Vec<ScaleView> {
    vec![
        ScaleView {
            name: "blame".into(),
            min: 0,
            max: SCALE_MAX,
            question: "How much responsibility does the sentence place on the perpetrator?".into(),
        },
        ScaleView {
            name: "similarity".into(),
            min: 0,
            max: SCALE_MAX,
            question: "How well does the sentence preserve the content of the source?".into(),
        },
    ]
}

impl SurveyDefinition {
    pub fn load(path: &Path) -> Result<Self, SurveyError> {
        let text = std::fs::read(path).map_err(|e| SurveyError::io(path, e))?;
        let def: Self = serde_json::from_slice(&text).map_err(|e| SurveyError::Format(format!("{}: {e}", path.display())))?;
        def.validate()?;
        Ok(def)
    }

    pub fn save(&self, path: &Path) -> Result<(), SurveyError> {
        let bytes = serde_json::to_vec_pretty(self).map_err(|e| SurveyError::Format(e.to_string()))?;
        perspectra::io::write_atomic(path, &bytes).map_err(|e| SurveyError::io(path, e))
    }

    /// Block and candidate ids must be unique across the survey.
    pub fn validate(&self) -> Result<(), SurveyError> {
        let mut blocks = BTreeSet::new();
        let mut cands = BTreeSet::new();
        for b in &self.blocks {
            if !blocks.insert(&b.block_id) {
                return Err(SurveyError::Format(format!("duplicate block id `{}`", b.block_id)));
            }
            for c in &b.candidates {
                if !cands.insert(&c.candidate_id) {
                    return Err(SurveyError::Format(format!("duplicate candidate id `{}`", c.candidate_id)));
                }
            }
        }
        Ok(())
    }

    /// The server-side key used to attribute ratings to systems.
    pub fn candidate_systems(&self) -> BTreeMap<String, String> {
        self.blocks
            .iter()
            .flat_map(|b| b.candidates.iter())
            .map(|c| (c.candidate_id.clone(), c.system_id.clone()))
            .collect()
    }

    pub fn block(&self, block_id: &str) -> Option<&SurveyBlock> {
        self.blocks.iter().find(|b| b.block_id == block_id)
    }

    /// Block `index` as shown to `rater`; candidate order depends only on (seed, rater, block).
    pub fn view(&self, index: usize, rater: &str) -> Option<BlockView> {
        let block = self.blocks.get(index)?;
        let mut candidates: Vec<CandidateView> = block
            .candidates
            .iter()
            .map(|c| CandidateView {
                candidate_id: c.candidate_id.clone(),
                text: c.text.clone(),
            })
            .collect();
        let mut rng = substream(self.seed, &format!("survey/order/{rater}/{}", block.block_id));
        candidates.shuffle(&mut rng);
        Some(BlockView {
            index,
            total: self.blocks.len(),
            block_id: block.block_id.clone(),
            source_text: block.source_text.clone(),
            candidates,
            scales: scales(),
        })
    }
}
