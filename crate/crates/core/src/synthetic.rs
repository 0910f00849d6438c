//! Marker-token synthetic corpus.
//!
//! Stands in for the licensed news corpus in tests, the demo and the
//! acceptance suite. Every sentence follows the slot layout
//! `Town , S V O prep place`; low-blame sentences fill S/V/O with agentless
//! vocabulary, high-blame ones with perpetrator-centred vocabulary. Raw
//! perception values are a deterministic sum of per-token weights, so the
//! true mapping is known exactly.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::{
    z_normalize, CaseRecord, CaseType, CorpusRecord, CorpusStore, Dimension, PerceptionScore,
    Provenance, SentenceRecord,
};
use crate::rng::substream;

/// (token, blame, human_cause, focus) weights.
type Marker = (&'static str, f64, f64, f64);

pub const LOW_SUBJECTS: &[Marker] = &[
    ("donna", -0.5, -0.2, -0.8),
    ("ragazza", -0.6, -0.3, -0.9),
    ("madre", -0.4, -0.2, -0.7),
    ("giovane", -0.7, -0.3, -1.0),
    ("pensionata", -0.5, -0.2, -0.8),
];
pub const LOW_VERBS: &[Marker] = &[
    ("trovata", -1.0, -1.1, -0.4),
    ("morta", -1.2, -1.3, -0.5),
    ("deceduta", -0.9, -1.2, -0.3),
    ("ferita", -0.7, -0.6, -0.3),
    ("scomparsa", -1.1, -1.0, -0.4),
];
pub const LOW_OBJECTS: &[Marker] = &[
    ("esanime", -0.4, -0.3, -0.2),
    ("sola", -0.3, -0.2, -0.3),
    ("improvvisamente", -0.5, -0.6, -0.1),
    ("tragicamente", -0.6, -0.5, -0.2),
];
pub const HIGH_SUBJECTS: &[Marker] = &[
    ("marito", 1.0, 0.5, 1.2),
    ("compagno", 0.9, 0.4, 1.1),
    ("fidanzato", 0.8, 0.4, 1.0),
    ("killer", 1.3, 0.7, 1.4),
    ("assassino", 1.2, 0.7, 1.3),
];
pub const HIGH_VERBS: &[Marker] = &[
    ("uccide", 1.2, 1.3, 0.5),
    ("accoltella", 1.3, 1.2, 0.6),
    ("strangola", 1.1, 1.2, 0.5),
    ("massacra", 1.4, 1.3, 0.7),
    ("ammazza", 1.0, 1.1, 0.4),
];
pub const HIGH_OBJECTS: &[Marker] = &[
    ("moglie", 0.4, 0.2, 0.3),
    ("compagna", 0.3, 0.2, 0.2),
    ("fidanzata", 0.3, 0.1, 0.2),
    ("convivente", 0.5, 0.3, 0.3),
];

const TOWNS: &[&str] = &[
    "Trapani", "Brescia", "Albenga", "Nubio", "Latina", "Rimini", "Lecce", "Cosenza", "Varese",
    "Padova", "Sassari", "Perugia",
];
const PLACES: &[(&str, &str)] = &[
    ("in", "casa"),
    ("in", "strada"),
    ("al", "parco"),
    ("sul", "lavoro"),
    ("in", "auto"),
];
const FIRST_NAMES_F: &[&str] = &["Anna", "Giulia", "Simona", "Loredana", "Chiara", "Elena", "Marta", "Sara"];
const FIRST_NAMES_M: &[&str] = &["Antonino", "Elio", "Marco", "Luca", "Paolo", "Giorgio", "Franco", "Dario"];
const SURNAMES: &[&str] = &[
    "Manuguerra", "Madone", "Cadei", "Simonini", "Colucci", "Ferri", "Bruno", "Greco", "Riva",
    "Conti", "Gallo", "Marino", "Costa", "Fontana", "Serra", "Villa",
];
const RELATIONSHIPS: &[&str] = &["ex coniuge", "coniuge", "convivente", "fidanzato", "ex fidanzato"];
const WEAPONS: &[&str] = &["arma da taglio", "arma da fuoco", "corpo contundente", "strangolamento", ""];

/// Raw (un-normalized) perception values of `text`: sum of marker weights,
/// in [`Dimension::NAMED`] order.
pub fn marker_values(text: &str) -> [f64; 3] {
    let mut out = [0.0; 3];
    for token in text.split_whitespace() {
        let token = token.to_lowercase();
        for table in [LOW_SUBJECTS, LOW_VERBS, LOW_OBJECTS, HIGH_SUBJECTS, HIGH_VERBS, HIGH_OBJECTS] {
            if let Some(&(_, b, c, f)) = table.iter().find(|m| m.0 == token) {
                out[0] += b;
                out[1] += c;
                out[2] += f;
            }
        }
    }
    out
}

/// Raw blame value; see [`marker_values`].
pub fn marker_blame(text: &str) -> f64 {
    marker_values(text)[0]
}

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub cases: usize,
    /// Inclusive range of low (and, separately, high) sentences per case.
    pub per_case: (usize, usize),
    /// Share of sentences with gold annotations; the rest get silver.
    pub gold_fraction: f64,
    /// Standard deviation of the noise added to silver raw values.
    pub silver_noise: f64,
    /// Probability that a high sentence names the perpetrator in subject position.
    pub named_subject_rate: f64,
    /// Probability that a metadata field is left unknown.
    pub missing_meta_rate: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            cases: 40,
            per_case: (2, 3),
            gold_fraction: 0.6,
            silver_noise: 0.15,
            named_subject_rate: 0.25,
            missing_meta_rate: 0.0,
        }
    }
}

/// Generated corpus plus the style label each sentence was drawn with.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub store: CorpusStore,
    /// sentence_id -> true when generated from the high-blame vocabulary.
    pub high_style: BTreeMap<String, bool>,
}

impl SyntheticCorpus {
    pub fn generate(config: &SyntheticConfig) -> Self {
        let mut rng = substream(config.seed, "synthetic-corpus");
        let normal = Normal::new(0.0, config.silver_noise.max(0.0)).expect("valid sigma");
        let mut cases = Vec::new();
        let mut sentences = Vec::new();
        let mut high_style = BTreeMap::new();
        let mut raw: Vec<(String, [f64; 3], Provenance)> = Vec::new();

        for c in 0..config.cases {
            let case_id = format!("case-{c:03}");
            let meta = |v: String, rng: &mut rand_chacha::ChaCha8Rng| {
                if rng.random_bool(config.missing_meta_rate) {
                    String::new()
                } else {
                    v
                }
            };
            let perp_surname = *SURNAMES.choose(&mut rng).unwrap();
            let victim = format!(
                "{} {}",
                FIRST_NAMES_F.choose(&mut rng).unwrap(),
                SURNAMES.choose(&mut rng).unwrap()
            );
            let perp = format!("{} {}", FIRST_NAMES_M.choose(&mut rng).unwrap(), perp_surname);
            let town = *TOWNS.choose(&mut rng).unwrap();
            let place = *PLACES.choose(&mut rng).unwrap();
            let record = CaseRecord {
                case_id: case_id.clone(),
                case_type: if c % 5 == 4 { CaseType::OtherGbv } else { CaseType::Femicide },
                victim_name: meta(victim, &mut rng),
                perpetrator_name: meta(perp, &mut rng),
                relationship: meta(RELATIONSHIPS.choose(&mut rng).unwrap().to_string(), &mut rng),
                weapon: meta(WEAPONS.choose(&mut rng).unwrap().to_string(), &mut rng),
                location_town: meta(town.to_owned(), &mut rng),
                location_place: meta(place.1.to_owned(), &mut rng),
                date: Some(format!("2016-{:02}-{:02}", c % 12 + 1, c % 28 + 1)),
            };
            cases.push(record);

            let mut k = 0;
            for high in [false, true] {
                let count = rng.random_range(config.per_case.0..=config.per_case.1);
                for _ in 0..count {
                    let (s, v, o) = if high {
                        let s = if rng.random_bool(config.named_subject_rate) {
                            perp_surname
                        } else {
                            HIGH_SUBJECTS.choose(&mut rng).unwrap().0
                        };
                        (s, HIGH_VERBS.choose(&mut rng).unwrap().0, HIGH_OBJECTS.choose(&mut rng).unwrap().0)
                    } else {
                        (
                            LOW_SUBJECTS.choose(&mut rng).unwrap().0,
                            LOW_VERBS.choose(&mut rng).unwrap().0,
                            LOW_OBJECTS.choose(&mut rng).unwrap().0,
                        )
                    };
                    let (prep, p) = if rng.random_bool(0.7) {
                        place
                    } else {
                        *PLACES.choose(&mut rng).unwrap()
                    };
                    let text = format!("{town} , {s} {v} {o} {prep} {p}");
                    let sentence_id = format!("{case_id}-s{k}");
                    let provenance = if rng.random_bool(config.gold_fraction) {
                        Provenance::Gold
                    } else {
                        Provenance::Silver
                    };
                    let mut values = marker_values(&text);
                    if provenance == Provenance::Silver {
                        for v in &mut values {
                            *v += normal.sample(&mut rng);
                        }
                    }
                    raw.push((sentence_id.clone(), values, provenance));
                    high_style.insert(sentence_id.clone(), high);
                    sentences.push(SentenceRecord {
                        sentence_id,
                        case_id: case_id.clone(),
                        article_id: format!("art-{c:03}-{}", k / 2),
                        text,
                        language: "it".into(),
                    });
                    k += 1;
                }
            }
        }

        let mut scores = Vec::new();
        for (d, dimension) in Dimension::NAMED.iter().enumerate() {
            let column: Vec<f64> = raw.iter().map(|r| r.1[d]).collect();
            let z = z_normalize(&column).expect("synthetic values vary");
            for ((sid, _, prov), value) in raw.iter().zip(z) {
                scores.push(PerceptionScore {
                    sentence_id: sid.clone(),
                    dimension: dimension.clone(),
                    value,
                    provenance: *prov,
                });
            }
        }

        let records = cases
            .into_iter()
            .map(CorpusRecord::Case)
            .chain(sentences.into_iter().map(CorpusRecord::Sentence))
            .chain(scores.into_iter().map(CorpusRecord::Score));
        let store = CorpusStore::from_records(records).expect("synthetic corpus is consistent");
        Self { store, high_style }
    }
}
