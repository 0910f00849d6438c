//! Fixtures and independent oracles shared by integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use perspectra::corpus::{
    CaseRecord, CaseType, CorpusRecord, CorpusStore, Dimension, PerceptionScore, Provenance, SentenceRecord,
};
use perspectra::pairs::{OverlapStatus, PerspectivePair};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn case(case_id: &str) -> CaseRecord {
    CaseRecord {
        case_id: case_id.into(),
        case_type: CaseType::Femicide,
        victim_name: String::new(),
        perpetrator_name: String::new(),
        relationship: String::new(),
        weapon: String::new(),
        location_town: String::new(),
        location_place: String::new(),
        date: None,
    }
}

/// Store with one gold blame score per `(sentence, case, raw value)`.
pub fn store(spec: &[(String, String, f64)]) -> CorpusStore {
    let cases: BTreeSet<&str> = spec.iter().map(|s| s.1.as_str()).collect();
    let mut records: Vec<CorpusRecord> = cases.into_iter().map(|c| CorpusRecord::Case(case(c))).collect();
    for (sid, case_id, v) in spec {
        records.push(CorpusRecord::Sentence(SentenceRecord {
            sentence_id: sid.clone(),
            case_id: case_id.clone(),
            article_id: "art".into(),
            text: format!("frase {sid}"),
            language: "it".into(),
        }));
        records.push(CorpusRecord::Score(PerceptionScore {
            sentence_id: sid.clone(),
            dimension: Dimension::BlameMurderer,
            value: *v,
            provenance: Provenance::Gold,
        }));
    }
    CorpusStore::from_records(records).unwrap()
}

/// Random fixture with small integer scores (so mean comparisons are exact).
pub fn random_fixture(rng: &mut ChaCha8Rng, max_sentences: usize, max_cases: usize) -> Vec<(String, String, f64)> {
    loop {
        let n = rng.random_range(2..=max_sentences);
        let cases = rng.random_range(1..=max_cases);
        let spec: Vec<_> = (0..n)
            .map(|i| {
                (
                    format!("s{i:02}"),
                    format!("c{}", rng.random_range(0..cases)),
                    rng.random_range(0..8) as f64,
                )
            })
            .collect();
        let first = spec[0].2;
        if spec.iter().any(|s| s.2 != first) {
            return spec;
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// All ordered sentence pairs in the same case with the first below the mean
/// and the second at or above it.
pub fn brute_force_pairs(spec: &[(String, String, f64)]) -> BTreeSet<(String, String)> {
    let mean = spec.iter().map(|s| s.2).sum::<f64>() / spec.len() as f64;
    let mut out = BTreeSet::new();
    for a in spec {
        for b in spec {
            if a.0 != b.0 && a.1 == b.1 && a.2 < mean && b.2 >= mean {
                out.insert((a.0.clone(), b.0.clone()));
            }
        }
    }
    out
}

/// Maximum matching size by exhaustive search over edge subsets (small inputs only).
pub fn exhaustive_matching(edges: &[(String, String)]) -> usize {
    fn go(edges: &[(String, String)], i: usize, used: &mut Vec<String>) -> usize {
        if i == edges.len() {
            return 0;
        }
        let skip = go(edges, i + 1, used);
        let (a, b) = &edges[i];
        if used.contains(a) || used.contains(b) {
            return skip;
        }
        used.push(a.clone());
        used.push(b.clone());
        let take = 1 + go(edges, i + 1, used);
        used.truncate(used.len() - 2);
        skip.max(take)
    }
    go(edges, 0, &mut Vec::new())
}

/// Maximum bipartite matching via augmenting paths (left = low ids).
pub fn bipartite_matching(edges: &[(String, String)]) -> usize {
    let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (a, b) in edges {
        adj.entry(a).or_default().push(b);
    }
    let mut owner: BTreeMap<&str, &str> = BTreeMap::new();
    fn augment<'a>(
        u: &'a str,
        adj: &BTreeMap<&'a str, Vec<&'a str>>,
        seen: &mut BTreeSet<&'a str>,
        owner: &mut BTreeMap<&'a str, &'a str>,
    ) -> bool {
        for &v in &adj[u] {
            if !seen.insert(v) {
                continue;
            }
            let current = owner.get(v).copied();
            if current.is_none_or(|w| augment(w, adj, seen, owner)) {
                owner.insert(v, u);
                return true;
            }
        }
        false
    }
    let lefts: Vec<&str> = adj.keys().copied().collect();
    lefts
        .into_iter()
        .filter(|u| augment(u, &adj, &mut BTreeSet::new(), &mut owner))
        .count()
}

pub fn pair(low: &str, high: &str, case_id: &str, gap: f64) -> PerspectivePair {
    PerspectivePair {
        low_sentence: low.into(),
        high_sentence: high.into(),
        case_id: case_id.into(),
        overlap_status: OverlapStatus::Unreviewed,
        reviewer: None,
        gap,
    }
}

/// Random bipartite pair set over `left` low and `right` high sentences.
pub fn random_pairs(rng: &mut ChaCha8Rng, count: usize, left: usize, right: usize) -> Vec<PerspectivePair> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    while out.len() < count.min(left * right) {
        let (l, h) = (rng.random_range(0..left), rng.random_range(0..right));
        if seen.insert((l, h)) {
            out.push(pair(&format!("l{l}"), &format!("h{h}"), "c", rng.random_range(0..5) as f64 * 0.5));
        }
    }
    out
}

/// True when no pair can be added to `kept` from `all` without reusing a sentence.
pub fn is_maximal(all: &[PerspectivePair], kept: &[PerspectivePair]) -> bool {
    let used: BTreeSet<&str> = kept
        .iter()
        .flat_map(|p| [p.low_sentence.as_str(), p.high_sentence.as_str()])
        .collect();
    all.iter()
        .all(|p| used.contains(p.low_sentence.as_str()) || used.contains(p.high_sentence.as_str()))
}

pub fn reuses_sentence(pairs: &[PerspectivePair]) -> bool {
    let mut seen = BTreeSet::new();
    pairs
        .iter()
        .any(|p| !seen.insert(p.low_sentence.clone()) || !seen.insert(p.high_sentence.clone()))
}

/// Ranks by counting: 1 + #smaller + (#equal - 1) / 2.
pub fn counting_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let less = v.iter().filter(|&&y| y < x).count() as f64;
            let equal = v.iter().filter(|&&y| y == x).count() as f64;
            1.0 + less + (equal - 1.0) / 2.0
        })
        .collect()
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Spearman rho and the exact two-sided permutation p-value, by listing every
/// arrangement of the second sample's ranks recursively.
pub fn permutation_spearman(a: &[f64], b: &[f64]) -> (f64, f64) {
    fn arrangements(items: &[f64]) -> Vec<Vec<f64>> {
        if items.len() <= 1 {
            return vec![items.to_vec()];
        }
        let mut out = Vec::new();
        for i in 0..items.len() {
            let mut rest = items.to_vec();
            let head = rest.remove(i);
            for mut tail in arrangements(&rest) {
                tail.insert(0, head);
                out.push(tail);
            }
        }
        out
    }
    let (ra, rb) = (counting_ranks(a), counting_ranks(b));
    let rho = pearson(&ra, &rb);
    let all = arrangements(&rb);
    let hits = all
        .iter()
        .filter(|p| pearson(&ra, p).abs() >= rho.abs() - 1e-12)
        .count();
    (rho, hits as f64 / all.len() as f64)
}

/// LCS length by testing every subsequence of the shorter sequence.
pub fn brute_force_lcs(a: &[&str], b: &[&str]) -> usize {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let is_subsequence = |sub: &[&str]| {
        let mut it = long.iter();
        sub.iter().all(|s| it.any(|l| l == s))
    };
    (0u32..1 << short.len())
        .filter_map(|mask| {
            let sub: Vec<&str> = (0..short.len()).filter(|i| mask & (1 << i) != 0).map(|i| short[i]).collect();
            is_subsequence(&sub).then_some(sub.len())
        })
        .max()
        .unwrap_or(0)
}

pub fn rouge_l_oracle(candidate: &str, reference: &str) -> f64 {
    let c: Vec<&str> = candidate.split_whitespace().collect();
    let r: Vec<&str> = reference.split_whitespace().collect();
    let l = brute_force_lcs(&c, &r) as f64;
    if l == 0.0 {
        return 0.0;
    }
    let (p, rec) = (l / c.len() as f64, l / r.len() as f64);
    2.0 * p * rec / (p + rec)
}
