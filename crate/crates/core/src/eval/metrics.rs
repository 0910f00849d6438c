use std::collections::HashMap;

use unicode_segmentation::UnicodeSegmentation;

pub const TOKENIZATION: &str = "lowercase + unicode word segmentation";

pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase().unicode_words().map(str::to_owned).collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Sentence BLEU-4 with clipped counts over all references and add-one
/// smoothing on the 2- to 4-gram precisions.
pub fn bleu(candidate: &str, references: &[&str]) -> f64 {
    let cand = tokenize(candidate);
    if cand.is_empty() {
        log::warn!("bleu: empty candidate scores 0");
        return 0.0;
    }
    let refs: Vec<Vec<String>> = references.iter().map(|r| tokenize(r)).filter(|r| !r.is_empty()).collect();
    if refs.is_empty() {
        log::warn!("bleu: no non-empty reference, scoring 0");
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=4 {
        let counts = ngram_counts(&cand, n);
        let ref_counts: Vec<_> = refs.iter().map(|r| ngram_counts(r, n)).collect();
        let total: usize = counts.values().sum();
        let matched: usize = counts
            .iter()
            .map(|(g, &c)| {
                let max_ref = ref_counts.iter().map(|rc| rc.get(g).copied().unwrap_or(0)).max().unwrap_or(0);
                c.min(max_ref)
            })
            .sum();
        let p = if n == 1 {
            if matched == 0 {
                return 0.0;
            }
            matched as f64 / total as f64
        } else {
            (matched as f64 + 1.0) / (total as f64 + 1.0)
        };
        log_sum += p.ln();
    }
    let c = cand.len();
    // closest reference length, shorter wins ties
    let r = refs
        .iter()
        .map(Vec::len)
        .min_by_key(|&len| (len.abs_diff(c), len))
        .expect("non-empty");
    let bp = if c >= r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    bp * (log_sum / 4.0).exp()
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F1, best over references.
pub fn rouge(candidate: &str, references: &[&str]) -> f64 {
    let cand = tokenize(candidate);
    if cand.is_empty() {
        log::warn!("rouge: empty candidate scores 0");
        return 0.0;
    }
    references
        .iter()
        .map(|r| {
            let r = tokenize(r);
            let l = lcs_len(&cand, &r) as f64;
            if l == 0.0 {
                return 0.0;
            }
            let (p, rec) = (l / cand.len() as f64, l / r.len() as f64);
            2.0 * p * rec / (p + rec)
        })
        .fold(0.0, f64::max)
}
