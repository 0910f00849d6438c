//! Acceptance suite: one line per criterion, then a single verdict.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::*;
use perspectra::corpus::{CaseRecord, CaseType, Dimension, SentenceRecord};
use perspectra::eval::{bleu, harmonic_mean, rouge, spearman};
use perspectra::pairs::{dedupe_unique, mine_pairs};
use perspectra::pipeline::{run_demo, DemoConfig};
use perspectra::prompt::{
    build_prompt, replay_journal, CurationSession, ExamplePair, Journal, PromptSpec, Rewriter, StubBackend,
};
use perspectra::synthetic::{SyntheticConfig, SyntheticCorpus};
use perspectra::transfer::{
    render_conditioned_input, train_unsupervised, ConditioningOrder, MonoCorpora, Seq2Seq, ToyConfig, ToySeq2Seq,
    TrainConfig, Variant, Vocab, DEFAULT_SEPARATOR,
};

type Check = fn() -> Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// (perspective, similarity, published HM, tight tolerance applies)
const HUMAN_TABLE: [(&str, f64, f64, f64, bool); 9] = [
    ("base", 2.14, 7.72, 3.34, false),
    ("src-meta", 2.50, 6.78, 3.65, false),
    ("meta-src", 4.50, 3.62, 4.01, true),
    ("na-zero", 2.77, 6.52, 3.89, true),
    ("na-few", 2.08, 8.17, 3.31, true),
    ("iter-1", 3.57, 7.97, 4.98, false),
    ("iter-2", 3.84, 6.60, 4.85, true),
    ("examples iter-1", 5.20, 6.93, 5.94, true),
    ("examples iter-2", 3.87, 5.27, 4.46, true),
];

fn harmonic_mean_reproduction() -> Result<(), String> {
    for (row, p, s, published, tight) in HUMAN_TABLE {
        let hm = harmonic_mean(p, s).map_err(|e| e.to_string())?;
        // independent oracle
        let oracle = 2.0 * p * s / (p + s);
        ensure((hm - oracle).abs() < 1e-12, || format!("{row}: {hm} vs oracle {oracle}"))?;
        ensure((hm - published).abs() <= 0.06, || format!("{row}: {hm:.3} vs {published}"))?;
        if tight {
            ensure((hm - published).abs() <= 0.01, || format!("{row}: {hm:.3} vs {published} (tight)"))?;
        }
    }
    Ok(())
}

fn pair_mining_oracle() -> Result<(), String> {
    let mut r = rng(2024);
    for i in 0..20 {
        let spec = random_fixture(&mut r, 30, 5);
        ensure(spec.len() <= 30, || format!("fixture {i} too large"))?;
        let cases: BTreeSet<&str> = spec.iter().map(|s| s.1.as_str()).collect();
        ensure(cases.len() <= 5, || format!("fixture {i} has {} cases", cases.len()))?;
        let mined = mine_pairs(&store(&spec), &Dimension::BlameMurderer).map_err(|e| e.to_string())?;
        let keys: BTreeSet<_> = mined.iter().map(|p| (p.low_sentence.clone(), p.high_sentence.clone())).collect();
        ensure(keys.len() == mined.len(), || format!("fixture {i}: duplicate pairs"))?;
        ensure(keys == brute_force_pairs(&spec), || format!("fixture {i}: differs from brute force"))?;
        ensure(!reuses_sentence(&dedupe_unique(&mined)), || format!("fixture {i}: dedupe reuses a sentence"))?;
    }
    Ok(())
}

fn metric_oracles() -> Result<(), String> {
    let close = |a: f64, b: f64| (a - b).abs() < 1e-6;
    let s = "la donna è stata uccisa dal marito";
    ensure(close(bleu(s, &[s]), 1.0), || "BLEU identity".into())?;
    ensure(close(rouge(s, &[s]), 1.0), || "ROUGE identity".into())?;
    ensure(close(bleu("a b c d", &["w x y z"]), 0.0), || "BLEU disjoint".into())?;
    ensure(close(rouge("a b c d", &["w x y z"]), 0.0), || "ROUGE disjoint".into())?;
    let expected = (0.5f64 * 0.5 * (1.0 / 3.0) * 0.5).powf(0.25);
    let got = bleu("the the the cat", &["the cat sat down"]);
    ensure(close(got, expected), || format!("BLEU clipped: {got} vs {expected}"))?;
    let got = rouge("the the the cat", &["the cat sat down"]);
    let want = rouge_l_oracle("the the the cat", "the cat sat down");
    ensure(close(got, want), || format!("ROUGE clipped: {got} vs {want}"))?;

    let samples: [([f64; 8], [f64; 8]); 3] = [
        ([1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0], [2.0, 1.0, 4.0, 3.0, 6.0, 5.0, 8.0, 7.0]),
        ([3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0], [2.0, 7.0, 1.0, 8.0, 2.0, 8.0, 1.0, 8.0]),
        ([0.3, -1.2, 2.5, 0.0, 1.1, -0.4, 0.9, 1.7], [5.0, 1.0, 3.0, 6.0, 2.0, 7.0, 4.0, 0.0]),
    ];
    for (a, b) in samples {
        let (rho, p) = permutation_spearman(&a, &b);
        let got = spearman(&a, &b).map_err(|e| e.to_string())?;
        ensure((got.rho - rho).abs() < 1e-9, || format!("rho {} vs {rho}", got.rho))?;
        ensure((got.p_value - p).abs() < 1e-9, || format!("p {} vs {p}", got.p_value))?;
    }
    Ok(())
}

fn freeze_invariant() -> Result<(), String> {
    let corpus = SyntheticCorpus::generate(&SyntheticConfig::default());
    let mono = MonoCorpora::from_store(&corpus.store, &Dimension::BlameMurderer, 5).map_err(|e| e.to_string())?;
    let mut init = ToySeq2Seq::<f32>::new(
        Vocab::build(mono.vocabulary_texts()),
        ToyConfig { embed_dim: 12, hidden_dim: 24, ..Default::default() },
    );
    let texts: Vec<String> = mono.low.iter().chain(&mono.high).map(|s| s.text.clone()).collect();
    init.pretrain_denoising(&texts, 2, 0.15, 5e-3, 1).map_err(|e| e.to_string())?;
    let config = TrainConfig {
        bt_iterations: 2,
        epochs_per_round: 2,
        max_learning_rate: 5e-3,
        warmup_steps: 5,
        ..TrainConfig::default()
    };
    let trained = train_unsupervised(&mono, &init, &config, Variant::MetaSrc, None).map_err(|e| e.to_string())?;
    ensure(trained.stats.len() == 2, || format!("{} rounds", trained.stats.len()))?;
    let frozen = init.frozen_fingerprint();
    for s in &trained.stats {
        ensure(s.frozen_fingerprint_lh == frozen && s.frozen_fingerprint_hl == frozen, || {
            format!("round {}: frozen parameters moved", s.round)
        })?;
    }
    let decoders: BTreeSet<_> = trained.stats.iter().map(|s| s.decoder_fingerprint_lh.clone()).collect();
    ensure(decoders.len() == 2, || "decoder fingerprint did not change between rounds".into())?;
    ensure(trained.lh.seq2seq.trainable_fingerprint() != init.trainable_fingerprint(), || {
        "trainable parameters unchanged".into()
    })?;

    // closed form: linear warmup, then linear decay to zero
    let schedule = TrainConfig::default().schedule(1000);
    let (max, w, t) = (1e-4, 100u64, schedule.total_steps);
    ensure(schedule.max_lr == max && schedule.warmup_steps == w, || format!("{schedule:?}"))?;
    let oracle = |s: u64| -> f64 {
        if s <= w {
            max * s as f64 / w as f64
        } else if s >= t {
            0.0
        } else {
            max * (t - s) as f64 / (t - w) as f64
        }
    };
    ensure(schedule.lr::<f64>(0) == 0.0, || "lr at step 0".into())?;
    ensure((schedule.lr::<f64>(100) - 1e-4).abs() < 1e-12, || "lr at step 100".into())?;
    for step in 0..=t + 10 {
        let got = schedule.lr::<f64>(step);
        ensure((got - oracle(step)).abs() < 1e-12, || format!("step {step}: {got} vs {}", oracle(step)))?;
    }
    Ok(())
}

fn synthetic_transfer() -> Result<(), String> {
    let config = DemoConfig { prompt_systems: false, ..DemoConfig::default() };
    ensure(config.train.bt_iterations >= 3, || format!("{} rounds", config.train.bt_iterations))?;
    let outcome = run_demo(&config).map_err(|e| e.to_string())?;
    let r2 = outcome
        .suite
        .r_squared
        .iter()
        .find(|(d, _)| *d == Dimension::BlameMurderer)
        .and_then(|(_, r)| *r)
        .ok_or("no held-out R² for blame")?;
    ensure(r2 >= 0.9, || format!("held-out R² {r2:.3}"))?;
    for (variant, stats) in &outcome.round_stats {
        ensure(stats.len() >= 3, || format!("{variant}: {} rounds", stats.len()))?;
    }
    ensure(!outcome.system_blame.is_empty(), || "no systems evaluated".into())?;
    for (system, blame) in &outcome.system_blame {
        let gain = blame - outcome.source_blame;
        ensure(gain >= 0.5, || format!("{system}: gain {gain:.3} z"))?;
        ensure(outcome.source_blame < *blame, || format!("{system} not above source"))?;
    }
    Ok(())
}

fn prompt_byte_exactness() -> Result<(), String> {
    let zero = build_prompt(&PromptSpec::naive_zero(), "Frase X.").map_err(|e| e.to_string())?;
    ensure(zero == "Riscrivi la frase concentrandoti sul colpevole\nFrase X.", || format!("{zero:?}"))?;
    let few = PromptSpec::naive_few(vec![ExamplePair { low: "L1".into(), high: "H1".into() }]);
    let rendered = build_prompt(&few, "Frase X.").map_err(|e| e.to_string())?;
    let expected = "Riscrivi le seguenti frasi da low ad high. Per high si intende che la colpa è attribuita \
                    interamente al killer. Ecco alcuni esempi:\nLow: L1\nHigh: H1\nRiscrivi la seguente frase:\n\
                    Low: Frase X.\nHigh:";
    ensure(rendered == expected, || format!("{rendered:?}"))?;

    let backend = StubBackend::default();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let journal = Journal::new(dir.path().join("llm.jsonl"));
    let rewriter = Rewriter::new(&backend).with_journal(&journal);
    let gold = vec![
        ExamplePair { low: "Donna trovata morta".into(), high: "Il marito uccide la moglie".into() },
        ExamplePair { low: "Tragedia in casa".into(), high: "L'ex compagno la accoltella".into() },
    ];
    let sources: Vec<String> = (1..=5).map(|i| format!("Frase sorgente {i}.")).collect();
    let mut session = CurationSession::start("acc", gold, sources.clone(), &rewriter).map_err(|e| e.to_string())?;
    session.curate(&rewriter, 3).map_err(|e| e.to_string())?;
    for item in 0..5 {
        ensure(session.emit("v").is_err(), || format!("emitted with {item}/5 selected"))?;
        session.select(item, item % 3).map_err(|e| e.to_string())?;
    }
    ensure(session.select(0, 3).is_err(), || "selected a non-candidate".into())?;
    let spec = session.emit("v").map_err(|e| e.to_string())?;
    ensure(spec.examples.len() == 5, || format!("{} examples", spec.examples.len()))?;

    let outputs: Vec<String> = rewriter
        .rewrite_all(&spec, &sources)
        .into_iter()
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let mismatches = replay_journal(&journal, &backend).map_err(|e| e.to_string())?;
    ensure(mismatches.is_empty(), || format!("{} replay mismatches", mismatches.len()))?;
    let entries = journal.entries().map_err(|e| e.to_string())?;
    let logged: BTreeSet<&str> = entries.iter().map(|e| e.output.as_str()).collect();
    ensure(outputs.iter().all(|o| logged.contains(o.as_str())), || "rewrite missing from journal".into())?;
    Ok(())
}

fn metadata_conditioning() -> Result<(), String> {
    let case = CaseRecord {
        case_id: "c1".into(),
        case_type: CaseType::Femicide,
        victim_name: "Anna Manuguerra".into(),
        perpetrator_name: "Antonino Madone".into(),
        relationship: "ex coniuge".into(),
        weapon: "arma da taglio".into(),
        location_town: "Nubio".into(),
        location_place: "casa".into(),
        date: None,
    };
    let sentence = SentenceRecord {
        sentence_id: "s1".into(),
        case_id: "c1".into(),
        article_id: "a1".into(),
        text: "Trapani, Donna di 60 anni uccisa dall'ex marito".into(),
        language: "it".into(),
    };
    let render = |order| render_conditioned_input(&sentence, &case, order, DEFAULT_SEPARATOR).map_err(|e| e.to_string());
    let got = render(ConditioningOrder::SourceMeta)?;
    let want = "Trapani, Donna di 60 anni uccisa dall'ex marito --- Anna Manuguerra, Antonino Madone, ex coniuge, \
                arma da taglio, Nubio, casa";
    ensure(got == want, || format!("{got:?}"))?;
    let plain = render(ConditioningOrder::Plain)?;
    ensure(plain == sentence.text, || format!("{plain:?}"))?;
    Ok(())
}

#[test]
fn acceptance() {
    let criteria: [(&str, Check, Duration); 7] = [
        ("harmonic-mean reproduction", harmonic_mean_reproduction, Duration::from_secs(1)),
        ("pair-mining oracle equivalence", pair_mining_oracle, Duration::from_secs(5)),
        ("metric oracles", metric_oracles, Duration::from_secs(60)),
        ("freeze invariant and lr schedule", freeze_invariant, Duration::from_secs(120)),
        ("synthetic transfer improvement", synthetic_transfer, Duration::from_secs(600)),
        ("prompt byte-exactness", prompt_byte_exactness, Duration::from_secs(60)),
        ("metadata conditioning", metadata_conditioning, Duration::from_secs(60)),
    ];
    let mut failed = Vec::new();
    println!();
    for (name, check, budget) in criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let result = result.and_then(|()| {
            ensure(elapsed <= budget, || format!("took {elapsed:?}, budget {budget:?}"))
        });
        match &result {
            Ok(()) => println!("PASS  {name}  ({:.2}s)", elapsed.as_secs_f64()),
            Err(why) => {
                println!("FAIL  {name}  ({:.2}s): {why}", elapsed.as_secs_f64());
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
