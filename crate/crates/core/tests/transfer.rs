use perspectra::corpus::Dimension;
use perspectra::synthetic::{SyntheticConfig, SyntheticCorpus};
use perspectra::transfer::{
    backtranslation_round, load_model, train_unsupervised, CheckpointDir, Direction, DirectionModel,
    MonoCorpora, Seq2Seq, ToyConfig, ToySeq2Seq, TrainConfig, Variant, Vocab,
};
use perspectra::transfer::ConditioningOrder;

fn corpora() -> MonoCorpora {
    let corpus = SyntheticCorpus::generate(&SyntheticConfig::default());
    MonoCorpora::from_store(&corpus.store, &Dimension::BlameMurderer, 5).unwrap()
}

fn init(mono: &MonoCorpora) -> ToySeq2Seq<f32> {
    let vocab = Vocab::build(mono.vocabulary_texts());
    let mut m = ToySeq2Seq::new(vocab, ToyConfig { embed_dim: 12, hidden_dim: 24, ..Default::default() });
    let texts: Vec<String> = mono.low.iter().chain(&mono.high).map(|s| s.text.clone()).collect();
    m.pretrain_denoising(&texts, 3, 0.15, 5e-3, 1).unwrap();
    m
}

fn quick() -> TrainConfig {
    TrainConfig {
        bt_iterations: 2,
        epochs_per_round: 2,
        max_learning_rate: 5e-3,
        warmup_steps: 5,
        ..TrainConfig::default()
    }
}

#[test]
fn frozen_parameters_survive_every_round() {
    let mono = corpora();
    let m = init(&mono);
    let trained = train_unsupervised(&mono, &m, &quick(), Variant::MetaSrc, None).unwrap();
    assert_eq!(trained.stats.len(), 2);
    for s in &trained.stats {
        assert_eq!(s.frozen_fingerprint_lh, m.frozen_fingerprint());
        assert_eq!(s.frozen_fingerprint_hl, m.frozen_fingerprint());
        assert!(s.mean_loss_lh.unwrap().is_finite());
        assert!(s.mean_loss_hl.unwrap().is_finite());
    }
    assert_ne!(trained.lh.seq2seq.trainable_fingerprint(), m.trainable_fingerprint());
    assert_ne!(trained.stats[0].decoder_fingerprint_lh, trained.stats[1].decoder_fingerprint_lh);
}

#[test]
fn zero_iterations_is_identity() {
    let mono = corpora();
    let m = init(&mono);
    let config = TrainConfig { bt_iterations: 0, ..quick() };
    let lh = DirectionModel::new(Direction::LowToHigh, m.clone());
    let hl = DirectionModel::new(Direction::HighToLow, m.clone());
    let out = backtranslation_round(lh, hl, &mono.low, &mono.high, ConditioningOrder::Plain, &config, 1).unwrap();
    assert!(out.stats.is_none());
    assert_eq!(out.lh.seq2seq, m);
    assert_eq!(out.hl.seq2seq, m);
    let trained = train_unsupervised(&mono, &m, &config, Variant::Base, None).unwrap();
    assert!(trained.stats.is_empty());
    assert_eq!(trained.lh.seq2seq.trainable_fingerprint(), m.trainable_fingerprint());
}

#[test]
fn synthetic_pairs_match_corpus_sizes() {
    let mono = corpora();
    let m = init(&mono);
    let trained = train_unsupervised(&mono, &m, &quick(), Variant::Base, None).unwrap();
    for s in &trained.stats {
        // the low-to-high model learns from back-translated high sentences
        assert_eq!(s.synthetic_pairs_lh, mono.high.len());
        assert_eq!(s.synthetic_pairs_hl, mono.low.len());
    }
}

#[test]
fn training_is_deterministic() {
    let mono = corpora();
    let m = init(&mono);
    let a = train_unsupervised(&mono, &m, &quick(), Variant::SrcMeta, None).unwrap();
    let b = train_unsupervised(&mono, &m, &quick(), Variant::SrcMeta, None).unwrap();
    assert_eq!(a.stats, b.stats);
    let c = train_unsupervised(&mono, &m, &TrainConfig { seed: 99, ..quick() }, Variant::SrcMeta, None).unwrap();
    assert_ne!(a.stats.last().unwrap().decoder_fingerprint_lh, c.stats.last().unwrap().decoder_fingerprint_lh);
}

#[test]
fn empty_metadata_makes_conditioning_a_no_op() {
    let mono = corpora().without_meta();
    let m = init(&mono);
    let base = train_unsupervised(&mono, &m, &quick(), Variant::Base, None).unwrap();
    let src_meta = train_unsupervised(&mono, &m, &quick(), Variant::SrcMeta, None).unwrap();
    let meta_src = train_unsupervised(&mono, &m, &quick(), Variant::MetaSrc, None).unwrap();
    for other in [&src_meta, &meta_src] {
        assert_eq!(
            base.lh.seq2seq.trainable_fingerprint(),
            other.lh.seq2seq.trainable_fingerprint()
        );
        assert_eq!(
            base.hl.seq2seq.trainable_fingerprint(),
            other.hl.seq2seq.trainable_fingerprint()
        );
    }
}

#[test]
fn checkpoints_are_written_per_round() {
    let mono = corpora();
    let m = init(&mono);
    let dir = tempfile::tempdir().unwrap();
    let ckpt = CheckpointDir::new(dir.path(), "run-a");
    let trained = train_unsupervised(&mono, &m, &quick(), Variant::MetaSrc, Some(&ckpt)).unwrap();
    for round in 1..=2 {
        for d in [Direction::LowToHigh, Direction::HighToLow] {
            assert!(ckpt.model_path(round, d).is_file());
        }
    }
    assert!(dir.path().join("run-a/round_2/lh/model.json").is_file());
    let last: ToySeq2Seq<f32> = load_model(&dir.path().join("run-a/round_2/lh")).unwrap();
    assert_eq!(last, trained.lh.seq2seq);
    assert_eq!(ckpt.round_stats().unwrap(), trained.stats);
}

#[test]
fn empty_corpus_is_rejected() {
    let mono = corpora();
    let m = init(&mono);
    let lh = DirectionModel::new(Direction::LowToHigh, m.clone());
    let hl = DirectionModel::new(Direction::HighToLow, m);
    assert!(backtranslation_round(lh, hl, &[], &mono.high, ConditioningOrder::Plain, &quick(), 1).is_err());
}
