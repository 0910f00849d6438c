use perspectra::pipeline::{run_demo, DemoConfig};
use perspectra::transfer::Variant;

#[test]
fn demo_moves_blame_toward_targets_and_is_reproducible() {
    let config = DemoConfig {
        cases: 24,
        variants: vec![Variant::Base, Variant::MetaSrc],
        ..DemoConfig::default()
    };
    let a = run_demo(&config).unwrap();
    assert!(a.source_blame < 0.0 && a.target_blame > 0.0);
    for variant in ["base", "meta-src"] {
        let out = a.system_blame[variant];
        assert!(out > a.source_blame + 0.5, "{variant}: {out} vs source {}", a.source_blame);
        assert!((out - a.target_blame).abs() < 0.5, "{variant}: {out} vs target {}", a.target_blame);
    }
    // stub prompt systems only append a marker, so blame barely moves
    assert!((a.system_blame["na-zero"] - a.source_blame).abs() < 0.3);
    for stats in a.round_stats.values() {
        assert_eq!(stats.len(), 3);
        assert!(stats.iter().all(|s| s.mean_loss_lh.is_some_and(f64::is_finite)));
    }
    let b = run_demo(&config).unwrap();
    assert_eq!(a.render_text(), b.render_text());
    for t in a.suite.tables() {
        assert!(!t.to_tsv().is_empty());
    }
}
