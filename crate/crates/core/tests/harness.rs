use sdoh_core::corpus::SynthConfig;
use sdoh_core::harness::{
    build_manifest, read_report, run_experiment, write_experiment, Dataset, ExperimentConfig, Extractor, Variant,
};
use sdoh_core::stats::Method;
use sdoh_core::tagger::{FinetuneConfig, Hyper};

fn small(seed: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::with_seed(seed);
    c.external = SynthConfig::institution_a(60, 11);
    c.local = SynthConfig::institution_b(400, 12);
    c.train_sizes = vec![20, 40];
    c.eval_size = 120;
    c.external_hyper = Hyper { epochs: 2, d_emb: 8, d_h: 8, ..Hyper::default() };
    c.scratch_hyper = Hyper { epochs: 2, d_emb: 8, d_h: 8, ..Hyper::default() };
    c.finetune = FinetuneConfig { epochs: 2, ..FinetuneConfig::default() };
    c.mice.m = 3;
    c.mice.cycles = 3;
    c
}

#[test]
fn gold_extraction_reproduces_reference_associations() {
    let mut config = small(5);
    config.extractor = Extractor::Gold;
    let run = run_experiment(&config, None).unwrap();
    let report = &run.report;
    assert!(run.models.is_empty());
    assert_eq!(report.reference.len(), 5);
    for cell in config.cells() {
        for r in &report.reference {
            let got = report.association(cell, Dataset::LabeledSubset, Method::Mice, r.sdoh).unwrap();
            assert_eq!(got, r, "{} {}", cell.label(), r.sdoh);
        }
        let score = report.score_table(cell).unwrap();
        assert_eq!(score.rows[0].f1, 1.0);
    }
}

#[test]
fn experiment_outputs_are_deterministic_and_reloadable() {
    let config = small(7);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let run_a = run_experiment(&config, Some(&a.path().join("cache"))).unwrap();
    let manifest_a = write_experiment(&run_a, a.path()).unwrap();
    let run_b = run_experiment(&config, None).unwrap();
    let manifest_b = write_experiment(&run_b, b.path()).unwrap();
    assert_eq!(manifest_a, manifest_b);
    assert_eq!(
        std::fs::read(a.path().join("manifest.json")).unwrap(),
        std::fs::read(b.path().join("manifest.json")).unwrap()
    );
    assert!(manifest_a.files.iter().all(|f| !f.path.starts_with("cache")));
    for name in ["scores.csv", "associations.csv", "forest.csv", "table1.csv", "split.json", "models/external.json"] {
        assert!(a.path().join(name).exists(), "{name}");
    }
    assert!(a.path().join("forest_large_set_mice.svg").exists());

    // a rerun against the warm cache is identical to the cold run (compared
    // as JSON because failed association rows hold NaN)
    let run_c = run_experiment(&config, Some(&a.path().join("cache"))).unwrap();
    assert_eq!(serde_json::to_string(&run_c.report).unwrap(), serde_json::to_string(&run_a.report).unwrap());

    let reloaded = read_report(&a.path().join("report.json")).unwrap();
    assert_eq!(reloaded.associations.len(), run_a.report.associations.len());
    assert_eq!(reloaded.scores, run_a.report.scores);
    assert_eq!(build_manifest(a.path(), &["cache"]).unwrap(), manifest_a);

    let cells = config.cells();
    assert_eq!(cells.len(), 5);
    assert_eq!(cells[0].variant, Variant::External);
    // 5 SDoH x 2 modes x 2 datasets per cell
    assert_eq!(run_a.report.associations.len(), cells.len() * 20);
}
