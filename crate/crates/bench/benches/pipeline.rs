use criterion::{black_box, criterion_group, criterion_main, Criterion};

use sdoh_core::corpus::{generate_synthetic, AnnotatedDocument, SdohVariable, SynthConfig};
use sdoh_core::derivation::{study_rows, CodeStatusLexicon};
use sdoh_core::scorer::{score_corpus, Matching};
use sdoh_core::sectionizer::Sectionizer;
use sdoh_core::stats::{associate_cca, mice, MiceConfig};
use sdoh_core::tagger::{extract_corpus, train, Hyper};

fn corpus(n: usize) -> Vec<AnnotatedDocument> {
    generate_synthetic(&SynthConfig::institution_b(n, 1))
        .unwrap()
        .records
        .into_iter()
        .map(|r| r.document)
        .collect()
}

fn tagger(c: &mut Criterion) {
    let docs = corpus(60);
    let one_epoch = Hyper { epochs: 1, ..Hyper::default() };
    c.bench_function("train 60 docs x 1 epoch", |b| b.iter(|| train(black_box(&docs), &one_epoch).unwrap()));
    let model = train(&docs, &one_epoch).unwrap().model;
    c.bench_function("extract 60 docs", |b| {
        b.iter(|| extract_corpus(&model, black_box(&docs), Sectionizer::default_rules()).unwrap())
    });
}

fn scoring(c: &mut Criterion) {
    let gold = corpus(300);
    let mut pred = gold.clone();
    for d in pred.iter_mut().step_by(3) {
        d.events.pop();
    }
    c.bench_function("score 300 docs", |b| b.iter(|| score_corpus(black_box(&gold), &pred, Matching::Overlap).unwrap()));
    c.bench_function("sectionize 300 docs", |b| {
        b.iter(|| {
            for d in &gold {
                black_box(Sectionizer::default_rules().extract_social_history(&d.text));
            }
        })
    });
}

fn statistics(c: &mut Criterion) {
    let records = generate_synthetic(&SynthConfig::institution_b(1000, 2)).unwrap().records;
    let rows = study_rows(&records, CodeStatusLexicon::default_lexicon());
    c.bench_function("cca 1000 rows", |b| b.iter(|| associate_cca(black_box(&rows), SdohVariable::Tobacco).unwrap()));
    let config = MiceConfig { m: 2, cycles: 3, ..MiceConfig::default() };
    let mut group = c.benchmark_group("mice");
    group.sample_size(10);
    group.bench_function("1000 rows m2 x 3 cycles", |b| b.iter(|| mice(black_box(&rows), &config).unwrap()));
    group.finish();
}

criterion_group!(benches, tagger, scoring, statistics);
criterion_main!(benches);
