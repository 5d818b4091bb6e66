use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sdoh_core::corpus::{generate_synthetic, SynthConfig};
use sdoh_core::derivation::derive_sdoh;
use sdoh_core::harness::derive_seed;
use sdoh_core::scorer::{format_ratio, prf, score_corpus, Matching};
use sdoh_core::sectionizer::extract_social_history;
use sdoh_core::stats::{pmm_draw, rubin_pool};
use sdoh_core::tagger::bio::{decode_bio, encode_bio, gold_spans, Layer};
use sdoh_core::tagger::train::document_tokens;
use sdoh_core::tagger::{checkpoint, tokenize, train, Hyper};

/// Half-up rounding to hundredths by long division, independent of the
/// library's closed form.
fn oracle_ratio(num: u64, den: u64) -> String {
    if den == 0 {
        return "0.00".into();
    }
    let whole = num / den;
    let mut rem = num % den;
    let mut digits = [0u64; 3];
    for d in &mut digits {
        rem *= 10;
        *d = rem / den;
        rem %= den;
    }
    let mut hundredths = whole * 100 + digits[0] * 10 + digits[1];
    if digits[2] >= 5 {
        hundredths += 1;
    }
    format!("{}.{:02}", hundredths / 100, hundredths % 100)
}

proptest! {
    #[test]
    fn ratio_formatting_matches_long_division(num in 0u64..100_000, den in 0u64..100_000) {
        prop_assert_eq!(format_ratio(num, den), oracle_ratio(num, den));
    }

    #[test]
    fn prf_bounds_and_harmonic_mean(nt in 0u64..5000, np in 0u64..5000, tp_frac in 0.0f64..=1.0) {
        let tp = ((nt.min(np) as f64) * tp_frac).floor() as u64;
        let (p, r, f1) = prf(nt, np, tp).unwrap();
        for v in [p, r, f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        if tp > 0 {
            prop_assert!((f1 - 2.0 * p * r / (p + r)).abs() < 1e-12);
        }
        prop_assert!(prf(nt, np, nt.min(np) + 1).is_err());
    }

    #[test]
    fn tokens_are_ordered_and_cover_all_visible_characters(text in "[a-zA-Z0-9 .,;:/()\\-\n]{0,80}") {
        let chars: Vec<char> = text.chars().collect();
        let toks = tokenize(&text);
        let mut last_end = 0;
        let mut covered = String::new();
        for t in &toks {
            prop_assert!(t.span.start >= last_end && t.span.end > t.span.start && t.span.end <= chars.len());
            let s: String = chars[t.span.start..t.span.end].iter().collect();
            prop_assert_eq!(&s, &t.surface);
            covered.push_str(&s);
            last_end = t.span.end;
        }
        let visible: String = chars.iter().filter(|c| !c.is_whitespace()).collect();
        prop_assert_eq!(covered, visible);
    }

    #[test]
    fn section_spans_are_trimmed_and_in_bounds(prefix in "[a-z ]{0,20}", body in "[a-z][a-z ]{0,30}[a-z]", suffix in "[a-z ]{0,20}") {
        let text = format!("{prefix}\nSocial History: {body}\n\nPhysical Exam:\n{suffix}");
        let chars: Vec<char> = text.chars().collect();
        let span = extract_social_history(&text).unwrap();
        prop_assert!(span.end <= chars.len() && span.start < span.end);
        prop_assert!(!chars[span.start].is_whitespace() && !chars[span.end - 1].is_whitespace());
        let got: String = chars[span.start..span.end].iter().collect();
        prop_assert_eq!(got, body);
    }

    #[test]
    fn rubin_total_variance_identity(fits in prop::collection::vec((-3.0f64..3.0, 0.0f64..2.0), 2..30)) {
        let p = rubin_pool(&fits).unwrap();
        let m = fits.len() as f64;
        prop_assert_eq!(p.total, p.within + (1.0 + 1.0 / m) * p.between);
        prop_assert!(p.total >= p.within && p.between >= 0.0);
        prop_assert!(p.ci_low <= p.estimate && p.estimate <= p.ci_high);
        let mut rev = fits.clone();
        rev.reverse();
        let q = rubin_pool(&rev).unwrap();
        prop_assert!((q.estimate - p.estimate).abs() < 1e-12 && (q.total - p.total).abs() < 1e-12);
    }

    #[test]
    fn pmm_donors_come_from_the_k_nearest(
        preds in prop::collection::vec(-5.0f64..5.0, 5..40),
        target in -6.0f64..6.0,
        k in 1usize..5,
        seed in any::<u64>(),
    ) {
        let values: Vec<usize> = (0..preds.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let chosen = pmm_draw(&preds, &values, target, k, &mut rng).unwrap();
        let mut dist: Vec<f64> = preds.iter().map(|p| (p - target).abs()).collect();
        let d = dist[chosen];
        dist.sort_by(f64::total_cmp);
        prop_assert!(d <= dist[k - 1]);
    }

    #[test]
    fn seed_derivation_separates_labels(master in any::<u64>(), a in "[a-z/0-9]{1,12}", b in "[a-z/0-9]{1,12}") {
        prop_assume!(a != b);
        prop_assert_ne!(derive_seed(master, &a), derive_seed(master, &b));
        prop_assert_eq!(derive_seed(master, &a), derive_seed(master, &a));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn generated_corpora_round_trip_through_bio(seed in any::<u64>(), b in any::<bool>()) {
        let cfg = if b { SynthConfig::institution_b(20, seed) } else { SynthConfig::institution_a(20, seed) };
        for r in generate_synthetic(&cfg).unwrap().records {
            let doc = r.document;
            let tokens = document_tokens(&doc);
            let tags = encode_bio(&doc, &tokens, false).unwrap();
            for (layer, seq) in [(Layer::Trigger, &tags.trigger_tags), (Layer::Argument, &tags.argument_tags)] {
                let decoded: Vec<_> = decode_bio(seq, &tokens, layer).unwrap().into_iter().map(|s| (s.label, s.span)).collect();
                let mut decoded = decoded;
                decoded.sort();
                prop_assert_eq!(decoded, gold_spans(&doc, layer));
            }
        }
    }

    #[test]
    fn self_scoring_is_perfect_and_derivation_ignores_event_order(seed in any::<u64>()) {
        let docs: Vec<_> = generate_synthetic(&SynthConfig::institution_b(15, seed)).unwrap().records.into_iter().map(|r| r.document).collect();
        let rows = score_corpus(&docs, &docs, Matching::Exact).unwrap();
        for r in &rows {
            prop_assert_eq!(r.tp, r.nt);
            prop_assert_eq!(r.tp, r.np);
        }
        for d in &docs {
            let mut rev = d.events.clone();
            rev.reverse();
            prop_assert_eq!(derive_sdoh(&rev), derive_sdoh(&d.events));
        }
    }
}

#[test]
fn checkpoints_round_trip_byte_exactly() {
    let docs: Vec<_> = generate_synthetic(&SynthConfig::institution_b(10, 3))
        .unwrap()
        .records
        .into_iter()
        .map(|r| r.document)
        .collect();
    let model = train(&docs, &Hyper { epochs: 1, d_emb: 4, d_h: 4, ..Hyper::default() }).unwrap().model;
    let json = checkpoint::to_json(&model).unwrap();
    let back = checkpoint::from_json(&json).unwrap();
    assert_eq!(back, model);
    assert_eq!(checkpoint::to_json(&back).unwrap(), json);
}
