use std::fs;
use std::path::Path;

use dmdforge_core::evaluation::{
    anls, anls_item, evaluate, levenshtein, numeric_match, one_word_accuracies, read_predictions, run_benchmark,
    EvalReport, EvalTarget, EvaluationError, PredictionRow, ScoringOptions,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Full-matrix Wagner-Fischer, kept deliberately naive.
fn lev_oracle(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    d[0] = (0..=b.len()).collect();
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let cost = if a[i - 1] == b[j - 1] { 0 } else { 1 };
            d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + cost);
        }
    }
    d[a.len()][b.len()]
}

const ALPHABET: &[char] = &['0', '1', '7', '.', ':', '-', 'a', 'B', 'P', 'M', ' ', '%', '°', 'µ'];

fn random_string(rng: &mut ChaCha8Rng) -> String {
    let len = rng.gen_range(0..=30);
    (0..len).map(|_| ALPHABET[rng.gen_range(0..ALPHABET.len())]).collect()
}

fn row(pred: &str, gt: &str, target: EvalTarget) -> PredictionRow {
    PredictionRow {
        image: "img.png".into(),
        question: "q".into(),
        prediction: pred.into(),
        ground_truth: gt.into(),
        target,
        device: None,
    }
}

#[test]
fn distance_matches_the_dp_oracle_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let (a, b) = (random_string(&mut rng), random_string(&mut rng));
        assert_eq!(levenshtein(&a, &b), lev_oracle(&a, &b), "{a:?} / {b:?}");
    }
}

#[test]
fn item_scores_follow_the_threshold() {
    assert!((anls_item("0.022 A", "0.022 V", 0.5) - 6.0 / 7.0).abs() < 1e-12);
    assert_eq!(anls_item("35.9", "35.9", 0.5), 1.0);
    assert_eq!(anls_item("BPM", " bpm ", 0.5), 1.0);
    // distance 2 over length 4 sits exactly on the threshold
    assert_eq!(anls_item("76.0", "76", 0.5), 0.5);
    assert_eq!(anls_item("1/min", "BPM", 0.5), 0.0);
    assert_eq!(anls_item("", "", 0.5), 1.0);
    assert_eq!(anls_item("x", "", 0.5), 0.0);
}

#[test]
fn aggregate_anls_is_the_item_mean() {
    let opts = ScoringOptions::default();
    let all = vec![row("96", "96", EvalTarget::Measurement); 10];
    assert_eq!(anls(&all, &opts).unwrap(), 1.0);
    let half: Vec<_> = (0..10)
        .map(|i| if i % 2 == 0 { row("96", "96", EvalTarget::Measurement) } else { row("zzzz", "96", EvalTarget::Measurement) })
        .collect();
    assert_eq!(anls(&half, &opts).unwrap(), 0.5);
    assert!(matches!(anls(&[], &opts), Err(EvaluationError::EmptyEvaluation)));
    let strict = ScoringOptions { tau: 0.0, ..opts };
    assert_eq!(anls(&[row("0.022 A", "0.022 V", EvalTarget::Unit)], &strict).unwrap(), 0.0);
}

#[test]
fn one_word_matching_rules() {
    assert!(numeric_match("76.0", "76"));
    assert!(numeric_match("00.67", "0.67"));
    assert!(!numeric_match("36.9", "35.9"));
    assert!(numeric_match("17:57", "17:57"));
    assert!(!numeric_match("1757", "17:57"));
    let rows = vec![
        row("36.9", "35.9", EvalTarget::Measurement),
        row("96", "96", EvalTarget::Measurement),
        row("bpm", "BPM", EvalTarget::Unit),
    ];
    let acc = one_word_accuracies(&rows, &ScoringOptions::default()).unwrap();
    assert_eq!((acc.numeric, acc.unit, acc.word_level), (0.5, 1.0, 0.75));
    assert!(matches!(
        one_word_accuracies(&rows[..2], &ScoringOptions::default()),
        Err(EvaluationError::NoUnitRows)
    ));
}

#[test]
fn multi_truth_keeps_the_best_alternative() {
    let rows = [row("°C", "C|°C", EvalTarget::Unit)];
    let single = evaluate(&rows, &ScoringOptions::default()).unwrap();
    let multi = evaluate(&rows, &ScoringOptions { multi_truth: true, ..ScoringOptions::default() }).unwrap();
    assert!(single.overall.anls < 1.0);
    assert_eq!(single.overall.unit_accuracy, Some(0.0));
    assert_eq!(multi.overall.anls, 1.0);
    assert_eq!(multi.overall.unit_accuracy, Some(1.0));
    assert!(matches!(
        evaluate(&rows, &ScoringOptions { tau: 1.5, ..ScoringOptions::default() }),
        Err(EvaluationError::InvalidTau(_))
    ));
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-12
}

#[test]
fn hand_scored_fixture_reproduces_its_report() {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/scored_predictions.csv");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let report = run_benchmark(&fixture, Some(&out), &ScoringOptions::default()).unwrap();

    // per-row ANLS: 1, 0.75, 1, 0, 0.8, 0.5, 1, 1
    assert_eq!(report.overall.n_items, 8);
    assert!(close(report.overall.anls, 6.05 / 8.0));
    assert_eq!(report.overall.numeric_accuracy, Some(0.5));
    assert!(close(report.overall.unit_accuracy.unwrap(), 2.0 / 3.0));
    assert!(close(report.overall.word_level_accuracy.unwrap(), (0.5 + 2.0 / 3.0) / 2.0));

    let metronome = &report.per_device["metronome"];
    assert_eq!(metronome.n_items, 3);
    assert!(close(metronome.anls, 2.5 / 3.0));
    assert_eq!(metronome.numeric_accuracy, Some(1.0));
    assert_eq!(metronome.unit_accuracy, None);
    assert_eq!(metronome.word_level_accuracy, None);
    let oximeter = &report.per_device["pulse oximeter"];
    assert_eq!((oximeter.anls, oximeter.unit_accuracy), (0.5, Some(0.5)));
    assert_eq!(report.per_device.len(), 5);

    let written: EvalReport = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(written, report);
}

#[test]
fn malformed_prediction_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.csv");
    fs::write(&path, "").unwrap();
    assert!(matches!(read_predictions(&path), Err(EvaluationError::MalformedCsv { .. })));
    fs::write(&path, "image,question,prediction,ground_truth,target\n").unwrap();
    assert!(matches!(
        run_benchmark(&path, None, &ScoringOptions::default()),
        Err(EvaluationError::EmptyEvaluation)
    ));
    fs::write(&path, "image,question,prediction,target\na,q,1,measurement\n").unwrap();
    assert!(matches!(read_predictions(&path), Err(EvaluationError::MalformedCsv { .. })));
    fs::write(&path, "image,question,prediction,ground_truth,target\na,q,1,1,colour\n").unwrap();
    assert!(matches!(read_predictions(&path), Err(EvaluationError::MalformedCsv { .. })));
}

proptest! {
    #[test]
    fn distance_is_a_metric(a in "[0-9a-c.]{0,12}", b in "[0-9a-c.]{0,12}", c in "[0-9a-c.]{0,12}") {
        prop_assert_eq!(levenshtein(&a, &b), levenshtein(&b, &a));
        prop_assert!(levenshtein(&a, &c) <= levenshtein(&a, &b) + levenshtein(&b, &c));
        prop_assert_eq!(levenshtein(&a, &a), 0);
    }

    #[test]
    fn shared_suffix_never_increases_distance(a in "[0-9a-c]{0,10}", b in "[0-9a-c]{0,10}", s in "[0-9a-c]{0,6}") {
        let (left, right) = (a.clone() + &s, b.clone() + &s);
        prop_assert!(levenshtein(&left, &right) <= levenshtein(&a, &b));
    }

    #[test]
    fn item_scores_are_bounded(p in "[0-9A-Za-z .]{0,12}", g in "[0-9A-Za-z .]{0,12}", tau in 0.0f64..=1.0) {
        let s = anls_item(&p, &g, tau);
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert_eq!(anls_item(&g, &g, tau), 1.0);
        prop_assert!(s == 0.0 || s >= 1.0 - tau - 1e-12);
    }
}
