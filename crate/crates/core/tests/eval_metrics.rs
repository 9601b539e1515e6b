mod support;

use gtda::data::Label;
use gtda::eval::{
    confusion_from_labels, metrics, round3, AblationReport, CellResult, CellSpec, CellStatus, ConfusionMatrix, Metrics,
};
use gtda::s2i::S2IParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::one_pass_metrics;

fn to_label(b: bool) -> Label {
    if b {
        Label::Positive
    } else {
        Label::Negative
    }
}

#[test]
fn random_predictions_match_one_pass_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..10_000 {
        let n = rng.random_range(1..200);
        let p_rate = rng.random::<f64>();
        let q_rate = rng.random::<f64>();
        let truth: Vec<bool> = (0..n).map(|_| rng.random_bool(p_rate)).collect();
        let pred: Vec<bool> = (0..n).map(|_| rng.random_bool(q_rate)).collect();
        let (tp, fnn, fp, tn, acc, precision, recall, f1) = one_pass_metrics(&pred, &truth);

        let predicted: Vec<Label> = pred.iter().copied().map(to_label).collect();
        let actual: Vec<Label> = truth.iter().copied().map(to_label).collect();
        let cm = confusion_from_labels(&predicted, &actual).unwrap();
        assert_eq!(cm, ConfusionMatrix::new(tp, fnn, fp, tn));
        let m = metrics(&cm);
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (acc, precision, recall, f1));
        assert_eq!(m.precision_undefined, tp + fp == 0);
        assert_eq!(m.recall_undefined, tp + fnn == 0);

        let lo = m.precision.min(m.recall);
        let hi = m.precision.max(m.recall);
        assert!(m.f1 >= lo - 1e-15 && m.f1 <= hi + 1e-15);
        assert!((0.0..=1.0).contains(&m.accuracy));
    }
}

#[test]
fn reported_confusion_reconstructs_rounded_row() {
    let m = metrics(&ConfusionMatrix::new(19, 22, 28, 281));
    let got = [m.accuracy, m.precision, m.recall, m.f1].map(round3);
    assert_eq!(got, [0.857, 0.404, 0.463, 0.432]);
    assert!((m.accuracy - 300.0 / 350.0).abs() < 1e-15);
}

#[test]
fn length_mismatch_is_rejected() {
    assert!(confusion_from_labels(&[Label::Positive], &[]).is_err());
}

fn completed(cell: &str, seed: u64, m: [f64; 4]) -> CellResult {
    CellResult {
        cell: cell.into(),
        seed,
        status: CellStatus::Completed(Metrics { accuracy: m[0], precision: m[1], recall: m[2], f1: m[3], ..Metrics::default() }),
    }
}

#[test]
fn summary_is_recomputable_from_rows() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let cells = CellSpec::core_grid(&S2IParams::default());
    let mut rows = Vec::new();
    for cell in &cells {
        for seed in 1..=5 {
            rows.push(completed(&cell.name, seed, [(); 4].map(|_| rng.random::<f64>())));
        }
    }
    rows.push(CellResult { cell: cells[0].name.clone(), seed: 6, status: CellStatus::Failed("diverged".into()) });
    let report = AblationReport { cells: cells.clone(), rows };

    let csv = report.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("cell,seed,acc,precision,recall,f1"));
    let parsed: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(parsed.len(), 21);
    assert!(parsed.iter().any(|r| r[2..].iter().all(|v| *v == "FAILED")));

    for cell in &cells {
        let values: Vec<[f64; 4]> = parsed
            .iter()
            .filter(|r| r[0] == cell.name && r[2] != "FAILED")
            .map(|r| [2, 3, 4, 5].map(|i| r[i].parse::<f64>().unwrap()))
            .collect();
        let s = report.summary(&cell.name).unwrap();
        assert_eq!(s.completed, 5);
        assert_eq!(s.failed, usize::from(cell.name == cells[0].name));
        for j in 0..4 {
            let n = values.len() as f64;
            let mean = values.iter().map(|v| v[j]).sum::<f64>() / n;
            let sd = (values.iter().map(|v| (v[j] - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            assert!((s.mean[j] - mean).abs() <= 1e-12);
            assert!((s.sd[j] - sd).abs() <= 1e-12);
        }
    }
}
