mod common;

use std::sync::OnceLock;

use common::{capacity_oracle, dense_forward, method_blobs, percent_correct, to_rows, trained};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use unlearnkit::data::{shift_testset, DatasetSplit, ShiftKind};
use unlearnkit::eval::{
    accuracy, chance_level, deletion_capacity, evaluate, flos_to_reach, mia_success, scaling_curve, transfer_eval,
    EvalReport, Leaderboard, MiaAttack, RunSummary,
};
use unlearnkit::unlearn::{unlearn, Method, TrainedModel, UnlearnConfig};

fn fixture() -> &'static (DatasetSplit, TrainedModel) {
    static F: OnceLock<(DatasetSplit, TrainedModel)> = OnceLock::new();
    F.get_or_init(|| {
        let split = method_blobs(0).with_deletion(5, 0).unwrap();
        let original = trained(&split, 0);
        (split, original)
    })
}

fn run(method: Method) -> unlearnkit::unlearn::UnlearnRun {
    let (split, original) = fixture();
    unlearn(original, split, &UnlearnConfig::for_method(method)).unwrap()
}

#[test]
fn accuracy_matches_argmax_oracle_on_every_sample() {
    let (split, original) = fixture();
    let logits = dense_forward(&original.model, &to_rows(split.test_x()));
    let pred: Vec<usize> = logits
        .iter()
        .map(|r| (0..r.len()).fold(0, |best, j| if r[j] > r[best] { j } else { best }))
        .collect();
    assert_eq!(pred, original.model.predict(split.test_x()).unwrap());
    let acc = accuracy(&original.model, split.test_x(), split.test_y()).unwrap().unwrap();
    assert_eq!(acc, percent_correct(&pred, split.test_y()));
}

#[test]
fn memorizing_original_fits_train_and_beats_test_on_forget_set() {
    let (split, original) = fixture();
    let a = evaluate(&original.model, split).unwrap();
    assert_eq!(a.acc_f, Some(100.0));
    assert_eq!(a.acc_r, 100.0);
    assert!(a.acc_f.unwrap() >= a.acc_test);
    assert_eq!(evaluate(&original.model, split).unwrap(), a);
}

#[test]
fn separable_losses_give_full_attack_success() {
    let attack = MiaAttack::calibrate(&[0.0; 20], &[1.0; 20]).unwrap();
    assert_eq!(attack.member_rate(&[0.0; 7]), Some(100.0));
    assert_eq!(attack.member_rate(&[1.0; 7]), Some(0.0));
}

#[test]
fn report_is_pure_and_uses_fixed_keys() {
    let (split, original) = fixture();
    let a = EvalReport::compute(&original.model, split, 12.0, None, "abc", 3).unwrap();
    let b = EvalReport::compute(&original.model, split, 12.0, None, "abc", 3).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    let v: serde_json::Value = serde_json::from_str(&a.to_json().unwrap()).unwrap();
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    let mut want = vec![
        "acc_test", "acc_f", "acc_r", "seconds", "flos", "mia_success", "transfer_acc", "config_hash", "seed",
    ];
    want.sort();
    let mut got = keys.clone();
    got.sort();
    assert_eq!(got, want);
    assert!(v["transfer_acc"].is_null());
    for k in ["acc_test", "acc_f", "acc_r", "mia_success"] {
        let x = v[k].as_f64().unwrap();
        assert!((0.0..=100.0).contains(&x), "{k}");
    }
}

#[test]
fn empty_forget_set_reports_null_not_zero() {
    let split = method_blobs(3);
    let r = EvalReport::compute(&fixture().1.model, &split, 0.0, None, "h", 0).unwrap();
    assert_eq!(r.acc_f, None);
    assert_eq!(r.mia_success, None);
    assert!(r.to_json().unwrap().contains("\"acc_f\": null"));
}

#[test]
fn zero_shift_transfer_equals_plain_accuracy() {
    let (split, original) = fixture();
    let x = shift_testset(split, ShiftKind::Noise, 0.0, 0).unwrap();
    let (a, b) = transfer_eval(&original.model, &original.model, &x, split.test_y()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, evaluate(&original.model, split).unwrap().acc_test);
}

#[test]
fn neg_grad_hurts_transfer_more_than_rand_label() {
    let (split, original) = fixture();
    let x = shift_testset(split, ShiftKind::Noise, 0.5, 0).unwrap();
    let drop = |m: Method| {
        let r = run(m);
        let (f, f_prime) = transfer_eval(&original.model, &r.model, &x, split.test_y()).unwrap();
        f - f_prime
    };
    let (neg, rand) = (drop(Method::NegGrad), drop(Method::RandLabel));
    assert!(neg > rand, "neg_grad drop {neg} vs rand_label drop {rand}");
}

#[test]
fn scaling_curves_start_at_original_and_neg_grad_is_faster_than_bad_t() {
    let (split, original) = fixture();
    let chance = chance_level(3);
    let original_acc_f = evaluate(&original.model, split).unwrap().acc_f;
    let mut reach = Vec::new();
    for m in [Method::NegGrad, Method::BadT] {
        let curve = scaling_curve(&run(m).trace);
        assert_eq!(curve[0], (0.0, original_acc_f));
        assert!(curve.windows(2).all(|w| w[1].0 > w[0].0));
        reach.push(flos_to_reach(&curve, chance + 10.0));
    }
    let (neg, bad) = (reach[0].expect("neg_grad reaches chance"), reach[1]);
    assert!(bad.is_none_or(|b| neg < b), "neg_grad {neg} vs bad_t {bad:?}");
}

#[test]
fn capacity_agrees_with_scan_oracle_on_random_sweeps() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let n = rng.random_range(1..=10);
        let base = rng.random_range(50.0..100.0);
        let sweep: Vec<(u32, f64)> = (1..=n).map(|r| (r as u32, base - rng.random_range(-1.0..6.0))).collect();
        let tol = rng.random_range(0.0..5.0);
        assert_eq!(deletion_capacity(&sweep, base, tol).unwrap(), capacity_oracle(&sweep, base, tol));
    }
}

fn summary(method: Method, ratio: u32, acc_f: f64, mia: f64, flos: f64) -> RunSummary {
    RunSummary {
        method,
        del_ratio: ratio,
        data_key: "blobs".into(),
        num_classes: 3,
        report: EvalReport {
            acc_test: 90.0,
            acc_f: Some(acc_f),
            acc_r: 95.0,
            seconds: flos / 1e9,
            flos,
            mia_success: Some(mia),
            transfer_acc: None,
            config_hash: "h".into(),
            seed: 0,
        },
    }
}

#[test]
fn single_run_table_echoes_its_report() {
    let lb = Leaderboard::build(&[summary(Method::Scrub, 5, 40.0, 12.5, 3.6e12)]);
    assert_eq!(lb.rows.len(), 1);
    let md = lb.to_markdown();
    let row = md.lines().find(|l| l.contains("SCRUB")).unwrap();
    for cell in ["90.0", "40.0", "95.0", "12.5"] {
        assert!(row.contains(cell), "{row}");
    }
    assert!(lb.time_table().contains("| SCRUB | 1.0 |"));
}

#[test]
fn membership_table_renders_reference_fixture() {
    // reference values are a formatting fixture only
    let runs = [
        summary(Method::NegGrad, 1, 30.0, 8.6, 1.0),
        summary(Method::RandLabel, 1, 30.0, 10.7, 1.0),
        summary(Method::BadT, 1, 30.0, 14.7, 1.0),
        summary(Method::Scrub, 1, 30.0, 10.8, 1.0),
        summary(Method::Salun, 1, 30.0, 11.5, 1.0),
    ];
    let table = Leaderboard::build(&runs).mia_table();
    let want = "| Method | Success Rate (%) (↓) |\n|---|---:|\n\
                | NegGrad | 8.6 |\n| RandLabel | 10.7 |\n| Bad-T | 14.7 |\n| SCRUB | 10.8 |\n| SalUn | 11.5 |\n";
    assert_eq!(table, want);
    assert!(Leaderboard::build(&runs).time_table().starts_with("| Method | Unlearning time (hrs) (↓) |"));
}

#[test]
fn exact_retrain_membership_is_near_chance_on_average() {
    let mut total = 0.0;
    for seed in 0..5 {
        let split = common::small_blobs(0.1, seed).with_deletion(10, seed).unwrap();
        let original = trained(&split, seed);
        let r = unlearn(&original, &split, &UnlearnConfig::for_method(Method::ExactRetrain)).unwrap();
        total += mia_success(&r.model, &split).unwrap().success.unwrap();
    }
    let mean = total / 5.0;
    assert!((40.0..=60.0).contains(&mean), "{mean}");
}

proptest! {
    #[test]
    fn capacity_shrinks_as_tolerance_tightens(
        drops in proptest::collection::vec(-1.0f64..8.0, 1..10),
        t1 in 0.0f64..6.0,
        t2 in 0.0f64..6.0,
    ) {
        let sweep: Vec<(u32, f64)> = drops.iter().enumerate().map(|(i, d)| (i as u32 + 1, 80.0 - d)).collect();
        let (tight, loose) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        prop_assert!(deletion_capacity(&sweep, 80.0, tight).unwrap() <= deletion_capacity(&sweep, 80.0, loose).unwrap());
    }
}
