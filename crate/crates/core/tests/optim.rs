mod common;

use common::{rand_tensor, rng};
use efnet_core::blocks::build_toy_model;
use efnet_core::optim::{
    categorical_cross_entropy, evaluate_loss, train, warmup_schedule, AdamConfig, AdamState, EarlyStopState, History,
    LossInput, PlateauSchedule, StopReason, TrainConfig,
};
use efnet_core::{Dataset, Error, ParamStore, Tensor};
use proptest::prelude::*;
use rand::Rng;

fn one_hot(classes: &[usize], k: usize) -> Tensor {
    let mut data = vec![0.0; classes.len() * k];
    for (i, &c) in classes.iter().enumerate() {
        data[i * k + c] = 1.0;
    }
    Tensor::new([classes.len(), k], data).unwrap()
}

#[test]
fn perfect_predictions_have_zero_loss() {
    let y = one_hot(&[0, 1, 1, 2], 3);
    let (loss, _) = categorical_cross_entropy(&LossInput::new(&y, &y).unwrap()).unwrap();
    assert_eq!(loss, 0.0);
    assert!(loss.is_sign_positive());
}

#[test]
fn uniform_binary_predictions_cost_ln_two() {
    let p = Tensor::full([5, 2], 0.5).unwrap();
    let y = one_hot(&[0, 1, 1, 0, 1], 2);
    let (loss, grad) = categorical_cross_entropy(&LossInput::new(&p, &y).unwrap()).unwrap();
    assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    assert!((grad.get(&[0, 0]).unwrap() + 1.0 / (5.0 * 0.5)).abs() < 1e-15);
    assert_eq!(grad.get(&[0, 1]).unwrap(), 0.0);
}

#[test]
fn loss_gradient_matches_central_differences() {
    let mut r = rng(31);
    let raw = rand_tensor(&[6, 3], &mut r).map(|v| v.abs() + 0.05);
    let y = one_hot(&[0, 2, 1, 1, 0, 2], 3);
    let loss_at = |p: &Tensor| categorical_cross_entropy(&LossInput::new(p, &y).unwrap()).unwrap().0;
    let (_, grad) = categorical_cross_entropy(&LossInput::new(&raw, &y).unwrap()).unwrap();
    let h = 1e-6;
    for i in 0..raw.len() {
        let mut plus = raw.clone();
        plus.data_mut()[i] += h;
        let mut minus = raw.clone();
        minus.data_mut()[i] -= h;
        let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
        let analytic = grad.data()[i];
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4);
        assert!(rel <= 1e-6, "entry {i}: {analytic} vs {numeric}");
    }
}

#[test]
fn loss_rejects_bad_inputs() {
    let p = Tensor::full([2, 2], 0.5).unwrap();
    let not_one_hot = Tensor::new([2, 2], vec![1.0, 1.0, 0.0, 1.0]).unwrap();
    assert!(matches!(LossInput::new(&p, &not_one_hot), Err(Error::InvalidLabels(_))));
    let wrong_shape = one_hot(&[0, 1, 1], 2);
    assert!(matches!(
        LossInput::new(&p, &wrong_shape),
        Err(Error::InvalidLossInput(_))
    ));
    let single_class = Tensor::ones([2, 1]).unwrap();
    assert!(LossInput::new(&Tensor::ones([2, 1]).unwrap(), &single_class).is_err());
}

#[test]
fn floor_keeps_zero_probability_finite() {
    let p = Tensor::new([1, 2], vec![0.0, 1.0]).unwrap();
    let y = one_hot(&[0], 2);
    let (loss, grad) = categorical_cross_entropy(&LossInput::new(&p, &y).unwrap()).unwrap();
    assert!((loss - 1e-12f64.ln().abs()).abs() < 1e-9);
    assert!(grad.data().iter().all(|g| g.is_finite()));
}

proptest! {
    #[test]
    fn loss_is_non_negative_and_zero_only_when_exact(rows in 1usize..6, k in 2usize..5, seed in any::<u64>()) {
        let mut r = rng(seed);
        let classes: Vec<usize> = (0..rows).map(|_| r.random_range(0..k)).collect();
        let y = one_hot(&classes, k);
        let logits = rand_tensor(&[rows, k], &mut r);
        let p = efnet_core::tensor::kernels::softmax(&logits).unwrap();
        let (loss, _) = categorical_cross_entropy(&LossInput::new(&p, &y).unwrap()).unwrap();
        prop_assert!(loss > 0.0);
        let (exact, _) = categorical_cross_entropy(&LossInput::new(&y, &y).unwrap()).unwrap();
        prop_assert_eq!(exact, 0.0);
    }
}

fn scalar_store(value: f64) -> (ParamStore, efnet_core::ParamId) {
    let mut params = ParamStore::new();
    let id = params.add("w", Tensor::new([1], vec![value]).unwrap(), true).unwrap();
    (params, id)
}

#[test]
fn adam_first_step_is_learning_rate_over_one_plus_epsilon() {
    let (mut params, id) = scalar_store(0.5);
    let mut adam = AdamState::new(&params, AdamConfig::default());
    params.get_mut(id).value.accumulate_grad(&[1.0]).unwrap();
    adam.step(&mut params).unwrap();
    let expected = 0.5 - 0.001 / (1.0 + 1e-7);
    assert!((params.value(id).data()[0] - expected).abs() < 1e-15);
    assert_eq!(adam.step_count(), 1);
    assert!((adam.first_moment(0).unwrap()[0] - 0.1).abs() < 1e-16);
    assert!((adam.second_moment(0).unwrap()[0] - 0.001).abs() < 1e-18);
}

#[test]
fn adam_matches_hand_recurrence_over_several_steps() {
    let grads = [0.3, -1.2, 0.7, 0.05, 2.0];
    let (mut params, id) = scalar_store(1.0);
    let cfg = AdamConfig {
        learning_rate: 0.01,
        ..Default::default()
    };
    let mut adam = AdamState::new(&params, cfg);
    let (mut theta, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
    for (t, g) in grads.iter().enumerate() {
        params.zero_grads();
        params.get_mut(id).value.accumulate_grad(&[*g]).unwrap();
        adam.step(&mut params).unwrap();
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        let mh = m / (1.0 - 0.9f64.powi(t as i32 + 1));
        let vh = v / (1.0 - 0.999f64.powi(t as i32 + 1));
        theta -= 0.01 * mh / (vh.sqrt() + 1e-7);
        assert!((params.value(id).data()[0] - theta).abs() < 1e-14);
    }
}

#[test]
fn adam_zero_gradient_is_a_fixed_point() {
    let mut r = rng(3);
    let mut params = ParamStore::new();
    let a = params.add("a", rand_tensor(&[3, 4], &mut r), true).unwrap();
    params.add("frozen", rand_tensor(&[2], &mut r), false).unwrap();
    let before = params.checksum();
    let mut adam = AdamState::new(&params, AdamConfig::default());
    for t in 1..=4 {
        params.zero_grads();
        params.get_mut(a).value.accumulate_grad(&[0.0; 12]).unwrap();
        adam.step(&mut params).unwrap();
        assert_eq!(adam.step_count(), t);
    }
    assert_eq!(params.checksum(), before);
}

#[test]
fn adam_first_step_direction_ignores_loss_scale() {
    let mut r = rng(4);
    let g: Vec<f64> = (0..10).map(|_| r.random_range(-1.0..1.0)).collect();
    let run = |c: f64| {
        let mut params = ParamStore::new();
        let id = params.add("w", Tensor::zeros([10]).unwrap(), true).unwrap();
        let mut adam = AdamState::new(&params, AdamConfig::default());
        let scaled: Vec<f64> = g.iter().map(|x| c * x).collect();
        params.get_mut(id).value.accumulate_grad(&scaled).unwrap();
        adam.step(&mut params).unwrap();
        params.value(id).data().to_vec()
    };
    let base = run(1.0);
    for c in [1e-3, 7.0, 1e4] {
        let other = run(c);
        for (a, b) in base.iter().zip(&other) {
            assert_eq!(a.signum(), b.signum());
        }
    }
}

#[test]
fn adam_requires_gradients_on_trainable_params() {
    let (mut params, _) = scalar_store(1.0);
    let mut adam = AdamState::new(&params, AdamConfig::default());
    assert!(matches!(adam.step(&mut params), Err(Error::MissingGradient(name)) if name == "w"));
    assert_eq!(adam.step_count(), 0);
}

proptest! {
    #[test]
    fn adam_second_moments_stay_non_negative(grads in proptest::collection::vec(-5.0f64..5.0, 1..20)) {
        let (mut params, id) = scalar_store(0.0);
        let mut adam = AdamState::new(&params, AdamConfig::default());
        for g in grads {
            params.zero_grads();
            params.get_mut(id).value.accumulate_grad(&[g]).unwrap();
            adam.step(&mut params).unwrap();
            prop_assert!(adam.second_moment(0).unwrap()[0] >= 0.0);
        }
    }
}

#[test]
fn three_plateau_reductions_reach_reported_final_rate() {
    let mut s = PlateauSchedule::default();
    s.update(1.0);
    for _ in 0..15 {
        s.update(1.0);
    }
    assert_eq!(s.reductions(), 3);
    assert!((s.current_lr() - 2.7e-5).abs() < 1e-18);
}

#[test]
fn improving_losses_never_reduce_the_rate() {
    let mut s = PlateauSchedule::default();
    for e in 0..100 {
        assert_eq!(s.update(1.0 / (e + 1) as f64), 1e-3);
    }
    assert_eq!(s.reductions(), 0);
}

#[test]
fn plateau_reduces_on_each_fifth_flat_epoch() {
    let mut s = PlateauSchedule::default();
    s.update(0.5);
    let lrs: Vec<f64> = (0..15).map(|_| s.update(0.5)).collect();
    let reduced_at: Vec<usize> = (0..15)
        .filter(|&i| lrs[i] < if i == 0 { 1e-3 } else { lrs[i - 1] })
        .collect();
    assert_eq!(reduced_at, [4, 9, 14]);
    assert_eq!(s.epochs_since_improvement(), 0);
    let mut s = PlateauSchedule::default();
    s.update(0.5);
    s.update(0.5 - 5e-9);
    assert_eq!(s.best(), Some(0.5));
}

proptest! {
    #[test]
    fn plateau_rates_are_powers_of_factor(losses in proptest::collection::vec(0.0f64..2.0, 1..80)) {
        let mut s = PlateauSchedule::default();
        let mut prev = s.current_lr();
        for l in losses {
            let lr = s.update(l);
            prop_assert!(lr <= prev);
            let r = s.reductions() as i32;
            prop_assert!((lr - 1e-3 * 0.3f64.powi(r)).abs() <= 1e-18);
            prev = lr;
        }
    }

    #[test]
    fn early_stop_waits_for_patience(losses in proptest::collection::vec(0.0f64..2.0, 1..80)) {
        let mut s = EarlyStopState::default();
        for (i, l) in losses.iter().enumerate() {
            if s.update(*l) {
                prop_assert!(i >= 20);
                prop_assert_eq!(s.epochs_since_improvement(), 20);
                break;
            }
        }
    }
}

#[test]
fn warmup_ramp_values() {
    assert_eq!(warmup_schedule(1e-3, 0, 0), 1e-3);
    assert_eq!(warmup_schedule(1e-3, 5, 5), 1e-3);
    assert!((warmup_schedule(1e-3, 5, 2) - 6e-4).abs() < 1e-18);
    assert!((warmup_schedule(1e-3, 5, 0) - 2e-4).abs() < 1e-18);
    assert_eq!(warmup_schedule(1e-3, 5, 40), 1e-3);
}

#[test]
fn early_stop_semantics() {
    let mut s = EarlyStopState::default();
    assert!((0..500).all(|e| !s.update(10.0 - e as f64 * 0.01)));

    let mut s = EarlyStopState::default();
    let stop_epoch = (1..).find(|_| s.update(0.7)).unwrap();
    assert_eq!(stop_epoch, 21);
    assert_eq!(s.epochs_since_improvement(), 20);

    let mut s = EarlyStopState::default();
    s.update(1.0);
    for _ in 0..18 {
        assert!(!s.update(1.0));
    }
    assert!(!s.update(0.5));
    assert_eq!(s.epochs_since_improvement(), 0);
    for _ in 0..19 {
        assert!(!s.update(0.9));
    }
    assert!(s.update(0.9));
}

fn toy_split(n: usize, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let side = 8;
    let mut images = Vec::with_capacity(n * side * side * 3);
    let mut classes = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % 2;
        classes.push(class);
        for y in 0..side {
            for x in 0..side {
                let centre = (2..6).contains(&y) && (2..6).contains(&x);
                let base = if class == 0 && centre { 0.9 } else { 0.2 };
                for _ in 0..3 {
                    images.push(base + r.random_range(-0.1..0.1));
                }
            }
        }
    }
    Dataset::new(Tensor::new([n, side, side, 3], images).unwrap(), one_hot(&classes, 2)).unwrap()
}

fn quick_config() -> TrainConfig {
    TrainConfig {
        batch_size: 12,
        max_epochs: 8,
        seed: 9,
        ..Default::default()
    }
}

#[test]
fn training_is_deterministic_and_consistent_with_plateau() {
    let (tr, va) = (toy_split(30, 1), toy_split(10, 2));
    let run = || {
        let mut model = build_toy_model("xception_sep", 1, 4, 2, 3).unwrap();
        let out = train(&mut model, &tr, &va, &quick_config()).unwrap();
        (out, model.params().checksum())
    };
    let (a, ca) = run();
    let (b, cb) = run();
    assert_eq!(a.history.to_csv(), b.history.to_csv());
    assert_eq!(ca, cb);
    assert_eq!(a.history.len(), 8);
    assert_eq!(a.stop, StopReason::MaxEpochs);

    let mut replay = PlateauSchedule::default();
    for w in a.history.records.windows(2) {
        assert_eq!(w[1].lr, replay.update(w[0].val_loss));
    }
    assert_eq!(a.history.records[0].lr, 1e-3);
}

#[test]
fn training_restores_best_validation_weights() {
    let (tr, va) = (toy_split(30, 3), toy_split(10, 4));
    let mut model = build_toy_model("resnetv2_preact", 1, 4, 2, 1).unwrap();
    let out = train(&mut model, &tr, &va, &quick_config()).unwrap();
    let best = out
        .history
        .records
        .iter()
        .map(|r| r.val_loss)
        .fold(f64::INFINITY, f64::min);
    assert_eq!(out.best_val_loss, best);
    assert_eq!(out.history.records[out.best_epoch].val_loss, best);
    let (val_loss, _) = evaluate_loss(&model, &va).unwrap();
    assert!((val_loss - best).abs() < 1e-12);
}

#[test]
fn partial_batches_and_target_accuracy_stop() {
    let (tr, va) = (toy_split(13, 5), toy_split(6, 6));
    let mut model = build_toy_model("mobilenet_inverted_residual", 1, 4, 2, 2).unwrap();
    let cfg = TrainConfig {
        batch_size: 5,
        max_epochs: 60,
        target_train_accuracy: Some(0.0),
        ..quick_config()
    };
    let out = train(&mut model, &tr, &va, &cfg).unwrap();
    assert_eq!(out.stop, StopReason::TargetAccuracy);
    assert_eq!(out.history.len(), 1);
    let acc = out.history.records[0].train_acc * 13.0;
    assert!((acc - acc.round()).abs() < 1e-9);
}

#[test]
fn early_stopping_ends_a_flat_run() {
    let (tr, va) = (toy_split(8, 7), toy_split(4, 8));
    let mut model = build_toy_model("densenet_dense", 1, 4, 2, 2).unwrap();
    let adam = AdamConfig {
        learning_rate: 0.0,
        ..Default::default()
    };
    let cfg = TrainConfig {
        batch_size: 8,
        max_epochs: 100,
        adam,
        flip_probability: 0.0,
        ..quick_config()
    };
    let out = train(&mut model, &tr, &va, &cfg).unwrap();
    assert_eq!(out.stop, StopReason::EarlyStop);
    assert!(out.history.len() <= 21);
}

#[test]
fn divergence_is_reported() {
    let (tr, va) = (toy_split(8, 9), toy_split(4, 10));
    let mut model = build_toy_model("xception_sep", 1, 4, 2, 0).unwrap();
    let adam = AdamConfig {
        learning_rate: 1e300,
        ..Default::default()
    };
    let cfg = TrainConfig {
        batch_size: 4,
        adam,
        ..quick_config()
    };
    match train(&mut model, &tr, &va, &cfg) {
        Err(Error::Diverged { epoch, .. }) => assert_eq!(epoch, 0),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn history_csv_round_trips() {
    let (tr, va) = (toy_split(10, 11), toy_split(4, 12));
    let mut model = build_toy_model("inception_resnet_hybrid", 1, 4, 2, 0).unwrap();
    let out = train(
        &mut model,
        &tr,
        &va,
        &TrainConfig {
            max_epochs: 3,
            ..quick_config()
        },
    )
    .unwrap();
    let csv = out.history.to_csv();
    assert!(csv.starts_with("epoch,train_loss,val_loss,train_acc,val_acc,lr\n"));
    assert_eq!(History::from_csv(&csv).unwrap(), out.history);
}
