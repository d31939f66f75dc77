mod common;

use chanpred::netsim::{observe, simulate, Mobility, SimConfig};
use chanpred::nn::{finite_difference, fit, max_relative_error, Matrix, TrainOptions};
use chanpred::occupancy::{
    bin_output, brute_force_period, calculate_period, permute_channels, score_occupancy,
    static_samples, train_occupancy_model, OccupancyModel, OccupancyObjective, OccupancySample,
    OccupancyTraining,
};
use chanpred::Error;
use common::{line_network, matching_model, node, on_channels};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn static_co(nodes: Vec<chanpred::netsim::NodeState>, start: u64, slots: usize) -> Vec<Vec<bool>> {
    let cfg = SimConfig::default();
    let mut net = line_network(nodes);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let hist = simulate(&mut net, Mobility::Static, &cfg, start, slots, &mut rng);
    observe(&hist, 0, &cfg).co
}

#[test]
fn superposed_cycle_is_continued() {
    // Two interferers with period 3 around the observer.
    let co = static_co(
        vec![
            node(0, 0.0, &[0, 0, 0]),
            node(1, 400.0, &[1, 3, 2]),
            node(2, -700.0, &[2, 1, 4]),
        ],
        5,
        18,
    );
    let m = matching_model(12, 6);
    let p = m.predict_bits(&co[..12]).unwrap();
    assert_eq!(p.estimate.period, 3);
    assert_eq!(p.bits, co[12..18].to_vec());
    assert_eq!(on_channels(&p.bits[0]), on_channels(&co[9]));
}

#[test]
fn mixed_periods_use_their_common_multiple() {
    let co = static_co(
        vec![
            node(0, 0.0, &[0]),
            node(1, 300.0, &[1, 2]),
            node(2, 600.0, &[3, 4, 5]),
        ],
        0,
        24,
    );
    assert_eq!(brute_force_period(&co[..12]), Some(6));
    let m = matching_model(12, 12);
    let p = m.predict_bits(&co[..12]).unwrap();
    assert_eq!(p.estimate.period, 6);
    assert_eq!(p.bits, co[12..24].to_vec());
}

#[test]
fn silent_window_predicts_silence() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let m = OccupancyModel::new(16, 40, 40, &mut rng);
    let p = m.predict(&Matrix::zeros(40, 16)).unwrap();
    assert_eq!(p.estimate.period, 1);
    assert!(p.bits.iter().flatten().all(|b| !b));
    assert_eq!(p.bits.len(), 40);
}

#[test]
fn identity_attention_has_no_period() {
    // Huge query/key scale on one-hot rows: each row only matches itself.
    let mut m = matching_model(8, 4);
    m.params.w_q[0].scale(100.0);
    let x: Vec<Vec<bool>> = (0..8).map(|t| (0..16).map(|c| c == t).collect()).collect();
    assert!(matches!(m.predict_bits(&x), Err(Error::NoPeriod)));
}

#[test]
fn wrong_channel_count_is_rejected() {
    let m = matching_model(12, 6);
    assert!(matches!(
        m.predict(&Matrix::zeros(12, 8)),
        Err(Error::Shape { .. })
    ));
}

fn random_instance(seed: u64) -> (OccupancyModel, OccupancySample) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = SimConfig {
        channels: 6,
        nodes: 40,
        ..SimConfig::default()
    };
    let mut s = static_samples(&base, &[3], 1, 9, 4, &mut rng)
        .unwrap()
        .remove(0);
    // Dense random bits so every gradient entry is exercised.
    s.x = Matrix::random_uniform(9, 6, 1.0, &mut rng).map(|v| if v > 0.0 { 1.0 } else { 0.0 });
    let m = OccupancyModel::new(6, 9, 4, &mut rng);
    (m, s)
}

#[test]
fn gradients_match_finite_differences() {
    for seed in 0..10 {
        let (mut m, s) = random_instance(seed);
        let (_, analytic) = m.loss_and_grads(&s, 1.0);
        let mut obj = OccupancyObjective {
            model: &mut m,
            align_weight: 1.0,
        };
        let numeric = finite_difference(&mut obj, 1e-5, |o| o.model.loss_and_grads(&s, 1.0).0);
        let err = max_relative_error(&analytic, &numeric, 1e-6);
        assert!(err < 1e-4, "seed {seed}: relative error {err}");
    }
}

#[test]
fn one_step_lowers_the_loss() {
    let (mut m, s) = random_instance(11);
    let before = m.loss_and_grads(&s, 1.0).0;
    let mut obj = OccupancyObjective {
        model: &mut m,
        align_weight: 1.0,
    };
    let opts = TrainOptions {
        epochs: 1,
        batch_size: 1,
        learning_rate: 1e-3,
        seed: 0,
    };
    fit(&mut obj, std::slice::from_ref(&s), &opts).unwrap();
    assert!(m.loss_and_grads(&s, 1.0).0 < before);
}

#[test]
fn small_training_run_continues_static_windows() {
    let base = SimConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut train = static_samples(&base, &[4, 5], 40, 20, 10, &mut rng).unwrap();
    // Relabeled copies so that every channel shows up in training.
    train.extend(permute_channels(&train, 3, &mut rng));
    let test = static_samples(&base, &[3, 6], 40, 20, 10, &mut rng).unwrap();
    let opts = OccupancyTraining::default();
    let (m, log) = train_occupancy_model(&train, &opts).unwrap();
    assert!(log.last().unwrap() < log.first().unwrap());
    let score = score_occupancy(&m, &test).unwrap();
    assert!(score.accuracy() > 0.97, "accuracy {}", score.accuracy());
}

#[test]
fn zero_epochs_keep_initialization() {
    let base = SimConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let train = static_samples(&base, &[4], 4, 12, 4, &mut rng).unwrap();
    let opts = OccupancyTraining {
        epochs: 0,
        seed: 9,
        ..OccupancyTraining::default()
    };
    let (m, log) = train_occupancy_model(&train, &opts).unwrap();
    assert!(log.is_empty());
    let fresh = OccupancyModel::new(16, 12, 4, &mut ChaCha8Rng::seed_from_u64(9));
    assert_eq!(m, fresh);
}

#[test]
fn checkpoint_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut m = OccupancyModel::new(16, 40, 40, &mut rng);
    m.high_weight_threshold = 0.25;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m1.ckpt");
    m.save(&path).unwrap();
    assert_eq!(OccupancyModel::load(&path).unwrap(), m);
}

#[test]
fn period_read_out_of_exact_repeats() {
    // Uniform attention over identical earlier rows, period 5.
    let n = 20;
    let mut w = Matrix::zeros(n, n);
    for r in 0..n {
        let cols: Vec<usize> = (0..=r).filter(|c| (r - c) % 5 == 0).collect();
        for &c in &cols {
            w[(r, c)] = 1.0 / cols.len() as f64;
        }
    }
    assert_eq!(calculate_period(&w, 0.3).unwrap().period, 5);
}

proptest! {
    #[test]
    fn bin_output_is_idempotent(data in prop::collection::vec(-3.0f64..3.0, 1..60)) {
        let m = Matrix::from_vec(1, data.len(), data).unwrap();
        let once = bin_output(&m);
        prop_assert_eq!(bin_output(&once), once.clone());
        prop_assert!(once.data().iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn matching_model_continues_any_static_cycle(
        seqs in prop::collection::vec(prop::collection::vec(1usize..16, 4), 1..4),
        start in 0u64..1000,
    ) {
        let mut nodes = vec![node(0, 0.0, &[0])];
        for (i, s) in seqs.iter().enumerate() {
            nodes.push(node(i + 1, 200.0 * (i + 1) as f64, s));
        }
        let co = static_co(nodes, start, 20);
        let m = matching_model(12, 8);
        // Rows of a cycle may coincide; then the model may lock onto a
        // shorter true period, which still continues the pattern.
        if let Ok(p) = m.predict_bits(&co[..12]) {
            let est = p.estimate.period;
            if (0..12 - est).all(|r| co[r] == co[r + est]) {
                prop_assert_eq!(p.bits, co[12..20].to_vec());
            }
        }
    }
}
