use canonlab::experiments::{gen_synthetic_dataset, DataKind};
use canonlab::fourier::{FrequencyIndexSet, QuadratureGrid};
use canonlab::nn::{detect_dead_neurons, detect_duplicated_neurons, probe_grid, Activation, Architecture, Model, MlpNetwork, NeuronId, TrainingSet};
use canonlab::trainer::{
    all_hidden_neurons, init_random, make_degenerate, sgd_train, Degeneration, InitKind, InitScheme, RankMonitor, TrainSchedule,
};

fn four_points() -> TrainingSet {
    gen_synthetic_dataset(DataKind::PlantedFourier, 4, 1, 1, 1).unwrap()
}

fn monitor(n: usize, cadence: usize) -> RankMonitor {
    let idx = FrequencyIndexSet::new(vec![n]).unwrap();
    RankMonitor {
        cadence,
        grid: QuadratureGrid::default_for(&idx),
        index_set: idx,
        rank_rel_tol: 1e-10,
    }
}

fn full_batch(epochs: usize, lr0: f64, samples: usize) -> TrainSchedule {
    TrainSchedule {
        epochs,
        minibatch_size: samples,
        lr0,
        decay: 0.0,
        seed: 0,
    }
}

fn center_cutting(scale: f64) -> InitScheme {
    InitScheme {
        kind: InitKind::CenterCutting,
        scale,
        center_jitter: 0.3,
    }
}

#[test]
fn over_parameterized_tanh_converges_with_full_rank() {
    let data = four_points();
    let arch = Architecture::new(1, vec![32], Activation::Tanh).unwrap();
    assert_eq!(arch.num_weights(), 97);
    let net = init_random(&arch, &center_cutting(1.0), 20).unwrap();
    let out = sgd_train(&net, &data, &full_batch(5000, 0.05, 4), Some(&monitor(4, 50))).unwrap();
    let last = out.trace.last().unwrap();
    assert!(last.full_loss <= 1e-6, "final loss {}", last.full_loss);
    assert!(out.trace.monitored().count() >= 100);
    assert!(out.trace.monitored().all(|r| r.rank == Some(9)));
}

#[test]
fn full_rank_and_vanishing_gradient_imply_small_loss() {
    let data = four_points();
    let net = init_random(&Architecture::new(1, vec![16], Activation::Tanh).unwrap(), &center_cutting(3.0), 20).unwrap();
    let out = sgd_train(&net, &data, &full_batch(5000, 0.05, 4), Some(&monitor(4, 50))).unwrap();
    let last = out.trace.last().unwrap();
    if out.trace.monitored().all(|r| r.rank == Some(9)) && last.grad_norm_literal < 1e-8 {
        assert!(last.full_loss < 1e-6);
    } else {
        panic!("run did not reach full rank with a vanishing gradient");
    }
}

#[test]
fn all_dead_network_plateaus_at_the_best_constant() {
    let data = four_points();
    let net = init_random(&Architecture::new(1, vec![16], Activation::Relu).unwrap(), &InitScheme::center_cutting(), 4).unwrap();
    let dead = make_degenerate(&net, &Degeneration::KillNeurons(all_hidden_neurons(&net))).unwrap();
    let out = sgd_train(&dead, &data, &full_batch(300, 0.05, 4), Some(&monitor(4, 25))).unwrap();
    let mean = data.targets().iter().sum::<f64>() / 4.0;
    let best_constant: f64 = data.targets().iter().map(|y| (y - mean).powi(2)).sum();
    let last = out.trace.last().unwrap();
    assert!((last.full_loss - best_constant).abs() < 1e-12);
    assert!(last.grad_norm_literal < 1e-12);
    assert!(out.trace.monitored().all(|r| r.rank.unwrap() < 9));
}

#[test]
fn killed_units_get_exactly_zero_incoming_gradient() {
    let data = four_points();
    let net = init_random(&Architecture::new(1, vec![6, 5], Activation::Relu).unwrap(), &InitScheme::center_cutting(), 8).unwrap();
    let killed = [NeuronId::new(0, 2), NeuronId::new(1, 4)];
    let mut cur = make_degenerate(&net, &Degeneration::KillNeurons(killed.to_vec())).unwrap();
    for _ in 0..20 {
        let (_, g) = cur.loss_and_grad(&data).unwrap();
        for id in killed {
            for c in 0..cur.layer_fan_in(id.layer) {
                assert_eq!(g[cur.weight_index(id.layer, id.unit, c)], 0.0);
            }
            assert_eq!(g[cur.bias_index(id.layer, id.unit)], 0.0);
        }
        cur = sgd_train(&cur, &data, &full_batch(1, 0.02, 4), None).unwrap().net;
    }
    let dead = detect_dead_neurons(&cur, &probe_grid(1, 101)).unwrap();
    assert!(killed.iter().all(|k| dead.contains(k)));
}

fn max_pair_gap(net: &MlpNetwork, a: NeuronId, b: NeuronId) -> f64 {
    let w = net.weights();
    let l = a.layer;
    let mut gap = (w[net.bias_index(l, a.unit)] - w[net.bias_index(l, b.unit)]).abs();
    for c in 0..net.layer_fan_in(l) {
        gap = gap.max((w[net.weight_index(l, a.unit, c)] - w[net.weight_index(l, b.unit, c)]).abs());
    }
    for r in 0..net.layer_fan_out(l + 1) {
        gap = gap.max((w[net.weight_index(l + 1, r, a.unit)] - w[net.weight_index(l + 1, r, b.unit)]).abs());
    }
    gap
}

#[test]
fn duplicates_stay_duplicated() {
    let data = four_points();
    let (src, dst) = (NeuronId::new(0, 1), NeuronId::new(0, 3));
    for act in [Activation::Tanh, Activation::Sigmoid, Activation::Relu] {
        let net = init_random(&Architecture::new(1, vec![5], act).unwrap(), &center_cutting(1.0), 2).unwrap();
        let dup = make_degenerate(&net, &Degeneration::DuplicateNeuron { src, dst }).unwrap();
        let one = sgd_train(&dup, &data, &full_batch(1, 0.05, 4), None).unwrap().net;
        assert!(max_pair_gap(&one, src, dst) <= 1e-12);
        let hundred = sgd_train(&dup, &data, &full_batch(100, 0.05, 4), None).unwrap().net;
        assert!(max_pair_gap(&hundred, src, dst) <= 1e-10);
        assert!(detect_duplicated_neurons(&hundred, 1e-10).unwrap().contains(&(src, dst)));
    }
}

#[test]
fn identical_inputs_give_bit_identical_traces() {
    let data = gen_synthetic_dataset(DataKind::RandomLabels, 6, 2, 5, 0).unwrap();
    let net = init_random(&Architecture::new(2, vec![10], Activation::Tanh).unwrap(), &InitScheme::center_cutting(), 3).unwrap();
    let idx = FrequencyIndexSet::new(vec![2, 2]).unwrap();
    let mon = RankMonitor {
        cadence: 7,
        grid: QuadratureGrid::default_for(&idx),
        index_set: idx,
        rank_rel_tol: 1e-10,
    };
    let sched = TrainSchedule {
        epochs: 30,
        minibatch_size: 4,
        lr0: 0.05,
        decay: 0.01,
        seed: 11,
    };
    let a = sgd_train(&net, &data, &sched, Some(&mon)).unwrap();
    let b = sgd_train(&net, &data, &sched, Some(&mon)).unwrap();
    assert_eq!(a.trace.to_csv_string(), b.trace.to_csv_string());
    assert_eq!(a.net, b.net);
    let c = sgd_train(&net, &data, &TrainSchedule { seed: 12, ..sched }, Some(&mon)).unwrap();
    assert_ne!(a.trace.to_csv_string(), c.trace.to_csv_string());
}

#[test]
fn trace_shape() {
    let data = gen_synthetic_dataset(DataKind::RandomLabels, 5, 1, 2, 0).unwrap();
    let net = init_random(&Architecture::new(1, vec![8], Activation::Sigmoid).unwrap(), &InitScheme::center_cutting(), 1).unwrap();
    let sched = TrainSchedule {
        epochs: 4,
        minibatch_size: 2,
        lr0: 0.01,
        decay: 0.0,
        seed: 0,
    };
    let out = sgd_train(&net, &data, &sched, Some(&monitor(3, 5))).unwrap();
    // 3 minibatches per epoch (2 + 2 + 1) and a final row
    assert_eq!(out.trace.rows.len(), 13);
    assert!(out.trace.rows.windows(2).all(|w| w[1].step == w[0].step + 1));
    let monitored: Vec<usize> = out.trace.monitored().map(|r| r.step).collect();
    assert_eq!(monitored, vec![0, 5, 10, 12]);
    assert!(out.trace.last().unwrap().minibatch_loss.is_none());
    assert_eq!(out.trace.rows[3].epoch, 2);
}

#[test]
fn monitoring_requires_enough_coefficients() {
    let data = gen_synthetic_dataset(DataKind::RandomLabels, 5, 1, 2, 0).unwrap();
    let net = init_random(&Architecture::new(1, vec![8], Activation::Tanh).unwrap(), &InitScheme::center_cutting(), 1).unwrap();
    let err = sgd_train(&net, &data, &full_batch(1, 0.01, 5), Some(&monitor(1, 1))).unwrap_err();
    assert!(matches!(err.error, canonlab::Error::Underdetermined { n: 3, t: 5 }));
}

/// With zero biases on a 1-D input, a first-layer ReLU unit is dead on
/// [0, 1] exactly when its weight is negative.
#[test]
fn uniform_fan_in_relu_dead_count_baseline() {
    let arch = Architecture::new(1, vec![32], Activation::Relu).unwrap();
    let probe = probe_grid(1, 65);
    let mut counts = Vec::new();
    for seed in 0..100 {
        let net = init_random(&arch, &InitScheme::uniform_fan_in(), seed).unwrap();
        let dead = detect_dead_neurons(&net, &probe).unwrap();
        let negative = (0..32).filter(|&u| net.weights()[net.weight_index(0, u, 0)] < 0.0).count();
        assert_eq!(dead.len(), negative);
        counts.push(dead.len());
    }
    let mean = counts.iter().sum::<usize>() as f64 / 100.0;
    println!("uniform_fan_in 1-32-1 relu dead units over 100 seeds: mean {mean}, min {:?}, max {:?}", counts.iter().min(), counts.iter().max());
    // Binomial(32, 1/2): mean 16, standard error of the mean 0.28
    assert!((mean - 16.0).abs() < 1.5);
}
