use num_complex::Complex64;
use proptest::prelude::*;

use canonlab::disparity::canonical_gradient;
use canonlab::canonical::canonical_loss;
use canonlab::fourier::{CanonicalCoeffs, FrequencyIndexSet};
use canonlab::nn::{Activation, Architecture, MlpNetwork, Model, TrainingSet, TrigFeatureNet};

fn activation() -> impl Strategy<Value = Activation> {
    prop_oneof![Just(Activation::Relu), Just(Activation::Tanh), Just(Activation::Sigmoid)]
}

fn network() -> impl Strategy<Value = MlpNetwork> {
    (1usize..=3, prop::collection::vec(1usize..=6, 1..=3), activation())
        .prop_flat_map(|(k, hidden, act)| {
            let arch = Architecture::new(k, hidden, act).unwrap();
            let m = arch.num_weights();
            (Just(arch), prop::collection::vec(-1.5f64..1.5, m))
        })
        .prop_map(|(arch, w)| MlpNetwork::new(arch, w).unwrap())
}

fn point(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..=1.0, k)
}

fn central_difference(net: &MlpNetwork, x: &[f64], m: usize, h: f64) -> f64 {
    let mut p = net.weights().to_vec();
    let mut q = p.clone();
    p[m] += h;
    q[m] -= h;
    (net.with_weights(p).unwrap().forward(x).unwrap() - net.with_weights(q).unwrap().forward(x).unwrap()) / (2.0 * h)
}

fn near_kink(net: &MlpNetwork, x: &[f64]) -> bool {
    net.activation() == Activation::Relu && net.trace(x).unwrap().pre.iter().flatten().any(|z| z.abs() < 1e-4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn weight_gradient_matches_finite_differences((net, x) in network().prop_flat_map(|n| {
        let k = n.architecture().input_dim;
        (Just(n), point(k))
    })) {
        prop_assume!(!near_kink(&net, &x));
        let g = net.grad_weights(&x).unwrap();
        for m in 0..g.len() {
            let fd = central_difference(&net, &x, m, 1e-6);
            let err = (g[m] - fd).abs() / g[m].abs().max(fd.abs()).max(1.0);
            prop_assert!(err <= 1e-5, "coordinate {m}: {} vs {fd}", g[m]);
        }
    }

    #[test]
    fn loss_gradient_matches_finite_differences(
        (net, xs, ys) in network().prop_flat_map(|n| {
            let k = n.architecture().input_dim;
            (Just(n), prop::collection::vec(point(k), 1..=5), prop::collection::vec(-1.0f64..1.0, 5))
        })
    ) {
        let mut xs = xs;
        xs.dedup();
        prop_assume!(xs.iter().all(|x| !near_kink(&net, x)));
        let t = xs.len();
        let data = match TrainingSet::new(xs, ys[..t].to_vec()) {
            Ok(d) => d,
            Err(_) => return Ok(()),
        };
        let (_, g) = net.loss_and_grad(&data).unwrap();
        let h = 1e-6;
        for m in 0..g.len() {
            let mut p = net.weights().to_vec();
            let mut q = p.clone();
            p[m] += h;
            q[m] -= h;
            let fd = (net.with_weights(p).unwrap().loss(&data).unwrap() - net.with_weights(q).unwrap().loss(&data).unwrap()) / (2.0 * h);
            prop_assert!((g[m] - fd).abs() <= 1e-5 * g[m].abs().max(fd.abs()).max(1.0), "coordinate {m}: {} vs {fd}", g[m]);
        }
    }
}

#[test]
fn tanh_1_8_1_per_coordinate_step_1e_5() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
    let arch = Architecture::new(1, vec![8], Activation::Tanh).unwrap();
    for _ in 0..20 {
        let w: Vec<f64> = (0..arch.num_weights()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let net = MlpNetwork::new(arch.clone(), w).unwrap();
        let x = [rng.random::<f64>()];
        let g = net.grad_weights(&x).unwrap();
        for m in 0..g.len() {
            let fd = central_difference(&net, &x, m, 1e-5);
            assert!((g[m] - fd).abs() <= 1e-6 * g[m].abs().max(fd.abs()).max(1.0), "{m}: {} vs {fd}", g[m]);
        }
    }
}

#[test]
fn trig_feature_gradient_matches_finite_differences() {
    let net = TrigFeatureNet::new(2, vec![vec![1, 0], vec![2, -1]], vec![0.3, -0.7, 0.2, 0.5, 0.1]).unwrap();
    let x = [0.37, 0.81];
    let (_, g) = net.value_and_grad(&x).unwrap();
    for m in 0..g.len() {
        let mut p = net.weights().to_vec();
        let mut q = p.clone();
        p[m] += 1e-6;
        q[m] -= 1e-6;
        let fp = TrigFeatureNet::new(2, vec![vec![1, 0], vec![2, -1]], p).unwrap().forward(&x).unwrap();
        let fm = TrigFeatureNet::new(2, vec![vec![1, 0], vec![2, -1]], q).unwrap().forward(&x).unwrap();
        assert!((g[m] - (fp - fm) / 2e-6).abs() < 1e-8);
    }
}

/// In real-stacked coordinates `theta_k = a_k + i b_k`, the canonical
/// gradient satisfies `dQ/da_k = Re g_k` and `dQ/db_k = -Im g_k`.
#[test]
fn canonical_gradient_matches_real_stacked_finite_differences() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(255);
    for _ in 0..10 {
        let idx = FrequencyIndexSet::new(vec![rng.random_range(1..=3), rng.random_range(0..=2)]).unwrap();
        let values: Vec<Complex64> = (0..idx.len())
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let theta = CanonicalCoeffs::new(idx.clone(), values.clone()).unwrap();
        let xs: Vec<Vec<f64>> = (0..4).map(|_| vec![rng.random(), rng.random()]).collect();
        let ys: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let data = TrainingSet::new(xs, ys).unwrap();
        let g = canonical_gradient(&theta, &data).unwrap();
        let h = 1e-6;
        let loss_at = |v: Vec<Complex64>| canonical_loss(&CanonicalCoeffs::new(idx.clone(), v).unwrap(), &data).unwrap();
        for k in 0..idx.len() {
            for (dir, want) in [(Complex64::new(h, 0.0), g[k].re), (Complex64::new(0.0, h), -g[k].im)] {
                let mut p = values.clone();
                let mut q = values.clone();
                p[k] += dir;
                q[k] -= dir;
                let fd = (loss_at(p) - loss_at(q)) / (2.0 * h);
                assert!((fd - want).abs() <= 1e-6 * fd.abs().max(want.abs()).max(1.0), "k={k}: {fd} vs {want}");
            }
        }
    }
}
