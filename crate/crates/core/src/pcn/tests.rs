use super::*;
use crate::data::Dataset;
use crate::fnn::{bp_gradients, forward, Optimizer};
use crate::numerics::counter::measure;
use crate::numerics::{finite_diff_gradient, Activation, GradCheck};

fn random_topology(rng: &mut Rng, direction: Direction, smooth: bool) -> Topology {
    let l = 1 + rng.below(4);
    let widths = (0..=l).map(|_| 1 + rng.below(6)).collect();
    let kinds: &[Activation] = if smooth {
        &[Activation::Linear, Activation::Tanh, Activation::Sigmoid]
    } else {
        &Activation::ALL
    };
    let acts = (0..l).map(|_| kinds[rng.below(kinds.len())]).collect();
    Topology::new(widths, acts, direction).unwrap()
}

fn random_vec(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect()
}

/// Discriminative net with input and label clamped and hidden layers set to
/// random values, predictions refreshed.
fn perturbed_state(pcn: &Pcn, rng: &mut Rng) -> NetState {
    let mut s = pcn.zero_state();
    for l in 0..=pcn.depth() {
        let v = random_vec(rng, pcn.topology.width(l));
        if l == 0 || l == pcn.depth() {
            s.clamp(l, &v).unwrap();
        } else {
            s.activations[l] = Vector::from(v);
        }
    }
    pcn.predictions(&mut s).unwrap();
    s
}

#[test]
fn zero_weights_predict_zero() {
    let t = Topology::uniform(vec![2, 3, 2], Activation::Linear, Direction::Discriminative).unwrap();
    let pcn = Pcn::new(t.clone(), Params::zeros(&t)).unwrap();
    let mut s = pcn.zero_state();
    s.activations[1] = Vector::from(vec![1.0, -2.0, 3.0]);
    s.activations[2] = Vector::from(vec![0.5, 0.25]);
    pcn.predictions(&mut s).unwrap();
    for l in 1..=2 {
        assert!(s.predictions[l].iter().all(|&m| m == 0.0));
        assert!(s.errors[l].bitwise_eq(&s.activations[l]));
    }
}

#[test]
fn errors_match_subtraction_oracle() {
    let mut rng = Rng::new(21);
    let pcn = Pcn::init(random_topology(&mut rng, Direction::Generative, false), &mut rng, 0.7);
    let mut s = pcn.zero_state();
    for a in s.activations.iter_mut() {
        let v = random_vec(&mut rng, a.len());
        a.copy_from_slice(&v);
    }
    pcn.predictions(&mut s).unwrap();
    for k in 0..pcn.depth() {
        let (src, tgt) = pcn.topology.transition(k);
        let w = &pcn.params.weights[k];
        for i in 0..w.rows() {
            let mut z = 0.0;
            for j in 0..s.activations[src].len() {
                z += w[(i, j)] * s.activations[src][j];
            }
            z += w[(i, w.cols() - 1)];
            let e = s.activations[tgt][i] - pcn.topology.activation(k).apply(z);
            assert_eq!(e, s.errors[tgt][i]);
        }
    }
}

#[test]
fn feedforward_init_matches_fnn_and_zeroes_errors() {
    let mut rng = Rng::new(5);
    for _ in 0..20 {
        let pcn = Pcn::init(random_topology(&mut rng, Direction::Discriminative, false), &mut rng, 1.0);
        let x = random_vec(&mut rng, pcn.topology.width(0));
        let mut s = pcn.zero_state();
        s.clamp(0, &x).unwrap();
        pcn.feedforward_init(&mut s).unwrap();
        let ws = forward(&pcn.params, &pcn.topology, &x).unwrap();
        for l in 0..=pcn.depth() {
            assert!(s.activations[l].bitwise_eq(&ws.activations[l]));
        }
        assert_eq!(pcn.energy(&s).total, 0.0);
        assert!(pcn.test_discriminative(&x).unwrap().bitwise_eq(ws.output()));
    }
}

#[test]
fn clamped_output_energy_is_output_loss_only() {
    let mut rng = Rng::new(6);
    let t = Topology::uniform(vec![3, 4, 2], Activation::Tanh, Direction::Discriminative).unwrap();
    let pcn = Pcn::init(t, &mut rng, 0.5);
    let x = random_vec(&mut rng, 3);
    let y = random_vec(&mut rng, 2);
    let mut s = pcn.zero_state();
    s.clamp(0, &x).unwrap();
    s.clamp(2, &y).unwrap();
    pcn.feedforward_init(&mut s).unwrap();
    let e = pcn.energy(&s);
    let y_hat = pcn.test_discriminative(&x).unwrap();
    let expect = 0.5 * ((y[0] - y_hat[0]).powi(2) + (y[1] - y_hat[1]).powi(2));
    assert!((e.total - expect).abs() < 1e-15);
    assert_eq!(e.residual, 0.0);
    assert_eq!(e.output_loss, e.total);
}

#[test]
fn precision_scaling_is_exact() {
    let mut rng = Rng::new(7);
    let pcn = Pcn::init(random_topology(&mut rng, Direction::Discriminative, false), &mut rng, 0.8);
    let s = perturbed_state(&pcn, &mut rng);
    let base = pcn.energy(&s).total;
    let mut ones = PrecisionSet::identity(&pcn.topology);
    let mut twos = PrecisionSet::identity(&pcn.topology);
    for l in 1..=pcn.depth() {
        ones.set(l, Vector::filled(pcn.topology.width(l), 1.0)).unwrap();
        twos.set(l, Vector::filled(pcn.topology.width(l), 2.0)).unwrap();
    }
    assert_eq!(pcn.energy_with(&s, &ones).total, base);
    assert_eq!(pcn.energy_with(&s, &twos).total, 2.0 * base);
}

#[test]
fn report_decomposition_adds_up() {
    let mut rng = Rng::new(8);
    for dir in [Direction::Discriminative, Direction::Generative] {
        let pcn = Pcn::init(random_topology(&mut rng, dir, false), &mut rng, 0.8);
        let mut s = pcn.zero_state();
        for a in s.activations.iter_mut() {
            let v = random_vec(&mut rng, a.len());
            a.copy_from_slice(&v);
        }
        pcn.predictions(&mut s).unwrap();
        let e = pcn.energy(&s);
        let sum: f64 = e.per_layer.iter().sum();
        assert_eq!(e.total, sum);
        assert!((e.total - (e.output_loss + e.residual)).abs() <= 1e-14 * e.total.max(1.0));
        assert_eq!(e.per_layer[pcn.topology.root_layer()], 0.0);
    }
}

#[test]
fn zero_gamma_and_zero_error_are_fixed_points() {
    let mut rng = Rng::new(9);
    let pcn = Pcn::init(random_topology(&mut rng, Direction::Discriminative, false), &mut rng, 0.8);
    let mut s = perturbed_state(&pcn, &mut rng);
    let before = s.clone();
    pcn.inference_step(&mut s, 0.0, InferenceSchedule::Simultaneous).unwrap();
    assert!(s.bitwise_eq(&before));

    let x = random_vec(&mut rng, pcn.topology.width(0));
    let mut s = pcn.zero_state();
    s.clamp(0, &x).unwrap();
    pcn.feedforward_init(&mut s).unwrap();
    let before = s.clone();
    for _ in 0..5 {
        pcn.inference_step(&mut s, 0.3, InferenceSchedule::Simultaneous).unwrap();
    }
    assert!(s.bitwise_eq(&before));
    assert!(pcn.weight_gradients(&s).iter().all(|g| g.max_abs() == 0.0));
}

#[test]
fn first_step_after_init_moves_only_the_last_hidden_layer() {
    let mut rng = Rng::new(10);
    let t = Topology::uniform(vec![3, 4, 4, 4, 2], Activation::Tanh, Direction::Discriminative).unwrap();
    let pcn = Pcn::init(t, &mut rng, 0.5);
    let mut s = pcn.zero_state();
    s.clamp(0, &random_vec(&mut rng, 3)).unwrap();
    s.clamp(4, &random_vec(&mut rng, 2)).unwrap();
    pcn.feedforward_init(&mut s).unwrap();
    let before = s.clone();
    pcn.inference_step(&mut s, 0.1, InferenceSchedule::Simultaneous).unwrap();
    for l in [0, 1, 2, 4] {
        assert!(s.activations[l].bitwise_eq(&before.activations[l]), "layer {l}");
    }
    assert!(!s.activations[3].bitwise_eq(&before.activations[3]));
}

#[test]
fn inference_step_is_scaled_energy_gradient() {
    let mut rng = Rng::new(11);
    let check = GradCheck::default();
    for dir in [Direction::Discriminative, Direction::Generative] {
        for _ in 0..10 {
            let mut pcn = Pcn::init(random_topology(&mut rng, dir, true), &mut rng, 0.8);
            for l in 0..=pcn.depth() {
                if l != pcn.topology.root_layer() && rng.bernoulli(0.5) {
                    let pi = (0..pcn.topology.width(l)).map(|_| rng.uniform(0.5, 2.0)).collect();
                    pcn.precisions.set(l, pi).unwrap();
                }
            }
            let mut s = pcn.zero_state();
            for a in s.activations.iter_mut() {
                let v = random_vec(&mut rng, a.len());
                a.copy_from_slice(&v);
            }
            s.clamped[0] = true;
            pcn.predictions(&mut s).unwrap();
            let gamma = 0.1;
            let mut stepped = s.clone();
            pcn.inference_step(&mut stepped, gamma, InferenceSchedule::Simultaneous).unwrap();
            for l in 1..=pcn.depth() {
                let fd = finite_diff_gradient(
                    |a| {
                        let mut p = s.clone();
                        p.activations[l].copy_from_slice(a);
                        pcn.predictions(&mut p).unwrap();
                        pcn.energy(&p).total
                    },
                    &s.activations[l],
                    1e-6,
                );
                let analytic: Vec<f64> = stepped.activations[l]
                    .iter()
                    .zip(s.activations[l].iter())
                    .map(|(n, o)| (n - o) / -gamma)
                    .collect();
                assert!(check.all_close(&analytic, &fd), "{dir:?} layer {l}: {analytic:?} vs {fd:?}");
            }
        }
    }
}

#[test]
fn weight_gradients_match_finite_differences() {
    let mut rng = Rng::new(12);
    let check = GradCheck::default();
    for dir in [Direction::Discriminative, Direction::Generative] {
        for _ in 0..10 {
            let mut pcn = Pcn::init(random_topology(&mut rng, dir, true), &mut rng, 0.8);
            let mut s = pcn.zero_state();
            for a in s.activations.iter_mut() {
                let v = random_vec(&mut rng, a.len());
                a.copy_from_slice(&v);
            }
            pcn.predictions(&mut s).unwrap();
            let grads = pcn.weight_gradients(&s);
            for k in 0..pcn.depth() {
                let flat = pcn.params.weights[k].as_slice().to_vec();
                let fd = finite_diff_gradient(
                    |w| {
                        pcn.params.weights[k].as_mut_slice().copy_from_slice(w);
                        let mut p = s.clone();
                        pcn.predictions(&mut p).unwrap();
                        pcn.energy(&p).total
                    },
                    &flat,
                    1e-6,
                );
                pcn.params.weights[k].as_mut_slice().copy_from_slice(&flat);
                assert!(check.all_close(grads[k].as_slice(), &fd), "{dir:?} transition {k}");
            }
        }
    }
}

#[test]
fn t_zero_gradient_is_backprop_output_layer() {
    let mut rng = Rng::new(13);
    for _ in 0..20 {
        let pcn = Pcn::init(random_topology(&mut rng, Direction::Discriminative, false), &mut rng, 1.0);
        let x = random_vec(&mut rng, pcn.topology.width(0));
        let y = random_vec(&mut rng, pcn.topology.width(pcn.depth()));
        let mut s = pcn.zero_state();
        s.clamp(0, &x).unwrap();
        s.clamp(pcn.depth(), &y).unwrap();
        pcn.feedforward_init(&mut s).unwrap();
        let pc = pcn.weight_gradients(&s);
        let bp = bp_gradients(&pcn.params, &pcn.topology, &x, &y).unwrap();
        let last = pcn.depth() - 1;
        assert!(pc[last].bitwise_eq(&bp[last]));
        assert!(pc[..last].iter().all(|g| g.max_abs() == 0.0));
    }
}

#[test]
fn clamped_layers_never_move() {
    let mut rng = Rng::new(14);
    let pcn = Pcn::init(random_topology(&mut rng, Direction::Discriminative, false), &mut rng, 0.8);
    let mut s = perturbed_state(&pcn, &mut rng);
    let (a0, al) = (s.activations[0].clone(), s.activations[pcn.depth()].clone());
    for schedule in [InferenceSchedule::Simultaneous, InferenceSchedule::SequentialTopDown] {
        for _ in 0..50 {
            pcn.inference_step(&mut s, 0.1, schedule).unwrap();
        }
    }
    assert!(s.activations[0].bitwise_eq(&a0));
    assert!(s.activations[pcn.depth()].bitwise_eq(&al));
}

#[test]
fn both_schedules_descend_energy() {
    let mut rng = Rng::new(15);
    for schedule in [InferenceSchedule::Simultaneous, InferenceSchedule::SequentialTopDown] {
        for _ in 0..20 {
            let pcn = Pcn::init(random_topology(&mut rng, Direction::Discriminative, true), &mut rng, 0.5);
            let mut s = perturbed_state(&pcn, &mut rng);
            let mut e = pcn.energy(&s).total;
            for _ in 0..50 {
                pcn.inference_step(&mut s, 0.1, schedule).unwrap();
                let next = pcn.energy(&s).total;
                assert!(next <= e + 1e-12, "{schedule:?}: {e} -> {next}");
                e = next;
            }
        }
    }
}

#[test]
fn sequential_schedule_keeps_errors_fresh() {
    let mut rng = Rng::new(16);
    let pcn = Pcn::init(random_topology(&mut rng, Direction::Generative, false), &mut rng, 0.8);
    let mut s = pcn.zero_state();
    s.clamp(0, &random_vec(&mut rng, pcn.topology.width(0))).unwrap();
    pcn.feedforward_init(&mut s).unwrap();
    pcn.inference_step(&mut s, 0.2, InferenceSchedule::SequentialTopDown).unwrap();
    let mut fresh = s.clone();
    pcn.predictions(&mut fresh).unwrap();
    assert!(fresh.bitwise_eq(&s));
}

#[test]
fn linear_net_converges_under_small_rates() {
    let t = Topology::uniform(vec![2, 3, 3, 1], Activation::Linear, Direction::Discriminative).unwrap();
    let pcn = Pcn::init(t, &mut Rng::new(17), 0.5);
    let mut s = pcn.zero_state();
    s.clamp(0, &[0.5, -1.0]).unwrap();
    s.clamp(3, &[2.0]).unwrap();
    pcn.feedforward_init(&mut s).unwrap();
    let cfg = InferenceConfig {
        gamma: 0.5,
        steps: 10_000,
        stop_tol: 1e-8,
        schedule: InferenceSchedule::Simultaneous,
    };
    let trace = pcn.infer(&mut s, &cfg).unwrap();
    assert!(trace.steps_taken < 10_000);
}

#[test]
fn iterative_testing_reaches_the_forward_pass() {
    let mut rng = Rng::new(18);
    let t = Topology::new(
        vec![3, 5, 4, 2],
        vec![Activation::Tanh, Activation::Sigmoid, Activation::Linear],
        Direction::Discriminative,
    )
    .unwrap();
    let pcn = Pcn::init(t, &mut rng, 0.5);
    let x = random_vec(&mut rng, 3);
    let mut s = pcn.zero_state();
    s.clamp(0, &x).unwrap();
    pcn.predictions(&mut s).unwrap();
    pcn.infer(&mut s, &InferenceConfig::fixed(0.2, 500)).unwrap();
    let y_hat = pcn.test_discriminative(&x).unwrap();
    assert!(s.activations[3].max_abs_diff(&y_hat) < 1e-6);
}

#[test]
fn divergence_is_reported() {
    let t = Topology::uniform(vec![1, 1, 1], Activation::Linear, Direction::Discriminative).unwrap();
    let mut p = Params::zeros(&t);
    p.weights[0][(0, 0)] = 10.0;
    p.weights[1][(0, 0)] = 10.0;
    let pcn = Pcn::new(t, p).unwrap();
    let mut s = pcn.zero_state();
    s.clamp(0, &[1.0]).unwrap();
    s.clamp(2, &[-1.0]).unwrap();
    pcn.feedforward_init(&mut s).unwrap();
    let err = pcn.infer(&mut s, &InferenceConfig::fixed(5.0, 200)).unwrap_err();
    assert!(matches!(err, Error::Divergence { gamma, .. } if gamma == 5.0));
}

#[test]
fn parallel_inference_is_bitwise_serial() {
    let mut rng = Rng::new(19);
    let t = Topology::uniform(vec![4; 9], Activation::Tanh, Direction::Discriminative).unwrap();
    let serial = Pcn::init(t, &mut rng, 0.5);
    let parallel = serial.clone().with_executor(Executor::with_workers(4).unwrap());
    let mut a = perturbed_state(&serial, &mut rng);
    let mut b = a.clone();
    serial.infer(&mut a, &InferenceConfig::fixed(0.1, 30)).unwrap();
    parallel.infer(&mut b, &InferenceConfig::fixed(0.1, 30)).unwrap();
    assert!(a.bitwise_eq(&b));
}

#[test]
fn generative_supervised_sweep() {
    let t = Topology::uniform(vec![3, 2, 2], Activation::Linear, Direction::Generative).unwrap();
    let zero = Pcn::new(t.clone(), Params::zeros(&t)).unwrap();
    assert!(zero
        .test_generative(GenerativeMode::Supervised(&[1.0, 2.0]))
        .unwrap()
        .iter()
        .all(|&v| v == 0.0));

    let mut rng = Rng::new(20);
    let t = Topology::new(vec![3, 4, 2], vec![Activation::Sigmoid, Activation::Tanh], Direction::Generative).unwrap();
    let pcn = Pcn::init(t, &mut rng, 1.0);
    let label = [0.3, -0.8];
    let out = pcn.test_generative(GenerativeMode::Supervised(&label)).unwrap();
    let mut a = label.to_vec();
    for k in (0..2).rev() {
        let w = &pcn.params.weights[k];
        a = (0..w.rows())
            .map(|i| {
                let z: f64 = (0..a.len()).map(|j| w[(i, j)] * a[j]).sum::<f64>() + w[(i, a.len())];
                pcn.topology.activation(k).apply(z)
            })
            .collect();
    }
    assert!(out.iter().zip(&a).all(|(p, q)| (p - q).abs() < 1e-15));
}

#[test]
fn ancestral_sampling_with_zero_weights_is_standard_normal() {
    let t = Topology::uniform(vec![2, 3], Activation::Linear, Direction::Generative).unwrap();
    let pcn = Pcn::new(t.clone(), Params::zeros(&t)).unwrap();
    let mut rng = Rng::new(22);
    let n = 10_000;
    let mut sum = [0.0; 2];
    let mut sq = [0.0; 2];
    for _ in 0..n {
        let x = pcn.test_generative(GenerativeMode::Ancestral(&mut rng)).unwrap();
        for i in 0..2 {
            sum[i] += x[i];
            sq[i] += x[i] * x[i];
        }
    }
    for i in 0..2 {
        let mean = sum[i] / n as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt(), "mean {mean}");
        let var = sq[i] / n as f64 - mean * mean;
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }
}

#[test]
fn zero_learning_rate_keeps_params() {
    let t = Topology::new(vec![2, 8, 1], vec![Activation::Tanh, Activation::Sigmoid], Direction::Discriminative).unwrap();
    let mut pcn = Pcn::init(t, &mut Rng::new(23), 0.05);
    let before = pcn.params.clone();
    let data = Dataset::xor();
    let opts = TrainOptions {
        epochs: 5,
        ..Default::default()
    };
    train_il(&mut pcn, &data, &InferenceConfig::new(0.1, 20), &mut Optimizer::adam(0.0), &opts).unwrap();
    assert!(pcn.params.bitwise_eq(&before));
    train_incremental_il(&mut pcn, &data, &InferenceConfig::new(0.1, 3), &mut Optimizer::sgd(0.0), &opts).unwrap();
    assert!(pcn.params.bitwise_eq(&before));
}

#[test]
fn incremental_il_with_one_step_equals_il_with_one_step() {
    let t = Topology::uniform(vec![3, 5, 4, 2], Activation::Tanh, Direction::Discriminative).unwrap();
    let mut rng = Rng::new(24);
    let mut a = Pcn::init(t, &mut rng, 0.5);
    let mut b = a.clone();
    let sample = crate::data::Sample {
        x: Vector::from(random_vec(&mut rng, 3)),
        y: Some(Vector::from(random_vec(&mut rng, 2))),
    };
    let cfg = InferenceConfig::fixed(0.1, 1);
    let mut oa = Optimizer::adam(0.01);
    let mut ob = Optimizer::adam(0.01);
    for _ in 0..5 {
        a.il_update(&[&sample], &cfg, &mut oa, ClampMode::Supervised, false).unwrap();
        b.incremental_il_update(&[&sample], &cfg, &mut ob, ClampMode::Supervised, false).unwrap();
        assert!(a.params.bitwise_eq(&b.params));
    }
}

#[test]
fn update_counts_match_closed_forms() {
    for l in [2usize, 3, 5] {
        let t = Topology::uniform(vec![3; l + 1], Activation::Tanh, Direction::Discriminative).unwrap();
        let mut pcn = Pcn::init(t, &mut Rng::new(25), 0.5);
        let sample = crate::data::Sample {
            x: Vector::filled(3, 0.5),
            y: Some(Vector::filled(3, 1.0)),
        };
        let steps = 4;
        let cfg = InferenceConfig::fixed(0.1, steps);
        let mut s = pcn.prepare_state(&sample, ClampMode::Supervised).unwrap();
        let (_, c) = measure(|| {
            pcn.infer(&mut s, &cfg).unwrap();
            pcn.weight_gradients(&s)
        });
        let (l, t) = (l as u64, steps as u64);
        assert_eq!(c.matmuls, t * (3 * l - 2) + l);
        assert_eq!(c.critical_path, 3 * t + 1);

        let (out, c) = measure(|| {
            pcn.incremental_il_update(&[&sample], &cfg, &mut Optimizer::sgd(0.01), ClampMode::Supervised, false)
                .unwrap()
        });
        // includes one feedforward init of L matmuls
        assert_eq!(out.weight_updates as u64, t);
        assert_eq!(c.matmuls, l + t * (4 * l - 2));
    }
}

#[test]
fn xor_trains_with_il() {
    let t = Topology::new(vec![2, 8, 1], vec![Activation::Tanh, Activation::Sigmoid], Direction::Discriminative).unwrap();
    let mut rng = Rng::new(1);
    let mut pcn = Pcn::init(t, &mut rng, 0.05);
    let opts = TrainOptions {
        epochs: 2000,
        stop_at_accuracy: Some(1.0),
        ..Default::default()
    };
    let report = train_il(&mut pcn, &Dataset::xor(), &InferenceConfig::new(0.1, 20), &mut Optimizer::adam(0.01), &opts).unwrap();
    assert_eq!(report.final_accuracy(), Some(1.0), "{:?}", report.epochs.last());
}

#[test]
fn zil_equals_backprop() {
    let mut rng = Rng::new(26);
    for _ in 0..20 {
        let t = Topology::new(
            vec![2, 3, 3, 1],
            vec![Activation::Tanh, Activation::Sigmoid, Activation::Linear],
            Direction::Discriminative,
        )
        .unwrap();
        let mut pcn = Pcn::init(t, &mut rng, 1.0);
        let x = random_vec(&mut rng, 2);
        let y = random_vec(&mut rng, 1);
        let alpha = 0.1;
        let bp = bp_gradients(&pcn.params, &pcn.topology, &x, &y).unwrap();
        let deltas = pcn.train_zil(&x, &y, alpha).unwrap();
        for (d, g) in deltas.iter().zip(&bp) {
            assert!(d.max_abs_diff(&g.scaled(-alpha)) < 1e-10);
        }
    }
}

#[test]
fn zil_with_exact_target_changes_nothing() {
    let t = Topology::uniform(vec![2, 4, 3], Activation::Tanh, Direction::Discriminative).unwrap();
    let mut pcn = Pcn::init(t, &mut Rng::new(27), 0.7);
    let y = pcn.test_discriminative(&[0.2, 0.4]).unwrap();
    let deltas = pcn.train_zil(&[0.2, 0.4], &y, 0.5).unwrap();
    assert!(deltas.iter().all(|d| d.max_abs() == 0.0));
}

#[test]
fn zil_preconditions_are_enforced() {
    let t = Topology::uniform(vec![2, 4, 3], Activation::Tanh, Direction::Discriminative).unwrap();
    let mut pcn = Pcn::init(t, &mut Rng::new(28), 0.7);
    let mut s = pcn.zero_state();
    s.clamp(0, &[0.1, 0.2]).unwrap();
    s.clamp(2, &[1.0, 0.0, 1.0]).unwrap();
    pcn.feedforward_init(&mut s).unwrap();
    assert!(matches!(pcn.zil_from_state(&mut s.clone(), 0.1, 0.5, 2), Err(Error::Precondition(_))));
    assert!(matches!(pcn.zil_from_state(&mut s.clone(), 0.1, 1.0, 3), Err(Error::Precondition(_))));
    let mut uninit = s.clone();
    uninit.activations[1][0] += 0.1;
    pcn.predictions(&mut uninit).unwrap();
    assert!(matches!(pcn.zil_from_state(&mut uninit, 0.1, 1.0, 2), Err(Error::Precondition(_))));
    assert!(pcn.zil_from_state(&mut s, 0.1, 1.0, 2).is_ok());
}

#[test]
fn bound_after_feedforward_init() {
    let mut rng = Rng::new(29);
    let t = Topology::uniform(vec![3, 4, 4, 2], Activation::Tanh, Direction::Discriminative).unwrap();
    let pcn = Pcn::init(t, &mut rng, 0.7);
    let mut s = pcn.zero_state();
    s.clamp(0, &random_vec(&mut rng, 3)).unwrap();
    s.clamp(3, &random_vec(&mut rng, 2)).unwrap();
    pcn.feedforward_init(&mut s).unwrap();
    let r = pcn.energy_gradient_bound(&s).unwrap();
    assert!(r.holds);
    for l in 1..3 {
        let (_, dr) = pcn.decomposed_gradients(&s, l).unwrap();
        assert!(dr.iter().all(|&v| v == 0.0));
    }
    // all errors zero: both sides vanish
    let mut free = pcn.zero_state();
    free.clamp(0, &[0.0, 0.0, 0.0]).unwrap();
    pcn.feedforward_init(&mut free).unwrap();
    let r = pcn.energy_gradient_bound(&free).unwrap();
    assert!(r.holds && r.layers.iter().all(|b| b.lhs == 0.0 && b.rhs == 0.0));
}

#[test]
fn decomposed_gradients_match_finite_differences() {
    let mut rng = Rng::new(30);
    let check = GradCheck::default();
    for _ in 0..10 {
        let pcn = Pcn::init(random_topology(&mut rng, Direction::Discriminative, true), &mut rng, 0.8);
        let s = perturbed_state(&pcn, &mut rng);
        for l in 1..pcn.depth() {
            let (dl, dr) = pcn.decomposed_gradients(&s, l).unwrap();
            let part = |which: bool| {
                finite_diff_gradient(
                    |a| {
                        let mut p = s.clone();
                        p.activations[l].copy_from_slice(a);
                        pcn.predictions(&mut p).unwrap();
                        let e = pcn.energy(&p);
                        if which {
                            e.output_loss
                        } else {
                            e.residual
                        }
                    },
                    &s.activations[l],
                    1e-6,
                )
            };
            assert!(check.all_close(&dl, &part(true)));
            assert!(check.all_close(&dr, &part(false)));
        }
    }
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let mut rng = Rng::new(31);
    let mut pcn = Pcn::init(random_topology(&mut rng, Direction::Generative, false), &mut rng, 1.0);
    let l = pcn.topology.output_layer();
    pcn.precisions
        .set(l, (0..pcn.topology.width(l)).map(|_| rng.uniform(0.1, 3.0)).collect())
        .unwrap();
    let ck = Checkpoint::from_pcn(&pcn, 31);
    let back = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap();
    assert_eq!(back, ck);
    let restored = back.to_pcn().unwrap();
    assert!(restored.params.bitwise_eq(&pcn.params));
    assert_eq!(restored.precisions, pcn.precisions);
    assert!(Checkpoint::from_json(r#"{"topology":[1,1],"bogus":1}"#).is_err());
}
