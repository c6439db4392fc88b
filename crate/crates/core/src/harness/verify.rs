//! The `verify` suites: equivalences, gradient checks and descent
//! properties, each on seeded random instances.

use serde::Serialize;

use crate::data::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::fnn::{bp_gradients, forward, Direction, Optimizer, Topology};
use crate::numerics::{finite_diff_gradient, Activation, GradCheck, Rng, Vector};
use crate::pcgraph::{embed_hierarchical, AdjacencyMask, ClampingPlan, GraphInit, PcGraph};
use crate::pcn::ClampMode;
use crate::pcn::{update_precisions, InferenceConfig, InferenceSchedule, NetState, Pcn};
use crate::probmodel::{run_em, EmConfig, Posterior, RaoBallardModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Suite {
    Equivalence,
    Gradients,
    Descent,
    All,
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equivalence" => Ok(Suite::Equivalence),
            "gradients" => Ok(Suite::Gradients),
            "descent" => Ok(Suite::Descent),
            "all" => Ok(Suite::All),
            _ => Err(Error::config("suite", format!("unknown suite {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name,
            passed,
            detail: detail.into(),
        }
    }

    fn from_result(name: &'static str, r: Result<Check>) -> Check {
        r.unwrap_or_else(|e| Check::new(name, false, format!("error: {e}")))
    }
}

pub fn random_topology(rng: &mut Rng, direction: Direction, max_depth: usize, max_width: usize, kinds: &[Activation]) -> Result<Topology> {
    let l = 1 + rng.below(max_depth);
    let widths = (0..=l).map(|_| 1 + rng.below(max_width)).collect();
    let acts = (0..l).map(|_| kinds[rng.below(kinds.len())]).collect();
    Topology::new(widths, acts, direction)
}

fn random_vec(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect()
}

const SMOOTH: [Activation; 3] = [Activation::Linear, Activation::Tanh, Activation::Sigmoid];

/// Random graph without self-loops, edge density `p`.
pub fn random_graph(rng: &mut Rng, n: usize, p: f64, kinds: &[Activation], scale: f64) -> Result<PcGraph> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.bernoulli(p) {
                edges.push([i, j]);
            }
        }
    }
    let mask = AdjacencyMask::from_edges(n, &edges)?;
    let acts = (0..n).map(|_| kinds[rng.below(kinds.len())]).collect();
    let mut g = PcGraph::init(mask, acts, rng, scale)?;
    for b in g.params.bias.iter_mut() {
        *b = rng.uniform(-scale, scale);
    }
    Ok(g)
}

/// `test_discriminative` against `fnn::forward`, bit for bit.
pub fn test_time_equivalence(nets: usize, seed: u64) -> Check {
    let name = "test_time_equivalence";
    Check::from_result(
        name,
        (|| {
            let mut rng = Rng::new(seed);
            for i in 0..nets {
                let t = random_topology(&mut rng, Direction::Discriminative, 5, 16, &Activation::ALL)?;
                let pcn = Pcn::init(t, &mut rng, 1.0);
                let x = random_vec(&mut rng, pcn.topology.width(0));
                let a = pcn.test_discriminative(&x)?;
                let b = forward(&pcn.params, &pcn.topology, &x)?;
                if !a.bitwise_eq(b.output()) {
                    return Ok(Check::new(name, false, format!("net {i} differs")));
                }
            }
            Ok(Check::new(name, true, format!("{nets} nets bitwise equal")))
        })(),
    )
}

/// Z-IL weight changes against `−α` times the backprop gradients.
pub fn zil_equivalence(nets: usize, seed: u64, tol: f64) -> Check {
    let name = "zil_equals_bp";
    Check::from_result(
        name,
        (|| {
            let mut rng = Rng::new(seed);
            let mut worst: f64 = 0.0;
            for _ in 0..nets {
                let t = random_topology(&mut rng, Direction::Discriminative, 5, 8, &Activation::ALL)?;
                let mut pcn = Pcn::init(t, &mut rng, 1.0);
                let x = random_vec(&mut rng, pcn.topology.width(0));
                let y = random_vec(&mut rng, pcn.topology.width(pcn.depth()));
                let alpha = rng.uniform(0.01, 0.5);
                let bp = bp_gradients(&pcn.params, &pcn.topology, &x, &y)?;
                let deltas = pcn.train_zil(&x, &y, alpha)?;
                for (d, g) in deltas.iter().zip(&bp) {
                    worst = worst.max(d.max_abs_diff(&g.scaled(-alpha)));
                }
            }
            Ok(Check::new(name, worst < tol, format!("max deviation {worst:e} over {nets} nets")))
        })(),
    )
}

/// IL on a PCN and on its hierarchical graph embedding, compared after
/// every inference step and every weight update.
pub fn hierarchical_reduction(seeds: u64, updates: usize, tol: f64) -> Check {
    let name = "hierarchical_graph_reduction";
    Check::from_result(
        name,
        (|| {
            let mut worst: f64 = 0.0;
            for seed in 0..seeds {
                let mut rng = Rng::new(1000 + seed);
                let t = random_topology(&mut rng, Direction::Discriminative, 4, 5, &SMOOTH)?;
                let mut pcn = Pcn::init(t, &mut rng, 0.8);
                let (mut g, blocks) = embed_hierarchical(&pcn)?;
                let l = pcn.depth();
                let plan = ClampingPlan {
                    x_nodes: blocks[0].clone().collect(),
                    y_nodes: blocks[l].clone().collect(),
                };
                let data: Vec<Sample> = (0..4)
                    .map(|_| Sample {
                        x: random_vec(&mut rng, pcn.topology.width(0)).into(),
                        y: Some(random_vec(&mut rng, pcn.topology.width(l)).into()),
                    })
                    .collect();
                let cfg = InferenceConfig::fixed(0.1, 5);
                let (mut opt_p, mut opt_g) = (Optimizer::sgd(0.05), Optimizer::sgd(0.05));
                for u in 0..updates {
                    let s = &data[u % data.len()];
                    let mut ps = pcn.prepare_state(s, ClampMode::Supervised)?;
                    let mut gs = g.prepare_state(&plan, &s.x, s.y.as_deref(), GraphInit::TopologicalSweep)?;
                    for _ in 0..cfg.steps {
                        pcn.inference_step(&mut ps, cfg.gamma, InferenceSchedule::Simultaneous)?;
                        g.inference_step(&mut gs, cfg.gamma)?;
                        for (layer, block) in blocks.iter().enumerate() {
                            for (r, i) in block.clone().enumerate() {
                                worst = worst.max((gs.a[i] - ps.activations[layer][r]).abs());
                            }
                        }
                    }
                    pcn.il_update(&[s], &cfg, &mut opt_p, ClampMode::Supervised, false)?;
                    g.il_update(&plan, &s.x, s.y.as_deref(), &cfg, &mut opt_g, GraphInit::TopologicalSweep)?;
                    let (reference, _) = embed_hierarchical(&pcn)?;
                    worst = worst.max(reference.params.weights.max_abs_diff(&g.params.weights));
                    // root biases only fit the clamped root values and have no
                    // counterpart in the layered net
                    let root = blocks[pcn.topology.root_layer()].clone();
                    for i in (0..g.n()).filter(|i| !root.contains(i)) {
                        worst = worst.max((reference.params.bias[i] - g.params.bias[i]).abs());
                    }
                }
            }
            Ok(Check::new(
                name,
                worst <= tol,
                format!("max deviation {worst:e} over {seeds} seeds x {updates} updates"),
            ))
        })(),
    )
}

/// Incremental IL with `T = 1` and IL with `T = 1` make the same update.
pub fn incremental_matches_il_at_one_step(nets: usize, seed: u64) -> Check {
    let name = "incremental_il_t1_equals_il_t1";
    Check::from_result(
        name,
        (|| {
            let mut rng = Rng::new(seed);
            let mut worst: f64 = 0.0;
            for _ in 0..nets {
                let t = random_topology(&mut rng, Direction::Discriminative, 4, 6, &SMOOTH)?;
                let a = Pcn::init(t, &mut rng, 0.8);
                let mut b = a.clone();
                let mut a = a;
                let s = Sample {
                    x: random_vec(&mut rng, a.topology.width(0)).into(),
                    y: Some(random_vec(&mut rng, a.topology.width(a.depth())).into()),
                };
                let cfg = InferenceConfig::fixed(0.1, 1);
                a.il_update(&[&s], &cfg, &mut Optimizer::sgd(0.1), ClampMode::Supervised, false)?;
                b.incremental_il_update(&[&s], &cfg, &mut Optimizer::sgd(0.1), ClampMode::Supervised, false)?;
                worst = worst.max(a.params.max_abs_diff(&b.params));
            }
            Ok(Check::new(name, worst == 0.0, format!("max deviation {worst:e}")))
        })(),
    )
}

fn state_for(pcn: &Pcn, rng: &mut Rng) -> Result<NetState> {
    let mut s = pcn.zero_state();
    for a in s.activations.iter_mut() {
        let v = random_vec(rng, a.len());
        a.copy_from_slice(&v);
    }
    pcn.predictions(&mut s)?;
    Ok(s)
}

fn grad_check(name: &'static str, instances: usize, mut one: impl FnMut(&mut Rng) -> Result<bool>, seed: u64) -> Check {
    let mut rng = Rng::new(seed);
    for i in 0..instances {
        match one(&mut rng) {
            Ok(true) => {}
            Ok(false) => return Check::new(name, false, format!("instance {i} mismatched")),
            Err(e) => return Check::new(name, false, format!("instance {i}: {e}")),
        }
    }
    Check::new(name, true, format!("{instances} instances within rtol 1e-5"))
}

/// Every analytic gradient against central differences at `h = 1e−6`.
pub fn gradient_checks(instances: usize, seed: u64) -> Vec<Check> {
    let check = GradCheck::default();
    let h = 1e-6;
    let mut out = Vec::new();

    out.push(grad_check(
        "bp_weight_gradients",
        instances,
        |rng| {
            let t = random_topology(rng, Direction::Discriminative, 4, 6, &SMOOTH)?;
            let mut params = crate::fnn::Params::init(&t, rng, 0.8);
            let x = random_vec(rng, t.width(0));
            let y = random_vec(rng, t.width(t.depth()));
            let g = bp_gradients(&params, &t, &x, &y)?;
            for k in 0..t.depth() {
                let flat = params.weights[k].as_slice().to_vec();
                let fd = finite_diff_gradient(
                    |w| {
                        params.weights[k].as_mut_slice().copy_from_slice(w);
                        let out = forward(&params, &t, &x).expect("shapes");
                        0.5 * crate::fnn::mse_loss(out.output(), &y).expect("shapes")
                    },
                    &flat,
                    h,
                );
                params.weights[k].as_mut_slice().copy_from_slice(&flat);
                if !check.all_close(g[k].as_slice(), &fd) {
                    return Ok(false);
                }
            }
            Ok(true)
        },
        seed,
    ));

    out.push(grad_check(
        "pcn_activation_gradients",
        instances,
        |rng| {
            let dir = if rng.bernoulli(0.5) { Direction::Discriminative } else { Direction::Generative };
            let t = random_topology(rng, dir, 4, 6, &SMOOTH)?;
            let pcn = Pcn::init(t, rng, 0.8);
            let s = state_for(&pcn, rng)?;
            for l in 0..=pcn.depth() {
                let g = pcn.activation_gradient(&s, l)?;
                let fd = finite_diff_gradient(
                    |a| {
                        let mut p = s.clone();
                        p.activations[l].copy_from_slice(a);
                        pcn.predictions(&mut p).expect("shapes");
                        pcn.energy(&p).total
                    },
                    &s.activations[l],
                    h,
                );
                if !check.all_close(&g, &fd) {
                    return Ok(false);
                }
            }
            Ok(true)
        },
        seed + 1,
    ));

    out.push(grad_check(
        "pcn_weight_gradients",
        instances,
        |rng| {
            let dir = if rng.bernoulli(0.5) { Direction::Discriminative } else { Direction::Generative };
            let t = random_topology(rng, dir, 4, 6, &SMOOTH)?;
            let mut pcn = Pcn::init(t, rng, 0.8);
            let s = state_for(&pcn, rng)?;
            let g = pcn.weight_gradients(&s);
            for k in 0..pcn.depth() {
                let flat = pcn.params.weights[k].as_slice().to_vec();
                let fd = finite_diff_gradient(
                    |w| {
                        pcn.params.weights[k].as_mut_slice().copy_from_slice(w);
                        let mut p = s.clone();
                        pcn.predictions(&mut p).expect("shapes");
                        pcn.energy(&p).total
                    },
                    &flat,
                    h,
                );
                pcn.params.weights[k].as_mut_slice().copy_from_slice(&flat);
                if !check.all_close(g[k].as_slice(), &fd) {
                    return Ok(false);
                }
            }
            Ok(true)
        },
        seed + 2,
    ));

    out.push(grad_check(
        "graph_gradients",
        instances,
        |rng| {
            let n = 2 + rng.below(7);
            let mut g = random_graph(rng, n, 0.4, &SMOOTH, 0.5)?;
            let mut s = g.zero_state();
            for a in s.a.iter_mut() {
                *a = rng.uniform(-1.0, 1.0);
            }
            g.predictions(&mut s)?;
            let ga = g.activation_gradient(&s)?;
            let fd = finite_diff_gradient(
                |a| {
                    let mut p = s.clone();
                    p.a.copy_from_slice(a);
                    g.predictions(&mut p).expect("shapes");
                    g.energy(&p)
                },
                &s.a,
                h,
            );
            if !check.all_close(&ga, &fd) {
                return Ok(false);
            }
            let (gw, gb) = g.weight_gradient(&s);
            let edges = g.mask.edges();
            let w0: Vec<f64> = edges.iter().map(|&[i, j]| g.params.weights[(i, j)]).collect();
            let fd = finite_diff_gradient(
                |w| {
                    for (&[i, j], &v) in edges.iter().zip(w) {
                        g.params.weights.as_mut_slice()[i * n + j] = v;
                    }
                    let mut p = s.clone();
                    g.predictions(&mut p).expect("shapes");
                    g.energy(&p)
                },
                &w0,
                h,
            );
            for (&[i, j], &v) in edges.iter().zip(&w0) {
                g.params.weights.as_mut_slice()[i * n + j] = v;
            }
            let analytic: Vec<f64> = edges.iter().map(|&[i, j]| gw[(i, j)]).collect();
            if !check.all_close(&analytic, &fd) {
                return Ok(false);
            }
            let b0 = g.params.bias.to_vec();
            let fd = finite_diff_gradient(
                |b| {
                    g.params.bias.copy_from_slice(b);
                    let mut p = s.clone();
                    g.predictions(&mut p).expect("shapes");
                    g.energy(&p)
                },
                &b0,
                h,
            );
            g.params.bias.copy_from_slice(&b0);
            Ok(check.all_close(&gb, &fd))
        },
        seed + 3,
    ));

    out.push(grad_check(
        "probmodel_gradients",
        instances,
        |rng| {
            let f = SMOOTH[rng.below(3)];
            let (nx, nz, np) = (1 + rng.below(4), 1 + rng.below(4), 1 + rng.below(3));
            let m = RaoBallardModel::random(nx, nz, np, f, rng, 0.8);
            let x = random_vec(rng, nx);
            let z: Vector = random_vec(rng, nz).into();
            let g = m.gradients(&x, &Posterior::Delta(z.clone()))?;
            let gz = m.grad_z(&x, &z)?;
            let fd = finite_diff_gradient(|z| m.rb_energy(&x, z).expect("shapes"), &z, h);
            if !check.all_close(&gz, &fd) {
                return Ok(false);
            }
            let mut p = m.clone();
            let fd = finite_diff_gradient(
                |w| {
                    p.w_x.as_mut_slice().copy_from_slice(w);
                    p.rb_energy(&x, &z).expect("shapes")
                },
                m.w_x.as_slice(),
                h,
            );
            if !check.all_close(g.w_x.as_slice(), &fd) {
                return Ok(false);
            }
            let mut p = m.clone();
            let fd = finite_diff_gradient(
                |w| {
                    p.w_z.as_mut_slice().copy_from_slice(w);
                    p.rb_energy(&x, &z).expect("shapes")
                },
                m.w_z.as_slice(),
                h,
            );
            if !check.all_close(g.w_z.as_slice(), &fd) {
                return Ok(false);
            }
            let mut p = m.clone();
            let fd = finite_diff_gradient(
                |v| {
                    p.z_p.copy_from_slice(v);
                    p.rb_energy(&x, &z).expect("shapes")
                },
                &m.z_p,
                h,
            );
            Ok(check.all_close(&g.z_p, &fd))
        },
        seed + 4,
    ));

    out.push(grad_check(
        "precision_stationarity",
        instances,
        |rng| {
            let t = random_topology(rng, Direction::Discriminative, 3, 5, &SMOOTH)?;
            let pcn = Pcn::init(t, rng, 0.8);
            let states: Vec<NetState> = (0..6).map(|_| state_for(&pcn, rng)).collect::<Result<_>>()?;
            let pi = update_precisions(&states)?;
            for l in 0..states[0].errors.len() {
                let Some(p0) = pi.get(l) else { continue };
                let mut trial = pi.clone();
                let objective = |p: &[f64], trial: &mut crate::pcn::PrecisionSet| {
                    trial.set(l, p.to_vec().into()).expect("above floor");
                    states
                        .iter()
                        .map(|s| crate::probmodel::multilayer_energy_logdet(&pcn, s, trial))
                        .sum::<f64>()
                };
                let fd = finite_diff_gradient(|p| objective(p, &mut trial), p0, h);
                // each component is a difference of two terms of size ½ N / Π
                for (i, d) in fd.iter().enumerate() {
                    let scale = 0.5 * states.len() as f64 / p0[i];
                    if d.abs() > 1e-5 * scale {
                        return Ok(false);
                    }
                }
            }
            Ok(true)
        },
        seed + 5,
    ));
    out
}

/// Largest energy increase over `steps` simultaneous inference steps on
/// random clamped nets (widths ≤ 16, L ≤ 5). Activations are smooth: at the
/// kink of a ReLU a fixed-step gradient step can overshoot.
pub fn pcn_descent(nets: usize, gamma: f64, steps: usize, seed: u64) -> Check {
    let name = "pcn_energy_descent";
    Check::from_result(
        name,
        (|| {
            let mut rng = Rng::new(seed);
            let mut worst = f64::NEG_INFINITY;
            for _ in 0..nets {
                let dir = if rng.bernoulli(0.5) { Direction::Discriminative } else { Direction::Generative };
                let t = random_topology(&mut rng, dir, 5, 16, &SMOOTH)?;
                let pcn = Pcn::init(t, &mut rng, 0.5);
                let mut s = state_for(&pcn, &mut rng)?;
                let (root, out) = (pcn.topology.root_layer(), pcn.topology.output_layer());
                let (a, b) = (s.activations[root].to_vec(), s.activations[out].to_vec());
                s.clamp(root, &a)?;
                s.clamp(out, &b)?;
                let mut prev = pcn.energy(&s).total;
                for _ in 0..steps {
                    pcn.inference_step(&mut s, gamma, InferenceSchedule::Simultaneous)?;
                    let e = pcn.energy(&s).total;
                    worst = worst.max(e - prev);
                    prev = e;
                }
            }
            Ok(Check::new(name, worst <= 1e-12, format!("largest increase {worst:e} over {nets} nets")))
        })(),
    )
}

/// The same for random PC graphs (n ≤ 20) with every third node clamped.
pub fn graph_descent(graphs: usize, gamma: f64, steps: usize, seed: u64) -> Check {
    let name = "graph_energy_descent";
    Check::from_result(
        name,
        (|| {
            let mut rng = Rng::new(seed);
            let mut worst = f64::NEG_INFINITY;
            for _ in 0..graphs {
                let n = 3 + rng.below(18);
                let g = random_graph(&mut rng, n, 0.3, &SMOOTH, 0.5)?;
                let mut s = g.zero_state();
                for a in s.a.iter_mut() {
                    *a = rng.uniform(-1.0, 1.0);
                }
                let clamped: Vec<usize> = (0..n).filter(|i| i % 3 == 0).collect();
                let vals: Vec<f64> = clamped.iter().map(|&i| s.a[i]).collect();
                s.clamp(&clamped, &vals)?;
                g.predictions(&mut s)?;
                let mut prev = g.energy(&s);
                for _ in 0..steps {
                    g.inference_step(&mut s, gamma)?;
                    let e = g.energy(&s);
                    worst = worst.max(e - prev);
                    prev = e;
                }
            }
            Ok(Check::new(name, worst <= 1e-12, format!("largest increase {worst:e} over {graphs} graphs")))
        })(),
    )
}

/// Exact-posterior EM on linear-Gaussian data never raises the marginal NLL.
pub fn em_monotone(datasets: u64, iterations: usize, slack: f64) -> Check {
    let name = "em_nll_monotone";
    Check::from_result(
        name,
        (|| {
            let mut worst = f64::NEG_INFINITY;
            for d in 0..datasets {
                let data: Dataset = crate::harness::datasets::gen_toy_dataset(
                    crate::harness::datasets::ToyKind::LinearLatent,
                    40,
                    d,
                )?;
                let truth = crate::harness::datasets::linear_latent_model(d);
                let mut rng = Rng::new(500 + d);
                let (nx, nz) = crate::harness::datasets::LATENT_DIMS;
                let mut m = RaoBallardModel::random(nx, nz, nz, Activation::Linear, &mut rng, 0.3);
                m.sigma_x2 = truth.sigma_x2;
                m.sigma_z2 = truth.sigma_z2;
                let trace = run_em(
                    &mut m,
                    &data,
                    &EmConfig {
                        iterations,
                        alpha: 0.02,
                        ..Default::default()
                    },
                )?;
                let nll: Vec<f64> = trace.nll.iter().map(|v| v.expect("linear")).collect();
                for w in nll.windows(2) {
                    worst = worst.max(w[1] - w[0]);
                }
            }
            Ok(Check::new(
                name,
                worst <= slack,
                format!("largest NLL increase {worst:e} over {datasets} datasets"),
            ))
        })(),
    )
}

pub fn run_suite(suite: Suite) -> Vec<Check> {
    let mut out = Vec::new();
    if matches!(suite, Suite::Equivalence | Suite::All) {
        out.push(test_time_equivalence(100, 1));
        out.push(zil_equivalence(50, 2, 1e-10));
        out.push(hierarchical_reduction(10, 100, 1e-12));
        out.push(incremental_matches_il_at_one_step(20, 3));
    }
    if matches!(suite, Suite::Gradients | Suite::All) {
        out.extend(gradient_checks(50, 10));
    }
    if matches!(suite, Suite::Descent | Suite::All) {
        out.push(pcn_descent(100, 0.1, 100, 20));
        out.push(graph_descent(100, 0.1, 100, 21));
        out.push(em_monotone(10, 200, 1e-8));
    }
    out
}
