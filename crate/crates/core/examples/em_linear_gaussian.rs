//! EM on a two-layer linear Gaussian model. The E-step is exact (Gaussian
//! posterior from a Newton solve), so the marginal negative log likelihood
//! never increases.
//!
//! ```text
//! cargo run --release --example em_linear_gaussian
//! ```

use pcnet::harness::datasets::{gen_toy_dataset, linear_latent_model, ToyKind, LATENT_DIMS};
use pcnet::probmodel::{run_em, EmConfig, RaoBallardModel};
use pcnet::*;

fn main() -> Result<()> {
    let data = gen_toy_dataset(ToyKind::LinearLatent, 100, 3)?;
    let truth = linear_latent_model(3);
    let (nx, nz) = LATENT_DIMS;
    let mut model = RaoBallardModel::random(nx, nz, nz, Activation::Linear, &mut Rng::new(30), 0.3);
    model.sigma_x2 = truth.sigma_x2;

    let trace = run_em(&mut model, &data, &EmConfig { iterations: 300, alpha: 0.02, ..Default::default() })?;
    let truth_nll: f64 =
        data.samples().iter().map(|s| truth.nll_oracle_linear(&s.x).unwrap()).sum::<f64>() / data.len() as f64;
    for i in [0, 1, 2, 5, 10, 30, 100, 299] {
        println!("iteration {i:>3}: energy {:.4}  NLL {:.4}", trace.energies[i], trace.nll[i].unwrap());
    }
    println!("NLL under the generating model: {truth_nll:.4}");
    let rises = trace.nll.windows(2).filter(|w| w[1].unwrap() > w[0].unwrap() + 1e-12).count();
    println!("iterations where the NLL rose: {rises}");
    Ok(())
}
