//! The Gaussian variational free energy around a mode. The optimal
//! covariance is the inverse Hessian of the negative log joint, and for a
//! linear model the optimum equals the exact negative log likelihood.
//!
//! ```text
//! cargo run --example gaussian_free_energy
//! ```

use pcnet::probmodel::{vfe_at, RaoBallardModel};
use pcnet::*;

fn main() -> Result<()> {
    let mut rng = Rng::new(8);
    let model = RaoBallardModel::random(4, 2, 2, Activation::Linear, &mut rng, 0.8);
    let x = [0.3, -0.2, 1.0, 0.5];
    let z = model.newton_estep(&x, &[0.0, 0.0], 50, 1e-14)?;
    let r = model.gaussian_vfe(&x, &z)?;
    let sigma = r.sigma.clone().unwrap();
    println!("mode {z:?}");
    println!("F at optimal Sigma {:.10}", r.f.unwrap());
    println!("exact NLL          {:.10}", model.nll_oracle_linear(&x)?);

    for s in [0.5, 0.9, 1.1, 2.0] {
        let f = vfe_at(r.e_at_mode, &r.hessian, &sigma.scaled(s))?;
        println!("F at {s} * Sigma    {f:.10}");
    }

    let tanh = RaoBallardModel::random(4, 2, 2, Activation::Tanh, &mut rng, 0.8);
    let z = tanh.newton_estep(&x, &[0.0, 0.0], 50, 1e-14)?;
    let r = tanh.gaussian_vfe(&x, &z)?;
    println!("tanh model: F {:?}, degenerate {}", r.f, r.degenerate);
    Ok(())
}
