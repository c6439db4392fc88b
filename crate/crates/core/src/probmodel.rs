//! The latent-variable view of predictive coding.
//!
//! [`RaoBallardModel`] is the two-layer Gaussian model
//!
//! ```text
//! z ~ N(f(W_z z_p), σ_z² I),    x | z ~ N(f(W_x z), σ_x² I)
//! ```
//!
//! with energy `rb(x, z) = ‖x − f(W_x z)‖²/σ_x² + ‖z − f(W_z z_p)‖²/σ_z²`.
//! The negative log joint is `½ rb` plus normalizing constants.
//!
//! EM alternates an E-step over `z` with gradient M-steps on the weights.
//! The E-step is either a point estimate (MAP) or, for linear `f`, the exact
//! Gaussian posterior `N(z̃, H⁻¹)` where `H` is the Hessian of the negative
//! log joint at the mode.

use std::f64::consts::PI;

use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fnn::{Direction, Params, Topology};
use crate::numerics::linalg::{cholesky, cholesky_solve, inverse_spd, logdet_spd, slogdet, solve_spd};
use crate::numerics::{matmul, matvec, matvec_t, outer, Activation, Matrix, Rng, Vector};
use crate::pcn::{NetState, Pcn, PrecisionSet};

#[derive(Clone, Debug, PartialEq)]
pub struct RaoBallardModel {
    /// `n_x × n_z`.
    pub w_x: Matrix,
    /// `n_z × n_p`.
    pub w_z: Matrix,
    pub z_p: Vector,
    pub sigma_x2: f64,
    pub sigma_z2: f64,
    pub f: Activation,
    /// Whether the M-step also moves `z_p`.
    pub learn_prior: bool,
}

/// Errors and pre-activations at one `(x, z)`.
struct Residuals {
    u_x: Vector,
    eps_x: Vector,
    u_z: Vector,
    eps_z: Vector,
}

/// Posterior used by the M-step.
#[derive(Clone, Debug)]
pub enum Posterior {
    /// Point mass at the mode.
    Delta(Vector),
    /// `N(mean, cov)`; linear `f` only.
    Gaussian { mean: Vector, cov: Matrix },
}

impl Posterior {
    pub fn mean(&self) -> &Vector {
        match self {
            Posterior::Delta(m) | Posterior::Gaussian { mean: m, .. } => m,
        }
    }
}

/// Gradients of the (expected) energy with respect to the parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelGradients {
    pub w_x: Matrix,
    pub w_z: Matrix,
    pub z_p: Vector,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VfeReport {
    /// Negative log joint `½ rb + ½ n_x ln 2πσ_x² + ½ n_z ln 2πσ_z²` at the mode.
    pub e_at_mode: f64,
    /// Hessian of the negative log joint in `z` at the mode.
    #[serde(skip)]
    pub hessian: Matrix,
    /// `H⁻¹`, absent when `H` is not positive definite.
    #[serde(skip)]
    pub sigma: Option<Matrix>,
    /// Free energy `E − ½ ln det H⁻¹ − ½ n_z ln 2π` at the optimal covariance.
    pub f: Option<f64>,
    /// Entropy of `N(z̃, Σ̃)`.
    pub entropy_term: Option<f64>,
    pub degenerate: bool,
}

impl RaoBallardModel {
    pub fn new(w_x: Matrix, w_z: Matrix, z_p: Vector, sigma_x2: f64, sigma_z2: f64, f: Activation) -> Result<Self> {
        if w_x.cols() != w_z.rows() {
            return Err(Error::shape("rao_ballard", w_x.shape(), w_z.shape()));
        }
        if w_z.cols() != z_p.len() {
            return Err(Error::shape("rao_ballard", w_z.shape(), (z_p.len(), 1)));
        }
        if !(sigma_x2 > 0.0) || !(sigma_z2 > 0.0) {
            return Err(Error::Precondition(format!(
                "variances must be positive, got {sigma_x2} and {sigma_z2}"
            )));
        }
        Ok(RaoBallardModel {
            w_x,
            w_z,
            z_p,
            sigma_x2,
            sigma_z2,
            f,
            learn_prior: false,
        })
    }

    /// Weights uniform in `[-scale, scale]`, `z_p` standard normal, unit variances.
    pub fn random(n_x: usize, n_z: usize, n_p: usize, f: Activation, rng: &mut Rng, scale: f64) -> Self {
        let w_x = Matrix::from_fn(n_x, n_z, |_, _| rng.uniform(-scale, scale));
        let w_z = Matrix::from_fn(n_z, n_p, |_, _| rng.uniform(-scale, scale));
        let z_p = (0..n_p).map(|_| rng.normal()).collect();
        RaoBallardModel::new(w_x, w_z, z_p, 1.0, 1.0, f).expect("consistent shapes")
    }

    pub fn n_x(&self) -> usize {
        self.w_x.rows()
    }

    pub fn n_z(&self) -> usize {
        self.w_x.cols()
    }

    fn residuals(&self, x: &[f64], z: &[f64]) -> Result<Residuals> {
        if x.len() != self.n_x() {
            return Err(Error::shape("rb_energy", (self.n_x(), 1), (x.len(), 1)));
        }
        let u_x = matvec(&self.w_x, z)?;
        let u_z = matvec(&self.w_z, &self.z_p)?;
        let eps_x = x.iter().zip(u_x.iter()).map(|(x, &u)| x - self.f.apply(u)).collect();
        let eps_z = z.iter().zip(u_z.iter()).map(|(z, &u)| z - self.f.apply(u)).collect();
        Ok(Residuals { u_x, eps_x, u_z, eps_z })
    }

    /// `‖ε_x‖²/σ_x² + ‖ε_z‖²/σ_z²`.
    pub fn rb_energy(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        let r = self.residuals(x, z)?;
        Ok(r.eps_x.norm_sq() / self.sigma_x2 + r.eps_z.norm_sq() / self.sigma_z2)
    }

    /// `−ln p(x, z)`.
    pub fn neg_log_joint(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        let (nx, nz) = (self.n_x() as f64, self.n_z() as f64);
        Ok(0.5 * self.rb_energy(x, z)?
            + 0.5 * nx * (2.0 * PI * self.sigma_x2).ln()
            + 0.5 * nz * (2.0 * PI * self.sigma_z2).ln())
    }

    /// `∂rb/∂z`.
    pub fn grad_z(&self, x: &[f64], z: &[f64]) -> Result<Vector> {
        let r = self.residuals(x, z)?;
        let d: Vector = r
            .eps_x
            .iter()
            .zip(r.u_x.iter())
            .map(|(e, &u)| e * self.f.derivative(u))
            .collect();
        let back = matvec_t(&self.w_x, &d)?;
        Ok((0..self.n_z())
            .map(|i| -2.0 / self.sigma_x2 * back[i] + 2.0 / self.sigma_z2 * r.eps_z[i])
            .collect())
    }

    /// `∂²rb/∂z² = (2/σ_x²) W_xᵀ diag(f'² − ε_x f'') W_x + (2/σ_z²) I`.
    pub fn hessian(&self, x: &[f64], z: &[f64]) -> Result<Matrix> {
        let r = self.residuals(x, z)?;
        let n = self.n_z();
        let c: Vec<f64> = r
            .eps_x
            .iter()
            .zip(r.u_x.iter())
            .map(|(e, &u)| {
                let d = self.f.derivative(u);
                d * d - e * self.f.second_derivative(u)
            })
            .collect();
        let scaled = Matrix::from_fn(self.n_x(), n, |i, j| c[i] * self.w_x[(i, j)]);
        let mut h = matmul(&self.w_x.transpose(), &scaled)?;
        h.scale(2.0 / self.sigma_x2);
        for i in 0..n {
            h[(i, i)] += 2.0 / self.sigma_z2;
        }
        for i in 0..n {
            for j in i + 1..n {
                let m = 0.5 * (h[(i, j)] + h[(j, i)]);
                h[(i, j)] = m;
                h[(j, i)] = m;
            }
        }
        Ok(h)
    }

    /// Gradient descent on `rb` in `z` from `z_init`, `steps` iterations.
    pub fn map_estep(&self, x: &[f64], z_init: &[f64], gamma: f64, steps: usize) -> Result<Vector> {
        if steps == 0 {
            return Err(Error::Precondition("map_estep needs at least one step".into()));
        }
        let mut z = Vector::from(z_init);
        for _ in 0..steps {
            let g = self.grad_z(x, &z)?;
            if g.norm_sq() == 0.0 {
                break;
            }
            z.axpy(-gamma, &g);
            if !z.is_finite() {
                return Err(Error::Divergence {
                    energy: f64::INFINITY,
                    gamma,
                    alpha: f64::NAN,
                });
            }
        }
        let e = self.rb_energy(x, &z)?;
        if !e.is_finite() || e > crate::pcn::DIVERGENCE_ENERGY {
            return Err(Error::Divergence {
                energy: e,
                gamma,
                alpha: f64::NAN,
            });
        }
        Ok(z)
    }

    /// Newton iterations on `rb` in `z`; exact in one step for linear `f`.
    pub fn newton_estep(&self, x: &[f64], z_init: &[f64], max_iter: usize, tol: f64) -> Result<Vector> {
        let mut z = Vector::from(z_init);
        for _ in 0..max_iter {
            let g = self.grad_z(x, &z)?;
            let step = solve_spd(&self.hessian(x, &z)?, &g)?;
            z.axpy(-1.0, &step);
            if step.norm_sq().sqrt() <= tol * (1.0 + z.norm_sq().sqrt()) {
                break;
            }
        }
        Ok(z)
    }

    /// Gradients of `E_q[rb]`. For a Gaussian posterior the `W_x` gradient
    /// gains the curvature term `(2/σ_x²) W_x Σ`.
    pub fn gradients(&self, x: &[f64], q: &Posterior) -> Result<ModelGradients> {
        let z = q.mean();
        let r = self.residuals(x, z)?;
        let dx: Vector = r
            .eps_x
            .iter()
            .zip(r.u_x.iter())
            .map(|(e, &u)| -2.0 / self.sigma_x2 * e * self.f.derivative(u))
            .collect();
        let dz: Vector = r
            .eps_z
            .iter()
            .zip(r.u_z.iter())
            .map(|(e, &u)| -2.0 / self.sigma_z2 * e * self.f.derivative(u))
            .collect();
        let mut w_x = outer(&dx, z);
        if let Posterior::Gaussian { cov, .. } = q {
            if self.f != Activation::Linear {
                return Err(Error::Unsupported(
                    "Gaussian-posterior M-step is only available for linear models".into(),
                ));
            }
            let mut curv = matmul(&self.w_x, cov)?;
            curv.scale(2.0 / self.sigma_x2);
            w_x.axpy(1.0, &curv);
        }
        Ok(ModelGradients {
            w_x,
            w_z: outer(&dz, &self.z_p),
            z_p: matvec_t(&self.w_z, &dz)?,
        })
    }

    fn apply(&mut self, g: &ModelGradients, alpha: f64) {
        self.w_x.axpy(-alpha, &g.w_x);
        self.w_z.axpy(-alpha, &g.w_z);
        if self.learn_prior {
            self.z_p.axpy(-alpha, &g.z_p);
        }
    }

    /// One gradient step on `rb(x, z̃)` over `W_x`, `W_z` (and `z_p` when
    /// `learn_prior` is set).
    pub fn mstep(&mut self, x: &[f64], z: &[f64], alpha: f64) -> Result<()> {
        let g = self.gradients(x, &Posterior::Delta(Vector::from(z)))?;
        self.apply(&g, alpha);
        Ok(())
    }

    /// One gradient step on the mean of `E_q[rb]` over a batch.
    pub fn mstep_batch(&mut self, xs: &[Vector], posteriors: &[Posterior], alpha: f64) -> Result<()> {
        if xs.len() != posteriors.len() || xs.is_empty() {
            return Err(Error::Precondition("one posterior per sample is required".into()));
        }
        let mut acc = self.gradients(&xs[0], &posteriors[0])?;
        for (x, q) in xs.iter().zip(posteriors).skip(1) {
            let g = self.gradients(x, q)?;
            acc.w_x.axpy(1.0, &g.w_x);
            acc.w_z.axpy(1.0, &g.w_z);
            acc.z_p.axpy(1.0, &g.z_p);
        }
        let s = 1.0 / xs.len() as f64;
        acc.w_x.scale(s);
        acc.w_z.scale(s);
        acc.z_p = acc.z_p.scaled(s);
        self.apply(&acc, alpha);
        Ok(())
    }

    fn marginal(&self) -> Result<(Vector, Matrix)> {
        if self.f != Activation::Linear {
            return Err(Error::Unsupported("the marginal likelihood is closed-form only for linear models".into()));
        }
        let mean = matvec(&self.w_x, &matvec(&self.w_z, &self.z_p)?)?;
        let mut cov = matmul(&self.w_x, &self.w_x.transpose())?;
        cov.scale(self.sigma_z2);
        for i in 0..self.n_x() {
            cov[(i, i)] += self.sigma_x2;
        }
        Ok((mean, cov))
    }

    /// Exact `−ln p(x)` with `x ~ N(W_x W_z z_p, σ_x² I + σ_z² W_x W_xᵀ)`.
    pub fn nll_oracle_linear(&self, x: &[f64]) -> Result<f64> {
        let (mean, cov) = self.marginal()?;
        let l = cholesky(&cov)?;
        let d: Vec<f64> = x.iter().zip(mean.iter()).map(|(x, m)| x - m).collect();
        let sol = cholesky_solve(&l, &d);
        let quad: f64 = d.iter().zip(sol.iter()).map(|(a, b)| a * b).sum();
        let logdet: f64 = (0..l.rows()).map(|i| 2.0 * l[(i, i)].ln()).sum();
        Ok(0.5 * (self.n_x() as f64 * (2.0 * PI).ln() + logdet + quad))
    }

    /// Entropy of the marginal of `x`, the expected value of the NLL under
    /// the model itself.
    pub fn marginal_entropy(&self) -> Result<f64> {
        let (_, cov) = self.marginal()?;
        Ok(0.5 * (self.n_x() as f64 * (2.0 * PI * std::f64::consts::E).ln() + logdet_spd(&cov)?))
    }

    /// Gaussian variational free energy at mode `z̃` with the optimal
    /// covariance `Σ̃ = H⁻¹`.
    pub fn gaussian_vfe(&self, x: &[f64], z: &[f64]) -> Result<VfeReport> {
        let e = self.neg_log_joint(x, z)?;
        let mut h = self.hessian(x, z)?;
        h.scale(0.5);
        let n = self.n_z() as f64;
        Ok(match (inverse_spd(&h), logdet_spd(&h)) {
            (Ok(sigma), Ok(logdet_h)) => VfeReport {
                e_at_mode: e,
                f: Some(free_energy(e, logdet_h, self.n_z())),
                entropy_term: Some(0.5 * n * (2.0 * PI).ln() + 0.5 * n - 0.5 * logdet_h),
                hessian: h,
                sigma: Some(sigma),
                degenerate: false,
            },
            _ => VfeReport {
                e_at_mode: e,
                hessian: h,
                sigma: None,
                f: None,
                entropy_term: None,
                degenerate: true,
            },
        })
    }

    /// Two-layer generative net `[n_x, n_z, n_p]` with the root clamped to
    /// `z_p`, whose energy is `½ rb` when both variances are 1.
    pub fn to_pcn(&self) -> Result<Pcn> {
        let topo = Topology::uniform(vec![self.n_x(), self.n_z(), self.z_p.len()], self.f, Direction::Generative)?;
        let with_zero_bias = |w: &Matrix| Matrix::from_fn(w.rows(), w.cols() + 1, |i, j| if j < w.cols() { w[(i, j)] } else { 0.0 });
        Pcn::new(
            topo,
            Params {
                weights: vec![with_zero_bias(&self.w_x), with_zero_bias(&self.w_z)],
            },
        )
    }

    /// Draw `n` samples of `x` from the model.
    pub fn sample(&self, n: usize, rng: &mut Rng) -> Result<Dataset> {
        let u_z = matvec(&self.w_z, &self.z_p)?;
        let (sx, sz) = (self.sigma_x2.sqrt(), self.sigma_z2.sqrt());
        let mut xs = Vec::with_capacity(n);
        for _ in 0..n {
            let z: Vector = u_z.iter().map(|&u| self.f.apply(u) + sz * rng.normal()).collect();
            let u_x = matvec(&self.w_x, &z)?;
            xs.push(u_x.iter().map(|&u| self.f.apply(u) + sx * rng.normal()).collect());
        }
        Dataset::new("linear_latent", xs, None)
    }
}

/// `F = E − ½ ln det H⁻¹ − ½ n ln 2π = E + ½ ln det H − ½ n ln 2π`.
pub fn free_energy(e: f64, logdet_h: f64, n: usize) -> f64 {
    e + 0.5 * logdet_h - 0.5 * n as f64 * (2.0 * PI).ln()
}

/// `F(Σ̃) = E + ½ Σ H_ij Σ̃_ij − ½ ln det Σ̃ − ½ n (ln 2π + 1)` for any
/// positive definite `Σ̃`.
pub fn vfe_at(e: f64, h: &Matrix, sigma: &Matrix) -> Result<f64> {
    if h.shape() != sigma.shape() {
        return Err(Error::shape("vfe_at", h.shape(), sigma.shape()));
    }
    let (sign, logdet) = slogdet(sigma)?;
    if sign <= 0.0 {
        return Err(Error::NotPositiveDefinite);
    }
    let n = h.rows() as f64;
    let trace: f64 = h.as_slice().iter().zip(sigma.as_slice()).map(|(a, b)| a * b).sum();
    Ok(e + 0.5 * trace - 0.5 * logdet - 0.5 * n * ((2.0 * PI).ln() + 1.0))
}

/// `½ Σ_ℓ (εᵀΠε − ln det Π)` over the layers with error nodes.
pub fn multilayer_energy_logdet(pcn: &Pcn, state: &NetState, precisions: &PrecisionSet) -> f64 {
    let e = pcn.energy_with(state, precisions).total;
    let logdet: f64 = (0..state.errors.len())
        .filter(|&l| !state.errors[l].is_empty())
        .filter_map(|l| precisions.get(l))
        .map(|p| p.iter().map(|v| v.ln()).sum::<f64>())
        .sum();
    e - 0.5 * logdet
}

/// How the E-step represents the posterior.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PosteriorKind {
    /// Mode only; the M-step descends `rb(x, z̃)`.
    Map,
    /// Mode and `H⁻¹`; the M-step descends `E_q[rb]`. Linear `f` only.
    Gaussian,
}

#[derive(Clone, Debug)]
pub struct EmConfig {
    pub iterations: usize,
    pub alpha: f64,
    pub posterior: PosteriorKind,
    /// Newton iterations for the E-step (warm-started from the previous mode).
    pub estep_iters: usize,
    pub estep_tol: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            iterations: 200,
            alpha: 0.05,
            posterior: PosteriorKind::Gaussian,
            estep_iters: 50,
            estep_tol: 1e-12,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct EmTrace {
    /// Mean `rb(x, z̃)` after each E-step.
    pub energies: Vec<f64>,
    /// Mean exact NLL after each E-step (linear models only).
    pub nll: Vec<Option<f64>>,
    /// Modes after each E-step.
    pub modes: Vec<Vec<Vector>>,
    /// Parameters after each M-step.
    pub snapshots: Vec<RaoBallardModel>,
}

fn mean_nll(model: &RaoBallardModel, xs: &[Vector]) -> Option<f64> {
    let mut s = 0.0;
    for x in xs {
        s += model.nll_oracle_linear(x).ok()?;
    }
    Some(s / xs.len() as f64)
}

/// Alternate full E-steps and one-gradient-step M-steps on a fixed batch.
pub fn run_em(model: &mut RaoBallardModel, data: &Dataset, cfg: &EmConfig) -> Result<EmTrace> {
    if data.x_dim() != model.n_x() || data.is_empty() {
        return Err(Error::Dataset(format!("expected {}-dimensional samples", model.n_x())));
    }
    if cfg.posterior == PosteriorKind::Gaussian && model.f != Activation::Linear {
        return Err(Error::Unsupported("Gaussian posterior E-step is exact only for linear models".into()));
    }
    let xs: Vec<Vector> = data.samples().iter().map(|s| s.x.clone()).collect();
    let mut modes: Vec<Vector> = vec![Vector::zeros(model.n_z()); xs.len()];
    let mut trace = EmTrace::default();
    for _ in 0..cfg.iterations {
        let mut posts = Vec::with_capacity(xs.len());
        let mut e = 0.0;
        for (x, z) in xs.iter().zip(modes.iter_mut()) {
            *z = model.newton_estep(x, z, cfg.estep_iters, cfg.estep_tol)?;
            e += model.rb_energy(x, z)?;
            posts.push(match cfg.posterior {
                PosteriorKind::Map => Posterior::Delta(z.clone()),
                PosteriorKind::Gaussian => {
                    // posterior covariance is the inverse Hessian of ½ rb
                    let mut h = model.hessian(x, z)?;
                    h.scale(0.5);
                    Posterior::Gaussian {
                        mean: z.clone(),
                        cov: inverse_spd(&h)?,
                    }
                }
            });
        }
        trace.energies.push(e / xs.len() as f64);
        trace.nll.push(mean_nll(model, &xs));
        trace.modes.push(modes.clone());
        model.mstep_batch(&xs, &posts, cfg.alpha)?;
        trace.snapshots.push(model.clone());
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_gradient, GradCheck};

    fn linear(rng: &mut Rng) -> RaoBallardModel {
        let mut m = RaoBallardModel::random(4, 2, 2, Activation::Linear, rng, 0.8);
        m.sigma_x2 = 0.5;
        m.sigma_z2 = 1.5;
        m
    }

    #[test]
    fn zero_energy_point() {
        let mut rng = Rng::new(1);
        let m = RaoBallardModel::random(3, 2, 2, Activation::Tanh, &mut rng, 0.8);
        let z: Vector = matvec(&m.w_z, &m.z_p).unwrap().iter().map(|&u| u.tanh()).collect();
        let x: Vector = matvec(&m.w_x, &z).unwrap().iter().map(|&u| u.tanh()).collect();
        assert_eq!(m.rb_energy(&x, &z).unwrap(), 0.0);
        assert!(m.map_estep(&x, &z, 0.1, 10).unwrap().bitwise_eq(&z));
    }

    #[test]
    fn matches_twice_the_generative_pcn_energy() {
        let mut rng = Rng::new(2);
        for f in Activation::ALL {
            let m = RaoBallardModel::random(3, 4, 2, f, &mut rng, 0.8);
            let x: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
            let z: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
            let pcn = m.to_pcn().unwrap();
            let mut s = pcn.zero_state();
            s.clamp(0, &x).unwrap();
            s.activations[1] = Vector::from(z.clone());
            s.clamp(2, &m.z_p).unwrap();
            pcn.predictions(&mut s).unwrap();
            let rb = m.rb_energy(&x, &z).unwrap();
            assert!((rb - 2.0 * pcn.energy(&s).total).abs() <= 1e-14 * rb.max(1.0));
        }
    }

    #[test]
    fn term_by_term() {
        let mut rng = Rng::new(3);
        let m = linear(&mut rng);
        let x = [0.1, -0.2, 0.3, 0.4];
        let z = [1.0, -1.0];
        let mut ex = 0.0;
        for i in 0..4 {
            let p = m.w_x[(i, 0)] * z[0] + m.w_x[(i, 1)] * z[1];
            ex += (x[i] - p) * (x[i] - p);
        }
        let mut ez = 0.0;
        for i in 0..2 {
            let p = m.w_z[(i, 0)] * m.z_p[0] + m.w_z[(i, 1)] * m.z_p[1];
            ez += (z[i] - p) * (z[i] - p);
        }
        let expect = ex / 0.5 + ez / 1.5;
        assert!((m.rb_energy(&x, &z).unwrap() - expect).abs() < 1e-13);
    }

    #[test]
    fn gradient_and_hessian_match_finite_differences() {
        let mut rng = Rng::new(4);
        let check = GradCheck::default();
        for f in [Activation::Linear, Activation::Tanh, Activation::Sigmoid] {
            let m = RaoBallardModel::random(3, 3, 2, f, &mut rng, 0.9);
            let x: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
            let z: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
            let g = m.grad_z(&x, &z).unwrap();
            let fd = finite_diff_gradient(|z| m.rb_energy(&x, z).unwrap(), &z, 1e-6);
            assert!(check.all_close(&g, &fd));
            let h = m.hessian(&x, &z).unwrap();
            for j in 0..3 {
                let col = finite_diff_gradient(|z| m.grad_z(&x, z).unwrap()[j], &z, 1e-6);
                assert!(check.all_close(&(0..3).map(|i| h[(j, i)]).collect::<Vec<_>>(), &col));
            }
            assert!(h.max_abs_diff(&h.transpose()) < 1e-9);
        }
    }

    #[test]
    fn mstep_gradients_match_finite_differences() {
        let mut rng = Rng::new(5);
        let check = GradCheck::default();
        let m = RaoBallardModel::random(3, 2, 2, Activation::Tanh, &mut rng, 0.9);
        let x: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
        let z: Vector = (0..2).map(|_| rng.normal()).collect();
        let g = m.gradients(&x, &Posterior::Delta(z.clone())).unwrap();
        let mut h = m.clone();
        let fd = finite_diff_gradient(
            |w| {
                h.w_x.as_mut_slice().copy_from_slice(w);
                h.rb_energy(&x, &z).unwrap()
            },
            m.w_x.as_slice(),
            1e-6,
        );
        assert!(check.all_close(g.w_x.as_slice(), &fd));
        let mut h = m.clone();
        let fd = finite_diff_gradient(
            |w| {
                h.w_z.as_mut_slice().copy_from_slice(w);
                h.rb_energy(&x, &z).unwrap()
            },
            m.w_z.as_slice(),
            1e-6,
        );
        assert!(check.all_close(g.w_z.as_slice(), &fd));
        let mut h = m.clone();
        let fd = finite_diff_gradient(
            |p| {
                h.z_p.copy_from_slice(p);
                h.rb_energy(&x, &z).unwrap()
            },
            &m.z_p,
            1e-6,
        );
        assert!(check.all_close(&g.z_p, &fd));
    }

    #[test]
    fn zero_errors_leave_the_model_unchanged() {
        let mut rng = Rng::new(6);
        let mut m = RaoBallardModel::random(3, 2, 2, Activation::Sigmoid, &mut rng, 0.8);
        m.learn_prior = true;
        let z: Vector = matvec(&m.w_z, &m.z_p).unwrap().iter().map(|&u| Activation::Sigmoid.apply(u)).collect();
        let x: Vector = matvec(&m.w_x, &z).unwrap().iter().map(|&u| Activation::Sigmoid.apply(u)).collect();
        let before = m.clone();
        m.mstep(&x, &z, 0.5).unwrap();
        assert_eq!(m, before);
    }

    #[test]
    fn gradient_descent_estep_reaches_the_newton_mode() {
        let mut rng = Rng::new(7);
        let m = linear(&mut rng);
        let x: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
        let z0 = [0.0, 0.0];
        let exact = m.newton_estep(&x, &z0, 5, 1e-14).unwrap();
        let lmax = m.hessian(&x, &z0).unwrap().trace();
        let gd = m.map_estep(&x, &z0, 1.0 / lmax, 5000).unwrap();
        assert!(gd.max_abs_diff(&exact) < 1e-9);
        assert!(m.grad_z(&x, &gd).unwrap().norm_sq().sqrt() < 1e-6);
    }

    #[test]
    fn nll_of_zero_loading_is_a_standard_normal() {
        let m = RaoBallardModel::new(
            Matrix::zeros(1, 1),
            Matrix::zeros(1, 1),
            Vector::zeros(1),
            1.0,
            1.0,
            Activation::Linear,
        )
        .unwrap();
        assert!((m.nll_oracle_linear(&[0.0]).unwrap() - 0.5 * (2.0 * PI).ln()).abs() < 1e-15);
        let mut t = m.clone();
        t.f = Activation::Tanh;
        assert!(matches!(t.nll_oracle_linear(&[0.0]), Err(Error::Unsupported(_))));
    }

    #[test]
    fn linear_vfe_is_the_exact_nll() {
        let mut rng = Rng::new(8);
        let m = linear(&mut rng);
        let x: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
        let z = m.newton_estep(&x, &[0.0, 0.0], 5, 1e-14).unwrap();
        let r = m.gaussian_vfe(&x, &z).unwrap();
        assert!((r.f.unwrap() - m.nll_oracle_linear(&x).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn scalar_vfe() {
        assert!((free_energy(0.0, 0.0, 1) + 0.5 * (2.0 * PI).ln()).abs() < 1e-15);
        let one = Matrix::identity(1);
        assert!((vfe_at(0.0, &one, &one).unwrap() + 0.5 * (2.0 * PI).ln()).abs() < 1e-15);
    }

    #[test]
    fn logdet_energy() {
        let t = Topology::uniform(vec![2, 3], Activation::Linear, Direction::Discriminative).unwrap();
        let pcn = Pcn::new(t.clone(), Params::zeros(&t)).unwrap();
        let mut s = pcn.zero_state();
        s.activations[1] = Vector::from(vec![1.0, 2.0, -1.0]);
        pcn.predictions(&mut s).unwrap();
        let id = PrecisionSet::identity(&t);
        assert_eq!(multilayer_energy_logdet(&pcn, &s, &id), pcn.energy(&s).total);
        let mut two = id.clone();
        two.set(1, Vector::filled(3, 2.0)).unwrap();
        let mut ones = id.clone();
        ones.set(1, Vector::filled(3, 1.0)).unwrap();
        let diff = multilayer_energy_logdet(&pcn, &s, &two) - multilayer_energy_logdet(&pcn, &s, &ones);
        // +½‖ε‖²_Π − ½ Σ ln 2 with ‖ε‖² = 6
        assert!((diff - (3.0 - 1.5 * 2f64.ln())).abs() < 1e-14);
    }

    #[test]
    fn gaussian_posterior_rejects_nonlinear_models() {
        let mut rng = Rng::new(9);
        let m = RaoBallardModel::random(2, 2, 1, Activation::Tanh, &mut rng, 0.5);
        let q = Posterior::Gaussian {
            mean: Vector::zeros(2),
            cov: Matrix::identity(2),
        };
        assert!(matches!(m.gradients(&[0.0, 0.0], &q), Err(Error::Unsupported(_))));
    }

    #[test]
    fn em_decreases_the_nll() {
        let mut rng = Rng::new(10);
        let truth = linear(&mut rng);
        let data = truth.sample(50, &mut rng).unwrap();
        let mut m = RaoBallardModel::random(4, 2, 2, Activation::Linear, &mut rng, 0.3);
        m.sigma_x2 = truth.sigma_x2;
        m.sigma_z2 = truth.sigma_z2;
        let trace = run_em(
            &mut m,
            &data,
            &EmConfig {
                iterations: 50,
                ..Default::default()
            },
        )
        .unwrap();
        let nll: Vec<f64> = trace.nll.iter().map(|v| v.unwrap()).collect();
        assert!(nll.windows(2).all(|w| w[1] <= w[0] + 1e-8));
        assert!(nll.last().unwrap() < &nll[0]);
    }
}
