//! Central-difference oracles.

use super::Vector;

/// Central-difference gradient of `f` at `at`, one component at a time.
pub fn finite_diff_gradient(mut f: impl FnMut(&[f64]) -> f64, at: &[f64], h: f64) -> Vector {
    assert!(h > 0.0, "finite difference step must be positive");
    let mut x = at.to_vec();
    let mut g = Vector::zeros(at.len());
    for i in 0..at.len() {
        let orig = x[i];
        x[i] = orig + h;
        let fp = f(&x);
        x[i] = orig - h;
        let fm = f(&x);
        x[i] = orig;
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Mixed relative/absolute comparison used by every gradient check:
/// `|a - b| <= rtol * max(|a|, |b|) + atol`.
#[derive(Clone, Copy, Debug)]
pub struct GradCheck {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for GradCheck {
    fn default() -> Self {
        GradCheck {
            rtol: 1e-5,
            atol: 1e-8,
        }
    }
}

impl GradCheck {
    pub fn close(&self, a: f64, b: f64) -> bool {
        (a - b).abs() <= self.rtol * a.abs().max(b.abs()) + self.atol
    }

    /// Index and values of the first disagreement, if any.
    pub fn first_mismatch(&self, analytic: &[f64], numeric: &[f64]) -> Option<(usize, f64, f64)> {
        assert_eq!(analytic.len(), numeric.len());
        analytic
            .iter()
            .zip(numeric)
            .enumerate()
            .find(|(_, (a, b))| !self.close(**a, **b))
            .map(|(i, (a, b))| (i, *a, *b))
    }

    pub fn all_close(&self, analytic: &[f64], numeric: &[f64]) -> bool {
        self.first_mismatch(analytic, numeric).is_none()
    }
}
