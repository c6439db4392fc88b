use serde::{Deserialize, Serialize};

use super::Vector;

/// Elementwise nonlinearity `f` applied to predictions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Linear,
    Tanh,
    Sigmoid,
    Relu,
}

impl Activation {
    pub const ALL: [Activation; 4] = [
        Activation::Linear,
        Activation::Tanh,
        Activation::Sigmoid,
        Activation::Relu,
    ];

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Linear => x,
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
            Activation::Relu => x.max(0.0),
        }
    }

    /// `f'(x)`. The ReLU derivative at exactly 0 is 0.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `f''(x)`; 0 for ReLU everywhere it is defined.
    #[inline]
    pub fn second_derivative(self, x: f64) -> f64 {
        match self {
            Activation::Linear | Activation::Relu => 0.0,
            Activation::Tanh => {
                let t = x.tanh();
                -2.0 * t * (1.0 - t * t)
            }
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s) * (1.0 - 2.0 * s)
            }
        }
    }

    pub fn is_smooth(self) -> bool {
        !matches!(self, Activation::Relu)
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Linear => "linear",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Relu => "relu",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "linear" | "identity" => Ok(Activation::Linear),
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            "relu" => Ok(Activation::Relu),
            other => Err(format!("unknown activation `{other}`")),
        }
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn apply_activation(f: Activation, v: &[f64]) -> Vector {
    v.iter().map(|&x| f.apply(x)).collect()
}

pub fn activation_derivative(f: Activation, v: &[f64]) -> Vector {
    v.iter().map(|&x| f.derivative(x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    #[test]
    fn linear_is_identity() {
        let v = [-1.0, 0.0, 2.0];
        assert_eq!(&apply_activation(Activation::Linear, &v)[..], &v);
        assert_eq!(&activation_derivative(Activation::Linear, &v)[..], &[1.0; 3]);
    }

    #[test]
    fn relu_and_its_kink() {
        assert_eq!(&apply_activation(Activation::Relu, &[-1.0, 0.0, 2.0])[..], &[0.0, 0.0, 2.0]);
        assert_eq!(&activation_derivative(Activation::Relu, &[-2.0, 0.0, 3.0])[..], &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn sigmoid_at_zero() {
        assert_eq!(&apply_activation(Activation::Sigmoid, &[0.0])[..], &[0.5]);
    }

    #[test]
    fn tanh_derivative_matches_central_difference() {
        let h = 1e-6;
        let f = Activation::Tanh;
        let fd = (f.apply(0.3 + h) - f.apply(0.3 - h)) / (2.0 * h);
        assert!((f.derivative(0.3) - fd).abs() < 1e-8);
    }

    #[test]
    fn smooth_derivatives_match_finite_differences_at_random_points() {
        let mut rng = Rng::new(5);
        let h = 1e-6;
        for f in [Activation::Linear, Activation::Tanh, Activation::Sigmoid] {
            for _ in 0..100 {
                let x = rng.uniform(-4.0, 4.0);
                let fd = (f.apply(x + h) - f.apply(x - h)) / (2.0 * h);
                let d = f.derivative(x);
                assert!((d - fd).abs() <= 1e-6 * d.abs().max(fd.abs()) + 1e-9, "{f:?} at {x}");
                let fd2 = (f.derivative(x + h) - f.derivative(x - h)) / (2.0 * h);
                let d2 = f.second_derivative(x);
                assert!((d2 - fd2).abs() <= 1e-6 * d2.abs().max(fd2.abs()) + 1e-9, "{f:?}'' at {x}");
            }
        }
    }

    #[test]
    fn parses_names() {
        for f in Activation::ALL {
            assert_eq!(f.name().parse::<Activation>().unwrap(), f);
        }
        assert!("softmax".parse::<Activation>().is_err());
    }
}
