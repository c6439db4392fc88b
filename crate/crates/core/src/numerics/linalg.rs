//! Small dense factorizations for the probabilistic model: Cholesky for SPD
//! systems and partial-pivot LU for signed log-determinants.

use super::{Matrix, Vector};
use crate::error::{Error, Result};

/// Lower-triangular `L` with `A = L Lᵀ`.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    let n = square(a, "cholesky")?;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

fn square(a: &Matrix, op: &'static str) -> Result<usize> {
    if a.rows() != a.cols() {
        return Err(Error::shape(op, a.shape(), (a.cols(), a.rows())));
    }
    Ok(a.rows())
}

/// Solve `L Lᵀ x = b` given the Cholesky factor.
pub fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vector {
    let n = l.rows();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[(k, i)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    Vector::from(y)
}

/// Solve `A x = b` for symmetric positive definite `A`.
pub fn solve_spd(a: &Matrix, b: &[f64]) -> Result<Vector> {
    let n = square(a, "solve_spd")?;
    if b.len() != n {
        return Err(Error::shape("solve_spd", a.shape(), (b.len(), 1)));
    }
    Ok(cholesky_solve(&cholesky(a)?, b))
}

pub fn inverse_spd(a: &Matrix) -> Result<Matrix> {
    let n = square(a, "inverse_spd")?;
    let l = cholesky(a)?;
    let mut inv = Matrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        let col = cholesky_solve(&l, &e);
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    // exact symmetry
    for i in 0..n {
        for j in i + 1..n {
            let m = 0.5 * (inv[(i, j)] + inv[(j, i)]);
            inv[(i, j)] = m;
            inv[(j, i)] = m;
        }
    }
    Ok(inv)
}

/// `ln det A` for symmetric positive definite `A`.
pub fn logdet_spd(a: &Matrix) -> Result<f64> {
    let l = cholesky(a)?;
    Ok((0..l.rows()).map(|i| 2.0 * l[(i, i)].ln()).sum())
}

/// `(sign, ln |det A|)` via LU with partial pivoting. A singular matrix gives
/// `(0.0, -inf)`.
pub fn slogdet(a: &Matrix) -> Result<(f64, f64)> {
    let n = square(a, "slogdet")?;
    let mut m = a.clone();
    let mut sign = 1.0;
    let mut acc = 0.0;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| m[(i, c)].abs().total_cmp(&m[(j, c)].abs()))
            .unwrap();
        let piv = m[(p, c)];
        if piv == 0.0 {
            return Ok((0.0, f64::NEG_INFINITY));
        }
        if p != c {
            for k in 0..n {
                let t = m[(c, k)];
                m[(c, k)] = m[(p, k)];
                m[(p, k)] = t;
            }
            sign = -sign;
        }
        if piv < 0.0 {
            sign = -sign;
        }
        acc += piv.abs().ln();
        for i in c + 1..n {
            let f = m[(i, c)] / piv;
            for k in c..n {
                m[(i, k)] -= f * m[(c, k)];
            }
        }
    }
    Ok((sign, acc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{matmul, matvec, Rng};

    fn random_spd(n: usize, rng: &mut Rng) -> Matrix {
        let b = Matrix::from_fn(n, n, |_, _| rng.uniform(-1.0, 1.0));
        let mut a = matmul(&b, &b.transpose()).unwrap();
        for i in 0..n {
            a[(i, i)] += 0.5;
        }
        a
    }

    #[test]
    fn cholesky_reconstructs() {
        let mut rng = Rng::new(11);
        let a = random_spd(5, &mut rng);
        let l = cholesky(&a).unwrap();
        let back = matmul(&l, &l.transpose()).unwrap();
        assert!(back.max_abs_diff(&a) < 1e-12);
    }

    #[test]
    fn solve_and_inverse_agree() {
        let mut rng = Rng::new(12);
        let a = random_spd(4, &mut rng);
        let b: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
        let x = solve_spd(&a, &b).unwrap();
        let ax = matvec(&a, &x).unwrap();
        for i in 0..4 {
            assert!((ax[i] - b[i]).abs() < 1e-12);
        }
        let inv = inverse_spd(&a).unwrap();
        let id = matmul(&a, &inv).unwrap();
        assert!(id.max_abs_diff(&Matrix::identity(4)) < 1e-12);
    }

    #[test]
    fn logdets_agree() {
        let mut rng = Rng::new(13);
        let a = random_spd(6, &mut rng);
        let (s, l) = slogdet(&a).unwrap();
        assert_eq!(s, 1.0);
        assert!((l - logdet_spd(&a).unwrap()).abs() < 1e-12);
        let d = Matrix::diag(&[2.0, -3.0]);
        let (s, l) = slogdet(&d).unwrap();
        assert_eq!(s, -1.0);
        assert!((l - 6f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn indefinite_is_rejected() {
        let a = Matrix::diag(&[1.0, -1.0]);
        assert!(matches!(cholesky(&a), Err(Error::NotPositiveDefinite)));
    }
}
