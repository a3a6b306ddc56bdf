//! Matrix-free conjugate gradient for the symmetric positive-definite solves
//! used by the trace-norm minimisation, the implicit time steps and the
//! normal equations of the reconstruction.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug)]
pub struct CgStats {
    pub iterations: usize,
    pub rel_residual: f64,
}

/// Solve `A x = b` with `A` given as a closure writing `A*p` into its second
/// argument.  Converges when `||r|| <= rel_tol * ||b||`.
pub fn conjugate_gradient<S: Scalar>(
    mut apply: impl FnMut(&[S], &mut [S]),
    b: &[S],
    x: &mut [S],
    rel_tol: S,
    max_iter: usize,
) -> Result<CgStats> {
    let n = b.len();
    assert_eq!(x.len(), n);
    let dot = |a: &[S], c: &[S]| -> S { a.iter().zip(c).map(|(&p, &q)| p * q).sum() };

    let b_norm = dot(b, b).sqrt();
    if b_norm.is_zero() {
        x.iter_mut().for_each(|v| *v = S::zero());
        return Ok(CgStats {
            iterations: 0,
            rel_residual: 0.0,
        });
    }

    let mut ax = vec![S::zero(); n];
    apply(x, &mut ax);
    let mut r: Vec<S> = b.iter().zip(&ax).map(|(&bi, &axi)| bi - axi).collect();
    let mut p = r.clone();
    let mut rs_old = dot(&r, &r);
    let mut ap = vec![S::zero(); n];

    for iter in 0..max_iter {
        if rs_old.sqrt() <= rel_tol * b_norm {
            return Ok(CgStats {
                iterations: iter,
                rel_residual: (rs_old.sqrt() / b_norm).to_f64c(),
            });
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= S::zero() {
            return Err(Error::NoConvergence(format!(
                "CG curvature non-positive at iteration {iter} (pAp = {pap})"
            )));
        }
        let alpha = rs_old / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new = dot(&r, &r);
        let beta = rs_new / rs_old;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rs_old = rs_new;
    }
    let rel = (rs_old.sqrt() / b_norm).to_f64c();
    if rel <= rel_tol.to_f64c() {
        Ok(CgStats {
            iterations: max_iter,
            rel_residual: rel,
        })
    } else {
        Err(Error::NoConvergence(format!(
            "CG stalled after {max_iter} iterations, relative residual {rel:.3e}"
        )))
    }
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        num += (xi - mx) * (yi - my);
        den += (xi - mx) * (xi - mx);
    }
    num / den
}

/// Least-squares intercept and slope of `y` against `x`.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let slope = fit_slope(x, y);
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    (my - slope * mx, slope)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_spd_system() {
        // A = [[4,1],[1,3]], b = [1,2]
        let apply = |p: &[f64], out: &mut [f64]| {
            out[0] = 4.0 * p[0] + p[1];
            out[1] = p[0] + 3.0 * p[1];
        };
        let b = [1.0, 2.0];
        let mut x = [0.0, 0.0];
        let stats = conjugate_gradient(apply, &b, &mut x, 1e-12, 100).unwrap();
        assert!(stats.iterations <= 2 + 1);
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-10);
        assert!((x[1] - 7.0 / 11.0).abs() < 1e-10);
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let apply = |p: &[f64], out: &mut [f64]| out.copy_from_slice(p);
        let b = [0.0, 0.0, 0.0];
        let mut x = [1.0, 2.0, 3.0];
        conjugate_gradient(apply, &b, &mut x, 1e-12, 10).unwrap();
        assert_eq!(x, [0.0, 0.0, 0.0]);
    }

    #[test]
    fn slope_fit_recovers_exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let (b, a) = fit_line(&x, &y);
        assert!((a - 2.0).abs() < 1e-12);
        assert!((b - 1.0).abs() < 1e-12);
    }
}
