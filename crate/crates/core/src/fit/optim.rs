//! Quasi-Newton (BFGS) maximization with a backtracking Armijo line search.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub(crate) struct BfgsOptions {
    pub max_iter: usize,
    /// Converged once `max |∇f| <= grad_tol * max(1, |f|)`.
    pub grad_tol: f64,
    /// Looser tolerance accepted when the line search can make no progress.
    pub stall_tol: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            grad_tol: 1e-10,
            stall_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Maximum {
    pub x: Vec<f64>,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Maximize `f`, which returns the value and writes the gradient.
pub(crate) fn maximize<F>(mut f: F, x0: &[f64], opts: BfgsOptions) -> Result<Maximum>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInit(alloc::format!("objective {fx} at start {x:?}")));
    }
    // inverse Hessian of -f
    let mut h = identity(n);
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut dir = vec![0.0; n];
    let mut fresh = true;
    for _ in 0..opts.max_iter {
        let scale = fx.abs().max(1.0);
        if inf_norm(&g) <= opts.grad_tol * scale {
            return Ok(Maximum { x });
        }
        // ascent direction d = H g
        for i in 0..n {
            dir[i] = (0..n).map(|j| h[i * n + j] * g[j]).sum();
        }
        let mut slope = dot(&g, &dir);
        if !(slope > 0.0) {
            h = identity(n);
            dir.copy_from_slice(&g);
            slope = dot(&g, &g);
        }
        let mut step = 1.0;
        if fresh {
            // keep the first step modest
            step = (1.0 / inf_norm(&dir)).min(1.0);
        }
        let mut accepted = false;
        for _ in 0..80 {
            for i in 0..n {
                x_new[i] = x[i] + step * dir[i];
            }
            let f_new = f(&x_new, &mut g_new);
            if f_new.is_finite() && f_new >= fx + 1e-4 * step * slope && g_new.iter().all(|v| v.is_finite()) {
                accepted = true;
                let s: Vec<f64> = (0..n).map(|i| x_new[i] - x[i]).collect();
                // y is the change in the gradient of -f
                let y: Vec<f64> = (0..n).map(|i| g[i] - g_new[i]).collect();
                let sy = dot(&s, &y);
                if sy > 1e-300 {
                    if fresh {
                        let yy = dot(&y, &y);
                        h = identity(n);
                        h.iter_mut().for_each(|v| *v *= sy / yy);
                        fresh = false;
                    }
                    bfgs_update(&mut h, &s, &y, sy);
                }
                x.copy_from_slice(&x_new);
                g.copy_from_slice(&g_new);
                fx = f_new;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            if inf_norm(&g) <= opts.stall_tol * scale {
                return Ok(Maximum { x });
            }
            if !fresh {
                h = identity(n);
                fresh = true;
                continue;
            }
            return Err(Error::NotConverged {
                grad_norm: inf_norm(&g),
                best: x,
            });
        }
    }
    if inf_norm(&g) <= opts.stall_tol * fx.abs().max(1.0) {
        return Ok(Maximum { x });
    }
    Err(Error::NotConverged {
        grad_norm: inf_norm(&g),
        best: x,
    })
}

fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

/// `H <- (I - ρ s yᵀ) H (I - ρ y sᵀ) + ρ s sᵀ`.
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i * n + j] * y[j]).sum()).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

/// Negative Hessian of `f` at `x` by central differences of the gradient,
/// symmetrized.
pub(crate) fn negative_hessian<F>(mut f: F, x: &[f64]) -> Vec<f64>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x.len();
    let mut out = vec![0.0; n * n];
    let mut up = vec![0.0; n];
    let mut dn = vec![0.0; n];
    let mut xp = x.to_vec();
    for i in 0..n {
        let h = 1e-5 * (1.0 + x[i].abs());
        xp[i] = x[i] + h;
        f(&xp, &mut up);
        xp[i] = x[i] - h;
        f(&xp, &mut dn);
        xp[i] = x[i];
        for j in 0..n {
            out[j * n + i] = -(up[j] - dn[j]) / (2.0 * h);
        }
    }
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (out[i * n + j] + out[j * n + i]);
            out[i * n + j] = avg;
            out[j * n + i] = avg;
        }
    }
    out
}
