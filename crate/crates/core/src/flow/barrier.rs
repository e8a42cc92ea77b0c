//! Equality-constrained damped Newton steps shared by the barrier solvers.

use alloc::vec;
use alloc::vec::Vec;

use crate::mdp::MdpSpec;

/// `M x = b`, restricted to the reachable coordinates of `Omega` and padded
/// with zero columns for auxiliary variables.
pub(crate) struct Equality {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
}

impl Equality {
    pub(crate) fn flow(mdp: &MdpSpec, reachable: &[usize], extra: usize) -> Self {
        let shape = mdp.shape();
        let dim = reachable.len() + extra;
        let mut column = vec![usize::MAX; shape.triplets()];
        for (j, &x) in reachable.iter().enumerate() {
            column[x] = j;
        }
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        let mut row = vec![0.0; dim];
        for a in 0..shape.actions {
            row[column[shape.index(0, mdp.initial_state(), a)]] = 1.0;
        }
        rows.push(row);
        rhs.push(1.0);
        for h in 1..shape.horizon {
            for s in 0..shape.states {
                if column[shape.index(h, s, 0)] == usize::MAX {
                    continue;
                }
                let mut row = vec![0.0; dim];
                for a in 0..shape.actions {
                    row[column[shape.index(h, s, a)]] = 1.0;
                }
                for prev in 0..shape.states {
                    for a in 0..shape.actions {
                        let j = column[shape.index(h - 1, prev, a)];
                        if j != usize::MAX {
                            row[j] -= mdp.transition_row(h - 1, prev, a)[s];
                        }
                    }
                }
                rows.push(row);
                rhs.push(0.0);
            }
        }
        Self { rows, rhs }
    }
}

/// A convex function that is `+inf` outside an open domain.
pub(crate) trait Barrier {
    fn value(&self, x: &[f64]) -> Option<f64>;
    /// Writes the gradient and the dense row-major Hessian at `x`.
    fn derivatives(&self, x: &[f64], grad: &mut [f64], hess: &mut [f64]);
}

/// Newton's method from a strictly feasible `x`, staying in the domain by
/// backtracking. Returns `(steps, last Newton decrement)`.
pub(crate) fn center(f: &impl Barrier, eq: &Equality, x: &mut [f64], max_steps: usize) -> (usize, f64) {
    let dim = x.len();
    let r = eq.rows.len();
    let size = dim + r;
    let mut kkt = vec![0.0; size * size];
    let mut rhs = vec![0.0; size];
    let mut grad = vec![0.0; dim];
    let mut hess = vec![0.0; dim * dim];
    let mut trial = vec![0.0; dim];
    let mut decrement = f64::INFINITY;
    let mut steps = 0;
    while steps < max_steps {
        grad.iter_mut().for_each(|g| *g = 0.0);
        hess.iter_mut().for_each(|h| *h = 0.0);
        f.derivatives(x, &mut grad, &mut hess);
        kkt.iter_mut().for_each(|k| *k = 0.0);
        for i in 0..dim {
            kkt[i * size..i * size + dim].copy_from_slice(&hess[i * dim..(i + 1) * dim]);
            rhs[i] = -grad[i];
        }
        for (k, row) in eq.rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                kkt[(dim + k) * size + j] = v;
                kkt[j * size + dim + k] = v;
            }
            // pull round-off drift back onto the affine set
            let residual: f64 = row.iter().zip(x.iter()).map(|(a, b)| a * b).sum::<f64>() - eq.rhs[k];
            rhs[dim + k] = -residual;
        }
        if !solve_kkt(&kkt, &mut rhs, size, dim) {
            break;
        }
        let direction = &rhs[..dim];
        decrement = -grad.iter().zip(direction).map(|(g, d)| g * d).sum::<f64>();
        if decrement / 2.0 <= 1e-12 {
            break;
        }
        let current = f.value(x).unwrap_or(f64::INFINITY);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            for j in 0..dim {
                trial[j] = x[j] + step * direction[j];
            }
            if let Some(value) = f.value(&trial) {
                if value <= current - 0.25 * step * decrement {
                    x.copy_from_slice(&trial);
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        steps += 1;
        if !accepted {
            break;
        }
    }
    (steps, decrement.max(0.0))
}

/// Solves the symmetric KKT system `K x = b` (primal block first, `dim`
/// rows) with diagonal equilibration and two rounds of iterative
/// refinement. The primal block spans many orders of magnitude near the
/// boundary, which costs plain elimination most of its accuracy in the
/// equality rows. `b` receives the solution.
fn solve_kkt(kkt: &[f64], b: &mut [f64], size: usize, dim: usize) -> bool {
    let mut d = vec![1.0; size];
    for i in 0..dim {
        let diag = kkt[i * size + i];
        if diag > 0.0 && diag.is_finite() {
            d[i] = 1.0 / libm::sqrt(diag);
        }
    }
    for k in dim..size {
        let norm = (0..dim).map(|j| libm::fabs(kkt[k * size + j] * d[j])).fold(0.0, f64::max);
        if norm > 0.0 {
            d[k] = 1.0 / norm;
        }
    }
    let scaled: Vec<f64> = (0..size * size).map(|ij| kkt[ij] * d[ij / size] * d[ij % size]).collect();
    let target = b.to_vec();
    let mut x = vec![0.0; size];
    let mut residual = target.clone();
    let mut work = vec![0.0; size * size];
    for _ in 0..3 {
        work.copy_from_slice(&scaled);
        let mut y: Vec<f64> = residual.iter().zip(&d).map(|(r, d)| r * d).collect();
        if !solve_dense(&mut work, &mut y, size) {
            return false;
        }
        for i in 0..size {
            x[i] += d[i] * y[i];
        }
        for i in 0..size {
            residual[i] = target[i] - (0..size).map(|j| kkt[i * size + j] * x[j]).sum::<f64>();
        }
    }
    b.copy_from_slice(&x);
    true
}

/// Solves `A x = b` in place by Gaussian elimination with partial pivoting.
/// `b` receives the solution; returns `false` on a singular matrix.
pub(crate) fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> bool {
    for col in 0..n {
        let pivot =
            (col..n).max_by(|&i, &j| libm::fabs(a[i * n + col]).total_cmp(&libm::fabs(a[j * n + col]))).unwrap();
        let p = a[pivot * n + col];
        if p == 0.0 || !p.is_finite() {
            return false;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        for row in col + 1..n {
            let factor = a[row * n + col] / p;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= factor * a[col * n + k];
            }
            b[row] -= factor * b[col];
        }
    }
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row * n + k] * b[k];
        }
        b[row] = acc / a[row * n + row];
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_solver() {
        let mut a = vec![0.0, 2.0, 1.0, 1.0];
        let mut b = vec![4.0, 3.0];
        assert!(solve_dense(&mut a, &mut b, 2));
        assert!((b[0] - 1.0).abs() < 1e-12 && (b[1] - 2.0).abs() < 1e-12);
        let mut singular = vec![1.0, 2.0, 2.0, 4.0];
        assert!(!solve_dense(&mut singular, &mut [1.0, 1.0], 2));
    }
}
