//! Jacobi-preconditioned conjugate gradient over matrix-free SPD operators.

use crate::imagecore::Edge;

/// A symmetric positive (semi-)definite operator applied without storing the matrix.
pub trait SpdOperator {
    fn dim(&self) -> usize;
    /// `out = A x`
    fn apply(&self, x: &[f64], out: &mut [f64]);
    fn diagonal(&self) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy)]
pub struct CgOutcome {
    pub iterations: usize,
    /// `||b - A x|| / ||b||` at exit.
    pub relative_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` in place starting from the contents of `x`.
pub fn pcg<A: SpdOperator>(op: &A, b: &[f64], x: &mut [f64], tol: f64, max_iters: usize) -> CgOutcome {
    let n = op.dim();
    debug_assert_eq!(b.len(), n);
    debug_assert_eq!(x.len(), n);

    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return CgOutcome {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }

    let inv_diag: Vec<f64> = op
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let mut ap = vec![0.0; n];
    op.apply(x, &mut ap);
    let mut r: Vec<f64> = b.iter().zip(&ap).map(|(bi, ai)| bi - ai).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut res = dot(&r, &r).sqrt() / b_norm;

    let mut iterations = 0;
    while res > tol && iterations < max_iters {
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        iterations += 1;
        res = dot(&r, &r).sqrt() / b_norm;
        if res <= tol {
            break;
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    CgOutcome {
        iterations,
        relative_residual: res,
        converged: res <= tol,
    }
}

/// `diag(data) + lambda * Laplacian(edges)` on a pixel graph.
///
/// Each edge contributes `weight * (x_a - x_b)^2` to the quadratic form.
pub(crate) struct WeightedLaplacian<'a> {
    pub data_weight: &'a [f64],
    pub edges: &'a [Edge],
    pub lambda: f64,
}

impl SpdOperator for WeightedLaplacian<'_> {
    fn dim(&self) -> usize {
        self.data_weight.len()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for ((o, &d), &xi) in out.iter_mut().zip(self.data_weight).zip(x) {
            *o = d * xi;
        }
        for e in self.edges {
            let f = self.lambda * e.weight * (x[e.a] - x[e.b]);
            out[e.a] += f;
            out[e.b] -= f;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let mut d = self.data_weight.to_vec();
        for e in self.edges {
            d[e.a] += self.lambda * e.weight;
            d[e.b] += self.lambda * e.weight;
        }
        d
    }
}
