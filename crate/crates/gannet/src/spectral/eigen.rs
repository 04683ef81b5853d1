//! Symmetric eigensolvers backing the spectral embedding: a cyclic Jacobi
//! decomposition for dense problems and a deflated Lanczos iteration with
//! full reorthogonalization for larger sparse Laplacians.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use super::{Laplacian, SpectralError};
use crate::util::Matrix;

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues ascending with matching eigenvector columns.
pub fn jacobi_eigen(
    matrix: &Matrix,
    max_sweeps: usize,
) -> Result<(Vec<f64>, Matrix), SpectralError> {
    let n = matrix.n_rows();
    assert_eq!(n, matrix.n_cols(), "matrix must be square");
    let mut a: Vec<f64> = (0..n * n).map(|i| matrix.get(i / n, i % n)).collect();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    if n > 1 {
        let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let tol = 1e-14 * norm.max(1e-300);
        let mut converged = false;
        for _ in 0..max_sweeps {
            let off: f64 = (0..n)
                .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
                .map(|(p, q)| a[p * n + q] * a[p * n + q])
                .sum::<f64>()
                .sqrt();
            if off <= tol {
                converged = true;
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[p * n + q];
                    if apq.abs() <= tol / (n as f64) {
                        continue;
                    }
                    let app = a[p * n + p];
                    let aqq = a[q * n + q];
                    let tau = (aqq - app) / (2.0 * apq);
                    let t = if tau >= 0.0 {
                        1.0 / (tau + (1.0 + tau * tau).sqrt())
                    } else {
                        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = c * akp - s * akq;
                        a[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = c * apk - s * aqk;
                        a[q * n + k] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = c * vkp - s * vkq;
                        v[k * n + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
        if !converged {
            let off: f64 = (0..n)
                .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
                .map(|(p, q)| a[p * n + q] * a[p * n + q])
                .sum::<f64>()
                .sqrt();
            if off > tol * 1e3 {
                return Err(SpectralError::EigensolverFailure {
                    detail: format!("Jacobi did not converge in {max_sweeps} sweeps"),
                });
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[i * n + i]
            .partial_cmp(&a[j * n + j])
            .unwrap()
            .then(i.cmp(&j))
    });
    let values: Vec<f64> = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        // Canonical sign: largest-magnitude entry positive.
        let mut lead = 0;
        for r in 1..n {
            if v[r * n + src].abs() > v[lead * n + src].abs() {
                lead = r;
            }
        }
        let sign = if v[lead * n + src] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n {
            vectors.set(r, col, sign * v[r * n + src]);
        }
    }
    Ok((values, vectors))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    // Two Gram-Schmidt passes keep the basis orthogonal to working precision.
    for _ in 0..2 {
        for q in basis {
            let coef = dot(w, q);
            for (wi, qi) in w.iter_mut().zip(q) {
                *wi -= coef * qi;
            }
        }
    }
}

fn seeded_unit_vector(n: usize, rng: &mut ChaCha12Rng, against: &[Vec<f64>]) -> Option<Vec<f64>> {
    for _ in 0..32 {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        orthogonalize(&mut v, against);
        let nrm = norm(&v);
        if nrm > 1e-8 {
            for x in &mut v {
                *x /= nrm;
            }
            return Some(v);
        }
    }
    None
}

/// Smallest `how_many` eigenpairs of the Laplacian restricted to the
/// orthogonal complement of `deflate` (the known kernel basis). Lanczos with
/// full reorthogonalization; the tridiagonal problem is solved densely.
pub fn lanczos_smallest(
    lap: &Laplacian,
    deflate: &[Vec<f64>],
    how_many: usize,
    residual_tol: f64,
    max_dim: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>), SpectralError> {
    let n = lap.n_nodes();
    let avail = n - deflate.len();
    assert!(how_many <= avail, "requested more pairs than the deflated space holds");
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let cap = max_dim.min(avail);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new(); // betas[j] couples basis[j] and basis[j+1]

    let fail = |detail: String| SpectralError::EigensolverFailure { detail };
    let v0 = seeded_unit_vector(n, &mut rng, deflate)
        .ok_or_else(|| fail("could not seed a start vector outside the kernel".into()))?;
    basis.push(v0);

    let mut dim = (2 * how_many + 30).clamp(how_many, cap);
    loop {
        // Invariant: basis.len() == alphas.len() + 1 while the space allows.
        while alphas.len() < dim {
            let j = alphas.len();
            let mut w = vec![0.0; n];
            lap.matvec(&basis[j], &mut w);
            let alpha = dot(&w, &basis[j]);
            alphas.push(alpha);
            for (wi, vi) in w.iter_mut().zip(&basis[j]) {
                *wi -= alpha * vi;
            }
            if j > 0 {
                let beta_prev = betas[j - 1];
                for (wi, vi) in w.iter_mut().zip(&basis[j - 1]) {
                    *wi -= beta_prev * vi;
                }
            }
            orthogonalize(&mut w, deflate);
            orthogonalize(&mut w, &basis);
            if basis.len() >= avail {
                break; // the deflated space is fully spanned
            }
            let beta = norm(&w);
            if beta > 1e-12 {
                for x in &mut w {
                    *x /= beta;
                }
                betas.push(beta);
                basis.push(w);
            } else {
                // Invariant subspace found; restart in a fresh direction.
                let mut against: Vec<Vec<f64>> = deflate.to_vec();
                against.extend(basis.iter().cloned());
                match seeded_unit_vector(n, &mut rng, &against) {
                    Some(fresh) => {
                        betas.push(0.0);
                        basis.push(fresh);
                    }
                    None => break,
                }
            }
        }
        let m = alphas.len();
        if m == 0 {
            return Err(fail("empty Krylov space".into()));
        }
        let mut tri = Matrix::zeros(m, m);
        for i in 0..m {
            tri.set(i, i, alphas[i]);
            if i + 1 < m && i < betas.len() {
                tri.set(i, i + 1, betas[i]);
                tri.set(i + 1, i, betas[i]);
            }
        }
        let (ritz_values, ritz_vectors) = jacobi_eigen(&tri, 64)?;
        let take = how_many.min(m);
        let mut values = Vec::with_capacity(take);
        let mut vectors = Vec::with_capacity(take);
        let mut worst_residual: f64 = 0.0;
        for k in 0..take {
            let lambda = ritz_values[k];
            let mut x = vec![0.0; n];
            for (j, q) in basis.iter().take(m).enumerate() {
                let yj = ritz_vectors.get(j, k);
                for (xi, qi) in x.iter_mut().zip(q) {
                    *xi += yj * qi;
                }
            }
            let mut r = vec![0.0; n];
            lap.matvec(&x, &mut r);
            for (ri, xi) in r.iter_mut().zip(&x) {
                *ri -= lambda * xi;
            }
            worst_residual = worst_residual.max(norm(&r) / lambda.abs().max(1.0));
            values.push(lambda);
            vectors.push(x);
        }
        let exhausted = m >= cap || m < dim; // dim unreached means the space ran out
        if worst_residual <= residual_tol || exhausted {
            if worst_residual > residual_tol {
                return Err(fail(format!(
                    "Lanczos residual {worst_residual:.3e} above {residual_tol:.3e} at dimension cap {cap}"
                )));
            }
            if values.len() < how_many {
                return Err(fail(format!(
                    "Krylov space exhausted with {} of {how_many} pairs",
                    values.len()
                )));
            }
            for x in &mut vectors {
                let mut lead = 0;
                for (i, xi) in x.iter().enumerate() {
                    if xi.abs() > x[lead].abs() {
                        lead = i;
                    }
                }
                if x[lead] < 0.0 {
                    for xi in x.iter_mut() {
                        *xi = -*xi;
                    }
                }
            }
            return Ok((values, vectors));
        }
        dim = (dim + 50).min(cap);
    }
}
