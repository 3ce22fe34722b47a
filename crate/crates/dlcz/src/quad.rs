//! Gauss–Hermite rules for expectations over a standard normal variable.

use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights with Σ w f(x) ≈ E[f(Z)], Z ~ N(0, 1). Exact for polynomials of degree < 2n.
pub fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1, "need at least one node");
    if n == 1 {
        return vec![(0.0, 1.0)];
    }
    // Golub–Welsch on the Jacobi matrix of the probabilists' Hermite polynomials
    let mut j = DMatrix::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        j[(k, k - 1)] = b;
        j[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut out: Vec<(f64, f64)> =
        (0..n).map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2))).collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    let s: f64 = out.iter().map(|p| p.1).sum();
    out.iter_mut().for_each(|p| p.1 /= s);
    out
}
