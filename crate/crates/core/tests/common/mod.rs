#![allow(dead_code)]

use incompat_core::povm::{HermitianOp, PovmTensor, ProbabilityVector};
use incompat_core::RngStream;
use nalgebra::DMatrix;
use num_complex::Complex64;

fn random_complex(rng: &mut RngStream) -> Complex64 {
    Complex64::new(2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0)
}

/// A random `k`-outcome POVM on `C^d`: `A_i = S^{-1/2} X_i S^{-1/2}` with
/// `X_i = B_i B_i†` for random complex `B_i` and `S = Σ X_i`.
pub fn random_povm(rng: &mut RngStream, d: usize, k: usize) -> PovmTensor {
    let xs: Vec<DMatrix<Complex64>> = (0..k)
        .map(|_| {
            let b = DMatrix::from_fn(d, d, |_, _| random_complex(rng));
            &b * b.adjoint()
        })
        .collect();
    let s = xs.iter().fold(DMatrix::zeros(d, d), |acc, x| acc + x);
    let eig = s.symmetric_eigen();
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| Complex64::new(1.0 / l.sqrt(), 0.0)));
    let s_inv_half = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.adjoint();
    let effects = xs
        .iter()
        .map(|x| {
            let a = &s_inv_half * x * &s_inv_half;
            let a = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
            let entries = (0..d).flat_map(|r| (0..d).map(move |c| (r, c))).map(|(r, c)| a[(r, c)]).collect();
            HermitianOp::new(d, entries).expect("hermitian")
        })
        .collect();
    PovmTensor::from_effects(effects).expect("povm")
}

/// Strictly positive weights summing to one.
pub fn random_probability_vector(rng: &mut RngStream, k: usize) -> ProbabilityVector {
    let w: Vec<f64> = (0..k).map(|_| 0.05 + rng.uniform()).collect();
    let total: f64 = w.iter().sum();
    ProbabilityVector::new(w.into_iter().map(|x| x / total).collect()).expect("probability vector")
}

pub fn max_defect(x: &PovmTensor, y: &PovmTensor) -> f64 {
    x.elements().iter().zip(y.elements()).map(|(a, b)| a.max_abs_diff(b)).fold(0.0, f64::max)
}
