//! Monomial embedding: a degree-≤2 PTF is a linear classifier on `ψ(x)`.
//!
//! Layout for degree 2: `x_i x_j` for `i ≤ j` in row-major upper-triangle
//! order, then `x_1..x_n`, then `1`. Degree 1 drops the quadratic block.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::poly::QuadPoly;

pub fn feature_dim(degree: usize, n: usize) -> usize {
    match degree {
        1 => n + 1,
        _ => n * (n + 1) / 2 + n + 1,
    }
}

pub fn feature_map(degree: usize, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut out = Vec::with_capacity(feature_dim(degree, n));
    if degree >= 2 {
        for i in 0..n {
            for j in i..n {
                out.push(x[i] * x[j]);
            }
        }
    }
    out.extend_from_slice(x);
    out.push(1.0);
    out
}

/// The polynomial `ψ(x)·coeff`.
pub fn coeff_to_poly(degree: usize, n: usize, coeff: &[f64]) -> Result<QuadPoly> {
    if !(1..=2).contains(&degree) {
        return Err(Error::UnsupportedDegree(degree));
    }
    Error::check_dim(feature_dim(degree, n), coeff.len())?;
    let mut a = DMatrix::zeros(n, n);
    let mut k = 0;
    if degree == 2 {
        for i in 0..n {
            for j in i..n {
                if i == j {
                    a[(i, i)] = coeff[k];
                } else {
                    a[(i, j)] = 0.5 * coeff[k];
                    a[(j, i)] = 0.5 * coeff[k];
                }
                k += 1;
            }
        }
    }
    let b = DVector::from_column_slice(&coeff[k..k + n]);
    QuadPoly::new(a, b, coeff[k + n])
}
