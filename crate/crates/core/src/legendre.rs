//! Legendre kernels P_{(d-3)/2} built from Rodrigues' formula with exact
//! integer arithmetic, plus the small dense-polynomial helpers they need.

use serde::Serialize;

use crate::error::{Error, Result};

/// Legendre polynomial of degree (d-3)/2, the kernel of the radial free-wave formula.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LegendreKernel {
    dimension: usize,
    coeffs: Vec<f64>,
}

impl LegendreKernel {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn degree(&self) -> usize {
        (self.dimension - 3) / 2
    }

    /// Monomial coefficients, lowest degree first.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, z: f64) -> f64 {
        poly_eval(&self.coeffs, z)
    }

    pub fn derivative(&self) -> Vec<f64> {
        poly_derivative(&self.coeffs)
    }
}

/// Rodrigues' formula: P_n(z) = 1 / (2^n n!) d^n/dz^n (z^2 - 1)^n with n = (d-3)/2.
pub fn legendre_poly(d: usize) -> Result<LegendreKernel> {
    if d.is_multiple_of(2) || !(3..=13).contains(&d) {
        return Err(Error::Domain(format!("dimension must be odd and in [3, 13], got {d}")));
    }
    let n = (d - 3) / 2;
    // (z^2 - 1)^n = sum_i C(n, i) (-1)^(n-i) z^(2i)
    let mut expanded = vec![0i128; 2 * n + 1];
    for i in 0..=n {
        let sign = if (n - i).is_multiple_of(2) { 1 } else { -1 };
        expanded[2 * i] = sign * binomial(n, i);
    }
    let mut denom: i128 = 1 << n;
    for k in 1..=n as i128 {
        denom *= k;
    }
    let coeffs = (0..=n)
        .map(|m| {
            // coefficient of z^m after n derivatives comes from z^(m+n)
            let j = m + n;
            let falling: i128 = ((m + 1)..=j).map(|v| v as i128).product();
            (expanded[j] * falling) as f64 / denom as f64
        })
        .collect();
    Ok(LegendreKernel { dimension: d, coeffs })
}

pub(crate) fn binomial(n: usize, k: usize) -> i128 {
    let mut acc: i128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as i128 / (i + 1) as i128;
    }
    acc
}

/// Horner evaluation, coefficients lowest degree first.
pub fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

pub fn poly_derivative(coeffs: &[f64]) -> Vec<f64> {
    if coeffs.len() <= 1 {
        return vec![0.0];
    }
    coeffs.iter().enumerate().skip(1).map(|(k, &c)| k as f64 * c).collect()
}

/// Coefficients of q(alpha * x + beta) as a polynomial in x.
pub fn poly_compose_affine(coeffs: &[f64], alpha: f64, beta: f64) -> Vec<f64> {
    let mut out = vec![0.0; coeffs.len().max(1)];
    // Horner on polynomials: acc <- acc * (alpha x + beta) + c
    let mut acc: Vec<f64> = Vec::with_capacity(coeffs.len());
    for &c in coeffs.iter().rev() {
        let mut next = vec![0.0; acc.len() + 1];
        for (k, &a) in acc.iter().enumerate() {
            next[k] += a * beta;
            next[k + 1] += a * alpha;
        }
        next[0] += c;
        acc = next;
    }
    for (o, a) in out.iter_mut().zip(acc) {
        *o = a;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_degree_kernels() {
        assert_eq!(legendre_poly(3).unwrap().coeffs(), &[1.0]);
        assert_eq!(legendre_poly(5).unwrap().coeffs(), &[0.0, 1.0]);
        assert_eq!(legendre_poly(7).unwrap().coeffs(), &[-0.5, 0.0, 1.5]);
        assert_eq!(legendre_poly(9).unwrap().coeffs(), &[0.0, -1.5, 0.0, 2.5]);
    }

    #[test]
    fn normalization_and_recurrence() {
        for d in (3..=13).step_by(2) {
            let p = legendre_poly(d).unwrap();
            assert_eq!(p.degree(), (d - 3) / 2);
            assert!((p.eval(1.0) - 1.0).abs() < 1e-12, "d={d}");
        }
        // Bonnet: (n+1) P_{n+1} = (2n+1) z P_n - n P_{n-1}
        for n in 1..5usize {
            let pm = legendre_poly(2 * n + 1).unwrap();
            let p = legendre_poly(2 * n + 3).unwrap();
            let pp = legendre_poly(2 * n + 5).unwrap();
            for &z in &[-0.9, -0.2, 0.35, 0.8] {
                let lhs = (n + 1) as f64 * pp.eval(z);
                let rhs = (2 * n + 1) as f64 * z * p.eval(z) - n as f64 * pm.eval(z);
                assert!((lhs - rhs).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_unsupported_dimensions() {
        assert!(legendre_poly(4).is_err());
        assert!(legendre_poly(1).is_err());
        assert!(legendre_poly(15).is_err());
    }

    #[test]
    fn affine_composition() {
        let q = [1.0, -2.0, 0.5, 3.0];
        let c = poly_compose_affine(&q, 0.7, -1.3);
        for &x in &[-2.0, 0.0, 0.4, 1.9] {
            assert!((poly_eval(&c, x) - poly_eval(&q, 0.7 * x - 1.3)).abs() < 1e-12);
        }
    }
}
