//! Root finding and the Routh-Hurwitz test.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::poly::Polynomial;

/// Roots of `p` as eigenvalues of its companion matrix, sorted by real part
/// descending (imaginary part descending on ties).
pub fn poles(p: &Polynomial) -> Vec<Complex64> {
    let n = p.degree();
    if n == 0 {
        return Vec::new();
    }
    let lead = p.leading();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        m[(i, n - 1)] = -p.coeff(i) / lead;
    }
    let mut roots: Vec<Complex64> = m.complex_eigenvalues().iter().map(|z| Complex64::new(z.re, z.im)).collect();
    roots.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    roots
}

/// Largest real part among the roots of `p` (`-inf` for constants).
pub fn spectral_abscissa(p: &Polynomial) -> f64 {
    poles(p).first().map(|z| z.re).unwrap_or(f64::NEG_INFINITY)
}

/// First column of the Routh array and whether an epsilon had to be
/// substituted for a vanishing pivot. `None` signals an all-zero row, which
/// only occurs with roots placed symmetrically about the origin.
fn routh_first_column(p: &Polynomial) -> Option<(Vec<f64>, bool)> {
    let desc = p.descending();
    let sign = if desc[0] < 0.0 { -1.0 } else { 1.0 };
    let desc: Vec<f64> = desc.iter().map(|c| c * sign).collect();
    let n = desc.len() - 1;
    let width = n / 2 + 1;

    let mut prev: Vec<f64> = (0..width).map(|k| *desc.get(2 * k).unwrap_or(&0.0)).collect();
    let mut cur: Vec<f64> = (0..width).map(|k| *desc.get(2 * k + 1).unwrap_or(&0.0)).collect();
    let mut column = vec![prev[0]];
    let mut substituted = false;
    let eps_scale = p.max_abs();

    for _ in 0..n {
        let tol = 1e-12 * prev.iter().chain(cur.iter()).fold(0.0_f64, |m, c| m.max(c.abs()));
        if cur.iter().all(|c| c.abs() <= tol) {
            return None;
        }
        if cur[0].abs() <= tol {
            cur[0] = 1e-9 * eps_scale.max(1.0);
            substituted = true;
        }
        column.push(cur[0]);
        let next: Vec<f64> = (0..width)
            .map(|k| {
                let a = prev.get(k + 1).copied().unwrap_or(0.0);
                let b = cur.get(k + 1).copied().unwrap_or(0.0);
                (cur[0] * a - prev[0] * b) / cur[0]
            })
            .collect();
        prev = cur;
        cur = next;
        if column.len() == n + 1 {
            break;
        }
    }
    Some((column, substituted))
}

/// Routh-Hurwitz test: `true` iff every root of `den` lies strictly in the
/// open left half-plane.
///
/// A vanishing pivot is replaced by a small positive epsilon so the array
/// can be completed; any such substitution, or an all-zero row, reports the
/// polynomial as not strictly stable.
pub fn routh_hurwitz_stable(den: &Polynomial) -> Result<bool> {
    if den.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    if den.degree() == 0 {
        return Err(Error::InvalidParameter { name: "den", reason: "degree must be at least 1" });
    }
    Ok(match routh_first_column(den) {
        None => false,
        Some((column, substituted)) => !substituted && column.iter().all(|&c| c > 0.0),
    })
}

/// Number of sign changes in the Routh first column, i.e. the count of
/// right-half-plane roots. `None` when an all-zero row appears.
pub fn routh_rhp_count(den: &Polynomial) -> Option<usize> {
    let (column, _) = routh_first_column(den)?;
    Some(column.windows(2).filter(|w| (w[0] > 0.0) != (w[1] > 0.0)).count())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identified_plant_is_stable() {
        let p = Polynomial::from_descending(&[1.0, 303.4, 4661.0]);
        assert!(routh_hurwitz_stable(&p).unwrap());
        let r = poles(&p);
        assert!((r[0].re + 16.23).abs() < 0.01, "{:?}", r);
        assert!((r[1].re + 287.17).abs() < 0.01, "{:?}", r);
    }

    #[test]
    fn unstable_and_marginal() {
        assert!(!routh_hurwitz_stable(&Polynomial::from_descending(&[1.0, -1.0])).unwrap());
        assert!(!routh_hurwitz_stable(&Polynomial::from_descending(&[1.0, 0.0, 1.0])).unwrap());
        // s³ + s² + s + 1 = (s+1)(s²+1)
        assert!(!routh_hurwitz_stable(&Polynomial::from_descending(&[1.0, 1.0, 1.0, 1.0])).unwrap());
    }

    #[test]
    fn zero_polynomial_is_error() {
        assert_eq!(routh_hurwitz_stable(&Polynomial::zero()), Err(Error::ZeroPolynomial));
        assert!(routh_hurwitz_stable(&Polynomial::constant(2.0)).is_err());
    }

    #[test]
    fn negative_leading_coefficient() {
        // -(s+1)(s+2)
        let p = Polynomial::from_descending(&[-1.0, -3.0, -2.0]);
        assert!(routh_hurwitz_stable(&p).unwrap());
    }

    #[test]
    fn zero_pivot_counts_rhp_roots() {
        // s⁴ + s³ + 2s² + 2s + 3: zero pivot in row 3, two RHP roots
        let p = Polynomial::from_descending(&[1.0, 1.0, 2.0, 2.0, 3.0]);
        assert!(!routh_hurwitz_stable(&p).unwrap());
        assert_eq!(routh_rhp_count(&p), Some(2));
        let rhp = poles(&p).iter().filter(|z| z.re > 0.0).count();
        assert_eq!(rhp, 2);
    }

    #[test]
    fn poles_sorted_descending() {
        let p = Polynomial::from_real_roots(&[-2.0, -1.0]);
        let r = poles(&p);
        assert!((r[0].re + 1.0).abs() < 1e-12);
        assert!((r[1].re + 2.0).abs() < 1e-12);
        assert!(poles(&Polynomial::constant(3.0)).is_empty());
    }
}
