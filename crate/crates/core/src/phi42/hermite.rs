//! Hermite polynomials with variance parameter and the identities used for Wick powers.

use crate::error::{Error, Result};
use crate::numeric::{binomial, double_factorial_odd};

/// Highest degree exposed through the checked API.
pub const MAX_DEGREE: usize = 5;

/// `H_n(x, c)`, defined by `H_0 = 1`, `H_1 = x`, `H_{n+1} = x H_n − n c H_{n−1}`.
pub fn hermite(n: usize, x: f64, c: f64) -> Result<f64> {
    if n > MAX_DEGREE {
        return Err(Error::OutOfRange(format!("Hermite degree {n} exceeds {MAX_DEGREE}")));
    }
    Ok(hermite_unchecked(n, x, c))
}

/// Recurrence evaluation for any degree.
pub fn hermite_unchecked(n: usize, x: f64, c: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let next = x * cur - k as f64 * c * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// All of `H_0(x, c), …, H_n(x, c)`.
pub fn hermite_all(n: usize, x: f64, c: f64, out: &mut [f64]) {
    out[0] = 1.0;
    if n == 0 {
        return;
    }
    out[1] = x;
    for k in 1..n {
        out[k + 1] = x * out[k] - k as f64 * c * out[k - 1];
    }
}

/// Coefficients `C(n, j) b^{n−j}`, `j = 0..=n`, of `H_n(a + b, c) = Σ_j C(n,j) b^{n−j} H_j(a, c)`.
pub fn wick_recombine(n: usize, b: f64) -> Result<Vec<f64>> {
    if n > MAX_DEGREE {
        return Err(Error::OutOfRange(format!("Hermite degree {n} exceeds {MAX_DEGREE}")));
    }
    Ok((0..=n).map(|j| binomial(n, j) * b.powi((n - j) as i32)).collect())
}

/// Rewrites `Σ_n a_n H_n(x, c_from)` as `Σ_n a_n(t) H_n(x, c_to)`.
///
/// `coeffs[n]` multiplies `H_n`. Uses
/// `H_n(x, c₁) = Σ_j C(n, 2j) (2j−1)!! (c₂ − c₁)^j H_{n−2j}(x, c₂)`.
pub fn coefficient_shift(coeffs: &[f64], c_from: f64, c_to: f64) -> Vec<f64> {
    let d = c_to - c_from;
    let mut out = vec![0.0; coeffs.len()];
    for (n, &a) in coeffs.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        for j in 0..=n / 2 {
            out[n - 2 * j] += a * binomial(n, 2 * j) * double_factorial_odd(j) * d.powi(j as i32);
        }
    }
    out
}

/// `Σ_n coeffs[n] H_n(x, c)`.
pub fn hermite_series(coeffs: &[f64], x: f64, c: f64) -> f64 {
    coeffs.iter().enumerate().map(|(n, &a)| a * hermite_unchecked(n, x, c)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn closed_forms() {
        let (x, c) = (1.3_f64, 0.7_f64);
        let expect = [
            1.0,
            x,
            x * x - c,
            x.powi(3) - 3.0 * c * x,
            x.powi(4) - 6.0 * c * x * x + 3.0 * c * c,
            x.powi(5) - 10.0 * c * x.powi(3) + 15.0 * c * c * x,
        ];
        for (n, e) in expect.iter().enumerate() {
            assert!((hermite(n, x, c).unwrap() - e).abs() < 1e-12);
        }
        assert_eq!(hermite(2, 3.0, 0.0).unwrap(), 9.0);
        assert!(hermite(6, 1.0, 1.0).is_err());
    }

    #[test]
    fn recombination_example() {
        let (a, b, c) = (0.7, -1.2, 0.5);
        let coeffs = wick_recombine(3, b).unwrap();
        let rhs: f64 =
            coeffs.iter().enumerate().map(|(j, w)| w * hermite(j, a, c).unwrap()).sum();
        assert!((hermite(3, a + b, c).unwrap() - rhs).abs() < 1e-12);
    }

    #[test]
    fn shift_identity_and_sign() {
        assert_eq!(coefficient_shift(&[0.5, 1.0, 0.0, -1.0 / 3.0], 0.4, 0.4), vec![
            0.5,
            1.0,
            0.0,
            -1.0 / 3.0
        ]);
        // x³ − 3c₁x = (x³ − 3c₂x) + 3(c₂ − c₁)x.
        let s = coefficient_shift(&[0.0, 0.0, 0.0, 1.0], 1.0, 0.25);
        assert!((s[1] - 3.0 * (0.25 - 1.0)).abs() < 1e-15);
        assert_eq!(s[3], 1.0);
    }

    proptest! {
        #[test]
        fn recombination_holds(n in 0usize..=5, a in -3.0f64..3.0, b in -3.0f64..3.0, c in 0.0f64..2.0) {
            let lhs = hermite(n, a + b, c).unwrap();
            let rhs: f64 = wick_recombine(n, b).unwrap().iter().enumerate()
                .map(|(j, w)| w * hermite(j, a, c).unwrap()).sum();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        }

        #[test]
        fn shift_preserves_polynomial(
            coeffs in proptest::collection::vec(-2.0f64..2.0, 6),
            c1 in 0.0f64..2.0,
            c2 in 0.0f64..2.0,
        ) {
            let shifted = coefficient_shift(&coeffs, c1, c2);
            for x in [-2.0, -1.0, 0.0, 1.0, 2.0] {
                let a = hermite_series(&coeffs, x, c1);
                let b = hermite_series(&shifted, x, c2);
                prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
            }
        }
    }
}
