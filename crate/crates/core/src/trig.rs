//! Trigonometric polynomials `p(z) = ∑ c_k z^k` on the circle, `z = e^{2πix}`.

use num_complex::Complex64;
use rand::Rng;

use crate::{circle_fn, circle_point, CircleFn};

#[derive(Clone, Debug, PartialEq)]
pub struct TrigPoly {
    /// `(k, c_k)` pairs; exponents may repeat and are summed.
    pub terms: Vec<(i64, Complex64)>,
}

impl TrigPoly {
    pub fn new(terms: Vec<(i64, Complex64)>) -> Self {
        Self { terms }
    }

    /// Coefficients `c_0, c_1, …` of an analytic polynomial.
    pub fn from_coeffs(coeffs: &[Complex64]) -> Self {
        Self::new(
            coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| (k as i64, c))
                .collect(),
        )
    }

    pub fn monomial(k: i64) -> Self {
        Self::new(vec![(k, Complex64::new(1.0, 0.0))])
    }

    /// Random polynomial with exponents in `[-degree, degree]` and Gaussian-like
    /// coefficients, scaled to unit `ℓ²` coefficient norm.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, degree: i64) -> Self {
        let terms: Vec<_> = (-degree..=degree)
            .map(|k| {
                let re: f64 = rng.gen_range(-1.0..1.0);
                let im: f64 = rng.gen_range(-1.0..1.0);
                (k, Complex64::new(re, im))
            })
            .collect();
        let norm = terms.iter().map(|(_, c)| c.norm_sqr()).sum::<f64>().sqrt();
        Self::new(terms.into_iter().map(|(k, c)| (k, c / norm)).collect())
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        self.terms
            .iter()
            .map(|&(k, c)| c * circle_point(k as f64 * x))
            .sum()
    }

    /// `∫_0^1 |p|²` (Parseval).
    pub fn l2_norm_sq(&self) -> f64 {
        let mut merged = std::collections::BTreeMap::new();
        for &(k, c) in &self.terms {
            *merged.entry(k).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        merged.values().map(|c| c.norm_sqr()).sum()
    }

    pub fn to_fn(&self) -> CircleFn {
        let p = self.clone();
        circle_fn(move |x| p.eval(x))
    }
}
