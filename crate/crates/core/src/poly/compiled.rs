use num_traits::ToPrimitive;

use super::Polynomial;

/// Floating-point snapshot of a [`Polynomial`] for repeated evaluation.
///
/// Coefficients are rounded to `f64` once; each term is evaluated with
/// exponentiation by squaring and the terms are summed in the polynomial's
/// storage order, so results match [`Polynomial::evaluate`] bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledPolynomial {
    terms: Vec<(f64, Vec<(usize, u32)>)>,
    nvars: usize,
}

impl CompiledPolynomial {
    pub fn new(p: &Polynomial) -> Self {
        let terms = p
            .terms()
            .map(|(m, c)| {
                let c = c.to_f64().unwrap_or(f64::NAN);
                (c, m.exponents().to_vec())
            })
            .collect();
        Self {
            terms,
            nvars: p.order().len(),
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn evaluate(&self, point: &[f64]) -> f64 {
        debug_assert_eq!(point.len(), self.nvars);
        self.terms
            .iter()
            .map(|(c, exps)| exps.iter().fold(*c, |acc, &(v, e)| acc * pow_by_squaring(point[v], e)))
            .sum()
    }

    /// Coefficients of the univariate polynomial in `var` obtained by
    /// substituting `point` for every other variable. Index `i` holds the
    /// coefficient of `var^i`.
    pub fn univariate_in(&self, var: usize, point: &[f64]) -> Vec<f64> {
        let mut coeffs: Vec<f64> = Vec::new();
        for (c, exps) in &self.terms {
            let mut deg = 0usize;
            let mut value = *c;
            for &(v, e) in exps {
                if v == var {
                    deg = e as usize;
                } else {
                    value *= pow_by_squaring(point[v], e);
                }
            }
            if coeffs.len() <= deg {
                coeffs.resize(deg + 1, 0.0);
            }
            coeffs[deg] += value;
        }
        coeffs
    }
}

pub(crate) fn pow_by_squaring(mut base: f64, mut exp: u32) -> f64 {
    let mut acc = 1.0;
    while exp > 0 {
        if exp & 1 == 1 {
            acc *= base;
        }
        exp >>= 1;
        if exp > 0 {
            base *= base;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn squaring_matches_repeated_product() {
        for e in 0..12u32 {
            let direct: f64 = (0..e).map(|_| 1.3f64).product();
            assert!((pow_by_squaring(1.3, e) - direct).abs() <= 1e-12 * direct.abs().max(1.0));
        }
        assert_eq!(pow_by_squaring(-2.0, 3), -8.0);
        assert_eq!(pow_by_squaring(0.0, 0), 1.0);
    }
}
