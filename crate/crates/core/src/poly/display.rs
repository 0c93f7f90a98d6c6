use std::fmt;

use num_traits::{One, Signed};

use super::{Monomial, Polynomial};

impl Polynomial {
    fn write_monomial(&self, m: &Monomial, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Highest-ranked variable first, e.g. `y^2*x*u`.
        for (i, &(v, e)) in m.exponents().iter().rev().enumerate() {
            if i > 0 {
                f.write_str("*")?;
            }
            f.write_str(self.order().name(v))?;
            if e > 1 {
                write!(f, "^{e}")?;
            }
        }
        Ok(())
    }
}

/// Canonical form: terms in descending graded order, explicit `*` between
/// factors. The output parses back to the same polynomial.
impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        let mut terms: Vec<_> = self.terms().collect();
        terms.sort_by(|a, b| b.0.grlex_cmp(a.0));
        for (i, (m, c)) in terms.into_iter().enumerate() {
            let negative = c.is_negative();
            match (i, negative) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            let mag = c.abs();
            if m.is_one() {
                write!(f, "{mag}")?;
            } else {
                if !mag.is_one() {
                    write!(f, "{mag}*")?;
                }
                self.write_monomial(m, f)?;
            }
        }
        Ok(())
    }
}
