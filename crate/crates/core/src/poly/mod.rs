//! Sparse multivariate polynomials with exact rational coefficients.
//!
//! A [`Polynomial`] is a map from [`Monomial`] to nonzero [`Rational`]
//! coefficient, tied to a shared [`VariableOrder`]. The order fixes the rank
//! of every variable (leftmost is smallest), which is what the triangular-set
//! bookkeeping ([`Polynomial::main_variable`], [`Polynomial::decompose`])
//! is defined against.

mod compiled;
mod display;
mod parse;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_traits::{One, Zero};
use thiserror::Error;

pub use compiled::CompiledPolynomial;
pub use parse::parse_polynomial;

/// Arbitrary-precision rational number, always stored in lowest terms with a
/// positive denominator.
pub type Rational = num_rational::BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolyError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown variable `{name}` at byte {offset}")]
    UnknownVariable { name: String, offset: usize },
    #[error("exponent at byte {offset} is not a nonnegative integer literal: `{text}`")]
    BadExponent { offset: usize, text: String },
    #[error("variable order must not be empty")]
    EmptyOrder,
    #[error("variable `{0}` declared more than once")]
    DuplicateVariable(String),
    #[error("`{0}` is not a valid variable name")]
    InvalidVariableName(String),
    #[error("operation needs a non-constant polynomial, got `{0}`")]
    ConstantPolynomial(String),
}

impl PolyError {
    pub fn code(&self) -> &'static str {
        match self {
            PolyError::Syntax { .. } => "SYNTAX",
            PolyError::UnknownVariable { .. } => "UNKNOWN_VARIABLE",
            PolyError::BadExponent { .. } => "BAD_EXPONENT",
            PolyError::EmptyOrder => "EMPTY_ORDER",
            PolyError::DuplicateVariable(_) => "DUPLICATE_VARIABLE",
            PolyError::InvalidVariableName(_) => "INVALID_VARIABLE_NAME",
            PolyError::ConstantPolynomial(_) => "CONSTANT_POLYNOMIAL",
        }
    }

    /// Byte offset into the parsed text, for errors that have one.
    pub fn offset(&self) -> Option<usize> {
        match self {
            PolyError::Syntax { offset, .. }
            | PolyError::UnknownVariable { offset, .. }
            | PolyError::BadExponent { offset, .. } => Some(*offset),
            _ => None,
        }
    }
}

/// Ascending variable order. Position in the list is the variable's rank.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VariableOrder {
    names: Vec<String>,
}

impl VariableOrder {
    pub fn new<I, S>(names: I) -> Result<Arc<Self>, PolyError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(PolyError::EmptyOrder);
        }
        let mut seen = BTreeSet::new();
        for name in &names {
            if !is_identifier(name) {
                return Err(PolyError::InvalidVariableName(name.clone()));
            }
            if !seen.insert(name.as_str()) {
                return Err(PolyError::DuplicateVariable(name.clone()));
            }
        }
        Ok(Arc::new(Self { names }))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Power product of variables, stored as `(variable index, exponent)` pairs
/// sorted by index with every exponent positive.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Monomial {
    exponents: Vec<(usize, u32)>,
}

impl Monomial {
    pub fn one() -> Self {
        Self::default()
    }

    pub fn var(index: usize, exponent: u32) -> Self {
        if exponent == 0 {
            Self::one()
        } else {
            Self {
                exponents: vec![(index, exponent)],
            }
        }
    }

    /// Builds a monomial from arbitrary pairs; zero exponents are dropped and
    /// repeated indices are merged.
    pub fn from_pairs<I: IntoIterator<Item = (usize, u32)>>(pairs: I) -> Self {
        let mut map: BTreeMap<usize, u32> = BTreeMap::new();
        for (v, e) in pairs {
            *map.entry(v).or_default() += e;
        }
        Self {
            exponents: map.into_iter().filter(|&(_, e)| e > 0).collect(),
        }
    }

    pub fn exponents(&self) -> &[(usize, u32)] {
        &self.exponents
    }

    pub fn is_one(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn total_degree(&self) -> u32 {
        self.exponents.iter().map(|&(_, e)| e).sum()
    }

    pub fn degree_in(&self, var: usize) -> u32 {
        self.exponents.iter().find(|&&(v, _)| v == var).map_or(0, |&(_, e)| e)
    }

    /// Greatest variable index with a positive exponent.
    pub fn max_variable(&self) -> Option<usize> {
        self.exponents.last().map(|&(v, _)| v)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = Vec::with_capacity(self.exponents.len() + other.exponents.len());
        let (mut i, mut j) = (0, 0);
        while i < self.exponents.len() && j < other.exponents.len() {
            let (a, ea) = self.exponents[i];
            let (b, eb) = other.exponents[j];
            match a.cmp(&b) {
                std::cmp::Ordering::Less => {
                    out.push((a, ea));
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push((b, eb));
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push((a, ea + eb));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.exponents[i..]);
        out.extend_from_slice(&other.exponents[j..]);
        Monomial { exponents: out }
    }

    /// Copy of `self` with the exponent of `var` replaced (0 removes it).
    pub fn with_degree(&self, var: usize, exponent: u32) -> Monomial {
        Monomial::from_pairs(
            self.exponents
                .iter()
                .copied()
                .filter(|&(v, _)| v != var)
                .chain(std::iter::once((var, exponent))),
        )
    }

    /// Graded order: total degree first, ties broken by comparing exponents
    /// of the highest-ranked variable downward.
    pub fn grlex_cmp(&self, other: &Monomial) -> std::cmp::Ordering {
        self.total_degree().cmp(&other.total_degree()).then_with(|| {
            let top = self.max_variable().max(other.max_variable()).unwrap_or(0);
            for v in (0..=top).rev() {
                let c = self.degree_in(v).cmp(&other.degree_in(v));
                if c != std::cmp::Ordering::Equal {
                    return c;
                }
            }
            std::cmp::Ordering::Equal
        })
    }
}

/// Sparse polynomial over the rationals.
#[derive(Clone)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, Rational>,
    order: Arc<VariableOrder>,
}

impl PartialEq for Polynomial {
    fn eq(&self, other: &Self) -> bool {
        self.terms == other.terms
    }
}

impl Eq for Polynomial {}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Polynomial({self})")
    }
}

/// `p = initial * rank + tail` with `rank = main_variable^main_degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub main_variable: usize,
    pub initial: Polynomial,
    pub main_degree: u32,
    pub rank: Monomial,
    pub tail: Polynomial,
    pub head: Polynomial,
}

impl Polynomial {
    pub fn zero(order: &Arc<VariableOrder>) -> Self {
        Self {
            terms: BTreeMap::new(),
            order: Arc::clone(order),
        }
    }

    pub fn constant(order: &Arc<VariableOrder>, value: Rational) -> Self {
        Self::from_terms(order, [(Monomial::one(), value)])
    }

    pub fn variable(order: &Arc<VariableOrder>, index: usize) -> Self {
        assert!(index < order.len(), "variable index out of range");
        Self::from_terms(order, [(Monomial::var(index, 1), Rational::one())])
    }

    /// Collects like terms and drops zero coefficients.
    pub fn from_terms<I>(order: &Arc<VariableOrder>, terms: I) -> Self
    where
        I: IntoIterator<Item = (Monomial, Rational)>,
    {
        let mut p = Self::zero(order);
        for (m, c) in terms {
            debug_assert!(m.max_variable().is_none_or(|v| v < order.len()));
            p.add_term(m, c);
        }
        p
    }

    fn add_term(&mut self, m: Monomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn order(&self) -> &Arc<VariableOrder> {
        &self.order
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coefficient(&self, m: &Monomial) -> Rational {
        self.terms.get(m).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(Monomial::is_one)
    }

    pub fn constant_term(&self) -> Rational {
        self.coefficient(&Monomial::one())
    }

    pub fn degree_in(&self, var: usize) -> u32 {
        self.terms.keys().map(|m| m.degree_in(var)).max().unwrap_or(0)
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(Monomial::total_degree).max().unwrap_or(0)
    }

    pub fn involves(&self, var: usize) -> bool {
        self.degree_in(var) > 0
    }

    /// Indices of all variables with positive degree, ascending.
    pub fn variables(&self) -> BTreeSet<usize> {
        self.terms
            .keys()
            .flat_map(|m| m.exponents().iter().map(|&(v, _)| v))
            .collect()
    }

    /// Greatest-ranked variable of positive degree; `None` for constants.
    pub fn main_variable(&self) -> Option<usize> {
        self.terms.keys().filter_map(Monomial::max_variable).max()
    }

    pub fn scale(&self, c: &Rational) -> Polynomial {
        if c.is_zero() {
            return Polynomial::zero(&self.order);
        }
        Polynomial {
            terms: self.terms.iter().map(|(m, v)| (m.clone(), v * c)).collect(),
            order: Arc::clone(&self.order),
        }
    }

    pub fn pow(&self, exponent: u32) -> Polynomial {
        let mut result = Polynomial::constant(&self.order, Rational::one());
        let mut base = self.clone();
        let mut e = exponent;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        result
    }

    /// Exact symbolic partial derivative with respect to variable `var`.
    pub fn partial_derivative(&self, var: usize) -> Polynomial {
        assert!(var < self.order.len(), "variable index out of range");
        let mut out = Polynomial::zero(&self.order);
        for (m, c) in &self.terms {
            let e = m.degree_in(var);
            if e == 0 {
                continue;
            }
            out.add_term(m.with_degree(var, e - 1), c * Rational::from_integer(e.into()));
        }
        out
    }

    /// Floating-point value at `point` (one entry per variable in the order).
    pub fn evaluate(&self, point: &[f64]) -> f64 {
        CompiledPolynomial::new(self).evaluate(point)
    }

    pub fn compile(&self) -> CompiledPolynomial {
        CompiledPolynomial::new(self)
    }

    /// Splits a non-constant polynomial as `initial * mvar^d + tail`.
    pub fn decompose(&self) -> Result<Decomposition, PolyError> {
        let main_variable = self
            .main_variable()
            .ok_or_else(|| PolyError::ConstantPolynomial(self.to_string()))?;
        let main_degree = self.degree_in(main_variable);
        let mut initial = Polynomial::zero(&self.order);
        let mut tail = Polynomial::zero(&self.order);
        for (m, c) in &self.terms {
            if m.degree_in(main_variable) == main_degree {
                initial.add_term(m.with_degree(main_variable, 0), c.clone());
            } else {
                tail.add_term(m.clone(), c.clone());
            }
        }
        let rank = Monomial::var(main_variable, main_degree);
        let head = self - &tail;
        Ok(Decomposition {
            main_variable,
            initial,
            main_degree,
            rank,
            tail,
            head,
        })
    }

    /// Rewrites the polynomial over `order`, sending variable `v` to
    /// `mapping(v)`. Returns `None` if a variable with positive degree has no
    /// image.
    pub fn remap<F>(&self, order: &Arc<VariableOrder>, mapping: F) -> Option<Polynomial>
    where
        F: Fn(usize) -> Option<usize>,
    {
        let mut out = Polynomial::zero(order);
        for (m, c) in &self.terms {
            let pairs = m
                .exponents()
                .iter()
                .map(|&(v, e)| mapping(v).map(|w| (w, e)))
                .collect::<Option<Vec<_>>>()?;
            out.add_term(Monomial::from_pairs(pairs), c.clone());
        }
        Some(out)
    }

    fn check_order(&self, other: &Polynomial) {
        assert!(
            Arc::ptr_eq(&self.order, &other.order) || self.order == other.order,
            "polynomials over different variable orders"
        );
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;

    fn add(self, rhs: &Polynomial) -> Polynomial {
        self.check_order(rhs);
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;

    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self.check_order(rhs);
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;

    fn mul(self, rhs: &Polynomial) -> Polynomial {
        self.check_order(rhs);
        let mut out = Polynomial::zero(&self.order);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;

    fn neg(self) -> Polynomial {
        Polynomial {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
            order: Arc::clone(&self.order),
        }
    }
}

impl Add for Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: Polynomial) -> Polynomial {
        &self + &rhs
    }
}

impl Sub for Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: Polynomial) -> Polynomial {
        &self - &rhs
    }
}

impl Mul for Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: Polynomial) -> Polynomial {
        &self * &rhs
    }
}

impl Neg for Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        -&self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(BigInt::from(n), BigInt::from(d))
    }

    fn order(names: &[&str]) -> Arc<VariableOrder> {
        VariableOrder::new(names.iter().copied()).unwrap()
    }

    #[test]
    fn order_rejects_duplicates_and_empty() {
        assert_eq!(
            VariableOrder::new(["x", "x"]).unwrap_err(),
            PolyError::DuplicateVariable("x".into())
        );
        assert_eq!(
            VariableOrder::new(Vec::<String>::new()).unwrap_err(),
            PolyError::EmptyOrder
        );
        assert!(VariableOrder::new(["2x"]).is_err());
    }

    #[test]
    fn main_variable_examples() {
        let o = order(&["z1", "z2", "z3", "z4"]);
        let p = parse_polynomial("z1^2*z2^2 - 1", &o).unwrap();
        assert_eq!(p.main_variable(), Some(1));
        let p = parse_polynomial("z3 + z1", &o).unwrap();
        assert_eq!(p.main_variable(), Some(2));
        let p = parse_polynomial("5", &o).unwrap();
        assert_eq!(p.main_variable(), None);
    }

    #[test]
    fn derivative_examples() {
        let o = order(&["u", "x"]);
        let g = parse_polynomial("u^4 + x^2 - 1", &o).unwrap();
        assert_eq!(g.partial_derivative(1), parse_polynomial("2*x", &o).unwrap());
        assert_eq!(g.partial_derivative(0), parse_polynomial("4*u^3", &o).unwrap());
        let c = parse_polynomial("7/3", &o).unwrap();
        assert!(c.partial_derivative(1).is_zero());
    }

    #[test]
    fn evaluate_examples() {
        let o = order(&["u", "x"]);
        let g1 = parse_polynomial("u^2*x^2 - 1", &o).unwrap();
        assert_eq!(g1.evaluate(&[1.0, 1.0]), 0.0);
        let g = parse_polynomial("u^4 + x^2 - 1", &o).unwrap();
        // (u, x) = (0.8, 0.6): 0.4096 + 0.36 - 1
        let v = g.evaluate(&[0.8, 0.6]);
        assert!((v - (0.8f64.powi(4) + 0.36 - 1.0)).abs() < 1e-15);
        let h = parse_polynomial("3*x*u - 5/2", &o).unwrap();
        assert_eq!(h.evaluate(&[0.0, 0.0]), -2.5);
    }

    #[test]
    fn decompose_eq1_g1() {
        let o = order(&["u", "x"]);
        let p = parse_polynomial("u^2*x^2 - 1", &o).unwrap();
        let d = p.decompose().unwrap();
        assert_eq!(d.main_variable, 1);
        assert_eq!(d.initial, parse_polynomial("u^2", &o).unwrap());
        assert_eq!(d.main_degree, 2);
        assert_eq!(d.rank, Monomial::var(1, 2));
        assert_eq!(d.tail, parse_polynomial("-1", &o).unwrap());
        assert_eq!(d.head, parse_polynomial("u^2*x^2", &o).unwrap());
    }

    #[test]
    fn decompose_linear_and_quintic() {
        let o = order(&["u", "x", "y1", "y2"]);
        let d = parse_polynomial("y1 + u", &o).unwrap().decompose().unwrap();
        assert_eq!(d.initial, parse_polynomial("1", &o).unwrap());
        assert_eq!(d.main_degree, 1);
        assert_eq!(d.rank, Monomial::var(2, 1));
        assert_eq!(d.tail, parse_polynomial("u", &o).unwrap());

        let o = order(&["u", "x", "y"]);
        let p = parse_polynomial("u^2 + x^3 + y^5", &o).unwrap();
        let d = p.decompose().unwrap();
        assert_eq!(d.initial, parse_polynomial("1", &o).unwrap());
        assert_eq!(d.main_degree, 5);
        assert_eq!(d.rank, Monomial::var(2, 5));
        assert_eq!(d.tail, parse_polynomial("u^2 + x^3", &o).unwrap());
        let rank = Polynomial::from_terms(&o, [(d.rank.clone(), Rational::one())]);
        assert_eq!(&(&d.initial * &rank) + &d.tail, p);
    }

    #[test]
    fn decompose_constant_fails() {
        let o = order(&["x"]);
        let err = parse_polynomial("4", &o).unwrap().decompose().unwrap_err();
        assert_eq!(err.code(), "CONSTANT_POLYNOMIAL");
    }

    #[test]
    fn arithmetic_cancels() {
        let o = order(&["x", "y"]);
        let a = parse_polynomial("(x + y)*(x - y)", &o).unwrap();
        let b = parse_polynomial("x^2 - y^2", &o).unwrap();
        assert_eq!(a, b);
        assert!((&a - &b).is_zero());
        assert_eq!(
            parse_polynomial("x + y", &o).unwrap().pow(3),
            parse_polynomial("x^3 + 3*x^2*y + 3*x*y^2 + y^3", &o).unwrap()
        );
        assert_eq!(b.scale(&q(1, 2)), parse_polynomial("1/2*x^2 - 1/2*y^2", &o).unwrap());
    }

    #[test]
    fn grlex_orders_by_degree_then_top_variable() {
        let a = Monomial::from_pairs([(0, 2)]);
        let b = Monomial::from_pairs([(1, 1)]);
        let c = Monomial::from_pairs([(0, 1), (1, 1)]);
        assert_eq!(a.grlex_cmp(&b), std::cmp::Ordering::Greater);
        assert_eq!(c.grlex_cmp(&a), std::cmp::Ordering::Greater);
        assert_eq!(c.grlex_cmp(&c), std::cmp::Ordering::Equal);
    }
}
