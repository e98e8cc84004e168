//! Sparse multivariate polynomials over exact rationals. These are the base
//! coefficients of graded series: every computation stays bit-reproducible.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Exponent vector over the base variables, ordered by graded lex.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BaseMono(pub Vec<u16>);

impl BaseMono {
    pub fn constant(nvars: usize) -> Self {
        BaseMono(vec![0; nvars])
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        BaseMono(e)
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().map(|&e| e as u32).sum()
    }

    pub fn is_constant(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn mul(&self, other: &BaseMono) -> BaseMono {
        debug_assert_eq!(self.0.len(), other.0.len());
        BaseMono(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

impl Ord for BaseMono {
    // Graded order; ties broken so that powers of earlier variables come
    // first (x^2 < x*y < y^2).
    fn cmp(&self, other: &Self) -> Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| self.0.len().cmp(&other.0.len()))
            .then_with(|| self.0.cmp(&other.0).reverse())
    }
}

impl PartialOrd for BaseMono {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Sparse polynomial; zero coefficients are never stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BasePolynomial {
    nvars: usize,
    terms: BTreeMap<BaseMono, BigRational>,
}

impl BasePolynomial {
    pub fn zero(nvars: usize) -> Self {
        BasePolynomial {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, BigRational::one())
    }

    pub fn constant(nvars: usize, c: BigRational) -> Self {
        let mut p = Self::zero(nvars);
        p.insert(BaseMono::constant(nvars), c);
        p
    }

    pub fn from_i64(nvars: usize, c: i64) -> Self {
        Self::constant(nvars, BigRational::from_integer(BigInt::from(c)))
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut p = Self::zero(nvars);
        p.insert(BaseMono::var(nvars, i), BigRational::one());
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&BaseMono, &BigRational)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, m: &BaseMono) -> BigRational {
        self.terms.get(m).cloned().unwrap_or_else(BigRational::zero)
    }

    /// Constant term.
    pub fn constant_part(&self) -> BigRational {
        self.coeff(&BaseMono::constant(self.nvars))
    }

    /// Some(c) when the polynomial is the constant c (including zero).
    pub fn as_constant(&self) -> Option<BigRational> {
        if self.terms.keys().all(|m| m.is_constant()) {
            Some(self.constant_part())
        } else {
            None
        }
    }

    pub fn total_degree(&self) -> Option<u32> {
        self.terms.keys().map(|m| m.total_degree()).max()
    }

    pub fn insert(&mut self, m: BaseMono, c: BigRational) {
        debug_assert_eq!(m.0.len(), self.nvars);
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = e.get() + &c;
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &BasePolynomial) -> BasePolynomial {
        debug_assert_eq!(self.nvars, other.nvars);
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.insert(m.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> BasePolynomial {
        let mut out = BasePolynomial::zero(self.nvars);
        for (m, c) in &self.terms {
            out.terms.insert(m.clone(), -c);
        }
        out
    }

    pub fn sub(&self, other: &BasePolynomial) -> BasePolynomial {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &BigRational) -> BasePolynomial {
        if c.is_zero() {
            return BasePolynomial::zero(self.nvars);
        }
        let mut out = BasePolynomial::zero(self.nvars);
        for (m, k) in &self.terms {
            out.terms.insert(m.clone(), k * c);
        }
        out
    }

    pub fn mul(&self, other: &BasePolynomial) -> BasePolynomial {
        debug_assert_eq!(self.nvars, other.nvars);
        let mut out = BasePolynomial::zero(self.nvars);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.insert(ma.mul(mb), ca * cb);
            }
        }
        out
    }

    pub fn pow(&self, e: u32) -> BasePolynomial {
        let mut out = BasePolynomial::one(self.nvars);
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    /// ∂/∂xᵢ.
    pub fn partial(&self, i: usize) -> BasePolynomial {
        let mut out = BasePolynomial::zero(self.nvars);
        for (m, c) in &self.terms {
            let e = m.0[i];
            if e == 0 {
                continue;
            }
            let mut me = m.clone();
            me.0[i] -= 1;
            out.insert(me, c * BigRational::from_integer(BigInt::from(e)));
        }
        out
    }

    /// Substitute polynomials for the variables. All `args` must share one
    /// variable count, which becomes the result's.
    pub fn compose(&self, args: &[BasePolynomial]) -> BasePolynomial {
        assert_eq!(args.len(), self.nvars);
        let out_nvars = args.first().map(|a| a.nvars).unwrap_or(0);
        let mut out = BasePolynomial::zero(out_nvars);
        for (m, c) in &self.terms {
            let mut term = BasePolynomial::constant(out_nvars, c.clone());
            for (i, &e) in m.0.iter().enumerate() {
                if e > 0 {
                    term = term.mul(&args[i].pow(e as u32));
                }
            }
            out = out.add(&term);
        }
        out
    }

    /// Canonical rendering with the given variable names.
    pub fn format_with(&self, names: &[String]) -> String {
        let mut s = String::new();
        self.write_terms(&mut s, names, true);
        if s.is_empty() {
            s.push('0');
        }
        s
    }

    pub(crate) fn write_terms(&self, out: &mut String, names: &[String], mut first: bool) -> bool {
        for (m, c) in &self.terms {
            write_term(out, c, m, &BaseMono(vec![]), names, &[], first);
            first = false;
        }
        first
    }
}

/// Shared term printer: sign, coefficient, base factors, formal factors.
pub(crate) fn write_term(
    out: &mut String,
    coeff: &BigRational,
    base: &BaseMono,
    formal_exps: &BaseMono,
    base_names: &[String],
    formal_names: &[String],
    first: bool,
) {
    let neg = coeff.is_negative();
    if first {
        if neg {
            out.push('-');
        }
    } else if neg {
        out.push_str(" - ");
    } else {
        out.push_str(" + ");
    }
    let mag = coeff.abs();
    let mut factors: Vec<String> = Vec::new();
    for (i, &e) in base.0.iter().enumerate() {
        if e == 1 {
            factors.push(base_names[i].clone());
        } else if e > 1 {
            factors.push(format!("{}^{}", base_names[i], e));
        }
    }
    for (a, &e) in formal_exps.0.iter().enumerate() {
        if e == 1 {
            factors.push(formal_names[a].clone());
        } else if e > 1 {
            factors.push(format!("{}^{}", formal_names[a], e));
        }
    }
    if factors.is_empty() {
        let _ = write!(out, "{mag}");
    } else {
        if !mag.is_one() {
            let _ = write!(out, "{mag}*");
        }
        out.push_str(&factors.join("*"));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn arithmetic_and_sparsity() {
        let x = BasePolynomial::var(2, 0);
        let y = BasePolynomial::var(2, 1);
        let p = x.add(&y).mul(&x.sub(&y)); // x^2 - y^2
        assert_eq!(p.num_terms(), 2);
        let q = p.add(&y.mul(&y));
        assert_eq!(q, x.mul(&x));
        assert!(q.sub(&q).is_zero());
    }

    #[test]
    fn compose_expands() {
        // P(x) = x^2, x -> x + 1  =>  x^2 + 2x + 1
        let p = BasePolynomial::var(1, 0).pow(2);
        let arg = BasePolynomial::var(1, 0).add(&BasePolynomial::from_i64(1, 1));
        let out = p.compose(&[arg]);
        assert_eq!(out.num_terms(), 3);
        assert_eq!(out.constant_part(), rat(1, 1));
    }

    #[test]
    fn partial_derivative() {
        // d/dx (x^2 y) = 2 x y
        let x = BasePolynomial::var(2, 0);
        let y = BasePolynomial::var(2, 1);
        let p = x.pow(2).mul(&y);
        let d = p.partial(0);
        assert_eq!(d, x.mul(&y).scale(&rat(2, 1)));
    }

    #[test]
    fn graded_lex_printing() {
        let names = vec!["x".to_string(), "y".to_string()];
        let x = BasePolynomial::var(2, 0);
        let y = BasePolynomial::var(2, 1);
        let p = x
            .pow(2)
            .add(&y)
            .add(&x)
            .add(&BasePolynomial::from_i64(2, 3))
            .sub(&x.mul(&y).scale(&rat(1, 2)));
        assert_eq!(p.format_with(&names), "3 + x + y + x^2 - 1/2*x*y");
    }
}
