//! Sparse arithmetic in truncated formal algebras Q[x][ξ¹,…,ξ^q] whose
//! generators multiply under a selectable sign rule. A series is a map from
//! normalized formal monomials to base polynomials, together with a
//! truncation cap on the formal order.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::Zero;

use crate::degree::Degree;
use crate::error::{Error, Result};
use crate::poly::{write_term, BaseMono, BasePolynomial};
use crate::table::VariableTable;

/// Truncation order: either no truncation or "drop formal order > k".
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cap {
    Exact,
    At(u32),
}

impl Cap {
    pub fn min(self, other: Cap) -> Cap {
        match (self, other) {
            (Cap::Exact, c) | (c, Cap::Exact) => c,
            (Cap::At(a), Cap::At(b)) => Cap::At(a.min(b)),
        }
    }

    pub fn admits(&self, order: u32) -> bool {
        match self {
            Cap::Exact => true,
            Cap::At(k) => order <= *k,
        }
    }
}

impl fmt::Display for Cap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cap::Exact => write!(f, "exact"),
            Cap::At(k) => write!(f, "{k}"),
        }
    }
}

/// 𝒥-adic order of a series: minimal number of formal factors in any term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum JOrder {
    Finite(u32),
    Infinite,
}

impl JOrder {
    pub fn at_least(&self, k: u32) -> bool {
        match self {
            JOrder::Finite(o) => *o >= k,
            JOrder::Infinite => true,
        }
    }
}

impl fmt::Display for JOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JOrder::Finite(o) => write!(f, "{o}"),
            JOrder::Infinite => write!(f, "inf"),
        }
    }
}

/// Exponent vector over the formal variables of one table. Nilpotent
/// generators never carry an exponent above 1 in a stored monomial.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FormalMono(pub Vec<u16>);

impl FormalMono {
    pub fn unit(q: usize) -> Self {
        FormalMono(vec![0; q])
    }

    pub fn var(q: usize, a: usize) -> Self {
        let mut e = vec![0; q];
        e[a] = 1;
        FormalMono(e)
    }

    pub fn is_unit(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    /// Formal order |μ|.
    pub fn order(&self) -> u32 {
        self.0.iter().map(|&e| e as u32).sum()
    }

    /// ℤ₂ⁿ-degree of the monomial over the given table.
    pub fn degree(&self, table: &VariableTable) -> Degree {
        let mut d = Degree::zero(table.arity());
        for (a, &e) in self.0.iter().enumerate() {
            if e % 2 == 1 {
                d = d.add(table.formal_degree(a));
            }
        }
        d
    }

    pub fn admissible(&self, table: &VariableTable) -> bool {
        self.0
            .iter()
            .enumerate()
            .all(|(a, &e)| e <= 1 || !table.is_nilpotent(a))
    }

    /// Word expansion in canonical order (variable indices, repeated).
    pub fn word(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.order() as usize);
        for (a, &e) in self.0.iter().enumerate() {
            for _ in 0..e {
                w.push(a);
            }
        }
        w
    }

    /// All admissible monomials of exact order `k` over the table.
    pub fn enumerate_of_order(table: &VariableTable, k: u32) -> Vec<FormalMono> {
        let mut out = Vec::new();
        let mut acc = vec![0u16; table.q()];
        fn rec(
            table: &VariableTable,
            a: usize,
            left: u32,
            acc: &mut Vec<u16>,
            out: &mut Vec<FormalMono>,
        ) {
            if a == acc.len() {
                if left == 0 {
                    out.push(FormalMono(acc.clone()));
                }
                return;
            }
            let max = if table.is_nilpotent(a) {
                left.min(1)
            } else {
                left
            };
            for e in 0..=max {
                acc[a] = e as u16;
                rec(table, a + 1, left - e, acc, out);
            }
            acc[a] = 0;
        }
        rec(table, 0, k, &mut acc, &mut out);
        out.sort();
        out
    }
}

impl Ord for FormalMono {
    // Graded order with earlier generators first, so for ξ < η < ϑ the
    // order-2 monomials come as ξη, ξϑ, ηϑ, ϑ².
    fn cmp(&self, other: &Self) -> Ordering {
        self.order()
            .cmp(&other.order())
            .then_with(|| self.0.len().cmp(&other.0.len()))
            .then_with(|| self.0.cmp(&other.0).reverse())
    }
}

impl PartialOrd for FormalMono {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Sorts a word of formal-variable occurrences into canonical declaration
/// order by adjacent transpositions, tracking the sign each swap picks up
/// under the table's rule. Returns sign 0 when a nilpotent variable repeats.
pub fn normalize_word(table: &VariableTable, word: &[usize]) -> (i8, FormalMono) {
    let mut sign: i8 = 1;
    let mut sorted: Vec<usize> = Vec::with_capacity(word.len());
    for &v in word {
        // insertion sort: v hops left over every strictly larger index
        let mut pos = sorted.len();
        while pos > 0 && sorted[pos - 1] > v {
            let u = sorted[pos - 1];
            if table
                .rule()
                .sign_exponent(table.formal_degree(u), table.formal_degree(v))
                == 1
            {
                sign = -sign;
            }
            pos -= 1;
        }
        sorted.insert(pos, v);
    }
    let mut exps = FormalMono::unit(table.q());
    for &v in &sorted {
        exps.0[v] += 1;
    }
    for (a, &e) in exps.0.iter().enumerate() {
        if e > 1 && table.is_nilpotent(a) {
            return (0, exps);
        }
    }
    (sign, exps)
}

/// Sign exponent for multiplying two normalized monomials: each odd
/// occurrence pair (a in the left factor, b in the right, a after b in
/// canonical order) contributes one transposition.
fn concat_sign_exponent(table: &VariableTable, mu: &FormalMono, nu: &FormalMono) -> u8 {
    let mut e = 0u8;
    for a in 0..table.q() {
        if mu.0[a].is_multiple_of(2) {
            continue;
        }
        let da = table.formal_degree(a);
        for b in 0..a {
            if nu.0[b] % 2 == 1 {
                e ^= table.rule().sign_exponent(da, table.formal_degree(b));
            }
        }
    }
    e
}

/// Homogeneity classification of a series.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Homogeneity {
    Zero,
    Homogeneous(Degree),
    Mixed,
}

/// A 𝒥-adically truncatable element of the chart algebra.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GradedSeries {
    table: Arc<VariableTable>,
    cap: Cap,
    terms: BTreeMap<FormalMono, BasePolynomial>,
}

impl GradedSeries {
    pub fn zero(table: Arc<VariableTable>, cap: Cap) -> Self {
        GradedSeries {
            table,
            cap,
            terms: BTreeMap::new(),
        }
    }

    pub fn one(table: Arc<VariableTable>, cap: Cap) -> Self {
        let p = BasePolynomial::one(table.p());
        Self::from_poly(table, cap, p)
    }

    pub fn from_poly(table: Arc<VariableTable>, cap: Cap, p: BasePolynomial) -> Self {
        assert_eq!(p.nvars(), table.p());
        let mut s = Self::zero(table, cap);
        s.insert_term(FormalMono::unit(s.table.q()), p);
        s
    }

    pub fn constant(table: Arc<VariableTable>, cap: Cap, c: BigRational) -> Self {
        let p = BasePolynomial::constant(table.p(), c);
        Self::from_poly(table, cap, p)
    }

    pub fn base_var(table: Arc<VariableTable>, cap: Cap, i: usize) -> Self {
        let p = BasePolynomial::var(table.p(), i);
        Self::from_poly(table, cap, p)
    }

    pub fn formal_var(table: Arc<VariableTable>, cap: Cap, a: usize) -> Self {
        let q = table.q();
        let p = BasePolynomial::one(table.p());
        let mut s = Self::zero(table, cap);
        s.insert_term(FormalMono::var(q, a), p);
        s
    }

    /// Single term c(x)·ξ^μ. The monomial must be admissible and within cap.
    pub fn term(table: Arc<VariableTable>, cap: Cap, mono: FormalMono, p: BasePolynomial) -> Self {
        let mut s = Self::zero(table, cap);
        s.insert_term(mono, p);
        s
    }

    pub fn table(&self) -> &Arc<VariableTable> {
        &self.table
    }

    pub fn cap(&self) -> Cap {
        self.cap
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&FormalMono, &BasePolynomial)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, m: &FormalMono) -> BasePolynomial {
        self.terms
            .get(m)
            .cloned()
            .unwrap_or_else(|| BasePolynomial::zero(self.table.p()))
    }

    /// Accumulates a term, dropping it if above cap, inadmissible, or zero.
    pub fn insert_term(&mut self, mono: FormalMono, p: BasePolynomial) {
        debug_assert!(mono.admissible(&self.table), "inadmissible monomial stored");
        if p.is_zero() || !self.cap.admits(mono.order()) {
            return;
        }
        match self.terms.entry(mono) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(p);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = e.get().add(&p);
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    fn check_table(&self, other: &GradedSeries) -> Result<()> {
        if !Arc::ptr_eq(&self.table, &other.table) && self.table != other.table {
            return Err(Error::TableMismatch(format!(
                "series over `{}` combined with series over `{}`",
                self.table.id(),
                other.table.id()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &GradedSeries) -> Result<GradedSeries> {
        self.check_table(other)?;
        let cap = self.cap.min(other.cap);
        let mut out = GradedSeries::zero(self.table.clone(), cap);
        for (m, p) in self.terms.iter().chain(other.terms.iter()) {
            out.insert_term(m.clone(), p.clone());
        }
        Ok(out)
    }

    pub fn neg(&self) -> GradedSeries {
        let mut out = GradedSeries::zero(self.table.clone(), self.cap);
        for (m, p) in &self.terms {
            out.terms.insert(m.clone(), p.neg());
        }
        out
    }

    pub fn sub(&self, other: &GradedSeries) -> Result<GradedSeries> {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &BigRational) -> GradedSeries {
        let mut out = GradedSeries::zero(self.table.clone(), self.cap);
        if c.is_zero() {
            return out;
        }
        for (m, p) in &self.terms {
            out.terms.insert(m.clone(), p.scale(c));
        }
        out
    }

    pub fn scale_poly(&self, p: &BasePolynomial) -> GradedSeries {
        let mut out = GradedSeries::zero(self.table.clone(), self.cap);
        for (m, q) in &self.terms {
            out.insert_term(m.clone(), q.mul(p));
        }
        out
    }

    /// Graded product: distributes over terms, concatenates the monomial
    /// words, normalizes with the rule's signs, multiplies base coefficients
    /// exactly, and drops anything above the result cap.
    pub fn mul(&self, other: &GradedSeries) -> Result<GradedSeries> {
        self.check_table(other)?;
        let cap = self.cap.min(other.cap);
        let table = &self.table;
        let mut out = GradedSeries::zero(self.table.clone(), cap);
        for (mu, pa) in &self.terms {
            for (nu, pb) in &other.terms {
                let order = mu.order() + nu.order();
                if !cap.admits(order) {
                    continue;
                }
                // nilpotent squares kill the product
                let mut dead = false;
                let mut exps = FormalMono::unit(table.q());
                for a in 0..table.q() {
                    let e = mu.0[a] + nu.0[a];
                    if e > 1 && table.is_nilpotent(a) {
                        dead = true;
                        break;
                    }
                    exps.0[a] = e;
                }
                if dead {
                    continue;
                }
                let mut p = pa.mul(pb);
                if concat_sign_exponent(table, mu, nu) == 1 {
                    p = p.neg();
                }
                out.insert_term(exps, p);
            }
        }
        Ok(out)
    }

    pub fn pow(&self, e: u32) -> Result<GradedSeries> {
        let mut out = GradedSeries::one(self.table.clone(), self.cap);
        for _ in 0..e {
            out = out.mul(self)?;
        }
        Ok(out)
    }

    /// Projection onto base functions: the coefficient of the empty monomial.
    pub fn epsilon(&self) -> BasePolynomial {
        self.coeff(&FormalMono::unit(self.table.q()))
    }

    pub fn j_order(&self) -> JOrder {
        self.terms
            .keys()
            .map(|m| m.order())
            .min()
            .map(JOrder::Finite)
            .unwrap_or(JOrder::Infinite)
    }

    /// Drops all terms of formal order > k. The resulting cap never claims
    /// more precision than the input had.
    pub fn truncate(&self, k: u32) -> GradedSeries {
        let cap = self.cap.min(Cap::At(k));
        let mut out = GradedSeries::zero(self.table.clone(), cap);
        for (m, p) in &self.terms {
            if m.order() <= k {
                out.terms.insert(m.clone(), p.clone());
            }
        }
        out
    }

    pub fn with_cap(&self, cap: Cap) -> GradedSeries {
        match cap {
            Cap::Exact => {
                let mut out = self.clone();
                out.cap = self.cap; // cannot regain dropped terms
                out
            }
            Cap::At(k) => self.truncate(k),
        }
    }

    /// Sub-sum of terms of exact formal order k.
    pub fn order_part(&self, k: u32) -> GradedSeries {
        let mut out = GradedSeries::zero(self.table.clone(), self.cap);
        for (m, p) in &self.terms {
            if m.order() == k {
                out.terms.insert(m.clone(), p.clone());
            }
        }
        out
    }

    /// Sub-sum of terms whose monomial degree is σ.
    pub fn homogeneous_part(&self, sigma: &Degree) -> GradedSeries {
        let mut out = GradedSeries::zero(self.table.clone(), self.cap);
        for (m, p) in &self.terms {
            if m.degree(&self.table) == *sigma {
                out.terms.insert(m.clone(), p.clone());
            }
        }
        out
    }

    pub fn homogeneity(&self) -> Homogeneity {
        let mut deg: Option<Degree> = None;
        for m in self.terms.keys() {
            let d = m.degree(&self.table);
            match deg {
                None => deg = Some(d),
                Some(prev) if prev == d => {}
                Some(_) => return Homogeneity::Mixed,
            }
        }
        match deg {
            None => Homogeneity::Zero,
            Some(d) => Homogeneity::Homogeneous(d),
        }
    }

    pub fn is_homogeneous_of(&self, sigma: &Degree) -> bool {
        match self.homogeneity() {
            Homogeneity::Zero => true,
            Homogeneity::Homogeneous(d) => d == *sigma,
            Homogeneity::Mixed => false,
        }
    }

    /// Equality of truncations at order k.
    pub fn eq_mod(&self, other: &GradedSeries, k: u32) -> bool {
        self.truncate(k).terms == other.truncate(k).terms
    }

    /// Re-tags the series with a table of identical signature (used to move
    /// expressions parsed against a template onto a concrete chart).
    pub fn with_table(&self, table: Arc<VariableTable>) -> Result<GradedSeries> {
        if !self.table.same_signature(&table) {
            return Err(Error::TableMismatch(format!(
                "cannot rebind series over `{}` to incompatible table `{}`",
                self.table.id(),
                table.id()
            )));
        }
        Ok(GradedSeries {
            table,
            cap: self.cap,
            terms: self.terms.clone(),
        })
    }

    /// Evaluates a base polynomial on degree-0 series arguments, one per base
    /// variable of the polynomial. Power caches make repeated substitution
    /// affordable.
    pub fn eval_poly(
        poly: &BasePolynomial,
        args: &[GradedSeries],
        table: Arc<VariableTable>,
        cap: Cap,
    ) -> Result<GradedSeries> {
        assert_eq!(poly.nvars(), args.len());
        let mut powers: Vec<Vec<GradedSeries>> = args
            .iter()
            .map(|a| vec![GradedSeries::one(table.clone(), cap), a.truncate_to(cap)])
            .collect();
        let mut out = GradedSeries::zero(table.clone(), cap);
        for (m, c) in poly.terms() {
            let mut term = GradedSeries::constant(table.clone(), cap, c.clone());
            for (i, &e) in m.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                while powers[i].len() <= e as usize {
                    let next = powers[i].last().unwrap().mul(&powers[i][1])?;
                    powers[i].push(next);
                }
                term = term.mul(&powers[i][e as usize])?;
            }
            out = out.add(&term)?;
        }
        Ok(out)
    }

    fn truncate_to(&self, cap: Cap) -> GradedSeries {
        match cap {
            Cap::Exact => self.clone(),
            Cap::At(k) => self.truncate(k),
        }
    }
}

impl fmt::Display for GradedSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let base_names = self.table.base_names();
        let formal_names: Vec<String> = self
            .table
            .formal_vars()
            .iter()
            .map(|(n, _)| n.clone())
            .collect();
        let mut s = String::new();
        let mut first = true;
        for (mono, poly) in &self.terms {
            for (bm, c) in poly.terms() {
                write_term(
                    &mut s,
                    c,
                    bm,
                    &BaseMono(mono.0.clone()),
                    base_names,
                    &formal_names,
                    first,
                );
                first = false;
            }
        }
        f.write_str(&s)
    }
}
