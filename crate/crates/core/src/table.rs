//! Variable tables: the signature of a superdomain chart, together with the
//! sign convention under which its generators multiply.

use std::fmt;
use std::sync::Arc;

use crate::degree::Degree;
use crate::error::{Error, Result};

/// Commutation convention for formal generators of nonzero degree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SignRule {
    /// ts = (−1)^⟨s,t⟩ st, the ℤ₂ⁿ scalar-product rule.
    ScalarProduct,
    /// ts = (−1)^{parity(s)·parity(t)} st, the classical supercommutative rule.
    TotalParity,
    /// Plain commutative variables; no signs, nothing nilpotent.
    Commutative,
}

impl SignRule {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "zsp" => Ok(SignRule::ScalarProduct),
            "parity" => Ok(SignRule::TotalParity),
            "comm" => Ok(SignRule::Commutative),
            other => Err(Error::Syntax {
                line: 0,
                col: 0,
                msg: format!("unknown convention `{other}` (expected zsp, parity, or comm)"),
            }),
        }
    }

    /// Exponent of −1 picked up when two generators of the given degrees swap.
    pub fn sign_exponent(&self, a: &Degree, b: &Degree) -> u8 {
        match self {
            SignRule::ScalarProduct => a.scalar_product(b),
            SignRule::TotalParity => a.parity() & b.parity(),
            SignRule::Commutative => 0,
        }
    }

    pub fn sign(&self, a: &Degree, b: &Degree) -> i8 {
        if self.sign_exponent(a, b) == 0 {
            1
        } else {
            -1
        }
    }

    /// Whether a generator of this degree squares to zero.
    pub fn is_nilpotent(&self, d: &Degree) -> bool {
        match self {
            SignRule::Commutative => false,
            _ => d.parity() == 1,
        }
    }
}

impl fmt::Display for SignRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SignRule::ScalarProduct => "zsp",
            SignRule::TotalParity => "parity",
            SignRule::Commutative => "comm",
        };
        f.write_str(s)
    }
}

/// Reference to a variable of a table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarRef {
    Base(usize),
    Formal(usize),
}

/// Ordered base and formal variables of one chart. The declaration order of
/// the formal variables is the canonical order used by word normalization.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VariableTable {
    id: String,
    arity: u8,
    base: Vec<String>,
    formal: Vec<(String, Degree)>,
    rule: SignRule,
}

impl VariableTable {
    pub fn new(
        id: impl Into<String>,
        arity: u8,
        base: Vec<String>,
        formal: Vec<(String, Degree)>,
        rule: SignRule,
    ) -> Result<Arc<Self>> {
        if arity == 0 || arity > crate::degree::MAX_ARITY {
            return Err(Error::ArityMismatch(format!("unsupported arity {arity}")));
        }
        let mut seen = std::collections::BTreeSet::new();
        for name in base.iter().chain(formal.iter().map(|(n, _)| n)) {
            if !seen.insert(name.clone()) {
                return Err(Error::GradingViolation(format!(
                    "duplicate variable name `{name}`"
                )));
            }
        }
        for (name, deg) in &formal {
            if deg.arity() != arity {
                return Err(Error::ArityMismatch(format!(
                    "variable `{name}` has degree {deg} of arity {}, table arity is {arity}",
                    deg.arity()
                )));
            }
            if deg.is_zero() {
                return Err(Error::GradingViolation(format!(
                    "formal variable `{name}` has zero degree; degree-0 generators are base variables"
                )));
            }
        }
        Ok(Arc::new(VariableTable {
            id: id.into(),
            arity,
            base,
            formal,
            rule,
        }))
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn arity(&self) -> u8 {
        self.arity
    }

    pub fn rule(&self) -> SignRule {
        self.rule
    }

    /// Number of base variables.
    pub fn p(&self) -> usize {
        self.base.len()
    }

    /// Number of formal variables.
    pub fn q(&self) -> usize {
        self.formal.len()
    }

    pub fn base_names(&self) -> &[String] {
        &self.base
    }

    pub fn formal_vars(&self) -> &[(String, Degree)] {
        &self.formal
    }

    pub fn base_name(&self, i: usize) -> &str {
        &self.base[i]
    }

    pub fn formal_name(&self, a: usize) -> &str {
        &self.formal[a].0
    }

    pub fn formal_degree(&self, a: usize) -> &Degree {
        &self.formal[a].1
    }

    pub fn is_nilpotent(&self, a: usize) -> bool {
        self.rule.is_nilpotent(&self.formal[a].1)
    }

    pub fn var(&self, name: &str) -> Option<VarRef> {
        if let Some(i) = self.base.iter().position(|n| n == name) {
            return Some(VarRef::Base(i));
        }
        self.formal
            .iter()
            .position(|(n, _)| n == name)
            .map(VarRef::Formal)
    }

    pub fn lookup(&self, name: &str) -> Result<VarRef> {
        self.var(name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Sector ranks in the lexicographic order of nonzero degrees.
    pub fn sector_ranks(&self) -> Vec<(Degree, u32)> {
        Degree::enumerate_nonzero(self.arity)
            .expect("valid arity")
            .into_iter()
            .map(|d| {
                let r = self.formal.iter().filter(|(_, fd)| *fd == d).count() as u32;
                (d, r)
            })
            .collect()
    }

    /// Indices of the formal variables carrying the given degree, in
    /// declaration order.
    pub fn sector_indices(&self, d: &Degree) -> Vec<usize> {
        self.formal
            .iter()
            .enumerate()
            .filter(|(_, (_, fd))| fd == d)
            .map(|(a, _)| a)
            .collect()
    }

    /// Same signature under a different id (used to instantiate per-chart
    /// copies of a shared declaration).
    pub fn with_id(&self, id: impl Into<String>) -> Arc<Self> {
        Arc::new(VariableTable {
            id: id.into(),
            arity: self.arity,
            base: self.base.clone(),
            formal: self.formal.clone(),
            rule: self.rule,
        })
    }

    /// Same variables under a different sign convention.
    pub fn with_rule(&self, rule: SignRule, id: impl Into<String>) -> Arc<Self> {
        Arc::new(VariableTable {
            id: id.into(),
            arity: self.arity,
            base: self.base.clone(),
            formal: self.formal.clone(),
            rule,
        })
    }

    /// True when both tables declare the same variables, degrees, and rule
    /// (ids may differ).
    pub fn same_signature(&self, other: &VariableTable) -> bool {
        self.arity == other.arity
            && self.base == other.base
            && self.formal == other.formal
            && self.rule == other.rule
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn deg(digits: &[u8]) -> Degree {
        Degree::new(digits).unwrap()
    }

    pub fn table_n2() -> Arc<VariableTable> {
        VariableTable::new(
            "U",
            2,
            vec!["x".into()],
            vec![
                ("xi".into(), deg(&[0, 1])),
                ("eta".into(), deg(&[1, 0])),
                ("theta".into(), deg(&[1, 1])),
            ],
            SignRule::ScalarProduct,
        )
        .unwrap()
    }

    #[test]
    fn nilpotency_follows_parity() {
        let t = table_n2();
        assert!(t.is_nilpotent(0));
        assert!(t.is_nilpotent(1));
        assert!(!t.is_nilpotent(2));
    }

    #[test]
    fn commutative_rule_has_no_nilpotents_and_no_signs() {
        let t = table_n2().with_rule(SignRule::Commutative, "Uc");
        assert!(!t.is_nilpotent(0));
        assert_eq!(t.rule().sign(&deg(&[0, 1]), &deg(&[1, 0])), 1);
    }

    #[test]
    fn parity_rule_signs() {
        let r = SignRule::TotalParity;
        // both odd parity
        assert_eq!(r.sign(&deg(&[0, 0, 1]), &deg(&[0, 1, 0])), -1);
        // (1,0,1) has even parity
        assert_eq!(r.sign(&deg(&[1, 0, 1]), &deg(&[0, 1, 0])), 1);
    }

    #[test]
    fn rejects_zero_degree_formal() {
        let err = VariableTable::new(
            "T",
            2,
            vec![],
            vec![("bad".into(), Degree::zero(2))],
            SignRule::ScalarProduct,
        );
        assert!(err.is_err());
    }

    #[test]
    fn rejects_duplicate_names() {
        let err = VariableTable::new(
            "T",
            2,
            vec!["x".into()],
            vec![("x".into(), deg(&[0, 1]))],
            SignRule::ScalarProduct,
        );
        assert!(err.is_err());
    }
}
