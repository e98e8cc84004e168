//! ℤ₂ⁿ-degrees: bit tuples with componentwise mod-2 addition, the standard
//! scalar product, and the Koszul sign it induces.

use std::fmt;

use crate::error::{Error, Result};

/// Largest supported grading arity.
pub const MAX_ARITY: u8 = 16;

/// An element of ℤ₂ⁿ.
///
/// Digit `j` (0-based, written left to right) is stored at bit `arity-1-j`,
/// so comparing the packed bits numerically is exactly the lexicographic
/// order on tuples.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Degree {
    bits: u16,
    arity: u8,
}

impl Degree {
    pub fn new(digits: &[u8]) -> Result<Self> {
        let n = digits.len();
        if n == 0 || n > MAX_ARITY as usize {
            return Err(Error::ArityMismatch(format!(
                "arity must be between 1 and {MAX_ARITY}, got {n}"
            )));
        }
        let mut bits = 0u16;
        for &d in digits {
            if d > 1 {
                return Err(Error::GradingViolation(format!(
                    "degree digits must be 0 or 1, got {d}"
                )));
            }
            bits = (bits << 1) | d as u16;
        }
        Ok(Degree {
            bits,
            arity: n as u8,
        })
    }

    pub fn zero(arity: u8) -> Self {
        assert!((1..=MAX_ARITY).contains(&arity));
        Degree { bits: 0, arity }
    }

    pub fn from_bits(bits: u16, arity: u8) -> Self {
        assert!((1..=MAX_ARITY).contains(&arity));
        assert!(bits < (1u32 << arity) as u16 || arity == 16);
        Degree { bits, arity }
    }

    pub fn arity(&self) -> u8 {
        self.arity
    }

    pub fn digit(&self, j: usize) -> u8 {
        assert!(j < self.arity as usize);
        ((self.bits >> (self.arity as usize - 1 - j)) & 1) as u8
    }

    pub fn digits(&self) -> Vec<u8> {
        (0..self.arity as usize).map(|j| self.digit(j)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.bits == 0
    }

    /// Componentwise sum mod 2.
    pub fn add(&self, other: &Degree) -> Degree {
        assert_eq!(self.arity, other.arity, "degree arity mismatch");
        Degree {
            bits: self.bits ^ other.bits,
            arity: self.arity,
        }
    }

    pub fn checked_add(&self, other: &Degree) -> Result<Degree> {
        self.check_arity(other)?;
        Ok(self.add(other))
    }

    /// The standard scalar product ⟨a,b⟩ = Σᵢ aᵢbᵢ mod 2.
    pub fn scalar_product(&self, other: &Degree) -> u8 {
        assert_eq!(self.arity, other.arity, "degree arity mismatch");
        ((self.bits & other.bits).count_ones() & 1) as u8
    }

    pub fn checked_scalar_product(&self, other: &Degree) -> Result<u8> {
        self.check_arity(other)?;
        Ok(self.scalar_product(other))
    }

    /// (−1)^⟨a,b⟩.
    pub fn koszul_sign(&self, other: &Degree) -> i8 {
        if self.scalar_product(other) == 0 {
            1
        } else {
            -1
        }
    }

    pub fn checked_koszul_sign(&self, other: &Degree) -> Result<i8> {
        self.check_arity(other)?;
        Ok(self.koszul_sign(other))
    }

    /// Total degree mod 2; equals ⟨a,a⟩.
    pub fn parity(&self) -> u8 {
        (self.bits.count_ones() & 1) as u8
    }

    fn check_arity(&self, other: &Degree) -> Result<()> {
        if self.arity != other.arity {
            return Err(Error::ArityMismatch(format!(
                "degrees {self} and {other} have different arities"
            )));
        }
        Ok(())
    }

    /// All 2ⁿ−1 nonzero degrees in ascending lexicographic order.
    pub fn enumerate_nonzero(arity: u8) -> Result<Vec<Degree>> {
        if arity == 0 || arity > MAX_ARITY {
            return Err(Error::ArityMismatch(format!(
                "arity must be between 1 and {MAX_ARITY}, got {arity}"
            )));
        }
        let count = (1u32 << arity) - 1;
        Ok((1..=count)
            .map(|b| Degree {
                bits: b as u16,
                arity,
            })
            .collect())
    }

    /// All 2ⁿ degrees, the zero degree first.
    pub fn enumerate_all(arity: u8) -> Result<Vec<Degree>> {
        let mut all = vec![Degree::zero(arity)];
        all.extend(Degree::enumerate_nonzero(arity)?);
        Ok(all)
    }
}

impl fmt::Display for Degree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for j in 0..self.arity as usize {
            if j > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", self.digit(j))?;
        }
        write!(f, ")")
    }
}

impl fmt::Debug for Degree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(digits: &[u8]) -> Degree {
        Degree::new(digits).unwrap()
    }

    #[test]
    fn scalar_product_examples() {
        assert_eq!(d(&[0, 1]).scalar_product(&d(&[1, 0])), 0);
        assert_eq!(d(&[1, 1]).scalar_product(&d(&[1, 1])), 0);
        assert_eq!(d(&[0, 1]).scalar_product(&d(&[0, 1])), 1);
    }

    #[test]
    fn koszul_sign_examples() {
        assert_eq!(d(&[0, 1]).koszul_sign(&d(&[1, 1])), -1);
        assert_eq!(d(&[0, 0]).koszul_sign(&d(&[1, 0])), 1);
        assert_eq!(d(&[0, 0]).koszul_sign(&d(&[1, 1])), 1);
        assert_eq!(d(&[1, 0]).koszul_sign(&d(&[1, 1])), -1);
    }

    #[test]
    fn parity_examples() {
        assert_eq!(d(&[1, 1]).parity(), 0);
        assert_eq!(d(&[0, 1]).parity(), 1);
        assert_eq!(d(&[0, 0, 0]).parity(), 0);
        // parity(a) = <a,a>
        for a in Degree::enumerate_all(3).unwrap() {
            assert_eq!(a.parity(), a.scalar_product(&a));
        }
    }

    #[test]
    fn enumerate_lexicographic() {
        let n2 = Degree::enumerate_nonzero(2).unwrap();
        assert_eq!(n2, vec![d(&[0, 1]), d(&[1, 0]), d(&[1, 1])]);

        let n1 = Degree::enumerate_nonzero(1).unwrap();
        assert_eq!(n1, vec![d(&[1])]);

        let mut n3 = Degree::enumerate_nonzero(3).unwrap();
        n3.reverse();
        let expected: Vec<Degree> = [
            [1, 1, 1],
            [1, 1, 0],
            [1, 0, 1],
            [1, 0, 0],
            [0, 1, 1],
            [0, 1, 0],
            [0, 0, 1],
        ]
        .iter()
        .map(|t| d(t))
        .collect();
        assert_eq!(n3, expected);

        assert!(Degree::enumerate_nonzero(0).is_err());
    }

    #[test]
    fn enumerate_is_strictly_increasing() {
        for n in 1..=4 {
            let degs = Degree::enumerate_nonzero(n).unwrap();
            assert_eq!(degs.len(), (1 << n) - 1);
            for w in degs.windows(2) {
                assert!(w[0] < w[1]);
                assert!(
                    w[0].digits() < w[1].digits(),
                    "packed order must agree with tuple order"
                );
            }
        }
    }

    #[test]
    fn arity_mismatch_is_an_error() {
        let a = d(&[0, 1]);
        let b = d(&[0, 1, 0]);
        assert!(a.checked_scalar_product(&b).is_err());
        assert!(a.checked_add(&b).is_err());
        assert!(a.checked_koszul_sign(&b).is_err());
    }
}
