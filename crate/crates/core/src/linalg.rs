//! Exact linear algebra: polynomial matrices for transition blocks and a
//! fraction-free solver for the affine systems produced by the coboundary
//! and intertwining solves.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::poly::BasePolynomial;

/// Dense matrix of base polynomials, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolyMatrix {
    nrows: usize,
    ncols: usize,
    nvars: usize,
    entries: Vec<BasePolynomial>,
}

impl PolyMatrix {
    pub fn zero(nrows: usize, ncols: usize, nvars: usize) -> Self {
        PolyMatrix {
            nrows,
            ncols,
            nvars,
            entries: vec![BasePolynomial::zero(nvars); nrows * ncols],
        }
    }

    pub fn identity(n: usize, nvars: usize) -> Self {
        let mut m = Self::zero(n, n, nvars);
        for i in 0..n {
            *m.get_mut(i, i) = BasePolynomial::one(nvars);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<BasePolynomial>>) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
        let nvars = rows
            .first()
            .and_then(|r| r.first())
            .map(|p| p.nvars())
            .unwrap_or(0);
        let mut m = Self::zero(nrows, ncols, nvars);
        for (i, row) in rows.into_iter().enumerate() {
            assert_eq!(row.len(), ncols);
            for (j, p) in row.into_iter().enumerate() {
                *m.get_mut(i, j) = p;
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn get(&self, i: usize, j: usize) -> &BasePolynomial {
        &self.entries[i * self.ncols + j]
    }

    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut BasePolynomial {
        &mut self.entries[i * self.ncols + j]
    }

    pub fn is_identity(&self) -> bool {
        self.nrows == self.ncols
            && (0..self.nrows).all(|i| {
                (0..self.ncols).all(|j| {
                    let e = self.get(i, j);
                    if i == j {
                        e.as_constant().map(|c| c.is_one()).unwrap_or(false)
                    } else {
                        e.is_zero()
                    }
                })
            })
    }

    pub fn mul(&self, other: &PolyMatrix) -> PolyMatrix {
        assert_eq!(self.ncols, other.nrows);
        let nvars = self.nvars;
        let mut out = PolyMatrix::zero(self.nrows, other.ncols, nvars);
        for i in 0..self.nrows {
            for j in 0..other.ncols {
                let mut acc = BasePolynomial::zero(nvars);
                for k in 0..self.ncols {
                    acc = acc.add(&self.get(i, k).mul(other.get(k, j)));
                }
                *out.get_mut(i, j) = acc;
            }
        }
        out
    }

    /// Substitutes polynomials for the base variables in every entry.
    pub fn compose_entries(&self, args: &[BasePolynomial]) -> PolyMatrix {
        let nvars = args.first().map(|p| p.nvars()).unwrap_or(0);
        let mut out = PolyMatrix::zero(self.nrows, self.ncols, nvars);
        for i in 0..self.nrows {
            for j in 0..self.ncols {
                *out.get_mut(i, j) = self.get(i, j).compose(args);
            }
        }
        out
    }

    /// Determinant by cofactor expansion; block sizes stay small here.
    pub fn det(&self) -> BasePolynomial {
        assert_eq!(self.nrows, self.ncols);
        let nvars = self.nvars;
        match self.nrows {
            0 => BasePolynomial::one(nvars),
            1 => self.get(0, 0).clone(),
            n => {
                let mut acc = BasePolynomial::zero(nvars);
                for j in 0..n {
                    let e = self.get(0, j);
                    if e.is_zero() {
                        continue;
                    }
                    let minor = self.minor(0, j);
                    let mut term = e.mul(&minor.det());
                    if j % 2 == 1 {
                        term = term.neg();
                    }
                    acc = acc.add(&term);
                }
                acc
            }
        }
    }

    fn minor(&self, row: usize, col: usize) -> PolyMatrix {
        let nvars = self.nvars;
        let mut out = PolyMatrix::zero(self.nrows - 1, self.ncols - 1, nvars);
        let mut ii = 0;
        for i in 0..self.nrows {
            if i == row {
                continue;
            }
            let mut jj = 0;
            for j in 0..self.ncols {
                if j == col {
                    continue;
                }
                *out.get_mut(ii, jj) = self.get(i, j).clone();
                jj += 1;
            }
            ii += 1;
        }
        out
    }

    /// Inverse over the polynomial ring. Exists exactly when the determinant
    /// is a nonzero constant; computed as adjugate over determinant.
    pub fn inverse_unit_det(&self) -> Result<PolyMatrix> {
        assert_eq!(self.nrows, self.ncols);
        let n = self.nrows;
        let nvars = self.nvars;
        let det = self.det();
        let c = det.as_constant().ok_or_else(|| {
            Error::NonInvertibleLinearPart(format!(
                "determinant is not a constant: {:?}",
                det.total_degree()
            ))
        })?;
        if c.is_zero() {
            return Err(Error::NonInvertibleLinearPart("determinant is zero".into()));
        }
        let inv_c = BigRational::one() / c;
        let mut out = PolyMatrix::zero(n, n, nvars);
        for i in 0..n {
            for j in 0..n {
                // adjugate: cofactor of (j, i)
                let mut cof = self.minor(j, i).det();
                if (i + j) % 2 == 1 {
                    cof = cof.neg();
                }
                *out.get_mut(i, j) = cof.scale(&inv_c);
            }
        }
        Ok(out)
    }
}

/// Inverts a square rational matrix by Gauss-Jordan elimination.
pub fn invert_rational_matrix(m: &[Vec<BigRational>]) -> Option<Vec<Vec<BigRational>>> {
    let n = m.len();
    let mut a: Vec<Vec<BigRational>> = m
        .iter()
        .map(|r| {
            assert_eq!(r.len(), n);
            r.clone()
        })
        .collect();
    let mut inv: Vec<Vec<BigRational>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        BigRational::one()
                    } else {
                        BigRational::zero()
                    }
                })
                .collect()
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col].clone();
        for j in 0..n {
            a[col][j] = &a[col][j] / &p;
            inv[col][j] = &inv[col][j] / &p;
        }
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            for j in 0..n {
                a[r][j] = &a[r][j] - &f * &a[col][j];
                inv[r][j] = &inv[r][j] - &f * &inv[col][j];
            }
        }
    }
    Some(inv)
}

/// Unknown ordering used when a solve has free variables: the declared
/// column order, or its reverse. Reversing flips which unknowns end up free,
/// yielding a different (equally valid) solution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SolveOrder {
    #[default]
    Declared,
    Reversed,
}

/// Sparse affine system Ax = b over the rationals.
#[derive(Clone, Debug, Default)]
pub struct AffineSystem {
    ncols: usize,
    rows: Vec<(Vec<(usize, BigRational)>, BigRational)>,
}

impl AffineSystem {
    pub fn new(ncols: usize) -> Self {
        AffineSystem {
            ncols,
            rows: Vec::new(),
        }
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn push_row(&mut self, coeffs: Vec<(usize, BigRational)>, rhs: BigRational) {
        if coeffs.iter().all(|(_, c)| c.is_zero()) && rhs.is_zero() {
            return;
        }
        self.rows.push((coeffs, rhs));
    }

    /// Fraction-free (Bareiss) elimination with a fixed column order; free
    /// variables are set to 0. Returns None when the system is inconsistent.
    pub fn solve(&self, order: SolveOrder) -> Option<Vec<BigRational>> {
        let cols: Vec<usize> = match order {
            SolveOrder::Declared => (0..self.ncols).collect(),
            SolveOrder::Reversed => (0..self.ncols).rev().collect(),
        };
        self.solve_ordered(&cols)
    }

    pub fn solve_ordered(&self, col_order: &[usize]) -> Option<Vec<BigRational>> {
        let w = self.ncols + 1;
        // clear denominators row by row
        let mut m: Vec<Vec<BigInt>> = Vec::with_capacity(self.rows.len());
        for (coeffs, rhs) in &self.rows {
            let mut lcm = BigInt::one();
            for (_, c) in coeffs {
                lcm = lcm.lcm(c.denom());
            }
            lcm = lcm.lcm(rhs.denom());
            let mut row = vec![BigInt::zero(); w];
            for (j, c) in coeffs {
                row[*j] = &row[*j] + c.numer() * (&lcm / c.denom());
            }
            row[self.ncols] = rhs.numer() * (&lcm / rhs.denom());
            m.push(row);
        }

        let nrows = m.len();
        let mut prev = BigInt::one();
        let mut pivots: Vec<(usize, usize)> = Vec::new();
        let mut r = 0usize;
        for &col in col_order {
            if r == nrows {
                break;
            }
            let Some(p) = (r..nrows).find(|&i| !m[i][col].is_zero()) else {
                continue;
            };
            m.swap(r, p);
            for i in r + 1..nrows {
                if m[i].iter().all(|x| x.is_zero()) {
                    continue;
                }
                for j in 0..w {
                    if j == col {
                        continue;
                    }
                    let num = &m[r][col] * &m[i][j] - &m[i][col] * &m[r][j];
                    m[i][j] = num / &prev;
                }
                m[i][col] = BigInt::zero();
            }
            prev = m[r][col].clone();
            pivots.push((r, col));
            r += 1;
        }

        // rows below the last pivot must be trivial
        for row in m.iter().skip(r) {
            if row[..self.ncols].iter().all(|x| x.is_zero()) && !row[self.ncols].is_zero() {
                return None;
            }
        }

        let mut x = vec![BigRational::zero(); self.ncols];
        for &(row, col) in pivots.iter().rev() {
            let mut acc = BigRational::from_integer(m[row][self.ncols].clone());
            for j in 0..self.ncols {
                if j == col || m[row][j].is_zero() {
                    continue;
                }
                acc -= BigRational::from_integer(m[row][j].clone()) * &x[j];
            }
            x[col] = acc / BigRational::from_integer(m[row][col].clone());
        }
        Some(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn rat(n: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(n))
    }

    fn ratf(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn solves_small_system() {
        // x + y = 3, x - y = 1  =>  x = 2, y = 1
        let mut sys = AffineSystem::new(2);
        sys.push_row(vec![(0, rat(1)), (1, rat(1))], rat(3));
        sys.push_row(vec![(0, rat(1)), (1, rat(-1))], rat(1));
        let x = sys.solve(SolveOrder::Declared).unwrap();
        assert_eq!(x, vec![rat(2), rat(1)]);
    }

    #[test]
    fn free_variables_are_zero_and_order_matters() {
        // x - y = 1 has a line of solutions
        let mut sys = AffineSystem::new(2);
        sys.push_row(vec![(0, rat(1)), (1, rat(-1))], rat(1));
        let a = sys.solve(SolveOrder::Declared).unwrap();
        assert_eq!(a, vec![rat(1), rat(0)]);
        let b = sys.solve(SolveOrder::Reversed).unwrap();
        assert_eq!(b, vec![rat(0), rat(-1)]);
        assert_ne!(a, b);
    }

    #[test]
    fn detects_inconsistency() {
        let mut sys = AffineSystem::new(1);
        sys.push_row(vec![(0, rat(1))], rat(1));
        sys.push_row(vec![(0, rat(1))], rat(2));
        assert!(sys.solve(SolveOrder::Declared).is_none());
    }

    #[test]
    fn rational_coefficients() {
        // (1/2)x = 3/4
        let mut sys = AffineSystem::new(1);
        sys.push_row(vec![(0, ratf(1, 2))], ratf(3, 4));
        let x = sys.solve(SolveOrder::Declared).unwrap();
        assert_eq!(x, vec![ratf(3, 2)]);
    }

    #[test]
    fn poly_matrix_inverse_unit_det() {
        // [[1, x], [0, 1]] over one variable
        let one = BasePolynomial::one(1);
        let x = BasePolynomial::var(1, 0);
        let zero = BasePolynomial::zero(1);
        let m = PolyMatrix::from_rows(vec![vec![one.clone(), x.clone()], vec![zero, one.clone()]]);
        let inv = m.inverse_unit_det().unwrap();
        assert!(m.mul(&inv).is_identity());

        // [[x]] is not invertible over the ring
        let bad = PolyMatrix::from_rows(vec![vec![x]]);
        assert!(bad.inverse_unit_det().is_err());
    }

    #[test]
    fn rational_matrix_inverse() {
        let m = vec![vec![rat(2), rat(1)], vec![rat(1), rat(1)]];
        let inv = invert_rational_matrix(&m).unwrap();
        assert_eq!(inv[0], vec![rat(1), rat(-1)]);
        assert_eq!(inv[1], vec![rat(-1), rat(2)]);
        let sing = vec![vec![rat(1), rat(1)], vec![rat(1), rat(1)]];
        assert!(invert_rational_matrix(&sing).is_none());
    }
}
