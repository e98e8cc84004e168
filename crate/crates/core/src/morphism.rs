//! Superdomain morphisms determined by coordinate images: construction with
//! degree validation, pullback of sections, composition, and order-by-order
//! inversion.
//!
//! A `Morphism` with source table S and target table T assigns to every
//! coordinate of T a series over S. Its pullback carries sections over T to
//! sections over S; two transition blocks compose exactly like coordinate
//! changes.

use std::collections::HashMap;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::Zero;

use crate::degree::Degree;
use crate::error::{Error, Result};
use crate::linalg::{invert_rational_matrix, PolyMatrix};
use crate::poly::{BaseMono, BasePolynomial};
use crate::series::{Cap, GradedSeries};
use crate::table::{SignRule, VariableTable};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Morphism {
    source: Arc<VariableTable>,
    target: Arc<VariableTable>,
    base_images: Vec<GradedSeries>,
    formal_images: Vec<GradedSeries>,
    cap: Cap,
}

impl Morphism {
    /// Validates and builds a morphism from coordinate images. Images must be
    /// homogeneous of the degrees of the target coordinates (skipped for
    /// commutative tables, where no grading constrains the data), and the
    /// ε-part of every base image must be affine so that base maps stay
    /// polynomially invertible.
    pub fn new(
        source: Arc<VariableTable>,
        target: Arc<VariableTable>,
        base_images: Vec<GradedSeries>,
        formal_images: Vec<GradedSeries>,
        cap: Cap,
    ) -> Result<Self> {
        if source.arity() != target.arity() {
            return Err(Error::ArityMismatch(format!(
                "source table `{}` has arity {}, target `{}` has arity {}",
                source.id(),
                source.arity(),
                target.id(),
                target.arity()
            )));
        }
        if base_images.len() != target.p() || formal_images.len() != target.q() {
            return Err(Error::ArityMismatch(format!(
                "expected {}|{} coordinate images for target `{}`, got {}|{}",
                target.p(),
                target.q(),
                target.id(),
                base_images.len(),
                formal_images.len()
            )));
        }
        for img in base_images.iter().chain(formal_images.iter()) {
            if img.table() != &source && !Arc::ptr_eq(img.table(), &source) {
                return Err(Error::TableMismatch(format!(
                    "image over `{}` in a morphism with source `{}`",
                    img.table().id(),
                    source.id()
                )));
            }
        }
        let graded = source.rule() != SignRule::Commutative;
        if graded {
            let zero = Degree::zero(source.arity());
            for (j, img) in base_images.iter().enumerate() {
                if !img.is_homogeneous_of(&zero) {
                    return Err(Error::DegreeMismatch(format!(
                        "image of base coordinate `{}` is not of degree {zero}: {img}",
                        target.base_name(j)
                    )));
                }
            }
            for (b, img) in formal_images.iter().enumerate() {
                let want = target.formal_degree(b);
                if !img.is_homogeneous_of(want) {
                    return Err(Error::DegreeMismatch(format!(
                        "image of `{}` must be homogeneous of degree {want}, got {img}",
                        target.formal_name(b)
                    )));
                }
            }
        }
        for (j, img) in base_images.iter().enumerate() {
            if img.epsilon().total_degree().unwrap_or(0) > 1 {
                return Err(Error::BaseMapNotSupported(format!(
                    "base image of `{}` has non-affine epsilon part",
                    target.base_name(j)
                )));
            }
        }
        let base_images = base_images.iter().map(|s| s.with_cap(cap)).collect();
        let formal_images = formal_images.iter().map(|s| s.with_cap(cap)).collect();
        Ok(Morphism {
            source,
            target,
            base_images,
            formal_images,
            cap,
        })
    }

    pub fn identity(table: Arc<VariableTable>, cap: Cap) -> Self {
        let base_images = (0..table.p())
            .map(|i| GradedSeries::base_var(table.clone(), cap, i))
            .collect();
        let formal_images = (0..table.q())
            .map(|a| GradedSeries::formal_var(table.clone(), cap, a))
            .collect();
        Morphism {
            source: table.clone(),
            target: table,
            base_images,
            formal_images,
            cap,
        }
    }

    pub fn source(&self) -> &Arc<VariableTable> {
        &self.source
    }

    pub fn target(&self) -> &Arc<VariableTable> {
        &self.target
    }

    pub fn cap(&self) -> Cap {
        self.cap
    }

    pub fn base_image(&self, j: usize) -> &GradedSeries {
        &self.base_images[j]
    }

    pub fn formal_image(&self, b: usize) -> &GradedSeries {
        &self.formal_images[b]
    }

    /// Image of a named target coordinate.
    pub fn image_of(&self, name: &str) -> Result<&GradedSeries> {
        match self.target.lookup(name)? {
            crate::table::VarRef::Base(j) => Ok(&self.base_images[j]),
            crate::table::VarRef::Formal(b) => Ok(&self.formal_images[b]),
        }
    }

    /// Substitutes the coordinate images into a section over the target.
    /// Base variables go through exact polynomial composition (their images
    /// are degree 0, hence central); the formal monomial ξ^μ becomes the
    /// product of the ζ-images taken left to right in the target's canonical
    /// order.
    pub fn pullback(&self, f: &GradedSeries) -> Result<GradedSeries> {
        if f.table() != &self.target && !Arc::ptr_eq(f.table(), &self.target) {
            return Err(Error::TableMismatch(format!(
                "pullback of a section over `{}` through a morphism onto `{}`",
                f.table().id(),
                self.target.id()
            )));
        }
        let cap = self.cap.min(f.cap());
        let mut formal_powers: HashMap<(usize, u16), GradedSeries> = HashMap::new();
        let mut out = GradedSeries::zero(self.source.clone(), cap);
        for (mono, poly) in f.terms() {
            let mut term =
                GradedSeries::eval_poly(poly, &self.base_images, self.source.clone(), cap)?;
            for (b, &e) in mono.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let pow = match formal_powers.entry((b, e)) {
                    std::collections::hash_map::Entry::Occupied(o) => o.get().clone(),
                    std::collections::hash_map::Entry::Vacant(v) => {
                        let p = self.formal_images[b].with_cap(cap).pow(e as u32)?;
                        v.insert(p.clone());
                        p
                    }
                };
                term = term.mul(&pow)?;
            }
            out = out.add(&term)?;
        }
        Ok(out)
    }

    /// Composite of two coordinate changes: `inner` first, then `outer`.
    /// The images of the composite are inner-pullbacks of outer's images.
    pub fn compose(outer: &Morphism, inner: &Morphism) -> Result<Morphism> {
        if inner.target != outer.source && !Arc::ptr_eq(&inner.target, &outer.source) {
            return Err(Error::TableMismatch(format!(
                "cannot compose: inner target `{}` is not outer source `{}`",
                inner.target.id(),
                outer.source.id()
            )));
        }
        let cap = outer.cap.min(inner.cap);
        let base_images: Result<Vec<_>> = outer
            .base_images
            .iter()
            .map(|s| inner.pullback(s))
            .collect();
        let formal_images: Result<Vec<_>> = outer
            .formal_images
            .iter()
            .map(|s| inner.pullback(s))
            .collect();
        Ok(Morphism {
            source: inner.source.clone(),
            target: outer.target.clone(),
            base_images: base_images?.iter().map(|s| s.with_cap(cap)).collect(),
            formal_images: formal_images?.iter().map(|s| s.with_cap(cap)).collect(),
            cap,
        })
    }

    pub fn truncated(&self, k: u32) -> Morphism {
        Morphism {
            source: self.source.clone(),
            target: self.target.clone(),
            base_images: self.base_images.iter().map(|s| s.truncate(k)).collect(),
            formal_images: self.formal_images.iter().map(|s| s.truncate(k)).collect(),
            cap: self.cap.min(Cap::At(k)),
        }
    }

    /// Per-coordinate differences of two morphisms with the same tables,
    /// truncated at order k. Empty when they agree mod 𝒥^{k+1}.
    pub fn residuals_mod(&self, other: &Morphism, k: u32) -> Result<Vec<(String, GradedSeries)>> {
        if self.source != other.source || self.target != other.target {
            return Err(Error::TableMismatch(
                "cannot compare morphisms with different tables".into(),
            ));
        }
        let mut out = Vec::new();
        for (j, (a, b)) in self.base_images.iter().zip(&other.base_images).enumerate() {
            let d = a.truncate(k).sub(&b.truncate(k))?;
            if !d.is_zero() {
                out.push((self.target.base_name(j).to_string(), d));
            }
        }
        for (b_idx, (a, b)) in self
            .formal_images
            .iter()
            .zip(&other.formal_images)
            .enumerate()
        {
            let d = a.truncate(k).sub(&b.truncate(k))?;
            if !d.is_zero() {
                out.push((self.target.formal_name(b_idx).to_string(), d));
            }
        }
        Ok(out)
    }

    pub fn eq_mod(&self, other: &Morphism, k: u32) -> Result<bool> {
        Ok(self.residuals_mod(other, k)?.is_empty())
    }

    /// The affine ε-part of the base map: x ↦ B·x + c over the source base
    /// variables. Construction already guarantees affineness.
    pub fn base_affine(&self) -> (Vec<Vec<BigRational>>, Vec<BigRational>) {
        let p_src = self.source.p();
        let mut mat = vec![vec![BigRational::zero(); p_src]; self.base_images.len()];
        let mut shift = vec![BigRational::zero(); self.base_images.len()];
        for (j, img) in self.base_images.iter().enumerate() {
            let eps = img.epsilon();
            for (m, c) in eps.terms() {
                if m.is_constant() {
                    shift[j] = c.clone();
                } else {
                    let i = m.0.iter().position(|&e| e == 1).expect("affine");
                    mat[j][i] = c.clone();
                }
            }
        }
        (mat, shift)
    }

    /// Inverse of the affine base map, as polynomials over the target base
    /// variables: x = B⁻¹(y − c).
    pub fn base_affine_inverse(&self) -> Result<Vec<BasePolynomial>> {
        let (mat, shift) = self.base_affine();
        let p = self.source.p();
        if self.target.p() != p {
            return Err(Error::BaseMapNotSupported(
                "base map inversion needs equal base dimensions".into(),
            ));
        }
        let inv = invert_rational_matrix(&mat).ok_or_else(|| {
            Error::NonInvertibleLinearPart("base map has singular linear part".into())
        })?;
        let mut out = Vec::with_capacity(p);
        for row in &inv {
            let mut poly = BasePolynomial::zero(p);
            for (j, c) in row.iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                poly.insert(BaseMono::var(p, j), c.clone());
                poly.insert(BaseMono::constant(p), -(c * &shift[j]));
            }
            out.push(poly);
        }
        Ok(out)
    }

    /// Coefficient matrices of the formal-linear part, one block per degree
    /// sector. Entry (r, s) of the σ-block is the coefficient of the s-th
    /// source generator of degree σ in the image of the r-th target one.
    pub fn linear_blocks(&self) -> Result<std::collections::BTreeMap<Degree, PolyMatrix>> {
        let mut blocks = std::collections::BTreeMap::new();
        let p = self.source.p();
        for d in Degree::enumerate_nonzero(self.source.arity())? {
            let tgt = self.target.sector_indices(&d);
            let src = self.source.sector_indices(&d);
            if tgt.is_empty() && src.is_empty() {
                continue;
            }
            let mut m = PolyMatrix::zero(tgt.len(), src.len(), p);
            for (r, &b) in tgt.iter().enumerate() {
                let lin = self.formal_images[b].order_part(1);
                for (mono, poly) in lin.terms() {
                    let a = mono
                        .0
                        .iter()
                        .position(|&e| e == 1)
                        .expect("order-1 monomial");
                    if let Some(s) = src.iter().position(|&x| x == a) {
                        *m.get_mut(r, s) = poly.clone();
                    }
                    // degree preservation puts every order-1 term in its own
                    // sector; cross-sector coefficients cannot occur for
                    // graded tables
                }
            }
            blocks.insert(d, m);
        }
        Ok(blocks)
    }

    /// Order-by-order inverse: returns g with g∘m and m∘g both the identity
    /// mod 𝒥^{k+1}. Requires an invertible affine base map and sector blocks
    /// invertible over the polynomial ring (constant nonzero determinant).
    pub fn invert_mod_order(&self, k: u32) -> Result<Morphism> {
        if self.source.p() != self.target.p() || self.source.q() != self.target.q() {
            return Err(Error::NonInvertibleLinearPart(
                "inversion needs equal source and target dimensions".into(),
            ));
        }
        let cap = Cap::At(k);
        let binv = self.base_affine_inverse()?;
        let mut inv_blocks = std::collections::BTreeMap::new();
        for (d, block) in self.linear_blocks()? {
            if block.nrows() != block.ncols() {
                return Err(Error::NonInvertibleLinearPart(format!(
                    "sector {d} has non-square linear part"
                )));
            }
            if block.nrows() == 0 {
                continue;
            }
            // express the inverse block over the target coordinates
            let inv = block.inverse_unit_det().map_err(|_| {
                Error::NonInvertibleLinearPart(format!(
                    "sector {d} linear part has no polynomial inverse"
                ))
            })?;
            inv_blocks.insert(d, inv.compose_entries(&binv));
        }

        // first-order guess
        let tgt = &self.target;
        let base_images: Vec<GradedSeries> = binv
            .iter()
            .map(|p| GradedSeries::from_poly(tgt.clone(), cap, p.clone()))
            .collect();
        let mut formal_images: Vec<GradedSeries> = Vec::with_capacity(self.source.q());
        for a in 0..self.source.q() {
            let d = *self.source.formal_degree(a);
            let src_sector = self.source.sector_indices(&d);
            let tgt_sector = self.target.sector_indices(&d);
            let r = src_sector.iter().position(|&x| x == a).expect("own sector");
            let inv = inv_blocks.get(&d).ok_or_else(|| {
                Error::NonInvertibleLinearPart(format!("sector {d} missing from linear part"))
            })?;
            let mut img = GradedSeries::zero(tgt.clone(), cap);
            for (s, &b) in tgt_sector.iter().enumerate() {
                let coeff = inv.get(r, s);
                if coeff.is_zero() {
                    continue;
                }
                img = img.add(&GradedSeries::formal_var(tgt.clone(), cap, b).scale_poly(coeff))?;
            }
            formal_images.push(img);
        }
        let mut g = Morphism {
            source: self.target.clone(),
            target: self.source.clone(),
            base_images,
            formal_images,
            cap,
        };

        // Newton-style refinement: push the residual of g∘m through g and
        // subtract. Each pass gains at least one order of accuracy.
        let m = self.truncated(k);
        for _ in 0..=(k + 1) {
            let mut done = true;
            let mut new_base = Vec::with_capacity(g.base_images.len());
            for (i, img) in g.base_images.iter().enumerate() {
                let back = m.pullback(img)?;
                let r = back.sub(&GradedSeries::base_var(self.source.clone(), cap, i))?;
                if r.is_zero() {
                    new_base.push(img.clone());
                } else {
                    done = false;
                    new_base.push(img.sub(&g.pullback(&r)?)?);
                }
            }
            let mut new_formal = Vec::with_capacity(g.formal_images.len());
            for (a, img) in g.formal_images.iter().enumerate() {
                let back = m.pullback(img)?;
                let r = back.sub(&GradedSeries::formal_var(self.source.clone(), cap, a))?;
                if r.is_zero() {
                    new_formal.push(img.clone());
                } else {
                    done = false;
                    new_formal.push(img.sub(&g.pullback(&r)?)?);
                }
            }
            g.base_images = new_base;
            g.formal_images = new_formal;
            if done {
                break;
            }
        }

        // sanity: both composites must reduce to the identity mod J^{k+1}
        let id_src = Morphism::identity(self.source.clone(), cap);
        let id_tgt = Morphism::identity(self.target.clone(), cap);
        if !Morphism::compose(&g, &m)?.eq_mod(&id_src, k)?
            || !Morphism::compose(&m, &g)?.eq_mod(&id_tgt, k)?
        {
            return Err(Error::NonInvertibleLinearPart(
                "order-by-order inversion did not converge".into(),
            ));
        }
        Ok(g)
    }

    /// Renders the morphism as assignment lines in the transition-block
    /// grammar, target coordinates primed.
    pub fn to_block_text(&self, indent: &str) -> String {
        let mut out = String::new();
        for (j, img) in self.base_images.iter().enumerate() {
            out.push_str(&format!(
                "{indent}{}' = {};\n",
                self.target.base_name(j),
                img
            ));
        }
        for (b, img) in self.formal_images.iter().enumerate() {
            out.push_str(&format!(
                "{indent}{}' = {};\n",
                self.target.formal_name(b),
                img
            ));
        }
        out
    }
}

/// Builds the morphism from named coordinate images, defaulting unnamed
/// coordinates to the identity on the same-named source variable.
pub fn morphism_from_assignments(
    source: Arc<VariableTable>,
    target: Arc<VariableTable>,
    assignments: &[(String, GradedSeries)],
    cap: Cap,
) -> Result<Morphism> {
    let mut base_images: Vec<Option<GradedSeries>> = vec![None; target.p()];
    let mut formal_images: Vec<Option<GradedSeries>> = vec![None; target.q()];
    for (name, img) in assignments {
        match target.lookup(name)? {
            crate::table::VarRef::Base(j) => {
                if base_images[j].replace(img.clone()).is_some() {
                    return Err(Error::MalformedAtlas(format!(
                        "coordinate `{name}` assigned twice"
                    )));
                }
            }
            crate::table::VarRef::Formal(b) => {
                if formal_images[b].replace(img.clone()).is_some() {
                    return Err(Error::MalformedAtlas(format!(
                        "coordinate `{name}` assigned twice"
                    )));
                }
            }
        }
    }
    let base_images: Result<Vec<GradedSeries>> = base_images
        .into_iter()
        .enumerate()
        .map(|(j, img)| match img {
            Some(s) => Ok(s),
            None => {
                let name = target.base_name(j);
                match source.lookup(name)? {
                    crate::table::VarRef::Base(i) => {
                        Ok(GradedSeries::base_var(source.clone(), cap, i))
                    }
                    _ => Err(Error::UnknownVariable(name.to_string())),
                }
            }
        })
        .collect();
    let formal_images: Result<Vec<GradedSeries>> = formal_images
        .into_iter()
        .enumerate()
        .map(|(b, img)| match img {
            Some(s) => Ok(s),
            None => {
                let name = target.formal_name(b);
                match source.lookup(name)? {
                    crate::table::VarRef::Formal(a) => {
                        Ok(GradedSeries::formal_var(source.clone(), cap, a))
                    }
                    _ => Err(Error::UnknownVariable(name.to_string())),
                }
            }
        })
        .collect();
    Morphism::new(source, target, base_images?, formal_images?, cap)
}
