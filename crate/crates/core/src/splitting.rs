//! Constructive splitting of a graded atlas: build the base embedding order
//! by order, cancel the Čech mismatch cocycles by exact linear solves, then
//! solve for chart-wise isomorphisms intertwining the atlas with the split
//! model of its linearization, and verify the result.
//!
//! The vanishing of the relevant Čech cohomology is classically supplied by
//! partitions of unity; here it becomes an explicit affine solve over the
//! rationals with a caller-set bound D on base-coefficient degrees, and
//! `UnsolvableAtBound` is a first-class outcome.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::Zero;

use crate::atlas::{write_vars, Atlas};
use crate::bundle::{linearize, GradedBundle};
use crate::degree::Degree;
use crate::error::{Error, Result};
use crate::linalg::{AffineSystem, SolveOrder};
use crate::morphism::Morphism;
use crate::parse::SplittingSpec;
use crate::poly::{BaseMono, BasePolynomial};
use crate::series::{Cap, FormalMono, GradedSeries};
use crate::table::VariableTable;

/// Chart-wise embedding of base functions: per chart U, the images
/// φ_U(x^i), degree-0 series with ε-part x^i, truncated at `order`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmbeddingFamily {
    order: u32,
    images: BTreeMap<String, Vec<GradedSeries>>,
}

impl EmbeddingFamily {
    /// φ₀ = id: every base coordinate embeds as itself.
    pub fn identity(atlas: &Atlas) -> Result<Self> {
        let mut images = BTreeMap::new();
        for chart in atlas.charts() {
            let t = atlas.chart_table(chart)?;
            let imgs = (0..t.p())
                .map(|i| GradedSeries::base_var(t.clone(), Cap::At(0), i))
                .collect();
            images.insert(chart.clone(), imgs);
        }
        Ok(EmbeddingFamily { order: 0, images })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn chart_images(&self, chart: &str) -> Result<&Vec<GradedSeries>> {
        self.images
            .get(chart)
            .ok_or_else(|| Error::MalformedAtlas(format!("no embedding for chart `{chart}`")))
    }

    /// Applies the chart embedding to a base polynomial (an algebra
    /// morphism: substitute x^i ↦ φ_U(x^i)).
    pub fn apply(&self, chart: &str, poly: &BasePolynomial, cap: Cap) -> Result<GradedSeries> {
        let imgs = self.chart_images(chart)?;
        let table = imgs
            .first()
            .map(|s| s.table().clone())
            .ok_or_else(|| Error::MalformedAtlas("chart has no base coordinates".into()))?;
        GradedSeries::eval_poly(poly, imgs, table, cap)
    }

    /// ε ∘ φ = id: the ε-part of every image is exactly its coordinate.
    pub fn epsilon_is_identity(&self) -> bool {
        self.images.values().all(|imgs| {
            imgs.iter()
                .enumerate()
                .all(|(i, s)| s.epsilon() == BasePolynomial::var(s.table().p(), i))
        })
    }
}

/// The raw extension to the next order: polynomial images are their own
/// extensions, so the data is unchanged and only the cap moves up. No
/// consistency across overlaps is guaranteed yet.
pub fn extend_phi(phi: &EmbeddingFamily) -> EmbeddingFamily {
    let order = phi.order + 1;
    let images = phi
        .images
        .iter()
        .map(|(c, imgs)| {
            // terms of the stored images never exceed the old cap, so
            // re-capping loses nothing
            let raised = imgs
                .iter()
                .map(|s| {
                    let mut out = GradedSeries::zero(s.table().clone(), Cap::At(order));
                    for (m, p) in s.terms() {
                        out.insert_term(m.clone(), p.clone());
                    }
                    out
                })
                .collect();
            (c.clone(), raised)
        })
        .collect();
    EmbeddingFamily { order, images }
}

/// Key of a Čech component: a chart for 0-cochains, an ordered overlap for
/// 1-cochains.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum CochainKey {
    Chart(String),
    Overlap(String, String),
}

impl std::fmt::Display for CochainKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CochainKey::Chart(c) => write!(f, "{c}"),
            CochainKey::Overlap(u, v) => write!(f, "{u} {v}"),
        }
    }
}

/// A derivation-valued cochain Σᵢ wᵢ ∂_{xᵢ}, stored through its component
/// series wᵢ. Components of an overlap (U,V) live over U's table; every
/// component is degree 0 and of formal order exactly `order`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CechCochain {
    order: u32,
    components: BTreeMap<CochainKey, Vec<GradedSeries>>,
}

impl CechCochain {
    pub fn new(order: u32, components: BTreeMap<CochainKey, Vec<GradedSeries>>) -> Result<Self> {
        let zero_of = |s: &GradedSeries| Degree::zero(s.table().arity());
        for (key, comps) in &components {
            for w in comps {
                if !w.is_homogeneous_of(&zero_of(w)) {
                    return Err(Error::GradingViolation(format!(
                        "cochain component on {key} is not of degree 0"
                    )));
                }
                if !w.truncate(order.saturating_sub(1)).is_zero() {
                    return Err(Error::ResidualTooLow(format!(
                        "cochain component on {key} has terms below order {order}"
                    )));
                }
            }
        }
        Ok(CechCochain { order, components })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn components(&self) -> &BTreeMap<CochainKey, Vec<GradedSeries>> {
        &self.components
    }

    pub fn is_zero(&self) -> bool {
        self.components
            .values()
            .all(|c| c.iter().all(|s| s.is_zero()))
    }

    /// Derivation action on a base polynomial: Σᵢ wᵢ ∂P/∂xᵢ.
    pub fn apply(&self, key: &CochainKey, poly: &BasePolynomial) -> Result<GradedSeries> {
        let comps = self
            .components
            .get(key)
            .ok_or_else(|| Error::MalformedAtlas(format!("no cochain component on {key}")))?;
        let table = comps
            .first()
            .map(|s| s.table().clone())
            .ok_or_else(|| Error::MalformedAtlas("empty cochain component".into()))?;
        let cap = comps.first().map(|s| s.cap()).unwrap_or(Cap::Exact);
        let mut out = GradedSeries::zero(table.clone(), cap);
        for (i, w) in comps.iter().enumerate() {
            let dp = poly.partial(i);
            if dp.is_zero() {
                continue;
            }
            out = out.add(&w.scale_poly(&dp))?;
        }
        Ok(out)
    }
}

/// Both routes a base coordinate can take across an ordered overlap (U,V):
/// directly through φ_U, or expressed in V-coordinates, embedded by φ_V, and
/// transported back through the transition pullback. Their difference is the
/// mismatch component.
fn route_difference(
    atlas: &Atlas,
    phi: &EmbeddingFamily,
    src: &str,
    dst: &str,
    cap: u32,
) -> Result<Vec<GradedSeries>> {
    let t = atlas
        .transition(src, dst)
        .ok_or_else(|| Error::MalformedAtlas(format!("missing transition {src} -> {dst}")))?
        .truncated(cap);
    let binv = t.base_affine_inverse()?;
    let direct = phi.chart_images(src)?;
    let mut out = Vec::with_capacity(binv.len());
    for (i, b) in binv.iter().enumerate() {
        let through_v = t.pullback(&phi.apply(dst, b, Cap::At(cap))?)?;
        out.push(direct[i].truncate(cap).sub(&through_v)?);
    }
    Ok(out)
}

/// The Čech 1-cochain of overlap disagreements of a raw extension. Every
/// component must vanish below the family's order; otherwise the input
/// family was not consistent at the previous order.
pub fn mismatch_cocycle(atlas: &Atlas, raw_phi: &EmbeddingFamily) -> Result<CechCochain> {
    let m = raw_phi.order;
    let mut components = BTreeMap::new();
    for (src, dst) in atlas.directed_overlaps() {
        let w = route_difference(atlas, raw_phi, &src, &dst, m)?;
        for (i, wi) in w.iter().enumerate() {
            if m > 0 && !wi.truncate(m - 1).is_zero() {
                return Err(Error::ResidualTooLow(format!(
                    "mismatch on {src} {dst}, coordinate {i}, has terms below order {m}"
                )));
            }
        }
        components.insert(CochainKey::Overlap(src, dst), w);
    }
    CechCochain::new(m, components)
}

/// All base monomials of total degree ≤ bound over p variables, sorted.
fn base_monos_up_to(p: usize, bound: u32) -> Vec<BaseMono> {
    let mut out = Vec::new();
    let mut acc = vec![0u16; p];
    fn rec(p: usize, i: usize, left: u32, acc: &mut Vec<u16>, out: &mut Vec<BaseMono>) {
        if i == p {
            out.push(BaseMono(acc.clone()));
            return;
        }
        for e in 0..=left {
            acc[i] = e as u16;
            rec(p, i + 1, left - e, acc, out);
        }
        acc[i] = 0;
    }
    rec(p, 0, bound, &mut acc, &mut out);
    out.sort();
    out
}

/// Monomials of exact order m and degree 0 over the table.
fn degree_zero_monos(table: &VariableTable, m: u32) -> Vec<FormalMono> {
    let zero = Degree::zero(table.arity());
    FormalMono::enumerate_of_order(table, m)
        .into_iter()
        .filter(|mono| mono.degree(table) == zero)
        .collect()
}

/// One unknown of the coboundary solve: a rational coefficient of
/// x^α ξ^μ ∂_{xᵢ} on one chart.
#[derive(Clone, Debug)]
struct Unknown {
    chart_idx: usize,
    coord: usize,
    mono: FormalMono,
    base: BaseMono,
}

/// Solves η_V|∩ − η_U|∩ = ω on every ordered overlap for per-chart
/// derivations η with base-coefficient degree ≤ `bound`, as one affine
/// system over the rationals. Components of η_V transport into U's frame
/// through the transition pullback and the constant Jacobian of the inverse
/// base map. Any solution is acceptable; free unknowns become zero.
pub fn coboundary_solve(
    atlas: &Atlas,
    omega: &CechCochain,
    bound: u32,
    order: SolveOrder,
) -> Result<CechCochain> {
    let m = omega.order;
    let charts: Vec<&String> = atlas.charts().iter().collect();
    let p = atlas.base_names().len();

    // enumerate unknowns chart by chart, coordinate, monomial, base monomial
    let mut unknowns: Vec<Unknown> = Vec::new();
    let mut chart_monos: Vec<Vec<FormalMono>> = Vec::new();
    for chart in &charts {
        let table = atlas.chart_table(chart)?;
        chart_monos.push(degree_zero_monos(table, m));
    }
    for (chart_idx, _) in charts.iter().enumerate() {
        for coord in 0..p {
            for mono in &chart_monos[chart_idx] {
                for base in base_monos_up_to(p, bound) {
                    unknowns.push(Unknown {
                        chart_idx,
                        coord,
                        mono: mono.clone(),
                        base,
                    });
                }
            }
        }
    }

    let mut rows: RowMap = BTreeMap::new();
    let add_series = |rows: &mut RowMap,
                      ov: usize,
                      coord: usize,
                      s: &GradedSeries,
                      col: Option<usize>,
                      scale: &BigRational| {
        for (mono, poly) in s.terms() {
            for (bm, c) in poly.terms() {
                let key = (ov, coord, mono.clone(), bm.clone());
                let entry = rows
                    .entry(key)
                    .or_insert_with(|| (Vec::new(), BigRational::zero()));
                let val = c * scale;
                match col {
                    Some(j) => entry.0.push((j, val)),
                    None => entry.1 += val,
                }
            }
        }
    };

    let overlaps = atlas.directed_overlaps();
    let one = BigRational::from_integer(1.into());
    let minus_one = -&one;
    for (ov_idx, (src, dst)) in overlaps.iter().enumerate() {
        let t = atlas
            .transition(src, dst)
            .ok_or_else(|| Error::MalformedAtlas(format!("missing transition {src} -> {dst}")))?
            .truncated(m);
        // constant Jacobian of the inverse base map: expresses ∂_{x_V} in
        // U-frame components
        let binv = t.base_affine_inverse()?;
        let jac: Vec<Vec<BigRational>> = (0..p)
            .map(|i| {
                (0..p)
                    .map(|j| binv[i].coeff(&BaseMono::var(p, j)))
                    .collect()
            })
            .collect();
        let src_idx = charts.iter().position(|c| *c == src).expect("chart");
        let dst_idx = charts.iter().position(|c| *c == dst).expect("chart");
        let dst_table = atlas.chart_table(dst)?;

        for (col, u) in unknowns.iter().enumerate() {
            if u.chart_idx == src_idx {
                // -η_U contribution, directly in U's frame
                let basis = GradedSeries::term(
                    atlas.chart_table(src)?.clone(),
                    Cap::At(m),
                    u.mono.clone(),
                    poly_from_mono(p, &u.base),
                );
                add_series(&mut rows, ov_idx, u.coord, &basis, Some(col), &minus_one);
            } else if u.chart_idx == dst_idx {
                // +transported η_V: pull the basis back and rotate the
                // vector components by the Jacobian
                let basis = GradedSeries::term(
                    dst_table.clone(),
                    Cap::At(m),
                    u.mono.clone(),
                    poly_from_mono(p, &u.base),
                );
                let pulled = t.pullback(&basis)?;
                for (i, jrow) in jac.iter().enumerate() {
                    let a = &jrow[u.coord];
                    if a.is_zero() {
                        continue;
                    }
                    add_series(&mut rows, ov_idx, i, &pulled, Some(col), a);
                }
            }
        }

        // right-hand side: ω components on this overlap
        let w = omega
            .components
            .get(&CochainKey::Overlap(src.clone(), dst.clone()))
            .ok_or_else(|| {
                Error::MalformedAtlas(format!("cocycle has no component on {src} {dst}"))
            })?;
        for (i, wi) in w.iter().enumerate() {
            add_series(&mut rows, ov_idx, i, wi, None, &one);
        }
    }

    let mut sys = AffineSystem::new(unknowns.len());
    for (_, (coeffs, rhs)) in rows {
        sys.push_row(coeffs, rhs);
    }
    let solution = sys.solve(order).ok_or(Error::UnsolvableAtBound { bound })?;

    let mut components: BTreeMap<CochainKey, Vec<GradedSeries>> = BTreeMap::new();
    for (chart_idx, chart) in charts.iter().enumerate() {
        let table = atlas.chart_table(chart)?;
        let mut comps = vec![GradedSeries::zero(table.clone(), Cap::At(m)); p];
        for (col, u) in unknowns.iter().enumerate() {
            if u.chart_idx != chart_idx || solution[col].is_zero() {
                continue;
            }
            let mut poly = poly_from_mono(p, &u.base);
            poly = poly.scale(&solution[col]);
            comps[u.coord].insert_term(u.mono.clone(), poly);
        }
        components.insert(CochainKey::Chart((*chart).clone()), comps);
    }
    CechCochain::new(m, components)
}

/// Row key of an assembled equation: (overlap index, coordinate, formal
/// monomial, base monomial); the value holds the unknown coefficients and
/// the accumulated right-hand side.
type RowKey = (usize, usize, FormalMono, BaseMono);
type RowMap = BTreeMap<RowKey, (Vec<(usize, BigRational)>, BigRational)>;

fn poly_from_mono(p: usize, m: &BaseMono) -> BasePolynomial {
    let mut poly = BasePolynomial::zero(p);
    poly.insert(m.clone(), BigRational::from_integer(1.into()));
    poly
}

/// Runs the induction φ₀ = id; extend; mismatch; solve; correct, up to
/// order k. The result is consistent across all declared overlaps mod
/// 𝒥^{k+1} and satisfies ε ∘ φ = id.
pub fn build_phi(atlas: &Atlas, k: u32, bound: u32, order: SolveOrder) -> Result<EmbeddingFamily> {
    let mut phi = EmbeddingFamily::identity(atlas)?;
    for _ in 0..k {
        let raw = extend_phi(&phi);
        let omega = mismatch_cocycle(atlas, &raw)?;
        if omega.is_zero() {
            phi = raw;
            continue;
        }
        let eta = coboundary_solve(atlas, &omega, bound, order)?;
        let mut images = BTreeMap::new();
        for (chart, imgs) in &raw.images {
            let etas = &eta.components[&CochainKey::Chart(chart.clone())];
            let corrected: Result<Vec<GradedSeries>> =
                imgs.iter().zip(etas).map(|(img, e)| img.add(e)).collect();
            images.insert(chart.clone(), corrected?);
        }
        phi = EmbeddingFamily {
            order: raw.order,
            images,
        };
    }
    Ok(phi)
}

/// Per-overlap consistency residuals of an embedding family at order k;
/// empty when φ_U and the transported φ_V agree everywhere mod 𝒥^{k+1}.
pub fn phi_consistency_residuals(
    atlas: &Atlas,
    phi: &EmbeddingFamily,
    k: u32,
) -> Result<Vec<(String, GradedSeries)>> {
    let mut out = Vec::new();
    for (src, dst) in atlas.directed_overlaps() {
        let w = route_difference(atlas, phi, &src, &dst, k)?;
        for (i, wi) in w.into_iter().enumerate() {
            if !wi.is_zero() {
                out.push((format!("{src} {dst} coordinate {i}"), wi));
            }
        }
    }
    Ok(out)
}

/// A chart-indexed family of morphisms carrying the split-model coordinates
/// into the atlas algebra, with the base part given by an embedding family.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplittingIso {
    order: u32,
    morphisms: BTreeMap<String, Morphism>,
}

impl SplittingIso {
    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn morphism(&self, chart: &str) -> Result<&Morphism> {
        self.morphisms
            .get(chart)
            .ok_or_else(|| Error::MalformedAtlas(format!("no morphism for chart `{chart}`")))
    }

    pub fn morphisms(&self) -> impl Iterator<Item = (&String, &Morphism)> {
        self.morphisms.iter()
    }

    /// Identity family on the atlas's own coordinates (useful as a negative
    /// control: it fails verification on any genuinely twisted atlas).
    pub fn identity(atlas: &Atlas, k: u32) -> Result<Self> {
        let (_, split) = split_model(atlas)?;
        let mut morphisms = BTreeMap::new();
        for chart in atlas.charts() {
            let src = atlas.chart_table(chart)?.clone();
            let tgt = split.chart_table(chart)?.clone();
            let m = crate::morphism::morphism_from_assignments(src, tgt, &[], Cap::At(k))?;
            morphisms.insert(chart.clone(), m);
        }
        Ok(SplittingIso {
            order: k,
            morphisms,
        })
    }

    /// Serializes as morphism blocks in the splitting grammar.
    pub fn to_text(&self, atlas: &Atlas) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "splitting {} n={} k={} convention={}",
            atlas.name(),
            atlas.arity(),
            self.order,
            atlas.rule()
        );
        write_vars(&mut out, atlas.base_names(), atlas.formal_vars());
        for (chart, m) in &self.morphisms {
            let _ = writeln!(out, "morphism {chart} {{");
            out.push_str(&m.to_block_text("  "));
            let _ = writeln!(out, "}}");
        }
        out
    }

    /// Binds a parsed splitting file to an atlas, reconstructing the split
    /// model to type the morphism targets.
    pub fn from_spec(spec: &SplittingSpec, atlas: &Atlas) -> Result<Self> {
        if spec.arity != atlas.arity()
            || spec.base_names != atlas.base_names()
            || spec.formal != atlas.formal_vars()
            || spec.rule != atlas.rule()
        {
            return Err(Error::TableMismatch(format!(
                "splitting file `{}` does not match the variable signature of atlas `{}`",
                spec.name,
                atlas.name()
            )));
        }
        let (_, split) = split_model(atlas)?;
        let cap = Cap::At(spec.order);
        let mut assigned: BTreeMap<String, &Vec<(String, GradedSeries)>> = BTreeMap::new();
        for (chart, assigns) in &spec.morphisms {
            if !atlas.charts().contains(chart) {
                return Err(Error::MalformedAtlas(format!(
                    "splitting file names unknown chart `{chart}`"
                )));
            }
            assigned.insert(chart.clone(), assigns);
        }
        let mut morphisms = BTreeMap::new();
        for chart in atlas.charts() {
            let src = atlas.chart_table(chart)?.clone();
            let tgt = split.chart_table(chart)?.clone();
            let rebound: Vec<(String, GradedSeries)> = match assigned.get(chart) {
                Some(assigns) => assigns
                    .iter()
                    .map(|(n, s)| Ok((n.clone(), s.with_table(src.clone())?)))
                    .collect::<Result<_>>()?,
                None => Vec::new(),
            };
            let m = crate::morphism::morphism_from_assignments(src, tgt, &rebound, cap)?;
            morphisms.insert(chart.clone(), m);
        }
        Ok(SplittingIso {
            order: spec.order,
            morphisms,
        })
    }
}

/// Linearization and its split model, as a pair.
pub fn split_model(atlas: &Atlas) -> Result<(GradedBundle, Atlas)> {
    let bundle = linearize(atlas)?;
    let split = bundle.split_atlas()?;
    Ok((bundle, split))
}

/// Builds the splitting isomorphism: base images from `build_phi`, formal
/// images the identity plus order ≥ 2 corrections solved order by order from
/// the intertwining constraint T_{UV} ∘ Φ_V = Φ_U ∘ S_{UV}.
pub fn build_splitting_iso(
    atlas: &Atlas,
    k: u32,
    bound: u32,
    order: SolveOrder,
) -> Result<SplittingIso> {
    if k < 1 {
        return Err(Error::MalformedAtlas(
            "splitting order k must be at least 1".into(),
        ));
    }
    let report = atlas.check_cocycle(k)?;
    if !report.pass() {
        return Err(Error::CocyclePrecondition(format!(
            "atlas `{}` fails the cocycle check at cap {k}",
            atlas.name()
        )));
    }
    let phi = build_phi(atlas, k, bound, order)?;
    let (_, split) = split_model(atlas)?;
    let cap = Cap::At(k);
    let charts: Vec<&String> = atlas.charts().iter().collect();
    let p = atlas.base_names().len();
    let q = atlas.formal_vars().len();

    // current formal images: identity, corrections accumulate below
    let mut formal_images: BTreeMap<String, Vec<GradedSeries>> = BTreeMap::new();
    for chart in &charts {
        let t = atlas.chart_table(chart)?;
        formal_images.insert(
            (*chart).clone(),
            (0..q)
                .map(|a| GradedSeries::formal_var(t.clone(), cap, a))
                .collect(),
        );
    }

    let build_morphism =
        |formal_images: &BTreeMap<String, Vec<GradedSeries>>, chart: &str| -> Result<Morphism> {
            let src = atlas.chart_table(chart)?.clone();
            let tgt = split.chart_table(chart)?.clone();
            let base = phi
                .chart_images(chart)?
                .iter()
                .map(|s| s.with_cap(cap))
                .collect();
            Morphism::new(src, tgt, base, formal_images[chart].clone(), cap)
        };

    for m in 2..=k {
        // unknowns: per chart, per formal coordinate, per monomial of order
        // m with the coordinate's degree, per base monomial of degree <= D
        let mut unknowns: Vec<Unknown> = Vec::new();
        for (chart_idx, chart) in charts.iter().enumerate() {
            let table = atlas.chart_table(chart)?;
            for b in 0..q {
                let want = *table.formal_degree(b);
                for mono in FormalMono::enumerate_of_order(table, m) {
                    if mono.degree(table) != want {
                        continue;
                    }
                    for base in base_monos_up_to(p, bound) {
                        unknowns.push(Unknown {
                            chart_idx,
                            coord: b,
                            mono: mono.clone(),
                            base,
                        });
                    }
                }
            }
        }

        let mut rows: RowMap = BTreeMap::new();
        let add_series = |rows: &mut RowMap,
                          ov: usize,
                          coord: usize,
                          s: &GradedSeries,
                          col: Option<usize>,
                          negate: bool| {
            for (mono, poly) in s.terms() {
                for (bm, c) in poly.terms() {
                    let key = (ov, coord, mono.clone(), bm.clone());
                    let entry = rows
                        .entry(key)
                        .or_insert_with(|| (Vec::new(), BigRational::zero()));
                    let val = if negate { -c } else { c.clone() };
                    match col {
                        Some(j) => entry.0.push((j, val)),
                        None => entry.1 += val,
                    }
                }
            }
        };

        let overlaps = atlas.directed_overlaps();
        for (ov_idx, (src, dst)) in overlaps.iter().enumerate() {
            let t_uv = atlas.transition(src, dst).expect("checked").truncated(m);
            let s_uv = split
                .transition(src, dst)
                .expect("split transition")
                .truncated(m);
            let src_idx = charts.iter().position(|c| *c == src).expect("chart");
            let dst_idx = charts.iter().position(|c| *c == dst).expect("chart");
            let phi_u = build_morphism(&formal_images, src)?.truncated(m);
            let phi_v = build_morphism(&formal_images, dst)?.truncated(m);

            for b in 0..q {
                // known parts of T*(Φ_V(ξ_b)) − Φ_U(S*(ξ_b)) at cap m
                let lhs = t_uv.pullback(phi_v.formal_image(b))?;
                let rhs = phi_u.pullback(s_uv.formal_image(b))?;
                let known = lhs.sub(&rhs)?;
                if m > 0 && !known.truncate(m - 1).is_zero() {
                    return Err(Error::ResidualTooLow(format!(
                        "intertwining residual on {src} {dst} below order {m}"
                    )));
                }
                // rhs of the affine system: −known
                add_series(&mut rows, ov_idx, b, &known, None, true);

                let want = *atlas.chart_table(src)?.formal_degree(b);
                for (col, u) in unknowns.iter().enumerate() {
                    if u.coord == b && u.chart_idx == dst_idx {
                        // +T*(basis over V)
                        let basis = GradedSeries::term(
                            atlas.chart_table(dst)?.clone(),
                            Cap::At(m),
                            u.mono.clone(),
                            poly_from_mono(p, &u.base),
                        );
                        let pulled = t_uv.pullback(&basis)?;
                        add_series(&mut rows, ov_idx, b, &pulled, Some(col), false);
                    }
                    if u.chart_idx == src_idx {
                        // −L_{b,a}(φ_U(x)) · basis for the a-th U-correction
                        let a = u.coord;
                        if atlas.chart_table(src)?.formal_degree(a) != &want {
                            continue;
                        }
                        let l_ba = s_uv.formal_image(b).coeff(&FormalMono::var(q, a));
                        if l_ba.is_zero() {
                            continue;
                        }
                        let l_at_phi = phi.apply(src, &l_ba, Cap::At(m))?;
                        let basis = GradedSeries::term(
                            atlas.chart_table(src)?.clone(),
                            Cap::At(m),
                            u.mono.clone(),
                            poly_from_mono(p, &u.base),
                        );
                        let effect = l_at_phi.mul(&basis)?;
                        add_series(&mut rows, ov_idx, b, &effect, Some(col), true);
                    }
                }
            }
        }

        let mut sys = AffineSystem::new(unknowns.len());
        for (_, (coeffs, rhs)) in rows {
            sys.push_row(coeffs, rhs);
        }
        let solution = sys.solve(order).ok_or(Error::UnsolvableAtBound { bound })?;
        for (col, u) in unknowns.iter().enumerate() {
            if solution[col].is_zero() {
                continue;
            }
            let chart = charts[u.chart_idx];
            let imgs = formal_images.get_mut(chart.as_str()).expect("chart images");
            let poly = poly_from_mono(p, &u.base).scale(&solution[col]);
            imgs[u.coord].insert_term(u.mono.clone(), poly);
        }
    }

    let mut morphisms = BTreeMap::new();
    for chart in &charts {
        morphisms.insert((*chart).clone(), build_morphism(&formal_images, chart)?);
    }
    Ok(SplittingIso {
        order: k,
        morphisms,
    })
}

/// Deterministic splitmix64 stream for the randomized multiplicativity
/// checks inside verification reports.
struct SplitMix64(u64);

impl SplitMix64 {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    fn below(&mut self, n: u64) -> u64 {
        self.next() % n
    }
}

/// Random series over a table, homogeneous of the degree of a randomly
/// chosen admissible monomial with order in 1..=max_order.
fn random_homogeneous(
    table: &Arc<VariableTable>,
    rng: &mut SplitMix64,
    max_order: u32,
    cap: Cap,
) -> GradedSeries {
    let order = 1 + rng.below(max_order as u64) as u32;
    let monos = FormalMono::enumerate_of_order(table, order);
    if monos.is_empty() {
        return GradedSeries::zero(table.clone(), cap);
    }
    let lead = &monos[rng.below(monos.len() as u64) as usize];
    let sigma = lead.degree(table);
    let mut out = GradedSeries::zero(table.clone(), cap);
    for mono in monos.iter().filter(|m| m.degree(table) == sigma) {
        if rng.below(2) == 0 {
            continue;
        }
        let c = rng.below(7) as i64 - 3;
        if c == 0 {
            continue;
        }
        let e = rng.below(3) as u16;
        let p = table.p();
        let mut poly = BasePolynomial::zero(p);
        let mut bm = BaseMono::constant(p);
        if p > 0 {
            bm.0[rng.below(p as u64) as usize] = e;
        }
        poly.insert(bm, BigRational::from_integer(c.into()));
        out.insert_term(mono.clone(), poly);
    }
    if out.is_zero() {
        GradedSeries::term(
            table.clone(),
            cap,
            lead.clone(),
            BasePolynomial::one(table.p()),
        )
    } else {
        out
    }
}

#[derive(Clone, Debug)]
pub struct VerifyEntry {
    pub label: String,
    pub failures: Vec<(String, GradedSeries)>,
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub atlas: String,
    pub order: u32,
    pub entries: Vec<VerifyEntry>,
}

impl VerifyReport {
    pub fn pass(&self) -> bool {
        self.entries.iter().all(|e| e.failures.is_empty())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "splitting verification: atlas {}, k={}",
            self.atlas, self.order
        );
        for e in &self.entries {
            if e.failures.is_empty() {
                let _ = writeln!(out, "{}: PASS", e.label);
            } else {
                let _ = writeln!(out, "{}: FAIL", e.label);
                for (what, res) in &e.failures {
                    let _ = writeln!(out, "  residual {what} = {res}");
                }
            }
        }
        let _ = writeln!(out, "RESULT: {}", if self.pass() { "PASS" } else { "FAIL" });
        out
    }
}

/// Checks a candidate splitting isomorphism chart by chart mod 𝒥^{k+1}:
/// unitality, degree preservation, multiplicativity on seeded random section
/// pairs, invertibility of the linear part per sector, and the intertwining
/// constraint on every declared ordered overlap.
pub fn verify_splitting(atlas: &Atlas, iso: &SplittingIso, k: u32) -> Result<VerifyReport> {
    let (_, split) = split_model(atlas)?;
    let mut entries = Vec::new();
    let q = atlas.formal_vars().len();

    for chart in atlas.charts() {
        let m = iso.morphism(chart)?;
        let split_table = split.chart_table(chart)?;

        // unitality
        let one = GradedSeries::one(split_table.clone(), Cap::At(k));
        let image_one = m.pullback(&one)?;
        let expect_one = GradedSeries::one(m.source().clone(), Cap::At(k));
        let mut failures = Vec::new();
        let diff = image_one.sub(&expect_one)?;
        if !diff.is_zero() {
            failures.push(("1".to_string(), diff));
        }
        entries.push(VerifyEntry {
            label: format!("chart {chart} unital"),
            failures,
        });

        // degree preservation on the generators
        let mut failures = Vec::new();
        for b in 0..q {
            let want = split_table.formal_degree(b);
            let img = m.formal_image(b);
            if !img.is_homogeneous_of(want) {
                failures.push((split_table.formal_name(b).to_string(), img.clone()));
            }
        }
        let zero_deg = Degree::zero(atlas.arity());
        for j in 0..atlas.base_names().len() {
            let img = m.base_image(j);
            if !img.is_homogeneous_of(&zero_deg) {
                failures.push((split_table.base_name(j).to_string(), img.clone()));
            }
        }
        entries.push(VerifyEntry {
            label: format!("chart {chart} degrees"),
            failures,
        });

        // multiplicativity on seeded random homogeneous pairs
        let mut rng = SplitMix64(0x5eed * (1 + entries.len() as u64));
        let mut failures = Vec::new();
        for trial in 0..16 {
            let a = random_homogeneous(split_table, &mut rng, (k / 2).max(1), Cap::At(k));
            let b = random_homogeneous(split_table, &mut rng, (k / 2).max(1), Cap::At(k));
            let lhs = m.pullback(&a.mul(&b)?)?;
            let rhs = m.pullback(&a)?.mul(&m.pullback(&b)?)?;
            let d = lhs.truncate(k).sub(&rhs.truncate(k))?;
            if !d.is_zero() {
                failures.push((format!("pair {trial}"), d));
            }
        }
        entries.push(VerifyEntry {
            label: format!("chart {chart} multiplicative"),
            failures,
        });

        // invertibility of the linear part, sector by sector
        let mut failures = Vec::new();
        match m.linear_blocks() {
            Ok(blocks) => {
                for (d, block) in blocks {
                    if block.nrows() == 0 {
                        continue;
                    }
                    if block.nrows() != block.ncols() || block.inverse_unit_det().is_err() {
                        failures.push((
                            format!("sector {d}"),
                            GradedSeries::zero(m.source().clone(), Cap::At(k)),
                        ));
                    }
                }
            }
            Err(_) => failures.push((
                "linear part".to_string(),
                GradedSeries::zero(m.source().clone(), Cap::At(k)),
            )),
        }
        let (bmat, _) = m.base_affine();
        if crate::linalg::invert_rational_matrix(&bmat).is_none() {
            failures.push((
                "base jacobian".to_string(),
                GradedSeries::zero(m.source().clone(), Cap::At(k)),
            ));
        }
        entries.push(VerifyEntry {
            label: format!("chart {chart} linear part"),
            failures,
        });
    }

    for (src, dst) in atlas.directed_overlaps() {
        let t_uv = atlas.transition(&src, &dst).expect("declared").truncated(k);
        let s_uv = split.transition(&src, &dst).expect("split").truncated(k);
        let phi_u = iso.morphism(&src)?.truncated(k);
        let phi_v = iso.morphism(&dst)?.truncated(k);
        let lhs = Morphism::compose(&phi_v, &t_uv)?;
        let rhs = Morphism::compose(&s_uv, &phi_u)?;
        let failures = lhs.residuals_mod(&rhs, k)?;
        entries.push(VerifyEntry {
            label: format!("overlap {src} {dst} intertwine"),
            failures,
        });
    }

    Ok(VerifyReport {
        atlas: atlas.name().to_string(),
        order: k,
        entries,
    })
}
