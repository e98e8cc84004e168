//! Graded-manifold presentations: charts with a shared variable signature,
//! declared overlaps and triples, and a transition morphism per ordered
//! chart pair. Cocycle checking, superization of commutative transition
//! data, and the tangent lift all live here.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::degree::Degree;
use crate::error::{Error, Result};
use crate::morphism::Morphism;
use crate::series::{Cap, FormalMono, GradedSeries};
use crate::table::{SignRule, VariableTable};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Atlas {
    name: String,
    arity: u8,
    rule: SignRule,
    base_names: Vec<String>,
    formal: Vec<(String, Degree)>,
    charts: Vec<String>,
    tables: BTreeMap<String, Arc<VariableTable>>,
    overlaps: Vec<(String, String)>,
    triples: Vec<(String, String, String)>,
    transitions: BTreeMap<(String, String), Morphism>,
}

impl Atlas {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        arity: u8,
        rule: SignRule,
        base_names: Vec<String>,
        formal: Vec<(String, Degree)>,
        charts: Vec<String>,
        overlaps: Vec<(String, String)>,
        triples: Vec<(String, String, String)>,
        transitions: Vec<((String, String), Morphism)>,
    ) -> Result<Self> {
        let name = name.into();
        let mut tables = BTreeMap::new();
        let mut seen = std::collections::BTreeSet::new();
        for c in &charts {
            if !seen.insert(c.clone()) {
                return Err(Error::MalformedAtlas(format!("chart `{c}` declared twice")));
            }
            let t = VariableTable::new(c.clone(), arity, base_names.clone(), formal.clone(), rule)?;
            tables.insert(c.clone(), t);
        }
        let chart_exists = |c: &String| charts.contains(c);
        for (a, b) in &overlaps {
            if !chart_exists(a) || !chart_exists(b) {
                return Err(Error::MalformedAtlas(format!(
                    "overlap {a} {b} names an unknown chart"
                )));
            }
            if a == b {
                return Err(Error::MalformedAtlas(format!(
                    "overlap {a} {a} is degenerate"
                )));
            }
        }
        let has_overlap = |x: &str, y: &str| {
            overlaps
                .iter()
                .any(|(a, b)| (a == x && b == y) || (a == y && b == x))
        };
        for (u, v, w) in &triples {
            for c in [u, v, w] {
                if !chart_exists(c) {
                    return Err(Error::MalformedAtlas(format!(
                        "triple names unknown chart `{c}`"
                    )));
                }
            }
            for (x, y) in [(u, v), (v, w), (u, w)] {
                if !has_overlap(x, y) {
                    return Err(Error::MalformedAtlas(format!(
                        "triple {u} {v} {w} requires a declared overlap {x} {y}"
                    )));
                }
            }
        }
        let mut tmap = BTreeMap::new();
        for ((src, dst), m) in transitions {
            if !has_overlap(&src, &dst) {
                return Err(Error::MalformedAtlas(format!(
                    "transition {src} -> {dst} has no declared overlap"
                )));
            }
            if m.source() != &tables[&src] || m.target() != &tables[&dst] {
                return Err(Error::TableMismatch(format!(
                    "transition {src} -> {dst} built over the wrong chart tables"
                )));
            }
            if tmap.insert((src.clone(), dst.clone()), m).is_some() {
                return Err(Error::MalformedAtlas(format!(
                    "transition {src} -> {dst} declared twice"
                )));
            }
        }
        Ok(Atlas {
            name,
            arity,
            rule,
            base_names,
            formal,
            charts,
            tables,
            overlaps,
            triples,
            transitions: tmap,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> u8 {
        self.arity
    }

    pub fn rule(&self) -> SignRule {
        self.rule
    }

    pub fn base_names(&self) -> &[String] {
        &self.base_names
    }

    pub fn formal_vars(&self) -> &[(String, Degree)] {
        &self.formal
    }

    pub fn charts(&self) -> &[String] {
        &self.charts
    }

    pub fn overlaps(&self) -> &[(String, String)] {
        &self.overlaps
    }

    pub fn triples(&self) -> &[(String, String, String)] {
        &self.triples
    }

    pub fn chart_table(&self, id: &str) -> Result<&Arc<VariableTable>> {
        self.tables
            .get(id)
            .ok_or_else(|| Error::MalformedAtlas(format!("unknown chart `{id}`")))
    }

    pub fn transition(&self, src: &str, dst: &str) -> Option<&Morphism> {
        self.transitions.get(&(src.to_string(), dst.to_string()))
    }

    pub fn transitions(&self) -> impl Iterator<Item = (&(String, String), &Morphism)> {
        self.transitions.iter()
    }

    /// Ordered chart pairs that carry a declared transition.
    pub fn directed_overlaps(&self) -> Vec<(String, String)> {
        self.transitions.keys().cloned().collect()
    }

    fn require_transition(&self, src: &str, dst: &str) -> Result<&Morphism> {
        self.transition(src, dst)
            .ok_or_else(|| Error::MalformedAtlas(format!("missing transition {src} -> {dst}")))
    }

    /// Checks every declared triple (U,V,W): the coordinate change U→V
    /// followed by V→W must match the declared U→W mod 𝒥^{cap+1}. Where both
    /// orientations of an overlap are present, also checks that they are
    /// mutually inverse at the same cap. Failures are reported per
    /// coordinate with the exact residual series.
    pub fn check_cocycle(&self, cap: u32) -> Result<CocycleReport> {
        let mut entries = Vec::new();
        for (u, v, w) in &self.triples {
            let uv = self.require_transition(u, v)?.truncated(cap);
            let vw = self.require_transition(v, w)?.truncated(cap);
            let uw = self.require_transition(u, w)?.truncated(cap);
            let composite = Morphism::compose(&vw, &uv)?;
            let failures = composite.residuals_mod(&uw, cap)?;
            entries.push(CocycleEntry {
                label: format!("triple {u} {v} {w}"),
                failures,
            });
        }
        for (a, b) in &self.overlaps {
            for (src, dst) in [(a, b), (b, a)] {
                let (Some(fwd), Some(bwd)) = (self.transition(src, dst), self.transition(dst, src))
                else {
                    continue;
                };
                let round = Morphism::compose(&bwd.truncated(cap), &fwd.truncated(cap))?;
                let id = Morphism::identity(self.tables[src.as_str()].clone(), Cap::At(cap));
                let failures = round.residuals_mod(&id, cap)?;
                entries.push(CocycleEntry {
                    label: format!("inverse {src} {dst}"),
                    failures,
                });
            }
        }
        Ok(CocycleReport {
            atlas: self.name.clone(),
            convention: self.rule,
            cap,
            entries,
        })
    }

    /// Reinterprets commutative transition data over graded variables in
    /// canonical order, under the requested convention. The polynomial data
    /// is carried over unchanged: no signs are inserted or fixed. Terms must
    /// respect the degree grading, and no stored monomial may square a
    /// generator that becomes nilpotent.
    pub fn superize(&self, rule: SignRule) -> Result<Atlas> {
        if self.rule != SignRule::Commutative {
            return Err(Error::MalformedAtlas(format!(
                "superize expects commutative input data, atlas `{}` uses `{}`",
                self.name, self.rule
            )));
        }
        if rule == SignRule::Commutative {
            return Ok(self.clone());
        }
        let mut transitions = Vec::new();
        for ((src, dst), m) in &self.transitions {
            let src_table = VariableTable::new(
                src.clone(),
                self.arity,
                self.base_names.clone(),
                self.formal.clone(),
                rule,
            )?;
            let tgt_table = src_table.with_rule(rule, dst.clone());
            let mut base_images = Vec::new();
            let mut formal_images = Vec::new();
            let zero = Degree::zero(self.arity);
            for (slot, want, img) in (0..self.tables[src].p())
                .map(|j| (self.base_names[j].clone(), zero, m.base_image(j)))
                .chain((0..self.tables[src].q()).map(|b| {
                    (
                        self.formal[b].0.clone(),
                        self.formal[b].1,
                        m.formal_image(b),
                    )
                }))
            {
                let mut out = GradedSeries::zero(src_table.clone(), img.cap());
                for (mono, poly) in img.terms() {
                    if !mono.admissible(&src_table) {
                        return Err(Error::GradingViolation(format!(
                            "transition {src} -> {dst}: term of `{slot}` squares a nilpotent generator"
                        )));
                    }
                    let d = mono.degree(&src_table);
                    if d != want {
                        return Err(Error::GradingViolation(format!(
                            "transition {src} -> {dst}: term of `{slot}` has degree {d}, expected {want}"
                        )));
                    }
                    out.insert_term(mono.clone(), poly.clone());
                }
                if base_images.len() < self.tables[src].p() {
                    base_images.push(out);
                } else {
                    formal_images.push(out);
                }
            }
            let m2 = Morphism::new(src_table, tgt_table, base_images, formal_images, m.cap())?;
            transitions.push(((src.clone(), dst.clone()), m2));
        }
        Atlas::new(
            format!("{}_{}", self.name, rule),
            self.arity,
            rule,
            self.base_names.clone(),
            self.formal.clone(),
            self.charts.clone(),
            self.overlaps.clone(),
            self.triples.clone(),
            transitions,
        )
    }

    /// Tangent lift of an arity-1 atlas: coordinates (x, ξ) double to
    /// (x, ξ, dx, dξ) with bidegrees ((0,0),(0,1),(1,0),(1,1)), and each
    /// transition image F gains a companion dF computed by the degree-(1,0)
    /// derivation with d(ab) = (da)b + (−1)^⟨(1,0),deg a⟩ a(db).
    pub fn tangent_lift(&self) -> Result<Atlas> {
        if self.arity != 1 {
            return Err(Error::ArityMismatch(format!(
                "tangent lift expects an arity-1 atlas, got {}",
                self.arity
            )));
        }
        if self.rule == SignRule::Commutative {
            return Err(Error::MalformedAtlas(
                "tangent lift needs graded input (zsp or parity)".into(),
            ));
        }
        let d01 = Degree::new(&[0, 1]).unwrap();
        let d10 = Degree::new(&[1, 0]).unwrap();
        let d11 = Degree::new(&[1, 1]).unwrap();
        let mut formal: Vec<(String, Degree)> = Vec::new();
        for (name, _) in &self.formal {
            formal.push((name.clone(), d01));
        }
        for base in &self.base_names {
            formal.push((format!("d{base}"), d10));
        }
        for (name, _) in &self.formal {
            formal.push((format!("d{name}"), d11));
        }

        let lifted_tables: BTreeMap<String, Arc<VariableTable>> = self
            .charts
            .iter()
            .map(|c| {
                VariableTable::new(
                    c.clone(),
                    2,
                    self.base_names.clone(),
                    formal.clone(),
                    SignRule::ScalarProduct,
                )
                .map(|t| (c.clone(), t))
            })
            .collect::<Result<_>>()?;

        let p = self.base_names.len();
        let q = self.formal.len();
        let mut transitions = Vec::new();
        for ((src, dst), m) in &self.transitions {
            let lsrc = lifted_tables[src].clone();
            let ltgt = lifted_tables[dst].clone();
            let lift = |s: &GradedSeries| -> GradedSeries {
                let mut out = GradedSeries::zero(lsrc.clone(), s.cap());
                for (mono, poly) in s.terms() {
                    let mut exps = FormalMono::unit(lsrc.q());
                    exps.0[..q].copy_from_slice(&mono.0);
                    out.insert_term(exps, poly.clone());
                }
                out
            };
            let base_images: Vec<GradedSeries> = (0..p).map(|j| lift(m.base_image(j))).collect();
            let formal_images_orig: Vec<GradedSeries> =
                (0..q).map(|b| lift(m.formal_image(b))).collect();
            let d_base: Result<Vec<GradedSeries>> = base_images
                .iter()
                .map(|s| tangent_derivation(&lsrc, s, p, q))
                .collect();
            let d_formal: Result<Vec<GradedSeries>> = formal_images_orig
                .iter()
                .map(|s| tangent_derivation(&lsrc, s, p, q))
                .collect();
            let mut formal_images = formal_images_orig;
            formal_images.extend(d_base?);
            formal_images.extend(d_formal?);
            let lifted = Morphism::new(lsrc, ltgt, base_images, formal_images, m.cap())?;
            transitions.push(((src.clone(), dst.clone()), lifted));
        }
        Atlas::new(
            format!("T{}", self.name),
            2,
            SignRule::ScalarProduct,
            self.base_names.clone(),
            formal,
            self.charts.clone(),
            self.overlaps.clone(),
            self.triples.clone(),
            transitions,
        )
    }

    /// Canonical file rendering in the atlas grammar.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "atlas {} n={} convention={}",
            self.name, self.arity, self.rule
        );
        write_vars(&mut out, &self.base_names, &self.formal);
        for c in &self.charts {
            let _ = writeln!(out, "chart {c};");
        }
        for (a, b) in &self.overlaps {
            let _ = writeln!(out, "overlap {a} {b};");
        }
        for (u, v, w) in &self.triples {
            let _ = writeln!(out, "triple {u} {v} {w};");
        }
        for ((src, dst), m) in &self.transitions {
            let _ = writeln!(out, "transition {src} -> {dst} {{");
            out.push_str(&m.to_block_text("  "));
            let _ = writeln!(out, "}}");
        }
        out
    }
}

pub(crate) fn write_vars(out: &mut String, base: &[String], formal: &[(String, Degree)]) {
    if !base.is_empty() {
        let _ = writeln!(out, "vars {};", base.join(", "));
    }
    if !formal.is_empty() {
        let decls: Vec<String> = formal.iter().map(|(n, d)| format!("{n}:{d}")).collect();
        let _ = writeln!(out, "vars {};", decls.join(", "));
    }
}

/// The lift's derivation d on a series over a lifted table: sends x to dx
/// and ξ to dξ, kills dx and dξ, and follows the graded Leibniz rule. The
/// first p lifted formal slots after the original q are the dx's, the last
/// q the dξ's.
fn tangent_derivation(
    table: &Arc<VariableTable>,
    s: &GradedSeries,
    p: usize,
    q: usize,
) -> Result<GradedSeries> {
    let d10 = Degree::new(&[1, 0]).unwrap();
    let mut out = GradedSeries::zero(table.clone(), s.cap());
    for (mono, poly) in s.terms() {
        // base part: sum_j (d poly / d x_j) dx_j · ξ^μ
        for j in 0..p {
            let dp = poly.partial(j);
            if dp.is_zero() {
                continue;
            }
            let dxj = GradedSeries::formal_var(table.clone(), s.cap(), q + j);
            let tail = GradedSeries::term(
                table.clone(),
                s.cap(),
                mono.clone(),
                crate::poly::BasePolynomial::one(table.p()),
            );
            out = out.add(&dxj.scale_poly(&dp).mul(&tail)?)?;
        }
        // formal part: replace each occurrence in the word, with the sign of
        // hopping d over the prefix
        let word = mono.word();
        let mut prefix_deg = Degree::zero(2);
        for (k, &a) in word.iter().enumerate() {
            let replaced: Option<usize> = if a < q {
                Some(q + p + a) // ξ_a -> dξ_a
            } else {
                None // d of dx, dξ is zero
            };
            if let Some(da) = replaced {
                let mut new_word: Vec<usize> = word.clone();
                new_word[k] = da;
                let (sign, exps) = crate::series::normalize_word(table, &new_word);
                if sign != 0 {
                    let mut c = poly.clone();
                    if d10.scalar_product(&prefix_deg) == 1 {
                        c = c.neg();
                    }
                    if sign < 0 {
                        c = c.neg();
                    }
                    out.insert_term(exps, c);
                }
            }
            prefix_deg = prefix_deg.add(table.formal_degree(a));
        }
    }
    Ok(out)
}

/// Result of a cocycle run: one entry per executed check.
#[derive(Clone, Debug)]
pub struct CocycleReport {
    pub atlas: String,
    pub convention: SignRule,
    pub cap: u32,
    pub entries: Vec<CocycleEntry>,
}

#[derive(Clone, Debug)]
pub struct CocycleEntry {
    pub label: String,
    pub failures: Vec<(String, GradedSeries)>,
}

impl CocycleReport {
    pub fn pass(&self) -> bool {
        self.entries.iter().all(|e| e.failures.is_empty())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "cocycle report: atlas {} (convention={}, cap={})",
            self.atlas, self.convention, self.cap
        );
        for e in &self.entries {
            if e.failures.is_empty() {
                let _ = writeln!(out, "{}: PASS", e.label);
            } else {
                let _ = writeln!(out, "{}: FAIL", e.label);
                for (coord, res) in &e.failures {
                    let _ = writeln!(out, "  residual {coord} = {res}");
                }
            }
        }
        let _ = writeln!(out, "RESULT: {}", if self.pass() { "PASS" } else { "FAIL" });
        out
    }
}
