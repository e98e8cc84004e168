//! Graded vector bundles presented as block transition data over an abstract
//! nerve: the linear skeleton of an atlas. `split_atlas` realizes the split
//! model whose transitions are linear in the formal generators; `linearize`
//! extracts that skeleton from an arbitrary atlas.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::atlas::{write_vars, Atlas};
use crate::degree::Degree;
use crate::error::{Error, Result};
use crate::linalg::PolyMatrix;
use crate::morphism::Morphism;
use crate::poly::BasePolynomial;
use crate::series::{Cap, GradedSeries};
use crate::table::{SignRule, VariableTable};

/// Transition data on one ordered overlap: an affine base map plus one
/// invertible polynomial matrix per nonzero degree sector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BundleTransition {
    pub base_images: Vec<BasePolynomial>,
    pub blocks: BTreeMap<Degree, PolyMatrix>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GradedBundle {
    name: String,
    arity: u8,
    rule: SignRule,
    base_names: Vec<String>,
    formal: Vec<(String, Degree)>,
    charts: Vec<String>,
    overlaps: Vec<(String, String)>,
    triples: Vec<(String, String, String)>,
    transitions: BTreeMap<(String, String), BundleTransition>,
}

impl GradedBundle {
    /// Validates block shapes, nonsingularity, affine base maps, and the
    /// commutative cocycle condition on every declared triple.
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
        transitions: Vec<((String, String), BundleTransition)>,
    ) -> Result<Self> {
        let name = name.into();
        let p = base_names.len();
        // reuse the atlas structural validation by checking charts/overlaps
        for (fname, d) in &formal {
            if d.arity() != arity {
                return Err(Error::ArityMismatch(format!(
                    "fiber generator `{fname}` has degree {d} of arity {}, bundle arity is {arity}",
                    d.arity()
                )));
            }
            if d.is_zero() {
                return Err(Error::MalformedBundle(format!(
                    "fiber generator `{fname}` has zero degree"
                )));
            }
        }
        let sectors: Vec<(Degree, usize)> = Degree::enumerate_nonzero(arity)?
            .into_iter()
            .map(|d| {
                let r = formal.iter().filter(|(_, fd)| *fd == d).count();
                (d, r)
            })
            .collect();
        let mut tmap: BTreeMap<(String, String), BundleTransition> = BTreeMap::new();
        for ((src, dst), mut tr) in transitions {
            if tr.base_images.len() != p {
                return Err(Error::MalformedBundle(format!(
                    "transition {src} -> {dst} assigns {} base images, chart has {p}",
                    tr.base_images.len()
                )));
            }
            for b in &tr.base_images {
                if b.total_degree().unwrap_or(0) > 1 {
                    return Err(Error::BaseMapNotSupported(format!(
                        "transition {src} -> {dst} has a non-affine base map"
                    )));
                }
            }
            for (d, r) in &sectors {
                let block = tr
                    .blocks
                    .entry(*d)
                    .or_insert_with(|| PolyMatrix::identity(*r, p));
                if block.nrows() != *r || block.ncols() != *r {
                    return Err(Error::MalformedBundle(format!(
                        "transition {src} -> {dst}: sector {d} block is {}x{}, rank is {r}",
                        block.nrows(),
                        block.ncols()
                    )));
                }
                if *r > 0 && block.det().is_zero() {
                    return Err(Error::NonInvertibleLinearPart(format!(
                        "transition {src} -> {dst}: sector {d} block is singular"
                    )));
                }
            }
            tmap.insert((src, dst), tr);
        }
        let bundle = GradedBundle {
            name,
            arity,
            rule,
            base_names,
            formal,
            charts,
            overlaps,
            triples,
            transitions: tmap,
        };
        bundle.check_commutative_cocycle()?;
        Ok(bundle)
    }

    /// Commutative cocycle on the declared triples: blocks must compose
    /// through the base maps, M_{U→W} = (M_{V→W} ∘ b_{U→V}) · M_{U→V}.
    fn check_commutative_cocycle(&self) -> Result<()> {
        for (u, v, w) in &self.triples {
            let key = |a: &str, b: &str| (a.to_string(), b.to_string());
            let (Some(uv), Some(vw), Some(uw)) = (
                self.transitions.get(&key(u, v)),
                self.transitions.get(&key(v, w)),
                self.transitions.get(&key(u, w)),
            ) else {
                return Err(Error::MalformedBundle(format!(
                    "triple {u} {v} {w} lacks one of its transitions"
                )));
            };
            // base maps must compose
            for (j, img) in uw.base_images.iter().enumerate() {
                let through = vw.base_images[j].compose(&uv.base_images);
                if &through != img {
                    return Err(Error::MalformedBundle(format!(
                        "triple {u} {v} {w}: base maps do not compose on coordinate {j}"
                    )));
                }
            }
            for (d, uw_block) in &uw.blocks {
                let vw_in_u = vw.blocks[d].compose_entries(&uv.base_images);
                let composite = vw_in_u.mul(&uv.blocks[d]);
                if &composite != uw_block {
                    return Err(Error::MalformedBundle(format!(
                        "triple {u} {v} {w}: sector {d} blocks violate the cocycle condition"
                    )));
                }
            }
        }
        Ok(())
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

    pub fn charts(&self) -> &[String] {
        &self.charts
    }

    pub fn base_names(&self) -> &[String] {
        &self.base_names
    }

    pub fn formal_vars(&self) -> &[(String, Degree)] {
        &self.formal
    }

    /// Ranks per nonzero degree, in lexicographic sector order.
    pub fn ranks(&self) -> Vec<(Degree, u32)> {
        Degree::enumerate_nonzero(self.arity)
            .expect("valid arity")
            .into_iter()
            .map(|d| {
                (
                    d,
                    self.formal.iter().filter(|(_, fd)| *fd == d).count() as u32,
                )
            })
            .collect()
    }

    pub fn transition(&self, src: &str, dst: &str) -> Option<&BundleTransition> {
        self.transitions.get(&(src.to_string(), dst.to_string()))
    }

    pub fn transitions(&self) -> impl Iterator<Item = (&(String, String), &BundleTransition)> {
        self.transitions.iter()
    }

    /// The split model: an atlas whose transitions carry the bundle's block
    /// matrices linearly in the formal generators.
    pub fn split_atlas(&self) -> Result<Atlas> {
        let mut transitions = Vec::new();
        for ((src, dst), tr) in &self.transitions {
            let src_table = VariableTable::new(
                src.clone(),
                self.arity,
                self.base_names.clone(),
                self.formal.clone(),
                self.rule,
            )?;
            let tgt_table = src_table.with_id(dst.clone());
            let base_images: Vec<GradedSeries> = tr
                .base_images
                .iter()
                .map(|pb| GradedSeries::from_poly(src_table.clone(), Cap::Exact, pb.clone()))
                .collect();
            let mut formal_images = Vec::with_capacity(self.formal.len());
            for (b, (_, d)) in self.formal.iter().enumerate() {
                let sector = src_table.sector_indices(d);
                let r = sector.iter().position(|&a| a == b).expect("own sector");
                let block = &tr.blocks[d];
                let mut img = GradedSeries::zero(src_table.clone(), Cap::Exact);
                for (s, &a) in sector.iter().enumerate() {
                    let c = block.get(r, s);
                    if c.is_zero() {
                        continue;
                    }
                    img = img.add(
                        &GradedSeries::formal_var(src_table.clone(), Cap::Exact, a).scale_poly(c),
                    )?;
                }
                formal_images.push(img);
            }
            let m = Morphism::new(src_table, tgt_table, base_images, formal_images, Cap::Exact)?;
            transitions.push(((src.clone(), dst.clone()), m));
        }
        Atlas::new(
            self.name.clone(),
            self.arity,
            self.rule,
            self.base_names.clone(),
            self.formal.clone(),
            self.charts.clone(),
            self.overlaps.clone(),
            self.triples.clone(),
            transitions,
        )
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "bundle {} n={} convention={}",
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
        for ((src, dst), tr) in &self.transitions {
            let _ = writeln!(out, "transition {src} -> {dst} {{");
            for (j, img) in tr.base_images.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "  {}' = {};",
                    self.base_names[j],
                    img.format_with(&self.base_names)
                );
            }
            for (d, block) in &tr.blocks {
                if block.nrows() == 0 {
                    continue;
                }
                let rows: Vec<String> = (0..block.nrows())
                    .map(|i| {
                        (0..block.ncols())
                            .map(|j| block.get(i, j).format_with(&self.base_names))
                            .collect::<Vec<_>>()
                            .join(", ")
                    })
                    .collect();
                let _ = writeln!(out, "  block {d} [ {} ];", rows.join("; "));
            }
            let _ = writeln!(out, "}}");
        }
        out
    }
}

/// Extracts the order-1 skeleton of an atlas: per transition and per formal
/// target coordinate, the coefficients of the linear part, assembled into
/// one block per degree sector, plus the ε-parts of the base maps. Runs the
/// cocycle check at cap 2 first.
pub fn linearize(atlas: &Atlas) -> Result<GradedBundle> {
    let report = atlas.check_cocycle(2)?;
    if !report.pass() {
        return Err(Error::CocyclePrecondition(format!(
            "atlas `{}` fails the cocycle check at cap 2",
            atlas.name()
        )));
    }
    let mut transitions = Vec::new();
    for ((src, dst), m) in atlas.transitions() {
        let base_images: Vec<BasePolynomial> = (0..atlas.base_names().len())
            .map(|j| m.base_image(j).epsilon())
            .collect();
        let blocks = m.linear_blocks()?;
        transitions.push((
            (src.clone(), dst.clone()),
            BundleTransition {
                base_images,
                blocks,
            },
        ));
    }
    GradedBundle::new(
        atlas.name().to_string(),
        atlas.arity(),
        atlas.rule(),
        atlas.base_names().to_vec(),
        atlas.formal_vars().to_vec(),
        atlas.charts().to_vec(),
        atlas.overlaps().to_vec(),
        atlas.triples().to_vec(),
        transitions,
    )
}

/// Number of admissible formal monomials of exact order k for sector ranks
/// `ranks` (in the lexicographic order of nonzero degrees of the arity):
/// antisymmetric in odd-parity generators, symmetric with repetition in
/// even-parity ones.
pub fn monomial_count(arity: u8, ranks: &[u32], k: u32) -> Result<u64> {
    let degrees = Degree::enumerate_nonzero(arity)?;
    if degrees.len() != ranks.len() {
        return Err(Error::ArityMismatch(format!(
            "expected {} sector ranks for arity {arity}, got {}",
            degrees.len(),
            ranks.len()
        )));
    }
    let mut ways = vec![0u64; k as usize + 1];
    ways[0] = 1;
    for (d, &r) in degrees.iter().zip(ranks) {
        if r == 0 {
            continue;
        }
        let odd = d.parity() == 1;
        let mut next = vec![0u64; k as usize + 1];
        for used in 0..=k as usize {
            if ways[used] == 0 {
                continue;
            }
            for j in 0..=(k as usize - used) {
                let c = if odd {
                    if j as u32 > r {
                        0
                    } else {
                        binomial(r as u64, j as u64)
                    }
                } else {
                    binomial(r as u64 + j as u64 - 1, j as u64)
                };
                if c > 0 {
                    next[used + j] += ways[used] * c;
                }
            }
        }
        ways = next;
    }
    Ok(ways[k as usize])
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc = 1u64;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_file, ParsedFile};
    use crate::series::{GradedSeries, JOrder};

    const BLOCK_BUNDLE: &str = "\
bundle threeBlocks n=2 convention=zsp
vars x;
vars xi:(0,1), eta:(1,0), theta:(1,1);
chart U;
chart V;
chart W;
overlap U V;
overlap V W;
overlap U W;
triple U V W;
transition U -> V { block (0,1) [ 1 + x ]; block (1,0) [ 2 ]; }
transition V -> W { block (1,1) [ 3 + x ]; }
transition U -> W { block (0,1) [ 1 + x ]; block (1,0) [ 2 ]; block (1,1) [ 3 + x ]; }
";

    fn bundle_from(text: &str) -> GradedBundle {
        match parse_file(text).unwrap() {
            ParsedFile::Bundle(b) => b,
            _ => panic!("expected bundle"),
        }
    }

    #[test]
    fn split_atlas_is_linear_and_passes_cocycle() {
        let b = bundle_from(BLOCK_BUNDLE);
        let atlas = b.split_atlas().unwrap();
        assert!(atlas.check_cocycle(5).unwrap().pass());
        let m = atlas.transition("U", "V").unwrap();
        assert_eq!(m.image_of("xi").unwrap().to_string(), "xi + x*xi");
        // every formal image is purely linear
        for (_, m) in atlas.transitions() {
            for b_idx in 0..3 {
                assert_eq!(m.formal_image(b_idx).j_order(), JOrder::Finite(1));
            }
        }
    }

    #[test]
    fn trivial_bundle_splits_to_identity_transitions() {
        let text = "\
bundle trivial n=2 convention=zsp
vars x;
vars xi:(0,1), eta:(1,0), theta:(1,1);
chart U;
chart V;
overlap U V;
transition U -> V { }
transition V -> U { }
";
        let b = bundle_from(text);
        let atlas = b.split_atlas().unwrap();
        for ((_, _), m) in atlas.transitions() {
            let t = m.source().clone();
            for j in 0..t.p() {
                assert_eq!(
                    m.base_image(j),
                    &GradedSeries::base_var(t.clone(), m.cap(), j)
                );
            }
            for a in 0..t.q() {
                assert_eq!(
                    m.formal_image(a),
                    &GradedSeries::formal_var(t.clone(), m.cap(), a)
                );
            }
        }
    }

    #[test]
    fn linearize_composite_blocks_factor() {
        // functoriality: the block of a composed transition is the product
        // of the factor blocks (transported through the base map)
        let b = bundle_from(BLOCK_BUNDLE);
        let uv = b.transition("U", "V").unwrap();
        let vw = b.transition("V", "W").unwrap();
        let uw = b.transition("U", "W").unwrap();
        for (d, block) in &uw.blocks {
            let product = vw.blocks[d]
                .compose_entries(&uv.base_images)
                .mul(&uv.blocks[d]);
            assert_eq!(&product, block);
        }
    }

    #[test]
    fn linearize_round_trips_the_bundle() {
        let b = bundle_from(BLOCK_BUNDLE);
        let atlas = b.split_atlas().unwrap();
        let again = linearize(&atlas).unwrap();
        assert_eq!(b, again);
        // bundle text round trip as well
        assert_eq!(bundle_from(&b.to_text()), b);
    }

    #[test]
    fn linearize_drops_higher_order_terms() {
        let text = "\
atlas twist n=2 convention=zsp
vars x;
vars xi:(0,1), eta:(1,0), theta:(1,1);
chart U;
chart V;
overlap U V;
transition U -> V { theta' = theta + xi eta; x' = x + theta^2; }
transition V -> U { theta' = theta - xi eta; x' = x - theta^2 + 2 xi eta theta; }
";
        let ParsedFile::Atlas(atlas) = parse_file(text).unwrap() else {
            panic!()
        };
        let b = linearize(&atlas).unwrap();
        for ((_, _), tr) in b.transitions() {
            // theta + xi*eta linearizes to the identity block; base terms do
            // not contribute
            for block in tr.blocks.values() {
                assert!(block.is_identity());
            }
            assert_eq!(tr.base_images[0], BasePolynomial::var(1, 0));
        }
    }

    #[test]
    fn bundle_rejects_singular_blocks() {
        let text = "\
bundle bad n=2 convention=zsp
vars x;
vars xi:(0,1);
chart U;
chart V;
overlap U V;
transition U -> V { block (0,1) [ 0 ]; }
";
        assert!(matches!(
            parse_file(text),
            Err(Error::NonInvertibleLinearPart(_))
        ));
    }

    #[test]
    fn bundle_rejects_cocycle_violations() {
        let text = "\
bundle bad n=2 convention=zsp
vars x;
vars xi:(0,1);
chart U;
chart V;
chart W;
overlap U V;
overlap V W;
overlap U W;
triple U V W;
transition U -> V { block (0,1) [ 2 ]; }
transition V -> W { block (0,1) [ 3 ]; }
transition U -> W { block (0,1) [ 5 ]; }
";
        assert!(matches!(parse_file(text), Err(Error::MalformedBundle(_))));
    }

    #[test]
    fn monomial_count_matches_enumeration() {
        use crate::series::FormalMono;
        use crate::table::VariableTable;
        // all rank vectors with total <= 4 over n <= 3, orders <= 6
        for n in 1u8..=3 {
            let sector_count = (1usize << n) - 1;
            let mut ranks = vec![0u32; sector_count];
            loop {
                let total: u32 = ranks.iter().sum();
                if total <= 4 && total > 0 {
                    let degrees = Degree::enumerate_nonzero(n).unwrap();
                    let mut formal = Vec::new();
                    for (d, &r) in degrees.iter().zip(&ranks) {
                        for i in 0..r {
                            formal.push((format!("g{d}{i}").replace(['(', ')', ','], "_"), *d));
                        }
                    }
                    let table = VariableTable::new("E", n, vec![], formal, SignRule::ScalarProduct)
                        .unwrap();
                    for k in 0..=6u32 {
                        let counted = monomial_count(n, &ranks, k).unwrap();
                        let enumerated = FormalMono::enumerate_of_order(&table, k).len() as u64;
                        assert_eq!(counted, enumerated, "n={n} ranks={ranks:?} k={k}");
                    }
                }
                // next rank vector
                let mut i = 0;
                loop {
                    if i == sector_count {
                        break;
                    }
                    ranks[i] += 1;
                    if ranks[i] <= 4 {
                        break;
                    }
                    ranks[i] = 0;
                    i += 1;
                }
                if i == sector_count {
                    break;
                }
            }
        }
    }

    #[test]
    fn monomial_count_examples() {
        // q = (1,1,1), n = 2: order-2 monomials are xi*eta, xi*theta,
        // eta*theta, theta^2
        assert_eq!(monomial_count(2, &[1, 1, 1], 2).unwrap(), 4);
        assert_eq!(monomial_count(2, &[1, 1, 1], 0).unwrap(), 1);
        assert_eq!(monomial_count(2, &[1, 1, 1], 1).unwrap(), 3);
    }

    #[test]
    fn binomial_sanity() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(3, 0), 1);
        assert_eq!(binomial(2, 3), 0);
    }
}
