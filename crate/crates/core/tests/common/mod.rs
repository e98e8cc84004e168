//! Shared helpers for the integration suites: fixture loading, the naive
//! transposition-counting multiplication oracle, and random data generators.

#![allow(dead_code)]

use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::rngs::StdRng;
use rand::Rng;

use z2n_core::{
    Atlas, BaseMono, BasePolynomial, Cap, Degree, FormalMono, GradedSeries, ParsedFile, SignRule,
    VariableTable,
};

pub fn fixture(name: &str) -> String {
    let path = format!("{}/../../fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("cannot read {path}: {e}"))
}

pub fn fixture_atlas(name: &str) -> Atlas {
    match z2n_core::parse_file(&fixture(name)).unwrap() {
        ParsedFile::Atlas(a) => a,
        _ => panic!("{name} is not an atlas fixture"),
    }
}

pub fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Multiplies two series one generator occurrence at a time: every term pair
/// becomes a concatenated word that bubble sort brings to canonical order,
/// flipping the sign once per adjacent transposition of noncommuting
/// occurrences. Completely independent of the pairwise sign formula used by
/// the engine.
pub fn naive_mul(a: &GradedSeries, b: &GradedSeries) -> GradedSeries {
    assert_eq!(a.table(), b.table());
    let table = a.table().clone();
    let cap = a.cap().min(b.cap());
    let mut out = GradedSeries::zero(table.clone(), cap);
    for (mu, pa) in a.terms() {
        for (nu, pb) in b.terms() {
            let mut word: Vec<usize> = mu.word();
            word.extend(nu.word());
            let mut sign = 1i8;
            let n = word.len();
            for pass in 0..n {
                let _ = pass;
                for j in 0..n.saturating_sub(1) {
                    if word[j] > word[j + 1] {
                        let (u, v) = (word[j], word[j + 1]);
                        if table
                            .rule()
                            .sign_exponent(table.formal_degree(u), table.formal_degree(v))
                            == 1
                        {
                            sign = -sign;
                        }
                        word.swap(j, j + 1);
                    }
                }
            }
            let mut exps = vec![0u16; table.q()];
            for &v in &word {
                exps[v] += 1;
            }
            if exps
                .iter()
                .enumerate()
                .any(|(v, &e)| e > 1 && table.is_nilpotent(v))
            {
                continue;
            }
            let mono = FormalMono(exps);
            if !cap.admits(mono.order()) {
                continue;
            }
            let mut p = pa.mul(pb);
            if sign < 0 {
                p = p.neg();
            }
            out.insert_term(mono, p);
        }
    }
    out
}

/// Test tables: n up to 3, at most 6 generators, mixed sectors.
pub fn test_tables() -> Vec<Arc<VariableTable>> {
    let d = |digits: &[u8]| Degree::new(digits).unwrap();
    vec![
        VariableTable::new(
            "A",
            1,
            vec!["x".into()],
            vec![("a".into(), d(&[1])), ("b".into(), d(&[1]))],
            SignRule::ScalarProduct,
        )
        .unwrap(),
        VariableTable::new(
            "B",
            2,
            vec!["x".into()],
            vec![
                ("xi".into(), d(&[0, 1])),
                ("eta".into(), d(&[1, 0])),
                ("theta".into(), d(&[1, 1])),
            ],
            SignRule::ScalarProduct,
        )
        .unwrap(),
        VariableTable::new(
            "C",
            3,
            vec!["x".into(), "y".into()],
            vec![
                ("g1".into(), d(&[0, 0, 1])),
                ("g2".into(), d(&[0, 1, 0])),
                ("g3".into(), d(&[0, 1, 1])),
                ("g4".into(), d(&[1, 0, 0])),
                ("g5".into(), d(&[1, 1, 1])),
                ("g6".into(), d(&[1, 1, 0])),
            ],
            SignRule::ScalarProduct,
        )
        .unwrap(),
        VariableTable::new(
            "P",
            2,
            vec!["x".into()],
            vec![
                ("xi".into(), d(&[0, 1])),
                ("eta".into(), d(&[1, 0])),
                ("theta".into(), d(&[1, 1])),
            ],
            SignRule::TotalParity,
        )
        .unwrap(),
    ]
}

/// Random admissible monomial of order ≤ max_order.
pub fn random_mono(rng: &mut StdRng, table: &VariableTable, max_order: u32) -> FormalMono {
    loop {
        let mut exps = vec![0u16; table.q()];
        for (a, e) in exps.iter_mut().enumerate() {
            let top = if table.is_nilpotent(a) { 1 } else { 2 };
            *e = rng.random_range(0..=top);
        }
        let mono = FormalMono(exps);
        if mono.order() <= max_order {
            return mono;
        }
    }
}

/// Random sparse series: up to max_terms terms of formal order ≤ max_order,
/// small integer coefficients, base exponents ≤ 2.
pub fn random_series(
    rng: &mut StdRng,
    table: &Arc<VariableTable>,
    max_order: u32,
    max_terms: usize,
    cap: Cap,
) -> GradedSeries {
    let mut out = GradedSeries::zero(table.clone(), cap);
    let terms = rng.random_range(1..=max_terms);
    for _ in 0..terms {
        let mono = random_mono(rng, table, max_order);
        let c = loop {
            let c = rng.random_range(-5i64..=5);
            if c != 0 {
                break c;
            }
        };
        let mut bm = BaseMono::constant(table.p());
        if table.p() > 0 {
            let i = rng.random_range(0..table.p());
            bm.0[i] = rng.random_range(0..=2);
        }
        let mut poly = BasePolynomial::zero(table.p());
        poly.insert(bm, rat(c));
        out.insert_term(mono, poly);
    }
    out
}

/// Random nonzero homogeneous series of exact formal order `order`.
pub fn random_homogeneous_series(
    rng: &mut StdRng,
    table: &Arc<VariableTable>,
    order: u32,
    cap: Cap,
) -> Option<(Degree, GradedSeries)> {
    let monos = FormalMono::enumerate_of_order(table, order);
    if monos.is_empty() {
        return None;
    }
    let lead = monos[rng.random_range(0..monos.len())].clone();
    let sigma = lead.degree(table);
    let mut out = GradedSeries::zero(table.clone(), cap);
    for mono in monos.iter().filter(|m| m.degree(table) == sigma) {
        if rng.random_range(0..2) == 0 && *mono != lead {
            continue;
        }
        let c = rng.random_range(1i64..=4);
        let mut poly = BasePolynomial::zero(table.p());
        poly.insert(BaseMono::constant(table.p()), rat(c));
        out.insert_term(mono.clone(), poly);
    }
    Some((sigma, out))
}
