//! Shared input builders for the criterion benchmarks.

use std::sync::Arc;

use z2n_core::{
    parse_expression, parse_file, Atlas, Cap, Degree, GradedSeries, ParsedFile, SignRule,
    VariableTable,
};

pub fn fixture(name: &str) -> String {
    let path = format!("{}/../../fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("cannot read {path}: {e}"))
}

pub fn fixture_atlas(name: &str) -> Atlas {
    match parse_file(&fixture(name)).unwrap() {
        ParsedFile::Atlas(a) => a,
        _ => panic!("{name} is not an atlas"),
    }
}

pub fn bench_table() -> Arc<VariableTable> {
    let d = |digits: &[u8]| Degree::new(digits).unwrap();
    VariableTable::new(
        "bench",
        2,
        vec!["x".into(), "y".into()],
        vec![
            ("xi1".into(), d(&[0, 1])),
            ("xi2".into(), d(&[0, 1])),
            ("eta".into(), d(&[1, 0])),
            ("theta1".into(), d(&[1, 1])),
            ("theta2".into(), d(&[1, 1])),
        ],
        SignRule::ScalarProduct,
    )
    .unwrap()
}

/// A dense-ish series with every admissible monomial up to the given order.
pub fn dense_series(table: &Arc<VariableTable>, order: u32) -> GradedSeries {
    let mut acc = parse_expression("1 + x + y", table, Cap::Exact).unwrap();
    let gens = ["xi1", "xi2", "eta", "theta1", "theta2"];
    for (i, g) in gens.iter().enumerate() {
        let term = parse_expression(&format!("{} x {g}", i + 2), table, Cap::Exact).unwrap();
        acc = acc.add(&term).unwrap();
    }
    let mut out = acc.clone();
    for _ in 1..order {
        out = out.mul(&acc).unwrap().truncate(order);
    }
    out
}
