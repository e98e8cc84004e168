//! Symbolic computation engine for ℤ₂ⁿ-graded commutative algebra and formal
//! supergeometry: sign-rule arithmetic, truncated graded series over exact
//! rationals, superdomain morphisms, atlas cocycle checking, split models,
//! and a constructive order-by-order splitting of graded atlases.

pub mod atlas;
pub mod bundle;
pub mod degree;
pub mod error;
pub mod linalg;
pub mod morphism;
pub mod parse;
pub mod poly;
pub mod series;
pub mod splitting;
pub mod table;

pub use atlas::{Atlas, CocycleEntry, CocycleReport};
pub use bundle::{linearize, monomial_count, BundleTransition, GradedBundle};
pub use degree::{Degree, MAX_ARITY};
pub use error::{Error, Result};
pub use linalg::{AffineSystem, PolyMatrix, SolveOrder};
pub use morphism::{morphism_from_assignments, Morphism};
pub use parse::{
    parse_expression, parse_file, parse_file_with_convention, ParsedFile, SeriesFile, SplittingSpec,
};
pub use poly::{BaseMono, BasePolynomial};
pub use series::{normalize_word, Cap, FormalMono, GradedSeries, Homogeneity, JOrder};
pub use splitting::{
    build_phi, build_splitting_iso, coboundary_solve, extend_phi, mismatch_cocycle,
    phi_consistency_residuals, split_model, verify_splitting, CechCochain, CochainKey,
    EmbeddingFamily, SplittingIso, VerifyEntry, VerifyReport,
};
pub use table::{SignRule, VarRef, VariableTable};
