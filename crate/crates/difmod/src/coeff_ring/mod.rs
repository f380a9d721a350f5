//! Exact coefficient fields (Q and F_p) and sparse multivariate polynomials
//! with grevlex/lex monomial orders.

mod scalar;
mod poly;
mod parse;

pub use scalar::{Field, FieldKind, Scalar};
pub use poly::{
    mono_coprime, mono_divides, mono_lcm, mono_mul, mono_quot, mono_total_degree, DegreeReport,
    Monomial, MonomialOrder, Poly, PolyRing,
};
pub use parse::parse_poly;

use crate::Result;

/// Binary polynomial operation selector for the checked entry point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolyOp {
    Add,
    Sub,
    Mul,
}

/// Checked arithmetic entry point: verifies both operands share a ring.
pub fn poly_arith(a: &Poly, b: &Poly, op: PolyOp) -> Result<Poly> {
    a.check_same_ring(b)?;
    Ok(match op {
        PolyOp::Add => a + b,
        PolyOp::Sub => a - b,
        PolyOp::Mul => a * b,
    })
}

/// Total degree plus homogeneity report; zero reports no degree.
pub fn poly_degree(a: &Poly) -> DegreeReport {
    a.degree_report()
}

/// Entry-wise Frobenius: raises `a` to the p^e power in characteristic p.
pub fn frobenius_power(a: &Poly, e: u32) -> Result<Poly> {
    a.frobenius_power(e)
}
