//! Exact algebra over Z2 and Z2[T] (`deg T = 2`): polynomials, bit matrices,
//! graded complexes, truncation, Smith normal form and homology.

mod bitmatrix;
mod complex;
mod poly;
mod snf;

pub use bitmatrix::BitMatrix;
pub use complex::{
    homology_dimensions, ComplexDocument, EntryRecord, Generator, GeneratorRecord, GradedComplex, TruncatedComplex,
};
pub use poly::Z2Poly;
pub use snf::{module_decomposition, snf_over_z2t, ModuleSummands, PolyMatrix, SmithForm};

/// Exact characteristic-2 arithmetic on two polynomials.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolyOp {
    Add,
    Mul,
}

pub fn poly_arith(a: &Z2Poly, b: &Z2Poly, op: PolyOp) -> Z2Poly {
    match op {
        PolyOp::Add => a + b,
        PolyOp::Mul => a * b,
    }
}
