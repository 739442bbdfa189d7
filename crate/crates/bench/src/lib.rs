//! Benchmark fixtures.

use hdiv_geodecomp::dofs::Element;
use hdiv_geodecomp::element::Family;
use hdiv_geodecomp::linalg::RationalMatrix;
use hdiv_geodecomp::simplex::{FrameConvention, LocalFrames, Simplex};

/// DoF matrix of a reference element.
pub fn dof_matrix(family: Family, n: usize, r: usize, k: i32) -> RationalMatrix {
    let t = Simplex::reference(n);
    let fr = LocalFrames::new(&t, FrameConvention::Orthogonalized);
    Element::new(family, &t, r, k, &fr).and_then(|e| e.matrix()).expect("admissible parameters")
}
