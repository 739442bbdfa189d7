use hdiv_geodecomp::assembly::{self, AssemblyOptions};
use hdiv_geodecomp::bernstein::{self, BernsteinPoly, MultiIndex};
use hdiv_geodecomp::dofs::{self, Element, QuotientMode};
use hdiv_geodecomp::element::{self, Family};
use hdiv_geodecomp::linalg::{self, RationalMatrix};
use hdiv_geodecomp::mesh;
use hdiv_geodecomp::rational::{self, frac, int, Q};
use hdiv_geodecomp::report::CheckStatus;
use hdiv_geodecomp::simplex::{
    build_frame, enumerate_subsimplices, FrameConvention, LocalFrames, Simplex, SubSimplexId,
};
use hdiv_geodecomp::tensor::{self, MatrixSpace, SuccessorReading};
use num_traits::{One, Zero};

fn ids(v: &[usize], n: usize) -> SubSimplexId {
    SubSimplexId::new(v.to_vec(), n).unwrap()
}

fn skewed(n: usize) -> Simplex {
    let mut v = vec![rational::zeros(n)];
    for i in 0..n {
        let mut e = rational::unit(n, i);
        e[(i + 1) % n] += frac(1, 3);
        v.push(e);
    }
    Simplex::new(v).unwrap()
}

#[test]
fn subsimplex_enumeration() {
    let e: Vec<Vec<usize>> = enumerate_subsimplices(2, 1).unwrap().iter().map(|f| f.indices().to_vec()).collect();
    assert_eq!(e, vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
    assert_eq!(enumerate_subsimplices(3, 0).unwrap().len(), 4);
    assert_eq!(enumerate_subsimplices(3, 2).unwrap().len(), 4);
    assert_eq!(ids(&[0, 1], 3).complement(), ids(&[2, 3], 3));
    assert!(SubSimplexId::full(2).complement().is_empty());
    assert_eq!(ids(&[2], 4).complement(), ids(&[0, 1, 3, 4], 4));
}

#[test]
fn reference_triangle_gradients() {
    let t = Simplex::reference(2);
    assert_eq!(t.grad(0), &vec![int(-1), int(-1)]);
    assert_eq!(t.grad(1), &vec![int(1), int(0)]);
}

#[test]
fn frame_shapes() {
    let t = skewed(3);
    for conv in FrameConvention::ALL {
        let e = build_frame(&t, &ids(&[0, 1], 3), conv).unwrap();
        assert_eq!((e.tangents.len(), e.normals.len()), (1, 2));
        assert!(e.normals.iter().all(|n| rational::dot(n, &e.tangents[0]).is_zero()));
        let full = build_frame(&t, &SubSimplexId::full(3), conv).unwrap();
        assert_eq!((full.tangents.len(), full.normals.len()), (3, 0));
        let v = build_frame(&t, &SubSimplexId::vertex(2, 3), conv).unwrap();
        assert_eq!((v.tangents.len(), v.normals.len()), (0, 3));
    }
}

#[test]
fn bernstein_products_and_elevation() {
    let tri = SubSimplexId::full(2);
    let l = |i| BernsteinPoly::coordinate(tri.clone(), i).unwrap();
    let p = l(0).multiply(&l(1)).unwrap();
    assert_eq!(p.coeff(&MultiIndex::new(&[1, 1, 0])), Q::one());
    assert_eq!(p.multiply(&BernsteinPoly::constant(tri.clone(), Q::one())).unwrap(), p);
    let sum = l(0).add(&l(1)).unwrap().add(&l(2)).unwrap();
    let q = sum.multiply(&p).unwrap();
    assert_eq!(q, p.clone().elevate(3).unwrap());

    let edge = SubSimplexId::full(1);
    let l0 = BernsteinPoly::coordinate(edge.clone(), 0).unwrap();
    let want = BernsteinPoly::from_terms(
        edge.clone(),
        2,
        [(MultiIndex::new(&[2, 0]), Q::one()), (MultiIndex::new(&[1, 1]), Q::one())],
    );
    assert_eq!(l0.elevate(2).unwrap().coeffs(), want.coeffs());
    assert!(BernsteinPoly::zero(edge, 0).elevate(3).unwrap().is_zero());
}

#[test]
fn bubbles_and_restrictions() {
    let e01 = ids(&[0, 1], 2);
    let b = BernsteinPoly::bubble(&e01);
    assert_eq!((b.degree(), b.coeff(&MultiIndex::new(&[1, 1, 0]))), (2, Q::one()));
    assert_eq!(BernsteinPoly::bubble(&SubSimplexId::vertex(2, 2)).degree(), 1);
    assert_eq!(BernsteinPoly::bubble(&SubSimplexId::full(2)).coeff(&MultiIndex::new(&[1, 1, 1])), Q::one());
    assert!(b.restrict(&ids(&[0, 2], 2)).unwrap().is_zero());
    let on_f = b.restrict(&e01).unwrap();
    assert_eq!(on_f.coeff(&MultiIndex::new(&[1, 1])), Q::one());
    for i in 0..3 {
        let facet = SubSimplexId::facet(i, 2);
        assert_eq!(b.restrict(&facet).unwrap().is_zero(), !e01.is_subset_of(&facet));
    }
    let l0 = BernsteinPoly::coordinate(e01.clone(), 0).unwrap();
    assert_eq!(
        l0.extend(&SubSimplexId::full(2)).unwrap(),
        BernsteinPoly::coordinate(SubSimplexId::full(2), 0).unwrap()
    );
}

#[test]
fn integration_rules() {
    let t = skewed(2);
    let full = SubSimplexId::full(2);
    // Averages times the measure give the integrals.
    assert_eq!(BernsteinPoly::constant(full.clone(), Q::one()).integrate(&full).unwrap() * t.volume(), t.volume());
    let edge = SubSimplexId::full(1);
    let p = BernsteinPoly::bubble(&edge);
    assert_eq!(p.integrate(&edge).unwrap(), frac(1, 6));
    let q = BernsteinPoly::from_terms(
        full,
        2,
        [(MultiIndex::new(&[2, 0, 0]), int(3)), (MultiIndex::new(&[0, 1, 1]), int(5))],
    );
    assert_eq!(q.integrate(&SubSimplexId::vertex(0, 2)).unwrap(), q.evaluate(&[int(1), int(0), int(0)]));
}

#[test]
fn directional_derivatives() {
    let t = skewed(3);
    let full = SubSimplexId::full(3);
    for l in 0..4 {
        let lam = BernsteinPoly::coordinate(full.clone(), l).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let d = lam.derivative(&t.edge(i, j), &t).unwrap();
                let want = int((j == l) as i64 - (i == l) as i64);
                assert_eq!(d.coeffs().values().next().cloned().unwrap_or_else(Q::zero), want);
            }
        }
    }
    assert!(BernsteinPoly::constant(full, int(4)).derivative(&t.edge(0, 1), &t).unwrap().is_zero());
}

#[test]
fn small_ranks() {
    assert_eq!(RationalMatrix::identity(3).rank(), 3);
    let m = RationalMatrix::from_rows(&[vec![int(1), int(2)], vec![int(2), int(4)]], 2);
    assert_eq!(m.rank(), 1);
    assert_eq!(linalg::determinant(&m.row_vecs()), Q::zero());
}

#[test]
fn matrix_projections() {
    for n in 2..=4 {
        assert!(rational::is_zero_vec(&tensor::dev(&tensor::identity(n), n).unwrap()));
    }
    let u = vec![int(1), int(2), int(0)];
    let v = vec![int(0), frac(1, 2), int(3)];
    let s = tensor::sym(&tensor::outer(&u, &v), 3).unwrap();
    let want = rational::scale(&rational::add(&tensor::outer(&u, &v), &tensor::outer(&v, &u)), &frac(1, 2));
    assert_eq!(s, want);
}

#[test]
fn split_dimensions() {
    let t = skewed(3);
    for conv in FrameConvention::ALL {
        let face = build_frame(&t, &ids(&[0, 1, 2], 3), conv).unwrap();
        let s = tensor::tn_split(&face, MatrixSpace::Traceless).unwrap();
        assert_eq!((s.tangential.len(), s.normal.len()), (5, 3));
        let edge = build_frame(&t, &ids(&[1, 3], 3), conv).unwrap();
        let s = tensor::tn_split(&edge, MatrixSpace::Symmetric).unwrap();
        assert_eq!((s.tangential.len(), s.normal.len()), (1, 5));
        assert_eq!(s.active_constraints(), 1);
        for l in 0..=3 {
            assert_eq!(tensor::split_dims(MatrixSpace::Vector, 3, l), (l, 3 - l));
        }
    }
}

#[test]
fn traceless_dual_pairing() {
    for n in 2..=4 {
        let d = tensor::traceless_gradient_basis(&skewed(n), SuccessorReading::ModNPlusOne).unwrap();
        assert_eq!(d.basis.len(), n * n - 1);
        assert!(d.is_kronecker());
        assert!(d.all_traceless(n));
    }
}

#[test]
fn rigid_spaces() {
    let t = skewed(3);
    let (rt, rm) = tensor::rigid_spaces(&t);
    assert_eq!((rt.len(), rm.len()), (4, 6));
    // dev grad of RT vanishes: grad(a x + b) = a I.
    let x = tensor::position_field(&t);
    for d in 0..3 {
        let dir = rational::unit(3, d);
        for c in 0..3 {
            let g = x[c].derivative(&dir, &t).unwrap();
            let want = if c == d { Q::one() } else { Q::zero() };
            assert!(g.sub(&BernsteinPoly::constant(SubSimplexId::full(3), want)).unwrap().is_zero());
        }
    }
}

#[test]
fn decomposition_counts() {
    let t2 = skewed(2);
    let fr = LocalFrames::new(&t2, FrameConvention::EdgeTangentsFaceNormals);
    let b = element::decompose(Family::Lagrange, &t2, 3, &fr).unwrap();
    assert_eq!(b.len(), 10);
    assert_eq!(element::decompose(Family::Symmetric, &t2, 2, &fr).unwrap().len(), 18);
    let t3 = skewed(3);
    let fr3 = LocalFrames::new(&t3, FrameConvention::Orthogonalized);
    let v = element::decompose(Family::VectorLagrange, &t3, 2, &fr3).unwrap();
    assert_eq!(v.len(), 30);
    assert!(element::verify_decomposition(&v).passed());
}

#[test]
fn vector_bubbles() {
    let t = skewed(2);
    let fr = LocalFrames::new(&t, FrameConvention::Orthogonalized);
    assert_eq!(element::bubble_space(Family::Face, &t, 2, &fr).unwrap().len(), 3);
    assert!(element::bubble_space(Family::Face, &t, 1, &fr).unwrap().is_empty());
    let t3 = skewed(3);
    let fr3 = LocalFrames::new(&t3, FrameConvention::Orthogonalized);
    let c = element::verify_bubble_characterization(Family::Traceless, &t3, 2, &fr3).unwrap();
    assert!(c.passed());
    assert_eq!(c.witness["kernel_dim"], c.witness["bubble_dim_formula"]);
    for r in 0..2 {
        let c = element::verify_bubble_characterization(Family::Face, &t3, r, &fr3).unwrap();
        assert_eq!(c.status, CheckStatus::Pass);
        assert_eq!(c.witness["kernel_dim"], 0);
    }
}

#[test]
fn normal_trace_of_constant_normal() {
    let t = skewed(2);
    let facet = SubSimplexId::facet(0, 2);
    let nf = t.grad(0).clone();
    let sf = element::ShapeFunction {
        site: SubSimplexId::full(2),
        part: element::Part::Lattice,
        alpha: MultiIndex::zero(3),
        coeff: nf.clone(),
    };
    let tr = element::trace_div(Family::Face, &sf, &facet, &nf).unwrap();
    assert_eq!(tr[0].coeff(&MultiIndex::zero(2)), rational::dot(&nf, &nf));
}

#[test]
fn divergence_examples() {
    let t = skewed(2);
    let x = tensor::position_field(&t);
    let d = element::div_matrix(Family::Face, &t, 1).mul_vec(&element::field_flat(&x, 1));
    assert_eq!(d, vec![int(2)]);
    let fr = LocalFrames::new(&t, FrameConvention::EdgeTangentsFaceNormals);
    for (fam, r, rank) in [(Family::Face, 2, 2), (Family::Traceless, 2, 3), (Family::Symmetric, 3, 9)] {
        let c = element::verify_div_image(fam, &t, r, &fr).unwrap();
        assert!(c.passed(), "{}", c.witness);
        assert_eq!(c.witness["rank"], rank);
    }
}

#[test]
fn unisolvence_examples() {
    let t2 = skewed(2);
    let t3 = skewed(3);
    let fr2 = LocalFrames::new(&t2, FrameConvention::Orthogonalized);
    let fr3 = LocalFrames::new(&t3, FrameConvention::Orthogonalized);
    for (fam, t, fr, r, k, size) in [
        (Family::Face, &t2, &fr2, 2, -1, 12),
        (Family::Symmetric, &t2, &fr2, 3, 0, 30),
        (Family::Face, &t3, &fr3, 3, 1, 60),
        (Family::Face, &t3, &fr3, 2, -1, 30),
    ] {
        let c = dofs::certify_unisolvence(fam, t, r, k, fr).unwrap();
        assert!(c.invertible, "{c:?}");
        assert_eq!(c.dofs, size);
    }
    let interval = Simplex::reference(1);
    let fr1 = LocalFrames::new(&interval, FrameConvention::Orthogonalized);
    let e = Element::new(Family::Lagrange, &interval, 1, -1, &fr1).unwrap();
    assert_eq!(e.matrix().unwrap(), RationalMatrix::identity(2));
    for n in 1..=3 {
        let t = skewed(n);
        let fr = LocalFrames::new(&t, FrameConvention::Orthogonalized);
        for r in 1..=4 {
            let e = Element::new(Family::Lagrange, &t, r, -1, &fr).unwrap();
            assert!(dofs::block_lower_triangular(&e.dofs, &e.basis).unwrap());
        }
    }
}

#[test]
fn dof_layouts() {
    let t = skewed(3);
    let fr = LocalFrames::new(&t, FrameConvention::Orthogonalized);
    let d = dofs::build_dofs(Family::Traceless, &t, 2, 0, &fr).unwrap();
    let at_vertex = d.members.iter().filter(|m| m.site == SubSimplexId::vertex(0, 3)).count();
    assert_eq!(at_vertex, 8);
    let s = dofs::build_dofs(Family::Face, &t, 2, 0, &fr).unwrap();
    assert_eq!(s.members.iter().filter(|m| m.site == SubSimplexId::vertex(1, 3)).count(), 3);
    assert!(matches!(dofs::build_dofs(Family::Face, &t, 2, 2, &fr), Err(hdiv_geodecomp::Error::Inadmissible(_))));
    assert!(matches!(dofs::build_dofs(Family::Symmetric, &t, 1, 0, &fr), Err(hdiv_geodecomp::Error::Inadmissible(_))));
}

#[test]
fn quotient_spaces() {
    let facet = SubSimplexId::facet(3, 3);
    let all = dofs::quotient_face_space(&facet, 3, -1, QuotientMode::ModP0).unwrap();
    assert_eq!(all.bubble.len(), bernstein::dim_polynomials(2, 3));
    let q = dofs::quotient_face_space(&facet, 2, 0, QuotientMode::ModP0).unwrap();
    assert_eq!((q.bubble.len(), q.complement.len()), (3, 2));
    assert!(dofs::verify_quotient_unisolvence(3, 2, 0, QuotientMode::ModP0).unwrap().passed());
}

#[test]
fn face_merges() {
    let t = skewed(3);
    let fr = LocalFrames::new(&t, FrameConvention::Orthogonalized);
    let e = Element::new(Family::Face, &t, 2, -1, &fr).unwrap();
    let m = dofs::merge_face_dofs(&e, &SubSimplexId::facet(0, 3), &fr).unwrap();
    assert_eq!((m.old, m.new), (6, 6));
    assert!(m.span_equal);
    let before = dofs::certify(&e.dofs, &e.basis).unwrap();
    let after = dofs::certify(&m.merged, &e.basis).unwrap();
    assert!(after.invertible);
    assert_eq!(before.dofs, after.dofs);
    let e = Element::new(Family::Traceless, &t, 2, 0, &fr).unwrap();
    assert_eq!(dofs::verify_merge(&e, &SubSimplexId::facet(2, 3), &fr).unwrap().status, CheckStatus::Pass);
}

#[test]
fn mesh_examples() {
    let m = mesh::two_triangles();
    assert_eq!((m.count(0), m.num_cells(), m.count(1)), (4, 2, 5));
    let c = mesh::cube_freudenthal();
    assert_eq!((c.count(0), c.num_cells()), (8, 6));
    assert!(c.interior_facets().iter().all(|f| c.facet_cells(f).len() == 2));
    let r = mesh::builtin("refine(two_triangles)").unwrap();
    assert_eq!((r.count(0), r.num_cells()), (9, 8));
}

#[test]
fn assembly_examples() {
    let m = mesh::two_triangles();
    let opts = AssemblyOptions::default();
    let s = assembly::assemble(&m, Family::Face, 2, -1, &opts).unwrap();
    assert_eq!(s.dim(), 21);
    assert!(assembly::check_conformity(&s, 3, 11).passed());
    assert_eq!(assembly::check_div_onto(&s).unwrap().status, CheckStatus::Pass);
    let s = assembly::assemble(&m, Family::Face, 3, 0, &opts).unwrap();
    assert_eq!(s.dim(), assembly::dimension_formula(&m, Family::Face, 3, 0));
    for name in ["two_triangles", "criss_cross", "two_tets"] {
        let m = mesh::builtin(name).unwrap();
        for r in 1..=3 {
            let s = assembly::assemble(&m, Family::Lagrange, r, -1, &opts).unwrap();
            let want: usize = (0..=m.dim()).map(|l| m.count(l) * rational::binomial_i(r as i64 - 1, l as i64)).sum();
            assert_eq!(s.dim(), want);
        }
    }
    let tets = mesh::two_tets();
    let s = assembly::assemble(&tets, Family::Traceless, 2, 0, &opts).unwrap();
    assert!(assembly::check_conformity(&s, 2, 5).passed());
    assert!(assembly::check_locality(&s).passed());
    assert!(assembly::negative_control(&tets, Family::Traceless, 2, 0, 5).unwrap().passed());
    let s = assembly::assemble(&m, Family::Symmetric, 3, 0, &opts).unwrap();
    assert_eq!(assembly::check_div_onto(&s).unwrap().status, CheckStatus::Pass);
    let s = assembly::assemble(&m, Family::Symmetric, 2, 0, &opts).unwrap();
    let below = assembly::check_div_onto(&s).unwrap();
    assert_eq!(below.status, CheckStatus::SkippedBelowThreshold);
}

#[test]
fn merged_faces_span_the_same_space() {
    let m = mesh::two_tets();
    let plain = AssemblyOptions::default();
    let merged = AssemblyOptions { merge_faces: true, ..Default::default() };
    for (fam, r, k) in [(Family::Face, 2, -1), (Family::Face, 2, 0), (Family::Traceless, 2, 0)] {
        let a = assembly::assemble(&m, fam, r, k, &plain).unwrap();
        let b = assembly::assemble(&m, fam, r, k, &merged).unwrap();
        assert_eq!(a.dim(), b.dim());
        assert!(assembly::check_conformity(&b, 1, 2).passed());
    }
}

#[test]
fn mesh_errors() {
    assert!(matches!(mesh::builtin("moebius"), Err(hdiv_geodecomp::Error::UnknownMesh(_))));
    let v = vec![vec![int(0), int(0)], vec![int(1), int(0)], vec![int(2), int(0)]];
    assert!(mesh::Mesh::new(2, v, vec![vec![0, 1, 2]]).is_err());
}
