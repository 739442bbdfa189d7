use hdiv_geodecomp::bernstein::{BernsteinPoly, MultiIndex};
use hdiv_geodecomp::element::{self, Family};
use hdiv_geodecomp::linalg::RationalMatrix;
use hdiv_geodecomp::rational::{self, frac, int, Q};
use hdiv_geodecomp::simplex::{
    all_subsimplices, build_frame, enumerate_subsimplices, FrameConvention, LocalFrames, Simplex, SubSimplexId,
};
use hdiv_geodecomp::tensor::{self, MatrixSpace, SuccessorReading};
use nalgebra::{DMatrix, SymmetricEigen};
use num_traits::Zero;
use proptest::prelude::*;

fn small_q() -> impl Strategy<Value = Q> {
    (-6i64..=6, 1i64..=4).prop_map(|(a, b)| frac(a, b))
}

fn simplex(n: usize) -> impl Strategy<Value = Simplex> {
    prop::collection::vec(prop::collection::vec(small_q(), n), n + 1)
        .prop_filter_map("degenerate", |v| Simplex::new(v).ok())
}

fn barycentric(len: usize) -> impl Strategy<Value = Vec<Q>> {
    prop::collection::vec(1i64..=20, len).prop_map(|w| {
        let s: i64 = w.iter().sum();
        w.iter().map(|&x| frac(x, s)).collect()
    })
}

fn poly(len: usize, degree: usize) -> impl Strategy<Value = BernsteinPoly> {
    let lattice = MultiIndex::lattice(len, degree);
    prop::collection::vec(small_q(), lattice.len()).prop_map(move |c| {
        BernsteinPoly::from_terms(SubSimplexId::full(len - 1), degree, lattice.iter().copied().zip(c))
    })
}

fn rmatrix(rows: usize, cols: usize) -> impl Strategy<Value = RationalMatrix> {
    prop::collection::vec(small_q(), rows * cols)
        .prop_map(move |d| RationalMatrix::from_rows(&d.chunks(cols).map(|c| c.to_vec()).collect::<Vec<_>>(), cols))
}

/// Gauss–Legendre nodes and weights on [0, 1] from the Jacobi matrix.
fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    let j = DMatrix::from_fn(m, m, |a, b| {
        if a.abs_diff(b) == 1 {
            let k = a.max(b) as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let e = SymmetricEigen::new(j);
    (0..m).map(|i| ((e.eigenvalues[i] + 1.0) / 2.0, e.eigenvectors[(0, i)].powi(2))).collect()
}

fn eval_f64(p: &BernsteinPoly, lam: &[f64]) -> f64 {
    p.terms()
        .map(|(a, c)| {
            rational::to_f64(c) * a.entries().iter().zip(lam).map(|(&e, l)| l.powi(e as i32)).product::<f64>()
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn subsimplex_counts(n in 1usize..=5) {
        for l in 0..=n {
            prop_assert_eq!(enumerate_subsimplices(n, l).unwrap().len(), rational::binomial(n + 1, l + 1));
        }
        prop_assert_eq!(all_subsimplices(n).len(), (1 << (n + 1)) - 1);
    }

    #[test]
    fn complement_is_involution(n in 1usize..=5, mask in 1u32..64) {
        let idx: Vec<usize> = (0..=n).filter(|i| mask & (1 << i) != 0).collect();
        prop_assume!(!idx.is_empty() && idx.len() <= n);
        let f = SubSimplexId::new(idx, n).unwrap();
        prop_assert_eq!(f.complement().complement(), f.clone());
        prop_assert_eq!(f.len() + f.complement().len(), n + 1);
    }

    #[test]
    fn barycentric_gradient_identities(t in simplex(3)) {
        let n = 3;
        let mut sum = rational::zeros(n);
        for i in 0..=n {
            sum = rational::add(&sum, t.grad(i));
        }
        prop_assert!(rational::is_zero_vec(&sum));
        for i in 0..=n {
            for j in 0..=n {
                for l in 0..=n {
                    let want = int((j == l) as i64 - (i == l) as i64);
                    prop_assert_eq!(rational::dot(&t.edge(i, j), t.grad(l)), want);
                }
            }
        }
    }

    #[test]
    fn frames_are_valid(t in simplex(3)) {
        for conv in FrameConvention::ALL {
            for f in all_subsimplices(3) {
                let fr = build_frame(&t, &f, conv).unwrap();
                prop_assert!(fr.is_valid());
                prop_assert_eq!(fr.tangents.len(), f.dim());
                prop_assert_eq!(fr.normals.len(), 3 - f.dim());
            }
        }
    }

    #[test]
    fn elevation_preserves_values(p in poly(3, 2), lam in barycentric(3), extra in 0usize..3) {
        let e = p.clone().elevate(2 + extra).unwrap();
        prop_assert_eq!(e.evaluate(&lam), p.evaluate(&lam));
        prop_assert_eq!(e, p);
    }

    #[test]
    fn product_evaluates_pointwise(p in poly(3, 2), q in poly(3, 1), lam in barycentric(3)) {
        prop_assert_eq!(p.multiply(&q).unwrap().evaluate(&lam), p.evaluate(&lam) * q.evaluate(&lam));
    }

    #[test]
    fn leibniz_rule(t in simplex(2), p in poly(3, 2), q in poly(3, 2), dir in prop::collection::vec(small_q(), 2)) {
        let lhs = p.multiply(&q).unwrap().derivative(&dir, &t).unwrap();
        let rhs = p.derivative(&dir, &t).unwrap().multiply(&q).unwrap()
            .add(&p.multiply(&q.derivative(&dir, &t).unwrap()).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn restrict_after_extend(p in poly(2, 3)) {
        let f = SubSimplexId::new(vec![1, 3], 3).unwrap();
        let on_f = BernsteinPoly::from_terms(f.clone(), 3, p.terms().map(|(a, c)| (*a, c.clone())));
        let ext = on_f.extend(&SubSimplexId::full(3)).unwrap();
        prop_assert_eq!(ext.restrict(&f).unwrap(), on_f);
    }

    #[test]
    fn edge_integral_matches_quadrature(p in poly(2, 4)) {
        let exact = rational::to_f64(&p.integrate(&SubSimplexId::full(1)).unwrap());
        let quad: f64 = gauss_legendre(8).iter().map(|&(x, w)| w * eval_f64(&p, &[1.0 - x, x])).sum();
        prop_assert!((exact - quad).abs() < 1e-12 * (1.0 + exact.abs()));
    }

    #[test]
    fn triangle_integral_matches_quadrature(p in poly(3, 3)) {
        // Averages over the reference triangle, area 1/2, via the collapsed square.
        let exact = rational::to_f64(&p.integrate(&SubSimplexId::full(2)).unwrap());
        let g = gauss_legendre(8);
        let mut quad = 0.0;
        for &(u, wu) in &g {
            for &(v, wv) in &g {
                let (x, y) = (u, v * (1.0 - u));
                quad += 2.0 * wu * wv * (1.0 - u) * eval_f64(&p, &[1.0 - x - y, x, y]);
            }
        }
        prop_assert!((exact - quad).abs() < 1e-12 * (1.0 + exact.abs()));
    }

    #[test]
    fn transpose_preserves_rank(m in rmatrix(5, 7)) {
        prop_assert_eq!(m.rank(), m.transpose().rank());
    }

    #[test]
    fn product_has_constructed_rank(r in 1usize..=20, a in rmatrix(20, 20), b in rmatrix(20, 20)) {
        // A = [I_r; *] (20×r) and B = [I_r | *] (r×20) both have rank r, hence so does AB.
        let left = RationalMatrix::from_cols(
            &(0..r).map(|j| { let mut c = a.col(j); c[..r].clone_from_slice(&rational::unit(r, j)); c }).collect::<Vec<_>>(),
            20,
        );
        let right = RationalMatrix::from_rows(
            &(0..r).map(|i| { let mut row = b.row(i).to_vec(); row[..r].clone_from_slice(&rational::unit(r, i)); row }).collect::<Vec<_>>(),
            20,
        );
        prop_assert_eq!(left.mul(&right).rank(), r);
    }

    #[test]
    fn nullspace_is_kernel(m in rmatrix(4, 6)) {
        let k = m.nullspace();
        prop_assert_eq!(k.len() + m.rank(), 6);
        for v in &k {
            prop_assert!(rational::is_zero_vec(&m.mul_vec(v)));
        }
    }

    #[test]
    fn splits_are_direct_sums(t in simplex(3)) {
        for conv in FrameConvention::ALL {
            for f in all_subsimplices(3) {
                let fr = build_frame(&t, &f, conv).unwrap();
                for space in [MatrixSpace::Vector, MatrixSpace::Traceless, MatrixSpace::Symmetric] {
                    let s = tensor::tn_split(&fr, space).unwrap();
                    prop_assert!(tensor::verify_split(&s, 3));
                    let (dt, dn) = tensor::split_dims(space, 3, f.dim());
                    prop_assert_eq!((s.tangential.len(), s.normal.len()), (dt, dn));
                }
            }
        }
    }

    #[test]
    fn tangential_parts_have_zero_facet_trace(t in simplex(2)) {
        let fr = LocalFrames::new(&t, FrameConvention::EdgeTangentsFaceNormals);
        for fam in [Family::Face, Family::Traceless, Family::Symmetric] {
            let basis = element::decompose(fam, &t, 2, &fr).unwrap();
            for m in basis.members.iter().filter(|m| m.part == element::Part::Tangential) {
                for i in 0..=2 {
                    let facet = SubSimplexId::facet(i, 2);
                    let tr = element::trace_div(fam, m, &facet, t.grad(i)).unwrap();
                    prop_assert!(tr.iter().all(BernsteinPoly::is_zero));
                }
            }
        }
    }

    #[test]
    fn traceless_dual_is_kronecker(t in simplex(3)) {
        let d = tensor::traceless_gradient_basis(&t, SuccessorReading::ModNPlusOne).unwrap();
        prop_assert!(d.is_kronecker());
        prop_assert!(d.all_traceless(3));
        prop_assert_eq!(d.basis.len(), 8);
    }

    #[test]
    fn dev_and_sym_projections(a in prop::collection::vec(small_q(), 9)) {
        let d = tensor::dev(&a, 3).unwrap();
        prop_assert!(tensor::trace(&d, 3).is_zero());
        let s = tensor::sym(&a, 3).unwrap();
        prop_assert_eq!(tensor::transpose(&s, 3), s.clone());
        prop_assert_eq!(tensor::sym(&s, 3).unwrap(), s);
    }
}

#[test]
fn quadrature_sanity() {
    let w: f64 = gauss_legendre(5).iter().map(|p| p.1).sum();
    assert!((w - 1.0).abs() < 1e-14);
}
