//! Matrix spaces 𝕄, 𝕋, 𝕊 and their t–n splits at sub-simplices.
//!
//! Matrices are flat row-major `n*n` vectors with `(u⊗v)_{ab} = u_a v_b`,
//! so `(u⊗v) n = u (v·n)` and `trace(u⊗v) = u·v`.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::bernstein::BernsteinPoly;
use crate::error::{Error, Result};
use crate::linalg::{self, RationalMatrix};
use crate::rational::{self, Vector, Q};
use crate::simplex::{Frame, Simplex, SubSimplexId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixSpace {
    Vector,
    Full,
    Traceless,
    Symmetric,
}

impl MatrixSpace {
    /// Length of the flat coefficient vector.
    pub fn ncomp(self, n: usize) -> usize {
        match self {
            Self::Vector => n,
            _ => n * n,
        }
    }

    pub fn dim(self, n: usize) -> usize {
        match self {
            Self::Vector => n,
            Self::Full => n * n,
            Self::Traceless => n * n - 1,
            Self::Symmetric => n * (n + 1) / 2,
        }
    }

    pub fn is_matrix(self) -> bool {
        self != Self::Vector
    }

    /// Fixed basis: unit vectors; `E_ab`; `E_ab (a≠b), E_aa − E_nn`; `E_aa, E_ab + E_ba`.
    pub fn canonical_basis(self, n: usize) -> Vec<Vector> {
        let e = |a: usize, b: usize| {
            let mut m = rational::zeros(n * n);
            m[a * n + b] = Q::one();
            m
        };
        match self {
            Self::Vector => (0..n).map(|i| rational::unit(n, i)).collect(),
            Self::Full => (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).map(|(a, b)| e(a, b)).collect(),
            Self::Traceless => {
                let mut out = Vec::new();
                for a in 0..n {
                    for b in 0..n {
                        if a != b {
                            out.push(e(a, b));
                        }
                    }
                }
                for a in 0..n - 1 {
                    out.push(rational::sub(&e(a, a), &e(n - 1, n - 1)));
                }
                out
            }
            Self::Symmetric => {
                let mut out = Vec::new();
                for a in 0..n {
                    for b in a..n {
                        out.push(if a == b { e(a, a) } else { rational::add(&e(a, b), &e(b, a)) });
                    }
                }
                out
            }
        }
    }

    /// Whether a flat coefficient lies in the space.
    pub fn contains(self, n: usize, m: &[Q]) -> bool {
        if m.len() != self.ncomp(n) {
            return false;
        }
        match self {
            Self::Vector | Self::Full => true,
            Self::Traceless => trace(m, n).is_zero(),
            Self::Symmetric => transpose(m, n) == m,
        }
    }
}

pub fn outer(u: &[Q], v: &[Q]) -> Vector {
    let mut out = Vec::with_capacity(u.len() * v.len());
    for a in u {
        for b in v {
            out.push(a * b);
        }
    }
    out
}

pub fn transpose(m: &[Q], n: usize) -> Vector {
    let mut t = rational::zeros(n * n);
    for a in 0..n {
        for b in 0..n {
            t[b * n + a] = m[a * n + b].clone();
        }
    }
    t
}

pub fn trace(m: &[Q], n: usize) -> Q {
    (0..n).fold(Q::zero(), |acc, a| acc + &m[a * n + a])
}

pub fn identity(n: usize) -> Vector {
    let mut m = rational::zeros(n * n);
    for a in 0..n {
        m[a * n + a] = Q::one();
    }
    m
}

fn check_square(m: &[Q], n: usize) -> Result<()> {
    if m.len() != n * n {
        return Err(Error::DimensionMismatch(format!("expected {n}x{n} matrix, got {} entries", m.len())));
    }
    Ok(())
}

/// `(A + Aᵀ)/2`.
pub fn sym(m: &[Q], n: usize) -> Result<Vector> {
    check_square(m, n)?;
    let half = rational::frac(1, 2);
    Ok(rational::scale(&rational::add(m, &transpose(m, n)), &half))
}

/// `A − trace(A)/n I`.
pub fn dev(m: &[Q], n: usize) -> Result<Vector> {
    check_square(m, n)?;
    let s = trace(m, n) / rational::int(n as i64);
    Ok(rational::sub(m, &rational::scale(&identity(n), &s)))
}

/// `A v`.
pub fn mat_vec(m: &[Q], v: &[Q]) -> Vector {
    let n = v.len();
    (0..n).map(|a| rational::dot(&m[a * n..(a + 1) * n], v)).collect()
}

/// Frobenius product `A : B`.
pub fn frobenius(a: &[Q], b: &[Q]) -> Q {
    rational::dot(a, b)
}

/// What a normal-component basis element contributes to inter-element coupling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NormalRole {
    /// The element sits in a column with no active normal constraint.
    pub free_column: bool,
    /// The element represents an active normal constraint `a_ij = a_ji`.
    pub active_constraint: bool,
}

/// Tangential and normal bases of a constrained space at a sub-simplex.
#[derive(Clone, Debug)]
pub struct TnSplit {
    pub site: SubSimplexId,
    pub space: MatrixSpace,
    pub tangential: Vec<Vector>,
    pub normal: Vec<Vector>,
    pub roles: Vec<NormalRole>,
}

impl TnSplit {
    pub fn active_constraints(&self) -> usize {
        self.roles.iter().filter(|r| r.active_constraint).count()
    }

    pub fn free_columns(&self) -> usize {
        self.roles.iter().filter(|r| r.free_column).count()
    }
}

/// `dim 𝒯ᶠ(𝕏)` and `dim 𝒩ᶠ(𝕏)` for an ℓ-dimensional site in `R^n`.
pub fn split_dims(space: MatrixSpace, n: usize, l: usize) -> (usize, usize) {
    let m = n - l;
    match space {
        MatrixSpace::Vector => (l, m),
        MatrixSpace::Full => (n * l, n * m),
        MatrixSpace::Traceless if l == 0 => (0, n * n - 1),
        MatrixSpace::Traceless => (l * m + l * l - 1, n * m),
        MatrixSpace::Symmetric => (l * (l + 1) / 2, l * m + m * (m + 1) / 2),
    }
}

pub fn tn_split(frame: &Frame, space: MatrixSpace) -> Result<TnSplit> {
    let n = frame.dim();
    let l = frame.tangents.len();
    if frame.site.dim() != l || frame.site.parent_dim() != n {
        return Err(Error::DimensionMismatch(format!("frame does not match site {}", frame.site)));
    }
    let t = &frame.tangents;
    let nv = &frame.normals;
    let free = NormalRole { free_column: true, active_constraint: false };
    let mut tangential = Vec::new();
    let mut normal = Vec::new();
    let mut roles = Vec::new();
    match space {
        MatrixSpace::Vector => {
            tangential.extend(t.iter().cloned());
            normal.extend(nv.iter().cloned());
            roles = vec![free; nv.len()];
        }
        MatrixSpace::Full => {
            for ti in t {
                for u in (0..n).map(|c| rational::unit(n, c)) {
                    tangential.push(outer(&u, ti));
                }
            }
            for nj in nv {
                for u in (0..n).map(|c| rational::unit(n, c)) {
                    normal.push(outer(&u, nj));
                }
            }
            roles = vec![free; normal.len()];
        }
        MatrixSpace::Traceless if l == 0 => {
            // No tangent to absorb the trace; use n_1⊗n_1 instead.
            let n1n1 = outer(&nv[0], &nv[0]);
            let s = rational::dot(&nv[0], &nv[0]);
            for (i, ni) in nv.iter().enumerate() {
                for (j, nj) in nv.iter().enumerate() {
                    if i == 0 && j == 0 {
                        continue;
                    }
                    let c = rational::dot(ni, nj) / &s;
                    normal.push(rational::sub(&outer(ni, nj), &rational::scale(&n1n1, &c)));
                }
            }
            roles = vec![NormalRole::default(); normal.len()];
        }
        MatrixSpace::Traceless => {
            let t1t1 = outer(&t[0], &t[0]);
            let s = rational::dot(&t[0], &t[0]);
            let modify = |u: &Vector, v: &Vector| {
                let c = rational::dot(u, v) / &s;
                rational::sub(&outer(u, v), &rational::scale(&t1t1, &c))
            };
            for ti in t {
                for nj in nv {
                    tangential.push(outer(nj, ti));
                }
            }
            for (i, ti) in t.iter().enumerate() {
                for (j, tj) in t.iter().enumerate() {
                    if i == 0 && j == 0 {
                        continue;
                    }
                    tangential.push(modify(ti, tj));
                }
            }
            for ti in t {
                for nj in nv {
                    normal.push(outer(ti, nj));
                }
            }
            for ni in nv {
                for nj in nv {
                    normal.push(modify(ni, nj));
                }
            }
            roles = vec![free; normal.len()];
        }
        MatrixSpace::Symmetric => {
            let sy = |u: &Vector, v: &Vector| sym(&outer(u, v), n).expect("square");
            for i in 0..l {
                for j in i..l {
                    tangential.push(sy(&t[i], &t[j]));
                }
            }
            for ti in t {
                for nj in nv {
                    normal.push(sy(ti, nj));
                    roles.push(free);
                }
            }
            let m = nv.len();
            for i in 0..m {
                for j in i..m {
                    normal.push(sy(&nv[i], &nv[j]));
                    roles.push(NormalRole { free_column: m == 1, active_constraint: i != j });
                }
            }
        }
    }
    Ok(TnSplit { site: frame.site.clone(), space, tangential, normal, roles })
}

/// Verifies the split is a direct sum spanning the constrained space.
pub fn verify_split(split: &TnSplit, n: usize) -> bool {
    let c = split.space.ncomp(n);
    let full = split.space.canonical_basis(n);
    let mut all = split.tangential.clone();
    all.extend(split.normal.iter().cloned());
    let (dt, dn) = split_dims(split.space, n, split.site.dim());
    split.tangential.len() == dt
        && split.normal.len() == dn
        && all.iter().all(|m| split.space.contains(n, m))
        && linalg::is_direct_sum(&[split.tangential.clone(), split.normal.clone()], c)
        && linalg::subspace_equal(&all, &full, c)
}

/// Index reading for the successor `i+1` in the traceless gradient basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuccessorReading {
    /// `i+1 mod (n+1)` over vertex indices `0..=n`.
    ModNPlusOne,
    /// `i+1 mod n`, read literally.
    ModN,
}

impl SuccessorReading {
    pub fn next(self, i: usize, n: usize) -> usize {
        match self {
            Self::ModNPlusOne => (i + 1) % (n + 1),
            Self::ModN => (i + 1) % n,
        }
    }
}

/// The basis `∇λ_i ⊗ t_{i+1,j}` of 𝕋 and its dual `t_{j,i} ⊗ ∇λ_j + I/n`.
#[derive(Clone, Debug)]
pub struct TracelessDual {
    pub labels: Vec<(usize, usize)>,
    pub basis: Vec<Vector>,
    pub dual: Vec<Vector>,
    /// `pairing[a][b] = dual_a : basis_b`.
    pub pairing: RationalMatrix,
}

impl TracelessDual {
    pub fn is_kronecker(&self) -> bool {
        self.pairing == RationalMatrix::identity(self.basis.len())
    }

    pub fn all_traceless(&self, n: usize) -> bool {
        self.basis.iter().all(|b| trace(b, n).is_zero())
    }
}

pub fn traceless_gradient_basis(t: &Simplex, reading: SuccessorReading) -> Result<TracelessDual> {
    let n = t.dim();
    if n < 2 {
        return Err(Error::Unsupported("traceless gradient basis needs n ≥ 2".into()));
    }
    let mut labels = Vec::new();
    let mut basis = Vec::new();
    let mut dual = Vec::new();
    let id_n = rational::scale(&identity(n), &rational::frac(1, n as i64));
    for i in 0..=n {
        let ip = reading.next(i, n);
        for j in (0..=n).filter(|&j| j != i && j != ip) {
            labels.push((i, j));
            basis.push(outer(t.grad(i), &t.edge(ip, j)));
            dual.push(rational::add(&outer(&t.edge(j, i), t.grad(j)), &id_n));
        }
    }
    let k = basis.len();
    let mut pairing = RationalMatrix::zeros(k, k);
    for a in 0..k {
        for b in 0..k {
            pairing.set(a, b, frobenius(&dual[a], &basis[b]));
        }
    }
    Ok(TracelessDual { labels, basis, dual, pairing })
}

/// A polynomial vector field, one Bernstein polynomial per component.
pub type VectorField = Vec<BernsteinPoly>;

/// `x_c = Σ_i v_i[c] λ_i`.
pub fn position_field(t: &Simplex) -> VectorField {
    let n = t.dim();
    let full = SubSimplexId::full(n);
    (0..n)
        .map(|c| {
            let terms = (0..=n).map(|i| (crate::bernstein::MultiIndex::unit(n + 1, i), t.vertex(i)[c].clone()));
            BernsteinPoly::from_terms(full.clone(), 1, terms)
        })
        .collect()
}

/// `RT = {a x + b}` and `RM = ker(sym grad) ∩ P_1(T; R^n)`, as degree-1 fields.
pub fn rigid_spaces(t: &Simplex) -> (Vec<VectorField>, Vec<VectorField>) {
    let n = t.dim();
    let full = SubSimplexId::full(n);
    let constant = |c: usize| -> VectorField {
        (0..n)
            .map(|k| {
                let v = if k == c { Q::one() } else { Q::zero() };
                BernsteinPoly::constant(full.clone(), v).elevate(1).expect("elevate")
            })
            .collect()
    };
    let mut rt = vec![position_field(t)];
    rt.extend((0..n).map(constant));

    // Unknowns: coefficients of λ_i e_c, index i*n + c; grad(λ_i e_c) = e_c ⊗ ∇λ_i.
    let unknowns = (n + 1) * n;
    let mut cols = Vec::with_capacity(unknowns);
    for i in 0..=n {
        for c in 0..n {
            let g = outer(&rational::unit(n, c), t.grad(i));
            cols.push(sym(&g, n).expect("square"));
        }
    }
    let m = RationalMatrix::from_cols(&cols, n * n);
    let rm = m
        .nullspace()
        .into_iter()
        .map(|k| {
            (0..n)
                .map(|c| {
                    let terms = (0..=n).map(|i| (crate::bernstein::MultiIndex::unit(n + 1, i), k[i * n + c].clone()));
                    BernsteinPoly::from_terms(full.clone(), 1, terms)
                })
                .collect()
        })
        .collect();
    (rt, rm)
}
