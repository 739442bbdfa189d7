//! Simplices, sub-simplex index sets, barycentric gradients and t–n frames.

use itertools::Itertools;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, RationalMatrix};
use crate::rational::{self, Vector, Q};

/// Strictly increasing subset of the vertex indices `0..=parent_dim`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SubSimplexId {
    indices: Vec<usize>,
    parent_dim: usize,
}

impl SubSimplexId {
    pub fn new(mut indices: Vec<usize>, parent_dim: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if indices.is_empty() || indices.last().is_some_and(|&i| i > parent_dim) {
            return Err(Error::Domain(format!("invalid vertex set {indices:?} in dimension {parent_dim}")));
        }
        Ok(Self { indices, parent_dim })
    }

    /// The whole simplex `{0..n}`.
    pub fn full(parent_dim: usize) -> Self {
        Self { indices: (0..=parent_dim).collect(), parent_dim }
    }

    pub fn vertex(i: usize, parent_dim: usize) -> Self {
        Self { indices: vec![i], parent_dim }
    }

    /// Facet `F_i` opposite vertex `i`.
    pub fn facet(i: usize, parent_dim: usize) -> Self {
        Self { indices: (0..=parent_dim).filter(|&j| j != i).collect(), parent_dim }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn parent_dim(&self) -> usize {
        self.parent_dim
    }

    /// Dimension ℓ = |f| − 1; the empty complement of `T` reports 0 vertices via `len`.
    pub fn dim(&self) -> usize {
        self.indices.len().saturating_sub(1)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.indices.iter().all(|&i| other.contains(i))
    }

    /// Position of vertex `i` inside this set.
    pub fn position(&self, i: usize) -> Option<usize> {
        self.indices.binary_search(&i).ok()
    }

    /// The opposite index set `f*`; empty for the full simplex.
    pub fn complement(&self) -> Self {
        Self { indices: (0..=self.parent_dim).filter(|&i| !self.contains(i)).collect(), parent_dim: self.parent_dim }
    }

    /// Facets `F ⊇ f`, i.e. `F_i` for `i ∈ f*`.
    pub fn containing_facets(&self) -> Vec<Self> {
        self.complement().indices.iter().map(|&i| Self::facet(i, self.parent_dim)).collect()
    }

    /// All sub-simplices of this one of dimension `l`, as sets in the parent.
    pub fn faces(&self, l: usize) -> Vec<Self> {
        self.indices
            .iter()
            .copied()
            .combinations(l + 1)
            .map(|indices| Self { indices, parent_dim: self.parent_dim })
            .collect()
    }
}

impl std::fmt::Display for SubSimplexId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{{}}}", self.indices.iter().join(","))
    }
}

/// `Δ_ℓ(T)` in lexicographic order.
pub fn enumerate_subsimplices(n: usize, l: usize) -> Result<Vec<SubSimplexId>> {
    if l > n {
        return Err(Error::Domain(format!("sub-simplex dimension {l} outside [0, {n}]")));
    }
    Ok(SubSimplexId::full(n).faces(l))
}

/// All sub-simplices ordered by dimension, then lexicographically.
pub fn all_subsimplices(n: usize) -> Vec<SubSimplexId> {
    (0..=n).flat_map(|l| SubSimplexId::full(n).faces(l)).collect()
}

/// Nondegenerate n-simplex with rational vertices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Simplex {
    dim: usize,
    vertices: Vec<Vector>,
    grads: Vec<Vector>,
    /// det of the edge matrix, sign included.
    det: Q,
}

impl Simplex {
    pub fn new(vertices: Vec<Vector>) -> Result<Self> {
        let n = vertices
            .len()
            .checked_sub(1)
            .filter(|&n| n >= 1)
            .ok_or_else(|| Error::DimensionMismatch("a simplex needs at least two vertices".into()))?;
        if vertices.iter().any(|v| v.len() != n) {
            return Err(Error::DimensionMismatch(format!("{} vertices need coordinates in R^{n}", n + 1)));
        }
        let edges: Vec<Vector> = (1..=n).map(|j| rational::sub(&vertices[j], &vertices[0])).collect();
        // E has the edges as columns; rows of E^{-1} are ∇λ_1..∇λ_n.
        let e = RationalMatrix::from_cols(&edges, n);
        let det = e.determinant();
        if det.is_zero() {
            return Err(Error::SingularGeometry("vertices are affinely dependent".into()));
        }
        let inv = e.inverse().expect("nonzero determinant");
        let mut grads = Vec::with_capacity(n + 1);
        let rows = inv.row_vecs();
        let g0 = rows.iter().fold(rational::zeros(n), |acc, g| rational::sub(&acc, g));
        grads.push(g0);
        grads.extend(rows);
        Ok(Self { dim: n, vertices, grads, det })
    }

    /// `(0, e_1, ..., e_n)`.
    pub fn reference(n: usize) -> Self {
        let mut v = vec![rational::zeros(n)];
        v.extend((0..n).map(|i| rational::unit(n, i)));
        Self::new(v).expect("reference simplex")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Vector] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> &Vector {
        &self.vertices[i]
    }

    /// `∇λ_0 .. ∇λ_n`.
    pub fn barycentric_gradients(&self) -> &[Vector] {
        &self.grads
    }

    pub fn grad(&self, i: usize) -> &Vector {
        &self.grads[i]
    }

    /// Edge vector `t_{i,j} = v_j − v_i`.
    pub fn edge(&self, i: usize, j: usize) -> Vector {
        rational::sub(&self.vertices[j], &self.vertices[i])
    }

    /// `|T| = |det E| / n!`.
    pub fn volume(&self) -> Q {
        self.det.abs() / Q::from_integer(rational::factorial(self.dim as u32))
    }

    pub fn orientation_positive(&self) -> bool {
        self.det.is_positive()
    }

    /// Barycentric coordinates of `x`.
    pub fn barycentric(&self, x: &[Q]) -> Vector {
        let d = rational::sub(x, &self.vertices[0]);
        let mut lam: Vector = self.grads[1..].iter().map(|g| rational::dot(g, &d)).collect();
        let l0 = lam.iter().fold(Q::one(), |acc, l| acc - l);
        lam.insert(0, l0);
        lam
    }

    /// Point with the given barycentric coordinates.
    pub fn point(&self, lam: &[Q]) -> Vector {
        let mut x = rational::zeros(self.dim);
        for (l, v) in lam.iter().zip(&self.vertices) {
            if !l.is_zero() {
                x = rational::add(&x, &rational::scale(v, l));
            }
        }
        x
    }

    pub fn check_site(&self, f: &SubSimplexId) -> Result<()> {
        if f.parent_dim() != self.dim || f.is_empty() {
            return Err(Error::DimensionMismatch(format!("{f} is not a sub-simplex of a {}-simplex", self.dim)));
        }
        Ok(())
    }
}

/// How tangent and normal vectors of a sub-simplex are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameConvention {
    /// Tangents `v_{f(i)} − v_{f(0)}`, normals `∇λ_i, i ∈ f*`.
    EdgeTangentsFaceNormals,
    /// Gram–Schmidt tangents, Gram–Schmidt normal complement; Cartesian at vertices.
    Orthogonalized,
    /// Edge tangents; normals are the facet normals `n_F`, `F ⊇ f`.
    FaceNormalBasis,
}

impl FrameConvention {
    pub const ALL: [Self; 3] = [Self::EdgeTangentsFaceNormals, Self::Orthogonalized, Self::FaceNormalBasis];

    pub fn name(self) -> &'static str {
        match self {
            Self::EdgeTangentsFaceNormals => "edge_tangents_face_normals",
            Self::Orthogonalized => "orthogonalized",
            Self::FaceNormalBasis => "face_normal_basis",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Globality {
    Global,
    Local,
}

/// Tangents and normals at a sub-simplex, rescaled to max-entry ±1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub site: SubSimplexId,
    pub tangents: Vec<Vector>,
    pub normals: Vec<Vector>,
    pub tangent_globality: Vec<Globality>,
    pub normal_globality: Vec<Globality>,
}

impl Frame {
    pub fn dim(&self) -> usize {
        self.tangents.len() + self.normals.len()
    }

    /// Checks `t·n = 0` and that the vectors span the ambient space.
    pub fn is_valid(&self) -> bool {
        let n = self.dim();
        let orth = self.tangents.iter().all(|t| self.normals.iter().all(|nv| rational::dot(t, nv).is_zero()));
        let mut all = self.tangents.clone();
        all.extend(self.normals.iter().cloned());
        orth && all.iter().all(|v| v.len() == n) && linalg::rank(&all, n) == n
    }
}

/// Gram–Schmidt without normalization; input must be independent.
pub fn gram_schmidt(vs: &[Vector]) -> Vec<Vector> {
    let mut out: Vec<Vector> = Vec::with_capacity(vs.len());
    for v in vs {
        let mut w = v.clone();
        for u in &out {
            let c = rational::dot(&w, u) / rational::dot(u, u);
            w = rational::sub(&w, &rational::scale(u, &c));
        }
        out.push(w);
    }
    out
}

/// Basis of the orthogonal complement of `span(vs)` in `R^n`.
pub fn orthogonal_complement(vs: &[Vector], n: usize) -> Vec<Vector> {
    if vs.is_empty() {
        return (0..n).map(|i| rational::unit(n, i)).collect();
    }
    linalg::nullspace(vs, n)
}

/// Edge tangents `v_{f(i)} − v_{f(0)}` from a vertex list.
pub fn edge_tangents(points: &[Vector]) -> Vec<Vector> {
    points[1..].iter().map(|p| rational::max_normalize(&rational::sub(p, &points[0]))).collect()
}

/// Sign-canonical normal of the hyperplane through `points`.
pub fn hyperplane_normal(points: &[Vector], n: usize) -> Vector {
    let t: Vec<Vector> = points[1..].iter().map(|p| rational::sub(p, &points[0])).collect();
    let k = linalg::nullspace(&t, n);
    debug_assert_eq!(k.len(), 1);
    rational::sign_canonical(&rational::max_normalize(&k[0]))
}

/// Frame depending only on the coordinates of the sub-simplex vertices.
pub fn orthogonalized_frame(points: &[Vector], n: usize) -> (Vec<Vector>, Vec<Vector>) {
    let raw: Vec<Vector> = points[1..].iter().map(|p| rational::sub(p, &points[0])).collect();
    let tangents: Vec<Vector> = gram_schmidt(&raw).iter().map(|v| rational::max_normalize(v)).collect();
    let normals = if raw.is_empty() {
        (0..n).map(|i| rational::unit(n, i)).collect()
    } else {
        gram_schmidt(&orthogonal_complement(&raw, n))
            .iter()
            .map(|v| rational::sign_canonical(&rational::max_normalize(v)))
            .collect()
    };
    (tangents, normals)
}

pub fn build_frame(t: &Simplex, f: &SubSimplexId, convention: FrameConvention) -> Result<Frame> {
    t.check_site(f)?;
    let n = t.dim();
    let pts: Vec<Vector> = f.indices().iter().map(|&i| t.vertex(i).clone()).collect();
    let (tangents, normals, global) = match convention {
        FrameConvention::EdgeTangentsFaceNormals => {
            let normals = f.complement().indices().iter().map(|&i| rational::max_normalize(t.grad(i))).collect();
            (edge_tangents(&pts), normals, Globality::Local)
        }
        FrameConvention::Orthogonalized => {
            let (tg, nm) = orthogonalized_frame(&pts, n);
            (tg, nm, Globality::Global)
        }
        FrameConvention::FaceNormalBasis => {
            let normals = f
                .containing_facets()
                .iter()
                .map(|facet| {
                    let fp: Vec<Vector> = facet.indices().iter().map(|&i| t.vertex(i).clone()).collect();
                    hyperplane_normal(&fp, n)
                })
                .collect();
            (edge_tangents(&pts), normals, Globality::Local)
        }
    };
    let frame = Frame {
        site: f.clone(),
        tangent_globality: vec![Globality::Local; tangents.len()],
        normal_globality: vec![global; normals.len()],
        tangents,
        normals,
    };
    debug_assert!(frame.is_valid());
    Ok(frame)
}

/// Source of the frames and facet normals used by DoFs on one element.
///
/// Sites are given in the element's local vertex numbering.
pub trait SiteFrames: Sync {
    /// Tangents and the normal-plane basis at `f`.
    fn frame(&self, f: &SubSimplexId) -> Frame;
    /// The chosen normal `n_F` of a facet.
    fn facet_normal(&self, facet: &SubSimplexId) -> Vector;
}

/// Frames computed on a single simplex from a convention.
#[derive(Clone, Debug)]
pub struct LocalFrames<'a> {
    pub simplex: &'a Simplex,
    pub convention: FrameConvention,
}

impl<'a> LocalFrames<'a> {
    pub fn new(simplex: &'a Simplex, convention: FrameConvention) -> Self {
        Self { simplex, convention }
    }
}

impl SiteFrames for LocalFrames<'_> {
    fn frame(&self, f: &SubSimplexId) -> Frame {
        build_frame(self.simplex, f, self.convention).expect("valid site")
    }

    fn facet_normal(&self, facet: &SubSimplexId) -> Vector {
        let pts: Vec<Vector> = facet.indices().iter().map(|&i| self.simplex.vertex(i).clone()).collect();
        hyperplane_normal(&pts, self.simplex.dim())
    }
}
