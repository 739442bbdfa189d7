//! Degrees of freedom as exact integral functionals, DoF matrices,
//! unisolvence certificates, quotient face spaces and face merges.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bernstein::{self, BernsteinPoly, Lattice, MultiIndex};
use crate::element::{self, Family, Part, ShapeFunction, SpaceBasis};
use crate::error::{Error, Result};
use crate::linalg::{self, RationalMatrix};
use crate::rational::{self, Vector, Q};
use crate::report::{Check, CheckStatus};
use crate::simplex::{all_subsimplices, Simplex, SiteFrames, SubSimplexId};
use crate::tensor;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    /// Shared by every element containing the site.
    Global,
    /// Shared across the facet only.
    Facewise { facet: SubSimplexId },
    /// Private to the element.
    Interior,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DofKind {
    PointValue,
    Moment,
}

/// `∫_site w (u · direction) / |site|`; for matrices `u · direction` is `A : direction`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DofTerm {
    pub weight: BernsteinPoly,
    pub direction: Vector,
    /// `(t, n)` when the direction is `t ⊗ n`, i.e. the functional is `tᵀ A n`.
    pub pair: Option<(Vector, Vector)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DofFunctional {
    pub site: SubSimplexId,
    pub kind: DofKind,
    pub scope: Scope,
    pub terms: Vec<DofTerm>,
    pub label: &'static str,
}

impl DofFunctional {
    fn single(
        site: &SubSimplexId,
        scope: Scope,
        weight: BernsteinPoly,
        direction: Vector,
        label: &'static str,
    ) -> Self {
        let kind = if site.len() == 1 { DofKind::PointValue } else { DofKind::Moment };
        Self { site: site.clone(), kind, scope, terms: vec![DofTerm { weight, direction, pair: None }], label }
    }

    /// Value on `λ^α ⊗ coeff`.
    pub fn apply(&self, alpha: &MultiIndex, coeff: &[Q], degree: usize) -> Q {
        let mut total = Q::zero();
        let pos = self.site.indices();
        let Some(gamma) = bernstein::restrict_index(alpha, pos, degree) else {
            return total;
        };
        for term in &self.terms {
            let d = rational::dot(&term.direction, coeff);
            if d.is_zero() {
                continue;
            }
            let mut s = Q::zero();
            for (beta, w) in term.weight.terms() {
                s += w * bernstein::monomial_average(beta.add(&gamma).entries());
            }
            total += s * d;
        }
        total
    }

    pub fn apply_to(&self, sf: &ShapeFunction) -> Q {
        self.apply(&sf.alpha, &sf.coeff, sf.alpha.degree())
    }

    /// Row over a flat field of degree `r` with `c` components.
    pub fn flat_row(&self, lattice: &Lattice, c: usize) -> Vector {
        let mut row = rational::zeros(lattice.size() * c);
        for (ai, a) in lattice.points.iter().enumerate() {
            for k in 0..c {
                let e = rational::unit(c, k);
                row[ai * c + k] = self.apply(a, &e, lattice.degree);
            }
        }
        row
    }

    /// Hashable description used to compare functionals across elements.
    pub fn signature(&self, site_ids: &[usize]) -> String {
        let mut s = format!("{}|{:?}|", self.label, site_ids);
        for t in &self.terms {
            for (a, c) in t.weight.terms() {
                s.push_str(&format!("{:?}:{};", a.entries(), rational::format_q(c)));
            }
            s.push('|');
            for d in &t.direction {
                s.push_str(&rational::format_q(d));
                s.push(',');
            }
            s.push('#');
        }
        s
    }
}

/// DoFs of one element with the Stenberg-type parameter `k`.
#[derive(Clone, Debug)]
pub struct DofSet {
    pub family: Family,
    pub n: usize,
    pub r: usize,
    pub k: i32,
    pub members: Vec<DofFunctional>,
}

impl DofSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Consecutive runs of (site, scope, label), in order.
    pub fn groups(&self) -> Vec<(String, usize, usize)> {
        let mut out: Vec<(String, usize, usize)> = Vec::new();
        for (i, d) in self.members.iter().enumerate() {
            let key = format!("{}@{}/{:?}", d.label, d.site, d.scope);
            match out.last_mut() {
                Some((k, _, len)) if *k == key => *len += 1,
                _ => out.push((key, i, 1)),
            }
        }
        out
    }
}

/// Lattice monomials of degree `r − ℓ − 1` on `f`.
pub fn site_weights(f: &SubSimplexId, r: usize) -> Vec<BernsteinPoly> {
    let l = f.dim();
    if r < l + 1 {
        return Vec::new();
    }
    MultiIndex::lattice(f.len(), r - l - 1)
        .into_iter()
        .map(|b| BernsteinPoly::monomial(f.clone(), b, Q::one()))
        .collect()
}

/// Checks `k` and `r` against the family's admissible range.
pub fn check_params(family: Family, n: usize, r: usize, k: i32) -> Result<()> {
    family.check_dim(n)?;
    let (kmin, rmin) = match family {
        Family::Lagrange | Family::VectorLagrange => (-1, 1),
        Family::Face => (-1, 1),
        Family::Traceless | Family::Symmetric => (0, 2),
    };
    if matches!(family, Family::Lagrange | Family::VectorLagrange) {
        if r < rmin {
            return Err(Error::Inadmissible(format!("degree {r} below {rmin}")));
        }
        return Ok(());
    }
    if k < kmin || k > n as i32 - 2 {
        return Err(Error::Inadmissible(format!(
            "k = {k} outside [{kmin}, {}] for family {}",
            n as i32 - 2,
            family.name()
        )));
    }
    if r < rmin {
        return Err(Error::Inadmissible(format!("degree {r} below {rmin} for family {}", family.name())));
    }
    Ok(())
}

fn pair_dir(t: &[Q], n_: &[Q]) -> DofTerm {
    DofTerm {
        weight: BernsteinPoly::zero(SubSimplexId::full(1), 0),
        direction: tensor::outer(t, n_),
        pair: Some((t.to_vec(), n_.to_vec())),
    }
}

fn with_weight(mut term: DofTerm, w: BernsteinPoly) -> DofTerm {
    term.weight = w;
    term
}

pub fn build_dofs(family: Family, t: &Simplex, r: usize, k: i32, frames: &dyn SiteFrames) -> Result<DofSet> {
    let n = t.dim();
    check_params(family, n, r, k)?;
    let mut members = Vec::new();
    let c = family.ncomp(n);
    let unit = |i: usize| rational::unit(n, i);
    for f in all_subsimplices(n) {
        let l = f.dim() as i32;
        if l == n as i32 {
            continue;
        }
        let weights = site_weights(&f, r);
        if weights.is_empty() {
            continue;
        }
        let global = |dir: Vector, label: &'static str, out: &mut Vec<DofFunctional>| {
            for w in &weights {
                out.push(DofFunctional::single(&f, Scope::Global, w.clone(), dir.clone(), label));
            }
        };
        match family {
            Family::Lagrange => global(vec![Q::one()], "lattice_moment", &mut members),
            Family::VectorLagrange => {
                for comp in 0..n {
                    global(unit(comp), "lattice_moment", &mut members);
                }
            }
            Family::Face => {
                if l <= k {
                    for nv in frames.frame(&f).normals {
                        global(nv, "normal_moment", &mut members);
                    }
                } else {
                    for facet in f.containing_facets() {
                        let nf = frames.facet_normal(&facet);
                        for w in &weights {
                            members.push(DofFunctional::single(
                                &f,
                                Scope::Facewise { facet: facet.clone() },
                                w.clone(),
                                nf.clone(),
                                "facewise_normal_moment",
                            ));
                        }
                    }
                }
            }
            Family::Traceless | Family::Symmetric => {
                let space = family.space().unwrap();
                if l == 0 {
                    for e in space.canonical_basis(n) {
                        global(e, "vertex_value", &mut members);
                    }
                    continue;
                }
                let frame = frames.frame(&f);
                if family == Family::Traceless {
                    if l <= k {
                        for nv in &frame.normals {
                            for comp in 0..n {
                                global(tensor::outer(&unit(comp), nv), "normal_moment", &mut members);
                            }
                        }
                    } else {
                        for facet in f.containing_facets() {
                            let nf = frames.facet_normal(&facet);
                            for comp in 0..n {
                                for w in &weights {
                                    members.push(DofFunctional::single(
                                        &f,
                                        Scope::Facewise { facet: facet.clone() },
                                        w.clone(),
                                        tensor::outer(&unit(comp), &nf),
                                        "facewise_normal_moment",
                                    ));
                                }
                            }
                        }
                    }
                    continue;
                }
                // Symmetric: pairs (t, n) and (n_j, n_i) with j ≥ i.
                let push_pair = |out: &mut Vec<DofFunctional>, a: &Vector, b: &Vector, scope: Scope, label| {
                    for w in &weights {
                        out.push(DofFunctional {
                            site: f.clone(),
                            kind: DofKind::Moment,
                            scope: scope.clone(),
                            terms: vec![with_weight(pair_dir(a, b), w.clone())],
                            label,
                        });
                    }
                };
                let nv = &frame.normals;
                if l <= k {
                    for ti in &frame.tangents {
                        for ni in nv {
                            push_pair(&mut members, ti, ni, Scope::Global, "tn_moment");
                        }
                    }
                }
                for i in 0..nv.len() {
                    for j in i..nv.len() {
                        push_pair(&mut members, &nv[j], &nv[i], Scope::Global, "nn_moment");
                    }
                }
                if l > k {
                    for facet in f.containing_facets() {
                        let nf = frames.facet_normal(&facet);
                        for ti in &frame.tangents {
                            push_pair(
                                &mut members,
                                ti,
                                &nf,
                                Scope::Facewise { facet: facet.clone() },
                                "facewise_tn_moment",
                            );
                        }
                    }
                }
            }
        }
    }
    if matches!(family, Family::Face | Family::Traceless | Family::Symmetric) {
        let full = SubSimplexId::full(n);
        for b in element::bubble_space(family, t, r, frames)?.members {
            let w = BernsteinPoly::monomial(full.clone(), b.alpha, Q::one());
            members.push(DofFunctional::single(&full, Scope::Interior, w, b.coeff, "bubble_moment"));
        }
    } else {
        // Interior lattice moments live on T itself.
        let full = SubSimplexId::full(n);
        for w in site_weights(&full, r) {
            if c == 1 {
                members.push(DofFunctional::single(&full, Scope::Interior, w, vec![Q::one()], "lattice_moment"));
            } else {
                for comp in 0..n {
                    members.push(DofFunctional::single(
                        &full,
                        Scope::Interior,
                        w.clone(),
                        unit(comp),
                        "lattice_moment",
                    ));
                }
            }
        }
    }
    Ok(DofSet { family, n, r, k, members })
}

/// `N_ij = N_i(φ_j)` with measures divided out.
pub fn dof_matrix(dofs: &DofSet, basis: &SpaceBasis) -> Result<RationalMatrix> {
    if dofs.family.ncomp(dofs.n) != basis.ncomp() || dofs.n != basis.n || dofs.r != basis.r {
        return Err(Error::DimensionMismatch("DoF set and basis describe different spaces".into()));
    }
    let mut m = RationalMatrix::zeros(dofs.len(), basis.len());
    for (i, d) in dofs.members.iter().enumerate() {
        for (j, sf) in basis.members.iter().enumerate() {
            let v = d.apply_to(sf);
            if !v.is_zero() {
                m.set(i, j, v);
            }
        }
    }
    Ok(m)
}

/// Local element: shape basis plus DoFs.
#[derive(Clone, Debug)]
pub struct Element {
    pub simplex: Simplex,
    pub basis: SpaceBasis,
    pub dofs: DofSet,
}

impl Element {
    pub fn new(family: Family, t: &Simplex, r: usize, k: i32, frames: &dyn SiteFrames) -> Result<Self> {
        let dofs = build_dofs(family, t, r, k, frames)?;
        let basis = element::decompose(family, t, r, frames)?;
        Ok(Self { simplex: t.clone(), basis, dofs })
    }

    pub fn matrix(&self) -> Result<RationalMatrix> {
        dof_matrix(&self.dofs, &self.basis)
    }

    /// Coefficients of the nodal basis in the shape basis: columns of `N⁻¹`.
    pub fn nodal_coefficients(&self) -> Result<RationalMatrix> {
        self.matrix()?.inverse().ok_or_else(|| Error::Inadmissible("DoF matrix is singular".into()))
    }

    /// Flat coefficient vectors of the nodal basis functions.
    pub fn nodal_flats(&self) -> Result<Vec<Vector>> {
        let c = self.nodal_coefficients()?;
        let phi = RationalMatrix::from_cols(&self.basis.flats(), self.basis.flat_dim());
        let m = phi.mul(&c);
        Ok((0..m.ncols()).map(|j| m.col(j)).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub family: Family,
    pub n: usize,
    pub r: usize,
    pub k: i32,
    pub dofs: usize,
    pub shape_dim: usize,
    pub rank: usize,
    pub invertible: bool,
    pub pivot_digest: String,
    /// First group of DoFs whose rows become dependent on the rows before them.
    pub first_deficient_group: Option<String>,
}

impl Certificate {
    pub fn to_check(&self) -> Check {
        Check::new(
            format!("unisolvence/{}/n{}/r{}/k{}", self.family.name(), self.n, self.r, self.k),
            CheckStatus::from_bool(self.invertible),
            serde_json::to_value(self).expect("serializable"),
        )
    }
}

pub fn certify(dofs: &DofSet, basis: &SpaceBasis) -> Result<Certificate> {
    let m = dof_matrix(dofs, basis)?;
    let rows = m.row_vecs();
    let trace = linalg::pivot_trace(&rows, m.ncols());
    let square = m.nrows() == m.ncols();
    let invertible = square && trace.rank == m.nrows();
    let mut first = None;
    if !invertible {
        let mut end = 0;
        for (key, start, len) in dofs.groups() {
            end = start + len;
            if linalg::rank(&rows[..end], m.ncols()) < end {
                first = Some(key);
                break;
            }
        }
        if first.is_none() && end == rows.len() && !square {
            first = Some(format!("count mismatch: {} DoFs for dimension {}", m.nrows(), m.ncols()));
        }
    }
    Ok(Certificate {
        family: dofs.family,
        n: dofs.n,
        r: dofs.r,
        k: dofs.k,
        dofs: m.nrows(),
        shape_dim: m.ncols(),
        rank: trace.rank,
        invertible,
        pivot_digest: trace.digest,
        first_deficient_group: first,
    })
}

pub fn certify_unisolvence(
    family: Family,
    t: &Simplex,
    r: usize,
    k: i32,
    frames: &dyn SiteFrames,
) -> Result<Certificate> {
    let e = Element::new(family, t, r, k, frames)?;
    certify(&e.dofs, &e.basis)
}

/// Lagrange: `N_i(φ_j) = 0` when `dim site_i ≤ dim site_j` and the sites differ.
pub fn block_lower_triangular(dofs: &DofSet, basis: &SpaceBasis) -> Result<bool> {
    let m = dof_matrix(dofs, basis)?;
    for (i, d) in dofs.members.iter().enumerate() {
        for (j, sf) in basis.members.iter().enumerate() {
            if d.site != sf.site && d.site.dim() <= sf.site.dim() && !m.get(i, j).is_zero() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Non-interior DoFs on `g` vanish on tangential members at sites `f` with `dim f ≥ dim g`.
pub fn tangential_annihilation(dofs: &DofSet, basis: &SpaceBasis) -> bool {
    dofs.members.iter().filter(|d| d.scope != Scope::Interior).all(|d| {
        basis
            .members
            .iter()
            .filter(|m| m.part == Part::Tangential && m.site.dim() >= d.site.dim())
            .all(|m| d.apply_to(m).is_zero())
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuotientMode {
    ModP0,
    ModP1,
}

impl QuotientMode {
    pub fn s(self) -> usize {
        match self {
            Self::ModP0 => 0,
            Self::ModP1 => 1,
        }
    }

    /// Smallest degree at which the quotient DoFs are unisolvent; `n` is the element dimension.
    pub fn threshold(self, n: usize, k: i32) -> usize {
        let base = (k + 2).max(0) as usize;
        match self {
            Self::ModP1 if k == n as i32 - 2 => base + 1,
            _ => base,
        }
    }
}

/// `(𝔹_{r,k+1}(F)/P_s(F)) ⊕ P_s(F)` on an abstract facet of an n-simplex.
#[derive(Clone, Debug)]
pub struct QuotientSpace {
    pub facet: SubSimplexId,
    pub r: usize,
    pub k: i32,
    pub mode: QuotientMode,
    pub bubble: Vec<BernsteinPoly>,
    pub complement: Vec<BernsteinPoly>,
    pub ps: Vec<BernsteinPoly>,
}

impl QuotientSpace {
    /// Complement followed by `P_s`.
    pub fn weights(&self) -> Vec<BernsteinPoly> {
        let mut w = self.complement.clone();
        w.extend(self.ps.iter().cloned());
        w
    }
}

/// Monomials of `P_r(F)` whose support has at least `k + 2` vertices.
pub fn face_bubble_monomials(facet: &SubSimplexId, r: usize, k: i32) -> Vec<BernsteinPoly> {
    let min_support = (k + 2).max(0) as usize;
    MultiIndex::lattice(facet.len(), r)
        .into_iter()
        .filter(|a| a.support_size() >= min_support)
        .map(|a| BernsteinPoly::monomial(facet.clone(), a, Q::one()))
        .collect()
}

fn l2_on(p: &BernsteinPoly, q: &BernsteinPoly) -> Q {
    let f = p.domain().clone();
    p.multiply(q).and_then(|pq| pq.integrate(&f)).expect("same facet")
}

/// Builds the quotient space on `facet` (a vertex set of size `n`, given in the parent numbering).
pub fn quotient_face_space(facet: &SubSimplexId, r: usize, k: i32, mode: QuotientMode) -> Result<QuotientSpace> {
    let n = facet.parent_dim();
    if facet.len() != n {
        return Err(Error::Domain(format!("{facet} is not a facet")));
    }
    if k < -1 || k > n as i32 - 2 {
        return Err(Error::Inadmissible(format!("k = {k} outside [-1, {}]", n as i32 - 2)));
    }
    let bubble = face_bubble_monomials(facet, r, k);
    let ps: Vec<BernsteinPoly> = MultiIndex::lattice(facet.len(), mode.s())
        .into_iter()
        .map(|a| BernsteinPoly::monomial(facet.clone(), a, Q::one()))
        .collect();
    let rows: Vec<Vector> = ps.iter().map(|q| bubble.iter().map(|v| l2_on(v, q)).collect()).collect();
    let complement = linalg::nullspace(&rows, bubble.len())
        .into_iter()
        .map(|c| {
            let terms = bubble.iter().zip(&c).map(|(b, x)| {
                let (a, _) = b.terms().next().unwrap();
                (*a, x.clone())
            });
            BernsteinPoly::from_terms(facet.clone(), r, terms)
        })
        .collect();
    Ok(QuotientSpace { facet: facet.clone(), r, k, mode, bubble, complement, ps })
}

/// Unisolvence of lattice moments on `f ⊆ F` (dim ≤ k) with the quotient moments on `F`, for `P_r(F)`.
pub fn verify_quotient_unisolvence(n: usize, r: usize, k: i32, mode: QuotientMode) -> Result<Check> {
    let facet = SubSimplexId::facet(n, n);
    let q = quotient_face_space(&facet, r, k, mode)?;
    let mut functionals: Vec<(SubSimplexId, BernsteinPoly)> = Vec::new();
    for l in 0..=k.max(-1) {
        for f in facet.faces(l as usize) {
            for w in site_weights_on(&f, r) {
                functionals.push((f.clone(), w));
            }
        }
    }
    for w in q.weights() {
        functionals.push((facet.clone(), w));
    }
    let lat = MultiIndex::lattice(facet.len(), r);
    let rows: Vec<Vector> = functionals
        .iter()
        .map(|(f, w)| {
            lat.iter()
                .map(|a| {
                    let v = BernsteinPoly::monomial(facet.clone(), *a, Q::one());
                    let vf = v.restrict(f).expect("sub-simplex of facet");
                    vf.multiply(w).and_then(|p| p.integrate(f)).expect("same site")
                })
                .collect()
        })
        .collect();
    let rank = linalg::rank(&rows, lat.len());
    let orthogonal = q.complement.iter().all(|c| q.ps.iter().all(|p| l2_on(c, p).is_zero()));
    let ok = rank == lat.len() && rows.len() == lat.len() && orthogonal;
    let threshold = mode.threshold(n, k);
    let status = if r < threshold { CheckStatus::SkippedBelowThreshold } else { CheckStatus::from_bool(ok) };
    Ok(Check::new(
        format!(
            "quotient/{}/n{n}/r{r}/k{k}",
            match mode {
                QuotientMode::ModP0 => "p0",
                QuotientMode::ModP1 => "p1",
            }
        ),
        status,
        json!({
            "bubble_dim": q.bubble.len(),
            "complement_dim": q.complement.len(),
            "functionals": rows.len(),
            "dim_pr_facet": lat.len(),
            "rank": rank,
            "complement_orthogonal": orthogonal,
            "unisolvent": ok,
            "threshold": threshold,
        }),
    ))
}

fn site_weights_on(f: &SubSimplexId, r: usize) -> Vec<BernsteinPoly> {
    site_weights(f, r)
}

/// `ND_{r−2}(F)` in coordinates `y_a = λ_{F(a)}`, `a = 1..m`: one weight polynomial per coordinate.
pub fn nedelec_face_space(facet: &SubSimplexId, r: usize) -> Vec<Vec<BernsteinPoly>> {
    let m = facet.len() - 1;
    let mut out = Vec::new();
    if r < 2 {
        return out;
    }
    let zero = |deg| BernsteinPoly::zero(facet.clone(), deg);
    for a in 0..m {
        for mono in MultiIndex::lattice(facet.len(), r - 2) {
            let mut q = vec![zero(r - 2); m];
            q[a] = BernsteinPoly::monomial(facet.clone(), mono, Q::one());
            out.push(q);
        }
    }
    // Homogeneous degree r−1 in y (no λ_{F(0)}), with q·y = 0.
    let ylat: Vec<MultiIndex> = MultiIndex::lattice(facet.len(), r - 1).into_iter().filter(|a| a.get(0) == 0).collect();
    let top: Vec<MultiIndex> = MultiIndex::lattice(facet.len(), r).into_iter().filter(|a| a.get(0) == 0).collect();
    let unknowns = m * ylat.len();
    let mut rows = vec![rational::zeros(unknowns); top.len()];
    for a in 0..m {
        for (j, mono) in ylat.iter().enumerate() {
            let g = mono.add(&MultiIndex::unit(facet.len(), a + 1));
            let row = top.binary_search(&g).unwrap();
            rows[row][a * ylat.len() + j] = Q::one();
        }
    }
    for c in linalg::nullspace(&rows, unknowns) {
        let q = (0..m)
            .map(|a| {
                let terms = ylat.iter().enumerate().map(|(j, mono)| (*mono, c[a * ylat.len() + j].clone()));
                BernsteinPoly::from_terms(facet.clone(), r - 1, terms)
            })
            .collect();
        out.push(q);
    }
    out
}

/// Result of replacing the facewise DoFs on one facet.
#[derive(Clone, Debug)]
pub struct MergeOutcome {
    pub facet: SubSimplexId,
    pub old: usize,
    pub new: usize,
    pub span_equal: bool,
    pub merged: DofSet,
}

/// Replacement DoFs on `facet` in terms of the facet normal.
pub fn merged_face_functionals(
    family: Family,
    t: &Simplex,
    r: usize,
    k: i32,
    facet: &SubSimplexId,
    frames: &dyn SiteFrames,
) -> Result<Vec<DofFunctional>> {
    let n = t.dim();
    let nf = frames.facet_normal(facet);
    let scope = Scope::Facewise { facet: facet.clone() };
    let mk = |w: BernsteinPoly, dir: Vector, label| DofFunctional::single(facet, scope.clone(), w, dir, label);
    let out = match family {
        Family::Face if k == -1 => MultiIndex::lattice(facet.len(), r)
            .into_iter()
            .map(|a| mk(BernsteinPoly::monomial(facet.clone(), a, Q::one()), nf.clone(), "merged_face_moment"))
            .collect(),
        Family::Face => quotient_face_space(facet, r, k, QuotientMode::ModP0)?
            .weights()
            .into_iter()
            .map(|w| mk(w, nf.clone(), "merged_face_moment"))
            .collect(),
        Family::Traceless => {
            let ws = quotient_face_space(facet, r, k, QuotientMode::ModP1)?.weights();
            let mut v = Vec::new();
            for comp in 0..n {
                let dir = tensor::outer(&rational::unit(n, comp), &nf);
                for w in &ws {
                    v.push(mk(w.clone(), dir.clone(), "merged_face_moment"));
                }
            }
            v
        }
        Family::Symmetric if k == 0 => {
            // Tangential gradients of the facet's barycentric coordinates.
            let nn = rational::dot(&nf, &nf);
            let g: Vec<Vector> = facet.indices()[1..]
                .iter()
                .map(|&i| {
                    let gi = t.grad(i);
                    let c = rational::dot(gi, &nf) / &nn;
                    rational::sub(gi, &rational::scale(&nf, &c))
                })
                .collect();
            nedelec_face_space(facet, r)
                .into_iter()
                .map(|q| DofFunctional {
                    site: facet.clone(),
                    kind: DofKind::Moment,
                    scope: scope.clone(),
                    terms: q
                        .into_iter()
                        .zip(&g)
                        .filter(|(w, _)| !w.is_zero())
                        .map(|(w, ga)| DofTerm {
                            weight: w,
                            direction: tensor::outer(ga, &nf),
                            pair: Some((ga.clone(), nf.clone())),
                        })
                        .collect(),
                    label: "merged_nd_moment",
                })
                .collect()
        }
        _ => {
            return Err(Error::Unsupported(format!("no face merge for family {} with k = {k}", family.name())));
        }
    };
    Ok(out)
}

/// Replaces the facewise DoFs on `facet` and checks the span of functionals is unchanged.
pub fn merge_face_dofs(element: &Element, facet: &SubSimplexId, frames: &dyn SiteFrames) -> Result<MergeOutcome> {
    let dofs = &element.dofs;
    let new = merged_face_functionals(dofs.family, &element.simplex, dofs.r, dofs.k, facet, frames)?;
    let on_facet = |d: &DofFunctional| matches!(&d.scope, Scope::Facewise { facet: g } if g == facet);
    let old: Vec<&DofFunctional> = dofs.members.iter().filter(|d| on_facet(d)).collect();
    if old.is_empty() {
        return Err(Error::Domain(format!("no facewise DoFs on {facet}")));
    }
    let shared: Vec<&DofFunctional> = dofs
        .members
        .iter()
        .filter(|d| !on_facet(d) && d.scope == Scope::Global && d.site.is_subset_of(facet))
        .collect();
    let row = |d: &DofFunctional| -> Vector { element.basis.members.iter().map(|m| d.apply_to(m)).collect() };
    let dim = element.basis.len();
    let mut a: Vec<Vector> = shared.iter().map(|d| row(d)).collect();
    let mut b = a.clone();
    a.extend(old.iter().map(|d| row(d)));
    b.extend(new.iter().map(row));
    let span_equal = old.len() == new.len() && linalg::subspace_equal(&a, &b, dim);
    let mut members: Vec<DofFunctional> = Vec::with_capacity(dofs.len());
    let mut inserted = false;
    for d in &dofs.members {
        if on_facet(d) {
            if !inserted {
                members.extend(new.iter().cloned());
                inserted = true;
            }
        } else {
            members.push(d.clone());
        }
    }
    Ok(MergeOutcome {
        facet: facet.clone(),
        old: old.len(),
        new: new.len(),
        span_equal,
        merged: DofSet { members, ..dofs.clone() },
    })
}

/// Smallest degree for which the merged face DoFs are a valid replacement.
pub fn merge_threshold(family: Family, n: usize, k: i32) -> usize {
    match family {
        Family::Face => QuotientMode::ModP0.threshold(n, k),
        Family::Traceless => QuotientMode::ModP1.threshold(n, k),
        _ => 2,
    }
}

/// Merges on `facet` and certifies the result; below threshold the outcome is reported but not judged.
pub fn verify_merge(element: &Element, facet: &SubSimplexId, frames: &dyn SiteFrames) -> Result<Check> {
    let d = &element.dofs;
    let m = merge_face_dofs(element, facet, frames)?;
    let cert = certify(&m.merged, &element.basis)?;
    let ok = m.span_equal && cert.invertible;
    let threshold = merge_threshold(d.family, d.n, d.k);
    let status = if d.r < threshold { CheckStatus::SkippedBelowThreshold } else { CheckStatus::from_bool(ok) };
    Ok(Check::new(
        format!("merge/{}/n{}/r{}/k{}/{}", d.family.name(), d.n, d.r, d.k, facet),
        status,
        json!({
            "facet": facet.to_string(),
            "replaced": m.old,
            "inserted": m.new,
            "span_equal": m.span_equal,
            "merged_unisolvent": cert.invertible,
            "pivot_digest": cert.pivot_digest,
            "threshold": threshold,
        }),
    ))
}

/// Closed-form local DoF count per site class, for cross-checking.
pub fn local_dof_count(family: Family, n: usize, r: usize) -> usize {
    let b = |a: usize, c: i64| rational::binomial_i(a as i64, c);
    let cnt = |l: usize| rational::binomial(n + 1, l + 1);
    let bubble = element::bubble_dim_formula(family, n, r);
    match family {
        Family::Lagrange => bernstein::dim_polynomials(n, r),
        Family::VectorLagrange => n * bernstein::dim_polynomials(n, r),
        Family::Face => {
            let mut s = bubble;
            // Global normals and facewise normals both number n − ℓ per site.
            for l in 0..n {
                s += cnt(l) * (n - l) * b(r - 1, l as i64);
            }
            s
        }
        Family::Traceless | Family::Symmetric => {
            let space = family.space().unwrap();
            let mut s = bubble + cnt(0) * space.dim(n);
            for l in 1..n {
                s += cnt(l) * tensor::split_dims(space, n, l).1 * b(r - 1, l as i64);
            }
            s
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::{FrameConvention, LocalFrames};

    #[test]
    fn p1_interval_is_identity() {
        let t = Simplex::reference(1);
        let fr = LocalFrames::new(&t, FrameConvention::EdgeTangentsFaceNormals);
        let e = Element::new(Family::Lagrange, &t, 1, -1, &fr).unwrap();
        assert_eq!(e.matrix().unwrap(), RationalMatrix::identity(2));
    }

    #[test]
    fn counts_match_closed_forms() {
        let t = Simplex::reference(3);
        let fr = LocalFrames::new(&t, FrameConvention::Orthogonalized);
        for (fam, r, k) in
            [(Family::Face, 2, -1), (Family::Face, 3, 1), (Family::Traceless, 2, 0), (Family::Symmetric, 3, 1)]
        {
            let d = build_dofs(fam, &t, r, k, &fr).unwrap();
            assert_eq!(d.len(), element::full_dim(fam, 3, r));
            assert_eq!(d.len(), local_dof_count(fam, 3, r));
        }
    }

    #[test]
    fn quotient_example() {
        let facet = SubSimplexId::facet(3, 3);
        let q = quotient_face_space(&facet, 2, 0, QuotientMode::ModP0).unwrap();
        assert_eq!(q.bubble.len(), 3);
        assert_eq!(q.complement.len(), 2);
        assert!(verify_quotient_unisolvence(3, 2, 0, QuotientMode::ModP0).unwrap().passed());
    }

    #[test]
    fn nedelec_dims() {
        for r in 2..5 {
            assert_eq!(nedelec_face_space(&SubSimplexId::facet(3, 3), r).len(), r * r - 1);
            assert_eq!(nedelec_face_space(&SubSimplexId::facet(2, 2), r).len(), r - 1);
        }
    }
}
