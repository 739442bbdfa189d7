//! Shape-function spaces, their geometric decompositions, traces, bubbles and div.
//!
//! Fields are flattened as `lattice_index * ncomp + comp` over the degree-`r`
//! lattice of `T` in ascending lexicographic order.

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bernstein::{self, BernsteinPoly, Lattice, MultiIndex};
use crate::error::{Error, Result};
use crate::linalg::{self, RationalMatrix};
use crate::rational::{self, Vector, Q};
use crate::report::{Check, CheckStatus};
use crate::simplex::{all_subsimplices, Simplex, SiteFrames, SubSimplexId};
use crate::tensor::{self, MatrixSpace, VectorField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Lagrange,
    VectorLagrange,
    Face,
    Traceless,
    Symmetric,
}

impl Family {
    pub const ALL: [Self; 5] = [Self::Lagrange, Self::VectorLagrange, Self::Face, Self::Traceless, Self::Symmetric];

    pub fn name(self) -> &'static str {
        match self {
            Self::Lagrange => "lagrange",
            Self::VectorLagrange => "vector",
            Self::Face => "face",
            Self::Traceless => "traceless",
            Self::Symmetric => "symmetric",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == s)
    }

    /// Value space; `None` for scalars.
    pub fn space(self) -> Option<MatrixSpace> {
        match self {
            Self::Lagrange => None,
            Self::VectorLagrange | Self::Face => Some(MatrixSpace::Vector),
            Self::Traceless => Some(MatrixSpace::Traceless),
            Self::Symmetric => Some(MatrixSpace::Symmetric),
        }
    }

    pub fn ncomp(self, n: usize) -> usize {
        self.space().map_or(1, |s| s.ncomp(n))
    }

    /// Dimension of the pointwise value space.
    pub fn value_dim(self, n: usize) -> usize {
        self.space().map_or(1, |s| s.dim(n))
    }

    /// Components of `div` (scalar for vector fields, row-wise for matrices).
    pub fn div_ncomp(self, n: usize) -> usize {
        match self.space() {
            Some(s) if s.is_matrix() => n,
            _ => 1,
        }
    }

    pub fn is_hdiv(self) -> bool {
        matches!(self, Self::Face | Self::Traceless | Self::Symmetric)
    }

    pub fn check_dim(self, n: usize) -> Result<()> {
        let ok = match self {
            Self::Lagrange | Self::VectorLagrange | Self::Face => (1..=4).contains(&n),
            Self::Traceless | Self::Symmetric => (2..=4).contains(&n),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Unsupported(format!("family {} in dimension {n}", self.name())))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Lattice,
    Tangential,
    Normal,
}

/// `λ^α ⊗ coeff` on the parent simplex, tagged with its site and part.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShapeFunction {
    pub site: SubSimplexId,
    pub part: Part,
    pub alpha: MultiIndex,
    pub coeff: Vector,
}

impl ShapeFunction {
    pub fn scalar(&self) -> BernsteinPoly {
        BernsteinPoly::monomial(SubSimplexId::full(self.site.parent_dim()), self.alpha, Q::from_integer(1.into()))
    }

    pub fn flat(&self, lattice: &Lattice) -> Vector {
        let c = self.coeff.len();
        let mut v = rational::zeros(lattice.size() * c);
        let base = lattice.index_of(&self.alpha).expect("degree matches lattice") * c;
        for (k, x) in self.coeff.iter().enumerate() {
            v[base + k] = x.clone();
        }
        v
    }
}

/// Contiguous block of members with the same site and part.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Group {
    pub site: SubSimplexId,
    pub part: Part,
    pub start: usize,
    pub len: usize,
}

#[derive(Clone, Debug)]
pub struct SpaceBasis {
    pub family: Family,
    pub n: usize,
    pub r: usize,
    pub members: Vec<ShapeFunction>,
    pub groups: Vec<Group>,
    pub lattice: Lattice,
}

impl SpaceBasis {
    pub fn ncomp(&self) -> usize {
        self.family.ncomp(self.n)
    }

    pub fn flat_dim(&self) -> usize {
        self.lattice.size() * self.ncomp()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn flats(&self) -> Vec<Vector> {
        self.members.iter().map(|m| m.flat(&self.lattice)).collect()
    }

    fn push_group(&mut self, site: &SubSimplexId, part: Part, items: Vec<ShapeFunction>) {
        if items.is_empty() {
            return;
        }
        self.groups.push(Group { site: site.clone(), part, start: self.members.len(), len: items.len() });
        self.members.extend(items);
    }

    /// The group blocks as separate spanning sets of flat vectors.
    pub fn group_spans(&self) -> Vec<Vec<Vector>> {
        self.groups
            .iter()
            .map(|g| self.members[g.start..g.start + g.len].iter().map(|m| m.flat(&self.lattice)).collect())
            .collect()
    }
}

/// Closed form of `dim P_r(T; X)`.
pub fn full_dim(family: Family, n: usize, r: usize) -> usize {
    family.value_dim(n) * bernstein::dim_polynomials(n, r)
}

/// `b_f λ_f^β` exponents on `T` for all `|β| = r − ℓ − 1`.
pub fn site_monomials(f: &SubSimplexId, r: usize) -> Vec<MultiIndex> {
    let l = f.dim();
    if r < l + 1 {
        return Vec::new();
    }
    let len = f.parent_dim() + 1;
    let bubble: Vec<u8> = (0..len).map(|i| f.contains(i) as u8).collect();
    let b = MultiIndex::new(&bubble);
    MultiIndex::lattice(f.len(), r - l - 1)
        .into_iter()
        .map(|beta| b.add(&bernstein::extend_index(&beta, f.indices(), len)))
        .collect()
}

/// `⊕_f [𝒯ᶠ_r ⊕ 𝒩ᶠ_r]`, grouped by site (dimension, then lexicographic) and part.
pub fn decompose(family: Family, t: &Simplex, r: usize, frames: &dyn SiteFrames) -> Result<SpaceBasis> {
    if r < 1 {
        return Err(Error::Domain("degree must be at least 1".into()));
    }
    let n = t.dim();
    family.check_dim(n)?;
    let mut basis =
        SpaceBasis { family, n, r, members: Vec::new(), groups: Vec::new(), lattice: Lattice::new(n + 1, r) };
    for f in all_subsimplices(n) {
        let monos = site_monomials(&f, r);
        if monos.is_empty() {
            continue;
        }
        let make = |part: Part, coeffs: &[Vector]| -> Vec<ShapeFunction> {
            let mut items = Vec::with_capacity(coeffs.len() * monos.len());
            for c in coeffs {
                for a in &monos {
                    items.push(ShapeFunction { site: f.clone(), part, alpha: *a, coeff: c.clone() });
                }
            }
            items
        };
        match family.space() {
            None => {
                let items = make(Part::Lattice, &[vec![Q::from_integer(1.into())]]);
                basis.push_group(&f, Part::Lattice, items);
            }
            Some(space) => {
                let split = tensor::tn_split(&frames.frame(&f), space)?;
                let tg = make(Part::Tangential, &split.tangential);
                let nm = make(Part::Normal, &split.normal);
                basis.push_group(&f, Part::Tangential, tg);
                basis.push_group(&f, Part::Normal, nm);
            }
        }
    }
    Ok(basis)
}

/// Checks the decomposition is direct and spans `P_r(T; X)`.
pub fn verify_decomposition(basis: &SpaceBasis) -> Check {
    let dim = basis.flat_dim();
    let expected = full_dim(basis.family, basis.n, basis.r);
    let spans = basis.group_spans();
    let direct = linalg::is_direct_sum(&spans, dim);
    let rank = linalg::rank(&basis.flats(), dim);
    let value_ok = basis.members.iter().all(|m| match basis.family.space() {
        Some(s) => s.contains(basis.n, &m.coeff),
        None => true,
    });
    let ok = direct && rank == expected && basis.len() == expected && value_ok;
    Check::new(
        format!("decomposition/{}/n{}/r{}", basis.family.name(), basis.n, basis.r),
        CheckStatus::from_bool(ok),
        json!({
            "members": basis.len(),
            "expected_dim": expected,
            "rank": rank,
            "direct_sum": direct,
            "groups": basis.groups.len(),
        }),
    )
}

/// Facet normal used by the local trace checks: `∇λ_i` for `F_i`.
fn local_normal(t: &Simplex, facet_index: usize) -> Vector {
    t.grad(facet_index).clone()
}

/// `tr^div` onto `F`: one polynomial on `F` per output component.
pub fn trace_div(family: Family, sf: &ShapeFunction, facet: &SubSimplexId, n_f: &[Q]) -> Result<Vec<BernsteinPoly>> {
    let n = facet.parent_dim();
    if facet.dim() + 1 != n {
        return Err(Error::Domain(format!("{facet} is not a facet")));
    }
    let p = sf.scalar().restrict(facet)?;
    let vals: Vec<Q> = match family.space() {
        None => return Err(Error::Unsupported("no normal trace for scalar fields".into())),
        Some(MatrixSpace::Vector) => vec![rational::dot(&sf.coeff, n_f)],
        Some(_) => tensor::mat_vec(&sf.coeff, n_f),
    };
    Ok(vals.iter().map(|v| p.scale(v)).collect())
}

/// Matrix of `v ↦ (tr_F v)_F` over all facets, on flat fields.
pub fn trace_matrix(family: Family, t: &Simplex, r: usize) -> RationalMatrix {
    let n = t.dim();
    let lat = Lattice::new(n + 1, r);
    let flat = Lattice::new(n, r);
    let c = family.ncomp(n);
    let out = family.div_ncomp(n);
    let rows_per = flat.size() * out;
    let mut m = RationalMatrix::zeros((n + 1) * rows_per, lat.size() * c);
    for i in 0..=n {
        let facet = SubSimplexId::facet(i, n);
        let nf = local_normal(t, i);
        for (ai, a) in lat.points.iter().enumerate() {
            let Some(b) = bernstein::restrict_index(a, facet.indices(), r) else { continue };
            let bi = flat.index_of(&b).unwrap();
            for o in 0..out {
                let row = i * rows_per + bi * out + o;
                if out == 1 {
                    for k in 0..c {
                        m.set(row, ai * c + k, nf[k].clone());
                    }
                } else {
                    for k in 0..n {
                        m.set(row, ai * c + o * n + k, nf[k].clone());
                    }
                }
            }
        }
    }
    m
}

/// `⊕_{ℓ≥1} ⊕_f 𝒯ᶠ_r(T; X)`.
pub fn bubble_space(family: Family, t: &Simplex, r: usize, frames: &dyn SiteFrames) -> Result<SpaceBasis> {
    let n = t.dim();
    let mut out = SpaceBasis { family, n, r, members: Vec::new(), groups: Vec::new(), lattice: Lattice::new(n + 1, r) };
    if r == 0 {
        return Ok(out);
    }
    let full = decompose(family, t, r, frames)?;
    for g in &full.groups {
        if g.part == Part::Tangential && g.site.dim() >= 1 {
            out.push_group(&g.site, g.part, full.members[g.start..g.start + g.len].to_vec());
        }
    }
    Ok(out)
}

/// Kernel of the full trace map equals the bubble span, and the trace is injective on normal parts.
pub fn verify_bubble_characterization(family: Family, t: &Simplex, r: usize, frames: &dyn SiteFrames) -> Result<Check> {
    let n = t.dim();
    let name = format!("bubbles/{}/n{n}/r{r}", family.name());
    if !family.is_hdiv() && family != Family::VectorLagrange {
        return Err(Error::Unsupported("bubble characterization needs a vector or matrix family".into()));
    }
    if r < 2 {
        // Here the whole trace kernel must vanish.
        let space = family.space().expect("vector or matrix family");
        let flats = if r == 0 { space.canonical_basis(n) } else { decompose(family, t, r, frames)?.flats() };
        let phi = RationalMatrix::from_cols(&flats, Lattice::new(n + 1, r).size() * family.ncomp(n));
        let kernel = trace_matrix(family, t, r).mul(&phi).nullspace().len();
        let bubbles = if r == 0 { 0 } else { bubble_space(family, t, r, frames)?.len() };
        return Ok(Check::new(
            name,
            CheckStatus::from_bool(kernel == 0 && bubbles == 0),
            json!({"kernel_dim": kernel, "bubble_dim": bubbles, "bubble_dim_formula": bubble_dim_formula(family, n, r)}),
        ));
    }
    let full = decompose(family, t, r, frames)?;
    let bubbles = bubble_space(family, t, r, frames)?;
    let tr = trace_matrix(family, t, r);
    let phi = RationalMatrix::from_cols(&full.flats(), full.flat_dim());
    let tphi = tr.mul(&phi);
    let kernel: Vec<Vector> = tphi.nullspace().iter().map(|k| phi.mul_vec(k)).collect();
    let bflats = bubbles.flats();
    let equal = linalg::subspace_equal(&kernel, &bflats, full.flat_dim());
    let independent = linalg::rank(&bflats, full.flat_dim()) == bflats.len();

    let normal_cols: Vec<usize> = (0..full.len()).filter(|&j| full.members[j].part == Part::Normal).collect();
    let tn: Vec<Vector> = normal_cols.iter().map(|&j| tphi.col(j)).collect();
    let normal_rank = linalg::rank(&tn, tphi.nrows());
    let image_rank = tphi.rank();
    let tangential_zero = (0..full.len())
        .filter(|&j| full.members[j].part == Part::Tangential)
        .all(|j| tphi.col(j).iter().all(Zero::is_zero));
    let expected = bubble_dim_formula(family, n, r);
    let ok = equal
        && independent
        && tangential_zero
        && normal_rank == normal_cols.len()
        && normal_rank == image_rank
        && bubbles.len() == expected;
    let first = if !tangential_zero {
        Some("tangential member with nonzero trace")
    } else if !equal {
        Some("kernel differs from bubble span")
    } else if normal_rank != normal_cols.len() {
        Some("trace not injective on normal members")
    } else if normal_rank != image_rank {
        Some("normal traces do not exhaust the trace image")
    } else if bubbles.len() != expected {
        Some("bubble count differs from closed form")
    } else {
        None
    };
    Ok(Check::new(
        name,
        CheckStatus::from_bool(ok),
        json!({
            "kernel_dim": kernel.len(),
            "bubble_dim": bubbles.len(),
            "bubble_dim_formula": expected,
            "normal_members": normal_cols.len(),
            "normal_trace_rank": normal_rank,
            "trace_image_rank": image_rank,
            "first_violation": first,
        }),
    ))
}

/// `Σ_{ℓ=1}^n C(n+1, ℓ+1) dim𝒯ᶠ C(r−1, ℓ)`.
pub fn bubble_dim_formula(family: Family, n: usize, r: usize) -> usize {
    let Some(space) = family.space() else { return 0 };
    if r == 0 {
        return 0;
    }
    (1..=n)
        .map(|l| {
            rational::binomial(n + 1, l + 1)
                * tensor::split_dims(space, n, l).0
                * rational::binomial_i(r as i64 - 1, l as i64)
        })
        .sum()
}

/// Linear map `div` from flat degree-`r` fields to flat degree-`r−1` fields.
pub fn div_matrix(family: Family, t: &Simplex, r: usize) -> RationalMatrix {
    let n = t.dim();
    let lat = Lattice::new(n + 1, r);
    let low = Lattice::new(n + 1, r.saturating_sub(1));
    let c = family.ncomp(n);
    let out = family.div_ncomp(n);
    let mut m = RationalMatrix::zeros(low.size() * out, lat.size() * c);
    if r == 0 {
        return m;
    }
    for (ai, a) in lat.points.iter().enumerate() {
        for i in 0..=n {
            let Some(b) = a.minus_unit(i) else { continue };
            let bi = low.index_of(&b).unwrap();
            let k = Q::from_integer(a.get(i).into());
            let g = t.grad(i);
            for o in 0..out {
                for d in 0..n {
                    if g[d].is_zero() {
                        continue;
                    }
                    // Vector: ∂_d u_d. Matrix: (div A)_o gets ∂_d A_{o d}.
                    let col = if out == 1 { ai * c + d } else { ai * c + o * n + d };
                    let row = bi * out + o;
                    let v = m.get(row, col) + &k * &g[d];
                    m.set(row, col, v);
                }
            }
        }
    }
    m
}

/// `∫_T λ^α λ^β / |T|` over the degree-`r1` × degree-`r2` lattices.
pub fn gram(n: usize, r1: usize, r2: usize) -> RationalMatrix {
    let a = Lattice::new(n + 1, r1);
    let b = Lattice::new(n + 1, r2);
    let mut m = RationalMatrix::zeros(a.size(), b.size());
    for (i, x) in a.points.iter().enumerate() {
        for (j, y) in b.points.iter().enumerate() {
            m.set(i, j, bernstein::monomial_average(x.add(y).entries()));
        }
    }
    m
}

/// Flat coefficient vector of a polynomial vector field.
pub fn field_flat(field: &VectorField, degree: usize) -> Vector {
    let lat = Lattice::new(field[0].domain().len(), degree);
    let c = field.len();
    let mut out = rational::zeros(lat.size() * c);
    for (k, p) in field.iter().enumerate() {
        let p = p.clone().elevate(degree).expect("elevate");
        for (a, v) in p.terms() {
            out[lat.index_of(a).unwrap() * c + k] = v.clone();
        }
    }
    out
}

/// `∫_T u·v / |T|` for flat fields of degrees `r1`, `r2` with `c` components.
pub fn l2_pairing(n: usize, c: usize, u: &[Q], r1: usize, v: &[Q], r2: usize, g: &RationalMatrix) -> Q {
    let a = Lattice::new(n + 1, r1).size();
    let b = Lattice::new(n + 1, r2).size();
    let mut s = Q::zero();
    for i in 0..a {
        for k in 0..c {
            let x = &u[i * c + k];
            if x.is_zero() {
                continue;
            }
            for j in 0..b {
                let y = &v[j * c + k];
                if !y.is_zero() {
                    s += x * y * g.get(i, j);
                }
            }
        }
    }
    s
}

/// Codimension of `div 𝔹_r` in `P_{r−1}` and the degree threshold for the identity.
pub fn div_codim_and_threshold(family: Family, n: usize) -> (usize, usize) {
    match family {
        Family::Traceless => (n + 1, 2),
        Family::Symmetric => (n * (n + 1) / 2, n + 1),
        _ => (1, 2),
    }
}

/// `rank div 𝔹_r = dim P_{r−1}(T; target) − codim` plus orthogonality to constants/RT/RM.
pub fn verify_div_image(family: Family, t: &Simplex, r: usize, frames: &dyn SiteFrames) -> Result<Check> {
    let n = t.dim();
    if !family.is_hdiv() {
        return Err(Error::Unsupported("div image needs an H(div) family".into()));
    }
    let name = format!("div_image/{}/n{n}/r{r}", family.name());
    let (codim, threshold) = div_codim_and_threshold(family, n);
    let out = family.div_ncomp(n);
    let target_dim = out * bernstein::dim_polynomials(n, r.saturating_sub(1));
    let expected = target_dim.saturating_sub(codim);
    if r == 0 {
        return Ok(Check::new(name, CheckStatus::SkippedBelowThreshold, json!({"threshold": threshold})));
    }
    let bubbles = bubble_space(family, t, r, frames)?;
    let dm = div_matrix(family, t, r);
    let divs: Vec<Vector> = bubbles.flats().iter().map(|b| dm.mul_vec(b)).collect();
    let rank = linalg::rank(&divs, dm.nrows());

    let (rt, rm) = tensor::rigid_spaces(t);
    let tests: Vec<Vector> = match family {
        Family::Face => {
            vec![field_flat(&vec![BernsteinPoly::constant(SubSimplexId::full(n), Q::from_integer(1.into()))], 1)]
        }
        Family::Traceless => rt.iter().map(|f| field_flat(f, 1)).collect(),
        _ => rm.iter().map(|f| field_flat(f, 1)).collect(),
    };
    let g = gram(n, r - 1, 1);
    let orthogonal = divs.iter().all(|d| tests.iter().all(|q| l2_pairing(n, out, d, r - 1, q, 1, &g).is_zero()));
    let status = if r < threshold {
        CheckStatus::SkippedBelowThreshold
    } else {
        CheckStatus::from_bool(rank == expected && orthogonal)
    };
    Ok(Check::new(
        name,
        status,
        json!({
            "rank": rank,
            "target_dim": target_dim,
            "codim": codim,
            "expected_rank": expected,
            "orthogonal_to_kernel": orthogonal,
            "identity_holds": rank == expected && orthogonal,
            "bubble_dim": bubbles.len(),
            "threshold": threshold,
        }),
    ))
}
