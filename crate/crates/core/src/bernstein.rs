//! Homogeneous polynomials in barycentric coordinates.
//!
//! A polynomial of degree `r` on a (sub-)simplex with vertex set `D` is stored
//! as `Σ c_α λ^α` over multi-indices `|α| = r` on `D`. No multinomial factors
//! are attached to the monomials.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::rational::{self, Q};
use crate::simplex::{Simplex, SubSimplexId};

pub const MAX_VERTS: usize = 6;

/// Exponent tuple on an ordered vertex list of length at most [`MAX_VERTS`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex {
    len: u8,
    e: [u8; MAX_VERTS],
}

impl MultiIndex {
    pub fn new(entries: &[u8]) -> Self {
        assert!(entries.len() <= MAX_VERTS, "too many barycentric coordinates");
        let mut e = [0u8; MAX_VERTS];
        e[..entries.len()].copy_from_slice(entries);
        Self { len: entries.len() as u8, e }
    }

    pub fn zero(len: usize) -> Self {
        Self::new(&vec![0; len])
    }

    pub fn unit(len: usize, i: usize) -> Self {
        let mut m = Self::zero(len);
        m.e[i] = 1;
        m
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn entries(&self) -> &[u8] {
        &self.e[..self.len as usize]
    }

    pub fn get(&self, i: usize) -> u8 {
        self.e[i]
    }

    pub fn degree(&self) -> usize {
        self.entries().iter().map(|&x| x as usize).sum()
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.len, other.len);
        let mut m = *self;
        for i in 0..self.len() {
            m.e[i] += other.e[i];
        }
        m
    }

    /// `α − e_i`, if nonnegative.
    pub fn minus_unit(&self, i: usize) -> Option<Self> {
        if self.e[i] == 0 {
            return None;
        }
        let mut m = *self;
        m.e[i] -= 1;
        Some(m)
    }

    /// Number of nonzero entries.
    pub fn support_size(&self) -> usize {
        self.entries().iter().filter(|&&x| x > 0).count()
    }

    /// All `α` with `len` entries and `|α| = degree`, ascending lexicographic.
    pub fn lattice(len: usize, degree: usize) -> Vec<Self> {
        let mut out = Vec::new();
        let mut cur = vec![0u8; len];
        fn rec(pos: usize, left: usize, cur: &mut Vec<u8>, out: &mut Vec<MultiIndex>) {
            if pos + 1 == cur.len() {
                cur[pos] = left as u8;
                out.push(MultiIndex::new(cur));
                return;
            }
            for v in 0..=left {
                cur[pos] = v as u8;
                rec(pos + 1, left - v, cur, out);
            }
        }
        if len == 0 {
            if degree == 0 {
                out.push(Self::zero(0));
            }
            return out;
        }
        rec(0, degree, &mut cur, &mut out);
        out
    }
}

/// Sorted lattice with index lookup.
#[derive(Clone, Debug)]
pub struct Lattice {
    pub len: usize,
    pub degree: usize,
    pub points: Vec<MultiIndex>,
}

impl Lattice {
    pub fn new(len: usize, degree: usize) -> Self {
        Self { len, degree, points: MultiIndex::lattice(len, degree) }
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }

    pub fn index_of(&self, a: &MultiIndex) -> Option<usize> {
        self.points.binary_search(a).ok()
    }
}

fn factorials() -> &'static [BigInt] {
    static F: OnceLock<Vec<BigInt>> = OnceLock::new();
    F.get_or_init(|| {
        let mut v = vec![BigInt::one()];
        for i in 1..128u32 {
            let next = v.last().unwrap() * BigInt::from(i);
            v.push(next);
        }
        v
    })
}

pub fn fact(k: usize) -> &'static BigInt {
    &factorials()[k]
}

/// `∫_f λ^α / |f| = ℓ! α! / (|α| + ℓ)!` for `α` on the `ℓ+1` vertices of `f`.
pub fn monomial_average(alpha: &[u8]) -> Q {
    let l = alpha.len() - 1;
    let deg: usize = alpha.iter().map(|&x| x as usize).sum();
    let mut num = fact(l).clone();
    for &a in alpha {
        if a > 1 {
            num *= fact(a as usize);
        }
    }
    Q::new(num, fact(deg + l).clone())
}

/// Homogeneous Bernstein-form polynomial.
#[derive(Clone, Debug)]
pub struct BernsteinPoly {
    domain: SubSimplexId,
    degree: usize,
    coeffs: BTreeMap<MultiIndex, Q>,
}

impl PartialEq for BernsteinPoly {
    fn eq(&self, other: &Self) -> bool {
        if self.domain != other.domain {
            return false;
        }
        let d = self.degree.max(other.degree);
        self.clone().elevate(d).map(|p| p.coeffs) == other.clone().elevate(d).map(|p| p.coeffs)
    }
}

impl Eq for BernsteinPoly {}

impl BernsteinPoly {
    pub fn zero(domain: SubSimplexId, degree: usize) -> Self {
        Self { domain, degree, coeffs: BTreeMap::new() }
    }

    pub fn constant(domain: SubSimplexId, c: Q) -> Self {
        let mut p = Self::zero(domain, 0);
        let len = p.domain.len();
        p.insert(MultiIndex::zero(len), c);
        p
    }

    pub fn monomial(domain: SubSimplexId, alpha: MultiIndex, c: Q) -> Self {
        assert_eq!(alpha.len(), domain.len());
        let mut p = Self::zero(domain, alpha.degree());
        p.insert(alpha, c);
        p
    }

    /// `λ_i` for a vertex `i` of the domain (parent numbering).
    pub fn coordinate(domain: SubSimplexId, i: usize) -> Result<Self> {
        let pos = domain.position(i).ok_or_else(|| Error::Domain(format!("vertex {i} not in {domain}")))?;
        let len = domain.len();
        Ok(Self::monomial(domain, MultiIndex::unit(len, pos), Q::one()))
    }

    pub fn from_terms(domain: SubSimplexId, degree: usize, terms: impl IntoIterator<Item = (MultiIndex, Q)>) -> Self {
        let mut p = Self::zero(domain, degree);
        for (a, c) in terms {
            assert_eq!(a.degree(), degree, "inhomogeneous term");
            p.insert(a, c);
        }
        p
    }

    fn insert(&mut self, a: MultiIndex, c: Q) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.coeffs.entry(a) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn domain(&self) -> &SubSimplexId {
        &self.domain
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &BTreeMap<MultiIndex, Q> {
        &self.coeffs
    }

    pub fn coeff(&self, a: &MultiIndex) -> Q {
        self.coeffs.get(a).cloned().unwrap_or_else(Q::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &Q)> {
        self.coeffs.iter()
    }

    fn same_domain(&self, other: &Self) -> Result<()> {
        if self.domain != other.domain {
            return Err(Error::Domain(format!("domains {} and {} differ", self.domain, other.domain)));
        }
        Ok(())
    }

    /// Multiplies by `(Σ λ_i)^(target − r)`.
    pub fn elevate(self, target: usize) -> Result<Self> {
        if target < self.degree {
            return Err(Error::Domain(format!("cannot elevate degree {} to {target}", self.degree)));
        }
        let len = self.domain.len();
        let mut p = self;
        for _ in p.degree..target {
            let mut next = Self::zero(p.domain.clone(), p.degree + 1);
            for (a, c) in &p.coeffs {
                for i in 0..len {
                    next.insert(a.add(&MultiIndex::unit(len, i)), c.clone());
                }
            }
            p = next;
        }
        Ok(p)
    }

    pub fn multiply(&self, other: &Self) -> Result<Self> {
        self.same_domain(other)?;
        let mut p = Self::zero(self.domain.clone(), self.degree + other.degree);
        for (a, c) in &self.coeffs {
            for (b, d) in &other.coeffs {
                p.insert(a.add(b), c * d);
            }
        }
        Ok(p)
    }

    pub fn scale(&self, s: &Q) -> Self {
        let mut p = Self::zero(self.domain.clone(), self.degree);
        if !s.is_zero() {
            for (a, c) in &self.coeffs {
                p.insert(*a, c * s);
            }
        }
        p
    }

    /// Sum after elevating both to the larger degree.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_domain(other)?;
        let d = self.degree.max(other.degree);
        let mut p = self.clone().elevate(d)?;
        for (a, c) in other.clone().elevate(d)?.coeffs {
            p.insert(a, c);
        }
        Ok(p)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(&-Q::one()))
    }

    /// `λ_{f(0)} ⋯ λ_{f(ℓ)}` on the parent simplex.
    pub fn bubble(f: &SubSimplexId) -> Self {
        let full = SubSimplexId::full(f.parent_dim());
        let len = full.len();
        let mut e = vec![0u8; len];
        for &i in f.indices() {
            e[i] = 1;
        }
        Self::monomial(full, MultiIndex::new(&e), Q::one())
    }

    /// Sets `λ_i = 0` for the vertices of the domain outside `f`.
    pub fn restrict(&self, f: &SubSimplexId) -> Result<Self> {
        if !f.is_subset_of(&self.domain) {
            return Err(Error::Domain(format!("{f} is not contained in {}", self.domain)));
        }
        let pos: Vec<usize> = f.indices().iter().map(|&i| self.domain.position(i).unwrap()).collect();
        let mut p = Self::zero(f.clone(), self.degree);
        for (a, c) in &self.coeffs {
            if let Some(b) = restrict_index(a, &pos, self.degree) {
                p.insert(b, c.clone());
            }
        }
        Ok(p)
    }

    /// Reinterprets the polynomial on a larger vertex set `g ⊇ domain`.
    pub fn extend(&self, g: &SubSimplexId) -> Result<Self> {
        if !self.domain.is_subset_of(g) {
            return Err(Error::Domain(format!("{} is not contained in {g}", self.domain)));
        }
        let pos: Vec<usize> = self.domain.indices().iter().map(|&i| g.position(i).unwrap()).collect();
        let mut p = Self::zero(g.clone(), self.degree);
        for (a, c) in &self.coeffs {
            p.insert(extend_index(a, &pos, g.len()), c.clone());
        }
        Ok(p)
    }

    /// Value at the point with barycentric coordinates `lam` on the domain vertices.
    pub fn evaluate(&self, lam: &[Q]) -> Q {
        assert_eq!(lam.len(), self.domain.len());
        let mut s = Q::zero();
        for (a, c) in &self.coeffs {
            let mut term = c.clone();
            for (i, &k) in a.entries().iter().enumerate() {
                for _ in 0..k {
                    term *= &lam[i];
                }
            }
            s += term;
        }
        s
    }

    /// Average `∫_f p / |f|`, restricting to `f` first. At a vertex it is the value there.
    pub fn integrate(&self, f: &SubSimplexId) -> Result<Q> {
        let p = if &self.domain == f { self.clone() } else { self.restrict(f)? };
        Ok(p.coeffs.iter().fold(Q::zero(), |acc, (a, c)| acc + c * monomial_average(a.entries())))
    }

    /// `d·∇p` via `∇λ^α = Σ α_i λ^{α−e_i} ∇λ_i`; needs the full simplex as domain.
    pub fn derivative(&self, dir: &[Q], t: &Simplex) -> Result<Self> {
        if self.domain != SubSimplexId::full(t.dim()) {
            return Err(Error::Domain(format!("directional derivative on proper sub-simplex {}", self.domain)));
        }
        let dl: Vec<Q> = t.barycentric_gradients().iter().map(|g| rational::dot(g, dir)).collect();
        let mut p = Self::zero(self.domain.clone(), self.degree.saturating_sub(1));
        if self.degree == 0 {
            return Ok(p);
        }
        for (a, c) in &self.coeffs {
            for (i, d) in dl.iter().enumerate() {
                if d.is_zero() {
                    continue;
                }
                if let Some(b) = a.minus_unit(i) {
                    p.insert(b, c * d * Q::from_integer(BigInt::from(a.get(i))));
                }
            }
        }
        Ok(p)
    }

    /// Coefficients listed along a lattice of the polynomial's degree.
    pub fn to_dense(&self, lattice: &Lattice) -> Vec<Q> {
        assert_eq!(lattice.degree, self.degree);
        let mut out = rational::zeros(lattice.size());
        for (a, c) in &self.coeffs {
            out[lattice.index_of(a).expect("lattice point")] = c.clone();
        }
        out
    }
}

/// Restricts a multi-index to the listed positions; `None` if it touches the rest.
pub fn restrict_index(a: &MultiIndex, pos: &[usize], degree: usize) -> Option<MultiIndex> {
    let mut e = [0u8; MAX_VERTS];
    let mut s = 0usize;
    for (k, &p) in pos.iter().enumerate() {
        e[k] = a.get(p);
        s += e[k] as usize;
    }
    (s == degree).then(|| MultiIndex::new(&e[..pos.len()]))
}

/// Inverse of [`restrict_index`]: places entries at `pos` inside a length-`len` index.
pub fn extend_index(a: &MultiIndex, pos: &[usize], len: usize) -> MultiIndex {
    let mut e = [0u8; MAX_VERTS];
    for (k, &p) in pos.iter().enumerate() {
        e[p] = a.get(k);
    }
    MultiIndex::new(&e[..len])
}

/// `dim P_r` on an ℓ-simplex.
pub fn dim_polynomials(l: usize, r: usize) -> usize {
    rational::binomial(r + l, l)
}
