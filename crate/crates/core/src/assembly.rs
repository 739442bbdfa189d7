//! Global spaces on meshes: DoF identification, conformity, dimensions, div and inf-sup checks.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::{DMatrix, SymmetricEigen};
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::bernstein::{self, Lattice, MultiIndex};
use crate::dofs::{self, DofFunctional, Element, Scope};
use crate::element::{self, Family};
use crate::error::{Error, Result};
use crate::linalg;
use crate::mesh::Mesh;
use crate::rational::{self, Vector, Q};
use crate::report::{self, Check, CheckStatus};
use crate::simplex::{build_frame, Frame, FrameConvention, Globality, Simplex, SiteFrames, SubSimplexId};
use crate::tensor::{self, MatrixSpace};

/// Frames of one cell: sub-simplex frames from global coordinates, mesh-wide facet normals.
pub struct MeshFrames<'a> {
    mesh: &'a Mesh,
    cell: usize,
    simplex: &'a Simplex,
    /// Facet whose normal is reversed on its higher-index cell (negative control).
    flip: Option<&'a [usize]>,
}

impl<'a> MeshFrames<'a> {
    pub fn new(mesh: &'a Mesh, cell: usize, simplex: &'a Simplex, flip: Option<&'a [usize]>) -> Self {
        Self { mesh, cell, simplex, flip }
    }
}

impl SiteFrames for MeshFrames<'_> {
    fn frame(&self, f: &SubSimplexId) -> Frame {
        // Cells store sorted global ids, so the local vertex order is the global one.
        let mut fr = build_frame(self.simplex, f, FrameConvention::Orthogonalized).expect("valid site");
        fr.tangent_globality = vec![Globality::Global; fr.tangents.len()];
        fr.normal_globality = vec![Globality::Global; fr.normals.len()];
        fr
    }

    fn facet_normal(&self, facet: &SubSimplexId) -> Vector {
        let ids = self.mesh.global_ids(self.cell, facet);
        let n = self.mesh.facet_normal(&ids);
        let cells = self.mesh.facet_cells(&ids);
        if self.flip == Some(ids.as_slice()) && cells.len() == 2 && cells[1] == self.cell {
            rational::scale(&n, &rational::int(-1))
        } else {
            n
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DofKey {
    Global { site: Vec<usize>, ord: usize },
    Facewise { facet: Vec<usize>, site: Vec<usize>, ord: usize },
    Interior { cell: usize, ord: usize },
}

#[derive(Clone, Debug, Default)]
pub struct AssemblyOptions {
    /// Replace facewise DoFs by the merged face moments.
    pub merge_faces: bool,
    /// Reverse `n_F` on one side of this facet.
    pub flip: Option<Vec<usize>>,
    /// Skip the single-valuedness check of shared functionals.
    pub skip_frame_check: bool,
}

#[derive(Clone, Debug)]
pub struct CellSpace {
    pub simplex: Simplex,
    pub element: Element,
    /// Global index of each local DoF.
    pub global: Vec<usize>,
    /// Flat coefficients of the local nodal basis, one per local DoF.
    pub nodal: Vec<Vector>,
}

#[derive(Clone, Debug)]
pub struct GlobalSpace {
    pub mesh: Mesh,
    pub family: Family,
    pub r: usize,
    pub k: i32,
    pub keys: Vec<DofKey>,
    pub cells: Vec<CellSpace>,
}

impl GlobalSpace {
    pub fn dim(&self) -> usize {
        self.keys.len()
    }

    pub fn ncomp(&self) -> usize {
        self.family.ncomp(self.mesh.dim())
    }

    /// Restriction of global basis function `g` to cell `c`, if nonzero there.
    pub fn local(&self, c: usize, g: usize) -> Option<&Vector> {
        let cs = &self.cells[c];
        cs.global.iter().position(|&x| x == g).map(|i| &cs.nodal[i])
    }
}

fn key_for(mesh: &Mesh, c: usize, d: &DofFunctional, ord: usize) -> DofKey {
    let site = mesh.global_ids(c, &d.site);
    match &d.scope {
        Scope::Global => DofKey::Global { site, ord },
        Scope::Facewise { facet } => DofKey::Facewise { facet: mesh.global_ids(c, facet), site, ord },
        Scope::Interior => DofKey::Interior { cell: c, ord },
    }
}

fn build_cell(
    mesh: &Mesh,
    c: usize,
    family: Family,
    r: usize,
    k: i32,
    opts: &AssemblyOptions,
) -> Result<(Element, Vec<Vector>)> {
    let t = mesh.cell_simplex(c)?;
    let frames = MeshFrames::new(mesh, c, &t, opts.flip.as_deref());
    let mut e = Element::new(family, &t, r, k, &frames)?;
    if opts.merge_faces {
        for i in 0..=mesh.dim() {
            let facet = SubSimplexId::facet(i, mesh.dim());
            let merged = dofs::merge_face_dofs(&e, &facet, &frames)?;
            e.dofs = merged.merged;
        }
    }
    let nodal = e.nodal_flats()?;
    Ok((e, nodal))
}

pub fn assemble(mesh: &Mesh, family: Family, r: usize, k: i32, opts: &AssemblyOptions) -> Result<GlobalSpace> {
    dofs::check_params(family, mesh.dim(), r, k)?;
    let built: Vec<(Element, Vec<Vector>)> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| build_cell(mesh, c, family, r, k, opts))
        .collect::<Result<_>>()?;
    let mut index: HashMap<DofKey, usize> = HashMap::new();
    let mut signatures: Vec<Option<String>> = Vec::new();
    let mut keys = Vec::new();
    let mut cells = Vec::with_capacity(built.len());
    for (c, (element, nodal)) in built.into_iter().enumerate() {
        let mut ords: HashMap<(Scope, SubSimplexId), usize> = HashMap::new();
        let mut global = Vec::with_capacity(element.dofs.len());
        for d in &element.dofs.members {
            let ord = ords.entry((d.scope.clone(), d.site.clone())).or_default();
            let key = key_for(mesh, c, d, *ord);
            *ord += 1;
            let sig = (d.scope != Scope::Interior).then(|| d.signature(&mesh.global_ids(c, &d.site)));
            let g = match index.get(&key) {
                Some(&g) => {
                    if !opts.skip_frame_check && signatures[g] != sig {
                        return Err(Error::FrameInconsistency(format!("{key:?} differs between cells")));
                    }
                    g
                }
                None => {
                    index.insert(key.clone(), keys.len());
                    keys.push(key);
                    signatures.push(sig);
                    keys.len() - 1
                }
            };
            global.push(g);
        }
        cells.push(CellSpace { simplex: mesh.cell_simplex(c)?, element, global, nodal });
    }
    Ok(GlobalSpace { mesh: mesh.clone(), family, r, k, keys, cells })
}

/// Coefficients of `dir · u` restricted to a sub-simplex (local positions `pos`).
fn restrict_flat(flat: &[Q], lat: &Lattice, c: usize, dir: &[Q], pos: &[usize]) -> BTreeMap<MultiIndex, Q> {
    let mut out = BTreeMap::new();
    for (ai, a) in lat.points.iter().enumerate() {
        let Some(b) = bernstein::restrict_index(a, pos, lat.degree) else { continue };
        let mut v = Q::zero();
        for (k, d) in dir.iter().enumerate() {
            if !d.is_zero() {
                v += &flat[ai * c + k] * d;
            }
        }
        if !v.is_zero() {
            *out.entry(b).or_insert_with(Q::zero) += v;
        }
    }
    out.retain(|_, v| !v.is_zero());
    out
}

fn evaluate_flat(flat: &[Q], lat: &Lattice, c: usize, dir: &[Q], lam: &[Q]) -> Q {
    let mut s = Q::zero();
    for (ai, a) in lat.points.iter().enumerate() {
        let mut v = Q::zero();
        for (k, d) in dir.iter().enumerate() {
            if !d.is_zero() {
                v += &flat[ai * c + k] * d;
            }
        }
        if v.is_zero() {
            continue;
        }
        let mut m = Q::one();
        for (i, &e) in a.entries().iter().enumerate() {
            for _ in 0..e {
                m *= &lam[i];
            }
        }
        s += v * m;
    }
    s
}

/// Directions whose restriction to a shared site must agree across cells.
fn continuity_tests(space: &GlobalSpace) -> Vec<(Vec<usize>, Vec<Vector>, &'static str)> {
    let mesh = &space.mesh;
    let n = mesh.dim();
    let c = space.ncomp();
    let units = |m: usize| (0..m).map(|i| rational::unit(m, i)).collect::<Vec<_>>();
    let mut tests = Vec::new();
    for f in mesh.interior_facets() {
        let nf = mesh.facet_normal(f);
        let dirs = match space.family {
            Family::Lagrange | Family::VectorLagrange => units(c),
            Family::Face => vec![nf],
            Family::Traceless | Family::Symmetric => {
                (0..n).map(|i| tensor::outer(&rational::unit(n, i), &nf)).collect()
            }
        };
        tests.push((f.clone(), dirs, "normal_trace"));
    }
    let k = space.k;
    for l in 0..n.saturating_sub(1) {
        for f in mesh.faces(l) {
            let cs = mesh.cells_containing(f);
            if cs.len() < 2 {
                continue;
            }
            let t = &space.cells[cs[0]].simplex;
            let frames = MeshFrames::new(mesh, cs[0], t, None);
            let fr = frames.frame(&mesh.local_site(cs[0], f).unwrap());
            let li = l as i32;
            let (dirs, label): (Vec<Vector>, _) = match space.family {
                Family::Lagrange | Family::VectorLagrange => (units(c), "value"),
                Family::Face if li <= k => (fr.normals.clone(), "normal_plane"),
                Family::Traceless | Family::Symmetric if l == 0 => {
                    (space.family.space().unwrap().canonical_basis(n), "vertex_value")
                }
                Family::Traceless if li <= k => (
                    fr.normals
                        .iter()
                        .flat_map(|nv| (0..n).map(move |i| tensor::outer(&rational::unit(n, i), nv)))
                        .collect(),
                    "normal_plane",
                ),
                Family::Symmetric => {
                    let mut d = Vec::new();
                    if li <= k {
                        for t in &fr.tangents {
                            for nv in &fr.normals {
                                d.push(tensor::outer(t, nv));
                            }
                        }
                    }
                    for i in 0..fr.normals.len() {
                        for j in i..fr.normals.len() {
                            d.push(tensor::outer(&fr.normals[j], &fr.normals[i]));
                        }
                    }
                    (d, "normal_normal")
                }
                _ => continue,
            };
            tests.push((f.clone(), dirs, label));
        }
    }
    tests
}

/// Exact jump test of every continuity condition, plus evaluation at random rational facet points.
pub fn check_conformity(space: &GlobalSpace, samples: usize, seed: u64) -> Check {
    let mesh = &space.mesh;
    let n = mesh.dim();
    let c = space.ncomp();
    let lat = Lattice::new(n + 1, space.r);
    let mut failures = Vec::new();
    let mut sample_failures = 0usize;
    let mut compared = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tests = continuity_tests(space);
    for (site, dirs, label) in &tests {
        let cells = mesh.cells_containing(site);
        let gs: BTreeSet<usize> = cells.iter().flat_map(|&cc| space.cells[cc].global.iter().copied()).collect();
        let points: Vec<Vec<Q>> = if *label == "normal_trace" {
            (0..samples)
                .map(|_| {
                    let w: Vec<i64> = (0..site.len()).map(|_| rng.random_range(1..=97)).collect();
                    let s: i64 = w.iter().sum();
                    let lam: Vec<Q> = w.iter().map(|&x| rational::frac(x, s)).collect();
                    let mut x = rational::zeros(n);
                    for (l, &v) in lam.iter().zip(site.iter()) {
                        x = rational::add(&x, &rational::scale(&mesh.vertices()[v], l));
                    }
                    x
                })
                .collect()
        } else {
            Vec::new()
        };
        for &g in &gs {
            for dir in dirs {
                let traces: Vec<BTreeMap<MultiIndex, Q>> = cells
                    .iter()
                    .map(|&cc| {
                        let pos = mesh.local_site(cc, site).unwrap();
                        space
                            .local(cc, g)
                            .map_or_else(BTreeMap::new, |fl| restrict_flat(fl, &lat, c, dir, pos.indices()))
                    })
                    .collect();
                compared += 1;
                for (i, tr) in traces.iter().enumerate().skip(1) {
                    if *tr != traces[0] && failures.len() < 20 {
                        let bad = tr
                            .iter()
                            .find(|(a, v)| traces[0].get(*a) != Some(*v))
                            .or_else(|| traces[0].iter().find(|(a, _)| !tr.contains_key(*a)))
                            .map(|(a, v)| json!({"index": a.entries(), "value": rational::format_q(v)}));
                        failures.push(json!({
                            "basis": g,
                            "site": site,
                            "check": label,
                            "cells": [cells[0], cells[i]],
                            "coefficient": bad,
                        }));
                    }
                }
                for x in &points {
                    let vals: Vec<Q> = cells
                        .iter()
                        .map(|&cc| {
                            let lam = space.cells[cc].simplex.barycentric(x);
                            space.local(cc, g).map_or_else(Q::zero, |fl| evaluate_flat(fl, &lat, c, dir, &lam))
                        })
                        .collect();
                    if vals.iter().any(|v| *v != vals[0]) {
                        sample_failures += 1;
                    }
                }
            }
        }
    }
    let ok = failures.is_empty() && sample_failures == 0;
    Check::new(
        format!("conformity/{}/r{}/k{}", space.family.name(), space.r, space.k),
        CheckStatus::from_bool(ok),
        json!({
            "conditions": tests.len(),
            "comparisons": compared,
            "interior_facets": mesh.interior_facets().len(),
            "samples_per_facet": samples,
            "sample_mismatches": sample_failures,
            "failures": failures,
        }),
    )
}

/// Assembles with one facet normal reversed on one side; passes when the jump is detected.
pub fn negative_control(mesh: &Mesh, family: Family, r: usize, k: i32, seed: u64) -> Result<Check> {
    let facet = mesh
        .interior_facets()
        .first()
        .map(|f| f.to_vec())
        .ok_or_else(|| Error::Domain("mesh has no interior facet".into()))?;
    let strict = AssemblyOptions { flip: Some(facet.clone()), ..Default::default() };
    let rejected = matches!(assemble(mesh, family, r, k, &strict), Err(Error::FrameInconsistency(_)));
    let loose = AssemblyOptions { flip: Some(facet.clone()), skip_frame_check: true, ..Default::default() };
    let space = assemble(mesh, family, r, k, &loose)?;
    let conf = check_conformity(&space, 2, seed);
    let detected = !conf.passed();
    let failures = conf.witness["failures"].as_array().map_or(0, Vec::len);
    Ok(Check::new(
        format!("negative_control/{}/r{r}/k{k}", family.name()),
        CheckStatus::from_bool(detected && rejected),
        json!({"flipped_facet": facet, "frame_check_rejects": rejected, "jump_detected": detected, "reported_failures": failures}),
    ))
}

/// Bubble and interior DoFs belong to exactly one cell.
pub fn check_locality(space: &GlobalSpace) -> Check {
    let mut owners: HashMap<usize, BTreeSet<usize>> = HashMap::new();
    for (c, cs) in space.cells.iter().enumerate() {
        for &g in &cs.global {
            owners.entry(g).or_default().insert(c);
        }
    }
    let bad: Vec<usize> = space
        .keys
        .iter()
        .enumerate()
        .filter(|(g, k)| matches!(k, DofKey::Interior { .. }) && owners[g].len() != 1)
        .map(|(g, _)| g)
        .collect();
    let interior = space.keys.iter().filter(|k| matches!(k, DofKey::Interior { .. })).count();
    Check::new(
        format!("locality/{}/r{}/k{}", space.family.name(), space.r, space.k),
        CheckStatus::from_bool(bad.is_empty()),
        json!({"interior_dofs": interior, "shared_interior": bad}),
    )
}

fn binom(a: usize, b: i64) -> usize {
    rational::binomial_i(a as i64, b)
}

/// Closed-form global dimension from sub-simplex counts.
pub fn dimension_formula(mesh: &Mesh, family: Family, r: usize, k: i32) -> usize {
    let n = mesh.dim();
    let d = |l: usize| mesh.count(l);
    let c = |l: usize| binom(r - 1, l as i64);
    let s_h: usize = (0..=n).map(|l| d(l) * c(l)).sum();
    let tangential_cells: usize = (1..=n).map(|l| rational::binomial(n + 1, l + 1) * l * c(l)).sum();
    let facewise = |from: usize| -> usize { (from..n).map(|l| rational::binomial(n, l + 1) * c(l)).sum() };
    let kk = (k + 1).max(0) as usize;
    match family {
        Family::Lagrange => s_h,
        Family::VectorLagrange => n * s_h,
        Family::Face if k < 0 => d(n - 1) * binom(n + r - 1, r as i64) + d(n) * tangential_cells,
        Family::Face => {
            (0..kk).map(|l| d(l) * (n - l) * c(l)).sum::<usize>() + d(n - 1) * facewise(kk) + d(n) * tangential_cells
        }
        Family::Traceless => {
            d(0) * (n * n - 1)
                + (1..kk).map(|l| d(l) * n * (n - l) * c(l)).sum::<usize>()
                + d(n - 1) * n * facewise(kk)
                + d(n) * element::bubble_dim_formula(family, n, r)
        }
        Family::Symmetric => {
            let normal_s = |l: usize| tensor::split_dims(MatrixSpace::Symmetric, n, l).1;
            let nn = |l: usize| (n - l) * (n - l + 1) / 2;
            let tn_facewise: usize = (kk..n).map(|l| rational::binomial(n, l + 1) * l * c(l)).sum();
            d(0) * n * (n + 1) / 2
                + (1..kk).map(|l| d(l) * normal_s(l) * c(l)).sum::<usize>()
                + (kk..n).map(|l| d(l) * nn(l) * c(l)).sum::<usize>()
                + d(n - 1) * tn_facewise
                + d(n) * element::bubble_dim_formula(family, n, r)
        }
    }
}

pub fn check_dimension(space: &GlobalSpace) -> Check {
    let formula = dimension_formula(&space.mesh, space.family, space.r, space.k);
    Check::new(
        format!("dimension/{}/r{}/k{}", space.family.name(), space.r, space.k),
        CheckStatus::from_bool(formula == space.dim()),
        json!({
            "assembled": space.dim(),
            "formula": formula,
            "cells": space.mesh.num_cells(),
            "subsimplex_counts": (0..=space.mesh.dim()).map(|l| space.mesh.count(l)).collect::<Vec<_>>(),
        }),
    )
}

/// Degree threshold of the discrete inf-sup statement.
pub fn infsup_threshold(family: Family, n: usize, k: i32) -> usize {
    match family {
        Family::Face if k < 0 => 1,
        Family::Face => (k + 2) as usize,
        Family::Traceless => dofs::QuotientMode::ModP1.threshold(n, k),
        Family::Symmetric => n + 1,
        _ => 1,
    }
}

/// Per-cell div of each local nodal function, flat over `P_{r−1}` with `div_ncomp` components.
fn cell_divs(space: &GlobalSpace, c: usize) -> Vec<Vector> {
    let cs = &space.cells[c];
    let d = element::div_matrix(space.family, &cs.simplex, space.r);
    cs.nodal.iter().map(|v| d.mul_vec(v)).collect()
}

/// Exact rank of `div : V_h → Q_h`.
pub fn check_div_onto(space: &GlobalSpace) -> Result<Check> {
    if !space.family.is_hdiv() {
        return Err(Error::Unsupported(format!("div onto for family {}", space.family.name())));
    }
    let n = space.mesh.dim();
    let qdim = bernstein::dim_polynomials(n, space.r - 1) * space.family.div_ncomp(n);
    let cols = qdim * space.mesh.num_cells();
    let mut rows = vec![rational::zeros(cols); space.dim()];
    for c in 0..space.cells.len() {
        for (i, dv) in cell_divs(space, c).into_iter().enumerate() {
            let g = space.cells[c].global[i];
            rows[g][c * qdim..(c + 1) * qdim].clone_from_slice(&dv);
        }
    }
    let rank = linalg::rank(&rows, cols);
    let threshold = infsup_threshold(space.family, n, space.k);
    let onto = rank == cols;
    let status = if space.r < threshold { CheckStatus::SkippedBelowThreshold } else { CheckStatus::from_bool(onto) };
    Ok(Check::new(
        format!("div_onto/{}/r{}/k{}", space.family.name(), space.r, space.k),
        status,
        json!({"rank": rank, "dim_q": cols, "deficit": cols - rank, "dim_v": space.dim(), "threshold": threshold, "onto": onto}),
    ))
}

fn to_f64_matrix(m: &linalg::RationalMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| rational::to_f64(m.get(i, j)))
}

/// Kroneckers a scalar Gram over `c` interleaved components.
fn kron_components(g: &DMatrix<f64>, c: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(g.nrows() * c, g.ncols() * c);
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            for k in 0..c {
                out[(i * c + k, j * c + k)] = g[(i, j)];
            }
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct InfSup {
    pub beta: f64,
    pub dim_v: usize,
    pub dim_q: usize,
    pub discarded: usize,
    pub mu_max: f64,
}

pub const KERNEL_THRESHOLD: f64 = 1e-10;

/// `β_h = sqrt(min μ)` for `M_Q^{-1} B M_V^{-1} Bᵀ`, dropping `μ < 1e−10 μ_max`.
pub fn infsup_constant(space: &GlobalSpace) -> Result<InfSup> {
    if !space.family.is_hdiv() {
        return Err(Error::Unsupported(format!("inf-sup for family {}", space.family.name())));
    }
    let n = space.mesh.dim();
    let r = space.r;
    let c = space.ncomp();
    let dc = space.family.div_ncomp(n);
    let gr = kron_components(&to_f64_matrix(&element::gram(n, r, r)), c);
    let gq = kron_components(&to_f64_matrix(&element::gram(n, r - 1, r - 1)), dc);
    let qdim = gq.nrows();
    let nv = space.dim();
    let nq = qdim * space.cells.len();
    let mut mv = DMatrix::<f64>::zeros(nv, nv);
    let mut mq = DMatrix::<f64>::zeros(nq, nq);
    let mut b = DMatrix::<f64>::zeros(nq, nv);
    for (ci, cs) in space.cells.iter().enumerate() {
        let vol = rational::to_f64(&cs.simplex.volume());
        let phi = DMatrix::from_fn(cs.nodal[0].len(), cs.nodal.len(), |i, j| rational::to_f64(&cs.nodal[j][i]));
        let divs = cell_divs(space, ci);
        let dphi = DMatrix::from_fn(qdim, divs.len(), |i, j| rational::to_f64(&divs[j][i]));
        let gdiv = &gq * &dphi;
        let local_v = (phi.transpose() * &gr * &phi + dphi.transpose() * &gdiv) * vol;
        let local_b = gdiv * vol;
        for (i, &gi) in cs.global.iter().enumerate() {
            for (j, &gj) in cs.global.iter().enumerate() {
                mv[(gi, gj)] += local_v[(i, j)];
            }
            for q in 0..qdim {
                b[(ci * qdim + q, gi)] += local_b[(q, i)];
            }
        }
        let off = ci * qdim;
        for i in 0..qdim {
            for j in 0..qdim {
                mq[(off + i, off + j)] = gq[(i, j)] * vol;
            }
        }
    }
    let lv = mv.cholesky().ok_or_else(|| Error::SingularGeometry("V mass matrix is not positive definite".into()))?;
    let lq = mq.cholesky().ok_or_else(|| Error::SingularGeometry("Q mass matrix is not positive definite".into()))?;
    let y = lv.solve(&b.transpose());
    let s = &b * y;
    let l = lq.l();
    let linv = l.clone().try_inverse().ok_or_else(|| Error::SingularGeometry("Q factor not invertible".into()))?;
    let mut sym = &linv * s * linv.transpose();
    sym = (&sym + sym.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym).eigenvalues;
    let mu_max = eig.iter().copied().fold(0.0_f64, f64::max);
    let kept: Vec<f64> = eig.iter().copied().filter(|&m| m >= KERNEL_THRESHOLD * mu_max).collect();
    let mu_min = kept.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(InfSup { beta: mu_min.max(0.0).sqrt(), dim_v: nv, dim_q: nq, discarded: eig.len() - kept.len(), mu_max })
}

/// β on a sequence of uniformly refined meshes.
pub fn infsup_sweep(base: &Mesh, levels: usize, family: Family, r: usize, k: i32) -> Result<Check> {
    let mut mesh = base.clone();
    let mut betas = Vec::new();
    let mut rows = Vec::new();
    for level in 0..levels {
        if level > 0 {
            mesh = mesh.refine()?;
        }
        let space = assemble(&mesh, family, r, k, &AssemblyOptions::default())?;
        let s = infsup_constant(&space)?;
        rows.push(json!({
            "level": level,
            "cells": mesh.num_cells(),
            "dim_v": s.dim_v,
            "dim_q": s.dim_q,
            "beta": report::float(s.beta),
            "discarded_modes": s.discarded,
        }));
        betas.push(s.beta);
    }
    let max = betas.iter().copied().fold(f64::MIN, f64::max);
    let min = betas.iter().copied().fold(f64::MAX, f64::min);
    let drift = if max > 0.0 { (max - min) / max } else { 1.0 };
    let ok = min > 0.0 && drift < MAX_DRIFT;
    let threshold = infsup_threshold(family, mesh.dim(), k);
    let status = if r < threshold { CheckStatus::SkippedBelowThreshold } else { CheckStatus::from_bool(ok) };
    Ok(Check::new(
        format!("infsup/{}/r{r}/k{k}", family.name()),
        status,
        json!({"levels": rows, "drift": report::float(drift), "max_drift": report::float(MAX_DRIFT), "stable": ok, "threshold": threshold}),
    ))
}

pub const MAX_DRIFT: f64 = 0.2;
