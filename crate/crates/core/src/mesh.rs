//! Conforming simplicial meshes with exact rational vertices.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use itertools::Itertools;
use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, Vector, Q};
use crate::simplex::{hyperplane_normal, Simplex, SubSimplexId};

#[derive(Clone, Debug)]
pub struct Mesh {
    dim: usize,
    vertices: Vec<Vector>,
    cells: Vec<Vec<usize>>,
    /// `faces[ℓ]` lists the ℓ-dimensional sub-simplices as sorted global ids.
    faces: Vec<Vec<Vec<usize>>>,
    lookup: HashMap<Vec<usize>, usize>,
    /// Cells incident to each facet, ascending.
    facet_cells: Vec<Vec<usize>>,
}

impl Mesh {
    /// Validates and indexes; cell vertex lists are sorted.
    pub fn new(dim: usize, vertices: Vec<Vector>, cells: Vec<Vec<usize>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("mesh dimension must be positive".into()));
        }
        if let Some(v) = vertices.iter().find(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch(format!("vertex with {} coordinates in a {dim}-mesh", v.len())));
        }
        let mut sorted = Vec::with_capacity(cells.len());
        for c in cells {
            let mut c = c;
            c.sort_unstable();
            if c.len() != dim + 1 || c.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::NonConforming(format!("cell {c:?} is not an {dim}-simplex")));
            }
            if let Some(&i) = c.iter().find(|&&i| i >= vertices.len()) {
                return Err(Error::NonConforming(format!("vertex index {i} out of range")));
            }
            sorted.push(c);
        }
        let mut faces: Vec<Vec<Vec<usize>>> = vec![Vec::new(); dim + 1];
        for c in &sorted {
            for l in 0..=dim {
                faces[l].extend(c.iter().copied().combinations(l + 1));
            }
        }
        for f in &mut faces {
            f.sort();
            f.dedup();
        }
        let mut lookup = HashMap::new();
        for fl in &faces {
            for (i, f) in fl.iter().enumerate() {
                lookup.insert(f.clone(), i);
            }
        }
        let mut facet_cells = vec![Vec::new(); faces[dim - 1].len()];
        for (ci, c) in sorted.iter().enumerate() {
            for f in c.iter().copied().combinations(dim) {
                facet_cells[lookup[&f]].push(ci);
            }
        }
        let mesh = Self { dim, vertices, cells: sorted, faces, lookup, facet_cells };
        mesh.validate()?;
        Ok(mesh)
    }

    fn validate(&self) -> Result<()> {
        if self.faces[self.dim].len() != self.cells.len() {
            return Err(Error::NonConforming("duplicate cells".into()));
        }
        for ci in 0..self.cells.len() {
            let t = self.cell_simplex(ci).map_err(|_| Error::NonConforming(format!("cell {ci} is degenerate")))?;
            // No vertex of the mesh may lie in a closed cell it does not belong to.
            for (vi, x) in self.vertices.iter().enumerate() {
                if self.cells[ci].contains(&vi) {
                    continue;
                }
                if t.barycentric(x).iter().all(|l| !l.is_negative()) {
                    return Err(Error::NonConforming(format!("vertex {vi} lies in cell {ci}")));
                }
            }
        }
        for (fi, cs) in self.facet_cells.iter().enumerate() {
            if cs.len() > 2 {
                return Err(Error::NonConforming(format!(
                    "facet {:?} has {} cells",
                    self.faces[self.dim - 1][fi],
                    cs.len()
                )));
            }
            if cs.len() == 2 {
                let f = &self.faces[self.dim - 1][fi];
                let n = self.raw_normal(f);
                let side = |c: usize| {
                    let opp = self.cells[c].iter().find(|v| !f.contains(v)).unwrap();
                    rational::dot(&n, &rational::sub(&self.vertices[*opp], &self.vertices[f[0]])).signum()
                };
                if side(cs[0]) == side(cs[1]) {
                    return Err(Error::NonConforming(format!("cells {} and {} overlap across {:?}", cs[0], cs[1], f)));
                }
            }
        }
        Ok(())
    }

    fn raw_normal(&self, facet: &[usize]) -> Vector {
        let pts: Vec<Vector> = facet.iter().map(|&v| self.vertices[v].clone()).collect();
        hyperplane_normal(&pts, self.dim)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Vector] {
        &self.vertices
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    /// `|Δ_ℓ(𝒯_h)|`.
    pub fn count(&self, l: usize) -> usize {
        self.faces.get(l).map_or(0, Vec::len)
    }

    pub fn faces(&self, l: usize) -> &[Vec<usize>] {
        &self.faces[l]
    }

    pub fn face_index(&self, ids: &[usize]) -> Option<usize> {
        self.lookup.get(ids).copied().filter(|&i| self.faces[ids.len() - 1].get(i).is_some_and(|f| f == ids))
    }

    pub fn facet_cells(&self, facet: &[usize]) -> &[usize] {
        let i = self.face_index(facet).expect("facet of the mesh");
        &self.facet_cells[i]
    }

    pub fn interior_facets(&self) -> Vec<&Vec<usize>> {
        self.faces[self.dim - 1].iter().zip(&self.facet_cells).filter(|(_, c)| c.len() == 2).map(|(f, _)| f).collect()
    }

    /// Cells containing all of `ids`.
    pub fn cells_containing(&self, ids: &[usize]) -> Vec<usize> {
        (0..self.cells.len()).filter(|&c| ids.iter().all(|v| self.cells[c].contains(v))).collect()
    }

    pub fn cell_simplex(&self, c: usize) -> Result<Simplex> {
        Simplex::new(self.cells[c].iter().map(|&v| self.vertices[v].clone()).collect())
    }

    /// Local sub-simplex of cell `c` with the given global ids.
    pub fn local_site(&self, c: usize, ids: &[usize]) -> Option<SubSimplexId> {
        let pos: Option<Vec<usize>> = ids.iter().map(|v| self.cells[c].iter().position(|w| w == v)).collect();
        pos.map(|p| SubSimplexId::new(p, self.dim).expect("nonempty"))
    }

    pub fn global_ids(&self, c: usize, f: &SubSimplexId) -> Vec<usize> {
        f.indices().iter().map(|&i| self.cells[c][i]).collect()
    }

    /// Normal of a facet pointing from its lower-index cell to the higher one, outward on the boundary.
    pub fn facet_normal(&self, facet: &[usize]) -> Vector {
        let n = self.raw_normal(facet);
        let c0 = self.facet_cells(facet)[0];
        let opp = self.cells[c0].iter().find(|v| !facet.contains(v)).unwrap();
        let s = rational::dot(&n, &rational::sub(&self.vertices[*opp], &self.vertices[facet[0]]));
        if s.is_positive() {
            rational::scale(&n, &rational::int(-1))
        } else {
            n
        }
    }

    pub fn total_volume(&self) -> Q {
        (0..self.cells.len()).map(|c| self.cell_simplex(c).expect("validated").volume()).sum()
    }

    /// Uniform refinement: bisection, red, or Bey's tetrahedral refinement.
    pub fn refine(&self) -> Result<Self> {
        let mut vertices = self.vertices.clone();
        let mut mid: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for e in &self.faces[1] {
            let m = rational::scale(&rational::add(&self.vertices[e[0]], &self.vertices[e[1]]), &rational::frac(1, 2));
            mid.insert((e[0], e[1]), vertices.len());
            vertices.push(m);
        }
        let m = |a: usize, b: usize| mid[&(a.min(b), a.max(b))];
        let mut cells = Vec::new();
        for c in &self.cells {
            match self.dim {
                1 => {
                    let x = m(c[0], c[1]);
                    cells.push(vec![c[0], x]);
                    cells.push(vec![x, c[1]]);
                }
                2 => {
                    let (a, b, d) = (c[0], c[1], c[2]);
                    let (ab, ad, bd) = (m(a, b), m(a, d), m(b, d));
                    cells.extend([vec![a, ab, ad], vec![b, ab, bd], vec![d, ad, bd], vec![ab, bd, ad]]);
                }
                3 => {
                    let x = |i: usize, j: usize| if i == j { c[i] } else { m(c[i], c[j]) };
                    let kids: [[(usize, usize); 4]; 8] = [
                        [(0, 0), (0, 1), (0, 2), (0, 3)],
                        [(0, 1), (1, 1), (1, 2), (1, 3)],
                        [(0, 2), (1, 2), (2, 2), (2, 3)],
                        [(0, 3), (1, 3), (2, 3), (3, 3)],
                        [(0, 1), (0, 2), (0, 3), (1, 3)],
                        [(0, 1), (0, 2), (1, 2), (1, 3)],
                        [(0, 2), (0, 3), (1, 3), (2, 3)],
                        [(0, 2), (1, 2), (1, 3), (2, 3)],
                    ];
                    for k in kids {
                        cells.push(k.iter().map(|&(i, j)| x(i, j)).collect());
                    }
                }
                d => return Err(Error::Unsupported(format!("refinement in dimension {d}"))),
            }
        }
        Self::new(self.dim, vertices, cells)
    }

    pub fn to_json(&self) -> MeshFile {
        let pair = |q: &Q| -> Result<[i64; 2]> {
            let num = q.numer().to_i64().ok_or_else(|| Error::MeshFile("numerator overflows i64".into()))?;
            let den = q.denom().to_i64().ok_or_else(|| Error::MeshFile("denominator overflows i64".into()))?;
            Ok([num, den])
        };
        MeshFile {
            dim: self.dim,
            vertices: self
                .vertices
                .iter()
                .map(|v| v.iter().map(|q| pair(q).expect("small coordinates")).collect())
                .collect(),
            cells: self.cells.clone(),
        }
    }

    pub fn from_file(file: MeshFile) -> Result<Self> {
        let vertices = file
            .vertices
            .iter()
            .map(|v| {
                v.iter()
                    .map(|[a, b]| {
                        if *b == 0 {
                            Err(Error::MeshFile("zero denominator".into()))
                        } else {
                            Ok(Q::new(BigInt::from(*a), BigInt::from(*b)))
                        }
                    })
                    .collect::<Result<Vector>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(file.dim, vertices, file.cells)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::MeshFile(format!("{}: {e}", path.display())))?;
        let file: MeshFile =
            serde_json::from_str(&text).map_err(|e| Error::MeshFile(format!("{}: {e}", path.display())))?;
        Self::from_file(file)
    }
}

/// On-disk mesh: rationals as `[numerator, denominator]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeshFile {
    pub dim: usize,
    pub vertices: Vec<Vec<[i64; 2]>>,
    pub cells: Vec<Vec<usize>>,
}

fn qv(xs: &[i64]) -> Vector {
    xs.iter().map(|&x| rational::int(x)).collect()
}

pub fn unit_interval(k: usize) -> Result<Mesh> {
    if k == 0 {
        return Err(Error::UnknownMesh("unit_interval_0".into()));
    }
    let vertices = (0..=k as i64).map(|i| vec![rational::frac(i, k as i64)]).collect();
    Mesh::new(1, vertices, (0..k).map(|i| vec![i, i + 1]).collect())
}

pub fn two_triangles() -> Mesh {
    let v = [[0, 0], [1, 0], [1, 1], [0, 1]].iter().map(|p| qv(p)).collect();
    Mesh::new(2, v, vec![vec![0, 1, 2], vec![0, 2, 3]]).expect("valid")
}

pub fn criss_cross() -> Mesh {
    let mut v: Vec<Vector> = [[0, 0], [1, 0], [1, 1], [0, 1]].iter().map(|p| qv(p)).collect();
    v.push(vec![rational::frac(1, 2), rational::frac(1, 2)]);
    Mesh::new(2, v, vec![vec![0, 1, 4], vec![1, 2, 4], vec![2, 3, 4], vec![0, 3, 4]]).expect("valid")
}

pub fn two_tets() -> Mesh {
    let v = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 1]].iter().map(|p| qv(p)).collect();
    Mesh::new(3, v, vec![vec![0, 1, 2, 3], vec![1, 2, 3, 4]]).expect("valid")
}

/// Unit cubes at the given integer origins, each split into the six tets along its main diagonal.
fn kuhn_cubes(origins: &[[i64; 3]]) -> Mesh {
    let mut index: BTreeMap<[i64; 3], usize> = BTreeMap::new();
    let mut vertices = Vec::new();
    let mut id = |p: [i64; 3], vertices: &mut Vec<Vector>| {
        *index.entry(p).or_insert_with(|| {
            vertices.push(qv(&p));
            vertices.len() - 1
        })
    };
    let mut cells = Vec::new();
    for o in origins {
        for perm in (0..3).permutations(3) {
            let mut p = *o;
            let mut cell = vec![id(p, &mut vertices)];
            for &axis in &perm {
                p[axis] += 1;
                cell.push(id(p, &mut vertices));
            }
            cells.push(cell);
        }
    }
    Mesh::new(3, vertices, cells).expect("valid")
}

pub fn cube_freudenthal() -> Mesh {
    kuhn_cubes(&[[0, 0, 0]])
}

/// `[-1, 1]³` without the positive octant, as seven Kuhn cubes.
pub fn fichera_coarse() -> Mesh {
    let origins: Vec<[i64; 3]> = [-1, 0]
        .into_iter()
        .flat_map(|z| [-1, 0].into_iter().flat_map(move |y| [-1, 0].into_iter().map(move |x| [x, y, z])))
        .filter(|o| *o != [0, 0, 0])
        .collect();
    kuhn_cubes(&origins)
}

pub const BUILTIN_NAMES: [&str; 6] =
    ["unit_interval_k", "two_triangles", "criss_cross", "two_tets", "fichera_coarse", "cube_freudenthal"];

/// Builtin by name, `refine(<name>)` nesting allowed, or a JSON file path.
pub fn builtin(name: &str) -> Result<Mesh> {
    let name = name.trim();
    if let Some(inner) = name.strip_prefix("refine(").and_then(|s| s.strip_suffix(')')) {
        return builtin(inner)?.refine();
    }
    if let Some(k) = name.strip_prefix("unit_interval_") {
        let k: usize = k.parse().map_err(|_| Error::UnknownMesh(name.into()))?;
        return unit_interval(k);
    }
    match name {
        "two_triangles" => Ok(two_triangles()),
        "criss_cross" => Ok(criss_cross()),
        "two_tets" => Ok(two_tets()),
        "fichera_coarse" => Ok(fichera_coarse()),
        "cube_freudenthal" => Ok(cube_freudenthal()),
        _ if Path::new(name).is_file() => Mesh::load(Path::new(name)),
        _ => Err(Error::UnknownMesh(name.into())),
    }
}

/// Default mesh for a dimension.
pub fn default_mesh_name(n: usize) -> &'static str {
    match n {
        1 => "unit_interval_2",
        2 => "two_triangles",
        _ => "two_tets",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_counts() {
        let m = two_triangles();
        assert_eq!((m.count(0), m.count(1), m.count(2)), (4, 5, 2));
        let r = builtin("refine(two_triangles)").unwrap();
        assert_eq!((r.count(0), r.num_cells()), (9, 8));
        let c = cube_freudenthal();
        assert_eq!((c.count(0), c.num_cells()), (8, 6));
        assert!(c.interior_facets().iter().all(|f| c.facet_cells(f).len() == 2));
        let f = fichera_coarse();
        assert_eq!(f.num_cells(), 42);
        assert_eq!(f.total_volume(), rational::int(7));
        assert_eq!(builtin("refine(two_tets)").unwrap().num_cells(), 16);
        assert_eq!(builtin("refine(refine(unit_interval_2))").unwrap().num_cells(), 8);
        assert!(matches!(builtin("nope"), Err(Error::UnknownMesh(_))));
    }

    #[test]
    fn refinement_keeps_volume() {
        for m in [two_tets(), cube_freudenthal(), criss_cross()] {
            assert_eq!(m.refine().unwrap().total_volume(), m.total_volume());
        }
    }

    #[test]
    fn hanging_node_rejected() {
        let v = [[0, 0], [2, 0], [0, 2], [1, 0], [2, 2]].iter().map(|p| qv(p)).collect();
        assert!(Mesh::new(2, v, vec![vec![0, 1, 2], vec![1, 2, 4], vec![0, 3, 2]]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let m = builtin("refine(criss_cross)").unwrap();
        let text = serde_json::to_string(&m.to_json()).unwrap();
        let back = Mesh::from_file(serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.vertices(), m.vertices());
        assert_eq!(back.cells(), m.cells());
    }
}
