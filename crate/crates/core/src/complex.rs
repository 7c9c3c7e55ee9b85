//! Cell complexes with integer incidence and the closed oriented manifolds
//! built on them, together with their subdivisions and dual decompositions.

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Simplicial,
    Cw,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Simplicial => "simplicial",
            Mode::Cw => "cw",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cell {
    pub id: String,
    pub dim: usize,
    /// Vertex indices in increasing order (simplicial mode only).
    pub vertices: Option<Vec<usize>>,
    /// Label of the point at which sections over this cell are evaluated.
    pub anchor: String,
}

/// A finite cell complex. Cells are stored grouped by dimension; within a
/// dimension they keep their input order, and that order fixes the basis of
/// every chain group built on the complex.
#[derive(Clone, Debug)]
pub struct Complex {
    mode: Mode,
    cells: Vec<Cell>,
    by_dim: Vec<Vec<usize>>,
    pos: Vec<usize>,
    facets: Vec<Vec<(usize, i64)>>,
    cofacets: Vec<Vec<(usize, i64)>>,
    vertex_labels: Vec<String>,
    index: HashMap<String, usize>,
}

/// Serialized complex description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawComplex {
    pub mode: Mode,
    pub cells: Vec<RawCell>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawCell {
    pub id: String,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertices: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub faces: Option<Vec<(String, i64)>>,
}

/// Validates a raw description and computes incidence numbers.
pub fn build_complex(raw: &RawComplex) -> Result<Complex> {
    let mut seen = BTreeSet::new();
    for c in &raw.cells {
        if !seen.insert(c.id.as_str()) {
            return Err(Error::InvalidCell(format!("duplicate id {}", c.id)));
        }
    }
    let mut order: Vec<usize> = (0..raw.cells.len()).collect();
    order.sort_by_key(|&i| raw.cells[i].dim);
    let index: HashMap<String, usize> = order.iter().enumerate().map(|(g, &i)| (raw.cells[i].id.clone(), g)).collect();

    match raw.mode {
        Mode::Simplicial => {
            let mut vertex_labels = Vec::new();
            let mut vindex = HashMap::new();
            for &i in &order {
                let c = &raw.cells[i];
                if c.dim == 0 {
                    let vs = c.vertices.clone().unwrap_or_else(|| vec![c.id.clone()]);
                    if vs.len() != 1 {
                        return Err(Error::InvalidCell(format!("vertex {} must list one vertex", c.id)));
                    }
                    vindex.insert(vs[0].clone(), vertex_labels.len());
                    vertex_labels.push(vs[0].clone());
                }
            }
            let mut cells = Vec::with_capacity(order.len());
            for &i in &order {
                let c = &raw.cells[i];
                let labels = match (&c.vertices, c.dim) {
                    (Some(v), _) => v.clone(),
                    (None, 0) => vec![c.id.clone()],
                    (None, _) => return Err(Error::InvalidCell(format!("simplicial cell {} has no vertices", c.id))),
                };
                if labels.len() != c.dim + 1 {
                    return Err(Error::InvalidCell(format!("cell {} of dimension {} lists {} vertices", c.id, c.dim, labels.len())));
                }
                let mut vs = Vec::with_capacity(labels.len());
                for l in &labels {
                    let Some(&v) = vindex.get(l) else {
                        return Err(Error::DanglingFace { cell: c.id.clone(), face: l.clone() });
                    };
                    vs.push(v);
                }
                vs.sort_unstable();
                if vs.windows(2).any(|w| w[0] == w[1]) {
                    return Err(Error::InvalidCell(format!("cell {} repeats a vertex", c.id)));
                }
                let anchor = vertex_labels[vs[0]].clone();
                cells.push(Cell { id: c.id.clone(), dim: c.dim, vertices: Some(vs), anchor });
            }
            Complex::assemble_simplicial(cells, vertex_labels, index)
        }
        Mode::Cw => {
            let mut cells = Vec::with_capacity(order.len());
            let mut facets = Vec::with_capacity(order.len());
            for &i in &order {
                let c = &raw.cells[i];
                let mut fs: Vec<(usize, i64)> = Vec::new();
                for (fid, coeff) in c.faces.iter().flatten() {
                    let Some(&f) = index.get(fid) else {
                        return Err(Error::DanglingFace { cell: c.id.clone(), face: fid.clone() });
                    };
                    if raw.cells[order[f]].dim + 1 != c.dim {
                        return Err(Error::InvalidCell(format!("face {fid} of {} does not have dimension {}", c.id, c.dim as i64 - 1)));
                    }
                    match fs.iter_mut().find(|(g, _)| *g == f) {
                        Some(entry) => entry.1 += coeff,
                        None => fs.push((f, *coeff)),
                    }
                }
                cells.push(Cell { id: c.id.clone(), dim: c.dim, vertices: None, anchor: c.id.clone() });
                facets.push(fs);
            }
            Complex::assemble(Mode::Cw, cells, facets, Vec::new(), index)
        }
    }
}

impl Complex {
    fn assemble_simplicial(cells: Vec<Cell>, vertex_labels: Vec<String>, index: HashMap<String, usize>) -> Result<Complex> {
        let by_vertices: HashMap<Vec<usize>, usize> =
            cells.iter().enumerate().map(|(g, c)| (c.vertices.clone().expect("simplicial cell"), g)).collect();
        let mut facets = Vec::with_capacity(cells.len());
        for c in &cells {
            let vs = c.vertices.as_ref().expect("simplicial cell");
            let mut fs = Vec::new();
            if c.dim > 0 {
                for omit in 0..vs.len() {
                    let face: Vec<usize> = vs.iter().enumerate().filter(|&(k, _)| k != omit).map(|(_, &v)| v).collect();
                    let Some(&f) = by_vertices.get(&face) else {
                        let label: Vec<&str> = face.iter().map(|&v| vertex_labels[v].as_str()).collect();
                        return Err(Error::DanglingFace { cell: c.id.clone(), face: label.join(",") });
                    };
                    fs.push((f, if omit % 2 == 0 { 1 } else { -1 }));
                }
            }
            facets.push(fs);
        }
        Complex::assemble(Mode::Simplicial, cells, facets, vertex_labels, index)
    }

    fn assemble(
        mode: Mode,
        cells: Vec<Cell>,
        facets: Vec<Vec<(usize, i64)>>,
        vertex_labels: Vec<String>,
        index: HashMap<String, usize>,
    ) -> Result<Complex> {
        let top = cells.iter().map(|c| c.dim).max();
        let mut by_dim = vec![Vec::new(); top.map_or(0, |d| d + 1)];
        let mut pos = vec![0; cells.len()];
        for (g, c) in cells.iter().enumerate() {
            pos[g] = by_dim[c.dim].len();
            by_dim[c.dim].push(g);
        }
        let mut cofacets = vec![Vec::new(); cells.len()];
        for (g, fs) in facets.iter().enumerate() {
            for &(f, e) in fs {
                cofacets[f].push((g, e));
            }
        }
        let complex = Complex { mode, cells, by_dim, pos, facets, cofacets, vertex_labels, index };
        complex.check_boundary_squared()?;
        Ok(complex)
    }

    fn check_boundary_squared(&self) -> Result<()> {
        for (g, fs) in self.facets.iter().enumerate() {
            let mut acc: HashMap<usize, i64> = HashMap::new();
            for &(f, a) in fs {
                for &(h, b) in &self.facets[f] {
                    *acc.entry(h).or_default() += a * b;
                }
            }
            if let Some((&h, _)) = acc.iter().filter(|(_, &v)| v != 0).min_by_key(|(&h, _)| h) {
                return Err(Error::InvalidIncidence { cell: self.cells[g].id.clone(), face: self.cells[h].id.clone() });
            }
        }
        Ok(())
    }

    /// Simplicial complex generated by the closures of the given simplices.
    /// Vertex order is the order of `vertex_labels`; cell ids are the vertex
    /// labels joined by commas.
    pub fn from_facets(vertex_labels: Vec<String>, simplices: &[Vec<usize>]) -> Result<Complex> {
        let mut all: BTreeSet<(usize, Vec<usize>)> = BTreeSet::new();
        for s in simplices {
            let mut s = s.clone();
            s.sort_unstable();
            if s.windows(2).any(|w| w[0] == w[1]) || s.iter().any(|&v| v >= vertex_labels.len()) {
                return Err(Error::InvalidCell(format!("bad simplex {s:?}")));
            }
            let k = s.len();
            for mask in 1u64..(1u64 << k) {
                let face: Vec<usize> = (0..k).filter(|b| mask >> b & 1 == 1).map(|b| s[b]).collect();
                all.insert((face.len() - 1, face));
            }
        }
        let cells: Vec<Cell> = all
            .into_iter()
            .map(|(dim, vs)| {
                let id = vs.iter().map(|&v| vertex_labels[v].as_str()).collect::<Vec<_>>().join(",");
                let anchor = vertex_labels[vs[0]].clone();
                Cell { id, dim, vertices: Some(vs), anchor }
            })
            .collect();
        let index = cells.iter().enumerate().map(|(g, c)| (c.id.clone(), g)).collect();
        Complex::assemble_simplicial(cells, vertex_labels, index)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Top dimension; 0 for an empty complex.
    pub fn dim(&self) -> usize {
        self.by_dim.len().saturating_sub(1)
    }

    pub fn cell(&self, g: usize) -> &Cell {
        &self.cells[g]
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Global indices of the cells of dimension `q` (empty past the top).
    pub fn cells_of_dim(&self, q: usize) -> &[usize] {
        self.by_dim.get(q).map_or(&[], Vec::as_slice)
    }

    /// Position of a cell within its dimension.
    pub fn position(&self, g: usize) -> usize {
        self.pos[g]
    }

    pub fn count(&self, q: usize) -> usize {
        self.cells_of_dim(q).len()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.by_dim.iter().map(Vec::len).collect()
    }

    /// Codimension-one faces with incidence numbers.
    pub fn facets(&self, g: usize) -> &[(usize, i64)] {
        &self.facets[g]
    }

    pub fn cofacets(&self, g: usize) -> &[(usize, i64)] {
        &self.cofacets[g]
    }

    pub fn incidence(&self, cell: usize, face: usize) -> i64 {
        self.facets[cell].iter().filter(|(f, _)| *f == face).map(|(_, e)| e).sum()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn vertex_labels(&self) -> &[String] {
        &self.vertex_labels
    }

    /// All faces of a cell (excluding itself), any codimension.
    pub fn proper_faces(&self, g: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        let mut stack: Vec<usize> = self.facets[g].iter().map(|&(f, _)| f).collect();
        while let Some(f) = stack.pop() {
            if out.insert(f) {
                stack.extend(self.facets[f].iter().map(|&(h, _)| h));
            }
        }
        out
    }

    /// Structural equality of cells and incidence.
    pub fn same_as(&self, other: &Complex) -> bool {
        self.mode == other.mode && self.cells == other.cells && self.facets == other.facets
    }

    pub fn is_face_of(&self, face: usize, cell: usize) -> bool {
        face == cell || self.proper_faces(cell).contains(&face)
    }

    /// Integer boundary matrix `C_q → C_{q-1}` in the dimension-local bases.
    pub fn boundary_matrix(&self, q: usize) -> Vec<Vec<i64>> {
        let rows = if q == 0 { 0 } else { self.count(q - 1) };
        let mut m = vec![vec![0i64; self.count(q)]; rows];
        for (j, &g) in self.cells_of_dim(q).iter().enumerate() {
            for &(f, e) in &self.facets[g] {
                m[self.pos[f]][j] += e;
            }
        }
        m
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.by_dim.iter().enumerate().map(|(q, c)| if q % 2 == 0 { c.len() as i64 } else { -(c.len() as i64) }).sum()
    }

    pub fn to_raw(&self) -> RawComplex {
        let cells = self
            .cells
            .iter()
            .enumerate()
            .map(|(g, c)| match self.mode {
                Mode::Simplicial => RawCell {
                    id: c.id.clone(),
                    dim: c.dim,
                    vertices: c.vertices.as_ref().map(|vs| vs.iter().map(|&v| self.vertex_labels[v].clone()).collect()),
                    faces: None,
                },
                Mode::Cw => RawCell {
                    id: c.id.clone(),
                    dim: c.dim,
                    vertices: None,
                    faces: (c.dim > 0).then(|| self.facets[g].iter().map(|&(f, e)| (self.cells[f].id.clone(), e)).collect()),
                },
            })
            .collect();
        RawComplex { mode: self.mode, cells }
    }
}

/// Euler characteristic: alternating sum of cell counts.
pub fn euler_characteristic(c: &Complex) -> i64 {
    c.euler_characteristic()
}

/// A closed complex together with a fundamental cycle.
#[derive(Clone, Debug)]
pub struct OrientedManifoldComplex {
    pub base: Complex,
    pub n: usize,
    /// Sign of each top cell in the fundamental cycle, indexed by position.
    pub fundamental: Vec<i64>,
}

impl OrientedManifoldComplex {
    pub fn orientation_of(&self, g: usize) -> i64 {
        debug_assert_eq!(self.base.cell(g).dim, self.n);
        self.fundamental[self.base.position(g)]
    }

    /// Boundary of the fundamental chain, indexed by `(n-1)`-cell position.
    pub fn fundamental_boundary(&self) -> Vec<i64> {
        if self.n == 0 {
            return Vec::new();
        }
        let mut out = vec![0; self.base.count(self.n - 1)];
        for (k, &t) in self.base.cells_of_dim(self.n).iter().enumerate() {
            for &(f, e) in self.base.facets(t) {
                out[self.base.position(f)] += self.fundamental[k] * e;
            }
        }
        out
    }
}

/// Finds a fundamental cycle by sign propagation across codimension-one
/// cells. The first top cell of each component gets `+1`.
pub fn orient_closed_manifold(c: Complex) -> Result<OrientedManifoldComplex> {
    let n = c.dim();
    let tops = c.cells_of_dim(n).to_vec();
    if c.is_empty() || n == 0 {
        let fundamental = vec![1; tops.len()];
        return Ok(OrientedManifoldComplex { base: c, n, fundamental });
    }
    // adjacency of top cells through codimension-one cells
    let mut links: Vec<Vec<(usize, i64, i64, usize)>> = vec![Vec::new(); tops.len()];
    for &f in c.cells_of_dim(n - 1) {
        let cof: Vec<(usize, i64)> = c.cofacets(f).iter().filter(|(_, e)| *e != 0).map(|&(t, e)| (c.position(t), e)).collect();
        let total: i64 = cof.iter().map(|(_, e)| e.abs()).sum();
        let ok = match c.mode() {
            Mode::Simplicial => cof.len() == 2,
            Mode::Cw => total == 0 || total == 2,
        };
        if !ok {
            return Err(Error::NotPseudoManifold { cell: c.cell(f).id.clone(), cofaces: cof.len() });
        }
        match cof.as_slice() {
            [(a, ea), (b, eb)] => {
                links[*a].push((*b, *ea, *eb, f));
                links[*b].push((*a, *eb, *ea, f));
            }
            [(_, e)] if e.abs() == 2 => return Err(Error::NonOrientable { cell: c.cell(f).id.clone() }),
            _ => {}
        }
    }
    let mut sign = vec![0i64; tops.len()];
    for seed in 0..tops.len() {
        if sign[seed] != 0 {
            continue;
        }
        sign[seed] = 1;
        let mut queue = VecDeque::from([seed]);
        while let Some(t) = queue.pop_front() {
            for &(u, et, eu, f) in &links[t] {
                // sign[t]·et + sign[u]·eu = 0
                let want = -sign[t] * et * eu;
                if sign[u] == 0 {
                    sign[u] = want;
                    queue.push_back(u);
                } else if sign[u] != want {
                    return Err(Error::NonOrientable { cell: c.cell(f).id.clone() });
                }
            }
        }
    }
    let m = OrientedManifoldComplex { base: c, n, fundamental: sign };
    if let Some(k) = m.fundamental_boundary().iter().position(|&v| v != 0) {
        let f = m.base.cells_of_dim(n - 1)[k];
        return Err(Error::NonOrientable { cell: m.base.cell(f).id.clone() });
    }
    Ok(m)
}

/// Carrier data of a subdivision `τ' → τ` and the integer chain inclusion
/// `i: C_*(τ) → C_*(τ')`.
#[derive(Clone, Debug)]
pub struct SubdivisionMap {
    /// Smallest cell of τ containing each cell of τ'.
    pub carrier: Vec<usize>,
    /// For each cell of τ, the equidimensional cells of τ' it is split into,
    /// with orientation signs.
    pub pieces: Vec<Vec<(usize, i64)>>,
}

impl SubdivisionMap {
    /// Derives the chain inclusion from a carrier map by propagating piece
    /// orientations across interior faces and matching `∂ i = i ∂`.
    pub fn from_carrier(coarse: &Complex, fine: &Complex, carrier: Vec<usize>) -> Result<SubdivisionMap> {
        if carrier.len() != fine.len() {
            return Err(Error::NotASubdivision("carrier map has the wrong length".into()));
        }
        for (g, &k) in carrier.iter().enumerate() {
            if coarse.cell(k).dim < fine.cell(g).dim {
                return Err(Error::NotASubdivision(format!(
                    "cell {} has lower-dimensional carrier {}",
                    fine.cell(g).id,
                    coarse.cell(k).id
                )));
            }
            for &(f, _) in fine.facets(g) {
                if !coarse.is_face_of(carrier[f], k) {
                    return Err(Error::NotASubdivision(format!(
                        "carrier of face {} is not a face of {}",
                        fine.cell(f).id,
                        coarse.cell(k).id
                    )));
                }
            }
        }
        let mut pieces: Vec<Vec<(usize, i64)>> = vec![Vec::new(); coarse.len()];
        for (g, &k) in carrier.iter().enumerate() {
            if fine.cell(g).dim == coarse.cell(k).dim {
                pieces[k].push((g, 0));
            }
        }
        for q in 0..=coarse.dim() {
            for &s in coarse.cells_of_dim(q) {
                if pieces[s].is_empty() {
                    return Err(Error::NotASubdivision(format!("cell {} has no pieces", coarse.cell(s).id)));
                }
                if q == 0 {
                    if pieces[s].len() != 1 {
                        return Err(Error::NotASubdivision(format!("vertex {} split", coarse.cell(s).id)));
                    }
                    pieces[s][0].1 = 1;
                    continue;
                }
                let mut target: HashMap<usize, i64> = HashMap::new();
                for &(f, a) in coarse.facets(s) {
                    for &(p, sp) in &pieces[f] {
                        *target.entry(p).or_default() += a * sp;
                    }
                }
                let idx: HashMap<usize, usize> = pieces[s].iter().enumerate().map(|(k, &(p, _))| (p, k)).collect();
                let mut sign = vec![0i64; pieces[s].len()];
                let mut queue = VecDeque::new();
                'seed: for (k, &(p, _)) in pieces[s].iter().enumerate() {
                    for &(f, e) in fine.facets(p) {
                        if carrier[f] != s {
                            let t = target.get(&f).copied().unwrap_or(0);
                            if t != 0 && t % e == 0 {
                                sign[k] = t / e;
                                queue.push_back(k);
                                break 'seed;
                            }
                        }
                    }
                }
                while let Some(k) = queue.pop_front() {
                    let p = pieces[s][k].0;
                    for &(f, e) in fine.facets(p) {
                        if carrier[f] != s {
                            continue;
                        }
                        for &(o, eo) in fine.cofacets(f) {
                            if let Some(&ko) = idx.get(&o) {
                                if ko != k && sign[ko] == 0 {
                                    sign[ko] = -sign[k] * e * eo;
                                    queue.push_back(ko);
                                }
                            }
                        }
                    }
                }
                for (k, v) in sign.into_iter().enumerate() {
                    pieces[s][k].1 = v;
                }
                // verify ∂' i(s) = i(∂s)
                let mut got: HashMap<usize, i64> = HashMap::new();
                for &(p, sp) in &pieces[s] {
                    for &(f, e) in fine.facets(p) {
                        *got.entry(f).or_default() += sp * e;
                    }
                }
                got.retain(|_, v| *v != 0);
                target.retain(|_, v| *v != 0);
                if got != target || pieces[s].iter().any(|&(_, v)| v.abs() != 1) {
                    return Err(Error::NotASubdivision(format!("pieces of {} do not assemble into a chain", coarse.cell(s).id)));
                }
            }
        }
        Ok(SubdivisionMap { carrier, pieces })
    }

    /// The identity subdivision of a complex onto itself.
    pub fn identity(c: &Complex) -> SubdivisionMap {
        SubdivisionMap { carrier: (0..c.len()).collect(), pieces: (0..c.len()).map(|g| vec![(g, 1)]).collect() }
    }
}

/// Transports an orientation along a subdivision: the fundamental cycle of
/// the fine complex is the image of the coarse one.
fn transported_orientation(m: &OrientedManifoldComplex, fine: Complex, map: &SubdivisionMap) -> OrientedManifoldComplex {
    let mut fundamental = vec![0; fine.count(m.n)];
    for (k, &t) in m.base.cells_of_dim(m.n).iter().enumerate() {
        for &(p, s) in &map.pieces[t] {
            fundamental[fine.position(p)] = m.fundamental[k] * s;
        }
    }
    OrientedManifoldComplex { base: fine, n: m.n, fundamental }
}

/// Subdivision whose vertices are images of point sets of the coarse
/// complex; each fine cell is carried by the coarse cell spanned by the
/// union of its vertices' images.
fn subdivide_by_vertex_images(
    m: &OrientedManifoldComplex,
    labels: Vec<String>,
    images: Vec<BTreeSet<usize>>,
    simplices: &[Vec<usize>],
) -> Result<(OrientedManifoldComplex, SubdivisionMap)> {
    let coarse = &m.base;
    let fine = Complex::from_facets(labels, simplices)?;
    let by_vertices: HashMap<Vec<usize>, usize> =
        coarse.cells().iter().enumerate().map(|(g, c)| (c.vertices.clone().unwrap_or_default(), g)).collect();
    let mut carrier = Vec::with_capacity(fine.len());
    for c in fine.cells() {
        let span: BTreeSet<usize> = c.vertices.as_ref().expect("simplicial").iter().flat_map(|&v| images[v].iter().copied()).collect();
        let key: Vec<usize> = span.into_iter().collect();
        let Some(&k) = by_vertices.get(&key) else {
            return Err(Error::NotASubdivision(format!("cell {} has no carrier", c.id)));
        };
        carrier.push(k);
    }
    let map = SubdivisionMap::from_carrier(coarse, &fine, carrier)?;
    Ok((transported_orientation(m, fine, &map), map))
}

/// First barycentric subdivision. Fine vertices are the barycenters
/// `b(<cell id>)`, ordered like the coarse cells (so by dimension first);
/// fine simplices are flags of coarse cells.
pub fn barycentric_subdivision(m: &OrientedManifoldComplex) -> Result<(OrientedManifoldComplex, SubdivisionMap)> {
    let c = &m.base;
    if c.mode() != Mode::Simplicial {
        return Err(Error::ModeMismatch { expected: "simplicial" });
    }
    let labels: Vec<String> = c.cells().iter().map(|cell| format!("b({})", cell.id)).collect();
    let images: Vec<BTreeSet<usize>> =
        c.cells().iter().map(|cell| cell.vertices.clone().unwrap_or_default().into_iter().collect()).collect();
    // maximal flags ending at each maximal cell
    let mut flags_to: Vec<Vec<Vec<usize>>> = vec![Vec::new(); c.len()];
    for g in 0..c.len() {
        let mut fl = vec![vec![g]];
        for &f in c.facets(g).iter().map(|(f, _)| f) {
            for chain in &flags_to[f] {
                let mut ch = chain.clone();
                ch.push(g);
                fl.push(ch);
            }
        }
        fl.retain(|ch| ch.len() == c.cell(g).dim + 1);
        fl.sort();
        fl.dedup();
        flags_to[g] = fl;
    }
    let simplices: Vec<Vec<usize>> = (0..c.len()).filter(|&g| c.cofacets(g).is_empty()).flat_map(|g| flags_to[g].clone()).collect();
    subdivide_by_vertex_images(m, labels, images, &simplices)
}

/// Stellar subdivision of one edge: a new vertex `m(<edge id>)` splits every
/// simplex containing the edge in two.
pub fn split_edge(m: &OrientedManifoldComplex, edge: &str) -> Result<(OrientedManifoldComplex, SubdivisionMap)> {
    let c = &m.base;
    if c.mode() != Mode::Simplicial {
        return Err(Error::ModeMismatch { expected: "simplicial" });
    }
    let e = c.index_of(edge).filter(|&g| c.cell(g).dim == 1).ok_or_else(|| Error::NotASubdivision(format!("{edge} is not an edge")))?;
    let ev = c.cell(e).vertices.clone().expect("simplicial");
    let (a, b) = (ev[0], ev[1]);
    let mut labels = c.vertex_labels().to_vec();
    let w = labels.len();
    labels.push(format!("m({edge})"));
    let mut images: Vec<BTreeSet<usize>> = (0..w).map(|v| BTreeSet::from([v])).collect();
    images.push(BTreeSet::from([a, b]));
    let mut simplices = Vec::new();
    for g in 0..c.len() {
        if !c.cofacets(g).is_empty() {
            continue;
        }
        let vs = c.cell(g).vertices.clone().expect("simplicial");
        if vs.contains(&a) && vs.contains(&b) {
            for drop in [a, b] {
                simplices.push(vs.iter().map(|&v| if v == drop { w } else { v }).collect());
            }
        } else {
            simplices.push(vs);
        }
    }
    subdivide_by_vertex_images(m, labels, images, &simplices)
}

/// Bijection between cells of τ and cells of the dual decomposition τ*.
#[derive(Clone, Debug)]
pub struct DualPairing {
    /// Global index in τ* of the dual of each cell of τ.
    pub dual_of: Vec<usize>,
    /// Global index in τ of the primal cell of each dual cell.
    pub primal_of: Vec<usize>,
    /// Label of the point where a cell and its dual meet.
    pub common_point: Vec<String>,
}

/// Sign relating the dual incidence to the primal one:
/// `ε*[Δ*, (Δ')*] = dual_incidence_sign(q, n) · ε[Δ', Δ]` for `dim Δ = q`.
pub fn dual_incidence_sign(q: usize, n: usize) -> i64 {
    let _ = n;
    if q.is_multiple_of(2) {
        -1
    } else {
        1
    }
}

/// The dual cell decomposition, realized abstractly: one `(n-q)`-cell
/// `*<id>` per primal `q`-cell, with transposed and sign-adjusted incidence.
pub fn dual_decomposition(m: &OrientedManifoldComplex) -> Result<(Complex, DualPairing)> {
    let c = &m.base;
    if c.is_empty() || m.n == 0 {
        return Err(Error::NotClosedManifold("dual decomposition needs dimension at least 1".into()));
    }
    if m.fundamental_boundary().iter().any(|&v| v != 0) {
        return Err(Error::NotClosedManifold("fundamental chain is not a cycle".into()));
    }
    let n = m.n;
    let mut raw_cells = Vec::with_capacity(c.len());
    for k in 0..=n {
        let q = n - k;
        for &g in c.cells_of_dim(q) {
            let faces: Vec<(String, i64)> =
                c.cofacets(g).iter().map(|&(h, e)| (format!("*{}", c.cell(h).id), dual_incidence_sign(q, n) * e)).collect();
            raw_cells.push(RawCell { id: format!("*{}", c.cell(g).id), dim: k, vertices: None, faces: (k > 0).then_some(faces) });
        }
    }
    let mut dual = build_complex(&RawComplex { mode: Mode::Cw, cells: raw_cells })?;
    let mut dual_of = vec![0; c.len()];
    let mut primal_of = vec![0; c.len()];
    let mut common_point = vec![String::new(); c.len()];
    for g in 0..c.len() {
        let d = dual.index_of(&format!("*{}", c.cell(g).id)).expect("dual cell");
        dual_of[g] = d;
        primal_of[d] = g;
        common_point[g] = format!("b({})", c.cell(g).id);
    }
    for g in 0..c.len() {
        dual.cells[dual_of[g]].anchor = common_point[g].clone();
    }
    Ok((dual, DualPairing { dual_of, primal_of, common_point }))
}

/// Chain map from the dual blocks into the barycentric subdivision: each
/// dual cell `Δ*` goes to the signed sum of fine simplices
/// `[b(Δ), b(ρ_{q+1}), …, b(ρ_n)]` over flags `Δ ⊂ ρ_{q+1} ⊂ … ⊂ ρ_n`.
/// Returned per primal cell as `(fine cell, sign)` lists.
pub fn dual_block_pieces(m: &OrientedManifoldComplex, fine: &Complex) -> Result<Vec<Vec<(usize, i64)>>> {
    let c = &m.base;
    if c.mode() != Mode::Simplicial {
        return Err(Error::ModeMismatch { expected: "simplicial" });
    }
    let n = m.n;
    let by_vertices: HashMap<Vec<usize>, usize> =
        fine.cells().iter().enumerate().map(|(g, cell)| (cell.vertices.clone().unwrap_or_default(), g)).collect();
    let mut out = vec![Vec::new(); c.len()];
    for g in 0..c.len() {
        let q = c.cell(g).dim;
        // upward flags from g to top cells
        let mut flags = vec![vec![g]];
        for _ in q..n {
            flags = flags
                .into_iter()
                .flat_map(|fl| {
                    let last = *fl.last().expect("nonempty");
                    c.cofacets(last)
                        .iter()
                        .map(|&(h, _)| {
                            let mut f2 = fl.clone();
                            f2.push(h);
                            f2
                        })
                        .collect::<Vec<_>>()
                })
                .collect();
        }
        let base_vs = c.cell(g).vertices.clone().expect("simplicial");
        for fl in flags {
            let top = *fl.last().expect("nonempty");
            // vertex order v_0..v_n: base simplex order, then the vertex added at each step
            let mut order = base_vs.clone();
            for w in fl.windows(2) {
                let lo = c.cell(w[0]).vertices.as_ref().expect("simplicial");
                let hi = c.cell(w[1]).vertices.as_ref().expect("simplicial");
                order.push(*hi.iter().find(|v| !lo.contains(v)).expect("new vertex"));
            }
            let sign = m.orientation_of(top) * permutation_sign(&order);
            let key: Vec<usize> = fl.clone();
            let Some(&piece) = by_vertices.get(&key) else {
                return Err(Error::NotASubdivision("fine complex is not the barycentric subdivision".into()));
            };
            out[g].push((piece, sign));
        }
    }
    Ok(out)
}

/// Sign of the permutation sorting `order` increasingly.
pub fn permutation_sign(order: &[usize]) -> i64 {
    let mut inversions = 0;
    for i in 0..order.len() {
        for j in i + 1..order.len() {
            if order[i] > order[j] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}
