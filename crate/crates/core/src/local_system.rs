//! Flat vector bundles given by transport matrices, and the twisted chain
//! complexes they define.
//!
//! Sections over a cell are identified with `k^r` through their value at the
//! cell's anchor. For an incident pair `(face, cell)` the system stores one or
//! more attachments `(ε_k, R_k)`; simplicial pairs always have exactly one,
//! with `ε` the incidence number and `R` the restriction of flat sections from
//! the cell to the face. CW pairs may list several attachments (one per sheet
//! of the attaching map) whose signs add up to the incidence number.

use std::collections::HashMap;
use std::sync::Arc;

use crate::complex::{dual_incidence_sign, Complex, DualPairing, Mode, SubdivisionMap};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::par;
use crate::scalar::Scalar;

/// Default relative tolerance for flatness and `∂² = 0` in float backends.
pub const FLAT_TOL: f64 = 1e-9;

/// Relative size below which a sum of attachment matrices counts as a
/// cancellation to zero.
const CANCEL_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    Real,
    Complex,
}

impl Field {
    pub fn tag(self) -> &'static str {
        match self {
            Field::Real => "R",
            Field::Complex => "C",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Attachment<S: Scalar> {
    pub sign: i64,
    pub matrix: Matrix<S>,
}

/// Transport supplied by the user for one `(face, cell)` pair.
#[derive(Clone, Debug)]
pub struct TransportEntry<S: Scalar> {
    pub face: String,
    pub cell: String,
    pub matrix: Matrix<S>,
    pub sign: Option<i64>,
}

/// Transports read from input, keyed by `(face, cell)` with an optional sign.
type GivenTransports<S> = HashMap<(usize, usize), Vec<(Option<i64>, Matrix<S>)>>;

#[derive(Clone, Debug)]
pub struct LocalSystem<S: Scalar> {
    complex: Arc<Complex>,
    rank: usize,
    field: Field,
    /// Per cell, aligned with `complex.facets(cell)`.
    attachments: Vec<Vec<Vec<Attachment<S>>>>,
}

fn residual<S: Scalar>(a: &Matrix<S>, b: &Matrix<S>) -> f64 {
    let scale = a.max_modulus().max(b.max_modulus()).max(1.0);
    a.sub(b).max_modulus() / scale
}

fn exceeds<S: Scalar>(a: &Matrix<S>, b: &Matrix<S>, tol: f64) -> Option<f64> {
    if S::EXACT {
        (a != b).then(|| residual(a, b).max(f64::MIN_POSITIVE))
    } else {
        let r = residual(a, b);
        (r > tol).then_some(r)
    }
}

impl<S: Scalar> LocalSystem<S> {
    /// Validates transports over `complex`. Simplicial complexes accept either
    /// every incident pair or only the vertex-edge pairs, from which the
    /// remaining restrictions are derived; CW complexes need every pair.
    pub fn build(complex: Arc<Complex>, rank: usize, field: Field, transports: &[TransportEntry<S>], tol: f64) -> Result<Self> {
        if rank == 0 {
            return Err(Error::InvalidCell("rank must be positive".into()));
        }
        if S::EXACT && field == Field::Complex {
            return Err(Error::Backend("complex coefficients in the exact backend".into()));
        }
        let mut given: GivenTransports<S> = HashMap::new();
        for sp in transports {
            let (Some(f), Some(g)) = (complex.index_of(&sp.face), complex.index_of(&sp.cell)) else {
                return Err(Error::MissingTransport { face: sp.face.clone(), cell: sp.cell.clone() });
            };
            if !complex.facets(g).iter().any(|&(h, _)| h == f) {
                return Err(Error::InvalidCell(format!("{} is not a facet of {}", sp.face, sp.cell)));
            }
            if sp.matrix.rows() != rank || sp.matrix.cols() != rank {
                return Err(Error::InvalidCell(format!("transport ({}, {}) is not {rank}x{rank}", sp.face, sp.cell)));
            }
            given.entry((f, g)).or_default().push((sp.sign, sp.matrix.clone()));
        }
        let pairs: Vec<(usize, usize)> = (0..complex.len()).flat_map(|g| complex.facets(g).iter().map(move |&(f, _)| (f, g))).collect();
        let complete = pairs.iter().all(|p| given.contains_key(p));
        let generator_mode = complex.mode() == Mode::Simplicial
            && !complete
            && given.keys().all(|&(f, g)| complex.cell(f).dim == 0 && complex.cell(g).dim == 1);
        let attachments = if generator_mode {
            Self::derive_from_edges(&complex, rank, &given)?
        } else {
            let mut out = Vec::with_capacity(complex.len());
            for g in 0..complex.len() {
                let mut per = Vec::new();
                for &(f, inc) in complex.facets(g) {
                    let Some(list) = given.get(&(f, g)) else {
                        return Err(Error::MissingTransport { face: complex.cell(f).id.clone(), cell: complex.cell(g).id.clone() });
                    };
                    per.push(Self::attachments_for(&complex, f, g, inc, list)?);
                }
                out.push(per);
            }
            out
        };
        let sys = LocalSystem { complex, rank, field, attachments };
        sys.check_invertible(tol)?;
        if sys.complex.mode() == Mode::Simplicial {
            sys.check_flat(tol)?;
        }
        Ok(sys)
    }

    fn attachments_for(complex: &Complex, f: usize, g: usize, inc: i64, list: &[(Option<i64>, Matrix<S>)]) -> Result<Vec<Attachment<S>>> {
        let ids = || (complex.cell(f).id.clone(), complex.cell(g).id.clone());
        let atts: Vec<Attachment<S>> = if list.len() == 1 {
            vec![Attachment { sign: list[0].0.unwrap_or(inc), matrix: list[0].1.clone() }]
        } else {
            let mut v = Vec::with_capacity(list.len());
            for (sign, m) in list {
                let Some(sign) = sign else {
                    let (face, cell) = ids();
                    return Err(Error::Parse(format!("repeated transport ({face}, {cell}) needs explicit signs")));
                };
                v.push(Attachment { sign: *sign, matrix: m.clone() });
            }
            v
        };
        let total: i64 = atts.iter().map(|a| a.sign).sum();
        let simplicial_bad = complex.mode() == Mode::Simplicial && atts.len() != 1;
        if total != inc || simplicial_bad {
            let (face, cell) = ids();
            return Err(Error::InvalidIncidence { cell, face });
        }
        Ok(atts)
    }

    fn derive_from_edges(complex: &Complex, rank: usize, given: &GivenTransports<S>) -> Result<Vec<Vec<Vec<Attachment<S>>>>> {
        let vertex_index: HashMap<usize, usize> =
            complex.cells_of_dim(0).iter().map(|&g| (complex.cell(g).vertices.as_ref().unwrap()[0], g)).collect();
        let mut edge_of: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edge_maps: HashMap<(usize, usize), Matrix<S>> = HashMap::new();
        for &e in complex.cells_of_dim(1) {
            let vs = complex.cell(e).vertices.as_ref().unwrap();
            edge_of.insert((vs[0], vs[1]), e);
            for &v in vs {
                let f = vertex_index[&v];
                let Some(list) = given.get(&(f, e)) else {
                    return Err(Error::MissingTransport { face: complex.cell(f).id.clone(), cell: complex.cell(e).id.clone() });
                };
                if list.len() != 1 {
                    return Err(Error::InvalidIncidence { cell: complex.cell(e).id.clone(), face: complex.cell(f).id.clone() });
                }
                edge_maps.insert((f, e), list[0].1.clone());
            }
        }
        // gauge of each cell relative to the fiber at its anchor vertex
        let gauge = |g: usize| -> Matrix<S> {
            if complex.cell(g).dim == 1 {
                let a = complex.cell(g).vertices.as_ref().unwrap()[0];
                edge_maps[&(vertex_index[&a], g)].clone()
            } else {
                Matrix::identity(rank)
            }
        };
        let transport = |a: usize, b: usize| -> Result<Matrix<S>> {
            if a == b {
                return Ok(Matrix::identity(rank));
            }
            let e = edge_of[&(a, b)];
            let ra = &edge_maps[&(vertex_index[&a], e)];
            let rb = &edge_maps[&(vertex_index[&b], e)];
            let inv = ra
                .inverse()
                .ok_or_else(|| Error::Singular { face: complex.cell(vertex_index[&a]).id.clone(), cell: complex.cell(e).id.clone() })?;
            Ok(rb.mul(&inv))
        };
        let mut out = Vec::with_capacity(complex.len());
        for g in 0..complex.len() {
            let mut per = Vec::new();
            for &(f, inc) in complex.facets(g) {
                let m = if complex.cell(g).dim == 1 {
                    edge_maps[&(f, g)].clone()
                } else {
                    let a = complex.cell(g).vertices.as_ref().unwrap()[0];
                    let b = complex.cell(f).vertices.as_ref().unwrap()[0];
                    let gf = gauge(f)
                        .inverse()
                        .ok_or_else(|| Error::Singular { face: complex.cell(f).id.clone(), cell: complex.cell(g).id.clone() })?;
                    gf.mul(&transport(a, b)?).mul(&gauge(g))
                };
                per.push(vec![Attachment { sign: inc, matrix: m }]);
            }
            out.push(per);
        }
        Ok(out)
    }

    fn check_invertible(&self, tol: f64) -> Result<()> {
        for g in 0..self.complex.len() {
            for (k, &(f, _)) in self.complex.facets(g).iter().enumerate() {
                for a in &self.attachments[g][k] {
                    let det = a.matrix.det();
                    let scale = a.matrix.max_modulus().powi(self.rank as i32).max(f64::MIN_POSITIVE);
                    let singular = if S::EXACT { det.is_zero_exact() } else { det.modulus() <= tol * scale };
                    if singular {
                        return Err(Error::Singular { face: self.complex.cell(f).id.clone(), cell: self.complex.cell(g).id.clone() });
                    }
                }
            }
        }
        Ok(())
    }

    /// Cocycle condition: the two routes from a simplex to a codimension-two
    /// face agree.
    fn check_flat(&self, tol: f64) -> Result<()> {
        let c = &self.complex;
        for g in 0..c.len() {
            let mut routes: HashMap<usize, (usize, Matrix<S>)> = HashMap::new();
            for (k, &(mid, _)) in c.facets(g).iter().enumerate() {
                let upper = &self.attachments[g][k][0].matrix;
                for (l, &(face, _)) in c.facets(mid).iter().enumerate() {
                    let path = self.attachments[mid][l][0].matrix.mul(upper);
                    match routes.get(&face) {
                        None => {
                            routes.insert(face, (mid, path));
                        }
                        Some((_, first)) => {
                            if let Some(r) = exceeds(first, &path, tol) {
                                return Err(Error::NotFlat {
                                    face: c.cell(face).id.clone(),
                                    mid: c.cell(mid).id.clone(),
                                    cell: c.cell(g).id.clone(),
                                    residual: r,
                                });
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn complex(&self) -> &Arc<Complex> {
        &self.complex
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn field(&self) -> Field {
        self.field
    }

    /// Attachments of the pair `(face, cell)`; empty if not incident.
    pub fn attachments(&self, face: usize, cell: usize) -> &[Attachment<S>] {
        self.complex.facets(cell).iter().position(|&(f, _)| f == face).map_or(&[], |k| self.attachments[cell][k].as_slice())
    }

    /// Restriction of flat sections from `cell` to any of its faces
    /// (simplicial systems, or codimension one with a single attachment).
    pub fn restriction(&self, face: usize, cell: usize) -> Result<Matrix<S>> {
        if face == cell {
            return Ok(Matrix::identity(self.rank));
        }
        let c = &self.complex;
        let missing = || Error::MissingTransport { face: c.cell(face).id.clone(), cell: c.cell(cell).id.clone() };
        if let [a] = self.attachments(face, cell) {
            return Ok(a.matrix.clone());
        }
        if c.mode() != Mode::Simplicial {
            return Err(missing());
        }
        for (k, &(mid, _)) in c.facets(cell).iter().enumerate() {
            if c.is_face_of(face, mid) {
                let lower = self.restriction(face, mid)?;
                return Ok(lower.mul(&self.attachments[cell][k][0].matrix));
            }
        }
        Err(missing())
    }

    /// Block of the twisted boundary from `cell` to `face`: `Σ ε_k R_k`.
    /// In float backends, entries that cancel down to rounding level relative
    /// to the summed terms are set to exact zero.
    pub fn boundary_block(&self, face: usize, cell: usize) -> Matrix<S> {
        let list = self.attachments(face, cell);
        let mut acc = Matrix::zeros(self.rank, self.rank);
        for a in list {
            acc = acc.add(&a.matrix.scale(&S::from_i64(a.sign)));
        }
        if !S::EXACT && list.len() > 1 {
            for i in 0..self.rank {
                for j in 0..self.rank {
                    let mass: f64 = list.iter().map(|a| a.matrix[(i, j)].modulus()).sum();
                    if acc[(i, j)].modulus() <= CANCEL_TOL * mass {
                        acc[(i, j)] = S::zero();
                    }
                }
            }
        }
        acc
    }

    fn map_attachments(&self, rank: usize, f: impl Fn(usize, usize, &Attachment<S>) -> Attachment<S>) -> Self {
        let attachments = (0..self.complex.len())
            .map(|g| {
                self.complex
                    .facets(g)
                    .iter()
                    .enumerate()
                    .map(|(k, &(face, _))| self.attachments[g][k].iter().map(|a| f(face, g, a)).collect())
                    .collect()
            })
            .collect();
        LocalSystem { complex: self.complex.clone(), rank, field: self.field, attachments }
    }

    /// Dual bundle: transports are inverse transposes.
    pub fn dual(&self) -> Self {
        self.map_attachments(self.rank, |_, _, a| Attachment {
            sign: a.sign,
            matrix: a.matrix.inverse().expect("validated transports are invertible").transpose(),
        })
    }

    /// Determinant line bundle.
    pub fn det(&self) -> Self {
        self.map_attachments(1, |_, _, a| Attachment { sign: a.sign, matrix: Matrix::scalar(a.matrix.det()) })
    }

    /// Change of gauge by invertible per-cell matrices `g`:
    /// `R' = g_face · R · g_cell⁻¹`.
    pub fn regauge(&self, g: &[Matrix<S>]) -> Result<Self> {
        if g.len() != self.complex.len() {
            return Err(Error::ContextMismatch("gauge must have one matrix per cell".into()));
        }
        let inv: Vec<Matrix<S>> = g
            .iter()
            .enumerate()
            .map(|(k, m)| m.inverse().ok_or_else(|| Error::ZeroFrame(self.complex.cell(k).id.clone())))
            .collect::<Result<_>>()?;
        Ok(self.map_attachments(self.rank, |face, cell, a| Attachment { sign: a.sign, matrix: g[face].mul(&a.matrix).mul(&inv[cell]) }))
    }

    /// Block-diagonal direct sum with a system of the same attachment shape.
    pub fn direct_sum(&self, other: &Self) -> Result<Self> {
        if !self.complex.same_as(&other.complex) {
            return Err(Error::ContextMismatch("direct sum of systems on different complexes".into()));
        }
        let rank = self.rank + other.rank;
        let mut attachments = Vec::with_capacity(self.complex.len());
        for g in 0..self.complex.len() {
            let mut per = Vec::new();
            for k in 0..self.complex.facets(g).len() {
                let (a, b) = (&self.attachments[g][k], &other.attachments[g][k]);
                if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| x.sign != y.sign) {
                    return Err(Error::ContextMismatch("attachment patterns differ".into()));
                }
                per.push(
                    a.iter()
                        .zip(b)
                        .map(|(x, y)| {
                            let mut m = Matrix::zeros(rank, rank);
                            m.set_block(0, 0, &x.matrix);
                            m.set_block(self.rank, self.rank, &y.matrix);
                            Attachment { sign: x.sign, matrix: m }
                        })
                        .collect(),
                );
            }
            attachments.push(per);
        }
        let field = if self.field == Field::Complex || other.field == Field::Complex { Field::Complex } else { Field::Real };
        Ok(LocalSystem { complex: self.complex.clone(), rank, field, attachments })
    }

    /// Same transports viewed over a structurally identical complex.
    pub fn with_complex(&self, complex: Arc<Complex>) -> Result<Self> {
        if !self.complex.same_as(&complex) {
            return Err(Error::ContextMismatch("complexes differ".into()));
        }
        Ok(LocalSystem { complex, ..self.clone() })
    }

    /// Assembles attachments directly (used for derived complexes).
    pub(crate) fn from_parts(complex: Arc<Complex>, rank: usize, field: Field, attachments: Vec<Vec<Vec<Attachment<S>>>>) -> Self {
        LocalSystem { complex, rank, field, attachments }
    }

    /// Converts every transport to another scalar type.
    pub fn convert<T: Scalar>(&self, f: impl Fn(&S) -> T + Copy) -> LocalSystem<T> {
        let attachments = self
            .attachments
            .iter()
            .map(|per| {
                per.iter().map(|list| list.iter().map(|a| Attachment { sign: a.sign, matrix: a.matrix.convert(f) }).collect()).collect()
            })
            .collect();
        LocalSystem { complex: self.complex.clone(), rank: self.rank, field: self.field, attachments }
    }

    /// Transports in the input format, one entry per attachment.
    pub fn transports(&self) -> Vec<TransportEntry<S>> {
        let c = &self.complex;
        let mut out = Vec::new();
        for g in 0..c.len() {
            for (k, &(f, inc)) in c.facets(g).iter().enumerate() {
                let list = &self.attachments[g][k];
                for a in list {
                    let sign = (list.len() > 1 || a.sign != inc).then_some(a.sign);
                    out.push(TransportEntry { face: c.cell(f).id.clone(), cell: c.cell(g).id.clone(), matrix: a.matrix.clone(), sign });
                }
            }
        }
        out
    }
}

/// The twisted chain complex `C_*(K, E)`. Coordinates of `C_q` are ordered by
/// cell position within dimension `q`, then by fiber index.
#[derive(Clone, Debug)]
pub struct TwistedChainComplex<S: Scalar> {
    pub rank: usize,
    /// `dims[q] = rank · #q-cells`.
    pub dims: Vec<usize>,
    /// `boundaries[q]: C_q → C_{q-1}`; `boundaries[0]` has zero rows.
    pub boundaries: Vec<Matrix<S>>,
}

impl<S: Scalar> TwistedChainComplex<S> {
    /// A based complex given directly by its boundary matrices.
    pub fn from_boundaries(rank: usize, dims: Vec<usize>, boundaries: Vec<Matrix<S>>) -> Self {
        TwistedChainComplex { rank, dims, boundaries }
    }

    pub fn top(&self) -> usize {
        self.dims.len().saturating_sub(1)
    }

    pub fn dim(&self, q: usize) -> usize {
        self.dims.get(q).copied().unwrap_or(0)
    }

    /// `∂_q`, or an empty map outside the stored range.
    pub fn boundary(&self, q: usize) -> Matrix<S> {
        match self.boundaries.get(q) {
            Some(m) => m.clone(),
            None => Matrix::zeros(if q == 0 { 0 } else { self.dim(q - 1) }, self.dim(q)),
        }
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.dims.iter().enumerate().map(|(q, &d)| if q % 2 == 0 { d as i64 } else { -(d as i64) }).sum()
    }

    /// Checks `∂_{q-1} ∂_q = 0` in every degree.
    pub fn check_boundary_squared(&self, tol: f64) -> Result<()> {
        for q in 2..self.dims.len() {
            let prod = self.boundaries[q - 1].mul(&self.boundaries[q]);
            let scale = self.boundaries[q - 1].max_modulus() * self.boundaries[q].max_modulus();
            let bad = if S::EXACT { !prod.is_zero() } else { prod.max_modulus() > tol * scale.max(1.0) };
            if bad {
                return Err(Error::BoundaryMismatch { degree: q, residual: prod.max_modulus() });
            }
        }
        Ok(())
    }
}

/// Assembles `C_*(K, E)` and verifies `∂² = 0`.
pub fn twisted_chain_complex<S: Scalar>(sys: &LocalSystem<S>, tol: f64) -> Result<TwistedChainComplex<S>> {
    let c = sys.complex();
    let r = sys.rank();
    let top = if c.is_empty() { 0 } else { c.dim() + 1 };
    let dims: Vec<usize> = (0..top).map(|q| r * c.count(q)).collect();
    let boundaries = par::map_range(top, |q| {
        let rows = if q == 0 { 0 } else { dims[q - 1] };
        let mut m = Matrix::zeros(rows, dims[q]);
        if q > 0 {
            for (j, &g) in c.cells_of_dim(q).iter().enumerate() {
                for &(f, _) in c.facets(g) {
                    m.add_block(r * c.position(f), r * j, &sys.boundary_block(f, g));
                }
            }
        }
        m
    });
    let cc = TwistedChainComplex { rank: r, dims, boundaries };
    cc.check_boundary_squared(tol)?;
    Ok(cc)
}

/// Pulls a system back to a subdivision: sections over a fine cell are
/// sections over its carrier, so `R'_{S'', S'} = R_{κ(S''), κ(S')}`.
pub fn subdivide_system<S: Scalar>(sys: &LocalSystem<S>, fine: Arc<Complex>, map: &SubdivisionMap) -> Result<LocalSystem<S>> {
    if map.carrier.len() != fine.len() || map.pieces.len() != sys.complex().len() {
        return Err(Error::ContextMismatch("subdivision map does not match the complexes".into()));
    }
    let mut cache: HashMap<(usize, usize), Matrix<S>> = HashMap::new();
    let mut attachments = Vec::with_capacity(fine.len());
    for g in 0..fine.len() {
        let mut per = Vec::new();
        for &(f, inc) in fine.facets(g) {
            let key = (map.carrier[f], map.carrier[g]);
            let m = match cache.get(&key) {
                Some(m) => m.clone(),
                None => {
                    let m = sys.restriction(key.0, key.1)?;
                    cache.insert(key, m.clone());
                    m
                }
            };
            per.push(vec![Attachment { sign: inc, matrix: m }]);
        }
        attachments.push(per);
    }
    Ok(LocalSystem::from_parts(fine, sys.rank(), sys.field(), attachments))
}

/// The same bundle over the dual decomposition. Sections over `Δ*` are
/// identified with sections over `Δ` at their common point, so the block
/// from `Δ*` to `(Δ')*` is built from the inverses of the attachments of
/// `(Δ, Δ')`.
pub fn dual_complex_system<S: Scalar>(sys: &LocalSystem<S>, n: usize, dual: Arc<Complex>, pairing: &DualPairing) -> Result<LocalSystem<S>> {
    let primal = sys.complex();
    if pairing.primal_of.len() != dual.len() || dual.len() != primal.len() {
        return Err(Error::ContextMismatch("dual pairing does not match the complexes".into()));
    }
    let mut attachments = Vec::with_capacity(dual.len());
    for d in 0..dual.len() {
        let g = pairing.primal_of[d];
        let sign = dual_incidence_sign(primal.cell(g).dim, n);
        let mut per = Vec::new();
        for &(df, _) in dual.facets(d) {
            let h = pairing.primal_of[df];
            let list: Vec<Attachment<S>> = sys
                .attachments(g, h)
                .iter()
                .map(|a| {
                    let inv = a
                        .matrix
                        .inverse()
                        .ok_or_else(|| Error::Singular { face: primal.cell(g).id.clone(), cell: primal.cell(h).id.clone() })?;
                    Ok(Attachment { sign: sign * a.sign, matrix: inv })
                })
                .collect::<Result<_>>()?;
            per.push(list);
        }
        attachments.push(per);
    }
    Ok(LocalSystem::from_parts(dual, sys.rank(), sys.field(), attachments))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{barycentric_subdivision, dual_decomposition, orient_closed_manifold};
    use crate::families;
    use crate::scalar::{C64, Q};

    fn q(v: i64) -> Q {
        Q::from_i64(v)
    }

    fn circle_q(n: usize, lambda: i64) -> LocalSystem<Q> {
        let c = Arc::new(families::circle(n).unwrap());
        families::circle_system(c, Matrix::scalar(q(lambda)), Field::Real).unwrap()
    }

    #[test]
    fn lambda_circle_boundary_determinant() {
        for lambda in [3, -1, 5] {
            let cc = twisted_chain_complex(&circle_q(3, lambda), 0.0).unwrap();
            let d = cc.boundary(1).det();
            assert!(d == q(lambda - 1) || d == q(1 - lambda), "det {d:?}");
        }
        let triv = twisted_chain_complex(&circle_q(3, 1), 0.0).unwrap();
        assert_eq!(triv.boundary(1).rank(0.0).unwrap(), 2);
    }

    #[test]
    fn noncommuting_triangle_is_not_flat() {
        let c = Arc::new(Complex::from_facets(vec!["a".into(), "b".into(), "c".into()], &[vec![0, 1, 2]]).unwrap());
        let x = Matrix::from_rows(vec![vec![q(1), q(1)], vec![q(0), q(1)]]);
        let y = Matrix::from_rows(vec![vec![q(1), q(0)], vec![q(1), q(1)]]);
        let mut transports = Vec::new();
        for &e in c.cells_of_dim(1) {
            let vs = c.cell(e).vertices.clone().unwrap();
            for &(f, _) in c.facets(e) {
                let v = c.cell(f).vertices.as_ref().unwrap()[0];
                let m = match (vs.as_slice(), v) {
                    ([0, 1], 1) => x.clone(),
                    ([1, 2], 2) => y.clone(),
                    _ => Matrix::identity(2),
                };
                transports.push(TransportEntry { face: c.cell(f).id.clone(), cell: c.cell(e).id.clone(), matrix: m, sign: None });
            }
        }
        let err = LocalSystem::build(c, 2, Field::Real, &transports, FLAT_TOL).unwrap_err();
        assert!(matches!(err, Error::NotFlat { .. }), "{err:?}");
    }

    #[test]
    fn generator_mode_matches_full_data() {
        let c = Arc::new(families::sphere(2).unwrap());
        let triv = families::trivial_system::<Q>(c.clone(), 1, Field::Real).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let gauge = families::random_gauge::<Q>(c.len(), 1, &mut rng, false);
        let full = triv.regauge(&gauge).unwrap();
        let edges: Vec<TransportEntry<Q>> =
            full.transports().into_iter().filter(|s| c.cell(c.index_of(&s.cell).unwrap()).dim == 1).collect();
        let derived = LocalSystem::build(c.clone(), 1, Field::Real, &edges, 0.0).unwrap();
        let (a, b) = (twisted_chain_complex(&full, 0.0).unwrap(), twisted_chain_complex(&derived, 0.0).unwrap());
        for qd in 0..3 {
            assert_eq!(a.boundary(qd).rank(0.0).unwrap(), b.boundary(qd).rank(0.0).unwrap());
        }
    }

    #[test]
    fn dual_is_an_involution() {
        let sys = circle_q(4, 3);
        let back = sys.dual().dual();
        assert_eq!(back.transports().len(), sys.transports().len());
        for (x, y) in back.transports().iter().zip(sys.transports()) {
            assert_eq!(x.matrix, y.matrix);
        }
        let cyc = twisted_chain_complex(&sys.dual(), 0.0).unwrap();
        let d = cyc.boundary(1).det();
        let expect = Q::new(2.into(), 3.into());
        assert!(d == expect || d == -expect.clone());
    }

    #[test]
    fn unitary_dual_is_conjugate() {
        let c = Arc::new(families::circle(3).unwrap());
        let lam = C64::from_polar(1.0, 0.7);
        let sys = families::circle_system(c, Matrix::scalar(lam), Field::Complex).unwrap();
        for (x, y) in sys.dual().transports().iter().zip(sys.transports()) {
            assert!((x.matrix[(0, 0)] - y.matrix[(0, 0)].conj()).norm() < 1e-14);
        }
    }

    #[test]
    fn det_and_direct_sum() {
        let c = Arc::new(families::circle(3).unwrap());
        let diag = Matrix::diagonal(&[q(2), q(3)]);
        let sys = families::circle_system(c.clone(), diag, Field::Real).unwrap();
        let dets: Vec<Q> = sys.det().transports().iter().map(|s| s.matrix[(0, 0)].clone()).collect();
        assert!(dets.contains(&q(6)));
        let sum = sys.direct_sum(&sys.det()).unwrap();
        assert_eq!(sum.rank(), 3);
        let prod: Vec<Q> = sum.det().transports().iter().map(|s| s.matrix[(0, 0)].clone()).collect();
        assert!(prod.contains(&q(36)));
    }

    #[test]
    fn lens_boundaries() {
        let c = Arc::new(families::lens_complex(5, 2).unwrap());
        let zeta = families::root_of_unity(5, 1);
        let sys = families::lens_system(c, 5, 2, zeta).unwrap();
        let cc = twisted_chain_complex(&sys, FLAT_TOL).unwrap();
        assert!((cc.boundary(1)[(0, 0)] - (zeta - 1.0)).norm() < 1e-12);
        assert!(cc.boundary(2)[(0, 0)].norm() < 1e-12);
        // q = 2, r = 3
        assert!((cc.boundary(3)[(0, 0)] - (zeta.powu(3) - 1.0)).norm() < 1e-12);
    }

    #[test]
    fn subdivided_and_dual_systems_are_complexes() {
        let c = Arc::new(families::torus2().unwrap());
        let a = Matrix::diagonal(&[C64::new(2.0, 0.0), C64::new(0.0, 1.0)]);
        let b = Matrix::diagonal(&[C64::new(-1.0, 0.0), C64::new(0.5, 0.5)]);
        let sys = families::torus_system(c.clone(), a, b, Field::Complex).unwrap();
        let m = orient_closed_manifold((*c).clone()).unwrap();
        let (fine, map) = barycentric_subdivision(&m).unwrap();
        let fine_sys = subdivide_system(&sys, Arc::new(fine.base.clone()), &map).unwrap();
        twisted_chain_complex(&fine_sys, FLAT_TOL).unwrap();
        let (dual, pairing) = dual_decomposition(&m).unwrap();
        let dual_sys = dual_complex_system(&sys, m.n, Arc::new(dual), &pairing).unwrap();
        twisted_chain_complex(&dual_sys, FLAT_TOL).unwrap();
    }

    use rand::SeedableRng;
}
