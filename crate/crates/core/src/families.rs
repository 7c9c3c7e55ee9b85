//! Standard test complexes: polygon circles, boundaries of simplices, lens
//! spaces with their minimal CW structure, and a triangulated 2-torus.

use std::sync::Arc;

use rand::Rng;

use crate::complex::{build_complex, Complex, Mode, RawCell, RawComplex};
use crate::error::{Error, Result};
use crate::local_system::{Field, LocalSystem, TransportEntry, TwistedChainComplex, FLAT_TOL};
use crate::matrix::Matrix;
use crate::scalar::{Scalar, C64};

/// The `n`-gon triangulation of the circle, vertices `v0..v{n-1}`.
pub fn circle(n: usize) -> Result<Complex> {
    if n < 3 {
        return Err(Error::InvalidCell(format!("a simplicial circle needs at least 3 vertices, got {n}")));
    }
    let labels = (0..n).map(|i| format!("v{i}")).collect();
    let edges: Vec<Vec<usize>> = (0..n).map(|i| vec![i, (i + 1) % n]).collect();
    Complex::from_facets(labels, &edges)
}

/// The boundary of the standard `(d+1)`-simplex, a triangulated `d`-sphere.
pub fn sphere(d: usize) -> Result<Complex> {
    if d == 0 {
        return Err(Error::InvalidCell("sphere dimension must be positive".into()));
    }
    let labels = (0..d + 2).map(|i| format!("v{i}")).collect();
    let facets: Vec<Vec<usize>> = (0..d + 2).map(|skip| (0..d + 2).filter(|&v| v != skip).collect()).collect();
    Complex::from_facets(labels, &facets)
}

/// Torus triangulated as a 3×3 grid of squares, each cut along its diagonal.
/// Vertex `v{i}_{j}` sits at grid position `(i, j)`.
pub fn torus2() -> Result<Complex> {
    let labels = (0..3).flat_map(|i| (0..3).map(move |j| format!("v{i}_{j}"))).collect();
    let v = |i: usize, j: usize| 3 * (i % 3) + (j % 3);
    let mut tris = Vec::new();
    for i in 0..3 {
        for j in 0..3 {
            tris.push(vec![v(i, j), v(i + 1, j), v(i + 1, j + 1)]);
            tris.push(vec![v(i, j), v(i, j + 1), v(i + 1, j + 1)]);
        }
    }
    Complex::from_facets(labels, &tris)
}

/// Minimal CW structure of the lens space `L(p, q)`: one cell `e0..e3` per
/// dimension with cellular boundaries `0, p, 0`.
pub fn lens_complex(p: u32, q: u32) -> Result<Complex> {
    lens_parameters(p, q)?;
    let cell = |id: &str, dim: usize, faces: Option<Vec<(&str, i64)>>| RawCell {
        id: id.into(),
        dim,
        vertices: None,
        faces: faces.map(|fs| fs.into_iter().map(|(f, c)| (f.to_string(), c)).collect()),
    };
    build_complex(&RawComplex {
        mode: Mode::Cw,
        cells: vec![
            cell("e0", 0, None),
            cell("e1", 1, Some(vec![("e0", 1), ("e0", -1)])),
            cell("e2", 2, Some(vec![("e1", p as i64)])),
            cell("e3", 3, Some(vec![("e2", 1), ("e2", -1)])),
        ],
    })
}

/// Validates `L(p, q)` parameters and returns `r` with `q·r ≡ 1 (mod p)`.
pub fn lens_parameters(p: u32, q: u32) -> Result<u32> {
    if p < 2 {
        return Err(Error::InvalidCell(format!("lens space order must be at least 2, got {p}")));
    }
    (1..p).find(|r| (q as u64 * *r as u64) % p as u64 == 1).ok_or_else(|| Error::InvalidCell(format!("gcd({p}, {q}) must be 1")))
}

fn transport_entry<S: Scalar>(c: &Complex, face: usize, cell: usize, matrix: Matrix<S>) -> TransportEntry<S> {
    TransportEntry { face: c.cell(face).id.clone(), cell: c.cell(cell).id.clone(), matrix, sign: None }
}

/// Identity transports on every incident pair.
pub fn trivial_system<S: Scalar>(c: Arc<Complex>, rank: usize, field: Field) -> Result<LocalSystem<S>> {
    let mut transports = Vec::new();
    for g in 0..c.len() {
        for &(f, _) in c.facets(g) {
            transports.push(transport_entry(&c, f, g, Matrix::identity(rank)));
        }
    }
    LocalSystem::build(c, rank, field, &transports, FLAT_TOL)
}

/// System on [`circle`] whose only nontrivial transport sits on the closing
/// edge `v0,v{n-1}`: restriction to `v{n-1}` is `holonomy`.
pub fn circle_system<S: Scalar>(c: Arc<Complex>, holonomy: Matrix<S>, field: Field) -> Result<LocalSystem<S>> {
    let rank = holonomy.rows();
    let last = c.vertex_labels().len().saturating_sub(1);
    let mut transports = Vec::new();
    for &e in c.cells_of_dim(1) {
        let vs = c.cell(e).vertices.clone().expect("simplicial circle");
        let closing = vs == [0, last];
        for &(f, _) in c.facets(e) {
            let at_last = c.cell(f).vertices.as_ref().expect("simplicial")[0] == last;
            let m = if closing && at_last { holonomy.clone() } else { Matrix::identity(rank) };
            transports.push(transport_entry(&c, f, e, m));
        }
    }
    LocalSystem::build(c, rank, field, &transports, FLAT_TOL)
}

/// Flat system on [`torus2`] with commuting holonomies `a` (first grid
/// direction) and `b` (second grid direction).
pub fn torus_system<S: Scalar>(c: Arc<Complex>, a: Matrix<S>, b: Matrix<S>, field: Field) -> Result<LocalSystem<S>> {
    let rank = a.rows();
    let pos = |v: usize| (v / 3, v % 3);
    let mut transports = Vec::new();
    for &e in c.cells_of_dim(1) {
        let vs = c.cell(e).vertices.clone().expect("simplicial torus");
        let (p0, p1) = (pos(vs[0]), pos(vs[1]));
        // orient the edge as a step of +0/+1 in each grid direction
        let step = |x: usize, y: usize| (y + 3 - x) % 3;
        let (from, to) = if step(p0.0, p1.0) <= 1 && step(p0.1, p1.1) <= 1 { (p0, p1) } else { (p1, p0) };
        let mut t = Matrix::identity(rank);
        if from.0 == 2 && to.0 == 0 {
            t = t.mul(&a);
        }
        if from.1 == 2 && to.1 == 0 {
            t = t.mul(&b);
        }
        for &(f, _) in c.facets(e) {
            let v = c.cell(f).vertices.as_ref().expect("simplicial")[0];
            let m = if pos(v) == to { t.clone() } else { Matrix::identity(rank) };
            transports.push(transport_entry(&c, f, e, m));
        }
    }
    LocalSystem::build(c, rank, field, &transports, FLAT_TOL)
}

/// Rank-one system on [`lens_complex`] given by the character sending the
/// generator to `zeta` (`zeta^p = 1`).
pub fn lens_system(c: Arc<Complex>, p: u32, q: u32, zeta: C64) -> Result<LocalSystem<C64>> {
    let r = lens_parameters(p, q)?;
    let id = |g: &str| c.index_of(g).expect("lens cell");
    let one = || Matrix::scalar(C64::new(1.0, 0.0));
    let mut transports = Vec::new();
    let mut push = |face: &str, cell: &str, m: Matrix<C64>, sign: i64| {
        let mut s = transport_entry(&c, id(face), id(cell), m);
        s.sign = Some(sign);
        transports.push(s);
    };
    push("e0", "e1", Matrix::scalar(zeta), 1);
    push("e0", "e1", one(), -1);
    for k in 0..p {
        push("e1", "e2", Matrix::scalar(zeta.powu(k)), 1);
    }
    push("e2", "e3", Matrix::scalar(zeta.powu(r)), 1);
    push("e2", "e3", one(), -1);
    LocalSystem::build(c.clone(), 1, Field::Complex, &transports, FLAT_TOL)
}

/// Primitive character value `exp(2πi k / p)`.
pub fn root_of_unity(p: u32, k: u32) -> C64 {
    C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / p as f64)
}

/// Random invertible gauge, one matrix per cell, entries uniform in
/// `[-1, 1]` plus a diagonal shift keeping them well conditioned.
pub fn random_gauge<S: Scalar>(n_cells: usize, rank: usize, rng: &mut impl Rng, complex_entries: bool) -> Vec<Matrix<S>> {
    (0..n_cells)
        .map(|_| {
            let rows = (0..rank)
                .map(|i| {
                    (0..rank)
                        .map(|j| {
                            let re: f64 = rng.gen_range(-1.0..1.0) + if i == j { 2.5 } else { 0.0 };
                            let im: f64 = if complex_entries { rng.gen_range(-1.0..1.0) } else { 0.0 };
                            random_entry::<S>(re, im)
                        })
                        .collect()
                })
                .collect();
            Matrix::from_rows(rows)
        })
        .collect()
}

/// Converts a random float draw to the backend, rounding to a short
/// rational in exact mode so arithmetic stays small.
pub fn random_entry<S: Scalar>(re: f64, im: f64) -> S {
    if S::EXACT {
        let num = (re * 8.0).round() as i64;
        S::from_i64(num) / S::from_i64(8)
    } else {
        S::from_c64(C64::new(re, im)).expect("float backend")
    }
}

/// A random based chain complex in degrees `0..=n`: a split complex with
/// random ranks and Betti numbers, conjugated by random invertible
/// changes of basis. Every chain group has dimension at most `max_dim`.
pub fn random_based_complex<S: Scalar>(n: usize, max_dim: usize, rng: &mut impl Rng) -> TwistedChainComplex<S> {
    // ranks[q] = rank of ∂_q, ranks[0] = ranks[n+1] = 0
    let mut ranks = vec![0usize; n + 2];
    let mut betti = vec![0usize; n + 1];
    for q in 0..=n {
        let used = ranks[q];
        let room = max_dim.saturating_sub(used);
        let r_next = if q < n { rng.gen_range(0..=room.min(3)) } else { 0 };
        ranks[q + 1] = r_next;
        betti[q] = rng.gen_range(0..=(room - r_next).min(3));
    }
    let dims: Vec<usize> = (0..=n).map(|q| ranks[q + 1] + betti[q] + ranks[q]).collect();
    let changes: Vec<(Matrix<S>, Matrix<S>)> = dims
        .iter()
        .map(|&d| loop {
            let p = random_gauge::<S>(1, d, rng, false).remove(0);
            if let Some(inv) = p.inverse() {
                break (p, inv);
            }
        })
        .collect();
    let mut boundaries = vec![Matrix::zeros(0, dims[0])];
    for q in 1..=n {
        // ∂_q sends the last ranks[q] basis vectors of C_q onto the first ones of C_{q-1}
        let mut d = Matrix::zeros(dims[q - 1], dims[q]);
        for k in 0..ranks[q] {
            d[(k, dims[q] - ranks[q] + k)] = S::one();
        }
        boundaries.push(changes[q - 1].0.mul(&d).mul(&changes[q].1));
    }
    TwistedChainComplex::from_boundaries(1, dims, boundaries)
}
