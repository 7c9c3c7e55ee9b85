//! Poincaré duality on determinant lines.
//!
//! Homology of `(τ, E)` and of the dual decomposition `(τ*, E)` are compared
//! inside the barycentric subdivision `τ'`, into which both complexes map by
//! chain maps, or directly on `τ` through the cap product with the
//! fundamental cycle. Once reference bases are identified, the duality map `D_E`
//! sends the unit frame of `(τ, E)` to the unit frame of `(τ*, E*)`, so its
//! scalar is `d_E = s_{E*} / t_E` with `t` the T-coordinate on `τ` and `s` the
//! one on `τ*`.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use crate::complex::{
    barycentric_subdivision, dual_block_pieces, dual_decomposition, Complex, DualPairing, Mode, OrientedManifoldComplex, SubdivisionMap,
};
use crate::detline::{
    correspondence_hat, eps, evaluation_scalar, push_cycles, subdivision_chain_map, t_coordinate, CohomologyBasis, Frame, LineBundleIso,
    Twisted,
};
use crate::error::{Error, Result};
use crate::homology::{class_coordinates, twisted_homology};
use crate::local_system::{dual_complex_system, subdivide_system, LocalSystem, TwistedChainComplex};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// How homology classes on `τ*` are matched with classes on `τ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Identification {
    /// Push both complexes into the barycentric subdivision `τ'`.
    Barycentric,
    /// Cap the dual chain, read as a cochain on `τ`, with the fundamental
    /// cycle. Needs no subdivision, so it stays cheap on fine complexes.
    Cap,
}

/// Geometric data shared by every system on one manifold: the dual
/// decomposition and, for simplicial input, the barycentric subdivision with
/// the chain maps from `τ` and `τ*` into it (built on first use).
#[derive(Clone, Debug)]
pub struct DualGeometry {
    pub manifold: OrientedManifoldComplex,
    pub dual: Arc<Complex>,
    pub pairing: DualPairing,
    pub identification: Identification,
    refinement: OnceLock<Refinement>,
}

#[derive(Clone, Debug)]
pub struct Refinement {
    pub fine: Arc<Complex>,
    pub map: SubdivisionMap,
    /// Per primal cell, the signed fine simplices forming its dual block.
    pub blocks: Vec<Vec<(usize, i64)>>,
}

impl DualGeometry {
    pub fn new(m: &OrientedManifoldComplex) -> Result<Self> {
        Self::with_identification(m, Identification::Barycentric)
    }

    pub fn with_identification(m: &OrientedManifoldComplex, identification: Identification) -> Result<Self> {
        let (dual, pairing) = dual_decomposition(m)?;
        Ok(DualGeometry { manifold: m.clone(), dual: Arc::new(dual), pairing, identification, refinement: OnceLock::new() })
    }

    pub fn n(&self) -> usize {
        self.manifold.n
    }

    /// The barycentric refinement, or `None` for CW input.
    pub fn refinement(&self) -> Result<Option<&Refinement>> {
        let m = &self.manifold;
        if m.base.mode() != Mode::Simplicial {
            return Ok(None);
        }
        if let Some(r) = self.refinement.get() {
            return Ok(Some(r));
        }
        let (fine, map) = barycentric_subdivision(m)?;
        let blocks = dual_block_pieces(m, &fine.base)?;
        let _ = self.refinement.set(Refinement { fine: Arc::new(fine.base), map, blocks });
        Ok(self.refinement.get())
    }
}

/// Chain map `C_*(τ*, E) → C_*(τ', E)` sending a section over `Δ*` to the
/// signed sum of its dual-block simplices, re-expressed in the gauge of
/// each simplex's carrier. `sys` is the system on `τ`.
fn dual_chain_map<S: Scalar>(geo: &DualGeometry, refinement: &Refinement, sys: &LocalSystem<S>) -> Result<Vec<Matrix<S>>> {
    let r = sys.rank();
    let fine = &refinement.fine;
    let dual = &geo.dual;
    let top = geo.n() + 1;
    let mut maps: Vec<Matrix<S>> = (0..top).map(|k| Matrix::zeros(r * fine.count(k), r * dual.count(k))).collect();
    for (g, block) in refinement.blocks.iter().enumerate() {
        let d = geo.pairing.dual_of[g];
        let k = dual.cell(d).dim;
        let col = r * dual.position(d);
        for &(p, sign) in block {
            let carrier = refinement.map.carrier[p];
            let back = sys.restriction(g, carrier)?.inverse().ok_or_else(|| Error::Singular {
                face: geo.manifold.base.cell(g).id.clone(),
                cell: geo.manifold.base.cell(carrier).id.clone(),
            })?;
            maps[k].add_block(r * fine.position(p), col, &back.scale(&S::from_i64(sign)));
        }
    }
    Ok(maps)
}

/// Cap product with the fundamental cycle, `C_*(τ*, E) → C_*(τ, E)`. A
/// dual chain over the `(n-q)`-cells is a cochain on `τ`, and each top
/// simplex `[v_0..v_n]` carries the value on its front face `[v_0..v_p]` to
/// its back face `[v_p..v_n]`.
fn cap_chain_map<S: Scalar>(geo: &DualGeometry, sys: &LocalSystem<S>) -> Result<Vec<Matrix<S>>> {
    let m = &geo.manifold;
    let c = &m.base;
    let n = geo.n();
    let r = sys.rank();
    let by_vertices: HashMap<&[usize], usize> =
        c.cells().iter().enumerate().filter_map(|(g, cell)| cell.vertices.as_deref().map(|v| (v, g))).collect();
    let lookup = |vs: &[usize]| by_vertices.get(vs).copied().ok_or(Error::ModeMismatch { expected: "simplicial" });
    let mut maps: Vec<Matrix<S>> = (0..=n).map(|q| Matrix::zeros(r * c.count(q), r * geo.dual.count(q))).collect();
    for &top in c.cells_of_dim(n) {
        let vs = c.cell(top).vertices.as_deref().ok_or(Error::ModeMismatch { expected: "simplicial" })?;
        let o = S::from_i64(m.orientation_of(top));
        for q in 0..=n {
            let p = n - q;
            let front = lookup(&vs[..=p])?;
            let back = lookup(&vs[p..])?;
            let into_top = sys
                .restriction(front, top)?
                .inverse()
                .ok_or_else(|| Error::Singular { face: c.cell(front).id.clone(), cell: c.cell(top).id.clone() })?;
            let block = sys.restriction(back, top)?.mul(&into_top).scale(&o);
            let col = r * geo.dual.position(geo.pairing.dual_of[front]);
            maps[q].add_block(r * c.position(back), col, &block);
        }
    }
    Ok(maps)
}

/// Re-expresses the cycles of `on_dual` so that they represent the classes
/// `h` once pushed along `to` (degree-wise chain maps into `target`) with
/// `from` the images of `h` there.
fn match_classes<S: Scalar>(
    on_dual: Twisted<S>,
    target: &TwistedChainComplex<S>,
    from: &[Vec<Vec<S>>],
    to: &[Matrix<S>],
) -> Result<Twisted<S>> {
    let images = push_cycles(to, &on_dual.homology.cycles);
    let mut cycles = Vec::with_capacity(images.len());
    for k in 0..images.len() {
        // image(g) = M · h in homology, so the identified basis is M⁻¹ g
        let m = class_coordinates(target, k, &from[k], &images[k])?;
        let inv = m.inverse().ok_or_else(|| Error::BadHomologyBasis { degree: k, reason: "dual classes do not match".into() })?;
        let g = &on_dual.homology.cycles[k];
        let dim = on_dual.chains.dim(k);
        let combined: Vec<Vec<S>> = (0..g.len())
            .map(|a| (0..dim).map(|i| (0..g.len()).fold(S::zero(), |acc, b| acc + inv[(a, b)].clone() * g[b][i].clone())).collect())
            .collect();
        cycles.push(combined);
    }
    on_dual.with_cycles(cycles)
}

/// `(τ*, E)` with a reference homology basis identified with the one of
/// `(τ, E)`.
pub fn transport_to_dual<S: Scalar>(geo: &DualGeometry, e: &Twisted<S>, tol: f64) -> Result<Twisted<S>> {
    if !e.complex().same_as(&geo.manifold.base) {
        return Err(Error::ContextMismatch("system does not live on the manifold".into()));
    }
    let sys = dual_complex_system(&e.system, geo.n(), geo.dual.clone(), &geo.pairing)?;
    let on_dual = Twisted::new(sys, tol)?;
    if on_dual.homology.betti() != e.homology.betti() {
        return Err(Error::NotClosedManifold("dual complex has different homology".into()));
    }
    if e.homology.is_acyclic() {
        return Ok(on_dual);
    }
    if geo.manifold.base.mode() != Mode::Simplicial {
        return Err(Error::ModeMismatch { expected: "simplicial" });
    }
    match geo.identification {
        Identification::Cap => {
            let cap = cap_chain_map(geo, &e.system)?;
            match_classes(on_dual, &e.chains, &e.homology.cycles, &cap)
        }
        Identification::Barycentric => {
            let refinement = geo.refinement()?.ok_or(Error::ModeMismatch { expected: "simplicial" })?;
            let fine_sys = subdivide_system(&e.system, refinement.fine.clone(), &refinement.map)?;
            let fine = Twisted::new(fine_sys, tol)?;
            let incl = subdivision_chain_map::<S>(e.complex(), &refinement.fine, &refinement.map, e.system.rank());
            let pushed = push_cycles(&incl, &e.homology.cycles);
            let jmap = dual_chain_map(geo, refinement, &e.system)?;
            match_classes(on_dual, &fine.chains, &pushed, &jmap)
        }
    }
}

/// All data needed for duality scalars of one system `E`.
#[derive(Clone, Debug)]
pub struct DualityContext<S: Scalar> {
    pub n: usize,
    pub e: Twisted<S>,
    pub estar: Twisted<S>,
    pub e_dual: Twisted<S>,
    pub estar_dual: Twisted<S>,
    /// T-coordinates of unit frames: `t` on `τ`, `s` on `τ*`.
    pub t_e: S,
    pub t_estar: S,
    pub s_e: S,
    pub s_estar: S,
}

impl<S: Scalar> DualityContext<S> {
    pub fn new(geo: &DualGeometry, system: LocalSystem<S>, tol: f64) -> Result<Self> {
        let e = Twisted::new(system.clone(), tol)?;
        let estar = Twisted::new(system.dual(), tol)?;
        Self::from_twisted(geo, e, estar, tol)
    }

    /// Uses the given reference bases on `τ` for `E` and `E*`.
    pub fn from_twisted(geo: &DualGeometry, e: Twisted<S>, estar: Twisted<S>, tol: f64) -> Result<Self> {
        let e_dual = transport_to_dual(geo, &e, tol)?;
        let estar_dual = transport_to_dual(geo, &estar, tol)?;
        Ok(DualityContext {
            n: geo.n(),
            t_e: e.t_unit()?,
            t_estar: estar.t_unit()?,
            s_e: e_dual.t_unit()?,
            s_estar: estar_dual.t_unit()?,
            e,
            estar,
            e_dual,
            estar_dual,
        })
    }

    /// The same context with the roles of `E` and `E*` exchanged.
    pub fn swapped(&self) -> Self {
        DualityContext {
            n: self.n,
            e: self.estar.clone(),
            estar: self.e.clone(),
            e_dual: self.estar_dual.clone(),
            estar_dual: self.e_dual.clone(),
            t_e: self.t_estar.clone(),
            t_estar: self.t_e.clone(),
            s_e: self.s_estar.clone(),
            s_estar: self.s_e.clone(),
        }
    }

    fn require_odd(&self) -> Result<()> {
        if self.n.is_multiple_of(2) {
            return Err(Error::EvenDimension(self.n));
        }
        Ok(())
    }

    /// Scalar of `D_E: det H_*(E) → det H_*(E*)` in the reference bases.
    pub fn homological(&self) -> Result<S> {
        self.require_odd()?;
        Ok(self.s_estar.clone() / self.t_e.clone())
    }

    /// Scalar of `D_E: det H^*(E) → det H^*(E*)` in the reference bases, fixed
    /// by `{D_E(x) ⊗ D_{E*}(y)}_{E*} = {x ⊗ y}_E`.
    pub fn cohomological(&self) -> Result<S> {
        self.require_odd()?;
        Ok(self.t_estar.clone() / self.s_e.clone())
    }

    /// Homological scalar from the chain-level intersection matrices
    /// `I_q[k][l] = ⟨h_{E,q,k}, h*_{E*,n-q,l}⟩` (evaluation at common points).
    pub fn homological_by_intersection(&self) -> Result<S> {
        self.require_odd()?;
        intersection_scalar(&self.e, &self.estar_dual, self.n)
    }

    /// Cohomological scalar from the intersection forms of `E*`.
    pub fn cohomological_by_intersection(&self) -> Result<S> {
        self.require_odd()?;
        Ok(intersection_scalar(&self.estar, &self.e_dual, self.n)?.recip())
    }
}

/// `Π_q det I_q^{(-1)^q}` where `I_q` pairs degree-`q` cycles of `(τ, E)` with
/// degree-`(n-q)` cycles of `(τ*, E*)` through the cell bijection.
pub fn intersection_scalar<S: Scalar>(e: &Twisted<S>, estar_dual: &Twisted<S>, n: usize) -> Result<S> {
    let c = e.complex();
    let dual = estar_dual.complex();
    let r = e.system.rank();
    let mut acc = S::one();
    for q in 0..=n {
        let left = e.homology.cycles.get(q).cloned().unwrap_or_default();
        let right = estar_dual.homology.cycles.get(n - q).cloned().unwrap_or_default();
        if left.len() != right.len() {
            return Err(Error::ContextMismatch(format!("Betti numbers differ in degree {q}")));
        }
        if left.is_empty() {
            continue;
        }
        let ids: Vec<usize> = c
            .cells_of_dim(q)
            .iter()
            .map(|&g| dual.index_of(&format!("*{}", c.cell(g).id)).map(|d| dual.position(d)))
            .collect::<Option<_>>()
            .ok_or_else(|| Error::ContextMismatch("dual complex does not match".into()))?;
        let m = Matrix::from_rows(
            left.iter()
                .map(|h| {
                    right
                        .iter()
                        .map(|g| {
                            let mut acc = S::zero();
                            for (k, &dk) in ids.iter().enumerate() {
                                for i in 0..r {
                                    acc = acc + h[r * k + i].clone() * g[r * dk + i].clone();
                                }
                            }
                            acc
                        })
                        .collect()
                })
                .collect(),
        );
        let d = m.det();
        if d.is_zero_exact() || d.modulus() == 0.0 {
            return Err(Error::ContextMismatch(format!("intersection form degenerate in degree {q}")));
        }
        acc = acc * d.powi(eps(q));
    }
    Ok(acc)
}

/// Both sides of `ψ̂ ∘ D_F ∘ φ̂ = D_E` as scalars, `ψ` the adjoint of `φ`.
pub fn duality_square_check<S: Scalar>(
    phi: &LineBundleIso<S>,
    ctx_e: &DualityContext<S>,
    ctx_f: &DualityContext<S>,
    tol: f64,
) -> Result<(S, S)> {
    let hat = correspondence_hat(phi, &ctx_e.e, &ctx_f.e, tol)?;
    let psi_hat = correspondence_hat(phi, &ctx_f.estar, &ctx_e.estar, tol)?;
    Ok((psi_hat * ctx_f.homological()? * hat, ctx_e.homological()?))
}

/// Canonical-metric value of the even-dimensional duality element
/// `D_E ∈ det H^*(E) ⊗ det H^*(E*)`.
pub fn poincare_element_even<S: Scalar>(ctx: &DualityContext<S>) -> Result<f64> {
    if ctx.n % 2 == 1 {
        return Err(Error::OddDimension(ctx.n));
    }
    let i = intersection_scalar(&ctx.e, &ctx.estar_dual, ctx.n)?;
    Ok(i.modulus() * (ctx.t_e.clone() * ctx.t_estar.clone()).modulus())
}

/// The dual complex `D_j = C_{n-j}^*` with `δ = ∂^T`, as used in the abstract
/// duality square.
pub fn dual_based_complex<S: Scalar>(cc: &TwistedChainComplex<S>, n: usize) -> TwistedChainComplex<S> {
    let dims: Vec<usize> = (0..=n).map(|j| cc.dim(n - j)).collect();
    let boundaries: Vec<Matrix<S>> =
        (0..=n).map(|j| if j == 0 { Matrix::zeros(0, dims[0]) } else { cc.boundary(n - j + 1).transpose() }).collect();
    TwistedChainComplex::from_boundaries(1, dims, boundaries)
}

/// Both sides of the abstract square `T_D ∘ α = Σ ∘ T_C` for a based complex
/// `C` concentrated in degrees `0..=n` with standard frames on both sides.
pub fn abstract_duality_square<S: Scalar>(cc: &TwistedChainComplex<S>, n: usize) -> Result<(S, S)> {
    if n.is_multiple_of(2) {
        return Err(Error::EvenDimension(n));
    }
    let unit = |c: &TwistedChainComplex<S>| Frame::unit(c.dims.iter().sum());
    let hc = twisted_homology(cc)?;
    let d = dual_based_complex(cc, n);
    let hd = twisted_homology(&d)?;
    let t_c = t_coordinate(cc, &unit(cc), &hc)?;
    let t_d = t_coordinate(&d, &unit(&d), &hd)?;
    // Σ pairs H_i(C) with H_{n-i}(D) = cocycles of C in degree i
    let g = CohomologyBasis { cocycles: (0..=n).map(|i| hd.cycles[n - i].clone()).collect() };
    let sigma = evaluation_scalar(&hc, &g)?;
    Ok((t_d, t_c * sigma))
}
