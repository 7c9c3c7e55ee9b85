//! Determinant-line calculus. The canonical map from the determinant of the
//! chains to the determinant of homology is the core; correspondences induced
//! by maps of determinant bundles and the canonical metric are built on it.
//!
//! Every element of a determinant line is stored as a coordinate relative to
//! the wedge of a fixed homology basis. The coordinate of the element coming
//! from a frame `u` is the *T-coordinate*
//!
//! `t(u, h) = Π_q det[∂b_{q+1}, h_q, b_q]^{(-1)^{q+1}} · Π_Δ u_Δ^{ε(Δ)}`,
//!
//! where `b_q` are the standard vectors at the pivot columns of `∂_q` and
//! `ε(Δ) = (-1)^{dim Δ}`.

use std::sync::Arc;

use crate::complex::{Complex, SubdivisionMap};
use crate::error::{Error, Result};
use crate::homology::{class_coordinates, twisted_homology, validate_basis, HomologyBasis, RANK_TOL};
use crate::local_system::{subdivide_system, twisted_chain_complex, LocalSystem, TwistedChainComplex};
use crate::matrix::{hstack, Matrix};
use crate::par;
use crate::scalar::{approx_eq_mod_sign, Scalar};

/// `(-1)^q` as an exponent.
pub fn eps(q: usize) -> i32 {
    if q.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// Per-cell volume scalars `u_Δ`, indexed by global cell index (cells are
/// grouped by dimension, so this is also degree-then-position order).
#[derive(Clone, Debug, PartialEq)]
pub struct Frame<S: Scalar> {
    pub u: Vec<S>,
}

impl<S: Scalar> Frame<S> {
    pub fn unit(n_cells: usize) -> Self {
        Frame { u: vec![S::one(); n_cells] }
    }

    /// `Π_Δ u_Δ^{ε(Δ)}` for a complex with `counts[q]` cells in degree `q`.
    pub fn volume(&self, counts: &[usize]) -> Result<S> {
        let mut acc = S::one();
        let mut g = 0;
        for (q, &k) in counts.iter().enumerate() {
            for _ in 0..k {
                let u = &self.u[g];
                if u.is_zero_exact() || u.modulus() == 0.0 {
                    return Err(Error::ZeroFrame(format!("#{g}")));
                }
                acc = acc * u.powi(eps(q));
                g += 1;
            }
        }
        Ok(acc)
    }
}

/// Torsion of a based complex: `value = 1 / t(u, h)` and `abs = |value|`.
#[derive(Clone, Debug, PartialEq)]
pub struct TorsionScalar<S: Scalar> {
    pub abs: f64,
    pub value: S,
    /// The T-coordinate itself.
    pub coordinate: S,
}

fn counts_of<S: Scalar>(cc: &TwistedChainComplex<S>) -> Vec<usize> {
    cc.dims.iter().map(|d| d.checked_div(cc.rank).unwrap_or(0)).collect()
}

/// Product of the change-of-basis determinants `Π det X_q^{(-1)^{q+1}}`.
fn basis_change_product<S: Scalar>(cc: &TwistedChainComplex<S>, h: &HomologyBasis<S>) -> Result<S> {
    let top = cc.dims.len();
    let dets = par::map_range(top, |q| -> Result<S> {
        let n = cc.dim(q);
        let d_above = cc.boundary(q + 1);
        let above: Vec<Vec<S>> = h.boundary_pivots.get(q + 1).map_or(Vec::new(), |p| p.iter().map(|&j| d_above.column(j)).collect());
        let own: Vec<Vec<S>> = h.boundary_pivots[q]
            .iter()
            .map(|&j| {
                let mut e = vec![S::zero(); n];
                e[j] = S::one();
                e
            })
            .collect();
        let x = hstack(n, &[&above, &h.cycles[q], &own]);
        if x.cols() != n {
            return Err(Error::BadHomologyBasis { degree: q, reason: "basis sizes do not add up".into() });
        }
        let det = x.det();
        if det.is_zero_exact() || det.modulus() == 0.0 {
            return Err(Error::BadHomologyBasis { degree: q, reason: "degenerate basis".into() });
        }
        Ok(det)
    });
    let mut acc = S::one();
    for (q, d) in dets.into_iter().enumerate() {
        acc = acc * d?.powi(-eps(q));
    }
    Ok(acc)
}

/// T-coordinate of the frame element `⊗ u_Δ^{ε(Δ)}` relative to `h`.
pub fn t_coordinate<S: Scalar>(cc: &TwistedChainComplex<S>, frame: &Frame<S>, h: &HomologyBasis<S>) -> Result<S> {
    let counts = counts_of(cc);
    if frame.u.len() != counts.iter().sum::<usize>() {
        return Err(Error::ContextMismatch("frame has the wrong number of cells".into()));
    }
    Ok(basis_change_product(cc, h)? * frame.volume(&counts)?)
}

/// Torsion of `C` with frame `u` and homology basis `h`.
pub fn canonical_torsion<S: Scalar>(cc: &TwistedChainComplex<S>, frame: &Frame<S>, h: &HomologyBasis<S>) -> Result<TorsionScalar<S>> {
    validate_basis(cc, h)?;
    let t = t_coordinate(cc, frame, h)?;
    let value = t.recip();
    Ok(TorsionScalar { abs: value.modulus(), value, coordinate: t })
}

/// A system with its chain complex and a reference homology basis.
#[derive(Clone, Debug)]
pub struct Twisted<S: Scalar> {
    pub system: LocalSystem<S>,
    pub chains: TwistedChainComplex<S>,
    pub homology: HomologyBasis<S>,
}

impl<S: Scalar> Twisted<S> {
    pub fn new(system: LocalSystem<S>, tol: f64) -> Result<Self> {
        let chains = twisted_chain_complex(&system, tol)?;
        let homology = twisted_homology(&chains)?;
        Ok(Twisted { system, chains, homology })
    }

    pub fn complex(&self) -> &Arc<Complex> {
        self.system.complex()
    }

    /// Replaces the reference homology basis.
    pub fn with_cycles(&self, cycles: Vec<Vec<Vec<S>>>) -> Result<Self> {
        let homology = self.homology.with_cycles(&self.chains, cycles)?;
        Ok(Twisted { homology, ..self.clone() })
    }

    /// T-coordinate of the unit frame.
    pub fn t_unit(&self) -> Result<S> {
        t_coordinate(&self.chains, &Frame::unit(self.complex().len()), &self.homology)
    }

    pub fn t_of(&self, frame: &Frame<S>) -> Result<S> {
        t_coordinate(&self.chains, frame, &self.homology)
    }

    pub fn torsion(&self, frame: &Frame<S>) -> Result<TorsionScalar<S>> {
        canonical_torsion(&self.chains, frame, &self.homology)
    }

    /// The element `a · (wedge of the reference basis)`.
    pub fn element(&self, a: S) -> DetLineElement<S> {
        DetLineElement { coordinate: a, basis: self.homology.id(), kind: LineKind::Homological }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LineKind {
    /// `det H_*`.
    Homological,
    /// `det H^*`, with reference basis dual to the homology basis of the dual
    /// system.
    Cohomological,
}

/// Element of a determinant line: a coordinate relative to the wedge of a
/// reference basis, compared modulo sign.
#[derive(Clone, Debug, PartialEq)]
pub struct DetLineElement<S: Scalar> {
    pub coordinate: S,
    pub basis: u64,
    pub kind: LineKind,
}

impl<S: Scalar> DetLineElement<S> {
    pub fn scaled(&self, t: &S) -> Self {
        DetLineElement { coordinate: self.coordinate.clone() * t.clone(), ..self.clone() }
    }
}

fn expect_element<S: Scalar>(x: &DetLineElement<S>, basis: u64, kind: LineKind, what: &str) -> Result<()> {
    if x.basis != basis || x.kind != kind {
        return Err(Error::ContextMismatch(format!("{what} does not belong to the expected determinant line")));
    }
    Ok(())
}

/// Isomorphism of determinant line bundles, one scalar per cell in the
/// anchor gauge.
#[derive(Clone, Debug, PartialEq)]
pub struct LineBundleIso<S: Scalar> {
    pub phi: Vec<S>,
}

impl<S: Scalar> LineBundleIso<S> {
    pub fn identity(n_cells: usize) -> Self {
        LineBundleIso { phi: vec![S::one(); n_cells] }
    }

    pub fn scaled(&self, t: &S) -> Self {
        LineBundleIso { phi: self.phi.iter().map(|p| p.clone() * t.clone()).collect() }
    }

    pub fn compose(&self, after: &Self) -> Self {
        LineBundleIso { phi: self.phi.iter().zip(&after.phi).map(|(a, b)| a.clone() * b.clone()).collect() }
    }

    /// Checks `φ_{Δ'} · det R^E = det R^F · φ_Δ` on every attachment.
    pub fn check(&self, det_e: &LocalSystem<S>, det_f: &LocalSystem<S>, tol: f64) -> Result<()> {
        let c = det_e.complex();
        if !c.same_as(det_f.complex()) || self.phi.len() != c.len() {
            return Err(Error::ContextMismatch("iso and systems live on different complexes".into()));
        }
        for g in 0..c.len() {
            for &(f, _) in c.facets(g) {
                let (ae, af) = (det_e.attachments(f, g), det_f.attachments(f, g));
                let bad = || Error::NotAMorphism { face: c.cell(f).id.clone(), cell: c.cell(g).id.clone() };
                if ae.len() != af.len() {
                    return Err(bad());
                }
                for (x, y) in ae.iter().zip(af) {
                    let lhs = self.phi[f].clone() * x.matrix[(0, 0)].clone();
                    let rhs = y.matrix[(0, 0)].clone() * self.phi[g].clone();
                    let ok = if S::EXACT {
                        lhs == rhs
                    } else {
                        (lhs.to_c64() - rhs.to_c64()).norm() <= tol * lhs.modulus().max(rhs.modulus()).max(1e-300)
                    };
                    if !ok {
                        return Err(bad());
                    }
                }
            }
        }
        Ok(())
    }

    /// The flat isomorphism `det E → det F` taking value `seeds[k]` on the
    /// first cell of the `k`-th connected component (extra seeds are
    /// ignored, missing ones default to 1).
    pub fn propagate(det_e: &LocalSystem<S>, det_f: &LocalSystem<S>, seeds: &[S]) -> Result<Self> {
        let c = det_e.complex();
        let mut phi: Vec<Option<S>> = vec![None; c.len()];
        let mut component = 0;
        for start in 0..c.len() {
            if phi[start].is_some() {
                continue;
            }
            phi[start] = Some(seeds.get(component).cloned().unwrap_or_else(S::one));
            component += 1;
            let mut stack = vec![start];
            while let Some(g) = stack.pop() {
                let pg = phi[g].clone().expect("visited");
                for &(f, _) in c.facets(g) {
                    if phi[f].is_none() {
                        let (re, rf) = (&det_e.attachments(f, g)[0].matrix, &det_f.attachments(f, g)[0].matrix);
                        phi[f] = Some(rf[(0, 0)].clone() * pg.clone() / re[(0, 0)].clone());
                        stack.push(f);
                    }
                }
                for &(h, _) in c.cofacets(g) {
                    if phi[h].is_none() {
                        let (re, rf) = (&det_e.attachments(g, h)[0].matrix, &det_f.attachments(g, h)[0].matrix);
                        phi[h] = Some(pg.clone() * re[(0, 0)].clone() / rf[(0, 0)].clone());
                        stack.push(h);
                    }
                }
            }
        }
        Ok(LineBundleIso { phi: phi.into_iter().map(|p| p.expect("all cells reached")).collect() })
    }

    /// `Π_Δ φ_Δ^{ε(Δ)}`.
    pub fn volume(&self, c: &Complex) -> S {
        let mut acc = S::one();
        for (g, p) in self.phi.iter().enumerate() {
            acc = acc * p.powi(eps(c.cell(g).dim));
        }
        acc
    }
}

fn same_complex<S: Scalar>(a: &Twisted<S>, b: &Twisted<S>) -> Result<()> {
    if !a.complex().same_as(b.complex()) {
        return Err(Error::ContextMismatch("systems live on different complexes".into()));
    }
    Ok(())
}

/// Scalar of `φ̂: det H_*(E) → det H_*(F)` relative to the reference bases:
/// `Π φ_Δ^{ε(Δ)} · t_F / t_E`.
pub fn correspondence_hat<S: Scalar>(phi: &LineBundleIso<S>, e: &Twisted<S>, f: &Twisted<S>, tol: f64) -> Result<S> {
    same_complex(e, f)?;
    phi.check(&e.system.det(), &f.system.det(), tol)?;
    Ok(phi.volume(e.complex()) * f.t_unit()? / e.t_unit()?)
}

/// Applies `φ̂` to an element of `det H_*(E)`.
pub fn apply_hat<S: Scalar>(
    phi: &LineBundleIso<S>,
    e: &Twisted<S>,
    f: &Twisted<S>,
    x: &DetLineElement<S>,
    tol: f64,
) -> Result<DetLineElement<S>> {
    expect_element(x, e.homology.id(), LineKind::Homological, "argument")?;
    let s = correspondence_hat(phi, e, f, tol)?;
    Ok(f.element(x.coordinate.clone() * s))
}

/// Checks that `dual` carries the inverse-transposed transports of `sys`.
pub fn check_dual_pair<S: Scalar>(sys: &LocalSystem<S>, dual: &LocalSystem<S>, tol: f64) -> Result<()> {
    if !sys.complex().same_as(dual.complex()) || sys.rank() != dual.rank() {
        return Err(Error::ContextMismatch("dual system lives on a different complex".into()));
    }
    let expect = sys.dual();
    for (a, b) in expect.transports().iter().zip(dual.transports()) {
        let diff = a.matrix.sub(&b.matrix).max_modulus();
        let scale = a.matrix.max_modulus().max(1.0);
        let bad = if S::EXACT { a.matrix != b.matrix } else { diff > tol * scale };
        if bad || a.sign != b.sign {
            return Err(Error::ContextMismatch(format!("transport ({}, {}) is not dual", a.face, a.cell)));
        }
    }
    Ok(())
}

/// `⟨x ⊗ y⟩_E` for `x ∈ det H_*(E)` and `y ∈ det H_*(E*)`: both are pulled back
/// to unit frames, whose fiberwise pairing is 1 in dual gauges.
pub fn canonical_metric<S: Scalar>(e: &Twisted<S>, estar: &Twisted<S>, x: &DetLineElement<S>, y: &DetLineElement<S>) -> Result<f64> {
    same_complex(e, estar)?;
    check_dual_pair(&e.system, &estar.system, 1e-9)?;
    expect_element(x, e.homology.id(), LineKind::Homological, "first argument")?;
    expect_element(y, estar.homology.id(), LineKind::Homological, "second argument")?;
    let denom = (e.t_unit()? * estar.t_unit()?).modulus();
    Ok((x.coordinate.clone() * y.coordinate.clone()).modulus() / denom)
}

/// Element of `det H^*(E)` with coordinate `a` relative to the basis dual to
/// the reference homology basis of `E*`.
pub fn cohomology_element<S: Scalar>(estar: &Twisted<S>, a: S) -> DetLineElement<S> {
    DetLineElement { coordinate: a, basis: estar.homology.id(), kind: LineKind::Cohomological }
}

/// Cohomological canonical metric: `x ∈ det H^*(E)`, `y ∈ det H^*(E*)`.
pub fn canonical_metric_cohomological<S: Scalar>(
    e: &Twisted<S>,
    estar: &Twisted<S>,
    x: &DetLineElement<S>,
    y: &DetLineElement<S>,
) -> Result<f64> {
    same_complex(e, estar)?;
    check_dual_pair(&e.system, &estar.system, 1e-9)?;
    expect_element(x, estar.homology.id(), LineKind::Cohomological, "first argument")?;
    expect_element(y, e.homology.id(), LineKind::Cohomological, "second argument")?;
    let t = (e.t_unit()? * estar.t_unit()?).modulus();
    Ok((x.coordinate.clone() * y.coordinate.clone()).modulus() * t)
}

/// Cocycle bases of the cochain complex `Hom(C_*(E), k) = C^*(E*)`.
#[derive(Clone, Debug)]
pub struct CohomologyBasis<S: Scalar> {
    /// `cocycles[q]`: functionals on `C_q` in the dual standard basis.
    pub cocycles: Vec<Vec<Vec<S>>>,
}

/// Cohomology of the dual cochain complex, computed as homology of the
/// transposed complex.
pub fn cohomology_basis<S: Scalar>(cc: &TwistedChainComplex<S>) -> Result<CohomologyBasis<S>> {
    let top = cc.dims.len();
    // reverse grading so that the coboundary becomes a boundary
    let mut dims = cc.dims.clone();
    dims.reverse();
    let mut boundaries = vec![Matrix::zeros(0, dims.first().copied().unwrap_or(0))];
    for k in 1..top {
        let q = top - k; // coboundary C^{q-1} → C^q is ∂_q^T
        boundaries.push(cc.boundary(q).transpose());
    }
    let transposed = TwistedChainComplex::from_boundaries(cc.rank, dims, boundaries);
    let h = twisted_homology(&transposed)?;
    let mut cocycles = h.cycles;
    cocycles.reverse();
    Ok(CohomologyBasis { cocycles })
}

fn pairing_matrix<S: Scalar>(cycles: &[Vec<S>], cocycles: &[Vec<S>]) -> Matrix<S> {
    Matrix::from_rows(
        cycles
            .iter()
            .map(|h| cocycles.iter().map(|g| h.iter().zip(g).fold(S::zero(), |acc, (a, b)| acc + a.clone() * b.clone())).collect())
            .collect(),
    )
}

/// `Π_q det M_q^{(-1)^q}` with `M_q[k][l] = ⟨h_{q,k}, g_{q,l}⟩`.
pub fn evaluation_scalar<S: Scalar>(h: &HomologyBasis<S>, g: &CohomologyBasis<S>) -> Result<S> {
    if h.cycles.len() != g.cocycles.len() {
        return Err(Error::ContextMismatch("homology and cohomology have different lengths".into()));
    }
    let mut acc = S::one();
    for q in 0..h.cycles.len() {
        if h.cycles[q].len() != g.cocycles[q].len() {
            return Err(Error::ContextMismatch(format!("ranks differ in degree {q}")));
        }
        let d = pairing_matrix(&h.cycles[q], &g.cocycles[q]).det();
        if d.is_zero_exact() || d.modulus() == 0.0 {
            return Err(Error::ContextMismatch(format!("pairing is degenerate in degree {q}")));
        }
        acc = acc * d.powi(eps(q));
    }
    Ok(acc)
}

/// Cocycle basis dual to `h` under evaluation.
pub fn dual_cohomology_basis<S: Scalar>(cc: &TwistedChainComplex<S>, h: &HomologyBasis<S>) -> Result<CohomologyBasis<S>> {
    let g = cohomology_basis(cc)?;
    let mut cocycles = Vec::with_capacity(g.cocycles.len());
    for q in 0..g.cocycles.len() {
        let m = pairing_matrix(&h.cycles[q], &g.cocycles[q]);
        let n = m.inverse().ok_or_else(|| Error::ContextMismatch(format!("pairing is degenerate in degree {q}")))?;
        let dual: Vec<Vec<S>> = (0..g.cocycles[q].len())
            .map(|l| {
                (0..cc.dim(q))
                    .map(|i| g.cocycles[q].iter().enumerate().fold(S::zero(), |acc, (mi, gm)| acc + gm[i].clone() * n[(mi, l)].clone()))
                    .collect()
            })
            .collect();
        cocycles.push(dual);
    }
    Ok(CohomologyBasis { cocycles })
}

/// Evaluation pairing `{x, y}_E` between `x ∈ det H_*(E)` (reference basis of
/// `e`) and `y ∈ det H^*(E*)`, the latter given relative to the cocycle basis
/// `g`.
pub fn evaluation_pairing<S: Scalar>(e: &Twisted<S>, g: &CohomologyBasis<S>, x: &DetLineElement<S>, y: &S) -> Result<S> {
    expect_element(x, e.homology.id(), LineKind::Homological, "first argument")?;
    Ok(x.coordinate.clone() * y.clone() * evaluation_scalar(&e.homology, g)?)
}

/// Scalar of `φ̌: det H^*(E) → det H^*(F)` in the reference bases; it is the
/// transpose of `ψ̂` for the adjoint `ψ: det F* → det E*`, which has the same
/// cell scalars as `φ`.
pub fn correspondence_cohomological<S: Scalar>(phi: &LineBundleIso<S>, estar: &Twisted<S>, fstar: &Twisted<S>, tol: f64) -> Result<S> {
    correspondence_hat(phi, fstar, estar, tol)
}

/// Both sides of `⟨x ⊗ ψ̂(y)⟩_E = ⟨φ̂(x) ⊗ y⟩_F` for `x ∈ det H_*(E)` and
/// `y ∈ det H_*(F*)`.
pub fn correspondence_adjoint_identity<S: Scalar>(
    phi: &LineBundleIso<S>,
    [e, estar, f, fstar]: [&Twisted<S>; 4],
    x: &DetLineElement<S>,
    y: &DetLineElement<S>,
    tol: f64,
) -> Result<(f64, f64)> {
    let psi_y = apply_hat(phi, fstar, estar, y, tol)?;
    let lhs = canonical_metric(e, estar, x, &psi_y)?;
    let phi_x = apply_hat(phi, e, f, x, tol)?;
    let rhs = canonical_metric(f, fstar, &phi_x, y)?;
    Ok((lhs, rhs))
}

/// Cohomological twin: `x ∈ det H^*(E)`, `y ∈ det H^*(F*)`.
pub fn correspondence_adjoint_identity_cohomological<S: Scalar>(
    phi: &LineBundleIso<S>,
    [e, estar, f, fstar]: [&Twisted<S>; 4],
    x: &DetLineElement<S>,
    y: &DetLineElement<S>,
    tol: f64,
) -> Result<(f64, f64)> {
    expect_element(x, estar.homology.id(), LineKind::Cohomological, "first argument")?;
    expect_element(y, f.homology.id(), LineKind::Cohomological, "second argument")?;
    // ψ̌ on det H^*(F*) is the transpose of φ̂
    let psi_check = correspondence_hat(phi, e, f, tol)?;
    let psi_y = cohomology_element(e, y.coordinate.clone() * psi_check);
    let lhs = canonical_metric_cohomological(e, estar, x, &psi_y)?;
    let phi_check = correspondence_cohomological(phi, estar, fstar, tol)?;
    let phi_x = cohomology_element(fstar, x.coordinate.clone() * phi_check);
    let rhs = canonical_metric_cohomological(f, fstar, &phi_x, y)?;
    Ok((lhs, rhs))
}

/// Matrices of the chain inclusion `C_*(τ, E) → C_*(τ', E)` in the carrier
/// gauge (every block is `±I`).
pub fn subdivision_chain_map<S: Scalar>(coarse: &Complex, fine: &Complex, map: &SubdivisionMap, rank: usize) -> Vec<Matrix<S>> {
    let top = coarse.dim() + 1;
    (0..top)
        .map(|q| {
            let mut m = Matrix::zeros(rank * fine.count(q), rank * coarse.count(q));
            for (k, &s) in coarse.cells_of_dim(q).iter().enumerate() {
                for &(p, sign) in &map.pieces[s] {
                    for i in 0..rank {
                        m[(rank * fine.position(p) + i, rank * k + i)] = S::from_i64(sign);
                    }
                }
            }
            m
        })
        .collect()
}

/// Pushes a homology basis forward along a chain map.
pub fn push_cycles<S: Scalar>(maps: &[Matrix<S>], cycles: &[Vec<Vec<S>>]) -> Vec<Vec<Vec<S>>> {
    cycles.iter().enumerate().map(|(q, vs)| vs.iter().map(|v| maps[q].mul_vec(v)).collect()).collect()
}

/// `E` on a subdivision, with the reference basis pushed forward.
pub fn subdivide_twisted<S: Scalar>(e: &Twisted<S>, fine: Arc<Complex>, map: &SubdivisionMap, tol: f64) -> Result<Twisted<S>> {
    let sys = subdivide_system(&e.system, fine.clone(), map)?;
    let fine_tw = Twisted::new(sys, tol)?;
    let maps = subdivision_chain_map::<S>(e.complex(), &fine, map, e.system.rank());
    fine_tw.with_cycles(push_cycles(&maps, &e.homology.cycles))
}

/// Outcome of comparing a correspondence before and after subdivision.
#[derive(Clone, Debug)]
pub struct SubdivisionComparison<S: Scalar> {
    pub coarse: S,
    pub fine: S,
    /// `Π φ'^{ε}` over the cells of the quotient complex times the ratio of
    /// its torsions for `F` and `E`; equals 1 when `φ̃` preserves the volume
    /// of the quotient.
    pub quotient_factor: S,
    pub agree: bool,
}

/// Quotient `D = C(τ') / i C(τ)`, represented on the complement spanned by
/// the standard vectors of every fine cell except the first piece of each
/// coarse cell. Returns the boundary matrices of `D` and the fine cells
/// used as its basis.
pub fn quotient_complex<S: Scalar>(
    coarse: &Complex,
    fine: &Complex,
    map: &SubdivisionMap,
    fine_chains: &TwistedChainComplex<S>,
    rank: usize,
) -> Result<(TwistedChainComplex<S>, Vec<usize>)> {
    let top = fine.dim() + 1;
    let incl = subdivision_chain_map::<S>(coarse, fine, map, rank);
    let mut complement_cells: Vec<Vec<usize>> = Vec::with_capacity(top);
    let mut proj: Vec<Matrix<S>> = Vec::with_capacity(top);
    for q in 0..top {
        let firsts: Vec<usize> = coarse.cells_of_dim(q).iter().map(|&s| map.pieces[s][0].0).collect();
        let comp: Vec<usize> = fine.cells_of_dim(q).iter().copied().filter(|p| !firsts.contains(p)).collect();
        let n = rank * fine.count(q);
        let mut cols: Vec<Vec<S>> = incl[q].columns();
        for &p in &comp {
            for i in 0..rank {
                let mut e = vec![S::zero(); n];
                e[rank * fine.position(p) + i] = S::one();
                cols.push(e);
            }
        }
        let b = Matrix::from_columns(n, &cols);
        let inv = b.inverse().ok_or_else(|| Error::NotASubdivision("pieces do not split the chains".into()))?;
        let skip = incl[q].cols();
        proj.push(inv.block(skip, 0, n - skip, n));
        complement_cells.push(comp);
    }
    let dims: Vec<usize> = complement_cells.iter().map(|c| rank * c.len()).collect();
    let mut boundaries = vec![Matrix::zeros(0, dims[0])];
    for q in 1..top {
        let mut emb = Matrix::zeros(rank * fine.count(q), dims[q]);
        for (k, &p) in complement_cells[q].iter().enumerate() {
            for i in 0..rank {
                emb[(rank * fine.position(p) + i, rank * k + i)] = S::one();
            }
        }
        boundaries.push(proj[q - 1].mul(&fine_chains.boundary(q)).mul(&emb));
    }
    let d = TwistedChainComplex::from_boundaries(rank, dims, boundaries);
    d.check_boundary_squared(1e-9)?;
    Ok((d, complement_cells.into_iter().flatten().collect()))
}

/// Computes `φ̂` over `τ` and over the subdivision `τ'` (systems and `φ`
/// pulled back along the carrier), and the volume factor of the acyclic
/// quotient complex that relates the two.
pub fn correspondence_check<S: Scalar>(
    phi: &LineBundleIso<S>,
    e: &Twisted<S>,
    f: &Twisted<S>,
    fine: Arc<Complex>,
    map: &SubdivisionMap,
    tol: f64,
) -> Result<SubdivisionComparison<S>> {
    let coarse_scalar = correspondence_hat(phi, e, f, tol)?;
    let fe = subdivide_twisted(e, fine.clone(), map, tol)?;
    let ff = subdivide_twisted(f, fine.clone(), map, tol)?;
    let fine_phi = LineBundleIso { phi: map.carrier.iter().map(|&k| phi.phi[k].clone()).collect() };
    let fine_scalar = correspondence_hat(&fine_phi, &fe, &ff, tol)?;

    let coarse = e.complex();
    let (de, cells) = quotient_complex(coarse, &fine, map, &fe.chains, e.system.rank())?;
    let (df, _) = quotient_complex(coarse, &fine, map, &ff.chains, f.system.rank())?;
    let he = twisted_homology(&de)?;
    let hf = twisted_homology(&df)?;
    if !he.is_acyclic() || !hf.is_acyclic() {
        return Err(Error::NotASubdivision("quotient complex is not acyclic".into()));
    }
    let unit = |d: &TwistedChainComplex<S>| Frame::unit(d.dims.iter().map(|x| x / d.rank.max(1)).sum());
    let mut vol = S::one();
    for &p in &cells {
        vol = vol * fine_phi.phi[p].powi(eps(fine.cell(p).dim));
    }
    let factor = vol * t_coordinate(&df, &unit(&df), &hf)? / t_coordinate(&de, &unit(&de), &he)?;
    let agree = approx_eq_mod_sign(&coarse_scalar, &fine_scalar, tol.max(1e-12)) && approx_eq_mod_sign(&factor, &S::one(), tol.max(1e-12));
    Ok(SubdivisionComparison { coarse: coarse_scalar, fine: fine_scalar, quotient_factor: factor, agree })
}

/// Expresses the classes of `targets` in terms of `basis` degree by degree
/// and returns `Π det M_q^{(-1)^q}`.
pub fn basis_change_scalar<S: Scalar>(cc: &TwistedChainComplex<S>, basis: &[Vec<Vec<S>>], targets: &[Vec<Vec<S>>]) -> Result<S> {
    let mut acc = S::one();
    for q in 0..basis.len() {
        let m = class_coordinates(cc, q, &basis[q], &targets[q])?;
        let d = m.det();
        if d.is_zero_exact() || d.modulus() <= RANK_TOL {
            return Err(Error::BadHomologyBasis { degree: q, reason: "classes are dependent".into() });
        }
        acc = acc * d.powi(eps(q));
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::complex::{barycentric_subdivision, orient_closed_manifold, split_edge};
    use crate::families;
    use crate::local_system::{Field, FLAT_TOL};
    use crate::scalar::{C64, Q};

    fn q(v: i64) -> Q {
        Q::from_i64(v)
    }

    fn frac(a: i64, b: i64) -> Q {
        Q::new(a.into(), b.into())
    }

    fn circle(n: usize, lambda: Q) -> Twisted<Q> {
        let c = Arc::new(families::circle(n).unwrap());
        Twisted::new(families::circle_system(c, Matrix::scalar(lambda), Field::Real).unwrap(), 0.0).unwrap()
    }

    #[test]
    fn holonomy_circle_torsions() {
        let e = circle(3, q(3));
        let t = e.torsion(&Frame::unit(6)).unwrap();
        assert_eq!(t.value.clone() * t.value.clone(), q(4));
        assert!((t.abs - 2.0).abs() < 1e-15);
        let estar = Twisted::new(e.system.dual(), 0.0).unwrap();
        let ts = estar.torsion(&Frame::unit(6)).unwrap();
        assert_eq!(ts.value.clone() * ts.value, frac(4, 9));
    }

    #[test]
    fn identity_complex_has_unit_torsion() {
        let cc = TwistedChainComplex::from_boundaries(1, vec![1, 1], vec![Matrix::zeros(0, 1), Matrix::scalar(q(1))]);
        let h = twisted_homology(&cc).unwrap();
        assert_eq!(canonical_torsion(&cc, &Frame::unit(2), &h).unwrap().value, q(1));
        let empty = TwistedChainComplex::<Q>::from_boundaries(1, vec![], vec![]);
        let h = twisted_homology(&empty).unwrap();
        assert_eq!(canonical_torsion(&empty, &Frame::unit(0), &h).unwrap().value, q(1));
    }

    #[test]
    fn frame_homogeneity_is_exact() {
        let e = circle(4, q(5));
        let base = e.t_unit().unwrap();
        for g in 0..8 {
            let mut u = Frame::unit(8);
            u.u[g] = q(7);
            let dim = e.complex().cell(g).dim;
            assert_eq!(e.t_of(&u).unwrap(), base.clone() * q(7).powi(eps(dim)));
        }
    }

    #[test]
    fn torsion_survives_subdivision_with_trivial_coefficients() {
        let e = circle(3, q(1));
        let m = orient_closed_manifold((**e.complex()).clone()).unwrap();
        let (fine, map) = barycentric_subdivision(&m).unwrap();
        let fe = subdivide_twisted(&e, Arc::new(fine.base), &map, 0.0).unwrap();
        let a = e.torsion(&Frame::unit(6)).unwrap().value;
        let b = fe.torsion(&Frame::unit(12)).unwrap().value;
        assert!(a == b || a == -b.clone());
    }

    #[test]
    fn correspondence_scaling_and_composition() {
        let e = circle(3, q(3));
        let id = LineBundleIso::identity(6);
        assert_eq!(correspondence_hat(&id, &e, &e, 0.0).unwrap(), q(1));
        let scaled = id.scaled(&q(5));
        assert_eq!(correspondence_hat(&scaled, &e, &e, 0.0).unwrap(), q(1));

        let s2 = Arc::new(families::sphere(2).unwrap());
        let triv = Twisted::new(families::trivial_system::<Q>(s2.clone(), 1, Field::Real).unwrap(), 0.0).unwrap();
        let id = LineBundleIso::identity(s2.len());
        assert_eq!(correspondence_hat(&id.scaled(&q(3)), &triv, &triv, 0.0).unwrap(), q(9));
        let a = id.scaled(&q(2));
        let b = id.scaled(&frac(1, 3));
        let ab = correspondence_hat(&a.compose(&b), &triv, &triv, 0.0).unwrap();
        let prod = correspondence_hat(&a, &triv, &triv, 0.0).unwrap() * correspondence_hat(&b, &triv, &triv, 0.0).unwrap();
        assert_eq!(ab, prod);
    }

    #[test]
    fn non_morphism_rejected() {
        let e = circle(3, q(3));
        let f = circle(3, q(2));
        let err = correspondence_hat(&LineBundleIso::identity(6), &e, &f, 0.0).unwrap_err();
        assert!(matches!(err, Error::NotAMorphism { .. }));
    }

    #[test]
    fn subdivision_checks_pass() {
        let e = circle(3, q(3));
        let f =
            Twisted::new(e.system.regauge(&families::random_gauge(6, 1, &mut ChaCha8Rng::seed_from_u64(1), false)).unwrap(), 0.0).unwrap();
        let phi = LineBundleIso::propagate(&e.system.det(), &f.system.det(), &[q(2)]).unwrap();
        let m = orient_closed_manifold((**e.complex()).clone()).unwrap();
        let (bary, map) = barycentric_subdivision(&m).unwrap();
        let r = correspondence_check(&phi, &e, &f, Arc::new(bary.base), &map, 0.0).unwrap();
        assert!(r.agree, "{r:?}");
        let edge = m.base.cell(m.base.cells_of_dim(1)[1]).id.clone();
        let (split, map) = split_edge(&m, &edge).unwrap();
        let r = correspondence_check(&phi, &e, &f, Arc::new(split.base), &map, 0.0).unwrap();
        assert!(r.agree, "{r:?}");
        let ident = SubdivisionMap::identity(&m.base);
        let r = correspondence_check(&phi, &e, &f, e.complex().clone(), &ident, 0.0).unwrap();
        assert!(r.agree && r.quotient_factor == q(1));
    }

    #[test]
    fn canonical_metric_of_holonomy_circle() {
        let e = circle(3, q(3));
        let estar = Twisted::new(e.system.dual(), 0.0).unwrap();
        let v = canonical_metric(&e, &estar, &e.element(q(1)), &estar.element(q(1))).unwrap();
        assert!((v - 4.0 / 3.0).abs() < 1e-14);
        let v2 = canonical_metric(&e, &estar, &e.element(q(-5)), &estar.element(q(1))).unwrap();
        assert!((v2 - 5.0 * v).abs() < 1e-13);
        let unit = canonical_metric(&e, &estar, &e.element(e.t_unit().unwrap()), &estar.element(estar.t_unit().unwrap()));
        assert!((unit.unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(canonical_metric(&e, &estar, &estar.element(q(1)), &estar.element(q(1))), Err(Error::ContextMismatch(_))));
    }

    #[test]
    fn evaluation_pairing_basics() {
        let e = circle(4, q(1));
        let g = dual_cohomology_basis(&e.chains, &e.homology).unwrap();
        assert_eq!(evaluation_pairing(&e, &g, &e.element(q(1)), &q(1)).unwrap(), q(1));
        assert_eq!(evaluation_pairing(&e, &g, &e.element(q(3)), &q(1)).unwrap(), q(3));
        let raw = cohomology_basis(&e.chains).unwrap();
        assert_eq!(raw.cocycles.iter().map(Vec::len).collect::<Vec<_>>(), vec![1, 1]);
        let acyclic = circle(3, q(2));
        let g = dual_cohomology_basis(&acyclic.chains, &acyclic.homology).unwrap();
        assert_eq!(evaluation_pairing(&acyclic, &g, &acyclic.element(q(1)), &q(1)).unwrap(), q(1));
    }

    #[test]
    fn adjoint_identity_random_rank2_sphere() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c = Arc::new(families::sphere(3).unwrap());
        let triv = families::trivial_system::<C64>(c.clone(), 2, Field::Complex).unwrap();
        let e_sys = triv.regauge(&families::random_gauge(c.len(), 2, &mut rng, true)).unwrap();
        let f_sys = triv.regauge(&families::random_gauge(c.len(), 2, &mut rng, true)).unwrap();
        let tw = |s: LocalSystem<C64>| Twisted::new(s, FLAT_TOL).unwrap();
        let (e, f) = (tw(e_sys.clone()), tw(f_sys.clone()));
        let (estar, fstar) = (tw(e_sys.dual()), tw(f_sys.dual()));
        let phi = LineBundleIso::propagate(&e_sys.det(), &f_sys.det(), &[C64::new(0.3, 1.1)]).unwrap();
        let x = e.element(C64::new(rng.gen_range(0.5..2.0), 0.2));
        let y = fstar.element(C64::new(-0.7, rng.gen_range(0.5..2.0)));
        let (l, r) = correspondence_adjoint_identity(&phi, [&e, &estar, &f, &fstar], &x, &y, 1e-9).unwrap();
        assert!((l - r).abs() <= 1e-9 * l.max(r), "{l} vs {r}");
        let xc = cohomology_element(&estar, C64::new(1.3, 0.0));
        let yc = cohomology_element(&f, C64::new(0.0, 2.0));
        let (l, r) = correspondence_adjoint_identity_cohomological(&phi, [&e, &estar, &f, &fstar], &xc, &yc, 1e-9).unwrap();
        assert!((l - r).abs() <= 1e-9 * l.max(r), "{l} vs {r}");
    }
}
