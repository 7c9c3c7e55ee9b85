//! Finite-dimensional Hodge theory on twisted complexes and closed-form
//! torsions of circles and lens spaces.
//!
//! Given per-cell inner products, the Ray–Singer metric of a finite based
//! complex is the harmonic (L²) metric on homology corrected by determinants
//! of the combinatorial Laplacians. It must agree with the metric in which the
//! canonical map sends an orthonormal frame to a unit vector.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use rand::Rng;

use crate::complex::Complex;
use crate::detline::{canonical_metric_cohomological, check_dual_pair, cohomology_element, dual_cohomology_basis, eps, Frame, Twisted};
use crate::error::{Error, Result};
use crate::families::lens_parameters;
use crate::homology::twisted_homology;
use crate::local_system::TwistedChainComplex;
use crate::matrix::Matrix;
use crate::par;
use crate::scalar::C64;

/// Relative size below which a Laplacian eigenvalue counts as zero.
pub const ZERO_EIGEN_TOL: f64 = 1e-9;

/// One Hermitian positive-definite Gram matrix per cell, on the fiber in
/// anchor gauge.
#[derive(Clone, Debug, PartialEq)]
pub struct InnerProductData {
    pub per_cell: Vec<Matrix<C64>>,
}

fn to_na(m: &Matrix<C64>) -> DMatrix<C64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

fn from_na(m: &DMatrix<C64>) -> Matrix<C64> {
    Matrix::from_rows((0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect())
}

/// Hermitian `m` with all eigenvalues positive. (Complex Cholesky alone does
/// not reject negative real diagonals.)
fn positive_definite(m: DMatrix<C64>) -> bool {
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    SymmetricEigen::new(m).eigenvalues.iter().all(|&v| v > 1e-14 * scale)
}

impl InnerProductData {
    pub fn identity(n_cells: usize, rank: usize) -> Self {
        InnerProductData { per_cell: vec![Matrix::identity(rank); n_cells] }
    }

    /// `A Aᴴ + I/2` with `A` having entries uniform in the unit square.
    pub fn random(n_cells: usize, rank: usize, rng: &mut impl Rng, complex_entries: bool) -> Self {
        let per_cell = (0..n_cells)
            .map(|_| {
                let a = DMatrix::from_fn(rank, rank, |_, _| {
                    C64::new(rng.gen_range(-1.0..1.0), if complex_entries { rng.gen_range(-1.0..1.0) } else { 0.0 })
                });
                let g = &a * a.adjoint() + DMatrix::identity(rank, rank).scale(0.5).map(|x: f64| C64::new(x, 0.0));
                from_na(&g)
            })
            .collect();
        InnerProductData { per_cell }
    }

    /// Checks shapes and that every Gram matrix is Hermitian positive definite.
    pub fn validate(&self, n_cells: usize, rank: usize) -> Result<()> {
        if self.per_cell.len() != n_cells {
            return Err(Error::NotPositiveDefinite(format!("{} cell matrices for {n_cells} cells", self.per_cell.len())));
        }
        for (g, m) in self.per_cell.iter().enumerate() {
            if m.rows() != rank || m.cols() != rank {
                return Err(Error::NotPositiveDefinite(format!("cell #{g}: matrix is not {rank}x{rank}")));
            }
            let na = to_na(m);
            let scale = m.max_modulus().max(f64::MIN_POSITIVE);
            if (&na - na.adjoint()).iter().any(|z| z.norm() > 1e-12 * scale) {
                return Err(Error::NotPositiveDefinite(format!("cell #{g}: matrix is not Hermitian")));
            }
            if !positive_definite(na) {
                return Err(Error::NotPositiveDefinite(format!("cell #{g}: matrix is not positive definite")));
            }
        }
        Ok(())
    }

    /// The inner products on the dual fibers: `(G⁻¹)ᵀ` per cell.
    pub fn dual(&self) -> Result<Self> {
        let per_cell = self
            .per_cell
            .iter()
            .enumerate()
            .map(|(g, m)| {
                let inv = m.inverse().ok_or_else(|| Error::NotPositiveDefinite(format!("cell #{g}: singular")))?;
                Ok(inv.transpose())
            })
            .collect::<Result<_>>()?;
        Ok(InnerProductData { per_cell })
    }

    /// Block-diagonal Gram matrix of each chain group of `c`.
    pub fn degree_grams(&self, c: &Complex, rank: usize) -> Vec<Matrix<C64>> {
        let top = if c.is_empty() { 0 } else { c.dim() + 1 };
        (0..top)
            .map(|q| {
                let cells = c.cells_of_dim(q);
                let mut m = Matrix::zeros(rank * cells.len(), rank * cells.len());
                for (k, &g) in cells.iter().enumerate() {
                    m.set_block(rank * k, rank * k, &self.per_cell[g]);
                }
                m
            })
            .collect()
    }

    /// `1/√det G_Δ`: the volume of an orthonormal basis of each fiber.
    pub fn orthonormal_frame(&self) -> Frame<C64> {
        Frame { u: self.per_cell.iter().map(|m| C64::new(1.0 / m.det().norm().sqrt(), 0.0)).collect() }
    }
}

/// Spectral data of the Hodge Laplacians of a based complex.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralReport {
    /// Ascending eigenvalues of `Δ_q`.
    pub eigenvalues: Vec<Vec<f64>>,
    /// Product of the nonzero eigenvalues (1 if there are none).
    pub det_prime: Vec<f64>,
    /// Number of zero eigenvalues.
    pub betti: Vec<usize>,
    /// `|det(Kᴴ h_q)|`: volume of the harmonic projection of the given cycles.
    pub harmonic_volume: Vec<f64>,
}

type BoundaryPair = (Vec<DMatrix<C64>>, Vec<DMatrix<C64>>);

/// The complex in orthonormal coordinates `v' = Lᴴ v` with `G = L Lᴴ`.
fn orthonormal_boundaries(cc: &TwistedChainComplex<C64>, grams: &[Matrix<C64>]) -> Result<BoundaryPair> {
    let top = cc.dims.len();
    if grams.len() != top {
        return Err(Error::NotPositiveDefinite(format!("{} Gram matrices for {top} degrees", grams.len())));
    }
    let mut factors = Vec::with_capacity(top);
    let mut inverses = Vec::with_capacity(top);
    for (q, g) in grams.iter().enumerate() {
        if g.rows() != cc.dim(q) || g.cols() != cc.dim(q) {
            return Err(Error::NotPositiveDefinite(format!("Gram matrix of degree {q} has the wrong size")));
        }
        let na = to_na(g);
        if !positive_definite(na.clone()) {
            return Err(Error::NotPositiveDefinite(format!("Gram matrix of degree {q}")));
        }
        let chol = Cholesky::new(na).ok_or_else(|| Error::NotPositiveDefinite(format!("Gram matrix of degree {q}")))?;
        let f = chol.l().adjoint();
        let inv = f.clone().try_inverse().ok_or_else(|| Error::NotPositiveDefinite(format!("degree {q}")))?;
        factors.push(f);
        inverses.push(inv);
    }
    let boundaries = (0..top)
        .map(|q| {
            let d = to_na(&cc.boundary(q));
            if q == 0 {
                d
            } else {
                &factors[q - 1] * d * &inverses[q]
            }
        })
        .collect();
    Ok((boundaries, factors))
}

/// Eigen-decomposes every Laplacian and measures the harmonic projections of
/// `cycles` (standard coordinates, one list per degree).
pub fn spectral_report(cc: &TwistedChainComplex<C64>, grams: &[Matrix<C64>], cycles: &[Vec<Vec<C64>>]) -> Result<SpectralReport> {
    let (d, factors) = orthonormal_boundaries(cc, grams)?;
    let top = cc.dims.len();
    let per_degree = par::map_range(top, |q| {
        let n = cc.dim(q);
        let mut lap = d[q].adjoint() * &d[q];
        if q + 1 < top {
            lap += &d[q + 1] * d[q + 1].adjoint();
        }
        let eig = SymmetricEigen::new(lap);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let scale = values.last().copied().unwrap_or(0.0).max(1.0);
        let zero: Vec<usize> = order.iter().copied().filter(|&k| eig.eigenvalues[k].abs() <= ZERO_EIGEN_TOL * scale).collect();
        let det_prime = values.iter().filter(|v| v.abs() > ZERO_EIGEN_TOL * scale).product::<f64>();
        let given = cycles.get(q).map_or(&[][..], Vec::as_slice);
        let volume = if given.len() != zero.len() {
            None
        } else {
            let k = DMatrix::from_fn(n, zero.len(), |i, j| eig.eigenvectors[(i, zero[j])]);
            let h = DMatrix::from_fn(n, given.len(), |i, j| given[j][i]);
            Some((k.adjoint() * &factors[q] * h).determinant().norm())
        };
        (values, det_prime, zero.len(), volume)
    });
    let mut report = SpectralReport { eigenvalues: vec![], det_prime: vec![], betti: vec![], harmonic_volume: vec![] };
    for (q, (values, det_prime, betti, volume)) in per_degree.into_iter().enumerate() {
        let volume = volume.ok_or_else(|| Error::BadHomologyBasis {
            degree: q,
            reason: format!("{} cycles given, Laplacian kernel has dimension {betti}", cycles.get(q).map_or(0, Vec::len)),
        })?;
        report.eigenvalues.push(values);
        report.det_prime.push(det_prime);
        report.betti.push(betti);
        report.harmonic_volume.push(volume);
    }
    Ok(report)
}

/// Ray–Singer norm of `[cycles] ∈ ⊗ det H_q^{(-1)^q}`: the harmonic metric
/// times `Π_q det'(Δ_q)^{(-1)^{q+1} q/2}`.
pub fn rs_metric_finite(cc: &TwistedChainComplex<C64>, grams: &[Matrix<C64>], cycles: &[Vec<Vec<C64>>]) -> Result<f64> {
    let report = spectral_report(cc, grams, cycles)?;
    Ok(rs_from_report(&report))
}

fn rs_from_report(report: &SpectralReport) -> f64 {
    let mut log = 0.0;
    for (q, (v, det)) in report.harmonic_volume.iter().zip(&report.det_prime).enumerate() {
        let e = eps(q) as f64;
        log += e * v.ln() - e * q as f64 * det.ln() / 2.0;
    }
    log.exp()
}

/// The metric in which `T(orthonormal frame)` has norm 1, evaluated at the
/// reference generator of `e`.
pub fn t_induced_metric(e: &Twisted<C64>, ip: &InnerProductData) -> Result<f64> {
    ip.validate(e.complex().len(), e.system.rank())?;
    Ok(1.0 / e.t_of(&ip.orthonormal_frame())?.norm())
}

/// Ray–Singer norm of the reference generator of `det H_*(E)`.
pub fn rs_norm(e: &Twisted<C64>, ip: &InnerProductData) -> Result<f64> {
    ip.validate(e.complex().len(), e.system.rank())?;
    rs_metric_finite(&e.chains, &ip.degree_grams(e.complex(), e.system.rank()), &e.homology.cycles)
}

/// The cochain complex `C^*(E) = Hom(C_*(E*), k)` as a chain complex in
/// reversed degrees, with `ip_e` (the inner product of `E`) on cochains.
fn reversed_cochains(estar: &Twisted<C64>, ip_e: &InnerProductData) -> (TwistedChainComplex<C64>, Vec<Matrix<C64>>) {
    let cc = &estar.chains;
    let top = cc.dims.len();
    let mut dims = cc.dims.clone();
    dims.reverse();
    let mut boundaries = vec![Matrix::zeros(0, dims.first().copied().unwrap_or(0))];
    for j in 1..top {
        boundaries.push(cc.boundary(top - j).transpose());
    }
    let mut grams = ip_e.degree_grams(estar.complex(), estar.system.rank());
    grams.reverse();
    (TwistedChainComplex::from_boundaries(cc.rank, dims, boundaries), grams)
}

/// Ray–Singer norm on `det H^*(E)` of the generator dual to the reference
/// basis of `E*`.
pub fn rs_norm_cohomological(estar: &Twisted<C64>, ip_e: &InnerProductData) -> Result<f64> {
    ip_e.validate(estar.complex().len(), estar.system.rank())?;
    let g = dual_cohomology_basis(&estar.chains, &estar.homology)?;
    let (w, grams) = reversed_cochains(estar, ip_e);
    let mut cycles = g.cocycles;
    cycles.reverse();
    let v = rs_metric_finite(&w, &grams, &cycles)?;
    // det H(W) is det H^*(E) raised to (-1)^n
    let n = estar.chains.dims.len().saturating_sub(1);
    Ok(if n % 2 == 1 { 1.0 / v } else { v })
}

/// `‖x‖^{RS}_{L^•(E)} · ‖y‖^{RS}_{L^•(E*)}` and `⟨x ⊗ y⟩_E` at the reference
/// generators `x`, `y`.
pub fn thm53_product_check(
    e: &Twisted<C64>,
    estar: &Twisted<C64>,
    ip_e: &InnerProductData,
    ip_estar: &InnerProductData,
) -> Result<(f64, f64)> {
    check_dual_pair(&e.system, &estar.system, 1e-9).map_err(|err| Error::DualMismatch(err.to_string()))?;
    let x = cohomology_element(estar, C64::new(1.0, 0.0));
    let y = cohomology_element(e, C64::new(1.0, 0.0));
    let product = rs_norm_cohomological(estar, ip_e)? * rs_norm_cohomological(e, ip_estar)?;
    Ok((product, canonical_metric_cohomological(e, estar, &x, &y)?))
}

/// Homology of a based complex is checked against the Laplacian kernels.
pub fn betti_agree(cc: &TwistedChainComplex<C64>, grams: &[Matrix<C64>]) -> Result<bool> {
    let h = twisted_homology(cc)?;
    let report = spectral_report(cc, grams, &h.cycles)?;
    Ok(report.betti == h.betti())
}

/// `|1 − λ|`: torsion of the circle with holonomy `λ` from its one-edge,
/// one-vertex chain complex.
pub fn closed_form_circle(lambda: C64) -> Result<f64> {
    // C_1 = k --(λ - 1)--> C_0 = k
    let d = DMatrix::from_element(1, 1, lambda - C64::new(1.0, 0.0));
    let det = d.determinant().norm();
    if det <= 1e-12 * lambda.norm().max(1.0) {
        return Err(Error::TrivialHolonomy);
    }
    Ok(det)
}

/// Torsion modulus of `L(p, q)` with character `ζ` from the four-cell
/// complex `k → k → k → k` with boundaries `ζ^r − 1`, `Σ ζ^k`, `ζ − 1`.
pub fn closed_form_lens(p: u32, q: u32, zeta: C64) -> Result<f64> {
    let r = lens_parameters(p, q)?;
    if (zeta.powu(p) - 1.0).norm() > 1e-9 {
        return Err(Error::InvalidCell(format!("character value is not a {p}-th root of unity")));
    }
    let one = C64::new(1.0, 0.0);
    if (zeta - one).norm() <= 1e-12 {
        return Err(Error::NotAcyclic("trivial character".into()));
    }
    let d1 = zeta - one;
    let d2: C64 = (0..p).map(|k| zeta.powu(k)).sum();
    let d3 = zeta.powu(r) - one;
    if d2.norm() > 1e-9 {
        return Err(Error::NotAcyclic("middle boundary does not vanish".into()));
    }
    Ok(d1.norm() * d3.norm())
}
