//! Homology bases of twisted chain complexes by Gaussian elimination.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::local_system::TwistedChainComplex;
use crate::matrix::{hstack, Matrix, Rref};
use crate::par;
use crate::scalar::Scalar;

/// Relative threshold below which a pivot counts as zero in float backends.
pub const RANK_TOL: f64 = 1e-10;

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

/// Cycle representatives of a homology basis, degree by degree, together with
/// the pivot data used to complete them to bases of the chain groups.
#[derive(Clone, Debug)]
pub struct HomologyBasis<S: Scalar> {
    id: u64,
    /// `cycles[q]` lists vectors of `C_q` in standard coordinates.
    pub cycles: Vec<Vec<Vec<S>>>,
    /// Pivot columns of `∂_q`: the standard vectors at these positions map to
    /// a basis of the image of `∂_q`.
    pub boundary_pivots: Vec<Vec<usize>>,
}

impl<S: Scalar> HomologyBasis<S> {
    /// Identity used to detect elements of determinant lines built from
    /// different bases.
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn betti(&self) -> Vec<usize> {
        self.cycles.iter().map(Vec::len).collect()
    }

    pub fn is_acyclic(&self) -> bool {
        self.cycles.iter().all(Vec::is_empty)
    }

    /// Replaces the cycles (keeping the pivot data) after validating them.
    pub fn with_cycles(&self, cc: &TwistedChainComplex<S>, cycles: Vec<Vec<Vec<S>>>) -> Result<Self> {
        let h = HomologyBasis { id: fresh_id(), cycles, boundary_pivots: self.boundary_pivots.clone() };
        validate_basis(cc, &h)?;
        Ok(h)
    }

    /// Same cycles with each degree-`q` vector list transformed by `f`.
    pub fn map_degrees(&self, cc: &TwistedChainComplex<S>, f: impl Fn(usize, &[Vec<S>]) -> Vec<Vec<S>>) -> Result<Self> {
        let cycles = self.cycles.iter().enumerate().map(|(q, v)| f(q, v)).collect();
        self.with_cycles(cc, cycles)
    }
}

/// Basis of `im ∂_{q+1}` given by the pivot columns of `∂_{q+1}`.
pub fn boundary_space<S: Scalar>(cc: &TwistedChainComplex<S>, pivots_above: &[usize], q: usize) -> Vec<Vec<S>> {
    let d = cc.boundary(q + 1);
    pivots_above.iter().map(|&j| d.column(j)).collect()
}

/// Computes a homology basis: kernel vectors of `∂_q` from the reduced echelon
/// form, kept greedily when independent of the boundaries.
pub fn twisted_homology<S: Scalar>(cc: &TwistedChainComplex<S>) -> Result<HomologyBasis<S>> {
    let top = cc.dims.len();
    let reduced: Vec<Rref<S>> = par::map_range(top + 1, |q| cc.boundary(q).rref(RANK_TOL)).into_iter().collect::<Result<_>>()?;
    let pivots: Vec<Vec<usize>> = reduced.iter().map(|r| r.pivots.clone()).collect();
    let cycles = par::map_range(top, |q| -> Result<Vec<Vec<S>>> {
        let kernel = reduced[q].kernel_basis();
        let bounds = boundary_space(cc, &pivots[q + 1], q);
        let stacked = hstack(cc.dim(q), &[&bounds, &kernel]);
        let piv = stacked.pivot_columns(RANK_TOL)?;
        Ok(piv.into_iter().filter(|&j| j >= bounds.len()).map(|j| kernel[j - bounds.len()].clone()).collect())
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(HomologyBasis { id: fresh_id(), cycles, boundary_pivots: pivots })
}

/// Checks that every listed vector is a cycle and that together with the
/// boundaries they span a complement of the right size.
pub fn validate_basis<S: Scalar>(cc: &TwistedChainComplex<S>, h: &HomologyBasis<S>) -> Result<()> {
    let top = cc.dims.len();
    if h.cycles.len() != top || h.boundary_pivots.len() != top + 1 {
        return Err(Error::BadHomologyBasis { degree: 0, reason: "wrong number of degrees".into() });
    }
    for q in 0..top {
        let d = cc.boundary(q);
        let scale = d.max_modulus().max(1.0);
        for v in &h.cycles[q] {
            if v.len() != cc.dim(q) {
                return Err(Error::BadHomologyBasis { degree: q, reason: "vector has the wrong length".into() });
            }
            let image = d.mul_vec(v);
            let vmax = v.iter().map(Scalar::modulus).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
            let bad =
                if S::EXACT { image.iter().any(|x| !x.is_zero_exact()) } else { image.iter().any(|x| x.modulus() > 1e-9 * scale * vmax) };
            if bad {
                return Err(Error::BadHomologyBasis { degree: q, reason: "vector is not a cycle".into() });
            }
        }
        let above = &h.boundary_pivots[q + 1];
        let bounds = boundary_space(cc, above, q);
        let stacked = hstack(cc.dim(q), &[&bounds, &h.cycles[q]]);
        let rank = stacked.rank(RANK_TOL)?;
        let betti = cc.dim(q) - h.boundary_pivots[q].len() - above.len();
        if rank != bounds.len() + h.cycles[q].len() || h.cycles[q].len() != betti {
            return Err(Error::BadHomologyBasis { degree: q, reason: format!("classes are dependent or miscounted (expected {betti})") });
        }
    }
    Ok(())
}

/// Coordinates of homology classes: expresses each `targets[k]` (a cycle of
/// degree `q`) as `Σ M[k][l] basis[l]` modulo boundaries.
pub fn class_coordinates<S: Scalar>(cc: &TwistedChainComplex<S>, q: usize, basis: &[Vec<S>], targets: &[Vec<S>]) -> Result<Matrix<S>> {
    let above = cc.boundary(q + 1).pivot_columns(RANK_TOL)?;
    let bounds = boundary_space(cc, &above, q);
    let system = hstack(cc.dim(q), &[basis, &bounds]);
    let mut rows = Vec::with_capacity(targets.len());
    for t in targets {
        let Some(x) = system.solve_full_rank(t, RANK_TOL)? else {
            return Err(Error::BadHomologyBasis { degree: q, reason: "target is not in the span".into() });
        };
        rows.push(x[..basis.len()].to_vec());
    }
    Ok(Matrix::from_rows(rows))
}
