//! The Poincaré–Reidemeister metric on homological and cohomological
//! determinant lines, evaluated directly or through its three-number recipe.
//! Unimodular systems also get the classical Reidemeister metric.

use crate::detline::{
    apply_hat, canonical_metric, canonical_metric_cohomological, cohomology_element, correspondence_cohomological, eps, DetLineElement,
    Frame, LineBundleIso, LineKind, Twisted,
};
use crate::duality::DualityContext;
use crate::error::{Error, Result};
use crate::local_system::LocalSystem;
use crate::scalar::{Scalar, C64};

/// Relative tolerance for `| |det R| − 1 |` and for flat-metric consistency.
pub const UNIMODULAR_TOL: f64 = 1e-10;

/// A norm value together with the element it was evaluated at.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricValue<S: Scalar> {
    pub value: f64,
    pub element: DetLineElement<S>,
}

fn require_odd<S: Scalar>(ctx: &DualityContext<S>) -> Result<()> {
    if ctx.n.is_multiple_of(2) {
        return Err(Error::EvenDimension(ctx.n));
    }
    Ok(())
}

/// `‖x‖ = ⟨x ⊗ D_E(x)⟩^{1/2}` for `x ∈ det H_*(E)`.
pub fn pr_norm<S: Scalar>(ctx: &DualityContext<S>, x: &DetLineElement<S>) -> Result<MetricValue<S>> {
    require_odd(ctx)?;
    let dx = ctx.estar.element(x.coordinate.clone() * ctx.homological()?);
    let sq = canonical_metric(&ctx.e, &ctx.estar, x, &dx)?;
    Ok(MetricValue { value: sq.sqrt(), element: x.clone() })
}

/// `‖x‖` for `x ∈ det H^*(E)`, using the cohomological duality scalar.
pub fn pr_norm_cohomological<S: Scalar>(ctx: &DualityContext<S>, x: &DetLineElement<S>) -> Result<MetricValue<S>> {
    require_odd(ctx)?;
    let dx = cohomology_element(&ctx.e, x.coordinate.clone() * ctx.cohomological()?);
    let sq = canonical_metric_cohomological(&ctx.e, &ctx.estar, x, &dx)?;
    Ok(MetricValue { value: sq.sqrt(), element: x.clone() })
}

/// The three positive numbers of the recipe.
#[derive(Clone, Debug, PartialEq)]
pub struct RecipeParts {
    /// `[α]/[β]`.
    pub ratio: f64,
    /// `⟨β, γ⟩`.
    pub pairing: f64,
    /// `α/γ`.
    pub duality: f64,
}

impl RecipeParts {
    /// Their product, which is the squared norm of `T_τ(α)`.
    pub fn product(&self) -> f64 {
        self.ratio * self.pairing * self.duality
    }
}

/// Computes `‖T_τ(α)‖²` from frames `α` over `(τ, E)`, `β` over `(τ*, E)` and
/// `γ` over `(τ*, E*)`. Frames over `τ*` are indexed by dual cell.
pub fn pr_norm_recipe<S: Scalar>(ctx: &DualityContext<S>, alpha: &Frame<S>, beta: &Frame<S>, gamma: &Frame<S>) -> Result<RecipeParts> {
    require_odd(ctx)?;
    let c = ctx.e.complex();
    let dual = ctx.e_dual.complex();
    for (name, f, len) in [("alpha", alpha, c.len()), ("beta", beta, dual.len()), ("gamma", gamma, dual.len())] {
        if f.u.len() != len {
            return Err(Error::ContextMismatch(format!("frame {name} has {} slots, expected {len}", f.u.len())));
        }
        if let Some(k) = f.u.iter().position(|u| u.is_zero_exact() || u.modulus() == 0.0) {
            return Err(Error::ZeroFrame(format!("{name}[{k}]")));
        }
    }
    let ratio = (ctx.e.t_of(alpha)? / ctx.e_dual.t_of(beta)?).modulus();
    let mut pairing = 1.0;
    for d in 0..dual.len() {
        let e = eps(dual.cell(d).dim);
        pairing *= (beta.u[d].clone() * gamma.u[d].clone()).modulus().powi(e);
    }
    let mut duality = 1.0;
    let primal_to_dual = |g: usize| dual.index_of(&format!("*{}", c.cell(g).id));
    for g in 0..c.len() {
        let d = primal_to_dual(g).ok_or_else(|| Error::ContextMismatch("dual complex does not match".into()))?;
        let e = eps(c.cell(g).dim);
        duality *= (alpha.u[g].clone() * gamma.u[d].clone()).modulus().powi(e);
    }
    Ok(RecipeParts { ratio, pairing, duality })
}

/// A flat metric on `det E`: `m[Δ]` is the length of the unit section over
/// `Δ` in anchor gauge, with `m[Δ'] · |det R_{Δ',Δ}| = m[Δ]`.
pub fn flat_metric<S: Scalar>(sys: &LocalSystem<S>) -> Result<Vec<f64>> {
    let c = sys.complex();
    let det = sys.det();
    let mut m: Vec<Option<f64>> = vec![None; c.len()];
    let mut stack = Vec::new();
    for root in 0..c.len() {
        if m[root].is_some() {
            continue;
        }
        m[root] = Some(1.0);
        stack.push(root);
        while let Some(g) = stack.pop() {
            let mg = m[g].expect("visited");
            let neighbours = c.facets(g).iter().map(|&(f, _)| (f, g)).chain(c.cofacets(g).iter().map(|&(h, _)| (g, h))).collect::<Vec<_>>();
            for (face, cell) in neighbours {
                for a in det.attachments(face, cell) {
                    let r = a.matrix[(0, 0)].modulus();
                    if r == 0.0 {
                        return Err(Error::Singular { face: c.cell(face).id.clone(), cell: c.cell(cell).id.clone() });
                    }
                    let (other, expected) = if g == cell { (face, mg / r) } else { (cell, mg * r) };
                    match m[other] {
                        None => {
                            m[other] = Some(expected);
                            stack.push(other);
                        }
                        Some(v) if (v - expected).abs() > UNIMODULAR_TOL * v.max(expected) => {
                            return Err(Error::NotUnimodular(format!(
                                "det transport ({}, {}) has modulus {r}",
                                c.cell(face).id,
                                c.cell(cell).id
                            )));
                        }
                        Some(_) => {}
                    }
                }
            }
        }
    }
    Ok(m.into_iter().map(|v| v.expect("all cells visited")).collect())
}

/// The Reidemeister norm of `x ∈ det H_*(E)`: the metric with
/// `‖T_τ(μ_{τ,E})‖ = 1`, where `μ_Δ` has unit length in a flat metric.
pub fn reidemeister_norm<S: Scalar>(e: &Twisted<S>, x: &DetLineElement<S>) -> Result<MetricValue<S>> {
    if x.basis != e.homology.id() || x.kind != LineKind::Homological {
        return Err(Error::ContextMismatch("element does not belong to det H_*(E)".into()));
    }
    let m = flat_metric(&e.system)?;
    let mu = Frame { u: m.iter().map(|&v| S::from_c64(C64::new(1.0 / v, 0.0)).expect("finite real")).collect() };
    let t = e.t_of(&mu)?;
    Ok(MetricValue { value: x.coordinate.modulus() / t.modulus(), element: x.clone() })
}

/// Both norms of the reference generator of `det H_*(E)`: Poincaré–Reidemeister
/// first, classical Reidemeister second.
pub fn pr_equals_reidemeister_check<S: Scalar>(ctx: &DualityContext<S>) -> Result<(f64, f64)> {
    require_odd(ctx)?;
    let x = ctx.e.element(S::one());
    let r = reidemeister_norm(&ctx.e, &x)?.value;
    Ok((pr_norm(ctx, &x)?.value, r))
}

/// `‖φ̂(x)‖` over `F` and `‖x‖` over `E`.
pub fn pr_isometry_check<S: Scalar>(
    phi: &LineBundleIso<S>,
    ctx_e: &DualityContext<S>,
    ctx_f: &DualityContext<S>,
    x: &DetLineElement<S>,
    tol: f64,
) -> Result<(f64, f64)> {
    let y = apply_hat(phi, &ctx_e.e, &ctx_f.e, x, tol)?;
    Ok((pr_norm(ctx_f, &y)?.value, pr_norm(ctx_e, x)?.value))
}

/// Cohomological twin of [`pr_isometry_check`], for `x ∈ det H^*(E)`.
pub fn pr_isometry_check_cohomological<S: Scalar>(
    phi: &LineBundleIso<S>,
    ctx_e: &DualityContext<S>,
    ctx_f: &DualityContext<S>,
    x: &DetLineElement<S>,
    tol: f64,
) -> Result<(f64, f64)> {
    let s = correspondence_cohomological(phi, &ctx_e.estar, &ctx_f.estar, tol)?;
    let y = cohomology_element(&ctx_f.estar, x.coordinate.clone() * s);
    Ok((pr_norm_cohomological(ctx_f, &y)?.value, pr_norm_cohomological(ctx_e, x)?.value))
}
