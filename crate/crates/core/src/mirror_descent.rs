//! Log-determinant mirror descent on density matrices.
//!
//! The learner keeps `W_t = Σ_i μ_i u_i u_iᵀ` as an explicit eigensystem. A
//! round computes the unprojected point `W̃ = (W_t⁻¹ + η L̃_t)⁻¹` and then
//! projects back onto the unit-trace set under the Stein divergence. Because
//! the loss estimates are built from the current eigenvectors, the unprojected
//! eigensystem can be updated incrementally:
//!
//! | branch           | work  | what changes                              |
//! |------------------|-------|-------------------------------------------|
//! | sparse, `I = J`  | O(1)  | one eigenvalue                            |
//! | sparse, `I ≠ J`  | O(d)  | two eigenvalues, a rotation in `u_I, u_J` |
//! | dense, coin = 1  | O(1)  | one eigenvalue                            |
//! | dense, coin = 0  | O(d³) | full rotation from a diagonal + rank one  |
//!
//! The projection only touches eigenvalues: `μ_i = 1/(ν_i⁻¹ + θ)` with the
//! scalar `θ` found by a safeguarded Newton iteration.
//!
//! [`slow_reference_update`] performs the same step with dense matrices and a
//! full eigendecomposition; it exists to cross-check the incremental paths.

use crate::error::{Error, Result};
use crate::samplers::{LossEstimate, MixedWeights};
use crate::symlinalg::{
    axpy, dot, full_eigendecompose, gram_error, reorthogonalize, EigenSystem, SymMatrix, JACOBI_TOL,
};

/// Default lower bound on eigenvalues after projection.
pub const DEFAULT_FLOOR: f64 = 1e-15;
/// Rank-two steps with `|β|` below this are treated as the identity.
pub const BETA_EPS: f64 = 1e-14;
/// Target accuracy of the trace constraint in the projection.
pub const PROJECTION_TOL: f64 = 1e-12;
pub const PROJECTION_MAX_ITER: usize = 200;
/// Orthogonality drift that triggers an immediate re-orthogonalization.
pub const DRIFT_TOL: f64 = 1e-8;

/// The learner's density matrix as an eigensystem.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityState {
    pub es: EigenSystem,
    pub floor: f64,
    needs_reorthogonalization: bool,
}

impl DensityState {
    /// The maximally mixed state `I/d`.
    pub fn uniform(dim: usize, floor: f64) -> Self {
        Self::new(EigenSystem::diagonal(vec![1.0 / dim as f64; dim]), floor)
    }

    pub fn new(es: EigenSystem, floor: f64) -> Self {
        Self {
            es,
            floor,
            needs_reorthogonalization: false,
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.es.dim()
    }

    #[inline]
    pub fn eigenvalues(&self) -> &[f64] {
        &self.es.values
    }

    #[inline]
    pub fn basis(&self) -> &[Vec<f64>] {
        &self.es.vectors
    }

    pub fn trace(&self) -> f64 {
        self.es.values.iter().sum()
    }

    pub fn matrix(&self) -> SymMatrix {
        self.es.reconstruct()
    }

    /// Whether an incremental update has observed drift above [`DRIFT_TOL`].
    pub fn needs_reorthogonalization(&self) -> bool {
        self.needs_reorthogonalization
    }

    pub fn reorthogonalize(&mut self) -> Result<()> {
        reorthogonalize(&mut self.es)?;
        self.needs_reorthogonalization = false;
        Ok(())
    }

    /// Re-orthogonalizes when drift was flagged or on every `every`-th trial.
    /// Returns whether a pass ran.
    pub fn maintain(&mut self, trial: usize, every: usize) -> Result<bool> {
        let due = every > 0 && trial > 0 && trial.is_multiple_of(every);
        if self.needs_reorthogonalization || due {
            self.reorthogonalize()?;
            return Ok(true);
        }
        Ok(false)
    }
}

/// Outcome of a trace projection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    pub theta: f64,
    pub iterations: usize,
    /// `max_i |1/μ_i − 1/ν_i − θ|` before clamping to the floor.
    pub kkt_residual: f64,
}

fn check_index(state: &DensityState, idx: usize) -> Result<()> {
    if idx >= state.dim() {
        return Err(Error::InvalidInput(format!(
            "index {idx} out of range for dimension {}",
            state.dim()
        )));
    }
    Ok(())
}

/// Adds `η c u_I u_Iᵀ` to `W⁻¹`: `μ_I ← μ_I / (1 + η c μ_I)`.
pub fn update_sparse_diag(
    state: &mut DensityState,
    idx: usize,
    coeff: f64,
    eta: f64,
) -> Result<()> {
    check_index(state, idx)?;
    let mu = state.es.values[idx];
    let denom = 1.0 + eta * coeff * mu;
    if !(denom > 0.0) {
        return Err(Error::NonPositiveDenominator {
            context: "sparse diagonal update",
            value: denom,
        });
    }
    state.es.values[idx] = mu / denom;
    Ok(())
}

/// Rank-two step parameter `β = η √(μ_I μ_J) c` for an off-diagonal estimate
/// `c (u_I u_Jᵀ + u_J u_Iᵀ)`.
pub fn offdiag_beta(state: &DensityState, i: usize, j: usize, coeff: f64, eta: f64) -> f64 {
    eta * (state.es.values[i] * state.es.values[j]).sqrt() * coeff
}

/// Replaces the pair `(μ_I, u_I), (μ_J, u_J)` with the eigenpairs of
/// `(1/(1−β²)) [[μ_I, −β√(μ_I μ_J)], [−β√(μ_I μ_J), μ_J]]` in that plane.
pub fn update_sparse_offdiag(
    state: &mut DensityState,
    i: usize,
    j: usize,
    beta: f64,
) -> Result<()> {
    check_index(state, i)?;
    check_index(state, j)?;
    if i == j {
        return Err(Error::InvalidInput(
            "off-diagonal update needs I ≠ J".into(),
        ));
    }
    let beta_sq = beta * beta;
    if !(beta_sq < 1.0) {
        return Err(Error::StepTooLarge { beta_sq });
    }
    if beta.abs() < BETA_EPS {
        return Ok(());
    }
    let (mi, mj) = (state.es.values[i], state.es.values[j]);
    let one_minus = 1.0 - beta_sq;
    let disc = ((mi - mj) * (mi - mj) + 4.0 * mi * mj * beta_sq).sqrt();
    let mu_plus = (mi + mj + disc) / (2.0 * one_minus);
    // product of the pair is μ_I μ_J / (1 − β²); avoids cancellation in μ₋
    let mu_minus = mi * mj / (one_minus * mu_plus);

    // Eigenvectors of the 2×2 block [[μ_I, b], [b, μ_J]] with b = −β√(μ_I μ_J),
    // written as a plane rotation so both stay orthonormal to working precision.
    let b = -beta * (mi * mj).sqrt();
    let angle = 0.5 * (2.0 * b).atan2(mi - mj);
    let (s, c) = angle.sin_cos();

    let (ui, uj) = pair_mut(&mut state.es.vectors, i, j);
    for (x, y) in ui.iter_mut().zip(uj.iter_mut()) {
        let (a, bb) = (*x, *y);
        *x = c * a + s * bb;
        *y = -s * a + c * bb;
    }
    state.es.values[i] = mu_plus;
    state.es.values[j] = mu_minus;

    let drift = (dot(ui, ui) - 1.0)
        .abs()
        .max((dot(uj, uj) - 1.0).abs())
        .max(dot(ui, uj).abs());
    if drift > DRIFT_TOL {
        state.needs_reorthogonalization = true;
    }
    Ok(())
}

fn pair_mut<T>(v: &mut [T], i: usize, j: usize) -> (&mut T, &mut T) {
    if i < j {
        let (a, b) = v.split_at_mut(j);
        (&mut a[i], &mut b[0])
    } else {
        let (a, b) = v.split_at_mut(i);
        (&mut b[0], &mut a[j])
    }
}

/// Dense scheme, coin = 1, action `u_I`: estimate `(2ℓ/λ_I) u_I u_Iᵀ`.
///
/// `μ_I ← μ_I / (1 + 2ηℓ μ_I/λ_I)`, which is `μ_I/(1 + 2ηℓ)` when the
/// sampling weight equals the eigenvalue (no exploration).
pub fn update_dense_ondiag(
    state: &mut DensityState,
    idx: usize,
    loss: f64,
    weight: f64,
    eta: f64,
) -> Result<()> {
    check_index(state, idx)?;
    let mu = state.es.values[idx];
    let denom = 1.0 + 2.0 * eta * loss * mu / weight;
    if !(denom > 0.0) {
        return Err(Error::NonPositiveDenominator {
            context: "dense on-diagonal update",
            value: denom,
        });
    }
    state.es.values[idx] = mu / denom;
    Ok(())
}

/// Dense scheme, coin = 0, signs `s`: estimate `ℓ(a aᵀ − diag(1/λ))` in the
/// eigenbasis with `a_i = s_i/√λ_i`.
///
/// In basis coordinates `W̃⁻¹ = D + ηℓ a aᵀ` with `D_i = 1/μ_i − ηℓ/λ_i`.
/// Sherman–Morrison gives `W̃ = D⁻¹ − (ηℓ/q) x xᵀ` where `x = D⁻¹a` and
/// `q = 1 + ηℓ aᵀx`; that diagonal-plus-rank-one core is eigendecomposed and
/// its eigenvectors rotated into the ambient basis.
pub fn update_dense_offdiag(
    state: &mut DensityState,
    signs: &[f64],
    loss: f64,
    weights: &MixedWeights,
    eta: f64,
) -> Result<()> {
    let d = state.dim();
    if signs.len() != d || weights.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: signs.len().min(weights.dim()),
        });
    }
    if loss == 0.0 {
        return Ok(());
    }
    let el = eta * loss;
    let mut dinv = Vec::with_capacity(d);
    for (mu, lam) in state.es.values.iter().zip(weights.as_slice()) {
        let di = 1.0 / mu - el / lam;
        if !(di > 0.0) {
            return Err(Error::NonPositiveDenominator {
                context: "dense off-diagonal update (diagonal part)",
                value: di,
            });
        }
        dinv.push(1.0 / di);
    }
    let a: Vec<f64> = signs
        .iter()
        .zip(weights.as_slice())
        .map(|(s, l)| s / l.sqrt())
        .collect();
    let x: Vec<f64> = a.iter().zip(&dinv).map(|(ai, di)| ai * di).collect();
    let q = 1.0 + el * dot(&a, &x);
    if !(q > 0.0) {
        return Err(Error::NonPositiveDenominator {
            context: "dense off-diagonal update (rank-one part)",
            value: q,
        });
    }
    let mut core = SymMatrix::from_diag(&dinv);
    core.add_outer(&x, -el / q);
    let rot = full_eigendecompose(&core, JACOBI_TOL)?;
    if let Some(bad) = rot.values.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::NonPositiveDenominator {
            context: "dense off-diagonal update (eigenvalue)",
            value: *bad,
        });
    }

    let old = &state.es.vectors;
    let vectors: Vec<Vec<f64>> = rot
        .vectors
        .iter()
        .map(|coef| {
            let mut u = vec![0.0; d];
            for (c, ui) in coef.iter().zip(old) {
                if *c != 0.0 {
                    axpy(*c, ui, &mut u);
                }
            }
            u
        })
        .collect();
    state.es = EigenSystem {
        values: rot.values,
        vectors,
    };
    if gram_error(&state.es.vectors) > DRIFT_TOL {
        state.needs_reorthogonalization = true;
    }
    Ok(())
}

fn trace_at(nu: &[f64], theta: f64) -> (f64, f64) {
    let mut g = 0.0;
    let mut dg = 0.0;
    for &v in nu {
        let m = v / (1.0 + theta * v);
        g += m;
        dg -= m * m;
    }
    (g, dg)
}

/// Projects the unprojected eigenvalues `ν` onto the unit-trace set:
/// `μ_i = 1/(ν_i⁻¹ + θ)` with `Σ μ_i = 1`, then clamps to the floor and
/// renormalizes. Eigenvectors are untouched apart from restoring the
/// non-increasing eigenvalue order, which incremental updates may break.
pub fn project_trace_one(state: &mut DensityState) -> Result<Projection> {
    let nu = &state.es.values;
    if let Some(bad) = nu.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidInput(format!(
            "projection needs positive eigenvalues, found {bad:e}"
        )));
    }
    let nu_max = nu.iter().fold(0.0f64, |m, v| m.max(*v));
    // g(θ) = Σ ν_i/(1 + θ ν_i) is decreasing and convex on (−1/ν_max, ∞),
    // with g → ∞ at the left end. The bracket keeps g(lo) > 1 > g(hi).
    let mut lo = -1.0 / nu_max;
    let mut hi;
    let (g0, _) = trace_at(nu, 0.0);
    if g0 <= 1.0 {
        hi = 0.0;
    } else {
        lo = 0.0;
        hi = 1.0;
        let mut grow = 0;
        while trace_at(nu, hi).0 >= 1.0 {
            lo = hi;
            hi *= 2.0;
            grow += 1;
            if grow > 2000 {
                return Err(Error::ProjectionFailed {
                    lo,
                    hi,
                    residual: trace_at(nu, hi).0 - 1.0,
                });
            }
        }
    }

    let mut theta = if g0 <= 1.0 { 0.0 } else { lo };
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while iterations < PROJECTION_MAX_ITER {
        iterations += 1;
        let (g, dg) = trace_at(nu, theta);
        residual = g - 1.0;
        if residual.abs() <= PROJECTION_TOL {
            break;
        }
        if residual > 0.0 {
            lo = lo.max(theta);
        } else {
            hi = hi.min(theta);
        }
        let newton = theta - residual / dg;
        theta = if newton > lo && newton < hi && newton.is_finite() {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    if residual.abs() > PROJECTION_TOL {
        return Err(Error::ProjectionFailed { lo, hi, residual });
    }

    let mut mu: Vec<f64> = nu.iter().map(|v| v / (1.0 + theta * v)).collect();
    let kkt_residual = mu
        .iter()
        .zip(nu)
        .map(|(m, v)| (1.0 / m - 1.0 / v - theta).abs())
        .fold(0.0f64, f64::max);
    let floor = state.floor;
    mu.iter_mut().for_each(|m| *m = m.max(floor));
    let total: f64 = mu.iter().sum();
    mu.iter_mut().for_each(|m| *m /= total);
    state.es.values = mu;
    state.es.sort_descending();
    Ok(Projection {
        theta,
        iterations,
        kkt_residual,
    })
}

/// Dense reference step: materialize `W⁻¹ + η L̃`, invert it through a full
/// eigendecomposition, then project.
pub fn slow_reference_update(
    state: &DensityState,
    estimate: &LossEstimate,
    eta: f64,
) -> Result<DensityState> {
    if state.es.values.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::NotPositiveDefinite("current density matrix"));
    }
    let mut precision = state.es.reconstruct_with(|v| 1.0 / v);
    precision.add_scaled(&estimate.materialize(state.basis()), eta);
    let es = full_eigendecompose(&precision, JACOBI_TOL)?;
    if es.values.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::NotPositiveDefinite("W⁻¹ + ηL̃"));
    }
    let mut inverted = EigenSystem {
        values: es.values.iter().map(|v| 1.0 / v).collect(),
        vectors: es.vectors,
    };
    inverted.sort_descending();
    let mut next = DensityState::new(inverted, state.floor);
    project_trace_one(&mut next)?;
    Ok(next)
}

/// Stein's loss `tr(U⁻¹W) − log det(U⁻¹W) − d`, the Bregman divergence of
/// `−log det`.
pub fn stein_divergence(w: &SymMatrix, u: &SymMatrix) -> Result<f64> {
    if w.dim() != u.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            found: w.dim(),
        });
    }
    let ue = full_eigendecompose(u, JACOBI_TOL)?;
    if ue.values.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::NotPositiveDefinite("second argument"));
    }
    let inv_sqrt = ue.reconstruct_with(|v| 1.0 / v.sqrt());
    let whitened = w.congruence(&inv_sqrt);
    let se = full_eigendecompose(&whitened, JACOBI_TOL)?;
    if se.values.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::NotPositiveDefinite("first argument"));
    }
    Ok(se.values.iter().map(|s| s - s.ln() - 1.0).sum())
}
