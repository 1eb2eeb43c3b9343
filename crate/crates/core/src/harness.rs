//! The bandit PCA game loop, step-size tuning and regret accounting.

use std::time::Instant;

use crate::environments::{best_fixed_comparator, Comparator, History, LossOracle, MatrixView};
use crate::error::{Error, Result};
use crate::mirror_descent::{
    offdiag_beta, project_trace_one, update_dense_offdiag, update_dense_ondiag, update_sparse_diag,
    update_sparse_offdiag, DensityState, DEFAULT_FLOOR,
};
use crate::rng;
use crate::samplers::{
    estimate, mix_weights, sample, Branch, BranchTag, LossEstimate, MixedWeights, Scheme, TermKind,
};
use crate::symlinalg::{dot, SymMatrix};

/// Default re-orthogonalization period, in trials.
pub const DEFAULT_REORTHOGONALIZE_EVERY: usize = 1000;

#[derive(Clone, Debug, PartialEq)]
pub struct LearnerConfig {
    pub dim: usize,
    pub eta: f64,
    pub gamma: f64,
    pub floor: f64,
    /// Zero disables periodic passes; drift-triggered passes still run.
    pub reorthogonalize_every: usize,
    pub seed: u64,
}

impl LearnerConfig {
    pub fn new(dim: usize, eta: f64, gamma: f64, seed: u64) -> Self {
        Self {
            dim,
            eta,
            gamma,
            floor: DEFAULT_FLOOR,
            reorthogonalize_every: DEFAULT_REORTHOGONALIZE_EVERY,
            seed,
        }
    }

    pub fn with_tuning(dim: usize, tuning: Tuning, seed: u64) -> Self {
        Self::new(dim, tuning.eta, tuning.gamma, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::Config(format!(
                "dimension must be at least 2, got {}",
                self.dim
            )));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!(
                "eta must be positive, got {}",
                self.eta
            )));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!(
                "gamma must lie in [0, 1], got {}",
                self.gamma
            )));
        }
        if !(self.floor > 0.0 && self.floor < 1.0 / self.dim as f64) {
            return Err(Error::Config(format!("floor {} out of range", self.floor)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub allow_unbounded: bool,
    pub probe_variance: bool,
    /// Compute expected per-trial losses and comparators.
    pub track_regret: bool,
    /// Record update wallclock; otherwise `update_ns` is zero so output is reproducible.
    pub timing: bool,
}

impl RunOptions {
    pub fn tracked() -> Self {
        Self {
            track_regret: true,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub t: usize,
    pub loss: f64,
    pub cum_loss: f64,
    pub branch: BranchTag,
    pub eta: f64,
    pub gamma: f64,
    pub update_ns: u64,
    /// `(tr(W L̃²), tr((W^{1/2} L̃ W^{1/2})²))` on the pre-update state.
    pub probe: Option<(f64, f64)>,
    /// `E[wᵀ M w]` under the sampling distribution, `M` the accounting matrix.
    pub expected_loss: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub records: Vec<TrialRecord>,
    pub cumulative_loss: f64,
    pub cumulative_expected_loss: Option<f64>,
    pub comparator_realized: Option<Comparator>,
    pub comparator_pseudo: Option<Comparator>,
    pub regret_realized: Option<f64>,
    pub regret_pseudo: Option<f64>,
    /// Largest `|b|` among sparse-scheme estimate eigenvalues in the whitened frame.
    pub max_abs_b: f64,
    pub reorthogonalizations: usize,
    pub config: LearnerConfig,
    pub scheme: Scheme,
    pub horizon: usize,
    pub total_runtime_ns: u64,
    pub final_state: DensityState,
}

/// Step size and exploration rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tuning {
    pub eta: f64,
    pub gamma: f64,
}

fn check_tuning_inputs(d: usize, horizon: usize) -> Result<()> {
    if d < 2 || horizon < 2 {
        return Err(Error::Config(format!(
            "tuning needs d >= 2 and T >= 2, got d = {d}, T = {horizon}"
        )));
    }
    Ok(())
}

/// `η = min{√(ln T/(dT)), 1/(2d)}`, `γ = 0`.
pub fn tune_eta_worstcase(d: usize, horizon: usize) -> Result<Tuning> {
    check_tuning_inputs(d, horizon)?;
    let (df, tf) = (d as f64, horizon as f64);
    Ok(Tuning {
        eta: (tf.ln() / (df * tf)).sqrt().min(1.0 / (2.0 * df)),
        gamma: 0.0,
    })
}

/// `η = min{√(ln T/(d L̄*)), 1/(4d²)}`, `γ = 0`. Meant for PSD losses with
/// `L̄*` an upper bound on the comparator's cumulative loss.
pub fn tune_eta_firstorder(d: usize, horizon: usize, lstar_bound: f64) -> Result<Tuning> {
    check_tuning_inputs(d, horizon)?;
    if !(lstar_bound > 0.0) {
        return Err(Error::Config(format!(
            "L* bound must be positive, got {lstar_bound}"
        )));
    }
    let (df, tf) = (d as f64, horizon as f64);
    Ok(Tuning {
        eta: (tf.ln() / (df * lstar_bound))
            .sqrt()
            .min(1.0 / (4.0 * df * df)),
        gamma: 0.0,
    })
}

/// `η = min{√(ln T/(rT)), 1/(2d)}`, `γ = dη`, for losses with average
/// squared Frobenius norm at most `r`.
pub fn tune_eta_sparse(d: usize, horizon: usize, r_bound: f64) -> Result<Tuning> {
    check_tuning_inputs(d, horizon)?;
    let (df, tf) = (d as f64, horizon as f64);
    if !(r_bound > 0.0 && r_bound <= df) {
        return Err(Error::Config(format!(
            "r must lie in (0, {d}], got {r_bound}"
        )));
    }
    let eta = (tf.ln() / (r_bound * tf)).sqrt().min(1.0 / (2.0 * df));
    let gamma = df * eta;
    if gamma > 1.0 {
        return Err(Error::Config(format!("gamma = {gamma} exceeds 1")));
    }
    debug_assert!(gamma <= 0.5 + 1e-15);
    Ok(Tuning { eta, gamma })
}

/// `(tr(W L̃²), tr((W^{1/2} L̃ W^{1/2})²))` with `W` and `L̃` both read in the
/// learner's eigenbasis.
pub fn probe_variance_terms(state: &DensityState, est: &LossEstimate) -> (f64, f64) {
    let mu = state.eigenvalues();
    if est.diagonal.is_none() && est.outer.is_none() && est.terms.len() == 1 {
        let t = &est.terms[0];
        return match t.kind {
            TermKind::Diag(i) => {
                let c2 = t.coeff * t.coeff;
                (c2 * mu[i], c2 * mu[i] * mu[i])
            }
            TermKind::OffPair(i, j) if i != j => {
                let c2 = t.coeff * t.coeff;
                (c2 * (mu[i] + mu[j]), 2.0 * c2 * mu[i] * mu[j])
            }
            TermKind::OffPair(i, _) => {
                let c2 = 4.0 * t.coeff * t.coeff;
                (c2 * mu[i], c2 * mu[i] * mu[i])
            }
        };
    }
    let k = est.in_basis(state.dim());
    let mut mh = 0.0;
    let mut ld = 0.0;
    for i in 0..state.dim() {
        let row = k.row(i);
        mh += mu[i] * dot(row, row);
        ld += row
            .iter()
            .zip(mu)
            .map(|(kij, mj)| mu[i] * mj * kij * kij)
            .sum::<f64>();
    }
    (mh, ld)
}

/// `Σ_i λ_i u_iᵀ M u_i`, the expected loss of an action drawn with weights λ.
pub fn expected_action_loss(state: &DensityState, lambda: &MixedWeights, m: &SymMatrix) -> f64 {
    state
        .basis()
        .iter()
        .zip(lambda.as_slice())
        .map(|(u, l)| l * m.quad_form(u))
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn apply_update(
    scheme: Scheme,
    state: &mut DensityState,
    action_branch: &Branch,
    est: &LossEstimate,
    loss: f64,
    lambda: &MixedWeights,
    eta: f64,
    max_abs_b: &mut f64,
) -> Result<()> {
    match (scheme, action_branch) {
        (Scheme::Dense, Branch::DenseOn(i)) => {
            update_dense_ondiag(state, *i, loss, lambda[*i], eta)
        }
        (Scheme::Dense, Branch::DenseOff(signs)) => {
            update_dense_offdiag(state, signs, loss, lambda, eta)
        }
        (Scheme::Sparse, Branch::SparseDiag(i)) => {
            let coeff = est.terms.first().map_or(0.0, |t| t.coeff);
            *max_abs_b = max_abs_b.max((coeff * state.eigenvalues()[*i]).abs());
            update_sparse_diag(state, *i, coeff, eta)
        }
        (Scheme::Sparse, Branch::SparseOff { i, j, .. }) => {
            let coeff = est.terms.first().map_or(0.0, |t| t.coeff);
            let beta = offdiag_beta(state, *i, *j, coeff, eta);
            *max_abs_b = max_abs_b.max((beta / eta).abs());
            update_sparse_offdiag(state, *i, *j, beta)
        }
        _ => Err(Error::BranchMismatch),
    }
}

/// Plays `horizon` trials of the learner against `oracle`.
pub fn run_game(
    config: &LearnerConfig,
    scheme: Scheme,
    oracle: &mut dyn LossOracle,
    horizon: usize,
    options: RunOptions,
) -> Result<RunResult> {
    config.validate()?;
    if oracle.dim() != config.dim {
        return Err(Error::DimensionMismatch {
            expected: config.dim,
            found: oracle.dim(),
        });
    }
    if !oracle.bounded() && !options.allow_unbounded {
        return Err(Error::UnboundedEnvironment);
    }

    let started = Instant::now();
    let mut state = DensityState::uniform(config.dim, config.floor);
    let mut history = History::default();
    let keep_history = oracle.wants_history();
    let mut records = Vec::with_capacity(horizon);
    let mut cumulative = 0.0;
    let mut cumulative_expected = 0.0;
    let mut max_abs_b = 0.0f64;
    let mut reorthogonalizations = 0;

    for t in 1..=horizon {
        let step = |e: Error| Error::Trial {
            trial: t,
            source: Box::new(e),
        };
        oracle.prepare(t, &history).map_err(step)?;
        let mut rng = rng::stream(config.seed, rng::LEARNER, t as u64);

        let clock = Instant::now();
        let lambda = mix_weights(state.eigenvalues(), config.gamma);
        let action = sample(scheme, &lambda, state.basis(), &mut rng);
        let mut elapsed = clock.elapsed();

        let loss = oracle.query(&action.w, t).map_err(step)?;
        if !loss.is_finite() {
            return Err(step(Error::InvalidInput(format!("non-finite loss {loss}"))));
        }
        let expected_loss = if options.track_regret {
            let m = oracle
                .accounting_matrix(t, MatrixView::Expected)
                .ok_or_else(|| step(Error::MatrixUnavailable))?;
            Some(expected_action_loss(&state, &lambda, &m))
        } else {
            None
        };

        let clock = Instant::now();
        let est = estimate(scheme, &action, loss, &lambda).map_err(step)?;
        elapsed += clock.elapsed();

        let probe = options
            .probe_variance
            .then(|| probe_variance_terms(&state, &est));

        let clock = Instant::now();
        apply_update(
            scheme,
            &mut state,
            &action.branch,
            &est,
            loss,
            &lambda,
            config.eta,
            &mut max_abs_b,
        )
        .map_err(step)?;
        project_trace_one(&mut state).map_err(step)?;
        if state
            .maintain(t, config.reorthogonalize_every)
            .map_err(step)?
        {
            reorthogonalizations += 1;
        }
        elapsed += clock.elapsed();

        cumulative += loss;
        if let Some(e) = expected_loss {
            cumulative_expected += e;
        }
        records.push(TrialRecord {
            t,
            loss,
            cum_loss: cumulative,
            branch: action.branch.tag(),
            eta: config.eta,
            gamma: config.gamma,
            update_ns: if options.timing {
                elapsed.as_nanos() as u64
            } else {
                0
            },
            probe,
            expected_loss,
        });
        if keep_history {
            history.actions.push(action.w);
            history.losses.push(loss);
        }
    }

    let mut result = RunResult {
        records,
        cumulative_loss: cumulative,
        cumulative_expected_loss: options.track_regret.then_some(cumulative_expected),
        comparator_realized: None,
        comparator_pseudo: None,
        regret_realized: None,
        regret_pseudo: None,
        max_abs_b,
        reorthogonalizations,
        config: config.clone(),
        scheme,
        horizon,
        total_runtime_ns: if options.timing {
            started.elapsed().as_nanos() as u64
        } else {
            0
        },
        final_state: state,
    };
    if options.track_regret {
        let regret = compute_regret(&result, oracle)?;
        result.comparator_realized = regret.comparator_realized;
        result.comparator_pseudo = regret.comparator_pseudo;
        result.regret_realized = regret.realized;
        result.regret_pseudo = regret.pseudo;
    }
    Ok(result)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Regret {
    pub realized: Option<f64>,
    pub pseudo: Option<f64>,
    pub comparator_realized: Option<Comparator>,
    pub comparator_pseudo: Option<Comparator>,
}

/// Realized regret `Σℓ_t − λ_min(Σ L_t)` and pseudo-regret
/// `Σ E[ℓ_t] − λ_min(Σ M_t)`, where `M_t` is the expected loss matrix for
/// stochastic environments and `L_t` otherwise. Missing views give `None`.
pub fn compute_regret(result: &RunResult, oracle: &dyn LossOracle) -> Result<Regret> {
    let mut out = Regret::default();
    match best_fixed_comparator(oracle, result.horizon, MatrixView::Realized) {
        Ok(c) => {
            out.realized = Some(result.cumulative_loss - c.value);
            out.comparator_realized = Some(c);
        }
        Err(Error::MatrixUnavailable) => {}
        Err(e) => return Err(e),
    }
    let expected = result.cumulative_expected_loss.or_else(|| {
        result
            .records
            .iter()
            .map(|r| r.expected_loss)
            .sum::<Option<f64>>()
    });
    if let Some(total) = expected {
        match best_fixed_comparator(oracle, result.horizon, MatrixView::Expected) {
            Ok(c) => {
                out.pseudo = Some(total - c.value);
                out.comparator_pseudo = Some(c);
            }
            Err(Error::MatrixUnavailable) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
