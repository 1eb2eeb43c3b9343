//! Action sampling and unbiased loss estimation.
//!
//! Both schemes draw a unit vector `w` with `E[w wᵀ] = Σ_i λ_i u_i u_iᵀ`, where
//! `λ` are the exploration-mixed weights and `u_i` the current eigenbasis, and
//! turn the single observed loss `wᵀ L w` into a matrix estimate whose
//! expectation is `L`.
//!
//! - **Dense**: a fair coin picks either a single eigenvector `u_I` (`I ∼ λ`)
//!   or a random-sign combination `Σ_i s_i √λ_i u_i` of all of them.
//! - **Sparse**: two indices `I, J ∼ λ` are drawn independently; the action is
//!   `u_I` when they coincide and `(u_I ± u_J)/√2` otherwise.
//!
//! Estimator denominators always use the sampling weights `λ`. With no
//! exploration these are the learner's own eigenvalues.

use rand::Rng;

use crate::error::{Error, Result};
use crate::symlinalg::{axpy, SymMatrix};

/// Largest dimension [`enumerate_outcomes`] accepts.
pub const ENUMERATION_CAP: usize = 12;

/// Sampling scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    Dense,
    Sparse,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Dense => "dense",
            Scheme::Sparse => "sparse",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(Scheme::Dense),
            "sparse" => Ok(Scheme::Sparse),
            other => Err(Error::Usage(format!("unknown scheme `{other}`"))),
        }
    }
}

/// Exploration-mixed sampling weights, `λ_i = (1-γ) μ_i + γ/d`.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedWeights(Vec<f64>);

impl MixedWeights {
    /// Wraps raw weights without mixing. Intended for tests and probes that
    /// construct a distribution directly.
    pub fn from_raw(weights: Vec<f64>) -> Self {
        Self(weights)
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl std::ops::Index<usize> for MixedWeights {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Which sampling branch produced an action, with the data the estimator needs.
#[derive(Clone, Debug, PartialEq)]
pub enum Branch {
    /// Dense scheme, coin `B = 1`: the eigenvector `u_i` was played.
    DenseOn(usize),
    /// Dense scheme, coin `B = 0`: random signs `s ∈ {-1, +1}^d`.
    DenseOff(Vec<f64>),
    /// Sparse scheme with `I = J = i`.
    SparseDiag(usize),
    /// Sparse scheme with `I ≠ J` and sign `s`.
    SparseOff { i: usize, j: usize, sign: f64 },
}

impl Branch {
    pub fn tag(&self) -> BranchTag {
        match self {
            Branch::DenseOn(i) => BranchTag::DenseOn(*i),
            Branch::DenseOff(_) => BranchTag::DenseOff,
            Branch::SparseDiag(i) => BranchTag::SparseDiag(*i),
            Branch::SparseOff { i, j, sign } => BranchTag::SparseOff {
                i: *i,
                j: *j,
                positive: *sign > 0.0,
            },
        }
    }
}

/// [`Branch`] without the sign vector, for telemetry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BranchTag {
    DenseOn(usize),
    DenseOff,
    SparseDiag(usize),
    SparseOff { i: usize, j: usize, positive: bool },
}

impl std::fmt::Display for BranchTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BranchTag::DenseOn(i) => write!(f, "dense_on:{i}"),
            BranchTag::DenseOff => f.write_str("dense_off"),
            BranchTag::SparseDiag(i) => write!(f, "sparse_diag:{i}"),
            BranchTag::SparseOff { i, j, positive } => {
                write!(
                    f,
                    "sparse_off:{i}:{j}:{}",
                    if *positive { '+' } else { '-' }
                )
            }
        }
    }
}

/// A unit-norm action together with the branch that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Action {
    pub w: Vec<f64>,
    pub branch: Branch,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TermKind {
    /// `u_i u_iᵀ`
    Diag(usize),
    /// `u_i u_jᵀ + u_j u_iᵀ`
    OffPair(usize, usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateTerm {
    pub coeff: f64,
    pub kind: TermKind,
}

/// Symmetric loss estimate expressed in the learner's eigenbasis.
///
/// The represented matrix is
/// `Σ_terms coeff·kind + Σ_i diagonal_i u_i u_iᵀ + c·(Σ_i v_i u_i)(Σ_i v_i u_i)ᵀ`
/// where `outer = (c, v)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossEstimate {
    pub terms: Vec<EstimateTerm>,
    pub diagonal: Option<Vec<f64>>,
    pub outer: Option<(f64, Vec<f64>)>,
}

impl LossEstimate {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn single(coeff: f64, kind: TermKind) -> Self {
        Self {
            terms: vec![EstimateTerm { coeff, kind }],
            ..Self::default()
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.coeff == 0.0)
            && self
                .diagonal
                .as_ref()
                .is_none_or(|d| d.iter().all(|x| *x == 0.0))
            && self.outer.as_ref().is_none_or(|(c, _)| *c == 0.0)
    }

    /// The estimate as a `d × d` matrix in eigenbasis coordinates.
    pub fn in_basis(&self, d: usize) -> SymMatrix {
        let mut m = SymMatrix::zeros(d);
        for t in &self.terms {
            match t.kind {
                TermKind::Diag(i) => m.set(i, i, m.get(i, i) + t.coeff),
                TermKind::OffPair(i, j) => {
                    if i == j {
                        m.set(i, i, m.get(i, i) + 2.0 * t.coeff);
                    } else {
                        m.set(i, j, m.get(i, j) + t.coeff);
                    }
                }
            }
        }
        if let Some(diag) = &self.diagonal {
            for (i, a) in diag.iter().enumerate() {
                m.set(i, i, m.get(i, i) + a);
            }
        }
        if let Some((c, v)) = &self.outer {
            m.add_outer(v, *c);
        }
        m
    }

    /// The estimate as an ambient matrix, `U K Uᵀ` with `K` from [`Self::in_basis`].
    pub fn materialize(&self, basis: &[Vec<f64>]) -> SymMatrix {
        let d = basis.len();
        let mut m = SymMatrix::zeros(d);
        for t in &self.terms {
            match t.kind {
                TermKind::Diag(i) => m.add_outer(&basis[i], t.coeff),
                TermKind::OffPair(i, j) => m.add_sym_outer(&basis[i], &basis[j], t.coeff),
            }
        }
        if let Some(diag) = &self.diagonal {
            for (u, a) in basis.iter().zip(diag) {
                m.add_outer(u, *a);
            }
        }
        if let Some((c, v)) = &self.outer {
            let mut x = vec![0.0; d];
            for (u, vi) in basis.iter().zip(v) {
                axpy(*vi, u, &mut x);
            }
            m.add_outer(&x, *c);
        }
        m
    }
}

pub fn mix_weights(mu: &[f64], gamma: f64) -> MixedWeights {
    debug_assert!((0.0..=1.0).contains(&gamma));
    let d = mu.len() as f64;
    MixedWeights(mu.iter().map(|m| (1.0 - gamma) * m + gamma / d).collect())
}

/// Inverse-CDF draw over `weights` in index order.
pub fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let target = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if target < acc {
            return i;
        }
    }
    last
}

fn random_sign<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    if rng.gen::<bool>() {
        1.0
    } else {
        -1.0
    }
}

fn dense_sign_action(lambda: &MixedWeights, basis: &[Vec<f64>], signs: Vec<f64>) -> Action {
    let d = basis.len();
    let mut w = vec![0.0; d];
    for ((u, s), l) in basis.iter().zip(&signs).zip(lambda.as_slice()) {
        axpy(s * l.sqrt(), u, &mut w);
    }
    Action {
        w,
        branch: Branch::DenseOff(signs),
    }
}

fn sparse_pair_action(basis: &[Vec<f64>], i: usize, j: usize, sign: f64) -> Action {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let w = basis[i]
        .iter()
        .zip(&basis[j])
        .map(|(a, b)| h * (a + sign * b))
        .collect();
    Action {
        w,
        branch: Branch::SparseOff { i, j, sign },
    }
}

pub fn sample_dense<R: Rng + ?Sized>(
    lambda: &MixedWeights,
    basis: &[Vec<f64>],
    rng: &mut R,
) -> Action {
    if rng.gen::<bool>() {
        let i = sample_index(lambda.as_slice(), rng);
        Action {
            w: basis[i].clone(),
            branch: Branch::DenseOn(i),
        }
    } else {
        let signs = (0..basis.len()).map(|_| random_sign(rng)).collect();
        dense_sign_action(lambda, basis, signs)
    }
}

pub fn sample_sparse<R: Rng + ?Sized>(
    lambda: &MixedWeights,
    basis: &[Vec<f64>],
    rng: &mut R,
) -> Action {
    let i = sample_index(lambda.as_slice(), rng);
    let j = sample_index(lambda.as_slice(), rng);
    if i == j {
        Action {
            w: basis[i].clone(),
            branch: Branch::SparseDiag(i),
        }
    } else {
        sparse_pair_action(basis, i, j, random_sign(rng))
    }
}

pub fn sample<R: Rng + ?Sized>(
    scheme: Scheme,
    lambda: &MixedWeights,
    basis: &[Vec<f64>],
    rng: &mut R,
) -> Action {
    match scheme {
        Scheme::Dense => sample_dense(lambda, basis, rng),
        Scheme::Sparse => sample_sparse(lambda, basis, rng),
    }
}

pub fn estimate_dense(action: &Action, loss: f64, lambda: &MixedWeights) -> Result<LossEstimate> {
    match &action.branch {
        Branch::DenseOn(i) => Ok(LossEstimate::single(
            2.0 * loss / lambda[*i],
            TermKind::Diag(*i),
        )),
        Branch::DenseOff(signs) => {
            let l = lambda.as_slice();
            let diagonal = l.iter().map(|li| -loss / li).collect();
            let v = signs.iter().zip(l).map(|(s, li)| s / li.sqrt()).collect();
            Ok(LossEstimate {
                terms: Vec::new(),
                diagonal: Some(diagonal),
                outer: Some((loss, v)),
            })
        }
        _ => Err(Error::BranchMismatch),
    }
}

pub fn estimate_sparse(action: &Action, loss: f64, lambda: &MixedWeights) -> Result<LossEstimate> {
    match action.branch {
        Branch::SparseDiag(i) => Ok(LossEstimate::single(
            loss / (lambda[i] * lambda[i]),
            TermKind::Diag(i),
        )),
        Branch::SparseOff { i, j, sign } => Ok(LossEstimate::single(
            sign * loss / (2.0 * lambda[i] * lambda[j]),
            TermKind::OffPair(i, j),
        )),
        _ => Err(Error::BranchMismatch),
    }
}

pub fn estimate(
    scheme: Scheme,
    action: &Action,
    loss: f64,
    lambda: &MixedWeights,
) -> Result<LossEstimate> {
    match scheme {
        Scheme::Dense => estimate_dense(action, loss, lambda),
        Scheme::Sparse => estimate_sparse(action, loss, lambda),
    }
}

/// Every action the scheme can produce with nonzero probability, paired with
/// that probability.
pub fn enumerate_outcomes(
    scheme: Scheme,
    lambda: &MixedWeights,
    basis: &[Vec<f64>],
) -> Result<Vec<(f64, Action)>> {
    let d = lambda.dim();
    if d > ENUMERATION_CAP {
        return Err(Error::EnumerationTooLarge {
            dim: d,
            cap: ENUMERATION_CAP,
        });
    }
    if basis.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: basis.len(),
        });
    }
    let l = lambda.as_slice();
    let mut out = Vec::new();
    match scheme {
        Scheme::Dense => {
            for (i, &li) in l.iter().enumerate() {
                if li > 0.0 {
                    out.push((
                        0.5 * li,
                        Action {
                            w: basis[i].clone(),
                            branch: Branch::DenseOn(i),
                        },
                    ));
                }
            }
            let p = 0.5 / (1u64 << d) as f64;
            for mask in 0..(1u64 << d) {
                let signs = (0..d)
                    .map(|k| if mask >> k & 1 == 1 { -1.0 } else { 1.0 })
                    .collect();
                out.push((p, dense_sign_action(lambda, basis, signs)));
            }
        }
        Scheme::Sparse => {
            for (i, &li) in l.iter().enumerate() {
                for (j, &lj) in l.iter().enumerate() {
                    let p = li * lj;
                    if p <= 0.0 {
                        continue;
                    }
                    if i == j {
                        out.push((
                            p,
                            Action {
                                w: basis[i].clone(),
                                branch: Branch::SparseDiag(i),
                            },
                        ));
                    } else {
                        for sign in [1.0, -1.0] {
                            out.push((0.5 * p, sparse_pair_action(basis, i, j, sign)));
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symlinalg::{full_eigendecompose, norm, JACOBI_TOL};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn std_basis(d: usize) -> Vec<Vec<f64>> {
        (0..d)
            .map(|i| crate::symlinalg::unit_vector(d, i))
            .collect()
    }

    fn random_basis(d: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let mut m = SymMatrix::zeros(d);
        for i in 0..d {
            for j in 0..=i {
                m.set(i, j, rng.gen_range(-1.0..1.0));
            }
        }
        full_eigendecompose(&m, JACOBI_TOL).unwrap().vectors
    }

    #[test]
    fn mixing() {
        assert_eq!(mix_weights(&[0.7, 0.3], 0.0).as_slice(), &[0.7, 0.3]);
        assert_eq!(mix_weights(&[0.7, 0.3], 1.0).as_slice(), &[0.5, 0.5]);
        let m = mix_weights(&[0.7, 0.3], 0.1);
        assert_abs_diff_eq!(m[0], 0.68, epsilon = 1e-15);
        assert_abs_diff_eq!(m[1], 0.32, epsilon = 1e-15);
    }

    #[test]
    fn degenerate_distribution_always_picks_first() {
        let lambda = MixedWeights::from_raw(vec![1.0, 0.0, 0.0]);
        let basis = std_basis(3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let a = sample_sparse(&lambda, &basis, &mut rng);
            assert_eq!(a.branch, Branch::SparseDiag(0));
            assert_eq!(a.w, basis[0]);
            let a = sample_dense(&lambda, &basis, &mut rng);
            if let Branch::DenseOn(i) = a.branch {
                assert_eq!(i, 0);
                assert_eq!(a.w, basis[0]);
            }
        }
    }

    #[test]
    fn dense_sign_action_example() {
        let lambda = MixedWeights::from_raw(vec![0.5, 0.5]);
        let basis = std_basis(2);
        let a = dense_sign_action(&lambda, &basis, vec![1.0, -1.0]);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(a.w[0], h, epsilon = 1e-15);
        assert_abs_diff_eq!(a.w[1], -h, epsilon = 1e-15);
        assert_abs_diff_eq!(norm(&a.w), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sampled_actions_are_unit_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let basis = random_basis(7, &mut rng);
        let raw: Vec<f64> = (0..7).map(|_| rng.gen_range(0.01..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let lambda = MixedWeights::from_raw(raw.iter().map(|x| x / total).collect());
        for _ in 0..200 {
            for scheme in [Scheme::Dense, Scheme::Sparse] {
                let a = sample(scheme, &lambda, &basis, &mut rng);
                assert!((norm(&a.w) - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn dense_on_estimate_coefficient() {
        let lambda = MixedWeights::from_raw(vec![0.5, 0.5]);
        let a = Action {
            w: vec![1.0, 0.0],
            branch: Branch::DenseOn(0),
        };
        let e = estimate_dense(&a, 0.3, &lambda).unwrap();
        assert_eq!(e, LossEstimate::single(4.0 * 0.3, TermKind::Diag(0)));
    }

    #[test]
    fn dense_off_estimate_at_uniform_weights() {
        // λ = 1/d ⇒ L̃ = ℓ(d² w wᵀ − d I)
        let d = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let basis = random_basis(d, &mut rng);
        let lambda = MixedWeights::from_raw(vec![0.25; d]);
        let a = dense_sign_action(&lambda, &basis, vec![1.0, -1.0, -1.0, 1.0]);
        let loss = 0.37;
        let got = estimate_dense(&a, loss, &lambda)
            .unwrap()
            .materialize(&basis);
        let mut want = SymMatrix::outer(&a.w, loss * (d * d) as f64);
        want.add_scaled(&SymMatrix::identity(d), -loss * d as f64);
        assert!(got.frobenius_distance(&want) <= 1e-12);
    }

    #[test]
    fn sparse_estimate_coefficients() {
        let lambda = MixedWeights::from_raw(vec![0.5, 0.5]);
        let diag = Action {
            w: vec![1.0, 0.0],
            branch: Branch::SparseDiag(0),
        };
        let e = estimate_sparse(&diag, 0.3, &lambda).unwrap();
        assert_abs_diff_eq!(e.terms[0].coeff, 1.2, epsilon = 1e-15);
        let off = Action {
            w: vec![0.0; 2],
            branch: Branch::SparseOff {
                i: 0,
                j: 1,
                sign: 1.0,
            },
        };
        let e = estimate_sparse(&off, 0.2, &lambda).unwrap();
        assert_abs_diff_eq!(e.terms[0].coeff, 0.4, epsilon = 1e-15);
        assert_eq!(e.terms[0].kind, TermKind::OffPair(0, 1));
    }

    #[test]
    fn branch_mismatch_is_rejected() {
        let lambda = MixedWeights::from_raw(vec![0.5, 0.5]);
        let a = Action {
            w: vec![1.0, 0.0],
            branch: Branch::SparseDiag(0),
        };
        assert!(matches!(
            estimate_dense(&a, 0.1, &lambda),
            Err(Error::BranchMismatch)
        ));
        let a = Action {
            w: vec![1.0, 0.0],
            branch: Branch::DenseOn(0),
        };
        assert!(matches!(
            estimate_sparse(&a, 0.1, &lambda),
            Err(Error::BranchMismatch)
        ));
    }

    #[test]
    fn outcome_counts() {
        let basis = std_basis(2);
        let lambda = MixedWeights::from_raw(vec![0.5, 0.5]);
        let sparse = enumerate_outcomes(Scheme::Sparse, &lambda, &basis).unwrap();
        assert_eq!(sparse.len(), 6);
        assert_abs_diff_eq!(
            sparse.iter().map(|o| o.0).sum::<f64>(),
            1.0,
            epsilon = 1e-15
        );
        let p_diag: f64 = sparse
            .iter()
            .filter(|o| matches!(o.1.branch, Branch::SparseDiag(_)))
            .map(|o| o.0)
            .sum();
        assert_abs_diff_eq!(p_diag, 0.5, epsilon = 1e-15);

        let dense = enumerate_outcomes(Scheme::Dense, &lambda, &basis).unwrap();
        assert_eq!(dense.len(), 6);
        for (p, a) in &dense {
            if let Branch::DenseOff(_) = a.branch {
                assert_eq!(*p, 0.125);
            }
        }

        let point = MixedWeights::from_raw(vec![1.0, 0.0]);
        let single = enumerate_outcomes(Scheme::Sparse, &point, &basis).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single[0].0, 1.0);

        let big = MixedWeights::from_raw(vec![1.0 / 13.0; 13]);
        assert!(matches!(
            enumerate_outcomes(Scheme::Dense, &big, &std_basis(13)),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn sparse_mean_action_d3() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let basis = random_basis(3, &mut rng);
        let lambda = MixedWeights::from_raw(vec![0.5, 0.3, 0.2]);
        let mut mean = SymMatrix::zeros(3);
        for (p, a) in enumerate_outcomes(Scheme::Sparse, &lambda, &basis).unwrap() {
            mean.add_outer(&a.w, p);
        }
        let mut want = SymMatrix::zeros(3);
        for (u, l) in basis.iter().zip(lambda.as_slice()) {
            want.add_outer(u, *l);
        }
        assert!(mean.frobenius_distance(&want) <= 1e-12);
    }

    #[test]
    fn in_basis_matches_materialize() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let basis = random_basis(4, &mut rng);
        let lambda = MixedWeights::from_raw(vec![0.4, 0.3, 0.2, 0.1]);
        let a = dense_sign_action(&lambda, &basis, vec![1.0, 1.0, -1.0, 1.0]);
        let e = estimate_dense(&a, -0.6, &lambda).unwrap();
        let k = e.in_basis(4);
        let got = e.materialize(&basis);
        // back to basis coordinates: Uᵀ M U
        for i in 0..4 {
            for j in 0..4 {
                let mu = got.mat_vec(&basis[j]);
                let kij = crate::symlinalg::dot(&basis[i], &mu);
                assert!((kij - k.get(i, j)).abs() <= 1e-12);
            }
        }
    }
}
