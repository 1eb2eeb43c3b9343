//! Loss environments.
//!
//! An environment fixes a symmetric loss matrix `L_t` at the start of every
//! trial, before the learner draws its action, and answers a single scalar
//! query `wᵀ L_t w`. For regret accounting it may also expose the realized
//! matrix and, for stochastic environments, its expectation.
//!
//! Apart from [`AdaptiveHook`], every environment is a pure function of
//! `(seed, t)`, so any trial's matrix can be regenerated after the run.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng;
use crate::symlinalg::{dot, full_eigendecompose, normalize, SymMatrix, JACOBI_TOL};

/// Slack allowed on the spectral-norm bound of bounded environments.
pub const SPECTRAL_SLACK: f64 = 1e-9;

/// Actions and losses of trials strictly before the current one.
#[derive(Clone, Debug, Default)]
pub struct History {
    pub actions: Vec<Vec<f64>>,
    pub losses: Vec<f64>,
}

impl History {
    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }
}

/// Which matrix view to use for regret accounting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixView {
    /// The matrices actually drawn.
    Realized,
    /// Expected matrices for stochastic environments, realized ones otherwise.
    Expected,
}

/// The environment side of the protocol. Trials are numbered from 1.
pub trait LossOracle: Send {
    fn dim(&self) -> usize;

    /// Whether every `L_t` has spectral norm at most one.
    fn bounded(&self) -> bool;

    /// Whether [`LossOracle::prepare`] reads the history.
    fn wants_history(&self) -> bool {
        false
    }

    /// Fixes `L_t`. Called before the learner draws `w_t`.
    fn prepare(&mut self, t: usize, history: &History) -> Result<()>;

    /// `wᵀ L_t w` for a prepared trial.
    fn query(&self, w: &[f64], t: usize) -> Result<f64>;

    fn reveal_matrix(&self, t: usize) -> Option<SymMatrix>;

    fn expected_matrix(&self, _t: usize) -> Option<SymMatrix> {
        None
    }

    fn accounting_matrix(&self, t: usize, view: MatrixView) -> Option<SymMatrix> {
        match view {
            MatrixView::Realized => self.reveal_matrix(t),
            MatrixView::Expected => self.expected_matrix(t).or_else(|| self.reveal_matrix(t)),
        }
    }
}

/// Environment families that can be built from an [`EnvConfig`].
#[derive(Clone, Debug, PartialEq)]
pub enum EnvKind {
    RankOneStream,
    PsdStream,
    SpikedGaussian,
    StaticMatrix(SymMatrix),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvConfig {
    pub kind: EnvKind,
    pub dim: usize,
    pub horizon: usize,
    pub seed: u64,
    /// Spike strength; `None` selects `d/(4√T)`.
    pub epsilon: Option<f64>,
    /// Rank of each PSD loss.
    pub rank: usize,
    /// All nonzero PSD levels equal to one instead of uniform on `[0, 1]`.
    pub unit_levels: bool,
    /// Strength of a planted direction in generated rank-one streams; zero
    /// gives directions uniform on the sphere.
    pub signal: f64,
    /// Rank-one stream file; vectors are read from it instead of generated.
    pub input: Option<std::path::PathBuf>,
}

impl EnvConfig {
    pub fn new(kind: EnvKind, dim: usize, horizon: usize, seed: u64) -> Self {
        Self {
            kind,
            dim,
            horizon,
            seed,
            epsilon: None,
            rank: 1,
            unit_levels: false,
            signal: 0.0,
            input: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::Config(format!(
                "dimension must be at least 2, got {}",
                self.dim
            )));
        }
        if let Some(eps) = self.epsilon {
            if !(0.0..=1.0).contains(&eps) {
                return Err(Error::Config(format!(
                    "epsilon must lie in [0, 1], got {eps}"
                )));
            }
        }
        if self.kind == EnvKind::PsdStream && !(1..=self.dim).contains(&self.rank) {
            return Err(Error::Config(format!(
                "rank must lie in [1, {}], got {}",
                self.dim, self.rank
            )));
        }
        if let EnvKind::StaticMatrix(m) = &self.kind {
            check_bounded(m)?;
        }
        if !(self.signal >= 0.0 && self.signal.is_finite()) {
            return Err(Error::Config(format!(
                "signal must be non-negative, got {}",
                self.signal
            )));
        }
        Ok(())
    }
}

/// Builds the environment described by `config`.
pub fn build_oracle(config: &EnvConfig) -> Result<Box<dyn LossOracle>> {
    config.validate()?;
    Ok(match &config.kind {
        EnvKind::RankOneStream => Box::new(rank_one_stream(config)?),
        EnvKind::PsdStream => Box::new(psd_stream(config)),
        EnvKind::SpikedGaussian => Box::new(spiked_gaussian(config)),
        EnvKind::StaticMatrix(m) => {
            if m.dim() != config.dim {
                return Err(Error::DimensionMismatch {
                    expected: config.dim,
                    found: m.dim(),
                });
            }
            Box::new(StaticMatrix::new(m.clone())?)
        }
    })
}

/// Uniform draw from the unit sphere: normalized standard Gaussian.
pub fn sphere_sample<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        if normalize(&mut v) {
            return v;
        }
    }
}

fn check_bounded(m: &SymMatrix) -> Result<()> {
    if m.asymmetry() > 1e-12 || !m.is_finite() {
        return Err(Error::InvalidInput(
            "loss matrix must be finite and symmetric".into(),
        ));
    }
    let norm = m.spectral_norm()?;
    if norm > 1.0 + SPECTRAL_SLACK {
        return Err(Error::SpectralBound { norm });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Rank-one stream: L_t = −x_t x_tᵀ
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
enum RankOneSource {
    Generated {
        seed: u64,
        planted: Vec<f64>,
        signal: f64,
    },
    Rows(Vec<Vec<f64>>),
}

/// `L_t = −x_t x_tᵀ` with unit `x_t`, either generated or read from a file.
#[derive(Clone, Debug)]
pub struct RankOneStream {
    dim: usize,
    source: RankOneSource,
}

impl RankOneStream {
    /// Stream over the given vectors; each is normalized. Trial `t` uses row `t − 1`.
    pub fn from_rows(dim: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        let mut out = Vec::with_capacity(rows.len());
        for (k, mut row) in rows.into_iter().enumerate() {
            if row.len() != dim {
                return Err(Error::MalformedRow {
                    line: k + 1,
                    reason: format!("expected {dim} values, found {}", row.len()),
                });
            }
            if !normalize(&mut row) {
                return Err(Error::MalformedRow {
                    line: k + 1,
                    reason: "zero or non-finite vector".into(),
                });
            }
            out.push(row);
        }
        Ok(Self {
            dim,
            source: RankOneSource::Rows(out),
        })
    }

    /// Generated stream: `x_t ∝ g_t + signal·√d·v` with `g_t` standard
    /// Gaussian and `v` a hidden unit direction drawn once from `seed`.
    pub fn generated(dim: usize, seed: u64, signal: f64) -> Self {
        let planted = sphere_sample(dim, &mut rng::stream(seed, rng::SETUP, 0));
        Self {
            dim,
            source: RankOneSource::Generated {
                seed,
                planted,
                signal,
            },
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }

    pub fn len(&self) -> Option<usize> {
        match &self.source {
            RankOneSource::Rows(r) => Some(r.len()),
            RankOneSource::Generated { .. } => None,
        }
    }

    pub fn direction(&self, t: usize) -> Result<Vec<f64>> {
        match &self.source {
            RankOneSource::Rows(rows) => rows.get(t.wrapping_sub(1)).cloned().ok_or_else(|| {
                Error::Config(format!("trial {t} beyond the {} input rows", rows.len()))
            }),
            RankOneSource::Generated {
                seed,
                planted,
                signal,
            } => {
                let mut r = rng::stream(*seed, rng::ENVIRONMENT, t as u64);
                let scale = signal * (self.dim as f64).sqrt();
                loop {
                    let mut x: Vec<f64> = planted
                        .iter()
                        .map(|p| r.sample::<f64, _>(StandardNormal) + scale * p)
                        .collect();
                    if normalize(&mut x) {
                        return Ok(x);
                    }
                }
            }
        }
    }
}

impl LossOracle for RankOneStream {
    fn dim(&self) -> usize {
        self.dim
    }

    fn bounded(&self) -> bool {
        true
    }

    fn prepare(&mut self, t: usize, _history: &History) -> Result<()> {
        self.direction(t).map(|_| ())
    }

    fn query(&self, w: &[f64], t: usize) -> Result<f64> {
        let x = self.direction(t)?;
        let p = dot(w, &x);
        Ok(-p * p)
    }

    fn reveal_matrix(&self, t: usize) -> Option<SymMatrix> {
        self.direction(t).ok().map(|x| SymMatrix::outer(&x, -1.0))
    }
}

/// Rank-one stream from the config: file mode when `input` is set.
pub fn rank_one_stream(config: &EnvConfig) -> Result<RankOneStream> {
    match &config.input {
        Some(path) => {
            let s = load_rank_one_file(path, config.dim)?;
            if s.len().unwrap_or(0) < config.horizon {
                return Err(Error::Config(format!(
                    "{} holds {} vectors but the horizon is {}",
                    path.display(),
                    s.len().unwrap_or(0),
                    config.horizon
                )));
            }
            Ok(s)
        }
        None => Ok(RankOneStream::generated(
            config.dim,
            config.seed,
            config.signal,
        )),
    }
}

/// Parses whitespace-separated vectors, one per line. Blank lines and lines
/// starting with `#` are skipped; reported line numbers are 1-based file lines.
pub fn parse_rank_one_text(text: &str, dim: usize) -> Result<RankOneStream> {
    let mut rows = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line_no = k + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut row = Vec::with_capacity(dim);
        for tok in trimmed.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| Error::MalformedRow {
                line: line_no,
                reason: format!("cannot parse `{tok}`"),
            })?;
            row.push(v);
        }
        if row.len() != dim {
            return Err(Error::MalformedRow {
                line: line_no,
                reason: format!("expected {dim} values, found {}", row.len()),
            });
        }
        if !normalize(&mut row) {
            return Err(Error::MalformedRow {
                line: line_no,
                reason: "zero or non-finite vector".into(),
            });
        }
        rows.push(row);
    }
    RankOneStream::from_rows(dim, rows)
}

pub fn load_rank_one_file(path: &Path, dim: usize) -> Result<RankOneStream> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_rank_one_text(&text, dim)
}

// ---------------------------------------------------------------------------
// Spiked Gaussian: L_t = Z_t I − ε u uᵀ
// ---------------------------------------------------------------------------

/// `L_t = Z_t I − ε u uᵀ` with `Z_t ∼ N(0, 1)` fresh each trial and a hidden
/// unit spike `u` drawn once. Not bounded.
#[derive(Clone, Debug)]
pub struct SpikedGaussian {
    dim: usize,
    seed: u64,
    epsilon: f64,
    spike: Vec<f64>,
}

/// `d / (4√T)`.
pub fn auto_epsilon(dim: usize, horizon: usize) -> f64 {
    dim as f64 / (4.0 * (horizon as f64).sqrt())
}

impl SpikedGaussian {
    pub fn new(dim: usize, seed: u64, epsilon: f64) -> Self {
        let spike = sphere_sample(dim, &mut rng::stream(seed, rng::SETUP, 1));
        Self {
            dim,
            seed,
            epsilon,
            spike,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn spike(&self) -> &[f64] {
        &self.spike
    }

    pub fn noise(&self, t: usize) -> f64 {
        rng::stream(self.seed, rng::ENVIRONMENT, t as u64).sample(StandardNormal)
    }
}

pub fn spiked_gaussian(config: &EnvConfig) -> SpikedGaussian {
    let eps = config
        .epsilon
        .unwrap_or_else(|| auto_epsilon(config.dim, config.horizon.max(1)));
    SpikedGaussian::new(config.dim, config.seed, eps)
}

impl LossOracle for SpikedGaussian {
    fn dim(&self) -> usize {
        self.dim
    }

    fn bounded(&self) -> bool {
        false
    }

    fn prepare(&mut self, _t: usize, _history: &History) -> Result<()> {
        Ok(())
    }

    fn query(&self, w: &[f64], t: usize) -> Result<f64> {
        let p = dot(w, &self.spike);
        Ok(self.noise(t) - self.epsilon * p * p)
    }

    fn reveal_matrix(&self, t: usize) -> Option<SymMatrix> {
        let mut m = SymMatrix::identity(self.dim);
        m.scale(self.noise(t));
        m.add_outer(&self.spike, -self.epsilon);
        Some(m)
    }

    fn expected_matrix(&self, _t: usize) -> Option<SymMatrix> {
        Some(SymMatrix::outer(&self.spike, -self.epsilon))
    }
}

// ---------------------------------------------------------------------------
// PSD stream: L_t = Σ_k c_k q_k q_kᵀ, r orthonormal q_k, c_k ∈ [0, 1]
// ---------------------------------------------------------------------------

/// Random PSD losses of rank at most `r` and spectral norm at most one: a
/// random rotation of a clipped diagonal.
#[derive(Clone, Debug)]
pub struct PsdStream {
    dim: usize,
    rank: usize,
    seed: u64,
    unit_levels: bool,
}

impl PsdStream {
    pub fn new(dim: usize, rank: usize, seed: u64, unit_levels: bool) -> Self {
        Self {
            dim,
            rank,
            seed,
            unit_levels,
        }
    }

    /// Levels and orthonormal directions of `L_t`.
    pub fn factors(&self, t: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
        let mut r = rng::stream(self.seed, rng::ENVIRONMENT, t as u64);
        let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(self.rank);
        while dirs.len() < self.rank {
            let mut v: Vec<f64> = (0..self.dim).map(|_| r.sample(StandardNormal)).collect();
            for _ in 0..2 {
                for q in &dirs {
                    let c = dot(q, &v);
                    crate::symlinalg::axpy(-c, q, &mut v);
                }
            }
            if crate::symlinalg::norm(&v) > 1e-6 && normalize(&mut v) {
                dirs.push(v);
            }
        }
        let levels = (0..self.rank)
            .map(|_| {
                if self.unit_levels {
                    1.0
                } else {
                    r.gen_range(0.0..=1.0)
                }
            })
            .collect();
        (levels, dirs)
    }
}

pub fn psd_stream(config: &EnvConfig) -> PsdStream {
    PsdStream::new(config.dim, config.rank, config.seed, config.unit_levels)
}

impl LossOracle for PsdStream {
    fn dim(&self) -> usize {
        self.dim
    }

    fn bounded(&self) -> bool {
        true
    }

    fn prepare(&mut self, _t: usize, _history: &History) -> Result<()> {
        Ok(())
    }

    fn query(&self, w: &[f64], t: usize) -> Result<f64> {
        let (levels, dirs) = self.factors(t);
        Ok(levels
            .iter()
            .zip(&dirs)
            .map(|(c, q)| {
                let p = dot(q, w);
                c * p * p
            })
            .sum())
    }

    fn reveal_matrix(&self, t: usize) -> Option<SymMatrix> {
        let (levels, dirs) = self.factors(t);
        let mut m = SymMatrix::zeros(self.dim);
        for (c, q) in levels.iter().zip(&dirs) {
            m.add_outer(q, *c);
        }
        Some(m)
    }
}

// ---------------------------------------------------------------------------
// Static and adaptive environments
// ---------------------------------------------------------------------------

/// The same matrix every trial.
#[derive(Clone, Debug)]
pub struct StaticMatrix {
    matrix: SymMatrix,
}

impl StaticMatrix {
    pub fn new(matrix: SymMatrix) -> Result<Self> {
        check_bounded(&matrix)?;
        Ok(Self { matrix })
    }
}

impl LossOracle for StaticMatrix {
    fn dim(&self) -> usize {
        self.matrix.dim()
    }

    fn bounded(&self) -> bool {
        true
    }

    fn prepare(&mut self, _t: usize, _history: &History) -> Result<()> {
        Ok(())
    }

    fn query(&self, w: &[f64], _t: usize) -> Result<f64> {
        Ok(self.matrix.quad_form(w))
    }

    fn reveal_matrix(&self, _t: usize) -> Option<SymMatrix> {
        Some(self.matrix.clone())
    }
}

type HookFn = dyn FnMut(usize, &History) -> SymMatrix + Send;

/// Adversary that picks `L_t` from the history of earlier trials. The
/// callback never sees the current action: it runs in
/// [`LossOracle::prepare`], before `w_t` exists.
pub struct AdaptiveHook {
    dim: usize,
    callback: Box<HookFn>,
    matrices: Vec<SymMatrix>,
}

impl AdaptiveHook {
    pub fn new(
        dim: usize,
        callback: impl FnMut(usize, &History) -> SymMatrix + Send + 'static,
    ) -> Self {
        Self {
            dim,
            callback: Box::new(callback),
            matrices: Vec::new(),
        }
    }

    fn current(&self, t: usize) -> Result<&SymMatrix> {
        self.matrices
            .get(t.wrapping_sub(1))
            .ok_or_else(|| Error::Config(format!("trial {t} has not been prepared")))
    }
}

impl std::fmt::Debug for AdaptiveHook {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AdaptiveHook")
            .field("dim", &self.dim)
            .field("prepared", &self.matrices.len())
            .finish()
    }
}

impl LossOracle for AdaptiveHook {
    fn dim(&self) -> usize {
        self.dim
    }

    fn bounded(&self) -> bool {
        true
    }

    fn wants_history(&self) -> bool {
        true
    }

    fn prepare(&mut self, t: usize, history: &History) -> Result<()> {
        if t != self.matrices.len() + 1 {
            return Err(Error::Config(format!(
                "adaptive trials must be prepared in order; expected {}, got {t}",
                self.matrices.len() + 1
            )));
        }
        let m = (self.callback)(t, history);
        if m.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: m.dim(),
            });
        }
        check_bounded(&m)?;
        self.matrices.push(m);
        Ok(())
    }

    fn query(&self, w: &[f64], t: usize) -> Result<f64> {
        Ok(self.current(t)?.quad_form(w))
    }

    fn reveal_matrix(&self, t: usize) -> Option<SymMatrix> {
        self.current(t).ok().cloned()
    }
}

// ---------------------------------------------------------------------------
// Comparator
// ---------------------------------------------------------------------------

/// Best fixed unit vector in hindsight.
#[derive(Clone, Debug, PartialEq)]
pub struct Comparator {
    pub vector: Vec<f64>,
    /// `λ_min` of the cumulative loss matrix.
    pub value: f64,
}

pub fn cumulative_matrix(
    oracle: &dyn LossOracle,
    horizon: usize,
    view: MatrixView,
) -> Result<SymMatrix> {
    let mut acc = SymMatrix::zeros(oracle.dim());
    for t in 1..=horizon {
        let m = oracle
            .accounting_matrix(t, view)
            .ok_or(Error::MatrixUnavailable)?;
        acc.add_assign(&m);
    }
    Ok(acc)
}

/// Smallest eigenpair of a cumulative loss matrix.
pub fn min_eigenpair(cumulative: &SymMatrix) -> Result<Comparator> {
    let es = full_eigendecompose(cumulative, JACOBI_TOL)?;
    let k = es.dim() - 1;
    Ok(Comparator {
        vector: es.vectors[k].clone(),
        value: es.values[k],
    })
}

/// `min_{‖u‖=1} Σ_t uᵀ L_t u` over the first `horizon` trials.
pub fn best_fixed_comparator(
    oracle: &dyn LossOracle,
    horizon: usize,
    view: MatrixView,
) -> Result<Comparator> {
    min_eigenpair(&cumulative_matrix(oracle, horizon, view)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symlinalg::unit_vector;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rank_one_examples() {
        let s = RankOneStream::from_rows(2, vec![vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(s.query(&[1.0, 0.0], 1).unwrap(), -1.0);
        assert_eq!(s.query(&[0.0, 1.0], 1).unwrap(), 0.0);
        assert_abs_diff_eq!(s.query(&[1.0, 0.0], 2).unwrap(), -0.5, epsilon = 1e-15);
        let m = s.reveal_matrix(2).unwrap();
        assert_abs_diff_eq!(m.frobenius_norm(), 1.0, epsilon = 1e-15);
        assert!(s.direction(3).is_err());
    }

    #[test]
    fn rank_one_file_parsing() {
        let text = "# header\n1 0 0\n\n0 2 0\n# trailing\n";
        let s = parse_rank_one_text(text, 3).unwrap();
        assert_eq!(s.len(), Some(2));
        assert_eq!(s.direction(2).unwrap(), vec![0.0, 1.0, 0.0]);

        match parse_rank_one_text("1 0 0\n1 0\n", 3) {
            Err(Error::MalformedRow { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        match parse_rank_one_text("# c\n0 0 0\n", 3) {
            Err(Error::MalformedRow { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_rank_one_text("1 x 0\n", 3).is_err());
    }

    #[test]
    fn rank_one_file_horizon_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.txt");
        std::fs::write(&path, "1 0\n0 1\n").unwrap();
        let mut cfg = EnvConfig::new(EnvKind::RankOneStream, 2, 3, 0);
        cfg.input = Some(path.clone());
        assert!(rank_one_stream(&cfg).is_err());
        cfg.horizon = 2;
        assert!(rank_one_stream(&cfg).is_ok());
        cfg.input = Some(dir.path().join("missing.txt"));
        assert!(matches!(rank_one_stream(&cfg), Err(Error::Io { .. })));
    }

    #[test]
    fn generated_rank_one_is_reproducible_and_unit() {
        let a = RankOneStream::generated(5, 3, 0.0);
        let b = RankOneStream::generated(5, 3, 0.0);
        for t in 1..20 {
            let x = a.direction(t).unwrap();
            assert_eq!(x, b.direction(t).unwrap());
            assert_abs_diff_eq!(crate::symlinalg::norm(&x), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn spiked_examples() {
        assert_abs_diff_eq!(auto_epsilon(4, 400), 0.05, epsilon = 0.0);
        let s = SpikedGaussian::new(3, 1, 0.0);
        assert_eq!(s.expected_matrix(1).unwrap(), SymMatrix::zeros(3));
        assert!(!s.bounded());
        let s = SpikedGaussian::new(3, 1, 0.2);
        let w = unit_vector(3, 1);
        let p = dot(&w, s.spike());
        assert_abs_diff_eq!(
            s.query(&w, 7).unwrap(),
            s.noise(7) - 0.2 * p * p,
            epsilon = 1e-15
        );
    }

    #[test]
    fn psd_examples() {
        let full = PsdStream::new(3, 3, 5, true);
        let m = full.reveal_matrix(1).unwrap();
        assert!(m.frobenius_distance(&SymMatrix::identity(3)) <= 1e-12);
        let mut rng = rng::stream(0, 0, 0);
        for t in 1..30 {
            let w = sphere_sample(3, &mut rng);
            assert_abs_diff_eq!(full.query(&w, t).unwrap(), 1.0, epsilon = 1e-12);
        }
        let one = PsdStream::new(4, 1, 5, false);
        for t in 1..30 {
            assert!(one.reveal_matrix(t).unwrap().frobenius_norm() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn static_rejects_unbounded_and_asymmetric() {
        assert!(matches!(
            StaticMatrix::new(SymMatrix::from_diag(&[2.0, 0.0])),
            Err(Error::SpectralBound { .. })
        ));
        assert!(StaticMatrix::new(SymMatrix::from_diag(&[-1.0, 1.0])).is_ok());
    }

    #[test]
    fn adaptive_constant_matches_static() {
        let l = SymMatrix::from_rows(&[vec![0.2, 0.1], vec![0.1, -0.5]]).unwrap();
        let l2 = l.clone();
        let mut hook = AdaptiveHook::new(2, move |_, _| l2.clone());
        let stat = StaticMatrix::new(l).unwrap();
        let h = History::default();
        for t in 1..=3 {
            hook.prepare(t, &h).unwrap();
            let w = [0.6, 0.8];
            assert_eq!(hook.query(&w, t).unwrap(), stat.query(&w, t).unwrap());
        }
        assert!(hook.prepare(7, &h).is_err());
    }

    #[test]
    fn adaptive_rejects_bad_outputs() {
        let mut hook = AdaptiveHook::new(2, |_, _| SymMatrix::from_diag(&[3.0, 0.0]));
        assert!(matches!(
            hook.prepare(1, &History::default()),
            Err(Error::SpectralBound { .. })
        ));
    }

    #[test]
    fn comparator_examples() {
        let s = StaticMatrix::new(SymMatrix::from_diag(&[0.0, 1.0])).unwrap();
        let c = best_fixed_comparator(&s, 10, MatrixView::Realized).unwrap();
        assert_abs_diff_eq!(c.value, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.vector[0].abs(), 1.0, epsilon = 1e-12);

        let s = StaticMatrix::new(SymMatrix::from_diag(&[-1.0, 1.0])).unwrap();
        let c = best_fixed_comparator(&s, 5, MatrixView::Realized).unwrap();
        assert_abs_diff_eq!(c.value, -5.0, epsilon = 1e-12);

        let rows = vec![vec![1.0, 0.0, 0.0]; 8];
        let s = RankOneStream::from_rows(3, rows).unwrap();
        let c = best_fixed_comparator(&s, 8, MatrixView::Expected).unwrap();
        assert_abs_diff_eq!(c.value, -8.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.vector[0].abs(), 1.0, epsilon = 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn query_matches_reveal(seed in any::<u64>(), d in 2usize..=6, t in 1usize..500, rank in 1usize..=6) {
                let rank = rank.min(d);
                let mut rng = rng::stream(seed, 99, 0);
                let w = sphere_sample(d, &mut rng);
                let oracles: Vec<Box<dyn LossOracle>> = vec![
                    Box::new(RankOneStream::generated(d, seed, 0.5)),
                    Box::new(PsdStream::new(d, rank, seed, false)),
                    Box::new(SpikedGaussian::new(d, seed, 0.3)),
                ];
                for o in &oracles {
                    let m = o.reveal_matrix(t).unwrap();
                    prop_assert!((o.query(&w, t).unwrap() - m.quad_form(&w)).abs() <= 1e-12);
                    if o.bounded() {
                        prop_assert!(m.spectral_norm().unwrap() <= 1.0 + SPECTRAL_SLACK);
                        prop_assert!(o.query(&w, t).unwrap().abs() <= 1.0 + 1e-12);
                    }
                }
                let psd = PsdStream::new(d, rank, seed, false).query(&w, t).unwrap();
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&psd));
            }
        }
    }
}
