//! Dense symmetric linear algebra.
//!
//! Everything here works on small dense matrices (`d` up to a few hundred):
//! a cyclic Jacobi eigensolver, a Gram–Schmidt pass for keeping a maintained
//! eigenbasis orthonormal, and a handful of vector kernels shared by the
//! mirror-descent core, the samplers and the tests.

use crate::error::{Error, Result};

/// Maximum number of Jacobi sweeps before giving up.
pub const JACOBI_MAX_SWEEPS: usize = 100;
/// Default off-diagonal Frobenius tolerance for the Jacobi solver.
pub const JACOBI_TOL: f64 = 1e-12;
const RELATIVE_PAIR_TOL: f64 = 1e-15;

/// A dense real symmetric matrix stored row-major with both triangles kept.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    /// Builds a matrix from rows, checking squareness, finiteness and exact symmetry.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::InvalidInput(
                "matrix must have at least one row".into(),
            ));
        }
        let mut data = Vec::with_capacity(dim * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "non-finite entry at ({i}, {j})"
                    )));
                }
            }
            data.extend_from_slice(row);
        }
        let m = Self { dim, data };
        for i in 0..dim {
            for j in 0..i {
                if m.get(i, j) != m.get(j, i) {
                    return Err(Error::InvalidInput(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(m)
    }

    /// `scale * v vᵀ`.
    pub fn outer(v: &[f64], scale: f64) -> Self {
        let mut m = Self::zeros(v.len());
        m.add_outer(v, scale);
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Sets entry `(i, j)` and its mirror `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
        self.data[j * self.dim + i] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// `self += scale * v vᵀ`.
    pub fn add_outer(&mut self, v: &[f64], scale: f64) {
        let d = self.dim;
        for i in 0..d {
            let si = scale * v[i];
            let row = &mut self.data[i * d..(i + 1) * d];
            for (r, &vj) in row.iter_mut().zip(v) {
                *r += si * vj;
            }
        }
    }

    /// `self += scale * (a bᵀ + b aᵀ)`.
    pub fn add_sym_outer(&mut self, a: &[f64], b: &[f64], scale: f64) {
        let d = self.dim;
        for i in 0..d {
            for j in 0..d {
                self.data[i * d + j] += scale * (a[i] * b[j] + b[i] * a[j]);
            }
        }
    }

    pub fn add_assign(&mut self, other: &SymMatrix) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn add_scaled(&mut self, other: &SymMatrix, scale: f64) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in &mut self.data {
            *a *= s;
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn mat_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|i| dot(self.row(i), v)).collect()
    }

    /// `vᵀ M v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        dot(&self.mat_vec(v), v)
    }

    /// Trace inner product `tr(self · other)`.
    pub fn inner(&self, other: &SymMatrix) -> f64 {
        dot(&self.data, &other.data)
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn frobenius_distance(&self, other: &SymMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Largest deviation from exact symmetry.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `outer · self · outer`, symmetrized.
    pub fn congruence(&self, outer: &SymMatrix) -> SymMatrix {
        let d = self.dim;
        let mut tmp = vec![0.0; d * d];
        for i in 0..d {
            for k in 0..d {
                let o = outer.get(i, k);
                if o == 0.0 {
                    continue;
                }
                let row = self.row(k);
                for j in 0..d {
                    tmp[i * d + j] += o * row[j];
                }
            }
        }
        let mut out = SymMatrix::zeros(d);
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for k in 0..d {
                    s += tmp[i * d + k] * outer.get(k, j);
                }
                out.data[i * d + j] = s;
            }
        }
        for i in 0..d {
            for j in 0..i {
                let m = 0.5 * (out.get(i, j) + out.get(j, i));
                out.set(i, j, m);
            }
        }
        out
    }

    /// Spectral norm (largest absolute eigenvalue).
    pub fn spectral_norm(&self) -> Result<f64> {
        let es = full_eigendecompose(self, JACOBI_TOL)?;
        Ok(es.values.iter().fold(0.0f64, |m, v| m.max(v.abs())))
    }
}

/// Orthonormal eigenbasis with eigenvalues sorted non-increasing.
///
/// `vectors[i]` is the eigenvector paired with `values[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

impl EigenSystem {
    /// Standard basis with the given eigenvalues (not re-sorted).
    pub fn diagonal(values: Vec<f64>) -> Self {
        let d = values.len();
        let vectors = (0..d).map(|i| unit_vector(d, i)).collect();
        Self { values, vectors }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `Σ_i f(values_i) u_i u_iᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let mut m = SymMatrix::zeros(self.dim());
        for (v, u) in self.values.iter().zip(&self.vectors) {
            let s = f(*v);
            if s != 0.0 {
                m.add_outer(u, s);
            }
        }
        m
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.reconstruct_with(|v| v)
    }

    /// Coordinates of `x` in the eigenbasis: `(u_iᵀ x)_i`.
    pub fn coords(&self, x: &[f64]) -> Vec<f64> {
        self.vectors.iter().map(|u| dot(u, x)).collect()
    }

    pub fn is_sorted(&self) -> bool {
        self.values.windows(2).all(|w| w[0] >= w[1])
    }

    /// Stable re-sort into non-increasing eigenvalue order. Ties keep their
    /// current relative order.
    pub fn sort_descending(&mut self) {
        if self.is_sorted() {
            return;
        }
        let mut perm: Vec<usize> = (0..self.dim()).collect();
        perm.sort_by(|&a, &b| self.values[b].total_cmp(&self.values[a]));
        let values = perm.iter().map(|&i| self.values[i]).collect();
        let mut old = std::mem::take(&mut self.vectors);
        self.vectors = perm.iter().map(|&i| std::mem::take(&mut old[i])).collect();
        self.values = values;
    }
}

/// Cyclic Jacobi eigendecomposition.
///
/// Sweeps until no off-diagonal pair is significant relative to its diagonal
/// entries, then checks the off-diagonal Frobenius norm against `tol` (scaled
/// by the matrix norm when that exceeds one). Eigenvalues come back sorted
/// non-increasing, ties in original diagonal order, and every eigenvector has
/// its first nonzero component positive.
pub fn full_eigendecompose(m: &SymMatrix, tol: f64) -> Result<EigenSystem> {
    if !m.is_finite() {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let n = m.dim();
    let mut a = m.data.clone();
    // v is stored row-major; column k holds eigenvector k.
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale = m.frobenius_norm().max(1.0);
    let threshold = tol * scale;
    // Pairs below this size are left alone; the relative part keeps small
    // eigenvalues of positive definite inputs accurate.
    let floor = f64::EPSILON * 1e-3 * scale;

    let off_norm = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j] * a[i * n + j];
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    loop {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                if apq.abs() <= floor.max(RELATIVE_PAIR_TOL * (app * aqq).abs().sqrt()) {
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            break;
        }
        sweeps += 1;
        if sweeps >= JACOBI_MAX_SWEEPS {
            break;
        }
    }
    let residual = off_norm(&a);
    if residual > threshold {
        return Err(Error::NoConvergence {
            what: "jacobi eigendecomposition",
            iterations: sweeps,
            residual,
        });
    }

    let mut es = EigenSystem {
        values: (0..n).map(|i| a[i * n + i]).collect(),
        vectors: (0..n)
            .map(|k| {
                let mut u: Vec<f64> = (0..n).map(|i| v[i * n + k]).collect();
                canonical_sign(&mut u);
                u
            })
            .collect(),
    };
    es.sort_descending();
    Ok(es)
}

/// Flips `u` so that its first nonzero component is positive.
pub fn canonical_sign(u: &mut [f64]) {
    if let Some(&first) = u.iter().find(|x| **x != 0.0) {
        if first < 0.0 {
            u.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Largest deviation of the Gram matrix from the identity.
pub fn orthogonality_error(es: &EigenSystem) -> f64 {
    gram_error(&es.vectors)
}

pub fn gram_error(vectors: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0f64;
    for (i, a) in vectors.iter().enumerate() {
        for (j, b) in vectors.iter().enumerate().skip(i) {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot(a, b) - target).abs());
        }
    }
    worst
}

/// Gram–Schmidt pass over the eigenvectors, in index order. Two passes of
/// modified Gram–Schmidt are applied so the result is orthonormal to
/// working precision. Eigenvalues are left untouched.
pub fn reorthogonalize(es: &mut EigenSystem) -> Result<()> {
    for _ in 0..2 {
        for i in 0..es.dim() {
            let (done, rest) = es.vectors.split_at_mut(i);
            let u = &mut rest[0];
            for prev in done.iter() {
                let c = dot(prev, u);
                axpy(-c, prev, u);
            }
            let n = norm(u);
            if n < 1e-8 {
                return Err(Error::RankDeficient { index: i });
            }
            u.iter_mut().for_each(|x| *x /= n);
        }
    }
    Ok(())
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`.
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn unit_vector(d: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; d];
    e[i] = 1.0;
    e
}

/// Normalizes `v` in place; returns `false` when the norm is zero or not finite.
pub fn normalize(v: &mut [f64]) -> bool {
    let n = norm(v);
    if !(n.is_finite() && n > 0.0) {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= n);
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(d: usize, rng: &mut impl Rng) -> SymMatrix {
        let mut m = SymMatrix::zeros(d);
        for i in 0..d {
            for j in 0..=i {
                m.set(i, j, rng.gen_range(-1.0..1.0));
            }
        }
        m
    }

    // Roots of the characteristic polynomial of a 2×2 or 3×3 matrix, computed
    // without any iteration: quadratic formula / trigonometric cubic solution.
    fn char_poly_roots(m: &SymMatrix) -> Vec<f64> {
        match m.dim() {
            2 => {
                let (a, b, c) = (m.get(0, 0), m.get(0, 1), m.get(1, 1));
                let mean = 0.5 * (a + c);
                let r = (0.25 * (a - c) * (a - c) + b * b).sqrt();
                vec![mean + r, mean - r]
            }
            3 => {
                let q = m.trace() / 3.0;
                let mut p2 = 0.0;
                for i in 0..3 {
                    for j in 0..3 {
                        let v = m.get(i, j) - if i == j { q } else { 0.0 };
                        p2 += v * v;
                    }
                }
                let p = (p2 / 6.0).sqrt();
                let mut b = [[0.0; 3]; 3];
                for (i, row) in b.iter_mut().enumerate() {
                    for (j, x) in row.iter_mut().enumerate() {
                        *x = (m.get(i, j) - if i == j { q } else { 0.0 }) / p;
                    }
                }
                let det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1])
                    - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
                    + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
                let phi = (det / 2.0).clamp(-1.0, 1.0).acos() / 3.0;
                let l1 = q + 2.0 * p * phi.cos();
                let l3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
                let l2 = 3.0 * q - l1 - l3;
                let mut v = vec![l1, l2, l3];
                v.sort_by(|a, b| b.total_cmp(a));
                v
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn identity_has_unit_eigenvalues() {
        let es = full_eigendecompose(&SymMatrix::identity(3), JACOBI_TOL).unwrap();
        assert_eq!(es.values, vec![1.0, 1.0, 1.0]);
        assert!(orthogonality_error(&es) < 1e-15);
    }

    #[test]
    fn diagonal_matrix() {
        let es = full_eigendecompose(&SymMatrix::from_diag(&[0.3, 0.7]), JACOBI_TOL).unwrap();
        assert_eq!(es.values, vec![0.7, 0.3]);
        assert_eq!(es.vectors[0], vec![0.0, 1.0]);
        assert_eq!(es.vectors[1], vec![1.0, 0.0]);
    }

    #[test]
    fn two_by_two_rank_two_core() {
        let mut m = SymMatrix::from_rows(&[vec![0.5, -0.25], vec![-0.25, 0.5]]).unwrap();
        m.scale(1.0 / 0.75);
        let es = full_eigendecompose(&m, JACOBI_TOL).unwrap();
        assert_abs_diff_eq!(es.values[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(es.values[1], 1.0 / 3.0, epsilon = 1e-14);
        // eigenvector for 1.0 is (1, -1)/√2 with positive first component
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(es.vectors[0][0], h, epsilon = 1e-14);
        assert_abs_diff_eq!(es.vectors[0][1], -h, epsilon = 1e-14);
    }

    #[test]
    fn reorthogonalize_fixed_point_and_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_sym(6, &mut rng);
        let es = full_eigendecompose(&m, JACOBI_TOL).unwrap();
        let mut same = es.clone();
        reorthogonalize(&mut same).unwrap();
        for (a, b) in es.vectors.iter().zip(&same.vectors) {
            for (x, y) in a.iter().zip(b) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-12);
            }
        }

        let mut noisy = es.clone();
        for u in &mut noisy.vectors {
            for x in u.iter_mut() {
                *x += rng.gen_range(-1e-6..1e-6);
            }
        }
        assert!(orthogonality_error(&noisy) > 1e-8);
        reorthogonalize(&mut noisy).unwrap();
        assert!(orthogonality_error(&noisy) <= 1e-12);
        assert_eq!(noisy.values, es.values);
    }

    #[test]
    fn reorthogonalize_single_vector() {
        let mut es = EigenSystem {
            values: vec![1.0],
            vectors: vec![vec![1.0]],
        };
        reorthogonalize(&mut es).unwrap();
        assert_eq!(es.vectors, vec![vec![1.0]]);
    }

    #[test]
    fn reorthogonalize_reports_collapsed_index() {
        let mut es = EigenSystem {
            values: vec![0.5, 0.5, 0.0],
            vectors: vec![
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![1.0, 1.0, 0.0],
            ],
        };
        match reorthogonalize(&mut es) {
            Err(Error::RankDeficient { index }) => assert_eq!(index, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn orthogonality_error_cases() {
        assert_eq!(
            orthogonality_error(&EigenSystem::diagonal(vec![0.5, 0.5])),
            0.0
        );
        let dup = EigenSystem {
            values: vec![0.5, 0.5],
            vectors: vec![vec![1.0, 0.0], vec![1.0, 0.0]],
        };
        assert_eq!(orthogonality_error(&dup), 1.0);
        let (s, c) = 0.3f64.sin_cos();
        let rot = EigenSystem {
            values: vec![0.5, 0.5],
            vectors: vec![vec![c, s], vec![-s, c]],
        };
        assert!(orthogonality_error(&rot) <= 1e-15);
    }

    #[test]
    fn non_finite_input_rejected() {
        assert!(SymMatrix::from_rows(&[vec![f64::NAN]]).is_err());
        assert!(SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.1, 1.0]]).is_err());
    }

    #[test]
    fn sort_is_stable_on_ties() {
        let mut es = EigenSystem {
            values: vec![0.2, 0.4, 0.2, 0.2],
            vectors: vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]],
        };
        es.sort_descending();
        assert_eq!(es.values, vec![0.4, 0.2, 0.2, 0.2]);
        assert_eq!(es.vectors, vec![vec![2.0], vec![1.0], vec![3.0], vec![4.0]]);
    }

    proptest! {
        #[test]
        fn reconstruction_matches(seed in any::<u64>(), d in 1usize..=8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_sym(d, &mut rng);
            let es = full_eigendecompose(&m, JACOBI_TOL).unwrap();
            prop_assert!(es.is_sorted());
            prop_assert!(orthogonality_error(&es) <= 1e-8);
            let r = es.reconstruct();
            prop_assert!(r.asymmetry() <= 1e-10);
            prop_assert!(r.frobenius_distance(&m) <= 1e-10);
        }

        #[test]
        fn eigenvalues_match_characteristic_roots(seed in any::<u64>(), d in 2usize..=3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_sym(d, &mut rng);
            let es = full_eigendecompose(&m, JACOBI_TOL).unwrap();
            for (a, b) in es.values.iter().zip(char_poly_roots(&m)) {
                prop_assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
            }
        }

        #[test]
        fn reorthogonalize_is_idempotent(seed in any::<u64>(), d in 1usize..=8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut es = full_eigendecompose(&random_sym(d, &mut rng), JACOBI_TOL).unwrap();
            for u in &mut es.vectors {
                for x in u.iter_mut() {
                    *x += rng.gen_range(-1e-4..1e-4);
                }
            }
            reorthogonalize(&mut es).unwrap();
            let once = es.clone();
            reorthogonalize(&mut es).unwrap();
            for (a, b) in once.vectors.iter().zip(&es.vectors) {
                for (x, y) in a.iter().zip(b) {
                    prop_assert!((x - y).abs() <= 1e-12);
                }
            }
        }
    }
}
