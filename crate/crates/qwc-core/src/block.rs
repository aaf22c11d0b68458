//! Block structure on `h ⊗ k̂ ≅ h ⊕ (h ⊗ k)`.
//!
//! Operators on the augmented space are stored as square matrices of order
//! `d_h(1 + d_k)` in a fixed global index order: the `h` component comes
//! first, followed by `h ⊗ k` in lexicographic (h-index, k-index) order with
//! the h-index varying slowest. All tensor rearrangements in this crate are
//! explicit permutations of that basis, built once per dimension tuple and
//! cached.

use std::collections::HashMap;
use std::ops::{Add, Sub};
use std::sync::{Arc, LazyLock, Mutex};

use num_complex::Complex64;
use thiserror::Error;

use crate::mat::{c64, ComplexMatrix};

/// Errors from block-space operations.
#[derive(Debug, Error)]
pub enum BlockError {
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
    #[error("scaling parameter must be positive and finite, got {h}")]
    InvalidScale { h: f64 },
    #[error("embedding is not isometric: defect {defect:.3e}")]
    NotIsometry { defect: f64 },
}

/// Operator on `h ⊗ k̂` with the block decomposition
/// `[[A, C], [B, D]]` relative to `h ⊕ (h ⊗ k)`.
///
/// `A` maps `h → h`, `C` maps `h⊗k → h`, `B` maps `h → h⊗k` and `D` maps
/// `h⊗k → h⊗k`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockOperator {
    dim_h: usize,
    dim_k: usize,
    matrix: ComplexMatrix,
}

impl BlockOperator {
    /// Wraps a square matrix of order `dim_h(1 + dim_k)`.
    pub fn new(dim_h: usize, dim_k: usize, matrix: ComplexMatrix) -> Result<Self, BlockError> {
        let n = dim_h * (1 + dim_k);
        if matrix.rows() != n || matrix.cols() != n {
            return Err(BlockError::DimensionMismatch {
                context: format!(
                    "expected a {n}x{n} matrix for dims ({dim_h}, {dim_k}), got {}x{}",
                    matrix.rows(),
                    matrix.cols()
                ),
            });
        }
        Ok(BlockOperator { dim_h, dim_k, matrix })
    }

    /// Assembles an operator from its four blocks.
    pub fn from_blocks(
        dim_h: usize,
        dim_k: usize,
        a: &ComplexMatrix,
        c: &ComplexMatrix,
        b: &ComplexMatrix,
        d: &ComplexMatrix,
    ) -> Result<Self, BlockError> {
        let dk = dim_h * dim_k;
        let shapes_ok = a.rows() == dim_h
            && a.cols() == dim_h
            && c.rows() == dim_h
            && c.cols() == dk
            && b.rows() == dk
            && b.cols() == dim_h
            && d.rows() == dk
            && d.cols() == dk;
        if !shapes_ok {
            return Err(BlockError::DimensionMismatch {
                context: format!(
                    "block shapes A {}x{}, C {}x{}, B {}x{}, D {}x{} do not fit dims ({dim_h}, {dim_k})",
                    a.rows(), a.cols(), c.rows(), c.cols(), b.rows(), b.cols(), d.rows(), d.cols()
                ),
            });
        }
        let matrix = ComplexMatrix::from_blocks(&[vec![a, c], vec![b, d]])
            .map_err(|e| BlockError::DimensionMismatch { context: e.to_string() })?;
        Ok(BlockOperator { dim_h, dim_k, matrix })
    }

    pub fn zeros(dim_h: usize, dim_k: usize) -> Self {
        let n = dim_h * (1 + dim_k);
        BlockOperator { dim_h, dim_k, matrix: ComplexMatrix::zeros(n, n) }
    }

    pub fn identity(dim_h: usize, dim_k: usize) -> Self {
        let n = dim_h * (1 + dim_k);
        BlockOperator { dim_h, dim_k, matrix: ComplexMatrix::identity(n) }
    }

    pub fn dim_h(&self) -> usize {
        self.dim_h
    }

    pub fn dim_k(&self) -> usize {
        self.dim_k
    }

    /// Order of the underlying matrix, `dim_h(1 + dim_k)`.
    pub fn total_dim(&self) -> usize {
        self.dim_h * (1 + self.dim_k)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn block_a(&self) -> ComplexMatrix {
        self.matrix.submatrix(0, self.dim_h, 0, self.dim_h)
    }

    pub fn block_c(&self) -> ComplexMatrix {
        self.matrix.submatrix(0, self.dim_h, self.dim_h, self.total_dim())
    }

    pub fn block_b(&self) -> ComplexMatrix {
        self.matrix.submatrix(self.dim_h, self.total_dim(), 0, self.dim_h)
    }

    pub fn block_d(&self) -> ComplexMatrix {
        self.matrix.submatrix(self.dim_h, self.total_dim(), self.dim_h, self.total_dim())
    }

    pub fn adjoint(&self) -> Self {
        BlockOperator { dim_h: self.dim_h, dim_k: self.dim_k, matrix: self.matrix.adjoint() }
    }

    pub fn scale(&self, z: Complex64) -> Self {
        BlockOperator { dim_h: self.dim_h, dim_k: self.dim_k, matrix: self.matrix.scale(z) }
    }

    fn require_same_dims(&self, other: &BlockOperator, what: &str) {
        assert_eq!(
            (self.dim_h, self.dim_k),
            (other.dim_h, other.dim_k),
            "{what}: dims ({}, {}) vs ({}, {})",
            self.dim_h,
            self.dim_k,
            other.dim_h,
            other.dim_k
        );
    }
}

impl Add for &BlockOperator {
    type Output = BlockOperator;
    fn add(self, rhs: &BlockOperator) -> BlockOperator {
        self.require_same_dims(rhs, "block add");
        BlockOperator { dim_h: self.dim_h, dim_k: self.dim_k, matrix: &self.matrix + &rhs.matrix }
    }
}

impl Sub for &BlockOperator {
    type Output = BlockOperator;
    fn sub(self, rhs: &BlockOperator) -> BlockOperator {
        self.require_same_dims(rhs, "block sub");
        BlockOperator { dim_h: self.dim_h, dim_k: self.dim_k, matrix: &self.matrix - &rhs.matrix }
    }
}

/// A noise vector `c ∈ k` together with its augmentation `ĉ = (1, c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseVectorHat {
    c: Vec<Complex64>,
}

impl NoiseVectorHat {
    pub fn new(c: Vec<Complex64>) -> Self {
        NoiseVectorHat { c }
    }

    pub fn zero(dim_k: usize) -> Self {
        NoiseVectorHat { c: vec![Complex64::ZERO; dim_k] }
    }

    pub fn dim_k(&self) -> usize {
        self.c.len()
    }

    pub fn components(&self) -> &[Complex64] {
        &self.c
    }

    /// The augmented vector `(1, c)`; the leading component is exactly one.
    pub fn hat(&self) -> Vec<Complex64> {
        let mut v = Vec::with_capacity(1 + self.c.len());
        v.push(Complex64::ONE);
        v.extend_from_slice(&self.c);
        v
    }
}

impl From<Vec<Complex64>> for NoiseVectorHat {
    fn from(c: Vec<Complex64>) -> Self {
        NoiseVectorHat::new(c)
    }
}

/// The projection `Δ = I ⊗ (0 ⊕ I)`, i.e. `0 ⊕ I_{h⊗k}` in block form.
pub fn delta(dim_h: usize, dim_k: usize) -> BlockOperator {
    let mut m = ComplexMatrix::zeros(dim_h * (1 + dim_k), dim_h * (1 + dim_k));
    for i in dim_h..dim_h * (1 + dim_k) {
        m[(i, i)] = Complex64::ONE;
    }
    BlockOperator { dim_h, dim_k, matrix: m }
}

/// The complementary projection `Δ⊥ = I_h ⊕ 0`.
pub fn delta_perp(dim_h: usize, dim_k: usize) -> BlockOperator {
    let mut m = ComplexMatrix::zeros(dim_h * (1 + dim_k), dim_h * (1 + dim_k));
    for i in 0..dim_h {
        m[(i, i)] = Complex64::ONE;
    }
    BlockOperator { dim_h, dim_k, matrix: m }
}

/// The injection `E_û = I_h ⊗ |û⟩ : h → h ⊗ k̂` as a `d_h(1+d_k) × d_h`
/// matrix, for `û = (1, u)`.
pub fn e_hat(dim_h: usize, u: &[Complex64]) -> ComplexMatrix {
    let id = ComplexMatrix::identity(dim_h);
    let u_col = ComplexMatrix::column(u);
    let lower = id.kron(&u_col);
    ComplexMatrix::from_blocks(&[vec![&id], vec![&lower]]).expect("column block stack")
}

/// The compression `E^ĉ F E_d̂ = (I ⊗ ⟨ĉ|) F (I ⊗ |d̂⟩)`, a `d_h × d_h`
/// matrix. In block terms this is `A + C(I⊗d) + (I⊗c)*B + (I⊗c)*D(I⊗d)`;
/// the inner product is conjugate linear in `c`.
pub fn compress(f: &BlockOperator, c: &[Complex64], d: &[Complex64]) -> Result<ComplexMatrix, BlockError> {
    if c.len() != f.dim_k || d.len() != f.dim_k {
        return Err(BlockError::DimensionMismatch {
            context: format!("compress: vectors of length {} and {} against dim_k {}", c.len(), d.len(), f.dim_k),
        });
    }
    let ec = e_hat(f.dim_h, c);
    let ed = e_hat(f.dim_h, d);
    Ok(&(&ec.adjoint() * &f.matrix) * &ed)
}

/// The scaling map `s_h`: blocks transform as
/// `(A, B, C, D) ↦ (A/h, B/√h, C/√h, D)`, equivalently conjugation by
/// `I ⊗ S_h` with `S_h = diag(h^{-1/2}, I_k)`.
pub fn scale_h(f: &BlockOperator, h: f64) -> Result<BlockOperator, BlockError> {
    if h <= 0.0 || !h.is_finite() {
        return Err(BlockError::InvalidScale { h });
    }
    let rh = h.sqrt();
    let a = f.block_a().scale(c64(1.0 / h, 0.0));
    let c = f.block_c().scale(c64(1.0 / rh, 0.0));
    let b = f.block_b().scale(c64(1.0 / rh, 0.0));
    let d = f.block_d();
    BlockOperator::from_blocks(f.dim_h, f.dim_k, &a, &c, &b, &d)
}

/// Which system factor an ampliation leaves untouched lives on the other
/// side: `One` ampliates an operator on `h₁ ⊗ k̂` by the identity of `h₂`
/// (with the tensor flip keeping `h₁` first), `Two` ampliates an operator on
/// `h₂ ⊗ k̂` by the identity of `h₁`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TensorSide {
    One,
    Two,
}

type AmpliationKey = (TensorSide, usize, usize, usize);

/// Index map from the canonical basis of `(h₁⊗h₂) ⊗ k̂` to the basis of
/// `h_other ⊗ (h_own ⊗ k̂)` in which the ampliation is a plain Kronecker
/// product `I_other ⊗ M`.
static AMPLIATION_MAPS: LazyLock<Mutex<HashMap<AmpliationKey, Arc<Vec<usize>>>>> =
    LazyLock::new(|| Mutex::new(HashMap::new()));

fn ampliation_map(side: TensorSide, d1: usize, d2: usize, dk: usize) -> Arc<Vec<usize>> {
    let key = (side, d1, d2, dk);
    let mut cache = AMPLIATION_MAPS.lock().expect("ampliation cache poisoned");
    if let Some(map) = cache.get(&key) {
        return Arc::clone(map);
    }
    let dh = d1 * d2;
    let total = dh * (1 + dk);
    let mut map = Vec::with_capacity(total);
    for r in 0..total {
        let (i1, i2, slot) = if r < dh {
            (r / d2, r % d2, None)
        } else {
            let rr = r - dh;
            let pair = rr / dk;
            (pair / d2, pair % d2, Some(rr % dk))
        };
        let s = match side {
            TensorSide::One => {
                let small = d1 * (1 + dk);
                let u = match slot {
                    None => i1,
                    Some(j) => d1 + i1 * dk + j,
                };
                i2 * small + u
            }
            TensorSide::Two => {
                let small = d2 * (1 + dk);
                let u = match slot {
                    None => i2,
                    Some(j) => d2 + i2 * dk + j,
                };
                i1 * small + u
            }
        };
        map.push(s);
    }
    let map = Arc::new(map);
    cache.insert(key, Arc::clone(&map));
    map
}

/// The permutation matrix realising [`ampliate_bipartite`] as conjugation of
/// `I_other ⊗ F_small`: output = Π (I ⊗ F) Π*.
pub fn ampliation_permutation(side: TensorSide, d1: usize, d2: usize, dk: usize) -> ComplexMatrix {
    let map = ampliation_map(side, d1, d2, dk);
    let n = map.len();
    let mut p = ComplexMatrix::zeros(n, n);
    for (r, &s) in map.iter().enumerate() {
        p[(r, s)] = Complex64::ONE;
    }
    p
}

/// Ampliates an operator on `h_i ⊗ k̂` to `(h₁⊗h₂) ⊗ k̂`, acting as the
/// identity on the other system factor. For `side = One` this is the flipped
/// ampliation `I₂ ⊗̃ F`, keeping `h₁` as the first factor of the composite
/// system; for `side = Two` it is `I₁ ⊗ F`.
pub fn ampliate_bipartite(
    f_small: &BlockOperator,
    side: TensorSide,
    dim_other: usize,
) -> Result<BlockOperator, BlockError> {
    if dim_other == 0 || f_small.dim_h == 0 {
        return Err(BlockError::DimensionMismatch { context: "ampliation dims must be at least 1".into() });
    }
    let (d1, d2) = match side {
        TensorSide::One => (f_small.dim_h, dim_other),
        TensorSide::Two => (dim_other, f_small.dim_h),
    };
    let dk = f_small.dim_k;
    let map = ampliation_map(side, d1, d2, dk);
    let small_total = f_small.total_dim();
    let m = &f_small.matrix;
    let total = d1 * d2 * (1 + dk);
    let big = ComplexMatrix::from_fn(total, total, |r, rp| {
        let (s, sp) = (map[r], map[rp]);
        if s / small_total == sp / small_total {
            m[(s % small_total, sp % small_total)]
        } else {
            Complex64::ZERO
        }
    });
    BlockOperator::new(d1 * d2, dk, big)
}

/// Maximum Frobenius defect accepted on `J*J − I` for noise embeddings.
pub const ISOMETRY_DEFECT_TOL: f64 = 1e-10;

/// Compresses an operator with noise space `K` to noise space `k` through an
/// isometry `J : k → K`, returning `(I ⊗ (1 ⊕ J))* F (I ⊗ (1 ⊕ J))`.
///
/// Compressions intertwine exactly: `compress(result, c, d)` equals
/// `compress(F, Jc, Jd)`.
pub fn embed_noise_compress(f: &BlockOperator, j: &ComplexMatrix) -> Result<BlockOperator, BlockError> {
    let d_big = f.dim_k;
    let d_small = j.cols();
    if j.rows() != d_big {
        return Err(BlockError::DimensionMismatch {
            context: format!("isometry is {}x{} but noise dimension is {d_big}", j.rows(), j.cols()),
        });
    }
    let defect = (&(&j.adjoint() * j) - &ComplexMatrix::identity(d_small)).frob_norm();
    if defect > ISOMETRY_DEFECT_TOL {
        return Err(BlockError::NotIsometry { defect });
    }
    let id_h = ComplexMatrix::identity(f.dim_h);
    let upper = ComplexMatrix::identity(f.dim_h);
    let lower = id_h.kron(j);
    let zero_top = ComplexMatrix::zeros(f.dim_h, f.dim_h * d_small);
    let zero_bottom = ComplexMatrix::zeros(f.dim_h * d_big, f.dim_h);
    let j_noise = ComplexMatrix::from_blocks(&[vec![&upper, &zero_top], vec![&zero_bottom, &lower]])
        .expect("noise embedding block grid");
    let compressed = &(&j_noise.adjoint() * &f.matrix) * &j_noise;
    BlockOperator::new(f.dim_h, d_small, compressed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::op_norm;

    fn close(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> bool {
        a.dist_frob(b) <= tol
    }

    #[test]
    fn delta_examples() {
        let d = delta(1, 1);
        assert!(close(d.matrix(), &ComplexMatrix::from_diag(&[Complex64::ZERO, Complex64::ONE]), 0.0));
        let dp = delta_perp(1, 1);
        assert!(close(dp.matrix(), &ComplexMatrix::from_diag(&[Complex64::ONE, Complex64::ZERO]), 0.0));

        let d21 = delta(2, 1);
        let want = ComplexMatrix::from_diag(&[Complex64::ZERO, Complex64::ZERO, Complex64::ONE, Complex64::ONE]);
        assert!(close(d21.matrix(), &want, 0.0));

        for (dh, dk) in [(1, 1), (2, 1), (2, 3), (3, 2)] {
            let d = delta(dh, dk);
            let dp = delta_perp(dh, dk);
            assert!((d.matrix() * dp.matrix()).frob_norm() == 0.0);
            assert!(close(&(d.matrix() + dp.matrix()), &ComplexMatrix::identity(dh * (1 + dk)), 0.0));
            assert!(close(&(d.matrix() * d.matrix()), d.matrix(), 0.0));
            assert!(close(&d.matrix().adjoint(), d.matrix(), 0.0));
        }
    }

    #[test]
    fn compress_on_projections() {
        let c = [c64(0.3, -0.7), c64(1.1, 0.2)];
        let d = [c64(-0.4, 0.9), c64(0.6, 0.5)];
        let ip: Complex64 = c.iter().zip(&d).map(|(ci, di)| ci.conj() * di).sum();
        let got = compress(&delta(2, 2), &c, &d).unwrap();
        assert!(close(&got, &ComplexMatrix::identity(2).scale(ip), 1e-15));
        let got = compress(&delta_perp(2, 2), &c, &d).unwrap();
        assert!(close(&got, &ComplexMatrix::identity(2), 1e-15));
    }

    #[test]
    fn compress_scalar_formula() {
        let (a, g, b, dd) = (c64(0.2, 0.1), c64(-1.0, 0.5), c64(0.7, 0.0), c64(0.0, -0.3));
        let f = BlockOperator::new(
            1,
            1,
            ComplexMatrix::from_rows(&[vec![a, g], vec![b, dd]]).unwrap(),
        )
        .unwrap();
        let c = c64(0.4, -0.6);
        let d = c64(-0.2, 0.9);
        let got = compress(&f, &[c], &[d]).unwrap();
        let want = a + g * d + c.conj() * b + c.conj() * dd * d;
        assert!((got[(0, 0)] - want).norm() <= 1e-15);
    }

    #[test]
    fn compress_rejects_wrong_lengths() {
        let f = delta(1, 2);
        assert!(matches!(compress(&f, &[Complex64::ONE], &[Complex64::ONE, Complex64::ZERO]), Err(BlockError::DimensionMismatch { .. })));
    }

    #[test]
    fn scale_h_examples() {
        let d = delta(2, 2);
        assert!(close(scale_h(&d, 0.37).unwrap().matrix(), d.matrix(), 1e-15));

        let dp = delta_perp(1, 2);
        let got = scale_h(&dp, 4.0).unwrap();
        assert!(close(got.matrix(), &dp.matrix().scale(c64(0.25, 0.0)), 1e-15));

        let ones = BlockOperator::new(
            1,
            1,
            ComplexMatrix::from_rows(&[vec![Complex64::ONE, Complex64::ONE], vec![Complex64::ONE, Complex64::ONE]]).unwrap(),
        )
        .unwrap();
        let got = scale_h(&ones, 0.25).unwrap();
        let want = ComplexMatrix::from_rows(&[vec![c64(4.0, 0.0), c64(2.0, 0.0)], vec![c64(2.0, 0.0), Complex64::ONE]]).unwrap();
        assert!(close(got.matrix(), &want, 1e-15));

        assert!(matches!(scale_h(&d, 0.0), Err(BlockError::InvalidScale { .. })));
        assert!(matches!(scale_h(&d, -1.0), Err(BlockError::InvalidScale { .. })));
    }

    #[test]
    fn scale_h_composes() {
        let f = BlockOperator::new(
            2,
            1,
            ComplexMatrix::from_fn(4, 4, |i, j| c64((i + 2 * j) as f64 * 0.25 - 0.5, (i as f64) * 0.1 - (j as f64) * 0.3)),
        )
        .unwrap();
        let ab = scale_h(&scale_h(&f, 0.5).unwrap(), 0.125).unwrap();
        let direct = scale_h(&f, 0.0625).unwrap();
        assert!(close(ab.matrix(), direct.matrix(), 1e-13));
        assert!(close(scale_h(&f, 1.0).unwrap().matrix(), f.matrix(), 0.0));
    }

    #[test]
    fn ampliation_of_projections() {
        let d_small = delta(2, 2);
        let big = ampliate_bipartite(&d_small, TensorSide::Two, 3).unwrap();
        assert!(close(big.matrix(), delta(6, 2).matrix(), 0.0));

        let dp_small = delta_perp(2, 2);
        let big = ampliate_bipartite(&dp_small, TensorSide::One, 3).unwrap();
        assert!(close(big.matrix(), delta_perp(6, 2).matrix(), 0.0));
    }

    #[test]
    fn ampliation_side_one_compress_vacuum() {
        let f = BlockOperator::new(
            2,
            2,
            ComplexMatrix::from_fn(6, 6, |i, j| c64(0.1 * (i as f64 + 1.0) - 0.05 * (j as f64), 0.07 * (j as f64) - 0.02 * (i as f64 * i as f64))),
        )
        .unwrap();
        let big = ampliate_bipartite(&f, TensorSide::One, 2).unwrap();
        let zero = [Complex64::ZERO, Complex64::ZERO];
        let got = compress(&big, &zero, &zero).unwrap();
        let small = compress(&f, &zero, &zero).unwrap();
        assert!(close(&got, &small.kron(&ComplexMatrix::identity(2)), 1e-14));
    }

    #[test]
    fn ampliation_matches_permutation_conjugation() {
        for side in [TensorSide::One, TensorSide::Two] {
            let (dh_own, dk, d_other) = (2, 2, 3);
            let f = BlockOperator::new(
                dh_own,
                dk,
                ComplexMatrix::from_fn(6, 6, |i, j| c64((i * 7 + j) as f64 * 0.03 - 0.4, (i + 3 * j) as f64 * 0.05 - 0.3)),
            )
            .unwrap();
            let got = ampliate_bipartite(&f, side, d_other).unwrap();
            let (d1, d2) = match side {
                TensorSide::One => (dh_own, d_other),
                TensorSide::Two => (d_other, dh_own),
            };
            let other = match side {
                TensorSide::One => d2,
                TensorSide::Two => d1,
            };
            let pi = ampliation_permutation(side, d1, d2, dk);
            let plain = ComplexMatrix::identity(other).kron(f.matrix());
            let want = &(&pi * &plain) * &pi.adjoint();
            assert!(close(got.matrix(), &want, 0.0));
        }
    }

    #[test]
    fn embedding_examples() {
        let f = BlockOperator::new(
            2,
            2,
            ComplexMatrix::from_fn(6, 6, |i, j| c64(0.2 * (i as f64) - 0.1 * (j as f64), 0.05 * ((i * j) as f64) - 0.15)),
        )
        .unwrap();
        let same = embed_noise_compress(&f, &ComplexMatrix::identity(2)).unwrap();
        assert!(close(same.matrix(), f.matrix(), 0.0));

        let j = ComplexMatrix::from_rows(&[
            vec![Complex64::ONE, Complex64::ZERO],
            vec![Complex64::ZERO, Complex64::ONE],
            vec![Complex64::ZERO, Complex64::ZERO],
        ])
        .unwrap();
        let small = embed_noise_compress(&delta(2, 3), &j).unwrap();
        assert!(close(small.matrix(), delta(2, 2).matrix(), 1e-15));

        let f_big = BlockOperator::new(
            2,
            3,
            ComplexMatrix::from_fn(8, 8, |i, j| c64(0.11 * (i as f64) - 0.07 * (j as f64), 0.03 * ((i + j) as f64) - 0.2)),
        )
        .unwrap();
        let f_small = embed_noise_compress(&f_big, &j).unwrap();
        let c = vec![c64(0.5, -0.2), c64(-0.3, 0.8)];
        let d = vec![c64(1.0, 0.4), c64(0.2, -0.6)];
        let jc: Vec<Complex64> = (0..3).map(|i| (0..2).map(|l| j[(i, l)] * c[l]).sum()).collect();
        let jd: Vec<Complex64> = (0..3).map(|i| (0..2).map(|l| j[(i, l)] * d[l]).sum()).collect();
        let lhs = compress(&f_small, &c, &d).unwrap();
        let rhs = compress(&f_big, &jc, &jd).unwrap();
        assert!(close(&lhs, &rhs, 1e-14));
    }

    #[test]
    fn embedding_rejects_non_isometry() {
        let j = ComplexMatrix::from_rows(&[vec![Complex64::ONE], vec![Complex64::ONE]]).unwrap();
        assert!(matches!(embed_noise_compress(&delta(1, 2), &j), Err(BlockError::NotIsometry { .. })));
    }

    #[test]
    fn compress_is_affine_in_each_slot() {
        let f = BlockOperator::new(
            2,
            2,
            ComplexMatrix::from_fn(6, 6, |i, j| c64(0.3 * (i as f64) - 0.2 * (j as f64), 0.1 * ((i * i + j) as f64) - 0.4)),
        )
        .unwrap();
        let c = vec![c64(0.2, 0.5), c64(-0.1, 0.3)];
        let d1 = vec![c64(0.7, -0.2), c64(0.4, 0.1)];
        let d2 = vec![c64(-0.5, 0.6), c64(0.9, -0.8)];
        let alpha = 0.37;
        let mix: Vec<Complex64> = d1.iter().zip(&d2).map(|(x, y)| x * alpha + y * (1.0 - alpha)).collect();
        let lhs = compress(&f, &c, &mix).unwrap();
        let rhs = &compress(&f, &c, &d1).unwrap().scale(c64(alpha, 0.0))
            + &compress(&f, &c, &d2).unwrap().scale(c64(1.0 - alpha, 0.0));
        assert!(op_norm(&(&lhs - &rhs)).unwrap() <= 1e-13);
    }
}
