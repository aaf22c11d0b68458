//! The Holevo transform of cocycle generators, its exponential oracle, the
//! skewadjoint parameterizations in both directions, and scaled-limit checks
//! for powers and exponentials.

use num_complex::Complex64;
use thiserror::Error;

use crate::block::{scale_h, BlockError, BlockOperator};
use crate::ito::{series_product, GeneratorParams, ItoError};
use crate::mat::{c64, herm_eig, imag_part, mat_exp, mat_pow, op_norm, real_part, ComplexMatrix, MatError};

#[derive(Debug, Error)]
pub enum HolevoError {
    #[error("operator is not unitary: defect {defect:.3e}")]
    NotUnitary { defect: f64 },
    #[error("operator is not skewadjoint: defect {defect:.3e}")]
    NotSkewadjoint { defect: f64 },
    #[error("eigenstructure did not resolve: residual {residual:.3e} exceeds {tol:.3e}")]
    DefectiveEigenstructure { residual: f64, tol: f64 },
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
    #[error(transparent)]
    Mat(#[from] MatError),
    #[error(transparent)]
    Block(#[from] BlockError),
    #[error(transparent)]
    Ito(#[from] ItoError),
}

/// Parameters of `Q_{A,B,D} = [[A, −B*], [B, D]]`; the `C` block is tied to
/// `−B*` by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct QParams {
    pub a: ComplexMatrix,
    pub b: ComplexMatrix,
    pub d: ComplexMatrix,
}

impl QParams {
    /// Validates internal consistency and returns `(dim_h, dim_k)`.
    pub fn dims(&self) -> Result<(usize, usize), HolevoError> {
        let dim_h = self.a.rows();
        let ok = self.a.is_square()
            && dim_h > 0
            && self.b.cols() == dim_h
            && self.b.rows().is_multiple_of(dim_h)
            && self.d.is_square()
            && self.d.rows() == self.b.rows();
        if !ok {
            return Err(HolevoError::DimensionMismatch {
                context: format!(
                    "A {}x{}, B {}x{}, D {}x{} are not consistent",
                    self.a.rows(),
                    self.a.cols(),
                    self.b.rows(),
                    self.b.cols(),
                    self.d.rows(),
                    self.d.cols()
                ),
            });
        }
        Ok((dim_h, self.b.rows() / dim_h))
    }

    /// Assembles the block operator `[[A, −B*], [B, D]]`.
    pub fn to_block(&self) -> Result<BlockOperator, HolevoError> {
        let (dim_h, dim_k) = self.dims()?;
        let c = self.b.adjoint().scale(c64(-1.0, 0.0));
        Ok(BlockOperator::from_blocks(dim_h, dim_k, &self.a, &c, &self.b, &self.d)?)
    }

    /// Parameters of the adjoint: `Q_{A,B,D}* = Q_{A*,−B,D*}`.
    pub fn adjoint(&self) -> QParams {
        QParams { a: self.a.adjoint(), b: self.b.scale(c64(-1.0, 0.0)), d: self.d.adjoint() }
    }
}

/// Scalar calibration functions: the entire functions `e₀, e₁, e₂, e`, the
/// circle functions `e_a, e_b`, and the polynomials `p_n`.
///
/// `e_a` and `e_b` have removable singularities at `0` and genuine poles at
/// `±2π`; they are evaluated here on `(−2π, 2π)`. Near zero both switch to
/// series: exact continuity values (`0` and `1`) for `|t| < 1e-6`, a four-term
/// Taylor expansion for `|t| < 1e-3`, and cancellation-free closed forms
/// elsewhere.
pub mod scalar {
    use num_complex::Complex64;

    use crate::mat::c64;

    /// `e₀(z) = e^z`.
    pub fn e0(z: Complex64) -> Complex64 {
        z.exp()
    }

    /// `e₁(z) = (e^z − 1)/z`, extended by `e₁(0) = 1`.
    pub fn e1(z: Complex64) -> Complex64 {
        if z.norm() < 1e-3 {
            let mut acc = c64(1.0 / 720.0, 0.0);
            for k in [120.0, 24.0, 6.0, 2.0, 1.0] {
                acc = acc * z + 1.0 / k;
            }
            acc
        } else {
            (z.exp() - 1.0) / z
        }
    }

    /// `e₂(z) = (e^z − 1 − z)/z²`, extended by `e₂(0) = 1/2`.
    pub fn e2(z: Complex64) -> Complex64 {
        if z.norm() < 1e-2 {
            let mut acc = c64(1.0 / 40320.0, 0.0);
            for k in [5040.0, 720.0, 120.0, 24.0, 6.0, 2.0] {
                acc = acc * z + 1.0 / k;
            }
            acc
        } else {
            (z.exp() - 1.0 - z) / (z * z)
        }
    }

    /// `e(z) = (sinh z − z)/z²`, extended by `e(0) = 0`; equivalently
    /// `(e₂(z) − e₂(−z))/2`.
    pub fn e(z: Complex64) -> Complex64 {
        if z.norm() < 0.1 {
            let z2 = z * z;
            let mut acc = c64(1.0 / 39916800.0, 0.0);
            for k in [362880.0, 5040.0, 120.0, 6.0] {
                acc = acc * z2 + 1.0 / k;
            }
            acc * z
        } else {
            (z.sinh() - z) / (z * z)
        }
    }

    /// `e_a(t) = (i/2)(sin t − t)/(cos t − 1)` on `(0, 2π)` with `e_a(0) = 0`.
    ///
    /// Evaluated as `(i/2)(t − sin t)/(2 sin²(t/2))`, which is free of
    /// cancellation in the denominator.
    pub fn e_a(t: f64) -> Complex64 {
        let a = t.abs();
        if a < 1e-6 {
            return Complex64::ZERO;
        }
        if a < 1e-3 {
            let t2 = t * t;
            let series = 1.0 + t2 / 30.0 + t2 * t2 / 840.0 + t2 * t2 * t2 / 25200.0;
            return c64(0.0, t / 6.0 * series);
        }
        let half = 0.5 * t;
        let denom = 2.0 * half.sin() * half.sin();
        c64(0.0, 0.5 * (t - t.sin()) / denom)
    }

    /// `e_b(t) = it/(e^{it} − 1)` on `(0, 2π)` with `e_b(0) = 1`.
    ///
    /// Evaluated as `t/(2 sin(t/2)) · e^{−it/2}` away from the series band.
    pub fn e_b(t: f64) -> Complex64 {
        let a = t.abs();
        if a < 1e-6 {
            return Complex64::ONE;
        }
        if a < 1e-3 {
            let t2 = t * t;
            return c64(1.0 - t2 / 12.0 - t2 * t2 / 720.0, -0.5 * t);
        }
        let half = 0.5 * t;
        let modulus = half / half.sin();
        c64(modulus * half.cos(), -modulus * half.sin())
    }

    /// `p_n(z) = ((1 + z/n)ⁿ − 1 − z)/z²`.
    ///
    /// Evaluated by Horner on the explicit polynomial coefficients
    /// `binom(n, j+2)/n^{j+2}` when that is the better-conditioned route,
    /// which covers every fixed `z` uniformly in `n` (the coefficients are
    /// positive and bounded by `1/(j+2)!`). For arguments on the scale
    /// `z = n(w − 1)` with `w` far from `1` the alternating Horner sum can
    /// lose all digits, so the defining formula is used instead whenever its
    /// forward-error estimate is smaller; near `z = 0` the defining formula
    /// is the one that cancels, so the two regimes are complementary.
    pub fn p_n(n: u32, z: Complex64) -> Complex64 {
        if n < 2 {
            return Complex64::ZERO;
        }
        let nf = n as f64;
        let mut coeffs = Vec::with_capacity((n - 1) as usize);
        let mut c = (nf - 1.0) / (2.0 * nf);
        coeffs.push(c);
        for j in 0..(n - 2) as usize {
            c = c * (nf - j as f64 - 2.0) / ((j as f64 + 3.0) * nf);
            coeffs.push(c);
        }
        let mut acc = Complex64::ZERO;
        let mut mag = 0.0f64;
        for &cj in coeffs.iter().rev() {
            acc = acc * z + cj;
            mag = mag * z.norm() + cj;
        }
        let horner_err = 2.0 * (nf + 1.0) * f64::EPSILON * mag;
        let znorm2 = z.norm_sqr();
        if znorm2 > 0.0 {
            let base = Complex64::ONE + z / nf;
            let direct_err = f64::EPSILON
                * (2.0 * nf * base.norm().powi(n as i32) + 1.0 + z.norm())
                / znorm2;
            if direct_err < horner_err {
                return (base.powu(n) - 1.0 - z) / (z * z);
            }
        }
        acc
    }
}

/// The Holevo transform
/// `F[Q] = [[A + C e₂(D) B, C e₁(D)], [e₁(D) B, e₀(D) − I]]`,
/// where `(A, B, C, D)` are the blocks of `Q` and the entire functions are
/// evaluated at the `D` block. Satisfies `F[Q] − Q = Q · (0 ⊕ e₂(D)) · Q` and
/// `F[Q*] = F[Q]*`.
pub fn holevo_transform(q: &BlockOperator) -> Result<BlockOperator, HolevoError> {
    let d = q.block_d();
    let (e0d, e1d, e2d, _) = crate::mat::phi_funcs(&d)?;
    let a = &q.block_a() + &(&(&q.block_c() * &e2d) * &q.block_b());
    let c = &q.block_c() * &e1d;
    let b = &e1d * &q.block_b();
    let dd = &e0d - &ComplexMatrix::identity(d.rows());
    Ok(BlockOperator::from_blocks(q.dim_h(), q.dim_k(), &a, &c, &b, &dd)?)
}

/// Brute-force oracle for [`holevo_transform`]: embeds `Q` as
/// `τ(Q) = [[0, C, A], [0, D, B], [0, 0, 0]]` on `h ⊕ (h⊗k) ⊕ h`,
/// exponentiates, subtracts the identity and reads the blocks back out of the
/// same slots.
pub fn tau_exp_oracle(q: &BlockOperator) -> Result<BlockOperator, HolevoError> {
    let dh = q.dim_h();
    let dk = q.total_dim() - dh;
    let zero_hh = ComplexMatrix::zeros(dh, dh);
    let zero_kh = ComplexMatrix::zeros(dk, dh);
    let zero_hk = ComplexMatrix::zeros(dh, dk);
    let (a, b, c, d) = (q.block_a(), q.block_b(), q.block_c(), q.block_d());
    let tau = ComplexMatrix::from_blocks(&[
        vec![&zero_hh, &c, &a],
        vec![&zero_kh, &d, &b],
        vec![&zero_hh, &zero_hk, &zero_hh],
    ])
    .expect("tau block grid");
    let big = &mat_exp(&tau)? - &ComplexMatrix::identity(2 * dh + dk);
    let a_out = big.submatrix(0, dh, dh + dk, 2 * dh + dk);
    let c_out = big.submatrix(0, dh, dh, dh + dk);
    let b_out = big.submatrix(dh, dh + dk, dh + dk, 2 * dh + dk);
    let d_out = big.submatrix(dh, dh + dk, dh, dh + dk);
    Ok(BlockOperator::from_blocks(q.dim_h(), q.dim_k(), &a_out, &c_out, &b_out, &d_out)?)
}

/// Unitarity defect accepted by [`q_from_unitary_params`].
pub const UNITARY_DEFECT_TOL: f64 = 1e-8;
/// Skewadjointness defect accepted by [`f_from_skew_params`].
pub const SKEW_DEFECT_TOL: f64 = 1e-8;
/// Eigenphases this close to `2π` are wrapped down to `0`.
pub const PHASE_WRAP_TOL: f64 = 1e-9;

/// Spectral decomposition of a unitary matrix: eigenphases in `[0, 2π)` and a
/// unitary matrix of eigenvectors.
///
/// `W` is diagonalised through its Hermitian real part, with degenerate
/// clusters (tolerance `1e-6` on the cosines) resolved by diagonalising the
/// compressed imaginary part inside each cluster. Phases within
/// [`PHASE_WRAP_TOL`] below `2π` wrap to `0`.
pub fn unitary_eigenphases(w: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix), HolevoError> {
    let n = w.rows();
    let defect = op_norm(&(&(&w.adjoint() * w) - &ComplexMatrix::identity(n)))?;
    if defect > UNITARY_DEFECT_TOL {
        return Err(HolevoError::NotUnitary { defect });
    }
    let re = real_part(w);
    let im = imag_part(w);
    let (cosines, mut v) = herm_eig(&re)?;
    let cluster_tol = 1e-6;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && cosines[end] - cosines[end - 1] <= cluster_tol {
            end += 1;
        }
        if end - start > 1 {
            let v_cluster = v.submatrix(0, n, start, end);
            let compressed = &(&v_cluster.adjoint() * &im) * &v_cluster;
            let (_, u) = herm_eig(&compressed)?;
            let rotated = &v_cluster * &u;
            for i in 0..n {
                for j in 0..end - start {
                    v[(i, start + j)] = rotated[(i, j)];
                }
            }
        }
        start = end;
    }
    let mut phases = Vec::with_capacity(n);
    let mut eigvals = Vec::with_capacity(n);
    for j in 0..n {
        let mut val = Complex64::ZERO;
        for i in 0..n {
            let mut wv = Complex64::ZERO;
            for k in 0..n {
                wv += w[(i, k)] * v[(k, j)];
            }
            val += v[(i, j)].conj() * wv;
        }
        eigvals.push(val);
        let mut theta = val.arg();
        if theta < 0.0 {
            theta += std::f64::consts::TAU;
        }
        if theta > std::f64::consts::TAU - PHASE_WRAP_TOL {
            theta = 0.0;
        }
        phases.push(theta);
    }
    let reconstructed = &(&v * &ComplexMatrix::from_diag(&eigvals)) * &v.adjoint();
    let residual = reconstructed.dist_frob(w);
    let tol = 1e-8 * w.frob_norm().max(1.0);
    if residual > tol {
        return Err(HolevoError::DefectiveEigenstructure { residual, tol });
    }
    Ok((phases, v))
}

fn function_of_phases(phases: &[f64], v: &ComplexMatrix, f: impl Fn(f64) -> Complex64) -> ComplexMatrix {
    let d = ComplexMatrix::from_diag(&phases.iter().map(|&t| f(t)).collect::<Vec<_>>());
    &(v * &d) * &v.adjoint()
}

/// Inverts the skewadjoint parameterization on unitary generator data: given
/// `(Z, L, W)` with `W` unitary, finds the unique selfadjoint `R` with
/// spectrum in `[0, 2π)` and `e^{iR} = W`, and returns
/// `A = Z + L* e_a(R) L`, `B = e_b(R) L`, `D = iR`.
///
/// Roundtrip: `holevo_transform` of the result reproduces `F_{Z,L,W}`.
/// Eigenphases within `1e-6` of `2π` sit close to the poles of `e_a` and
/// `e_b`, where accuracy degrades; callers wanting tight roundtrips should
/// keep the spectrum of `W` away from the positive real axis approach from
/// below.
pub fn q_from_unitary_params(p: &GeneratorParams) -> Result<QParams, HolevoError> {
    p.dims().map_err(HolevoError::Ito)?;
    let (phases, v) = unitary_eigenphases(&p.w)?;
    let e_a_r = function_of_phases(&phases, &v, scalar::e_a);
    let e_b_r = function_of_phases(&phases, &v, scalar::e_b);
    let r = function_of_phases(&phases, &v, |t| c64(t, 0.0));
    let a = &p.z + &(&(&p.l.adjoint() * &e_a_r) * &p.l);
    let b = &e_b_r * &p.l;
    let d = r.scale(c64(0.0, 1.0));
    Ok(QParams { a, b, d })
}

/// The skewadjoint direction: for `Q_{A,B,D}` with `D` skewadjoint, returns
/// the unitary generator parameters
/// `(Z, L, W) = (A − B* e(D) B, e₁(D) B, e₀(D))`.
pub fn f_from_skew_params(q: &QParams) -> Result<GeneratorParams, HolevoError> {
    q.dims()?;
    let defect = op_norm(&(&q.d + &q.d.adjoint()))?;
    if defect > SKEW_DEFECT_TOL {
        return Err(HolevoError::NotSkewadjoint { defect });
    }
    let (e0d, e1d, _, ed) = crate::mat::phi_funcs(&q.d)?;
    let z = &q.a - &(&(&q.b.adjoint() * &ed) * &q.b);
    let l = &e1d * &q.b;
    Ok(GeneratorParams { z, l, w: e0d })
}

/// One grid point of [`scaled_power_limit_check`]: the distance of the scaled
/// single step from `Q` and the distance of the scaled `n`-th power from
/// `F[Q]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledPowerPoint {
    pub h: f64,
    pub n: u64,
    pub hypothesis_error: f64,
    pub limit_error: f64,
}

/// Evaluates, for each `(h, n)` in the grid,
/// `‖n·s_h(P(h,n) − I) − Q‖` and `‖s_h(P(h,n)ⁿ − I) − F[Q]‖`.
pub fn scaled_power_limit_check(
    family: impl Fn(f64, u64) -> BlockOperator,
    q: &BlockOperator,
    grid: &[(f64, u64)],
) -> Result<Vec<ScaledPowerPoint>, HolevoError> {
    let fq = holevo_transform(q)?;
    let identity = BlockOperator::identity(q.dim_h(), q.dim_k());
    let mut out = Vec::with_capacity(grid.len());
    for &(h, n) in grid {
        let p = family(h, n);
        if (p.dim_h(), p.dim_k()) != (q.dim_h(), q.dim_k()) {
            return Err(HolevoError::DimensionMismatch {
                context: format!("family at ({h}, {n}) has dims ({}, {})", p.dim_h(), p.dim_k()),
            });
        }
        let step = scale_h(&(&p - &identity), h)?.scale(c64(n as f64, 0.0));
        let hypothesis_error = op_norm((&step - q).matrix())?;
        let power = BlockOperator::new(q.dim_h(), q.dim_k(), mat_pow(p.matrix(), n)?)?;
        let scaled = scale_h(&(&power - &identity), h)?;
        let limit_error = op_norm((&scaled - &fq).matrix())?;
        out.push(ScaledPowerPoint { h, n, hypothesis_error, limit_error });
    }
    Ok(out)
}

/// Per-`h` distance `‖s_h(e^{Q_h} − I) − F[Q]‖` for a family of exponents.
pub fn exp_dissipative_limit(
    family: impl Fn(f64) -> BlockOperator,
    q: &BlockOperator,
    hs: &[f64],
) -> Result<Vec<(f64, f64)>, HolevoError> {
    let fq = holevo_transform(q)?;
    let identity = BlockOperator::identity(q.dim_h(), q.dim_k());
    let mut out = Vec::with_capacity(hs.len());
    for &h in hs {
        let qh = family(h);
        let exp = BlockOperator::new(q.dim_h(), q.dim_k(), mat_exp(qh.matrix())?)?;
        let scaled = scale_h(&(&exp - &identity), h)?;
        out.push((h, op_norm((&scaled - &fq).matrix())?));
    }
    Ok(out)
}

/// One grid point of [`series_of_transforms_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTransformPoint {
    pub h: f64,
    pub sum_error: f64,
    pub product_error: f64,
}

/// Checks the two composition limits: for each `h`,
/// `‖s_h(e^{Q₁(h)+Q₂(h)} − I) − F[Q₁+Q₂]‖` and
/// `‖s_h(e^{Q₁(h)}e^{Q₂(h)} − I) − F[Q₁]◁F[Q₂]‖`.
pub fn series_of_transforms_check(
    q1: &BlockOperator,
    q2: &BlockOperator,
    family1: impl Fn(f64) -> BlockOperator,
    family2: impl Fn(f64) -> BlockOperator,
    hs: &[f64],
) -> Result<Vec<SeriesTransformPoint>, HolevoError> {
    let sum_limit = holevo_transform(&(q1 + q2))?;
    let product_limit = series_product(&holevo_transform(q1)?, &holevo_transform(q2)?)?;
    let identity = BlockOperator::identity(q1.dim_h(), q1.dim_k());
    let mut out = Vec::with_capacity(hs.len());
    for &h in hs {
        let q1h = family1(h);
        let q2h = family2(h);
        let sum_exp = BlockOperator::new(q1.dim_h(), q1.dim_k(), mat_exp((&q1h + &q2h).matrix())?)?;
        let sum_error = op_norm((&scale_h(&(&sum_exp - &identity), h)? - &sum_limit).matrix())?;
        let prod = &mat_exp(q1h.matrix())? * &mat_exp(q2h.matrix())?;
        let prod_block = BlockOperator::new(q1.dim_h(), q1.dim_k(), prod)?;
        let product_error = op_norm((&scale_h(&(&prod_block - &identity), h)? - &product_limit).matrix())?;
        out.push(SeriesTransformPoint { h, sum_error, product_error });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ito::assemble_fzlw;
    use crate::sample::Sampler;
    use std::f64::consts::PI;

    #[test]
    fn transform_fixes_system_only_generators() {
        let a = c64(0.3, 0.7);
        let q = BlockOperator::from_blocks(
            1,
            1,
            &ComplexMatrix::from_diag(&[a]),
            &ComplexMatrix::zeros(1, 1),
            &ComplexMatrix::zeros(1, 1),
            &ComplexMatrix::zeros(1, 1),
        )
        .unwrap();
        let f = holevo_transform(&q).unwrap();
        assert!(f.matrix().dist_frob(q.matrix()) <= 1e-14);
    }

    #[test]
    fn transform_of_pure_noise_rotation() {
        let q = BlockOperator::from_blocks(
            1,
            1,
            &ComplexMatrix::zeros(1, 1),
            &ComplexMatrix::zeros(1, 1),
            &ComplexMatrix::zeros(1, 1),
            &ComplexMatrix::from_diag(&[c64(0.0, PI)]),
        )
        .unwrap();
        let f = holevo_transform(&q).unwrap();
        let want = ComplexMatrix::from_rows(&[
            vec![Complex64::ZERO, Complex64::ZERO],
            vec![Complex64::ZERO, c64(-2.0, 0.0)],
        ])
        .unwrap();
        assert!(f.matrix().dist_frob(&want) <= 1e-13);
    }

    #[test]
    fn transform_scalar_q_params() {
        let q = QParams {
            a: ComplexMatrix::from_diag(&[c64(0.0, 1.0)]),
            b: ComplexMatrix::from_diag(&[Complex64::ONE]),
            d: ComplexMatrix::zeros(1, 1),
        };
        let f = holevo_transform(&q.to_block().unwrap()).unwrap();
        let want = ComplexMatrix::from_rows(&[
            vec![c64(-0.5, 1.0), c64(-1.0, 0.0)],
            vec![Complex64::ONE, Complex64::ZERO],
        ])
        .unwrap();
        assert!(f.matrix().dist_frob(&want) <= 1e-14);
    }

    #[test]
    fn oracle_examples() {
        let zero = BlockOperator::zeros(2, 1);
        assert!(tau_exp_oracle(&zero).unwrap().matrix().frob_norm() <= 1e-15);

        let mut s = Sampler::new(5);
        let a = s.matrix(2, 2, 1.0);
        let d = s.matrix(2, 2, 1.0);
        let q = BlockOperator::from_blocks(
            2,
            1,
            &a,
            &ComplexMatrix::zeros(2, 2),
            &ComplexMatrix::zeros(2, 2),
            &d,
        )
        .unwrap();
        let f = tau_exp_oracle(&q).unwrap();
        assert!(f.block_a().dist_frob(&a) <= 1e-13);
        let want_d = &mat_exp(&d).unwrap() - &ComplexMatrix::identity(2);
        assert!(f.block_d().dist_frob(&want_d) <= 1e-13);
        assert!(f.block_b().frob_norm() <= 1e-14);
        assert!(f.block_c().frob_norm() <= 1e-14);
    }

    #[test]
    fn transform_agrees_with_oracle() {
        let mut s = Sampler::new(9);
        for _ in 0..10 {
            let q = BlockOperator::new(2, 2, s.matrix(6, 6, 0.8)).unwrap();
            let f1 = holevo_transform(&q).unwrap();
            let f2 = tau_exp_oracle(&q).unwrap();
            assert!(op_norm((&f1 - &f2).matrix()).unwrap() <= 1e-11);
        }
    }

    #[test]
    fn transform_commutes_with_adjoint_and_satisfies_quadratic_identity() {
        let mut s = Sampler::new(13);
        let q = BlockOperator::new(2, 1, s.matrix(4, 4, 1.0)).unwrap();
        let left = holevo_transform(&q.adjoint()).unwrap();
        let right = holevo_transform(&q).unwrap().adjoint();
        assert!(left.matrix().dist_frob(right.matrix()) <= 1e-12);

        let (_, _, e2d, _) = crate::mat::phi_funcs(&q.block_d()).unwrap();
        let mid = ComplexMatrix::from_blocks(&[
            vec![&ComplexMatrix::zeros(2, 2), &ComplexMatrix::zeros(2, 2)],
            vec![&ComplexMatrix::zeros(2, 2), &e2d],
        ])
        .unwrap();
        let fq = holevo_transform(&q).unwrap();
        let gap = &(fq.matrix() - q.matrix()) - &(&(q.matrix() * &mid) * q.matrix());
        assert!(gap.frob_norm() <= 1e-12);
    }

    #[test]
    fn unitary_phase_decomposition_handles_identity() {
        let p = GeneratorParams {
            z: ComplexMatrix::from_diag(&[c64(0.0, 0.4)]),
            l: ComplexMatrix::from_diag(&[c64(0.7, -0.1)]),
            w: ComplexMatrix::identity(1),
        };
        let q = q_from_unitary_params(&p).unwrap();
        assert!(q.a.dist_frob(&p.z) <= 1e-12);
        assert!(q.b.dist_frob(&p.l) <= 1e-12);
        assert!(q.d.frob_norm() <= 1e-12);
    }

    #[test]
    fn unitary_phase_decomposition_scalar_example() {
        let p = GeneratorParams {
            z: ComplexMatrix::zeros(1, 1),
            l: ComplexMatrix::identity(1),
            w: ComplexMatrix::from_diag(&[c64(-1.0, 0.0)]),
        };
        let q = q_from_unitary_params(&p).unwrap();
        assert!((q.d[(0, 0)] - c64(0.0, PI)).norm() <= 1e-12);
        assert!((q.b[(0, 0)] - c64(0.0, -PI / 2.0)).norm() <= 1e-12);
        assert!((q.a[(0, 0)] - c64(0.0, PI / 4.0)).norm() <= 1e-12);
    }

    #[test]
    fn unitary_roundtrip_random() {
        let mut s = Sampler::new(17);
        for _ in 0..5 {
            let p = s.unitary_generator_params(2, 1);
            let q = q_from_unitary_params(&p).unwrap();
            let f_back = holevo_transform(&q.to_block().unwrap()).unwrap();
            let f_direct = assemble_fzlw(&p).unwrap();
            let err = op_norm((&f_back - &f_direct).matrix()).unwrap();
            assert!(err <= 1e-9, "roundtrip error {err}");
        }
    }

    #[test]
    fn unitary_decomposition_rejects_non_unitary() {
        let mut s = Sampler::new(19);
        let p = GeneratorParams {
            z: ComplexMatrix::zeros(2, 2),
            l: ComplexMatrix::zeros(2, 2),
            w: s.matrix(2, 2, 1.0),
        };
        assert!(matches!(q_from_unitary_params(&p), Err(HolevoError::NotUnitary { .. })));
    }

    #[test]
    fn skew_params_examples() {
        let mut s = Sampler::new(23);
        let a = s.matrix(2, 2, 1.0);
        let b = s.matrix(2, 2, 1.0);
        let q = QParams { a: a.clone(), b: b.clone(), d: ComplexMatrix::zeros(2, 2) };
        let p = f_from_skew_params(&q).unwrap();
        assert!(p.z.dist_frob(&a) <= 1e-13);
        assert!(p.l.dist_frob(&b) <= 1e-13);
        assert!(p.w.dist_frob(&ComplexMatrix::identity(2)) <= 1e-13);

        let q = QParams {
            a: ComplexMatrix::zeros(1, 1),
            b: ComplexMatrix::identity(1),
            d: ComplexMatrix::from_diag(&[c64(0.0, PI)]),
        };
        let p = f_from_skew_params(&q).unwrap();
        assert!((p.w[(0, 0)] - c64(-1.0, 0.0)).norm() <= 1e-13);
        let want_l = c64(-2.0, 0.0) / c64(0.0, PI);
        assert!((p.l[(0, 0)] - want_l).norm() <= 1e-13);
        let want_z = -scalar::e(c64(0.0, PI));
        assert!((p.z[(0, 0)] - want_z).norm() <= 1e-13);
    }

    #[test]
    fn skew_params_match_transform() {
        let mut s = Sampler::new(29);
        for _ in 0..5 {
            let q = QParams {
                a: s.matrix(2, 2, 1.0),
                b: s.matrix(4, 2, 1.0),
                d: s.skewadjoint(4, 1.0),
            };
            let p = f_from_skew_params(&q).unwrap();
            let assembled = assemble_fzlw(&p).unwrap();
            let transformed = holevo_transform(&q.to_block().unwrap()).unwrap();
            assert!(op_norm((&assembled - &transformed).matrix()).unwrap() <= 1e-10);
            let wdefect = &(&p.w.adjoint() * &p.w) - &ComplexMatrix::identity(4);
            assert!(op_norm(&wdefect).unwrap() <= 1e-9);
        }
        let bad = QParams {
            a: ComplexMatrix::zeros(1, 1),
            b: ComplexMatrix::zeros(1, 1),
            d: ComplexMatrix::identity(1),
        };
        assert!(matches!(f_from_skew_params(&bad), Err(HolevoError::NotSkewadjoint { .. })));
    }

    #[test]
    fn scalar_identity_samples() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let rel = |x: Complex64, y: Complex64| (x - y).norm() / (1.0 + x.norm().max(y.norm()));
        for _ in 0..100 {
            let radius = 5.0 * rng.random::<f64>().sqrt();
            let angle = std::f64::consts::TAU * rng.random::<f64>();
            let z = c64(radius * angle.cos(), radius * angle.sin());
            assert!(rel(scalar::e1(-z) * scalar::e0(z), scalar::e1(z)) <= 1e-10);
            assert!(rel(scalar::e1(-z) * scalar::e1(z) * 0.5 + scalar::e(z), scalar::e2(z)) <= 1e-10);
            assert!(rel(Complex64::ONE + z * scalar::e2(z), scalar::e1(z)) <= 1e-10);
            assert!(rel(z + z * z * scalar::e2(z), scalar::e0(z) - 1.0) <= 1e-10);
            assert!(rel((scalar::e2(z) - scalar::e2(-z)) * 0.5, scalar::e(z)) <= 1e-10);
            for n in [1u32, 2, 4, 8, 16, 32, 64] {
                let nf = n as f64;
                let w = nf * (z - 1.0);
                let power = z.powu(n) - 1.0;
                assert!(rel(power, w + w * scalar::p_n(n, w) * w) <= 1e-10);
                let scaled = nf * (scalar::e0(z / nf) - 1.0) - z;
                assert!(rel(scaled, scalar::e2(z / nf) * z * z / nf) <= 1e-10);
            }
        }
    }

    #[test]
    fn circle_function_identities() {
        for &t in &[0.0, 1e-8, 5e-4, 0.01, 0.5, 1.0, PI / 2.0, PI, 4.0, 6.0] {
            let it = c64(0.0, t);
            let ea = scalar::e_a(t);
            let eb = scalar::e_b(t);
            assert!((ea.conj() + ea).norm() <= 1e-14);
            if t >= 1e-6 {
                assert!((scalar::e1(it) * eb - Complex64::ONE).norm() <= 1e-12);
                assert!((eb.conj() * scalar::e1(it) - scalar::e0(it)).norm() <= 1e-12);
                assert!((eb.norm_sqr() * scalar::e(it) - ea).norm() <= 1e-12);
            } else {
                assert_eq!(ea, Complex64::ZERO);
                assert_eq!(eb, Complex64::ONE);
            }
        }
        assert_eq!(scalar::e_a(0.0), Complex64::ZERO);
        assert_eq!(scalar::e_b(0.0), Complex64::ONE);
    }

    #[test]
    fn scaled_power_trivial_family() {
        let q = BlockOperator::zeros(1, 1);
        let report = scaled_power_limit_check(
            |_, _| BlockOperator::identity(1, 1),
            &q,
            &[(1.0, 1), (0.5, 4), (0.25, 16)],
        )
        .unwrap();
        for point in report {
            assert!(point.hypothesis_error <= 1e-14);
            assert!(point.limit_error <= 1e-14);
        }
    }

    #[test]
    fn scaled_power_exact_hypothesis_family() {
        let mut s = Sampler::new(37);
        let q = BlockOperator::new(1, 1, s.matrix(2, 2, 0.5)).unwrap();
        let q_for_family = q.clone();
        let family = move |h: f64, n: u64| {
            let unscaled = scale_h(&q_for_family, 1.0 / h).unwrap();
            &BlockOperator::identity(1, 1) + &unscaled.scale(c64(1.0 / n as f64, 0.0))
        };
        let grid: Vec<(f64, u64)> = (2..9).map(|k| (0.5f64.powi(k), 4u64.pow(k as u32))).collect();
        let report = scaled_power_limit_check(family, &q, &grid).unwrap();
        for pair in report.windows(2) {
            assert!(pair[1].limit_error < pair[0].limit_error);
        }
        for point in &report {
            assert!(point.hypothesis_error <= 1e-8, "hypothesis {:.3e}", point.hypothesis_error);
        }
        assert!(report.last().unwrap().limit_error < 0.05 * report.first().unwrap().limit_error.max(1e-8));
    }

    #[test]
    fn exp_limit_of_exactly_scaled_family() {
        let mut s = Sampler::new(41);
        let q = BlockOperator::new(1, 1, s.skewadjoint(2, 1.0)).unwrap();
        let q_for_family = q.clone();
        let family = move |h: f64| scale_h(&q_for_family, 1.0 / h).unwrap();
        let hs: Vec<f64> = (2..10).map(|k| 0.5f64.powi(k)).collect();
        let report = exp_dissipative_limit(family, &q, &hs).unwrap();
        assert!(report.last().unwrap().1 < 0.05 * report.first().unwrap().1);
    }

    #[test]
    fn series_of_transforms_disjoint_support() {
        let mut s = Sampler::new(43);
        let a = s.matrix(2, 2, 0.6);
        let q1 = BlockOperator::from_blocks(
            2,
            1,
            &a,
            &ComplexMatrix::zeros(2, 2),
            &ComplexMatrix::zeros(2, 2),
            &ComplexMatrix::zeros(2, 2),
        )
        .unwrap();
        let d = s.skewadjoint(2, 1.0);
        let q2 = BlockOperator::from_blocks(
            2,
            1,
            &ComplexMatrix::zeros(2, 2),
            &ComplexMatrix::zeros(2, 2),
            &ComplexMatrix::zeros(2, 2),
            &d,
        )
        .unwrap();
        let (q1f, q2f) = (q1.clone(), q2.clone());
        let hs: Vec<f64> = (1..8).map(|k| 0.5f64.powi(k)).collect();
        let report = series_of_transforms_check(
            &q1,
            &q2,
            move |h| scale_h(&q1f, 1.0 / h).unwrap(),
            move |h| scale_h(&q2f, 1.0 / h).unwrap(),
            &hs,
        )
        .unwrap();
        let first = report.first().unwrap();
        let last = report.last().unwrap();
        assert!(last.sum_error < 0.25 * first.sum_error.max(1e-12));
        assert!(last.product_error < 0.25 * first.product_error.max(1e-12));
    }
}
