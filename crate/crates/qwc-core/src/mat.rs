//! Dense complex linear algebra: exponentials, Hermitian eigendecomposition,
//! matrix phi-functions and norms.
//!
//! Everything in the crate runs through [`ComplexMatrix`], a row-major dense
//! matrix over `Complex64`. Matrices admit finite entries only; constructors
//! reject NaN and infinity with a diagnostic error instead of letting them
//! propagate into later arithmetic.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use thiserror::Error;

/// Shorthand for building a `Complex64` from real and imaginary parts.
#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Errors produced by the matrix operations in this module.
#[derive(Debug, Error)]
pub enum MatError {
    #[error("expected a square matrix, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },
    #[error("shape mismatch: {context}")]
    ShapeMismatch { context: String },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("entry count {given} does not match {rows}x{cols}")]
    BadEntryCount { rows: usize, cols: usize, given: usize },
    #[error("matrix is not Hermitian: defect {defect:.3e} exceeds {tol:.3e}")]
    NotHermitian { defect: f64, tol: f64 },
    #[error("scalar function undefined at eigenvalue {lambda}")]
    UndefinedAtEigenvalue { lambda: f64 },
    #[error("singular linear system encountered (pivot {pivot:.3e})")]
    Singular { pivot: f64 },
    #[error("Jacobi eigensolver did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
}

/// Dense complex matrix stored in row-major order.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Complex64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.4e}{:+.4e}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries, checking the count and that
    /// every entry is finite.
    pub fn new(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self, MatError> {
        if entries.len() != rows * cols {
            return Err(MatError::BadEntryCount { rows, cols, given: entries.len() });
        }
        let m = ComplexMatrix { rows, cols, entries };
        m.check_finite()?;
        Ok(m)
    }

    /// Zero matrix of the given shape.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix { rows, cols, entries: vec![Complex64::ZERO; rows * cols] }
    }

    /// Identity matrix of order `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::ONE;
        }
        m
    }

    /// Builds a matrix from a slice of equal-length rows.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self, MatError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut entries = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(MatError::ShapeMismatch {
                    context: format!("ragged rows: expected {c} columns, found {}", row.len()),
                });
            }
            entries.extend_from_slice(row);
        }
        Self::new(r, c, entries)
    }

    /// Square matrix with the given diagonal and zeros elsewhere.
    pub fn from_diag(diag: &[Complex64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, z) in diag.iter().enumerate() {
            m[(i, i)] = *z;
        }
        m
    }

    /// Builds a matrix entrywise from an index function.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        ComplexMatrix { rows, cols, entries }
    }

    /// Column vector with the given entries.
    pub fn column(entries: &[Complex64]) -> Self {
        ComplexMatrix { rows: entries.len(), cols: 1, entries: entries.to_vec() }
    }

    /// Assembles a matrix from a rectangular grid of blocks. Blocks in one
    /// grid row must share their height; blocks in one grid column must share
    /// their width.
    pub fn from_blocks(grid: &[Vec<&ComplexMatrix>]) -> Result<Self, MatError> {
        if grid.is_empty() || grid[0].is_empty() {
            return Ok(Self::zeros(0, 0));
        }
        let ncols_blocks = grid[0].len();
        let mut row_heights = Vec::with_capacity(grid.len());
        let mut col_widths = vec![0usize; ncols_blocks];
        for (bi, grid_row) in grid.iter().enumerate() {
            if grid_row.len() != ncols_blocks {
                return Err(MatError::ShapeMismatch {
                    context: format!("block grid row {bi} has {} blocks, expected {ncols_blocks}", grid_row.len()),
                });
            }
            let h = grid_row[0].rows;
            for (bj, blk) in grid_row.iter().enumerate() {
                if blk.rows != h {
                    return Err(MatError::ShapeMismatch {
                        context: format!("block ({bi}, {bj}) height {} differs from {h}", blk.rows),
                    });
                }
                if bi == 0 {
                    col_widths[bj] = blk.cols;
                } else if blk.cols != col_widths[bj] {
                    return Err(MatError::ShapeMismatch {
                        context: format!("block ({bi}, {bj}) width {} differs from {}", blk.cols, col_widths[bj]),
                    });
                }
            }
            row_heights.push(h);
        }
        let total_rows: usize = row_heights.iter().sum();
        let total_cols: usize = col_widths.iter().sum();
        let mut out = Self::zeros(total_rows, total_cols);
        let mut r0 = 0;
        for (bi, grid_row) in grid.iter().enumerate() {
            let mut c0 = 0;
            for blk in grid_row {
                for i in 0..blk.rows {
                    for j in 0..blk.cols {
                        out[(r0 + i, c0 + j)] = blk[(i, j)];
                    }
                }
                c0 += blk.cols;
            }
            r0 += row_heights[bi];
        }
        Ok(out)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    fn check_finite(&self) -> Result<(), MatError> {
        for i in 0..self.rows {
            for j in 0..self.cols {
                let z = self[(i, j)];
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(MatError::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(())
    }

    fn require_square(&self) -> Result<(), MatError> {
        if self.is_square() {
            Ok(())
        } else {
            Err(MatError::NonSquare { rows: self.rows, cols: self.cols })
        }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    /// Entrywise scalar multiple.
    pub fn scale(&self, z: Complex64) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] * z)
    }

    /// Kronecker product `self ⊗ other`, with the row and column index of
    /// `self` varying slowest.
    pub fn kron(&self, other: &ComplexMatrix) -> Self {
        Self::from_fn(self.rows * other.rows, self.cols * other.cols, |i, j| {
            self[(i / other.rows, j / other.cols)] * other[(i % other.rows, j % other.cols)]
        })
    }

    /// Copy of the half-open row and column range `[r0, r1) × [c0, c1)`.
    pub fn submatrix(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> Self {
        assert!(r1 <= self.rows && c1 <= self.cols && r0 <= r1 && c0 <= c1, "submatrix out of range");
        Self::from_fn(r1 - r0, c1 - c0, |i, j| self[(r0 + i, c0 + j)])
    }

    /// Maximum column sum of absolute values.
    pub fn one_norm(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Frobenius norm.
    pub fn frob_norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Frobenius distance `‖self − other‖_F`, a convenient upper bound on the
    /// spectral-norm distance.
    pub fn dist_frob(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "dist_frob shape mismatch");
        let mut acc = 0.0;
        for (a, b) in self.entries.iter().zip(&other.entries) {
            acc += (a - b).norm_sqr();
        }
        acc.sqrt()
    }

    /// Frobenius norm of `self − self*`, used for Hermitian preconditions.
    pub fn hermitian_defect(&self) -> f64 {
        self.dist_frob(&self.adjoint())
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.entries[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.entries[i * self.cols + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "add shape mismatch");
        ComplexMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)] + rhs[(i, j)])
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "sub shape mismatch");
        ComplexMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)] - rhs[(i, j)])
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale(-Complex64::ONE)
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, rhs.rows, "mul shape mismatch: {}x{} by {}x{}", self.rows, self.cols, rhs.rows, rhs.cols);
        let mut out = ComplexMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Complex64::ZERO {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }
}

/// Integer matrix power by repeated squaring; `n = 0` gives the identity.
pub fn mat_pow(m: &ComplexMatrix, n: u64) -> Result<ComplexMatrix, MatError> {
    m.require_square()?;
    let mut result = ComplexMatrix::identity(m.rows);
    let mut base = m.clone();
    let mut k = n;
    while k > 0 {
        if k & 1 == 1 {
            result = &result * &base;
        }
        k >>= 1;
        if k > 0 {
            base = &base * &base;
        }
    }
    Ok(result)
}

/// Hermitian real part `(T + T*)/2`.
pub fn real_part(t: &ComplexMatrix) -> ComplexMatrix {
    (t + &t.adjoint()).scale(c64(0.5, 0.0))
}

/// Hermitian imaginary part `(T − T*)/(2i)`.
pub fn imag_part(t: &ComplexMatrix) -> ComplexMatrix {
    (t - &t.adjoint()).scale(c64(0.0, -0.5))
}

/// Solves `A · X = B` by LU decomposition with partial pivoting.
pub fn lu_solve(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix, MatError> {
    a.require_square()?;
    if a.rows != b.rows {
        return Err(MatError::ShapeMismatch {
            context: format!("lu_solve: A is {}x{} but B has {} rows", a.rows, a.cols, b.rows),
        });
    }
    let n = a.rows;
    let mut lu = a.clone();
    let mut x = b.clone();
    for k in 0..n {
        let (mut pivot_row, mut pivot_abs) = (k, lu[(k, k)].norm());
        for i in (k + 1)..n {
            let m = lu[(i, k)].norm();
            if m > pivot_abs {
                pivot_row = i;
                pivot_abs = m;
            }
        }
        if pivot_abs == 0.0 {
            return Err(MatError::Singular { pivot: pivot_abs });
        }
        if pivot_row != k {
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(pivot_row, j)];
                lu[(pivot_row, j)] = tmp;
            }
            for j in 0..x.cols {
                let tmp = x[(k, j)];
                x[(k, j)] = x[(pivot_row, j)];
                x[(pivot_row, j)] = tmp;
            }
        }
        let pivot = lu[(k, k)];
        for i in (k + 1)..n {
            let factor = lu[(i, k)] / pivot;
            lu[(i, k)] = factor;
            for j in (k + 1)..n {
                let sub = factor * lu[(k, j)];
                lu[(i, j)] -= sub;
            }
            for j in 0..x.cols {
                let sub = factor * x[(k, j)];
                x[(i, j)] -= sub;
            }
        }
    }
    for j in 0..x.cols {
        for i in (0..n).rev() {
            let mut acc = x[(i, j)];
            for k in (i + 1)..n {
                acc -= lu[(i, k)] * x[(k, j)];
            }
            x[(i, j)] = acc / lu[(i, i)];
        }
    }
    Ok(x)
}

/// Padé numerator coefficients for the order-13 diagonal approximant.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// 1-norm threshold above which the argument is halved before the Padé step.
const EXP_SQUARING_THRESHOLD: f64 = 2.0;

/// Matrix exponential by scaling and squaring with the diagonal Padé
/// approximant of order 13.
///
/// The argument is scaled by `2^{-s}` until its 1-norm is at most
/// [`EXP_SQUARING_THRESHOLD`], the approximant is evaluated, and the result is
/// squared `s` times. For `‖M‖ ≤ 50` the relative spectral-norm error stays
/// below `1e-12`.
pub fn mat_exp(m: &ComplexMatrix) -> Result<ComplexMatrix, MatError> {
    m.require_square()?;
    m.check_finite()?;
    let n = m.rows;
    let norm = m.one_norm();
    let squarings = if norm > EXP_SQUARING_THRESHOLD {
        (norm / EXP_SQUARING_THRESHOLD).log2().ceil() as u32
    } else {
        0
    };
    let a = m.scale(c64(0.5f64.powi(squarings as i32), 0.0));
    let id = ComplexMatrix::identity(n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let b = |k: usize| c64(PADE13[k], 0.0);
    let u_inner = &(&a6.scale(b(13)) + &a4.scale(b(11))) + &a2.scale(b(9));
    let u_poly = &(&(&a6 * &u_inner) + &a6.scale(b(7))) + &(&a4.scale(b(5)) + &(&a2.scale(b(3)) + &id.scale(b(1))));
    let u = &a * &u_poly;
    let v_inner = &(&a6.scale(b(12)) + &a4.scale(b(10))) + &a2.scale(b(8));
    let v = &(&(&a6 * &v_inner) + &a6.scale(b(6))) + &(&a4.scale(b(4)) + &(&a2.scale(b(2)) + &id.scale(b(0))));
    let mut r = lu_solve(&(&v - &u), &(&v + &u))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    Ok(r)
}

/// Off-diagonal threshold factor and sweep cap for the Jacobi eigensolver.
const JACOBI_THRESHOLD: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 64;

/// Relative tolerance accepted on the Hermitian defect of eigensolver inputs.
pub const HERMITIAN_DEFECT_TOL: f64 = 1e-10;

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// The input may deviate from exact Hermitian symmetry by up to
/// `1e-10 · ‖H‖` (Frobenius); it is symmetrised to `(H + H*)/2` before
/// iterating. Rotations run in sweeps over the strict upper triangle until
/// every off-diagonal entry falls below `1e-13` times the input scale, with at
/// most 64 sweeps. Eigenvalues are returned in ascending order together with
/// a unitary matrix of column eigenvectors.
pub fn herm_eig(h: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix), MatError> {
    h.require_square()?;
    h.check_finite()?;
    let scale = h.frob_norm();
    let defect = h.hermitian_defect();
    if defect > HERMITIAN_DEFECT_TOL * scale && defect > 1e-300 {
        return Err(MatError::NotHermitian { defect, tol: HERMITIAN_DEFECT_TOL * scale });
    }
    let n = h.rows;
    let mut a = real_part(h);
    let mut v = ComplexMatrix::identity(n);
    if n <= 1 {
        let lambda = if n == 1 { vec![a[(0, 0)].re] } else { vec![] };
        return Ok((lambda, v));
    }
    let eps = JACOBI_THRESHOLD * scale.max(f64::MIN_POSITIVE);
    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let m = apq.norm();
                if m <= eps {
                    continue;
                }
                rotated = true;
                let phase = apq / m;
                let tau = (a[(q, q)].re - a[(p, p)].re) / (2.0 * m);
                let t = if tau == 0.0 {
                    1.0
                } else {
                    tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let rpp = c64(c, 0.0);
                let rpq = c64(s, 0.0);
                let rqp = -phase.conj() * s;
                let rqq = phase.conj() * c;
                for i in 0..n {
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = aip * rpp + aiq * rqp;
                    a[(i, q)] = aip * rpq + aiq * rqq;
                }
                for j in 0..n {
                    let apj = a[(p, j)];
                    let aqj = a[(q, j)];
                    a[(p, j)] = rpp.conj() * apj + rqp.conj() * aqj;
                    a[(q, j)] = rpq.conj() * apj + rqq.conj() * aqj;
                }
                a[(p, q)] = Complex64::ZERO;
                a[(q, p)] = Complex64::ZERO;
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = vip * rpp + viq * rqp;
                    v[(i, q)] = vip * rpq + viq * rqq;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(MatError::NoConvergence { sweeps: JACOBI_MAX_SWEEPS });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.partial_cmp(&a[(j, j)].re).expect("finite eigenvalues"));
    let lambda: Vec<f64> = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok((lambda, vectors))
}

/// Applies a scalar function to a Hermitian matrix through its spectral
/// decomposition: `V · diag(f(λ)) · V*`.
///
/// `f` returns `None` where it is undefined; hitting such an eigenvalue is an
/// error.
pub fn func_of_hermitian(
    h: &ComplexMatrix,
    f: impl Fn(f64) -> Option<Complex64>,
) -> Result<ComplexMatrix, MatError> {
    let (lambda, v) = herm_eig(h)?;
    let mut fd = Vec::with_capacity(lambda.len());
    for &l in &lambda {
        match f(l) {
            Some(z) => fd.push(z),
            None => return Err(MatError::UndefinedAtEigenvalue { lambda: l }),
        }
    }
    let d = ComplexMatrix::from_diag(&fd);
    Ok(&(&v * &d) * &v.adjoint())
}

/// The four entire functions of a square matrix argument:
/// `e₀(D) = e^D`, `e₁(D) = (e^D − I)/D`, `e₂(D) = (e^D − I − D)/D²` and
/// `e(D) = (½ sinh-type combination) = (e₂(D) − e₂(−D))/2`, each understood as
/// the entire extension in `D`.
///
/// `e₀`, `e₁` and `e₂` are read off the exponential of the augmented block
/// matrix `[[D, I, 0], [0, 0, I], [0, 0, 0]]`, so `D` is never inverted and no
/// normality is required. `e(D)` uses a second augmented exponential at `−D`
/// via the identity `2e(z) = e₂(z) − e₂(−z)`.
pub fn phi_funcs(
    d: &ComplexMatrix,
) -> Result<(ComplexMatrix, ComplexMatrix, ComplexMatrix, ComplexMatrix), MatError> {
    d.require_square()?;
    let n = d.rows;
    let id = ComplexMatrix::identity(n);
    let zero = ComplexMatrix::zeros(n, n);
    let augmented = |top: &ComplexMatrix| {
        ComplexMatrix::from_blocks(&[
            vec![top, &id, &zero],
            vec![&zero, &zero, &id],
            vec![&zero, &zero, &zero],
        ])
        .expect("augmented block grid is rectangular")
    };
    let big = mat_exp(&augmented(d))?;
    let e0 = big.submatrix(0, n, 0, n);
    let e1 = big.submatrix(0, n, n, 2 * n);
    let e2 = big.submatrix(0, n, 2 * n, 3 * n);
    let neg = mat_exp(&augmented(&-d))?;
    let e2_neg = neg.submatrix(0, n, 2 * n, 3 * n);
    let e = (&e2 - &e2_neg).scale(c64(0.5, 0.0));
    Ok((e0, e1, e2, e))
}

/// Positive part `(re Z)₊` of the Hermitian real part of a square matrix:
/// eigenvalues of `(Z + Z*)/2` below zero are clipped to zero.
pub fn positive_part(z: &ComplexMatrix) -> Result<ComplexMatrix, MatError> {
    z.require_square()?;
    func_of_hermitian(&real_part(z), |l| Some(c64(l.max(0.0), 0.0)))
}

/// Spectral norm, computed as the square root of the largest eigenvalue of
/// `M*M`.
pub fn op_norm(m: &ComplexMatrix) -> Result<f64, MatError> {
    if m.rows == 0 || m.cols == 0 {
        return Ok(0.0);
    }
    m.check_finite()?;
    let gram = &m.adjoint() * m;
    let (lambda, _) = herm_eig(&gram)?;
    let top = lambda.last().copied().unwrap_or(0.0).max(0.0);
    Ok(top.sqrt())
}
