//! Limit-side evaluation: associated semigroups of a cocycle generator, the
//! semigroup-decomposition formula for matrix elements between exponential
//! vectors of step functions, Euler-formula comparisons, and the noise
//! embedding consistency checks.

use num_complex::Complex64;
use thiserror::Error;

use crate::block::{compress, embed_noise_compress, BlockError, BlockOperator};
use crate::mat::{c64, mat_exp, op_norm, ComplexMatrix, MatError};
use crate::walk::{walk_matrix_element, whole_steps, StepFunction, WalkError};

#[derive(Debug, Error)]
pub enum CocycleError {
    #[error("operand dimension mismatch ({context})")]
    DimensionMismatch { context: String },
    #[error("time must be nonnegative, got {t}")]
    NegativeTime { t: f64 },
    #[error("time step h must be positive, got {h}")]
    NonPositiveStep { h: f64 },
    #[error(transparent)]
    Block(#[from] BlockError),
    #[error(transparent)]
    Mat(#[from] MatError),
    #[error(transparent)]
    Walk(#[from] WalkError),
}

/// Generator of the associated semigroup labelled by the noise vectors
/// `(c, d)`: `compress(F, c, d) + ⟨c, d⟩ I`, which is the compression of
/// `F + Δ` between the hatted vectors.
pub fn semigroup_generator(
    f: &BlockOperator,
    c: &[Complex64],
    d: &[Complex64],
) -> Result<ComplexMatrix, CocycleError> {
    let core = compress(f, c, d)?;
    let pairing: Complex64 = c.iter().zip(d).map(|(u, v)| u.conj() * v).sum();
    Ok(&core + &ComplexMatrix::identity(f.dim_h()).scale(pairing))
}

/// One associated semigroup of a cocycle generator, tagged with its label.
#[derive(Debug, Clone)]
pub struct SemigroupGen {
    generator: ComplexMatrix,
    c: Vec<Complex64>,
    d: Vec<Complex64>,
}

impl SemigroupGen {
    pub fn new(
        f: &BlockOperator,
        c: Vec<Complex64>,
        d: Vec<Complex64>,
    ) -> Result<Self, CocycleError> {
        let generator = semigroup_generator(f, &c, &d)?;
        Ok(Self { generator, c, d })
    }

    pub fn generator(&self) -> &ComplexMatrix {
        &self.generator
    }

    pub fn label(&self) -> (&[Complex64], &[Complex64]) {
        (&self.c, &self.d)
    }

    /// `exp(t · generator)`.
    pub fn at(&self, t: f64) -> Result<ComplexMatrix, CocycleError> {
        Ok(mat_exp(&self.generator.scale(c64(t, 0.0)))?)
    }
}

fn partition(f: &StepFunction, g: &StepFunction, t: f64) -> Vec<f64> {
    let mut cuts: Vec<f64> = f
        .breakpoints()
        .iter()
        .chain(g.breakpoints())
        .copied()
        .filter(|&b| b > 0.0 && b < t)
        .chain([0.0, t])
        .collect();
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup();
    cuts
}

/// Matrix element `X^{f,g}_t` of the cocycle with generator `F`, by
/// semigroup decomposition: the ordered product, over the partition of
/// `[0, t]` by the breakpoints of `f` and `g`, of
/// `exp((t_{j+1} − t_j) · semigroup_generator(F, f(t_j), g(t_j)))`.
pub fn cocycle_matrix_element(
    f_op: &BlockOperator,
    f: &StepFunction,
    g: &StepFunction,
    t: f64,
) -> Result<ComplexMatrix, CocycleError> {
    if t < 0.0 {
        return Err(CocycleError::NegativeTime { t });
    }
    if f.dim_k() != f_op.dim_k() || g.dim_k() != f_op.dim_k() {
        return Err(CocycleError::DimensionMismatch {
            context: format!(
                "generator noise dimension {}, test functions map into C^{} and C^{}",
                f_op.dim_k(),
                f.dim_k(),
                g.dim_k()
            ),
        });
    }
    let cuts = partition(f, g, t);
    let mut product = ComplexMatrix::identity(f_op.dim_h());
    for pair in cuts.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        let mid = 0.5 * (lo + hi);
        let gen = semigroup_generator(f_op, f.value_at(mid), g.value_at(mid))?;
        product = &product * &mat_exp(&gen.scale(c64(hi - lo, 0.0)))?;
    }
    Ok(product)
}

/// `‖(I + h·a(h))^{⌊t/h⌋ − ⌊r/h⌋} − e^{(t−r)·a}‖`, the Euler-formula
/// discrepancy at step size `h` over the window `[r, t]`.
pub fn euler_compare(
    a_target: &ComplexMatrix,
    a_of_h: impl Fn(f64) -> ComplexMatrix,
    h: f64,
    r: f64,
    t: f64,
) -> Result<f64, CocycleError> {
    if h <= 0.0 || !h.is_finite() {
        return Err(CocycleError::NonPositiveStep { h });
    }
    if r < 0.0 || t < r {
        return Err(CocycleError::NegativeTime { t: t.min(r) });
    }
    let a_h = a_of_h(h);
    if a_h.rows() != a_target.rows() || a_h.cols() != a_target.cols() {
        return Err(CocycleError::DimensionMismatch {
            context: format!(
                "family gives {}×{}, target is {}×{}",
                a_h.rows(),
                a_h.cols(),
                a_target.rows(),
                a_target.cols()
            ),
        });
    }
    let steps = (whole_steps(t, h) - whole_steps(r, h)) as u64;
    let one = &ComplexMatrix::identity(a_h.rows()) + &a_h.scale(c64(h, 0.0));
    let powered = crate::mat::mat_pow(&one, steps)?;
    let target = mat_exp(&a_target.scale(c64(t - r, 0.0)))?;
    Ok(op_norm(&(&powered - &target))?)
}

/// Pushes a step function in `k` forward through an isometry `J: k → K`,
/// value by value.
pub fn map_through_isometry(
    f: &StepFunction,
    j: &ComplexMatrix,
) -> Result<StepFunction, CocycleError> {
    if j.cols() != f.dim_k() {
        return Err(CocycleError::DimensionMismatch {
            context: format!("isometry domain C^{}, function maps into C^{}", j.cols(), f.dim_k()),
        });
    }
    let values = f
        .values()
        .iter()
        .map(|v| {
            let col = &*j * &ComplexMatrix::column(v);
            col.entries().to_vec()
        })
        .collect();
    Ok(StepFunction::new(f.breakpoints().to_vec(), values)?)
}

/// Cocycle-side noise-embedding consistency: the matrix elements of the
/// cocycle with compressed generator `J*FJ` against `(f, g)` agree with
/// those of the big-noise cocycle against `(Jf, Jg)`. Returns the norm of
/// the discrepancy at time `t`.
pub fn jgj_matrix_element_check(
    f_big: &BlockOperator,
    j: &ComplexMatrix,
    f: &StepFunction,
    g: &StepFunction,
    t: f64,
) -> Result<f64, CocycleError> {
    let small = embed_noise_compress(f_big, j)?;
    let lifted_f = map_through_isometry(f, j)?;
    let lifted_g = map_through_isometry(g, j)?;
    let compressed = cocycle_matrix_element(&small, f, g, t)?;
    let big = cocycle_matrix_element(f_big, &lifted_f, &lifted_g, t)?;
    Ok(op_norm(&(&compressed - &big))?)
}

/// Walk-side analogue of [`jgj_matrix_element_check`] at time scale `h`.
pub fn jgj_walk_element_check(
    g_big: &BlockOperator,
    j: &ComplexMatrix,
    f: &StepFunction,
    g: &StepFunction,
    h: f64,
    t: f64,
) -> Result<f64, CocycleError> {
    let small = embed_noise_compress(g_big, j)?;
    let lifted_f = map_through_isometry(f, j)?;
    let lifted_g = map_through_isometry(g, j)?;
    let compressed = walk_matrix_element(&small, f, g, h, t)?;
    let big = walk_matrix_element(g_big, &lifted_f, &lifted_g, h, t)?;
    Ok(op_norm(&(&compressed - &big))?)
}

/// Evaluation times for sup-over-`t` comparisons: all multiples of `h` in
/// `[0, horizon]`, the breakpoints of `f` and `g` inside the window, the
/// horizon itself, and optionally `extra` uniformly spaced interior points.
pub fn evaluation_grid(
    h: f64,
    horizon: f64,
    f: &StepFunction,
    g: &StepFunction,
    extra: usize,
) -> Vec<f64> {
    let mut grid: Vec<f64> = (0..=whole_steps(horizon, h)).map(|k| k as f64 * h).collect();
    grid.extend(
        f.breakpoints()
            .iter()
            .chain(g.breakpoints())
            .copied()
            .filter(|&b| b > 0.0 && b < horizon),
    );
    for j in 1..=extra {
        grid.push(horizon * j as f64 / (extra + 1) as f64);
    }
    grid.push(horizon);
    grid.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let tol = 1e-12 * horizon.max(1.0);
    grid.dedup_by(|a, b| (*a - *b).abs() <= tol);
    grid
}
