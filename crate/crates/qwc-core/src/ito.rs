//! The *-monoid of cocycle generators: series product, assembly from
//! `(Z, L, W)` parameters, closed-form composition of parameters, and
//! structure-relation classification with growth bounds.

use num_complex::Complex64;
use thiserror::Error;

use crate::block::{delta_perp, BlockError, BlockOperator};
use crate::mat::{c64, herm_eig, imag_part, op_norm, real_part, ComplexMatrix, MatError};

#[derive(Debug, Error)]
pub enum ItoError {
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
    #[error(transparent)]
    Block(#[from] BlockError),
    #[error(transparent)]
    Mat(#[from] MatError),
}

/// Parameters `(Z, L, W)` of a generator `F_{Z,L,W}` on `h ⊕ (h⊗k)`:
/// `Z` acts on `h`, `L : h → h⊗k`, `W` acts on `h⊗k`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    pub z: ComplexMatrix,
    pub l: ComplexMatrix,
    pub w: ComplexMatrix,
}

impl GeneratorParams {
    /// Identity parameters `(0, 0, I)`, whose generator is `0`.
    pub fn trivial(dim_h: usize, dim_k: usize) -> Self {
        GeneratorParams {
            z: ComplexMatrix::zeros(dim_h, dim_h),
            l: ComplexMatrix::zeros(dim_h * dim_k, dim_h),
            w: ComplexMatrix::identity(dim_h * dim_k),
        }
    }

    /// Validates internal consistency and returns `(dim_h, dim_k)`.
    pub fn dims(&self) -> Result<(usize, usize), ItoError> {
        let dim_h = self.z.rows();
        let ok = self.z.is_square()
            && dim_h > 0
            && self.l.cols() == dim_h
            && self.l.rows().is_multiple_of(dim_h)
            && self.w.is_square()
            && self.w.rows() == self.l.rows();
        if !ok {
            return Err(ItoError::DimensionMismatch {
                context: format!(
                    "Z {}x{}, L {}x{}, W {}x{} are not consistent generator parameters",
                    self.z.rows(),
                    self.z.cols(),
                    self.l.rows(),
                    self.l.cols(),
                    self.w.rows(),
                    self.w.cols()
                ),
            });
        }
        Ok((dim_h, self.l.rows() / dim_h))
    }
}

/// Structure classification of a generator, ordered by strength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StructureClass {
    Unitary,
    Isometric,
    Coisometric,
    Quasicontractive(f64),
    Unclassified,
}

/// Outcome of [`structure_report`]: defects of the two structure relations, the
/// least quasicontractivity bound (when one exists), and the classification.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureReport {
    pub iso_defect: f64,
    pub coiso_defect: f64,
    pub beta0: Option<f64>,
    pub classification: StructureClass,
}

fn require_same_dims(f1: &BlockOperator, f2: &BlockOperator) -> Result<(), ItoError> {
    if (f1.dim_h(), f1.dim_k()) != (f2.dim_h(), f2.dim_k()) {
        return Err(ItoError::DimensionMismatch {
            context: format!(
                "operators on dims ({}, {}) and ({}, {})",
                f1.dim_h(),
                f1.dim_k(),
                f2.dim_h(),
                f2.dim_k()
            ),
        });
    }
    Ok(())
}

/// The series product `F₁ ◁ F₂ := F₁ + F₂ + F₁ Δ F₂`, the composition law of
/// cocycle generators. Associative, with identity `0`, and
/// `(F₁ ◁ F₂)* = F₂* ◁ F₁*`.
pub fn series_product(f1: &BlockOperator, f2: &BlockOperator) -> Result<BlockOperator, ItoError> {
    require_same_dims(f1, f2)?;
    let dim_h = f1.dim_h();
    let n = f1.total_dim();
    let masked = ComplexMatrix::from_fn(n, n, |i, j| {
        if i < dim_h {
            Complex64::ZERO
        } else {
            f2.matrix()[(i, j)]
        }
    });
    let cross = f1.matrix() * &masked;
    let sum = &(f1.matrix() + f2.matrix()) + &cross;
    Ok(BlockOperator::new(dim_h, f1.dim_k(), sum)?)
}

/// Assembles the generator
/// `F_{Z,L,W} = [[Z − ½L*L, −L*W], [L, W − I]]`.
pub fn assemble_fzlw(p: &GeneratorParams) -> Result<BlockOperator, ItoError> {
    let (dim_h, dim_k) = p.dims()?;
    let a = &p.z - &(&p.l.adjoint() * &p.l).scale(c64(0.5, 0.0));
    let c = (&p.l.adjoint() * &p.w).scale(c64(-1.0, 0.0));
    let b = p.l.clone();
    let d = &p.w - &ComplexMatrix::identity(p.w.rows());
    Ok(BlockOperator::from_blocks(dim_h, dim_k, &a, &c, &b, &d)?)
}

/// Closed-form parameters of `F_{Z₁,L₁,W₁} ◁ F_{Z₂,L₂,W₂}`:
///
/// `W = W₁W₂`, `L = L₁ + W₁L₂`, and
/// `Z = Z₁ + Z₂ − ½L₂*(I − W₁*W₁)L₂ − i·im(L₁*W₁L₂)`.
///
/// The assembled generator of the result reproduces the series product
/// whenever `L₂*(I − W₁*W₁)W₂ = 0`, in particular when `W₁` is isometric or
/// `L₂ = 0`; outside that regime the series product of two parameterized
/// generators is not itself of parameterized form (its `C` block differs from
/// `−L*W` by exactly `L₂*(I − W₁*W₁)W₂`).
pub fn compose_params(p1: &GeneratorParams, p2: &GeneratorParams) -> Result<GeneratorParams, ItoError> {
    let d1 = p1.dims()?;
    let d2 = p2.dims()?;
    if d1 != d2 {
        return Err(ItoError::DimensionMismatch {
            context: format!("parameter dims {d1:?} vs {d2:?}"),
        });
    }
    let w = &p1.w * &p2.w;
    let l = &p1.l + &(&p1.w * &p2.l);
    let gram_defect = &ComplexMatrix::identity(p1.w.rows()) - &(&p1.w.adjoint() * &p1.w);
    let correction = (&(&p2.l.adjoint() * &gram_defect) * &p2.l).scale(c64(0.5, 0.0));
    let cross = imag_part(&(&(&p1.l.adjoint() * &p1.w) * &p2.l)).scale(c64(0.0, 1.0));
    let z = &(&(&p1.z + &p2.z) - &correction) - &cross;
    Ok(GeneratorParams { z, l, w })
}

/// The dual generator `F*`; the dual cocycle of `X^F` is `X^{F*}`.
pub fn dual_generator(f: &BlockOperator) -> BlockOperator {
    f.adjoint()
}

/// Bisection resolution on the growth bound.
const BETA_BISECTION_TOL: f64 = 1e-10;

fn beta_test(t: &ComplexMatrix, dperp: &ComplexMatrix, beta: f64, slack: f64) -> Result<bool, ItoError> {
    let s = &dperp.scale(c64(2.0 * beta, 0.0)) - t;
    let (lambda, _) = herm_eig(&real_part(&s))?;
    Ok(lambda.first().copied().unwrap_or(0.0) >= -slack)
}

/// Defects of the structure relations and the least `β` with
/// `F*◁F ≤ 2βΔ⊥`, found by bisection over
/// `[−‖F‖²−‖F‖, ‖F‖²+‖F‖]` against the eigencheck
/// `2βΔ⊥ − F*◁F ⪰ −tol·(1+‖F‖²)·I`, with resolution `1e-10` on `β`.
/// `beta0` is `None` when no `β` in range passes, which happens exactly when
/// the `Δ`-corner of `F*◁F` fails to be negative semidefinite within the
/// slack.
///
/// Classification priority: unitary, then isometric, then coisometric, then
/// quasicontractive, then unclassified.
pub fn structure_report(f: &BlockOperator, tol: f64) -> Result<StructureReport, ItoError> {
    let fs = f.adjoint();
    let iso = series_product(&fs, f)?;
    let coiso = series_product(f, &fs)?;
    let iso_defect = op_norm(iso.matrix())?;
    let coiso_defect = op_norm(coiso.matrix())?;

    let norm_f = op_norm(f.matrix())?;
    let slack = tol * (1.0 + norm_f * norm_f);
    let dperp = delta_perp(f.dim_h(), f.dim_k()).into_matrix();
    let t = iso.matrix();
    let mut lo = -(norm_f * norm_f + norm_f);
    let mut hi = norm_f * norm_f + norm_f;
    let beta0 = if !beta_test(t, &dperp, hi, slack)? {
        None
    } else if beta_test(t, &dperp, lo, slack)? {
        Some(lo)
    } else {
        while hi - lo > BETA_BISECTION_TOL {
            let mid = 0.5 * (lo + hi);
            if beta_test(t, &dperp, mid, slack)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    };

    let classification = if iso_defect <= tol && coiso_defect <= tol {
        StructureClass::Unitary
    } else if iso_defect <= tol {
        StructureClass::Isometric
    } else if coiso_defect <= tol {
        StructureClass::Coisometric
    } else if let Some(beta) = beta0 {
        StructureClass::Quasicontractive(beta)
    } else {
        StructureClass::Unclassified
    };

    Ok(StructureReport { iso_defect, coiso_defect, beta0, classification })
}
