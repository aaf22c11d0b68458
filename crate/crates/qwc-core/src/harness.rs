//! Scenario runner. A JSON document describes a step-operator family, a set
//! of test-function pairs, a horizon and a grid of step sizes; the runner
//! measures the sup-over-time distance between embedded-walk and cocycle
//! matrix elements for every `(pair, h)` cell, estimates empirical
//! convergence orders, and serializes the result as CSV.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::block::{BlockError, BlockOperator};
use crate::cocycle::{cocycle_matrix_element, evaluation_grid, CocycleError};
use crate::holevo::{HolevoError, QParams};
use crate::ito::{GeneratorParams, ItoError};
use crate::mat::{c64, op_norm, ComplexMatrix, MatError};
use crate::models::{
    bipartite_family, preservation_family, realize_general, realize_isometric,
    realize_unitary_exp, rqi_family, BipartiteComponent, FamilyKind, GeneratorFamily, ModelError,
    RQIParams,
};
use crate::walk::{
    inner_product_integral, toyfock_flow, walk_step_matrix, whole_steps, StepFunction, WalkError,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid scenario: {context}")]
    InvalidConfig { context: String },
    #[error("malformed report CSV, line {line}: {context}")]
    MalformedCsv { line: usize, context: String },
    #[error("order estimate undefined: {context}")]
    OrderUndefined { context: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error(transparent)]
    Cocycle(#[from] CocycleError),
    #[error(transparent)]
    Mat(#[from] MatError),
    #[error(transparent)]
    Block(#[from] BlockError),
    #[error(transparent)]
    Ito(#[from] ItoError),
    #[error(transparent)]
    Holevo(#[from] HolevoError),
}

fn bad_config(context: impl Into<String>) -> HarnessError {
    HarnessError::InvalidConfig { context: context.into() }
}

/// A complex matrix in configuration files: row-major, entries as
/// `[re, im]` pairs.
pub type MatrixSpec = Vec<Vec<[f64; 2]>>;

pub fn matrix_from_spec(spec: &[Vec<[f64; 2]>], name: &str) -> Result<ComplexMatrix, HarnessError> {
    let rows: Vec<Vec<Complex64>> = spec
        .iter()
        .map(|row| row.iter().map(|&[re, im]| c64(re, im)).collect())
        .collect();
    if rows.iter().flatten().any(|z: &Complex64| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(bad_config(format!("{name}: matrix entries must be finite")));
    }
    ComplexMatrix::from_rows(&rows).map_err(|e| bad_config(format!("{name}: {e}")))
}

pub fn matrix_to_spec(m: &ComplexMatrix) -> MatrixSpec {
    (0..m.rows())
        .map(|r| {
            (0..m.cols())
                .map(|c| {
                    let z = m[(r, c)];
                    [z.re, z.im]
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    pub d_h: usize,
    pub d_k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_h1: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_h2: Option<usize>,
}

/// A step function as configured: `breakpoints` starts at 0, `values[i]` is
/// the vector taken on `[breakpoints[i], breakpoints[i+1])`, the last value
/// extending to infinity.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepFunctionSpec {
    pub breakpoints: Vec<f64>,
    pub values: Vec<Vec<[f64; 2]>>,
}

impl StepFunctionSpec {
    pub fn constant(value: &[Complex64]) -> Self {
        StepFunctionSpec {
            breakpoints: vec![0.0],
            values: vec![value.iter().map(|z| [z.re, z.im]).collect()],
        }
    }

    fn build(&self, label: &str, dim_k: usize) -> Result<StepFunction, HarnessError> {
        let values: Vec<Vec<Complex64>> = self
            .values
            .iter()
            .map(|v| v.iter().map(|&[re, im]| c64(re, im)).collect())
            .collect();
        let f = StepFunction::new(self.breakpoints.clone(), values)
            .map_err(|e| bad_config(format!("{label}: {e}")))?;
        if f.dim_k() != dim_k {
            return Err(bad_config(format!(
                "{label} maps into C^{}, but the noise dimension is {dim_k}",
                f.dim_k()
            )));
        }
        Ok(f)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub f: StepFunctionSpec,
    pub g: StepFunctionSpec,
}

/// One side of a bipartite scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ComponentSpec {
    Rqi { h_s: MatrixSpec, h_p: MatrixSpec, v_d: MatrixSpec, h_sc: MatrixSpec },
    Zlw { z: MatrixSpec, l: MatrixSpec, w: MatrixSpec },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableEntry {
    pub h: f64,
    pub g: MatrixSpec,
}

/// The family a scenario evaluates, tagged by `kind`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilySpec {
    Rqi { h_s: MatrixSpec, h_p: MatrixSpec, v_d: MatrixSpec, h_sc: MatrixSpec },
    Bipartite { first: ComponentSpec, second: ComponentSpec },
    Preservation { c: MatrixSpec },
    RealizeIsometric { z: MatrixSpec, l: MatrixSpec, w: MatrixSpec },
    RealizeGeneral { t: MatrixSpec, z: MatrixSpec, l: MatrixSpec, w: MatrixSpec },
    RealizeUnitaryExp { a: MatrixSpec, b: MatrixSpec, d: MatrixSpec },
    #[serde(rename = "explicit_Gh_table")]
    ExplicitGhTable { entries: Vec<TableEntry>, limit: MatrixSpec },
}

/// Knobs for the pass flags attached to report rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// The final error must come in at or below this multiple of the first.
    pub decrease_factor: f64,
    /// Errors at or below this are treated as exact and pass outright.
    pub error_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { decrease_factor: 0.05, error_floor: 1e-13 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub dims: Dims,
    pub family: FamilySpec,
    pub test_functions: Vec<PairSpec>,
    pub horizon: f64,
    pub h_grid: Vec<f64>,
    #[serde(default)]
    pub time_grid_extra: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow_observable: Option<MatrixSpec>,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.dims.d_h == 0 || self.dims.d_k == 0 {
            return Err(bad_config("dims must be positive"));
        }
        match (self.dims.d_h1, self.dims.d_h2) {
            (None, None) => {}
            (Some(a), Some(b)) => {
                if a == 0 || b == 0 || a * b != self.dims.d_h {
                    return Err(bad_config(format!(
                        "d_h1 * d_h2 = {} does not match d_h = {}",
                        a * b,
                        self.dims.d_h
                    )));
                }
            }
            _ => return Err(bad_config("give both of d_h1, d_h2 or neither")),
        }
        if self.horizon <= 0.0 || !self.horizon.is_finite() {
            return Err(bad_config(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.h_grid.is_empty() {
            return Err(bad_config("h_grid is empty"));
        }
        for &h in &self.h_grid {
            if h <= 0.0 || !h.is_finite() {
                return Err(bad_config(format!("step sizes must be positive, got {h}")));
            }
        }
        for w in self.h_grid.windows(2) {
            if w[1] >= w[0] {
                return Err(bad_config(format!(
                    "h_grid must strictly decrease, got {} after {}",
                    w[1], w[0]
                )));
            }
        }
        let tol = &self.tolerances;
        if tol.decrease_factor <= 0.0 || tol.decrease_factor >= 1.0 || !tol.decrease_factor.is_finite() {
            return Err(bad_config(format!(
                "decrease_factor must lie in (0, 1), got {}",
                tol.decrease_factor
            )));
        }
        if tol.error_floor < 0.0 || !tol.error_floor.is_finite() {
            return Err(bad_config(format!(
                "error_floor must be nonnegative, got {}",
                tol.error_floor
            )));
        }
        self.check_finite()
    }

    /// Rejects configs with non-finite numeric leaves. JSON cannot spell NaN,
    /// but `1e999` parses as infinity and would otherwise slip through to the
    /// linear algebra (and could not be re-serialized).
    fn check_finite(&self) -> Result<(), HarnessError> {
        fn spec_ok(what: &str, m: &MatrixSpec) -> Result<(), HarnessError> {
            for row in m {
                for entry in row {
                    if !entry[0].is_finite() || !entry[1].is_finite() {
                        return Err(bad_config(format!("{what} has a non-finite entry")));
                    }
                }
            }
            Ok(())
        }
        fn component_ok(label: &str, c: &ComponentSpec) -> Result<(), HarnessError> {
            match c {
                ComponentSpec::Rqi { h_s, h_p, v_d, h_sc } => {
                    spec_ok(&format!("{label}.h_s"), h_s)?;
                    spec_ok(&format!("{label}.h_p"), h_p)?;
                    spec_ok(&format!("{label}.v_d"), v_d)?;
                    spec_ok(&format!("{label}.h_sc"), h_sc)
                }
                ComponentSpec::Zlw { z, l, w } => {
                    spec_ok(&format!("{label}.z"), z)?;
                    spec_ok(&format!("{label}.l"), l)?;
                    spec_ok(&format!("{label}.w"), w)
                }
            }
        }
        fn step_ok(what: &str, s: &StepFunctionSpec) -> Result<(), HarnessError> {
            if s.breakpoints.iter().any(|b| !b.is_finite()) {
                return Err(bad_config(format!("{what} has a non-finite breakpoint")));
            }
            for v in &s.values {
                for entry in v {
                    if !entry[0].is_finite() || !entry[1].is_finite() {
                        return Err(bad_config(format!("{what} has a non-finite value")));
                    }
                }
            }
            Ok(())
        }
        match &self.family {
            FamilySpec::Rqi { h_s, h_p, v_d, h_sc } => {
                spec_ok("h_s", h_s)?;
                spec_ok("h_p", h_p)?;
                spec_ok("v_d", v_d)?;
                spec_ok("h_sc", h_sc)?;
            }
            FamilySpec::Bipartite { first, second } => {
                component_ok("first", first)?;
                component_ok("second", second)?;
            }
            FamilySpec::Preservation { c } => spec_ok("c", c)?,
            FamilySpec::RealizeIsometric { z, l, w } => {
                spec_ok("z", z)?;
                spec_ok("l", l)?;
                spec_ok("w", w)?;
            }
            FamilySpec::RealizeGeneral { t, z, l, w } => {
                spec_ok("t", t)?;
                spec_ok("z", z)?;
                spec_ok("l", l)?;
                spec_ok("w", w)?;
            }
            FamilySpec::RealizeUnitaryExp { a, b, d } => {
                spec_ok("a", a)?;
                spec_ok("b", b)?;
                spec_ok("d", d)?;
            }
            FamilySpec::ExplicitGhTable { entries, limit } => {
                spec_ok("limit", limit)?;
                for (i, e) in entries.iter().enumerate() {
                    if !e.h.is_finite() || e.h <= 0.0 {
                        return Err(bad_config(format!(
                            "table entry {i} has step size {}",
                            e.h
                        )));
                    }
                    spec_ok(&format!("table entry {i}"), &e.g)?;
                }
            }
        }
        for (i, pair) in self.test_functions.iter().enumerate() {
            step_ok(&format!("test function pair {i}, f"), &pair.f)?;
            step_ok(&format!("test function pair {i}, g"), &pair.g)?;
        }
        if let Some(obs) = &self.flow_observable {
            spec_ok("flow_observable", obs)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario configs serialize")
    }
}

/// Deserializes and validates a scenario document.
pub fn parse_scenario_config(text: &str) -> Result<ScenarioConfig, HarnessError> {
    let cfg: ScenarioConfig =
        serde_json::from_str(text).map_err(|e| bad_config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn expect_dims(found: (usize, usize), configured: (usize, usize), what: &str) -> Result<(), HarnessError> {
    if found != configured {
        return Err(bad_config(format!(
            "{what} live on dims ({}, {}), config says ({}, {})",
            found.0, found.1, configured.0, configured.1
        )));
    }
    Ok(())
}

fn component_from_spec(
    spec: &ComponentSpec,
    label: &str,
) -> Result<BipartiteComponent, HarnessError> {
    let name = |field: &str| format!("{label}.{field}");
    Ok(match spec {
        ComponentSpec::Rqi { h_s, h_p, v_d, h_sc } => BipartiteComponent::Rqi(RQIParams {
            h_s: matrix_from_spec(h_s, &name("h_s"))?,
            h_p: matrix_from_spec(h_p, &name("h_p"))?,
            v_d: matrix_from_spec(v_d, &name("v_d"))?,
            h_sc: matrix_from_spec(h_sc, &name("h_sc"))?,
        }),
        ComponentSpec::Zlw { z, l, w } => BipartiteComponent::Zlw(GeneratorParams {
            z: matrix_from_spec(z, &name("z"))?,
            l: matrix_from_spec(l, &name("l"))?,
            w: matrix_from_spec(w, &name("w"))?,
        }),
    })
}

/// Steps within one part in 10¹² of a tabulated value select that entry.
fn step_matches(tabulated: f64, requested: f64) -> bool {
    (tabulated - requested).abs() <= 1e-12 * tabulated.max(requested)
}

/// Instantiates the family a config describes, structure checks included.
pub fn build_family(cfg: &ScenarioConfig) -> Result<GeneratorFamily, HarnessError> {
    let (dh, dk) = (cfg.dims.d_h, cfg.dims.d_k);
    match &cfg.family {
        FamilySpec::Rqi { h_s, h_p, v_d, h_sc } => {
            let p = RQIParams {
                h_s: matrix_from_spec(h_s, "h_s")?,
                h_p: matrix_from_spec(h_p, "h_p")?,
                v_d: matrix_from_spec(v_d, "v_d")?,
                h_sc: matrix_from_spec(h_sc, "h_sc")?,
            };
            expect_dims(p.dims()?, (dh, dk), "interaction data")?;
            Ok(rqi_family(&p)?)
        }
        FamilySpec::Bipartite { first, second } => {
            let (d1, d2) = match (cfg.dims.d_h1, cfg.dims.d_h2) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(bad_config("bipartite scenarios need d_h1 and d_h2")),
            };
            let c1 = component_from_spec(first, "first")?;
            let c2 = component_from_spec(second, "second")?;
            expect_dims(c1.dims()?, (d1, dk), "first component")?;
            expect_dims(c2.dims()?, (d2, dk), "second component")?;
            Ok(bipartite_family(&c1, &c2)?)
        }
        FamilySpec::Preservation { c } => {
            Ok(preservation_family(dh, dk, &matrix_from_spec(c, "c")?)?)
        }
        FamilySpec::RealizeIsometric { z, l, w } => {
            let p = GeneratorParams {
                z: matrix_from_spec(z, "z")?,
                l: matrix_from_spec(l, "l")?,
                w: matrix_from_spec(w, "w")?,
            };
            expect_dims(p.dims()?, (dh, dk), "parameters")?;
            Ok(realize_isometric(&p)?)
        }
        FamilySpec::RealizeGeneral { t, z, l, w } => {
            let p = GeneratorParams {
                z: matrix_from_spec(z, "z")?,
                l: matrix_from_spec(l, "l")?,
                w: matrix_from_spec(w, "w")?,
            };
            expect_dims(p.dims()?, (dh, dk), "parameters")?;
            let t = BlockOperator::new(dh, dk, matrix_from_spec(t, "t")?)?;
            Ok(realize_general(&t, &p)?)
        }
        FamilySpec::RealizeUnitaryExp { a, b, d } => {
            let q = QParams {
                a: matrix_from_spec(a, "a")?,
                b: matrix_from_spec(b, "b")?,
                d: matrix_from_spec(d, "d")?,
            };
            expect_dims(q.dims()?, (dh, dk), "exponent data")?;
            Ok(realize_unitary_exp(&q)?)
        }
        FamilySpec::ExplicitGhTable { entries, limit } => {
            if entries.is_empty() {
                return Err(bad_config("the step table is empty"));
            }
            let mut table: Vec<(f64, BlockOperator)> = Vec::with_capacity(entries.len());
            for (i, entry) in entries.iter().enumerate() {
                if entry.h <= 0.0 || !entry.h.is_finite() {
                    return Err(bad_config(format!(
                        "table entry {i} has step size {}",
                        entry.h
                    )));
                }
                if table.iter().any(|(h0, _)| step_matches(*h0, entry.h)) {
                    return Err(bad_config(format!("step size {} tabulated twice", entry.h)));
                }
                let m = matrix_from_spec(&entry.g, &format!("table entry {i}"))?;
                table.push((entry.h, BlockOperator::new(dh, dk, m)?));
            }
            let limit = BlockOperator::new(dh, dk, matrix_from_spec(limit, "limit")?)?;
            Ok(GeneratorFamily::new(
                move |h| {
                    table
                        .iter()
                        .find(|(h0, _)| step_matches(*h0, h))
                        .map(|(_, g)| g.clone())
                        .ok_or(ModelError::StepNotTabulated { h })
                },
                limit,
                FamilyKind::General,
            )?)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub pair_index: usize,
    pub h: f64,
    pub sup_error: f64,
    pub order_estimate: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceReport {
    pub rows: Vec<ReportRow>,
}

impl ConvergenceReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn pair_indices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.rows.iter().map(|r| r.pair_index).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn pair_rows(&self, pair: usize) -> Vec<&ReportRow> {
        self.rows.iter().filter(|r| r.pair_index == pair).collect()
    }
}

/// How many trailing `h`-values feed each order estimate.
pub const ORDER_WINDOW: usize = 4;

fn log_log_slope(hs: &[f64], errors: &[f64]) -> Option<f64> {
    if hs.len() != errors.len() || hs.len() < 2 {
        return None;
    }
    if hs.iter().chain(errors).any(|&v| v <= 0.0 || !v.is_finite()) {
        return None;
    }
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    Some(sxy / sxx)
}

/// Least-squares slope of `log error` against `log h` over all samples.
pub fn estimate_order(errors: &[f64], hs: &[f64]) -> Result<f64, HarnessError> {
    if errors.len() != hs.len() {
        return Err(HarnessError::OrderUndefined {
            context: format!("{} errors against {} step sizes", errors.len(), hs.len()),
        });
    }
    if errors.len() < 2 {
        return Err(HarnessError::OrderUndefined {
            context: "need at least two samples".into(),
        });
    }
    for &e in errors {
        if e <= 0.0 || !e.is_finite() {
            return Err(HarnessError::OrderUndefined {
                context: format!("errors must be positive, got {e}"),
            });
        }
    }
    for &h in hs {
        if h <= 0.0 || !h.is_finite() {
            return Err(HarnessError::OrderUndefined {
                context: format!("step sizes must be positive, got {h}"),
            });
        }
    }
    log_log_slope(hs, errors).ok_or_else(|| HarnessError::OrderUndefined {
        context: "step sizes are all equal".into(),
    })
}

/// The order estimate reported on the last row of a sweep: the slope over
/// the trailing window, `NaN` when fewer than two usable samples exist.
pub fn trailing_order(errors: &[f64], hs: &[f64]) -> Option<f64> {
    let lo = errors.len().saturating_sub(ORDER_WINDOW);
    log_log_slope(&hs[lo..], &errors[lo..])
}

/// Per-row order estimates: entry `i` is the trailing-window slope over the
/// first `i + 1` rows, `NaN` while fewer than two usable points exist.
pub fn rolling_orders(errors: &[f64], hs: &[f64]) -> Vec<f64> {
    (0..errors.len())
        .map(|i| trailing_order(&errors[..=i], &hs[..=i]).unwrap_or(f64::NAN))
        .collect()
}

/// Pass flags over one pair's error column: a row passes when its error
/// strictly decreases from the previous one (the first row passes by
/// convention), the last row additionally when the final error comes in at
/// or below `decrease_factor` times the first; errors at or below
/// `error_floor` pass outright.
pub fn pass_flags(errors: &[f64], tol: &Tolerances) -> Vec<bool> {
    let n = errors.len();
    (0..n)
        .map(|i| {
            let exact = errors[i] <= tol.error_floor;
            let mut ok = exact || i == 0 || errors[i] < errors[i - 1];
            if i + 1 == n && n > 1 {
                ok &= exact || errors[i] <= tol.decrease_factor * errors[0];
            }
            ok
        })
        .collect()
}

fn cell_error(
    family: &GeneratorFamily,
    f: &StepFunction,
    g: &StepFunction,
    h: f64,
    horizon: f64,
    extra: usize,
) -> Result<f64, HarnessError> {
    let g_h = family.evaluate(h)?;
    let grid = evaluation_grid(h, horizon, f, g, extra);
    let mut sup = 0.0f64;
    let mut product = ComplexMatrix::identity(g_h.dim_h());
    let mut steps_done = 0usize;
    for &t in &grid {
        let n = whole_steps(t, h);
        while steps_done < n {
            product = &product * &walk_step_matrix(&g_h, f, g, steps_done, h)?;
            steps_done += 1;
        }
        let tail = inner_product_integral(f, g, h * n as f64, t)?;
        let walk_el = product.scale(tail.exp());
        let coc_el = cocycle_matrix_element(family.limit(), f, g, t)?;
        sup = sup.max(op_norm(&(&walk_el - &coc_el))?);
    }
    Ok(sup)
}

fn worker_count(cells: usize) -> usize {
    let hw = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let cap = std::env::var("QWC_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(hw);
    cap.min(hw).min(cells).max(1)
}

/// Runs a scenario, splitting the `(pair, h)` cells across `threads`
/// workers. The report does not depend on the worker count: every cell is
/// evaluated independently and collected in a fixed order.
pub fn run_scenario_with_threads(
    cfg: &ScenarioConfig,
    threads: usize,
) -> Result<ConvergenceReport, HarnessError> {
    cfg.validate()?;
    if cfg.test_functions.is_empty() {
        return Err(bad_config("at least one test-function pair is required"));
    }
    let family = build_family(cfg)?;
    let pairs: Vec<(StepFunction, StepFunction)> = cfg
        .test_functions
        .iter()
        .enumerate()
        .map(|(i, p)| {
            Ok((
                p.f.build(&format!("pair {i} function f"), cfg.dims.d_k)?,
                p.g.build(&format!("pair {i} function g"), cfg.dims.d_k)?,
            ))
        })
        .collect::<Result<_, HarnessError>>()?;
    let hs = &cfg.h_grid;
    let cells: Vec<(usize, usize)> = (0..pairs.len())
        .flat_map(|p| (0..hs.len()).map(move |j| (p, j)))
        .collect();
    let mut results: Vec<Option<Result<f64, HarnessError>>> = Vec::new();
    results.resize_with(cells.len(), || None);

    let evaluate = |&(p, j): &(usize, usize)| {
        let (f, g) = &pairs[p];
        cell_error(&family, f, g, hs[j], cfg.horizon, cfg.time_grid_extra)
    };
    let threads = threads.clamp(1, cells.len().max(1));
    if threads <= 1 {
        for (slot, cell) in results.iter_mut().zip(&cells) {
            *slot = Some(evaluate(cell));
        }
    } else {
        let chunk = cells.len().div_ceil(threads);
        let evaluate = &evaluate;
        std::thread::scope(|scope| {
            for (cell_chunk, out_chunk) in cells.chunks(chunk).zip(results.chunks_mut(chunk)) {
                scope.spawn(move || {
                    for (slot, cell) in out_chunk.iter_mut().zip(cell_chunk) {
                        *slot = Some(evaluate(cell));
                    }
                });
            }
        });
    }

    let mut rows = Vec::with_capacity(cells.len());
    for p in 0..pairs.len() {
        let mut errors = Vec::with_capacity(hs.len());
        for j in 0..hs.len() {
            let cell = results[p * hs.len() + j].take().expect("every cell is evaluated");
            errors.push(cell?);
        }
        let orders = rolling_orders(&errors, hs);
        let flags = pass_flags(&errors, &cfg.tolerances);
        for j in 0..hs.len() {
            rows.push(ReportRow {
                pair_index: p,
                h: hs[j],
                sup_error: errors[j],
                order_estimate: orders[j],
                pass: flags[j],
            });
        }
    }
    Ok(ConvergenceReport { rows })
}

/// As [`run_scenario_with_threads`] with the worker count taken from the
/// `QWC_THREADS` environment variable, capped by the available parallelism.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ConvergenceReport, HarnessError> {
    let cells = cfg.test_functions.len() * cfg.h_grid.len();
    run_scenario_with_threads(cfg, worker_count(cells))
}

#[derive(Debug, Clone)]
pub struct FlowStep {
    pub h_coarse: f64,
    pub h_fine: f64,
    pub distance: f64,
}

/// Cauchy differences of vacuum flow elements along a halving step grid.
#[derive(Debug, Clone)]
pub struct FlowReport {
    pub steps: Vec<FlowStep>,
}

impl FlowReport {
    /// True when every difference is at most `factor` times the previous.
    pub fn contracting(&self, factor: f64) -> bool {
        self.steps.windows(2).all(|w| w[1].distance <= factor * w[0].distance)
    }
}

/// Evolves `flow_observable` with the scenario's walk to the horizon at each
/// step size, compresses to the vacuum sector and takes distances between
/// consecutive resolutions.
pub fn flow_cauchy_check(cfg: &ScenarioConfig) -> Result<FlowReport, HarnessError> {
    cfg.validate()?;
    let spec = cfg
        .flow_observable
        .as_ref()
        .ok_or_else(|| bad_config("flow check needs a flow_observable matrix"))?;
    let x = matrix_from_spec(spec, "flow_observable")?;
    if x.rows() != cfg.dims.d_h || x.cols() != cfg.dims.d_h {
        return Err(bad_config(format!(
            "flow_observable is {}x{}, the initial space has dimension {}",
            x.rows(),
            x.cols(),
            cfg.dims.d_h
        )));
    }
    if cfg.h_grid.len() < 2 {
        return Err(bad_config("flow check needs at least two step sizes"));
    }
    for w in cfg.h_grid.windows(2) {
        if !step_matches(0.5 * w[0], w[1]) {
            return Err(bad_config(format!(
                "flow check needs a halving grid, got {} after {}",
                w[1], w[0]
            )));
        }
    }
    let family = build_family(cfg)?;
    let elements: Vec<ComplexMatrix> = cfg
        .h_grid
        .iter()
        .map(|&h| -> Result<ComplexMatrix, HarnessError> {
            let g = family.evaluate(h)?;
            let n = whole_steps(cfg.horizon, h);
            Ok(toyfock_flow(&g, &x, n)?.vacuum_matrix_element())
        })
        .collect::<Result<_, _>>()?;
    let steps = cfg
        .h_grid
        .windows(2)
        .zip(elements.windows(2))
        .map(|(hw, ew)| -> Result<FlowStep, HarnessError> {
            Ok(FlowStep {
                h_coarse: hw[0],
                h_fine: hw[1],
                distance: op_norm(&(&ew[0] - &ew[1]))?,
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(FlowReport { steps })
}

pub const REPORT_CSV_HEADER: &str = "pair_index,h,sup_error,order_estimate,pass";

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Renders a report as CSV: fixed header, one row per `(pair, h)`, floats at
/// 17 significant digits, LF line endings. Identical reports give identical
/// bytes.
pub fn write_report_csv(report: &ConvergenceReport) -> String {
    let mut out = String::with_capacity(64 * (report.rows.len() + 1));
    out.push_str(REPORT_CSV_HEADER);
    out.push('\n');
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.pair_index,
            fmt_f64(r.h),
            fmt_f64(r.sup_error),
            fmt_f64(r.order_estimate),
            r.pass
        ));
    }
    out
}

fn malformed(line: usize, context: impl Into<String>) -> HarnessError {
    HarnessError::MalformedCsv { line, context: context.into() }
}

fn parse_field<T: std::str::FromStr>(s: &str, line: usize, what: &str) -> Result<T, HarnessError> {
    s.parse::<T>().map_err(|_| malformed(line, format!("cannot read {what} from {s:?}")))
}

pub fn parse_report_csv(text: &str) -> Result<ConvergenceReport, HarnessError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == REPORT_CSV_HEADER => {}
        Some((_, header)) => {
            return Err(malformed(1, format!("unexpected header {header:?}")));
        }
        None => return Err(malformed(1, "empty document")),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(malformed(line_no, format!("expected 5 fields, found {}", fields.len())));
        }
        let pair_index = parse_field::<usize>(fields[0], line_no, "a pair index")?;
        let h = parse_field::<f64>(fields[1], line_no, "a step size")?;
        if h <= 0.0 || !h.is_finite() {
            return Err(malformed(line_no, format!("step size {h} is not positive")));
        }
        let sup_error = parse_field::<f64>(fields[2], line_no, "an error")?;
        if sup_error < 0.0 || !sup_error.is_finite() {
            return Err(malformed(line_no, format!("error {sup_error} is negative")));
        }
        let order_estimate = parse_field::<f64>(fields[3], line_no, "an order")?;
        let pass = match fields[4] {
            "true" => true,
            "false" => false,
            other => return Err(malformed(line_no, format!("pass flag is {other:?}"))),
        };
        rows.push(ReportRow { pair_index, h, sup_error, order_estimate, pass });
    }
    Ok(ConvergenceReport { rows })
}

/// One line per pair: row count, final error, trailing order, verdict.
pub fn summarize_report(report: &ConvergenceReport) -> String {
    let mut out = String::new();
    for p in report.pair_indices() {
        let rows = report.pair_rows(p);
        let last = rows.last().expect("pairs listed from rows are nonempty");
        let verdict = if rows.iter().all(|r| r.pass) { "pass" } else { "FAIL" };
        out.push_str(&format!(
            "pair {p}: {} steps, final error {:.3e} at h = {:.3e}, order {:.3}, {verdict}\n",
            rows.len(),
            last.sup_error,
            last.h,
            last.order_estimate
        ));
    }
    out
}
