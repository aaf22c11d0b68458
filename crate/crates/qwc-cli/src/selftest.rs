//! The invariant suite behind `qwc selftest`.
//!
//! Every check reruns one of the library's core identities on fixed seeds and
//! prints a single `ok`/`FAIL` line with the measured residuals, so a broken
//! build fails loudly without needing the test harness around.

use num_complex::Complex64;
use qwc_core::block::BlockOperator;
use qwc_core::cocycle::{euler_compare, jgj_matrix_element_check, jgj_walk_element_check};
use qwc_core::harness::{
    estimate_order, matrix_to_spec, parse_report_csv, run_scenario, run_scenario_with_threads,
    write_report_csv, ConvergenceReport, Dims, FamilySpec, PairSpec, ScenarioConfig,
    StepFunctionSpec, Tolerances,
};
use qwc_core::holevo::{
    f_from_skew_params, holevo_transform, q_from_unitary_params, scalar, tau_exp_oracle,
};
use qwc_core::ito::{
    assemble_fzlw, compose_params, dual_generator, series_product, structure_report,
    GeneratorParams, StructureClass,
};
use qwc_core::mat::{c64, herm_eig, mat_exp, op_norm, positive_part, real_part, ComplexMatrix};
use qwc_core::models::{rqi_family, RQIParams};
use qwc_core::sample::Sampler;
use qwc_core::walk::{toyfock_walk, StepFunction};
use std::f64::consts::TAU;
use std::process::ExitCode;

type Check = fn() -> Result<String, String>;

pub fn run() -> ExitCode {
    let checks: &[(&str, Check)] = &[
        ("series product monoid laws", series_product_monoid_laws),
        ("parameter composition", parameter_composition),
        ("structure classification", structure_classification),
        ("transform vs exponential oracle", transform_oracle),
        ("skew-data round trip", skew_round_trip),
        ("scalar calibration identities", scalar_identities),
        ("Euler product convergence", euler_products),
        ("interaction limit closed forms", interaction_limits),
        ("walk convergence scenario", walk_convergence),
        ("exponential and walk norm bounds", norm_bounds),
        ("noise-embedding consistency", noise_embeddings),
        ("report round trip and determinism", report_determinism),
    ];
    let mut failed = 0usize;
    for (name, check) in checks {
        match check() {
            Ok(detail) => println!("ok   {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("selftest: {} passed, {failed} failed", checks.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(crate::EXIT_FAIL)
    }
}

fn ensure(ok: bool, detail: String) -> Result<String, String> {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

const DIM_CYCLE: [(usize, usize); 6] = [(1, 1), (1, 2), (2, 1), (2, 2), (3, 1), (2, 3)];

fn gap(a: &BlockOperator, b: &BlockOperator) -> f64 {
    op_norm(&(a.matrix() - b.matrix())).expect("finite operators")
}

fn random_block(s: &mut Sampler, dim_h: usize, dim_k: usize, scale: f64) -> BlockOperator {
    let n = dim_h * (1 + dim_k);
    BlockOperator::new(dim_h, dim_k, s.matrix(n, n, scale)).expect("matching dims")
}

/// Hermitian matrix with spectrum inside `[0.05, 2π − 0.15]`.
fn bounded_phases(s: &mut Sampler, n: usize) -> ComplexMatrix {
    let h0 = s.hermitian(n, 1.0);
    let (eigs, _) = herm_eig(&h0).expect("hermitian input");
    let (lo, hi) = (eigs[0], eigs[eigs.len() - 1]);
    let squeeze = ((TAU - 0.2) / (hi - lo).max(1e-3)).min(1.0);
    let base = (&h0 - &ComplexMatrix::identity(n).scale(c64(lo, 0.0))).scale(c64(squeeze, 0.0));
    &base + &ComplexMatrix::identity(n).scale(c64(0.05, 0.0))
}

fn step_spec(s: &mut Sampler, dim_k: usize, breaks: &[f64]) -> StepFunctionSpec {
    let values = breaks
        .iter()
        .map(|_| s.vector(dim_k, 0.8).iter().map(|z| [z.re, z.im]).collect())
        .collect();
    StepFunctionSpec { breakpoints: breaks.to_vec(), values }
}

fn scenario(
    dims: (usize, usize),
    family: FamilySpec,
    pairs: Vec<PairSpec>,
    h_grid: Vec<f64>,
) -> ScenarioConfig {
    ScenarioConfig {
        dims: Dims { d_h: dims.0, d_k: dims.1, d_h1: None, d_h2: None },
        family,
        test_functions: pairs,
        horizon: 1.0,
        h_grid,
        time_grid_extra: 0,
        seed: 7,
        tolerances: Tolerances::default(),
        flow_observable: None,
    }
}

fn series_product_monoid_laws() -> Result<String, String> {
    let mut s = Sampler::new(201);
    let mut worst = 0.0f64;
    for i in 0..60 {
        let (dh, dk) = DIM_CYCLE[i % DIM_CYCLE.len()];
        let f1 = random_block(&mut s, dh, dk, 0.6);
        let f2 = random_block(&mut s, dh, dk, 0.6);
        let f3 = random_block(&mut s, dh, dk, 0.6);
        let assoc = gap(
            &series_product(&series_product(&f1, &f2).unwrap(), &f3).unwrap(),
            &series_product(&f1, &series_product(&f2, &f3).unwrap()).unwrap(),
        );
        let zero = BlockOperator::zeros(dh, dk);
        let ident = gap(&series_product(&zero, &f1).unwrap(), &f1)
            .max(gap(&series_product(&f1, &zero).unwrap(), &f1));
        let invol = gap(
            &dual_generator(&series_product(&f1, &f2).unwrap()),
            &series_product(&dual_generator(&f2), &dual_generator(&f1)).unwrap(),
        );
        worst = worst.max(assoc).max(ident).max(invol);
    }
    ensure(worst <= 1e-12, format!("max residual {worst:.3e} over 60 triples (tol 1e-12)"))
}

fn parameter_composition() -> Result<String, String> {
    let mut s = Sampler::new(202);
    let mut worst = 0.0f64;
    for i in 0..20 {
        let (dh, dk) = DIM_CYCLE[i % DIM_CYCLE.len()];
        let dm = dh * dk;
        let p1 = GeneratorParams {
            z: s.matrix(dh, dh, 0.8),
            l: s.matrix(dm, dh, 0.8),
            w: s.unitary(dm),
        };
        let p2 = s.generator_params(dh, dk, 0.8);
        let composed = assemble_fzlw(&compose_params(&p1, &p2).unwrap()).unwrap();
        let direct =
            series_product(&assemble_fzlw(&p1).unwrap(), &assemble_fzlw(&p2).unwrap()).unwrap();
        worst = worst.max(gap(&composed, &direct));
    }
    for i in 0..10 {
        let (dh, dk) = DIM_CYCLE[i % DIM_CYCLE.len()];
        let dm = dh * dk;
        let zs: Vec<ComplexMatrix> = (0..6).map(|_| s.matrix(dh, dh, 0.8)).collect();
        let l = s.matrix(dm, dh, 0.8);
        let w = s.matrix(dm, dm, 0.8);
        let zero_l = ComplexMatrix::zeros(dm, dh);
        let eye = ComplexMatrix::identity(dm);
        let factor = |z: &ComplexMatrix, l: &ComplexMatrix, w: &ComplexMatrix| {
            assemble_fzlw(&GeneratorParams { z: z.clone(), l: l.clone(), w: w.clone() }).unwrap()
        };
        let stages = [
            factor(&zs[0], &zero_l, &eye),
            factor(&zs[1], &zero_l, &eye),
            factor(&zs[2], &l, &eye),
            factor(&zs[3], &zero_l, &eye),
            factor(&zs[4], &zero_l, &w),
            factor(&zs[5], &zero_l, &eye),
        ];
        let chain = stages[1..]
            .iter()
            .fold(stages[0].clone(), |acc, f| series_product(&acc, f).unwrap());
        let z_total = zs[1..].iter().fold(zs[0].clone(), |acc, z| &acc + z);
        let collapsed =
            assemble_fzlw(&GeneratorParams { z: z_total, l: l.clone(), w: w.clone() }).unwrap();
        worst = worst.max(gap(&chain, &collapsed));
    }
    ensure(
        worst <= 1e-12,
        format!("closed form and six-factor chains match to {worst:.3e} (tol 1e-12)"),
    )
}

fn structure_classification() -> Result<String, String> {
    let mut s = Sampler::new(203);
    let mut all_unitary = true;
    let mut worst_defect = 0.0f64;
    for i in 0..10 {
        let (dh, dk) = DIM_CYCLE[i % DIM_CYCLE.len()];
        let dm = dh * dk;
        let p = GeneratorParams {
            z: s.hermitian(dh, 1.0).scale(c64(0.0, 1.0)),
            l: s.matrix(dm, dh, 1.0),
            w: s.unitary(dm),
        };
        let f = assemble_fzlw(&p).unwrap();
        let report = structure_report(&f, 1e-10).unwrap();
        all_unitary &= report.classification == StructureClass::Unitary;
        worst_defect = worst_defect.max(report.iso_defect).max(report.coiso_defect);
    }
    let mut worst_beta = 0.0f64;
    for i in 0..10 {
        let (dh, dk) = DIM_CYCLE[i % DIM_CYCLE.len()];
        let dm = dh * dk;
        let p = GeneratorParams {
            z: s.matrix(dh, dh, 1.0),
            l: s.matrix(dm, dh, 1.0),
            w: s.contraction(dm, dm),
        };
        let report = structure_report(&assemble_fzlw(&p).unwrap(), 1e-12).unwrap();
        let beta = report.beta0.ok_or("contractive scattering should admit a growth bound")?;
        let (eigs, _) = herm_eig(&real_part(&p.z)).unwrap();
        worst_beta = worst_beta.max((beta - eigs[eigs.len() - 1]).abs());
    }
    ensure(
        all_unitary && worst_defect <= 1e-10 && worst_beta <= 1e-8,
        format!(
            "unitary classification {all_unitary}, max defect {worst_defect:.3e} (tol 1e-10), growth-bound error {worst_beta:.3e} (tol 1e-8)"
        ),
    )
}

fn transform_oracle() -> Result<String, String> {
    let mut s = Sampler::new(204);
    let mut worst_oracle = 0.0f64;
    let mut worst_adjoint = 0.0f64;
    for i in 0..30 {
        let (dh, dk) = DIM_CYCLE[i % DIM_CYCLE.len()];
        let n = dh * (1 + dk);
        let m = s.matrix(n, n, 1.0);
        let q =
            BlockOperator::new(dh, dk, m.scale(c64(5.0 / (1.0 + op_norm(&m).unwrap()), 0.0)))
                .unwrap();
        let transformed = holevo_transform(&q).unwrap();
        worst_oracle = worst_oracle.max(gap(&transformed, &tau_exp_oracle(&q).unwrap()));
        worst_adjoint = worst_adjoint
            .max(gap(&holevo_transform(&q.adjoint()).unwrap(), &transformed.adjoint()));
    }
    let mut worst_skew = 0.0f64;
    for i in 0..10 {
        let (dh, dk) = DIM_CYCLE[i % DIM_CYCLE.len()];
        let q = BlockOperator::new(dh, dk, s.skewadjoint(dh * (1 + dk), 1.0)).unwrap();
        let report = structure_report(&holevo_transform(&q).unwrap(), 1e-10).unwrap();
        worst_skew = worst_skew.max(report.iso_defect).max(report.coiso_defect);
    }
    ensure(
        worst_oracle <= 1e-10 && worst_adjoint <= 1e-12 && worst_skew <= 1e-10,
        format!(
            "oracle residual {worst_oracle:.3e} (tol 1e-10), adjoint residual {worst_adjoint:.3e} (tol 1e-12), unitary defect for skew arguments {worst_skew:.3e} (tol 1e-10)"
        ),
    )
}

fn skew_round_trip() -> Result<String, String> {
    let mut s = Sampler::new(205);
    let mut worst = 0.0f64;
    for i in 0..15 {
        let (dh, dk) = DIM_CYCLE[i % DIM_CYCLE.len()];
        let dm = dh * dk;
        let w = if i % 5 == 0 {
            ComplexMatrix::identity(dm)
        } else {
            mat_exp(&bounded_phases(&mut s, dm).scale(c64(0.0, 1.0))).unwrap()
        };
        let l = s.matrix(dm, dh, 1.0);
        let z = s.hermitian(dh, 1.0).scale(c64(0.0, 1.0));
        let p = GeneratorParams { z, l, w };
        let f = assemble_fzlw(&p).unwrap();
        let q = q_from_unitary_params(&p).unwrap();
        let recovered = assemble_fzlw(&f_from_skew_params(&q).unwrap()).unwrap();
        worst = worst.max(gap(&recovered, &f));
    }
    ensure(worst <= 1e-9, format!("max reconstruction gap {worst:.3e} over 15 instances (tol 1e-9)"))
}

fn scalar_identities() -> Result<String, String> {
    let mut s = Sampler::new(206);
    let rel =
        |x: Complex64, y: Complex64| (x - y).norm() / (1.0 + x.norm().max(y.norm()));
    let one = c64(1.0, 0.0);
    let mut worst = 0.0f64;
    for _ in 0..30 {
        let raw = s.complex(1.0);
        let z = raw.scale(5.0 / (1.0 + raw.norm()));
        worst = worst.max(rel(one + z * scalar::e2(z), scalar::e1(z)));
        worst = worst.max(rel(z + z * z * scalar::e2(z), scalar::e0(z) - one));
        worst = worst.max(rel(scalar::e1(-z) * scalar::e0(z), scalar::e1(z)));
        worst = worst.max(rel(scalar::e1(-z) * scalar::e1(z) * 0.5 + scalar::e(z), scalar::e2(z)));
        for n in [1u32, 2, 4, 8, 16, 32, 64] {
            let nf = f64::from(n);
            let w = nf * (z - one);
            worst = worst.max(rel(z.powu(n) - one, w + w * scalar::p_n(n, w) * w));
            worst = worst
                .max(rel(nf * (scalar::e0(z / nf) - one) - z, scalar::e2(z / nf) * z * z / nf));
        }
    }
    let mut circle_worst = 0.0f64;
    for &t in &[0.0, 1e-8, 5e-4, 0.01, 0.5, 1.0, TAU / 4.0, TAU / 2.0, 4.0, 6.0, TAU - 0.05] {
        let it = c64(0.0, t);
        let ea = scalar::e_a(t);
        let eb = scalar::e_b(t);
        circle_worst = circle_worst.max((ea.conj() + ea).norm());
        if t >= 1e-6 {
            circle_worst = circle_worst.max((scalar::e1(it) * eb - one).norm());
            circle_worst = circle_worst.max((eb.conj() * scalar::e1(it) - scalar::e0(it)).norm());
            circle_worst = circle_worst.max((eb.norm_sqr() * scalar::e(it) - ea).norm());
        } else {
            circle_worst = circle_worst.max(ea.norm()).max((eb - one).norm());
        }
    }
    ensure(
        worst <= 1e-10 && circle_worst <= 1e-10,
        format!(
            "phi-identity residual {worst:.3e}, circle-identity residual {circle_worst:.3e} (tol 1e-10)"
        ),
    )
}

fn euler_products() -> Result<String, String> {
    let hs: Vec<f64> = (4..=10).map(|k| 0.5f64.powi(k)).collect();
    let a = ComplexMatrix::from_rows(&[vec![c64(0.9, 0.4)]]).unwrap();
    let e = ComplexMatrix::from_rows(&[vec![c64(-0.3, 0.2)]]).unwrap();
    let errors: Vec<f64> = hs
        .iter()
        .map(|&h| {
            (1..=8)
                .map(|i| {
                    let endpoint = f64::from(i) / 8.0;
                    euler_compare(&a, |hh| &a + &e.scale(c64(hh, 0.0)), h, 0.0, endpoint).unwrap()
                })
                .fold(0.0f64, f64::max)
        })
        .collect();
    let order = estimate_order(&errors, &hs).map_err(|e| e.to_string())?;
    let spot =
        euler_compare(&ComplexMatrix::identity(1), |_| ComplexMatrix::identity(1), 0.1, 0.0, 1.0)
            .unwrap();
    let expected = (1.1f64.powi(10) - std::f64::consts::E).abs();
    let spot_err = (spot - expected).abs();
    ensure(
        (order - 1.0).abs() <= 0.3 && spot_err <= 1e-6,
        format!("fitted order {order:.3} (target 1.0 +/- 0.3), spot error {spot_err:.3e} (tol 1e-6)"),
    )
}

fn interaction_limits() -> Result<String, String> {
    let mut s = Sampler::new(207);
    let p = RQIParams {
        h_s: s.hermitian(2, 0.7),
        h_p: s.hermitian(2, 0.7),
        v_d: s.matrix(2, 2, 0.7),
        h_sc: s.hermitian(2, 0.7),
    };
    let fam = rqi_family(&p).map_err(|e| e.to_string())?;
    let omega = ComplexMatrix::identity(2).scale(c64(p.omega(), 0.0));
    let q = BlockOperator::from_blocks(2, 1, &(&p.h_s + &omega), &p.v_d.adjoint(), &p.v_d, &p.h_sc)
        .unwrap()
        .scale(c64(0.0, -1.0));
    let transform_gap = gap(fam.limit(), &holevo_transform(&q).unwrap());

    let mut dipole_only = p.clone();
    dipole_only.h_sc = ComplexMatrix::zeros(2, 2);
    let shifted =
        &dipole_only.h_s + &ComplexMatrix::identity(2).scale(c64(dipole_only.omega(), 0.0));
    let dipole_closed = assemble_fzlw(&GeneratorParams {
        z: shifted.scale(c64(0.0, -1.0)),
        l: dipole_only.v_d.scale(c64(0.0, -1.0)),
        w: ComplexMatrix::identity(2),
    })
    .unwrap();
    let dipole_gap = gap(rqi_family(&dipole_only).unwrap().limit(), &dipole_closed);

    ensure(
        transform_gap <= 1e-10 && dipole_gap <= 1e-10,
        format!(
            "limit vs transform gap {transform_gap:.3e}, dipole-only closed form gap {dipole_gap:.3e} (tol 1e-10)"
        ),
    )
}

fn walk_convergence() -> Result<String, String> {
    let mut s = Sampler::new(208);
    let c = matrix_to_spec(&s.unitary(4));
    let pair =
        PairSpec { f: step_spec(&mut s, 2, &[0.0, 0.4]), g: step_spec(&mut s, 2, &[0.0, 0.4]) };
    let cfg = scenario(
        (2, 2),
        FamilySpec::Preservation { c },
        vec![pair],
        (3..=9).map(|k| 0.5f64.powi(k)).collect(),
    );
    let report = run_scenario(&cfg).map_err(|e| e.to_string())?;
    let rows = report.pair_rows(0);
    let first = rows.first().map(|r| r.sup_error).unwrap_or(f64::NAN);
    let last = rows.last().map(|r| r.sup_error).unwrap_or(f64::NAN);
    ensure(
        report.all_pass(),
        format!("sup error {first:.2e} -> {last:.2e} over h = 2^-3..2^-9 (strict decrease, final <= 0.05 x first)"),
    )
}

fn norm_bounds() -> Result<String, String> {
    let mut s = Sampler::new(209);
    let mut exp_margin = 0.0f64;
    for i in 0..40 {
        let raw = s.matrix(3, 3, 1.0);
        let target = 4.0 * (f64::from(i) + 1.0) / 40.0;
        let z = raw.scale(c64(target / op_norm(&raw).unwrap().max(1e-12), 0.0));
        let lhs = op_norm(&mat_exp(&z).unwrap()).unwrap();
        let rhs = op_norm(&positive_part(&z).unwrap()).unwrap().exp();
        exp_margin = exp_margin.max(lhs - rhs);
    }
    let mut walk_margin = 0.0f64;
    for (dh, dk, max_n) in [(2usize, 1usize, 5usize), (1, 2, 4)] {
        let g = random_block(&mut s, dh, dk, 1.0);
        let g_norm = op_norm(g.matrix()).unwrap();
        for n in 0..=max_n {
            let walk_norm = op_norm(toyfock_walk(&g, n).unwrap().matrix()).unwrap();
            let bound = g_norm.powi(i32::try_from(n).unwrap());
            walk_margin = walk_margin.max((walk_norm - bound) / (1.0 + bound));
        }
    }
    ensure(
        exp_margin <= 1e-10 && walk_margin <= 1e-10,
        format!(
            "exp bound excess {exp_margin:.3e}, walk bound excess {walk_margin:.3e} (slack 1e-10)"
        ),
    )
}

fn noise_embeddings() -> Result<String, String> {
    let mut worst = 0.0f64;
    for seed in 0..6u64 {
        let mut s = Sampler::new(2100 + seed);
        let dh = 1 + (seed as usize % 2);
        let d_small = 1 + (seed as usize / 2 % 2);
        let d_big = d_small + 1;
        let u = s.unitary(d_big);
        let j = ComplexMatrix::from_fn(d_big, d_small, |r, c| u[(r, c)]);
        let f_big = random_block(&mut s, dh, d_big, 0.6);
        let f = StepFunction::new(
            vec![0.0, 0.4],
            vec![s.vector(d_small, 0.8), s.vector(d_small, 0.8)],
        )
        .unwrap();
        let g = StepFunction::constant(s.vector(d_small, 0.8));
        worst = worst.max(jgj_matrix_element_check(&f_big, &j, &f, &g, 0.9).unwrap());
        worst = worst.max(jgj_walk_element_check(&f_big, &j, &f, &g, 0.25, 0.9).unwrap());
    }
    ensure(
        worst <= 1e-12,
        format!("max cocycle/walk element discrepancy {worst:.3e} over 6 embeddings (tol 1e-12)"),
    )
}

fn report_determinism() -> Result<String, String> {
    let mut s = Sampler::new(211);
    let c = matrix_to_spec(&s.unitary(4));
    let pair =
        PairSpec { f: step_spec(&mut s, 2, &[0.0, 0.4]), g: step_spec(&mut s, 2, &[0.0]) };
    let cfg = scenario(
        (2, 2),
        FamilySpec::Preservation { c },
        vec![pair],
        (3..=6).map(|k| 0.5f64.powi(k)).collect(),
    );
    let csv1 = write_report_csv(&run_scenario(&cfg).map_err(|e| e.to_string())?);
    let csv2 = write_report_csv(&run_scenario(&cfg).map_err(|e| e.to_string())?);
    let csv3 =
        write_report_csv(&run_scenario_with_threads(&cfg, 1).map_err(|e| e.to_string())?);
    let reparsed: ConvergenceReport = parse_report_csv(&csv1).map_err(|e| e.to_string())?;
    let round_trip = write_report_csv(&reparsed) == csv1;
    ensure(
        csv1 == csv2 && csv1 == csv3 && round_trip,
        format!(
            "{} bytes identical across reruns and thread counts, CSV round trip exact: {round_trip}",
            csv1.len()
        ),
    )
}
