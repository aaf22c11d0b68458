//! Randomised invariant checks.
//!
//! Each property draws a seed (and sometimes dimensions or scalar data) from
//! proptest and feeds it through [`Sampler`] to obtain structured matrices.
//! Shrinking then acts on the seed, which is enough to pin down a failing
//! instance reproducibly.

use proptest::prelude::*;
use qwc_core::block::BlockOperator;
use qwc_core::cocycle::{jgj_matrix_element_check, jgj_walk_element_check};
use qwc_core::harness::{
    estimate_order, parse_report_csv, pass_flags, trailing_order, write_report_csv,
    ConvergenceReport, ReportRow, Tolerances,
};
use qwc_core::holevo::{
    f_from_skew_params, holevo_transform, q_from_unitary_params, scalar, tau_exp_oracle,
};
use qwc_core::ito::{
    assemble_fzlw, compose_params, dual_generator, series_product, structure_report,
    GeneratorParams, StructureClass,
};
use qwc_core::mat::{c64, herm_eig, mat_exp, op_norm, positive_part, real_part, ComplexMatrix};
use qwc_core::sample::Sampler;
use qwc_core::walk::{inner_product_integral, toyfock_walk, StepFunction};

fn gap(a: &BlockOperator, b: &BlockOperator) -> f64 {
    op_norm(&(a.matrix() - b.matrix())).expect("finite operators")
}

fn random_block(s: &mut Sampler, dim_h: usize, dim_k: usize, scale: f64) -> BlockOperator {
    let n = dim_h * (1 + dim_k);
    BlockOperator::new(dim_h, dim_k, s.matrix(n, n, scale)).expect("matching dims")
}

fn small_dims() -> impl Strategy<Value = (usize, usize)> {
    (1usize..=3, 1usize..=3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn series_product_is_associative(seed in any::<u64>(), (dh, dk) in small_dims()) {
        let mut s = Sampler::new(seed);
        let f1 = random_block(&mut s, dh, dk, 1.0);
        let f2 = random_block(&mut s, dh, dk, 1.0);
        let f3 = random_block(&mut s, dh, dk, 1.0);
        let left = series_product(&series_product(&f1, &f2).unwrap(), &f3).unwrap();
        let right = series_product(&f1, &series_product(&f2, &f3).unwrap()).unwrap();
        let size = 1.0
            + op_norm(f1.matrix()).unwrap()
                * op_norm(f2.matrix()).unwrap()
                * op_norm(f3.matrix()).unwrap();
        prop_assert!(gap(&left, &right) <= 1e-12 * size);
    }

    #[test]
    fn zero_is_neutral_for_the_series_product(seed in any::<u64>(), (dh, dk) in small_dims()) {
        let mut s = Sampler::new(seed);
        let f = random_block(&mut s, dh, dk, 1.0);
        let zero = BlockOperator::zeros(dh, dk);
        prop_assert!(gap(&series_product(&zero, &f).unwrap(), &f) <= 1e-14);
        prop_assert!(gap(&series_product(&f, &zero).unwrap(), &f) <= 1e-14);
    }

    #[test]
    fn adjoints_reverse_series_products(seed in any::<u64>(), (dh, dk) in small_dims()) {
        let mut s = Sampler::new(seed);
        let f1 = random_block(&mut s, dh, dk, 1.0);
        let f2 = random_block(&mut s, dh, dk, 1.0);
        let left = dual_generator(&series_product(&f1, &f2).unwrap());
        let right = series_product(&dual_generator(&f2), &dual_generator(&f1)).unwrap();
        prop_assert!(gap(&left, &right) <= 1e-13);
    }

    #[test]
    fn parameter_composition_matches_the_product_for_isometric_first_factors(
        seed in any::<u64>(),
        (dh, dk) in small_dims(),
    ) {
        let mut s = Sampler::new(seed);
        let dm = dh * dk;
        let p1 = GeneratorParams {
            z: s.matrix(dh, dh, 1.0),
            l: s.matrix(dm, dh, 1.0),
            w: s.unitary(dm),
        };
        let p2 = s.generator_params(dh, dk, 1.0);
        let composed = assemble_fzlw(&compose_params(&p1, &p2).unwrap()).unwrap();
        let direct =
            series_product(&assemble_fzlw(&p1).unwrap(), &assemble_fzlw(&p2).unwrap()).unwrap();
        prop_assert!(gap(&composed, &direct) <= 1e-12);
    }

    #[test]
    fn staged_factor_chains_collapse_to_a_single_generator(
        seed in any::<u64>(),
        (dh, dk) in small_dims(),
    ) {
        let mut s = Sampler::new(seed);
        let dm = dh * dk;
        let zs: Vec<ComplexMatrix> = (0..6).map(|_| s.matrix(dh, dh, 1.0)).collect();
        let l = s.matrix(dm, dh, 1.0);
        let w = s.matrix(dm, dm, 1.0);
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
        let collapsed = factor(&z_total, &l, &w);
        prop_assert!(gap(&chain, &collapsed) <= 1e-12);
    }

    #[test]
    fn skew_and_unitary_data_certify_unitary_generators(
        seed in any::<u64>(),
        (dh, dk) in small_dims(),
    ) {
        let mut s = Sampler::new(seed);
        let f = assemble_fzlw(&s.unitary_generator_params(dh, dk)).unwrap();
        let report = structure_report(&f, 1e-10).unwrap();
        prop_assert_eq!(report.classification, StructureClass::Unitary);
        prop_assert!(report.iso_defect <= 1e-10);
        prop_assert!(report.coiso_defect <= 1e-10);
    }

    #[test]
    fn the_growth_bound_tracks_the_top_eigenvalue_of_re_z(
        seed in any::<u64>(),
        (dh, dk) in small_dims(),
    ) {
        let mut s = Sampler::new(seed);
        let dm = dh * dk;
        let p = GeneratorParams {
            z: s.matrix(dh, dh, 1.0),
            l: s.matrix(dm, dh, 1.0),
            w: s.contraction(dm, dm),
        };
        let f = assemble_fzlw(&p).unwrap();
        let report = structure_report(&f, 1e-12).unwrap();
        let beta = report.beta0.expect("contractive scattering admits a growth bound");
        let (eigs, _) = herm_eig(&real_part(&p.z)).unwrap();
        let top = eigs.last().copied().unwrap();
        prop_assert!((beta - top).abs() <= 1e-8);
    }

    #[test]
    fn the_transform_matches_its_exponential_oracle(
        seed in any::<u64>(),
        (dh, dk) in small_dims(),
    ) {
        let mut s = Sampler::new(seed);
        let n = dh * (1 + dk);
        let m = s.matrix(n, n, 1.0);
        let q = BlockOperator::new(
            dh,
            dk,
            m.scale(c64(5.0 / (1.0 + op_norm(&m).unwrap()), 0.0)),
        )
        .unwrap();
        let transformed = holevo_transform(&q).unwrap();
        let oracle = tau_exp_oracle(&q).unwrap();
        prop_assert!(gap(&transformed, &oracle) <= 1e-10);
        let of_adjoint = holevo_transform(&q.adjoint()).unwrap();
        prop_assert!(gap(&of_adjoint, &transformed.adjoint()) <= 1e-12);
    }

    #[test]
    fn transforms_of_skewadjoint_arguments_generate_unitaries(
        seed in any::<u64>(),
        (dh, dk) in small_dims(),
    ) {
        let mut s = Sampler::new(seed);
        let n = dh * (1 + dk);
        let q = BlockOperator::new(dh, dk, s.skewadjoint(n, 1.0)).unwrap();
        let f = holevo_transform(&q).unwrap();
        let report = structure_report(&f, 1e-10).unwrap();
        prop_assert_eq!(report.classification, StructureClass::Unitary);
    }

    #[test]
    fn unitary_parameters_round_trip_through_skew_data(
        seed in any::<u64>(),
        (dh, dk) in small_dims(),
        identity_scattering in any::<bool>(),
    ) {
        let mut s = Sampler::new(seed);
        let dm = dh * dk;
        let w = if identity_scattering {
            ComplexMatrix::identity(dm)
        } else {
            let h0 = s.hermitian(dm, 1.0);
            let (eigs, _) = herm_eig(&h0).unwrap();
            let (lo, hi) = (eigs[0], eigs[eigs.len() - 1]);
            let span = (hi - lo).max(1e-3);
            let squeeze = ((std::f64::consts::TAU - 0.2) / span).min(1.0);
            let phases =
                (&h0 - &ComplexMatrix::identity(dm).scale(c64(lo, 0.0))).scale(c64(squeeze, 0.0));
            mat_exp(&phases.scale(c64(0.0, 1.0))).unwrap()
        };
        let l = s.matrix(dm, dh, 1.0);
        let z = s.hermitian(dh, 1.0).scale(c64(0.0, 1.0));
        let p = GeneratorParams { z, l, w };
        let f = assemble_fzlw(&p).unwrap();
        let q = q_from_unitary_params(&p).unwrap();
        let recovered = assemble_fzlw(&f_from_skew_params(&q).unwrap()).unwrap();
        prop_assert!(gap(&recovered, &f) <= 1e-9);
    }

    #[test]
    fn walk_powers_never_beat_the_norm_power_bound(
        seed in any::<u64>(),
        dh in 1usize..=2,
        dk in 1usize..=2,
        steps in 0usize..=4,
    ) {
        let mut s = Sampler::new(seed);
        let g = random_block(&mut s, dh, dk, 1.0);
        let walk = toyfock_walk(&g, steps).unwrap();
        let walk_norm = op_norm(walk.matrix()).unwrap();
        let bound = op_norm(g.matrix()).unwrap().powi(steps as i32);
        prop_assert!(walk_norm <= bound * (1.0 + 1e-10) + 1e-10);
    }

    #[test]
    fn noise_embeddings_preserve_matrix_elements(
        seed in any::<u64>(),
        dh in 1usize..=2,
        d_small in 1usize..=2,
        extra in 1usize..=2,
    ) {
        let mut s = Sampler::new(seed);
        let d_big = d_small + extra;
        let u = s.unitary(d_big);
        let j = ComplexMatrix::from_fn(d_big, d_small, |i, k| u[(i, k)]);
        let f_big = random_block(&mut s, dh, d_big, 0.6);
        let f = StepFunction::new(
            vec![0.0, 0.4],
            vec![s.vector(d_small, 0.8), s.vector(d_small, 0.8)],
        )
        .unwrap();
        let g = StepFunction::constant(s.vector(d_small, 0.8));
        prop_assert!(jgj_matrix_element_check(&f_big, &j, &f, &g, 0.9).unwrap() <= 1e-12);
        prop_assert!(jgj_walk_element_check(&f_big, &j, &f, &g, 0.25, 0.9).unwrap() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(192))]

    #[test]
    fn phi_identities_hold_across_the_disc(
        radius in 0.0f64..1.0,
        angle in 0.0f64..std::f64::consts::TAU,
        n in prop::sample::select(vec![1u32, 2, 4, 8, 16, 32, 64]),
    ) {
        let z = c64(radius.sqrt() * 5.0 * angle.cos(), radius.sqrt() * 5.0 * angle.sin());
        let one = c64(1.0, 0.0);
        let rel = |x: num_complex::Complex64, y: num_complex::Complex64| {
            (x - y).norm() / (1.0 + x.norm().max(y.norm()))
        };
        prop_assert!(rel(one + z * scalar::e2(z), scalar::e1(z)) <= 1e-10);
        prop_assert!(rel(z + z * z * scalar::e2(z), scalar::e0(z) - one) <= 1e-10);
        prop_assert!(rel(scalar::e1(-z) * scalar::e0(z), scalar::e1(z)) <= 1e-10);
        prop_assert!(
            rel(scalar::e1(-z) * scalar::e1(z) * 0.5 + scalar::e(z), scalar::e2(z)) <= 1e-10
        );
        let nf = f64::from(n);
        let w = nf * (z - one);
        prop_assert!(rel(z.powu(n) - one, w + w * scalar::p_n(n, w) * w) <= 1e-10);
        prop_assert!(
            rel(nf * (scalar::e0(z / nf) - one) - z, scalar::e2(z / nf) * z * z / nf) <= 1e-10
        );
    }

    #[test]
    fn circle_identities_hold_up_to_the_pole(t in 1e-6f64..(std::f64::consts::TAU - 0.05)) {
        let it = c64(0.0, t);
        let ea = scalar::e_a(t);
        let eb = scalar::e_b(t);
        prop_assert!((ea.conj() + ea).norm() <= 1e-10);
        prop_assert!((scalar::e1(it) * eb - c64(1.0, 0.0)).norm() <= 1e-10);
        prop_assert!((eb.conj() * scalar::e1(it) - scalar::e0(it)).norm() <= 1e-10);
        prop_assert!((eb.norm_sqr() * scalar::e(it) - ea).norm() <= 1e-10);
    }

    #[test]
    fn exponential_norms_obey_the_positive_part_bound(
        seed in any::<u64>(),
        n in 1usize..=5,
        target in 0.1f64..4.0,
    ) {
        let mut s = Sampler::new(seed);
        let raw = s.matrix(n, n, 1.0);
        let z = raw.scale(c64(target / op_norm(&raw).unwrap().max(1e-12), 0.0));
        let lhs = op_norm(&mat_exp(&z).unwrap()).unwrap();
        let rhs = op_norm(&positive_part(&z).unwrap()).unwrap().exp();
        prop_assert!(lhs <= rhs + 1e-10);
    }

    #[test]
    fn integrals_add_over_adjacent_windows(
        seed in any::<u64>(),
        dim in 1usize..=2,
        cuts in prop::collection::vec(0.0f64..2.5, 3),
    ) {
        let mut s = Sampler::new(seed);
        let mut points = cuts;
        points.sort_by(f64::total_cmp);
        let (a, b, c) = (points[0], points[1], points[2]);
        let breaks = vec![0.0, 0.7, 1.6];
        let f = StepFunction::new(breaks.clone(), (0..3).map(|_| s.vector(dim, 1.0)).collect())
            .unwrap();
        let g = StepFunction::new(breaks, (0..3).map(|_| s.vector(dim, 1.0)).collect()).unwrap();
        let split: Vec<_> = f
            .integrate(a, b)
            .iter()
            .zip(f.integrate(b, c))
            .map(|(x, y)| x + y)
            .collect();
        let whole = f.integrate(a, c);
        for (x, y) in split.iter().zip(&whole) {
            prop_assert!((x - y).norm() <= 1e-12);
        }
        let paired = inner_product_integral(&f, &g, a, b).unwrap()
            + inner_product_integral(&f, &g, b, c).unwrap();
        prop_assert!((paired - inner_product_integral(&f, &g, a, c).unwrap()).norm() <= 1e-12);
    }

    #[test]
    fn order_estimates_recover_random_power_laws(
        order in 0.3f64..2.5,
        log_amplitude in -6.0f64..2.0,
        start in 1u32..=4,
        len in 3usize..=7,
    ) {
        let amplitude = 10f64.powf(log_amplitude);
        let hs: Vec<f64> = (0..len).map(|i| 0.5f64.powi(start as i32 + i as i32)).collect();
        let errors: Vec<f64> = hs.iter().map(|h| amplitude * h.powf(order)).collect();
        let fitted = estimate_order(&errors, &hs).unwrap();
        prop_assert!((fitted - order).abs() <= 1e-6);
        let tail = trailing_order(&errors, &hs).expect("clean power-law data");
        prop_assert!((tail - order).abs() <= 1e-6);
    }

    #[test]
    fn decreasing_runs_with_a_final_collapse_always_pass(
        first in 1e-3f64..1.0,
        ratios in prop::collection::vec(0.3f64..0.8, 3..7),
    ) {
        let mut errors = vec![first];
        for r in &ratios {
            errors.push(errors.last().unwrap() * r);
        }
        let floor = 0.04 * first;
        if *errors.last().unwrap() > floor {
            *errors.last_mut().unwrap() = floor;
        }
        let flags = pass_flags(&errors, &Tolerances::default());
        prop_assert!(flags.iter().all(|&ok| ok));
    }

    #[test]
    fn a_single_upward_jump_fails_exactly_that_row(
        first in 1e-3f64..1.0,
        ratios in prop::collection::vec(0.3f64..0.8, 4..7),
        jump_at in 1usize..=3,
    ) {
        let mut errors = vec![first];
        for r in &ratios {
            errors.push(errors.last().unwrap() * r);
        }
        let floor = 0.04 * first;
        if *errors.last().unwrap() > floor {
            *errors.last_mut().unwrap() = floor;
        }
        errors[jump_at] = errors[jump_at - 1] * 1.5;
        let flags = pass_flags(&errors, &Tolerances::default());
        for (i, &ok) in flags.iter().enumerate() {
            prop_assert_eq!(ok, i != jump_at, "row {} of {:?}", i, errors);
        }
    }

    #[test]
    fn csv_reports_survive_a_round_trip(
        rows in prop::collection::vec(
            (
                0usize..8,
                prop::num::f64::POSITIVE | prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL,
                prop::num::f64::POSITIVE
                    | prop::num::f64::NORMAL
                    | prop::num::f64::SUBNORMAL
                    | prop::num::f64::ZERO,
                prop::num::f64::ANY,
                any::<bool>(),
            ),
            0..12,
        ),
    ) {
        let report = ConvergenceReport {
            rows: rows
                .into_iter()
                .filter(|(_, h, e, _, _)| h.is_finite() && e.is_finite())
                .map(|(pair_index, h, sup_error, order_estimate, pass)| ReportRow {
                    pair_index,
                    h,
                    sup_error,
                    order_estimate,
                    pass,
                })
                .collect(),
        };
        let text = write_report_csv(&report);
        let reparsed = parse_report_csv(&text).unwrap();
        prop_assert_eq!(write_report_csv(&reparsed), text);
    }
}
