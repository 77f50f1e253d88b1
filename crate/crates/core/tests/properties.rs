use nalgebra::DMatrix;
use proptest::prelude::*;

use tissue_qlv::constitutive::{ElasticLaw, StrainMeasure};
use tissue_qlv::io::{format_value, parse_series, render_series, SeriesTable, FULL_PRECISION};
use tissue_qlv::kernels::{
    fung_to_prony, kelvin_creep, kelvin_relaxation, FungSpectrum, KelvinParams, PronySpectrum, ReducedRelaxation,
};
use tissue_qlv::network::{elastic_energy, flexibility_from_stiffness, stability_check, Stability};
use tissue_qlv::protocols::{run_relaxation, RelaxationSpec, Sampling};
use tissue_qlv::qlv::{
    hysteresis_ratio, loop_area, max_relative_deviation, qlv_stress_direct_with, qlv_stress_fast, DirectKernel,
    QlvModel, StrainHistory,
};

fn prony_terms() -> impl Strategy<Value = (f64, Vec<(f64, f64)>)> {
    (0.0..2.0f64, prop::collection::vec((0.0..2.0f64, 1e-3..1e3f64), 1..8))
}

fn spd(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0..1.0f64, n * n).prop_map(move |v| {
        let a = DMatrix::from_vec(n, n, v);
        &a * a.transpose() + DMatrix::identity(n, n) * 0.05
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn normalized_prony_starts_at_one_and_decays((k, terms) in prony_terms(), t in 0.0..100.0f64, dt in 0.0..10.0f64) {
        prop_assume!(k + terms.iter().map(|t| t.0).sum::<f64>() > 1e-6);
        let s = PronySpectrum::new(k, terms).unwrap().normalized().unwrap();
        prop_assert!((s.value(0.0) - 1.0).abs() <= 1e-14);
        prop_assert!(s.value(t + dt) <= s.value(t));
        prop_assert!(s.value(t) >= s.equilibrium() - 1e-15);
    }

    #[test]
    fn fung_prony_weights_sum_to_one(c in 0.01..10.0f64, q1 in 1e-3..1.0f64, ratio in 2.0..1e5f64, n in 1usize..128) {
        let s = fung_to_prony(&FungSpectrum::new(c, q1, q1 * ratio).unwrap(), n).unwrap();
        let total = s.equilibrium() + s.terms().iter().map(|t| t.amplitude).sum::<f64>();
        prop_assert!((total - 1.0).abs() <= 1e-13);
        prop_assert_eq!(s.len(), n);
    }

    #[test]
    fn kelvin_relaxation_and_creep_are_monotone(e_r in 0.1..10.0f64, tau in 1e-2..1e2f64, ratio in 1.001..100.0f64, t in 1e-3..1e3f64) {
        let p = KelvinParams::new(e_r, tau, tau * ratio).unwrap();
        let later = t * 1.5;
        prop_assert!(kelvin_relaxation(&p, later) <= kelvin_relaxation(&p, t));
        prop_assert!(kelvin_creep(&p, later) >= kelvin_creep(&p, t));
        prop_assert!(kelvin_relaxation(&p, t) >= p.relaxed_modulus() * (1.0 - 1e-12));
    }

    #[test]
    fn exponential_law_inverts(b in 0.1..20.0f64, c in 0.1..10.0f64, lambda in 1.0..1.5f64) {
        let law = ElasticLaw::exponential(b, c).unwrap();
        let t = law.stress(lambda).unwrap();
        let back = law.invert(t, 1.0).unwrap();
        prop_assert!((back - lambda).abs() <= 1e-10 * lambda);
    }

    #[test]
    fn elastic_kernel_reproduces_elastic_stress(b in 0.5..5.0f64, c in 0.5..5.0f64, amp in 0.0..0.2f64, w in 0.1..10.0f64) {
        let law = ElasticLaw::exponential(b, c).unwrap();
        let model = QlvModel::elastic(law);
        let h = StrainHistory::uniform(0.01, 200, StrainMeasure::Stretch, |t| 1.0 + amp * (w * t).sin().abs()).unwrap();
        let fast = qlv_stress_fast(&model, &h).unwrap();
        let direct = qlv_stress_direct_with(&model, &h, DirectKernel::Exact).unwrap();
        for ((lambda, f), d) in h.stretches().iter().zip(&fast.values).zip(&direct.values) {
            let te = law.stress(*lambda).unwrap();
            prop_assert!((f - te).abs() <= 1e-12 * te.abs().max(1.0));
            prop_assert!((d - te).abs() <= 1e-12 * te.abs().max(1.0));
        }
    }

    #[test]
    fn fast_matches_direct_on_prony_kernels((k, terms) in prony_terms(), amp in 0.01..0.2f64, w in 0.5..5.0f64) {
        let terms: Vec<(f64, f64)> = terms.into_iter().map(|(a, q)| (a, 1.0 / q.max(0.1))).collect();
        let spectrum = PronySpectrum::new(k + 0.01, terms).unwrap().normalized().unwrap();
        let model = QlvModel::from_prony(ElasticLaw::linear(2.0).unwrap(), &spectrum).unwrap();
        let h = StrainHistory::uniform(1e-3, 1001, StrainMeasure::Stretch, |t| 1.0 + amp * (w * t).sin()).unwrap();
        let fast = qlv_stress_fast(&model, &h).unwrap();
        let direct = qlv_stress_direct_with(&model, &h, DirectKernel::Prony).unwrap();
        prop_assert!(max_relative_deviation(&fast.values, &direct.values) <= 1e-5);
    }

    #[test]
    fn relaxation_series_has_one_row_per_stride(duration in 0.0..5.0f64, dt in 1e-3..0.1f64, stride in 1usize..20) {
        let sampling = Sampling::new(duration, dt, stride).unwrap();
        let model = QlvModel::new(ElasticLaw::linear(1.0).unwrap(), ReducedRelaxation::kelvin(&KelvinParams::new(1.0, 0.5, 2.0).unwrap()), 0).unwrap();
        let out = run_relaxation(&RelaxationSpec { stretch: 1.1, sampling }, &model).unwrap();
        prop_assert_eq!(out.series.time.len(), sampling.rows());
        prop_assert_eq!(out.series.stress.len(), sampling.rows());
        prop_assert!(out.series.stress.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn csv_round_trips_at_full_precision(values in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO, 1..40)) {
        let mut table = SeriesTable::new(["time", "x"]);
        for (i, v) in values.iter().enumerate() {
            table.push_row(vec![i as f64 * 0.1, *v]).unwrap();
        }
        let text = render_series(&table, FULL_PRECISION).unwrap();
        let back = parse_series(&text, "mem").unwrap();
        for (a, b) in table.rows().iter().zip(back.rows()) {
            prop_assert_eq!(a[1].to_bits() == b[1].to_bits() || (a[1] == 0.0 && b[1] == 0.0), true);
        }
    }

    #[test]
    fn rounded_values_keep_their_digits(v in -1e6..1e6f64, p in 1usize..17) {
        let s = format_value(v, p).unwrap();
        let back: f64 = s.parse().unwrap();
        prop_assert!((back - v).abs() <= v.abs() * 10f64.powi(1 - p as i32));
    }

    #[test]
    fn spd_matrices_are_stable_and_invertible(k in (1usize..7).prop_flat_map(spd), x in prop::collection::vec(-1.0..1.0f64, 7)) {
        let n = k.nrows();
        prop_assert_eq!(stability_check(&k).unwrap(), Stability::Stable);
        let c = flexibility_from_stiffness(&k).unwrap();
        let eye = &k * &c;
        prop_assert!((eye - DMatrix::identity(n, n)).amax() <= 1e-8);
        let q = nalgebra::DVector::from_column_slice(&x[..n]);
        prop_assert!(elastic_energy(&k, &q).unwrap() >= 0.0);
    }

    #[test]
    fn negated_spd_fails_at_the_first_minor(k in (1usize..7).prop_flat_map(spd)) {
        match stability_check(&(-k)).unwrap() {
            Stability::Unstable { minor, value } => {
                prop_assert_eq!(minor, 1);
                prop_assert!(value < 0.0);
            }
            Stability::Stable => prop_assert!(false, "negative definite matrix accepted"),
        }
    }

    #[test]
    fn loop_area_ignores_translation(pts in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 3..20), dx in -5.0..5.0f64, dy in -5.0..5.0f64) {
        let shifted: Vec<(f64, f64)> = pts.iter().map(|(x, y)| (x + dx, y + dy)).collect();
        prop_assert!((loop_area(&pts) - loop_area(&shifted)).abs() <= 1e-9);
    }

    #[test]
    fn coincident_branches_have_no_hysteresis(slope in 0.1..10.0f64, curve in 0.0..5.0f64) {
        let loading: Vec<(f64, f64)> = (0..=50).map(|i| {
            let x = i as f64 / 50.0;
            (x, slope * x + curve * x * x)
        }).collect();
        let unloading: Vec<(f64, f64)> = loading.iter().rev().copied().collect();
        prop_assert!(hysteresis_ratio(&loading, &unloading).unwrap().abs() <= 1e-12);
    }
}
