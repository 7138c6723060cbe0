//! Property tests for metrics, spectra and response integration.

use filtersel::filters::{integrate_responses, make_uniform_bank, FilterBank, FilterCurve, Shape};
use filtersel::metrics::{
    build_adjacency, spectral_angle, spectral_correlation_angle, spectral_information_divergence,
    MetricId,
};
use filtersel::spectra::{Spectrum, SpectrumSet, WavelengthGrid};
use filtersel::FilterMatrix;
use proptest::prelude::*;

fn positive_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..100.0, len)
}

fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..12).prop_flat_map(|n| (positive_vec(n), positive_vec(n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn metrics_are_symmetric_nonnegative_and_zero_on_identical((u, v) in pair()) {
        for metric in [
            MetricId::SpectralAngle,
            MetricId::SpectralInformationDivergence,
            MetricId::SpectralCorrelationAngle,
        ] {
            let d = match metric.distance(&u, &v) {
                Ok(d) => d,
                // random vectors of equal entries have zero variance
                Err(_) => continue,
            };
            prop_assert!(d >= 0.0 && d.is_finite());
            let back = metric.distance(&v, &u).unwrap();
            prop_assert!((d - back).abs() <= 1e-12);
            if let Ok(same) = metric.distance(&u, &u) {
                prop_assert!(same.abs() <= 1e-7, "{metric}: {same}");
            }
        }
    }

    #[test]
    fn angle_and_sid_are_scale_invariant((u, v) in pair(), alpha in 1e-3f64..1e3) {
        let su: Vec<f64> = u.iter().map(|x| alpha * x).collect();
        let a = spectral_angle(&u, &v).unwrap();
        prop_assert!((spectral_angle(&su, &v).unwrap() - a).abs() <= 1e-9);
        prop_assert!(spectral_angle(&su, &u).unwrap() <= 1e-9);
        let s = spectral_information_divergence(&u, &v).unwrap();
        prop_assert!((spectral_information_divergence(&su, &v).unwrap() - s).abs() <= 1e-9);
        prop_assert!(spectral_information_divergence(&su, &u).unwrap() <= 1e-9);
    }

    #[test]
    fn angle_of_nonnegative_vectors_is_at_most_right((u, v) in pair()) {
        let a = spectral_angle(&u, &v).unwrap();
        prop_assert!((0.0..=std::f64::consts::FRAC_PI_2 + 1e-15).contains(&a));
    }

    #[test]
    fn near_parallel_inputs_never_produce_nan(u in positive_vec(6), eps in -1e-12f64..1e-12, sign in prop::bool::ANY) {
        let s = if sign { 1.0 } else { -1.0 };
        let v: Vec<f64> = u.iter().enumerate().map(|(i, x)| s * x * (1.0 + if i == 0 { eps } else { 0.0 })).collect();
        let a = spectral_angle(&u, &v).unwrap();
        prop_assert!(!a.is_nan());
        if sign {
            prop_assert!(a <= 1e-9);
        } else {
            prop_assert!((a - std::f64::consts::PI).abs() <= 1e-9);
        }
        let c = spectral_correlation_angle(&u, &v);
        if let Ok(c) = c {
            prop_assert!(!c.is_nan());
        }
    }

    #[test]
    fn adjacency_is_exactly_symmetric(rows in (2usize..8, 2usize..6).prop_flat_map(|(n, m)| prop::collection::vec(positive_vec(m), n))) {
        let f = FilterMatrix::from_rows_unlabeled(rows).unwrap();
        for metric in [MetricId::SpectralAngle, MetricId::SpectralInformationDivergence] {
            let a = build_adjacency(&f, metric).unwrap();
            for i in 0..a.len() {
                prop_assert_eq!(a.get(i, i), 0.0);
                for j in 0..a.len() {
                    prop_assert_eq!(a.get(i, j).to_bits(), a.get(j, i).to_bits());
                    prop_assert!(a.get(i, j) >= 0.0);
                }
            }
        }
    }
}

fn grid() -> WavelengthGrid {
    WavelengthGrid::uniform(400.0, 500.0, 1.0).unwrap()
}

fn spectrum_strategy() -> impl Strategy<Value = Spectrum> {
    positive_vec(101).prop_map(|v| Spectrum::new(grid(), v, "s").unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn normalization_is_idempotent_and_scale_free(s in spectrum_strategy(), alpha in 1e-3f64..1e3) {
        let n = s.l2_normalize();
        let norm: f64 = n.values().iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!((norm - 1.0).abs() <= 1e-12);
        let nn = n.l2_normalize();
        let scaled = s.scaled(alpha).unwrap().l2_normalize();
        for ((a, b), c) in n.values().iter().zip(nn.values()).zip(scaled.values()) {
            prop_assert!((a - b).abs() <= 1e-12);
            prop_assert!((a - c).abs() <= 1e-12);
        }
    }

    #[test]
    fn averaging_commutes_with_scaling(a in spectrum_strategy(), b in spectrum_strategy(), alpha in 0.1f64..10.0) {
        let set = SpectrumSet::new(vec![a.clone(), b.clone()]).unwrap();
        let scaled = SpectrumSet::new(vec![a.scaled(alpha).unwrap(), b.scaled(alpha).unwrap()]).unwrap();
        let m1 = set.average_by_class();
        let m2 = scaled.average_by_class();
        for (x, y) in m1.spectra()[0].values().iter().zip(m2.spectra()[0].values()) {
            prop_assert!((alpha * x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }

    #[test]
    fn resample_is_exact_on_shared_points(s in spectrum_strategy(), step in 1usize..7) {
        let coarse: Vec<f64> = grid().samples().iter().step_by(step).copied().collect();
        let coarse = WavelengthGrid::new(coarse).unwrap();
        let r = s.resample(&coarse);
        for (x, v) in coarse.samples().iter().zip(r.values()) {
            let i = grid().samples().iter().position(|g| g == x).unwrap();
            prop_assert_eq!(*v, s.values()[i]);
        }
    }

    #[test]
    fn responses_are_bilinear(s in spectrum_strategy(), alpha in 0.1f64..10.0, beta in 0.05f64..1.0) {
        let g = grid();
        let bank = make_uniform_bank(3, (400.0, 500.0), 20.0, Shape::Gaussian, &g).unwrap();
        let base = integrate_responses(&bank, &SpectrumSet::new(vec![s.clone()]).unwrap());
        let brighter = integrate_responses(&bank, &SpectrumSet::new(vec![s.scaled(alpha).unwrap()]).unwrap());
        let dimmer: Vec<FilterCurve> = bank.filters().iter().map(|f| f.scaled(beta).unwrap()).collect();
        let dimmer = integrate_responses(&FilterBank::new(dimmer).unwrap(), &SpectrumSet::new(vec![s]).unwrap());
        for i in 0..3 {
            let f = base.get(i, 0);
            prop_assert!(f >= 0.0);
            prop_assert!((brighter.get(i, 0) - alpha * f).abs() <= 1e-9 * (alpha * f).max(1.0));
            prop_assert!((dimmer.get(i, 0) - beta * f).abs() <= 1e-9 * (beta * f).max(1.0));
        }
    }
}

#[test]
fn halving_grid_step_barely_moves_gaussian_responses() {
    let smooth = |g: &WavelengthGrid| {
        let v = g
            .samples()
            .iter()
            .map(|x| {
                1.0 + 0.5 * ((x - 400.0) / 60.0).sin() + 0.3 * (-((x - 620.0) / 40.0).powi(2)).exp()
            })
            .collect();
        SpectrumSet::new(vec![Spectrum::new(g.clone(), v, "smooth").unwrap()]).unwrap()
    };
    let coarse = WavelengthGrid::uniform(350.0, 800.0, 2.0).unwrap();
    let fine = WavelengthGrid::uniform(350.0, 800.0, 1.0).unwrap();
    for bw in [10.0, 20.0, 50.0] {
        let bank_c = make_uniform_bank(8, (380.0, 780.0), bw, Shape::Gaussian, &coarse).unwrap();
        let bank_f = make_uniform_bank(8, (380.0, 780.0), bw, Shape::Gaussian, &fine).unwrap();
        let rc = integrate_responses(&bank_c, &smooth(&coarse));
        let rf = integrate_responses(&bank_f, &smooth(&fine));
        for i in 0..8 {
            let rel = (rc.get(i, 0) - rf.get(i, 0)).abs() / rf.get(i, 0);
            assert!(rel < 0.005, "bw {bw} filter {i}: {rel}");
        }
    }
}
