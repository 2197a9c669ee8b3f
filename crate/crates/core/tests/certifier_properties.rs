use dissicert::certifier::{
    build_dissipativity_lmi, build_permutation, certify, storage_to_state, verify_certificate_on_model, CertifyOptions,
    PriorKnowledge, Verdict,
};
use dissicert::datamat::hankel;
use dissicert::lti::{random_controllable_system, random_inputs, random_vector, uy_to_w};
use dissicert::qdf::{QdfCoeff, SupplyRate};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn lmi_diagonal_is_the_dissipation_inequality(
        n in 1usize..3, d in 1usize..4, gamma in 0.1f64..5.0, seed in 0u64..10_000,
    ) {
        let sys = random_controllable_system(n, 1, 1, seed).unwrap();
        let w = sys.simulate(&random_vector(n, seed + 1), &random_inputs(1, 25, seed + 2)).unwrap().trajectory;
        let h = hankel(&w, d + 1).unwrap();
        let supply = SupplyRate::l2_gain(1, 1, gamma).unwrap();
        let r = random_vector(4 * d * d, seed + 3);
        let a = DMatrix::from_column_slice(2 * d, 2 * d, r.as_slice());
        let psi = QdfCoeff::new(2, (&a + a.transpose()) * 0.5).unwrap();
        let lmi = build_dissipativity_lmi(h.matrix(), &supply, d, 2).unwrap().apply(psi.psi());
        let phi = supply.coeff().padded(d + 1).unwrap();
        for j in 0..h.matrix().ncols() {
            let expected = phi.eval(&w, j).unwrap() - (psi.eval(&w, j + 1).unwrap() - psi.eval(&w, j).unwrap());
            let scale = 1.0 + psi.psi().amax() * w.window(j, d + 1).unwrap().norm_squared() * (1.0 + gamma * gamma);
            prop_assert!((lmi[(j, j)] - expected).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn permutation_interleaves_windows(m in 1usize..3, p in 1usize..3, d in 0usize..4, seed in 0u64..10_000) {
        let pi = build_permutation(m, p, d).pi;
        prop_assert_eq!(&pi, &uy_to_w(m, p, d));
        prop_assert_eq!(&pi * pi.transpose(), DMatrix::identity((m + p) * d, (m + p) * d));
        if d > 0 {
            let sys = random_controllable_system(1, m, p, seed).unwrap();
            let w = sys.simulate(&random_vector(1, seed), &random_inputs(m, d, seed + 1)).unwrap().trajectory;
            let mut uy = DVector::zeros((m + p) * d);
            uy.rows_mut(0, m * d).copy_from(&w.input_window(0, d).unwrap());
            uy.rows_mut(m * d, p * d).copy_from(&w.output_window(0, d).unwrap());
            prop_assert_eq!(&pi * uy, w.window(0, d).unwrap());
        }
    }
}

#[test]
fn certificates_are_sound_and_match_state_storage() {
    let mut certified = 0;
    let mut refused = 0;
    for seed in 0..30u64 {
        let n = 1 + (seed % 3) as usize;
        let sys = random_controllable_system(n, 1, 1, seed).unwrap();
        let sim = sys.simulate(&random_vector(n, seed + 50), &random_inputs(1, 80, seed + 90)).unwrap();
        let gamma = if seed % 2 == 0 { 20.0 } else { 0.05 };
        let supply = SupplyRate::l2_gain(1, 1, gamma).unwrap();
        let prior = PriorKnowledge::new(1, 1, n + 1).unwrap();
        let report = certify(&sim.trajectory, &prior, &supply, &CertifyOptions::default()).unwrap();
        assert!(report.rank_report.rank_condition_met, "seed {seed}");
        match report.verdict {
            Verdict::Certified => {
                let cert = report.certificate.unwrap();
                assert!(cert.psi.degree() < report.d as isize);
                assert!(cert.lmi_margins.psi_min_eig >= -cert.lmi_margins.tolerance);
                let p = storage_to_state(&cert.psi, &sys, report.d).unwrap();
                assert!(verify_certificate_on_model(&sys, &supply, &p).unwrap(), "seed {seed}");
                let padded = cert.psi.padded(report.d).unwrap();
                for t in 0..sim.trajectory.len() - report.d {
                    let lhs = padded.eval(&sim.trajectory, t).unwrap();
                    let rhs = sim.states[t].dot(&(&p * &sim.states[t]));
                    assert!((lhs - rhs).abs() <= 1e-7 * (1.0 + lhs.abs()), "seed {seed} t {t}");
                }
                certified += 1;
            }
            Verdict::NotCertified => {
                assert!(report.conclusive && report.certificate.is_none());
                refused += 1;
            }
            other => panic!("seed {seed}: unexpected {other:?}"),
        }
    }
    assert!(certified >= 10 && refused >= 10, "{certified} certified, {refused} refused");
}

#[test]
fn facial_reduction_does_not_change_verdicts() {
    for seed in 0..10u64 {
        let sys = random_controllable_system(2, 1, 1, seed).unwrap();
        let w = sys.simulate(&random_vector(2, seed), &random_inputs(1, 60, seed + 7)).unwrap().trajectory;
        let supply = SupplyRate::l2_gain(1, 1, if seed % 2 == 0 { 30.0 } else { 0.05 }).unwrap();
        let prior = PriorKnowledge::new(1, 1, 2).unwrap();
        let on = certify(&w, &prior, &supply, &CertifyOptions::default()).unwrap();
        let off_opts = CertifyOptions {
            facial_reduction: false,
            ..CertifyOptions::default()
        };
        let off = certify(&w, &prior, &supply, &off_opts).unwrap();
        assert_ne!(on.verdict, Verdict::Undecided, "seed {seed}");
        if off.verdict != Verdict::Undecided {
            assert_eq!(on.verdict, off.verdict, "seed {seed}");
        }
    }
}

#[test]
fn short_or_poor_data_is_not_informative() {
    let sys = random_controllable_system(2, 1, 1, 4).unwrap();
    let supply = SupplyRate::l2_gain(1, 1, 10.0).unwrap();
    let prior = PriorKnowledge::new(1, 1, 2).unwrap().with_n_min(2);
    let short = sys.simulate(&random_vector(2, 1), &random_inputs(1, 6, 2)).unwrap().trajectory;
    let r = certify(&short, &prior, &supply, &CertifyOptions::default()).unwrap();
    assert_eq!(r.verdict, Verdict::NotInformative);
    assert!(!r.rank_report.rank_condition_met);
    assert_eq!(r.verdict.exit_code(), 2);
    assert!(r.solver.is_none() && r.certificate.is_none());

    let constant = vec![DVector::from_element(1, 1.0); 40];
    let flat = sys.simulate(&random_vector(2, 1), &constant).unwrap().trajectory;
    let r = certify(&flat, &prior, &supply, &CertifyOptions::default()).unwrap();
    assert_eq!(r.verdict, Verdict::NotInformative);
}

#[test]
fn prior_validation() {
    assert!(PriorKnowledge::new(0, 1, 1).is_err());
    let w = random_controllable_system(1, 1, 1, 0)
        .unwrap()
        .simulate(&random_vector(1, 0), &random_inputs(1, 20, 1))
        .unwrap()
        .trajectory;
    let mismatched = PriorKnowledge::new(1, 2, 1).unwrap();
    let supply = SupplyRate::l2_gain(1, 2, 1.0).unwrap();
    assert!(certify(&w, &mismatched, &supply, &CertifyOptions::default()).is_err());
}
