use gauge_forge::dynamics::{
    canonical_momenta, explicit_divergence_f2, field_tensors, hamiltonian_gauge, Variant,
};
use gauge_forge::gaugemap::{
    eval_gauge_map, inverse_base, transform_base, transform_fields, transform_gauge_a,
    transform_momenta_pq, CouplingData, GaugeMapSpec, MomentumState,
};
use gauge_forge::tensoralg::{CMat, CVec, LorentzCoVec, LorentzTensor2, Metric};
use gauge_forge::verifier::{
    control_map, perturbed_coupling, random_scenario, rel, run_suite, CheckId, Scenario,
    MASS_PERTURBATION,
};
use gauge_forge::{Order, SpacetimePoint, C64};
use proptest::prelude::*;

fn with_metric(mut s: Scenario, metric: Metric) -> Scenario {
    s.coupling =
        CouplingData::new(s.coupling.g(), s.coupling.mass_matrix().clone(), metric).unwrap();
    s
}

fn mat_close(a: &CMat, b: &CMat, tol: f64) -> bool {
    a.values()
        .iter()
        .zip(b.values())
        .all(|(x, y)| rel(*x, y) <= tol)
}

fn vec_close(a: &CVec, b: &CVec, tol: f64) -> bool {
    a.values()
        .iter()
        .zip(b.values())
        .all(|(x, y)| rel(*x, y) <= tol)
}

#[test]
fn random_scenarios_pass_under_both_signatures() {
    for metric in [Metric::MostlyMinus, Metric::MostlyPlus] {
        for n in 1..=3 {
            for seed in 0..3 {
                let mut s = with_metric(random_scenario(n, seed), metric);
                s.sampling.points = 6;
                let r = run_suite(&s).unwrap();
                let failed: Vec<_> = r
                    .failures()
                    .map(|f| (f.id, f.max_residual, f.error.clone()))
                    .collect();
                assert!(r.pass, "{metric:?} N={n} seed={seed}: {failed:?}");
            }
        }
    }
}

#[test]
fn suite_is_deterministic() {
    let s = random_scenario(2, 11);
    let a = run_suite(&s).unwrap();
    let b = run_suite(&s).unwrap();
    for (x, y) in a.rows.iter().zip(&b.rows) {
        assert_eq!(
            x.max_residual.to_bits(),
            y.max_residual.to_bits(),
            "{}",
            x.id
        );
    }
}

#[test]
fn not_applicable_rows_for_n1() {
    let r = run_suite(&random_scenario(1, 4)).unwrap();
    for id in [
        CheckId::NegativeControlCommutator,
        CheckId::NegativeControlMassMatrix,
    ] {
        assert!(!r.row(id).applicable && r.row(id).pass);
    }
    assert!(r.row(CheckId::N1ClosedForms).applicable);
    let r2 = run_suite(&random_scenario(2, 4)).unwrap();
    assert!(!r2.row(CheckId::N1ClosedForms).applicable);
}

#[test]
fn perturbed_mass_matrix_breaks_only_mass_dependent_checks() {
    let mut s = random_scenario(2, 7);
    s.coupling = perturbed_coupling(&s.coupling, MASS_PERTURBATION).unwrap();
    let r = run_suite(&s).unwrap();
    assert!(!r.pass);
    assert!(!r.row(CheckId::MOrthogonality).pass);
    assert!(r.row(CheckId::QbarqInvariance).max_residual > 1e-5);
    assert!(r.row(CheckId::CovariantDerivativeCovariance).pass);
    assert!(r.row(CheckId::QCovariance).pass);
    assert!(r.row(CheckId::ProcaCovariance).pass);
}

#[test]
fn zero_coupling_fails_map_checks_without_panicking() {
    let mut s = random_scenario(2, 3);
    s.coupling =
        CouplingData::new(0.0, s.coupling.mass_matrix().clone(), Metric::MostlyMinus).unwrap();
    let r = run_suite(&s).unwrap();
    assert!(!r.pass);
    let row = r.row(CheckId::FCovariance);
    assert!(!row.pass && row.error.is_some());
    assert!(r.row(CheckId::LnrZeroCoupling).pass);
    assert_eq!(r.row(CheckId::LnrZeroCoupling).max_residual, 0.0);
}

#[test]
fn identity_map_leaves_everything_fixed() {
    let mut s = random_scenario(3, 5);
    s.map = GaugeMapSpec::identity(3);
    let p = SpacetimePoint([0.2, -0.4, 0.1, 0.6]);
    let f = s.fields.eval(&p, Order::Two).unwrap();
    let map = eval_gauge_map(&s.map, &p, Order::Two).unwrap();
    let big = transform_fields(&f, &map, &s.coupling).unwrap();
    assert!(vec_close(&big.phi, &f.phi, 0.0));
    for mu in 0..4 {
        assert!(mat_close(&big.a[mu], &f.a[mu].truncate(Order::One), 1e-15));
        assert!(vec_close(&big.b[mu], &f.b[mu].truncate(Order::One), 1e-15));
    }
}

/// Composition of two maps acts like applying them in turn.
#[test]
fn composition_of_maps() {
    let s = random_scenario(2, 21);
    let second = control_map(2);
    let c = &s.coupling;
    for p in s.sampling.draw_points().iter().take(5) {
        let f = s.fields.eval(p, Order::Two).unwrap();
        let m1 = eval_gauge_map(&s.map, p, Order::Two).unwrap();
        let m2 = eval_gauge_map(&second, p, Order::Two).unwrap();
        let both = m2.compose_after(&m1);
        let stepwise = transform_fields(&transform_fields(&f, &m1, c).unwrap(), &m2, c).unwrap();
        let direct = transform_fields(&f, &both, c).unwrap();
        assert!(vec_close(&stepwise.phi, &direct.phi, 1e-13));
        // A'' only needs one derivative of each map
        let a2 = transform_gauge_a(
            &transform_gauge_a(&f.a, &m1.u, c.g()).unwrap(),
            &m2.u.truncate(Order::One),
            c.g(),
        )
        .unwrap();
        let a_direct = transform_gauge_a(&f.a, &both.u, c.g()).unwrap();
        for mu in 0..4 {
            assert!(mat_close(&a2[mu], &a_direct[mu], 1e-13));
        }
    }
}

/// H_g is not invariant by value; the difference is the explicit divergence,
/// and that relation only uses the transformation rules, so it survives
/// arbitrary skew momenta off the canonical shell.
#[test]
fn off_shell_hg_difference_is_the_divergence() {
    let s = random_scenario(2, 9);
    let c = &s.coupling;
    let mut saw_change = false;
    for (k, p) in s.sampling.draw_points().iter().take(6).enumerate() {
        let f = s.fields.eval(p, Order::Two).unwrap();
        let t = field_tensors(&f, c).unwrap();
        let on = canonical_momenta(&f, &t, c).unwrap();
        let kick = C64::new(0.3 + 0.1 * k as f64, -0.2);
        let off = MomentumState {
            pi: on
                .pi
                .map(|v| v + &CVec::from_values(&[kick; 2], Order::Two)),
            p: LorentzTensor2::skew_from_fn(|a, b| {
                let d = CMat::from_fn(2, |i, j| {
                    let h = C64::new(0.1 * (a + b + i) as f64, 0.05 * (i as f64 - j as f64));
                    gauge_forge::Jet::constant(if i <= j { h } else { h.conj() }, Order::Two)
                });
                &on.p[(a, b)] + &d
            }),
            q: LorentzTensor2::skew_from_fn(|a, b| {
                let d = CVec::from_values(&[kick * (a as f64 - b as f64); 2], Order::Two);
                &on.q[(a, b)] + &d
            }),
            qbar: LorentzTensor2::skew_from_fn(|a, b| {
                let d = CVec::from_values(&[kick * (a as f64 - b as f64); 2], Order::Two);
                (&on.q[(a, b)] + &d).adjoint()
            }),
        };
        let map = eval_gauge_map(&s.map, p, Order::Two).unwrap();
        let big = transform_fields(&f, &map, c).unwrap();
        let (pp, qq, qqb) = transform_momenta_pq(&off, &f.phi, &map, c).unwrap();
        let (_, pi) = transform_base(&f.phi, &off.pi, &map).unwrap();
        let big_m = MomentumState {
            pi,
            p: pp,
            q: qq,
            qbar: qqb,
        };
        let h = hamiltonian_gauge(&f, &off, c, Variant::Full)
            .unwrap()
            .value();
        let bh = hamiltonian_gauge(&big, &big_m, c, Variant::Full)
            .unwrap()
            .value();
        let div = explicit_divergence_f2(&f, &big_m, &map, c).unwrap().value();
        assert!(rel(bh - h, div) <= 1e-9, "{}", rel(bh - h, div));
        saw_change |= (bh - h).norm() > 1e-3;
    }
    assert!(saw_change);
}

fn seeds() -> impl Strategy<Value = (usize, u64)> {
    (1usize..=3, 0u64..1000)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn base_transform_round_trips((n, seed) in seeds(), p in prop::array::uniform4(-1.0f64..1.0)) {
        let s = random_scenario(n, seed);
        let p = SpacetimePoint(p);
        let f = s.fields.eval(&p, Order::Two).unwrap();
        let pi = LorentzCoVec::from_fn(|mu| f.b[mu].clone());
        let map = eval_gauge_map(&s.map, &p, Order::Two).unwrap();
        let (bp, bpi) = transform_base(&f.phi, &pi, &map).unwrap();
        let (phi, pi_back) = inverse_base(&bp, &bpi, &map).unwrap();
        prop_assert!(vec_close(&phi, &f.phi, 1e-12));
        for mu in 0..4 {
            prop_assert!(vec_close(&pi_back[mu], &pi[mu], 1e-12));
        }
    }

    #[test]
    fn generated_maps_are_unitary((n, seed) in seeds(), p in prop::array::uniform4(-1.0f64..1.0)) {
        let s = random_scenario(n, seed);
        let map = eval_gauge_map(&s.map, &SpacetimePoint(p), Order::Two).unwrap();
        prop_assert!(map.u.unitarity_defect() <= 1e-10);
        prop_assert!((map.u.det_value().unwrap().norm() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn transformed_gauge_fields_stay_hermitian((n, seed) in seeds(), p in prop::array::uniform4(-1.0f64..1.0)) {
        let s = random_scenario(n, seed);
        let p = SpacetimePoint(p);
        let f = s.fields.eval(&p, Order::Two).unwrap();
        let map = eval_gauge_map(&s.map, &p, Order::Two).unwrap();
        let big = transform_fields(&f, &map, &s.coupling).unwrap();
        for mu in 0..4 {
            prop_assert!(big.a[mu].hermiticity_defect() <= 1e-10);
        }
    }
}

#[test]
fn identity_map_covariance_residuals_are_tiny() {
    for n in 1..=3 {
        let mut s = random_scenario(n, 13);
        s.map = GaugeMapSpec::identity(n);
        let r = run_suite(&s).unwrap();
        assert!(r.pass);
        for id in [
            CheckId::CovariantDerivativeCovariance,
            CheckId::FCovariance,
            CheckId::QCovariance,
            CheckId::PCombinationCovariance,
        ] {
            assert!(
                r.row(id).max_residual <= 1e-13,
                "{id} {}",
                r.row(id).max_residual
            );
        }
    }
}

#[test]
fn random_scenarios_are_reproducible_and_sized() {
    assert_eq!(random_scenario(2, 99), random_scenario(2, 99));
    assert_ne!(
        random_scenario(2, 99).fields,
        random_scenario(2, 100).fields
    );
    let s = random_scenario(3, 0);
    assert_eq!(s.coupling.mass_matrix().shape(), (3, 3));
    assert!(s
        .fields
        .a_raw
        .iter()
        .all(|m| m.len() == 3 && m.iter().all(|r| r.len() == 3)));
    assert!(random_scenario(1, 0).validate().is_ok());
    assert!((0.1..=2.0).contains(&s.coupling.g()));
}
