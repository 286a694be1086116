use nmq_core::linalg::{frobenius, CMat};
use nmq_core::lindblad::{build_generator, damping_basis, expand_coefficients, propagate, reconstruct_state, LindbladParams};
use nmq_core::quantum::random::random_state;
use nmq_core::quantum::{devectorize, vectorize, DensityMatrix};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rk4(gen: &CMat, rho0: &CMat, t_end: f64, h: f64) -> CMat {
    let mut v = vectorize(rho0);
    let steps = (t_end / h).round() as usize;
    for _ in 0..steps {
        let k1 = gen * &v;
        let k2 = gen * (&v + &k1 * nmq_core::linalg::c(h / 2.0, 0.0));
        let k3 = gen * (&v + &k2 * nmq_core::linalg::c(h / 2.0, 0.0));
        let k4 = gen * (&v + &k3 * nmq_core::linalg::c(h, 0.0));
        v += (k1 + k2 * nmq_core::linalg::c(2.0, 0.0) + k3 * nmq_core::linalg::c(2.0, 0.0) + k4)
            * nmq_core::linalg::c(h / 6.0, 0.0);
    }
    devectorize(&v, 2).unwrap()
}

fn params() -> impl Strategy<Value = LindbladParams> {
    (-2.0f64..2.0, 0.0f64..0.2, 0.0f64..0.2).prop_map(|(w, a, p)| LindbladParams::new(w, a, p).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn propagate_matches_rk4(p in params(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho0 = random_state(&mut rng, 2);
        let gen = build_generator(&p).full.into_matrix();
        let reference = rk4(&gen, rho0.matrix(), 100.0, 0.01);
        let closed = propagate(&p, &rho0, 100.0).unwrap();
        prop_assert!(frobenius(&(closed.matrix() - reference)) < 1e-8);
    }

    #[test]
    fn propagate_preserves_trace_and_hermiticity(p in params(), seed in any::<u64>(), t in 0.0f64..200.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho0 = random_state(&mut rng, 2);
        let b = damping_basis(&p);
        let raw = reconstruct_state(&b, &{
            let mu = b.coefficients(rho0.matrix());
            [0, 1, 2, 3].map(|i| mu[i] * (b.lambda[i] * t).exp())
        });
        prop_assert!((raw.trace().re - 1.0).abs() < 1e-10);
        prop_assert!(raw.trace().im.abs() < 1e-10);
        prop_assert!(frobenius(&(&raw - raw.adjoint())) < 1e-10);
        prop_assert!(DensityMatrix::new(raw).is_ok());
    }

    #[test]
    fn expansion_round_trip_and_conjugate_modes(p in params(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = damping_basis(&p);
        let states: Vec<CMat> = (0..6).map(|_| random_state(&mut rng, 2).into_matrix()).collect();
        let times: Vec<f64> = (0..6).map(|n| n as f64).collect();
        let series = expand_coefficients(&b, &times, &states).unwrap();
        for (s, mu) in states.iter().zip(&series.mu) {
            prop_assert!(frobenius(&(reconstruct_state(&b, mu) - s)) < 1e-12);
            prop_assert!((mu[0].re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        }
        let x2 = series.xi(2).unwrap();
        let x3 = series.xi(3).unwrap();
        for (a, b) in x2.iter().zip(&x3) {
            prop_assert!((a - b.conj()).norm() < 1e-12);
        }
    }
}
