use nmq_core::linalg::{self, frobenius, CMat};
use nmq_core::quantum::random::{random_channel, random_hermitian, random_state};
use nmq_core::quantum::{
    devectorize, entropies, partial_trace, project_choi_cptp, project_state_physical, relative_entropy,
    reshuffle, reshuffle_inverse, trace_distance, vectorize, ChoiMatrix, DensityMatrix, Subsystem,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn apply(chi: &ChoiMatrix, rho: &DensityMatrix) -> DensityMatrix {
    DensityMatrix::new(linalg::hermitize(&chi.apply(rho.matrix()).unwrap())).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reshuffle_is_involutive(seed in any::<u64>(), d in 2usize..4) {
        let mut r = rng(seed);
        let m = nmq_core::quantum::random::ginibre(&mut r, d * d, d * d);
        let chi = ChoiMatrix::new(m.clone()).unwrap();
        let back = reshuffle_inverse(&reshuffle(&chi));
        prop_assert_eq!(back.matrix(), &m);
        let s = nmq_core::quantum::SuperoperatorMatrix::new(m.clone()).unwrap();
        let back = reshuffle(&reshuffle_inverse(&s));
        prop_assert_eq!(back.matrix(), &m);
    }

    #[test]
    fn channel_application_paths_agree(seed in any::<u64>()) {
        let mut r = rng(seed);
        let chi = ChoiMatrix::new(nmq_core::quantum::random::ginibre(&mut r, 4, 4)).unwrap();
        let rho = random_state(&mut r, 2);
        let direct = chi.apply(rho.matrix()).unwrap();
        let via_s = devectorize(&(reshuffle(&chi).matrix() * vectorize(rho.matrix())), 2).unwrap();
        prop_assert!(frobenius(&(direct - via_s)) < 1e-12);
    }

    #[test]
    fn trace_preserving_superoperator(seed in any::<u64>(), kraus in 1usize..5) {
        let mut r = rng(seed);
        let s = reshuffle(&random_channel(&mut r, 2, kraus));
        let rho = random_state(&mut r, 2);
        let out = s.apply(rho.matrix()).unwrap();
        prop_assert!((out.trace().re - 1.0).abs() < 1e-10);
    }

    #[test]
    fn data_processing_inequality(seed in any::<u64>(), kraus in 1usize..5) {
        let mut r = rng(seed);
        let chi = random_channel(&mut r, 2, kraus);
        let a = random_state(&mut r, 2);
        let b = random_state(&mut r, 2);
        let (pa, pb) = (apply(&chi, &a), apply(&chi, &b));
        prop_assert!(trace_distance(&pa, &pb).unwrap() <= trace_distance(&a, &b).unwrap() + 1e-9);
        let d_in = relative_entropy(&a, &b).unwrap();
        if let Ok(d_out) = relative_entropy(&pa, &pb) {
            prop_assert!(d_out <= d_in + 1e-9);
        }
    }

    #[test]
    fn mutual_information_is_relative_entropy(seed in any::<u64>()) {
        let mut r = rng(seed);
        let rho = random_state(&mut r, 4);
        let e = entropies(&rho).unwrap();
        let ra = partial_trace(&rho, Subsystem::B).unwrap();
        let rb = partial_trace(&rho, Subsystem::A).unwrap();
        let d = relative_entropy(&rho, &ra.tensor(&rb)).unwrap();
        prop_assert!((e.mutual_information - d).abs() < 1e-9);
        prop_assert!(e.mutual_information >= -1e-12 && e.mutual_information <= 2.0 + 1e-12);
        prop_assert!(e.conditional_entropy >= -1.0 - 1e-12 && e.conditional_entropy <= 1.0 + 1e-12);
    }

    #[test]
    fn state_projection_is_idempotent(seed in any::<u64>()) {
        let mut r = rng(seed);
        let raw = random_hermitian(&mut r, 2);
        if let Ok(p) = project_state_physical(&raw) {
            prop_assert!(linalg::min_eigenvalue(p.matrix()) >= -1e-12);
            prop_assert!((p.matrix().trace().re - 1.0).abs() < 1e-12);
            let pp = project_state_physical(p.matrix()).unwrap();
            prop_assert!(frobenius(&(pp.matrix() - p.matrix())) < 1e-12);
        }
    }

    #[test]
    fn perturbed_channel_projects_nearby(seed in any::<u64>(), kraus in 1usize..5) {
        let mut r = rng(seed);
        let chi = random_channel(&mut r, 2, kraus);
        let noise = random_hermitian(&mut r, 4);
        let noise = noise.unscale(frobenius(&noise) / 1e-3);
        let p = project_choi_cptp(&(chi.matrix() + noise)).unwrap();
        prop_assert!(frobenius(&(p.matrix() - chi.matrix())) < 2e-3);
        prop_assert!(p.tp_residual() < 1e-8);
        prop_assert!(p.min_eigenvalue() >= -1e-12);
    }
}

#[test]
fn cptp_input_is_fixed_point() {
    let mut r = rng(3);
    for k in 1..5 {
        let chi = random_channel(&mut r, 2, k);
        let p = project_choi_cptp(chi.matrix()).unwrap();
        assert!(frobenius(&(p.matrix() - chi.matrix())) < 1e-10);
    }
}

#[test]
fn unphysical_raw_choi_is_projected() {
    let mut r = rng(11);
    let raw: CMat = random_hermitian(&mut r, 4);
    let p = project_choi_cptp(&raw).unwrap();
    assert!(p.tp_residual() < 1e-8);
    assert!(p.min_eigenvalue() >= -1e-12);
}
