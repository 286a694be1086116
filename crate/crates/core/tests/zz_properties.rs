use nmq_core::linalg::ONE;
use nmq_core::quantum::Ket;
use nmq_core::zz::{brute_force_evolve, closed_form_bloch, ProductState, ZZModel};
use proptest::prelude::*;

fn model_strategy(n: usize) -> impl Strategy<Value = ZZModel> {
    (
        -0.3f64..0.3,
        prop::collection::vec(-0.4f64..0.4, n),
        prop::collection::vec(0.0f64..0.05, n + 1),
        prop::collection::vec(0.0f64..0.03, n + 1),
    )
        .prop_map(move |(omega_0, j, gamma_down, gamma_phi)| ZZModel { n_spectators: n, omega_0, j, gamma_down, gamma_phi })
}

fn init_strategy(n: usize) -> impl Strategy<Value = ProductState> {
    prop::collection::vec((0.0f64..std::f64::consts::PI, -3.0f64..3.0), n + 1).prop_map(ProductState::new)
}

fn check(model: &ZZModel, init: &ProductState) -> Result<(), TestCaseError> {
    let times: Vec<f64> = (0..12).map(|n| n as f64 * 2.8).collect();
    let closed = closed_form_bloch(model, init, &times).unwrap();
    let brute = brute_force_evolve(model, &init.density(), &times).unwrap();
    let dev = closed.max_deviation(&brute.trajectory).unwrap();
    prop_assert!(dev < 1e-6, "deviation {dev}");
    for s in &brute.states {
        prop_assert!((s.trace() - ONE).norm() < 1e-8);
    }
    prop_assert!(closed.max_norm() <= 1.0 + 1e-9);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn closed_form_matches_brute_force_one(m in model_strategy(1), init in init_strategy(1)) {
        check(&m, &init)?;
    }

    #[test]
    fn closed_form_matches_brute_force_two(m in model_strategy(2), init in init_strategy(2)) {
        check(&m, &init)?;
    }

    #[test]
    fn closed_form_matches_brute_force_three(m in model_strategy(3), init in init_strategy(3)) {
        check(&m, &init)?;
    }
}

#[test]
fn overdamped_spectator_settles_into_frequency_shift() {
    // Γ₁/(2J) = 50: the spectator relaxes to |0⟩ and the main qubit then
    // precesses at ω₀ − J with its own decay only.
    let (j, g1) = (0.01, 1.0);
    let m = ZZModel { n_spectators: 1, omega_0: 0.05, j: vec![j], gamma_down: vec![0.02, g1], gamma_phi: vec![0.015, 0.0] };
    let init = ProductState::uniform(Ket::Plus, Ket::Plus, 1);
    let times: Vec<f64> = (0..60).map(|n| n as f64).collect();
    let brute = brute_force_evolve(&m, &init.density(), &times).unwrap();
    let closed = closed_form_bloch(&m, &init, &times).unwrap();
    assert!(closed.max_deviation(&brute.trajectory).unwrap() < 1e-6);
    for (t, v) in times.iter().zip(&brute.trajectory.points) {
        let limit = (-m.gamma_main() * t).exp() * ((m.omega_0 - j) * t).cos();
        assert!((v[0] - limit).abs() < 0.02, "t = {t}: {} vs {limit}", v[0]);
    }
}

#[test]
fn revivals_follow_the_coupling_period() {
    let j = 0.2;
    let m = ZZModel { n_spectators: 1, omega_0: 0.0, j: vec![j], gamma_down: vec![0.002, 0.001], gamma_phi: vec![0.001, 0.0] };
    let init = ProductState::uniform(Ket::Plus, Ket::Plus, 1);
    let dt = 0.25;
    let times: Vec<f64> = (0..400).map(|n| n as f64 * dt).collect();
    let tr = closed_form_bloch(&m, &init, &times).unwrap();
    let vx = tr.component(0);
    let crossings: Vec<f64> = (1..vx.len()).filter(|&n| vx[n - 1].signum() != vx[n].signum()).map(|n| times[n]).collect();
    assert!(crossings.len() >= 5);
    let period = std::f64::consts::PI / j;
    for (k, &tc) in crossings.iter().enumerate() {
        let expected = (k as f64 + 0.5) * period;
        assert!((tc - expected).abs() <= dt, "crossing {k} at {tc}, expected {expected}");
    }
}
