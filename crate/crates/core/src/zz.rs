//! Main qubit coupled to N spectators through ZZ interactions with local
//! amplitude damping and dephasing on every qubit.
//!
//! H = −(ω₀/2)Z₀ + Σ_q (J₀q/2) Z₀Z_q, dissipators Σ_q γ↓q D[σ⁻_q] + γφq D[Z_q].
//! Qubit 0 is the main qubit and the most significant tensor factor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CVec, C64, ONE};
use crate::quantum::{reduce_qubits, ChoiMatrix, DensityMatrix, Ket};
use crate::trajectory::BlochTrajectory;

pub const MAX_SPECTATORS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZZModel {
    pub n_spectators: usize,
    pub omega_0: f64,
    #[serde(rename = "J")]
    pub j: Vec<f64>,
    pub gamma_down: Vec<f64>,
    pub gamma_phi: Vec<f64>,
}

impl ZZModel {
    pub fn validate(&self) -> Result<()> {
        let n = self.n_spectators;
        if self.j.len() != n {
            return Err(Error::InvalidParameter(format!("J has {} entries, expected {n}", self.j.len())));
        }
        for (name, v) in [("gamma_down", &self.gamma_down), ("gamma_phi", &self.gamma_phi)] {
            if v.len() != n + 1 {
                return Err(Error::InvalidParameter(format!("{name} has {} entries, expected {}", v.len(), n + 1)));
            }
            if let Some(bad) = v.iter().find(|&&g| !(g >= 0.0 && g.is_finite())) {
                return Err(Error::InvalidParameter(format!("{name} contains invalid rate {bad}")));
            }
        }
        if !self.omega_0.is_finite() || self.j.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite frequency".into()));
        }
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_spectators + 1
    }

    /// Γ₀ = 2γφ₀ + γ↓₀/2.
    pub fn gamma_main(&self) -> f64 {
        2.0 * self.gamma_phi[0] + 0.5 * self.gamma_down[0]
    }

    /// Γ_q = γ↓q for spectator q ≥ 1.
    pub fn gamma_spectator(&self, q: usize) -> f64 {
        self.gamma_down[q]
    }

    /// Rate bound used to choose the integrator step.
    pub fn max_rate(&self) -> f64 {
        self.omega_0.abs()
            + self.j.iter().map(|x| x.abs()).sum::<f64>()
            + self.gamma_down.iter().sum::<f64>()
            + 4.0 * self.gamma_phi.iter().sum::<f64>()
    }
}

/// Pure product state, one pair of Bloch angles (θ, φ) per qubit with
/// |ψ⟩ = cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductState {
    pub angles: Vec<(f64, f64)>,
}

impl ProductState {
    pub fn new(angles: Vec<(f64, f64)>) -> Self {
        Self { angles }
    }

    pub fn from_kets(kets: &[Ket]) -> Self {
        Self { angles: kets.iter().map(|k| k.angles()).collect() }
    }

    /// Main qubit in `main`, every spectator in `spectator`.
    pub fn uniform(main: Ket, spectator: Ket, n_spectators: usize) -> Self {
        let mut kets = vec![main];
        kets.extend(std::iter::repeat_n(spectator, n_spectators));
        Self::from_kets(&kets)
    }

    pub fn n_qubits(&self) -> usize {
        self.angles.len()
    }

    pub fn bloch(&self, q: usize) -> [f64; 3] {
        let (th, ph) = self.angles[q];
        [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]
    }

    pub fn ket(&self, q: usize) -> CVec {
        let (th, ph) = self.angles[q];
        CVec::from_vec(vec![c((th / 2.0).cos(), 0.0), C64::from_polar((th / 2.0).sin(), ph)])
    }

    pub fn density(&self) -> DensityMatrix {
        let psi = (1..self.n_qubits()).fold(self.ket(0), |acc, q| acc.kronecker(&self.ket(q)));
        DensityMatrix::pure(&psi)
    }
}

/// e^{B±t} for B± = [[Γ/2, ∓iJ], [Γ ∓ iJ, −Γ/2]], computed as
/// cosh(Ωt)·I + sinh(Ωt)/Ω·B with Ω = Γ/2 ∓ iJ.
pub fn block_propagator(gamma: f64, j: f64, t: f64, plus: bool) -> CMat {
    let s = if plus { -1.0 } else { 1.0 };
    let ij = c(0.0, s * j);
    let b = linalg::cmat2([[c(gamma / 2.0, 0.0), ij], [ij + gamma, c(-gamma / 2.0, 0.0)]]);
    let omega = c(gamma / 2.0, 0.0) + ij;
    let (ch, sh_over) = cosh_sinhc(omega, t);
    linalg::identity(2) * ch + b * sh_over
}

/// (cosh(Ωt), sinh(Ωt)/Ω) with the removable singularity at Ω = 0.
fn cosh_sinhc(omega: C64, t: f64) -> (C64, C64) {
    let x = omega * t;
    if x.norm() < 1e-4 {
        let x2 = x * x;
        (ONE + x2 / 2.0 + x2 * x2 / 24.0, (ONE + x2 / 6.0 + x2 * x2 / 120.0) * t)
    } else {
        (x.cosh(), x.sinh() / omega)
    }
}

/// ⟨Σ⁺₀⟩(t) = ρ₀₁ of the main qubit.
fn main_coherence(model: &ZZModel, init: &ProductState, t: f64) -> C64 {
    let v0 = init.bloch(0);
    let mut acc = c(-model.gamma_main(), model.omega_0).scale(t).exp() * c(v0[0], -v0[1]) * 0.5;
    for q in 1..=model.n_spectators {
        let g = model.gamma_spectator(q);
        let z = init.bloch(q)[2];
        let u = block_propagator(g, model.j[q - 1], t, true);
        let factor = u[(0, 0)] + u[(0, 1)] * z;
        acc *= factor * (-g * t / 2.0).exp();
    }
    acc
}

pub fn closed_form_bloch(model: &ZZModel, init: &ProductState, times: &[f64]) -> Result<BlochTrajectory> {
    model.validate()?;
    if init.n_qubits() != model.n_qubits() {
        return Err(Error::Dimension { expected: model.n_qubits(), got: init.n_qubits() });
    }
    let vz0 = init.bloch(0)[2];
    let points = times
        .iter()
        .map(|&t| {
            let s = main_coherence(model, init, t);
            let vz = 1.0 + (vz0 - 1.0) * (-model.gamma_down[0] * t).exp();
            [2.0 * s.re, -2.0 * s.im, vz]
        })
        .collect();
    BlochTrajectory::new(times.to_vec(), points)
}

/// Closed form for an arbitrary initial state that is a product of pure
/// single-qubit states; anything else is rejected.
pub fn closed_form_from_density(model: &ZZModel, init: &DensityMatrix, times: &[f64]) -> Result<BlochTrajectory> {
    let product = product_state_of(init, model.n_qubits())?;
    closed_form_bloch(model, &product, times)
}

/// Recovers Bloch angles from a pure product state.
pub fn product_state_of(rho: &DensityMatrix, n_qubits: usize) -> Result<ProductState> {
    if rho.dim() != 1 << n_qubits {
        return Err(Error::Dimension { expected: 1 << n_qubits, got: rho.dim() });
    }
    let mut angles = Vec::with_capacity(n_qubits);
    let mut rebuilt = CMat::from_element(1, 1, ONE);
    for q in 0..n_qubits {
        let r = reduce_qubits(rho.matrix(), n_qubits, &[q])?;
        let v = crate::quantum::bloch_of(&r);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::NotProductState);
        }
        angles.push((v[2].clamp(-1.0, 1.0).acos(), v[1].atan2(v[0])));
        rebuilt = linalg::kron(&rebuilt, &r);
    }
    if linalg::frobenius(&(rebuilt - rho.matrix())) > 1e-8 {
        return Err(Error::NotProductState);
    }
    Ok(ProductState { angles })
}

/// Output of the brute-force integrator.
#[derive(Debug, Clone)]
pub struct BruteForceResult {
    pub trajectory: BlochTrajectory,
    pub states: Vec<CMat>,
}

struct Liouvillian {
    n: usize,
    diag: CMat,
    jumps: Vec<(usize, f64)>,
}

impl Liouvillian {
    fn new(model: &ZZModel) -> Self {
        let n = model.n_qubits();
        let dim = 1usize << n;
        let bit = |q: usize| 1usize << (n - 1 - q);
        let z = |b: usize, q: usize| if b & bit(q) == 0 { 1.0 } else { -1.0 };
        let energy = |b: usize| {
            let z0 = z(b, 0);
            -0.5 * model.omega_0 * z0 + (1..n).map(|q| 0.5 * model.j[q - 1] * z0 * z(b, q)).sum::<f64>()
        };
        let energies: Vec<f64> = (0..dim).map(energy).collect();
        let diag = CMat::from_fn(dim, dim, |a, b| {
            let mut re = 0.0;
            for q in 0..n {
                re -= model.gamma_phi[q] * (1.0 - z(a, q) * z(b, q));
                let na = (a & bit(q) != 0) as u8 as f64;
                let nb = (b & bit(q) != 0) as u8 as f64;
                re -= 0.5 * model.gamma_down[q] * (na + nb);
            }
            c(re, -(energies[a] - energies[b]))
        });
        let jumps = (0..n).filter(|&q| model.gamma_down[q] > 0.0).map(|q| (bit(q), model.gamma_down[q])).collect();
        Self { n, diag, jumps }
    }

    fn apply(&self, rho: &CMat, out: &mut CMat) {
        out.zip_zip_apply(&self.diag, rho, |o, d, r| *o = d * r);
        let dim = 1usize << self.n;
        for &(mask, g) in &self.jumps {
            for b in (0..dim).filter(|b| b & mask == 0) {
                for a in (0..dim).filter(|a| a & mask == 0) {
                    out[(a, b)] += rho[(a | mask, b | mask)] * g;
                }
            }
        }
    }
}

/// Fixed-step RK4 integration of the full master equation on 2^{N+1}
/// dimensions. Times must be non-negative and ascending; the initial state
/// is taken at t = 0.
pub fn brute_force_evolve(model: &ZZModel, init: &DensityMatrix, times: &[f64]) -> Result<BruteForceResult> {
    evolve_operator(model, init.matrix(), times)
}

/// Same integrator applied to an arbitrary operator; the dynamics is linear,
/// so this also propagates matrix units and other non-physical inputs.
pub fn evolve_operator(model: &ZZModel, init: &CMat, times: &[f64]) -> Result<BruteForceResult> {
    model.validate()?;
    if model.n_spectators > MAX_SPECTATORS {
        return Err(Error::DimensionCap { n: model.n_spectators, max: MAX_SPECTATORS });
    }
    let n = model.n_qubits();
    if init.shape() != (1 << n, 1 << n) {
        return Err(Error::Dimension { expected: 1 << n, got: init.nrows() });
    }
    if times.iter().any(|&t| !(t >= 0.0)) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::GridMismatch("times must be non-negative and ascending".into()));
    }
    let lv = Liouvillian::new(model);
    let rate = model.max_rate();
    let h_max = if rate > 0.0 { 0.01 / rate } else { f64::INFINITY };
    let dim = 1usize << n;
    let mut rho = init.clone();
    let (mut k1, mut k2, mut k3, mut k4) =
        (CMat::zeros(dim, dim), CMat::zeros(dim, dim), CMat::zeros(dim, dim), CMat::zeros(dim, dim));
    let mut t_now = 0.0;
    let mut states = Vec::with_capacity(times.len());
    let mut points = Vec::with_capacity(times.len());
    for &t in times {
        let span = t - t_now;
        if span > 0.0 {
            let steps = if h_max.is_finite() { (span / h_max).ceil().max(1.0) as usize } else { 1 };
            let h = span / steps as f64;
            for _ in 0..steps {
                lv.apply(&rho, &mut k1);
                lv.apply(&(&rho + &k1 * c(h / 2.0, 0.0)), &mut k2);
                lv.apply(&(&rho + &k2 * c(h / 2.0, 0.0)), &mut k3);
                lv.apply(&(&rho + &k3 * c(h, 0.0)), &mut k4);
                rho += (&k1 + (&k2 + &k3) * c(2.0, 0.0) + &k4) * c(h / 6.0, 0.0);
            }
            t_now = t;
        }
        let main = reduce_qubits(&rho, n, &[0])?;
        points.push(crate::quantum::bloch_of(&main));
        states.push(rho.clone());
    }
    Ok(BruteForceResult { trajectory: BlochTrajectory::new(times.to_vec(), points)?, states })
}

/// Reduced dynamics of the main qubit as a map on 2×2 matrices, obtained by
/// evolving X ⊗ ρ_spectators exactly (linear in X).
pub fn reduced_map(model: &ZZModel, spectators: &ProductState, t: f64, x: &CMat) -> Result<CMat> {
    model.validate()?;
    if spectators.n_qubits() != model.n_spectators {
        return Err(Error::Dimension { expected: model.n_spectators, got: spectators.n_qubits() });
    }
    // X = Σ x_ij |i⟩⟨j|; each matrix unit evolves independently of the others.
    let mut out = CMat::zeros(2, 2);
    let decay = (-model.gamma_down[0] * t).exp();
    // Populations: |1⟩⟨1| → (1−e^{−γt})|0⟩⟨0| + e^{−γt}|1⟩⟨1|, |0⟩⟨0| fixed.
    out[(0, 0)] += x[(0, 0)] + x[(1, 1)] * (1.0 - decay);
    out[(1, 1)] += x[(1, 1)] * decay;
    // Coherence |0⟩⟨1| evolves as ⟨Σ⁺₀⟩ with the spectator factors.
    let mut coh = c(-model.gamma_main(), model.omega_0).scale(t).exp();
    for q in 1..=model.n_spectators {
        let g = model.gamma_spectator(q);
        let z = spectators.bloch(q - 1)[2];
        let u = block_propagator(g, model.j[q - 1], t, true);
        coh *= (u[(0, 0)] + u[(0, 1)] * z) * (-g * t / 2.0).exp();
    }
    out[(0, 1)] += x[(0, 1)] * coh;
    out[(1, 0)] += x[(1, 0)] * coh.conj();
    Ok(out)
}

/// Choi matrix of the main qubit's reduced map at time t.
pub fn reduced_choi(model: &ZZModel, spectators: &ProductState, t: f64) -> Result<ChoiMatrix> {
    // Checks the model and spectator count once; the map cannot fail afterwards.
    reduced_map(model, spectators, t, &CMat::zeros(2, 2))?;
    Ok(ChoiMatrix::from_map(2, |x| reduced_map(model, spectators, t, x).expect("validated")))
}

/// Reduced Choi matrices on a time grid.
pub fn reduced_choi_series(model: &ZZModel, spectators: &ProductState, times: &[f64]) -> Result<Vec<ChoiMatrix>> {
    times.iter().map(|&t| reduced_choi(model, spectators, t)).collect()
}

/// Joint state of the main qubit and the first spectator along a brute-force
/// trajectory.
pub fn pair_states(model: &ZZModel, init: &DensityMatrix, times: &[f64]) -> Result<Vec<DensityMatrix>> {
    if model.n_spectators == 0 {
        return Err(Error::InvalidParameter("pair states need at least one spectator".into()));
    }
    let run = brute_force_evolve(model, init, times)?;
    run.states
        .iter()
        .map(|m| Ok(DensityMatrix::new_unchecked(reduce_qubits(m, model.n_qubits(), &[0, 1])?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius, ZERO};

    fn model(n: usize) -> ZZModel {
        ZZModel {
            n_spectators: n,
            omega_0: 0.05,
            j: vec![0.2; n],
            gamma_down: vec![0.02; n + 1],
            gamma_phi: vec![0.015; n + 1],
        }
    }

    /// Taylor series of e^{Bt} summed to convergence.
    fn expm_series(b: &CMat, t: f64) -> CMat {
        let bt = b * c(t, 0.0);
        let mut term = linalg::identity(2);
        let mut acc = term.clone();
        for k in 1..60 {
            term = &term * &bt * c(1.0 / k as f64, 0.0);
            acc += &term;
        }
        acc
    }

    fn b_plus(g: f64, j: f64) -> CMat {
        linalg::cmat2([[c(g / 2.0, 0.0), c(0.0, -j)], [c(g, -j), c(-g / 2.0, 0.0)]])
    }

    #[test]
    fn block_propagator_at_zero_is_identity() {
        assert!(frobenius(&(block_propagator(0.1, 1.0, 0.0, true) - linalg::identity(2))) < 1e-15);
    }

    #[test]
    fn block_propagator_without_damping_is_rotation() {
        let (j, t) = (0.7, 2.3);
        let u = block_propagator(0.0, j, t, true);
        let expected = linalg::cmat2([
            [c((j * t).cos(), 0.0), c(0.0, -(j * t).sin())],
            [c(0.0, -(j * t).sin()), c((j * t).cos(), 0.0)],
        ]);
        assert!(frobenius(&(u - expected)) < 1e-14);
    }

    #[test]
    fn block_propagator_matches_series() {
        for (g, j, t) in [(0.1, 1.0, 1.0), (0.3, 0.05, 7.0), (0.0, 0.0, 3.0), (1e-9, 1e-9, 2.0)] {
            let u = block_propagator(g, j, t, true);
            let reference = expm_series(&b_plus(g, j), t);
            assert!(frobenius(&(&u - &reference)) < 1e-10, "({g},{j},{t})");
        }
        let omega = c(0.05, -1.0);
        let want = omega.cosh() + omega.sinh() * (0.05 / omega);
        assert!((block_propagator(0.1, 1.0, 1.0, true)[(0, 0)] - want).norm() < 1e-12);
    }

    #[test]
    fn coherent_oscillation_at_j() {
        let m = ZZModel { n_spectators: 1, omega_0: 0.0, j: vec![0.3], gamma_down: vec![0.0; 2], gamma_phi: vec![0.0; 2] };
        let init = ProductState::from_kets(&[Ket::Plus, Ket::Plus]);
        let times: Vec<f64> = (0..40).map(|n| n as f64 * 0.5).collect();
        let tr = closed_form_bloch(&m, &init, &times).unwrap();
        for (t, v) in times.iter().zip(&tr.points) {
            assert!((v[0] - (0.3 * t).cos()).abs() < 1e-13);
        }
    }

    #[test]
    fn ground_spectator_hides_its_damping() {
        let m = model(1);
        let init = ProductState::from_kets(&[Ket::Plus, Ket::Zero]);
        let times: Vec<f64> = (0..50).map(|n| n as f64 * 2.8).collect();
        let tr = closed_form_bloch(&m, &init, &times).unwrap();
        let g0 = m.gamma_main();
        for (t, v) in times.iter().zip(&tr.points) {
            let phase = (m.omega_0 - m.j[0]) * t;
            assert!((v[0] - (-g0 * t).exp() * phase.cos()).abs() < 1e-12);
            assert!((v[1] + (-g0 * t).exp() * phase.sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn weak_damping_product_limit() {
        let m = ZZModel {
            n_spectators: 3,
            omega_0: 0.05,
            j: vec![0.2, 0.35, 0.5],
            gamma_down: vec![0.01, 1e-4, 2e-4, 1e-4],
            gamma_phi: vec![0.005, 0.0, 0.0, 0.0],
        };
        let init = ProductState::uniform(Ket::Plus, Ket::Plus, 3);
        let times: Vec<f64> = (0..60).map(|n| n as f64 * 0.5).collect();
        let tr = closed_form_bloch(&m, &init, &times).unwrap();
        for (t, v) in times.iter().zip(&tr.points) {
            let mut approx = (-m.gamma_main() * t).exp() * (m.omega_0 * t).cos();
            for q in 0..3 {
                approx *= (-m.gamma_down[q + 1] * t / 2.0).exp() * (m.j[q] * t).cos();
            }
            assert!((v[0] - approx).abs() < 5e-3, "t = {t}");
        }
    }

    #[test]
    fn frozen_dynamics() {
        let m = ZZModel { n_spectators: 2, omega_0: 0.0, j: vec![0.0; 2], gamma_down: vec![0.0; 3], gamma_phi: vec![0.0; 3] };
        let init = ProductState::from_kets(&[Ket::PlusI, Ket::One, Ket::Minus]).density();
        let r = brute_force_evolve(&m, &init, &[0.0, 5.0, 10.0]).unwrap();
        for s in &r.states {
            assert!(frobenius(&(s - init.matrix())) < 1e-15);
        }
    }

    #[test]
    fn brute_force_matches_closed_form_single_spectator() {
        let m = model(1);
        let init = ProductState::from_kets(&[Ket::Plus, Ket::PlusI]);
        let times: Vec<f64> = (0..20).map(|n| n as f64 * 2.8).collect();
        let closed = closed_form_bloch(&m, &init, &times).unwrap();
        let brute = brute_force_evolve(&m, &init.density(), &times).unwrap();
        assert!(closed.max_deviation(&brute.trajectory).unwrap() < 1e-6);
        for s in &brute.states {
            assert!((s.trace() - ONE).norm() < 1e-8);
        }
    }

    #[test]
    fn dimension_cap() {
        let m = model(7);
        let init = DensityMatrix::maximally_mixed(2);
        assert!(matches!(brute_force_evolve(&m, &init, &[0.0]), Err(Error::DimensionCap { n: 7, max: 6 })));
    }

    #[test]
    fn product_state_recovery() {
        let p = ProductState::new(vec![(0.3, 1.1), (2.0, -0.4)]);
        let back = product_state_of(&p.density(), 2).unwrap();
        for (a, b) in p.angles.iter().zip(&back.angles) {
            assert!((a.0 - b.0).abs() < 1e-8 && (a.1 - b.1).abs() < 1e-8);
        }
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = DensityMatrix::pure(&CVec::from_vec(vec![c(h, 0.0), ZERO, ZERO, c(h, 0.0)]));
        assert!(matches!(product_state_of(&bell, 2), Err(Error::NotProductState)));
    }

    #[test]
    fn reduced_map_matches_brute_force() {
        let m = model(2);
        let spect = ProductState::from_kets(&[Ket::Plus, Ket::MinusI]);
        let t = 9.0;
        for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let mut x = CMat::zeros(2, 2);
            x[(i, j)] = ONE;
            let full = linalg::kron(&x, spect.density().matrix());
            let r = evolve_operator(&m, &full, &[t]).unwrap();
            let reduced = reduce_qubits(&r.states[0], 3, &[0]).unwrap();
            let closed = reduced_map(&m, &spect, t, &x).unwrap();
            assert!(frobenius(&(reduced - closed)) < 1e-6, "unit ({i},{j})");
        }
    }

    #[test]
    fn serde_field_names() {
        let m = model(1);
        let j = serde_json::to_value(&m).unwrap();
        assert!(j.get("J").is_some() && j.get("gamma_down").is_some() && j.get("omega_0").is_some());
        let bad = ZZModel { j: vec![], ..model(1) };
        assert!(bad.validate().is_err());
    }
}
