//! Single-qubit Lindblad generator with amplitude damping and pure dephasing,
//! its damping basis, and damping-basis coefficient series.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CVec, C64, I, ZERO};
use crate::quantum::{vectorize, ChoiMatrix, DensityMatrix, SuperoperatorMatrix};

/// Coefficients with |μᵢ(0)| at or below this are considered unexcited.
pub const UNEXCITED_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LindbladParams {
    pub omega_z: f64,
    pub gamma_ad: f64,
    pub gamma_pd: f64,
}

impl LindbladParams {
    pub fn new(omega_z: f64, gamma_ad: f64, gamma_pd: f64) -> Result<Self> {
        let p = Self { omega_z, gamma_ad, gamma_pd };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.omega_z.is_finite() {
            return Err(Error::InvalidParameter("omega_z must be finite".into()));
        }
        if !(self.gamma_ad >= 0.0 && self.gamma_ad.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma_ad = {} must be ≥ 0", self.gamma_ad)));
        }
        if !(self.gamma_pd >= 0.0 && self.gamma_pd.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma_pd = {} must be ≥ 0", self.gamma_pd)));
        }
        Ok(())
    }

    /// Coherence decay rate 2γ_PD + γ_AD/2.
    pub fn transverse_rate(&self) -> f64 {
        2.0 * self.gamma_pd + 0.5 * self.gamma_ad
    }
}

/// Superoperator of X ↦ A X B in column-stacking convention.
pub fn sandwich(a: &CMat, b: &CMat) -> CMat {
    linalg::kron(&b.transpose(), a)
}

/// Superoperator of the dissipator D[L]ρ = LρL† − ½{L†L, ρ}.
pub fn dissipator(l: &CMat) -> CMat {
    let d = l.nrows();
    let id = linalg::identity(d);
    let ldl = l.adjoint() * l;
    sandwich(l, &l.adjoint()) - (sandwich(&ldl, &id) + sandwich(&id, &ldl)).scale(0.5)
}

/// ℒ together with its split ℒ = ℒ₀ + ℒ₁, where ℒ₁ is the pure-dephasing part.
#[derive(Debug, Clone)]
pub struct Generators {
    pub full: SuperoperatorMatrix,
    pub l0: SuperoperatorMatrix,
    pub l1: SuperoperatorMatrix,
}

/// ℒρ = (iω/2)[σz, ρ] + γ_AD D[σ₋]ρ + γ_PD (σzρσz − ρ).
pub fn build_generator(p: &LindbladParams) -> Generators {
    let id = linalg::identity(2);
    let z = linalg::pauli_z();
    let comm = (sandwich(&z, &id) - sandwich(&id, &z)) * (I * (p.omega_z / 2.0));
    let ad = dissipator(&linalg::sigma_minus()).scale(p.gamma_ad);
    let pd = (sandwich(&z, &z) - linalg::identity(4)).scale(p.gamma_pd);
    let l0 = comm + ad;
    let full = &l0 + &pd;
    let wrap = |m: CMat| SuperoperatorMatrix::new(m).expect("4×4");
    Generators { full: wrap(full), l0: wrap(l0), l1: wrap(pd) }
}

/// Biorthonormal right/left eigenoperators of ℒ with eigenvalues in the
/// fixed order 0..3.
#[derive(Debug, Clone)]
pub struct DampingBasis {
    pub right: [CMat; 4],
    pub left: [CMat; 4],
    pub lambda: [C64; 4],
    pub lambda0: [C64; 4],
    pub lambda1: [C64; 4],
}

impl DampingBasis {
    pub fn new(p: &LindbladParams) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let id = linalg::identity(2);
        let z = linalg::pauli_z();
        let right = [
            (&id + &z).scale(s),
            z.scale(s),
            linalg::sigma_minus(),
            linalg::sigma_plus(),
        ];
        let left = [id.scale(s), (&z - &id).scale(s), linalg::sigma_plus(), linalg::sigma_minus()];
        let (w, gad, gpd) = (p.omega_z, p.gamma_ad, p.gamma_pd);
        let lambda0 = [ZERO, c(-gad, 0.0), c(-0.5 * gad, w), c(-0.5 * gad, -w)];
        let lambda1 = [ZERO, ZERO, c(-2.0 * gpd, 0.0), c(-2.0 * gpd, 0.0)];
        let lambda = [0, 1, 2, 3].map(|i| lambda0[i] + lambda1[i]);
        Self { right, left, lambda, lambda0, lambda1 }
    }

    /// μᵢ = Tr(Lᵢ ρ).
    pub fn coefficients(&self, rho: &CMat) -> [C64; 4] {
        [0, 1, 2, 3].map(|i| (&self.left[i] * rho).trace())
    }

    /// ρ = Σ μᵢ Rᵢ.
    pub fn reconstruct(&self, mu: &[C64; 4]) -> CMat {
        (0..4).fold(CMat::zeros(2, 2), |acc, i| acc + &self.right[i] * mu[i])
    }

    /// e^{ℒt} as a superoperator, Σ e^{λᵢt} vec(Rᵢ) vec(Lᵢᵀ)ᵀ.
    pub fn propagator(&self, t: f64) -> SuperoperatorMatrix {
        let mut m = CMat::zeros(4, 4);
        for i in 0..4 {
            let r: CVec = vectorize(&self.right[i]);
            let l: CVec = vectorize(&self.left[i].transpose());
            m += (r * l.transpose()) * (self.lambda[i] * t).exp();
        }
        SuperoperatorMatrix::new(m).expect("4×4")
    }
}

pub fn damping_basis(p: &LindbladParams) -> DampingBasis {
    DampingBasis::new(p)
}

/// ρ(t) = Σ e^{λᵢt} Tr(Lᵢρ₀) Rᵢ.
pub fn propagate(p: &LindbladParams, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("negative time {t}")));
    }
    if rho0.dim() != 2 {
        return Err(Error::Dimension { expected: 2, got: rho0.dim() });
    }
    Ok(DensityMatrix::new_unchecked(propagate_raw(&DampingBasis::new(p), rho0.matrix(), t)))
}

pub(crate) fn propagate_raw(basis: &DampingBasis, rho0: &CMat, t: f64) -> CMat {
    let mu = basis.coefficients(rho0);
    let evolved = [0, 1, 2, 3].map(|i| mu[i] * (basis.lambda[i] * t).exp());
    basis.reconstruct(&evolved)
}

/// Choi matrix of e^{ℒt}.
pub fn lindblad_choi(basis: &DampingBasis, t: f64) -> ChoiMatrix {
    ChoiMatrix::from_map(2, |x| propagate_raw(basis, x, t))
}

/// Bloch vector at time t for initial Bloch vector v0.
pub fn bloch_at(basis: &DampingBasis, v0: [f64; 3], t: f64) -> [f64; 3] {
    let rho0 = bloch_matrix(v0);
    crate::quantum::bloch_of(&propagate_raw(basis, &rho0, t))
}

pub(crate) fn bloch_matrix(v: [f64; 3]) -> CMat {
    (linalg::identity(2)
        + linalg::pauli_x().scale(v[0])
        + linalg::pauli_y().scale(v[1])
        + linalg::pauli_z().scale(v[2]))
    .scale(0.5)
}

/// Damping-basis coefficients μᵢ(tₙ) of a state series.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSeries {
    pub times: Vec<f64>,
    pub mu: Vec<[C64; 4]>,
}

#[derive(Serialize)]
struct CoefficientRow {
    t: f64,
    re_mu0: f64,
    im_mu0: f64,
    re_mu1: f64,
    im_mu1: f64,
    re_mu2: f64,
    im_mu2: f64,
    re_mu3: f64,
    im_mu3: f64,
}

impl CoefficientSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn mode(&self, i: usize) -> Vec<C64> {
        self.mu.iter().map(|m| m[i]).collect()
    }

    /// ξᵢ(tₙ) = μᵢ(tₙ)/μᵢ(0).
    pub fn xi(&self, i: usize) -> Result<Vec<C64>> {
        let first = self.mu.first().ok_or_else(|| Error::GridMismatch("empty series".into()))?[i];
        if first.norm() <= UNEXCITED_THRESHOLD {
            return Err(Error::ModeUnexcited { mode: i, magnitude: first.norm() });
        }
        Ok(self.mu.iter().map(|m| m[i] / first).collect())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for (t, m) in self.times.iter().zip(&self.mu) {
            wtr.serialize(CoefficientRow {
                t: *t,
                re_mu0: m[0].re,
                im_mu0: m[0].im,
                re_mu1: m[1].re,
                im_mu1: m[1].im,
                re_mu2: m[2].re,
                im_mu2: m[2].im,
                re_mu3: m[3].re,
                im_mu3: m[3].im,
            })?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn expand_coefficients(basis: &DampingBasis, times: &[f64], states: &[CMat]) -> Result<CoefficientSeries> {
    if times.len() != states.len() {
        return Err(Error::GridMismatch(format!("{} times for {} states", times.len(), states.len())));
    }
    for s in states {
        if s.shape() != (2, 2) {
            return Err(Error::Dimension { expected: 2, got: s.nrows() });
        }
    }
    Ok(CoefficientSeries {
        times: times.to_vec(),
        mu: states.iter().map(|s| basis.coefficients(s)).collect(),
    })
}

pub fn reconstruct_state(basis: &DampingBasis, mu: &[C64; 4]) -> CMat {
    basis.reconstruct(mu)
}
