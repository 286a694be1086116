use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CVec, MatrixJson, C64, ONE, ZERO};

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-10;

/// A d×d Hermitian, positive semidefinite, unit-trace matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: CMat,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(m: CMat) -> Result<Self> {
        linalg::ensure_square(&m)?;
        let asym = linalg::frobenius(&(&m - m.adjoint()));
        if asym >= HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (|ρ-ρ†| = {asym:.3e})")));
        }
        let tr = m.trace();
        if (tr - ONE).norm() >= TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} is not 1")));
        }
        let m = linalg::hermitize(&m);
        let lmin = linalg::min_eigenvalue(&m);
        if lmin < -PSD_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {lmin:.3e}")));
        }
        Ok(Self { m })
    }

    /// Wraps a matrix known to be physical up to rounding; only symmetrizes.
    pub(crate) fn new_unchecked(m: CMat) -> Self {
        Self { m: linalg::hermitize(&m) }
    }

    pub fn pure(psi: &CVec) -> Self {
        let norm = psi.norm();
        let psi = psi.unscale(norm);
        Self::new_unchecked(&psi * psi.adjoint())
    }

    /// Single-qubit state with Bloch vector (x, y, z), |v| ≤ 1.
    pub fn from_bloch(v: [f64; 3]) -> Result<Self> {
        let r2 = v.iter().map(|x| x * x).sum::<f64>();
        if r2 > 1.0 + 1e-9 {
            return Err(Error::InvalidState(format!("Bloch vector length {} > 1", r2.sqrt())));
        }
        let m = (linalg::identity(2)
            + linalg::pauli_x().scale(v[0])
            + linalg::pauli_y().scale(v[1])
            + linalg::pauli_z().scale(v[2]))
        .scale(0.5);
        Ok(Self::new_unchecked(m))
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self { m: linalg::identity(d).unscale(d as f64) }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.m
    }

    pub fn into_matrix(self) -> CMat {
        self.m
    }

    pub fn purity(&self) -> f64 {
        (&self.m * &self.m).trace().re
    }

    /// Bloch components (⟨σx⟩, ⟨σy⟩, ⟨σz⟩) of a qubit state.
    pub fn bloch(&self) -> Result<[f64; 3]> {
        if self.dim() != 2 {
            return Err(Error::Dimension { expected: 2, got: self.dim() });
        }
        Ok(bloch_of(&self.m))
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        Self { m: linalg::kron(&self.m, &other.m) }
    }

    pub fn to_json(&self) -> MatrixJson {
        MatrixJson::from_matrix(&self.m)
    }

    pub fn from_json(j: &MatrixJson) -> Result<Self> {
        Self::new(j.to_matrix()?)
    }
}

/// Bloch components of any 2×2 matrix, without validation.
pub fn bloch_of(m: &CMat) -> [f64; 3] {
    [
        2.0 * m[(0, 1)].re,
        -2.0 * m[(0, 1)].im,
        (m[(0, 0)] - m[(1, 1)]).re,
    ]
}

/// Named single-qubit pure states used throughout the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ket {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1")]
    One,
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
    #[serde(rename = "+i")]
    PlusI,
    #[serde(rename = "-i")]
    MinusI,
}

impl Ket {
    pub fn label(self) -> &'static str {
        match self {
            Ket::Zero => "0",
            Ket::One => "1",
            Ket::Plus => "+",
            Ket::Minus => "-",
            Ket::PlusI => "+i",
            Ket::MinusI => "-i",
        }
    }

    /// Filesystem-safe name.
    pub fn slug(self) -> &'static str {
        match self {
            Ket::Zero => "zero",
            Ket::One => "one",
            Ket::Plus => "plus",
            Ket::Minus => "minus",
            Ket::PlusI => "plus_i",
            Ket::MinusI => "minus_i",
        }
    }

    pub fn vector(self) -> CVec {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let (a, b) = match self {
            Ket::Zero => (ONE, ZERO),
            Ket::One => (ZERO, ONE),
            Ket::Plus => (c(h, 0.0), c(h, 0.0)),
            Ket::Minus => (c(h, 0.0), c(-h, 0.0)),
            Ket::PlusI => (c(h, 0.0), c(0.0, h)),
            Ket::MinusI => (c(h, 0.0), c(0.0, -h)),
        };
        CVec::from_vec(vec![a, b])
    }

    pub fn density(self) -> DensityMatrix {
        DensityMatrix::pure(&self.vector())
    }

    /// Bloch angles (θ, φ) with |ψ⟩ = cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩.
    pub fn angles(self) -> (f64, f64) {
        use std::f64::consts::{FRAC_PI_2, PI};
        match self {
            Ket::Zero => (0.0, 0.0),
            Ket::One => (PI, 0.0),
            Ket::Plus => (FRAC_PI_2, 0.0),
            Ket::Minus => (FRAC_PI_2, PI),
            Ket::PlusI => (FRAC_PI_2, FRAC_PI_2),
            Ket::MinusI => (FRAC_PI_2, -FRAC_PI_2),
        }
    }
}

/// Column-stacking vectorization: entry (i, j) lands at index i + d·j.
pub fn vectorize(m: &CMat) -> CVec {
    // nalgebra stores matrices column-major, which is exactly column stacking.
    CVec::from_column_slice(m.as_slice())
}

pub fn devectorize(v: &CVec, d: usize) -> Result<CMat> {
    if v.len() != d * d {
        return Err(Error::Dimension { expected: d * d, got: v.len() });
    }
    Ok(CMat::from_column_slice(d, d, v.as_slice()))
}

/// Which factor of a bipartite system to trace out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

/// Partial trace of an operator on C^{da} ⊗ C^{db}; `trace_out` selects the
/// factor that is removed.
pub fn partial_trace_bipartite(m: &CMat, da: usize, db: usize, trace_out: Subsystem) -> Result<CMat> {
    let n = linalg::ensure_square(m)?;
    if n != da * db {
        return Err(Error::Dimension { expected: da * db, got: n });
    }
    Ok(match trace_out {
        Subsystem::B => CMat::from_fn(da, da, |i, j| {
            (0..db).map(|k| m[(i * db + k, j * db + k)]).sum::<C64>()
        }),
        Subsystem::A => CMat::from_fn(db, db, |i, j| {
            (0..da).map(|k| m[(k * db + i, k * db + j)]).sum::<C64>()
        }),
    })
}

/// Two-qubit partial trace. Returns the 2×2 marginal that remains.
pub fn partial_trace(rho_ab: &DensityMatrix, trace_out: Subsystem) -> Result<DensityMatrix> {
    if rho_ab.dim() != 4 {
        return Err(Error::Dimension { expected: 4, got: rho_ab.dim() });
    }
    let m = partial_trace_bipartite(rho_ab.matrix(), 2, 2, trace_out)?;
    Ok(DensityMatrix::new_unchecked(m))
}

/// Reduces an n-qubit operator to the qubits listed in `keep` (ascending,
/// qubit 0 is the most significant tensor factor).
pub fn reduce_qubits(m: &CMat, n_qubits: usize, keep: &[usize]) -> Result<CMat> {
    let dim = linalg::ensure_square(m)?;
    if dim != 1 << n_qubits {
        return Err(Error::Dimension { expected: 1 << n_qubits, got: dim });
    }
    if keep.windows(2).any(|w| w[0] >= w[1]) || keep.iter().any(|&q| q >= n_qubits) {
        return Err(Error::InvalidParameter(format!("bad qubit selection {keep:?}")));
    }
    let traced: Vec<usize> = (0..n_qubits).filter(|q| !keep.contains(q)).collect();
    let bit = |q: usize| 1usize << (n_qubits - 1 - q);
    let embed = |sub: usize, qubits: &[usize]| -> usize {
        qubits
            .iter()
            .enumerate()
            .filter(|(pos, _)| sub & (1 << (qubits.len() - 1 - pos)) != 0)
            .map(|(_, &q)| bit(q))
            .sum()
    };
    let dk = 1 << keep.len();
    let dt = 1 << traced.len();
    let mut out = CMat::zeros(dk, dk);
    for a in 0..dk {
        let ia = embed(a, keep);
        for b in 0..dk {
            let ib = embed(b, keep);
            let mut acc = ZERO;
            for e in 0..dt {
                let ie = embed(e, &traced);
                acc += m[(ia | ie, ib | ie)];
            }
            out[(a, b)] = acc;
        }
    }
    Ok(out)
}
