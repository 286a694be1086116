use crate::error::{Error, Result};
use crate::linalg::{self, CMat, MatrixJson, ZERO};

use super::state::{devectorize, partial_trace_bipartite, vectorize, Subsystem};

/// Choi matrix χ = Σ_ij |i⟩⟨j| ⊗ Φ(|i⟩⟨j|). The first tensor factor is the
/// channel input, the second is the output.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiMatrix {
    d: usize,
    m: CMat,
}

/// Superoperator acting on column-stacked vectors: vec(Φ(ρ)) = S·vec(ρ).
#[derive(Debug, Clone, PartialEq)]
pub struct SuperoperatorMatrix {
    d: usize,
    m: CMat,
}

fn system_dim(m: &CMat) -> Result<usize> {
    let n = linalg::ensure_square(m)?;
    let d = (n as f64).sqrt().round() as usize;
    if d * d != n || d == 0 {
        return Err(Error::InvalidParameter(format!("{n}×{n} is not a d²×d² matrix")));
    }
    Ok(d)
}

impl ChoiMatrix {
    pub fn new(m: CMat) -> Result<Self> {
        let d = system_dim(&m)?;
        Ok(Self { d, m })
    }

    /// Builds the Choi matrix of a linear map given as a closure on d×d matrices.
    pub fn from_map(d: usize, map: impl Fn(&CMat) -> CMat) -> Self {
        let mut m = CMat::zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                let mut eij = CMat::zeros(d, d);
                eij[(i, j)] = linalg::ONE;
                let out = map(&eij);
                m.view_mut((i * d, j * d), (d, d)).copy_from(&out);
            }
        }
        Self { d, m }
    }

    pub fn identity_channel(d: usize) -> Self {
        Self::from_map(d, |x| x.clone())
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn matrix(&self) -> &CMat {
        &self.m
    }

    pub fn into_matrix(self) -> CMat {
        self.m
    }

    /// Φ(ρ) = Tr_in[χ (ρᵀ ⊗ I)].
    pub fn apply(&self, rho: &CMat) -> Result<CMat> {
        if rho.nrows() != self.d || rho.ncols() != self.d {
            return Err(Error::Dimension { expected: self.d, got: rho.nrows() });
        }
        let prod = &self.m * linalg::kron(&rho.transpose(), &linalg::identity(self.d));
        partial_trace_bipartite(&prod, self.d, self.d, Subsystem::A)
    }

    /// Trace over the output factor; equals I for trace-preserving maps.
    pub fn trace_output(&self) -> CMat {
        partial_trace_bipartite(&self.m, self.d, self.d, Subsystem::B).expect("shape checked")
    }

    /// Trace over the input factor; equals I for unital maps.
    pub fn trace_input(&self) -> CMat {
        partial_trace_bipartite(&self.m, self.d, self.d, Subsystem::A).expect("shape checked")
    }

    pub fn tp_residual(&self) -> f64 {
        linalg::frobenius(&(self.trace_output() - linalg::identity(self.d)))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue(&self.m)
    }

    pub fn to_json(&self) -> MatrixJson {
        MatrixJson::from_matrix(&self.m)
    }

    pub fn from_json(j: &MatrixJson) -> Result<Self> {
        Self::new(j.to_matrix()?)
    }
}

impl SuperoperatorMatrix {
    pub fn new(m: CMat) -> Result<Self> {
        let d = system_dim(&m)?;
        Ok(Self { d, m })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn matrix(&self) -> &CMat {
        &self.m
    }

    pub fn into_matrix(self) -> CMat {
        self.m
    }

    pub fn apply(&self, rho: &CMat) -> Result<CMat> {
        if rho.nrows() != self.d || rho.ncols() != self.d {
            return Err(Error::Dimension { expected: self.d, got: rho.nrows() });
        }
        devectorize(&(&self.m * vectorize(rho)), self.d)
    }

    pub fn compose(&self, other: &SuperoperatorMatrix) -> Result<SuperoperatorMatrix> {
        if self.d != other.d {
            return Err(Error::Dimension { expected: self.d, got: other.d });
        }
        Ok(Self { d: self.d, m: &self.m * &other.m })
    }
}

/// S[(i + d·j), (k + d·ℓ)] = χ[(k·d + i), (ℓ·d + j)].
pub fn reshuffle(chi: &ChoiMatrix) -> SuperoperatorMatrix {
    let d = chi.d;
    let mut s = CMat::from_element(d * d, d * d, ZERO);
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    s[(i + d * j, k + d * l)] = chi.m[(k * d + i, l * d + j)];
                }
            }
        }
    }
    SuperoperatorMatrix { d, m: s }
}

pub fn reshuffle_inverse(s: &SuperoperatorMatrix) -> ChoiMatrix {
    let d = s.d;
    let mut chi = CMat::from_element(d * d, d * d, ZERO);
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    chi[(k * d + i, l * d + j)] = s.m[(i + d * j, k + d * l)];
                }
            }
        }
    }
    ChoiMatrix { d, m: chi }
}
