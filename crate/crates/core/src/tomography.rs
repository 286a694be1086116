//! Linear-inversion state and process tomography followed by physicality
//! projection.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CVec, DVector};
use crate::measurement::{born_probabilities, pauli_bases, sample_counts_with, Basis, MeasurementRecord};
use crate::quantum::{
    devectorize, project_choi_cptp, project_state_physical, vectorize, ChoiMatrix, DensityMatrix, Ket,
};
use crate::trajectory::BlochTrajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TomographyMode {
    /// State tomography on 1 or 2 qubits.
    Qst { n_qubits: usize },
    /// Single-qubit process tomography.
    Qpt,
}

/// Preparations used for process tomography.
pub const QPT_PREPS: [Ket; 4] = [Ket::Zero, Ket::One, Ket::Plus, Ket::PlusI];

/// Row (prep, basis, outcome) of a design matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Setting {
    pub prep: Option<usize>,
    pub basis: usize,
    pub outcome: usize,
}

#[derive(Debug, Clone)]
pub struct TomographyDesign {
    pub mode: TomographyMode,
    pub bases: Vec<Basis>,
    pub preps: Vec<Ket>,
    pub settings: Vec<Setting>,
    pub matrix: CMat,
    pinv: CMat,
}

pub fn build_design(mode: TomographyMode) -> Result<TomographyDesign> {
    let (n_qubits, preps) = match mode {
        TomographyMode::Qst { n_qubits } if (1..=2).contains(&n_qubits) => (n_qubits, vec![]),
        TomographyMode::Qst { n_qubits } => {
            return Err(Error::InvalidParameter(format!("QST supports 1 or 2 qubits, got {n_qubits}")))
        }
        TomographyMode::Qpt => (1, QPT_PREPS.to_vec()),
    };
    let bases = pauli_bases(n_qubits);
    let mut settings = Vec::new();
    let mut rows: Vec<CVec> = Vec::new();
    let prep_list: Vec<Option<usize>> = if preps.is_empty() { vec![None] } else { (0..preps.len()).map(Some).collect() };
    for &p in &prep_list {
        for (m, b) in bases.iter().enumerate() {
            for (k, e) in b.elements.iter().enumerate() {
                let op = match p {
                    None => e.clone(),
                    Some(p) => linalg::kron(&preps[p].density().matrix().transpose(), e),
                };
                rows.push(vectorize(&op).conjugate());
                settings.push(Setting { prep: p, basis: m, outcome: k });
            }
        }
    }
    let ncols = rows[0].len();
    let matrix = CMat::from_fn(rows.len(), ncols, |i, j| rows[i][j]);
    let rank = linalg::rank(&matrix);
    if rank < ncols {
        return Err(Error::RankDeficient { rank, required: ncols });
    }
    let pinv = linalg::pinv(&matrix);
    Ok(TomographyDesign { mode, bases, preps, settings, matrix, pinv })
}

impl TomographyDesign {
    /// Operator dimension of the reconstructed object (d for states, d² for Choi).
    pub fn operator_dim(&self) -> usize {
        (self.matrix.ncols() as f64).sqrt().round() as usize
    }

    pub fn prep_label(&self, s: &Setting) -> &'static str {
        s.prep.map(|p| self.preps[p].label()).unwrap_or("")
    }

    /// Exact probabilities of a state, ordered like the design rows.
    pub fn state_probabilities(&self, rho: &CMat) -> Result<DVector<f64>> {
        let mut y = Vec::with_capacity(self.settings.len());
        for b in &self.bases {
            y.extend(born_probabilities(rho, b)?);
        }
        Ok(DVector::from_vec(y))
    }

    /// Exact probabilities of a channel given by a map on 2×2 matrices.
    pub fn channel_probabilities(&self, channel: impl Fn(&CMat) -> CMat) -> Result<DVector<f64>> {
        let mut y = Vec::with_capacity(self.settings.len());
        for p in &self.preps {
            let out = channel(p.density().matrix());
            for b in &self.bases {
                y.extend(born_probabilities(&out, b)?);
            }
        }
        Ok(DVector::from_vec(y))
    }

    /// Empirical frequencies from a record, ordered like the design rows.
    pub fn record_probabilities(&self, record: &MeasurementRecord) -> Result<DVector<f64>> {
        let mut y = Vec::with_capacity(self.settings.len());
        for s in &self.settings {
            let prep = self.prep_label(s);
            let b = &self.bases[s.basis];
            let o = &b.outcomes[s.outcome];
            let e = record
                .find(prep, &b.label, o)
                .ok_or_else(|| Error::MissingSetting(format!("prep '{prep}', basis {}, outcome {o}", b.label)))?;
            if e.shots == 0 {
                return Err(Error::MissingSetting(format!("prep '{prep}', basis {} has no shots", b.label)));
            }
            y.push(e.frequency());
        }
        Ok(DVector::from_vec(y))
    }

    /// Raw least-squares operator A⁺y, Hermitized.
    pub fn invert(&self, y: &DVector<f64>) -> Result<CMat> {
        if y.len() != self.settings.len() {
            return Err(Error::Dimension { expected: self.settings.len(), got: y.len() });
        }
        let yc = y.map(|v| c(v, 0.0));
        let x = &self.pinv * yc;
        Ok(linalg::hermitize(&devectorize(&x, self.operator_dim())?))
    }

    /// Σ (A x − y)² for an operator x.
    pub fn misfit(&self, x: &CMat, y: &DVector<f64>) -> f64 {
        let pred = &self.matrix * vectorize(x);
        pred.iter().zip(y.iter()).map(|(p, v)| (p.re - v).powi(2)).sum()
    }
}

#[derive(Debug, Clone)]
pub struct StateEstimate {
    pub raw: CMat,
    pub state: DensityMatrix,
}

#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    pub raw: CMat,
    pub choi: ChoiMatrix,
}

impl StateEstimate {
    pub fn displacement(&self) -> f64 {
        linalg::frobenius(&(self.state.matrix() - &self.raw))
    }
}

impl ChannelEstimate {
    pub fn displacement(&self) -> f64 {
        linalg::frobenius(&(self.choi.matrix() - &self.raw))
    }
}

#[derive(Debug, Clone)]
pub enum Estimate {
    State(StateEstimate),
    Channel(ChannelEstimate),
}

pub fn reconstruct_state(design: &TomographyDesign, y: &DVector<f64>) -> Result<StateEstimate> {
    if design.mode == TomographyMode::Qpt {
        return Err(Error::InvalidParameter("state reconstruction needs a QST design".into()));
    }
    let raw = design.invert(y)?;
    let state = project_state_physical(&raw)?;
    Ok(StateEstimate { raw, state })
}

pub fn reconstruct_channel(design: &TomographyDesign, y: &DVector<f64>) -> Result<ChannelEstimate> {
    if design.mode != TomographyMode::Qpt {
        return Err(Error::InvalidParameter("channel reconstruction needs a QPT design".into()));
    }
    let raw = design.invert(y)?;
    let choi = project_choi_cptp(&raw)?;
    Ok(ChannelEstimate { raw, choi })
}

/// Pseudo-inverse reconstruction from a measurement record, followed by the
/// matching physicality projection.
pub fn reconstruct(design: &TomographyDesign, record: &MeasurementRecord) -> Result<Estimate> {
    let y = design.record_probabilities(record)?;
    match design.mode {
        TomographyMode::Qpt => reconstruct_channel(design, &y).map(Estimate::Channel),
        TomographyMode::Qst { .. } => reconstruct_state(design, &y).map(Estimate::State),
    }
}

/// Single-qubit QST at every time: exact probabilities when `shots` is
/// `None`, otherwise `shots` samples per Pauli basis from one seeded stream.
pub fn qst_bloch_series(times: &[f64], states: &[CMat], shots: Option<u64>, seed: u64) -> Result<BlochTrajectory> {
    if times.len() != states.len() {
        return Err(Error::GridMismatch(format!("{} times for {} states", times.len(), states.len())));
    }
    let design = build_design(TomographyMode::Qst { n_qubits: 1 })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(states.len());
    for rho in states {
        let y = match shots {
            None => design.state_probabilities(rho)?,
            Some(n) => design.record_probabilities(&sample_counts_with(&mut rng, rho, &design.bases, n, "")?)?,
        };
        points.push(reconstruct_state(&design, &y)?.state.bloch()?);
    }
    BlochTrajectory::new(times.to_vec(), points)
}
