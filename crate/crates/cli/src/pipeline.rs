//! Experiment stages: simulate → measure/reconstruct → diagnose → fit →
//! extract kernel. Each stage is a plain function of the config and the
//! previous stage's output.

use std::collections::BTreeMap;

use nmq_core::diagnostics::{
    backflow_series, backflow_threshold, cp_divisibility_map, crosstalk_metrics, BackflowSeries, ChoiSeries, CpDivMap,
    CrosstalkSeries, BACKFLOW_TOL_NOISELESS,
};
use nmq_core::fit::{fit_parameters, spectral_omega, FitOptions, FitResult};
use nmq_core::kernel::{reconstruct_kernel, KernelEstimate};
use nmq_core::lindblad::{damping_basis, expand_coefficients, lindblad_choi, CoefficientSeries, LindbladParams};
use nmq_core::linalg::{CMat, DVector, MatrixJson};
use nmq_core::measurement::{sample_counts_with, MeasurementRecord};
use nmq_core::quantum::{ChoiMatrix, DensityMatrix, Ket};
use nmq_core::tomography::{
    build_design, reconstruct_channel, reconstruct_state, ChannelEstimate, StateEstimate, TomographyDesign,
    TomographyMode,
};
use nmq_core::trajectory::BlochTrajectory;
use nmq_core::zz::{pair_states, reduced_choi_series, ProductState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{ExperimentConfig, ModelConfig};
use crate::error::{CliError, CliResult};

/// Random streams of the single config seed, one per stochastic stage.
const STREAM_QPT: u64 = 1;
const STREAM_QST: u64 = 16;
const STREAM_PAIR: u64 = 2;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Exact dynamics of the main qubit.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub times: Vec<f64>,
    /// Choi matrices of the reduced main-qubit maps Φ_t.
    pub channels: Vec<ChoiMatrix>,
    pub states: Vec<(Ket, Vec<CMat>)>,
}

impl Simulation {
    pub fn trajectory(&self, i: usize) -> CliResult<BlochTrajectory> {
        let points = self.states[i].1.iter().map(nmq_core::quantum::bloch_of).collect();
        Ok(BlochTrajectory::new(self.times.clone(), points)?)
    }
}

pub fn simulate(cfg: &ExperimentConfig) -> CliResult<Simulation> {
    let times = cfg.grid.times();
    let channels = match &cfg.model {
        ModelConfig::Zz(m) => {
            let spectators = ProductState::from_kets(&vec![cfg.spectator_state; m.n_spectators]);
            reduced_choi_series(m, &spectators, &times)?
        }
        ModelConfig::Lindblad(p) => {
            let basis = damping_basis(p);
            times.iter().map(|&t| lindblad_choi(&basis, t)).collect()
        }
    };
    let mut states = Vec::new();
    for &k in &cfg.main_states {
        let rho0 = k.density();
        let series = channels.iter().map(|chi| chi.apply(rho0.matrix())).collect::<nmq_core::Result<Vec<_>>>()?;
        states.push((k, series));
    }
    Ok(Simulation { times, channels, states })
}

#[derive(Debug, Clone)]
pub struct Tomography {
    pub times: Vec<f64>,
    pub channels: Vec<ChannelEstimate>,
    pub states: Vec<(Ket, Vec<StateEstimate>)>,
    /// Sampled records per time step (empty in noiseless mode).
    pub qpt_records: Vec<MeasurementRecord>,
    pub qst_records: Vec<MeasurementRecord>,
}

impl Tomography {
    pub fn trajectory(&self, i: usize) -> CliResult<BlochTrajectory> {
        let points = self.states[i]
            .1
            .iter()
            .map(|e| e.state.bloch())
            .collect::<nmq_core::Result<Vec<_>>>()?;
        Ok(BlochTrajectory::new(self.times.clone(), points)?)
    }

    pub fn state_matrices(&self, i: usize) -> Vec<CMat> {
        self.states[i].1.iter().map(|e| e.state.matrix().clone()).collect()
    }

    pub fn choi_series(&self) -> CliResult<ChoiSeries> {
        Ok(ChoiSeries::new(self.times.clone(), self.channels.iter().map(|e| e.choi.clone()).collect())?)
    }

    pub fn index_of(&self, k: Ket) -> Option<usize> {
        self.states.iter().position(|(s, _)| *s == k)
    }
}

/// Exact probabilities, or sampled frequencies together with their record.
fn measure_state(
    design: &TomographyDesign,
    rho: &CMat,
    shots: u64,
    rng: &mut ChaCha8Rng,
    prep: &str,
) -> CliResult<(DVector<f64>, Option<MeasurementRecord>)> {
    if shots == 0 {
        return Ok((design.state_probabilities(rho)?, None));
    }
    let mut rec = sample_counts_with(rng, rho, &design.bases, shots, "")?;
    let y = design.record_probabilities(&rec)?;
    // The prep column names the main-state preparation in the written record.
    for e in &mut rec.entries {
        e.prep = prep.to_string();
    }
    Ok((y, Some(rec)))
}

pub fn tomography(cfg: &ExperimentConfig, sim: &Simulation) -> CliResult<Tomography> {
    let qpt = build_design(TomographyMode::Qpt)?;
    let qst = build_design(TomographyMode::Qst { n_qubits: 1 })?;
    let shots = cfg.shots;
    let seed = cfg.seed();

    let mut qpt_rng = rng(seed, STREAM_QPT);
    let mut channels = Vec::with_capacity(sim.times.len());
    let mut qpt_records = Vec::new();
    for chi in &sim.channels {
        let y = if shots == 0 {
            qpt.channel_probabilities(|x| chi.apply(x).expect("2×2 input"))?
        } else {
            let mut rec = MeasurementRecord::default();
            for p in &qpt.preps {
                let out = chi.apply(p.density().matrix())?;
                rec.extend(sample_counts_with(&mut qpt_rng, &out, &qpt.bases, shots, p.label())?);
            }
            let y = qpt.record_probabilities(&rec)?;
            qpt_records.push(rec);
            y
        };
        channels.push(reconstruct_channel(&qpt, &y)?);
    }

    let mut states = Vec::new();
    let mut per_time: Vec<MeasurementRecord> = vec![MeasurementRecord::default(); sim.times.len()];
    for (i, (k, series)) in sim.states.iter().enumerate() {
        let mut r = rng(seed, STREAM_QST + i as u64);
        let mut est = Vec::with_capacity(series.len());
        for (n, rho) in series.iter().enumerate() {
            let (y, rec) = measure_state(&qst, rho, shots, &mut r, k.label())?;
            if let Some(rec) = rec {
                per_time[n].extend(rec);
            }
            est.push(reconstruct_state(&qst, &y)?);
        }
        states.push((*k, est));
    }
    let qst_records = if shots == 0 { Vec::new() } else { per_time };
    Ok(Tomography { times: sim.times.clone(), channels, states, qpt_records, qst_records })
}

pub fn cpdiv(tomo: &Tomography) -> CliResult<CpDivMap> {
    Ok(cp_divisibility_map(&tomo.choi_series()?)?)
}

pub const BACKFLOW_PAIRS: [(Ket, Ket); 2] = [(Ket::Plus, Ket::Minus), (Ket::PlusI, Ket::MinusI)];

pub fn backflow_tolerance(cfg: &ExperimentConfig) -> f64 {
    cfg.tolerances.backflow.unwrap_or_else(|| {
        if cfg.shots == 0 {
            BACKFLOW_TOL_NOISELESS
        } else {
            backflow_threshold(cfg.shots, cfg.grid.dt())
        }
    })
}

/// Trace-distance series for every orthogonal pair among the main states.
pub fn backflow(cfg: &ExperimentConfig, tomo: &Tomography) -> CliResult<Vec<((Ket, Ket), BackflowSeries)>> {
    let threshold = backflow_tolerance(cfg);
    let mut out = Vec::new();
    for (a, b) in BACKFLOW_PAIRS {
        if let (Some(i), Some(j)) = (tomo.index_of(a), tomo.index_of(b)) {
            let s = backflow_series(&tomo.times, &tomo.state_matrices(i), &tomo.state_matrices(j), threshold)?;
            out.push(((a, b), s));
        }
    }
    if out.is_empty() {
        return Err(CliError::Unsupported {
            command: "backflow",
            reason: "main_states must contain an orthogonal pair (+, -) or (+i, -i)".into(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Crosstalk {
    pub initial: Ket,
    pub series: CrosstalkSeries,
    pub records: Vec<MeasurementRecord>,
}

/// Two-qubit tomography of the main qubit and the first spectator, starting
/// from the first main state.
pub fn crosstalk(cfg: &ExperimentConfig) -> CliResult<Crosstalk> {
    let ModelConfig::Zz(model) = &cfg.model else {
        return Err(CliError::Unsupported { command: "crosstalk", reason: "needs a ZZ model".into() });
    };
    if model.n_spectators == 0 {
        return Err(CliError::Unsupported { command: "crosstalk", reason: "needs at least one spectator".into() });
    }
    let times = cfg.grid.times();
    let main = cfg.main_states[0];
    let mut kets = vec![main];
    kets.extend(std::iter::repeat_n(cfg.spectator_state, model.n_spectators));
    let init = ProductState::from_kets(&kets).density();
    let pairs = pair_states(model, &init, &times)?;
    let design = build_design(TomographyMode::Qst { n_qubits: 2 })?;
    let mut r = rng(cfg.seed(), STREAM_PAIR);
    let mut states: Vec<DensityMatrix> = Vec::with_capacity(pairs.len());
    let mut records = Vec::new();
    for rho in &pairs {
        let (y, rec) = measure_state(&design, rho.matrix(), cfg.shots, &mut r, main.label())?;
        records.extend(rec);
        states.push(reconstruct_state(&design, &y)?.state);
    }
    let series = crosstalk_metrics(&times, &states, cfg.tolerances.correlation)?;
    Ok(Crosstalk { initial: main, series, records })
}

fn fit_guess(cfg: &ExperimentConfig, trajectory: &BlochTrajectory) -> LindbladParams {
    cfg.fit.guess.unwrap_or(LindbladParams {
        omega_z: spectral_omega(trajectory).unwrap_or(0.0),
        gamma_ad: 0.01,
        gamma_pd: 0.01,
    })
}

/// Lindblad fit to each reconstructed main-state trajectory.
pub fn fit(cfg: &ExperimentConfig, tomo: &Tomography) -> CliResult<Vec<(Ket, FitResult)>> {
    let mut out = Vec::new();
    for (i, (k, _)) in tomo.states.iter().enumerate() {
        let tr = tomo.trajectory(i)?;
        let options = FitOptions {
            initial_bloch: Some(k.density().bloch()?),
            ..cfg.fit.options
        };
        out.push((*k, fit_parameters(&tr, &fit_guess(cfg, &tr), &options)?));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct KernelRun {
    pub state: Ket,
    pub coefficients: CoefficientSeries,
    pub estimate: KernelEstimate,
}

/// Damping-basis expansion in the fitted basis and kernel inversion, per main state.
pub fn kernel(cfg: &ExperimentConfig, tomo: &Tomography, fits: &[(Ket, FitResult)]) -> CliResult<Vec<KernelRun>> {
    let mut out = Vec::new();
    for (i, (k, fit)) in fits.iter().enumerate() {
        let basis = damping_basis(&fit.params);
        let coefficients = expand_coefficients(&basis, &tomo.times, &tomo.state_matrices(i))?;
        let estimate = reconstruct_kernel(&coefficients, &basis, &cfg.kernel)?;
        out.push(KernelRun { state: *k, coefficients, estimate });
    }
    Ok(out)
}

#[derive(Serialize)]
pub struct StatesJson {
    pub times: Vec<f64>,
    pub states: BTreeMap<String, Vec<MatrixJson>>,
}

#[derive(Serialize)]
pub struct ChoiJson {
    pub times: Vec<f64>,
    pub raw: Vec<MatrixJson>,
    pub choi: Vec<MatrixJson>,
}

impl Tomography {
    pub fn states_json(&self) -> StatesJson {
        StatesJson {
            times: self.times.clone(),
            states: self
                .states
                .iter()
                .map(|(k, v)| (k.label().to_string(), v.iter().map(|e| e.state.to_json()).collect()))
                .collect(),
        }
    }

    pub fn choi_json(&self) -> ChoiJson {
        ChoiJson {
            times: self.times.clone(),
            raw: self.channels.iter().map(|e| MatrixJson::from_matrix(&e.raw)).collect(),
            choi: self.channels.iter().map(|e| e.choi.to_json()).collect(),
        }
    }
}
