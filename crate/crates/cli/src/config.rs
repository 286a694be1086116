use std::path::{Path, PathBuf};

use nmq_core::fit::FitOptions;
use nmq_core::kernel::KernelOptions;
use nmq_core::lindblad::LindbladParams;
use nmq_core::quantum::Ket;
use nmq_core::zz::ZZModel;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Main-qubit preparations accepted in `main_states`.
pub const MAIN_STATES: [Ket; 4] = [Ket::Plus, Ket::Minus, Ket::PlusI, Ket::MinusI];
/// Spectator preparations accepted in `spectator_state` (applied to every spectator).
pub const SPECTATOR_STATES: [Ket; 3] = [Ket::Plus, Ket::Zero, Ket::One];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelConfig {
    Zz(ZZModel),
    Lindblad(LindbladParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub points: usize,
    pub gate_duration_ns: f64,
    pub gates_per_step: usize,
    /// Overrides the gate-derived step when set (μs).
    pub dt_us: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { points: 50, gate_duration_ns: 56.0, gates_per_step: 50, dt_us: None }
    }
}

impl GridConfig {
    pub fn dt(&self) -> f64 {
        self.dt_us.unwrap_or(self.gate_duration_ns * self.gates_per_step as f64 * 1e-3)
    }

    pub fn times(&self) -> Vec<f64> {
        nmq_core::trajectory::uniform_times(self.points, self.dt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub cp_div: f64,
    /// Backflow threshold; derived from shots and Δt when absent.
    pub backflow: Option<f64>,
    pub correlation: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            cp_div: nmq_core::diagnostics::CP_TOL_NOISELESS,
            backflow: None,
            correlation: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Starting point; ω_z from the coherence spectrum and 0.01/μs rates when absent.
    pub guess: Option<LindbladParams>,
    pub options: FitOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    #[serde(default = "default_main_states")]
    pub main_states: Vec<Ket>,
    #[serde(default = "default_spectator")]
    pub spectator_state: Ket,
    #[serde(default)]
    pub grid: GridConfig,
    /// Shots per measurement basis; 0 feeds exact probabilities to tomography.
    #[serde(default)]
    pub shots: u64,
    pub seed: Option<u64>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub kernel: KernelOptions,
    #[serde(default)]
    pub fit: FitConfig,
}

fn default_main_states() -> Vec<Ket> {
    MAIN_STATES.to_vec()
}

fn default_spectator() -> Ket {
    Ket::Plus
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        match &self.model {
            ModelConfig::Zz(m) => {
                m.validate().map_err(|e| CliError::Config(e.to_string()))?;
                if m.n_spectators > nmq_core::zz::MAX_SPECTATORS {
                    return bad(format!(
                        "n_spectators = {} exceeds {}",
                        m.n_spectators,
                        nmq_core::zz::MAX_SPECTATORS
                    ));
                }
            }
            ModelConfig::Lindblad(p) => p.validate().map_err(|e| CliError::Config(e.to_string()))?,
        }
        if self.main_states.is_empty() {
            return bad("main_states is empty".into());
        }
        if let Some(k) = self.main_states.iter().find(|k| !MAIN_STATES.contains(k)) {
            return bad(format!("main state '{}' is not one of +, -, +i, -i", k.label()));
        }
        let mut seen = self.main_states.clone();
        seen.sort_by_key(|k| k.label());
        seen.dedup();
        if seen.len() != self.main_states.len() {
            return bad("main_states contains duplicates".into());
        }
        if !SPECTATOR_STATES.contains(&self.spectator_state) {
            return bad(format!("spectator state '{}' is not one of +, 0, 1", self.spectator_state.label()));
        }
        if self.grid.points < nmq_core::fit::MIN_FIT_POINTS {
            return bad(format!("grid needs at least {} points", nmq_core::fit::MIN_FIT_POINTS));
        }
        let dt = self.grid.dt();
        if !(dt > 0.0 && dt.is_finite()) {
            return bad(format!("time step {dt} μs must be positive"));
        }
        if self.shots > 0 && self.seed.is_none() {
            return bad("a seed is required when shots > 0".into());
        }
        if !(self.tolerances.cp_div >= 0.0) || !(self.tolerances.correlation >= 0.0) {
            return bad("tolerances must be non-negative".into());
        }
        if self.tolerances.backflow.is_some_and(|t| !(t >= 0.0)) {
            return bad("backflow tolerance must be non-negative".into());
        }
        Ok(())
    }

    pub fn n_spectators(&self) -> usize {
        match &self.model {
            ModelConfig::Zz(m) => m.n_spectators,
            ModelConfig::Lindblad(_) => 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}
