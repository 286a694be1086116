pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use clap::ValueEnum;
use serde::Serialize;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
use output::{sha256_hex, Manifest, Staging};
use nmq_core::kernel::dominant_frequency;
use pipeline::{KernelRun, Simulation, Tomography};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Simulate,
    Tomo,
    Cpdiv,
    Backflow,
    Crosstalk,
    Fit,
    Kernel,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Tomo => "tomo",
            Command::Cpdiv => "cpdiv",
            Command::Backflow => "backflow",
            Command::Crosstalk => "crosstalk",
            Command::Fit => "fit",
            Command::Kernel => "kernel",
            Command::Report => "report",
        }
    }
}

/// Result of one command: the manifest written and a human-readable summary.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub manifest: Manifest,
    pub summary: String,
}

/// Hash of the effective (post-override) config. The output directory is left
/// out so that identical runs in different places hash the same.
pub fn config_hash(cfg: &ExperimentConfig) -> CliResult<String> {
    let mut c = cfg.clone();
    c.output_dir = Default::default();
    Ok(sha256_hex(&serde_json::to_vec(&c)?))
}

#[derive(Serialize, Default)]
struct Summary {
    cp_div_min: Option<f64>,
    cp_divisible: Option<bool>,
    backflow_intervals: BTreeMap<String, usize>,
    revival_period: BTreeMap<String, Option<f64>>,
    max_mutual_information: Option<f64>,
    fits: BTreeMap<String, serde_json::Value>,
    kernel_peak_frequency: BTreeMap<String, Option<f64>>,
}

/// Dominant angular frequency of k₂ (or k₃) over the confident window.
pub fn kernel_peak_frequency(run: &KernelRun) -> Option<f64> {
    let m = run.estimate.mode(2).or_else(|| run.estimate.mode(3))?;
    let n = run.estimate.confident_len();
    dominant_frequency(&m.samples[..n], run.estimate.grid.dt)
}

fn needs(command: Command, stages: &[Command]) -> bool {
    command == Command::Report || stages.contains(&command)
}

/// Runs `command` for `cfg`, writing artifacts to `cfg.output_dir`. On any
/// error the staged outputs are removed and nothing is moved into place.
pub fn run(command: Command, cfg: &ExperimentConfig) -> CliResult<Outcome> {
    use Command::*;
    cfg.validate()?;
    let mut staging = Staging::new(&cfg.output_dir)?;
    let mut summary = Summary::default();
    let mut text = String::new();

    let sim: Simulation = pipeline::simulate(cfg)?;
    if needs(command, &[Simulate]) {
        for (i, (k, _)) in sim.states.iter().enumerate() {
            let tr = sim.trajectory(i)?;
            staging.write_with(&format!("trajectory_{}.csv", k.slug()), |b| tr.write_csv(b))?;
        }
        writeln!(text, "simulated {} main states on {} points (dt = {} us)", sim.states.len(), sim.times.len(), cfg.grid.dt()).ok();
    }

    let downstream = [Tomo, Cpdiv, Backflow, Fit, Kernel];
    let tomo: Option<Tomography> = if needs(command, &downstream) { Some(pipeline::tomography(cfg, &sim)?) } else { None };

    if let Some(tomo) = &tomo {
        if needs(command, &[Tomo]) {
            for (i, (k, _)) in tomo.states.iter().enumerate() {
                let tr = tomo.trajectory(i)?;
                staging.write_with(&format!("tomo_{}.csv", k.slug()), |b| tr.write_csv(b))?;
            }
            staging.write_json("tomo_states.json", &tomo.states_json())?;
            staging.write_json("tomo_choi.json", &tomo.choi_json())?;
            for (n, rec) in tomo.qpt_records.iter().enumerate() {
                staging.write_with(&format!("records/qpt_{n:03}.csv"), |b| rec.write_csv(b))?;
            }
            for (n, rec) in tomo.qst_records.iter().enumerate() {
                staging.write_with(&format!("records/qst_{n:03}.csv"), |b| rec.write_csv(b))?;
            }
            let worst = tomo.channels.iter().map(|e| e.displacement()).fold(0.0, f64::max);
            writeln!(text, "tomography: {} channels, max projection displacement {worst:.3e}", tomo.channels.len()).ok();
        }
        if needs(command, &[Cpdiv]) {
            let map = pipeline::cpdiv(tomo)?;
            staging.write_with("cpdiv.csv", |b| map.write_csv(b))?;
            staging.write_with("cpdiv.json", |b| map.write_json(b))?;
            let min = map.min();
            let ok = map.is_cp_divisible(cfg.tolerances.cp_div);
            summary.cp_div_min = min;
            summary.cp_divisible = Some(ok);
            writeln!(text, "cp-divisibility: min lambda = {}, divisible = {ok}", fmt_opt(min)).ok();
        }
        if needs(command, &[Backflow]) {
            let series = match pipeline::backflow(cfg, tomo) {
                Ok(s) => s,
                Err(e) if command == Report => {
                    writeln!(text, "backflow skipped: {e}").ok();
                    Vec::new()
                }
                Err(e) => return Err(e),
            };
            for ((a, b), s) in &series {
                let name = format!("{}_{}", a.slug(), b.slug());
                staging.write_with(&format!("backflow_{name}.csv"), |w| s.write_csv(w))?;
                let intervals = s.intervals().len();
                let period = s.revival_period();
                summary.backflow_intervals.insert(name.clone(), intervals);
                summary.revival_period.insert(name.clone(), period);
                writeln!(text, "backflow ({}, {}): {intervals} flagged intervals, revival period {}", a.label(), b.label(), fmt_opt(period)).ok();
            }
        }
    }

    if needs(command, &[Crosstalk]) {
        match pipeline::crosstalk(cfg) {
            Ok(pipeline::Crosstalk { initial, series, records }) => {
                staging.write_with("crosstalk.csv", |b| series.write_csv(b))?;
                for (n, rec) in records.iter().enumerate() {
                    staging.write_with(&format!("records/pair_{n:03}.csv"), |b| rec.write_csv(b))?;
                }
                let mi = series.mutual_information().into_iter().fold(0.0, f64::max);
                summary.max_mutual_information = Some(mi);
                writeln!(text, "crosstalk from |{}>: max I(A:B) = {mi:.4} bits, correlated = {}", initial.label(), series.correlated(cfg.tolerances.correlation)).ok();
            }
            Err(e @ CliError::Unsupported { .. }) if command == Report => {
                writeln!(text, "crosstalk skipped: {e}").ok();
            }
            Err(e) => return Err(e),
        }
    }

    if let Some(tomo) = &tomo {
        if needs(command, &[Fit, Kernel]) {
            let fits = pipeline::fit(cfg, tomo)?;
            if needs(command, &[Fit]) {
                let json: BTreeMap<String, serde_json::Value> =
                    fits.iter().map(|(k, f)| (k.label().to_string(), f.to_json())).collect();
                staging.write_json("fit.json", &json)?;
                for (k, f) in &fits {
                    writeln!(
                        text,
                        "fit |{}>: omega_z = {:.6}, gamma_ad = {:.6}, gamma_pd = {:.6}, mse = {:.3e}",
                        k.label(),
                        f.params.omega_z,
                        f.params.gamma_ad,
                        f.params.gamma_pd,
                        f.mse
                    )
                    .ok();
                }
                summary.fits = json;
            }
            if needs(command, &[Kernel]) {
                for run in pipeline::kernel(cfg, tomo, &fits)? {
                    let slug = run.state.slug();
                    staging.write_with(&format!("coefficients_{slug}.csv"), |b| run.coefficients.write_csv(b))?;
                    staging.write_with(&format!("kernel_{slug}.csv"), |b| run.estimate.write_csv(b))?;
                    let peak = kernel_peak_frequency(&run);
                    summary.kernel_peak_frequency.insert(run.state.label().to_string(), peak);
                    writeln!(text, "kernel |{}>: dominant frequency {} rad/us", run.state.label(), fmt_opt(peak)).ok();
                }
            }
        }
    }

    if command == Report {
        staging.write_json("summary.json", &summary)?;
    }
    let manifest = Manifest {
        tool: "nmq".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.name().into(),
        config_sha256: config_hash(cfg)?,
        seed: cfg.seed,
        shots: cfg.shots,
        files: Vec::new(),
    };
    let manifest = staging.commit(manifest)?;
    Ok(Outcome { manifest, summary: text })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "n/a".into())
}
