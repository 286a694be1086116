//! Non-Markovianity and crosstalk witnesses on time-indexed reconstructions.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::quantum::entropy::{relative_entropy_raw, trace_distance_raw};
use crate::quantum::{entropies, reshuffle, reshuffle_inverse, ChoiMatrix, DensityMatrix, Entropies, SuperoperatorMatrix};

/// Default CP-divisibility tolerance for noiseless data.
pub const CP_TOL_NOISELESS: f64 = 1e-7;
/// Backflow threshold for noiseless data.
pub const BACKFLOW_TOL_NOISELESS: f64 = 1e-9;

/// Choi matrices of the dynamical map Φ_t on a time grid.
#[derive(Debug, Clone)]
pub struct ChoiSeries {
    pub times: Vec<f64>,
    pub chois: Vec<ChoiMatrix>,
}

impl ChoiSeries {
    pub fn new(times: Vec<f64>, chois: Vec<ChoiMatrix>) -> Result<Self> {
        if times.len() != chois.len() {
            return Err(Error::GridMismatch(format!("{} times for {} Choi matrices", times.len(), chois.len())));
        }
        Ok(Self { times, chois })
    }
}

/// λ_min of the intermediate maps χ_{t,s}, indexed `[t][s]`; `None` for
/// s > t and for cells whose S_s is entirely singular.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpDivMap {
    pub times: Vec<f64>,
    pub lambda_min: Vec<Vec<Option<f64>>>,
}

#[derive(Serialize)]
struct CpDivRow {
    s: f64,
    t: f64,
    lambda_min: Option<f64>,
}

impl CpDivMap {
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, Option<f64>)> + '_ {
        self.lambda_min
            .iter()
            .enumerate()
            .flat_map(|(t, row)| row.iter().enumerate().take(t + 1).map(move |(s, v)| (s, t, *v)))
    }

    /// Smallest defined λ_min over all s ≤ t cells.
    pub fn min(&self) -> Option<f64> {
        self.cells().filter_map(|(_, _, v)| v).reduce(f64::min)
    }

    /// True when no defined cell falls below −tol.
    pub fn is_cp_divisible(&self, tol: f64) -> bool {
        self.min().is_none_or(|m| m >= -tol)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for (s, t, v) in self.cells() {
            wtr.serialize(CpDivRow { s: self.times[s], t: self.times[t], lambda_min: v })?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}

/// λ_min of the Hermitized Choi matrix of S_t S_s⁺ for every s ≤ t.
pub fn cp_divisibility_map(series: &ChoiSeries) -> Result<CpDivMap> {
    let n = series.times.len();
    if n < 2 {
        return Err(Error::GridMismatch("CP-divisibility needs at least two time points".into()));
    }
    let supers: Vec<SuperoperatorMatrix> = series.chois.iter().map(reshuffle).collect();
    let inverses: Vec<Option<CMat>> = supers
        .iter()
        .map(|s| {
            let smax = linalg::singular_values(s.matrix()).into_iter().fold(0.0, f64::max);
            (smax > 0.0).then(|| linalg::pinv(s.matrix()))
        })
        .collect();
    let mut lambda_min = vec![vec![None; n]; n];
    for t in 0..n {
        for s in 0..=t {
            let Some(inv) = &inverses[s] else { continue };
            let inter = SuperoperatorMatrix::new(supers[t].matrix() * inv)?;
            let chi = reshuffle_inverse(&inter);
            lambda_min[t][s] = Some(linalg::min_eigenvalue(&linalg::hermitize(chi.matrix())));
        }
    }
    Ok(CpDivMap { times: series.times.clone(), lambda_min })
}

/// Distinguishability of two evolved states and its discrete time derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct BackflowSeries {
    pub times: Vec<f64>,
    pub trace_distance: Vec<f64>,
    /// D(ρ₁‖ρ₂) in bits; `f64::INFINITY` where the support condition fails.
    pub relative_entropy: Vec<f64>,
    /// (T_n − T_{n−1})/Δt, zero at n = 0.
    pub sigma_trace: Vec<f64>,
    /// (D_n − D_{n−1})/Δt, NaN where either value is infinite.
    pub sigma_entropy: Vec<f64>,
    pub threshold: f64,
    pub flags: Vec<bool>,
    pub entropy_flags: Vec<bool>,
}

#[derive(Serialize)]
struct BackflowRow {
    t: f64,
    trace_distance: f64,
    relative_entropy: f64,
    sigma_trace: f64,
    sigma_entropy: f64,
    backflow: bool,
    entropy_backflow: bool,
}

impl BackflowSeries {
    /// Maximal runs of flagged samples as (start index, end index), inclusive.
    pub fn intervals(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut start = None;
        for (n, &f) in self.flags.iter().enumerate() {
            match (f, start) {
                (true, None) => start = Some(n),
                (false, Some(s)) => {
                    out.push((s, n - 1));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            out.push((s, self.flags.len() - 1));
        }
        out
    }

    pub fn any_flag(&self) -> bool {
        self.flags.iter().any(|&f| f)
    }

    /// Mean spacing between onsets of consecutive backflow intervals.
    pub fn revival_period(&self) -> Option<f64> {
        let onsets: Vec<f64> = self.intervals().iter().map(|&(s, _)| self.times[s]).collect();
        if onsets.len() < 2 {
            return None;
        }
        Some((onsets[onsets.len() - 1] - onsets[0]) / (onsets.len() - 1) as f64)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for n in 0..self.times.len() {
            wtr.serialize(BackflowRow {
                t: self.times[n],
                trace_distance: self.trace_distance[n],
                relative_entropy: self.relative_entropy[n],
                sigma_trace: self.sigma_trace[n],
                sigma_entropy: self.sigma_entropy[n],
                backflow: self.flags[n],
                entropy_backflow: self.entropy_flags[n],
            })?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Flag threshold 3× the propagated shot-noise std of the finite difference
/// of T; `shots == 0` means noiseless.
pub fn backflow_threshold(shots: u64, dt: f64) -> f64 {
    if shots == 0 {
        BACKFLOW_TOL_NOISELESS
    } else {
        3.0 * std::f64::consts::SQRT_2 / ((shots as f64).sqrt() * dt)
    }
}

pub fn backflow_series(times: &[f64], rho1: &[CMat], rho2: &[CMat], threshold: f64) -> Result<BackflowSeries> {
    if rho1.len() != times.len() || rho2.len() != times.len() {
        return Err(Error::GridMismatch(format!(
            "{} times, {} and {} states",
            times.len(),
            rho1.len(),
            rho2.len()
        )));
    }
    let trace_distance = rho1
        .iter()
        .zip(rho2)
        .map(|(a, b)| trace_distance_raw(a, b))
        .collect::<Result<Vec<_>>>()?;
    let relative_entropy = rho1
        .iter()
        .zip(rho2)
        .map(|(a, b)| match relative_entropy_raw(a, b) {
            Err(Error::InfiniteDivergence) => Ok(f64::INFINITY),
            other => other,
        })
        .collect::<Result<Vec<_>>>()?;
    let derivative = |v: &[f64]| -> Vec<f64> {
        (0..v.len())
            .map(|n| {
                if n == 0 {
                    0.0
                } else if v[n].is_finite() && v[n - 1].is_finite() {
                    (v[n] - v[n - 1]) / (times[n] - times[n - 1])
                } else {
                    f64::NAN
                }
            })
            .collect()
    };
    let sigma_trace = derivative(&trace_distance);
    let sigma_entropy = derivative(&relative_entropy);
    let flags = sigma_trace.iter().map(|&s| s > threshold).collect();
    let entropy_flags = sigma_entropy.iter().map(|&s| s > threshold).collect();
    Ok(BackflowSeries {
        times: times.to_vec(),
        trace_distance,
        relative_entropy,
        sigma_trace,
        sigma_entropy,
        threshold,
        flags,
        entropy_flags,
    })
}

/// Information metrics of a two-qubit state series.
#[derive(Debug, Clone, PartialEq)]
pub struct CrosstalkSeries {
    pub times: Vec<f64>,
    pub metrics: Vec<Entropies>,
    pub tolerance: f64,
    /// S(A|B) < −tolerance, a sufficient entanglement witness.
    pub entangled: Vec<bool>,
}

#[derive(Serialize)]
struct CrosstalkRow {
    t: f64,
    s_a: f64,
    s_b: f64,
    s_ab: f64,
    mutual_information: f64,
    conditional_entropy: f64,
    purity: f64,
    entangled: bool,
}

impl CrosstalkSeries {
    pub fn mutual_information(&self) -> Vec<f64> {
        self.metrics.iter().map(|m| m.mutual_information).collect()
    }

    /// Any positive mutual information above `tol` witnesses correlations.
    pub fn correlated(&self, tol: f64) -> bool {
        self.metrics.iter().any(|m| m.mutual_information > tol)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for ((t, m), e) in self.times.iter().zip(&self.metrics).zip(&self.entangled) {
            wtr.serialize(CrosstalkRow {
                t: *t,
                s_a: m.s_a,
                s_b: m.s_b,
                s_ab: m.s_ab,
                mutual_information: m.mutual_information,
                conditional_entropy: m.conditional_entropy,
                purity: m.purity,
                entangled: *e,
            })?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn crosstalk_metrics(times: &[f64], states: &[DensityMatrix], tolerance: f64) -> Result<CrosstalkSeries> {
    if times.len() != states.len() {
        return Err(Error::GridMismatch(format!("{} times for {} states", times.len(), states.len())));
    }
    let metrics = states.iter().map(entropies).collect::<Result<Vec<_>>>()?;
    let entangled = metrics.iter().map(|m| m.conditional_entropy < -tolerance).collect();
    Ok(CrosstalkSeries { times: times.to_vec(), metrics, tolerance, entangled })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, CVec, ZERO};
    use crate::lindblad::{damping_basis, LindbladParams};
    use crate::quantum::Ket;

    fn lindblad_series(p: &LindbladParams, times: &[f64]) -> ChoiSeries {
        let b = damping_basis(p);
        let chois = times.iter().map(|&t| reshuffle_inverse(&b.propagator(t))).collect();
        ChoiSeries::new(times.to_vec(), chois).unwrap()
    }

    #[test]
    fn semigroup_is_cp_divisible() {
        let p = LindbladParams::new(0.7, 0.05, 0.02).unwrap();
        let times: Vec<f64> = (0..15).map(|n| n as f64 * 2.8).collect();
        let map = cp_divisibility_map(&lindblad_series(&p, &times)).unwrap();
        assert!(map.min().unwrap() >= -CP_TOL_NOISELESS);
        for t in 0..times.len() {
            assert!(map.lambda_min[t][t].unwrap().abs() < 1e-9);
            for s in t + 1..times.len() {
                assert!(map.lambda_min[t][s].is_none());
            }
        }
    }

    #[test]
    fn singular_map_is_undefined() {
        let zero = ChoiMatrix::new(CMat::zeros(4, 4)).unwrap();
        let series = ChoiSeries::new(vec![0.0, 1.0], vec![ChoiMatrix::identity_channel(2), zero]).unwrap();
        let map = cp_divisibility_map(&series).unwrap();
        assert_eq!(map.lambda_min[1][1], None);
        assert!(map.lambda_min[1][0].is_some());
    }

    #[test]
    fn cpdiv_csv_has_triangle_only() {
        let p = LindbladParams::new(0.7, 0.05, 0.02).unwrap();
        let map = cp_divisibility_map(&lindblad_series(&p, &[0.0, 1.0, 2.0])).unwrap();
        let mut buf = Vec::new();
        map.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("s,t,lambda_min\n"));
        assert_eq!(text.lines().count(), 1 + 6);
    }

    #[test]
    fn identical_series_has_no_backflow() {
        let rho: Vec<CMat> = (0..5).map(|_| Ket::Plus.density().into_matrix()).collect();
        let times: Vec<f64> = (0..5).map(|n| n as f64).collect();
        let b = backflow_series(&times, &rho, &rho, BACKFLOW_TOL_NOISELESS).unwrap();
        assert!(b.trace_distance.iter().all(|&t| t.abs() < 1e-15));
        assert!(!b.any_flag());
        assert!(b.intervals().is_empty());
    }

    #[test]
    fn markovian_pair_contracts() {
        let p = LindbladParams::new(1.0, 0.03, 0.02).unwrap();
        let basis = damping_basis(&p);
        let times: Vec<f64> = (0..50).map(|n| n as f64 * 2.8).collect();
        let evolve = |k: Ket| -> Vec<CMat> {
            times.iter().map(|&t| basis.propagator(t).apply(k.density().matrix()).unwrap()).collect()
        };
        let b = backflow_series(&times, &evolve(Ket::Plus), &evolve(Ket::Minus), BACKFLOW_TOL_NOISELESS).unwrap();
        assert!(!b.any_flag());
        for (t, d) in times.iter().zip(&b.trace_distance) {
            assert!((d - (-p.transverse_rate() * t).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn disjoint_support_gives_infinite_entropy() {
        let a = vec![Ket::Zero.density().into_matrix()];
        let b = vec![Ket::One.density().into_matrix()];
        let s = backflow_series(&[0.0], &a, &b, 0.0).unwrap();
        assert!(s.relative_entropy[0].is_infinite());
        assert!((s.trace_distance[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn intervals_and_period() {
        let times: Vec<f64> = (0..10).map(|n| n as f64).collect();
        let b = BackflowSeries {
            times: times.clone(),
            trace_distance: vec![0.0; 10],
            relative_entropy: vec![0.0; 10],
            sigma_trace: vec![0.0; 10],
            sigma_entropy: vec![0.0; 10],
            threshold: 0.0,
            flags: vec![false, true, true, false, false, true, false, false, false, true],
            entropy_flags: vec![false; 10],
        };
        assert_eq!(b.intervals(), vec![(1, 2), (5, 5), (9, 9)]);
        assert_eq!(b.revival_period(), Some(4.0));
    }

    #[test]
    fn bell_state_crosstalk_flag() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = DensityMatrix::pure(&CVec::from_vec(vec![c(h, 0.0), ZERO, ZERO, c(h, 0.0)]));
        let s = crosstalk_metrics(&[0.0], &[bell], 1e-9).unwrap();
        assert!((s.metrics[0].mutual_information - 2.0).abs() < 1e-12);
        assert!(s.entangled[0]);
    }

    #[test]
    fn zz_evolution_maximally_entangles() {
        // exp(−i (J/2) Z⊗Z t) on |+⟩|+⟩ at Jt = π/2.
        let j: f64 = 0.3;
        let t = std::f64::consts::FRAC_PI_2 / j;
        let plus = Ket::Plus.vector();
        let psi = plus.kronecker(&plus);
        let phases = [1.0, -1.0, -1.0, 1.0];
        let evolved = CVec::from_fn(4, |i, _| psi[i] * c(0.0, -0.5 * j * t * phases[i]).exp());
        let s = crosstalk_metrics(&[t], &[DensityMatrix::pure(&evolved)], 1e-9).unwrap();
        assert!((s.metrics[0].mutual_information - 2.0).abs() < 1e-12);
        assert!((s.metrics[0].conditional_entropy + 1.0).abs() < 1e-12);
    }
}
