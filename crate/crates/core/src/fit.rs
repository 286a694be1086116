//! Least-squares fit of (ω_z, γ_AD, γ_PD) to a main-qubit Bloch trajectory.
//!
//! BFGS in (ω_z, ln γ_AD, ln γ_PD) with central finite-difference gradients
//! and Armijo backtracking, restarted from several deterministic guesses.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lindblad::{bloch_at, DampingBasis, LindbladParams};
use crate::trajectory::BlochTrajectory;

pub const MIN_FIT_POINTS: usize = 10;
/// Rates below this are clamped before taking logarithms.
const RATE_FLOOR: f64 = 1e-9;

/// MSE = (1/3N) Σₙ Σᵢ (vᵢ(tₙ) − v̂ᵢ(tₙ))², with v̂ propagated from `v0` at the
/// first sample time.
pub fn mse_loss_from(params: &LindbladParams, trajectory: &BlochTrajectory, v0: [f64; 3]) -> Result<f64> {
    if trajectory.is_empty() {
        return Err(Error::GridMismatch("empty trajectory".into()));
    }
    if trajectory.times.len() != trajectory.points.len() {
        return Err(Error::GridMismatch("times and points differ in length".into()));
    }
    let basis = DampingBasis::new(params);
    let t0 = trajectory.times[0];
    let mut acc = 0.0;
    for (&t, v) in trajectory.times.iter().zip(&trajectory.points) {
        let m = bloch_at(&basis, v0, t - t0);
        acc += (0..3).map(|i| (v[i] - m[i]).powi(2)).sum::<f64>();
    }
    Ok(acc / (3.0 * trajectory.len() as f64))
}

/// MSE with the model started from the trajectory's first point.
pub fn mse_loss(params: &LindbladParams, trajectory: &BlochTrajectory) -> Result<f64> {
    let v0 = *trajectory.points.first().ok_or_else(|| Error::GridMismatch("empty trajectory".into()))?;
    mse_loss_from(params, trajectory, v0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub max_iters: usize,
    /// Stop when |Δloss| / loss falls below this.
    pub rel_tol: f64,
    /// Jittered starts, the first being the unjittered guess.
    pub n_starts: usize,
    pub seed: u64,
    /// Add a start whose ω_z is the peak of the coherence spectrum.
    pub spectral_seed: bool,
    /// Relative central-difference step.
    pub fd_step: f64,
    /// Known initial Bloch vector; the first data point is used otherwise.
    pub initial_bloch: Option<[f64; 3]>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iters: 10_000,
            rel_tol: 1e-10,
            n_starts: 5,
            seed: 0,
            spectral_seed: true,
            fd_step: 1e-6,
            initial_bloch: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sensitivities {
    pub omega_z: f64,
    pub gamma_ad: f64,
    pub gamma_pd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: LindbladParams,
    pub mse: f64,
    /// Loss at the caller's guess.
    pub initial_mse: f64,
    pub iters: usize,
    pub converged: bool,
    /// ∂²MSE/∂p² at the optimum, by central differences in natural units.
    pub sensitivities: Sensitivities,
}

#[derive(Serialize, Deserialize)]
struct FitJson {
    omega_z: f64,
    gamma_ad: f64,
    gamma_pd: f64,
    mse: f64,
    iters: usize,
    converged: bool,
    sensitivities: Sensitivities,
}

impl FitResult {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(FitJson {
            omega_z: self.params.omega_z,
            gamma_ad: self.params.gamma_ad,
            gamma_pd: self.params.gamma_pd,
            mse: self.mse,
            iters: self.iters,
            converged: self.converged,
            sensitivities: self.sensitivities.clone(),
        })
        .expect("plain data")
    }
}

fn to_coords(p: &LindbladParams) -> [f64; 3] {
    [p.omega_z, p.gamma_ad.max(RATE_FLOOR).ln(), p.gamma_pd.max(RATE_FLOOR).ln()]
}

fn from_coords(x: &[f64; 3]) -> LindbladParams {
    LindbladParams { omega_z: x[0], gamma_ad: x[1].exp(), gamma_pd: x[2].exp() }
}

struct Objective<'a> {
    trajectory: &'a BlochTrajectory,
    v0: [f64; 3],
    fd_step: f64,
}

impl Objective<'_> {
    fn value(&self, x: &[f64; 3]) -> Result<f64> {
        let f = mse_loss_from(&from_coords(x), self.trajectory, self.v0)?;
        if !f.is_finite() {
            return Err(Error::NonFiniteLoss);
        }
        Ok(f)
    }

    fn gradient(&self, x: &[f64; 3]) -> Result<[f64; 3]> {
        let mut g = [0.0; 3];
        for i in 0..3 {
            let h = self.fd_step * x[i].abs().max(1.0);
            let (mut a, mut b) = (*x, *x);
            a[i] += h;
            b[i] -= h;
            g[i] = (self.value(&a)? - self.value(&b)?) / (2.0 * h);
        }
        Ok(g)
    }
}

/// Central-difference gradient of the MSE in (ω_z, ln γ_AD, ln γ_PD), the
/// estimate the optimizer uses.
pub fn gradient(params: &LindbladParams, trajectory: &BlochTrajectory, options: &FitOptions) -> Result<[f64; 3]> {
    let v0 = options
        .initial_bloch
        .or(trajectory.points.first().copied())
        .ok_or_else(|| Error::GridMismatch("empty trajectory".into()))?;
    Objective { trajectory, v0, fd_step: options.fd_step }.gradient(&to_coords(params))
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Run {
    x: [f64; 3],
    f: f64,
    iters: usize,
    converged: bool,
}

fn bfgs(obj: &Objective, x0: [f64; 3], options: &FitOptions) -> Result<Run> {
    let mut x = x0;
    let mut f = obj.value(&x)?;
    let mut g = obj.gradient(&x)?;
    let mut h = [[0.0; 3]; 3];
    let reset = |h: &mut [[f64; 3]; 3]| {
        *h = [[0.0; 3]; 3];
        for (i, row) in h.iter_mut().enumerate() {
            row[i] = 1.0;
        }
    };
    reset(&mut h);
    let mut fresh = true;
    for it in 1..=options.max_iters {
        if f == 0.0 || g.iter().all(|v| *v == 0.0) {
            return Ok(Run { x, f, iters: it - 1, converged: true });
        }
        let mut d = [0.0; 3];
        for i in 0..3 {
            d[i] = -dot(&h[i], &g);
        }
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            reset(&mut h);
            d = g.map(|v| -v);
            slope = dot(&g, &d);
        }
        // Armijo backtracking.
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = [x[0] + step * d[0], x[1] + step * d[1], x[2] + step * d[2]];
            match obj.value(&trial) {
                Ok(ft) if ft <= f + 1e-4 * step * slope => {
                    accepted = Some((trial, ft));
                    break;
                }
                Ok(_) | Err(Error::NonFiniteLoss) => step *= 0.5,
                Err(e) => return Err(e),
            }
        }
        let Some((xn, fn_)) = accepted else {
            if fresh {
                // Steepest descent already failed: no further progress possible.
                return Ok(Run { x, f, iters: it, converged: true });
            }
            reset(&mut h);
            fresh = true;
            continue;
        };
        let gn = obj.gradient(&xn)?;
        let s = [xn[0] - x[0], xn[1] - x[1], xn[2] - x[2]];
        let y = [gn[0] - g[0], gn[1] - g[1], gn[2] - g[2]];
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            if fresh {
                // Scale the initial inverse Hessian to the observed curvature.
                let scale = sy / dot(&y, &y);
                for (i, row) in h.iter_mut().enumerate() {
                    row[i] = scale;
                }
            }
            let rho = 1.0 / sy;
            let mut hy = [0.0; 3];
            for i in 0..3 {
                hy[i] = dot(&h[i], &y);
            }
            let yhy = dot(&y, &hy);
            for i in 0..3 {
                for j in 0..3 {
                    h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
            fresh = false;
        }
        let rel = (f - fn_).abs() / f.max(f64::MIN_POSITIVE);
        x = xn;
        f = fn_;
        g = gn;
        if rel < options.rel_tol {
            return Ok(Run { x, f, iters: it, converged: true });
        }
    }
    Ok(Run { x, f, iters: options.max_iters, converged: false })
}

/// Angular frequency of the largest peak of |Σₙ (v_x − i v_y)(tₙ) e^{−iωtₙ}|,
/// searched on a fine grid over the Nyquist band.
pub fn spectral_omega(trajectory: &BlochTrajectory) -> Option<f64> {
    let n = trajectory.len();
    if n < 2 {
        return None;
    }
    let dt = (trajectory.times[n - 1] - trajectory.times[0]) / (n - 1) as f64;
    if !(dt > 0.0) {
        return None;
    }
    let nyq = std::f64::consts::PI / dt;
    let grid = 4096;
    let mut best = (0.0, -1.0);
    for k in 0..=grid {
        let w = -nyq + 2.0 * nyq * k as f64 / grid as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for (t, v) in trajectory.times.iter().zip(&trajectory.points) {
            let (s, c) = (w * t).sin_cos();
            // (v_x − i v_y)(cos − i sin)
            re += v[0] * c - v[1] * s;
            im += -v[0] * s - v[1] * c;
        }
        let mag = re * re + im * im;
        if mag > best.1 {
            best = (w, mag);
        }
    }
    Some(best.0)
}

/// Fits the Lindblad parameters by multi-start BFGS and returns the start
/// with the lowest MSE.
pub fn fit_parameters(trajectory: &BlochTrajectory, guess: &LindbladParams, options: &FitOptions) -> Result<FitResult> {
    if trajectory.len() < MIN_FIT_POINTS {
        return Err(Error::InvalidParameter(format!(
            "fit needs at least {MIN_FIT_POINTS} points, got {}",
            trajectory.len()
        )));
    }
    guess.validate()?;
    let v0 = options.initial_bloch.unwrap_or(trajectory.points[0]);
    let obj = Objective { trajectory, v0, fd_step: options.fd_step };
    let initial_mse = mse_loss_from(guess, trajectory, v0)?;
    if !initial_mse.is_finite() {
        return Err(Error::NonFiniteLoss);
    }

    let x_guess = to_coords(guess);
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut starts = vec![x_guess];
    for _ in 1..options.n_starts.max(1) {
        let mut x = x_guess;
        let e: f64 = rng.sample(StandardNormal);
        x[0] *= 1.0 + 0.1 * e;
        for xi in x.iter_mut().skip(1) {
            let e: f64 = rng.sample(StandardNormal);
            *xi += 0.3 * e;
        }
        starts.push(x);
    }
    if options.spectral_seed {
        if let Some(w) = spectral_omega(trajectory) {
            starts.push([w, x_guess[1], x_guess[2]]);
        }
    }

    let mut best: Option<Run> = None;
    let mut total_iters = 0;
    for x0 in starts {
        let run = bfgs(&obj, x0, options)?;
        total_iters += run.iters;
        if best.as_ref().is_none_or(|b| run.f < b.f) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one start");
    let params = from_coords(&best.x);
    let sensitivities = curvature(&params, trajectory, v0, options.fd_step)?;
    Ok(FitResult {
        params,
        mse: best.f,
        initial_mse,
        iters: total_iters,
        converged: best.converged,
        sensitivities,
    })
}

fn curvature(p: &LindbladParams, trajectory: &BlochTrajectory, v0: [f64; 3], rel: f64) -> Result<Sensitivities> {
    let f0 = mse_loss_from(p, trajectory, v0)?;
    let second = |get: fn(&mut LindbladParams) -> &mut f64| -> Result<f64> {
        let mut q = *p;
        let x = *get(&mut q);
        // A coarser step than the gradient's keeps the second difference above round-off.
        let h = rel.sqrt() * x.abs().max(1e-3);
        let mut plus = *p;
        *get(&mut plus) = x + h;
        let mut minus = *p;
        *get(&mut minus) = (x - h).max(0.0);
        let hm = x - *get(&mut minus);
        let fp = mse_loss_from(&plus, trajectory, v0)?;
        let fm = mse_loss_from(&minus, trajectory, v0)?;
        // Non-uniform three-point second difference.
        Ok(2.0 * (fp * hm + fm * h - f0 * (h + hm)) / (h * hm * (h + hm)))
    };
    Ok(Sensitivities {
        omega_z: second(|q| &mut q.omega_z)?,
        gamma_ad: second(|q| &mut q.gamma_ad)?,
        gamma_pd: second(|q| &mut q.gamma_pd)?,
    })
}
