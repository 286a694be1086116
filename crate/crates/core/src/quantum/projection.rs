use crate::error::{Error, Result};
use crate::linalg::{self, CMat};

use super::channel::ChoiMatrix;
use super::state::DensityMatrix;

pub const CPTP_MAX_ITERATIONS: usize = 1000;
pub const CPTP_STEP_TOL: f64 = 1e-10;
pub const CPTP_TP_TOL: f64 = 1e-8;

/// Clips negative eigenvalues of the symmetrized input and renormalizes by
/// the remaining positive mass.
pub fn project_state_physical(raw: &CMat) -> Result<DensityMatrix> {
    linalg::ensure_square(raw)?;
    let (vals, vecs) = linalg::eigh(raw);
    let mass: f64 = vals.iter().filter(|&&v| v > 0.0).sum();
    if !(mass > 0.0) {
        return Err(Error::Unreconstructable);
    }
    let m = linalg::hermitian_function(&vals, &vecs, |v| v.max(0.0) / mass);
    Ok(DensityMatrix::new_unchecked(m))
}

fn project_psd(m: &CMat) -> CMat {
    let (vals, vecs) = linalg::eigh(m);
    linalg::hermitize(&linalg::hermitian_function(&vals, &vecs, |v| v.max(0.0)))
}

fn project_tp(m: &CMat, d: usize) -> CMat {
    let chi = ChoiMatrix::new(m.clone()).expect("d²×d² shape");
    let defect = linalg::identity(d) - chi.trace_output();
    m + linalg::kron(&defect, &linalg::identity(d)).unscale(d as f64)
}

/// Alternating projections between the PSD cone and the trace-preserving
/// affine set.
pub fn project_choi_cptp(raw: &CMat) -> Result<ChoiMatrix> {
    let d = ChoiMatrix::new(raw.clone())?.dim();
    let mut x = linalg::hermitize(raw);
    let mut step = f64::INFINITY;
    for _ in 0..CPTP_MAX_ITERATIONS {
        let next = project_psd(&project_tp(&x, d));
        step = linalg::frobenius(&(&next - &x));
        x = next;
        if step < CPTP_STEP_TOL {
            break;
        }
    }
    let chi = ChoiMatrix::new(x)?;
    let residual = chi.tp_residual().max(step);
    if residual > CPTP_TP_TOL {
        return Err(Error::ProjectionNotConverged { iterations: CPTP_MAX_ITERATIONS, residual });
    }
    Ok(chi)
}
