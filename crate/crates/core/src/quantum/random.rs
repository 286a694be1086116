//! Random states and channels for testing and simulation.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{self, c, CMat};

use super::channel::ChoiMatrix;
use super::state::DensityMatrix;

pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        c(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    })
}

/// Full-rank state from the Hilbert-Schmidt ensemble.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DensityMatrix {
    let g = ginibre(rng, d, d);
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    DensityMatrix::new_unchecked(m.unscale(tr))
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMat {
    linalg::hermitize(&ginibre(rng, d, d))
}

/// Kraus operators of a random CPTP map, drawn from a random isometry
/// C^d → C^{d·n_kraus}.
pub fn random_kraus<R: Rng + ?Sized>(rng: &mut R, d: usize, n_kraus: usize) -> Vec<CMat> {
    let g = ginibre(rng, d * n_kraus, d);
    let (vals, vecs) = linalg::eigh(&(g.adjoint() * &g));
    let inv_sqrt = linalg::hermitian_function(&vals, &vecs, |v| 1.0 / v.sqrt());
    let v = g * inv_sqrt;
    (0..n_kraus).map(|a| v.rows(a * d, d).into_owned()).collect()
}

pub fn kraus_apply(kraus: &[CMat], rho: &CMat) -> CMat {
    kraus.iter().map(|k| k * rho * k.adjoint()).fold(CMat::zeros(rho.nrows(), rho.ncols()), |a, b| a + b)
}

pub fn random_channel<R: Rng + ?Sized>(rng: &mut R, d: usize, n_kraus: usize) -> ChoiMatrix {
    let kraus = random_kraus(rng, d, n_kraus);
    ChoiMatrix::from_map(d, |x| kraus_apply(&kraus, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_channel_is_cptp() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let chi = random_channel(&mut rng, 2, 3);
        assert!(chi.tp_residual() < 1e-12);
        assert!(chi.min_eigenvalue() > -1e-12);
    }
}
