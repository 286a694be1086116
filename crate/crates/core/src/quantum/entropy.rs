use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};

use super::state::{partial_trace, DensityMatrix, Subsystem};

/// Eigenvalues below this are treated as zero in logarithms.
pub const SUPPORT_THRESHOLD: f64 = 1e-10;

fn same_dim(a: &CMat, b: &CMat) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension { expected: a.nrows(), got: b.nrows() });
    }
    Ok(())
}

/// T(ρ, σ) = ½ Tr|ρ − σ|.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    trace_distance_raw(rho.matrix(), sigma.matrix())
}

pub fn trace_distance_raw(rho: &CMat, sigma: &CMat) -> Result<f64> {
    same_dim(rho, sigma)?;
    let ev = linalg::eigvalsh(&(rho - sigma));
    Ok(0.5 * ev.iter().map(|x| x.abs()).sum::<f64>())
}

fn xlog2x(p: f64) -> f64 {
    if p <= SUPPORT_THRESHOLD {
        0.0
    } else {
        p * p.log2()
    }
}

/// Von Neumann entropy in bits.
pub fn von_neumann_entropy(rho: &CMat) -> f64 {
    -linalg::eigvalsh(rho).into_iter().map(xlog2x).sum::<f64>()
}

/// D(ρ‖σ) = Tr ρ(log₂ρ − log₂σ). Fails with `InfiniteDivergence` when the
/// support of ρ is not contained in that of σ.
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    relative_entropy_raw(rho.matrix(), sigma.matrix())
}

pub fn relative_entropy_raw(rho: &CMat, sigma: &CMat) -> Result<f64> {
    same_dim(rho, sigma)?;
    let neg_s = linalg::eigvalsh(rho).into_iter().map(xlog2x).sum::<f64>();
    let (sv, su) = linalg::eigh(sigma);
    let mut cross = 0.0;
    for (k, &s) in sv.iter().enumerate() {
        let v = su.column(k);
        let w = (v.adjoint() * rho * v)[(0, 0)].re;
        if s <= SUPPORT_THRESHOLD {
            if w > SUPPORT_THRESHOLD {
                return Err(Error::InfiniteDivergence);
            }
            continue;
        }
        cross += w * s.log2();
    }
    Ok((neg_s - cross).max(0.0))
}

/// Entropic summary of a two-qubit state, all in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entropies {
    pub s_a: f64,
    pub s_b: f64,
    pub s_ab: f64,
    pub mutual_information: f64,
    pub conditional_entropy: f64,
    pub purity: f64,
}

pub fn entropies(rho_ab: &DensityMatrix) -> Result<Entropies> {
    let ra = partial_trace(rho_ab, Subsystem::B)?;
    let rb = partial_trace(rho_ab, Subsystem::A)?;
    let s_a = von_neumann_entropy(ra.matrix());
    let s_b = von_neumann_entropy(rb.matrix());
    let s_ab = von_neumann_entropy(rho_ab.matrix());
    Ok(Entropies {
        s_a,
        s_b,
        s_ab,
        mutual_information: s_a + s_b - s_ab,
        conditional_entropy: s_ab - s_b,
        purity: rho_ab.purity(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, CVec, ZERO};
    use crate::quantum::state::Ket;

    fn bell() -> DensityMatrix {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        DensityMatrix::pure(&CVec::from_vec(vec![c(h, 0.0), ZERO, ZERO, c(h, 0.0)]))
    }

    #[test]
    fn trace_distance_examples() {
        let plus = Ket::Plus.density();
        let minus = Ket::Minus.density();
        assert!((trace_distance(&plus, &minus).unwrap() - 1.0).abs() < 1e-14);
        assert!(trace_distance(&plus, &plus).unwrap().abs() < 1e-14);
        let t = trace_distance(&Ket::Zero.density(), &plus).unwrap();
        assert!((t - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-14);
    }

    #[test]
    fn trace_distance_dimension_check() {
        let r = trace_distance(&Ket::Zero.density(), &DensityMatrix::maximally_mixed(4));
        assert!(r.is_err());
    }

    #[test]
    fn relative_entropy_examples() {
        let rho = DensityMatrix::from_bloch([0.2, -0.4, 0.1]).unwrap();
        assert!(relative_entropy(&rho, &rho).unwrap().abs() < 1e-12);
        let d = relative_entropy(&Ket::Zero.density(), &DensityMatrix::maximally_mixed(2)).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
        let r = relative_entropy(&Ket::Zero.density(), &Ket::One.density());
        assert!(matches!(r, Err(Error::InfiniteDivergence)));
    }

    #[test]
    fn product_state_has_no_mutual_information() {
        let a = DensityMatrix::from_bloch([0.3, 0.0, 0.4]).unwrap();
        let b = DensityMatrix::from_bloch([0.0, -0.5, 0.1]).unwrap();
        let e = entropies(&a.tensor(&b)).unwrap();
        assert!(e.mutual_information.abs() < 1e-12);
    }

    #[test]
    fn bell_state_saturates_bounds() {
        let e = entropies(&bell()).unwrap();
        assert!((e.mutual_information - 2.0).abs() < 1e-12);
        assert!((e.conditional_entropy + 1.0).abs() < 1e-12);
        assert!((e.purity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mixed_times_pure_has_unit_conditional_entropy() {
        let rho = DensityMatrix::maximally_mixed(2).tensor(&Ket::PlusI.density());
        let e = entropies(&rho).unwrap();
        assert!((e.conditional_entropy - 1.0).abs() < 1e-12);
        assert!(e.mutual_information.abs() < 1e-12);
    }
}
