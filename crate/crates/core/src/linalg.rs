//! Dense complex linear algebra shared by the rest of the crate.

use nalgebra::linalg::{Schur, SymmetricEigen, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64 as C64;

pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Relative singular-value cutoff used for every pseudo-inverse.
pub const PINV_RCOND: f64 = 1e-10;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn cmat2(a: [[C64; 2]; 2]) -> CMat {
    DMatrix::from_row_slice(2, 2, &[a[0][0], a[0][1], a[1][0], a[1][1]])
}

pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

pub fn pauli_x() -> CMat {
    cmat2([[ZERO, ONE], [ONE, ZERO]])
}

pub fn pauli_y() -> CMat {
    cmat2([[ZERO, -I], [I, ZERO]])
}

pub fn pauli_z() -> CMat {
    cmat2([[ONE, ZERO], [ZERO, -ONE]])
}

/// Lowering operator |0⟩⟨1|; |0⟩ is the ground state (σ_z = +1).
pub fn sigma_minus() -> CMat {
    cmat2([[ZERO, ONE], [ZERO, ZERO]])
}

/// Raising operator |1⟩⟨0|.
pub fn sigma_plus() -> CMat {
    cmat2([[ZERO, ZERO], [ONE, ZERO]])
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn dagger(a: &CMat) -> CMat {
    a.adjoint()
}

pub fn hermitize(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

pub fn trace(a: &CMat) -> C64 {
    a.trace()
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn ensure_square(a: &CMat) -> Result<usize> {
    let (rows, cols) = a.shape();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    Ok(rows)
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted ascending.
/// The input is symmetrized before decomposition.
pub fn eigh(a: &CMat) -> (Vec<f64>, CMat) {
    let h = hermitize(a);
    let eig = SymmetricEigen::new(h);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn eigvalsh(a: &CMat) -> Vec<f64> {
    eigh(a).0
}

pub fn min_eigenvalue(a: &CMat) -> f64 {
    eigvalsh(a).first().copied().unwrap_or(f64::NAN)
}

/// Rebuilds `V diag(f(λ)) V†` from a Hermitian eigen-decomposition.
pub fn hermitian_function(values: &[f64], vectors: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let n = values.len();
    let mut scaled = vectors.clone();
    for j in 0..n {
        let w = f(values[j]);
        for i in 0..n {
            scaled[(i, j)] *= w;
        }
    }
    &scaled * vectors.adjoint()
}

/// Eigenvalues of a general complex matrix through its Schur form.
pub fn eigenvalues(a: &CMat) -> Vec<C64> {
    let schur = Schur::new(a.clone());
    let (_, t) = schur.unpack();
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}

pub fn singular_values(a: &CMat) -> Vec<f64> {
    SVD::new(a.clone(), false, false).singular_values.iter().copied().collect()
}

/// Numerical rank with the crate-wide relative cutoff.
pub fn rank(a: &CMat) -> usize {
    let sv = singular_values(a);
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > PINV_RCOND * smax).count()
}

/// Moore-Penrose pseudo-inverse. Singular values below `PINV_RCOND * σ_max`
/// are treated as zero.
pub fn pinv(a: &CMat) -> CMat {
    let svd = SVD::new(a.clone(), true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return CMat::zeros(a.ncols(), a.nrows());
    }
    svd.pseudo_inverse(PINV_RCOND * smax)
        .expect("singular vectors were requested")
}

/// JSON form `{dim, re, im}` with entries in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub dim: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl MatrixJson {
    pub fn from_matrix(m: &CMat) -> Self {
        let dim = m.nrows();
        let mut re = Vec::with_capacity(dim * dim);
        let mut im = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..m.ncols() {
                re.push(m[(i, j)].re);
                im.push(m[(i, j)].im);
            }
        }
        Self { dim, re, im }
    }

    pub fn to_matrix(&self) -> Result<CMat> {
        let n = self.dim * self.dim;
        if self.re.len() != n {
            return Err(Error::Dimension { expected: n, got: self.re.len() });
        }
        if self.im.len() != n {
            return Err(Error::Dimension { expected: n, got: self.im.len() });
        }
        let entries: Vec<C64> = self.re.iter().zip(&self.im).map(|(&r, &i)| c(r, i)).collect();
        Ok(CMat::from_row_slice(self.dim, self.dim, &entries))
    }
}
