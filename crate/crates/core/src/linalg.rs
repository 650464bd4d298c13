//! Small dense helpers: pseudo-inverse, rank and null space.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value cutoff used for rank decisions.
pub const RANK_RTOL: f64 = 1e-10;

/// Nonzero singular triplets of `a`: values `s` with orthonormal `u` and `v`.
struct Singular {
    s: Vec<f64>,
    u: DMatrix<f64>,
    v: DMatrix<f64>,
}

/// Singular triplets from the symmetric eigenproblem of `[[0, A], [A^T, 0]]`.
///
/// Its eigenvalues are `+-s_k` with eigenvectors `(u_k, v_k) / sqrt 2`.
/// nalgebra's bidiagonal SVD loses accuracy (errors near 1e-1) on the
/// repeated singular values of factorial model matrices; this route does not,
/// and unlike the Gram matrix it does not square the condition number.
fn singular(a: &DMatrix<f64>) -> Singular {
    let (m, n) = a.shape();
    let mut h = DMatrix::zeros(m + n, m + n);
    h.view_mut((0, m), (m, n)).copy_from(a);
    h.view_mut((m, 0), (n, m)).copy_from(&a.transpose());
    let eig = h.symmetric_eigen();
    let top = eig.eigenvalues.amax();
    let keep: Vec<usize> = (0..m + n)
        .filter(|&k| eig.eigenvalues[k] > RANK_RTOL * top && eig.eigenvalues[k] > 0.0)
        .collect();
    let scale = std::f64::consts::SQRT_2;
    Singular {
        s: keep.iter().map(|&k| eig.eigenvalues[k]).collect(),
        u: DMatrix::from_fn(m, keep.len(), |i, c| scale * eig.eigenvectors[(i, keep[c])]),
        v: DMatrix::from_fn(n, keep.len(), |i, c| {
            scale * eig.eigenvectors[(m + i, keep[c])]
        }),
    }
}

/// Moore-Penrose pseudo-inverse.
pub fn pseudo_inverse(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return DMatrix::zeros(n, m);
    }
    let sv = singular(a);
    let mut scaled = sv.v;
    for (c, s) in sv.s.iter().enumerate() {
        scaled.column_mut(c).unscale_mut(*s);
    }
    scaled * sv.u.transpose()
}

/// Numerical rank.
pub fn rank(a: &DMatrix<f64>) -> usize {
    if a.is_empty() {
        return 0;
    }
    singular(a).s.len()
}

/// Orthonormal basis of the null space of `a`, one vector per column.
pub fn null_space(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.ncols();
    if a.nrows() == 0 || n == 0 {
        return DMatrix::identity(n, n);
    }
    let v = singular(a).v;
    if v.ncols() == 0 {
        return DMatrix::identity(n, n);
    }
    // eigenvalues of the complementary projector are 0 or 1
    let complement = DMatrix::identity(n, n) - &v * v.transpose();
    let eig = complement.symmetric_eigen();
    let cols: Vec<DVector<f64>> = (0..n)
        .filter(|&k| eig.eigenvalues[k] > 0.5)
        .map(|k| eig.eigenvectors.column(k).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Distance from `b` to the range of `a`.
pub fn range_residual(a: &DMatrix<f64>, pinv: &DMatrix<f64>, b: &DVector<f64>) -> f64 {
    (a * (pinv * b) - b).norm()
}

/// Unit vector `e_j` of length `n`.
pub fn unit(n: usize, j: usize) -> DVector<f64> {
    let mut e = DVector::zeros(n);
    e[j] = 1.0;
    e
}
