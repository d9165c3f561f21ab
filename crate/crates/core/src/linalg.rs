//! Dense complex linear algebra used across the crate: thin SVD with a
//! relative cutoff, eigenpairs of a general complex matrix, pseudo-inverse
//! and minimum-norm least squares.

use nalgebra::{DMatrix, DVector, Schur, SVD};
use num_complex::Complex64;

use crate::error::{KromError, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Singular values below `RELATIVE_CUTOFF * sigma_max` are treated as zero.
pub const RELATIVE_CUTOFF: f64 = 1e-12;

const SVD_MAX_ITER: usize = 10_000;
const SCHUR_MAX_ITER: usize = 10_000;

/// Thin SVD `A = U diag(s) V^*` with singular values sorted descending.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: CMatrix,
    pub s: Vec<f64>,
    pub v: CMatrix,
}

impl ThinSvd {
    pub fn compute(a: &CMatrix) -> Result<Self> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(KromError::Numerical("SVD of an empty matrix".into()));
        }
        // nalgebra's SVD is more robust on wide inputs when fed the adjoint of
        // a tall matrix, so always decompose the tall orientation.
        let transposed = a.nrows() < a.ncols();
        let work = if transposed { a.adjoint() } else { a.clone() };
        // Markedly tall inputs: A = Q R first, then decompose the small R.
        let q_factor = if work.nrows() > 2 * work.ncols() {
            Some(work.clone().qr())
        } else {
            None
        };
        let work = match &q_factor {
            Some(qr) => qr.r(),
            None => work,
        };
        let svd = SVD::try_new(work, true, true, f64::EPSILON, SVD_MAX_ITER)
            .ok_or_else(|| KromError::Numerical("SVD failed to converge".into()))?;
        let u = match &q_factor {
            Some(qr) => qr.q() * svd.u.expect("u requested"),
            None => svd.u.expect("u requested"),
        };
        let v_t = svd.v_t.expect("v_t requested");
        let s = svd.singular_values;

        let k = s.len();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&i, &j| s[j].total_cmp(&s[i]).then(i.cmp(&j)));

        let mut uu = CMatrix::zeros(u.nrows(), k);
        let mut vv = CMatrix::zeros(v_t.ncols(), k);
        let mut ss = Vec::with_capacity(k);
        for (dst, &src) in order.iter().enumerate() {
            uu.set_column(dst, &u.column(src));
            vv.set_column(dst, &v_t.row(src).adjoint());
            ss.push(s[src]);
        }
        if transposed {
            // A^* = U S V^*  =>  A = V S U^*
            Ok(Self { u: vv, s: ss, v: uu })
        } else {
            Ok(Self { u: uu, s: ss, v: vv })
        }
    }

    /// Number of singular values above the relative cutoff.
    pub fn numerical_rank(&self) -> usize {
        numerical_rank(&self.s)
    }

    /// Keep only the leading `r` singular triplets.
    pub fn truncated(&self, r: usize) -> Self {
        let r = r.min(self.s.len());
        Self {
            u: self.u.columns(0, r).into_owned(),
            s: self.s[..r].to_vec(),
            v: self.v.columns(0, r).into_owned(),
        }
    }
}

pub fn numerical_rank(s: &[f64]) -> usize {
    let max = s.iter().copied().fold(0.0_f64, f64::max);
    if max == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x >= RELATIVE_CUTOFF * max).count()
}

/// Moore-Penrose pseudo-inverse with the crate-wide relative cutoff.
pub fn pinv(a: &CMatrix) -> Result<CMatrix> {
    let svd = ThinSvd::compute(a)?.truncated_to_rank();
    let mut vs = svd.v.clone();
    for (j, s) in svd.s.iter().enumerate() {
        vs.column_mut(j).scale_mut(1.0 / s);
    }
    Ok(vs * svd.u.adjoint())
}

impl ThinSvd {
    fn truncated_to_rank(self) -> Self {
        let r = self.numerical_rank();
        if r == self.s.len() {
            self
        } else {
            self.truncated(r)
        }
    }
}

/// Orthonormal basis (columns) for the range of `a`, via SVD.
pub fn range_basis(a: &CMatrix) -> Result<CMatrix> {
    let svd = ThinSvd::compute(a)?.truncated_to_rank();
    Ok(svd.u)
}

/// Minimum-norm solution of `min ||A x - b||_2` via SVD.
pub fn lstsq_min_norm(a: &CMatrix, b: &CVector) -> Result<CVector> {
    if a.nrows() != b.len() {
        return Err(KromError::Dimension(format!(
            "least squares rhs has {} rows, design has {}",
            b.len(),
            a.nrows()
        )));
    }
    let svd = ThinSvd::compute(a)?.truncated_to_rank();
    let mut coeffs = svd.u.adjoint() * b;
    for (c, s) in coeffs.iter_mut().zip(&svd.s) {
        *c /= *s;
    }
    Ok(svd.v * coeffs)
}

/// Eigenvalues and unit-norm right eigenvectors of a square complex matrix.
///
/// Uses the complex Schur form `A = Q T Q^*` followed by back substitution on
/// the triangular factor.
pub fn eig(a: &CMatrix) -> Result<(Vec<Complex64>, CMatrix)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(KromError::Dimension("eig of a non-square matrix".into()));
    }
    if n == 0 {
        return Ok((Vec::new(), CMatrix::zeros(0, 0)));
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or_else(|| KromError::Numerical("Schur decomposition failed to converge".into()))?;
    let (q, t) = schur.unpack();

    let norm_t = t.iter().map(|z| z.norm()).fold(0.0_f64, f64::max).max(f64::MIN_POSITIVE);
    let small = norm_t * f64::EPSILON;

    let eigenvalues: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for k in 0..n {
        let lambda = eigenvalues[k];
        let mut y = CVector::zeros(n);
        y[k] = Complex64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in (i + 1)..=k {
                acc += t[(i, j)] * y[j];
            }
            let mut denom = t[(i, i)] - lambda;
            if denom.norm() < small {
                // Repeated eigenvalue: perturb as LAPACK's trevc does.
                denom = Complex64::new(small, 0.0);
            }
            y[i] = -acc / denom;
        }
        let mut v = &q * y;
        let nv = v.norm();
        if nv > 0.0 {
            v.unscale_mut(nv);
        }
        vectors.set_column(k, &v);
    }
    Ok((eigenvalues, vectors))
}

/// Multiply the vector by a unit phase so its largest-magnitude entry
/// (first one on ties) is real and positive.
pub fn fix_phase(v: &mut CVector) {
    let mut best = 0usize;
    let mut best_mag = -1.0;
    for (i, z) in v.iter().enumerate() {
        let m = z.norm();
        if m > best_mag {
            best_mag = m;
            best = i;
        }
    }
    if best_mag > 0.0 {
        let phase = v[best] / best_mag;
        let rot = phase.conj();
        for z in v.iter_mut() {
            *z *= rot;
        }
        v[best] = Complex64::new(v[best].norm(), 0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CMatrix::from_fn(rows, cols, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    #[test]
    fn svd_reconstructs_tall_and_wide() {
        for &(r, c) in &[(7, 3), (3, 7), (5, 5)] {
            let a = random_matrix(r, c, 1);
            let svd = ThinSvd::compute(&a).unwrap();
            let mut us = svd.u.clone();
            for (j, s) in svd.s.iter().enumerate() {
                us.column_mut(j).scale_mut(*s);
            }
            let back = us * svd.v.adjoint();
            assert!((back - &a).norm() < 1e-12 * a.norm());
            assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn eig_satisfies_definition() {
        let a = random_matrix(12, 12, 2);
        let (vals, vecs) = eig(&a).unwrap();
        for (k, lambda) in vals.iter().enumerate() {
            let v = vecs.column(k).into_owned();
            let resid = &a * &v - v.scale(1.0) * *lambda;
            assert!(resid.norm() < 1e-10, "residual {}", resid.norm());
        }
    }

    #[test]
    fn pinv_penrose_conditions() {
        let a = random_matrix(6, 3, 3);
        let p = pinv(&a).unwrap();
        assert!((&a * &p * &a - &a).norm() < 1e-12);
        assert!((&p * &a * &p - &p).norm() < 1e-12);
    }

    #[test]
    fn lstsq_min_norm_on_rank_deficient() {
        // Two identical columns: min-norm solution splits the weight evenly.
        let mut a = CMatrix::zeros(3, 2);
        for i in 0..3 {
            a[(i, 0)] = Complex64::new(1.0 + i as f64, 0.0);
            a[(i, 1)] = a[(i, 0)];
        }
        let b = a.column(0).into_owned().scale(2.0);
        let x = lstsq_min_norm(&a, &b).unwrap();
        assert!((x[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((x[1] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn phase_fix_makes_peak_real_positive() {
        let mut v = CVector::from_vec(vec![
            Complex64::new(0.1, 0.2),
            Complex64::new(0.0, -3.0),
        ]);
        fix_phase(&mut v);
        assert!((v[1] - Complex64::new(3.0, 0.0)).norm() < 1e-15);
        assert!((v.norm() - (0.05_f64 + 9.0).sqrt()).abs() < 1e-14);
    }
}
