//! Koopman mode decomposition of snapshot data via exact DMD.

use std::cmp::Ordering;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{KromError, Result};
use crate::linalg::{self, CMatrix, CVector, ThinSvd};
use crate::rom::modal_least_squares;
use crate::snapshots::{write_file, SnapshotMatrix, SnapshotMeta};

/// Eigenvalues below this magnitude get projected modes instead of exact ones.
const ZERO_EIGENVALUE: f64 = 1e-12;

/// Eigenvalues and unit-norm Koopman modes, ordered by decreasing mode
/// amplitude in the data they were computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct KoopmanDecomposition {
    eigenvalues: Vec<Complex64>,
    modes: CMatrix,
    raw_mode_norms: Vec<f64>,
    rank_used: usize,
    source_meta: SnapshotMeta,
}

impl KoopmanDecomposition {
    pub fn new(
        eigenvalues: Vec<Complex64>,
        modes: CMatrix,
        raw_mode_norms: Vec<f64>,
        rank_used: usize,
        source_meta: SnapshotMeta,
    ) -> Result<Self> {
        let m = eigenvalues.len();
        if modes.ncols() != m || raw_mode_norms.len() != m {
            return Err(KromError::Dimension(format!(
                "{m} eigenvalues, {} modes, {} norms",
                modes.ncols(),
                raw_mode_norms.len()
            )));
        }
        if modes.nrows() != source_meta.coord_names.len() {
            return Err(KromError::Dimension(format!(
                "modes have {} rows, source has {} observables",
                modes.nrows(),
                source_meta.coord_names.len()
            )));
        }
        for (j, col) in modes.column_iter().enumerate() {
            if (col.norm() - 1.0).abs() > 1e-12 {
                return Err(KromError::InvalidArgument(format!(
                    "mode {j} has norm {}",
                    col.norm()
                )));
            }
        }
        if raw_mode_norms.windows(2).any(|w| w[0] < w[1]) || raw_mode_norms.iter().any(|&x| x < 0.0) {
            return Err(KromError::InvalidArgument(
                "raw mode norms must be non-negative and non-increasing".into(),
            ));
        }
        Ok(Self {
            eigenvalues,
            modes,
            raw_mode_norms,
            rank_used,
            source_meta,
        })
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    pub fn modes(&self) -> &CMatrix {
        &self.modes
    }

    pub fn raw_mode_norms(&self) -> &[f64] {
        &self.raw_mode_norms
    }

    pub fn rank_used(&self) -> usize {
        self.rank_used
    }

    pub fn source_meta(&self) -> &SnapshotMeta {
        &self.source_meta
    }

    pub fn n_modes(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn n_obs(&self) -> usize {
        self.modes.nrows()
    }

    /// Keep the `j` leading modes.
    pub fn truncate(&self, j: usize) -> Result<Self> {
        if j < 1 || j > self.n_modes() {
            return Err(KromError::InvalidArgument(format!(
                "truncation {j} outside 1..={}",
                self.n_modes()
            )));
        }
        Ok(Self {
            eigenvalues: self.eigenvalues[..j].to_vec(),
            modes: self.modes.columns(0, j).into_owned(),
            raw_mode_norms: self.raw_mode_norms[..j].to_vec(),
            rank_used: self.rank_used,
            source_meta: self.source_meta.clone(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(&KmdFile::from(self))?;
        write_file(path, json.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| KromError::io(path, e))?;
        let file: KmdFile = serde_json::from_str(&text)?;
        file.try_into()
    }

    /// CSV rows `index,re,im,abs,raw_norm`.
    pub fn eigenvalues_csv(&self) -> String {
        let mut out = String::from("index,re,im,abs,raw_norm\n");
        for (j, (l, n)) in self.eigenvalues.iter().zip(&self.raw_mode_norms).enumerate() {
            out.push_str(&format!(
                "{j},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                l.re,
                l.im,
                l.norm(),
                n
            ));
        }
        out
    }
}

/// On-disk form: complex numbers as `[re, im]`, modes row-major.
#[derive(Serialize, Deserialize)]
pub(crate) struct KmdFile {
    n_obs: usize,
    n_modes: usize,
    eigenvalues: Vec<[f64; 2]>,
    modes: Vec<[f64; 2]>,
    raw_mode_norms: Vec<f64>,
    rank_used: usize,
    source_meta: SnapshotMeta,
}

impl From<&KoopmanDecomposition> for KmdFile {
    fn from(d: &KoopmanDecomposition) -> Self {
        let mut modes = Vec::with_capacity(d.modes.len());
        for i in 0..d.n_obs() {
            for j in 0..d.n_modes() {
                let z = d.modes[(i, j)];
                modes.push([z.re, z.im]);
            }
        }
        Self {
            n_obs: d.n_obs(),
            n_modes: d.n_modes(),
            eigenvalues: d.eigenvalues.iter().map(|z| [z.re, z.im]).collect(),
            modes,
            raw_mode_norms: d.raw_mode_norms.clone(),
            rank_used: d.rank_used,
            source_meta: d.source_meta.clone(),
        }
    }
}

impl TryFrom<KmdFile> for KoopmanDecomposition {
    type Error = KromError;

    fn try_from(f: KmdFile) -> Result<Self> {
        if f.modes.len() != f.n_obs * f.n_modes {
            return Err(KromError::Format(format!(
                "{} mode entries for a {}x{} matrix",
                f.modes.len(),
                f.n_obs,
                f.n_modes
            )));
        }
        let modes = CMatrix::from_fn(f.n_obs, f.n_modes, |i, j| {
            let [re, im] = f.modes[i * f.n_modes + j];
            Complex64::new(re, im)
        });
        KoopmanDecomposition::new(
            f.eigenvalues.iter().map(|&[re, im]| Complex64::new(re, im)).collect(),
            modes,
            f.raw_mode_norms,
            f.rank_used,
            f.source_meta,
        )
    }
}

/// Exact DMD of `x`.
///
/// With `X0`/`X1` the data without its last/first column and `X0 = U S V^*`
/// truncated to `rank` (default: singular values above `1e-12 * s_max`), the
/// eigenpairs `(lambda, w)` of `U^* X1 V S^-1` give modes `X1 V S^-1 w / lambda`.
/// Each unit-normalised mode is then weighted by its least-squares amplitude
/// over all snapshots, and the modes are sorted by that weighted norm.
pub fn compute_dmd(x: &SnapshotMatrix, rank: Option<usize>) -> Result<KoopmanDecomposition> {
    compute_dmd_with(x, rank, DmdVariant::Exact)
}

/// Which vectors become the modes of an eigenpair `(lambda, w)` of `A~`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DmdVariant {
    /// `X1 V S^-1 w / lambda`, spanning the range of the shifted data.
    #[default]
    Exact,
    /// `U w`, spanning the range of the unshifted data.
    Projected,
}

/// [`compute_dmd`] with a choice of mode construction.
pub fn compute_dmd_with(
    x: &SnapshotMatrix,
    rank: Option<usize>,
    variant: DmdVariant,
) -> Result<KoopmanDecomposition> {
    let (n_obs, n_t) = (x.n_obs(), x.n_t());
    if n_t < 3 {
        return Err(KromError::InvalidArgument(format!(
            "DMD needs at least 3 snapshots, got {n_t}"
        )));
    }
    let data = x.values();
    let x0 = data.columns(0, n_t - 1).into_owned();
    let x1 = data.columns(1, n_t - 1).into_owned();
    if x0.iter().all(|z| z.norm() == 0.0) {
        return Err(KromError::InvalidArgument("DMD of an all-zero matrix".into()));
    }

    let svd = ThinSvd::compute(&x0)?;
    let numerical = svd.numerical_rank();
    let r = match rank {
        None => numerical,
        Some(r) => {
            let cap = n_obs.min(n_t - 1);
            if r < 1 || r > cap {
                return Err(KromError::InvalidArgument(format!(
                    "rank {r} outside 1..={cap}"
                )));
            }
            if r > numerical {
                return Err(KromError::InvalidArgument(format!(
                    "rank {r} exceeds numerical rank {numerical}"
                )));
            }
            r
        }
    };
    let svd = svd.truncated(r);

    // X1 V S^-1
    let mut x1_v = &x1 * &svd.v;
    for (j, s) in svd.s.iter().enumerate() {
        x1_v.column_mut(j).unscale_mut(*s);
    }
    let a_tilde = svd.u.adjoint() * &x1_v;
    let (eigenvalues, w) = linalg::eig(&a_tilde)?;

    let mut unit_modes = CMatrix::zeros(n_obs, r);
    for j in 0..r {
        let lambda = eigenvalues[j];
        let wj = w.column(j);
        let mut mode: CVector = if variant == DmdVariant::Projected || lambda.norm() < ZERO_EIGENVALUE {
            &svd.u * wj
        } else {
            (&x1_v * wj).map(|z| z / lambda)
        };
        let norm = mode.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(KromError::Numerical(format!("mode {j} has norm {norm}")));
        }
        mode.unscale_mut(norm);
        linalg::fix_phase(&mut mode);
        unit_modes.set_column(j, &mode);
    }

    let amplitudes = modal_least_squares(&unit_modes, &eigenvalues, data, 0..n_t)?;
    let weights: Vec<f64> = amplitudes.iter().map(|a| a.norm()).collect();

    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| mode_order(weights[a], eigenvalues[a], a, weights[b], eigenvalues[b], b));

    let mut modes = CMatrix::zeros(n_obs, r);
    for (dst, &src) in order.iter().enumerate() {
        modes.set_column(dst, &unit_modes.column(src));
    }
    KoopmanDecomposition::new(
        order.iter().map(|&j| eigenvalues[j]).collect(),
        modes,
        order.iter().map(|&j| weights[j]).collect(),
        r,
        x.meta().clone(),
    )
}

/// Weighted norm descending, then |lambda| descending, then arg ascending,
/// then original index.
fn mode_order(
    wa: f64,
    la: Complex64,
    ia: usize,
    wb: f64,
    lb: Complex64,
    ib: usize,
) -> Ordering {
    wb.total_cmp(&wa)
        .then(lb.norm().total_cmp(&la.norm()))
        .then(la.arg().total_cmp(&lb.arg()))
        .then(ia.cmp(&ib))
}
