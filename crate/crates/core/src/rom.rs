//! Deterministic reduced order model `x(t) ~ sum_j c_j lambda_j^t m_j`.

use std::ops::Range;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{KromError, Result};
use crate::kmd::{KmdFile, KoopmanDecomposition};
use crate::linalg::{self, CMatrix, CVector, ThinSvd};
use crate::noise::NoiseDecomposition;
use crate::snapshots::{write_file, SnapshotMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedOrderModel {
    decomposition: KoopmanDecomposition,
    coefficients: Vec<Complex64>,
    train_window: Range<usize>,
    dt: f64,
}

/// `lambda^t` for every eigenvalue.
pub(crate) fn powers(eigenvalues: &[Complex64], t: usize) -> Result<Vec<Complex64>> {
    let exp = i32::try_from(t)
        .map_err(|_| KromError::InvalidArgument(format!("time index {t} too large")))?;
    let p: Vec<Complex64> = eigenvalues.iter().map(|l| l.powi(exp)).collect();
    if p.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(KromError::Numerical(format!("eigenvalue power overflows at t={t}")));
    }
    Ok(p)
}

/// Minimum-norm `alpha` minimising `sum_{t in window} ||x_t - M diag(lambda^t) alpha||^2`.
///
/// `M = U S V^*` reduces each time block to `k = rank(M)` rows: the part of
/// `x_t` outside `range(M)` is a constant of the problem, so the stacked
/// system is `(k |window|) x J` rather than `(n_obs |window|) x J`.
pub(crate) fn modal_least_squares(
    modes: &CMatrix,
    eigenvalues: &[Complex64],
    data: &CMatrix,
    window: Range<usize>,
) -> Result<CVector> {
    let j = modes.ncols();
    if eigenvalues.len() != j {
        return Err(KromError::Dimension(format!(
            "{} eigenvalues for {j} modes",
            eigenvalues.len()
        )));
    }
    if modes.nrows() != data.nrows() {
        return Err(KromError::Dimension(format!(
            "modes have {} rows, data has {}",
            modes.nrows(),
            data.nrows()
        )));
    }
    if window.is_empty() || window.end > data.ncols() {
        return Err(KromError::InvalidArgument(format!(
            "window {window:?} outside 0..{}",
            data.ncols()
        )));
    }
    let svd = ThinSvd::compute(modes)?;
    let k = svd.numerical_rank();
    let svd = svd.truncated(k);
    // B = S V^*, k x J
    let mut b = svd.v.adjoint();
    for (a, s) in svd.s.iter().enumerate() {
        b.row_mut(a).scale_mut(*s);
    }
    let projected = svd.u.adjoint() * data.columns(window.start, window.len());

    let w = window.len();
    let mut design = CMatrix::zeros(k * w, j);
    let mut rhs = CVector::zeros(k * w);
    for (step, t) in window.enumerate() {
        let p = powers(eigenvalues, t)?;
        for a in 0..k {
            let row = step * k + a;
            for (col, pc) in p.iter().enumerate() {
                design[(row, col)] = b[(a, col)] * pc;
            }
            rhs[row] = projected[(a, step)];
        }
    }
    linalg::lstsq_min_norm(&design, &rhs)
}

impl ReducedOrderModel {
    pub fn new(
        decomposition: KoopmanDecomposition,
        coefficients: Vec<Complex64>,
        train_window: Range<usize>,
        dt: f64,
    ) -> Result<Self> {
        if coefficients.len() != decomposition.n_modes() {
            return Err(KromError::Dimension(format!(
                "{} coefficients for {} modes",
                coefficients.len(),
                decomposition.n_modes()
            )));
        }
        if train_window.is_empty() {
            return Err(KromError::InvalidArgument("empty training window".into()));
        }
        Ok(Self {
            decomposition,
            coefficients,
            train_window,
            dt,
        })
    }

    pub fn decomposition(&self) -> &KoopmanDecomposition {
        &self.decomposition
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn train_window(&self) -> Range<usize> {
        self.train_window.clone()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_modes(&self) -> usize {
        self.coefficients.len()
    }

    /// `sum_j c_j lambda_j^t m_j` for a single time index.
    pub fn evaluate(&self, t: usize) -> Result<CVector> {
        let p = powers(self.decomposition.eigenvalues(), t)?;
        let weights = CVector::from_iterator(
            p.len(),
            p.iter().zip(&self.coefficients).map(|(pt, c)| pt * c),
        );
        Ok(self.decomposition.modes() * weights)
    }

    /// Deterministic trajectory over `t_indices`, as a snapshot matrix whose
    /// metadata follows the source data (t0 shifted to the first index).
    pub fn reconstruct(&self, t_indices: Range<usize>) -> Result<SnapshotMatrix> {
        let values = self.reconstruct_values(t_indices.clone())?;
        let mut meta = self.decomposition.source_meta().clone();
        meta.t0 += t_indices.start as f64 * meta.dt;
        SnapshotMatrix::new(values, meta)
    }

    pub(crate) fn reconstruct_values(&self, t_indices: Range<usize>) -> Result<CMatrix> {
        if t_indices.is_empty() {
            return Err(KromError::InvalidArgument("empty time range".into()));
        }
        let mut out = CMatrix::zeros(self.decomposition.n_obs(), t_indices.len());
        for (col, t) in t_indices.enumerate() {
            out.set_column(col, &self.evaluate(t)?);
        }
        Ok(out)
    }

    /// Forecast mean and per-coordinate variance within the mode subspace at
    /// time `t`: the deterministic prediction shifted by the modal-noise mean,
    /// and the modal-noise variance (real plus imaginary parts).
    pub fn forecast_stats(&self, noise: &NoiseDecomposition, t: usize) -> Result<(CVector, Vec<f64>)> {
        if noise.n_modes() != self.n_modes() || noise.fits().len() != self.decomposition.n_obs() {
            return Err(KromError::Dimension(
                "noise decomposition was not computed from this model".into(),
            ));
        }
        let det = self.evaluate(t)?;
        let fits = noise.fits();
        let mean = CVector::from_iterator(
            det.len(),
            det.iter()
                .zip(fits)
                .map(|(d, g)| d + Complex64::new(g.mean_re, g.mean_im)),
        );
        let var = fits.iter().map(|g| g.std_re * g.std_re + g.std_im * g.std_im).collect();
        Ok((mean, var))
    }

    /// Self-contained `.rom.json` embedding the truncated decomposition.
    pub fn save(&self, path: &Path) -> Result<()> {
        self.write(path, Some(KmdFile::from(&self.decomposition)), None)
    }

    /// `.rom.json` that refers to a saved decomposition (path relative to the
    /// model file) instead of embedding it; the model's modes are the leading
    /// `n_modes` of that decomposition.
    pub fn save_linked(&self, path: &Path, decomposition_file: &str) -> Result<()> {
        self.write(path, None, Some(decomposition_file.to_string()))
    }

    fn write(&self, path: &Path, decomposition: Option<KmdFile>, decomposition_file: Option<String>) -> Result<()> {
        let file = RomFile {
            decomposition,
            decomposition_file,
            n_modes: self.n_modes(),
            coefficients: self.coefficients.iter().map(|z| [z.re, z.im]).collect(),
            train_window: [self.train_window.start, self.train_window.end],
            dt: self.dt,
        };
        write_file(path, serde_json::to_string(&file)?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| KromError::io(path, e))?;
        let file: RomFile = serde_json::from_str(&text)?;
        let decomposition = match (file.decomposition, file.decomposition_file) {
            (Some(embedded), _) => embedded.try_into()?,
            (None, Some(rel)) => {
                let base = path.parent().unwrap_or_else(|| Path::new(""));
                KoopmanDecomposition::load(&base.join(rel))?.truncate(file.n_modes)?
            }
            (None, None) => {
                return Err(KromError::Format(format!(
                    "{}: no decomposition in model file",
                    path.display()
                )))
            }
        };
        if file.train_window[0] >= file.train_window[1] {
            return Err(KromError::Format(format!("{}: empty training window", path.display())));
        }
        Self::new(
            decomposition,
            file.coefficients.iter().map(|&[re, im]| Complex64::new(re, im)).collect(),
            file.train_window[0]..file.train_window[1],
            file.dt,
        )
    }
}

#[derive(Serialize, Deserialize)]
struct RomFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    decomposition: Option<KmdFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    decomposition_file: Option<String>,
    n_modes: usize,
    coefficients: Vec<[f64; 2]>,
    train_window: [usize; 2],
    dt: f64,
}

/// Refit reconstruction coefficients of `decomposition` on `x` over `window`.
pub fn fit_coefficients(
    decomposition: &KoopmanDecomposition,
    x: &SnapshotMatrix,
    window: Range<usize>,
) -> Result<ReducedOrderModel> {
    if x.n_obs() != decomposition.n_obs() {
        return Err(KromError::Dimension(format!(
            "data has {} observables, modes have {}",
            x.n_obs(),
            decomposition.n_obs()
        )));
    }
    if window.is_empty() {
        return Err(KromError::InvalidArgument("empty fitting window".into()));
    }
    let c = modal_least_squares(
        decomposition.modes(),
        decomposition.eigenvalues(),
        x.values(),
        window.clone(),
    )?;
    ReducedOrderModel::new(decomposition.clone(), c.iter().copied().collect(), window, x.dt())
}
