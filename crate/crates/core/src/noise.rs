//! Residual, modal and innovation noise of a reduced order model, with
//! per-coordinate Gaussian fits and confidence bands.

use std::f64::consts::TAU;
use std::ops::Range;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{KromError, Result};
use crate::kmd::KoopmanDecomposition;
use crate::linalg::{self, CMatrix};
use crate::rom::ReducedOrderModel;
use crate::snapshots::{angle_of, fmt_f64, write_file, SnapshotMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub mean_re: f64,
    pub std_re: f64,
    pub mean_im: f64,
    pub std_im: f64,
}

impl GaussianFit {
    /// Scale of the complex deviation: `sqrt((std_re^2 + std_im^2) / 2)`.
    pub fn pooled_std(&self) -> f64 {
        ((self.std_re * self.std_re + self.std_im * self.std_im) / 2.0).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDecomposition {
    residual: CMatrix,
    modal: CMatrix,
    innovation: CMatrix,
    eval_window: Range<usize>,
    fits: Vec<GaussianFit>,
    n_modes: usize,
}

/// `r(t) = x(t) - sum_j c_j lambda_j^t m_j` for `t` in `window`.
pub fn compute_residual(
    rom: &ReducedOrderModel,
    x: &SnapshotMatrix,
    window: Range<usize>,
) -> Result<CMatrix> {
    if x.n_obs() != rom.decomposition().n_obs() {
        return Err(KromError::Dimension(format!(
            "data has {} observables, model has {}",
            x.n_obs(),
            rom.decomposition().n_obs()
        )));
    }
    if window.is_empty() || window.end > x.n_t() {
        return Err(KromError::InvalidArgument(format!(
            "window {window:?} outside 0..{}",
            x.n_t()
        )));
    }
    let recon = rom.reconstruct_values(window.clone())?;
    Ok(x.values().columns(window.start, window.len()) - recon)
}

/// `rho(t) = M M^+ r(t)`, computed as `Q Q^* r(t)` with `Q` an orthonormal
/// basis of the mode span, plus one reorthogonalisation pass so the
/// remainder is orthogonal to the modes to the precision of its own size
/// rather than that of `r`.
pub fn project_modal(d: &KoopmanDecomposition, r: &CMatrix) -> Result<CMatrix> {
    if r.nrows() != d.n_obs() {
        return Err(KromError::Dimension(format!(
            "residual has {} rows, modes have {}",
            r.nrows(),
            d.n_obs()
        )));
    }
    let q = linalg::range_basis(d.modes())?;
    let mut coords = q.adjoint() * r;
    let rest = r - &q * &coords;
    coords += q.adjoint() * rest;
    Ok(q * coords)
}

/// `eta(t) = r(t) - rho(t)`.
pub fn compute_innovation(r: &CMatrix, rho: &CMatrix) -> Result<CMatrix> {
    if r.shape() != rho.shape() {
        return Err(KromError::Dimension(format!(
            "residual {:?} vs modal noise {:?}",
            r.shape(),
            rho.shape()
        )));
    }
    Ok(r - rho)
}

fn mean_std(xs: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let mean = xs.clone().sum::<f64>() / n as f64;
    let ss: f64 = xs.map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Per-row sample mean and unbiased standard deviation of the real and
/// imaginary parts.
pub fn fit_gaussian(seq: &CMatrix) -> Result<Vec<GaussianFit>> {
    let n = seq.ncols();
    if n < 2 {
        return Err(KromError::InvalidArgument(format!(
            "Gaussian fit needs at least 2 samples, got {n}"
        )));
    }
    Ok(seq
        .row_iter()
        .map(|row| {
            let (mean_re, std_re) = mean_std(row.iter().map(|z| z.re), n);
            let (mean_im, std_im) = mean_std(row.iter().map(|z| z.im), n);
            GaussianFit {
                mean_re,
                std_re,
                mean_im,
                std_im,
            }
        })
        .collect())
}

impl NoiseDecomposition {
    /// Residual of `rom` against `x` over `window`, split into its modal and
    /// innovation parts, with Gaussian fits of the modal part.
    pub fn compute(rom: &ReducedOrderModel, x: &SnapshotMatrix, window: Range<usize>) -> Result<Self> {
        let residual = compute_residual(rom, x, window.clone())?;
        let modal = project_modal(rom.decomposition(), &residual)?;
        let innovation = compute_innovation(&residual, &modal)?;
        let fits = fit_gaussian(&modal)?;
        Ok(Self {
            residual,
            modal,
            innovation,
            eval_window: window,
            fits,
            n_modes: rom.n_modes(),
        })
    }

    pub fn residual(&self) -> &CMatrix {
        &self.residual
    }

    pub fn modal(&self) -> &CMatrix {
        &self.modal
    }

    pub fn innovation(&self) -> &CMatrix {
        &self.innovation
    }

    pub fn eval_window(&self) -> Range<usize> {
        self.eval_window.clone()
    }

    pub fn fits(&self) -> &[GaussianFit] {
        &self.fits
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// Writes `<stem>.noise.json` with the window and fits, plus
    /// `<stem>.{residual,modal,innovation}.csv` traces of the coordinates in
    /// `rows`.
    pub fn save(
        &self,
        dir: &Path,
        stem: &str,
        rows: Range<usize>,
        coord_names: &[String],
        t0: f64,
        dt: f64,
    ) -> Result<()> {
        if rows.end > self.residual.nrows() || coord_names.len() != rows.len() {
            return Err(KromError::Dimension(format!(
                "{} names for rows {rows:?} of {}",
                coord_names.len(),
                self.residual.nrows()
            )));
        }
        let file = NoiseFile {
            eval_window: [self.eval_window.start, self.eval_window.end],
            n_modes: self.n_modes,
            coord_names: coord_names.to_vec(),
            gaussian_fits: self.fits[rows.clone()].to_vec(),
        };
        write_file(
            &dir.join(format!("{stem}.noise.json")),
            serde_json::to_string_pretty(&file)?.as_bytes(),
        )?;
        let start = t0 + self.eval_window.start as f64 * dt;
        for (name, m) in [
            ("residual", &self.residual),
            ("modal", &self.modal),
            ("innovation", &self.innovation),
        ] {
            let block = m.rows(rows.start, rows.len()).into_owned();
            let csv = trace_csv(&block, coord_names, start, dt);
            write_file(&dir.join(format!("{stem}.{name}.csv")), csv.as_bytes())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseFile {
    pub eval_window: [usize; 2],
    pub n_modes: usize,
    pub coord_names: Vec<String>,
    pub gaussian_fits: Vec<GaussianFit>,
}

impl NoiseFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| KromError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Complex traces in the snapshot CSV layout.
pub fn trace_csv(m: &CMatrix, coord_names: &[String], t0: f64, dt: f64) -> String {
    let mut out = String::from("t");
    for c in coord_names {
        out.push_str(&format!(",{c}_re,{c}_im"));
    }
    out.push('\n');
    for (k, col) in m.column_iter().enumerate() {
        out.push_str(&fmt_f64(t0 + k as f64 * dt));
        for z in col.iter() {
            out.push(',');
            out.push_str(&fmt_f64(z.re));
            out.push(',');
            out.push_str(&fmt_f64(z.im));
        }
        out.push('\n');
    }
    out
}

/// Read a trace written by [`trace_csv`]: times and one complex row per
/// coordinate.
pub fn load_trace_csv(path: &Path) -> Result<(Vec<String>, Vec<f64>, CMatrix)> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => KromError::io(path, io),
        other => KromError::Format(format!("{}: {other:?}", path.display())),
    })?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.first().map(String::as_str) != Some("t") || header.len() % 2 != 1 {
        return Err(KromError::Format(format!("{}: unexpected header", path.display())));
    }
    let mut names = Vec::new();
    for pair in header[1..].chunks(2) {
        let name = pair[0]
            .strip_suffix("_re")
            .filter(|n| pair[1].strip_suffix("_im") == Some(*n))
            .ok_or_else(|| KromError::Format(format!("{}: bad column pair {pair:?}", path.display())))?;
        names.push(name.to_string());
    }
    let mut times = Vec::new();
    let mut columns: Vec<Vec<Complex64>> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let parse = |k: usize| -> Result<f64> {
            record[k]
                .trim()
                .parse::<f64>()
                .map_err(|e| KromError::Format(format!("{}: {e}", path.display())))
        };
        times.push(parse(0)?);
        let mut col = Vec::with_capacity(names.len());
        for i in 0..names.len() {
            col.push(Complex64::new(parse(1 + 2 * i)?, parse(2 + 2 * i)?));
        }
        columns.push(col);
    }
    let m = CMatrix::from_fn(names.len(), columns.len(), |i, k| columns[k][i]);
    Ok((names, times, m))
}

/// A band `center +- half_width` per coordinate, constant width in time.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceBand {
    /// Rows are coordinates, columns are time steps.
    pub center: DMatrix<f64>,
    pub half_width: Vec<f64>,
    pub k: f64,
}

/// Band of `k` modal-noise standard deviations around the reconstruction
/// over `t_indices`. Real-valued coordinates use `std_re`; complexified
/// angles are centred on the angle of the reconstruction with the pooled
/// complex scale converted to angle units.
pub fn confidence_band(
    rom: &ReducedOrderModel,
    fits: &[GaussianFit],
    k: f64,
    t_indices: Range<usize>,
) -> Result<ConfidenceBand> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(KromError::InvalidArgument(format!("band multiplier must be positive, got {k}")));
    }
    let n_obs = rom.decomposition().n_obs();
    if fits.len() != n_obs {
        return Err(KromError::Dimension(format!(
            "{} fits for {n_obs} coordinates",
            fits.len()
        )));
    }
    let recon = rom.reconstruct_values(t_indices)?;
    let period = rom.decomposition().source_meta().period;
    let center = match period {
        Some(p) => recon.map(|z| angle_of(z, p)),
        None => recon.map(|z: Complex64| z.re),
    };
    let half_width = fits
        .iter()
        .map(|f| match period {
            Some(p) => k * f.pooled_std() * p / TAU,
            None => k * f.std_re,
        })
        .collect();
    Ok(ConfidenceBand { center, half_width, k })
}
