//! Snapshot matrices: one column per time step, one row per observable.
//!
//! On disk a snapshot matrix is a pair of files sharing a stem:
//! `<name>.csv` with header `t,<c0>_re,<c0>_im,...` and one row per time
//! step, and `<name>.manifest.json` with the metadata. Floats are written with
//! 17 significant digits so a save/load cycle is lossless.

use std::f64::consts::TAU;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{KromError, Result};
use crate::linalg::CMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Representation {
    Raw,
    ComplexifiedAngle,
    Hankel { delays: usize, base_n_obs: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub dt: f64,
    pub t0: f64,
    pub coord_names: Vec<String>,
    pub representation: Representation,
    /// Angle period, for data that holds (or was built from) angles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    dt: f64,
    t0: f64,
    n_obs: usize,
    n_t: usize,
    representation: Representation,
    coord_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    period: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix {
    values: CMatrix,
    meta: SnapshotMeta,
}

impl SnapshotMatrix {
    pub fn new(values: CMatrix, meta: SnapshotMeta) -> Result<Self> {
        let (n_obs, n_t) = values.shape();
        if n_obs < 1 || n_t < 2 {
            return Err(KromError::InvalidArgument(format!(
                "snapshot matrix needs at least 1 observable and 2 time steps, got {n_obs}x{n_t}"
            )));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(KromError::InvalidArgument("non-finite snapshot entry".into()));
        }
        if !(meta.dt > 0.0 && meta.dt.is_finite()) || !meta.t0.is_finite() {
            return Err(KromError::InvalidArgument(format!(
                "time step must be positive and finite, got {}",
                meta.dt
            )));
        }
        if meta.coord_names.len() != n_obs {
            return Err(KromError::Dimension(format!(
                "{} coordinate names for {n_obs} observables",
                meta.coord_names.len()
            )));
        }
        if let Some(bad) = meta.coord_names.iter().find(|c| c.contains([',', '\n', '"'])) {
            return Err(KromError::InvalidArgument(format!("invalid coordinate name {bad:?}")));
        }
        if let Representation::Hankel { delays, base_n_obs } = meta.representation {
            if delays == 0 || delays * base_n_obs != n_obs {
                return Err(KromError::Dimension(format!(
                    "hankel({delays}, {base_n_obs}) tag on {n_obs} rows"
                )));
            }
        }
        if let Some(p) = meta.period {
            if meta.representation == Representation::Raw {
                return Err(KromError::InvalidArgument(
                    "an angle period is only valid on complexified data".into(),
                ));
            }
            if !(p > 0.0 && p.is_finite()) {
                return Err(KromError::InvalidArgument(format!("invalid angle period {p}")));
            }
        }
        Ok(Self { values, meta })
    }

    /// Real-valued data with default coordinate names `x0, x1, ...`.
    pub fn from_real_rows(rows: &[Vec<f64>], dt: f64) -> Result<Self> {
        let n_obs = rows.len();
        let n_t = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_t) {
            return Err(KromError::Dimension("ragged rows".into()));
        }
        let values = CMatrix::from_fn(n_obs, n_t, |i, j| Complex64::new(rows[i][j], 0.0));
        Self::new(values, SnapshotMeta::raw(n_obs, dt))
    }

    pub fn values(&self) -> &CMatrix {
        &self.values
    }

    pub fn meta(&self) -> &SnapshotMeta {
        &self.meta
    }

    pub fn n_obs(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_t(&self) -> usize {
        self.values.ncols()
    }

    pub fn dt(&self) -> f64 {
        self.meta.dt
    }

    pub fn representation(&self) -> Representation {
        self.meta.representation
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|z| z.im == 0.0)
    }

    /// Rows holding the un-delayed observables: the top block of a Hankel
    /// embedding, all rows otherwise.
    pub fn base_rows(&self) -> usize {
        match self.meta.representation {
            Representation::Hankel { base_n_obs, .. } => base_n_obs,
            _ => self.n_obs(),
        }
    }

    /// Real parts of row `i` as a plain vector.
    pub fn real_row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().map(|z| z.re).collect()
    }

    /// Same metadata, different values (shape must be compatible).
    pub fn with_values(&self, values: CMatrix) -> Result<Self> {
        Self::new(values, self.meta.clone())
    }

    /// Columns `range`, with `t0` shifted to the first kept column.
    pub fn columns(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.n_t() {
            return Err(KromError::InvalidArgument(format!(
                "column range {range:?} outside 0..{}",
                self.n_t()
            )));
        }
        let mut meta = self.meta.clone();
        meta.t0 = self.meta.t0 + range.start as f64 * self.meta.dt;
        Self::new(self.values.columns(range.start, range.len()).into_owned(), meta)
    }
}

impl SnapshotMeta {
    pub fn raw(n_obs: usize, dt: f64) -> Self {
        Self {
            dt,
            t0: 0.0,
            coord_names: (0..n_obs).map(|i| format!("x{i}")).collect(),
            representation: Representation::Raw,
            period: None,
        }
    }
}

fn sibling_paths(path: &Path) -> (PathBuf, PathBuf) {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let stem = name.strip_suffix(".csv").unwrap_or(&name).to_string();
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    (dir.join(format!("{stem}.csv")), dir.join(format!("{stem}.manifest.json")))
}

/// Format with 17 significant digits.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write `S` as `<stem>.csv` + `<stem>.manifest.json`; `path` may name
/// either the csv file or the bare stem.
pub fn save_snapshots(s: &SnapshotMatrix, path: &Path) -> Result<()> {
    let (csv_path, manifest_path) = sibling_paths(path);
    if let Some(dir) = csv_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| KromError::io(dir, e))?;
    }

    let mut body = String::with_capacity(s.n_t() * (s.n_obs() * 50 + 30));
    body.push('t');
    for c in &s.meta.coord_names {
        body.push_str(&format!(",{c}_re,{c}_im"));
    }
    body.push('\n');
    for k in 0..s.n_t() {
        body.push_str(&fmt_f64(s.meta.t0 + k as f64 * s.meta.dt));
        for i in 0..s.n_obs() {
            let z = s.values[(i, k)];
            body.push(',');
            body.push_str(&fmt_f64(z.re));
            body.push(',');
            body.push_str(&fmt_f64(z.im));
        }
        body.push('\n');
    }
    write_file(&csv_path, body.as_bytes())?;

    let manifest = Manifest {
        dt: s.meta.dt,
        t0: s.meta.t0,
        n_obs: s.n_obs(),
        n_t: s.n_t(),
        representation: s.meta.representation,
        coord_names: s.meta.coord_names.clone(),
        period: s.meta.period,
    };
    write_file(&manifest_path, serde_json::to_string_pretty(&manifest)?.as_bytes())
}

/// Write `bytes` to `path`, creating missing parent directories.
pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| KromError::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| KromError::io(path, e))?;
    f.write_all(bytes).map_err(|e| KromError::io(path, e))
}

pub fn load_snapshots(path: &Path) -> Result<SnapshotMatrix> {
    let (csv_path, manifest_path) = sibling_paths(path);
    let manifest_text =
        fs::read_to_string(&manifest_path).map_err(|e| KromError::io(&manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&manifest_text)?;
    if manifest.coord_names.len() != manifest.n_obs {
        return Err(KromError::Format(format!(
            "manifest lists {} names for n_obs={}",
            manifest.coord_names.len(),
            manifest.n_obs
        )));
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(&csv_path)?;
    let header = reader.headers()?.clone();
    let expected_cols = 1 + 2 * manifest.n_obs;
    if header.len() != expected_cols {
        return Err(KromError::Format(format!(
            "manifest declares n_obs={} ({expected_cols} columns) but header has {} columns",
            manifest.n_obs,
            header.len()
        )));
    }
    for (i, name) in manifest.coord_names.iter().enumerate() {
        let (re, im) = (&header[1 + 2 * i], &header[2 + 2 * i]);
        if re != format!("{name}_re") || im != format!("{name}_im") {
            return Err(KromError::Format(format!(
                "header columns {re:?},{im:?} do not match coordinate {name:?}"
            )));
        }
    }

    let mut columns: Vec<Vec<Complex64>> = Vec::with_capacity(manifest.n_t);
    for (row_no, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != expected_cols {
            return Err(KromError::Format(format!(
                "row {row_no} has {} fields, expected {expected_cols}",
                record.len()
            )));
        }
        let parse = |k: usize| -> Result<f64> {
            let v: f64 = record[k].trim().parse().map_err(|_| {
                KromError::Format(format!("row {row_no}: cannot parse {:?}", &record[k]))
            })?;
            if !v.is_finite() {
                return Err(KromError::Format(format!("row {row_no}: non-finite value")));
            }
            Ok(v)
        };
        let col = (0..manifest.n_obs)
            .map(|i| Ok(Complex64::new(parse(1 + 2 * i)?, parse(2 + 2 * i)?)))
            .collect::<Result<Vec<_>>>()?;
        columns.push(col);
    }
    if columns.len() != manifest.n_t {
        return Err(KromError::Format(format!(
            "manifest declares n_t={} but body has {} rows",
            manifest.n_t,
            columns.len()
        )));
    }
    let values = CMatrix::from_fn(manifest.n_obs, manifest.n_t, |i, k| columns[k][i]);
    SnapshotMatrix::new(
        values,
        SnapshotMeta {
            dt: manifest.dt,
            t0: manifest.t0,
            coord_names: manifest.coord_names,
            representation: manifest.representation,
            period: manifest.period,
        },
    )
}

/// Delay embedding with `d` stacked snapshots per column, oldest on top.
pub fn hankel_embed(s: &SnapshotMatrix, d: usize) -> Result<SnapshotMatrix> {
    let (n_obs, n_t) = (s.n_obs(), s.n_t());
    if d < 1 || d > n_t - 1 {
        return Err(KromError::InvalidArgument(format!(
            "delay count {d} outside 1..={}",
            n_t - 1
        )));
    }
    let cols = n_t - d + 1;
    let values = CMatrix::from_fn(n_obs * d, cols, |r, k| {
        let (lag, i) = (r / n_obs, r % n_obs);
        s.values[(i, k + lag)]
    });
    let coord_names = (0..d)
        .flat_map(|lag| {
            s.meta.coord_names.iter().map(move |c| {
                if lag == 0 {
                    c.clone()
                } else {
                    format!("{c}_lag{lag}")
                }
            })
        })
        .collect();
    SnapshotMatrix::new(
        values,
        SnapshotMeta {
            dt: s.meta.dt,
            t0: s.meta.t0,
            coord_names,
            representation: Representation::Hankel {
                delays: d,
                base_n_obs: n_obs,
            },
            period: s.meta.period,
        },
    )
}

/// Time series of the base observables recovered from delay-embedded
/// values: time `s` is read from column `min(s, K-1)` at lag `s - column`,
/// so every time covered by the embedding is recovered, lag 0 first.
pub fn unembed(values: &CMatrix, delays: usize, base_n_obs: usize) -> Result<CMatrix> {
    if delays == 0 || base_n_obs * delays != values.nrows() || values.ncols() == 0 {
        return Err(KromError::Dimension(format!(
            "{} rows do not hold {delays} delays of {base_n_obs} observables",
            values.nrows()
        )));
    }
    let cols = values.ncols();
    let n_t = cols + delays - 1;
    Ok(CMatrix::from_fn(base_n_obs, n_t, |i, s| {
        let k = s.min(cols - 1);
        values[((s - k) * base_n_obs + i, k)]
    }))
}

/// Map each angle `theta` to `exp(i 2 pi theta / period)`.
pub fn complexify_angles(s: &SnapshotMatrix, period: f64) -> Result<SnapshotMatrix> {
    if !(period > 0.0 && period.is_finite()) {
        return Err(KromError::InvalidArgument(format!("invalid angle period {period}")));
    }
    if !s.is_real() {
        return Err(KromError::InvalidArgument(
            "angle complexification needs real-valued input".into(),
        ));
    }
    let scale = TAU / period;
    let values = s.values.map(|z| Complex64::from_polar(1.0, z.re * scale));
    let mut meta = s.meta.clone();
    meta.representation = Representation::ComplexifiedAngle;
    meta.period = Some(period);
    SnapshotMatrix::new(values, meta)
}

/// Angle in `[0, period)` of a complex number; the modulus is ignored and 0
/// maps to angle 0.
pub fn angle_of(z: Complex64, period: f64) -> f64 {
    if z.re == 0.0 && z.im == 0.0 {
        return 0.0;
    }
    let a = z.arg().rem_euclid(TAU) * period / TAU;
    // rem_euclid can round up to exactly `period`.
    if a >= period {
        0.0
    } else {
        a
    }
}

pub fn decomplexify_angles(s: &SnapshotMatrix) -> Result<SnapshotMatrix> {
    if s.meta.representation != Representation::ComplexifiedAngle {
        return Err(KromError::InvalidArgument(
            "decomplexify needs complexified-angle data".into(),
        ));
    }
    let period = s
        .meta
        .period
        .ok_or_else(|| KromError::InvalidArgument("complexified data without a period".into()))?;
    let values = s.values.map(|z| Complex64::new(angle_of(z, period), 0.0));
    let mut meta = s.meta.clone();
    meta.representation = Representation::Raw;
    meta.period = None;
    SnapshotMatrix::new(values, meta)
}
