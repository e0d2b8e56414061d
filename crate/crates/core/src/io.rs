//! Series ingestion, standardisation and flat-file output helpers.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SdmError};
use crate::pipeline::StepRecord;

/// Formats a float with 17 significant digits so it parses back bit-exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Standardize {
    #[default]
    None,
    /// Full-series mean and standard deviation. Uses future values.
    GlobalZ,
    /// Statistics of the points up to and including each point.
    ExpandingZ,
}

impl std::str::FromStr for Standardize {
    type Err = SdmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Standardize::None),
            "global-z" => Ok(Standardize::GlobalZ),
            "expanding-z" => Ok(Standardize::ExpandingZ),
            other => Err(SdmError::InvalidConfiguration(format!(
                "unknown standardize mode `{other}` (expected none, global-z or expanding-z)"
            ))),
        }
    }
}

impl std::fmt::Display for Standardize {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Standardize::None => "none",
            Standardize::GlobalZ => "global-z",
            Standardize::ExpandingZ => "expanding-z",
        })
    }
}

/// Rescales `series` to zero mean and unit (population) standard deviation.
///
/// For `ExpandingZ`, the first `min_history - 1` points have no usable
/// statistics yet and are emitted as 0; from index `min_history - 1` onward
/// each point is scaled by the mean and deviation of the points seen so far.
/// `min_history` is raised to 2 if smaller.
pub fn standardize(series: &[f64], mode: Standardize, min_history: usize) -> Result<Vec<f64>> {
    if series.len() < 2 {
        return Err(SdmError::DegenerateSeries(format!(
            "need at least 2 points to standardize, got {}",
            series.len()
        )));
    }
    match mode {
        Standardize::None => Ok(series.to_vec()),
        Standardize::GlobalZ => {
            let n = series.len() as f64;
            let mean = series.iter().sum::<f64>() / n;
            let var = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            if !(var > 0.0) {
                return Err(SdmError::DegenerateSeries("zero variance".into()));
            }
            let sd = var.sqrt();
            Ok(series.iter().map(|v| (v - mean) / sd).collect())
        }
        Standardize::ExpandingZ => {
            let start = min_history.max(2) - 1;
            let mut out = Vec::with_capacity(series.len());
            // Welford running moments.
            let (mut mean, mut m2) = (0.0, 0.0);
            for (i, &v) in series.iter().enumerate() {
                let count = (i + 1) as f64;
                let delta = v - mean;
                mean += delta / count;
                m2 += delta * (v - mean);
                if i < start {
                    out.push(0.0);
                    continue;
                }
                let var = m2 / count;
                if !(var > 0.0) {
                    return Err(SdmError::DegenerateSeries(format!(
                        "zero variance in the first {} points",
                        i + 1
                    )));
                }
                out.push((v - mean) / var.sqrt());
            }
            Ok(out)
        }
    }
}

/// Reads two named numeric columns from a headed CSV file. Lines starting
/// with `#` are metadata and skipped.
pub fn load_pair(
    path: &Path,
    x_column: &str,
    y_column: &str,
    min_rows: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let file = std::fs::File::open(path)
        .map_err(|e| SdmError::Load(format!("{}: {e}", path.display())))?;
    read_pair(file, x_column, y_column, min_rows)
}

pub fn read_pair<R: std::io::Read>(
    reader: R,
    x_column: &str,
    y_column: &str,
    min_rows: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| SdmError::Load(format!("unreadable header: {e}")))?
        .clone();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            SdmError::Load(format!(
                "missing column `{name}` (have: {})",
                headers.iter().collect::<Vec<_>>().join(", ")
            ))
        })
    };
    let (xi, yi) = (find(x_column)?, find(y_column)?);

    let (mut x, mut y) = (Vec::new(), Vec::new());
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            SdmError::Load(format!("line {line}: {e}"))
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let cell = |idx: usize, name: &str| -> Result<f64> {
            let raw = row.get(idx).unwrap_or("");
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(SdmError::Load(format!(
                    "line {line}: column `{name}` is not a finite number: `{raw}`"
                ))),
            }
        };
        x.push(cell(xi, x_column)?);
        y.push(cell(yi, y_column)?);
    }
    if x.len() < min_rows {
        return Err(SdmError::Load(format!(
            "need at least {min_rows} rows, found {}",
            x.len()
        )));
    }
    Ok((x, y))
}

/// Writes `contents` to a temporary file beside `path` and renames it into place.
pub fn atomic_write(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| SdmError::Io(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        SdmError::from(e)
    })
}

/// CSV text with an optional `# <metadata>` first line.
pub struct CsvBuilder {
    writer: csv::Writer<Vec<u8>>,
    preamble: String,
}

impl CsvBuilder {
    pub fn new(metadata: Option<&str>, header: &[String]) -> Result<Self> {
        let preamble = metadata
            .map(|m| format!("# {}\n", m.replace('\n', " ")))
            .unwrap_or_default();
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).map_err(csv_err)?;
        Ok(Self { writer, preamble })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).map_err(csv_err)
    }

    pub fn finish(self) -> Result<Vec<u8>> {
        let body = self
            .writer
            .into_inner()
            .map_err(|e| SdmError::Io(e.to_string()))?;
        let mut out = self.preamble.into_bytes();
        out.extend(body);
        Ok(out)
    }
}

fn csv_err(e: csv::Error) -> SdmError {
    SdmError::Io(e.to_string())
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Per-step weights and diagnostics: `t, theta, lambda, v, u2, y_hat`, then
/// the weight block (`w1_<lag>` and, for two-column variants, `w2_<lag>`).
pub fn heatmap_csv(
    records: &[StepRecord],
    n_states: usize,
    metadata: Option<&str>,
) -> Result<Vec<u8>> {
    let columns = records.first().map_or(1, |r| r.weights.len() / n_states);
    let mut header: Vec<String> = ["t", "theta", "lambda", "v", "u2", "y_hat"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for c in 1..=columns {
        header.extend((1..=n_states).map(|lag| format!("w{c}_{lag}")));
    }
    let mut csv = CsvBuilder::new(metadata, &header)?;
    for r in records {
        let mut row = vec![
            r.t.to_string(),
            fmt_f64(r.theta),
            fmt_f64(r.lambda),
            fmt_f64(r.transition_error),
            fmt_f64(r.weighted_residual),
            opt(r.y_hat),
        ];
        row.extend(r.weights.iter().map(|&w| fmt_f64(w)));
        csv.row(row)?;
    }
    csv.finish()
}

/// `t, x, y, y_hat, x_hat` per forecast step.
pub fn forecast_csv(records: &[StepRecord], metadata: Option<&str>) -> Result<Vec<u8>> {
    let header: Vec<String> = ["t", "x", "y", "y_hat", "x_hat"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut csv = CsvBuilder::new(metadata, &header)?;
    for r in records {
        csv.row([
            r.t.to_string(),
            fmt_f64(r.x),
            fmt_f64(r.y),
            opt(r.y_hat),
            opt(r.x_hat),
        ])?;
    }
    csv.finish()
}

/// `t, x, y, tau` for a simulated pair.
pub fn pair_csv(
    pair: &crate::simulation::SimulatedPair,
    metadata: Option<&str>,
) -> Result<Vec<u8>> {
    let header: Vec<String> = ["t", "x", "y", "tau"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut csv = CsvBuilder::new(metadata, &header)?;
    for (k, ((x, y), tau)) in pair
        .x
        .iter()
        .zip(&pair.y)
        .zip(&pair.lag_path.taus)
        .enumerate()
    {
        csv.row([
            (k + 1).to_string(),
            fmt_f64(*x),
            fmt_f64(*y),
            tau.to_string(),
        ])?;
    }
    csv.finish()
}

/// Raw per-trial benchmark values.
pub fn trials_csv(raw: &[crate::metrics::TrialResult], metadata: Option<&str>) -> Result<Vec<u8>> {
    let header: Vec<String> = ["family", "sigma_u", "trial", "seed", "rmse", "fe"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut csv = CsvBuilder::new(metadata, &header)?;
    for r in raw {
        csv.row([
            r.family.to_string(),
            fmt_f64(r.sigma_u),
            r.trial.to_string(),
            r.seed.to_string(),
            fmt_f64(r.rmse),
            fmt_f64(r.fe),
        ])?;
    }
    csv.finish()
}
