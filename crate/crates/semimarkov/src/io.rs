//! CSV and JSON file formats.
//!
//! CSV files use a dot decimal separator, a comma field separator and a
//! mandatory header row. State labels are 1-based in files and 0-based in
//! memory.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

use semimarkov_core::features::{FeatureSeries, RawAccel};
use semimarkov_core::LabeledSeries;

/// Shortest decimal text that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// A series file: the verbatim time column, the data column names and the
/// parsed series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    pub time: Vec<String>,
    pub columns: Vec<String>,
    pub series: LabeledSeries,
}

impl SeriesTable {
    /// Time column `1..=T` and columns `x1..xd`.
    pub fn numbered(series: LabeledSeries) -> Self {
        let time = (1..=series.len()).map(|t| t.to_string()).collect();
        let columns = (1..=series.dim()).map(|d| format!("x{d}")).collect();
        Self { time, columns, series }
    }
}

/// File stem used as the series identifier.
pub fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))
}

fn parse_f64(field: &str, what: &str, path: &Path, line: u64) -> Result<f64> {
    let v: f64 = field
        .parse()
        .with_context(|| format!("{}:{line}: {what} `{field}` is not a number", path.display()))?;
    if !v.is_finite() {
        bail!("{}:{line}: {what} is not finite", path.display());
    }
    Ok(v)
}

fn parse_label(field: &str, path: &Path, line: u64) -> Result<usize> {
    match field.parse::<usize>() {
        Ok(l) if l >= 1 => Ok(l - 1),
        _ => bail!("{}:{line}: label `{field}` must be an integer >= 1", path.display()),
    }
}

/// Read a series CSV with header `t,<dims...>[,label]`.
pub fn read_series(path: &Path) -> Result<SeriesTable> {
    let mut rdr = reader(path)?;
    let headers = rdr
        .headers()
        .with_context(|| format!("{}: bad header", path.display()))?
        .clone();
    if headers.get(0) != Some("t") {
        bail!("{}: the first column must be `t`", path.display());
    }
    let has_label = headers.len() > 1 && headers.get(headers.len() - 1) == Some("label");
    let n_dims = headers.len() - 1 - usize::from(has_label);
    if n_dims == 0 {
        bail!("{}: no data columns", path.display());
    }
    let columns: Vec<String> = headers.iter().skip(1).take(n_dims).map(str::to_string).collect();
    let mut time = Vec::new();
    let mut obs = Vec::new();
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record.with_context(|| format!("{}: malformed row", path.display()))?;
        let line = record.position().map_or(0, |p| p.line());
        parse_f64(&record[0], "time", path, line)?;
        time.push(record[0].to_string());
        for d in 0..n_dims {
            obs.push(parse_f64(&record[d + 1], &columns[d], path, line)?);
        }
        if has_label {
            labels.push(parse_label(&record[n_dims + 1], path, line)?);
        }
    }
    if time.is_empty() {
        bail!("{}: no rows", path.display());
    }
    let mut series = LabeledSeries::from_flat(stem(path), n_dims, obs)?;
    if has_label {
        series = series.with_labels(labels)?;
    }
    Ok(SeriesTable { time, columns, series })
}

/// Write rows of already formatted fields under `header`.
pub fn write_table<I>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_series(path: &Path, table: &SeriesTable) -> Result<()> {
    let s = &table.series;
    if table.time.len() != s.len() || table.columns.len() != s.dim() {
        bail!("series table columns do not match the series");
    }
    let mut header = vec!["t".to_string()];
    header.extend(table.columns.iter().cloned());
    if s.labels.is_some() {
        header.push("label".into());
    }
    let rows = (0..s.len()).map(|t| {
        let mut row = vec![table.time[t].clone()];
        row.extend(s.row(t).iter().map(|&v| fmt_f64(v)));
        if let Some(l) = &s.labels {
            row.push((l[t] + 1).to_string());
        }
        row
    });
    write_table(path, &header, rows)
}

/// Read raw acceleration with header `t,surge,sway,heave[,label]`.
pub fn read_raw_accel(path: &Path) -> Result<RawAccel> {
    let mut rdr = reader(path)?;
    let headers = rdr
        .headers()
        .with_context(|| format!("{}: bad header", path.display()))?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    let has_label = match names.as_slice() {
        ["t", "surge", "sway", "heave"] => false,
        ["t", "surge", "sway", "heave", "label"] => true,
        _ => bail!("{}: header must be `t,surge,sway,heave[,label]`", path.display()),
    };
    let mut raw = RawAccel {
        time: Vec::new(),
        surge: Vec::new(),
        sway: Vec::new(),
        heave: Vec::new(),
        labels: has_label.then(Vec::new),
    };
    for record in rdr.records() {
        let record = record.with_context(|| format!("{}: malformed row", path.display()))?;
        let line = record.position().map_or(0, |p| p.line());
        raw.time.push(parse_f64(&record[0], "time", path, line)?);
        raw.surge.push(parse_f64(&record[1], "surge", path, line)?);
        raw.sway.push(parse_f64(&record[2], "sway", path, line)?);
        raw.heave.push(parse_f64(&record[3], "heave", path, line)?);
        if let Some(l) = raw.labels.as_mut() {
            l.push(parse_label(&record[4], path, line)?);
        }
    }
    raw.validate().with_context(|| format!("{}", path.display()))?;
    Ok(raw)
}

/// Column names of a feature file after the time column.
pub const FEATURE_COLUMNS: [&str; 3] = ["log_mean_vedba", "mean_pitch", "log_sd_pitch"];

/// Write window features as a series CSV that `fit` and `decode` accept.
pub fn write_features(path: &Path, features: &FeatureSeries) -> Result<()> {
    let mut header = vec!["t".to_string()];
    header.extend(FEATURE_COLUMNS.iter().map(|c| c.to_string()));
    if features.labels.is_some() {
        header.push("label".into());
    }
    let rows = (0..features.len()).map(|i| {
        let mut row = vec![
            fmt_f64(features.start_time[i]),
            fmt_f64(features.log_mean_vedba[i]),
            fmt_f64(features.mean_pitch[i]),
            fmt_f64(features.log_sd_pitch[i]),
        ];
        if let Some(l) = &features.labels {
            row.push((l[i] + 1).to_string());
        }
        row
    });
    write_table(path, &header, rows)
}

/// Write a decoding as `t,state_global,prob_1..prob_J,state_local`.
pub fn write_decoding(
    path: &Path,
    time: &[String],
    state_global: &[usize],
    probs: &[f64],
    state_local: &[usize],
) -> Result<()> {
    let n = time.len();
    if state_global.len() != n || state_local.len() != n || n == 0 || probs.len() % n != 0 {
        bail!("decoding columns differ in length");
    }
    let j = probs.len() / n;
    let mut header = vec!["t".to_string(), "state_global".to_string()];
    header.extend((1..=j).map(|k| format!("prob_{k}")));
    header.push("state_local".into());
    let rows = (0..n).map(|t| {
        let mut row = vec![time[t].clone(), (state_global[t] + 1).to_string()];
        row.extend(probs[t * j..(t + 1) * j].iter().map(|&p| fmt_f64(p)));
        row.push((state_local[t] + 1).to_string());
        row
    });
    write_table(path, &header, rows)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{}: invalid JSON document", path.display()))
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Expand directories to their `*.csv` files (sorted by name); plain files
/// are kept in the order given.
pub fn expand_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| format!("cannot list {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && f.extension().is_some_and(|x| x == "csv"))
                .collect();
            found.sort();
            out.extend(found);
        } else if p.is_file() {
            out.push(p.clone());
        } else {
            bail!("input {} does not exist", p.display());
        }
    }
    if out.is_empty() {
        bail!("no input CSV files found");
    }
    Ok(out)
}
