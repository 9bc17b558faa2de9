//! Text formats: comma-separated votes, labels and probabilities, and TOML
//! for bounds and run reports.
//!
//! Votes use `0` for an abstention and `1..=k` for classes. A single header
//! row is skipped when any of its fields is not a number.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{BfDecomposition, DsDecomposition, LossReport};
use crate::model::{PolytopeSpec, RulePredictionMatrix, SoftLabeling, Vote};
use crate::ocds::OcdsParams;

fn file_error(path: &Path, source: std::io::Error) -> Error {
    Error::File { path: path.display().to_string(), source }
}

fn open(path: impl AsRef<Path>) -> Result<File> {
    File::open(path.as_ref()).map_err(|e| file_error(path.as_ref(), e))
}

fn create(path: impl AsRef<Path>) -> Result<File> {
    File::create(path.as_ref()).map_err(|e| file_error(path.as_ref(), e))
}

fn read_text(path: impl AsRef<Path>) -> Result<String> {
    std::fs::read_to_string(path.as_ref()).map_err(|e| file_error(path.as_ref(), e))
}

fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    std::fs::write(path.as_ref(), text).map_err(|e| file_error(path.as_ref(), e))
}

/// Data rows of a CSV stream as trimmed strings, with 1-based line numbers.
fn read_rows<R: Read>(reader: R) -> Result<Vec<(usize, Vec<String>)>> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut rows = Vec::new();
    for (idx, record) in csv.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(idx + 1, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(idx + 1, |p| p.line() as usize);
        let fields: Vec<String> = record.iter().map(str::to_owned).collect();
        if fields.iter().all(String::is_empty) {
            continue;
        }
        rows.push((line, fields));
    }
    if let Some((_, first)) = rows.first() {
        if first.iter().any(|f| f.parse::<f64>().is_err()) {
            rows.remove(0);
        }
    }
    if rows.is_empty() {
        return Err(Error::Parse { line: 1, message: "no data rows".into() });
    }
    Ok(rows)
}

fn check_width(rows: &[(usize, Vec<String>)]) -> Result<usize> {
    let width = rows[0].1.len();
    for (line, fields) in rows {
        if fields.len() != width {
            return Err(Error::Parse {
                line: *line,
                message: format!("expected {width} columns, found {}", fields.len()),
            });
        }
    }
    Ok(width)
}

fn parse_code(line: usize, field: &str) -> Result<u32> {
    let value: i64 = field
        .parse()
        .map_err(|_| Error::Parse { line, message: format!("not an integer: {field:?}") })?;
    if value < 0 {
        return Err(Error::Parse { line, message: format!("negative value {value}") });
    }
    u32::try_from(value).map_err(|_| Error::Parse { line, message: format!("value {value} too large") })
}

/// Parses a vote matrix. `k` defaults to the largest observed class (at
/// least 2).
pub fn read_predictions<R: Read>(reader: R, k: Option<usize>) -> Result<RulePredictionMatrix> {
    let rows = read_rows(reader)?;
    let p = check_width(&rows)?;
    let mut codes = Vec::with_capacity(rows.len() * p);
    for (line, fields) in &rows {
        for f in fields {
            codes.push((*line, parse_code(*line, f)?));
        }
    }
    let max = codes.iter().map(|&(_, c)| c as usize).max().unwrap_or(0);
    let k = k.unwrap_or(max.max(2));
    if let Some(&(line, c)) = codes.iter().find(|&&(_, c)| c as usize > k) {
        return Err(Error::Parse { line, message: format!("vote {c} exceeds k={k}") });
    }
    let votes = codes.into_iter().map(|(_, c)| Vote::from_code(c)).collect();
    RulePredictionMatrix::new(rows.len(), p, k, votes)
}

pub fn load_predictions(path: impl AsRef<Path>, k: Option<usize>) -> Result<RulePredictionMatrix> {
    read_predictions(open(path)?, k)
}

pub fn write_predictions<W: Write>(mut out: W, preds: &RulePredictionMatrix) -> Result<()> {
    for row in preds.rows() {
        let line: Vec<String> = row.iter().map(|v| v.code().to_string()).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn save_predictions(path: impl AsRef<Path>, preds: &RulePredictionMatrix) -> Result<()> {
    let mut out = BufWriter::new(create(path)?);
    write_predictions(&mut out, preds)?;
    out.flush()?;
    Ok(())
}

/// Labels as read from a file.
#[derive(Debug, Clone, PartialEq)]
pub enum Labels {
    /// Zero-based classes.
    Hard(Vec<usize>),
    Soft(SoftLabeling),
}

impl Labels {
    pub fn n(&self) -> usize {
        match self {
            Labels::Hard(y) => y.len(),
            Labels::Soft(s) => s.n(),
        }
    }

    pub fn to_soft(&self, k: usize) -> Result<SoftLabeling> {
        match self {
            Labels::Hard(y) => SoftLabeling::one_hot(y, k),
            Labels::Soft(s) => Ok(s.clone()),
        }
    }

    /// Hard classes; soft rows are resolved by argmax.
    pub fn to_hard(&self) -> Vec<usize> {
        match self {
            Labels::Hard(y) => y.clone(),
            Labels::Soft(s) => s.argmax(),
        }
    }
}

const RENORMALIZE_TOL: f64 = 1e-6;

/// Either one integer column of classes `1..=k` or `k` probability columns.
/// Probability rows within `1e-6` of summing to one are renormalized.
pub fn read_labels<R: Read>(reader: R, k: usize) -> Result<Labels> {
    if k < 2 {
        return Err(Error::invalid(format!("need k >= 2, got {k}")));
    }
    let rows = read_rows(reader)?;
    let width = check_width(&rows)?;
    if width == 1 {
        let labels = rows
            .iter()
            .map(|(line, f)| {
                let c = parse_code(*line, &f[0])? as usize;
                if c == 0 || c > k {
                    return Err(Error::Parse { line: *line, message: format!("class {c} not in 1..={k}") });
                }
                Ok(c - 1)
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok(Labels::Hard(labels));
    }
    if width != k {
        return Err(Error::Parse {
            line: rows[0].0,
            message: format!("expected 1 or {k} columns, found {width}"),
        });
    }
    Ok(Labels::Soft(soft_rows(&rows, k)?))
}

fn soft_rows(rows: &[(usize, Vec<String>)], k: usize) -> Result<SoftLabeling> {
    let mut probs = Vec::with_capacity(rows.len() * k);
    for (line, fields) in rows {
        let mut row = fields
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|x| (0.0..=1.0).contains(x))
                    .ok_or_else(|| Error::Parse { line: *line, message: format!("bad probability {f:?}") })
            })
            .collect::<Result<Vec<f64>>>()?;
        let total: f64 = row.iter().sum();
        if (total - 1.0).abs() > RENORMALIZE_TOL {
            return Err(Error::Parse { line: *line, message: format!("row sums to {total}") });
        }
        // rows already normalized to rounding are kept bit-for-bit
        if (total - 1.0).abs() > 1e-12 {
            row.iter_mut().for_each(|q| *q /= total);
        }
        probs.extend(row);
    }
    SoftLabeling::new(rows.len(), k, probs)
}

pub fn load_labels(path: impl AsRef<Path>, k: usize) -> Result<Labels> {
    read_labels(open(path)?, k)
}

/// Labeled pool file: each row holds the `p` votes followed by the true
/// class.
pub fn read_labeled_pool<R: Read>(
    reader: R,
    k: Option<usize>,
) -> Result<(RulePredictionMatrix, Vec<usize>)> {
    let rows = read_rows(reader)?;
    let width = check_width(&rows)?;
    if width < 2 {
        return Err(Error::Parse { line: rows[0].0, message: "need votes and a label column".into() });
    }
    let p = width - 1;
    let mut codes = Vec::with_capacity(rows.len() * p);
    let mut labels = Vec::with_capacity(rows.len());
    for (line, fields) in &rows {
        for f in &fields[..p] {
            codes.push((*line, parse_code(*line, f)?));
        }
        let y = parse_code(*line, &fields[p])?;
        if y == 0 {
            return Err(Error::Parse { line: *line, message: "label column cannot abstain".into() });
        }
        labels.push((*line, y as usize));
    }
    let observed = codes
        .iter()
        .map(|&(_, c)| c as usize)
        .chain(labels.iter().map(|&(_, y)| y))
        .max()
        .unwrap_or(0);
    let k = k.unwrap_or(observed.max(2));
    if let Some(&(line, c)) = codes.iter().find(|&&(_, c)| c as usize > k) {
        return Err(Error::Parse { line, message: format!("vote {c} exceeds k={k}") });
    }
    if let Some(&(line, y)) = labels.iter().find(|&&(_, y)| y > k) {
        return Err(Error::Parse { line, message: format!("label {y} exceeds k={k}") });
    }
    let votes = codes.into_iter().map(|(_, c)| Vote::from_code(c)).collect();
    let preds = RulePredictionMatrix::new(rows.len(), p, k, votes)?;
    Ok((preds, labels.into_iter().map(|(_, y)| y - 1).collect()))
}

pub fn load_labeled_pool(
    path: impl AsRef<Path>,
    k: Option<usize>,
) -> Result<(RulePredictionMatrix, Vec<usize>)> {
    read_labeled_pool(open(path)?, k)
}

pub fn write_labeled_pool<W: Write>(
    mut out: W,
    preds: &RulePredictionMatrix,
    labels: &[usize],
) -> Result<()> {
    if labels.len() != preds.n() {
        return Err(Error::dim(format!("{} labels for {} points", labels.len(), preds.n())));
    }
    for (row, y) in preds.rows().zip(labels) {
        let mut line: Vec<String> = row.iter().map(|v| v.code().to_string()).collect();
        line.push((y + 1).to_string());
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

/// One-based hard labels, one per line.
pub fn write_hard_labels<W: Write>(mut out: W, labels: &[usize]) -> Result<()> {
    for y in labels {
        writeln!(out, "{}", y + 1)?;
    }
    Ok(())
}

/// `n x k` probability rows with 17 significant digits, enough for an exact
/// round trip.
pub fn write_labeling<W: Write>(mut out: W, g: &SoftLabeling) -> Result<()> {
    for row in g.rows() {
        let line: Vec<String> = row.iter().map(|q| format!("{q:.16e}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn save_labeling(path: impl AsRef<Path>, g: &SoftLabeling) -> Result<()> {
    let mut out = BufWriter::new(create(path)?);
    write_labeling(&mut out, g)?;
    out.flush()?;
    Ok(())
}

/// Reads a probability file written by [`write_labeling`]. Unlike
/// [`read_labels`], a single column is never taken as hard labels.
pub fn read_labeling<R: Read>(reader: R) -> Result<SoftLabeling> {
    let rows = read_rows(reader)?;
    let k = check_width(&rows)?;
    if k < 2 {
        return Err(Error::Parse { line: rows[0].0, message: "need at least two columns".into() });
    }
    soft_rows(&rows, k)
}

pub fn load_labeling(path: impl AsRef<Path>) -> Result<SoftLabeling> {
    read_labeling(open(path)?)
}

/// Any serializable value as TOML.
pub fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::Serialization(e.to_string()))
}

fn from_toml<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Serialization(e.to_string()))
}

pub fn bounds_to_string(spec: &PolytopeSpec) -> Result<String> {
    to_toml(spec)
}

pub fn bounds_from_str(text: &str) -> Result<PolytopeSpec> {
    let raw: PolytopeSpec = from_toml(text)?;
    PolytopeSpec::new(raw.b, raw.eps)
}

pub fn save_bounds(path: impl AsRef<Path>, spec: &PolytopeSpec) -> Result<()> {
    write_text(path, &bounds_to_string(spec)?)?;
    Ok(())
}

pub fn load_bounds(path: impl AsRef<Path>) -> Result<PolytopeSpec> {
    bounds_from_str(&read_text(path)?)
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    w: Vec<f64>,
    b: Vec<f64>,
}

/// One-coin parameters as TOML: `w` holds the class prior and `b` the rule
/// accuracies, with `nan` for a rule that never votes.
pub fn ds_params_to_string(params: &OcdsParams) -> Result<String> {
    let raw = RawParams { w: params.w.clone(), b: params.b.iter().map(|b| b.unwrap_or(f64::NAN)).collect() };
    to_toml(&raw)
}

pub fn ds_params_from_str(text: &str) -> Result<OcdsParams> {
    let raw: RawParams = from_toml(text)?;
    OcdsParams::new(raw.w, raw.b.into_iter().map(|b| (!b.is_nan()).then_some(b)).collect())
}

pub fn save_ds_params(path: impl AsRef<Path>, params: &OcdsParams) -> Result<()> {
    write_text(path, &ds_params_to_string(params)?)?;
    Ok(())
}

pub fn load_ds_params(path: impl AsRef<Path>) -> Result<OcdsParams> {
    ds_params_from_str(&read_text(path)?)
}

/// A vote matrix together with whatever supervision came with it.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub name: String,
    pub k: usize,
    pub preds: RulePredictionMatrix,
    pub labels: Option<Labels>,
    /// A separately stored labeled pool, voted on by the same rules.
    pub pool: Option<(RulePredictionMatrix, Vec<usize>)>,
}

impl DatasetBundle {
    /// Loads and cross-checks the files. `k` is inferred from the votes when
    /// not given, and the name is the stem of the prediction file.
    pub fn load(
        preds: impl AsRef<Path>,
        k: Option<usize>,
        labels: Option<&Path>,
        pool: Option<&Path>,
    ) -> Result<Self> {
        let path = preds.as_ref();
        let preds = load_predictions(path, k)?;
        let k = preds.k();
        let labels = labels.map(|p| load_labels(p, k)).transpose()?;
        if let Some(l) = &labels {
            if l.n() != preds.n() {
                return Err(Error::dim(format!("{} labels for {} points", l.n(), preds.n())));
            }
        }
        let pool = pool.map(|p| load_labeled_pool(p, Some(k))).transpose()?;
        if let Some((pool_preds, _)) = &pool {
            if pool_preds.p() != preds.p() {
                return Err(Error::dim(format!(
                    "labeled pool has {} rules, predictions have {}",
                    pool_preds.p(),
                    preds.p()
                )));
            }
        }
        let name = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        Ok(Self { name, k, preds, labels, pool })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub value: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConfigEcho {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_source: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

/// Everything a CLI run reports, in a TOML-serializable shape.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunReport {
    pub method: String,
    #[serde(default)]
    pub config: ConfigEcho,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverDiagnostics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss: Option<LossReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bf_decomposition: Option<BfDecomposition>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ds_decomposition: Option<DsDecomposition>,
    /// `d(eta, g_ds) - d(eta, g_ds*)` from the pattern closed form.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ds_closed_form_gap: Option<f64>,
}

impl RunReport {
    pub fn new(method: impl Into<String>) -> Self {
        Self { method: method.into(), ..Self::default() }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        to_toml(self)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        from_toml(text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_text(path, &self.to_toml_string()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&read_text(path)?)
    }
}
