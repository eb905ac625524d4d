//! Loading, validating and transforming daily market and sentiment series.
//!
//! Everything downstream works on a [`SeriesPanel`]: a strictly increasing
//! list of calendar dates, a list of unique variable names, and a dense
//! row-major grid of cells where a missing observation is `None`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DATE_FORMAT: &str = "%Y-%m-%d";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: cannot read file: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: empty file")]
    EmptyFile { path: PathBuf },
    #[error("{path}: line {line}: unparseable date {value:?}")]
    BadDate {
        path: PathBuf,
        line: usize,
        value: String,
    },
    #[error("{path}: line {line}: column {column:?}: unparseable number {value:?}")]
    BadNumber {
        path: PathBuf,
        line: usize,
        column: String,
        value: String,
    },
    #[error("{path}: line {line}: malformed row: {detail}")]
    BadRow {
        path: PathBuf,
        line: usize,
        detail: String,
    },
    #[error("{path}: missing date column {column:?}")]
    MissingDateColumn { path: PathBuf, column: String },
    #[error("duplicate observation for ({date}, {variable})")]
    Duplicate { date: NaiveDate, variable: String },
    #[error("unknown variable {0:?}")]
    UnknownVariable(String),
    #[error("variable {0:?} already exists")]
    NameCollision(String),
    #[error("nonpositive price {value} for {variable} on {date}")]
    NonPositive {
        variable: String,
        date: NaiveDate,
        value: f64,
    },
    #[error("transform {kind:?} does not apply here")]
    WrongTransform { kind: TransformKind },
    #[error("empty intersection: every row has a missing cell")]
    EmptyIntersection,
    #[error("panel is empty")]
    EmptyPanel,
    #[error("invalid panel: {0}")]
    Invalid(String),
    #[error("variable {variable:?} has missing values")]
    Incomplete { variable: String },
}

pub type Result<T> = std::result::Result<T, IngestError>;

/// Date-aligned multivariate daily series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPanel {
    dates: Vec<NaiveDate>,
    variables: Vec<String>,
    /// Row-major, one row per date.
    values: Vec<Vec<Option<f64>>>,
}

impl SeriesPanel {
    pub fn new(
        dates: Vec<NaiveDate>,
        variables: Vec<String>,
        values: Vec<Vec<Option<f64>>>,
    ) -> Result<Self> {
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(IngestError::Invalid(
                "dates must be strictly increasing".into(),
            ));
        }
        let mut seen = BTreeSet::new();
        for v in &variables {
            if !seen.insert(v.as_str()) {
                return Err(IngestError::Invalid(format!("duplicate variable {v:?}")));
            }
        }
        if values.len() != dates.len() {
            return Err(IngestError::Invalid(format!(
                "{} rows for {} dates",
                values.len(),
                dates.len()
            )));
        }
        if let Some(row) = values.iter().find(|r| r.len() != variables.len()) {
            return Err(IngestError::Invalid(format!(
                "row of width {} for {} variables",
                row.len(),
                variables.len()
            )));
        }
        Ok(Self {
            dates,
            variables,
            values,
        })
    }

    /// Builds a complete panel from named columns of equal length.
    pub fn from_columns(dates: Vec<NaiveDate>, columns: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let mut values = vec![Vec::with_capacity(columns.len()); dates.len()];
        for (_, col) in &columns {
            if col.len() != dates.len() {
                return Err(IngestError::Invalid(format!(
                    "column of length {} for {} dates",
                    col.len(),
                    dates.len()
                )));
            }
            for (row, &v) in values.iter_mut().zip(col) {
                row.push(if v.is_finite() { Some(v) } else { None });
            }
        }
        let names = columns.into_iter().map(|(n, _)| n).collect();
        Self::new(dates, names, values)
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn rows(&self) -> &[Vec<Option<f64>>] {
        &self.values
    }

    pub fn n_rows(&self) -> usize {
        self.dates.len()
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == name)
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.values[row][col]
    }

    pub fn column(&self, name: &str) -> Result<Vec<Option<f64>>> {
        let j = self
            .index_of(name)
            .ok_or_else(|| IngestError::UnknownVariable(name.to_string()))?;
        Ok(self.values.iter().map(|r| r[j]).collect())
    }

    /// Column as plain numbers; fails if any cell is missing.
    pub fn complete_column(&self, name: &str) -> Result<Vec<f64>> {
        self.column(name)?
            .into_iter()
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| IngestError::Incomplete {
                variable: name.to_string(),
            })
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().flatten().filter(|c| c.is_none()).count()
    }

    /// Complete panel as a row-major `T × N` matrix.
    pub fn to_matrix(&self) -> Result<Vec<Vec<f64>>> {
        self.values
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(j, c)| {
                        c.ok_or_else(|| IngestError::Incomplete {
                            variable: self.variables[j].clone(),
                        })
                    })
                    .collect()
            })
            .collect()
    }

    /// New panel keeping only the named variables, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Self> {
        let idx = names
            .iter()
            .map(|n| {
                self.index_of(n)
                    .ok_or_else(|| IngestError::UnknownVariable(n.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        let values = self
            .values
            .iter()
            .map(|r| idx.iter().map(|&j| r[j]).collect())
            .collect();
        Self::new(
            self.dates.clone(),
            names.iter().map(|s| s.to_string()).collect(),
            values,
        )
    }

    /// Contiguous row range `[start, end)`.
    pub fn slice_rows(&self, start: usize, end: usize) -> Self {
        Self {
            dates: self.dates[start..end].to_vec(),
            variables: self.variables.clone(),
            values: self.values[start..end].to_vec(),
        }
    }

    /// Appends a column aligned to the panel's dates.
    pub fn with_column(&self, name: &str, column: Vec<Option<f64>>) -> Result<Self> {
        if self.index_of(name).is_some() {
            return Err(IngestError::NameCollision(name.to_string()));
        }
        if column.len() != self.n_rows() {
            return Err(IngestError::Invalid(format!(
                "column {name:?} has {} cells for {} rows",
                column.len(),
                self.n_rows()
            )));
        }
        let mut out = self.clone();
        out.variables.push(name.to_string());
        for (row, cell) in out.values.iter_mut().zip(column) {
            row.push(cell);
        }
        Ok(out)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["date".to_string()];
        header.extend(self.variables.iter().cloned());
        w.write_record(&header)?;
        for (date, row) in self.dates.iter().zip(&self.values) {
            let mut rec = vec![date.format(DATE_FORMAT).to_string()];
            // `{}` on f64 prints the shortest string that round-trips exactly.
            rec.extend(row.iter().map(|c| c.map(|v| v.to_string()).unwrap_or_default()));
            w.write_record(&rec)?;
        }
        w.flush()
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

/// How source columns map onto panel variables.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMapping {
    pub date_column: String,
    /// Source column name → panel variable name. Unlisted columns keep their names.
    pub rename: BTreeMap<String, String>,
    /// When non-empty, only these source columns are loaded.
    pub keep: Vec<String>,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            date_column: "date".into(),
            rename: BTreeMap::new(),
            keep: Vec::new(),
        }
    }
}

pub fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), DATE_FORMAT).ok()
}

/// Loads and unions CSV files into one panel.
///
/// Dates are the union over files; a cell that no file provides is missing.
/// Lines starting with `#` are treated as comments.
pub fn load_panel<P: AsRef<Path>>(paths: &[P], schema: &ColumnMapping) -> Result<SeriesPanel> {
    let mut cells: BTreeMap<NaiveDate, HashMap<String, f64>> = BTreeMap::new();
    let mut variables: Vec<String> = Vec::new();

    for path in paths {
        let path = path.as_ref();
        let mut text = String::new();
        File::open(path)
            .and_then(|mut f| f.read_to_string(&mut text))
            .map_err(|source| IngestError::Io {
                path: path.to_path_buf(),
                source,
            })?;
        load_one(path, &text, schema, &mut cells, &mut variables)?;
    }
    if cells.is_empty() {
        return Err(IngestError::EmptyPanel);
    }

    let dates: Vec<NaiveDate> = cells.keys().copied().collect();
    let values = cells
        .values()
        .map(|row| variables.iter().map(|v| row.get(v).copied()).collect())
        .collect();
    SeriesPanel::new(dates, variables, values)
}

/// Parses one CSV document; `path` is only used in error messages.
pub fn load_panel_from_str(path: &Path, text: &str, schema: &ColumnMapping) -> Result<SeriesPanel> {
    let mut cells = BTreeMap::new();
    let mut variables = Vec::new();
    load_one(path, text, schema, &mut cells, &mut variables)?;
    let dates: Vec<NaiveDate> = cells.keys().copied().collect();
    let values = cells
        .values()
        .map(|row: &HashMap<String, f64>| variables.iter().map(|v| row.get(v).copied()).collect())
        .collect();
    SeriesPanel::new(dates, variables, values)
}

fn load_one(
    path: &Path,
    text: &str,
    schema: &ColumnMapping,
    cells: &mut BTreeMap<NaiveDate, HashMap<String, f64>>,
    variables: &mut Vec<String>,
) -> Result<()> {
    // Physical line numbers, 1-based, skipping comments.
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim_start().starts_with('#') && !l.trim().is_empty())
        .collect();
    if lines.len() < 2 {
        return Err(IngestError::EmptyFile {
            path: path.to_path_buf(),
        });
    }

    let parse_record = |line_no: usize, line: &str| -> Result<Vec<String>> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(line.as_bytes());
        match rdr.records().next() {
            Some(Ok(r)) => Ok(r.iter().map(|s| s.trim().to_string()).collect()),
            Some(Err(e)) => Err(IngestError::BadRow {
                path: path.to_path_buf(),
                line: line_no,
                detail: e.to_string(),
            }),
            None => Ok(Vec::new()),
        }
    };

    let (_, header_line) = lines[0];
    let header = parse_record(1, header_line)?;
    let date_idx = header
        .iter()
        .position(|h| h == &schema.date_column)
        .ok_or_else(|| IngestError::MissingDateColumn {
            path: path.to_path_buf(),
            column: schema.date_column.clone(),
        })?;

    let mut columns: Vec<(usize, String, String)> = Vec::new();
    for (i, h) in header.iter().enumerate() {
        if i == date_idx || (!schema.keep.is_empty() && !schema.keep.contains(h)) {
            continue;
        }
        let name = schema.rename.get(h).cloned().unwrap_or_else(|| h.clone());
        if columns.iter().any(|(_, _, n)| n == &name) {
            return Err(IngestError::BadRow {
                path: path.to_path_buf(),
                line: 1,
                detail: format!("variable {name:?} appears twice in header"),
            });
        }
        columns.push((i, h.clone(), name));
    }
    for (_, _, name) in &columns {
        if !variables.contains(name) {
            variables.push(name.clone());
        }
    }

    for &(line_no, line) in &lines[1..] {
        let rec = parse_record(line_no, line)?;
        if rec.len() != header.len() {
            return Err(IngestError::BadRow {
                path: path.to_path_buf(),
                line: line_no,
                detail: format!("{} fields, header has {}", rec.len(), header.len()),
            });
        }
        let date = parse_date(&rec[date_idx]).ok_or_else(|| IngestError::BadDate {
            path: path.to_path_buf(),
            line: line_no,
            value: rec[date_idx].clone(),
        })?;
        let row = cells.entry(date).or_default();
        for (i, src, name) in &columns {
            let raw = rec[*i].as_str();
            if raw.is_empty() || raw.eq_ignore_ascii_case("na") || raw.eq_ignore_ascii_case("nan")
            {
                continue;
            }
            let v: f64 = raw.parse().map_err(|_| IngestError::BadNumber {
                path: path.to_path_buf(),
                line: line_no,
                column: src.clone(),
                value: raw.to_string(),
            })?;
            if row.insert(name.clone(), v).is_some() {
                return Err(IngestError::Duplicate {
                    date,
                    variable: name.clone(),
                });
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformKind {
    LogReturn,
    SimpleReturn,
    PctVolumeChange,
    FirstDifference,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub kind: TransformKind,
    pub source: String,
    pub target: String,
}

impl TransformSpec {
    pub fn new(kind: TransformKind, source: &str, target: &str) -> Self {
        Self {
            kind,
            source: source.into(),
            target: target.into(),
        }
    }
}

/// Output of a transform: the extended panel plus any warnings raised.
#[derive(Debug, Clone)]
pub struct Transformed {
    pub panel: SeriesPanel,
    pub warnings: Vec<String>,
}

/// Price returns: `ln(P_t/P_{t-1})` or `(P_t − P_{t-1})/P_{t-1}`.
///
/// The first row is always missing, as is any row whose current or
/// previous price is missing.
pub fn compute_return(panel: &SeriesPanel, spec: &TransformSpec) -> Result<SeriesPanel> {
    match spec.kind {
        TransformKind::LogReturn | TransformKind::SimpleReturn => {}
        kind => return Err(IngestError::WrongTransform { kind }),
    }
    let prices = panel.column(&spec.source)?;
    if panel.index_of(&spec.target).is_some() {
        return Err(IngestError::NameCollision(spec.target.clone()));
    }
    if spec.kind == TransformKind::LogReturn {
        if let Some((i, v)) = prices
            .iter()
            .enumerate()
            .find_map(|(i, c)| c.filter(|v| *v <= 0.0).map(|v| (i, v)))
        {
            return Err(IngestError::NonPositive {
                variable: spec.source.clone(),
                date: panel.dates[i],
                value: v,
            });
        }
    }
    let mut out = vec![None; prices.len()];
    for t in 1..prices.len() {
        if let (Some(prev), Some(cur)) = (prices[t - 1], prices[t]) {
            out[t] = Some(match spec.kind {
                TransformKind::LogReturn => cur.ln() - prev.ln(),
                _ => (cur - prev) / prev,
            });
        }
    }
    panel.with_column(&spec.target, out)
}

/// Relative volume change `(V_t − V_{t−1})/V_{t−1}`; a zero previous volume
/// leaves the cell missing and records a warning. `FirstDifference` is also
/// accepted here and yields `V_t − V_{t−1}`.
pub fn volume_change(panel: &SeriesPanel, spec: &TransformSpec) -> Result<Transformed> {
    match spec.kind {
        TransformKind::PctVolumeChange
        | TransformKind::SimpleReturn
        | TransformKind::FirstDifference => {}
        kind => return Err(IngestError::WrongTransform { kind }),
    }
    let vol = panel.column(&spec.source)?;
    if panel.index_of(&spec.target).is_some() {
        return Err(IngestError::NameCollision(spec.target.clone()));
    }
    let mut warnings = Vec::new();
    let mut out = vec![None; vol.len()];
    for t in 1..vol.len() {
        let (Some(prev), Some(cur)) = (vol[t - 1], vol[t]) else {
            continue;
        };
        if spec.kind == TransformKind::FirstDifference {
            out[t] = Some(cur - prev);
        } else if prev == 0.0 {
            let msg = format!(
                "{}: zero volume on {}, change on {} left missing",
                spec.source,
                panel.dates[t - 1],
                panel.dates[t]
            );
            warn!("{msg}");
            warnings.push(msg);
        } else {
            out[t] = Some((cur - prev) / prev);
        }
    }
    Ok(Transformed {
        panel: panel.with_column(&spec.target, out)?,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "policy")]
pub enum CompletionPolicy {
    DropIncompleteRows,
    ForwardFill { max_gap: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FillReport {
    /// Forward-filled cells per variable.
    pub filled: BTreeMap<String, usize>,
    pub dropped_dates: Vec<NaiveDate>,
}

/// Removes or fills missing cells so that the result has none.
pub fn align_and_complete(
    panel: &SeriesPanel,
    policy: CompletionPolicy,
) -> Result<(SeriesPanel, FillReport)> {
    if panel.is_empty() {
        return Err(IngestError::EmptyPanel);
    }
    let mut report = FillReport::default();
    let mut values = panel.values.clone();

    if let CompletionPolicy::ForwardFill { max_gap } = policy {
        for (j, name) in panel.variables.iter().enumerate() {
            let mut last: Option<f64> = None;
            let mut run = 0usize;
            let mut filled = 0usize;
            for row in values.iter_mut() {
                match row[j] {
                    Some(v) => {
                        last = Some(v);
                        run = 0;
                    }
                    None => {
                        run += 1;
                        if let (Some(v), true) = (last, run <= max_gap) {
                            row[j] = Some(v);
                            filled += 1;
                        }
                    }
                }
            }
            if filled > 0 {
                report.filled.insert(name.clone(), filled);
            }
        }
    }

    let mut dates = Vec::with_capacity(panel.n_rows());
    let mut kept = Vec::with_capacity(panel.n_rows());
    for (date, row) in panel.dates.iter().zip(values) {
        if row.iter().all(Option::is_some) {
            dates.push(*date);
            kept.push(row);
        } else {
            report.dropped_dates.push(*date);
        }
    }
    if dates.is_empty() {
        return Err(IngestError::EmptyIntersection);
    }
    Ok((
        SeriesPanel::new(dates, panel.variables.clone(), kept)?,
        report,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        parse_date(s).unwrap()
    }

    fn single(dates: &[&str], name: &str, vals: &[Option<f64>]) -> SeriesPanel {
        SeriesPanel::new(
            dates.iter().map(|s| d(s)).collect(),
            vec![name.into()],
            vals.iter().map(|v| vec![*v]).collect(),
        )
        .unwrap()
    }

    fn parse(text: &str) -> Result<SeriesPanel> {
        load_panel_from_str(Path::new("mem.csv"), text, &ColumnMapping::default())
    }

    #[test]
    fn invalid_date_names_line() {
        let err = parse("date,x\n2021-13-40,1.0\n").unwrap_err();
        match err {
            IngestError::BadDate { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn empty_file_rejected() {
        assert!(matches!(parse(""), Err(IngestError::EmptyFile { .. })));
        assert!(matches!(parse("date,x\n"), Err(IngestError::EmptyFile { .. })));
    }

    #[test]
    fn duplicate_date_rejected() {
        let err = parse("date,x\n2021-01-01,1\n2021-01-01,2\n").unwrap_err();
        assert!(matches!(err, IngestError::Duplicate { .. }));
    }

    #[test]
    fn rename_and_keep() {
        let schema = ColumnMapping {
            rename: [("Close".to_string(), "BTC".to_string())].into(),
            keep: vec!["Close".into()],
            ..Default::default()
        };
        let p = load_panel_from_str(
            Path::new("m"),
            "date,Close,Open\n2021-01-01,1,2\n",
            &schema,
        )
        .unwrap();
        assert_eq!(p.variables(), ["BTC"]);
    }

    #[test]
    fn log_return_examples() {
        let p = single(
            &["2021-01-01", "2021-01-02", "2021-01-03"],
            "P",
            &[Some(100.0), Some(100.0), Some(100.0)],
        );
        let spec = TransformSpec::new(TransformKind::LogReturn, "P", "r");
        let r = compute_return(&p, &spec).unwrap().column("r").unwrap();
        assert_eq!(r, vec![None, Some(0.0), Some(0.0)]);

        let e = std::f64::consts::E;
        let p = single(
            &["2021-01-01", "2021-01-02", "2021-01-03"],
            "P",
            &[Some(1.0), Some(e), Some(e * e)],
        );
        let r = compute_return(&p, &spec).unwrap().column("r").unwrap();
        assert!(r[0].is_none());
        assert!((r[1].unwrap() - 1.0).abs() < 1e-15);
        assert!((r[2].unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn simple_return_example() {
        let p = single(&["2021-01-01", "2021-01-02"], "P", &[Some(100.0), Some(110.0)]);
        let spec = TransformSpec::new(TransformKind::SimpleReturn, "P", "r");
        let r = compute_return(&p, &spec).unwrap().column("r").unwrap();
        assert!(r[0].is_none());
        assert!((r[1].unwrap() - 0.10).abs() < 1e-15);
    }

    #[test]
    fn log_return_rejects_nonpositive() {
        let p = single(&["2021-01-01", "2021-01-02"], "P", &[Some(1.0), Some(0.0)]);
        let spec = TransformSpec::new(TransformKind::LogReturn, "P", "r");
        match compute_return(&p, &spec).unwrap_err() {
            IngestError::NonPositive { date, .. } => assert_eq!(date, d("2021-01-02")),
            e => panic!("unexpected {e}"),
        }
        let spec = TransformSpec::new(TransformKind::LogReturn, "Q", "r");
        assert!(matches!(
            compute_return(&p, &spec),
            Err(IngestError::UnknownVariable(_))
        ));
    }

    #[test]
    fn target_collision_rejected() {
        let p = single(&["2021-01-01", "2021-01-02"], "P", &[Some(1.0), Some(2.0)]);
        let spec = TransformSpec::new(TransformKind::LogReturn, "P", "P");
        assert!(matches!(
            compute_return(&p, &spec),
            Err(IngestError::NameCollision(_))
        ));
    }

    #[test]
    fn volume_change_examples() {
        let spec = TransformSpec::new(TransformKind::PctVolumeChange, "V", "dv");
        let p = single(&["2021-01-01", "2021-01-02"], "V", &[Some(200.0), Some(300.0)]);
        let out = volume_change(&p, &spec).unwrap();
        assert_eq!(out.panel.column("dv").unwrap(), vec![None, Some(0.5)]);
        assert!(out.warnings.is_empty());

        let p = single(&["2021-01-01", "2021-01-02"], "V", &[Some(0.0), Some(300.0)]);
        let out = volume_change(&p, &spec).unwrap();
        assert_eq!(out.panel.column("dv").unwrap(), vec![None, None]);
        assert_eq!(out.warnings.len(), 1);

        let p = single(
            &["2021-01-01", "2021-01-02", "2021-01-03"],
            "V",
            &[Some(5.0), Some(5.0), Some(5.0)],
        );
        let out = volume_change(&p, &spec).unwrap();
        assert_eq!(out.panel.column("dv").unwrap(), vec![None, Some(0.0), Some(0.0)]);
    }

    #[test]
    fn drop_policy_removes_incomplete_date() {
        let p = SeriesPanel::new(
            vec![d("2021-01-01"), d("2021-01-02"), d("2021-01-03")],
            vec!["a".into(), "b".into()],
            vec![
                vec![Some(1.0), Some(1.0)],
                vec![Some(2.0), None],
                vec![Some(3.0), Some(3.0)],
            ],
        )
        .unwrap();
        let (out, report) = align_and_complete(&p, CompletionPolicy::DropIncompleteRows).unwrap();
        assert_eq!(out.dates(), [d("2021-01-01"), d("2021-01-03")]);
        assert_eq!(report.dropped_dates, vec![d("2021-01-02")]);
        assert_eq!(out.missing_count(), 0);

        let (same, _) = align_and_complete(&out, CompletionPolicy::DropIncompleteRows).unwrap();
        assert_eq!(same, out);
    }

    #[test]
    fn forward_fill_gap_longer_than_max() {
        // Hand trace: a = [1, _, _, _, 5], max_gap = 2 fills rows 2 and 3 with 1,
        // row 4 stays missing and is dropped.
        let p = single(
            &["2021-01-01", "2021-01-02", "2021-01-03", "2021-01-04", "2021-01-05"],
            "a",
            &[Some(1.0), None, None, None, Some(5.0)],
        );
        let (out, report) =
            align_and_complete(&p, CompletionPolicy::ForwardFill { max_gap: 2 }).unwrap();
        assert_eq!(
            out.dates(),
            [d("2021-01-01"), d("2021-01-02"), d("2021-01-03"), d("2021-01-05")]
        );
        assert_eq!(out.complete_column("a").unwrap(), vec![1.0, 1.0, 1.0, 5.0]);
        assert_eq!(report.filled["a"], 2);
        assert_eq!(report.dropped_dates, vec![d("2021-01-04")]);
    }

    #[test]
    fn all_rows_dropped_is_error() {
        let p = single(&["2021-01-01"], "a", &[None]);
        assert!(matches!(
            align_and_complete(&p, CompletionPolicy::DropIncompleteRows),
            Err(IngestError::EmptyIntersection)
        ));
    }

    #[test]
    fn panel_rejects_unsorted_dates() {
        let r = SeriesPanel::new(
            vec![d("2021-01-02"), d("2021-01-01")],
            vec!["a".into()],
            vec![vec![None], vec![None]],
        );
        assert!(r.is_err());
    }
}
