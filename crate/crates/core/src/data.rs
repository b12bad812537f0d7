//! Long-format experimental data.
//!
//! A [`Dataset`] holds one row per observation: one level per factor, an
//! optional subject id, and a finite real response. Factor levels keep the
//! order in which they first appear.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Level indices, one per factor, identifying a cell of the full factorial.
pub type Condition = Vec<usize>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorSpec {
    pub name: String,
    pub levels: Vec<String>,
}

impl FactorSpec {
    pub fn new(name: impl Into<String>, levels: Vec<String>) -> Result<Self> {
        let name = name.into();
        if levels.is_empty() {
            return Err(Error::Schema(format!("factor {name} has no levels")));
        }
        let mut seen = HashSet::new();
        for level in &levels {
            if !seen.insert(level.as_str()) {
                return Err(Error::Schema(format!(
                    "factor {name} has duplicate level {level}"
                )));
            }
        }
        Ok(Self { name, levels })
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DesignKind {
    Between,
    Within,
}

impl DesignKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DesignKind::Between => "between",
            DesignKind::Within => "within",
        }
    }
}

impl fmt::Display for DesignKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DesignKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "between" => Ok(DesignKind::Between),
            "within" => Ok(DesignKind::Within),
            other => Err(Error::InvalidArgument(format!(
                "design kind must be between or within, got {other}"
            ))),
        }
    }
}

/// Multiple-comparison adjustment applied within one contrast family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AdjustMethod {
    Holm,
    Bonferroni,
    None,
}

impl AdjustMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            AdjustMethod::Holm => "holm",
            AdjustMethod::Bonferroni => "bonferroni",
            AdjustMethod::None => "none",
        }
    }
}

impl fmt::Display for AdjustMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AdjustMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "holm" => Ok(AdjustMethod::Holm),
            "bonferroni" => Ok(AdjustMethod::Bonferroni),
            "none" => Ok(AdjustMethod::None),
            other => Err(Error::InvalidArgument(format!(
                "adjust method must be holm, bonferroni or none, got {other}"
            ))),
        }
    }
}

/// Which factors to concatenate for a family of pairwise contrasts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContrastSpec {
    pub target_factors: Vec<String>,
    pub adjust: AdjustMethod,
}

impl ContrastSpec {
    pub fn new<S: Into<String>>(
        target_factors: impl IntoIterator<Item = S>,
        adjust: AdjustMethod,
    ) -> Self {
        Self {
            target_factors: target_factors.into_iter().map(Into::into).collect(),
            adjust,
        }
    }
}

/// Column roles for [`load_csv`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub response: String,
    pub factors: Vec<String>,
    pub subject: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subjects {
    pub name: String,
    pub labels: Vec<String>,
    pub codes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    factors: Vec<FactorSpec>,
    /// Level codes, factor-major: `codes[f][row]`.
    codes: Vec<Vec<usize>>,
    subjects: Option<Subjects>,
    response_name: String,
    response: Vec<f64>,
}

impl Dataset {
    pub fn new(
        factors: Vec<FactorSpec>,
        codes: Vec<Vec<usize>>,
        subjects: Option<Subjects>,
        response_name: impl Into<String>,
        response: Vec<f64>,
    ) -> Result<Self> {
        let n = response.len();
        if factors.is_empty() {
            return Err(Error::Schema("at least one factor is required".into()));
        }
        if codes.len() != factors.len() {
            return Err(Error::Schema("one code column per factor is required".into()));
        }
        let mut names = HashSet::new();
        for (f, col) in factors.iter().zip(&codes) {
            if !names.insert(f.name.as_str()) {
                return Err(Error::Schema(format!("duplicate factor name {}", f.name)));
            }
            if col.len() != n {
                return Err(Error::Schema(format!("factor {} has wrong length", f.name)));
            }
            if let Some(&bad) = col.iter().find(|&&c| c >= f.n_levels()) {
                return Err(Error::Schema(format!(
                    "factor {} has out-of-range level code {bad}",
                    f.name
                )));
            }
        }
        if let Some(s) = &subjects {
            if s.codes.len() != n {
                return Err(Error::Schema("subject column has wrong length".into()));
            }
            if names.contains(s.name.as_str()) {
                return Err(Error::Schema(format!(
                    "subject column {} is also a factor",
                    s.name
                )));
            }
        }
        if let Some(row) = response.iter().position(|y| !y.is_finite()) {
            return Err(Error::NonFinite { row: row + 1 });
        }
        let ds = Self {
            factors,
            codes,
            subjects,
            response_name: response_name.into(),
            response,
        };
        ds.check_duplicates()?;
        Ok(ds)
    }

    /// Builds a dataset from string-labelled rows, inferring factor levels
    /// (and subject ids) in first-appearance order.
    pub fn from_labelled_rows<'a, I>(
        factor_names: &[&str],
        subject_name: Option<&str>,
        response_name: &str,
        rows: I,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<&'a str>, Option<&'a str>, f64)>,
    {
        let mut interners: Vec<Interner> = factor_names.iter().map(|_| Interner::default()).collect();
        let mut codes: Vec<Vec<usize>> = vec![Vec::new(); factor_names.len()];
        let mut subj = Interner::default();
        let mut subj_codes = Vec::new();
        let mut response = Vec::new();
        for (i, (levels, subject, y)) in rows.into_iter().enumerate() {
            if levels.len() != factor_names.len() {
                return Err(Error::Schema(format!(
                    "row {} has {} factor levels, expected {}",
                    i + 1,
                    levels.len(),
                    factor_names.len()
                )));
            }
            for (f, level) in levels.iter().enumerate() {
                codes[f].push(interners[f].intern(level));
            }
            match (subject_name, subject) {
                (Some(_), Some(s)) => subj_codes.push(subj.intern(s)),
                (Some(_), None) => {
                    return Err(Error::Schema(format!("row {} lacks a subject id", i + 1)))
                }
                _ => {}
            }
            response.push(y);
        }
        let factors = factor_names
            .iter()
            .zip(interners)
            .map(|(name, int)| FactorSpec::new(*name, int.labels))
            .collect::<Result<Vec<_>>>()?;
        let subjects = subject_name.map(|name| Subjects {
            name: name.to_string(),
            labels: subj.labels,
            codes: subj_codes,
        });
        Self::new(factors, codes, subjects, response_name, response)
    }

    fn check_duplicates(&self) -> Result<()> {
        let Some(subjects) = &self.subjects else {
            return Ok(());
        };
        let mut seen = HashSet::with_capacity(self.n_rows());
        for row in 0..self.n_rows() {
            let key = (subjects.codes[row], self.condition(row));
            if !seen.insert(key) {
                return Err(Error::DuplicateObservation {
                    subject: subjects.labels[subjects.codes[row]].clone(),
                    condition: self.condition_label(&self.condition(row)),
                });
            }
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.response.len()
    }

    pub fn factors(&self) -> &[FactorSpec] {
        &self.factors
    }

    pub fn n_levels(&self) -> Vec<usize> {
        self.factors.iter().map(FactorSpec::n_levels).collect()
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn response_name(&self) -> &str {
        &self.response_name
    }

    pub fn subjects(&self) -> Option<&Subjects> {
        self.subjects.as_ref()
    }

    pub fn n_subjects(&self) -> usize {
        self.subjects.as_ref().map_or(0, |s| s.labels.len())
    }

    pub fn codes(&self, factor: usize) -> &[usize] {
        &self.codes[factor]
    }

    pub fn factor_index(&self, name: &str) -> Result<usize> {
        self.factors
            .iter()
            .position(|f| f.name == name)
            .ok_or_else(|| Error::UnknownFactor(name.to_string()))
    }

    pub fn factor_indices<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<usize>> {
        if names.is_empty() {
            return Err(Error::InvalidArgument("target factor set is empty".into()));
        }
        let mut out = Vec::with_capacity(names.len());
        for name in names {
            let idx = self.factor_index(name.as_ref())?;
            if out.contains(&idx) {
                return Err(Error::InvalidArgument(format!(
                    "factor {} listed twice",
                    name.as_ref()
                )));
            }
            out.push(idx);
        }
        Ok(out)
    }

    pub fn condition(&self, row: usize) -> Condition {
        self.codes.iter().map(|col| col[row]).collect()
    }

    pub fn condition_label(&self, cond: &[usize]) -> String {
        self.factors
            .iter()
            .zip(cond)
            .map(|(f, &c)| format!("{}={}", f.name, f.levels[c]))
            .collect::<Vec<_>>()
            .join(", ")
    }

    /// Same factors and subjects, new response column.
    pub fn with_response(&self, response: Vec<f64>) -> Result<Self> {
        if response.len() != self.n_rows() {
            return Err(Error::InvalidArgument(format!(
                "response has {} values, dataset has {} rows",
                response.len(),
                self.n_rows()
            )));
        }
        if let Some(row) = response.iter().position(|y| !y.is_finite()) {
            return Err(Error::NonFinite { row: row + 1 });
        }
        Ok(Self {
            response,
            ..self.clone()
        })
    }

    /// Row indices grouped by condition. Conditions without rows are absent.
    pub fn condition_index(&self) -> BTreeMap<Condition, Vec<usize>> {
        let mut map: BTreeMap<Condition, Vec<usize>> = BTreeMap::new();
        for row in 0..self.n_rows() {
            map.entry(self.condition(row)).or_default().push(row);
        }
        map
    }

    /// Fails with [`Error::EmptyCell`] unless every combination of one level
    /// per factor has at least one row.
    pub fn require_complete(&self) -> Result<()> {
        let present: HashSet<Condition> = (0..self.n_rows()).map(|r| self.condition(r)).collect();
        for cond in all_conditions(&self.n_levels()) {
            if !present.contains(&cond) {
                return Err(Error::EmptyCell(self.condition_label(&cond)));
            }
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.csv_header())?;
        for row in 0..self.n_rows() {
            w.write_record(self.csv_fields(row))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub(crate) fn csv_header(&self) -> Vec<String> {
        let mut header = Vec::new();
        if let Some(s) = &self.subjects {
            header.push(s.name.clone());
        }
        header.extend(self.factors.iter().map(|f| f.name.clone()));
        header.push(self.response_name.clone());
        header
    }

    pub(crate) fn csv_fields(&self, row: usize) -> Vec<String> {
        let mut fields = Vec::new();
        if let Some(s) = &self.subjects {
            fields.push(s.labels[s.codes[row]].clone());
        }
        for (f, col) in self.factors.iter().zip(&self.codes) {
            fields.push(f.levels[col[row]].clone());
        }
        fields.push(self.response[row].to_string());
        fields
    }
}

/// Every combination of one level per factor, first factor varying slowest.
pub fn all_conditions(n_levels: &[usize]) -> Vec<Condition> {
    let mut out: Vec<Condition> = vec![Vec::new()];
    for &k in n_levels {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..k).map(move |l| {
                    let mut c = prefix.clone();
                    c.push(l);
                    c
                })
            })
            .collect();
    }
    out
}

#[derive(Default)]
struct Interner {
    labels: Vec<String>,
    lookup: HashMap<String, usize>,
}

impl Interner {
    fn intern(&mut self, label: &str) -> usize {
        if let Some(&i) = self.lookup.get(label) {
            return i;
        }
        let i = self.labels.len();
        self.labels.push(label.to_string());
        self.lookup.insert(label.to_string(), i);
        i
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_csv(file, schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &Schema) -> Result<Dataset> {
    if schema.factors.is_empty() {
        return Err(Error::Schema("at least one factor column is required".into()));
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema(format!("missing column {name}")))
    };
    let response_col = column(&schema.response)?;
    let factor_cols = schema
        .factors
        .iter()
        .map(|f| column(f))
        .collect::<Result<Vec<_>>>()?;
    let subject_col = schema.subject.as_deref().map(column).transpose()?;

    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let raw = rec.get(response_col).unwrap_or("").trim();
        let y: f64 = raw.parse().map_err(|_| Error::Parse {
            row,
            message: format!("response {raw:?} is not a number"),
        })?;
        if !y.is_finite() {
            return Err(Error::NonFinite { row });
        }
        let field = |c: usize| -> Result<String> {
            rec.get(c)
                .map(|s| s.trim().to_string())
                .ok_or_else(|| Error::Parse {
                    row,
                    message: "too few fields".into(),
                })
        };
        let levels = factor_cols.iter().map(|&c| field(c)).collect::<Result<Vec<_>>>()?;
        let subject = subject_col.map(field).transpose()?;
        records.push((levels, subject, y));
    }

    let factor_names: Vec<&str> = schema.factors.iter().map(String::as_str).collect();
    Dataset::from_labelled_rows(
        &factor_names,
        schema.subject.as_deref(),
        &schema.response,
        records.iter().map(|(levels, subject, y)| {
            (
                levels.iter().map(String::as_str).collect(),
                subject.as_deref(),
                *y,
            )
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const WORKED_EXAMPLE: &str = "AB,C,Y\n\
        AB11,C1,7\nAB11,C1,5\nAB11,C2,2\nAB11,C2,2\n\
        AB12,C1,10\nAB12,C1,8\nAB12,C2,5\nAB12,C2,1\n";

    fn worked_schema() -> Schema {
        Schema {
            response: "Y".into(),
            factors: vec!["AB".into(), "C".into()],
            subject: None,
        }
    }

    #[test]
    fn loads_worked_fixture() {
        let ds = read_csv(WORKED_EXAMPLE.as_bytes(), &worked_schema()).unwrap();
        assert_eq!(ds.n_rows(), 8);
        assert_eq!(ds.factors()[0].levels, vec!["AB11", "AB12"]);
        assert_eq!(ds.factors()[1].levels, vec!["C1", "C2"]);
        let idx = ds.condition_index();
        assert_eq!(idx.len(), 4);
        assert!(idx.values().all(|rows| rows.len() == 2));
    }

    #[test]
    fn empty_file_is_schema_error() {
        let err = read_csv("".as_bytes(), &worked_schema()).unwrap_err();
        assert!(matches!(err, Error::Schema(_)), "{err}");
    }

    #[test]
    fn missing_column_is_schema_error() {
        let schema = Schema {
            response: "Z".into(),
            ..worked_schema()
        };
        assert!(matches!(
            read_csv(WORKED_EXAMPLE.as_bytes(), &schema),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn non_numeric_response_cites_row() {
        let csv = "AB,C,Y\nx,c,1\nx,d,2\ny,c,abc\n";
        match read_csv(csv.as_bytes(), &worked_schema()) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_finite_response_rejected() {
        let csv = "AB,C,Y\nx,c,1\nx,d,NaN\n";
        assert!(matches!(
            read_csv(csv.as_bytes(), &worked_schema()),
            Err(Error::NonFinite { row: 2 })
        ));
        let csv = "AB,C,Y\nx,c,inf\n";
        assert!(matches!(
            read_csv(csv.as_bytes(), &worked_schema()),
            Err(Error::NonFinite { row: 1 })
        ));
    }

    #[test]
    fn duplicate_subject_condition_rejected() {
        let csv = "S,A,Y\ns1,a1,1\ns1,a2,2\ns1,a1,3\n";
        let schema = Schema {
            response: "Y".into(),
            factors: vec!["A".into()],
            subject: Some("S".into()),
        };
        assert!(matches!(
            read_csv(csv.as_bytes(), &schema),
            Err(Error::DuplicateObservation { .. })
        ));
    }

    #[test]
    fn single_row_dataset_has_one_condition() {
        let csv = "AB,C,Y\nx,c,1\n";
        let ds = read_csv(csv.as_bytes(), &worked_schema()).unwrap();
        let idx = ds.condition_index();
        assert_eq!(idx.len(), 1);
        assert_eq!(idx.values().next().unwrap(), &vec![0]);
    }

    #[test]
    fn levels_follow_first_appearance() {
        let csv = "AB,C,Y\nz,c2,1\na,c1,2\nz,c1,3\na,c2,4\n";
        let ds = read_csv(csv.as_bytes(), &worked_schema()).unwrap();
        assert_eq!(ds.factors()[0].levels, vec!["z", "a"]);
        assert_eq!(ds.factors()[1].levels, vec!["c2", "c1"]);
    }

    #[test]
    fn incomplete_grid_names_empty_cell() {
        let csv = "AB,C,Y\nx,c,1\nx,d,2\ny,c,3\n";
        let ds = read_csv(csv.as_bytes(), &worked_schema()).unwrap();
        match ds.require_complete() {
            Err(Error::EmptyCell(cell)) => assert_eq!(cell, "AB=y, C=d"),
            other => panic!("expected empty cell, got {other:?}"),
        }
    }

    #[test]
    fn csv_round_trip() {
        let ds = read_csv(WORKED_EXAMPLE.as_bytes(), &worked_schema()).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = read_csv(buf.as_slice(), &worked_schema()).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn all_conditions_enumerates_product() {
        let conds = all_conditions(&[2, 3]);
        assert_eq!(conds.len(), 6);
        assert_eq!(conds[0], vec![0, 0]);
        assert_eq!(conds[1], vec![0, 1]);
        assert_eq!(conds[5], vec![1, 2]);
    }
}
