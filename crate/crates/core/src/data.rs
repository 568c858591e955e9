//! Tabular data: CSV loading with semantic-type inference, training
//! statistics, and stratified train/valid/holdout splits.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::SemanticType;

/// One cell of a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Num(f64),
    Cat(String),
    Missing,
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Num(x)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Cat(s.to_string())
    }
}

/// Feature name to value.
pub type Sample = BTreeMap<String, Value>;

#[derive(Clone, Debug, PartialEq)]
pub enum Column {
    Numerical(Vec<Option<f64>>),
    Categorical(Vec<Option<String>>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Numerical(v) => v.len(),
            Column::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stype(&self) -> SemanticType {
        match self {
            Column::Numerical(_) => SemanticType::Numerical,
            Column::Categorical(_) => SemanticType::Categorical,
        }
    }

    pub fn value(&self, i: usize) -> Value {
        match self {
            Column::Numerical(v) => v[i].map_or(Value::Missing, Value::Num),
            Column::Categorical(v) => v[i].clone().map_or(Value::Missing, Value::Cat),
        }
    }

    fn select(&self, rows: &[usize]) -> Column {
        match self {
            Column::Numerical(v) => Column::Numerical(rows.iter().map(|&i| v[i]).collect()),
            Column::Categorical(v) => Column::Categorical(rows.iter().map(|&i| v[i].clone()).collect()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub stype: SemanticType,
}

/// Named, typed columns of equal length. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    specs: Vec<ColumnSpec>,
    columns: Vec<Column>,
    index: HashMap<String, usize>,
    n: usize,
}

impl Dataset {
    pub fn new(columns: Vec<(String, Column)>) -> Result<Self> {
        let n = columns.first().map_or(0, |(_, c)| c.len());
        let mut index = HashMap::new();
        let mut specs = Vec::new();
        let mut data = Vec::new();
        for (i, (name, col)) in columns.into_iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::InvalidInput(format!("duplicate column `{name}`")));
            }
            if col.len() != n {
                return Err(Error::InvalidInput(format!(
                    "column `{name}` has {} rows, expected {n}",
                    col.len()
                )));
            }
            if let Column::Numerical(v) = &col {
                if v.iter().flatten().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidInput(format!("column `{name}` has non-finite values")));
                }
            }
            specs.push(ColumnSpec { name, stype: col.stype() });
            data.push(col);
        }
        Ok(Dataset { specs, columns: data, index, n })
    }

    /// Builds a dataset of numerical columns.
    pub fn from_numeric(columns: Vec<(&str, Vec<f64>)>) -> Result<Self> {
        Dataset::new(
            columns
                .into_iter()
                .map(|(n, v)| (n.to_string(), Column::Numerical(v.into_iter().map(Some).collect())))
                .collect(),
        )
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.specs
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.specs.iter().map(|s| s.name.as_str())
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.index.get(name).map(|&i| &self.columns[i])
    }

    pub fn stype(&self, name: &str) -> Option<SemanticType> {
        self.column(name).map(Column::stype)
    }

    pub fn numeric(&self, name: &str) -> Result<&[Option<f64>]> {
        match self.column(name) {
            Some(Column::Numerical(v)) => Ok(v),
            Some(Column::Categorical(_)) => Err(Error::Type(format!("column `{name}` is categorical"))),
            None => Err(Error::MissingFeature(name.to_string())),
        }
    }

    pub fn value(&self, name: &str, row: usize) -> Option<Value> {
        self.column(name).map(|c| c.value(row))
    }

    pub fn row(&self, i: usize) -> Sample {
        self.specs
            .iter()
            .zip(&self.columns)
            .map(|(s, c)| (s.name.clone(), c.value(i)))
            .collect()
    }

    /// The rows at `rows`, in that order.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            specs: self.specs.clone(),
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
            index: self.index.clone(),
            n: rows.len(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.names()).map_err(csv_err)?;
        for i in 0..self.n {
            let record: Vec<String> = self
                .columns
                .iter()
                .map(|c| match c.value(i) {
                    // Shortest representation that parses back to the same f64.
                    Value::Num(x) => format!("{x:?}"),
                    Value::Cat(s) => s,
                    Value::Missing => String::new(),
                })
                .collect();
            w.write_record(&record).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn manifest(&self) -> DatasetManifest {
        let digest = Sha256::digest(self.to_csv_string().as_bytes());
        DatasetManifest {
            columns: self.specs.clone(),
            rows: self.n,
            digest: hex::encode(digest),
        }
    }
}

/// Summary recorded for a loaded dataset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub columns: Vec<ColumnSpec>,
    pub rows: usize,
    pub digest: String,
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::Parse {
            line,
            message: format!("ragged row: expected {expected_len} fields, found {len}"),
        },
        csv::ErrorKind::Io(_) => Error::Io(std::io::Error::other(e.to_string())),
        _ => Error::Parse { line, message: e.to_string() },
    }
}

pub fn load_csv(path: impl AsRef<Path>, overrides: &BTreeMap<String, SemanticType>) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_csv(file, overrides)
}

pub fn parse_csv(text: &str, overrides: &BTreeMap<String, SemanticType>) -> Result<Dataset> {
    read_csv(text.as_bytes(), overrides)
}

/// Reads comma-separated UTF-8 text with a header row.
///
/// A column whose non-empty cells all parse as finite numbers is numerical,
/// otherwise categorical; `overrides` take precedence. Empty cells are
/// missing values.
pub fn read_csv<R: Read>(input: R, overrides: &BTreeMap<String, SemanticType>) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(Error::Parse { line: 1, message: "missing header row".into() });
    }
    let mut seen = BTreeSet::new();
    for h in &headers {
        if !seen.insert(h) {
            return Err(Error::Parse { line: 1, message: format!("duplicate column name `{h}`") });
        }
    }
    for name in overrides.keys() {
        if !seen.contains(name) {
            return Err(Error::InvalidInput(format!("override for unknown column `{name}`")));
        }
    }

    let mut raw: Vec<Vec<Option<String>>> = vec![Vec::new(); headers.len()];
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        for (col, field) in raw.iter_mut().zip(record.iter()) {
            col.push(if field.is_empty() { None } else { Some(field.to_string()) });
        }
    }

    let mut columns = Vec::with_capacity(headers.len());
    for (name, cells) in headers.into_iter().zip(raw) {
        let parsed: Option<Vec<Option<f64>>> = cells
            .iter()
            .map(|c| match c {
                None => Some(None),
                Some(s) => s.trim().parse::<f64>().ok().filter(|x| x.is_finite()).map(Some),
            })
            .collect();
        let col = match (overrides.get(&name), parsed) {
            (Some(SemanticType::Categorical), _) | (None, None) => Column::Categorical(cells),
            (Some(SemanticType::Numerical), Some(nums)) | (None, Some(nums)) => Column::Numerical(nums),
            (Some(SemanticType::Numerical), None) => {
                let (row, bad) = cells
                    .iter()
                    .enumerate()
                    .find_map(|(i, c)| {
                        c.as_ref()
                            .filter(|s| s.trim().parse::<f64>().map_or(true, |x| !x.is_finite()))
                            .map(|s| (i, s.clone()))
                    })
                    .expect("some cell failed to parse");
                return Err(Error::Parse {
                    line: row as u64 + 2,
                    message: format!("column `{name}` forced numerical but has value `{bad}`"),
                });
            }
        };
        columns.push((name, col));
    }
    Dataset::new(columns)
}

/// Fractions for (train, valid, holdout), an optional stratification column
/// and the shuffling seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub fractions: [f64; 3],
    #[serde(default)]
    pub stratify_by: Option<String>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            fractions: [0.6, 0.2, 0.2],
            stratify_by: None,
            seed: 42,
        }
    }
}

/// Row indices of each split, ascending.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub holdout: Vec<usize>,
}

impl SplitIndices {
    pub fn apply(&self, data: &Dataset) -> Splits {
        Splits {
            train: data.subset(&self.train),
            valid: data.subset(&self.valid),
            holdout: data.subset(&self.holdout),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Splits {
    pub train: Dataset,
    pub valid: Dataset,
    pub holdout: Dataset,
}

/// Largest-remainder apportionment of `total` by `fractions`; ties go to
/// the earlier position.
fn largest_remainder(total: usize, fractions: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = fractions.iter().map(|f| total as f64 * f).collect();
    let mut out: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = out.iter().sum();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &j in order.iter().take(total.saturating_sub(assigned)) {
        out[j] += 1;
    }
    out
}

/// Rounds the stratum-by-split table of exact targets so that every row sums
/// to its stratum size, every column to its global largest-remainder size,
/// and every cell is the floor or ceiling of its exact target.
fn controlled_rounding(strata: &[usize], fractions: &[f64; 3], totals: &[usize]) -> Option<Vec<[usize; 3]>> {
    let s = strata.len();
    let exact: Vec<[f64; 3]> = strata
        .iter()
        .map(|&n| [n as f64 * fractions[0], n as f64 * fractions[1], n as f64 * fractions[2]])
        .collect();
    let mut table: Vec<[usize; 3]> = exact
        .iter()
        .map(|e| [e[0].floor() as usize, e[1].floor() as usize, e[2].floor() as usize])
        .collect();
    let row_need: Vec<usize> = (0..s).map(|i| strata[i] - table[i].iter().sum::<usize>()).collect();
    let col_need: Vec<isize> = (0..3)
        .map(|j| totals[j] as isize - table.iter().map(|r| r[j] as isize).sum::<isize>())
        .collect();
    if col_need.iter().any(|&c| c < 0) {
        return None;
    }

    // Max-flow: source -> stratum (row_need) -> split (1 per fractional cell) -> sink (col_need).
    let nodes = s + 5;
    let (src, sink) = (s + 3, s + 4);
    let mut cap = vec![vec![0isize; nodes]; nodes];
    for i in 0..s {
        cap[src][i] = row_need[i] as isize;
        for j in 0..3 {
            if exact[i][j] - exact[i][j].floor() > 1e-9 {
                cap[i][s + j] = 1;
            }
        }
    }
    for j in 0..3 {
        cap[s + j][sink] = col_need[j];
    }
    let mut flow = 0;
    loop {
        let mut prev = vec![usize::MAX; nodes];
        prev[src] = src;
        let mut queue = std::collections::VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            for v in 0..nodes {
                if prev[v] == usize::MAX && cap[u][v] > 0 {
                    prev[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if prev[sink] == usize::MAX {
            break;
        }
        let mut v = sink;
        while v != src {
            let u = prev[v];
            cap[u][v] -= 1;
            cap[v][u] += 1;
            v = u;
        }
        flow += 1;
    }
    if flow != row_need.iter().sum::<usize>() as isize {
        return None;
    }
    for (i, row) in table.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            // Reverse capacity on a stratum->split edge records the unit sent.
            *cell += cap[s + j][i] as usize;
        }
    }
    Some(table)
}

/// Splits rows into disjoint, exhaustive train/valid/holdout index sets,
/// allocating each stratum proportionally.
pub fn stratified_split(data: &Dataset, spec: &SplitSpec) -> Result<SplitIndices> {
    if spec.fractions.iter().any(|f| !f.is_finite() || *f < 0.0) {
        return Err(Error::InvalidInput("split fractions must be non-negative".into()));
    }
    if (spec.fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput("split fractions must sum to 1".into()));
    }
    if spec.fractions[0] <= 0.0 {
        return Err(Error::InvalidInput("train fraction must be positive".into()));
    }
    let requested = spec.fractions.iter().filter(|f| **f > 0.0).count();

    let mut strata: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    match &spec.stratify_by {
        None => {
            strata.insert(String::new(), (0..data.n_rows()).collect());
        }
        Some(name) => {
            let col = data.column(name).ok_or_else(|| Error::MissingFeature(name.clone()))?;
            for i in 0..data.n_rows() {
                let key = match col.value(i) {
                    Value::Num(x) => format!("{x}"),
                    Value::Cat(s) => s,
                    Value::Missing => {
                        return Err(Error::InvalidInput(format!("stratify column `{name}` has a missing value at row {i}")))
                    }
                };
                strata.entry(key).or_default().push(i);
            }
        }
    }
    for (key, rows) in &strata {
        if rows.len() < requested {
            return Err(Error::StratumTooSmall(key.clone()));
        }
    }

    let sizes: Vec<usize> = strata.values().map(Vec::len).collect();
    let totals = largest_remainder(data.n_rows(), &spec.fractions);
    let table = controlled_rounding(&sizes, &spec.fractions, &totals).unwrap_or_else(|| {
        log::warn!("no controlled rounding found; rounding each stratum independently");
        sizes.iter().map(|&n| {
            let r = largest_remainder(n, &spec.fractions);
            [r[0], r[1], r[2]]
        }).collect()
    });

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = SplitIndices { train: Vec::new(), valid: Vec::new(), holdout: Vec::new() };
    for (rows, counts) in strata.into_values().zip(table) {
        let mut rows = rows;
        rows.shuffle(&mut rng);
        let (a, rest) = rows.split_at(counts[0]);
        let (b, c) = rest.split_at(counts[1]);
        out.train.extend_from_slice(a);
        out.valid.extend_from_slice(b);
        out.holdout.extend_from_slice(c);
    }
    out.train.sort_unstable();
    out.valid.sort_unstable();
    out.holdout.sort_unstable();
    Ok(out)
}

/// Per-feature statistics of the training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stype", rename_all = "lowercase")]
pub enum FeatureStats {
    Numerical { min: f64, max: f64, mean: f64, std: f64 },
    Categorical { frequencies: BTreeMap<String, usize> },
}

pub type InputStats = BTreeMap<String, FeatureStats>;

/// Statistics over every column of `train`.
pub fn compute_stats(train: &Dataset) -> Result<InputStats> {
    let names: Vec<&str> = train.names().collect();
    compute_stats_for(train, &names)
}

/// Statistics over the named columns of `train`.
pub fn compute_stats_for(train: &Dataset, names: &[&str]) -> Result<InputStats> {
    if train.n_rows() == 0 {
        return Err(Error::InvalidInput("cannot compute statistics of an empty dataset".into()));
    }
    let mut out = InputStats::new();
    for &name in names {
        let stats = match train.column(name).ok_or_else(|| Error::MissingFeature(name.to_string()))? {
            Column::Numerical(v) => {
                let xs: Vec<f64> = v.iter().flatten().copied().collect();
                if xs.is_empty() {
                    return Err(Error::AllMissing(name.to_string()));
                }
                let n = xs.len() as f64;
                let mean = xs.iter().sum::<f64>() / n;
                let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
                FeatureStats::Numerical {
                    min: xs.iter().copied().fold(f64::INFINITY, f64::min),
                    max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    mean,
                    std: var.sqrt(),
                }
            }
            Column::Categorical(v) => {
                let mut frequencies = BTreeMap::new();
                for c in v.iter().flatten() {
                    *frequencies.entry(c.clone()).or_insert(0) += 1;
                }
                if frequencies.is_empty() {
                    return Err(Error::AllMissing(name.to_string()));
                }
                FeatureStats::Categorical { frequencies }
            }
        };
        out.insert(name.to_string(), stats);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_overrides() -> BTreeMap<String, SemanticType> {
        BTreeMap::new()
    }

    #[test]
    fn infers_types() {
        let d = parse_csv("a,b,c\n1,x,\n2.5,y,3\n", &no_overrides()).unwrap();
        assert_eq!(d.n_rows(), 2);
        assert_eq!(d.stype("a"), Some(SemanticType::Numerical));
        assert_eq!(d.stype("b"), Some(SemanticType::Categorical));
        assert_eq!(d.stype("c"), Some(SemanticType::Numerical));
        assert_eq!(d.value("c", 0), Some(Value::Missing));
    }

    #[test]
    fn override_wins() {
        let mut o = no_overrides();
        o.insert("a".into(), SemanticType::Categorical);
        let d = parse_csv("a,b\n1,2\n3,4\n", &o).unwrap();
        assert_eq!(d.stype("a"), Some(SemanticType::Categorical));
        assert_eq!(d.value("a", 1), Some(Value::Cat("3".into())));
    }

    #[test]
    fn numeric_override_on_text_fails_with_line() {
        let mut o = no_overrides();
        o.insert("a".into(), SemanticType::Numerical);
        let err = parse_csv("a\n1\nfoo\n", &o).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn rejects_bad_files() {
        assert!(matches!(parse_csv("", &no_overrides()), Err(Error::Parse { .. })));
        assert!(matches!(parse_csv("a,a\n1,2\n", &no_overrides()), Err(Error::Parse { line: 1, .. })));
        let err = parse_csv("a,b\n1,2\n3\n", &no_overrides()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn quoted_fields() {
        let d = parse_csv("name,v\n\"x, y\",1\n\"say \"\"hi\"\"\",2\n", &no_overrides()).unwrap();
        assert_eq!(d.value("name", 0), Some(Value::Cat("x, y".into())));
        assert_eq!(d.value("name", 1), Some(Value::Cat("say \"hi\"".into())));
    }

    #[test]
    fn stats_examples() {
        let d = parse_csv("x,c\n1,a\n2,a\n3,b\n", &no_overrides()).unwrap();
        let s = compute_stats(&d).unwrap();
        match &s["x"] {
            FeatureStats::Numerical { min, max, mean, .. } => {
                assert_eq!((*min, *max, *mean), (1.0, 3.0, 2.0));
            }
            other => panic!("{other:?}"),
        }
        match &s["c"] {
            FeatureStats::Categorical { frequencies } => {
                assert_eq!(frequencies["a"], 2);
                assert_eq!(frequencies["b"], 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn stats_all_missing_is_error() {
        let d = parse_csv("x,y\n,1\n,2\n", &no_overrides()).unwrap();
        assert!(matches!(compute_stats(&d), Err(Error::AllMissing(_))));
    }

    #[test]
    fn stats_read_only_train_rows() {
        // Sentinels in rows that are not part of the training subset.
        let d = Dataset::from_numeric(vec![("x", vec![1.0, 2.0, 1e9, -1e9])]).unwrap();
        let train = d.subset(&[0, 1]);
        match &compute_stats(&train).unwrap()["x"] {
            FeatureStats::Numerical { min, max, .. } => assert_eq!((*min, *max), (1.0, 2.0)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn largest_remainder_examples() {
        assert_eq!(largest_remainder(569, &[0.6, 0.2, 0.2]), vec![341, 114, 114]);
        assert_eq!(largest_remainder(10, &[0.5, 0.5, 0.0]), vec![5, 5, 0]);
        assert_eq!(largest_remainder(1, &[0.5, 0.5, 0.0]), vec![1, 0, 0]);
    }

    #[test]
    fn small_stratum_is_error() {
        let d = Dataset::from_numeric(vec![("y", vec![0.0, 0.0, 0.0, 1.0])]).unwrap();
        let spec = SplitSpec { stratify_by: Some("y".into()), ..Default::default() };
        match stratified_split(&d, &spec) {
            Err(Error::StratumTooSmall(k)) => assert_eq!(k, "1"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn split_without_holdout() {
        let d = Dataset::from_numeric(vec![("x", (0..10).map(f64::from).collect())]).unwrap();
        let spec = SplitSpec { fractions: [0.8, 0.2, 0.0], stratify_by: None, seed: 1 };
        let s = stratified_split(&d, &spec).unwrap();
        assert_eq!((s.train.len(), s.valid.len(), s.holdout.len()), (8, 2, 0));
    }

    #[test]
    fn csv_round_trip_keeps_bits() {
        let xs = vec![0.1, 1.0 / 3.0, -2.5e-300, 12345.678901234567];
        let d = Dataset::from_numeric(vec![("x", xs.clone())]).unwrap();
        let back = parse_csv(&d.to_csv_string(), &no_overrides()).unwrap();
        let got: Vec<f64> = back.numeric("x").unwrap().iter().map(|v| v.unwrap()).collect();
        assert_eq!(got, xs);
        assert_eq!(back.manifest(), d.manifest());
    }
}
