//! Diagnostics for fitted graphs, returned as serializable plot data.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{Column, Dataset, Sample, Value};
use crate::error::{Error, Result};
use crate::fit::{pointwise_loss, predict};
use crate::graph::{Graph, SemanticType};

pub const PLOT_VERSION: u32 = 1;
pub const DEFAULT_SCORE_BINS: usize = 20;
pub const DEFAULT_LOSS_BINS: usize = 25;

/// ROC curve over every distinct score.
///
/// `fpr`/`tpr` start at `(0, 0)`; point `i + 1` is obtained by predicting
/// positive for scores `>= thresholds[i]`, so `thresholds` is one shorter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub thresholds: Vec<f64>,
    pub fpr: Vec<f64>,
    pub tpr: Vec<f64>,
    pub auc: f64,
}

fn check_labels(y_true: &[f64], scores: &[f64]) -> Result<(usize, usize)> {
    if y_true.len() != scores.len() {
        return Err(Error::InvalidInput(format!(
            "{} labels but {} scores",
            y_true.len(),
            scores.len()
        )));
    }
    let mut pos = 0;
    for (&y, &s) in y_true.iter().zip(scores) {
        if y != 0.0 && y != 1.0 {
            return Err(Error::InvalidInput(format!("label {y} is not 0 or 1")));
        }
        if s.is_nan() {
            return Err(Error::InvalidInput("score is NaN".into()));
        }
        pos += usize::from(y == 1.0);
    }
    Ok((pos, y_true.len() - pos))
}

pub fn roc_auc(y_true: &[f64], scores: &[f64]) -> Result<RocCurve> {
    let (pos, neg) = check_labels(y_true, scores)?;
    if pos == 0 || neg == 0 {
        return Err(Error::AucUndefined("labels contain a single class".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut thresholds = Vec::new();
    let (mut fpr, mut tpr) = (vec![0.0], vec![0.0]);
    let (mut tp, mut fp) = (0u64, 0u64);
    // Twice the area in units of one positive-negative pair.
    let mut area2 = 0u128;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if y_true[order[i]] == 1.0 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += u128::from(fp - fp0) * u128::from(tp + tp0);
        thresholds.push(s);
        fpr.push(fp as f64 / neg as f64);
        tpr.push(tp as f64 / pos as f64);
    }
    let auc = area2 as f64 / (2.0 * pos as f64 * neg as f64);
    Ok(RocCurve { thresholds, fpr, tpr, auc })
}

/// Class-conditional histograms of classifier scores on shared edges over
/// `[0, 1]`. The last bin is closed on the right.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreHistograms {
    pub edges: Vec<f64>,
    pub counts0: Vec<u64>,
    pub counts1: Vec<u64>,
}

impl ScoreHistograms {
    /// Shared area of the two normalized histograms, from 0 (disjoint) to 1.
    pub fn overlap(&self) -> f64 {
        let n0: u64 = self.counts0.iter().sum();
        let n1: u64 = self.counts1.iter().sum();
        if n0 == 0 || n1 == 0 {
            return 0.0;
        }
        self.counts0
            .iter()
            .zip(&self.counts1)
            .map(|(&a, &b)| (a as f64 / n0 as f64).min(b as f64 / n1 as f64))
            .sum()
    }
}

pub fn probability_scores(y_true: &[f64], scores: &[f64], bins: usize) -> Result<ScoreHistograms> {
    check_labels(y_true, scores)?;
    if bins == 0 {
        return Err(Error::InvalidInput("bins must be at least 1".into()));
    }
    let edges = (0..=bins).map(|i| i as f64 / bins as f64).collect();
    let mut h = ScoreHistograms { edges, counts0: vec![0; bins], counts1: vec![0; bins] };
    for (&y, &s) in y_true.iter().zip(scores) {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::InvalidInput(format!("score {s} outside [0, 1]")));
        }
        let b = ((s * bins as f64) as usize).min(bins - 1);
        if y == 1.0 {
            h.counts1[b] += 1;
        } else {
            h.counts0[b] += 1;
        }
    }
    Ok(h)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub x: f64,
    pub y: f64,
    pub label: f64,
}

/// Prediction surface over two numerical features.
///
/// `grid[j][i]` is the prediction at the centre of the cell spanning
/// `x_edges[i]..x_edges[i+1]` and `y_edges[j]..y_edges[j+1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Partial2d {
    pub x_edges: Vec<f64>,
    pub y_edges: Vec<f64>,
    pub grid: Vec<Vec<f64>>,
    pub scatter: Vec<ScatterPoint>,
    /// Values the remaining inputs were held at.
    pub fixed: BTreeMap<String, Value>,
}

/// Training medians (numerical) and modes (categorical) for each input of
/// `graph` other than `exclude`.
pub fn fixed_defaults(graph: &Graph, train: &Dataset, exclude: &[&str]) -> Result<BTreeMap<String, Value>> {
    let mut out = BTreeMap::new();
    for (name, _) in graph.inputs() {
        if exclude.contains(&name.as_str()) {
            continue;
        }
        let col = train.column(&name).ok_or_else(|| Error::MissingFeature(name.clone()))?;
        let v = match col {
            Column::Numerical(xs) => {
                let mut v: Vec<f64> = xs.iter().flatten().copied().collect();
                if v.is_empty() {
                    return Err(Error::AllMissing(name));
                }
                v.sort_by(f64::total_cmp);
                let m = v.len() / 2;
                Value::Num(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
            }
            Column::Categorical(xs) => {
                let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
                for c in xs.iter().flatten() {
                    *freq.entry(c).or_default() += 1;
                }
                let best = freq
                    .iter()
                    .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                    .ok_or_else(|| Error::AllMissing(name.clone()))?;
                Value::Cat(best.0.to_string())
            }
        };
        out.insert(name, v);
    }
    Ok(out)
}

fn numeric_range(data: &Dataset, name: &str) -> Result<(f64, f64)> {
    let xs = data.numeric(name)?;
    let (lo, hi) = xs
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if lo > hi {
        return Err(Error::AllMissing(name.to_string()));
    }
    let pad = if hi > lo { (hi - lo) * 0.05 } else { 0.5 };
    Ok((lo - pad, hi + pad))
}

fn edges(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

pub fn partial2d(
    graph: &Graph,
    data: &Dataset,
    fx: &str,
    fy: &str,
    resolution: usize,
    fixed: &BTreeMap<String, Value>,
) -> Result<Partial2d> {
    if fx == fy {
        return Err(Error::InvalidInput("partial2d needs two different features".into()));
    }
    if resolution < 2 {
        return Err(Error::InvalidInput("resolution must be at least 2".into()));
    }
    let inputs = graph.inputs();
    for f in [fx, fy] {
        match inputs.get(f) {
            None => return Err(Error::InvalidInput(format!("`{f}` is not an input of the graph"))),
            Some(SemanticType::Categorical) => {
                return Err(Error::Type(format!("partial2d axis `{f}` must be numerical")))
            }
            Some(SemanticType::Numerical) => {}
        }
    }
    let mut base = Sample::new();
    let mut used = BTreeMap::new();
    for name in inputs.keys().filter(|n| *n != fx && *n != fy) {
        let v = fixed
            .get(name)
            .filter(|v| **v != Value::Missing)
            .ok_or_else(|| Error::InvalidInput(format!("no fixed value for `{name}`")))?;
        base.insert(name.clone(), v.clone());
        used.insert(name.clone(), v.clone());
    }
    let (x0, x1) = numeric_range(data, fx)?;
    let (y0, y1) = numeric_range(data, fy)?;
    let x_edges = edges(x0, x1, resolution);
    let y_edges = edges(y0, y1, resolution);
    let mut grid = Vec::with_capacity(resolution);
    for j in 0..resolution {
        let yc = (y_edges[j] + y_edges[j + 1]) / 2.0;
        let mut row = Vec::with_capacity(resolution);
        for i in 0..resolution {
            let xc = (x_edges[i] + x_edges[i + 1]) / 2.0;
            let mut s = base.clone();
            s.insert(fx.to_string(), Value::Num(xc));
            s.insert(fy.to_string(), Value::Num(yc));
            row.push(graph.eval(&s)?);
        }
        grid.push(row);
    }
    let target = graph.target().and_then(|t| data.numeric(t).ok());
    let xs = data.numeric(fx)?;
    let ys = data.numeric(fy)?;
    let scatter = (0..data.n_rows())
        .filter_map(|r| {
            let label = match target {
                Some(t) => t[r]?,
                None => f64::NAN,
            };
            Some(ScatterPoint { x: xs[r]?, y: ys[r]?, label })
        })
        .filter(|p| !p.label.is_nan())
        .collect();
    Ok(Partial2d { x_edges, y_edges, grid, scatter, fixed: used })
}

/// Mean task loss per bin of one input feature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentedLoss {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
    pub counts: Vec<u64>,
    /// `None` for empty bins.
    pub mean_loss: Vec<Option<f64>>,
}

/// Bins the evaluable rows of `data` by `by` and averages the pointwise
/// task loss in each bin. Rows missing any graph input or the target are
/// left out.
pub fn segmented_loss(graph: &Graph, data: &Dataset, by: &str, bins: usize) -> Result<SegmentedLoss> {
    if bins == 0 {
        return Err(Error::InvalidInput("bins must be at least 1".into()));
    }
    if !graph.inputs().contains_key(by) {
        return Err(Error::InvalidInput(format!("`{by}` is not an input of the graph")));
    }
    let column = data.column(by).ok_or_else(|| Error::MissingFeature(by.to_string()))?;
    let preds = predict(graph, data)?;
    let targets = preds
        .targets
        .as_ref()
        .ok_or_else(|| Error::MissingFeature(graph.target().unwrap_or_default().to_string()))?;
    let losses: Vec<f64> = targets
        .iter()
        .zip(&preds.values)
        .map(|(&y, &p)| pointwise_loss(graph.task, y, p))
        .collect::<Result<_>>()?;

    let (mut out, bin_of): (SegmentedLoss, Box<dyn Fn(usize) -> usize>) = match column {
        Column::Numerical(xs) => {
            let vals: Vec<f64> = preds.rows.iter().map(|&r| xs[r].expect("evaluated rows are complete")).collect();
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let (lo, hi) = if vals.is_empty() { (0.0, 1.0) } else { (lo, hi) };
            let width = hi - lo;
            let seg = SegmentedLoss {
                edges: Some(edges(lo, hi, bins)),
                categories: None,
                counts: vec![0; bins],
                mean_loss: vec![None; bins],
            };
            let f = move |i: usize| {
                if width > 0.0 {
                    (((vals[i] - lo) / width * bins as f64) as usize).min(bins - 1)
                } else {
                    0
                }
            };
            (seg, Box::new(f))
        }
        Column::Categorical(xs) => {
            let cats: Vec<String> = preds
                .rows
                .iter()
                .map(|&r| xs[r].clone().expect("evaluated rows are complete"))
                .collect();
            let names: Vec<String> = cats.iter().cloned().collect::<std::collections::BTreeSet<_>>().into_iter().collect();
            let n = names.len();
            let index: BTreeMap<String, usize> = names.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect();
            let seg = SegmentedLoss {
                edges: None,
                categories: Some(names),
                counts: vec![0; n],
                mean_loss: vec![None; n],
            };
            (seg, Box::new(move |i: usize| index[&cats[i]]))
        }
    };
    let mut sums = vec![0.0; out.counts.len()];
    for (i, l) in losses.iter().enumerate() {
        let b = bin_of(i);
        out.counts[b] += 1;
        sums[b] += l;
    }
    for (b, s) in sums.into_iter().enumerate() {
        if out.counts[b] > 0 {
            out.mean_loss[b] = Some(s / out.counts[b] as f64);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum PlotPayload {
    Roc(RocCurve),
    ProbabilityScores(ScoreHistograms),
    Partial2d(Partial2d),
    SegmentedLoss(SegmentedLoss),
}

impl PlotPayload {
    pub fn kind(&self) -> &'static str {
        match self {
            PlotPayload::Roc(_) => "roc",
            PlotPayload::ProbabilityScores(_) => "probability_scores",
            PlotPayload::Partial2d(_) => "partial2d",
            PlotPayload::SegmentedLoss(_) => "segmented_loss",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotMeta {
    pub dataset: String,
    pub features: Vec<String>,
    pub structure_hash: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub version: u32,
    #[serde(flatten)]
    pub plot: PlotPayload,
    pub meta: PlotMeta,
}

impl PlotData {
    pub fn new(plot: PlotPayload, graph: &Graph, dataset: &str, features: Vec<String>) -> Self {
        PlotData {
            version: PLOT_VERSION,
            plot,
            meta: PlotMeta {
                dataset: dataset.to_string(),
                features,
                structure_hash: graph.structure_hash().0,
            },
        }
    }
}

/// Labels and predictions of a classifier on `data`, for ROC and
/// score histograms.
pub fn classifier_scores(graph: &Graph, data: &Dataset) -> Result<(Vec<f64>, Vec<f64>)> {
    if graph.task != crate::graph::Task::Classifier {
        return Err(Error::InvalidInput("score plots need a classifier".into()));
    }
    let p = predict(graph, data)?;
    let y = p
        .targets
        .ok_or_else(|| Error::MissingFeature(graph.target().unwrap_or_default().to_string()))?;
    Ok((y, p.values))
}
