//! Exact 0-1 counts, precision and recall, curves and the top-sample criteria.
//!
//! A sample is predicted positive when its score is `>= t`, including at ties.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::threshold::{exact_quantile, scores};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub fp: usize,
    /// Samples scoring exactly `t`.
    pub q: usize,
}

impl Counts {
    pub fn n_pos(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn n_neg(&self) -> usize {
        self.tn + self.fp
    }
}

pub fn counts_from_scores(z: &[f64], labels: &[bool], t: f64) -> Counts {
    let mut c = Counts::default();
    for (&zi, &y) in z.iter().zip(labels) {
        let above = zi >= t;
        match (y, above) {
            (true, true) => c.tp += 1,
            (true, false) => c.fn_ += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
        }
        if zi == t {
            c.q += 1;
        }
    }
    c
}

pub fn counts(w: &[f64], t: f64, d: &Dataset) -> Result<Counts> {
    Ok(counts_from_scores(&scores(w, d)?, d.labels(), t))
}

/// Precision is 1 when nothing is predicted positive; recall is 1 without positives.
pub fn precision_recall(c: &Counts) -> (f64, f64) {
    let precision = if c.tp + c.fp == 0 {
        1.0
    } else {
        c.tp as f64 / (c.tp + c.fp) as f64
    };
    let recall = if c.tp + c.fn_ == 0 {
        1.0
    } else {
        c.tp as f64 / (c.tp + c.fn_) as f64
    };
    (precision, recall)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub precision: f64,
}

fn check_taus(taus: &[f64]) -> Result<()> {
    if taus.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
        return Err(Error::invalid("curve taus must lie in (0, 1]"));
    }
    if taus.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::invalid("curve taus must be strictly increasing"));
    }
    Ok(())
}

/// Precision at the top `tau`-quantile of all scores, for each `tau`.
pub fn ptau_curve(w: &[f64], d: &Dataset, taus: &[f64]) -> Result<Vec<CurvePoint>> {
    check_taus(taus)?;
    let z = scores(w, d)?;
    taus.iter()
        .map(|&tau| {
            let t = exact_quantile(&z, tau)?;
            let (precision, _) = precision_recall(&counts_from_scores(&z, d.labels(), t));
            Ok(CurvePoint { x: tau, precision })
        })
        .collect()
}

/// `(recall, precision)` for every distinct score used as threshold, by
/// increasing recall; equal recalls keep the highest precision.
pub fn pr_curve(w: &[f64], d: &Dataset) -> Result<Vec<CurvePoint>> {
    let z = scores(w, d)?;
    Ok(pr_curve_from_scores(&z, d.labels()))
}

pub fn pr_curve_from_scores(z: &[f64], labels: &[bool]) -> Vec<CurvePoint> {
    let n_pos = labels.iter().filter(|&&y| y).count();
    let mut order: Vec<usize> = (0..z.len()).collect();
    order.sort_unstable_by(|&a, &b| z[b].total_cmp(&z[a]));
    let mut out: Vec<CurvePoint> = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let t = z[order[i]];
        while i < order.len() && z[order[i]] == t {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let (precision, recall) = precision_recall(&Counts {
            tp,
            fn_: n_pos - tp,
            tn: 0,
            fp,
            q: 0,
        });
        match out.last_mut() {
            Some(last) if last.x == recall => last.precision = last.precision.max(precision),
            _ => out.push(CurvePoint { x: recall, precision }),
        }
    }
    out
}

/// Fraction of positives at or above one of the top-sample thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Criterion {
    /// Threshold at the largest negative score.
    PositivesAtTop,
    /// Threshold at the top `tau`-quantile of all scores.
    PositivesAtQuantile { tau: f64 },
    /// Threshold at the top `tau`-quantile of negative scores.
    PositivesAtNp { tau: f64 },
}

impl Criterion {
    pub fn tau(&self) -> Option<f64> {
        match *self {
            Criterion::PositivesAtTop => None,
            Criterion::PositivesAtQuantile { tau } | Criterion::PositivesAtNp { tau } => Some(tau),
        }
    }

    /// The three criteria, the latter two for each of `taus`.
    pub fn all_for(taus: &[f64]) -> Vec<Criterion> {
        let mut out = vec![Criterion::PositivesAtTop];
        out.extend(taus.iter().map(|&tau| Criterion::PositivesAtQuantile { tau }));
        out.extend(taus.iter().map(|&tau| Criterion::PositivesAtNp { tau }));
        out
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Criterion::PositivesAtTop => f.write_str("positives_at_top"),
            Criterion::PositivesAtQuantile { tau } => write!(f, "positives_at_quantile({tau})"),
            Criterion::PositivesAtNp { tau } => write!(f, "positives_at_np({tau})"),
        }
    }
}

/// Parses `top`, `quantile:0.05`, `np:0.05` or the display form.
impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "top" || s == "positives_at_top" {
            return Ok(Criterion::PositivesAtTop);
        }
        let (kind, rest) = s
            .split_once([':', '('])
            .ok_or_else(|| Error::invalid(format!("unknown criterion `{s}`")))?;
        let tau: f64 = rest
            .trim_end_matches(')')
            .parse()
            .map_err(|_| Error::invalid(format!("bad tau in criterion `{s}`")))?;
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::invalid(format!("criterion tau must lie in (0, 1), got {tau}")));
        }
        match kind {
            "quantile" | "positives_at_quantile" => Ok(Criterion::PositivesAtQuantile { tau }),
            "np" | "positives_at_np" => Ok(Criterion::PositivesAtNp { tau }),
            _ => Err(Error::invalid(format!("unknown criterion `{s}`"))),
        }
    }
}

pub fn criterion_from_scores(c: &Criterion, z: &[f64], labels: &[bool]) -> Result<f64> {
    let n_pos = labels.iter().filter(|&&y| y).count();
    if n_pos == 0 {
        return Err(Error::MissingClass("positive"));
    }
    let neg: Vec<f64> = z.iter().zip(labels).filter(|(_, &y)| !y).map(|(&v, _)| v).collect();
    let t = match *c {
        Criterion::PositivesAtTop => neg
            .iter()
            .copied()
            .reduce(f64::max)
            .ok_or(Error::MissingClass("negative"))?,
        Criterion::PositivesAtQuantile { tau } => exact_quantile(z, tau)?,
        Criterion::PositivesAtNp { tau } => {
            if neg.is_empty() {
                return Err(Error::MissingClass("negative"));
            }
            exact_quantile(&neg, tau)?
        }
    };
    Ok(counts_from_scores(z, labels, t).tp as f64 / n_pos as f64)
}

pub fn criterion(c: &Criterion, w: &[f64], d: &Dataset) -> Result<f64> {
    criterion_from_scores(c, &scores(w, d)?, d.labels())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub t: f64,
    pub counts: Counts,
    pub precision: f64,
    pub recall: f64,
    pub pr_curve: Vec<CurvePoint>,
    pub ptau_curve: Vec<CurvePoint>,
    pub criteria: BTreeMap<String, f64>,
}

/// Default abscissae of the precision-at-tau curve.
pub fn default_curve_taus() -> Vec<f64> {
    (1..=100).map(|i| i as f64 / 100.0).collect()
}

/// Evaluates `w` with threshold `t` on `d`; criteria are computed for each of `taus`.
pub fn report(w: &[f64], t: f64, d: &Dataset, taus: &[f64], curve_taus: &[f64]) -> Result<EvalReport> {
    let z = scores(w, d)?;
    let c = counts_from_scores(&z, d.labels(), t);
    let (precision, recall) = precision_recall(&c);
    let criteria = Criterion::all_for(taus)
        .iter()
        .map(|cr| Ok((cr.to_string(), criterion_from_scores(cr, &z, d.labels())?)))
        .collect::<Result<_>>()?;
    Ok(EvalReport {
        t,
        counts: c,
        precision,
        recall,
        pr_curve: pr_curve_from_scores(&z, d.labels()),
        ptau_curve: ptau_curve(w, d, curve_taus)?,
        criteria,
    })
}

impl EvalReport {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Writes a curve as CSV with header `<x_name>,precision`.
pub fn write_curve_csv(points: &[CurvePoint], x_name: &str, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record([x_name, "precision"])?;
    for p in points {
        wtr.write_record([p.x.to_string(), p.precision.to_string()])?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}
