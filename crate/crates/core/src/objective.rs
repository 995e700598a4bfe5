//! The surrogate objective `f(w)` and its gradient through `t(w)`.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::surrogate::SurrogateLoss;
use crate::threshold::{axpy, scores, threshold_from_scores, ThresholdResult, ThresholdRule};

/// A complete training objective.
///
/// `include_fp` is derived from the rule: only the exact-quantile rules add
/// the normalized surrogate false positives to the objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct ObjectiveSpec {
    pub rule: ThresholdRule,
    pub loss: SurrogateLoss,
    pub lambda: f64,
    include_fp: bool,
}

#[derive(Deserialize)]
struct RawSpec {
    rule: ThresholdRule,
    #[serde(default)]
    loss: SurrogateLoss,
    #[serde(default)]
    lambda: f64,
}

impl TryFrom<RawSpec> for ObjectiveSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        ObjectiveSpec::new(raw.rule, raw.loss, raw.lambda)
    }
}

impl ObjectiveSpec {
    pub fn new(rule: ThresholdRule, loss: SurrogateLoss, lambda: f64) -> Result<Self> {
        rule.validate()?;
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be non-negative, got {lambda}")));
        }
        Ok(ObjectiveSpec {
            rule,
            loss,
            lambda,
            include_fp: rule.is_exact_quantile(),
        })
    }

    pub fn include_fp(&self) -> bool {
        self.include_fp
    }
}

/// Unnormalized surrogate confusion counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateCounts {
    pub fn_s: f64,
    pub fp_s: f64,
    pub tp_s: f64,
    pub tn_s: f64,
}

pub fn surrogate_counts(w: &[f64], t: f64, d: &Dataset, loss: SurrogateLoss) -> Result<SurrogateCounts> {
    if !t.is_finite() {
        return Err(Error::NonFinite("threshold".into()));
    }
    let z = scores(w, d)?;
    Ok(counts_from_scores(&z, t, d, loss))
}

fn counts_from_scores(z: &[f64], t: f64, d: &Dataset, loss: SurrogateLoss) -> SurrogateCounts {
    let mut c = SurrogateCounts {
        fn_s: 0.0,
        fp_s: 0.0,
        tp_s: 0.0,
        tn_s: 0.0,
    };
    for &i in d.pos_idx() {
        c.fn_s += loss.value(t - z[i]);
        c.tp_s += loss.value(z[i] - t);
    }
    for &i in d.neg_idx() {
        c.fp_s += loss.value(z[i] - t);
        c.tn_s += loss.value(t - z[i]);
    }
    c
}

/// Objective value, gradient and the threshold they were computed with.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub threshold: ThresholdResult,
}

fn check(spec: &ObjectiveSpec, w: &[f64], d: &Dataset) -> Result<()> {
    d.check_trainable()?;
    if w.len() != d.n_features() {
        return Err(Error::DimensionMismatch {
            expected: d.n_features(),
            found: w.len(),
        });
    }
    spec.rule.validate()
}

fn sq_norm(w: &[f64]) -> f64 {
    w.iter().map(|v| v * v).sum()
}

pub fn objective(spec: &ObjectiveSpec, w: &[f64], d: &Dataset) -> Result<f64> {
    check(spec, w, d)?;
    let z = scores(w, d)?;
    let th = threshold_from_scores(&spec.rule, &z, d, spec.loss)?;
    Ok(value_at(spec, w, &z, th.t, d))
}

fn value_at(spec: &ObjectiveSpec, w: &[f64], z: &[f64], t: f64, d: &Dataset) -> f64 {
    let loss = spec.loss;
    let fn_s: f64 = d.pos_idx().iter().map(|&i| loss.value(t - z[i])).sum();
    let mut f = fn_s / d.n_pos() as f64;
    if spec.include_fp {
        let fp_s: f64 = d.neg_idx().iter().map(|&i| loss.value(z[i] - t)).sum();
        f += fp_s / d.n_neg() as f64;
    }
    f + 0.5 * spec.lambda * sq_norm(w)
}

pub fn gradient(spec: &ObjectiveSpec, w: &[f64], d: &Dataset) -> Result<Vec<f64>> {
    evaluate(spec, w, d).map(|e| e.gradient)
}

/// Objective and chain-rule gradient from a single pass over the scores.
///
/// `grad f = (1/n+) sum_{x+} l'(t - w.x) (grad t - x) + lambda w`, plus
/// `(1/n-) sum_{x-} l'(w.x - t) (x - grad t)` for the exact-quantile rules,
/// where `grad t = 0`.
pub fn evaluate(spec: &ObjectiveSpec, w: &[f64], d: &Dataset) -> Result<Evaluation> {
    check(spec, w, d)?;
    let z = scores(w, d)?;
    let th = threshold_from_scores(&spec.rule, &z, d, spec.loss)?;
    let t = th.t;
    let loss = spec.loss;
    let m = d.n_features();

    let mut fn_s = 0.0;
    let mut weight_sum = 0.0;
    let mut weighted_x = vec![0.0; m];
    for &i in d.pos_idx() {
        fn_s += loss.value(t - z[i]);
        let lp = loss.deriv(t - z[i]);
        if lp != 0.0 {
            weight_sum += lp;
            axpy(lp, d.row(i), &mut weighted_x);
        }
    }
    let inv_pos = 1.0 / d.n_pos() as f64;
    let mut value = fn_s / d.n_pos() as f64;
    let mut grad: Vec<f64> = th
        .grad_t
        .iter()
        .zip(&weighted_x)
        .map(|(gt, wx)| (weight_sum * gt - wx) * inv_pos)
        .collect();

    if spec.include_fp {
        let inv_neg = 1.0 / d.n_neg() as f64;
        let mut fp_s = 0.0;
        let mut weight_sum = 0.0;
        let mut weighted_x = vec![0.0; m];
        for &i in d.neg_idx() {
            fp_s += loss.value(z[i] - t);
            let lp = loss.deriv(z[i] - t);
            if lp != 0.0 {
                weight_sum += lp;
                axpy(lp, d.row(i), &mut weighted_x);
            }
        }
        value += fp_s / d.n_neg() as f64;
        for ((g, gt), wx) in grad.iter_mut().zip(&th.grad_t).zip(&weighted_x) {
            *g += (wx - weight_sum * gt) * inv_neg;
        }
    }

    value += 0.5 * spec.lambda * sq_norm(w);
    axpy(spec.lambda, w, &mut grad);

    Ok(Evaluation {
        value,
        gradient: grad,
        threshold: th,
    })
}
