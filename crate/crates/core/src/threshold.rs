//! Weight-dependent thresholds `t(w)` and their gradients.
//!
//! Every method in the crate shares the same objective shape and differs only
//! in how the threshold is derived from the scores `z = w·x`:
//!
//! | token        | rule                      | samples   | threshold                              |
//! |--------------|---------------------------|-----------|----------------------------------------|
//! | `toppush`    | [`ThresholdRule::TopPush`] | negatives | largest score                          |
//! | `toppushk`   | `TopPushK { k }`          | negatives | mean of the `k` largest scores         |
//! | `grill`      | `Quantile { tau }`        | all       | top `tau`-quantile                     |
//! | `grill-np`   | `QuantileNp { tau }`      | negatives | top `tau`-quantile                     |
//! | `patmat`     | `SurrogateQuantile`       | all       | root of `mean l(beta (z - t)) = tau`   |
//! | `patmat-np`  | `SurrogateQuantileNp`     | negatives | root of `mean l(beta (z - t)) = tau`   |
//! | `topmean`    | `TopMean { tau }`         | all       | mean of the `ceil(n tau)` largest      |
//! | `topmean-np` | `TopMeanNp { tau }`       | negatives | mean of the `ceil(n- tau)` largest     |
//!
//! The exact quantile is not differentiated: its gradient is reported as zero
//! and the threshold is simply recomputed after each step.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::surrogate::SurrogateLoss;

/// Method families, identified by their command-line token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "toppush")]
    TopPush,
    #[serde(rename = "toppushk")]
    TopPushK,
    #[serde(rename = "grill")]
    Grill,
    #[serde(rename = "grill-np")]
    GrillNp,
    #[serde(rename = "patmat")]
    PatMat,
    #[serde(rename = "patmat-np")]
    PatMatNp,
    #[serde(rename = "topmean")]
    TopMean,
    #[serde(rename = "topmean-np")]
    TopMeanNp,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::TopPush,
        Method::TopPushK,
        Method::Grill,
        Method::GrillNp,
        Method::PatMat,
        Method::PatMatNp,
        Method::TopMean,
        Method::TopMeanNp,
    ];

    pub fn token(self) -> &'static str {
        match self {
            Method::TopPush => "toppush",
            Method::TopPushK => "toppushk",
            Method::Grill => "grill",
            Method::GrillNp => "grill-np",
            Method::PatMat => "patmat",
            Method::PatMatNp => "patmat-np",
            Method::TopMean => "topmean",
            Method::TopMeanNp => "topmean-np",
        }
    }

    pub fn needs_k(self) -> bool {
        self == Method::TopPushK
    }

    pub fn needs_tau(self) -> bool {
        !matches!(self, Method::TopPush | Method::TopPushK)
    }

    pub fn needs_beta(self) -> bool {
        matches!(self, Method::PatMat | Method::PatMatNp)
    }

    /// Builds the rule, checking that the parameters this method needs are given.
    pub fn rule(self, k: Option<usize>, tau: Option<f64>, beta: Option<f64>) -> Result<ThresholdRule> {
        let need = |name: &str| Error::invalid(format!("method `{}` requires {name}", self.token()));
        let k = || k.ok_or_else(|| need("k"));
        let tau = || tau.ok_or_else(|| need("tau"));
        let beta = || beta.ok_or_else(|| need("beta"));
        let rule = match self {
            Method::TopPush => ThresholdRule::TopPush,
            Method::TopPushK => ThresholdRule::TopPushK { k: k()? },
            Method::Grill => ThresholdRule::Quantile { tau: tau()? },
            Method::GrillNp => ThresholdRule::QuantileNp { tau: tau()? },
            Method::PatMat => ThresholdRule::SurrogateQuantile {
                tau: tau()?,
                beta: beta()?,
            },
            Method::PatMatNp => ThresholdRule::SurrogateQuantileNp {
                tau: tau()?,
                beta: beta()?,
            },
            Method::TopMean => ThresholdRule::TopMean { tau: tau()? },
            Method::TopMeanNp => ThresholdRule::TopMeanNp { tau: tau()? },
        };
        rule.validate()?;
        Ok(rule)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.token() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method `{s}`")))
    }
}

/// How the threshold is computed from the scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThresholdRule {
    TopPush,
    TopPushK { k: usize },
    Quantile { tau: f64 },
    QuantileNp { tau: f64 },
    SurrogateQuantile { tau: f64, beta: f64 },
    SurrogateQuantileNp { tau: f64, beta: f64 },
    TopMean { tau: f64 },
    TopMeanNp { tau: f64 },
}

/// Which samples a threshold is computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleSet {
    All,
    Negatives,
}

impl ThresholdRule {
    pub fn method(&self) -> Method {
        match self {
            ThresholdRule::TopPush => Method::TopPush,
            ThresholdRule::TopPushK { .. } => Method::TopPushK,
            ThresholdRule::Quantile { .. } => Method::Grill,
            ThresholdRule::QuantileNp { .. } => Method::GrillNp,
            ThresholdRule::SurrogateQuantile { .. } => Method::PatMat,
            ThresholdRule::SurrogateQuantileNp { .. } => Method::PatMatNp,
            ThresholdRule::TopMean { .. } => Method::TopMean,
            ThresholdRule::TopMeanNp { .. } => Method::TopMeanNp,
        }
    }

    pub fn sample_set(&self) -> SampleSet {
        match self {
            ThresholdRule::Quantile { .. }
            | ThresholdRule::SurrogateQuantile { .. }
            | ThresholdRule::TopMean { .. } => SampleSet::All,
            _ => SampleSet::Negatives,
        }
    }

    pub fn tau(&self) -> Option<f64> {
        match *self {
            ThresholdRule::TopPush | ThresholdRule::TopPushK { .. } => None,
            ThresholdRule::Quantile { tau }
            | ThresholdRule::QuantileNp { tau }
            | ThresholdRule::SurrogateQuantile { tau, .. }
            | ThresholdRule::SurrogateQuantileNp { tau, .. }
            | ThresholdRule::TopMean { tau }
            | ThresholdRule::TopMeanNp { tau } => Some(tau),
        }
    }

    pub fn beta(&self) -> Option<f64> {
        match *self {
            ThresholdRule::SurrogateQuantile { beta, .. }
            | ThresholdRule::SurrogateQuantileNp { beta, .. } => Some(beta),
            _ => None,
        }
    }

    pub fn k(&self) -> Option<usize> {
        match *self {
            ThresholdRule::TopPush => Some(1),
            ThresholdRule::TopPushK { k } => Some(k),
            _ => None,
        }
    }

    /// True for the exact-quantile rules, whose objective also counts false positives.
    pub fn is_exact_quantile(&self) -> bool {
        matches!(self, ThresholdRule::Quantile { .. } | ThresholdRule::QuantileNp { .. })
    }

    /// `w -> t(w)` is convex for every rule except the exact quantiles.
    pub fn is_convex(&self) -> bool {
        !self.is_exact_quantile()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(tau) = self.tau() {
            if !(tau > 0.0 && tau < 1.0) {
                return Err(Error::invalid(format!("tau must lie in (0, 1), got {tau}")));
            }
        }
        if let Some(beta) = self.beta() {
            if !(beta > 0.0 && beta.is_finite()) {
                return Err(Error::invalid(format!("beta must be positive, got {beta}")));
            }
        }
        if let ThresholdRule::TopPushK { k: 0 } = self {
            return Err(Error::invalid("k must be positive"));
        }
        Ok(())
    }
}

impl fmt::Display for ThresholdRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.method())?;
        match *self {
            ThresholdRule::TopPush => Ok(()),
            ThresholdRule::TopPushK { k } => write!(f, "(k={k})"),
            ThresholdRule::SurrogateQuantile { tau, beta }
            | ThresholdRule::SurrogateQuantileNp { tau, beta } => write!(f, "(tau={tau}, beta={beta})"),
            ThresholdRule::Quantile { tau }
            | ThresholdRule::QuantileNp { tau }
            | ThresholdRule::TopMean { tau }
            | ThresholdRule::TopMeanNp { tau } => write!(f, "(tau={tau})"),
        }
    }
}

/// Threshold value, its gradient in `w`, and the samples it was determined by.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdResult {
    pub t: f64,
    pub grad_t: Vec<f64>,
    /// Dataset indices: the top-k set, the quantile-attaining sample, or the
    /// samples with a nonzero surrogate derivative.
    pub support: Vec<usize>,
}

/// Number of top samples for a fraction `tau` of `n`: `ceil(n tau)`.
///
/// Products within `1e-9` relative of an integer are rounded to it, so that
/// e.g. `0.07 * 100` counts 7 samples and not 8.
pub fn top_count(tau: f64, n: usize) -> usize {
    let x = tau * n as f64;
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

pub fn scores(w: &[f64], d: &Dataset) -> Result<Vec<f64>> {
    if w.len() != d.n_features() {
        return Err(Error::DimensionMismatch {
            expected: d.n_features(),
            found: w.len(),
        });
    }
    let z: Vec<f64> = d.rows().map(|x| dot(w, x)).collect();
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("scores".into()));
    }
    Ok(z)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Descending by value, ascending by index among equal values.
fn rank_order(values: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    }
}

/// Positions of the `k` largest values in rank order.
fn top_k_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    let cmp = rank_order(values);
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, &cmp);
        idx.truncate(k);
    }
    idx.sort_unstable_by(&cmp);
    idx
}

fn check_values(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("scores".into()));
    }
    Ok(())
}

/// Mean of the `k` largest values and their positions (ties go to the lowest index).
pub fn top_k_mean(values: &[f64], k: usize) -> Result<(f64, Vec<usize>)> {
    check_values(values)?;
    if k == 0 || k > values.len() {
        return Err(Error::invalid(format!(
            "k = {k} outside [1, {}]",
            values.len()
        )));
    }
    let support = top_k_indices(values, k);
    let mean = support.iter().map(|&i| values[i]).sum::<f64>() / k as f64;
    Ok((mean, support))
}

/// Position of the `ceil(n tau)`-th largest value.
pub fn exact_quantile_index(values: &[f64], tau: f64) -> Result<usize> {
    check_values(values)?;
    let k = top_count(tau, values.len());
    if k == 0 || k > values.len() {
        return Err(Error::invalid(format!(
            "ceil(n tau) = {k} outside [1, {}] (tau = {tau})",
            values.len()
        )));
    }
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.select_nth_unstable_by(k - 1, rank_order(values));
    Ok(idx[k - 1])
}

/// The largest `t` such that at least `ceil(n tau)` values are `>= t`.
pub fn exact_quantile(values: &[f64], tau: f64) -> Result<f64> {
    exact_quantile_index(values, tau).map(|i| values[i])
}

const BISECTION_ITERS: usize = 2000;

/// Solves `mean_i l(beta (z_i - t)) = tau` for `t`.
///
/// The left-hand side is non-increasing in `t`. For the hinge it is piecewise
/// linear with breakpoints `z_i + 1/beta`; sorting the scores and walking the
/// breakpoints from the top finds the linear piece holding the root, which is
/// then solved in closed form. Other losses fall back to bisection.
pub fn surrogate_quantile(values: &[f64], tau: f64, beta: f64, loss: SurrogateLoss) -> Result<f64> {
    check_values(values)?;
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::invalid(format!("tau must lie in (0, 1), got {tau}")));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::invalid(format!("beta must be positive, got {beta}")));
    }
    match loss {
        SurrogateLoss::Hinge => Ok(hinge_surrogate_quantile(values, tau, beta)),
        _ => bisect_surrogate_quantile(values, tau, beta, loss),
    }
}

fn hinge_surrogate_quantile(values: &[f64], tau: f64, beta: f64) -> f64 {
    let mut z = values.to_vec();
    z.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    let n = z.len();
    let target = n as f64 * tau;
    let mut sum = 0.0;
    for j in 1..=n {
        sum += z[j - 1];
        // With the top j samples active, the left-hand side (times n) at the
        // next breakpoint z_{j+1} + 1/beta equals beta * sum_{i<=j} (z_i - z_{j+1}).
        let root_in_piece = j == n || beta * (sum - j as f64 * z[j]) >= target;
        if root_in_piece {
            let jf = j as f64;
            return sum / jf + (1.0 - tau * (n as f64 / jf)) / beta;
        }
    }
    unreachable!("the last piece always holds the root")
}

fn bisect_surrogate_quantile(values: &[f64], tau: f64, beta: f64, loss: SurrogateLoss) -> Result<f64> {
    let n = values.len() as f64;
    let residual = |t: f64| values.iter().map(|&z| loss.value(beta * (z - t))).sum::<f64>() / n - tau;
    let tol = 1e-10 * tau.max(1.0);

    let zmin = values.iter().copied().fold(f64::INFINITY, f64::min);
    let zmax = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut lo = zmin - 1.0 / beta;
    let mut hi = zmax + 1.0 / beta;
    let mut width = 1.0 / beta;
    while residual(lo) < 0.0 {
        width *= 2.0;
        lo = zmin - width;
        if !lo.is_finite() {
            return Err(Error::NoConvergence(0));
        }
    }
    while residual(hi) > 0.0 {
        width *= 2.0;
        hi = zmax + width;
        if !hi.is_finite() {
            return Err(Error::NoConvergence(0));
        }
    }

    // bisect until the bracket cannot shrink, then check the residual
    for _ in 0..BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let r = residual(mid);
        if r == 0.0 {
            return Ok(mid);
        }
        if r > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (rlo, rhi) = (residual(lo), residual(hi));
    let (t, r) = if rlo.abs() <= rhi.abs() { (lo, rlo) } else { (hi, rhi) };
    if r.abs() <= tol {
        Ok(t)
    } else {
        Err(Error::NoConvergence(BISECTION_ITERS))
    }
}

/// Computes `t(w)` and `grad t(w)` on `d`.
pub fn threshold(rule: &ThresholdRule, w: &[f64], d: &Dataset, loss: SurrogateLoss) -> Result<ThresholdResult> {
    let z = scores(w, d)?;
    threshold_from_scores(rule, &z, d, loss)
}

/// Same as [`threshold`] with precomputed scores `z = X w`.
pub fn threshold_from_scores(
    rule: &ThresholdRule,
    z: &[f64],
    d: &Dataset,
    loss: SurrogateLoss,
) -> Result<ThresholdResult> {
    rule.validate()?;
    if z.len() != d.n() {
        return Err(Error::DimensionMismatch {
            expected: d.n(),
            found: z.len(),
        });
    }
    let all: Vec<usize>;
    let set: &[usize] = match rule.sample_set() {
        SampleSet::All => {
            all = (0..d.n()).collect();
            &all
        }
        SampleSet::Negatives => d.neg_idx(),
    };
    if set.is_empty() {
        return Err(match rule.sample_set() {
            SampleSet::All => Error::EmptyDataset,
            SampleSet::Negatives => Error::MissingClass("negative"),
        });
    }
    let values: Vec<f64> = set.iter().map(|&i| z[i]).collect();
    let m = d.n_features();

    match *rule {
        ThresholdRule::TopPush
        | ThresholdRule::TopPushK { .. }
        | ThresholdRule::TopMean { .. }
        | ThresholdRule::TopMeanNp { .. } => {
            let k = match *rule {
                ThresholdRule::TopPush => 1,
                ThresholdRule::TopPushK { k } => k,
                ThresholdRule::TopMean { tau } | ThresholdRule::TopMeanNp { tau } => top_count(tau, set.len()),
                _ => unreachable!(),
            };
            let (t, local) = top_k_mean(&values, k)?;
            let support: Vec<usize> = local.into_iter().map(|j| set[j]).collect();
            let mut grad_t = vec![0.0; m];
            for &i in &support {
                axpy(1.0, d.row(i), &mut grad_t);
            }
            grad_t.iter_mut().for_each(|g| *g /= k as f64);
            Ok(ThresholdResult { t, grad_t, support })
        }
        ThresholdRule::Quantile { tau } | ThresholdRule::QuantileNp { tau } => {
            let j = exact_quantile_index(&values, tau)?;
            Ok(ThresholdResult {
                t: values[j],
                grad_t: vec![0.0; m],
                support: vec![set[j]],
            })
        }
        ThresholdRule::SurrogateQuantile { tau, beta } | ThresholdRule::SurrogateQuantileNp { tau, beta } => {
            let t = surrogate_quantile(&values, tau, beta, loss)?;
            // Implicit differentiation of sum l(beta (z_i - t)) = n tau; the
            // beta factors cancel between numerator and denominator.
            let mut grad_t = vec![0.0; m];
            let mut denom = 0.0;
            let mut support = Vec::new();
            for (&i, &zi) in set.iter().zip(&values) {
                let weight = loss.deriv(beta * (zi - t));
                if weight > 0.0 {
                    axpy(weight, d.row(i), &mut grad_t);
                    denom += weight;
                    support.push(i);
                }
            }
            if denom <= 0.0 {
                return Err(Error::ZeroDenominator);
            }
            grad_t.iter_mut().for_each(|g| *g /= denom);
            Ok(ThresholdResult { t, grad_t, support })
        }
    }
}

#[inline]
pub(crate) fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(rows: &[[f64; 2]], labels: &[bool]) -> Dataset {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        Dataset::from_rows(&rows, labels.to_vec()).unwrap()
    }

    #[test]
    fn scores_basic() {
        let d = data(&[[2.0, 0.0], [0.5, -0.5]], &[false, true]);
        assert_eq!(scores(&[0.0, 0.0], &d).unwrap(), vec![0.0, 0.0]);
        assert_eq!(scores(&[1.0, 0.0], &d).unwrap()[0], 2.0);
        assert_eq!(scores(&[1.0, 1.0], &d).unwrap()[1], 0.0);
        assert!(matches!(scores(&[1.0], &d), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(scores(&[f64::MAX, f64::MAX], &d), Err(Error::NonFinite(_))));
    }

    #[test]
    fn top_k_mean_examples() {
        let (mean, mut support) = top_k_mean(&[0.5, 2.0, 1.0], 2).unwrap();
        support.sort_unstable();
        assert_eq!(mean, 1.5);
        assert_eq!(support, vec![1, 2]);
        assert_eq!(top_k_mean(&[0.5, 2.0, 1.0], 1).unwrap().0, 2.0);
        let (mean, support) = top_k_mean(&[1.0, 1.0, 1.0], 2).unwrap();
        assert_eq!(mean, 1.0);
        assert_eq!(support, vec![0, 1]);
        assert!(top_k_mean(&[1.0], 2).is_err());
        assert!(top_k_mean(&[1.0], 0).is_err());
    }

    #[test]
    fn signed_zero_ties_break_by_index() {
        let (_, support) = top_k_mean(&[0.0, -0.0, 0.0], 2).unwrap();
        assert_eq!(support, vec![0, 1]);
    }

    #[test]
    fn exact_quantile_examples() {
        // brute force: the largest candidate value v with #{z >= v} >= 2
        let values = [5.0, 4.0, 3.0, 2.0, 1.0];
        let brute = values
            .iter()
            .copied()
            .filter(|&v| values.iter().filter(|&&z| z >= v).count() >= 2)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(brute, 4.0);
        assert_eq!(exact_quantile(&values, 0.4).unwrap(), brute);
        assert_eq!(exact_quantile(&values, 0.2).unwrap(), 5.0);
        assert_eq!(exact_quantile(&values, 0.01).unwrap(), 5.0);
        assert_eq!(exact_quantile(&[3.0; 7], 0.5).unwrap(), 3.0);
        assert!(exact_quantile(&[], 0.5).is_err());
    }

    #[test]
    fn top_count_rounds_near_integers() {
        assert_eq!(top_count(0.07, 100), 7);
        assert_eq!(top_count(0.4, 5), 2);
        assert_eq!(top_count(0.41, 5), 3);
        assert_eq!(top_count(0.001, 10), 1);
        assert_eq!(top_count(0.05, 1001), 51);
    }

    #[test]
    fn surrogate_quantile_zero_scores() {
        let zeros = vec![0.0; 17];
        let t = surrogate_quantile(&zeros, 0.2, 0.1, SurrogateLoss::Hinge).unwrap();
        assert_eq!(t, (1.0 - 0.2) / 0.1);
        let t = surrogate_quantile(&zeros, 0.5, 1.0, SurrogateLoss::Hinge).unwrap();
        assert_eq!(t, 0.5);
    }

    #[test]
    fn surrogate_quantile_two_points() {
        // oracle: dense grid search for max(0, 2 - t) + max(0, -t) = 1
        let g = |t: f64| (2.0 - t).max(0.0) + (-t).max(0.0) - 1.0;
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=4_000_000 {
            let t = -2.0 + i as f64 * 1e-6;
            if g(t).abs() < best.0 {
                best = (g(t).abs(), t);
            }
        }
        assert!(best.0 < 1e-8);
        let t = surrogate_quantile(&[1.0, -1.0], 0.5, 1.0, SurrogateLoss::Hinge).unwrap();
        assert!((t - best.1).abs() < 1e-6);
        assert!((t - 1.0).abs() < 1e-15);
    }

    #[test]
    fn surrogate_quantile_quadratic_matches_residual() {
        let z = [0.3, -1.2, 2.5, 0.0, 0.7];
        let (tau, beta) = (0.3, 0.8);
        let t = surrogate_quantile(&z, tau, beta, SurrogateLoss::QuadraticHinge).unwrap();
        let mean = z.iter().map(|&v| SurrogateLoss::QuadraticHinge.value(beta * (v - t))).sum::<f64>() / 5.0;
        assert!((mean - tau).abs() <= 1e-10);
    }

    #[test]
    fn surrogate_quantile_rejects_bad_parameters() {
        assert!(surrogate_quantile(&[1.0], 0.0, 1.0, SurrogateLoss::Hinge).is_err());
        assert!(surrogate_quantile(&[1.0], 1.0, 1.0, SurrogateLoss::Hinge).is_err());
        assert!(surrogate_quantile(&[1.0], 0.5, 0.0, SurrogateLoss::Hinge).is_err());
    }

    #[test]
    fn toppush_is_toppushk_with_k_one() {
        let d = data(
            &[[0.1, 0.3], [2.0, -1.0], [0.5, 0.5], [-1.0, 2.0], [0.3, 0.1]],
            &[true, false, false, false, true],
        );
        let w = [0.7, -0.2];
        let a = threshold(&ThresholdRule::TopPush, &w, &d, SurrogateLoss::Hinge).unwrap();
        let b = threshold(&ThresholdRule::TopPushK { k: 1 }, &w, &d, SurrogateLoss::Hinge).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.support, vec![1]);
        assert_eq!(a.grad_t, vec![2.0, -1.0]);
    }

    #[test]
    fn toppushk_gradient_is_mean_of_support() {
        // negatives a, b, c scored 3, 1, 2 under w = (1, 0)
        let d = data(
            &[[3.0, 1.0], [1.0, 5.0], [2.0, -3.0], [9.0, 9.0]],
            &[false, false, false, true],
        );
        let r = threshold(&ThresholdRule::TopPushK { k: 2 }, &[1.0, 0.0], &d, SurrogateLoss::Hinge).unwrap();
        assert_eq!(r.t, 2.5);
        assert_eq!(r.grad_t, vec![2.5, -1.0]);
        assert_eq!(r.support, vec![0, 2]);
        assert!(threshold(&ThresholdRule::TopPushK { k: 4 }, &[1.0, 0.0], &d, SurrogateLoss::Hinge).is_err());
    }

    #[test]
    fn surrogate_quantile_at_zero_weights() {
        let d = crate::data::synth_example(20, 5).unwrap();
        let (tau, beta) = (0.05, 0.01);
        let rule = ThresholdRule::SurrogateQuantile { tau, beta };
        let r = threshold(&rule, &[0.0, 0.0], &d, SurrogateLoss::Hinge).unwrap();
        assert_eq!(r.t, (1.0 - tau) / beta);
        let n = d.n() as f64;
        let mean: Vec<f64> = (0..2).map(|j| d.rows().map(|x| x[j]).sum::<f64>() / n).collect();
        for j in 0..2 {
            assert!((r.grad_t[j] - mean[j]).abs() < 1e-12);
        }
        assert_eq!(r.support.len(), d.n());
    }

    #[test]
    fn toppush_on_synthetic_example() {
        let d = crate::data::synth_example(200, 1).unwrap();
        let r = threshold(&ThresholdRule::TopPush, &[1.0, 0.0], &d, SurrogateLoss::Hinge).unwrap();
        assert_eq!(r.t, 2.0);
        assert_eq!(r.support, vec![400]);
    }

    #[test]
    fn exact_quantile_gradient_is_zero() {
        let d = crate::data::synth_example(30, 1).unwrap();
        let r = threshold(&ThresholdRule::Quantile { tau: 0.1 }, &[1.0, 0.5], &d, SurrogateLoss::Hinge).unwrap();
        assert_eq!(r.grad_t, vec![0.0, 0.0]);
        assert_eq!(r.support.len(), 1);
        assert_eq!(scores(&[1.0, 0.5], &d).unwrap()[r.support[0]], r.t);
    }

    #[test]
    fn rule_validation() {
        assert!(ThresholdRule::TopMean { tau: 0.0 }.validate().is_err());
        assert!(ThresholdRule::TopMean { tau: 1.0 }.validate().is_err());
        assert!(ThresholdRule::TopPushK { k: 0 }.validate().is_err());
        assert!(ThresholdRule::SurrogateQuantile { tau: 0.1, beta: -1.0 }.validate().is_err());
        assert!(Method::PatMat.rule(None, Some(0.1), None).is_err());
        assert_eq!(
            Method::PatMat.rule(None, Some(0.1), Some(2.0)).unwrap(),
            ThresholdRule::SurrogateQuantile { tau: 0.1, beta: 2.0 }
        );
        for m in Method::ALL {
            assert_eq!(m.token().parse::<Method>().unwrap(), m);
        }
        assert!("svm".parse::<Method>().is_err());
    }

    #[test]
    fn rule_serializes_with_kind_tag() {
        let rule = ThresholdRule::SurrogateQuantileNp { tau: 0.01, beta: 0.1 };
        let json = serde_json::to_string(&rule).unwrap();
        assert_eq!(json, r#"{"kind":"surrogate_quantile_np","tau":0.01,"beta":0.1}"#);
        assert_eq!(serde_json::from_str::<ThresholdRule>(&json).unwrap(), rule);
    }

    #[test]
    fn np_quantile_can_equal_quantile_when_positives_lead() {
        // one positive and one negative in the top 10%: the 2nd largest score
        // overall is the largest negative, so the two quantiles coincide
        let mut rows = vec![[5.0, 0.0], [3.0, 0.0]];
        let mut labels = vec![true, false];
        for i in 0..9 {
            rows.push([-(i as f64) - 1.0, 0.0]);
            rows.push([-(i as f64) - 1.5, 0.0]);
            labels.extend([true, false]);
        }
        let d = data(&rows, &labels);
        let w = [1.0, 0.0];
        let q = threshold(&ThresholdRule::Quantile { tau: 0.1 }, &w, &d, SurrogateLoss::Hinge).unwrap();
        let q_np = threshold(&ThresholdRule::QuantileNp { tau: 0.1 }, &w, &d, SurrogateLoss::Hinge).unwrap();
        assert_eq!(q.t, 3.0);
        assert_eq!(q_np.t, 3.0);
    }
}
