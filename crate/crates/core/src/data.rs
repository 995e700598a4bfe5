//! Datasets with binary labels, file loaders, splitting and minibatching.
//!
//! Features are stored densely in row-major order. A [`Dataset`] is immutable
//! once built; every transformation returns a new value.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feature matrix with binary labels and the positive/negative partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    n_features: usize,
    labels: Vec<bool>,
    pos_idx: Vec<usize>,
    neg_idx: Vec<usize>,
}

impl Dataset {
    /// Builds a dataset from a row-major feature buffer.
    pub fn new(features: Vec<f64>, n_features: usize, labels: Vec<bool>) -> Result<Self> {
        if features.len() != labels.len() * n_features {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * n_features,
                found: features.len(),
            });
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            let (row, col) = (pos / n_features.max(1), pos % n_features.max(1));
            return Err(Error::NonFinite(format!("feature ({row}, {col})")));
        }
        let pos_idx = (0..labels.len()).filter(|&i| labels[i]).collect();
        let neg_idx = (0..labels.len()).filter(|&i| !labels[i]).collect();
        Ok(Dataset {
            features,
            n_features,
            labels,
            pos_idx,
            neg_idx,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<bool>) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        let mut features = Vec::with_capacity(rows.len() * m);
        for row in rows {
            if row.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: row.len(),
                });
            }
            features.extend_from_slice(row);
        }
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                found: labels.len(),
            });
        }
        Dataset::new(features, m, labels)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn n_pos(&self) -> usize {
        self.pos_idx.len()
    }

    pub fn n_neg(&self) -> usize {
        self.neg_idx.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n()).map(move |i| self.row(i))
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn label(&self, i: usize) -> bool {
        self.labels[i]
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn pos_idx(&self) -> &[usize] {
        &self.pos_idx
    }

    pub fn neg_idx(&self) -> &[usize] {
        &self.neg_idx
    }

    /// Checks the conditions every training objective relies on.
    pub fn check_trainable(&self) -> Result<()> {
        if self.n() == 0 {
            return Err(Error::EmptyDataset);
        }
        if self.n_pos() == 0 {
            return Err(Error::MissingClass("positive"));
        }
        if self.n_neg() == 0 {
            return Err(Error::MissingClass("negative"));
        }
        Ok(())
    }

    /// Copies the given rows, in the given order, into a new dataset.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let m = self.n_features;
        let mut features = Vec::with_capacity(idx.len() * m);
        let mut labels = Vec::with_capacity(idx.len());
        for &i in idx {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        let pos_idx = (0..labels.len()).filter(|&i| labels[i]).collect();
        let neg_idx = (0..labels.len()).filter(|&i| !labels[i]).collect();
        Dataset {
            features,
            n_features: m,
            labels,
            pos_idx,
            neg_idx,
        }
    }

    /// Writes the dataset as CSV with columns `x1..xm,y` and labels `1`/`0`.
    ///
    /// Values are printed with the shortest representation that parses back
    /// to the same `f64`, so [`load_csv`] restores the data bit for bit.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            let header: Vec<String> = (1..=self.n_features)
                .map(|j| format!("x{j}"))
                .chain(std::iter::once("y".to_string()))
                .collect();
            writeln!(out, "{}", header.join(","))?;
            for i in 0..self.n() {
                for v in self.row(i) {
                    write!(out, "{v},")?;
                }
                writeln!(out, "{}", u8::from(self.labels[i]))?;
            }
            out.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }
}

/// Loads a comma-separated file with a header row.
///
/// Every column except `label_column` becomes a feature, in file order. A
/// sample is positive iff its label cell equals `positive_value` after
/// trimming whitespace. The label column may hold at most two distinct values.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str, positive_value: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let headers = reader.headers()?.clone();
    let label_col = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::invalid(format!("label column `{label_column}` not in header")))?;
    let m = headers.len() - 1;

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut negative_token: Option<String> = None;
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        // header is line 1
        let line = row + 2;
        for (j, cell) in record.iter().enumerate() {
            if j == label_col {
                let positive = cell == positive_value;
                if !positive {
                    match &negative_token {
                        None => negative_token = Some(cell.to_string()),
                        Some(tok) if tok != cell => {
                            return Err(Error::Parse {
                                line,
                                msg: format!(
                                    "unknown label `{cell}` (positive is `{positive_value}`, negative is `{tok}`)"
                                ),
                            })
                        }
                        Some(_) => {}
                    }
                }
                labels.push(positive);
                continue;
            }
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("non-numeric feature `{cell}` in column `{}`", &headers[j]),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    line,
                    msg: format!("non-finite feature `{cell}` in column `{}`", &headers[j]),
                });
            }
            features.push(value);
        }
    }

    let data = Dataset::new(features, m, labels)?;
    warn_if_one_class(&data, path);
    Ok(data)
}

/// Loads the sparse `label idx:val ...` format with 1-based, strictly
/// increasing indices. Labels `+1`/`1` are positive, `-1`/`0` negative.
pub fn load_libsvm(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let data = parse_libsvm(&text)?;
    warn_if_one_class(&data, path);
    Ok(data)
}

pub(crate) fn parse_libsvm(text: &str) -> Result<Dataset> {
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut m = 0;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().unwrap_or_default();
        let positive = match label_tok.parse::<f64>() {
            Ok(v) if v == 1.0 => true,
            Ok(v) if v == -1.0 || v == 0.0 => false,
            _ => {
                return Err(Error::Parse {
                    line,
                    msg: format!("bad label `{label_tok}`"),
                })
            }
        };

        let mut entries = Vec::new();
        let mut last = 0;
        for tok in tokens {
            let malformed = || Error::Parse {
                line,
                msg: format!("malformed token `{tok}`"),
            };
            let (idx, val) = tok.split_once(':').ok_or_else(malformed)?;
            let idx: usize = idx.parse().map_err(|_| malformed())?;
            let val: f64 = val.parse().map_err(|_| malformed())?;
            if idx == 0 {
                return Err(Error::Parse {
                    line,
                    msg: "indices are 1-based".into(),
                });
            }
            if idx <= last {
                return Err(Error::Parse {
                    line,
                    msg: format!("non-increasing index {idx} after {last}"),
                });
            }
            if !val.is_finite() {
                return Err(Error::Parse {
                    line,
                    msg: format!("non-finite value `{tok}`"),
                });
            }
            last = idx;
            entries.push((idx - 1, val));
        }
        m = m.max(last);
        rows.push(entries);
        labels.push(positive);
    }

    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut features = vec![0.0; rows.len() * m];
    for (i, entries) in rows.iter().enumerate() {
        for &(j, v) in entries {
            features[i * m + j] = v;
        }
    }
    Dataset::new(features, m, labels)
}

fn warn_if_one_class(data: &Dataset, path: &Path) {
    if data.n() > 0 && (data.n_pos() == 0 || data.n_neg() == 0) {
        log::warn!(
            "{} contains a single class ({} positive, {} negative)",
            path.display(),
            data.n_pos(),
            data.n_neg()
        );
    }
}

/// Train/validation/test fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub valid_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
    #[serde(default)]
    pub stratified: bool,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let fracs = [self.train_frac, self.valid_frac, self.test_frac];
        if fracs.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::invalid("split fractions must lie in [0, 1]"));
        }
        if (fracs.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("split fractions must sum to 1"));
        }
        Ok(())
    }
}

/// Splits `n` into parts proportional to `fracs` using largest-remainder
/// rounding. Ties in the remainder go to the earlier part.
pub fn largest_remainder(n: usize, fracs: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = fracs.iter().map(|f| f * n as f64).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..fracs.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &part in order.iter().take(n.saturating_sub(assigned)) {
        sizes[part] += 1;
    }
    sizes
}

/// Deterministically splits into (train, validation, test).
///
/// Rows keep their original relative order inside each part.
pub fn split(d: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    let parts = split_indices(d, spec)?;
    Ok((d.subset(&parts[0]), d.subset(&parts[1]), d.subset(&parts[2])))
}

pub fn split_indices(d: &Dataset, spec: &SplitSpec) -> Result<[Vec<usize>; 3]> {
    spec.validate()?;
    let fracs = [spec.train_frac, spec.valid_frac, spec.test_frac];
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut parts: [Vec<usize>; 3] = Default::default();

    let groups: Vec<Vec<usize>> = if spec.stratified {
        vec![d.pos_idx().to_vec(), d.neg_idx().to_vec()]
    } else {
        vec![(0..d.n()).collect()]
    };
    for mut group in groups {
        group.shuffle(&mut rng);
        let sizes = largest_remainder(group.len(), &fracs);
        let mut rest = group.as_slice();
        for (part, size) in parts.iter_mut().zip(sizes) {
            let (head, tail) = rest.split_at(size);
            part.extend_from_slice(head);
            rest = tail;
        }
    }

    const NAMES: [&str; 3] = ["train", "validation", "test"];
    for (part, name) in parts.iter_mut().zip(NAMES) {
        if part.is_empty() {
            return Err(Error::EmptySplitPart(name));
        }
        part.sort_unstable();
    }
    Ok(parts)
}

/// Partition of the sample indices into minibatches, reshuffled per epoch.
///
/// Each epoch shuffles positives and negatives separately, lays them out
/// positives first and deals the sequence round-robin into the chunks. Chunk
/// sizes therefore differ by at most one and every chunk receives either
/// `floor(n_pos / b)` or `ceil(n_pos / b)` positives, so a plan that is valid
/// for epoch 0 stays valid for every later epoch.
#[derive(Debug, Clone)]
pub struct MinibatchPlan {
    pub n_minibatch: usize,
    pub seed: u64,
    pub schedule: Vec<Vec<usize>>,
    pos_idx: Vec<usize>,
    neg_idx: Vec<usize>,
}

impl MinibatchPlan {
    pub fn n_chunks(&self) -> usize {
        self.n_minibatch
    }

    /// Rebuilds `schedule` for the given epoch from a seed-derived stream.
    pub fn reshuffle(&mut self, epoch: u64) {
        self.schedule = deal(&self.pos_idx, &self.neg_idx, self.n_minibatch, self.seed, epoch);
    }
}

fn deal(pos: &[usize], neg: &[usize], chunks: usize, seed: u64, epoch: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    let mut pos = pos.to_vec();
    let mut neg = neg.to_vec();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut schedule = vec![Vec::new(); chunks];
    for (i, idx) in pos.into_iter().chain(neg).enumerate() {
        schedule[i % chunks].push(idx);
    }
    schedule.shuffle(&mut rng);
    schedule
}

/// Builds the minibatch plan and checks that every chunk has both classes.
pub fn make_minibatches(d: &Dataset, n_minibatch: usize, seed: u64) -> Result<MinibatchPlan> {
    if n_minibatch == 0 || n_minibatch > d.n() {
        return Err(Error::invalid(format!(
            "n_minibatch must lie in [1, {}], got {n_minibatch}",
            d.n()
        )));
    }
    let schedule = deal(d.pos_idx(), d.neg_idx(), n_minibatch, seed, 0);
    if let Some(chunk) = schedule.iter().position(|c| {
        let pos = c.iter().filter(|&&i| d.label(i)).count();
        pos == 0 || pos == c.len()
    }) {
        return Err(Error::OneClassMinibatch { chunk });
    }
    Ok(MinibatchPlan {
        n_minibatch,
        seed,
        schedule,
        pos_idx: d.pos_idx().to_vec(),
        neg_idx: d.neg_idx().to_vec(),
    })
}

/// The two-dimensional example with a single outlying negative.
///
/// Rows `0..n` are negatives uniform on `[-1,0]x[-1,1]`, rows `n..2n` are
/// positives uniform on `[0,1]x[-1,1]` and row `2n` is the negative `(2, 0)`.
pub fn synth_example(n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::invalid("synth_example needs n >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity((2 * n + 1) * 2);
    let mut labels = Vec::with_capacity(2 * n + 1);
    for _ in 0..n {
        features.push(rng.gen_range(-1.0..=0.0));
        features.push(rng.gen_range(-1.0..=1.0));
        labels.push(false);
    }
    for _ in 0..n {
        features.push(rng.gen_range(0.0..=1.0));
        features.push(rng.gen_range(-1.0..=1.0));
        labels.push(true);
    }
    features.extend_from_slice(&[2.0, 0.0]);
    labels.push(false);
    Dataset::new(features, 2, labels)
}

/// Removes `floor(drop_frac * n_pos)` uniformly chosen positives.
///
/// Meant for training and validation parts only; the test part should keep
/// all of its positives.
pub fn drop_positives(d: &Dataset, drop_frac: f64, seed: u64) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&drop_frac) {
        return Err(Error::invalid("drop_frac must lie in [0, 1]"));
    }
    if d.n_pos() == 0 {
        return Err(Error::MissingClass("positive"));
    }
    let n_drop = (drop_frac * d.n_pos() as f64).floor() as usize;
    if n_drop >= d.n_pos() {
        return Err(Error::invalid("dropping would remove every positive sample"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dropped: std::collections::HashSet<usize> = d
        .pos_idx()
        .choose_multiple(&mut rng, n_drop)
        .copied()
        .collect();
    let keep: Vec<usize> = (0..d.n()).filter(|i| !dropped.contains(i)).collect();
    Ok(d.subset(&keep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn toy(n: usize, n_pos: usize) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
        let labels = (0..n).map(|i| i < n_pos).collect();
        Dataset::from_rows(&rows, labels).unwrap()
    }

    #[test]
    fn csv_three_rows() {
        let f = write_tmp("a,y,b\n1,1,2\n3,0,4\n5,1,6\n");
        let d = load_csv(f.path(), "y", "1").unwrap();
        assert_eq!(d.n(), 3);
        assert_eq!(d.n_pos(), 2);
        assert_eq!(d.n_features(), 2);
        assert_eq!(d.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn csv_token_labels() {
        let f = write_tmp("x,label\n0.5,yes\n1.5,no\n2.5,yes\n");
        let d = load_csv(f.path(), "label", "yes").unwrap();
        assert_eq!(d.labels(), &[true, false, true]);
    }

    #[test]
    fn csv_errors() {
        let f = write_tmp("x,y\nNaN,1\n");
        assert!(matches!(load_csv(f.path(), "y", "1"), Err(Error::Parse { .. })));
        let f = write_tmp("x,y\nabc,1\n");
        assert!(matches!(load_csv(f.path(), "y", "1"), Err(Error::Parse { .. })));
        let f = write_tmp("x,y\n1,1\n2,0\n3,2\n");
        assert!(matches!(load_csv(f.path(), "y", "1"), Err(Error::Parse { line: 4, .. })));
        let f = write_tmp("x,y\n1,1\n");
        assert!(load_csv(f.path(), "z", "1").is_err());
        assert!(matches!(load_csv("/nonexistent/file.csv", "y", "1"), Err(Error::Io { .. })));
        let f = write_tmp("x,y\n1,1\n2\n");
        assert!(load_csv(f.path(), "y", "1").is_err());
    }

    #[test]
    fn csv_one_class_is_not_an_error() {
        let f = write_tmp("x,y\n1,1\n2,1\n");
        let d = load_csv(f.path(), "y", "1").unwrap();
        assert_eq!(d.n_neg(), 0);
        assert!(d.check_trainable().is_err());
    }

    #[test]
    fn libsvm_format() {
        let d = parse_libsvm("+1 1:0.5 3:2.0\n-1 2:1\n").unwrap();
        assert_eq!(d.n_features(), 3);
        assert_eq!(d.row(0), &[0.5, 0.0, 2.0]);
        assert_eq!(d.row(1), &[0.0, 1.0, 0.0]);
        assert_eq!(d.labels(), &[true, false]);

        let d = parse_libsvm("1 1:1\n0 1:2\n").unwrap();
        assert_eq!(d.labels(), &[true, false]);
    }

    #[test]
    fn libsvm_errors() {
        assert!(matches!(parse_libsvm("1 3:1 2:1\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_libsvm("1 3:1 3:1\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse_libsvm("1 a:1\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse_libsvm("1 1\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse_libsvm("1 0:1\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse_libsvm("2 1:1\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse_libsvm(""), Err(Error::EmptyDataset)));
        assert!(matches!(parse_libsvm("\n# only a comment\n"), Err(Error::EmptyDataset)));
    }

    #[test]
    fn split_sizes_use_largest_remainder() {
        let d = toy(10, 4);
        let spec = SplitSpec {
            train_frac: 0.5,
            valid_frac: 0.25,
            test_frac: 0.25,
            seed: 7,
            stratified: false,
        };
        let (a, b, c) = split(&d, &spec).unwrap();
        assert_eq!((a.n(), b.n(), c.n()), (5, 3, 2));
        let again = split(&d, &spec).unwrap();
        assert_eq!(a, again.0);
        assert_eq!(b, again.1);
        assert_eq!(c, again.2);
    }

    #[test]
    fn stratified_split_positive_counts() {
        // positives 4 -> (2, 1, 1); negatives 6 -> (3, 1.5, 1.5) -> (3, 2, 1)
        let d = toy(10, 4);
        let spec = SplitSpec {
            train_frac: 0.5,
            valid_frac: 0.25,
            test_frac: 0.25,
            seed: 7,
            stratified: true,
        };
        let (a, b, c) = split(&d, &spec).unwrap();
        assert_eq!(a.n_pos(), 2);
        assert_eq!((b.n_pos(), c.n_pos()), (1, 1));
        assert_eq!((a.n(), b.n(), c.n()), (5, 3, 2));
    }

    #[test]
    fn split_rejects_empty_parts_and_bad_fractions() {
        let d = toy(2, 1);
        let spec = SplitSpec {
            train_frac: 0.5,
            valid_frac: 0.25,
            test_frac: 0.25,
            seed: 0,
            stratified: false,
        };
        assert!(matches!(split(&d, &spec), Err(Error::EmptySplitPart(_))));
        let bad = SplitSpec {
            train_frac: 0.5,
            valid_frac: 0.5,
            test_frac: 0.5,
            ..spec
        };
        assert!(split(&toy(10, 5), &bad).is_err());
    }

    #[test]
    fn minibatch_sizes() {
        let d = toy(10, 5);
        let plan = make_minibatches(&d, 2, 1).unwrap();
        let sizes: Vec<usize> = plan.schedule.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![5, 5]);

        let plan = make_minibatches(&d, 3, 1).unwrap();
        let mut sizes: Vec<usize> = plan.schedule.iter().map(Vec::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![3, 3, 4]);
    }

    #[test]
    fn singleton_minibatches_are_rejected() {
        let d = toy(10, 5);
        assert!(matches!(
            make_minibatches(&d, 10, 0),
            Err(Error::OneClassMinibatch { .. })
        ));
        assert!(make_minibatches(&d, 0, 0).is_err());
        assert!(make_minibatches(&d, 11, 0).is_err());
    }

    #[test]
    fn minibatches_reshuffle_per_epoch() {
        let d = toy(40, 10);
        let mut plan = make_minibatches(&d, 4, 3).unwrap();
        let first = plan.schedule.clone();
        plan.reshuffle(1);
        assert_ne!(first, plan.schedule);
        plan.reshuffle(0);
        assert_eq!(first, plan.schedule);
    }

    #[test]
    fn synth_example_layout() {
        let d = synth_example(1000, 42).unwrap();
        assert_eq!(d.n(), 2001);
        assert_eq!(d.n_pos(), 1000);
        assert_eq!(d.n_neg(), 1001);
        assert_eq!(d.row(2000), &[2.0, 0.0]);
        assert!(!d.label(2000));
        for &i in d.pos_idx() {
            let x = d.row(i);
            assert!((0.0..=1.0).contains(&x[0]) && (-1.0..=1.0).contains(&x[1]));
        }
        for &i in &d.neg_idx()[..1000] {
            let x = d.row(i);
            assert!((-1.0..=0.0).contains(&x[0]) && (-1.0..=1.0).contains(&x[1]));
        }
        let small = synth_example(1, 9).unwrap();
        assert_eq!(small.n(), 3);
        assert_eq!(small, synth_example(1, 9).unwrap());
        assert!(synth_example(0, 0).is_err());
    }

    #[test]
    fn drop_positives_counts() {
        let d = toy(20, 10);
        assert_eq!(drop_positives(&d, 0.5, 1).unwrap().n_pos(), 5);
        assert_eq!(drop_positives(&d, 0.5, 1).unwrap().n_neg(), 10);
        assert_eq!(drop_positives(&d, 0.0, 1).unwrap(), d);
        assert!(drop_positives(&d, 1.0, 1).is_err());
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let d = synth_example(50, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        d.write_csv(&path).unwrap();
        let back = load_csv(&path, "y", "1").unwrap();
        assert_eq!(d, back);
    }

    proptest! {
        #[test]
        fn split_is_a_partition(n in 3usize..200, n_pos_frac in 0.0f64..1.0, seed: u64, stratified: bool) {
            let n_pos = ((n as f64) * n_pos_frac) as usize;
            let d = toy(n, n_pos);
            let spec = SplitSpec { train_frac: 0.6, valid_frac: 0.2, test_frac: 0.2, seed, stratified };
            if let Ok(parts) = split_indices(&d, &spec) {
                let mut all: Vec<usize> = parts.iter().flatten().copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
                if stratified {
                    let src = d.n_pos() as f64 / n as f64;
                    for p in &parts {
                        let pos = p.iter().filter(|&&i| d.label(i)).count() as f64;
                        prop_assert!((pos - src * p.len() as f64).abs() <= 1.0 + 1e-9);
                    }
                }
            }
        }

        #[test]
        fn minibatches_partition(n in 4usize..300, b in 1usize..8, seed: u64, epoch in 0u64..5) {
            let d = toy(n, n / 2);
            if let Ok(mut plan) = make_minibatches(&d, b, seed) {
                plan.reshuffle(epoch);
                let mut all: Vec<usize> = plan.schedule.iter().flatten().copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
                let sizes: Vec<usize> = plan.schedule.iter().map(Vec::len).collect();
                prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
                for c in &plan.schedule {
                    let pos = c.iter().filter(|&&i| d.label(i)).count();
                    prop_assert!(pos > 0 && pos < c.len());
                }
            }
        }
    }
}
