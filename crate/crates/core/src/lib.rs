//! Linear classifiers for accuracy at the top.
//!
//! Every method minimizes the surrogate false-negative rate above a threshold
//! `t(w)` that depends on the weights, plus `lambda/2 |w|^2`:
//!
//! | token        | threshold                                         |
//! |--------------|---------------------------------------------------|
//! | `toppush`    | largest negative score                            |
//! | `toppushk`   | mean of the `k` largest negative scores           |
//! | `grill`      | top `tau`-quantile of all scores                  |
//! | `grill-np`   | top `tau`-quantile of negative scores             |
//! | `patmat`     | surrogate top `tau`-quantile of all scores        |
//! | `patmat-np`  | surrogate top `tau`-quantile of negative scores   |
//! | `topmean`    | mean of the top `tau` fraction of all scores      |
//! | `topmean-np` | mean of the top `tau` fraction of negative scores |
//!
//! ```
//! use ontop::{synth_example, train, ObjectiveSpec, SurrogateLoss, ThresholdRule, TrainConfig};
//!
//! let d = synth_example(200, 0).unwrap();
//! let rule = ThresholdRule::SurrogateQuantile { tau: 0.05, beta: 0.01 };
//! let spec = ObjectiveSpec::new(rule, SurrogateLoss::Hinge, 0.0).unwrap();
//! let cfg = TrainConfig { iterations: 100, ..TrainConfig::default() };
//! let model = train(&spec, &d, &cfg).unwrap();
//! assert!(model.w[0] > 0.0);
//! ```

pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod objective;
pub mod solver;
pub mod surrogate;
pub mod threshold;

pub use data::{
    drop_positives, load_csv, load_libsvm, make_minibatches, split, synth_example, Dataset, MinibatchPlan,
    SplitSpec,
};
pub use error::{Error, Result};
pub use eval::{counts, criterion, pr_curve, precision_recall, ptau_curve, Counts, Criterion, EvalReport};
pub use objective::{evaluate, gradient, objective, surrogate_counts, Evaluation, ObjectiveSpec};
pub use solver::{train, AdamConfig, Init, Model, TrainConfig, Trainer};
pub use surrogate::SurrogateLoss;
pub use threshold::{exact_quantile, surrogate_quantile, threshold, top_k_mean, Method, ThresholdResult, ThresholdRule};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
