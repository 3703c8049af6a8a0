//! Datasets, preprocessing and the labeled/unlabeled/test pool.

mod dataset;
mod pool;
mod preprocess;

pub use dataset::{load_csv, make_two_gaussians, CsvOptions, Dataset, LabelColumn};
pub use pool::{evaluate_accuracy, initialize_pool, LabeledView, Pool, UnlabeledView};
pub use preprocess::{Preprocessor, Scheme};
