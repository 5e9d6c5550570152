//! Document-level parallelism with a bounded number of in-flight requests.

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};
use toxprompt_core::backend::LanguageModel;
use toxprompt_core::classifiers::{ClassifyError, Decision, Method};
use toxprompt_core::corpus::Document;
use toxprompt_core::evaluation::DocumentRunner;

/// Classifies documents on at most `max_inflight` worker threads. Results
/// come back in input order.
pub struct ParallelRunner {
    pool: ThreadPool,
}

impl ParallelRunner {
    pub fn new(max_inflight: usize) -> Self {
        let pool = ThreadPoolBuilder::new()
            .num_threads(max_inflight.max(1))
            .build()
            .expect("thread pool builds");
        ParallelRunner { pool }
    }

    pub fn max_inflight(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl DocumentRunner for ParallelRunner {
    fn classify_all(
        &self,
        docs: &[Document],
        method: &Method,
        model: &dyn LanguageModel,
    ) -> Vec<Result<Decision, ClassifyError>> {
        self.pool
            .install(|| docs.par_iter().map(|d| method.classify(d, model)).collect())
    }
}
