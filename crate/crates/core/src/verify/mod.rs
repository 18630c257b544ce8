//! Monte-Carlo and analytic verification suites. Each suite returns a
//! [`SuiteVerdict`] whose `measured` map is enough to recompute the verdict.

mod random;
mod trained;

pub use random::{
    appendix_a_suite, corollary1_sweep, corollary1_width, singular_value_bounds, theorem1_constants, theorem1_montecarlo, theorem1_rhs,
    theorem1_success_floor, AppendixAConfig, Corollary1Config, Corollary1Sweep, SweepRow, Theorem1Config,
    Theorem1Constants,
};
pub use trained::{
    corollary2_suite, proposition_suite, theorem2_suite, Corollary2Config, DatasetSource, PropositionConfig,
    ProgramSource, Theorem2Config,
};

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Statistical slack, in binomial standard errors at the null rate.
pub const SIGMA_SLACK: f64 = 3.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteVerdict {
    pub name: String,
    pub passed: bool,
    /// The analytic threshold lies outside `[0, 1]`, so the check cannot fail.
    pub vacuous: bool,
    /// The suite could not reach the regime its check refers to.
    pub inconclusive: bool,
    pub flags: Vec<String>,
    pub measured: BTreeMap<String, f64>,
    pub threshold: BTreeMap<String, f64>,
    pub seed: u64,
    pub runtime_seconds: f64,
}

impl SuiteVerdict {
    fn new(name: &str, seed: u64) -> Self {
        Self {
            name: name.to_string(),
            passed: false,
            vacuous: false,
            inconclusive: false,
            flags: Vec::new(),
            measured: BTreeMap::new(),
            threshold: BTreeMap::new(),
            seed,
            runtime_seconds: 0.0,
        }
    }

    fn measure(&mut self, key: impl Into<String>, value: f64) {
        self.measured.insert(key.into(), value);
    }

    fn limit(&mut self, key: impl Into<String>, value: f64) {
        self.threshold.insert(key.into(), value);
    }

    fn flag(&mut self, flag: impl Into<String>) {
        self.flags.push(flag.into());
    }

    fn finish(mut self, started: Instant) -> Self {
        debug_assert!(
            self.threshold.keys().all(|k| self.measured.contains_key(k)),
            "threshold without a measured counterpart in {}",
            self.name
        );
        self.runtime_seconds = started.elapsed().as_secs_f64();
        self
    }

    /// The verdict with `runtime_seconds` zeroed, for replay comparisons.
    pub fn without_runtime(&self) -> Self {
        Self {
            runtime_seconds: 0.0,
            ..self.clone()
        }
    }
}

/// A report file body: the resolved configuration first, then the result.
#[derive(Serialize)]
pub struct Report<'a, C: Serialize, R: Serialize> {
    pub config: &'a C,
    pub result: &'a R,
}

pub fn report_json<C: Serialize, R: Serialize>(config: &C, result: &R) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&Report { config, result })?;
    s.push('\n');
    Ok(s)
}

/// Runs `f(0..n)` on `workers` threads; output order is the trial order.
pub(crate) fn run_trials<T, F>(workers: usize, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if workers <= 1 {
        return Ok((0..n).map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(|| (0..n).into_par_iter().map(f).collect()))
}

fn check_positive(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        Err(Error::InvalidArgument(format!("{name} must be at least 1")))
    } else {
        Ok(())
    }
}
