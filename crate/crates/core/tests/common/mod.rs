//! Checks shared by the focused test files and the acceptance run.
#![allow(dead_code)]

pub mod dsp;
pub mod lifecycle;
pub mod protocol;
pub mod scene;
pub mod timing;

use proptest::strategy::Strategy;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

/// `Ok` carries a one-line summary, `Err` the reason for failing.
pub type Check = Result<String, String>;

/// Runs a property with a fixed seed so every run sees the same cases.
pub fn prop<S>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String>
where
    S: Strategy,
    S::Value: std::fmt::Debug,
{
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner =
        TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

/// Runs named sub-checks, stopping at the first failure.
pub fn all(parts: Vec<(&str, Box<dyn FnOnce() -> Check>)>) -> Check {
    let mut notes = Vec::new();
    for (name, f) in parts {
        match f() {
            Ok(s) if s.is_empty() => notes.push(name.to_string()),
            Ok(s) => notes.push(format!("{name}: {s}")),
            Err(e) => return Err(format!("{name}: {e}")),
        }
    }
    Ok(notes.join("; "))
}

pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}
