//! Helpers shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

pub mod codec;
pub mod net;
pub mod oracle;
pub mod vectors;

/// Runs `f` over `cases` values drawn from `strategy` with a fixed seed.
pub fn check_cases<S>(cases: u32, strategy: S, f: impl Fn(S::Value) -> Result<(), proptest::test_runner::TestCaseError>) -> Result<u32, String>
where
    S: proptest::strategy::Strategy,
    S::Value: std::fmt::Debug,
{
    use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    let rng = TestRng::from_seed(RngAlgorithm::ChaCha, &[7; 32]);
    let mut runner = TestRunner::new_with_rng(config, rng);
    runner.run(&strategy, f).map(|_| cases).map_err(|e| e.to_string())
}
