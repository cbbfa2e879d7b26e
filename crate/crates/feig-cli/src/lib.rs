//! Library side of the `feig` binary: file exporters and the
//! verification suites, shared with the integration tests.

pub mod checks;
pub mod export;
