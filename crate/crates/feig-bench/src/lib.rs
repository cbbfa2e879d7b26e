pub use feig_core as core;
