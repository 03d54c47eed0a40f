//! Experiments behind the `hj` command: configuration, the per-subcommand
//! pipelines, randomized property suites and the acceptance suite.

pub mod acceptance;
pub mod config;
pub mod experiments;
pub mod properties;

use hj_core::Error;

/// Exit status for a numerical failure such as divergence where
/// convergence was expected.
pub const EXIT_NUMERICAL: i32 = 3;
/// Exit status when `--check` finds a failed assertion.
pub const EXIT_ASSERTION: i32 = 2;
/// Exit status for bad usage or configuration.
pub const EXIT_USAGE: i32 = 1;

pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Diverged { .. }
        | Error::NoSolution { .. }
        | Error::Stalled { .. }
        | Error::TimeCapped { .. }
        | Error::NonFinite(_) => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numerical_errors_map_to_three() {
        assert_eq!(exit_code_for(&Error::Diverged { min: -1e3, t: 2.0 }), 3);
        assert_eq!(exit_code_for(&Error::TimeCapped { t_max: 1.0 }), 3);
        assert_eq!(exit_code_for(&Error::InvalidInput("x".into())), 1);
        assert_eq!(exit_code_for(&Error::Parse("x".into())), 1);
    }
}
