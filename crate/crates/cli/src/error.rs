use std::path::PathBuf;

use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("input: {0}")]
    Input(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("writing output: {0}")]
    Write(#[source] std::io::Error),

    #[error(transparent)]
    Core(#[from] ietrial_core::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use ietrial_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Input(_) => EXIT_INPUT,
            CliError::Io { .. } | CliError::Write(_) => EXIT_IO,
            CliError::Core(
                E::InfeasibleScenario { .. }
                | E::InfeasibleScreenRates { .. }
                | E::ZeroRiskDifference
                | E::EqualStratumEffects(_),
            ) => EXIT_INFEASIBLE,
            CliError::Core(_) => EXIT_INPUT,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infeasibility_maps_to_two() {
        let e = CliError::from(ietrial_core::Error::ZeroRiskDifference);
        assert_eq!(e.exit_code(), EXIT_INFEASIBLE);
        let e = CliError::from(ietrial_core::Error::InfeasibleScenario { x: 1.2, y: 0.1 });
        assert_eq!(e.exit_code(), EXIT_INFEASIBLE);
        let e = CliError::from(ietrial_core::Error::InvalidConfig("reps".into()));
        assert_eq!(e.exit_code(), EXIT_INPUT);
        let e = CliError::io("x", std::io::Error::other("gone"));
        assert_eq!(e.exit_code(), EXIT_IO);
    }
}
