//! Monte-Carlo experiments for ZF precoding and its Neumann-series
//! approximation, with TOML configuration and CSV results.

pub mod config;
pub mod experiments;
pub mod table;

pub use config::{load_config, ConfigError, SimulationConfig};
pub use experiments::{run_ns_accuracy, run_oracle, run_se_sweep, run_snr_sweep};
pub use table::{read_results, write_results, ResultTable, TableError, Value};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] fdzf_core::Error),
    #[error(transparent)]
    Table(#[from] TableError),
}

impl SimError {
    /// Process exit status: 2 for configuration problems, 3 when too many
    /// channel realizations were singular, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Config(_) => 2,
            SimError::Model(fdzf_core::Error::TooManySingular { .. }) => 3,
            _ => 1,
        }
    }
}
