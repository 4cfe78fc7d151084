use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("tolerance check failed: {0}")]
    Tolerance(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Tolerance(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

macro_rules! validation_from {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Validation(e.to_string())
            }
        })*
    };
}

validation_from!(
    bkp_tau::tausums::SumError,
    bkp_tau::fermionic::FermionError,
    bkp_tau::integrals::IntegralError,
    bkp_tau::qfunctions::QError,
    bkp_tau::partitions::PartitionError,
    bkp_tau::polyring::PolyError,
    bkp_tau::pfaffian::PfaffianError,
    serde_json::Error
);
