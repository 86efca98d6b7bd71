use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration or command line.
    #[error("config error: {0}")]
    Config(String),
    /// Malformed input data.
    #[error("input error: {0}")]
    Input(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) | CliError::Input(_) => ExitCode::from(2),
            CliError::Runtime(_) => ExitCode::from(1),
        }
    }
}

impl From<permimpact::Error> for CliError {
    fn from(e: permimpact::Error) -> Self {
        use permimpact::Error as E;
        match e {
            E::Csv { .. } => CliError::Input(e.to_string()),
            E::InvalidParameter { .. } | E::Domain(_) | E::NotLiquidation { .. } | E::InfeasibleBounds(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
