use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<combmem::Error> for CliError {
    fn from(e: combmem::Error) -> Self {
        match e {
            combmem::Error::Validation(vs) => CliError::Validation(vs.iter().map(ToString::to_string).collect()),
            e if e.is_validation() => CliError::Validation(vec![e.to_string()]),
            e => CliError::Numerical(e.to_string()),
        }
    }
}
