use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or input file.
    #[error("config error: {0}")]
    Config(String),
    /// The models could not produce a result (free fall, integration failure, I/O).
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn config(field: impl AsRef<str>, msg: impl AsRef<str>) -> Self {
        CliError::Config(format!("{}: {}", field.as_ref(), msg.as_ref()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
