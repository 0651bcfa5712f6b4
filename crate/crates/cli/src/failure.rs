//! Exit-code policy: 0 success, 1 operational or validation failure,
//! 2 usage error. Every failure prints exactly one `error: ...` line to
//! stderr.

#[derive(Debug)]
pub enum Failure {
    /// Bad invocation: unknown flag, missing required value, bad config key.
    Usage(String),
    /// The invocation was well-formed but the work failed.
    Run(String),
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure::Usage(message.into())
    }

    pub fn run(message: impl Into<String>) -> Self {
        Failure::Run(message.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Run(_) => 1,
        }
    }

    /// Single-line rendering; embedded newlines collapse so the stderr
    /// contract holds no matter where the message came from.
    pub fn message(&self) -> String {
        let raw = match self {
            Failure::Usage(m) | Failure::Run(m) => m,
        };
        raw.split('\n')
            .map(str::trim_end)
            .filter(|s| !s.is_empty())
            .collect::<Vec<_>>()
            .join("; ")
    }
}

impl From<vistile_core::Error> for Failure {
    fn from(e: vistile_core::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(format!("io error: {e}"))
    }
}
