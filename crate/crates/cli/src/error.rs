use salprop::crf::CrfError;
use salprop::edges::EdgeError;
use salprop::evalkit::EvalError;
use salprop::imagio::ImageError;
use salprop::pipeline::PipelineError;
use salprop::proposals::ProposalError;
use salprop::registry::RegistryError;

/// Errors grouped by exit code: 1 usage, 2 I/O, 3 data.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Data(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Data(m) => m,
        }
    }

    /// Prefixes the message with some context, keeping the class.
    pub fn context(self, ctx: impl std::fmt::Display) -> Self {
        match self {
            CliError::Usage(m) => CliError::Usage(format!("{ctx}: {m}")),
            CliError::Io(m) => CliError::Io(format!("{ctx}: {m}")),
            CliError::Data(m) => CliError::Data(format!("{ctx}: {m}")),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<ImageError> for CliError {
    fn from(e: ImageError) -> Self {
        match e {
            ImageError::FileNotFound(_) => CliError::Io(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EdgeError> for CliError {
    fn from(e: EdgeError) -> Self {
        match e {
            EdgeError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<CrfError> for CliError {
    fn from(e: CrfError) -> Self {
        match e {
            CrfError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ProposalError> for CliError {
    fn from(e: ProposalError) -> Self {
        match e {
            ProposalError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Edge(e) => e.into(),
            PipelineError::Crf(e) => e.into(),
            PipelineError::Proposal(e) => e.into(),
            PipelineError::Bayes(e) => CliError::Data(e.to_string()),
        }
    }
}

impl From<RegistryError> for CliError {
    fn from(e: RegistryError) -> Self {
        CliError::Usage(e.to_string())
    }
}
