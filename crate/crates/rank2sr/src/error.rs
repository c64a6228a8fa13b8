use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("unknown suite `{0}`")]
    UnknownSuite(String),

    #[error("stage {stage}: {detail}")]
    Precondition { stage: String, detail: String },

    #[error("invariant `{name}` violated: {detail}")]
    Invariant { name: String, detail: String },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::UnknownSuite(_) => 2,
            CliError::Precondition { .. } => 3,
            CliError::Invariant { .. } => 4,
            CliError::Io(_) => 1,
        }
    }

    /// Splits core errors into precondition failures (exit 3) and numerical invariant failures (exit 4).
    pub fn from_core(stage: &str, e: rank2sr_core::Error) -> Self {
        use rank2sr_core::Error as E;
        match e {
            E::DimensionMismatch { .. }
            | E::EmptyWord
            | E::LetterOutOfRange { .. }
            | E::Parse(_)
            | E::InvalidStructure(_)
            | E::UnsupportedStep(_)
            | E::WeightsAbsent
            | E::NotPrivileged(_)
            | E::EmptyInterval { .. }
            | E::Precondition(_)
            | E::TooFewNodes { .. }
            | E::NoEigenline(_)
            | E::PathTooShort { .. }
            | E::SmallnessViolated { .. }
            | E::NotParallel { .. } => CliError::Precondition { stage: stage.to_string(), detail: e.to_string() },
            other => CliError::Invariant { name: invariant_name(&other).to_string(), detail: format!("stage {stage}: {other}") },
        }
    }
}

fn invariant_name(e: &rank2sr_core::Error) -> &'static str {
    use rank2sr_core::Error as E;
    match e {
        E::ProjectionTooLarge { .. } => "goh-projection",
        E::JacobiInconsistent { .. } => "jacobi-reduction",
        E::RescaleInconsistent { .. } => "rescaling-consistency",
        E::EllipticWindow { .. } => "elliptic-window",
        E::TailFitRejected { .. } => "hyperbolic-tail",
        E::Inconclusive => "dichotomy",
        E::RadialCollapse { .. } => "radial-collapse",
        E::StepSizeUnderflow { .. } => "integration",
        E::NonConvergence(_) => "convergence",
        E::VanishingH { .. } => "nonvanishing-h",
        _ => "numerics",
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
