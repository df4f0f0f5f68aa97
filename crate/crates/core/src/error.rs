use thiserror::Error;

/// Problems with the structure of a reaction network or its parameters.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("duplicate species `{0}`")]
    DuplicateSpecies(String),
    #[error("unknown species `{0}`")]
    UnknownSpecies(String),
    #[error("duplicate parameter `{0}`")]
    DuplicateParameter(String),
    #[error("duplicate reaction name `{0}`")]
    DuplicateReaction(String),
    #[error("reference to undefined parameter `{0}`")]
    UnknownParameter(String),
    #[error("negative rate constant {value} in reaction `{reaction}`")]
    NegativeRate { reaction: String, value: f64 },
    #[error("non-finite value for parameter `{0}`")]
    NonFiniteParameter(String),
    #[error("stoichiometric coefficient must be an integer >= 1 (reaction `{reaction}`, got {value})")]
    BadCoefficient { reaction: String, value: f64 },
    #[error("reaction `{0}` has an all-zero jump vector")]
    EmptyJump(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("infeasible jump: reaction `{reaction}` would drive `{species}` negative")]
    InfeasibleJump { reaction: String, species: String },
}

/// Runtime failures of the simulation engines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("runaway model: exceeded {0} jumps")]
    Runaway(u64),
    #[error("step size underflow at t = {t} (h = {h:e}); the flow is too stiff for an explicit integrator")]
    Stiffness { t: f64, h: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
}
