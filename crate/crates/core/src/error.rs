use thiserror::Error;

pub type Result<T> = std::result::Result<T, HamlabError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HamlabError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("subsystem label {0} appears twice")]
    LabelCollision(String),

    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("partial trace over every qubit leaves a scalar; keep at least one qubit")]
    ScalarTrace,

    #[error("qubit index {index} out of range for {qubits} qubits")]
    QubitOutOfRange { index: usize, qubits: usize },

    #[error("invalid bipartition: {0}")]
    InvalidBipartition(String),

    #[error("matrix is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("matrix is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("registers overlap or have unequal sizes: {0}")]
    InvalidRegisters(String),

    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("step {step} out of range 0..={steps}")]
    StepOutOfRange { step: usize, steps: usize },

    #[error("object needs {needed} qubits but the budget is {budget}")]
    DimensionBudget { needed: usize, budget: usize },

    #[error("operator spectrum outside [0, 1]: {0}")]
    SpectrumOutOfRange(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("energy has imaginary residue {0:.3e}")]
    NonRealEnergy(f64),

    #[error("operator has no eigenvalue above the zero tolerance")]
    NoNonzeroEigenvalue,

    #[error("subspace is empty")]
    EmptySubspace,

    #[error("state is not a product across the requested cut (deviation {0:.3e})")]
    NotProduct(f64),

    #[error("malformed proof: {0}")]
    MalformedProof(String),

    #[error("malformed instance: {0}")]
    MalformedInstance(String),

    #[error("parse error: {0}")]
    Parse(String),
}
