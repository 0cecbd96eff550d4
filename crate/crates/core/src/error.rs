use thiserror::Error;

pub type Result<T, E = PceError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PceError {
    #[error("qubit count mismatch: {left} vs {right}")]
    QubitMismatch { left: usize, right: usize },

    #[error("invalid pauli string {0:?}")]
    ParsePauli(String),

    #[error("pauli strings support at most 64 qubits, got {0}")]
    TooManyQubits(usize),

    #[error("closure dimension exceeded the limit of {max_dim}")]
    ClosureTooLarge { max_dim: usize },

    #[error("cartan relation violated: [{left}, {right}] -> {result} not in {expected}")]
    CartanRelation {
        left: String,
        right: String,
        result: String,
        expected: &'static str,
    },

    #[error("seed {0} is not an element of m")]
    SeedNotInM(String),

    #[error("cartan optimization did not converge, best residual {best_residual:.3e}")]
    Convergence { best_residual: f64 },

    #[error("invalid hamiltonian: {0}")]
    InvalidHamiltonian(String),

    #[error("identity string has no pauli gadget")]
    IdentityGadget,

    #[error("qubit index {qubit} out of range for {n_qubits} qubits")]
    QubitOutOfRange { qubit: usize, n_qubits: usize },

    #[error("operator touches the ancilla qubit")]
    AncillaOverlap,

    #[error("unbound parameter slot {0}")]
    UnboundSlot(usize),

    #[error("expected {expected} parameter values, got {got}")]
    ParameterCount { expected: usize, got: usize },

    #[error("matrix is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("slot {slot} enters a non-phase position on qubit {qubit}")]
    Structural { slot: usize, qubit: usize },

    #[error("payload: {0}")]
    Payload(String),

    #[error("invalid probability {0}")]
    InvalidProbability(f64),

    #[error("statevector norm drifted by {0:.3e}")]
    NormDrift(f64),

    #[error("dense oracle limited to {max} qubits, got {got}")]
    DimensionGuard { max: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("pipeline paths disagree at circuit {0}")]
    PathMismatch(usize),

    #[error("refusing to write an empty correlation series")]
    EmptySeries,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
