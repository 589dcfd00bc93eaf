use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix dimension {name} must be positive")]
    ZeroDimension { name: &'static str },

    #[error("processor count must be positive")]
    ZeroProcessors,

    #[error("local memory {memory} cannot hold the owned data {required} words")]
    MemoryTooSmall { memory: f64, required: f64 },

    #[error("local memory must be a positive finite number, got {0}")]
    InvalidMemory(f64),

    #[error("dimensions must be sorted m >= n >= k, got ({m}, {n}, {k})")]
    UnsortedDimensions { m: u64, n: u64, k: u64 },

    #[error("grid factor p{axis} = {factor} does not divide n{axis} = {dim}")]
    NonDividingGrid { axis: usize, factor: u64, dim: u64 },

    #[error("grid {p1}x{p2}x{p3} has a zero factor")]
    ZeroGridFactor { p1: u64, p2: u64, p3: u64 },

    #[error("no factor triple of P = {procs} divides the shape {n1}x{n2}x{n3}")]
    NoDividingGrid { procs: u64, n1: u64, n2: u64, n3: u64 },

    #[error("oracle budget {0} is below the minimum of 1000 samples")]
    BudgetTooSmall(usize),

    #[error("no feasible point found")]
    EmptyFeasibleRegion,

    #[error("exhaustive search needs n1*n2*n3 <= {limit}, got {points}")]
    LatticeTooLarge { points: u64, limit: u64 },

    #[error("lattice point ({0}, {1}, {2}) lies outside the shape")]
    PointOutOfRange(u64, u64, u64),

    #[error("addends to a reduce-scatter must have equal length: expected {expected}, got {actual}")]
    AddendMismatch { expected: usize, actual: usize },

    #[error("simulated product differs from the sequential reference at ({row}, {col})")]
    IncorrectProduct { row: usize, col: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
