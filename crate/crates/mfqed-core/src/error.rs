use thiserror::Error;

/// Errors from discretization and model construction.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("mode cutoff k_max = {k_max} retains no nonzero dual-lattice mode (smallest is {smallest})")]
    EmptyModeSet { k_max: f64, smallest: f64 },
    #[error("polarization basis undefined for k = 0")]
    ZeroWavevector,
    #[error("polarization basis is only defined in dimension 3 (got {0})")]
    BadDimension(usize),
    #[error("charge distribution must be even on the mode set: F(k) != F(-k) at mode {mode} (|diff| = {diff:.3e})")]
    OddChargeProfile { mode: usize, diff: f64 },
    #[error("charge distribution values must be finite and real")]
    NonFiniteCharge,
    #[error("pair potential must be even, real and non-negative: {0}")]
    BadPotential(String),
    #[error("value table length {got} does not match expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
}

/// Errors from the Maxwell–Schrödinger integrator.
#[derive(Debug, Error)]
pub enum MsError {
    #[error("integrator unstable at t = {time}: |phi| drifted by {drift:.3e} in one step (dt = {dt:.3e}, bound {bound:.3e})")]
    Unstable {
        time: f64,
        drift: f64,
        dt: f64,
        bound: f64,
    },
    #[error("time step must be positive (got {0})")]
    NonPositiveStep(f64),
    #[error("ground-state iteration did not converge: residual {residual:.3e} after {iters} iterations")]
    GroundStateDiverged { residual: f64, iters: usize },
}

/// Errors from the truncated many-body model.
#[derive(Debug, Error)]
pub enum PfError {
    #[error("state dimension {dim} exceeds the configured budget of {budget} amplitudes")]
    BudgetExceeded { dim: usize, budget: usize },
    #[error("coherent-state truncation tail mass {mass:.3e} exceeds tolerance {tol:.3e} (n_max = {n_max})")]
    TailMass { mass: f64, tol: f64, n_max: usize },
    #[error("operator '{0}' failed the Hermiticity check (defect {1:.3e})")]
    NotHermitian(String, f64),
    #[error("propagator requires a Hermitian operator, got '{0}'")]
    RequiresHermitian(String),
    #[error("Krylov recurrence broke down below the minimum sub-step {min_dt:.3e}")]
    KrylovBreakdown { min_dt: f64 },
    #[error("state/operator dimension mismatch: {got} vs {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("first-quantized expansion dimension {dim} exceeds budget {budget}")]
    ExpansionBudget { dim: usize, budget: usize },
}
