//! Decoherence-onset time scales for bipartite quantum systems.
//!
//! A system `a` in a pure state couples to a reservoir `R` through `V`. The
//! onset of decoherence is measured by the linear entropy `s = 1 - tr ρ_a²`,
//! whose first nonvanishing Taylor coefficient at `t = 0` sets the scale
//! `t_d = 1/√s''(0)`.
//!
//! * [`linalg`]: layouts, tagged dense operators, partial traces, propagation.
//! * [`states`]: qubit and single-mode boson states and operators.
//! * [`entropy`]: `s''(0)` by two routes, `t_d`, finite-difference oracle.
//! * [`models`]: pure dephasing, cavity in thermal light, dispersive spin-boson.
//! * [`evolution`]: exact entropy series and threshold crossings.
//!
//! Index convention: the leftmost factor of a layout is the most significant
//! digit of a composite index. Units: `ħ = 1`, `k_B` folded into `kT`.

pub mod entropy;
pub mod evolution;
pub mod linalg;
pub mod models;
pub mod states;

pub use entropy::{
    fd_derivative, linear_entropy, s2_direct, s2_eq3, td_from_s2, EntropyError, FdEstimate, FdTolerance,
    InitialCondition, Td, TdResult,
};
pub use evolution::{estimate_td, run_entropy_series, Crossing, EntropySeries, SeriesContext, SeriesMeta};
pub use linalg::{LinalgError, QOperator, SpaceLayout};
pub use models::{BuiltModel, ModelError, ModelSpec};
pub use states::{BosonKind, BosonStateSpec, QubitStateSpec, StateError};

pub use num_complex::Complex64 as C64;
