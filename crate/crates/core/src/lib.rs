//! Numerics for intersection and union projectors built from Jordan's
//! two-projector decomposition, with their uses in asymmetric and composite
//! quantum hypothesis testing and in authenticated classical-quantum channel
//! coding.
//!
//! Every quantity is computed with dense complex matrices and base-2
//! logarithms. The crate is organised bottom-up:
//!
//! * [`operator`]: Hermitian/density/projector types, spectra, entropies.
//! * [`jordan`]: simultaneous block diagonalisation of two projectors.
//! * [`meet`]: Good-set intersection projectors and their bound checks.
//! * [`inequalities`]: executable operator-inequality validators.
//! * [`hypotest`]: typical projectors, Neyman-Pearson optimum, composite tests.
//! * [`authchannel`]: capacity, codebooks, two-step decoder, Monte Carlo.

pub mod authchannel;
pub mod error;
pub mod hypotest;
pub mod inequalities;
pub mod io;
pub mod jordan;
pub mod meet;
pub mod operator;
pub mod random;
pub mod report;
pub mod suites;

pub use error::{Error, Result};
pub use jordan::{jordan_decompose, BlockKind, JordanBlock, JordanDecomposition};
pub use meet::{Direction, MeetResult, MeetSpec};
pub use operator::{
    DensityOperator, Ensemble, HermitianOperator, Matrix, Projector, SpectralDecomposition, Vector, C64,
};
pub use report::{Relation, ValidationReport};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
