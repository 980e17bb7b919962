//! Mixed-potential (Brayton-Moser) modelling and power-shaping boundary
//! control of the lossy transmission line.
//!
//! * [`grid`]: uniform grids, the summation-by-parts `d/dz`, quadrature and
//!   the boundary-inclusive `H_0`/`H_1` norms.
//! * [`rlc`]: the lumped RLC circuit with its admissible pair and
//!   power-shaping controller.
//! * [`line`]: telegrapher's equations, terminations, mixed potentials and
//!   time stepping.
//! * [`admissible`]: the admissible pair `(A~, P~)` of the line, the
//!   per-grid stability condition and the boundary passivity monitor.
//! * [`control`]: Casimir-based boundary controller, shaped potential and
//!   closed-loop simulation.
//! * [`altmaps`]: storage functionals with the dimension of power/time and
//!   the derivative-port passivity monitor.
//!
//! The guide in `book/` walks through each of these with runnable snippets.

pub mod admissible;
pub mod altmaps;
pub mod control;
pub mod error;
pub mod grid;
pub mod line;
pub mod monitor;
pub mod ode;
pub mod rlc;

pub use error::{Error, Result};
pub use grid::{Closure, DiscreteOp, Field, Grid};
pub use line::{BoundaryMode, FullState, Line, LineParams, PortDrive, SimConfig, Trajectory};
pub use monitor::FunctionalReport;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/grid-and-operator.md")]
    mod grid_and_operator {}
    #[doc = include_str!("../../../book/src/telegrapher-line.md")]
    mod telegrapher_line {}
    #[doc = include_str!("../../../book/src/rlc.md")]
    mod rlc {}
    #[doc = include_str!("../../../book/src/admissible-pair.md")]
    mod admissible_pair {}
    #[doc = include_str!("../../../book/src/power-shaping.md")]
    mod power_shaping {}
    #[doc = include_str!("../../../book/src/derivative-ports.md")]
    mod derivative_ports {}
}
