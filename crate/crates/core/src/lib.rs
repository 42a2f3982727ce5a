// Negated comparisons are used to reject NaN inputs.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boundary;
pub mod error;
pub mod flow;
pub mod grid;
pub mod resolvent;
pub mod scenario;
pub mod semigroup;
pub mod verify;

pub use error::{Error, Result};

pub use boundary::BoundaryOperator;
pub use flow::{Domain, Flow, Point, VectorField};
pub use grid::{CharacteristicGrid, GridFunction, Measure, Side, TraceSpace, TraceVector};
pub use scenario::{Scenario, ScenarioConfig};
pub use verify::CheckResult;
