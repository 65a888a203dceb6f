//! Translation of a [`Model`](crate::model::Model) into residual equations
//! `F(X) = 0` over the entity coordinates, with analytic Jacobians.

mod compile;
pub mod expr;
mod linear;

pub use compile::{
    add_anchors, compile, compile_with, eval_jacobian, eval_residuals, AngleForm, CompileError, CompileOptions,
    EntitySlot, EvalError, Residual, ResidualRole, ResidualSystem, Variable,
};
pub use expr::{DomainError, Expr};
pub use linear::{is_linear_system, parse_linear_system};
