//! The SSA IR: data model, text format and verifier.

pub mod lexer;
pub mod module;
pub mod parser;
pub mod printer;
pub mod types;
pub mod verify;

pub use module::*;
pub use parser::{parse_module, parse_scalar_literal, ParseError};
pub use printer::print_module;
pub use types::{shadow_type_of, IrType, NoShadowType, ScalarType};
pub use verify::{verify_module, Diagnostic};
