pub mod corpus;
pub mod extended;
pub mod interp;
pub mod ir;
pub mod runtime;
pub mod transform;
