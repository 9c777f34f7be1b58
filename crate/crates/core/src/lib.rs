pub mod bench;
pub mod config;
pub mod difflogic;
pub mod equivalence;
pub mod eval;
pub mod explorer;
pub mod generators;
pub mod linear;
pub mod sgf;
pub mod smtlib;
