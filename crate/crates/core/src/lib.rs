pub mod expression;
pub mod extremal;
pub mod mittag_leffler;
pub mod operators;
pub mod problem;
pub mod solver;
pub mod verifier;
