//! Exact symbolic analysis of codimension-two real submanifold germs
//! `w = R(z, z̄)` in complex (n+1)-space near a CR singular point.

pub mod cli;
pub mod crfields;
pub mod flatten;
pub mod germ;
pub mod numeric;
pub mod quadratic;
pub mod series;
