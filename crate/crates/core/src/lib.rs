//! Defeaturing error estimation for 2D Poisson problems with P1 finite
//! elements.

pub mod mesh;
pub mod par;
pub mod fem;
pub mod boundary;
pub mod correction;
pub mod estimators;
pub mod experiments;
