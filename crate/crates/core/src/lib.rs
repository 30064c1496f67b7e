//! Self-similar blowup profiles of the generalized Constantin-Lax-Majda model.

pub mod continuation;
pub mod fixpoint;
pub mod profile;
pub mod quad;
pub mod reference;
pub mod specfun;
pub mod transform;
