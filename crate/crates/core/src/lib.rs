//! Analysis and solving of geometric constraint systems.
//!
//! A [`model::Model`] of entities and constraints is compiled into residual
//! equations ([`equations`]), characterized with witness configurations
//! ([`witness`]), searched for dependent subsystems ([`detection`]) and
//! decomposed into rigid clusters ([`decomposition`]).

pub mod decomposition;
pub mod detection;
pub mod equations;
pub mod model;
pub mod numeric;
pub mod structural;
pub mod witness;
