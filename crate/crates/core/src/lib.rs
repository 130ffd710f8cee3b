//! Core of the smart home simulator: the home model, environment physics,
//! virtual sensors, context reasoning, the home server and the tick engine.

pub mod environment;
pub mod geometry;
pub mod home_server;
pub mod model;
pub mod reasoning;
pub mod sensors;
pub mod engine;
