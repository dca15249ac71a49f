pub mod model;
pub mod vocab;
pub mod codec;
pub mod query;
pub mod reasoner;
pub mod engine;
pub mod federation;
pub mod runtime;
pub mod scenario;
