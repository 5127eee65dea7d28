pub mod analysis;
pub mod engine;
pub mod frontend;
pub mod library;
pub mod metrics;
pub mod report;
pub mod runtime;
pub mod sable;
pub mod scfg;
pub mod value;
