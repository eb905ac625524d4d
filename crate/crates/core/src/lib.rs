pub mod ingest;
pub mod linalg;
pub mod sentiment;
pub mod stats;
pub mod simulate;
pub mod var;
pub mod optim;
pub mod volatility;
pub mod connectedness;
pub mod multiscale;
pub mod topics;
pub mod forecast;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
