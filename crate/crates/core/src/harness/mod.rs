//! Channel generation, channel files, scenario sweeps and reports.

pub mod channels;
pub mod io;
pub mod report;
pub mod scenario;
pub mod timing;
