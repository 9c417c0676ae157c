pub mod dyadic;
pub mod oracle;
pub mod selfcheck;
pub mod sweeps;

pub use selfcheck::{selfcheck, selfcheck_with, Check, Report, SelfcheckSizes};
