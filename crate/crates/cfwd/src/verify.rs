//! Statistical verification suites for the system's structural identities.

pub mod fdcheck;
pub mod ibp;
pub mod martingale;
pub mod varadhan;

pub use fdcheck::gradient_fd_suite;
pub use ibp::{check_ibp, check_ibp_bank, default_ibp_bank, IbpBankConfig};
pub use martingale::{run_martingale, MartingaleConfig};
pub use varadhan::{gaussian_corridor_exponent, varadhan_pair, varadhan_single, PairConfig};
