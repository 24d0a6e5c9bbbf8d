//! Multivariate-quadratic end-to-end verifiable voting.

pub mod codec;
pub mod commit;
pub mod field;
pub mod hash;
pub mod logfile;
pub mod mq;
pub mod mqe;
pub mod mqs;
pub mod protocol;
pub mod scenario;
