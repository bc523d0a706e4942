//! AuthROS simulator core: SM-family cryptography, a simulated permissioned
//! ledger hosting the access-control contract, a ROS-style topic bus, and
//! the key-allocation / nested-encryption / digest-verification protocol
//! that connects them.

pub mod bus;
pub mod crypto;

pub use crypto::{CurvePoint, Digest32, Sm2Ciphertext, Sm2KeyPair, Sm2Signature, Sm4Key};
