//! Linear probing and blocked probing hash tables under limited-independence
//! hash families, with the analytic bounds that govern their probe counts and
//! an experiment harness that measures them.

pub mod adversary;
pub mod blocked_probe;
pub mod bounds;
pub mod field_hash;
pub mod harness;
pub mod linear_probe;
pub mod verify;

pub use blocked_probe::{BlockedTable, Traversal};
pub use field_hash::{FamilyKind, HashFunction, PrimeModulus};
pub use linear_probe::{LinearTable, TableError};
