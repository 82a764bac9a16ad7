//! Prime-factorization cache system.
//!
//! Data elements are tagged with unique primes, relationships between
//! elements are encoded as products of those primes, and relationship
//! discovery is exact integer factorization: the factors of a composite
//! identify precisely the elements that participate, never more, never
//! less. On top of that core sit a simulated multi-level cache that
//! prefetches along discovered relationships, reference replacement
//! policies (LRU/ARC/LIRS) for trace-driven comparison, synthetic
//! workload generators, and a benchmark harness.
//!
//! The crate is organized around the data path:
//!
//! * [`primes`] — primality testing, segmented sieving, per-level prime
//!   pools with allocation and LRU recycling.
//! * [`assignment`] — adaptive element-to-prime assignment with frequency
//!   prediction and exhaustion recycling.
//! * [`factorizer`] — staged factorization: smallest-prime-factor table,
//!   budgeted trial division, Brent's variant of Pollard's rho, and an
//!   LRU factorization cache with graceful partial results.
//! * [`relations`] — the relationship registry and discovery.
//! * [`cache`] — the simulated L1/L2/L3/memory hierarchy with
//!   relationship-driven prefetching.
//! * [`baselines`] — LRU, ARC, and LIRS behind a common policy interface.
//! * [`workloads`] — trace generators and JSONL trace I/O.
//! * [`replay`] — trace replay and report assembly.
//! * [`verify`] — self-check sweeps exposed to the CLI.

pub mod assignment;
pub mod baselines;
pub mod cache;
pub mod config;
mod exec;
pub mod factorizer;
pub mod primes;
pub mod relations;
pub mod replay;
pub mod verify;
pub mod workloads;

pub use assignment::ElementId;
pub use cache::SimStats;
pub use config::{Level, PrimeRange, StepBudget};
pub use exec::ExecMode;
pub use primes::Prime;
pub use relations::Composite;
