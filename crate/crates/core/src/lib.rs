//! Constructive norm-attaining corrections for operators between
//! finite-dimensional function spaces.
//!
//! Given `T` with `||T|| = 1` and a unit `x0` with `||T x0|| > 1 - η(ε)`,
//! each pipeline returns `S` and a unit `w` with `||S w|| = ||S|| = 1`,
//! `||w - x0|| < ε` and `||S - T|| < ε`, together with a
//! [`certificate::BpbCertificate`] that [`harness::verify`] re-checks using
//! exact norm oracles.
//!
//! - [`ck_cs`]: kernels `C(K) -> C(S)`, with `η(ε) = ε²/432`.
//! - [`ucx`]: operators from `C0(L)` into a Euclidean space, built on the
//!   averaging projections of [`partition`].
//! - [`predual`]: operators from a `p`-normed `R^n` into `c0`.
//!
//! ```
//! use bpb_core::ck_cs::{correct_ck_cs, CkCsOptions};
//! use bpb_core::spaces::{Func, Kernel};
//!
//! let t = Kernel::new(vec![vec![0.6, 0.4], vec![0.3, 0.5]]).unwrap();
//! let f0 = Func::new(vec![1.0, 0.9999]).unwrap();
//! let res = correct_ck_cs(&t, &f0, 0.5, &CkCsOptions::default()).unwrap();
//! assert!(res.certificate.is_valid());
//! ```

pub mod certificate;
pub mod ck_cs;
pub mod error;
pub mod harness;
pub mod operator;
pub mod partition;
pub mod predual;
pub mod spaces;
pub mod ucx;

pub use certificate::BpbCertificate;
pub use error::{BpbError, Result};

/// The guide's code samples, compiled and run as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/spaces.md")]
    struct Spaces;
    #[doc = include_str!("../../../book/src/ck_cs.md")]
    struct CkCs;
    #[doc = include_str!("../../../book/src/partition.md")]
    struct Partition;
    #[doc = include_str!("../../../book/src/ucx.md")]
    struct Ucx;
    #[doc = include_str!("../../../book/src/predual.md")]
    struct Predual;
    #[doc = include_str!("../../../book/src/harness.md")]
    struct Harness;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
