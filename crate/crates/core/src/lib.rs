//! Squeezed-Fock superposition bosonic codes.
//!
//! The crate builds the codeword pair `S(r)(α|n+2⟩ ∓ β|n⟩)`, measures its
//! Knill–Laflamme deviation against squeezed-Fock and squeezed-cat codes, and
//! simulates autonomous and measurement-based recovery under photon loss and
//! dephasing. Variational logical-Z synthesis and GRAPE pulse optimization
//! live in [`optim`].

pub mod channel;
pub mod codes;
pub mod error;
pub mod fock;
pub mod kl;
pub mod numerics;
pub mod optim;
pub mod recovery;
pub mod validate;

pub use error::{Error, Result};
pub use numerics::{CMat, CVec, RMat, RVec, C64};
