//! Shared fixtures for the benchmarks.

use sqfock::codes::{Branch, CodePair};
use sqfock::recovery::qec_code;

/// n = 1, 8 dB, plus branch at its default truncation.
pub fn code_8db() -> CodePair {
    qec_code(1, sqfock::validate::R_8DB, Branch::Plus).expect("8 dB code builds").1
}
