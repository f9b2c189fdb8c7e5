//! Challenge-response authentication carried over the watermark link.

pub mod attack;
pub mod keystore;
pub mod mac;
pub mod session;

pub use attack::{
    random_guess_acceptances, run_attack_trial, simulate_attack, AttackKind, AttackReport,
    AttackTrial,
};
pub use keystore::KeyStore;
pub use mac::{
    compute_mac, verify_mac, Challenge, MacResponse, SharedKey, CHALLENGE_BITS, KEY_BYTES,
    MAC_BITS, MAC_BYTES,
};
pub use session::*;
