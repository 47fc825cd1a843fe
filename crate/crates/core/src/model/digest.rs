use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use super::validate::validate_state;
use super::world::WorldState;
use crate::error::Error;

/// Content fingerprint of a world state (hex SHA-256 of its canonical JSON).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Fingerprint(String);

impl Fingerprint {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// First twelve hex digits, for human-facing output.
    pub fn short(&self) -> &str {
        &self.0[..12.min(self.0.len())]
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Fingerprint of any serializable value through its canonical JSON form.
pub fn fingerprint_of<T: Serialize>(value: &T) -> Fingerprint {
    let bytes = serde_json::to_vec(value).expect("model values serialize to JSON");
    Fingerprint(hex::encode(Sha256::digest(&bytes)))
}

/// Fingerprint without validation. Collections are id-ordered maps and sets,
/// so insertion order never influences the result.
pub fn fingerprint(state: &WorldState) -> Fingerprint {
    fingerprint_of(state)
}

pub fn state_digest(state: &WorldState) -> Result<Fingerprint, Error> {
    let diagnostics = validate_state(state);
    if !diagnostics.is_empty() {
        return Err(Error::InvalidState(diagnostics));
    }
    Ok(fingerprint(state))
}
