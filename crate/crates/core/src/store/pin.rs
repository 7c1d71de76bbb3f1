//! Five-digit access codes and their salted hashes.
//!
//! Hash construction: `h0 = SHA-256(salt || pin)`, then
//! `h(i+1) = SHA-256(salt || h(i))` for 4095 further rounds.

use rand::RngCore;
use sha2::{Digest, Sha256};

use super::StoreError;

const ROUNDS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PinHash {
    pub salt: [u8; 16],
    pub digest: [u8; 32],
}

impl PinHash {
    pub fn new(pin: &str) -> Result<Self, StoreError> {
        let mut salt = [0u8; 16];
        rand::rng().fill_bytes(&mut salt);
        PinHash::with_salt(pin, salt)
    }

    pub fn with_salt(pin: &str, salt: [u8; 16]) -> Result<Self, StoreError> {
        let pin = validate_pin(pin)?;
        Ok(PinHash {
            salt,
            digest: derive(&salt, pin.as_bytes()),
        })
    }

    /// Constant-time comparison against a candidate code. Malformed
    /// candidates never match.
    pub fn verify(&self, candidate: &str) -> bool {
        let Ok(pin) = validate_pin(candidate) else {
            return false;
        };
        let got = derive(&self.salt, pin.as_bytes());
        got.iter().zip(&self.digest).fold(0u8, |acc, (a, b)| acc | (a ^ b)) == 0
    }
}

fn derive(salt: &[u8; 16], pin: &[u8]) -> [u8; 32] {
    let mut h: [u8; 32] = Sha256::new().chain_update(salt).chain_update(pin).finalize().into();
    for _ in 1..ROUNDS {
        h = Sha256::new().chain_update(salt).chain_update(h).finalize().into();
    }
    h
}

/// Exactly five ASCII decimal digits.
pub fn validate_pin(pin: &str) -> Result<String, StoreError> {
    if pin.len() == 5 && pin.bytes().all(|b| b.is_ascii_digit()) {
        Ok(pin.to_string())
    } else {
        Err(StoreError::PinFormat(format!(
            "code must be exactly five decimal digits (got {} characters)",
            pin.chars().count()
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_digits_only() {
        assert_eq!(validate_pin("12345").unwrap(), "12345");
        assert!(matches!(validate_pin("1234"), Err(StoreError::PinFormat(_))));
        assert!(matches!(validate_pin("12a45"), Err(StoreError::PinFormat(_))));
        assert!(validate_pin("123456").is_err());
        assert!(validate_pin("１２３４５").is_err());
    }

    #[test]
    fn hash_checks() {
        let h = PinHash::new("40213").unwrap();
        assert!(h.verify("40213"));
        assert!(!h.verify("40214"));
        assert!(!h.verify("4021"));
        let again = PinHash::with_salt("40213", h.salt).unwrap();
        assert_eq!(again, h);
        assert_ne!(PinHash::new("40213").unwrap().salt, h.salt);
    }
}
