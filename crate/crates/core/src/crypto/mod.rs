//! SM-family cryptography: SM2 public-key scheme, SM3 hash, SM4 block
//! cipher, plus Keccak-256 for account derivation.
//!
//! Everything here is a pure function over immutable inputs; entropy is
//! passed explicitly so callers control determinism.

mod keccak;
mod sm2;
mod sm3;
mod sm4;

pub use keccak::keccak256;
pub use sm2::{
    curve_order, generator, sm2_decrypt, sm2_encrypt, sm2_kdf, sm2_keygen, sm2_sign, sm2_verify,
    validate_public_key, CurvePoint, FieldElement, Sm2Ciphertext, Sm2KeyPair, Sm2Signature,
};
pub use sm3::{sm3_hash, sm3_hash_parts, Sm3};
pub use sm4::{sm4_decrypt, sm4_encrypt, sm4_open, sm4_seal, Sm4, BLOCK_LEN as SM4_BLOCK_LEN};

use rand::RngCore;
use thiserror::Error;

/// Default SM2 distinguishing identifier, used when no username is bound.
pub const DEFAULT_IDENTITY: &[u8] = b"1234567812345678";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("corrupt ciphertext")]
    CorruptCiphertext,
    #[error("invalid ciphertext")]
    InvalidCiphertext,
    #[error("point is not on the curve")]
    InvalidPoint,
    #[error("invalid key material")]
    InvalidKey,
    #[error("key derivation produced an all-zero mask")]
    KdfAllZero,
    #[error("bad {0} encoding")]
    BadEncoding(&'static str),
}

/// A 256-bit digest (SM3 or Keccak-256 output).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest32(pub [u8; 32]);

impl Digest32 {
    pub const ZERO: Digest32 = Digest32([0u8; 32]);

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, CryptoError> {
        let bytes = hex::decode(s).map_err(|_| CryptoError::BadEncoding("digest"))?;
        Self::from_slice(&bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, CryptoError> {
        let arr: [u8; 32] = bytes
            .try_into()
            .map_err(|_| CryptoError::BadEncoding("digest"))?;
        Ok(Digest32(arr))
    }
}

impl std::fmt::Debug for Digest32 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Digest32({})", self.to_hex())
    }
}

impl std::fmt::Display for Digest32 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl AsRef<[u8]> for Digest32 {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

/// A 128-bit SM4 key.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Sm4Key([u8; 16]);

impl Sm4Key {
    pub fn generate(rng: &mut dyn RngCore) -> Self {
        let mut key = [0u8; 16];
        rng.fill_bytes(&mut key);
        Sm4Key(key)
    }

    pub fn from_bytes(bytes: [u8; 16]) -> Self {
        Sm4Key(bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, CryptoError> {
        let arr: [u8; 16] = bytes
            .try_into()
            .map_err(|_| CryptoError::BadEncoding("sm4 key"))?;
        Ok(Sm4Key(arr))
    }

    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl std::fmt::Debug for Sm4Key {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // Keep key bytes out of debug logs.
        write!(f, "Sm4Key(..)")
    }
}
