//! Simulated permissioned ledger: externally-owned accounts, SM2-signed
//! transactions carrying contract calls, PoW and PoA block production,
//! longest-chain selection, and a small in-process multi-node network.

mod chain;
mod contract;
mod genesis;
mod network;

pub use chain::{
    produce_block_poa, produce_block_pow, replay_blocks, select_chain, verify_block, Chain,
};
pub use contract::{CallOutcome, ContractState, DigestRecord, RegistryEntry, Revert};
pub use genesis::{AllocEntry, DeliveryModel, GenesisConfig};
pub use network::{Network, NetworkHandle, PendingReceipt, SubmitOutcome, TxStatus};

use num_bigint::BigUint;
use thiserror::Error;

use crate::codec::{put_bytes, put_u64, Reader, Truncated};
use crate::crypto::{
    keccak256, sm2_sign, sm2_verify, sm3_hash, CurvePoint, Digest32, Sm2KeyPair, Sm2Signature,
    DEFAULT_IDENTITY,
};

/// Flat per-transaction gas: 21000 + 68 per call payload byte.
pub const GAS_BASE: u64 = 21_000;
pub const GAS_PER_BYTE: u64 = 68;

/// The paper-shaped default block gas limit (never binding at desk scale).
pub const DEFAULT_BLOCK_GAS_LIMIT: u64 = 0xffff_ffff;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LedgerError {
    #[error("invalid public key for address derivation")]
    InvalidKey,
    #[error("malformed {0} encoding")]
    Codec(&'static str),
    #[error("genesis config: {0}")]
    Genesis(String),
    #[error("network is shut down")]
    NetworkDown,
}

impl From<Truncated> for LedgerError {
    fn from(_: Truncated) -> Self {
        LedgerError::Codec("truncated input")
    }
}

/// A 20-byte externally-owned-account address.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EoaAddress([u8; 20]);

impl EoaAddress {
    pub fn as_bytes(&self) -> &[u8; 20] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, LedgerError> {
        let bytes = hex::decode(s).map_err(|_| LedgerError::Codec("address"))?;
        Self::from_slice(&bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, LedgerError> {
        let arr: [u8; 20] = bytes.try_into().map_err(|_| LedgerError::Codec("address"))?;
        Ok(EoaAddress(arr))
    }
}

impl std::fmt::Debug for EoaAddress {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "0x{}", self.to_hex())
    }
}

impl std::fmt::Display for EoaAddress {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "0x{}", self.to_hex())
    }
}

/// First 20 bytes of keccak256(x || y) of the uncompressed public key.
pub fn derive_address(public_key: &CurvePoint) -> Result<EoaAddress, LedgerError> {
    let encoded = public_key.to_bytes().map_err(|_| LedgerError::InvalidKey)?;
    let digest = keccak256(&encoded[1..]);
    EoaAddress::from_slice(&digest.as_bytes()[..20])
}

/// The four contract entry points.
#[derive(Debug, Clone, PartialEq)]
pub enum ContractCall {
    Register {
        username_hash: Digest32,
        token: Vec<u8>,
    },
    DataUpload {
        payload: Vec<u8>,
        token: Vec<u8>,
        timestamp: Vec<u8>,
    },
    AuthorityGrant {
        grantee: EoaAddress,
    },
    DataQuery {
        token: Vec<u8>,
        target: EoaAddress,
    },
}

impl ContractCall {
    fn tag(&self) -> u8 {
        match self {
            ContractCall::Register { .. } => 0x01,
            ContractCall::DataUpload { .. } => 0x02,
            ContractCall::AuthorityGrant { .. } => 0x03,
            ContractCall::DataQuery { .. } => 0x04,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut buf = vec![self.tag()];
        match self {
            ContractCall::Register {
                username_hash,
                token,
            } => {
                buf.extend_from_slice(username_hash.as_bytes());
                put_bytes(&mut buf, token);
            }
            ContractCall::DataUpload {
                payload,
                token,
                timestamp,
            } => {
                put_bytes(&mut buf, payload);
                put_bytes(&mut buf, token);
                put_bytes(&mut buf, timestamp);
            }
            ContractCall::AuthorityGrant { grantee } => {
                buf.extend_from_slice(grantee.as_bytes());
            }
            ContractCall::DataQuery { token, target } => {
                put_bytes(&mut buf, token);
                buf.extend_from_slice(target.as_bytes());
            }
        }
        buf
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, LedgerError> {
        let tag = r.take_u8()?;
        Ok(match tag {
            0x01 => ContractCall::Register {
                username_hash: Digest32::from_slice(r.take(32)?)
                    .map_err(|_| LedgerError::Codec("call"))?,
                token: r.take_prefixed()?.to_vec(),
            },
            0x02 => ContractCall::DataUpload {
                payload: r.take_prefixed()?.to_vec(),
                token: r.take_prefixed()?.to_vec(),
                timestamp: r.take_prefixed()?.to_vec(),
            },
            0x03 => ContractCall::AuthorityGrant {
                grantee: EoaAddress::from_slice(r.take(20)?)?,
            },
            0x04 => ContractCall::DataQuery {
                token: r.take_prefixed()?.to_vec(),
                target: EoaAddress::from_slice(r.take(20)?)?,
            },
            _ => return Err(LedgerError::Codec("call tag")),
        })
    }
}

/// A signed transaction. `public_key` is the sender's account key; validity
/// requires it to hash to `sender` (and, once the sender is registered, to
/// equal the registered key).
#[derive(Debug, Clone, PartialEq)]
pub struct Transaction {
    pub sender: EoaAddress,
    pub nonce: u64,
    pub call: ContractCall,
    pub gas_limit: u64,
    pub submitted_at: u64,
    pub public_key: CurvePoint,
    pub signature: Sm2Signature,
}

const TX_SIGN_DOMAIN: &[u8] = b"AROS-TX";

impl Transaction {
    /// Build and sign a transaction with the sender's account keypair.
    pub fn create(
        keypair: &Sm2KeyPair,
        nonce: u64,
        call: ContractCall,
        gas_limit: u64,
        submitted_at: u64,
        rng: &mut dyn rand::RngCore,
    ) -> Result<Self, LedgerError> {
        let sender = derive_address(keypair.public_key())?;
        let mut tx = Transaction {
            sender,
            nonce,
            call,
            gas_limit,
            submitted_at,
            public_key: keypair.public_key().clone(),
            signature: Sm2Signature::from_bytes(&[0u8; 64]).unwrap(),
        };
        tx.signature = sm2_sign(keypair, DEFAULT_IDENTITY, &tx.signing_bytes(), rng);
        Ok(tx)
    }

    fn core_encoding(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(128 + 16);
        buf.extend_from_slice(self.sender.as_bytes());
        put_u64(&mut buf, self.nonce);
        put_u64(&mut buf, self.gas_limit);
        put_u64(&mut buf, self.submitted_at);
        buf.extend_from_slice(&self.public_key.to_bytes().expect("tx key is valid"));
        buf.extend_from_slice(&self.call.encode());
        buf
    }

    fn signing_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(TX_SIGN_DOMAIN.len() + 160);
        buf.extend_from_slice(TX_SIGN_DOMAIN);
        buf.extend_from_slice(&self.core_encoding());
        buf
    }

    /// Canonical wire encoding: core fields followed by the signature.
    pub fn encode(&self) -> Vec<u8> {
        let mut buf = self.core_encoding();
        buf.extend_from_slice(&self.signature.to_bytes());
        buf
    }

    pub fn decode_from(r: &mut Reader<'_>) -> Result<Self, LedgerError> {
        let sender = EoaAddress::from_slice(r.take(20)?)?;
        let nonce = r.take_u64()?;
        let gas_limit = r.take_u64()?;
        let submitted_at = r.take_u64()?;
        let public_key =
            CurvePoint::from_bytes(r.take(65)?).map_err(|_| LedgerError::Codec("tx key"))?;
        let call = ContractCall::decode(r)?;
        let signature =
            Sm2Signature::from_bytes(r.take(64)?).map_err(|_| LedgerError::Codec("tx sig"))?;
        Ok(Transaction {
            sender,
            nonce,
            call,
            gas_limit,
            submitted_at,
            public_key,
            signature,
        })
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, LedgerError> {
        let mut r = Reader::new(bytes);
        let tx = Self::decode_from(&mut r)?;
        r.finish()?;
        Ok(tx)
    }

    pub fn tx_hash(&self) -> Digest32 {
        sm3_hash(&self.encode())
    }

    /// Gas consumed under the flat cost model.
    pub fn gas_cost(&self) -> u64 {
        GAS_BASE + GAS_PER_BYTE * self.call.encode().len() as u64
    }

    /// Signature and key-binding check (stateless part).
    pub fn verify_signature(&self) -> bool {
        match derive_address(&self.public_key) {
            Ok(addr) if addr == self.sender => {}
            _ => return false,
        }
        sm2_verify(
            &self.public_key,
            DEFAULT_IDENTITY,
            &self.signing_bytes(),
            &self.signature,
        )
    }
}

/// Consensus mode for a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConsensusMode {
    Pow,
    Poa,
}

impl std::fmt::Display for ConsensusMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ConsensusMode::Pow => "pow",
            ConsensusMode::Poa => "poa",
        })
    }
}

impl std::str::FromStr for ConsensusMode {
    type Err = LedgerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pow" => Ok(ConsensusMode::Pow),
            "poa" => Ok(ConsensusMode::Poa),
            other => Err(LedgerError::Genesis(format!("unknown consensus {other:?}"))),
        }
    }
}

/// Block seal: nonce search under a difficulty target, or a slot
/// validator's signature.
#[derive(Debug, Clone, PartialEq)]
pub enum Seal {
    Pow { difficulty: u64, nonce: u64 },
    Poa {
        validator: EoaAddress,
        signature: Sm2Signature,
    },
}

/// A block: hash-linked header over an ordered transaction list plus the
/// post-state root.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub parent_hash: Digest32,
    pub height: u64,
    pub timestamp: u64,
    pub tx_root: Digest32,
    pub state_root: Digest32,
    pub seal: Seal,
    pub txs: Vec<Transaction>,
}

const HDR_SIGN_DOMAIN: &[u8] = b"AROS-HDR";

impl Block {
    pub fn header_encoding(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(128);
        buf.extend_from_slice(self.parent_hash.as_bytes());
        put_u64(&mut buf, self.height);
        put_u64(&mut buf, self.timestamp);
        buf.extend_from_slice(self.tx_root.as_bytes());
        buf.extend_from_slice(self.state_root.as_bytes());
        match &self.seal {
            Seal::Pow { difficulty, nonce } => {
                buf.push(0x01);
                put_u64(&mut buf, *difficulty);
                put_u64(&mut buf, *nonce);
            }
            Seal::Poa {
                validator,
                signature,
            } => {
                buf.push(0x02);
                buf.extend_from_slice(validator.as_bytes());
                buf.extend_from_slice(&signature.to_bytes());
            }
        }
        buf
    }

    pub fn block_hash(&self) -> Digest32 {
        sm3_hash(&self.header_encoding())
    }

    /// Preimage signed by a PoA validator (header without the signature).
    pub fn poa_signing_bytes(
        parent_hash: &Digest32,
        height: u64,
        timestamp: u64,
        tx_root: &Digest32,
        state_root: &Digest32,
        validator: &EoaAddress,
    ) -> Vec<u8> {
        let mut buf = Vec::with_capacity(HDR_SIGN_DOMAIN.len() + 109);
        buf.extend_from_slice(HDR_SIGN_DOMAIN);
        buf.extend_from_slice(parent_hash.as_bytes());
        put_u64(&mut buf, height);
        put_u64(&mut buf, timestamp);
        buf.extend_from_slice(tx_root.as_bytes());
        buf.extend_from_slice(state_root.as_bytes());
        buf.push(0x02);
        buf.extend_from_slice(validator.as_bytes());
        buf
    }

    /// Root over the ordered transaction encodings.
    pub fn compute_tx_root(txs: &[Transaction]) -> Digest32 {
        let mut buf = Vec::new();
        for tx in txs {
            put_bytes(&mut buf, &tx.encode());
        }
        sm3_hash(&buf)
    }

    /// The PoW predicate: block hash, read as a 256-bit integer, is below
    /// 2^256 / difficulty.
    pub fn meets_difficulty(hash: &Digest32, difficulty: u64) -> bool {
        if difficulty <= 1 {
            return true;
        }
        let value = BigUint::from_bytes_be(hash.as_bytes());
        value < (BigUint::from(1u8) << 256u32) / difficulty
    }

    /// Full canonical block encoding: header, then length-prefixed txs.
    pub fn encode(&self) -> Vec<u8> {
        let mut buf = self.header_encoding();
        put_u64(&mut buf, self.txs.len() as u64);
        for tx in &self.txs {
            put_bytes(&mut buf, &tx.encode());
        }
        buf
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, LedgerError> {
        let mut r = Reader::new(bytes);
        let parent_hash =
            Digest32::from_slice(r.take(32)?).map_err(|_| LedgerError::Codec("block"))?;
        let height = r.take_u64()?;
        let timestamp = r.take_u64()?;
        let tx_root = Digest32::from_slice(r.take(32)?).map_err(|_| LedgerError::Codec("block"))?;
        let state_root =
            Digest32::from_slice(r.take(32)?).map_err(|_| LedgerError::Codec("block"))?;
        let seal = match r.take_u8()? {
            0x01 => Seal::Pow {
                difficulty: r.take_u64()?,
                nonce: r.take_u64()?,
            },
            0x02 => Seal::Poa {
                validator: EoaAddress::from_slice(r.take(20)?)?,
                signature: Sm2Signature::from_bytes(r.take(64)?)
                    .map_err(|_| LedgerError::Codec("seal"))?,
            },
            _ => return Err(LedgerError::Codec("seal tag")),
        };
        let count = r.take_u64()? as usize;
        let mut txs = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let raw = r.take_prefixed()?;
            txs.push(Transaction::decode(raw)?);
        }
        r.finish()?;
        Ok(Block {
            parent_hash,
            height,
            timestamp,
            tx_root,
            state_root,
            seal,
            txs,
        })
    }

    pub fn size_bytes(&self) -> usize {
        self.encode().len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::sm2_keygen;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn address_is_keccak_truncation() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let kp = sm2_keygen(&mut rng);
        let addr = derive_address(kp.public_key()).unwrap();
        let encoded = kp.public_key().to_bytes().unwrap();
        let digest = keccak256(&encoded[1..]);
        assert_eq!(addr.as_bytes()[..], digest.as_bytes()[..20]);
        // Deterministic.
        assert_eq!(addr, derive_address(kp.public_key()).unwrap());
    }

    #[test]
    fn address_collision_spot_check() {
        use std::collections::HashSet;
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let mut seen = HashSet::new();
        for _ in 0..10_000 {
            let mut fake = [0u8; 65];
            fake[0] = 0x04;
            rng.fill_bytes(&mut fake[1..]);
            // Address derivation only hashes the coordinates, so synthetic
            // coordinate bytes exercise the same path cheaply.
            let digest = keccak256(&fake[1..]);
            let addr = EoaAddress::from_slice(&digest.as_bytes()[..20]).unwrap();
            assert!(seen.insert(addr), "collision in 20-byte addresses");
        }
    }

    #[test]
    fn transaction_sign_encode_round_trip() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let kp = sm2_keygen(&mut rng);
        let tx = Transaction::create(
            &kp,
            0,
            ContractCall::Register {
                username_hash: sm3_hash(b"alice"),
                token: b"token".to_vec(),
            },
            1_000_000,
            7,
            &mut rng,
        )
        .unwrap();
        assert!(tx.verify_signature());
        let decoded = Transaction::decode(&tx.encode()).unwrap();
        assert_eq!(decoded, tx);
        assert!(decoded.verify_signature());
    }

    #[test]
    fn forged_sender_fails_verification() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let kp = sm2_keygen(&mut rng);
        let other = sm2_keygen(&mut rng);
        let mut tx = Transaction::create(
            &kp,
            0,
            ContractCall::AuthorityGrant {
                grantee: derive_address(other.public_key()).unwrap(),
            },
            1_000_000,
            0,
            &mut rng,
        )
        .unwrap();
        tx.sender = derive_address(other.public_key()).unwrap();
        assert!(!tx.verify_signature());
    }

    #[test]
    fn gas_cost_scales_with_payload() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let kp = sm2_keygen(&mut rng);
        let mk = |len: usize| {
            Transaction::create(
                &kp,
                0,
                ContractCall::DataUpload {
                    payload: vec![0u8; len],
                    token: b"t".to_vec(),
                    timestamp: b"0".to_vec(),
                },
                u64::MAX,
                0,
                &mut rng,
            )
            .unwrap()
            .gas_cost()
        };
        let g1 = mk(1024);
        let g2 = mk(2048);
        assert_eq!(g2 - g1, GAS_PER_BYTE * 1024);
    }

    #[test]
    fn difficulty_predicate_boundaries() {
        assert!(Block::meets_difficulty(&Digest32([0xff; 32]), 1));
        let mut low = [0u8; 32];
        low[31] = 1;
        assert!(Block::meets_difficulty(&Digest32(low), u64::MAX));
        assert!(!Block::meets_difficulty(&Digest32([0xff; 32]), 2));
    }
}
