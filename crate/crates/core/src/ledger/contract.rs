//! The access-control contract as a deterministic state machine:
//! identity registry, per-account token lists, and the append-only
//! digest store, plus account nonces.

use std::collections::BTreeMap;

use crate::codec::{put_bytes, put_u64};
use crate::crypto::{sm3_hash, CurvePoint, Digest32};

use super::EoaAddress;

/// Revert reasons surfaced by contract execution.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Revert {
    #[error("caller already registered")]
    DuplicateRegistration,
    #[error("username already registered")]
    DuplicateUsername,
    #[error("empty token")]
    EmptyToken,
    #[error("caller not registered")]
    NotRegistered,
    #[error("token does not match the caller's registered token")]
    TokenMismatch,
    #[error("access denied")]
    AccessDenied,
    #[error("unknown target account")]
    UnknownTarget,
    #[error("empty upload payload")]
    EmptyPayload,
}

/// One registered identity.
#[derive(Debug, Clone, PartialEq)]
pub struct RegistryEntry {
    pub token: Vec<u8>,
    pub sm4_key_commit: Digest32,
    pub sm2_pubkey: CurvePoint,
    pub addr: EoaAddress,
}

/// One stored upload record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DigestRecord {
    pub digest: Digest32,
    pub uploader_token: Vec<u8>,
    pub timestamp: Vec<u8>,
}

/// Result of executing a contract call.
#[derive(Debug, Clone, PartialEq)]
pub enum CallOutcome {
    Registered,
    Uploaded { digest: Digest32 },
    Granted,
    QueryResult(Vec<(Digest32, Vec<u8>)>),
}

/// Full contract state. All maps are ordered so the canonical encoding
/// (and therefore the state root) is deterministic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContractState {
    registry: BTreeMap<Digest32, RegistryEntry>,
    addr_index: BTreeMap<EoaAddress, Digest32>,
    token_lists: BTreeMap<EoaAddress, Vec<Vec<u8>>>,
    digest_store: BTreeMap<EoaAddress, Vec<DigestRecord>>,
    nonces: BTreeMap<EoaAddress, u64>,
}

impl ContractState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn next_nonce(&self, addr: &EoaAddress) -> u64 {
        self.nonces.get(addr).copied().unwrap_or(0)
    }

    pub fn bump_nonce(&mut self, addr: &EoaAddress) {
        *self.nonces.entry(*addr).or_insert(0) += 1;
    }

    pub fn registry_entry_by_addr(&self, addr: &EoaAddress) -> Option<&RegistryEntry> {
        self.addr_index.get(addr).and_then(|h| self.registry.get(h))
    }

    pub fn registry_entry_by_name_hash(&self, name_hash: &Digest32) -> Option<&RegistryEntry> {
        self.registry.get(name_hash)
    }

    pub fn token_list(&self, addr: &EoaAddress) -> &[Vec<u8>] {
        self.token_lists.get(addr).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn digest_records(&self, addr: &EoaAddress) -> &[DigestRecord] {
        self.digest_store.get(addr).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn registered_count(&self) -> usize {
        self.registry.len()
    }

    /// Register `caller` under `username_hash` with a bound token and
    /// account public key. The caller's own token is appended to its token
    /// list so self-queries succeed.
    pub fn register(
        &mut self,
        caller: EoaAddress,
        sm2_pubkey: CurvePoint,
        username_hash: Digest32,
        token: &[u8],
    ) -> Result<(), Revert> {
        if token.is_empty() {
            return Err(Revert::EmptyToken);
        }
        if self.addr_index.contains_key(&caller) {
            return Err(Revert::DuplicateRegistration);
        }
        if self.registry.contains_key(&username_hash) {
            return Err(Revert::DuplicateUsername);
        }
        self.registry.insert(
            username_hash,
            RegistryEntry {
                token: token.to_vec(),
                sm4_key_commit: sm3_hash(token),
                sm2_pubkey,
                addr: caller,
            },
        );
        self.addr_index.insert(caller, username_hash);
        self.token_lists.entry(caller).or_default().push(token.to_vec());
        Ok(())
    }

    /// Append an upload record for the caller. Payloads of exactly 32 bytes
    /// are taken as a precomputed digest; anything else is digested on
    /// ingestion.
    pub fn data_upload(
        &mut self,
        caller: EoaAddress,
        payload: &[u8],
        token: &[u8],
        timestamp: &[u8],
    ) -> Result<Digest32, Revert> {
        if payload.is_empty() {
            return Err(Revert::EmptyPayload);
        }
        let entry = self
            .registry_entry_by_addr(&caller)
            .ok_or(Revert::NotRegistered)?;
        if entry.token != token {
            return Err(Revert::TokenMismatch);
        }
        let digest = match Digest32::from_slice(payload) {
            Ok(d) => d,
            Err(_) => sm3_hash(payload),
        };
        self.digest_store.entry(caller).or_default().push(DigestRecord {
            digest,
            uploader_token: token.to_vec(),
            timestamp: timestamp.to_vec(),
        });
        Ok(digest)
    }

    /// Append the caller's registered token to the grantee's token list
    /// (idempotent).
    pub fn authority_grant(
        &mut self,
        caller: EoaAddress,
        grantee: EoaAddress,
    ) -> Result<(), Revert> {
        let token = self
            .registry_entry_by_addr(&caller)
            .ok_or(Revert::NotRegistered)?
            .token
            .clone();
        let list = self.token_lists.entry(grantee).or_default();
        if !list.contains(&token) {
            list.push(token);
        }
        Ok(())
    }

    /// Read-only query of `target`'s digest list. Succeeds when the caller
    /// presents the target's registered token (granted, or the target's
    /// own).
    pub fn data_query(
        &self,
        caller_token: &[u8],
        target: &EoaAddress,
    ) -> Result<Vec<(Digest32, Vec<u8>)>, Revert> {
        let name_hash = self.addr_index.get(target).ok_or(Revert::UnknownTarget)?;
        let entry = &self.registry[name_hash];
        if entry.token != caller_token {
            return Err(Revert::AccessDenied);
        }
        Ok(self
            .digest_records(target)
            .iter()
            .map(|r| (r.digest, r.timestamp.clone()))
            .collect())
    }

    /// Canonical state encoding; input to the state root.
    pub fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        put_u64(&mut buf, self.registry.len() as u64);
        for (name_hash, e) in &self.registry {
            buf.extend_from_slice(name_hash.as_bytes());
            put_bytes(&mut buf, &e.token);
            buf.extend_from_slice(e.sm4_key_commit.as_bytes());
            buf.extend_from_slice(&e.sm2_pubkey.to_bytes().expect("registry key is valid"));
            buf.extend_from_slice(e.addr.as_bytes());
        }
        put_u64(&mut buf, self.token_lists.len() as u64);
        for (addr, tokens) in &self.token_lists {
            buf.extend_from_slice(addr.as_bytes());
            put_u64(&mut buf, tokens.len() as u64);
            for t in tokens {
                put_bytes(&mut buf, t);
            }
        }
        put_u64(&mut buf, self.digest_store.len() as u64);
        for (addr, records) in &self.digest_store {
            buf.extend_from_slice(addr.as_bytes());
            put_u64(&mut buf, records.len() as u64);
            for r in records {
                buf.extend_from_slice(r.digest.as_bytes());
                put_bytes(&mut buf, &r.uploader_token);
                put_bytes(&mut buf, &r.timestamp);
            }
        }
        put_u64(&mut buf, self.nonces.len() as u64);
        for (addr, nonce) in &self.nonces {
            buf.extend_from_slice(addr.as_bytes());
            put_u64(&mut buf, *nonce);
        }
        buf
    }

    pub fn state_root(&self) -> Digest32 {
        sm3_hash(&self.encode())
    }
}
