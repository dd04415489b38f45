//! Binary snapshot framing: magic, version, length and SHA-256 of the JSON body.

use sha2::{Digest, Sha256};

use super::state::State;
use crate::error::{Error, Result};

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"CFSNAP01";
pub const SNAPSHOT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 8 + 32;

pub(super) fn encode(state: &State) -> Result<Vec<u8>> {
    let body = serde_json::to_vec(state).map_err(|e| Error::Integrity(e.to_string()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + body.len());
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    out.extend_from_slice(&(body.len() as u64).to_le_bytes());
    out.extend_from_slice(&Sha256::digest(&body));
    out.extend_from_slice(&body);
    Ok(out)
}

pub(super) fn decode(bytes: &[u8]) -> Result<State> {
    let bad = |m: &str| Error::Integrity(format!("snapshot: {m}"));
    if bytes.len() < HEADER_LEN {
        return Err(bad("truncated header"));
    }
    if &bytes[..8] != SNAPSHOT_MAGIC {
        return Err(bad("bad magic"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != SNAPSHOT_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes"));
    let body = &bytes[HEADER_LEN..];
    if body.len() as u64 != len {
        return Err(bad(&format!("expected {len} body bytes, found {}", body.len())));
    }
    if Sha256::digest(body).as_slice() != &bytes[20..52] {
        return Err(bad("checksum mismatch"));
    }
    let mut state: State = serde_json::from_slice(body).map_err(|e| bad(&e.to_string()))?;
    state.reindex();
    state.check_invariants()?;
    Ok(state)
}
