//! Blockchain state sandbox: accounts with balance/code/storage plus block
//! context, loaded from JSON snapshot files. Serves as the start state for
//! symbolic analysis and as the forkable substrate for concrete validation.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use primitive_types::{H256, U256};
use serde::de::{Deserializer, MapAccess, Visitor};
use serde::{Deserialize, Serialize};

use crate::word::{keccak, Address, Word};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AccountState {
    pub balance: U256,
    /// `None` for externally owned or killed accounts ("0x" after SUICIDE).
    pub code: Option<Vec<u8>>,
    pub storage: BTreeMap<Word, Word>,
}

impl AccountState {
    pub fn storage_get(&self, key: Word) -> Word {
        self.storage.get(&key).copied().unwrap_or_default()
    }

    pub fn storage_set(&mut self, key: Word, value: Word) {
        if value.is_zero() {
            self.storage.remove(&key);
        } else {
            self.storage.insert(key, value);
        }
    }

    pub fn is_contract(&self) -> bool {
        self.code.as_ref().is_some_and(|c| !c.is_empty())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockContext {
    pub number: u64,
    pub timestamp: u64,
    pub coinbase: Address,
    pub blockhash_seed: H256,
}

impl Default for BlockContext {
    fn default() -> Self {
        BlockContext {
            number: 1,
            timestamp: 1,
            coinbase: Address::zero(),
            blockhash_seed: H256::zero(),
        }
    }
}

impl BlockContext {
    /// Deterministic BLOCKHASH: digest of (seed, block number). Both the
    /// interpreter and any concretized replay agree on this function.
    pub fn blockhash(&self, number: u64) -> Word {
        let mut data = [0u8; 40];
        data[..32].copy_from_slice(self.blockhash_seed.as_bytes());
        data[32..].copy_from_slice(&number.to_be_bytes());
        U256::from_big_endian(keccak(&data).as_bytes())
    }

    /// Advances to the next mined block.
    pub fn advance(&mut self) {
        self.number += 1;
        self.timestamp += 1;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChainState {
    pub accounts: BTreeMap<Address, AccountState>,
    pub block: BlockContext,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub sender: Address,
    pub recipient: Address,
    pub value: U256,
    pub data: Vec<u8>,
}

#[derive(Debug, thiserror::Error)]
pub enum SnapshotError {
    #[error("cannot read snapshot: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed snapshot: {0}")]
    Malformed(String),
    #[error("duplicate address in snapshot: {0}")]
    DuplicateAddress(String),
}

impl ChainState {
    pub fn account(&self, addr: Address) -> AccountState {
        self.accounts.get(&addr).cloned().unwrap_or_default()
    }

    pub fn account_mut(&mut self, addr: Address) -> &mut AccountState {
        self.accounts.entry(addr).or_default()
    }

    pub fn balance(&self, addr: Address) -> U256 {
        self.accounts.get(&addr).map_or(U256::zero(), |a| a.balance)
    }

    pub fn code(&self, addr: Address) -> Option<&[u8]> {
        self.accounts
            .get(&addr)
            .and_then(|a| a.code.as_deref())
            .filter(|c| !c.is_empty())
    }

    /// Deep, independent copy; mutations never touch the original.
    pub fn fork(&self) -> ChainState {
        self.clone()
    }

    /// Addresses holding Ether but no code — funds nothing can ever move.
    pub fn scan_posthumous(&self) -> Vec<Address> {
        self.accounts
            .iter()
            .filter(|(_, a)| !a.is_contract() && a.balance > U256::zero())
            .map(|(addr, _)| *addr)
            .collect() // BTreeMap iteration is already ascending
    }

    pub fn total_balance(&self) -> U256 {
        self.accounts
            .values()
            .fold(U256::zero(), |acc, a| acc + a.balance)
    }

    /// Content digest over the canonical serialization; equal states digest
    /// equally regardless of construction order.
    pub fn digest(&self) -> H256 {
        keccak(self.to_canonical_json().as_bytes())
    }

    pub fn load_snapshot(path: impl AsRef<Path>) -> Result<ChainState, SnapshotError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_snapshot_json(&text)
    }

    pub fn save_snapshot(&self, path: impl AsRef<Path>) -> Result<(), SnapshotError> {
        std::fs::write(path, self.to_canonical_json())?;
        Ok(())
    }

    pub fn from_snapshot_json(text: &str) -> Result<ChainState, SnapshotError> {
        let doc: SnapshotDoc =
            serde_json::from_str(text).map_err(|e| SnapshotError::Malformed(e.to_string()))?;
        doc.try_into()
    }

    pub fn to_canonical_json(&self) -> String {
        let doc = SnapshotDoc::from(self);
        let mut out = serde_json::to_string_pretty(&doc).expect("snapshot serialization");
        out.push('\n');
        out
    }
}

// --- snapshot wire format ---

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SnapshotDoc {
    block: BlockDoc,
    accounts: AccountsDoc,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockDoc {
    number: u64,
    timestamp: u64,
    coinbase: String,
    #[serde(rename = "blockhashSeed")]
    blockhash_seed: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AccountDoc {
    balance: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    code: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    storage: Option<BTreeMap<String, String>>,
}

/// Ordered account entries; kept as a list during parsing so duplicate
/// addresses are caught instead of silently collapsed.
struct AccountsDoc(Vec<(String, AccountDoc)>);

impl Serialize for AccountsDoc {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for AccountsDoc {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = AccountsDoc;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                write!(f, "a map of address to account")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
                let mut entries = Vec::new();
                while let Some((k, v)) = access.next_entry::<String, AccountDoc>()? {
                    entries.push((k, v));
                }
                Ok(AccountsDoc(entries))
            }
        }
        deserializer.deserialize_map(V)
    }
}

fn require_hex_prefix(field: &str, s: &str) -> Result<String, SnapshotError> {
    let body = s.strip_prefix("0x").ok_or_else(|| {
        SnapshotError::Malformed(format!("{field}: expected 0x-prefixed hex, got {s:?}"))
    })?;
    if body.is_empty() && field != "code" {
        return Err(SnapshotError::Malformed(format!("{field}: empty hex")));
    }
    if !body.chars().all(|c| c.is_ascii_hexdigit() && !c.is_ascii_uppercase()) {
        return Err(SnapshotError::Malformed(format!(
            "{field}: hex must be lowercase hex digits, got {s:?}"
        )));
    }
    Ok(body.to_string())
}

fn parse_quantity(field: &str, s: &str) -> Result<U256, SnapshotError> {
    let body = require_hex_prefix(field, s)?;
    if body.len() > 64 {
        return Err(SnapshotError::Malformed(format!("{field}: value too wide")));
    }
    U256::from_str_radix(&body, 16)
        .map_err(|e| SnapshotError::Malformed(format!("{field}: {e}")))
}

fn parse_address(field: &str, s: &str) -> Result<Address, SnapshotError> {
    let body = require_hex_prefix(field, s)?;
    if body.len() != 40 {
        return Err(SnapshotError::Malformed(format!(
            "{field}: address must be 20 bytes, got {s:?}"
        )));
    }
    let bytes = hex::decode(&body).map_err(|e| SnapshotError::Malformed(format!("{field}: {e}")))?;
    Ok(Address::from_slice(&bytes))
}

fn parse_hash(field: &str, s: &str) -> Result<H256, SnapshotError> {
    let body = require_hex_prefix(field, s)?;
    if body.len() != 64 {
        return Err(SnapshotError::Malformed(format!(
            "{field}: expected 32 bytes, got {s:?}"
        )));
    }
    let bytes = hex::decode(&body).map_err(|e| SnapshotError::Malformed(format!("{field}: {e}")))?;
    Ok(H256::from_slice(&bytes))
}

fn parse_code(s: &str) -> Result<Vec<u8>, SnapshotError> {
    let body = require_hex_prefix("code", s)?;
    hex::decode(&body).map_err(|e| SnapshotError::Malformed(format!("code: {e}")))
}

fn quantity_hex(v: U256) -> String {
    format!("0x{v:x}")
}

impl TryFrom<SnapshotDoc> for ChainState {
    type Error = SnapshotError;

    fn try_from(doc: SnapshotDoc) -> Result<Self, Self::Error> {
        let block = BlockContext {
            number: doc.block.number,
            timestamp: doc.block.timestamp,
            coinbase: parse_address("block.coinbase", &doc.block.coinbase)?,
            blockhash_seed: parse_hash("block.blockhashSeed", &doc.block.blockhash_seed)?,
        };
        let mut accounts = BTreeMap::new();
        for (addr_text, acct) in doc.accounts.0 {
            let addr = parse_address("account address", &addr_text)?;
            let mut storage = BTreeMap::new();
            if let Some(entries) = acct.storage {
                for (k, v) in entries {
                    let key = parse_quantity("storage key", &k)?;
                    let value = parse_quantity("storage value", &v)?;
                    if storage.insert(key, value).is_some() {
                        return Err(SnapshotError::Malformed(format!(
                            "duplicate storage key {k} in {addr_text}"
                        )));
                    }
                }
                storage.retain(|_, v| !v.is_zero());
            }
            let state = AccountState {
                balance: parse_quantity("balance", &acct.balance)?,
                code: acct.code.as_deref().map(parse_code).transpose()?,
                storage,
            };
            if accounts.insert(addr, state).is_some() {
                return Err(SnapshotError::DuplicateAddress(addr_text));
            }
        }
        Ok(ChainState { accounts, block })
    }
}

impl From<&ChainState> for SnapshotDoc {
    fn from(s: &ChainState) -> Self {
        SnapshotDoc {
            block: BlockDoc {
                number: s.block.number,
                timestamp: s.block.timestamp,
                coinbase: format!("0x{}", hex::encode(s.block.coinbase)),
                blockhash_seed: format!("0x{}", hex::encode(s.block.blockhash_seed)),
            },
            accounts: AccountsDoc(
                s.accounts
                    .iter()
                    .map(|(addr, a)| {
                        (
                            format!("0x{}", hex::encode(addr)),
                            AccountDoc {
                                balance: quantity_hex(a.balance),
                                code: a.code.as_ref().map(|c| format!("0x{}", hex::encode(c))),
                                storage: if a.storage.is_empty() {
                                    None
                                } else {
                                    Some(
                                        a.storage
                                            .iter()
                                            .map(|(k, v)| (quantity_hex(*k), quantity_hex(*v)))
                                            .collect(),
                                    )
                                },
                            },
                        )
                    })
                    .collect(),
            ),
        }
    }
}

pub fn addr(hex40: &str) -> Address {
    parse_address("address literal", hex40).expect("valid address literal")
}
