use std::collections::{BTreeMap, HashMap};
use std::net::Ipv6Addr;

use crate::addr::{mask, Ipv6Prefix};

/// Longest-prefix-match map: one hash table per populated prefix length,
/// probed from the longest length down.
#[derive(Debug, Clone)]
pub struct PrefixMap<T> {
    by_len: BTreeMap<u8, HashMap<u128, T>>,
}

impl<T> Default for PrefixMap<T> {
    fn default() -> Self {
        Self { by_len: BTreeMap::new() }
    }
}

impl<T> PrefixMap<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, prefix: Ipv6Prefix, value: T) -> Option<T> {
        self.by_len.entry(prefix.len()).or_default().insert(prefix.bits(), value)
    }

    pub fn get(&self, prefix: &Ipv6Prefix) -> Option<&T> {
        self.by_len.get(&prefix.len())?.get(&prefix.bits())
    }

    pub fn get_mut(&mut self, prefix: &Ipv6Prefix) -> Option<&mut T> {
        self.by_len.get_mut(&prefix.len())?.get_mut(&prefix.bits())
    }

    pub fn entry_or_insert_with(&mut self, prefix: Ipv6Prefix, f: impl FnOnce() -> T) -> &mut T {
        self.by_len.entry(prefix.len()).or_default().entry(prefix.bits()).or_insert_with(f)
    }

    pub fn remove(&mut self, prefix: &Ipv6Prefix) -> Option<T> {
        let table = self.by_len.get_mut(&prefix.len())?;
        let v = table.remove(&prefix.bits());
        if table.is_empty() {
            self.by_len.remove(&prefix.len());
        }
        v
    }

    /// Longest prefix containing `addr`.
    pub fn lookup(&self, addr: Ipv6Addr) -> Option<(Ipv6Prefix, &T)> {
        let bits = u128::from(addr);
        self.by_len.iter().rev().find_map(|(&len, table)| {
            let key = bits & mask(len);
            table.get(&key).map(|v| (Ipv6Prefix::new(Ipv6Addr::from(key), len).expect("len <= 128"), v))
        })
    }

    pub fn len(&self) -> usize {
        self.by_len.values().map(HashMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.by_len.is_empty()
    }
}
