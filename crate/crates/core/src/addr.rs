//! IPv6 prefixes.

use std::fmt;
use std::net::Ipv6Addr;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PrefixError {
    #[error("prefix length {0} exceeds 128")]
    TooLong(u8),
    #[error("malformed prefix `{0}`")]
    Malformed(String),
}

/// An IPv6 address plus prefix length. Host bits are always cleared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ipv6Prefix {
    addr: u128,
    len: u8,
}

pub(crate) fn mask(len: u8) -> u128 {
    if len == 0 {
        0
    } else {
        u128::MAX << (128 - u32::from(len))
    }
}

impl Ipv6Prefix {
    pub fn new(addr: Ipv6Addr, len: u8) -> Result<Self, PrefixError> {
        if len > 128 {
            return Err(PrefixError::TooLong(len));
        }
        Ok(Self { addr: u128::from(addr) & mask(len), len })
    }

    /// `/128` prefix covering exactly one address.
    pub fn host(addr: Ipv6Addr) -> Self {
        Self { addr: u128::from(addr), len: 128 }
    }

    pub const fn any() -> Self {
        Self { addr: 0, len: 0 }
    }

    pub fn addr(&self) -> Ipv6Addr {
        Ipv6Addr::from(self.addr)
    }

    pub fn bits(&self) -> u128 {
        self.addr
    }

    pub fn len(&self) -> u8 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn contains(&self, addr: Ipv6Addr) -> bool {
        u128::from(addr) & mask(self.len) == self.addr
    }

    pub fn overlaps(&self, other: &Ipv6Prefix) -> bool {
        let len = self.len.min(other.len);
        (self.addr ^ other.addr) & mask(len) == 0
    }
}

impl fmt::Display for Ipv6Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.addr(), self.len)
    }
}

impl FromStr for Ipv6Prefix {
    type Err = PrefixError;

    /// Accepts `addr/len` or a bare address (taken as `/128`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PrefixError::Malformed(s.to_string());
        match s.split_once('/') {
            Some((a, l)) => {
                let addr: Ipv6Addr = a.trim().parse().map_err(|_| bad())?;
                let len: u8 = l.trim().parse().map_err(|_| bad())?;
                Ipv6Prefix::new(addr, len)
            }
            None => Ok(Ipv6Prefix::host(s.trim().parse().map_err(|_| bad())?)),
        }
    }
}
