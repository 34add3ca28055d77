use std::fmt;
use std::net::Ipv6Addr;
use std::ops::Deref;

use super::Srv6Error;
use crate::addr::Ipv6Prefix;

/// Width of the GTP6.E argument: qfi(6) | reserved(2) | teid(32).
pub const GTP6E_ARGUMENT_BITS: u8 = 40;

/// A segment identifier with its locator/function/argument split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Sid {
    pub value: Ipv6Addr,
    pub locator_len: u8,
    pub function_len: u8,
}

impl Sid {
    pub fn argument_bits(&self) -> u8 {
        128 - self.locator_len - self.function_len
    }

    pub fn argument(&self) -> u128 {
        let bits = self.argument_bits();
        if bits == 0 {
            0
        } else {
            u128::from(self.value) & (u128::MAX >> (128 - u32::from(bits)))
        }
    }
}

impl fmt::Display for Sid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.value.fmt(f)
    }
}

/// Builds the End.M.GTP6.E SID carrying `teid` and `qfi` in its low 40 bits
/// under `prefix` (locator plus function).
pub fn encode_gtp6e_sid(prefix: Ipv6Prefix, teid: u32, qfi: u8) -> Result<Sid, Srv6Error> {
    if prefix.len() > 128 - GTP6E_ARGUMENT_BITS {
        return Err(Srv6Error::PrefixTooLong(prefix.len()));
    }
    if qfi > 0x3f {
        return Err(Srv6Error::InvalidQfi(qfi));
    }
    let args = (u128::from(qfi) << 34) | u128::from(teid);
    Ok(Sid {
        value: Ipv6Addr::from(prefix.bits() | args),
        locator_len: prefix.len(),
        function_len: 128 - GTP6E_ARGUMENT_BITS - prefix.len(),
    })
}

/// Inverse of [`encode_gtp6e_sid`]: returns `(teid, qfi)`.
pub fn decode_gtp6e_sid(sid: Ipv6Addr) -> (u32, u8) {
    let bits = u128::from(sid);
    (bits as u32, ((bits >> 34) & 0x3f) as u8)
}

/// A path through the SR domain, first waypoint first. Never empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SegmentList(Vec<Ipv6Addr>);

impl SegmentList {
    pub fn new(path: Vec<Ipv6Addr>) -> Result<Self, Srv6Error> {
        if path.is_empty() {
            Err(Srv6Error::EmptyPath)
        } else {
            Ok(Self(path))
        }
    }

    pub fn first(&self) -> Ipv6Addr {
        self.0[0]
    }

    /// Order in which the segments appear inside an SRH.
    pub fn wire_order(&self) -> Vec<Ipv6Addr> {
        self.0.iter().rev().copied().collect()
    }

    pub fn into_vec(self) -> Vec<Ipv6Addr> {
        self.0
    }
}

impl Deref for SegmentList {
    type Target = [Ipv6Addr];

    fn deref(&self) -> &[Ipv6Addr] {
        &self.0
    }
}

impl fmt::Display for SegmentList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            s.fmt(f)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gtp6e_bit_layout() {
        let prefix: Ipv6Prefix = "2001:db8:e::/64".parse().unwrap();
        let sid = encode_gtp6e_sid(prefix, 1, 10).unwrap();
        assert_eq!(sid.value, "2001:db8:e::28:0:1".parse::<Ipv6Addr>().unwrap());
        assert_eq!(sid.argument(), 0x28_0000_0001);
        assert_eq!(sid.argument_bits(), 40);
        assert_eq!(decode_gtp6e_sid(sid.value), (1, 10));
    }

    #[test]
    fn zero_arguments() {
        let prefix: Ipv6Prefix = "2001:db8:e::/64".parse().unwrap();
        let sid = encode_gtp6e_sid(prefix, 0, 0).unwrap();
        assert_eq!(sid.value, prefix.addr());
        assert_eq!(sid.argument(), 0);
    }

    #[test]
    fn prefix_must_leave_room() {
        assert!(encode_gtp6e_sid("2001:db8::/88".parse().unwrap(), 1, 1).is_ok());
        assert_eq!(
            encode_gtp6e_sid("2001:db8::/89".parse().unwrap(), 1, 1).unwrap_err(),
            Srv6Error::PrefixTooLong(89)
        );
        assert_eq!(
            encode_gtp6e_sid("2001:db8::/64".parse().unwrap(), 1, 64).unwrap_err(),
            Srv6Error::InvalidQfi(64)
        );
    }

    #[test]
    fn reserved_bits_are_ignored_on_decode() {
        let v = Ipv6Addr::from(0x2001_0db8_0000_0000_0000_0003_0000_0005u128);
        assert_eq!(decode_gtp6e_sid(v), (5, 0));
    }

    #[test]
    fn segment_list() {
        assert_eq!(SegmentList::new(vec![]).unwrap_err(), Srv6Error::EmptyPath);
        let a: Ipv6Addr = "::a".parse().unwrap();
        let b: Ipv6Addr = "::b".parse().unwrap();
        let l = SegmentList::new(vec![a, b]).unwrap();
        assert_eq!(l.first(), a);
        assert_eq!(l.wire_order(), vec![b, a]);
        assert_eq!(l.to_string(), "::a ::b");
    }
}
