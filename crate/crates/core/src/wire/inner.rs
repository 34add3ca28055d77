use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use super::{read_addr, Result, WireError};

/// User traffic carried inside the tunnel. Opaque apart from the version
/// nibble and the address fields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InnerPdu {
    bytes: Vec<u8>,
}

impl InnerPdu {
    pub fn new(bytes: Vec<u8>) -> Result<Self> {
        let min = match bytes.first().map(|b| b >> 4) {
            Some(4) => 20,
            Some(6) => 40,
            _ => return Err(WireError::BadInnerPdu),
        };
        if bytes.len() < min {
            return Err(WireError::TooShort { needed: min, got: bytes.len() });
        }
        Ok(Self { bytes })
    }

    pub fn ip_version(&self) -> u8 {
        self.bytes[0] >> 4
    }

    /// IP protocol number to announce in the enclosing header.
    pub fn protocol(&self) -> u8 {
        if self.ip_version() == 4 {
            super::proto::IPV4
        } else {
            super::proto::IPV6
        }
    }

    pub fn src(&self) -> IpAddr {
        match self.ip_version() {
            4 => IpAddr::V4(Ipv4Addr::new(self.bytes[12], self.bytes[13], self.bytes[14], self.bytes[15])),
            _ => IpAddr::V6(read_addr(&self.bytes[8..])),
        }
    }

    pub fn dst(&self) -> IpAddr {
        match self.ip_version() {
            4 => IpAddr::V4(Ipv4Addr::new(self.bytes[16], self.bytes[17], self.bytes[18], self.bytes[19])),
            _ => IpAddr::V6(read_addr(&self.bytes[24..])),
        }
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}

/// Maps an inner address onto the IPv6 space used by the classifiers;
/// IPv4 addresses become IPv4-mapped IPv6 addresses.
pub fn classifier_addr(addr: IpAddr) -> Ipv6Addr {
    match addr {
        IpAddr::V6(a) => a,
        IpAddr::V4(a) => a.to_ipv6_mapped(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn version_nibble_is_checked() {
        assert_eq!(InnerPdu::new(vec![]).unwrap_err(), WireError::BadInnerPdu);
        assert_eq!(InnerPdu::new(vec![0x50; 40]).unwrap_err(), WireError::BadInnerPdu);
        assert!(matches!(InnerPdu::new(vec![0x60; 39]), Err(WireError::TooShort { .. })));
        let mut v4 = vec![0u8; 20];
        v4[0] = 0x45;
        v4[12..16].copy_from_slice(&[10, 0, 0, 1]);
        v4[16..20].copy_from_slice(&[10, 0, 0, 2]);
        let pdu = InnerPdu::new(v4).unwrap();
        assert_eq!(pdu.ip_version(), 4);
        assert_eq!(pdu.protocol(), 4);
        assert_eq!(pdu.dst(), "10.0.0.2".parse::<IpAddr>().unwrap());
        assert_eq!(classifier_addr(pdu.src()), "::ffff:10.0.0.1".parse::<Ipv6Addr>().unwrap());
    }
}
