use super::{need, Result, WireError};

pub const GTPU_ECHO_REQUEST: u8 = 1;
pub const GTPU_ECHO_RESPONSE: u8 = 2;
pub const GTPU_G_PDU: u8 = 255;

pub const EXT_PDU_SESSION_CONTAINER: u8 = 0x85;

pub const PDU_TYPE_DOWNLINK: u8 = 0;
pub const PDU_TYPE_UPLINK: u8 = 1;

const FLAG_VERSION_PT: u8 = 0x30;
const FLAG_E: u8 = 0x04;
const FLAG_S: u8 = 0x02;
const FLAG_PN: u8 = 0x01;

/// The PDU Session Container extension, in its 4-octet form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PduSessionContainer {
    pub pdu_type: u8,
    pub qfi: u8,
}

impl PduSessionContainer {
    pub fn uplink(qfi: u8) -> Self {
        Self { pdu_type: PDU_TYPE_UPLINK, qfi }
    }

    pub fn downlink(qfi: u8) -> Self {
        Self { pdu_type: PDU_TYPE_DOWNLINK, qfi }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GtpuExtension {
    PduSession(PduSessionContainer),
    /// Any other extension, kept verbatim. `content` excludes the length
    /// octet and the next-type octet.
    Other { ext_type: u8, content: Vec<u8> },
}

impl GtpuExtension {
    fn ext_type(&self) -> u8 {
        match self {
            GtpuExtension::PduSession(_) => EXT_PDU_SESSION_CONTAINER,
            GtpuExtension::Other { ext_type, .. } => *ext_type,
        }
    }
}

/// GTP-U v1 header. The E flag is implied by a non-empty `extensions`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GtpuHeader {
    pub message_type: u8,
    pub teid: u32,
    pub s_flag: bool,
    pub pn_flag: bool,
    pub sequence: u16,
    pub n_pdu: u8,
    pub extensions: Vec<GtpuExtension>,
}

impl GtpuHeader {
    pub fn g_pdu(teid: u32) -> Self {
        Self {
            message_type: GTPU_G_PDU,
            teid,
            s_flag: false,
            pn_flag: false,
            sequence: 0,
            n_pdu: 0,
            extensions: Vec::new(),
        }
    }

    pub fn with_pdu_session(mut self, c: PduSessionContainer) -> Self {
        self.extensions.push(GtpuExtension::PduSession(c));
        self
    }

    pub fn e_flag(&self) -> bool {
        !self.extensions.is_empty()
    }

    fn has_optional_block(&self) -> bool {
        self.e_flag() || self.s_flag || self.pn_flag
    }

    /// First PDU Session Container in the chain. Containers kept opaquely
    /// (non-canonical length) are decoded from their first two octets.
    pub fn pdu_session(&self) -> Option<PduSessionContainer> {
        self.extensions.iter().find_map(|e| match e {
            GtpuExtension::PduSession(c) => Some(*c),
            GtpuExtension::Other { ext_type: EXT_PDU_SESSION_CONTAINER, content } if content.len() >= 2 => {
                Some(PduSessionContainer { pdu_type: content[0] >> 4, qfi: content[1] & 0x3f })
            }
            _ => None,
        })
    }

    pub fn qfi(&self) -> Option<u8> {
        self.pdu_session().map(|c| c.qfi)
    }

    fn header_len(&self) -> usize {
        let mut n = 8;
        if self.has_optional_block() {
            n += 4;
        }
        for e in &self.extensions {
            n += match e {
                GtpuExtension::PduSession(_) => 4,
                GtpuExtension::Other { content, .. } => content.len() + 2,
            };
        }
        n
    }
}

pub fn parse_gtpu(bytes: &[u8]) -> Result<(GtpuHeader, &[u8])> {
    need(bytes, 8)?;
    let flags = bytes[0];
    let version = flags >> 5;
    if version != 1 {
        return Err(WireError::BadVersion(version));
    }
    if flags & 0x10 == 0 {
        // PT=0 is GTP', which this data plane never carries.
        return Err(WireError::BadVersion(version));
    }
    let message_type = bytes[1];
    if !matches!(message_type, GTPU_G_PDU | GTPU_ECHO_REQUEST | GTPU_ECHO_RESPONSE) {
        return Err(WireError::UnsupportedMessageType(message_type));
    }
    let length = usize::from(u16::from_be_bytes([bytes[2], bytes[3]]));
    if bytes.len() - 8 != length {
        return Err(WireError::LengthMismatch { declared: length, actual: bytes.len() - 8 });
    }
    let teid = u32::from_be_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]);
    let (e, s, pn) = (flags & FLAG_E != 0, flags & FLAG_S != 0, flags & FLAG_PN != 0);
    let mut header = GtpuHeader { message_type, teid, s_flag: s, pn_flag: pn, sequence: 0, n_pdu: 0, extensions: vec![] };
    let mut pos = 8;
    if e || s || pn {
        need(bytes, 12)?;
        header.sequence = u16::from_be_bytes([bytes[8], bytes[9]]);
        header.n_pdu = bytes[10];
        let mut next = bytes[11];
        pos = 12;
        if e && next == 0 {
            return Err(WireError::BadExtensionChain("E flag set without an extension header"));
        }
        if !e && next != 0 {
            return Err(WireError::BadExtensionChain("next extension type set without E flag"));
        }
        while next != 0 {
            let units = *bytes.get(pos).ok_or(WireError::BadExtensionChain("truncated extension header"))?;
            if units == 0 {
                return Err(WireError::BadExtensionChain("zero-length extension header"));
            }
            let end = pos + 4 * usize::from(units);
            if end > bytes.len() {
                return Err(WireError::BadExtensionChain("extension header overruns packet"));
            }
            let content = &bytes[pos + 1..end - 1];
            header.extensions.push(decode_extension(next, content));
            next = bytes[end - 1];
            pos = end;
        }
    }
    Ok((header, &bytes[pos..]))
}

fn decode_extension(ext_type: u8, content: &[u8]) -> GtpuExtension {
    // Only the canonical form with no optional flags maps onto the typed
    // container; anything richer is kept verbatim so it re-encodes exactly.
    if ext_type == EXT_PDU_SESSION_CONTAINER && content.len() == 2 && content[0] & 0x0f == 0 && content[1] & 0xc0 == 0 {
        let pdu_type = content[0] >> 4;
        if pdu_type <= PDU_TYPE_UPLINK {
            return GtpuExtension::PduSession(PduSessionContainer { pdu_type, qfi: content[1] });
        }
    }
    GtpuExtension::Other { ext_type, content: content.to_vec() }
}

pub fn serialize_gtpu(header: &GtpuHeader, inner: &[u8]) -> Result<Vec<u8>> {
    let hlen = header.header_len();
    let length = hlen - 8 + inner.len();
    let length16 = u16::try_from(length).map_err(|_| WireError::Oversize(inner.len()))?;
    let mut out = Vec::with_capacity(hlen + inner.len());
    let mut flags = FLAG_VERSION_PT;
    if header.e_flag() {
        flags |= FLAG_E;
    }
    if header.s_flag {
        flags |= FLAG_S;
    }
    if header.pn_flag {
        flags |= FLAG_PN;
    }
    out.push(flags);
    out.push(header.message_type);
    out.extend_from_slice(&length16.to_be_bytes());
    out.extend_from_slice(&header.teid.to_be_bytes());
    if header.has_optional_block() {
        out.extend_from_slice(&header.sequence.to_be_bytes());
        out.push(header.n_pdu);
        out.push(header.extensions.first().map_or(0, GtpuExtension::ext_type));
        for (i, ext) in header.extensions.iter().enumerate() {
            let next = header.extensions.get(i + 1).map_or(0, GtpuExtension::ext_type);
            match ext {
                GtpuExtension::PduSession(c) => {
                    if c.qfi > 0x3f {
                        return Err(WireError::InvalidQfi(c.qfi));
                    }
                    out.extend_from_slice(&[1, c.pdu_type << 4, c.qfi, next]);
                }
                GtpuExtension::Other { content, .. } => {
                    if (content.len() + 2) % 4 != 0 || content.len() + 2 > 4 * 255 {
                        return Err(WireError::BadExtensionChain("opaque extension is not a whole number of words"));
                    }
                    out.push(((content.len() + 2) / 4) as u8);
                    out.extend_from_slice(content);
                    out.push(next);
                }
            }
        }
    }
    out.extend_from_slice(inner);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_g_pdu() {
        let bytes = serialize_gtpu(&GtpuHeader::g_pdu(1), &[1, 2, 3, 4]).unwrap();
        assert_eq!(bytes, [0x30, 0xff, 0x00, 0x04, 0, 0, 0, 1, 1, 2, 3, 4]);
        let (h, rest) = parse_gtpu(&bytes).unwrap();
        assert_eq!((h.message_type, h.teid), (255, 1));
        assert_eq!(rest, [1, 2, 3, 4]);
    }

    #[test]
    fn pdu_session_container_round_trip() {
        let h = GtpuHeader::g_pdu(7).with_pdu_session(PduSessionContainer::uplink(9));
        let bytes = serialize_gtpu(&h, b"data").unwrap();
        assert_eq!(bytes[0], 0x34);
        assert_eq!(u16::from_be_bytes([bytes[2], bytes[3]]) as usize, bytes.len() - 8);
        let (parsed, rest) = parse_gtpu(&bytes).unwrap();
        assert_eq!(parsed, h);
        assert_eq!(parsed.qfi(), Some(9));
        assert_eq!(rest, b"data");
    }

    #[test]
    fn sequence_only_emits_zeroed_next_type() {
        let h = GtpuHeader { s_flag: true, sequence: 0xbeef, ..GtpuHeader::g_pdu(3) };
        let bytes = serialize_gtpu(&h, &[]).unwrap();
        assert_eq!(bytes.len(), 12);
        assert_eq!(&bytes[8..], &[0xbe, 0xef, 0, 0]);
        assert_eq!(parse_gtpu(&bytes).unwrap().0, h);
    }

    #[test]
    fn unknown_extension_is_preserved() {
        let mut h = GtpuHeader::g_pdu(5);
        h.extensions.push(GtpuExtension::Other { ext_type: 0x40, content: vec![0x08, 0x68] });
        h.extensions.push(GtpuExtension::PduSession(PduSessionContainer::downlink(10)));
        let bytes = serialize_gtpu(&h, b"z").unwrap();
        let (parsed, _) = parse_gtpu(&bytes).unwrap();
        assert_eq!(parsed, h);
        assert_eq!(serialize_gtpu(&parsed, b"z").unwrap(), bytes);
    }

    #[test]
    fn rich_pdu_session_container_is_kept_opaque() {
        // Downlink container with the RQI bit set.
        let bytes = [0x34, 0xff, 0x00, 0x08, 0, 0, 0, 9, 0, 0, 0, 0x85, 1, 0x00, 0x4a, 0];
        let (h, _) = parse_gtpu(&bytes).unwrap();
        assert!(matches!(h.extensions[0], GtpuExtension::Other { ext_type: 0x85, .. }));
        assert_eq!(h.qfi(), Some(10));
        assert_eq!(serialize_gtpu(&h, &[]).unwrap(), bytes);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(parse_gtpu(&[0x30, 0xff, 0, 0]), Err(WireError::TooShort { .. })));
        assert_eq!(parse_gtpu(&[0x50, 0xff, 0, 0, 0, 0, 0, 0]).unwrap_err(), WireError::BadVersion(2));
        assert_eq!(parse_gtpu(&[0x30, 26, 0, 0, 0, 0, 0, 0]).unwrap_err(), WireError::UnsupportedMessageType(26));
        assert!(matches!(parse_gtpu(&[0x30, 0xff, 0, 1, 0, 0, 0, 0]), Err(WireError::LengthMismatch { .. })));
        // E set but next type zero.
        let e_no_ext = [0x34, 0xff, 0, 4, 0, 0, 0, 0, 0, 0, 0, 0];
        assert!(matches!(parse_gtpu(&e_no_ext), Err(WireError::BadExtensionChain(_))));
        // Extension claims 2 words but only 1 present.
        let overrun = [0x34, 0xff, 0, 8, 0, 0, 0, 0, 0, 0, 0, 0x85, 2, 0x10, 9, 0];
        assert!(matches!(parse_gtpu(&overrun), Err(WireError::BadExtensionChain(_))));
        let zero_len = [0x34, 0xff, 0, 8, 0, 0, 0, 0, 0, 0, 0, 0x85, 0, 0x10, 9, 0];
        assert!(matches!(parse_gtpu(&zero_len), Err(WireError::BadExtensionChain(_))));
    }

    #[test]
    fn echo_messages_accepted() {
        let h = GtpuHeader { message_type: GTPU_ECHO_REQUEST, s_flag: true, sequence: 1, ..GtpuHeader::g_pdu(0) };
        let bytes = serialize_gtpu(&h, &[]).unwrap();
        assert_eq!(parse_gtpu(&bytes).unwrap().0.message_type, GTPU_ECHO_REQUEST);
    }

    #[test]
    fn qfi_out_of_range_is_rejected() {
        let h = GtpuHeader::g_pdu(1).with_pdu_session(PduSessionContainer::uplink(64));
        assert_eq!(serialize_gtpu(&h, &[]).unwrap_err(), WireError::InvalidQfi(64));
    }
}
