//! Typed view of the session state carried in Create/Update/Remove IEs.

use std::net::Ipv6Addr;

use super::ie::{apply_action, find, find_all, interface, types, FSeid, FTeid, Ie, OuterHeaderCreation, UeIpAddress};
use super::PfcpError;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Pdi {
    pub source_interface: u8,
    pub f_teid: Option<FTeid>,
    pub ue_ip: Option<UeIpAddress>,
    pub network_instance: Option<String>,
    pub qfi: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pdr {
    pub pdr_id: u16,
    pub precedence: u32,
    pub pdi: Pdi,
    pub outer_header_removal: Option<u8>,
    pub far_id: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Far {
    pub far_id: u32,
    pub apply_action: u8,
    pub destination_interface: Option<u8>,
    pub network_instance: Option<String>,
    pub outer_header_creation: Option<OuterHeaderCreation>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PfcpSession {
    pub cp_fseid: FSeid,
    pub up_fseid: FSeid,
    pub pdrs: Vec<Pdr>,
    pub fars: Vec<Far>,
}

fn missing(ie_type: u16) -> PfcpError {
    PfcpError::MissingIe(ie_type)
}

fn req(ies: &[Ie], ie_type: u16) -> Result<&Ie, PfcpError> {
    find(ies, ie_type).ok_or(missing(ie_type))
}

impl Pdr {
    pub fn from_ie(ie: &Ie) -> Result<Self, PfcpError> {
        let c = ie.children();
        let pdi_ie = req(c, types::PDI)?;
        let p = pdi_ie.children();
        let pdi = Pdi {
            source_interface: req(p, types::SOURCE_INTERFACE)?.as_interface()?,
            f_teid: find(p, types::F_TEID).map(Ie::as_f_teid).transpose()?,
            ue_ip: find(p, types::UE_IP_ADDRESS).map(Ie::as_ue_ip_address).transpose()?,
            network_instance: find(p, types::NETWORK_INSTANCE).map(Ie::as_network_instance),
            qfi: find(p, types::QFI).map(|q| q.as_u8().map(|v| v & 0x3f)).transpose()?,
        };
        Ok(Pdr {
            pdr_id: req(c, types::PDR_ID)?.as_u16()?,
            precedence: req(c, types::PRECEDENCE)?.as_u32()?,
            pdi,
            outer_header_removal: find(c, types::OUTER_HEADER_REMOVAL).map(Ie::as_u8).transpose()?,
            far_id: req(c, types::FAR_ID)?.as_u32()?,
        })
    }

    pub fn to_ie(&self) -> Ie {
        let mut pdi = vec![Ie::source_interface(self.pdi.source_interface)];
        if let Some(FTeid { teid: Some(teid), ipv6: Some(addr), .. }) = self.pdi.f_teid {
            pdi.push(Ie::f_teid(teid, addr));
        }
        if let Some(n) = &self.pdi.network_instance {
            pdi.push(Ie::network_instance(n));
        }
        if let Some(UeIpAddress { ipv6: Some(addr), destination, .. }) = self.pdi.ue_ip {
            pdi.push(Ie::ue_ip_address(addr, destination));
        }
        if let Some(q) = self.pdi.qfi {
            pdi.push(Ie::qfi(q));
        }
        let mut c = vec![Ie::pdr_id(self.pdr_id), Ie::precedence(self.precedence), Ie::grouped(types::PDI, pdi)];
        if let Some(r) = self.outer_header_removal {
            c.push(Ie::outer_header_removal(r));
        }
        c.push(Ie::far_id(self.far_id));
        Ie::grouped(types::CREATE_PDR, c)
    }

    pub fn is_access(&self) -> bool {
        self.pdi.source_interface == interface::ACCESS
    }

    pub fn is_core(&self) -> bool {
        self.pdi.source_interface == interface::CORE
    }
}

impl Far {
    pub fn from_ie(ie: &Ie) -> Result<Self, PfcpError> {
        let c = ie.children();
        let mut far = Far {
            far_id: req(c, types::FAR_ID)?.as_u32()?,
            apply_action: req(c, types::APPLY_ACTION)?.as_u8()?,
            destination_interface: None,
            network_instance: None,
            outer_header_creation: None,
        };
        if let Some(fp) = find(c, types::FORWARDING_PARAMETERS) {
            far.apply_forwarding_parameters(fp)?;
        }
        Ok(far)
    }

    fn apply_forwarding_parameters(&mut self, fp: &Ie) -> Result<(), PfcpError> {
        let f = fp.children();
        if let Some(d) = find(f, types::DESTINATION_INTERFACE) {
            self.destination_interface = Some(d.as_interface()?);
        }
        if let Some(n) = find(f, types::NETWORK_INSTANCE) {
            self.network_instance = Some(n.as_network_instance());
        }
        if let Some(o) = find(f, types::OUTER_HEADER_CREATION) {
            self.outer_header_creation = Some(o.as_outer_header_creation()?);
        }
        Ok(())
    }

    /// Applies an Update FAR IE onto this FAR.
    pub fn update(&mut self, ie: &Ie) -> Result<(), PfcpError> {
        let c = ie.children();
        if let Some(a) = find(c, types::APPLY_ACTION) {
            self.apply_action = a.as_u8()?;
        }
        if let Some(fp) = find(c, types::UPDATE_FORWARDING_PARAMETERS) {
            self.apply_forwarding_parameters(fp)?;
        }
        Ok(())
    }

    pub fn to_ie(&self) -> Ie {
        let mut c = vec![Ie::far_id(self.far_id), Ie::apply_action(self.apply_action)];
        let mut fp = Vec::new();
        if let Some(d) = self.destination_interface {
            fp.push(Ie::destination_interface(d));
        }
        if let Some(n) = &self.network_instance {
            fp.push(Ie::network_instance(n));
        }
        if let Some(OuterHeaderCreation { teid: Some(teid), ipv6: Some(addr), .. }) = self.outer_header_creation {
            fp.push(Ie::outer_header_creation(teid, addr));
        }
        if !fp.is_empty() {
            c.push(Ie::grouped(types::FORWARDING_PARAMETERS, fp));
        }
        Ie::grouped(types::CREATE_FAR, c)
    }

    pub fn forwards(&self) -> bool {
        self.apply_action & apply_action::FORW != 0
    }

    /// gNB tunnel endpoint from Outer Header Creation: `(teid, address)`.
    pub fn gnb_tunnel(&self) -> Option<(u32, Ipv6Addr)> {
        let ohc = self.outer_header_creation?;
        Some((ohc.teid?, ohc.ipv6?))
    }
}

/// Builds an Update FAR that retargets the downlink tunnel.
pub fn update_far_ie(far_id: u32, teid: u32, gnb: Ipv6Addr) -> Ie {
    Ie::grouped(
        types::UPDATE_FAR,
        vec![
            Ie::far_id(far_id),
            Ie::grouped(
                types::UPDATE_FORWARDING_PARAMETERS,
                vec![Ie::destination_interface(interface::ACCESS), Ie::outer_header_creation(teid, gnb)],
            ),
        ],
    )
}

pub fn remove_pdr_ie(pdr_id: u16) -> Ie {
    Ie::grouped(types::REMOVE_PDR, vec![Ie::pdr_id(pdr_id)])
}

pub fn remove_far_ie(far_id: u32) -> Ie {
    Ie::grouped(types::REMOVE_FAR, vec![Ie::far_id(far_id)])
}

impl PfcpSession {
    /// Collects PDRs and FARs from the Create PDR / Create FAR IEs of an
    /// establishment request.
    pub fn from_establishment(ies: &[Ie], up_fseid: FSeid) -> Result<Self, PfcpError> {
        let cp_fseid = req(ies, types::F_SEID)?.as_f_seid()?;
        let pdrs = find_all(ies, types::CREATE_PDR).map(Pdr::from_ie).collect::<Result<Vec<_>, _>>()?;
        let fars = find_all(ies, types::CREATE_FAR).map(Far::from_ie).collect::<Result<Vec<_>, _>>()?;
        let s = PfcpSession { cp_fseid, up_fseid, pdrs, fars };
        s.validate()?;
        Ok(s)
    }

    /// Applies a modification request's rule IEs, returning the new state.
    pub fn modified(&self, ies: &[Ie]) -> Result<Self, PfcpError> {
        let mut s = self.clone();
        for ie in find_all(ies, types::REMOVE_PDR) {
            let id = req(ie.children(), types::PDR_ID)?.as_u16()?;
            s.pdrs.retain(|p| p.pdr_id != id);
        }
        for ie in find_all(ies, types::REMOVE_FAR) {
            let id = req(ie.children(), types::FAR_ID)?.as_u32()?;
            s.fars.retain(|f| f.far_id != id);
        }
        for ie in find_all(ies, types::CREATE_FAR) {
            let far = Far::from_ie(ie)?;
            s.fars.retain(|f| f.far_id != far.far_id);
            s.fars.push(far);
        }
        for ie in find_all(ies, types::UPDATE_FAR) {
            let id = req(ie.children(), types::FAR_ID)?.as_u32()?;
            let far = s.fars.iter_mut().find(|f| f.far_id == id).ok_or(PfcpError::UnknownRule("FAR"))?;
            far.update(ie)?;
        }
        for ie in find_all(ies, types::CREATE_PDR) {
            let pdr = Pdr::from_ie(ie)?;
            s.pdrs.retain(|p| p.pdr_id != pdr.pdr_id);
            s.pdrs.push(pdr);
        }
        s.pdrs.sort_by_key(|p| p.pdr_id);
        s.fars.sort_by_key(|f| f.far_id);
        s.validate()?;
        Ok(s)
    }

    /// Every PDR references an existing FAR; there is an access-side PDR
    /// with an F-TEID and a core-side PDR with a UE address.
    pub fn validate(&self) -> Result<(), PfcpError> {
        if self.pdrs.is_empty() {
            return Err(missing(types::CREATE_PDR));
        }
        for p in &self.pdrs {
            if !self.fars.iter().any(|f| f.far_id == p.far_id) {
                return Err(missing(types::CREATE_FAR));
            }
            if p.is_access() && p.pdi.f_teid.and_then(|t| t.teid).is_none() {
                return Err(missing(types::F_TEID));
            }
            if p.is_core() && p.pdi.ue_ip.is_none() {
                return Err(missing(types::UE_IP_ADDRESS));
            }
        }
        if !self.pdrs.iter().any(Pdr::is_access) {
            return Err(missing(types::F_TEID));
        }
        if !self.pdrs.iter().any(Pdr::is_core) {
            return Err(missing(types::UE_IP_ADDRESS));
        }
        Ok(())
    }

    pub fn far(&self, id: u32) -> Option<&Far> {
        self.fars.iter().find(|f| f.far_id == id)
    }
}
