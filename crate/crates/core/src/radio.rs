//! First-order radio energy model and message sizing.
//!
//! Every transmission costs `e_elec * bits + e_amp * bits * d^2` and every
//! reception costs `e_elec * bits`, with energies expressed in nanojoules.
//! Message sizes are the exact sum of the declared fields of a [`Message`],
//! looked up in a [`SizeTable`]; there is no implicit framing overhead beyond
//! the `control` baseline that every message carries.

use thiserror::Error;

use crate::keying::{FreshnessValue, KeyId, MacTag};
use crate::model::NodeId;

#[derive(Debug, Error, PartialEq)]
pub enum RadioError {
    #[error("radio parameter {name} must be finite and non-negative, got {value}")]
    InvalidParam { name: &'static str, value: f64 },
    #[error("field {field:?} is not allowed in a {kind:?} message")]
    FieldNotAllowed { kind: MessageKind, field: MsgField },
    #[error("field {field:?} appears more than once in a {kind:?} message")]
    DuplicateField { kind: MessageKind, field: MsgField },
}

/// Transmitter/receiver electronics and amplifier constants.
///
/// `e_elec_nj` is charged per bit on both ends of a link; `e_amp_pj` is the
/// amplifier cost in picojoules per bit per square metre, charged on the
/// transmit side only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioParams {
    pub e_elec_nj: f64,
    pub e_amp_pj: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams { e_elec_nj: 50.0, e_amp_pj: 100.0 }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<(), RadioError> {
        for (name, value) in [("e_elec_nj", self.e_elec_nj), ("e_amp_pj", self.e_amp_pj)] {
            if !value.is_finite() || value < 0.0 {
                return Err(RadioError::InvalidParam { name, value });
            }
        }
        Ok(())
    }

    /// Energy to transmit `bits` over `distance_m` metres, in nanojoules.
    ///
    /// Distances must be finite and non-negative; parameters are validated at
    /// the configuration boundary so the hot path stays unchecked.
    pub fn tx_cost(&self, bits: u64, distance_m: f64) -> f64 {
        debug_assert!(distance_m.is_finite() && distance_m >= 0.0);
        let b = bits as f64;
        self.e_elec_nj * b + (self.e_amp_pj / 1000.0) * b * distance_m * distance_m
    }

    /// Energy to receive `bits`, in nanojoules.
    pub fn rx_cost(&self, bits: u64) -> f64 {
        self.e_elec_nj * bits as f64
    }
}

/// Bit widths of every field a message can declare.
///
/// `flag_bits` applies to each boolean tag individually (RT, PR, AT, ACK) and
/// `slot_entry_bits` to each `(member id, slot)` pair in a schedule or
/// confirmation, so those fields repeat per member.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SizeTable {
    pub control_bits: u64,
    pub data_bits: u64,
    pub key_id_bits: u64,
    pub nonce_bits: u64,
    pub counter_bits: u64,
    pub mac_bits: u64,
    pub flag_bits: u64,
    pub ttl_bits: u64,
    pub timestamp_bits: u64,
    pub slot_entry_bits: u64,
}

impl Default for SizeTable {
    fn default() -> Self {
        SizeTable {
            control_bits: 50,
            data_bits: 2000,
            key_id_bits: 16,
            nonce_bits: 32,
            counter_bits: 16,
            mac_bits: 32,
            flag_bits: 1,
            ttl_bits: 4,
            timestamp_bits: 16,
            slot_entry_bits: 24,
        }
    }
}

/// One sizable field of a message. Security-bearing fields are the ones
/// zeroed out when comparing a secured protocol against its plain variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MsgField {
    Control,
    Data,
    KeyId,
    Nonce,
    Counter,
    Mac,
    RtFlag,
    PrFlag,
    AtFlag,
    AckFlag,
    Ttl,
    Timestamp,
    SlotEntry,
}

impl MsgField {
    pub fn bits(self, t: &SizeTable) -> u64 {
        match self {
            MsgField::Control => t.control_bits,
            MsgField::Data => t.data_bits,
            MsgField::KeyId => t.key_id_bits,
            MsgField::Nonce => t.nonce_bits,
            MsgField::Counter => t.counter_bits,
            MsgField::Mac => t.mac_bits,
            MsgField::RtFlag | MsgField::PrFlag | MsgField::AtFlag | MsgField::AckFlag => {
                t.flag_bits
            }
            MsgField::Ttl => t.ttl_bits,
            MsgField::Timestamp => t.timestamp_bits,
            MsgField::SlotEntry => t.slot_entry_bits,
        }
    }

    pub fn is_security(self) -> bool {
        matches!(
            self,
            MsgField::KeyId | MsgField::Nonce | MsgField::Counter | MsgField::Mac
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MessageKind {
    Adv,
    AdvRelay,
    Join,
    Schedule,
    Report,
    ConfirmRequest,
    MemberAck,
    ChAck,
    BsPacket,
    DirectBsPacket,
}

impl MessageKind {
    /// Fields a message of this kind may declare. `SlotEntry` is the only
    /// field allowed to repeat.
    fn allowed(self, field: MsgField) -> bool {
        use MessageKind::*;
        use MsgField::*;
        match self {
            Adv => matches!(field, Control | Nonce | Ttl | Timestamp),
            AdvRelay => matches!(field, Control | Ttl | Timestamp),
            Join => matches!(field, Control | Ttl | Timestamp | KeyId | Nonce | Mac),
            Schedule => matches!(field, Control | SlotEntry),
            Report => matches!(
                field,
                Control | Data | RtFlag | PrFlag | Ttl | KeyId | Nonce | Counter | Mac
            ),
            ConfirmRequest => matches!(
                field,
                Control | SlotEntry | Ttl | RtFlag | PrFlag | AtFlag | KeyId | Counter | Mac
            ),
            MemberAck | ChAck => matches!(field, Control | AckFlag | KeyId | Counter | Mac),
            BsPacket | DirectBsPacket => {
                matches!(field, Control | Data | KeyId | Counter | Mac)
            }
        }
    }
}

/// Who a message is aimed at. Broadcasts reach every alive node within radio
/// range of the sender; the base station is not a node and pays nothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recipient {
    Unicast(NodeId),
    Broadcast,
    Bs,
}

/// Authentication material carried by secured messages. It never contributes
/// to the bit count (the declared fields do); it is what receivers verify.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Auth {
    pub key: KeyId,
    pub freshness: FreshnessValue,
    pub mac: MacTag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub kind: MessageKind,
    pub sender: NodeId,
    pub recipient: Recipient,
    pub fields: Vec<MsgField>,
    pub auth: Option<Auth>,
}

impl Message {
    fn new(kind: MessageKind, sender: NodeId, recipient: Recipient, fields: Vec<MsgField>) -> Self {
        Message { kind, sender, recipient, fields, auth: None }
    }

    fn with_auth(mut self, auth: Auth, fields: &[MsgField]) -> Self {
        self.fields.extend_from_slice(fields);
        self.auth = Some(auth);
        self
    }

    /// Validated size in bits: the sum of the declared fields.
    pub fn size_of(&self, t: &SizeTable) -> Result<u64, RadioError> {
        let mut seen = Vec::with_capacity(self.fields.len());
        let mut bits = 0u64;
        for &field in &self.fields {
            if !self.kind.allowed(field) {
                return Err(RadioError::FieldNotAllowed { kind: self.kind, field });
            }
            if field != MsgField::SlotEntry {
                if seen.contains(&field) {
                    return Err(RadioError::DuplicateField { kind: self.kind, field });
                }
                seen.push(field);
            }
            bits += field.bits(t);
        }
        Ok(bits)
    }

    /// Size split into (control, data, security) bit classes.
    pub fn class_split(&self, t: &SizeTable) -> (u64, u64, u64) {
        let mut control = 0;
        let mut data = 0;
        let mut security = 0;
        for &field in &self.fields {
            let b = field.bits(t);
            if field == MsgField::Data {
                data += b;
            } else if field.is_security() {
                security += b;
            } else {
                control += b;
            }
        }
        (control, data, security)
    }

    // ---- plain catalog -------------------------------------------------

    pub fn adv(ch: NodeId) -> Self {
        Self::new(MessageKind::Adv, ch, Recipient::Broadcast, vec![MsgField::Control])
    }

    pub fn join(member: NodeId, ch: NodeId) -> Self {
        Self::new(MessageKind::Join, member, Recipient::Unicast(ch), vec![MsgField::Control])
    }

    pub fn schedule(ch: NodeId, member_count: usize) -> Self {
        let mut fields = vec![MsgField::Control];
        fields.extend(std::iter::repeat_n(MsgField::SlotEntry, member_count));
        Self::new(MessageKind::Schedule, ch, Recipient::Broadcast, fields)
    }

    pub fn report(member: NodeId, ch: NodeId) -> Self {
        Self::new(
            MessageKind::Report,
            member,
            Recipient::Unicast(ch),
            vec![MsgField::Control, MsgField::Data],
        )
    }

    pub fn bs_packet(ch: NodeId) -> Self {
        Self::new(MessageKind::BsPacket, ch, Recipient::Bs, vec![MsgField::Control, MsgField::Data])
    }

    pub fn direct_bs_packet(node: NodeId) -> Self {
        Self::new(
            MessageKind::DirectBsPacket,
            node,
            Recipient::Bs,
            vec![MsgField::Control, MsgField::Data],
        )
    }

    // ---- TTL-flooded advertisements ------------------------------------

    pub fn tcca_adv(ch: NodeId) -> Self {
        Self::new(
            MessageKind::Adv,
            ch,
            Recipient::Broadcast,
            vec![MsgField::Control, MsgField::Ttl, MsgField::Timestamp],
        )
    }

    pub fn tcca_adv_relay(relay: NodeId) -> Self {
        Self::new(
            MessageKind::AdvRelay,
            relay,
            Recipient::Broadcast,
            vec![MsgField::Control, MsgField::Ttl, MsgField::Timestamp],
        )
    }

    /// Join that echoes the advertisement's timestamp and remaining TTL back
    /// to the cluster head. `to` is the next hop on the recorded path.
    pub fn tcca_join(member: NodeId, to: NodeId) -> Self {
        Self::new(
            MessageKind::Join,
            member,
            Recipient::Unicast(to),
            vec![MsgField::Control, MsgField::Timestamp, MsgField::Ttl],
        )
    }

    // ---- keyed variants -------------------------------------------------

    pub fn sec_adv(ch: NodeId) -> Self {
        Self::new(
            MessageKind::Adv,
            ch,
            Recipient::Broadcast,
            vec![MsgField::Control, MsgField::Nonce],
        )
    }

    pub fn sec_join(member: NodeId, ch: NodeId, auth: Auth) -> Self {
        Self::join(member, ch).with_auth(auth, &[MsgField::KeyId, MsgField::Nonce, MsgField::Mac])
    }

    pub fn sec_report(member: NodeId, ch: NodeId, auth: Auth) -> Self {
        Self::report(member, ch).with_auth(auth, &[MsgField::Nonce, MsgField::Mac])
    }

    pub fn sec_bs_packet(ch: NodeId, auth: Auth) -> Self {
        Self::bs_packet(ch).with_auth(auth, &[MsgField::Counter, MsgField::Mac])
    }

    pub fn sec_direct_bs_packet(node: NodeId, auth: Auth) -> Self {
        Self::direct_bs_packet(node).with_auth(auth, &[MsgField::Counter, MsgField::Mac])
    }

    // ---- full/half transmission rounds ----------------------------------

    /// Full-round report, broadcast to direct neighbours only (TTL 1). The
    /// RT tag marks it as requesting confirmation.
    pub fn report_broadcast(sensor: NodeId) -> Self {
        Self::new(
            MessageKind::Report,
            sensor,
            Recipient::Broadcast,
            vec![MsgField::Control, MsgField::Data, MsgField::RtFlag, MsgField::Ttl, MsgField::PrFlag],
        )
    }

    /// Half-round report, unicast straight to the remembered cluster head.
    pub fn report_half(sensor: NodeId, ch: NodeId) -> Self {
        Self::new(
            MessageKind::Report,
            sensor,
            Recipient::Unicast(ch),
            vec![MsgField::Control, MsgField::Data, MsgField::Ttl, MsgField::PrFlag],
        )
    }

    /// Confirmation of stored reports, one slot entry per confirmed sender,
    /// carrying the head's ability tag (one or two rounds).
    pub fn confirm_request(ch: NodeId, member_count: usize) -> Self {
        let mut fields = vec![MsgField::Control];
        fields.extend(std::iter::repeat_n(MsgField::SlotEntry, member_count));
        fields.extend([MsgField::Ttl, MsgField::RtFlag, MsgField::PrFlag, MsgField::AtFlag]);
        Self::new(MessageKind::ConfirmRequest, ch, Recipient::Broadcast, fields)
    }

    pub fn member_ack(member: NodeId, ch: NodeId) -> Self {
        Self::new(
            MessageKind::MemberAck,
            member,
            Recipient::Unicast(ch),
            vec![MsgField::Control, MsgField::AckFlag],
        )
    }

    pub fn ch_ack(ch: NodeId, member: NodeId) -> Self {
        Self::new(
            MessageKind::ChAck,
            ch,
            Recipient::Unicast(member),
            vec![MsgField::Control, MsgField::AckFlag],
        )
    }

    /// Keyed counterpart of any full/half-round message: the same fields plus
    /// a uniform (key id, counter, MAC) triple.
    pub fn keyed(self, auth: Auth) -> Self {
        self.with_auth(auth, &[MsgField::KeyId, MsgField::Counter, MsgField::Mac])
    }
}
