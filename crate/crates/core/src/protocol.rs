//! Device-to-host wire format.
//!
//! Every sampling instant travels as one fixed-width ASCII record:
//!
//! ```text
//! CCCCCCCCCCCCCCCC\n
//! ^^^^            channel 0, zero-padded 4-digit decimal code
//!     ^^^^        channel 1
//!         ^^^^    channel 2
//!             ^^^^channel 3
//! ```
//!
//! 16 digits followed by a single line feed (0x0A), 17 bytes in total. There is
//! no checksum or sequence number; a record is accepted only if it has exactly
//! the right shape and every field is a valid 10-bit code. The line feed doubles
//! as the resynchronization point after corrupted input.

use std::fmt;

use thiserror::Error;

/// Number of analog channels carried in one frame.
pub const CHANNELS: usize = 4;
/// Digits per channel field.
pub const FIELD_WIDTH: usize = 4;
/// Digits in a record, excluding the delimiter.
pub const RECORD_DIGITS: usize = CHANNELS * FIELD_WIDTH;
/// Encoded record length including the trailing line feed.
pub const RECORD_LEN: usize = RECORD_DIGITS + 1;
/// Record delimiter.
pub const DELIMITER: u8 = b'\n';

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("ADC code {0} exceeds the 10-bit maximum of 1023")]
pub struct CodeOutOfRange(pub u16);

/// One 10-bit converter sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct AdcCode(u16);

impl AdcCode {
    pub const MAX: AdcCode = AdcCode(1023);
    pub const ZERO: AdcCode = AdcCode(0);

    pub fn new(value: u16) -> Result<Self, CodeOutOfRange> {
        if value <= Self::MAX.0 {
            Ok(AdcCode(value))
        } else {
            Err(CodeOutOfRange(value))
        }
    }

    /// Clamps `value` into the valid code range.
    pub fn saturating(value: i64) -> Self {
        AdcCode(value.clamp(0, i64::from(Self::MAX.0)) as u16)
    }

    pub fn value(self) -> u16 {
        self.0
    }

    pub fn is_full_scale(self) -> bool {
        self == Self::MAX
    }
}

impl TryFrom<u16> for AdcCode {
    type Error = CodeOutOfRange;

    fn try_from(value: u16) -> Result<Self, Self::Error> {
        AdcCode::new(value)
    }
}

impl From<AdcCode> for u16 {
    fn from(code: AdcCode) -> u16 {
        code.0
    }
}

impl fmt::Display for AdcCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// All four channel codes sampled at one instant, channel 0 first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Frame {
    pub codes: [AdcCode; CHANNELS],
}

impl Frame {
    pub fn new(codes: [AdcCode; CHANNELS]) -> Self {
        Frame { codes }
    }

    /// Builds a frame from plain integers, rejecting any code above 1023.
    pub fn from_raw(raw: [u16; CHANNELS]) -> Result<Self, CodeOutOfRange> {
        let mut codes = [AdcCode::ZERO; CHANNELS];
        for (slot, value) in codes.iter_mut().zip(raw) {
            *slot = AdcCode::new(value)?;
        }
        Ok(Frame { codes })
    }

    pub fn raw(&self) -> [u16; CHANNELS] {
        self.codes.map(AdcCode::value)
    }

    pub fn code(&self, channel: usize) -> AdcCode {
        self.codes[channel]
    }
}

/// Encodes one frame into its 17-byte wire record.
pub fn encode_frame(frame: &Frame) -> [u8; RECORD_LEN] {
    let mut out = [0u8; RECORD_LEN];
    for (field, code) in out.chunks_exact_mut(FIELD_WIDTH).zip(frame.codes) {
        let mut v = code.value();
        for slot in field.iter_mut().rev() {
            *slot = b'0' + (v % 10) as u8;
            v /= 10;
        }
    }
    out[RECORD_DIGITS] = DELIMITER;
    out
}

/// Appends the wire record for `frame` to `buf`.
pub fn encode_into(frame: &Frame, buf: &mut Vec<u8>) {
    buf.extend_from_slice(&encode_frame(frame));
}

/// Why a delimited record was thrown away.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    /// Record body was not exactly 16 bytes long.
    Length(usize),
    /// A byte other than an ASCII digit appeared in the body.
    NonDigit,
    /// A field parsed to a value above 1023.
    FieldRange { channel: usize, value: u16 },
}

/// Parses a record body (without its delimiter).
pub fn parse_record(body: &[u8]) -> Result<Frame, RejectReason> {
    if body.len() != RECORD_DIGITS {
        return Err(RejectReason::Length(body.len()));
    }
    if !body.iter().all(u8::is_ascii_digit) {
        return Err(RejectReason::NonDigit);
    }
    let mut codes = [AdcCode::ZERO; CHANNELS];
    for (channel, (slot, field)) in codes
        .iter_mut()
        .zip(body.chunks_exact(FIELD_WIDTH))
        .enumerate()
    {
        let value = field
            .iter()
            .fold(0u16, |acc, d| acc * 10 + u16::from(d - b'0'));
        *slot = AdcCode::new(value).map_err(|_| RejectReason::FieldRange { channel, value })?;
    }
    Ok(Frame { codes })
}

/// Running decoder counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DecodeDiagnostics {
    pub frames_ok: u64,
    pub frames_rejected: u64,
    pub bytes_skipped: u64,
}

impl DecodeDiagnostics {
    pub fn merge(&mut self, delta: &DecodeDiagnostics) {
        self.frames_ok += delta.frames_ok;
        self.frames_rejected += delta.frames_rejected;
        self.bytes_skipped += delta.bytes_skipped;
    }
}

/// Incremental record decoder.
///
/// Feed it whatever bytes the transport produced; it returns the complete
/// records found so far and keeps any trailing partial record for the next
/// call. A body longer than 16 bytes is already known to be invalid, so the
/// decoder stops buffering it and only counts the bytes until the next line
/// feed. Memory use is therefore bounded regardless of input.
#[derive(Debug, Default)]
pub struct Decoder {
    pending: Vec<u8>,
    overflow: usize,
    totals: DecodeDiagnostics,
    last_reject: Option<RejectReason>,
}

impl Decoder {
    pub fn new() -> Self {
        Decoder {
            pending: Vec::with_capacity(RECORD_DIGITS),
            ..Default::default()
        }
    }

    /// Decodes `bytes`, appending frames to `out`, and returns the counter
    /// changes caused by this call.
    pub fn decode_into(&mut self, bytes: &[u8], out: &mut Vec<Frame>) -> DecodeDiagnostics {
        let mut delta = DecodeDiagnostics::default();
        let mut rest = bytes;
        while !rest.is_empty() {
            match rest.iter().position(|&b| b == DELIMITER) {
                Some(pos) => {
                    self.absorb(&rest[..pos]);
                    self.finish_record(out, &mut delta);
                    rest = &rest[pos + 1..];
                }
                None => {
                    self.absorb(rest);
                    break;
                }
            }
        }
        self.totals.merge(&delta);
        delta
    }

    /// Convenience wrapper returning the decoded frames.
    pub fn decode_chunk(&mut self, bytes: &[u8]) -> (Vec<Frame>, DecodeDiagnostics) {
        let mut frames = Vec::new();
        let delta = self.decode_into(bytes, &mut frames);
        (frames, delta)
    }

    /// Lifetime counters.
    pub fn diagnostics(&self) -> DecodeDiagnostics {
        self.totals
    }

    /// Bytes seen since the last delimiter, including any counted but not stored.
    pub fn pending_len(&self) -> usize {
        self.pending.len() + self.overflow
    }

    /// Bytes actually held in memory; never more than one record.
    pub fn buffered_bytes(&self) -> usize {
        self.pending.len()
    }

    pub fn last_reject(&self) -> Option<RejectReason> {
        self.last_reject
    }

    fn absorb(&mut self, bytes: &[u8]) {
        if self.overflow > 0 {
            self.overflow += bytes.len();
            return;
        }
        let room = RECORD_DIGITS + 1 - self.pending.len();
        if bytes.len() <= room {
            self.pending.extend_from_slice(bytes);
        } else {
            // keep one byte past the record width so the length check still fails
            self.pending.extend_from_slice(&bytes[..room]);
            self.overflow = bytes.len() - room;
        }
    }

    fn finish_record(&mut self, out: &mut Vec<Frame>, delta: &mut DecodeDiagnostics) {
        let result = if self.overflow > 0 {
            Err(RejectReason::Length(self.pending.len() + self.overflow))
        } else {
            parse_record(&self.pending)
        };
        match result {
            Ok(frame) => {
                out.push(frame);
                delta.frames_ok += 1;
            }
            Err(reason) => {
                delta.frames_rejected += 1;
                delta.bytes_skipped += (self.pending.len() + self.overflow + 1) as u64;
                self.last_reject = Some(reason);
                log::debug!("rejected record: {reason:?}");
            }
        }
        self.pending.clear();
        self.overflow = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(raw: [u16; 4]) -> Frame {
        Frame::from_raw(raw).unwrap()
    }

    #[test]
    fn encodes_zero_frame() {
        assert_eq!(&encode_frame(&frame([0; 4])), b"0000000000000000\n");
    }

    #[test]
    fn encodes_full_scale_frame() {
        assert_eq!(&encode_frame(&frame([1023; 4])), b"1023102310231023\n");
    }

    #[test]
    fn encodes_mixed_frame_zero_padded() {
        assert_eq!(
            &encode_frame(&frame([512, 0, 256, 1])),
            b"0512000002560001\n"
        );
    }

    #[test]
    fn adc_code_rejects_above_ten_bits() {
        assert!(AdcCode::new(1023).is_ok());
        assert_eq!(AdcCode::new(1024), Err(CodeOutOfRange(1024)));
        assert!(Frame::from_raw([0, 0, 0, 2000]).is_err());
        assert_eq!(AdcCode::saturating(5000), AdcCode::MAX);
        assert_eq!(AdcCode::saturating(-3), AdcCode::ZERO);
    }

    #[test]
    fn decodes_single_record() {
        let mut dec = Decoder::new();
        let (frames, diag) = dec.decode_chunk(b"0000000000000000\n");
        assert_eq!(frames, vec![frame([0; 4])]);
        assert_eq!(diag.frames_ok, 1);
        assert_eq!(diag.frames_rejected, 0);
    }

    #[test]
    fn decodes_across_split_boundary() {
        let mut dec = Decoder::new();
        let (first, _) = dec.decode_chunk(b"00000000");
        assert!(first.is_empty());
        assert_eq!(dec.pending_len(), 8);
        let (second, _) = dec.decode_chunk(b"00000000\n");
        assert_eq!(second, vec![frame([0; 4])]);
        assert_eq!(dec.pending_len(), 0);
    }

    #[test]
    fn rejects_out_of_range_field_then_recovers() {
        let mut dec = Decoder::new();
        let (frames, diag) = dec.decode_chunk(b"9999999999999999\n0001000200030004\n");
        assert_eq!(frames, vec![frame([1, 2, 3, 4])]);
        assert_eq!(diag.frames_rejected, 1);
        assert_eq!(diag.bytes_skipped, 17);
        assert_eq!(
            dec.last_reject(),
            Some(RejectReason::FieldRange {
                channel: 0,
                value: 9999
            })
        );
    }

    #[test]
    fn rejects_short_long_and_non_digit_records() {
        let mut dec = Decoder::new();
        let input = b"000000000000000\n00000000000000000\n00000000000x0000\n\n0001000100010001\n";
        let (frames, diag) = dec.decode_chunk(input);
        assert_eq!(frames, vec![frame([1, 1, 1, 1])]);
        assert_eq!(diag.frames_rejected, 4);
        assert_eq!(diag.bytes_skipped, 16 + 18 + 17 + 1);
    }

    #[test]
    fn carriage_return_is_not_tolerated() {
        assert_eq!(
            parse_record(b"0000000000000000\r"),
            Err(RejectReason::Length(17))
        );
    }

    #[test]
    fn long_garbage_is_not_buffered() {
        let mut dec = Decoder::new();
        let junk = vec![b'7'; 100_000];
        dec.decode_chunk(&junk);
        assert!(dec.pending.len() <= RECORD_DIGITS + 1);
        assert_eq!(dec.pending_len(), 100_000);
        let (frames, diag) = dec.decode_chunk(b"\n0000000000000005\n");
        assert_eq!(frames, vec![frame([0, 0, 0, 5])]);
        assert_eq!(diag.frames_rejected, 1);
        assert_eq!(diag.bytes_skipped, 100_001);
    }

    #[test]
    fn totals_accumulate() {
        let mut dec = Decoder::new();
        dec.decode_chunk(b"0000000000000000\nxx\n");
        dec.decode_chunk(b"0000000000000000\n");
        let d = dec.diagnostics();
        assert_eq!((d.frames_ok, d.frames_rejected, d.bytes_skipped), (2, 1, 3));
    }
}
