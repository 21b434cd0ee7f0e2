use proptest::collection::vec;
use proptest::prelude::*;

use thdaq::protocol::{encode_frame, parse_record, DELIMITER, RECORD_DIGITS};
use thdaq::{AdcCode, Decoder, Frame};

fn frame() -> impl Strategy<Value = Frame> {
    proptest::array::uniform4(0u16..=1023).prop_map(|raw| Frame::from_raw(raw).unwrap())
}

fn stream(frames: &[Frame]) -> Vec<u8> {
    frames.iter().flat_map(encode_frame).collect()
}

proptest! {
    #[test]
    fn encode_then_parse_is_identity(f in frame()) {
        let rec = encode_frame(&f);
        prop_assert_eq!(rec.len(), 17);
        prop_assert_eq!(rec[16], DELIMITER);
        prop_assert!(rec[..16].iter().all(u8::is_ascii_digit));
        prop_assert_eq!(parse_record(&rec[..RECORD_DIGITS]).unwrap(), f);
    }

    #[test]
    fn decoding_ignores_chunk_boundaries(
        frames in vec(frame(), 0..60),
        cuts in vec(any::<prop::sample::Index>(), 0..20),
    ) {
        let bytes = stream(&frames);
        let mut points: Vec<usize> = cuts.iter().map(|c| c.index(bytes.len() + 1)).collect();
        points.push(0);
        points.push(bytes.len());
        points.sort_unstable();

        let mut decoder = Decoder::new();
        let mut out = Vec::new();
        for w in points.windows(2) {
            decoder.decode_into(&bytes[w[0]..w[1]], &mut out);
        }
        prop_assert_eq!(&out, &frames);
        prop_assert_eq!(decoder.diagnostics().frames_rejected, 0);
        prop_assert_eq!(decoder.pending_len(), 0);
    }

    #[test]
    fn arbitrary_bytes_never_panic_and_stay_bounded(bytes in vec(any::<u8>(), 0..4096)) {
        let mut decoder = Decoder::new();
        let mut out = Vec::new();
        for chunk in bytes.chunks(37) {
            decoder.decode_into(chunk, &mut out);
            prop_assert!(decoder.buffered_bytes() <= 17);
        }
        // anything decoded must itself re-encode to a valid record
        for f in &out {
            prop_assert!(f.codes.iter().all(|c| c.value() <= 1023));
        }
        let lines = bytes.iter().filter(|&&b| b == DELIMITER).count() as u64;
        let d = decoder.diagnostics();
        prop_assert_eq!(d.frames_ok + d.frames_rejected, lines);
    }

    #[test]
    fn garbage_line_costs_at_most_itself(
        before in vec(frame(), 1..20),
        after in vec(frame(), 1..20),
        garbage in vec(any::<u8>().prop_filter("not digit or LF", |b| !b.is_ascii_digit() && *b != DELIMITER), 1..40),
    ) {
        let mut bytes = stream(&before);
        bytes.extend_from_slice(&garbage);
        bytes.push(DELIMITER);
        bytes.extend(stream(&after));
        let (out, diag) = Decoder::new().decode_chunk(&bytes);
        prop_assert_eq!(diag.frames_rejected, 1);
        let expected: Vec<Frame> = before.iter().chain(&after).copied().collect();
        prop_assert_eq!(out, expected);
    }

    #[test]
    fn saturating_codes_are_in_range(v in any::<i64>()) {
        let c = AdcCode::saturating(v);
        prop_assert!(c.value() <= 1023);
    }
}
