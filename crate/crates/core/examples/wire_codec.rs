//! Encode frames to the 17-byte wire record and decode a noisy stream.

use thdaq::protocol::encode_frame;
use thdaq::{Decoder, Frame};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let frame = Frame::from_raw([512, 617, 0, 1023])?;
    let record = encode_frame(&frame);
    println!("record: {:?}", String::from_utf8_lossy(&record));

    // two good records with a line of garbage in between, fed in small chunks
    let mut stream = record.to_vec();
    stream.extend_from_slice(b"xx#\x01garbage\n");
    stream.extend_from_slice(&encode_frame(&Frame::from_raw([1, 2, 3, 4])?));

    let mut decoder = Decoder::new();
    let mut frames = Vec::new();
    for chunk in stream.chunks(5) {
        decoder.decode_into(chunk, &mut frames);
    }
    for f in &frames {
        println!("decoded: {:?}", f.raw());
    }
    println!("{:?}", decoder.diagnostics());
    Ok(())
}
