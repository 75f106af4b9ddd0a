//! Middlebury `.flo`: magic `202021.25` as f32, width and height as i32, then
//! interleaved `(u, v)` f32 pairs in row-major order. Everything little-endian.

use std::path::Path;

use super::FlowField;
use crate::{Error, Result};

pub const FLO_MAGIC: f32 = 202021.25;

const HEADER_LEN: usize = 12;

pub fn encode_flo(flow: &FlowField) -> Vec<u8> {
    let n = flow.width() * flow.height();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * n);
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&(flow.width() as i32).to_le_bytes());
    out.extend_from_slice(&(flow.height() as i32).to_le_bytes());
    for (u, v) in flow.u().iter().zip(flow.v()) {
        out.extend_from_slice(&u.to_le_bytes());
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_flo(bytes: &[u8]) -> Result<FlowField> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Corrupt(format!("{} bytes is shorter than the .flo header", bytes.len())));
    }
    let word = |i: usize| -> [u8; 4] { bytes[i..i + 4].try_into().expect("4-byte slice") };
    let magic = f32::from_le_bytes(word(0));
    if magic != FLO_MAGIC {
        return Err(Error::Format(format!("bad .flo magic {magic}")));
    }
    let width = i32::from_le_bytes(word(4));
    let height = i32::from_le_bytes(word(8));
    if width <= 0 || height <= 0 {
        return Err(Error::Dimension(format!(".flo declares {width}x{height}")));
    }
    let n = width as usize * height as usize;
    let expected = n
        .checked_mul(8)
        .and_then(|p| p.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::Dimension(format!(".flo dimensions {width}x{height} overflow")))?;
    if bytes.len() < expected {
        return Err(Error::Corrupt(format!("payload truncated: {} of {expected} bytes", bytes.len())));
    }
    if bytes.len() > expected {
        return Err(Error::Corrupt(format!("{} trailing bytes after payload", bytes.len() - expected)));
    }
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for i in 0..n {
        let off = HEADER_LEN + 8 * i;
        u.push(f32::from_le_bytes(word(off)));
        v.push(f32::from_le_bytes(word(off + 4)));
    }
    FlowField::new(width as usize, height as usize, u, v)
}

pub fn read_flo(path: impl AsRef<Path>) -> Result<FlowField> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_flo(&bytes)
}

/// Flow fields cannot hold non-finite values, so anything reaching here is writable.
pub fn write_flo(flow: &FlowField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_flo(flow)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fixture_2x1() -> Vec<u8> {
        // 202021.25f32 in little-endian spells "PIEH"
        let mut b = vec![b'P', b'I', b'E', b'H'];
        b.extend_from_slice(&[2, 0, 0, 0, 1, 0, 0, 0]);
        b.extend_from_slice(&[0x00, 0x00, 0x80, 0x3f]); // 1.0
        b.extend_from_slice(&[0x00, 0x00, 0x00, 0x00]); // 0.0
        b.extend_from_slice(&[0x00, 0x00, 0x00, 0x00]); // 0.0
        b.extend_from_slice(&[0x00, 0x00, 0x80, 0xbf]); // -1.0
        b
    }

    #[test]
    fn hand_written_fixture_parses() {
        let bytes = fixture_2x1();
        assert_eq!(bytes.len(), 28);
        let flow = decode_flo(&bytes).unwrap();
        assert_eq!((flow.width(), flow.height()), (2, 1));
        assert_eq!(flow.u(), &[1.0, 0.0]);
        assert_eq!(flow.v(), &[0.0, -1.0]);
        assert_eq!(encode_flo(&flow), bytes);
    }

    #[test]
    fn zero_flow_1x1_encodes_header_plus_one_vector() {
        let bytes = encode_flo(&FlowField::zeros(1, 1));
        let mut expected = FLO_MAGIC.to_le_bytes().to_vec();
        expected.extend_from_slice(&1i32.to_le_bytes());
        expected.extend_from_slice(&1i32.to_le_bytes());
        expected.extend_from_slice(&[0u8; 8]);
        assert_eq!(bytes, expected);
    }

    #[test]
    fn wrong_magic_is_format_error() {
        let mut bytes = fixture_2x1();
        bytes[..4].copy_from_slice(&0.0f32.to_le_bytes());
        assert!(matches!(decode_flo(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_payload_is_corrupt() {
        let bytes = fixture_2x1();
        assert!(matches!(decode_flo(&bytes[..bytes.len() - 1]), Err(Error::Corrupt(_))));
        assert!(matches!(decode_flo(&bytes[..6]), Err(Error::Corrupt(_))));
    }

    #[test]
    fn nonpositive_dimensions_rejected() {
        let mut bytes = fixture_2x1();
        bytes[4..8].copy_from_slice(&0i32.to_le_bytes());
        assert!(matches!(decode_flo(&bytes), Err(Error::Dimension(_))));
        bytes[4..8].copy_from_slice(&(-3i32).to_le_bytes());
        assert!(matches!(decode_flo(&bytes), Err(Error::Dimension(_))));
    }

    #[test]
    fn nan_payload_rejected_on_read() {
        let mut bytes = fixture_2x1();
        bytes[12..16].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode_flo(&bytes), Err(Error::NonFinite(_))));
    }

    #[test]
    fn nan_flow_cannot_be_constructed_for_writing() {
        assert!(FlowField::new(1, 1, vec![f32::NAN], vec![0.0]).is_err());
    }

    proptest! {
        #[test]
        fn file_round_trip_is_bit_exact(w in 1usize..8, h in 1usize..8, seed in any::<u64>()) {
            let mut s = seed | 1;
            let mut next = || {
                s ^= s << 13; s ^= s >> 7; s ^= s << 17;
                f32::from_bits((s as u32) & 0x7f7f_ffff) * if s & (1 << 40) != 0 { -1.0 } else { 1.0 }
            };
            let u: Vec<f32> = (0..w * h).map(|_| next()).collect();
            let v: Vec<f32> = (0..w * h).map(|_| next()).collect();
            let flow = FlowField::new(w, h, u, v).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("f.flo");
            write_flo(&flow, &p).unwrap();
            let back = read_flo(&p).unwrap();
            prop_assert!(flow.u().iter().zip(back.u()).all(|(a, b)| a.to_bits() == b.to_bits()));
            prop_assert!(flow.v().iter().zip(back.v()).all(|(a, b)| a.to_bits() == b.to_bits()));
            let bytes = std::fs::read(&p).unwrap();
            prop_assert_eq!(encode_flo(&back), bytes);
        }
    }
}
