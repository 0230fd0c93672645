//! Little-endian binary files.
//!
//! * `AFV1` feature file: magic, `u32 T`, `u32 D`, `f64 frame_rate`, then `T x D` `f32`.
//! * `RVQ1` codebook file: magic, `u32 n_layers`, then per layer `u32 K`,
//!   `u32 D`, `f64 alpha`, `f64 beta`, `K x D` `f32` codewords and `K` `u64` usage counters.
//! * `ATK1` token file: magic, `u32 L`, `L` x `u32 K_l`, `u32 frame count`, then `L` `u32` per frame.

use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::features::FeatureSequence;
use crate::rvq::{Codebook, RvqStack};
use crate::stream::TokenFrame;

pub const AFV1_MAGIC: &[u8; 4] = b"AFV1";
pub const RVQ1_MAGIC: &[u8; 4] = b"RVQ1";
pub const ATK1_MAGIC: &[u8; 4] = b"ATK1";

fn truncated(what: &str) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::Format(format!("{what}: truncated or unreadable ({e})"))
}

fn check_magic(r: &mut impl Read, magic: &[u8; 4], what: &str) -> Result<()> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m).map_err(truncated(what))?;
    if &m != magic {
        return Err(Error::Format(format!("{what}: bad magic {m:?}")));
    }
    Ok(())
}

fn check_end(r: &Cursor<&[u8]>, what: &str) -> Result<()> {
    let rest = r.get_ref().len() as u64 - r.position();
    if rest != 0 {
        return Err(Error::Format(format!("{what}: {rest} trailing bytes")));
    }
    Ok(())
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn u32_len(n: usize, what: &str) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::Format(format!("{what} {n} does not fit in u32")))
}

pub fn encode_afv1(features: &FeatureSequence) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(20 + features.data().len() * 4);
    out.extend_from_slice(AFV1_MAGIC);
    out.write_u32::<LE>(u32_len(features.n_frames(), "frame count")?).unwrap();
    out.write_u32::<LE>(u32_len(features.dim(), "dimension")?).unwrap();
    out.write_f64::<LE>(features.frame_rate()).unwrap();
    for &v in features.data() {
        out.write_f32::<LE>(v as f32).unwrap();
    }
    Ok(out)
}

/// Decode an AFV1 payload. The file does not record the stack factor; pass it if known.
pub fn decode_afv1(bytes: &[u8], stack_factor: usize) -> Result<FeatureSequence> {
    const WHAT: &str = "AFV1";
    let mut r = Cursor::new(bytes);
    check_magic(&mut r, AFV1_MAGIC, WHAT)?;
    let t = r.read_u32::<LE>().map_err(truncated(WHAT))? as usize;
    let d = r.read_u32::<LE>().map_err(truncated(WHAT))? as usize;
    let rate = r.read_f64::<LE>().map_err(truncated(WHAT))?;
    if d == 0 {
        return Err(Error::Format("AFV1: zero dimension".into()));
    }
    let expected = t.checked_mul(d).and_then(|n| n.checked_mul(4));
    if expected != Some(bytes.len() - 20) {
        return Err(Error::Format(format!(
            "AFV1: header says {t}x{d} but payload is {} bytes",
            bytes.len() - 20
        )));
    }
    let mut data = vec![0f32; t * d];
    r.read_f32_into::<LE>(&mut data).map_err(truncated(WHAT))?;
    check_end(&r, WHAT)?;
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Format("AFV1: non-finite feature value".into()));
    }
    FeatureSequence::new(data.into_iter().map(f64::from).collect(), d, rate, stack_factor)
        .map_err(|e| Error::Format(format!("AFV1: {e}")))
}

pub fn write_afv1(path: impl AsRef<Path>, features: &FeatureSequence) -> Result<()> {
    write_file(path.as_ref(), &encode_afv1(features)?)
}

pub fn read_afv1(path: impl AsRef<Path>) -> Result<FeatureSequence> {
    decode_afv1(&read_file(path.as_ref())?, 1)
}

pub fn encode_rvq1(stack: &RvqStack) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(RVQ1_MAGIC);
    out.write_u32::<LE>(u32_len(stack.n_layers(), "layer count")?).unwrap();
    for book in stack.layers() {
        out.write_u32::<LE>(u32_len(book.size(), "codebook size")?).unwrap();
        out.write_u32::<LE>(u32_len(book.dim(), "dimension")?).unwrap();
        out.write_f64::<LE>(book.ema_decay()).unwrap();
        out.write_f64::<LE>(book.norm_beta()).unwrap();
        for &v in book.vectors() {
            out.write_f32::<LE>(v as f32).unwrap();
        }
        for &c in book.usage_counts() {
            out.write_u64::<LE>(c).unwrap();
        }
    }
    Ok(out)
}

pub fn decode_rvq1(bytes: &[u8]) -> Result<RvqStack> {
    const WHAT: &str = "RVQ1";
    let mut r = Cursor::new(bytes);
    check_magic(&mut r, RVQ1_MAGIC, WHAT)?;
    let n_layers = r.read_u32::<LE>().map_err(truncated(WHAT))? as usize;
    let mut layers = Vec::with_capacity(n_layers.min(64));
    for _ in 0..n_layers {
        let k = r.read_u32::<LE>().map_err(truncated(WHAT))? as usize;
        let d = r.read_u32::<LE>().map_err(truncated(WHAT))? as usize;
        let alpha = r.read_f64::<LE>().map_err(truncated(WHAT))?;
        let beta = r.read_f64::<LE>().map_err(truncated(WHAT))?;
        let remaining = bytes.len() as u64 - r.position();
        let needed = (k as u64) * (d as u64) * 4 + (k as u64) * 8;
        if needed > remaining {
            return Err(Error::Format(format!("RVQ1: layer of {k}x{d} exceeds remaining {remaining} bytes")));
        }
        let mut words = vec![0f32; k * d];
        r.read_f32_into::<LE>(&mut words).map_err(truncated(WHAT))?;
        let mut counts = vec![0u64; k];
        r.read_u64_into::<LE>(&mut counts).map_err(truncated(WHAT))?;
        let mut book = Codebook::new(words.into_iter().map(f64::from).collect(), d, alpha, beta)
            .map_err(|e| Error::Format(format!("RVQ1: {e}")))?;
        book.set_usage_counts(counts)?;
        layers.push(book);
    }
    check_end(&r, WHAT)?;
    RvqStack::new(layers).map_err(|e| Error::Format(format!("RVQ1: {e}")))
}

pub fn write_rvq1(path: impl AsRef<Path>, stack: &RvqStack) -> Result<()> {
    write_file(path.as_ref(), &encode_rvq1(stack)?)
}

pub fn read_rvq1(path: impl AsRef<Path>) -> Result<RvqStack> {
    decode_rvq1(&read_file(path.as_ref())?)
}

/// Contents of an ATK1 token file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenFile {
    pub codebook_sizes: Vec<u32>,
    pub frames: Vec<TokenFrame>,
}

impl TokenFile {
    pub fn new(codebook_sizes: Vec<u32>, frames: Vec<TokenFrame>) -> Result<Self> {
        for f in &frames {
            f.validate(&codebook_sizes)?;
        }
        Ok(Self {
            codebook_sizes,
            frames,
        })
    }
}

pub fn encode_atk1(tokens: &TokenFile) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(ATK1_MAGIC);
    out.write_u32::<LE>(u32_len(tokens.codebook_sizes.len(), "layer count")?).unwrap();
    for &k in &tokens.codebook_sizes {
        out.write_u32::<LE>(k).unwrap();
    }
    out.write_u32::<LE>(u32_len(tokens.frames.len(), "frame count")?).unwrap();
    for f in &tokens.frames {
        if f.n_layers() != tokens.codebook_sizes.len() {
            return Err(Error::shape("frame layer count differs from header"));
        }
        for &j in f.indices() {
            out.write_u32::<LE>(j).unwrap();
        }
    }
    Ok(out)
}

pub fn decode_atk1(bytes: &[u8]) -> Result<TokenFile> {
    const WHAT: &str = "ATK1";
    let mut r = Cursor::new(bytes);
    check_magic(&mut r, ATK1_MAGIC, WHAT)?;
    let l = r.read_u32::<LE>().map_err(truncated(WHAT))? as usize;
    if l as u64 * 4 > bytes.len() as u64 {
        return Err(Error::Format(format!("ATK1: {l} layers exceeds file size")));
    }
    let mut sizes = vec![0u32; l];
    r.read_u32_into::<LE>(&mut sizes).map_err(truncated(WHAT))?;
    let n = r.read_u32::<LE>().map_err(truncated(WHAT))? as usize;
    let remaining = bytes.len() as u64 - r.position();
    if (n as u64) * (l as u64) * 4 != remaining {
        return Err(Error::Format(format!("ATK1: {n} frames of {l} layers vs {remaining} payload bytes")));
    }
    let mut flat = vec![0u32; n * l];
    r.read_u32_into::<LE>(&mut flat).map_err(truncated(WHAT))?;
    check_end(&r, WHAT)?;
    let frames = if l == 0 {
        Vec::new()
    } else {
        flat.chunks_exact(l).map(|c| TokenFrame::new(c.to_vec())).collect()
    };
    // An index past its codebook is reported as such so callers can tell it from a corrupt file.
    TokenFile::new(sizes, frames)
}

pub fn write_atk1(path: impl AsRef<Path>, tokens: &TokenFile) -> Result<()> {
    write_file(path.as_ref(), &encode_atk1(tokens)?)
}

pub fn read_atk1(path: impl AsRef<Path>) -> Result<TokenFile> {
    decode_atk1(&read_file(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn afv1_layout_is_bit_exact() {
        let f = FeatureSequence::new(vec![1.0, -2.5, 0.5, 4.0], 2, 12.5, 1).unwrap();
        let bytes = encode_afv1(&f).unwrap();
        assert_eq!(&bytes[..4], b"AFV1");
        assert_eq!(&bytes[4..8], &2u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        assert_eq!(&bytes[12..20], &12.5f64.to_le_bytes());
        assert_eq!(&bytes[20..24], &1.0f32.to_le_bytes());
        assert_eq!(&bytes[24..28], &(-2.5f32).to_le_bytes());
        assert_eq!(bytes.len(), 20 + 16);
        assert_eq!(decode_afv1(&bytes, 1).unwrap(), f);
    }

    #[test]
    fn rvq1_layout_is_bit_exact() {
        let mut book = Codebook::new(vec![0.5, 1.5], 1, 0.9, 0.05).unwrap();
        book.set_usage_counts(vec![3, 7]).unwrap();
        let stack = RvqStack::new(vec![book]).unwrap();
        let bytes = encode_rvq1(&stack).unwrap();
        let mut expected = b"RVQ1".to_vec();
        expected.extend(1u32.to_le_bytes());
        expected.extend(2u32.to_le_bytes());
        expected.extend(1u32.to_le_bytes());
        expected.extend(0.9f64.to_le_bytes());
        expected.extend(0.05f64.to_le_bytes());
        expected.extend(0.5f32.to_le_bytes());
        expected.extend(1.5f32.to_le_bytes());
        expected.extend(3u64.to_le_bytes());
        expected.extend(7u64.to_le_bytes());
        assert_eq!(bytes, expected);
        assert_eq!(decode_rvq1(&bytes).unwrap(), stack);
    }

    #[test]
    fn atk1_layout_is_bit_exact() {
        let tokens = TokenFile::new(vec![4, 2], vec![TokenFrame::new(vec![3, 1]), TokenFrame::new(vec![4, 2])]).unwrap();
        let bytes = encode_atk1(&tokens).unwrap();
        let words: Vec<u32> = bytes[4..].chunks(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect();
        assert_eq!(&bytes[..4], b"ATK1");
        assert_eq!(words, vec![2, 4, 2, 2, 3, 1, 4, 2]);
        assert_eq!(decode_atk1(&bytes).unwrap(), tokens);
    }

    #[test]
    fn corrupt_files_are_format_errors() {
        assert!(matches!(decode_afv1(b"AFV2\0\0\0\0", 1), Err(Error::Format(_))));
        assert!(matches!(decode_atk1(b"ATK1\x01\0\0\0"), Err(Error::Format(_))));
        let f = FeatureSequence::new(vec![1.0, 2.0], 2, 12.5, 1).unwrap();
        let mut bytes = encode_afv1(&f).unwrap();
        bytes.pop();
        assert!(matches!(decode_afv1(&bytes, 1), Err(Error::Format(_))));
        let bad_idx = [b"ATK1".as_slice(), &1u32.to_le_bytes(), &2u32.to_le_bytes(), &1u32.to_le_bytes(), &5u32.to_le_bytes()].concat();
        assert!(matches!(decode_atk1(&bad_idx), Err(Error::IndexOutOfRange { .. })));
    }

    proptest! {
        #[test]
        fn afv1_round_trips_f32_values(rows in 0usize..6, dim in 1usize..5, seed in any::<u64>()) {
            let data: Vec<f64> = (0..rows * dim).map(|i| f64::from((seed.wrapping_mul(i as u64 + 1) % 1000) as f32 / 7.0)).collect();
            let f = FeatureSequence::new(data, dim, 12.5, 1).unwrap();
            prop_assert_eq!(decode_afv1(&encode_afv1(&f).unwrap(), 1).unwrap(), f);
        }
    }
}
