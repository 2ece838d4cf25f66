//! Binary model files.
//!
//! Layout (all integers u64 LE, all reals f64 LE):
//!
//! ```text
//! "CSAUGTOY" | version u32 | reserved u32        16-byte header
//! dim | ngram
//! intent count | (len | utf-8 bytes) per intent
//! tag count    | (len | utf-8 bytes) per tag
//! W_i (intents × dim) | b_i | W_sl (tags × 3·dim) | b_sl
//! ```

use std::fs;
use std::path::Path;

use super::features::FeatureExtractor;
use super::model::ToyJointModel;
use crate::corpus::SlotTag;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"CSAUGTOY";
const VERSION: u32 = 1;

pub fn to_bytes(model: &ToyJointModel) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * model.parameter_count() + 256);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    let put_u64 = |out: &mut Vec<u8>, v: usize| out.extend_from_slice(&(v as u64).to_le_bytes());
    let put_str = |out: &mut Vec<u8>, s: &str| {
        put_u64(out, s.len());
        out.extend_from_slice(s.as_bytes());
    };
    put_u64(&mut out, model.extractor.dim);
    put_u64(&mut out, model.extractor.ngram);
    put_u64(&mut out, model.intents.len());
    for intent in &model.intents {
        put_str(&mut out, intent);
    }
    put_u64(&mut out, model.tags.len());
    for tag in &model.tags {
        put_str(&mut out, &tag.to_string());
    }
    for v in model.parameters() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::ModelFormat(format!("truncated at byte {}", self.pos)))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u64(&mut self) -> Result<usize> {
        let raw = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(raw).map_err(|_| Error::ModelFormat(format!("value {raw} out of range")))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u64()?;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|e| Error::ModelFormat(e.to_string()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<ToyJointModel> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::ModelFormat("bad magic".into()));
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::ModelFormat(format!("unsupported version {version}")));
    }
    r.take(4)?;
    let dim = r.u64()?;
    let ngram = r.u64()?;
    if dim == 0 || ngram == 0 {
        return Err(Error::ModelFormat("zero feature dimension".into()));
    }
    let n_intents = r.u64()?;
    let intents = (0..n_intents).map(|_| r.string()).collect::<Result<Vec<_>>>()?;
    let n_tags = r.u64()?;
    let tags = (0..n_tags)
        .map(|_| {
            let s = r.string()?;
            s.parse::<SlotTag>().map_err(|e| Error::ModelFormat(e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut model = ToyJointModel::new(FeatureExtractor::new(dim, ngram), intents, tags);
    let expected = model.parameter_count();
    if r.bytes.len() - r.pos != expected * 8 {
        return Err(Error::ModelFormat(format!(
            "expected {expected} parameters, found {} bytes",
            r.bytes.len() - r.pos
        )));
    }
    let params = (0..expected).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    if params.iter().any(|v| !v.is_finite()) {
        return Err(Error::ModelFormat("non-finite parameter".into()));
    }
    model.set_parameters(&params)?;
    Ok(model)
}

pub fn save_model(model: &ToyJointModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ToyJointModel> {
    let path = path.as_ref();
    from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> ToyJointModel {
        let mut m = ToyJointModel::new(
            FeatureExtractor::new(8, 3),
            vec!["a".into(), "b".into()],
            vec![SlotTag::Outside, SlotTag::begin("x"), SlotTag::inside("x")],
        );
        let params: Vec<f64> = (0..m.parameter_count()).map(|i| i as f64 * 0.25 - 3.0).collect();
        m.set_parameters(&params).unwrap();
        m
    }

    #[test]
    fn header_and_round_trip() {
        let m = model();
        let bytes = to_bytes(&m);
        assert_eq!(&bytes[..8], b"CSAUGTOY");
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(from_bytes(&bytes).unwrap(), m);
    }

    #[test]
    fn rejects_corruption() {
        let bytes = to_bytes(&model());
        assert!(from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(from_bytes(&bad).is_err());
        let mut bad = bytes;
        bad[8] = 9;
        assert!(from_bytes(&bad).is_err());
    }
}
