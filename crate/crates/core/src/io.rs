//! Binary field dumps.
//!
//! Layout: `b"CRHF"`, then little-endian `u32` version, `u32` kind
//! (0 node, 1 edge), `u32` dimension, one `i64` half-width per axis, and the
//! values as `f64`. Edge payloads are grouped by direction.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::lattice::{EdgeField, LatticeBox, NodeField};

const MAGIC: &[u8; 4] = b"CRHF";
const VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub enum FieldData {
    Node(NodeField),
    Edge(EdgeField),
}

fn header(kind: u32, bx: &LatticeBox) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * bx.dim());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&kind.to_le_bytes());
    out.extend_from_slice(&(bx.dim() as u32).to_le_bytes());
    for &w in bx.half_widths() {
        out.extend_from_slice(&w.to_le_bytes());
    }
    out
}

fn push_values(out: &mut Vec<u8>, values: impl IntoIterator<Item = f64>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn node_field_bytes(u: &NodeField) -> Vec<u8> {
    let mut out = header(0, u.lattice_box());
    push_values(&mut out, u.values().iter().copied());
    out
}

pub fn edge_field_bytes(h: &EdgeField) -> Vec<u8> {
    let mut out = header(1, h.lattice_box());
    push_values(&mut out, h.compact_values());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Format(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn field_from_bytes(bytes: &[u8]) -> Result<FieldData> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let kind = r.u32()?;
    let d = r.u32()? as usize;
    if !(1..=3).contains(&d) {
        return Err(Error::Format(format!("dimension {d}")));
    }
    let widths = (0..d).map(|_| r.i64()).collect::<Result<Vec<_>>>()?;
    let bx = LatticeBox::with_half_widths(&widths).map_err(|e| Error::Format(e.to_string()))?;
    let rest = &bytes[r.pos..];
    if rest.len() % 8 != 0 {
        return Err(Error::Format("payload is not a whole number of f64".into()));
    }
    let values: Vec<f64> = rest
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let wrap = |e: Error| Error::Format(e.to_string());
    match kind {
        0 => NodeField::from_values(bx, values).map(FieldData::Node).map_err(wrap),
        1 => EdgeField::from_compact(bx, &values).map(FieldData::Edge).map_err(wrap),
        k => Err(Error::Format(format!("unknown kind {k}"))),
    }
}

pub fn write_node_field(path: impl AsRef<Path>, u: &NodeField) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, node_field_bytes(u)).map_err(|e| Error::io(path, e))
}

pub fn write_edge_field(path: impl AsRef<Path>, h: &EdgeField) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, edge_field_bytes(h)).map_err(|e| Error::io(path, e))
}

pub fn read_field(path: impl AsRef<Path>) -> Result<FieldData> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    field_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_roundtrip_and_header() {
        let bx = LatticeBox::cube(2, 2).unwrap();
        let u = NodeField::from_fn(bx, |p| (p[0] * 10 + p[1]) as f64 + 0.5);
        let bytes = node_field_bytes(&u);
        assert_eq!(&bytes[..4], b"CRHF");
        assert_eq!(bytes.len(), 4 + 12 + 16 + 25 * 8);
        assert_eq!(i64::from_le_bytes(bytes[16..24].try_into().unwrap()), 2);
        match field_from_bytes(&bytes).unwrap() {
            FieldData::Node(v) => assert_eq!(v.values(), u.values()),
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn edge_roundtrip_through_file() {
        let bx = LatticeBox::with_half_widths(&[1, 2, 1]).unwrap();
        let h = EdgeField::from_fn(bx, |p, k| (p[0] + 2 * p[1] + 3 * p[2]) as f64 + k as f64 * 0.25);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.crhf");
        write_edge_field(&path, &h).unwrap();
        match read_field(&path).unwrap() {
            FieldData::Edge(g) => {
                assert_eq!(g.compact_values(), h.compact_values());
                assert_eq!(g.lattice_box(), h.lattice_box());
            }
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(field_from_bytes(b"XXXX").is_err());
        let bx = LatticeBox::cube(2, 1).unwrap();
        let mut bytes = node_field_bytes(&NodeField::zeros(bx));
        bytes.pop();
        assert!(field_from_bytes(&bytes).is_err());
        assert!(read_field("/nonexistent/dir/f.crhf").is_err());
    }
}
