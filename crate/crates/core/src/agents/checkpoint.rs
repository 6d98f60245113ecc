//! Binary parameter snapshot.
//!
//! Layout: the 8-byte magic, a little-endian `u32` version, a `u32`
//! manifest byte length, the UTF-8 manifest, then every tensor's data as
//! little-endian `f64` in manifest order. The manifest's first line is
//! `kind <agent>`; each further line is `<name> <rows>x<cols>`.

use std::io::{Read, Write};
use std::path::Path;

use super::AgentError;
use crate::diffcore::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SHERCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub kind: String,
    pub entries: Vec<(String, Tensor)>,
}

fn bad(msg: impl Into<String>) -> AgentError {
    AgentError::Checkpoint(msg.into())
}

impl Checkpoint {
    pub fn new(kind: &str) -> Self {
        Self {
            kind: kind.to_string(),
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.entries.push((name.into(), tensor));
    }

    pub fn get(&self, name: &str) -> Result<&Tensor, AgentError> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| bad(format!("missing entry '{name}'")))
    }

    /// Entries named `<prefix>.0`, `<prefix>.1`, ... in index order.
    pub fn group(&self, prefix: &str) -> Vec<Tensor> {
        let mut found: Vec<(usize, &Tensor)> = self
            .entries
            .iter()
            .filter_map(|(n, t)| {
                let idx = n.strip_prefix(prefix)?.strip_prefix('.')?.parse().ok()?;
                Some((idx, t))
            })
            .collect();
        found.sort_by_key(|x| x.0);
        found.into_iter().map(|(_, t)| t.clone()).collect()
    }

    pub fn push_group(&mut self, prefix: &str, tensors: &[Tensor]) {
        for (i, t) in tensors.iter().enumerate() {
            self.push(format!("{prefix}.{i}"), t.clone());
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut manifest = format!("kind {}\n", self.kind);
        for (name, t) in &self.entries {
            manifest.push_str(&format!("{name} {}x{}\n", t.rows(), t.cols()));
        }
        let total: usize = self.entries.iter().map(|(_, t)| t.len()).sum();
        let mut out = Vec::with_capacity(16 + manifest.len() + 8 * total);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(manifest.len() as u32).to_le_bytes());
        out.extend_from_slice(manifest.as_bytes());
        for (_, t) in &self.entries {
            for x in t.data() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AgentError> {
        if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let mlen = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let manifest = bytes
            .get(16..16 + mlen)
            .ok_or_else(|| bad("truncated manifest"))
            .and_then(|m| std::str::from_utf8(m).map_err(|_| bad("manifest is not UTF-8")))?;
        let mut lines = manifest.lines();
        let kind = lines
            .next()
            .and_then(|l| l.strip_prefix("kind "))
            .ok_or_else(|| bad("manifest lacks kind line"))?
            .to_string();
        let mut data = bytes[16 + mlen..].chunks_exact(8);
        if !data.remainder().is_empty() {
            return Err(bad("data section is not a whole number of f64 values"));
        }
        let mut entries = Vec::new();
        for line in lines {
            let (name, shape) = line.rsplit_once(' ').ok_or_else(|| bad(format!("bad manifest line '{line}'")))?;
            let (r, c) = shape
                .split_once('x')
                .and_then(|(r, c)| Some((r.parse::<usize>().ok()?, c.parse::<usize>().ok()?)))
                .ok_or_else(|| bad(format!("bad shape '{shape}'")))?;
            let values: Vec<f64> = data
                .by_ref()
                .take(r * c)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect();
            if values.len() != r * c {
                return Err(bad(format!("data ends inside '{name}'")));
            }
            entries.push((name.to_string(), Tensor::matrix(r, c, values)));
        }
        if data.next().is_some() {
            return Err(bad("trailing data after last tensor"));
        }
        Ok(Self { kind, entries })
    }

    pub fn save(&self, path: &Path) -> Result<(), AgentError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, AgentError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let mut c = Checkpoint::new("sher");
        c.push_group("net", &[Tensor::from_rows(&[[1.0, 2.0], [3.0, f64::MIN_POSITIVE]]), Tensor::scalar(-0.5)]);
        c.push("cfg.alpha", Tensor::scalar(0.05));
        c
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ckpt");
        sample().save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, sample());
        assert_eq!(back.group("net").len(), 2);
        assert_eq!(back.get("cfg.alpha").unwrap().item(), 0.05);
        assert!(back.get("nothing").is_err());
    }

    #[test]
    fn header_and_corruption() {
        let bytes = sample().to_bytes();
        assert_eq!(&bytes[..8], b"SHERCKPT");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 8]).is_err());
        let mut extra = bytes.clone();
        extra.extend_from_slice(&0f64.to_le_bytes());
        assert!(Checkpoint::from_bytes(&extra).is_err());
        let mut v2 = bytes.clone();
        v2[8] = 2;
        assert!(Checkpoint::from_bytes(&v2).is_err());
        assert!(Checkpoint::from_bytes(b"garbage").is_err());
    }
}
