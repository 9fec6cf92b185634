//! Named-array checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "WACTCKPT"
//! version    u32
//! manifest   u64 byte length, then that many bytes of UTF-8 JSON:
//!            {"version": u32, "config": <any>, "arrays": [{"name", "rows", "cols"}, ...]}
//! data       for each manifest array in order, rows*cols IEEE-754 f64 values, row-major
//! ```

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{NeuralError, Result};
use crate::params::ParamSet;
use crate::tensor::Mat;

pub const MAGIC: &[u8; 8] = b"WACTCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ArrayEntry {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    config: serde_json::Value,
    arrays: Vec<ArrayEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: serde_json::Value,
    pub arrays: Vec<(String, Mat)>,
}

impl Checkpoint {
    pub fn new(config: serde_json::Value) -> Self {
        Checkpoint {
            config,
            arrays: Vec::new(),
        }
    }

    /// Appends every array of `set`, names prefixed by `prefix`.
    pub fn push_set(&mut self, prefix: &str, set: &ParamSet) {
        for (name, m) in set.iter() {
            self.arrays.push((format!("{prefix}{name}"), m.clone()));
        }
    }

    /// Copies arrays named `prefix + name` into `set`; every array of `set` must be present.
    pub fn fill_set(&self, prefix: &str, set: &mut ParamSet) -> Result<()> {
        for id in set.ids().collect::<Vec<_>>() {
            let full = format!("{prefix}{}", set.name(id));
            let (_, m) = self
                .arrays
                .iter()
                .find(|(n, _)| *n == full)
                .ok_or_else(|| NeuralError::Checkpoint(format!("missing array `{full}`")))?;
            let target = set.get_mut(id);
            if target.shape() != m.shape() {
                return Err(NeuralError::Checkpoint(format!(
                    "array `{full}` is {}x{}, expected {}x{}",
                    m.rows, m.cols, target.rows, target.cols
                )));
            }
            target.data.copy_from_slice(&m.data);
        }
        Ok(())
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let manifest = Manifest {
            version: VERSION,
            config: self.config.clone(),
            arrays: self
                .arrays
                .iter()
                .map(|(name, m)| ArrayEntry {
                    name: name.clone(),
                    rows: m.rows,
                    cols: m.cols,
                })
                .collect(),
        };
        let json = serde_json::to_vec(&manifest).map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        for (_, m) in &self.arrays {
            let mut buf = Vec::with_capacity(m.len() * 8);
            for v in &m.data {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(NeuralError::Checkpoint("bad magic bytes".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != VERSION {
            return Err(NeuralError::Checkpoint(format!("unsupported version {version}")));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let len = u64::from_le_bytes(b8) as usize;
        let mut json = vec![0u8; len];
        r.read_exact(&mut json)?;
        let manifest: Manifest =
            serde_json::from_slice(&json).map_err(|e| NeuralError::Checkpoint(format!("manifest: {e}")))?;
        let mut arrays = Vec::with_capacity(manifest.arrays.len());
        for e in manifest.arrays {
            let mut bytes = vec![0u8; e.rows * e.cols * 8];
            r.read_exact(&mut bytes)?;
            let data = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            arrays.push((e.name, Mat::from_vec(e.rows, e.cols, data)));
        }
        Ok(Checkpoint {
            config: manifest.config,
            arrays,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut f)
    }
}
