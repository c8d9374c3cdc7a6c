use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::numerics::{Params, Tensor};

const MAGIC: &str = "DELCKPT 1";

/// Serialised model: a text manifest followed by raw payloads.
///
/// Layout:
///
/// ```text
/// DELCKPT 1
/// kind <kind>
/// config <bytes>
/// vocab <bytes>            (optional)
/// tensor <name> <d1,d2,..> f32
/// ...
/// end
/// <config JSON><vocab JSON array><little-endian f32 payloads in manifest order>
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: String,
    pub config: serde_json::Value,
    pub vocab: Option<Vec<String>>,
    pub tensors: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let config = serde_json::to_vec(&self.config).expect("json value serialises");
        let vocab = self
            .vocab
            .as_ref()
            .map(|v| serde_json::to_vec(v).expect("string list serialises"));
        let mut head = format!("{MAGIC}\nkind {}\nconfig {}\n", self.kind, config.len());
        if let Some(v) = &vocab {
            head.push_str(&format!("vocab {}\n", v.len()));
        }
        for (name, t) in &self.tensors {
            let dims: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
            head.push_str(&format!("tensor {name} {} f32\n", dims.join(",")));
        }
        head.push_str("end\n");
        let mut out = head.into_bytes();
        out.extend_from_slice(&config);
        if let Some(v) = vocab {
            out.extend_from_slice(&v);
        }
        for (_, t) in &self.tensors {
            for &x in t.data() {
                out.extend_from_slice(&(x as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        let mut pos = 0;
        let mut next_line = || -> Result<&str> {
            let rest = &bytes[pos..];
            let end = rest.iter().position(|&b| b == b'\n').ok_or_else(|| bad("truncated manifest"))?;
            pos += end + 1;
            std::str::from_utf8(&rest[..end]).map_err(|_| bad("manifest is not utf-8"))
        };
        if next_line()? != MAGIC {
            return Err(bad("missing DELCKPT header"));
        }
        let kind = next_line()?
            .strip_prefix("kind ")
            .ok_or_else(|| bad("missing kind line"))?
            .to_string();
        let mut config_len = None;
        let mut vocab_len = None;
        let mut specs: Vec<(String, Vec<usize>)> = Vec::new();
        loop {
            let line = next_line()?;
            if line == "end" {
                break;
            }
            let fields: Vec<&str> = line.split(' ').collect();
            match fields.as_slice() {
                ["config", n] => config_len = Some(n.parse::<usize>().map_err(|_| bad("bad config length"))?),
                ["vocab", n] => vocab_len = Some(n.parse::<usize>().map_err(|_| bad("bad vocab length"))?),
                ["tensor", name, dims, "f32"] => {
                    let shape = dims
                        .split(',')
                        .map(|d| d.parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| bad("bad tensor shape"))?;
                    specs.push((name.to_string(), shape));
                }
                _ => return Err(Error::Checkpoint(format!("unrecognised manifest line {line:?}"))),
            }
        }
        let mut take = |n: usize| -> Result<&[u8]> {
            let chunk = bytes.get(pos..pos + n).ok_or_else(|| bad("truncated payload"))?;
            pos += n;
            Ok(chunk)
        };
        let config_len = config_len.ok_or_else(|| bad("missing config entry"))?;
        let config = serde_json::from_slice(take(config_len)?)?;
        let vocab = match vocab_len {
            Some(n) => Some(serde_json::from_slice(take(n)?)?),
            None => None,
        };
        let mut tensors = Vec::with_capacity(specs.len());
        for (name, shape) in specs {
            let count: usize = shape.iter().product();
            let raw = take(count * 4)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect();
            tensors.push((name, Tensor::new(shape, data)?));
        }
        if pos != bytes.len() {
            return Err(bad("trailing bytes after payload"));
        }
        Ok(Checkpoint {
            kind,
            config,
            vocab,
            tensors,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Copies stored tensors into `params`, which must have exactly the same
    /// names and shapes in the same order.
    pub fn restore<P: Params>(&self, params: &mut P) -> Result<()> {
        let expected = params.named_tensors().len();
        if expected != self.tensors.len() {
            return Err(Error::Checkpoint(format!(
                "checkpoint has {} tensors, model expects {expected}",
                self.tensors.len()
            )));
        }
        let mut idx = 0;
        let mut result = Ok(());
        params.visit_mut("", &mut |name, t| {
            let (stored_name, stored) = &self.tensors[idx];
            idx += 1;
            if result.is_err() {
                return;
            }
            if *stored_name != name || stored.shape() != t.shape() {
                result = Err(Error::Checkpoint(format!(
                    "tensor {stored_name} {:?} does not match model tensor {name} {:?}",
                    stored.shape(),
                    t.shape()
                )));
                return;
            }
            t.data_mut().copy_from_slice(stored.data());
        });
        result
    }
}
