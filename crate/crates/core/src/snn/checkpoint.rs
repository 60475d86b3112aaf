//! Model checkpoint container.
//!
//! Layout: magic `SPKF`, little-endian u32 format version, little-endian
//! u64 header length, a JSON header describing the architecture and the
//! per-layer neuron parameters, then each layer's weight matrix row-major
//! as little-endian 32-bit floats.

use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::{Layer, LifNetwork, LifParams};
use crate::error::{Error, Result};
use ndarray::Array2;

const MAGIC: &[u8; 4] = b"SPKF";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    /// Layer sizes, input first.
    dims: Vec<usize>,
    /// Neuron parameters per weighted layer (dims.len() - 1 entries).
    layer_params: Vec<LifParams>,
}

/// Serialise a network to the checkpoint format.
pub fn save_checkpoint<P: AsRef<Path>>(path: P, net: &LifNetwork) -> Result<()> {
    let header = Header {
        format_version: FORMAT_VERSION,
        dims: net.dims(),
        layer_params: net.layers().iter().map(|l| l.params).collect(),
    };
    let header_bytes = serde_json::to_vec(&header)?;

    let mut file = fs::File::create(path)?;
    file.write_all(MAGIC)?;
    file.write_all(&FORMAT_VERSION.to_le_bytes())?;
    file.write_all(&(header_bytes.len() as u64).to_le_bytes())?;
    file.write_all(&header_bytes)?;
    for layer in net.layers() {
        for &w in layer.weights.iter() {
            file.write_all(&(w as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

/// Load a network from a checkpoint file.
pub fn load_checkpoint<P: AsRef<Path>>(path: P) -> Result<LifNetwork> {
    let mut file = fs::File::open(path)?;
    let mut magic = [0u8; 4];
    file.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Schema("not a SPKF checkpoint (bad magic)".into()));
    }
    let mut version = [0u8; 4];
    file.read_exact(&mut version)?;
    let version = u32::from_le_bytes(version);
    if version != FORMAT_VERSION {
        return Err(Error::Schema(format!(
            "unsupported checkpoint version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let mut len = [0u8; 8];
    file.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    let mut header_bytes = vec![0u8; len];
    file.read_exact(&mut header_bytes)?;
    let header: Header = serde_json::from_slice(&header_bytes)?;
    if header.dims.len() < 2 || header.layer_params.len() != header.dims.len() - 1 {
        return Err(Error::Schema(
            "checkpoint header dims and layer_params disagree".into(),
        ));
    }

    let mut layers = Vec::with_capacity(header.layer_params.len());
    for (w, &params) in header.dims.windows(2).zip(&header.layer_params) {
        let (c_in, c_out) = (w[0], w[1]);
        let mut raw = vec![0u8; c_in * c_out * 4];
        file.read_exact(&mut raw).map_err(|_| {
            Error::Schema("checkpoint truncated: missing weight data".into())
        })?;
        let weights: Vec<f64> = raw
            .chunks_exact(4)
            .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
            .collect();
        let weights = Array2::from_shape_vec((c_out, c_in), weights)
            .map_err(|e| Error::Schema(format!("weight reshape failed: {e}")))?;
        layers.push(Layer { weights, params });
    }
    LifNetwork::from_layers(layers)
}
