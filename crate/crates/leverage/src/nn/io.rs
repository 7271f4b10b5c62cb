//! Checkpoint format: a magic tag, a JSON header (layer sizes, activations,
//! step counter) and the flat parameter array as little-endian f64. Optimizer
//! moments are not persisted; a loaded network starts with fresh Adam state.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Activation, Network, NnError, Result};

const MAGIC: &[u8; 4] = b"MLP1";

#[derive(Serialize, Deserialize)]
struct Header {
    layer_sizes: Vec<usize>,
    activations: Vec<Activation>,
    step: u64,
}

impl Network {
    pub fn save(&self, path: &Path) -> Result<()> {
        let header = Header {
            layer_sizes: self.layer_sizes(),
            activations: self.activations(),
            step: self.step_count(),
        };
        let header_bytes =
            serde_json::to_vec(&header).map_err(|e| NnError::Format(e.to_string()))?;
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
        w.write_all(&header_bytes)?;
        for p in self.flatten_params() {
            w.write_all(&p.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Network> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(NnError::Format("bad magic".into()));
        }
        let mut len = [0u8; 4];
        r.read_exact(&mut len)?;
        let mut header_bytes = vec![0u8; u32::from_le_bytes(len) as usize];
        r.read_exact(&mut header_bytes)?;
        let header: Header =
            serde_json::from_slice(&header_bytes).map_err(|e| NnError::Format(e.to_string()))?;
        if header.layer_sizes.len() < 2 || header.activations.len() + 1 != header.layer_sizes.len()
        {
            return Err(NnError::Format("inconsistent header".into()));
        }
        let hidden = header.activations[0];
        let output = *header.activations.last().unwrap();
        let mut net = Network::mlp(&header.layer_sizes, hidden, output, 0)?;
        // mlp() assigns hidden/output activations; restore arbitrary mixes.
        for (l, a) in net.layers.iter_mut().zip(&header.activations) {
            l.activation = *a;
        }
        net.step = header.step;
        let mut flat = vec![0.0_f64; net.param_count()];
        let mut buf = [0u8; 8];
        for p in flat.iter_mut() {
            r.read_exact(&mut buf)?;
            *p = f64::from_le_bytes(buf);
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(NnError::Format("trailing bytes".into()));
        }
        net.set_params(&flat)?;
        Ok(net)
    }
}
