//! Parameter checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! | bytes            | content                                     |
//! |------------------|---------------------------------------------|
//! | 8                | magic `FPNNCKPT`                            |
//! | 4                | format version (`1`)                        |
//! | 4                | header length `h`                           |
//! | `h`              | UTF-8 JSON [`CheckpointHeader`]             |
//! | 8                | parameter count `n`                         |
//! | `8 · n`          | parameters as IEEE-754 `f64`                |

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Network, NetworkConfig, ParameterVector};
use crate::error::{Error, Result};
use crate::sampling::Domain;

const MAGIC: &[u8; 8] = b"FPNNCKPT";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub network: NetworkConfig,
    pub domain: Domain,
    pub seed: u64,
    pub epoch: u64,
    /// Free-form echo of the configuration that produced the parameters.
    #[serde(default)]
    pub config: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub params: ParameterVector,
}

impl Checkpoint {
    /// Rebuilds the network the parameters belong to.
    pub fn network(&self) -> Result<Network> {
        let net = Network::new(self.header.network, &self.header.domain)?;
        net.check_params(&self.params)?;
        Ok(net)
    }
}

pub fn write_checkpoint<W: Write>(mut w: W, header: &CheckpointHeader, params: &ParameterVector) -> Result<()> {
    let json = serde_json::to_vec(header)?;
    let header_len = u32::try_from(json.len()).map_err(|_| Error::Checkpoint("header too large".into()))?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&header_len.to_le_bytes())?;
    w.write_all(&json)?;
    w.write_all(&(params.values.len() as u64).to_le_bytes())?;
    for v in &params.values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Checkpoint> {
    let bad = |m: &str| Error::Checkpoint(m.to_string());
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    r.read_exact(&mut word)?;
    let mut json = vec![0u8; u32::from_le_bytes(word) as usize];
    r.read_exact(&mut json)?;
    let header: CheckpointHeader = serde_json::from_slice(&json)?;

    let mut long = [0u8; 8];
    r.read_exact(&mut long)?;
    let n = u64::from_le_bytes(long) as usize;
    let layout = super::Layout::new(&header.network);
    if n != layout.len() {
        return Err(Error::Checkpoint(format!("expected {} parameters, found {n}", layout.len())));
    }
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        r.read_exact(&mut long)?;
        values.push(f64::from_le_bytes(long));
    }
    Ok(Checkpoint { header, params: ParameterVector { values, layout } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Architecture;
    use crate::sampling::{Interval, RhoSpec};

    #[test]
    fn round_trip_preserves_outputs_bit_for_bit() {
        let domain = Domain::standard(RhoSpec::Range(Interval { lo: 100.0, hi: 1e4 }));
        let cfg = NetworkConfig::default_for(Architecture::Wave, true);
        let net = Network::new(cfg, &domain).unwrap();
        let params = net.init(17);
        let header = CheckpointHeader {
            network: cfg,
            domain,
            seed: 17,
            epoch: 1234,
            config: serde_json::json!({"model": "wave-pinn"}),
        };
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &header, &params).unwrap();
        let back = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back.header, header);
        let net2 = back.network().unwrap();
        for &(x, t, rho) in &[(0.1, 0.001, 250.0), (-3.0, 0.004, 9000.0)] {
            let a = net.forward(&params, x, t, Some(rho)).unwrap();
            let b = net2.forward(&back.params, x, t, Some(rho)).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn rejects_garbage_and_truncation() {
        assert!(read_checkpoint(&b"NOTACKPTxxxxxxxx"[..]).is_err());
        let domain = Domain::standard(RhoSpec::Fixed(100.0));
        let cfg = NetworkConfig::default_for(Architecture::Standard, false);
        let net = Network::new(cfg, &domain).unwrap();
        let header = CheckpointHeader { network: cfg, domain, seed: 0, epoch: 0, config: serde_json::Value::Null };
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &header, &net.init(0)).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_checkpoint(buf.as_slice()).is_err());
    }
}
