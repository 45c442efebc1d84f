use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Activation, NetParams, NetSpec};
use crate::{BeeError, Result};

const MAGIC: &[u8; 4] = b"BEEN";
const FORMAT_VERSION: u16 = 1;

/// Header (magic, version, activation, layer widths) followed by every
/// weight and bias tensor in declaration order as little-endian f64.
pub fn write_params<W: Write>(params: &NetParams, mut w: W) -> Result<()> {
    let spec = params.spec();
    let widths = spec.widths();
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    let act: u16 = match spec.activation {
        Activation::Relu => 0,
        Activation::Tanh => 1,
    };
    w.write_all(&act.to_le_bytes())?;
    w.write_all(&(widths.len() as u32).to_le_bytes())?;
    for width in &widths {
        w.write_all(&(*width as u32).to_le_bytes())?;
    }
    for t in params.tensors() {
        for v in t {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| BeeError::Format("truncated checkpoint header".into()))?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_params<R: Read>(mut r: R) -> Result<NetParams> {
    let mut head = [0u8; 8];
    r.read_exact(&mut head)
        .map_err(|_| BeeError::Format("truncated checkpoint header".into()))?;
    if &head[..4] != MAGIC {
        return Err(BeeError::Format("not a network checkpoint (bad magic)".into()));
    }
    let version = u16::from_le_bytes([head[4], head[5]]);
    if version != FORMAT_VERSION {
        return Err(BeeError::Format(format!("unsupported checkpoint version {version}")));
    }
    let activation = match u16::from_le_bytes([head[6], head[7]]) {
        0 => Activation::Relu,
        1 => Activation::Tanh,
        other => return Err(BeeError::Format(format!("unknown activation code {other}"))),
    };
    let n = read_u32(&mut r)? as usize;
    if !(2..=64).contains(&n) {
        return Err(BeeError::Format(format!("implausible layer count {n}")));
    }
    let widths = (0..n).map(|_| read_u32(&mut r).map(|w| w as usize)).collect::<Result<Vec<_>>>()?;
    let spec = NetSpec::new(widths[0], &widths[1..n - 1], widths[n - 1], activation);
    let mut params = NetParams::zeros(spec).map_err(|_| BeeError::Format("checkpoint has zero widths".into()))?;
    let mut bytes = vec![0u8; params.n_params() * 8];
    r.read_exact(&mut bytes)
        .map_err(|_| BeeError::Format("checkpoint ends before its tensors".into()))?;
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    params.set_flat(&values)?;
    Ok(params)
}

pub fn save_params(params: &NetParams, path: impl AsRef<Path>) -> Result<()> {
    write_params(params, BufWriter::new(File::create(path)?))
}

pub fn load_params(path: impl AsRef<Path>) -> Result<NetParams> {
    read_params(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn round_trip_is_exact() {
        let p = NetParams::init(NetSpec::new(3, &[7, 5], 2, Activation::Tanh), &mut seeded(3)).unwrap();
        let mut bytes = Vec::new();
        write_params(&p, &mut bytes).unwrap();
        assert_eq!(bytes.len(), 8 + 4 + 4 * 4 + 8 * p.n_params());
        assert_eq!(read_params(&bytes[..]).unwrap(), p);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.bin");
        save_params(&p, &path).unwrap();
        assert_eq!(load_params(&path).unwrap(), p);
    }

    #[test]
    fn corrupt_input_is_a_format_error() {
        let p = NetParams::init(NetSpec::new(1, &[2], 1, Activation::Relu), &mut seeded(0)).unwrap();
        let mut bytes = Vec::new();
        write_params(&p, &mut bytes).unwrap();
        assert!(matches!(read_params(&bytes[..bytes.len() - 1]), Err(BeeError::Format(_))));
        let mut bad = bytes.clone();
        bad[1] = b'X';
        assert!(matches!(read_params(&bad[..]), Err(BeeError::Format(_))));
    }
}
