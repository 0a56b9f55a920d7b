use std::io::{Read, Write};

use super::{Mlp, ResidualEstimator, Standardizer};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"DCLFEST1";
const VERSION: u32 = 1;

/// Binary layout (little endian): magic, `u32` version, `u32` feature count,
/// `u32` hidden width, `u32` input count, then `f64` blocks: input scale,
/// residual scale, feature means, feature scales, `â` parameters, `b̂`
/// parameters.
pub fn write_estimator<W: Write>(est: &ResidualEstimator, mut w: W) -> Result<()> {
    let io = |e: std::io::Error| Error::Format(e.to_string());
    w.write_all(MAGIC).map_err(io)?;
    let header = [VERSION, est.features.dim() as u32, est.a_net.hidden() as u32, est.inputs() as u32];
    for v in header {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    let blocks: [&[f64]; 6] = [
        &[est.input_scale],
        &[est.residual_scale],
        &est.features.mean,
        &est.features.scale,
        est.a_net.params(),
        est.b_net.params(),
    ];
    for v in blocks.iter().flat_map(|b| b.iter()) {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    Ok(())
}

pub fn read_estimator<R: Read>(mut r: R) -> Result<ResidualEstimator> {
    let io = |e: std::io::Error| Error::Format(e.to_string());
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(Error::Format("not an estimator file".into()));
    }
    let mut u32s = [0u32; 4];
    for v in &mut u32s {
        let mut b = [0u8; 4];
        r.read_exact(&mut b).map_err(io)?;
        *v = u32::from_le_bytes(b);
    }
    let [version, nf, hidden, inputs] = u32s.map(|v| v as usize);
    if version != VERSION as usize {
        return Err(Error::Format(format!("unsupported estimator version {version}")));
    }
    if nf == 0 || hidden == 0 || inputs == 0 {
        return Err(Error::Format("zero-sized estimator".into()));
    }
    let mut read_block = |n: usize| -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n);
        let mut b = [0u8; 8];
        for _ in 0..n {
            r.read_exact(&mut b).map_err(io)?;
            out.push(f64::from_le_bytes(b));
        }
        Ok(out)
    };
    let input_scale = read_block(1)?[0];
    let residual_scale = read_block(1)?[0];
    let mean = read_block(nf)?;
    let scale = read_block(nf)?;
    let a_len = Mlp::zeros(nf, hidden, inputs).params().len();
    let b_len = Mlp::zeros(nf, hidden, 1).params().len();
    let a_net = Mlp::from_params(nf, hidden, inputs, read_block(a_len)?).expect("block length matches layout");
    let b_net = Mlp::from_params(nf, hidden, 1, read_block(b_len)?).expect("block length matches layout");
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(io)? != 0 {
        return Err(Error::Format("trailing bytes after estimator".into()));
    }
    Ok(ResidualEstimator { a_net, b_net, features: Standardizer { mean, scale }, input_scale, residual_scale })
}
