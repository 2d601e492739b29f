//! Network checkpoint format.
//!
//! ```text
//! "RDWN" | version u16 | role u8 | config block | count u32 | tensors
//! generator config: scale u32, upsample u8 (0 nearest, 1 bilinear), leaky f64,
//!                   n u32, channels u32×n, m u32, kernels u32×m
//! critic config:    n u32, widths u32×n, leaky f64, input_size u32
//! tensor:           name_len u32, name, rank u32, dims u64×rank, values f64×numel
//! ```
//!
//! All integers and floats are little-endian.

use std::io::{Read, Write};

use super::{CriticConfig, GeneratorConfig, NetConfig, NetworkParams};
use crate::autodiff::{Tensor, UpsampleMode};
use crate::binio::*;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"RDWN";
const VERSION: u16 = 1;

fn role_tag(cfg: &NetConfig) -> u8 {
    match cfg {
        NetConfig::Generator(_) => 0,
        NetConfig::Critic(_) => 1,
    }
}

fn put_list(w: &mut impl Write, xs: &[usize]) -> std::io::Result<()> {
    put_u32(w, xs.len() as u32)?;
    xs.iter().try_for_each(|&x| put_u32(w, x as u32))
}

fn get_list(r: &mut impl Read) -> Result<Vec<usize>> {
    let n = bounded(get_u32(r)? as u64, "list length")?;
    if n > 64 {
        return Err(Error::format(format!("layer list of length {n}")));
    }
    (0..n).map(|_| Ok(get_u32(r)? as usize)).collect()
}

pub fn write_network(w: &mut impl Write, params: &NetworkParams) -> Result<()> {
    w.write_all(MAGIC)?;
    put_u16(w, VERSION)?;
    put_u8(w, role_tag(params.config()))?;
    match params.config() {
        NetConfig::Generator(c) => {
            put_u32(w, c.scale_factor as u32)?;
            put_u8(
                w,
                match c.upsample_mode {
                    UpsampleMode::Nearest => 0,
                    UpsampleMode::Bilinear => 1,
                },
            )?;
            put_f64(w, c.leaky_slope)?;
            put_list(w, &c.channels)?;
            put_list(w, &c.kernel_sizes)?;
        }
        NetConfig::Critic(c) => {
            put_list(w, &c.widths)?;
            put_f64(w, c.leaky_slope)?;
            put_u32(w, c.input_size as u32)?;
        }
    }
    write_tensor_block(w, params.tensors())
}

pub fn read_network(r: &mut impl Read) -> Result<NetworkParams> {
    expect_magic(r, MAGIC)?;
    let version = get_u16(r)?;
    if version != VERSION {
        return Err(Error::format(format!(
            "unsupported network format version {version}"
        )));
    }
    let config = match get_u8(r)? {
        0 => {
            let scale_factor = get_u32(r)? as usize;
            let upsample_mode = match get_u8(r)? {
                0 => UpsampleMode::Nearest,
                1 => UpsampleMode::Bilinear,
                t => return Err(Error::format(format!("unknown upsample tag {t}"))),
            };
            let leaky_slope = get_f64(r)?;
            let channels = get_list(r)?;
            let kernel_sizes = get_list(r)?;
            let c = GeneratorConfig {
                scale_factor,
                channels,
                kernel_sizes,
                upsample_mode,
                leaky_slope,
            };
            c.validate().map_err(|e| Error::format(e.to_string()))?;
            NetConfig::Generator(c)
        }
        1 => {
            let widths = get_list(r)?;
            let leaky_slope = get_f64(r)?;
            let input_size = get_u32(r)? as usize;
            let c = CriticConfig {
                widths,
                leaky_slope,
                input_size,
            };
            c.validate().map_err(|e| Error::format(e.to_string()))?;
            NetConfig::Critic(c)
        }
        t => return Err(Error::format(format!("unknown role tag {t}"))),
    };
    let tensors = read_tensor_block(r)?;
    NetworkParams::from_parts(config, tensors)
}

pub(crate) fn write_tensor_block(w: &mut impl Write, tensors: &[(String, Tensor)]) -> Result<()> {
    put_u32(w, tensors.len() as u32)?;
    for (name, t) in tensors {
        put_named_tensor(w, name, t)?;
    }
    Ok(())
}

pub(crate) fn read_tensor_block(r: &mut impl Read) -> Result<Vec<(String, Tensor)>> {
    let n = bounded(get_u32(r)? as u64, "tensor count")?;
    if n > 4096 {
        return Err(Error::format(format!("tensor count {n}")));
    }
    (0..n).map(|_| get_named_tensor(r)).collect()
}
