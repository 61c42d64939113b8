use super::{Model, PercConfig};
use crate::bitset::BitSet;
use crate::error::{Error, Result};
use std::io::{Read, Write};

const MAGIC: &[u8; 5] = b"PERC1";
const VERSION: u8 = 1;

/// Binary layout: magic, version, model, dim, side (u64 LE), p (f64 LE), seed (u64 LE),
/// then the occupancy bits, LSB first, padded to whole bytes.
pub fn write_config(cfg: &PercConfig, out: &mut impl Write) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&[
        VERSION,
        match cfg.model() {
            Model::Site => 0,
            Model::Bond => 1,
        },
        cfg.window().dim() as u8,
    ])?;
    out.write_all(&cfg.window().side().to_le_bytes())?;
    out.write_all(&cfg.p().to_le_bytes())?;
    out.write_all(&cfg.seed().to_le_bytes())?;
    out.write_all(&cfg.bits().to_bytes())?;
    Ok(())
}

pub fn read_config(input: &mut impl Read) -> Result<PercConfig> {
    let mut head = [0u8; 8 + 24];
    input.read_exact(&mut head).map_err(|e| Error::Parse(format!("truncated header: {e}")))?;
    if &head[..5] != MAGIC {
        return Err(Error::Parse("bad magic, not a PERC1 file".into()));
    }
    if head[5] != VERSION {
        return Err(Error::Parse(format!("unsupported version {}", head[5])));
    }
    let model = match head[6] {
        0 => Model::Site,
        1 => Model::Bond,
        m => return Err(Error::Parse(format!("unknown model byte {m}"))),
    };
    let dim = head[7] as usize;
    let side = u64::from_le_bytes(head[8..16].try_into().unwrap());
    let p = f64::from_le_bytes(head[16..24].try_into().unwrap());
    let seed = u64::from_le_bytes(head[24..32].try_into().unwrap());
    let sites = (side as u128).checked_pow(dim as u32).filter(|&n| n < u32::MAX as u128);
    let sites = sites.ok_or_else(|| Error::Parse("window size out of range".into()))? as usize;
    let nbits = match model {
        Model::Site => sites,
        Model::Bond => sites * dim,
    };
    let mut body = Vec::new();
    input.read_to_end(&mut body)?;
    let bits = BitSet::from_bytes(&body, nbits)
        .ok_or_else(|| Error::Parse(format!("occupancy has {} bytes, expected {}", body.len(), nbits.div_ceil(8))))?;
    PercConfig::from_bits(model, dim, side, p, seed, bits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_site_and_bond() {
        for model in [Model::Site, Model::Bond] {
            let cfg = PercConfig::generate(model, 3, 7, 0.4, 11).unwrap();
            let mut buf = Vec::new();
            write_config(&cfg, &mut buf).unwrap();
            let n = cfg.bits().len();
            assert_eq!(buf.len(), 32 + n.div_ceil(8));
            let back = read_config(&mut buf.as_slice()).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn header_layout() {
        let cfg = PercConfig::generate(Model::Site, 2, 4, 0.5, 0x0102).unwrap();
        let mut buf = Vec::new();
        write_config(&cfg, &mut buf).unwrap();
        assert_eq!(&buf[..8], b"PERC1\x01\x00\x02");
        assert_eq!(&buf[8..16], &4u64.to_le_bytes());
        assert_eq!(&buf[24..32], &0x0102u64.to_le_bytes());
        assert_eq!(buf.len(), 34);
    }

    #[test]
    fn corrupt_inputs() {
        assert!(read_config(&mut &b"PERC2"[..]).is_err());
        let cfg = PercConfig::generate(Model::Site, 2, 4, 0.5, 0).unwrap();
        let mut buf = Vec::new();
        write_config(&cfg, &mut buf).unwrap();
        buf.pop();
        assert!(matches!(read_config(&mut buf.as_slice()), Err(Error::Parse(_))));
    }
}
