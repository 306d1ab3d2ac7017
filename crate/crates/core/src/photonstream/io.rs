//! CSV and binary timestamp files, and stream digests.

use std::io::{BufRead, Read, Write};

use sha2::{Digest, Sha256};

use super::{Record, StreamMeta, TimestampStream};
use crate::error::{Error, Result};

/// Leading bytes of the binary format.
pub const MAGIC: &[u8; 4] = b"PFTS";

const RECORD_BYTES: usize = 9;

impl TimestampStream {
    /// `channel,t_ps` rows, preceded by a `# rep_rate_mhz=.. pick_factor=.. seed=..`
    /// comment when the stream carries acquisition metadata.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        if let Some(m) = &self.meta {
            writeln!(w, "# rep_rate_mhz={} pick_factor={} seed={}", m.rep_rate_mhz, m.pick_factor, m.seed)?;
        }
        writeln!(w, "channel,t_ps")?;
        for r in &self.records {
            writeln!(w, "{},{}", r.channel, r.t_ps)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut meta = None;
        let mut records = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line == "channel,t_ps" {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                meta = Some(parse_header(header)?);
                continue;
            }
            let (c, t) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("line {}: expected `channel,t_ps`", i + 1)))?;
            let channel = c
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: channel: {e}", i + 1)))?;
            let t_ps = t
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: t_ps: {e}", i + 1)))?;
            records.push(Record { t_ps, channel });
        }
        Self::from_records(records, meta)
    }

    /// `PFTS` followed by little-endian records of a 1-byte channel and an
    /// 8-byte time in ps. Metadata is not stored.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        for r in &self.records {
            w.write_all(&encode(r))?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Parse("missing PFTS magic".into()));
        }
        let mut body = Vec::new();
        r.read_to_end(&mut body)?;
        if body.len() % RECORD_BYTES != 0 {
            return Err(Error::Parse(format!("{} trailing bytes", body.len() % RECORD_BYTES)));
        }
        let records = body
            .chunks_exact(RECORD_BYTES)
            .map(|b| Record {
                channel: b[0],
                t_ps: u64::from_le_bytes(b[1..].try_into().expect("8 bytes")),
            })
            .collect();
        Self::from_records(records, None)
    }

    /// SHA-256 of the binary encoding, hex encoded.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(MAGIC);
        for r in &self.records {
            h.update(encode(r));
        }
        format!("{:x}", h.finalize())
    }
}

fn encode(r: &Record) -> [u8; RECORD_BYTES] {
    let mut b = [0u8; RECORD_BYTES];
    b[0] = r.channel;
    b[1..].copy_from_slice(&r.t_ps.to_le_bytes());
    b
}

fn parse_header(h: &str) -> Result<StreamMeta> {
    let (mut rate, mut pick, mut seed) = (None, None, None);
    for kv in h.split_whitespace() {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("header item `{kv}`")))?;
        let bad = |e: &dyn std::fmt::Display| Error::Parse(format!("header `{k}`: {e}"));
        match k {
            "rep_rate_mhz" => rate = Some(v.parse::<f64>().map_err(|e| bad(&e))?),
            "pick_factor" => pick = Some(v.parse::<u32>().map_err(|e| bad(&e))?),
            "seed" => seed = Some(v.parse::<u64>().map_err(|e| bad(&e))?),
            _ => return Err(Error::Parse(format!("unknown header key `{k}`"))),
        }
    }
    match (rate, pick, seed) {
        (Some(rep_rate_mhz), Some(pick_factor), Some(seed)) => Ok(StreamMeta {
            rep_rate_mhz,
            pick_factor,
            seed,
        }),
        _ => Err(Error::Parse("header needs rep_rate_mhz, pick_factor and seed".into())),
    }
}
