use std::io::{Read, Write};

use super::{ClickStream, CounterConfig, CountHistogram};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"FDCLICK1";

/// Click streams together with the settings needed to interpret them.
/// The dark rate is not stored: it is a model input, not a property of
/// the recorded bits.
#[derive(Debug, Clone, PartialEq)]
pub struct ClickFile {
    pub cycle_duration: f64,
    pub dead_time: f64,
    pub t_rep: f64,
    pub seed: u64,
    pub streams: Vec<ClickStream>,
}

impl ClickFile {
    pub fn new(config: &CounterConfig, seed: u64, streams: Vec<ClickStream>) -> Self {
        ClickFile { cycle_duration: config.cycle_duration, dead_time: config.dead_time, t_rep: config.t_rep, seed, streams }
    }
}

/// Little-endian layout: magic, cycle duration, dead time, repetition
/// time, seed, sequence count, cycles per sequence, then the packed bits
/// of each sequence as 64-bit words, least significant bit first.
pub fn write_clicks(w: &mut impl Write, file: &ClickFile) -> Result<()> {
    let n_cycles = file.streams.first().map_or(0, |s| s.n_cycles);
    if file.streams.iter().any(|s| s.n_cycles != n_cycles) {
        return Err(Error::Format("streams differ in length".into()));
    }
    w.write_all(MAGIC)?;
    for x in [file.cycle_duration, file.dead_time, file.t_rep] {
        w.write_all(&x.to_le_bytes())?;
    }
    for x in [file.seed, file.streams.len() as u64, n_cycles as u64] {
        w.write_all(&x.to_le_bytes())?;
    }
    for s in &file.streams {
        for word in s.words() {
            w.write_all(&word.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read8(r: &mut impl Read) -> Result<[u8; 8]> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|e| Error::Format(format!("truncated click file: {e}")))?;
    Ok(b)
}

pub fn read_clicks(r: &mut impl Read) -> Result<ClickFile> {
    if &read8(r)? != MAGIC {
        return Err(Error::Format("not a click file".into()));
    }
    let cycle_duration = f64::from_le_bytes(read8(r)?);
    let dead_time = f64::from_le_bytes(read8(r)?);
    let t_rep = f64::from_le_bytes(read8(r)?);
    let seed = u64::from_le_bytes(read8(r)?);
    let n_seq = u64::from_le_bytes(read8(r)?);
    let n_cycles = u64::from_le_bytes(read8(r)?) as usize;
    let words = n_cycles.div_ceil(64);
    let mut streams = Vec::new();
    for k in 0..n_seq {
        let w = (0..words).map(|_| read8(r).map(u64::from_le_bytes)).collect::<Result<Vec<_>>>()?;
        streams.push(ClickStream::from_words(k, n_cycles, w)?);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after the last sequence".into()));
    }
    Ok(ClickFile { cycle_duration, dead_time, t_rep, seed, streams })
}

/// One row per cycle, `t_s,click`, with the time at the cycle start.
pub fn write_stream_csv(w: &mut impl Write, stream: &ClickStream, config: &CounterConfig) -> Result<()> {
    writeln!(w, "t_s,click")?;
    for i in 0..stream.n_cycles {
        writeln!(w, "{:e},{}", config.cycle_start(i), stream.get(i) as u8)?;
    }
    Ok(())
}

pub fn write_histogram_csv(w: &mut impl Write, hist: &CountHistogram) -> Result<()> {
    writeln!(w, "C,probability")?;
    for (c, p) in hist.probabilities() {
        writeln!(w, "{c},{p:e}")?;
    }
    Ok(())
}
