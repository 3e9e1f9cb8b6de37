//! Bit-exact snapshots, run manifests and CSV/JSONL report writers.
//!
//! Snapshot layout, all little-endian:
//!
//! ```text
//! header   "SCBF" | version u32 | file length u64 |
//!          d, n, r, μ, β, T, dt as f64 | output count u64 | header CRC-32
//! body     per output: time f64, then (re, im) f64 pairs in basis order
//! trailer  status u8 | trip time f64 | has record u8 | record
//! record   seed u64 | stream u64 | dt f64 | T f64 | dof u64 | segments u64 |
//!          per segment: start f64, len f64, jump index u64 (u64::MAX if
//!          none), dof increments f64 | jumps u64 | times f64s | marks f64s
//! CRC-32 of every preceding byte
//! ```
//!
//! The header carries its own checksum so that a damaged length or count
//! is reported as corruption rather than misread.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::basis::build_basis;
use crate::config::RunConfig;
use crate::diagnostics::EnergyLedger;
use crate::error::{ReportError, SnapshotError};
use crate::field::SpectralField;
use crate::integrator::{Status, Trajectory};
use crate::noise::{HypothesisConstants, NoiseRecord, Segment, NO_JUMP};

pub const MAGIC: &[u8; 4] = b"SCBF";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 7 * 8 + 8 + 4;

#[derive(Default)]
struct Out(Vec<u8>);

impl Out {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
}

struct In<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> In<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], SnapshotError> {
        let end = self.pos.checked_add(n).ok_or(SnapshotError::Truncated)?;
        if end > self.bytes.len() {
            return Err(SnapshotError::Truncated);
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, SnapshotError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, SnapshotError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64, SnapshotError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> Result<f64, SnapshotError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn len(&mut self) -> Result<usize, SnapshotError> {
        let v = self.u64()?;
        // every counted item occupies at least one byte
        if v > (self.bytes.len() - self.pos) as u64 {
            return Err(malformed("count exceeds file size"));
        }
        Ok(v as usize)
    }
}

fn malformed(msg: &str) -> SnapshotError {
    SnapshotError::Malformed(msg.to_string())
}

/// Serialize a trajectory to snapshot bytes.
pub fn encode_snapshot(tr: &Trajectory) -> Vec<u8> {
    let mut o = Out::default();
    o.0.extend_from_slice(MAGIC);
    o.u32(FORMAT_VERSION);
    o.u64(0); // patched below
    for v in [tr.d as f64, tr.n as f64, tr.r, tr.mu, tr.beta, tr.horizon, tr.dt] {
        o.f64(v);
    }
    o.u64(tr.times.len() as u64);
    o.u32(0); // header CRC, patched below
    for (t, s) in tr.times.iter().zip(&tr.states) {
        o.f64(*t);
        for c in s.coeffs() {
            o.f64(c.re);
            o.f64(c.im);
        }
    }
    match tr.status {
        Status::Completed => {
            o.u8(0);
            o.f64(0.0);
        }
        Status::GuardTripped { time } => {
            o.u8(1);
            o.f64(time);
        }
    }
    match &tr.record {
        None => o.u8(0),
        Some(r) => {
            o.u8(1);
            o.u64(r.seed);
            o.u64(r.stream);
            o.f64(r.dt);
            o.f64(r.horizon);
            o.u64(r.dof as u64);
            o.u64(r.segments.len() as u64);
            for s in &r.segments {
                o.f64(s.start);
                o.f64(s.len);
                o.u64(s.end_jump.map_or(NO_JUMP, |j| j as u64));
                for x in &s.dw {
                    o.f64(*x);
                }
            }
            o.u64(r.jump_times.len() as u64);
            for t in &r.jump_times {
                o.f64(*t);
            }
            for z in &r.marks {
                o.f64(*z);
            }
        }
    }
    let total = o.0.len() as u64 + 4;
    o.0[8..16].copy_from_slice(&total.to_le_bytes());
    let hcrc = crc32fast::hash(&o.0[..HEADER_LEN - 4]);
    o.0[HEADER_LEN - 4..HEADER_LEN].copy_from_slice(&hcrc.to_le_bytes());
    let crc = crc32fast::hash(&o.0);
    o.u32(crc);
    o.0
}

/// Parse snapshot bytes. Checks run in the order magic, version, header
/// checksum, length, full checksum, then structure.
pub fn decode_snapshot(bytes: &[u8]) -> Result<Trajectory, SnapshotError> {
    if bytes.len() < 8 {
        return Err(if bytes.len() >= 4 && &bytes[..4] != MAGIC {
            SnapshotError::BadMagic
        } else {
            SnapshotError::Truncated
        });
    }
    if &bytes[..4] != MAGIC {
        return Err(SnapshotError::BadMagic);
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(SnapshotError::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(SnapshotError::Truncated);
    }
    let stored = u32::from_le_bytes(bytes[HEADER_LEN - 4..HEADER_LEN].try_into().expect("4 bytes"));
    let computed = crc32fast::hash(&bytes[..HEADER_LEN - 4]);
    if stored != computed {
        return Err(SnapshotError::Crc { stored, computed });
    }
    let declared = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    if (bytes.len() as u64) < declared {
        return Err(SnapshotError::Truncated);
    }
    if bytes.len() as u64 > declared {
        return Err(malformed("trailing bytes after checksum"));
    }
    let body = &bytes[..bytes.len() - 4];
    let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(SnapshotError::Crc { stored, computed });
    }

    let mut r = In { bytes: body, pos: 16 };
    let mut h = [0.0; 7];
    for v in &mut h {
        *v = r.f64()?;
    }
    let [d, n, rr, mu, beta, horizon, dt] = h;
    if d.fract() != 0.0 || n.fract() != 0.0 || !(d >= 0.0) || !(n >= 0.0) {
        return Err(malformed("non-integer dimension or cutoff"));
    }
    let basis = Arc::new(build_basis(d as usize, n as usize).map_err(|e| SnapshotError::Malformed(e.to_string()))?);
    let count = r.len()?;
    r.u32()?;
    let modes = basis.num_modes();
    let mut times = Vec::with_capacity(count);
    let mut states = Vec::with_capacity(count);
    for _ in 0..count {
        times.push(r.f64()?);
        let mut c = Vec::with_capacity(modes);
        for _ in 0..modes {
            let re = r.f64()?;
            let im = r.f64()?;
            c.push(Complex64::new(re, im));
        }
        states.push(SpectralField::from_coeffs(&basis, c));
    }
    let status = match (r.u8()?, r.f64()?) {
        (0, _) => Status::Completed,
        (1, time) => Status::GuardTripped { time },
        _ => return Err(malformed("unknown status tag")),
    };
    let record = match r.u8()? {
        0 => None,
        1 => {
            let seed = r.u64()?;
            let stream = r.u64()?;
            let rdt = r.f64()?;
            let rh = r.f64()?;
            let dof = r.len()?;
            let nseg = r.len()?;
            let mut segments = Vec::with_capacity(nseg);
            for _ in 0..nseg {
                let start = r.f64()?;
                let len = r.f64()?;
                let j = r.u64()?;
                let mut dw = Vec::with_capacity(dof);
                for _ in 0..dof {
                    dw.push(r.f64()?);
                }
                segments.push(Segment {
                    start,
                    len,
                    end_jump: (j != NO_JUMP).then_some(j as usize),
                    dw,
                });
            }
            let nj = r.len()?;
            let jump_times = (0..nj).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
            let marks = (0..nj).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
            if segments.iter().any(|s| s.end_jump.is_some_and(|j| j >= nj)) {
                return Err(malformed("segment refers to a missing jump"));
            }
            Some(NoiseRecord {
                seed,
                stream,
                dt: rdt,
                horizon: rh,
                dof,
                segments,
                jump_times,
                marks,
            })
        }
        _ => return Err(malformed("unknown record tag")),
    };
    if r.pos != body.len() {
        return Err(malformed("unused bytes before checksum"));
    }
    Ok(Trajectory {
        d: d as usize,
        n: n as usize,
        r: rr,
        mu,
        beta,
        horizon,
        dt,
        times,
        states,
        record,
        status,
    })
}

pub fn write_snapshot(tr: &Trajectory, path: &Path) -> Result<(), SnapshotError> {
    fs::write(path, encode_snapshot(tr))?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Trajectory, SnapshotError> {
    decode_snapshot(&fs::read(path)?)
}

/// Bitwise equality of two trajectories including their noise records.
pub fn trajectories_bitwise_eq(a: &Trajectory, b: &Trajectory) -> bool {
    let same_f = |x: f64, y: f64| x.to_bits() == y.to_bits();
    let status = match (a.status, b.status) {
        (Status::Completed, Status::Completed) => true,
        (Status::GuardTripped { time: x }, Status::GuardTripped { time: y }) => same_f(x, y),
        _ => false,
    };
    let record = match (&a.record, &b.record) {
        (None, None) => true,
        (Some(x), Some(y)) => x.bitwise_eq(y),
        _ => false,
    };
    a.d == b.d
        && a.n == b.n
        && same_f(a.r, b.r)
        && same_f(a.mu, b.mu)
        && same_f(a.beta, b.beta)
        && same_f(a.horizon, b.horizon)
        && same_f(a.dt, b.dt)
        && status
        && record
        && a.states_bitwise_eq(b)
}

/// Energy ledger as RFC-4180 CSV with one row per output time.
pub fn write_ledger_csv(ledger: &EnergyLedger, path: &Path) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path)?;
    for row in &ledger.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// One JSON object per line.
pub fn write_jsonl<T: Serialize, W: Write>(out: W, items: &[T]) -> Result<(), ReportError> {
    let mut w = BufWriter::new(out);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_jsonl_file<T: Serialize>(path: &Path, items: &[T]) -> Result<(), ReportError> {
    write_jsonl(fs::File::create(path)?, items)
}

/// Lowercase hex SHA-256 of a file.
pub fn sha256_file(path: &Path) -> Result<String, ReportError> {
    let bytes = fs::read(path)?;
    Ok(hex(&Sha256::digest(&bytes)))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Everything needed to regenerate a run's outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    /// Declared constants of the noise model.
    pub constants: HypothesisConstants,
    /// Whether the certification corpus found no violations.
    pub certified: bool,
    pub seeds: Vec<u64>,
    /// Output file name → SHA-256.
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig, constants: HypothesisConstants, certified: bool) -> Self {
        Self {
            tool: "scbf".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: config.clone(),
            constants,
            certified,
            seeds: vec![config.run.seed],
            outputs: BTreeMap::new(),
        }
    }

    /// Hash each named file in `dir` and record it.
    pub fn record_outputs(&mut self, dir: &Path, names: &[&str]) -> Result<(), ReportError> {
        for name in names {
            self.outputs.insert(name.to_string(), sha256_file(&dir.join(name))?);
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<(), ReportError> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, ReportError> {
        let m: RunManifest = serde_json::from_str(&fs::read_to_string(path)?)?;
        if m.tool != "scbf" {
            return Err(ReportError::Manifest(format!("unknown tool `{}`", m.tool)));
        }
        Ok(m)
    }

    /// Names whose current content hash differs from the recorded one.
    pub fn verify_outputs(&self, dir: &Path) -> Result<Vec<String>, ReportError> {
        let mut bad = Vec::new();
        for (name, hash) in &self.outputs {
            let p = dir.join(name);
            if !p.exists() || &sha256_file(&p)? != hash {
                bad.push(name.clone());
            }
        }
        Ok(bad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn sample(text: &str) -> Trajectory {
        let cfg = parse_config(text).unwrap();
        let sim = cfg.build().unwrap();
        let u0 = cfg.initial_state(sim.basis()).unwrap();
        sim.simulate(&u0, 1).unwrap()
    }

    #[test]
    fn round_trip_is_bitwise() {
        let tr = sample(
            "[model]\nn = 4\n[time]\nhorizon = 0.5\ndt = 0.0625\noutputs = 4\n\
             [noise]\nsigma_amplitude = 0.4\nintensity = 5.0\ngamma_c0 = 0.3",
        );
        assert!(!tr.record.as_ref().unwrap().marks.is_empty());
        let bytes = encode_snapshot(&tr);
        let back = decode_snapshot(&bytes).unwrap();
        assert!(trajectories_bitwise_eq(&tr, &back));
        assert_eq!(encode_snapshot(&back), bytes);
    }

    #[test]
    fn empty_horizon_round_trips() {
        let tr = sample("[model]\nn = 3\n[time]\nhorizon = 0.0\ndt = 0.0625");
        assert_eq!(tr.times, vec![0.0]);
        let back = decode_snapshot(&encode_snapshot(&tr)).unwrap();
        assert!(trajectories_bitwise_eq(&tr, &back));
    }

    #[test]
    fn every_single_byte_corruption_is_detected() {
        let tr = sample("[model]\nn = 3\n[time]\nhorizon = 0.125\ndt = 0.0625\n[noise]\nsigma_amplitude = 0.2");
        let bytes = encode_snapshot(&tr);
        for i in 0..bytes.len() {
            let mut b = bytes.clone();
            b[i] ^= 0x20;
            let e = decode_snapshot(&b).unwrap_err();
            match i {
                0..=3 => assert!(matches!(e, SnapshotError::BadMagic)),
                4..=7 => assert!(matches!(e, SnapshotError::VersionMismatch { .. })),
                _ => assert!(matches!(e, SnapshotError::Crc { .. }), "byte {i}: {e}"),
            }
        }
        for cut in [0, 6, 20, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(decode_snapshot(&bytes[..cut]), Err(SnapshotError::Truncated)), "cut {cut}");
        }
    }
}
