//! Binary ensemble file.
//!
//! Layout (little endian): magic `IOBSENS1`, 64-byte hex config hash, then
//! length-prefixed JSON blocks for the config, the epsilon points and the
//! parameter names, then the record count and the records. Record floats are
//! stored bit-exactly so a reloaded ensemble rebuilds an identical report.

use std::path::Path;

use super::config::ExperimentConfig;
use super::engine::{Ensemble, EpsilonPoint, ReplicationRecord};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"IOBSENS1";

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn u64(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u64).to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        self.u32(v.len());
        for x in v {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }
    fn bytes(&mut self, b: &[u8]) {
        self.u64(b.len());
        self.0.extend_from_slice(b);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Format(format!("ensemble file truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
    fn u64(&mut self) -> Result<usize> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()) as usize)
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.u32()?;
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Format("length overflow".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
    fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.u64()?;
        self.take(n)
    }
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Format(format!("ensemble metadata: {e}"))
}

pub fn encode_ensemble(ens: &Ensemble) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.0.extend_from_slice(ens.config_hash.as_bytes());
    w.bytes(&serde_json::to_vec(&ens.config).expect("config serializes"));
    w.bytes(&serde_json::to_vec(&ens.points).expect("points serialize"));
    w.bytes(&serde_json::to_vec(&ens.parameter_names).expect("names serialize"));
    w.u64(ens.records.len());
    for r in &ens.records {
        w.u32(r.eps_index);
        w.u32(r.replication);
        w.f64s(&[r.measured_rho]);
        w.u8(r.truncated as u8);
        w.u32(r.k_y.len());
        for (ky, kx) in r.k_y.iter().zip(&r.k_x) {
            w.f64s(ky);
            w.f64s(kx);
        }
        w.f64s(&r.mean_y);
        w.f64s(&r.mean_x);
        match &r.theta {
            Some(t) => {
                w.u8(1);
                w.f64s(t);
            }
            None => w.u8(0),
        }
        match &r.estimation_error {
            Some(msg) => {
                w.u8(1);
                w.bytes(msg.as_bytes());
            }
            None => w.u8(0),
        }
    }
    w.0
}

pub fn decode_ensemble(bytes: &[u8]) -> Result<Ensemble> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Format("not an ensemble file (bad magic)".into()));
    }
    let hash = String::from_utf8(r.take(64)?.to_vec()).map_err(|_| Error::Format("bad hash".into()))?;
    let config: ExperimentConfig = serde_json::from_slice(r.bytes()?).map_err(json_err)?;
    if config.hash() != hash {
        return Err(Error::Format("stored config does not match its hash".into()));
    }
    let points: Vec<EpsilonPoint> = serde_json::from_slice(r.bytes()?).map_err(json_err)?;
    let parameter_names: Vec<String> = serde_json::from_slice(r.bytes()?).map_err(json_err)?;
    let n = r.u64()?;
    if n != points.len() * config.replications {
        return Err(Error::Format(format!(
            "{n} records for {} points x {} replications",
            points.len(),
            config.replications
        )));
    }
    let mut records = Vec::with_capacity(n);
    for _ in 0..n {
        let eps_index = r.u32()?;
        let replication = r.u32()?;
        let measured_rho = r.f64s()?.first().copied().ok_or_else(|| Error::Format("missing rho".into()))?;
        let truncated = r.u8()? != 0;
        let lags = r.u32()?;
        let (mut k_y, mut k_x) = (Vec::with_capacity(lags), Vec::with_capacity(lags));
        for _ in 0..lags {
            k_y.push(r.f64s()?);
            k_x.push(r.f64s()?);
        }
        let mean_y = r.f64s()?;
        let mean_x = r.f64s()?;
        let theta = if r.u8()? != 0 { Some(r.f64s()?) } else { None };
        let estimation_error = if r.u8()? != 0 {
            Some(String::from_utf8_lossy(r.bytes()?).into_owned())
        } else {
            None
        };
        records.push(ReplicationRecord {
            eps_index,
            replication,
            k_y,
            k_x,
            mean_y,
            mean_x,
            measured_rho,
            theta,
            truncated,
            estimation_error,
        });
    }
    if r.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after records".into()));
    }
    Ok(Ensemble {
        config,
        config_hash: hash,
        points,
        parameter_names,
        records,
    })
}

pub fn write_ensemble(path: &Path, ens: &Ensemble) -> Result<()> {
    std::fs::write(path, encode_ensemble(ens))?;
    Ok(())
}

/// Loads an ensemble; with `expected`, the stored config must hash identically.
pub fn read_ensemble(path: &Path, expected: Option<&ExperimentConfig>) -> Result<Ensemble> {
    let ens = decode_ensemble(&std::fs::read(path)?)?;
    if let Some(cfg) = expected {
        if cfg.hash() != ens.config_hash {
            return Err(Error::Config(format!(
                "ensemble {} was produced by a different config (hash {})",
                path.display(),
                ens.config_hash
            )));
        }
    }
    Ok(ens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab::engine::{run_replications, tests::small_config};
    use crate::lab::report::build_report;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut cfg = small_config("multiplicative");
        cfg.estimation = Some(crate::lab::config::EstimationSpec {
            estimator: crate::lab::config::Estimator::Ou,
            u1: 0.5,
            ball: None,
        });
        let ens = run_replications(&cfg, Some(1)).unwrap();
        let bytes = encode_ensemble(&ens);
        let back = decode_ensemble(&bytes).unwrap();
        assert_eq!(back, ens);
        assert_eq!(
            build_report(&back, None).unwrap().to_json(),
            build_report(&ens, None).unwrap().to_json()
        );
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.bin");
        write_ensemble(&p, &ens).unwrap();
        assert_eq!(read_ensemble(&p, Some(&cfg)).unwrap(), ens);
        let mut other = cfg.clone();
        other.master_seed += 1;
        assert!(read_ensemble(&p, Some(&other)).is_err());
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let ens = run_replications(&small_config("identity"), Some(1)).unwrap();
        let bytes = encode_ensemble(&ens);
        assert!(decode_ensemble(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_ensemble(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(decode_ensemble(&extra).is_err());
    }
}
