//! On-disk results: one versioned binary record per (instance, run).
//!
//! Layout: `<root>/<task>/<alg>/<instance-key>/<run>.rec`, plus `summary.csv`, the
//! oracle tables and the least-squares baselines under `<root>/<task>/`.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::plan::instance_key;
use crate::error::{Error, Result};
use crate::grid::Variant;
use crate::learners::{Algorithm, AlgorithmParams, VtraceClip};

const MAGIC: &[u8; 4] = b"OPRR";
pub const RECORD_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 1 + 5 * 8 + 1 + 4 + 8 + 8 + 1 + 8 + 8 + 4 + 4;
const CHECKSUM_LEN: usize = 8;

/// Outcome of one run of one instance.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub params: AlgorithmParams,
    pub run: u32,
    pub steps: u64,
    pub base_seed: u64,
    pub diverged: bool,
    /// Mean over steps of the post-update error; `+inf` if the run diverged.
    pub mean_ave: f64,
    pub final_ave: f64,
    /// Spacing of `curve` in steps, 0 when no curve was kept.
    pub curve_every: u32,
    /// Error at step 0 and after every `curve_every` steps.
    pub curve: Vec<f64>,
}

impl RunRecord {
    pub fn to_bytes(&self) -> Vec<u8> {
        let p = &self.params;
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.curve.len() + CHECKSUM_LEN);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&RECORD_VERSION.to_le_bytes());
        out.push(algorithm_index(p.alg));
        for x in [p.alpha, p.lambda, p.eta, p.beta, p.tdrc_regularization] {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out.push(match p.vtrace_clip {
            VtraceClip::Min => 0,
            VtraceClip::Max => 1,
        });
        out.extend_from_slice(&self.run.to_le_bytes());
        out.extend_from_slice(&self.steps.to_le_bytes());
        out.extend_from_slice(&self.base_seed.to_le_bytes());
        out.push(self.diverged as u8);
        out.extend_from_slice(&self.mean_ave.to_le_bytes());
        out.extend_from_slice(&self.final_ave.to_le_bytes());
        out.extend_from_slice(&self.curve_every.to_le_bytes());
        out.extend_from_slice(&(self.curve.len() as u32).to_le_bytes());
        for x in &self.curve {
            out.extend_from_slice(&x.to_le_bytes());
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest[..CHECKSUM_LEN]);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<RunRecord, String> {
        if bytes.len() < HEADER_LEN + CHECKSUM_LEN {
            return Err("truncated header".into());
        }
        if &bytes[..4] != MAGIC {
            return Err("bad magic".into());
        }
        let (body, sum) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
        if Sha256::digest(body)[..CHECKSUM_LEN] != *sum {
            return Err("checksum mismatch".into());
        }
        let mut r = Reader { bytes: body, at: 4 };
        let version = u16::from_le_bytes(r.take::<2>());
        if version != RECORD_VERSION {
            return Err(format!("unsupported version {version}"));
        }
        let alg = *Algorithm::ALL.get(r.take::<1>()[0] as usize).ok_or("bad algorithm")?;
        let [alpha, lambda, eta, beta, reg] = [r.f64(), r.f64(), r.f64(), r.f64(), r.f64()];
        let vtrace_clip = match r.take::<1>()[0] {
            0 => VtraceClip::Min,
            1 => VtraceClip::Max,
            _ => return Err("bad clip mode".into()),
        };
        let run = u32::from_le_bytes(r.take::<4>());
        let steps = u64::from_le_bytes(r.take::<8>());
        let base_seed = u64::from_le_bytes(r.take::<8>());
        let diverged = match r.take::<1>()[0] {
            0 => false,
            1 => true,
            _ => return Err("bad diverged flag".into()),
        };
        let mean_ave = r.f64();
        let final_ave = r.f64();
        let curve_every = u32::from_le_bytes(r.take::<4>());
        let len = u32::from_le_bytes(r.take::<4>()) as usize;
        if body.len() != HEADER_LEN + 8 * len {
            return Err("length does not match curve size".into());
        }
        let curve = (0..len).map(|_| r.f64()).collect();
        let mut params = AlgorithmParams::new(alg, alpha, lambda).with_eta(eta).with_beta(beta);
        params.vtrace_clip = vtrace_clip;
        params.tdrc_regularization = reg;
        Ok(RunRecord { params, run, steps, base_seed, diverged, mean_ave, final_ave, curve_every, curve })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let out = self.bytes[self.at..self.at + N].try_into().unwrap();
        self.at += N;
        out
    }

    fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.take::<8>())
    }
}

fn algorithm_index(alg: Algorithm) -> u8 {
    Algorithm::ALL.iter().position(|&a| a == alg).unwrap() as u8
}

/// What a record lookup found.
#[derive(Debug)]
pub enum Lookup {
    Missing,
    Found(RunRecord),
    /// The file was unreadable or did not match; it has been moved aside.
    Quarantined { path: PathBuf, reason: String },
}

#[derive(Clone, Debug)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn new(root: impl Into<PathBuf>) -> Store {
        Store { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn task_dir(&self, task: Variant) -> PathBuf {
        self.root.join(task.slug())
    }

    pub fn instance_dir(&self, task: Variant, params: &AlgorithmParams) -> PathBuf {
        self.task_dir(task).join(params.alg.slug()).join(instance_key(params))
    }

    pub fn record_path(&self, task: Variant, params: &AlgorithmParams, run: u32) -> PathBuf {
        self.instance_dir(task, params).join(format!("{run}.rec"))
    }

    pub fn summary_path(&self, task: Variant) -> PathBuf {
        self.task_dir(task).join("summary.csv")
    }

    pub fn oracle_dir(&self, task: Variant) -> PathBuf {
        self.task_dir(task).join("oracles")
    }

    pub fn lstd_path(&self, task: Variant) -> PathBuf {
        self.task_dir(task).join("lstd.csv")
    }

    pub fn write_record(&self, task: Variant, rec: &RunRecord) -> Result<PathBuf> {
        let path = self.record_path(task, &rec.params, rec.run);
        write_atomic(&path, &rec.to_bytes())?;
        Ok(path)
    }

    /// Reads a record if present; corrupt or mismatching files are renamed to
    /// `<run>.rec.corrupt` so the item is recomputed.
    pub fn lookup(&self, task: Variant, params: &AlgorithmParams, run: u32, steps: u64, seed: u64) -> Result<Lookup> {
        let path = self.record_path(task, params, run);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Lookup::Missing),
            Err(e) => return Err(Error::io(&path, e)),
        };
        let problem = match RunRecord::from_bytes(&bytes) {
            Ok(r) if r.params == *params && r.run == run && r.steps == steps && r.base_seed == seed => {
                return Ok(Lookup::Found(r))
            }
            Ok(_) => "record does not match the plan".to_string(),
            Err(e) => e,
        };
        let aside = path.with_extension("rec.corrupt");
        fs::rename(&path, &aside).map_err(|e| Error::io(&path, e))?;
        Ok(Lookup::Quarantined { path: aside, reason: problem })
    }

    pub fn read_record(path: &Path) -> Result<RunRecord> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        RunRecord::from_bytes(&bytes).map_err(|reason| Error::CorruptRecord { path: path.to_path_buf(), reason })
    }

    /// Every readable record of a task, grouped by instance and ordered by algorithm,
    /// then parameters, then run. Unreadable files are skipped and returned separately.
    pub fn load_task(&self, task: Variant) -> Result<(Vec<Vec<RunRecord>>, Vec<Error>)> {
        let mut groups: Vec<Vec<RunRecord>> = Vec::new();
        let mut bad = Vec::new();
        for alg in Algorithm::ALL {
            let dir = self.task_dir(task).join(alg.slug());
            for inst in sorted_entries(&dir)? {
                let mut runs = Vec::new();
                for file in sorted_entries(&inst)? {
                    if file.extension().and_then(|e| e.to_str()) != Some("rec") {
                        continue;
                    }
                    match Store::read_record(&file) {
                        Ok(r) => runs.push(r),
                        Err(e) => bad.push(e),
                    }
                }
                runs.sort_by_key(|r| r.run);
                if !runs.is_empty() {
                    groups.push(runs);
                }
            }
        }
        groups.sort_by(|a, b| param_order(&a[0].params, &b[0].params));
        Ok((groups, bad))
    }
}

/// Algorithm, then `lambda`, `eta`, `beta`, then `alpha` descending (grid order).
pub fn param_order(a: &AlgorithmParams, b: &AlgorithmParams) -> std::cmp::Ordering {
    algorithm_index(a.alg)
        .cmp(&algorithm_index(b.alg))
        .then(a.lambda.total_cmp(&b.lambda))
        .then(a.eta.total_cmp(&b.eta))
        .then(a.beta.total_cmp(&b.beta))
        .then(b.alpha.total_cmp(&a.alpha))
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let rd = match fs::read_dir(dir) {
        Ok(rd) => rd,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(dir, e)),
    };
    let mut out = rd.map(|e| e.map(|e| e.path())).collect::<std::io::Result<Vec<_>>>().map_err(|e| Error::io(dir, e))?;
    out.sort();
    Ok(out)
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().expect("record paths have a parent");
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path.file_name().unwrap().to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
