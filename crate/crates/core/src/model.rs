//! Shared domain types, unit conventions, and parameter validation.
//!
//! All rates are expressed in units of log P bits per symbol so that the
//! normalized-delivery-time arithmetic is SNR-free. The simulator is the only
//! place where log P reappears, when bits are converted to symbols.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

/// Problem instance: the axes of every closed-form expression.
///
/// `mu` is the fractional cache size of each edge node, `r_f` the fronthaul
/// rate and `r_d` the D2D rate (both per-link, in units of log P bits per
/// symbol), and `n_files` the library size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub mu: f64,
    pub r_f: f64,
    pub r_d: f64,
    pub n_files: u32,
}

/// Validation failure for a [`SystemParams`] field.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("mu must be a fraction in [0, 1], got {0}")]
    Mu(f64),
    #[error("r_f must be a nonnegative finite rate, got {0}")]
    FronthaulRate(f64),
    #[error("r_d must be a nonnegative finite rate, got {0}")]
    D2dRate(f64),
    #[error("n_files must be at least 2, got {0}")]
    NFiles(u32),
}

impl SystemParams {
    pub fn new(mu: f64, r_f: f64, r_d: f64, n_files: u32) -> Result<Self, ParamError> {
        let p = SystemParams {
            mu,
            r_f,
            r_d,
            n_files,
        };
        p.validate()?;
        Ok(p)
    }

    /// Accepts iff every field invariant holds; the error names the violated
    /// field. Boundary values (`mu = 0`, zero rates) are legal; feasibility is
    /// a separate question answered by the analysis module.
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.mu >= 0.0 && self.mu <= 1.0) {
            return Err(ParamError::Mu(self.mu));
        }
        if !(self.r_f >= 0.0 && self.r_f.is_finite()) {
            return Err(ParamError::FronthaulRate(self.r_f));
        }
        if !(self.r_d >= 0.0 && self.r_d.is_finite()) {
            return Err(ParamError::D2dRate(self.r_d));
        }
        if self.n_files < 2 {
            return Err(ParamError::NFiles(self.n_files));
        }
        Ok(())
    }
}

/// Finite-resolution knobs for the simulator: file size L in bits, log P in
/// bits per symbol, and the block count B of the staggered schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimScale {
    pub file_bits: u64,
    pub log_p: f64,
    pub blocks: u32,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScaleError {
    #[error("file_bits must be positive, got {0}")]
    FileBits(u64),
    #[error("log_p must be positive and finite, got {0}")]
    LogP(f64),
    #[error("blocks must be positive, got {0}")]
    Blocks(u32),
    #[error("file_bits ({file_bits}) must be divisible by blocks ({blocks})")]
    BlockDivision { file_bits: u64, blocks: u32 },
}

impl SimScale {
    pub fn new(file_bits: u64, log_p: f64, blocks: u32) -> Result<Self, ScaleError> {
        let s = SimScale {
            file_bits,
            log_p,
            blocks,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ScaleError> {
        if self.file_bits == 0 {
            return Err(ScaleError::FileBits(self.file_bits));
        }
        if !(self.log_p > 0.0 && self.log_p.is_finite()) {
            return Err(ScaleError::LogP(self.log_p));
        }
        if self.blocks == 0 {
            return Err(ScaleError::Blocks(self.blocks));
        }
        if !self.file_bits.is_multiple_of(u64::from(self.blocks)) {
            return Err(ScaleError::BlockDivision {
                file_bits: self.file_bits,
                blocks: self.blocks,
            });
        }
        Ok(())
    }

    /// Bits per block, L/B.
    pub fn block_bits(&self) -> u64 {
        self.file_bits / u64::from(self.blocks)
    }

    /// Symbols of the ideal reference system, L / log P (as a real).
    pub fn reference_symbols(&self) -> f64 {
        self.file_bits as f64 / self.log_p
    }
}

/// A normalized delivery time. `+inf` encodes infeasibility so that sweeps can
/// tabulate infeasible corners instead of erroring out.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Ndt(pub f64);

impl Ndt {
    pub const INFEASIBLE: Ndt = Ndt(f64::INFINITY);

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_feasible(self) -> bool {
        self.0.is_finite()
    }
}

impl fmt::Display for Ndt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// Per-resource NDTs of a serial policy: fronthaul, edge, and D2D phase times
/// in normalized units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NdtTriple {
    pub delta_f: f64,
    pub delta_e: f64,
    pub delta_d: f64,
}

impl NdtTriple {
    pub fn new(delta_f: f64, delta_e: f64, delta_d: f64) -> Self {
        NdtTriple {
            delta_f,
            delta_e,
            delta_d,
        }
    }

    /// Component-wise maximum, the pipelined NDT this triple achieves after
    /// block-Markov conversion.
    pub fn max(&self) -> f64 {
        self.delta_f.max(self.delta_e).max(self.delta_d)
    }

    /// Sum of the phases, the serial NDT of the policy.
    pub fn sum(&self) -> f64 {
        self.delta_f + self.delta_e + self.delta_d
    }
}

/// A demand vector (d1, d2) with 1-based file indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DemandVector {
    pub d1: u32,
    pub d2: u32,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DemandError {
    #[error("demand ({d1}, {d2}) out of bounds for a library of {n_files} files")]
    OutOfBounds { d1: u32, d2: u32, n_files: u32 },
    #[error("worst-case demands need at least 2 files, got {0}")]
    LibraryTooSmall(u32),
}

impl DemandVector {
    pub fn new(d1: u32, d2: u32, n_files: u32) -> Result<Self, DemandError> {
        if d1 == 0 || d2 == 0 || d1 > n_files || d2 > n_files {
            return Err(DemandError::OutOfBounds { d1, d2, n_files });
        }
        Ok(DemandVector { d1, d2 })
    }

    pub fn is_distinct(&self) -> bool {
        self.d1 != self.d2
    }
}

/// The two demand equivalence classes, each with one representative:
/// coinciding demands and distinct demands. Under the symmetric placement
/// used throughout, delivery time depends only on which class the demand
/// falls in, so worst-case evaluation maximizes over these two.
pub fn worst_case_demands(n_files: u32) -> Result<Vec<DemandVector>, DemandError> {
    if n_files < 2 {
        return Err(DemandError::LibraryTooSmall(n_files));
    }
    Ok(vec![
        DemandVector { d1: 1, d2: 1 },
        DemandVector { d1: 1, d2: 2 },
    ])
}

/// Flat key-value configuration file. Lines are `key = value`, comments start
/// with `#`, blank lines are ignored.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Malformed { line: usize, text: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("missing key `{0}`")]
    MissingKey(String),
    #[error("key `{key}`: cannot parse `{value}` as {wanted}")]
    BadValue {
        key: String,
        value: String,
        wanted: &'static str,
    },
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Scale(#[from] ScaleError),
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let stripped = stripped.trim();
            if stripped.is_empty() {
                continue;
            }
            let Some((key, value)) = stripped.split_once('=') else {
                return Err(ConfigError::Malformed {
                    line,
                    text: raw.to_string(),
                });
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() || value.is_empty() {
                return Err(ConfigError::Malformed {
                    line,
                    text: raw.to_string(),
                });
            }
            if entries.insert(key.clone(), value).is_some() {
                return Err(ConfigError::DuplicateKey { line, key });
            }
        }
        Ok(ConfigFile { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: String) {
        self.entries.insert(key.to_string(), value);
    }

    pub fn require_f64(&self, key: &str) -> Result<f64, ConfigError> {
        let value = self
            .get(key)
            .ok_or_else(|| ConfigError::MissingKey(key.into()))?;
        value.parse::<f64>().map_err(|_| ConfigError::BadValue {
            key: key.into(),
            value: value.into(),
            wanted: "a decimal number",
        })
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.get(key) {
            Some(_) => self.require_f64(key),
            None => Ok(default),
        }
    }

    pub fn require_u64(&self, key: &str) -> Result<u64, ConfigError> {
        let value = self
            .get(key)
            .ok_or_else(|| ConfigError::MissingKey(key.into()))?;
        value.parse::<u64>().map_err(|_| ConfigError::BadValue {
            key: key.into(),
            value: value.into(),
            wanted: "a nonnegative integer",
        })
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        match self.get(key) {
            Some(_) => self.require_u64(key),
            None => Ok(default),
        }
    }

    /// Comma-separated list of nonnegative integers, e.g. `1,10,100`.
    pub fn u64_list(&self, key: &str) -> Result<Option<Vec<u64>>, ConfigError> {
        let Some(value) = self.get(key) else {
            return Ok(None);
        };
        let mut out = Vec::new();
        for part in value.split(',') {
            let part = part.trim();
            out.push(part.parse::<u64>().map_err(|_| ConfigError::BadValue {
                key: key.into(),
                value: value.into(),
                wanted: "a comma-separated list of integers",
            })?);
        }
        Ok(Some(out))
    }

    pub fn system_params(&self) -> Result<SystemParams, ConfigError> {
        let mu = self.require_f64("mu")?;
        let r_f = self.require_f64("r_f")?;
        let r_d = self.require_f64("r_d")?;
        let n_files = self.require_u64("n_files")? as u32;
        Ok(SystemParams::new(mu, r_f, r_d, n_files)?)
    }

    pub fn sim_scale(&self) -> Result<SimScale, ConfigError> {
        let file_bits = self.require_u64("file_bits")?;
        let log_p = self.require_f64("log_p")?;
        let blocks = self.require_u64("blocks")? as u32;
        Ok(SimScale::new(file_bits, log_p, blocks)?)
    }

    /// Canonical serialization: keys in lexicographic order, one `key = value`
    /// per line. Parsing the output reproduces the same entries.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        for (key, value) in &self.entries {
            out.push_str(key);
            out.push_str(" = ");
            out.push_str(value);
            out.push('\n');
        }
        out
    }
}

/// Writes accepted parameters back out in the canonical config format.
pub fn params_to_config(p: &SystemParams, scale: Option<&SimScale>) -> ConfigFile {
    let mut cfg = ConfigFile::default();
    cfg.set("mu", format!("{}", p.mu));
    cfg.set("r_f", format!("{}", p.r_f));
    cfg.set("r_d", format!("{}", p.r_d));
    cfg.set("n_files", format!("{}", p.n_files));
    if let Some(s) = scale {
        cfg.set("file_bits", format!("{}", s.file_bits));
        cfg.set("log_p", format!("{}", s.log_p));
        cfg.set("blocks", format!("{}", s.blocks));
    }
    cfg
}
