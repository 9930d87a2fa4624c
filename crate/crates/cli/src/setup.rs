//! Config resolution, file access and error reporting.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use eccfm::backbone::{Checkpoint, ModelParams};
use eccfm::codes::{parse_alist, parse_dense, Code};
use eccfm::harness::ExperimentConfig;
use serde::Serialize;

use crate::{CommonArgs, DecoderArgs};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "ECCFM_OUT_DIR";

#[derive(Debug)]
pub enum CliError {
    Io { path: PathBuf, msg: String },
    Format { path: PathBuf, msg: String },
    Core(eccfm::Error),
    Failed(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            Self::Io { .. } => "io",
            Self::Format { .. } => "format",
            Self::Core(eccfm::Error::InvalidConfig(_)) => "config",
            Self::Core(_) => "runtime",
            Self::Failed(_) => "check_failed",
        }
    }

    /// One logfmt line: `level=error kind=... [path=...] msg=...`.
    pub fn line(&self) -> String {
        let path = match self {
            Self::Io { path, .. } | Self::Format { path, .. } => format!(" path={:?}", path.display().to_string()),
            _ => String::new(),
        };
        let msg = match self {
            Self::Io { msg, .. } | Self::Format { msg, .. } | Self::Failed(msg) => msg.clone(),
            Self::Core(e) => e.to_string(),
        };
        format!("level=error kind={}{path} msg={msg:?}", self.kind())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.line())
    }
}

impl From<eccfm::Error> for CliError {
    fn from(e: eccfm::Error) -> Self {
        Self::Core(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

pub fn to_toml<T: Serialize>(value: &T, path: &Path) -> CliResult<String> {
    toml::to_string(value).map_err(|e| CliError::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

pub fn write_toml<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<()> {
    let path = dir.join(name);
    let text = to_toml(value, &path)?;
    write_file(&path, text)
}

pub fn read_config(path: &Path) -> CliResult<ExperimentConfig> {
    toml::from_str(&read_text(path)?).map_err(|e| CliError::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

/// Built-in id, else a file: alist when it parses as one, dense 0/1 rows otherwise.
pub fn load_code(id: &str) -> CliResult<Code> {
    if let Some(code) = Code::builtin(id) {
        return Ok(code);
    }
    let path = Path::new(id);
    let text = read_text(path)?;
    let h = match parse_alist(&text) {
        Ok(h) => h,
        Err(alist_err) => parse_dense(&text).map_err(|dense_err| CliError::Format {
            path: path.to_path_buf(),
            msg: format!("neither alist ({alist_err}) nor dense matrix ({dense_err})"),
        })?,
    };
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| id.to_string());
    Ok(Code::new(name, h)?)
}

pub fn load_checkpoint(path: &Path) -> CliResult<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    Checkpoint::from_bytes(&bytes).map_err(|e| CliError::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

pub fn load_params(path: &Path) -> CliResult<ModelParams> {
    Ok(load_checkpoint(path)?.params)
}

/// Config file (or defaults) with the common flags applied.
pub fn base_config(common: &CommonArgs) -> CliResult<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => read_config(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(c) = &common.code {
        cfg.code = c.clone();
    }
    if let Some(k) = common.channel {
        cfg.channel.kind = k;
    }
    if let Some(e) = common.ebn0 {
        cfg.channel.ebn0_db = e;
    }
    if common.sigma.is_some() {
        cfg.channel.sigma_override = common.sigma;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.output_dir = o.display().to_string();
    } else if let Ok(env) = std::env::var(OUT_DIR_ENV) {
        if !env.is_empty() {
            cfg.output_dir = env;
        }
    }
    Ok(cfg)
}

/// Applies decoder flags. When a checkpoint has a training config beside it
/// and the schedule was not given explicitly, the schedule is taken from there.
pub fn apply_decoder(cfg: &mut ExperimentConfig, d: &DecoderArgs, from_file: bool) -> CliResult<()> {
    let spec = &mut cfg.decoder;
    if let Some(k) = d.decoder {
        spec.kind = k;
    }
    if let Some(p) = &d.checkpoint {
        spec.checkpoint = Some(p.display().to_string());
    }
    if let Some(c) = d.condition {
        spec.condition = c;
    }
    if let Some(v) = d.bp_iters {
        spec.bp_iters = v;
    }
    if d.max_steps.is_some() {
        spec.max_steps = d.max_steps;
    }
    if let Some(v) = d.n_steps {
        spec.n_steps = v;
    }
    if let Some(v) = d.renoise_fraction {
        spec.renoise_fraction = v;
    }
    if let Some(b) = d.beta_step {
        cfg.train.beta_step = b;
    } else if !from_file {
        if let Some(ck) = &d.checkpoint {
            inherit_schedule(cfg, ck, d.condition.is_none())?;
        }
    }
    Ok(())
}

pub const TRAIN_CONFIG_FILE: &str = "train_config.toml";

/// Copies the diffusion schedule (and, if `condition` is set, the condition
/// kind) from the training config saved next to `checkpoint`, when present.
pub fn inherit_schedule(cfg: &mut ExperimentConfig, checkpoint: &Path, condition: bool) -> CliResult<()> {
    let beside = checkpoint
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(TRAIN_CONFIG_FILE);
    if beside.is_file() {
        let trained = read_config(&beside)?;
        cfg.train.beta_step = trained.train.beta_step;
        cfg.train.steps_override = trained.train.steps_override;
        if condition {
            cfg.decoder.condition = trained.train.condition_kind;
        }
    }
    Ok(())
}

pub fn out_dir(cfg: &ExperimentConfig) -> CliResult<PathBuf> {
    let dir = PathBuf::from(&cfg.output_dir);
    fs::create_dir_all(&dir).map_err(|e| CliError::Io {
        path: dir.clone(),
        msg: e.to_string(),
    })?;
    Ok(dir)
}
