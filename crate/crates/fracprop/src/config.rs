//! Drive files and training configs: flat `key=value` lines with `#`
//! comments, using the netlist's number and waveform syntax.
//!
//! A drive file assigns waveforms to sources and outputs:
//!
//! ```text
//! V1=sine(1,0.5,0)
//! OUT=0.3
//! ```
//!
//! A training config holds scalar settings plus one drive per example:
//!
//! ```text
//! epochs=50
//! lr=0.05
//! beta=1e-3
//! dt=1e-3
//! t_end=2
//! seed=7
//! example.0.V1=1
//! example.0.OUT=0.4
//! ```

use std::collections::BTreeMap;

use fracprop_core::circuit::{Circuit, ElementKind};
use fracprop_core::dynamics::{DriveSet, SimConfig};
use fracprop_core::eqprop::{TrainConfig, DEFAULT_BETA, DEFAULT_G_MIN};
use fracprop_core::frac_ops::{History, SampleGrid};

use crate::netlist::{parse_number, parse_waveform, strip_comment, ParseError};

/// One `key=value` line with the column of its value.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub column: usize,
    pub key: String,
    pub value: String,
}

pub fn parse_entries(text: &str) -> Result<Vec<Entry>, ParseError> {
    let mut out: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let body = strip_comment(raw);
        let trimmed = body.trim();
        if trimmed.is_empty() {
            continue;
        }
        let lead = body.len() - body.trim_start().len();
        let col = body[..lead].chars().count() + 1;
        let (k, v) = trimmed
            .split_once('=')
            .ok_or_else(|| ParseError::new(i + 1, col, format!("expected `key=value`, got `{trimmed}`")))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(ParseError::new(i + 1, col, format!("expected `key=value`, got `{trimmed}`")));
        }
        if out.iter().any(|e| e.key == k) {
            return Err(ParseError::new(i + 1, col, format!("`{k}` given twice")));
        }
        let vcol = col + trimmed.find('=').map(|p| trimmed[..p + 1].chars().count()).unwrap_or(0);
        out.push(Entry {
            line: i + 1,
            column: vcol,
            key: k.to_string(),
            value: v.to_string(),
        });
    }
    Ok(out)
}

fn add_to_drive(circuit: &Circuit, drive: &mut DriveSet, e: &Entry, name: &str) -> Result<(), ParseError> {
    let w = parse_waveform(&e.value).map_err(|m| ParseError::new(e.line, e.column, m))?;
    let kind = circuit.index_of(name).map(|i| &circuit.elements()[i].kind);
    match kind {
        Some(ElementKind::VoltageSource(_)) | Some(ElementKind::CurrentSource(_)) => {
            drive.inputs.insert(name.to_string(), w);
        }
        Some(ElementKind::OutputCapacitor { .. }) => {
            drive.targets.insert(name.to_string(), w);
        }
        _ => {
            return Err(ParseError::new(
                e.line,
                1,
                format!("`{name}` is not a source or output of the netlist"),
            ))
        }
    }
    Ok(())
}

pub fn parse_drive(text: &str, circuit: &Circuit) -> Result<DriveSet, ParseError> {
    let mut drive = DriveSet::new();
    for e in parse_entries(text)? {
        add_to_drive(circuit, &mut drive, &e, &e.key)?;
    }
    Ok(drive)
}

/// Grid and solver settings shared by all commands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSettings {
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
    pub newton_tol: f64,
    pub newton_max_iters: usize,
    /// `Some(len)` for windowed fractional history.
    pub window: Option<usize>,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            t_start: 0.0,
            t_end: 1.0,
            dt: 1e-3,
            newton_tol: SimConfig::DEFAULT_TOL,
            newton_max_iters: SimConfig::DEFAULT_MAX_ITERS,
            window: None,
        }
    }
}

impl SimSettings {
    pub fn build(&self) -> Result<SimConfig, String> {
        let grid = SampleGrid::spanning(self.t_start, self.t_end, self.dt).map_err(|e| {
            format!(
                "cannot build grid from t_start={}, t_end={}, dt={}: {e}",
                self.t_start, self.t_end, self.dt
            )
        })?;
        let cfg = SimConfig {
            grid,
            newton_tol: self.newton_tol,
            newton_max_iters: self.newton_max_iters,
            history: match self.window {
                Some(n) => History::Window(n),
                None => History::Full,
            },
        };
        cfg.check().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainFile {
    pub config: TrainConfig,
    pub settings: SimSettings,
    /// Every entry as written, for the run manifest.
    pub entries: BTreeMap<String, String>,
}

pub fn parse_train_config(text: &str, circuit: &Circuit) -> Result<TrainFile, ParseError> {
    let entries = parse_entries(text)?;
    let mut s = SimSettings::default();
    let mut epochs = 50usize;
    let mut lr = 0.05;
    let mut beta = DEFAULT_BETA;
    let mut g_min = DEFAULT_G_MIN;
    let mut seed = 0u64;
    let mut oracle_eps = None;
    let mut examples: BTreeMap<usize, DriveSet> = BTreeMap::new();
    for e in &entries {
        let err = |m: String| ParseError::new(e.line, e.column, m);
        let num = || parse_number(&e.value).map_err(err);
        let int = || {
            e.value
                .parse::<u64>()
                .map_err(|_| err(format!("`{}` must be a non-negative integer", e.key)))
        };
        match e.key.as_str() {
            "epochs" => epochs = int()? as usize,
            "lr" | "learning_rate" => lr = num()?,
            "beta" => beta = num()?,
            "dt" => s.dt = num()?,
            "t_start" => s.t_start = num()?,
            "t_end" => s.t_end = num()?,
            "g_min" => g_min = num()?,
            "seed" => seed = int()?,
            "newton_tol" => s.newton_tol = num()?,
            "newton_max_iters" => s.newton_max_iters = int()? as usize,
            "history" => {
                s.window = match e.value.as_str() {
                    "full" => None,
                    v => Some(v.parse::<usize>().map_err(|_| err(format!("history must be `full` or a length, got `{v}`")))?),
                }
            }
            "oracle_eps" => oracle_eps = Some(num()?),
            k => {
                let Some(rest) = k.strip_prefix("example.") else {
                    return Err(ParseError::new(e.line, 1, format!("unknown key `{k}`")));
                };
                let (idx, name) = rest
                    .split_once('.')
                    .ok_or_else(|| ParseError::new(e.line, 1, format!("expected `example.<i>.<name>`, got `{k}`")))?;
                let idx: usize = idx
                    .parse()
                    .map_err(|_| ParseError::new(e.line, 1, format!("bad example index in `{k}`")))?;
                add_to_drive(circuit, examples.entry(idx).or_default(), e, name)?;
            }
        }
    }
    if let Some((&last, _)) = examples.iter().next_back() {
        if last + 1 != examples.len() {
            return Err(ParseError::new(1, 1, "example indices must run 0, 1, 2, ... without gaps"));
        }
    }
    let batch: Vec<DriveSet> = if examples.is_empty() {
        vec![DriveSet::new()]
    } else {
        examples.into_values().collect()
    };
    let sim = s.build().map_err(|m| ParseError::new(1, 1, m))?;
    let config = TrainConfig {
        epochs,
        learning_rate: lr,
        beta,
        sim,
        batch,
        g_min,
        seed,
        oracle_eps,
    };
    config.check().map_err(|e| ParseError::new(1, 1, e.to_string()))?;
    Ok(TrainFile {
        config,
        settings: s,
        entries: entries.into_iter().map(|e| (e.key, e.value)).collect(),
    })
}
