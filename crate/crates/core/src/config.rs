//! Scenario files.
//!
//! A scenario is a TOML document whose numeric keys carry their unit in the
//! name (`t_read_us`, `bus_mb_per_s`, `power_budget_mw`, ...). Megabytes
//! and megabits are decimal (10^6). Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::accel::{
    Kernel, KernelKind, SramModel, DEFAULT_BBF_SECTIONS, DEFAULT_DTW_BAND, DEFAULT_DWT_LEVELS,
    DEFAULT_FIXED_WINDOW, DEFAULT_STREAM_WINDOW,
};
use crate::em::SwapMode;
use crate::error::ModelError;
use crate::feasibility::{System, SystemBudget};
use crate::flash::{FlashDevice, FlashGeometry, FlashPower, FlashTiming};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Parse(String),
    #[error("invalid scenario field `{section}`: {source}")]
    Invalid { section: String, source: ModelError },
}

fn invalid(section: impl Into<String>) -> impl FnOnce(ModelError) -> ConfigError {
    let section = section.into();
    move |source| ConfigError::Invalid { section, source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryFile {
    pub chips: u32,
    pub dies_per_chip: u32,
    pub planes_per_die: u32,
    pub blocks_per_plane: u32,
    pub pages_per_block: u32,
    pub page_size_bytes: u64,
    /// Optional cross-check of the product of the fields above, in GiB.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_capacity_gib: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingFile {
    pub t_read_us: f64,
    pub t_program_us: f64,
    pub t_erase_us: f64,
    pub bus_mb_per_s: f64,
    pub t_cmd_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerFile {
    pub e_read_page_uj: f64,
    pub e_program_page_uj: f64,
    pub e_erase_block_uj: f64,
    pub e_bus_pj_per_byte: f64,
    pub p_chip_active_mw: f64,
    pub p_chip_idle_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlashFile {
    pub geometry: GeometryFile,
    pub timing: TimingFile,
    pub power: PowerFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SramFile {
    pub leakage_pw_per_byte: f64,
    pub e_access_pj_per_byte: f64,
    pub capacity_accel_bytes: u64,
    pub capacity_controller_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetFile {
    pub total_data_rate_mbit_per_s: f64,
    pub sample_bits: u32,
    pub power_budget_mw: f64,
    pub response_deadline_ms: f64,
    #[serde(default)]
    pub controller_overhead_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels_min: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels_max: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

/// One `[[kernels]]` entry. Shape parameters (`sections`, `levels`,
/// `band_width`) feed the per-kind defaults; the byte fields override them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelFile {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sections: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band_width: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_samples: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_channel_bytes: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bytes_per_sample: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_bytes: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dirty_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default = "default_mode")]
    pub mode: String,
    pub flash: FlashFile,
    pub sram: SramFile,
    pub budget: BudgetFile,
    pub sweep: SweepFile,
    pub kernels: Vec<KernelFile>,
}

fn default_mode() -> String {
    "naive".to_string()
}

/// Channel counts to sweep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepGrid {
    List(Vec<u64>),
    /// Log-spaced, rounded to integers and de-duplicated.
    LogRange {
        min: u64,
        max: u64,
        points: usize,
    },
}

impl SweepGrid {
    pub fn channels(&self) -> Vec<u64> {
        match self {
            SweepGrid::List(v) => v.clone(),
            SweepGrid::LogRange { min, max, points } => log_channels(*min, *max, *points),
        }
    }
}

pub fn log_channels(min: u64, max: u64, points: usize) -> Vec<u64> {
    if points <= 1 || min == max {
        return vec![min];
    }
    let ratio = (max as f64 / min as f64).ln();
    let mut out: Vec<u64> = (0..points)
        .map(|i| {
            let c = (min as f64 * (ratio * i as f64 / (points - 1) as f64).exp()).round() as u64;
            c.clamp(min, max)
        })
        .collect();
    out[points - 1] = max;
    out.dedup();
    out
}

/// A validated scenario. `file` is the normalized source: kernels fully
/// resolved, so serializing it and parsing again yields the same scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub system: System,
    pub grid: SweepGrid,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let file: ScenarioFile =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        Self::from_file(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.file).expect("scenario serializes")
    }

    pub fn from_file(mut file: ScenarioFile) -> Result<Self, ConfigError> {
        let mode: SwapMode = file.mode.parse().map_err(invalid("mode"))?;
        let flash = flash_from(&file.flash)?;
        let sram = SramModel::new(
            file.sram.leakage_pw_per_byte / 1e12,
            file.sram.e_access_pj_per_byte / 1e12,
        )
        .map_err(invalid("sram"))?;
        let b = &file.budget;
        let budget = SystemBudget {
            total_data_rate: b.total_data_rate_mbit_per_s * 1e6,
            sample_bits: b.sample_bits,
            power_budget: b.power_budget_mw / 1e3,
            response_deadline: b.response_deadline_ms / 1e3,
            sram_capacity_accel: file.sram.capacity_accel_bytes,
            sram_capacity_controller: file.sram.capacity_controller_bytes,
            controller_overhead: b.controller_overhead_mw / 1e3,
        };
        budget.validate().map_err(invalid("budget"))?;

        if file.kernels.is_empty() {
            return Err(ConfigError::Invalid {
                section: "kernels".into(),
                source: ModelError::param("kernels", 0, "at least one [[kernels]] entry"),
            });
        }
        let mut kernels = Vec::with_capacity(file.kernels.len());
        for (i, k) in file.kernels.iter_mut().enumerate() {
            let kernel = kernel_from(k).map_err(invalid(format!("kernels[{i}]")))?;
            *k = normalized_kernel(&kernel);
            kernels.push(kernel);
        }
        let grid = grid_from(&file.sweep)?;
        file.mode = mode.as_str().to_string();

        Ok(Scenario {
            system: System {
                flash,
                sram,
                budget,
                kernels,
                mode,
            },
            grid,
            file,
        })
    }
}

fn flash_from(f: &FlashFile) -> Result<FlashDevice, ConfigError> {
    let g = &f.geometry;
    let geometry = FlashGeometry {
        chips: g.chips,
        dies_per_chip: g.dies_per_chip,
        planes_per_die: g.planes_per_die,
        blocks_per_plane: g.blocks_per_plane,
        pages_per_block: g.pages_per_block,
        page_size: g.page_size_bytes,
    };
    geometry.validate().map_err(invalid("flash.geometry"))?;
    if let Some(gib) = g.total_capacity_gib {
        let actual = geometry.total_capacity();
        if actual != (gib as u128) << 30 {
            return Err(ConfigError::Invalid {
                section: "flash.geometry".into(),
                source: ModelError::param(
                    "total_capacity_gib",
                    gib,
                    format!("= product of the geometry fields ({actual} B)"),
                ),
            });
        }
    }
    let t = &f.timing;
    let timing = FlashTiming {
        t_read: t.t_read_us / 1e6,
        t_program: t.t_program_us / 1e6,
        t_erase: t.t_erase_us / 1e6,
        bus_bandwidth: t.bus_mb_per_s * 1e6,
        t_cmd: t.t_cmd_us / 1e6,
    };
    timing.validate().map_err(invalid("flash.timing"))?;
    let p = &f.power;
    let power = FlashPower {
        e_read_page: p.e_read_page_uj / 1e6,
        e_program_page: p.e_program_page_uj / 1e6,
        e_erase_block: p.e_erase_block_uj / 1e6,
        e_bus_per_byte: p.e_bus_pj_per_byte / 1e12,
        p_chip_active: p.p_chip_active_mw / 1e3,
        p_chip_idle: p.p_chip_idle_mw / 1e3,
    };
    power.validate().map_err(invalid("flash.power"))?;
    FlashDevice::new(geometry, timing, power).map_err(invalid("flash"))
}

fn kernel_from(k: &KernelFile) -> Result<Kernel, ModelError> {
    let kind: KernelKind = k.name.parse()?;
    let window = |default| k.window_samples.unwrap_or(default);
    let mut kernel = match kind {
        KernelKind::Bbf => Kernel::bbf(
            k.sections.unwrap_or(DEFAULT_BBF_SECTIONS),
            window(DEFAULT_STREAM_WINDOW),
        )?,
        KernelKind::Dwt => Kernel::dwt(
            k.levels.unwrap_or(DEFAULT_DWT_LEVELS),
            window(DEFAULT_STREAM_WINDOW),
        )?,
        KernelKind::Fft => Kernel::fft(window(DEFAULT_FIXED_WINDOW))?,
        KernelKind::Xcor => Kernel::xcor(window(DEFAULT_FIXED_WINDOW))?,
        KernelKind::Dtw => Kernel::dtw(
            k.band_width.unwrap_or(DEFAULT_DTW_BAND),
            window(DEFAULT_FIXED_WINDOW),
        )?,
        KernelKind::Custom => {
            let w = k.window_samples.ok_or_else(|| {
                ModelError::param("window_samples", "missing", "required for custom kernels")
            })?;
            Kernel::new(KernelKind::Custom, 0, 0, w, 0, 1.0)?
        }
    };
    if let Some(v) = k.per_channel_bytes {
        kernel.per_channel_bytes = v;
    }
    if let Some(v) = k.bytes_per_sample {
        kernel.bytes_per_sample = v;
    }
    if let Some(v) = k.fixed_bytes {
        kernel.fixed_bytes = v;
    }
    if let Some(v) = k.dirty_fraction {
        kernel.dirty_fraction = v;
    }
    kernel.validate()?;
    Ok(kernel)
}

fn normalized_kernel(k: &Kernel) -> KernelFile {
    KernelFile {
        name: k.kind.as_str().to_string(),
        window_samples: Some(k.window_samples),
        per_channel_bytes: Some(k.per_channel_bytes),
        bytes_per_sample: Some(k.bytes_per_sample),
        fixed_bytes: Some(k.fixed_bytes),
        dirty_fraction: Some(k.dirty_fraction),
        ..KernelFile::default()
    }
}

fn grid_from(s: &SweepFile) -> Result<SweepGrid, ConfigError> {
    let bad = |field: &'static str, value: String, bound: &str| ConfigError::Invalid {
        section: "sweep".into(),
        source: ModelError::param(field, value, bound),
    };
    match (&s.channels, s.channels_min, s.channels_max, s.points) {
        (Some(list), None, None, None) => {
            if list.is_empty() {
                return Err(bad("channels", "[]".into(), "non-empty"));
            }
            if let Some(&c) = list.iter().find(|&&c| c == 0) {
                return Err(bad("channels", c.to_string(), "every entry >= 1"));
            }
            Ok(SweepGrid::List(list.clone()))
        }
        (None, Some(min), Some(max), Some(points)) => {
            if min < 1 {
                return Err(bad("channels_min", min.to_string(), ">= 1"));
            }
            if max < min {
                return Err(bad("channels_max", max.to_string(), ">= channels_min"));
            }
            if points < 1 {
                return Err(bad("points", points.to_string(), ">= 1"));
            }
            Ok(SweepGrid::LogRange { min, max, points })
        }
        _ => Err(bad(
            "sweep",
            "mixed or incomplete keys".into(),
            "either `channels` or all of `channels_min`, `channels_max`, `points`",
        )),
    }
}
