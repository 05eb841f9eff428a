//! Accelerator working sets and the power of keeping them in SRAM.
//!
//! A kernel's working set is affine in the channel count:
//! `channels * (per_channel_bytes + bytes_per_sample * window_samples) + fixed_bytes`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

/// Bytes per stored word (coefficients, filter state, complex halves).
pub const DEFAULT_WORD_BYTES: u64 = 4;

pub const DEFAULT_BBF_SECTIONS: u64 = 4;
pub const DEFAULT_DWT_LEVELS: u64 = 4;
pub const DEFAULT_DTW_BAND: u64 = 16;
/// Window of the fixed-size kernels (FFT, XCOR, DTW).
pub const DEFAULT_FIXED_WINDOW: u64 = 128;
/// Batch of samples per channel for the streaming filters (BBF, DWT).
pub const DEFAULT_STREAM_WINDOW: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelKind {
    #[serde(rename = "BBF")]
    Bbf,
    #[serde(rename = "DWT")]
    Dwt,
    #[serde(rename = "FFT")]
    Fft,
    #[serde(rename = "XCOR")]
    Xcor,
    #[serde(rename = "DTW")]
    Dtw,
    #[serde(rename = "custom")]
    Custom,
}

impl KernelKind {
    pub const VOCABULARY: [&'static str; 6] = ["BBF", "DWT", "FFT", "XCOR", "DTW", "custom"];

    pub fn as_str(self) -> &'static str {
        match self {
            KernelKind::Bbf => "BBF",
            KernelKind::Dwt => "DWT",
            KernelKind::Fft => "FFT",
            KernelKind::Xcor => "XCOR",
            KernelKind::Dtw => "DTW",
            KernelKind::Custom => "custom",
        }
    }

    /// Streaming kernels touch each byte of state once per window.
    pub fn is_streaming(self) -> bool {
        matches!(
            self,
            KernelKind::Bbf | KernelKind::Dwt | KernelKind::Xcor | KernelKind::Custom
        )
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "BBF" => KernelKind::Bbf,
            "DWT" => KernelKind::Dwt,
            "FFT" => KernelKind::Fft,
            "XCOR" => KernelKind::Xcor,
            "DTW" => KernelKind::Dtw,
            "custom" => KernelKind::Custom,
            other => {
                return Err(ModelError::param(
                    "kernel.name",
                    other,
                    format!("one of {}", KernelKind::VOCABULARY.join(", ")),
                ))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub kind: KernelKind,
    /// Bytes held per channel regardless of the window (filter state, DP band).
    pub per_channel_bytes: u64,
    /// Bytes per buffered sample.
    pub bytes_per_sample: u64,
    /// Samples per channel in one processing window.
    pub window_samples: u64,
    /// Bytes shared by all channels (coefficients, templates).
    pub fixed_bytes: u64,
    /// Fraction of the non-resident working set rewritten each window.
    pub dirty_fraction: f64,
}

impl Kernel {
    pub fn new(
        kind: KernelKind,
        per_channel_bytes: u64,
        bytes_per_sample: u64,
        window_samples: u64,
        fixed_bytes: u64,
        dirty_fraction: f64,
    ) -> Result<Self> {
        let k = Kernel {
            kind,
            per_channel_bytes,
            bytes_per_sample,
            window_samples,
            fixed_bytes,
            dirty_fraction,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_samples < 1 {
            return Err(ModelError::param(
                "window_samples",
                self.window_samples,
                ">= 1",
            ));
        }
        if !(0.0..=1.0).contains(&self.dirty_fraction) {
            return Err(ModelError::param(
                "dirty_fraction",
                self.dirty_fraction,
                "in [0, 1]",
            ));
        }
        Ok(())
    }

    /// Cascade of biquad sections: two state words per section per channel,
    /// six coefficient words per section shared.
    pub fn bbf(sections: u64, window_samples: u64) -> Result<Self> {
        let w = DEFAULT_WORD_BYTES;
        Kernel::new(
            KernelKind::Bbf,
            sections * 2 * w,
            0,
            window_samples,
            sections * 6 * w,
            1.0,
        )
    }

    /// Lifting DWT: two carried words per decomposition level per channel.
    pub fn dwt(levels: u64, window_samples: u64) -> Result<Self> {
        let w = DEFAULT_WORD_BYTES;
        Kernel::new(
            KernelKind::Dwt,
            levels * 2 * w,
            0,
            window_samples,
            2 * 4 * w,
            1.0,
        )
    }

    /// Complex FFT over a window: two words per sample.
    pub fn fft(window_samples: u64) -> Result<Self> {
        Kernel::new(
            KernelKind::Fft,
            0,
            2 * DEFAULT_WORD_BYTES,
            window_samples,
            0,
            1.0,
        )
    }

    /// Cross-correlation against one shared template of the window length.
    pub fn xcor(window_samples: u64) -> Result<Self> {
        let w = DEFAULT_WORD_BYTES;
        Kernel::new(
            KernelKind::Xcor,
            0,
            w,
            window_samples,
            window_samples * w,
            1.0,
        )
    }

    /// Banded DTW: two rows of the band per channel.
    pub fn dtw(band_width: u64, window_samples: u64) -> Result<Self> {
        Kernel::new(
            KernelKind::Dtw,
            2 * band_width * DEFAULT_WORD_BYTES,
            0,
            window_samples,
            0,
            1.0,
        )
    }

    /// The five kernels with their default parameters.
    pub fn default_suite() -> Vec<Kernel> {
        vec![
            Kernel::bbf(DEFAULT_BBF_SECTIONS, DEFAULT_STREAM_WINDOW).unwrap(),
            Kernel::dwt(DEFAULT_DWT_LEVELS, DEFAULT_STREAM_WINDOW).unwrap(),
            Kernel::fft(DEFAULT_FIXED_WINDOW).unwrap(),
            Kernel::xcor(DEFAULT_FIXED_WINDOW).unwrap(),
            Kernel::dtw(DEFAULT_DTW_BAND, DEFAULT_FIXED_WINDOW).unwrap(),
        ]
    }

    pub fn bytes_per_channel(&self) -> u64 {
        self.per_channel_bytes + self.bytes_per_sample * self.window_samples
    }

    pub fn working_set_bytes(&self, channels: u64) -> u64 {
        channels * self.bytes_per_channel() + self.fixed_bytes
    }

    pub fn fits_in_sram(&self, channels: u64, sram_capacity: u64) -> bool {
        self.working_set_bytes(channels) <= sram_capacity
    }
}

/// Linear SRAM power: leakage per resident byte plus energy per accessed byte.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SramModel {
    /// Watts per resident byte.
    pub leakage_density: f64,
    /// Joules per byte accessed.
    pub e_access: f64,
}

impl SramModel {
    pub fn new(leakage_density: f64, e_access: f64) -> Result<Self> {
        let m = SramModel {
            leakage_density,
            e_access,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.leakage_density >= 0.0) {
            return Err(ModelError::param(
                "leakage_density",
                self.leakage_density,
                ">= 0",
            ));
        }
        if !(self.e_access >= 0.0) {
            return Err(ModelError::param("e_access", self.e_access, ">= 0"));
        }
        Ok(())
    }

    pub fn power(&self, resident_bytes: f64, access_rate: f64) -> f64 {
        self.leakage_density * resident_bytes + self.e_access * access_rate
    }
}
