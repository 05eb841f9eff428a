//! Block-transfer counts in the two-level external-memory model, with
//! separate read and write weights so that program/read asymmetry of flash
//! (latency or energy) can be priced in.
//!
//! Fast memory holds `M` words, storage moves `B` words per block.

use serde::{Deserialize, Serialize};

use crate::accel::{Kernel, KernelKind};
use crate::error::{ModelError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmModel {
    pub memory_words: u64,
    pub block_words: u64,
    pub word_bytes: u64,
}

impl EmModel {
    pub fn new(memory_words: u64, block_words: u64, word_bytes: u64) -> Result<Self> {
        if block_words < 1 {
            return Err(ModelError::param("block_words", block_words, ">= 1"));
        }
        if memory_words < 2 * block_words {
            return Err(ModelError::param(
                "memory_words",
                memory_words,
                format!(">= 2 * block_words ({})", 2 * block_words),
            ));
        }
        if word_bytes < 1 {
            return Err(ModelError::param("word_bytes", word_bytes, ">= 1"));
        }
        Ok(EmModel {
            memory_words,
            block_words,
            word_bytes,
        })
    }

    pub fn block_bytes(&self) -> u64 {
        self.block_words * self.word_bytes
    }

    /// Runs merged per pass: one block buffer per input plus one for output.
    pub fn fanout(&self) -> u64 {
        (self.memory_words / self.block_words).saturating_sub(1)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IoCount {
    pub reads: u64,
    pub writes: u64,
}

impl IoCount {
    pub fn new(reads: u64, writes: u64) -> Self {
        IoCount { reads, writes }
    }

    pub fn total(&self) -> u64 {
        self.reads + self.writes
    }
}

/// Per-read and per-write prices; the same shape serves latency and energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedIoCost {
    pub read: f64,
    pub write: f64,
}

impl WeightedIoCost {
    pub fn new(read: f64, write: f64) -> Result<Self> {
        if !(read >= 0.0) {
            return Err(ModelError::param("read weight", read, ">= 0"));
        }
        if !(write >= 0.0) {
            return Err(ModelError::param("write weight", write, ">= 0"));
        }
        Ok(WeightedIoCost { read, write })
    }

    pub fn total(&self, io: IoCount) -> f64 {
        weighted_cost(io, self.read, self.write)
    }
}

pub fn weighted_cost(io: IoCount, read_weight: f64, write_weight: f64) -> f64 {
    if read_weight == write_weight {
        // one rounding instead of three
        return read_weight * (io.reads as u128 + io.writes as u128) as f64;
    }
    read_weight * io.reads as f64 + write_weight * io.writes as f64
}

pub fn scan_cost(n_words: u64, model: &EmModel) -> IoCount {
    IoCount::new(n_words.div_ceil(model.block_words), 0)
}

/// Multiway mergesort cost together with its merge pass count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SortCost {
    pub io: IoCount,
    pub passes: u32,
}

/// Smallest `p` with `fanout^p >= runs`.
fn merge_passes(runs: u64, fanout: u64) -> u32 {
    let mut passes = 0;
    let mut covered: u64 = 1;
    while covered < runs {
        covered = covered.saturating_mul(fanout);
        passes += 1;
    }
    passes
}

/// Run formation (sort `M`-word loads) followed by `fanout`-way merge passes.
pub fn mergesort_plan(n_words: u64, model: &EmModel) -> Result<SortCost> {
    let blocks = n_words.div_ceil(model.block_words);
    if n_words <= model.memory_words {
        return Ok(SortCost {
            io: IoCount::new(blocks, blocks),
            passes: 0,
        });
    }
    let fanout = model.fanout();
    if fanout < 2 {
        return Err(ModelError::EmModel(format!(
            "fan-out {fanout} < 2: M = {} words holds too few blocks of {} words to merge",
            model.memory_words, model.block_words
        )));
    }
    let runs = n_words.div_ceil(model.memory_words);
    let passes = merge_passes(runs, fanout);
    let per_pass = blocks * (1 + passes as u64);
    Ok(SortCost {
        io: IoCount::new(per_pass, per_pass),
        passes,
    })
}

pub fn mergesort_cost(n_words: u64, model: &EmModel) -> Result<IoCount> {
    mergesort_plan(n_words, model).map(|c| c.io)
}

/// External FFT, costed with the sorting bound.
pub fn fft_cost(n_words: u64, model: &EmModel) -> Result<IoCount> {
    if !n_words.is_power_of_two() {
        return Err(ModelError::param("n_words", n_words, "a power of two"));
    }
    mergesort_cost(n_words, model)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwapMode {
    /// Move the overflow out and back once per window.
    #[default]
    Naive,
    /// Cost the overflow with the kernel's external-memory algorithm.
    Em,
}

impl SwapMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SwapMode::Naive => "naive",
            SwapMode::Em => "em",
        }
    }
}

impl std::str::FromStr for SwapMode {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(SwapMode::Naive),
            "em" => Ok(SwapMode::Em),
            other => Err(ModelError::param("mode", other, "naive or em")),
        }
    }
}

/// Bytes of the working set that do not fit in `sram_capacity`.
pub fn overflow_bytes(kernel: &Kernel, channels: u64, sram_capacity: u64) -> u64 {
    kernel
        .working_set_bytes(channels)
        .saturating_sub(sram_capacity)
}

/// Bytes written back per window: the dirty share of the overflow.
pub fn dirty_bytes(kernel: &Kernel, overflow: u64) -> u64 {
    (kernel.dirty_fraction * overflow as f64).ceil() as u64
}

/// Block reads and writes one window of `kernel` needs at `channels`.
///
/// `model` supplies the block size and word width; for the sort-shaped
/// kernels the fast-memory size is taken from `sram_capacity`.
pub fn kernel_io_per_window(
    kernel: &Kernel,
    channels: u64,
    sram_capacity: u64,
    model: &EmModel,
    mode: SwapMode,
) -> Result<IoCount> {
    let overflow = overflow_bytes(kernel, channels, sram_capacity);
    if overflow == 0 {
        return Ok(IoCount::default());
    }
    let block = model.block_bytes();
    let scan = IoCount::new(
        overflow.div_ceil(block),
        dirty_bytes(kernel, overflow).div_ceil(block),
    );
    if mode == SwapMode::Naive || kernel.kind.is_streaming() {
        return Ok(scan);
    }
    let ws_words = kernel
        .working_set_bytes(channels)
        .div_ceil(model.word_bytes);
    let fast = EmModel::new(
        sram_capacity / model.word_bytes,
        model.block_words,
        model.word_bytes,
    )
    .map_err(|e| ModelError::EmModel(format!("SRAM of {sram_capacity} B as fast memory: {e}")))?;
    match kernel.kind {
        KernelKind::Fft => fft_cost(ws_words.next_power_of_two(), &fast),
        KernelKind::Dtw => mergesort_cost(ws_words, &fast),
        _ => Ok(scan),
    }
}
