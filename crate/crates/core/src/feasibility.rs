//! Operating-point classification under a fixed total data rate.
//!
//! As channels grow the per-channel sampling rate falls, so every point
//! processes the same samples per second. A point is *cacheable* when every
//! working set fits in SRAM; otherwise the overflow is written to flash and
//! read back once per window (double buffering), and that traffic has to
//! finish inside the deadline and the power budget.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accel::{Kernel, SramModel, DEFAULT_WORD_BYTES};
use crate::em::{dirty_bytes, kernel_io_per_window, overflow_bytes, EmModel, SwapMode};
use crate::error::{ModelError, Result};
use crate::flash::{FlashDevice, IoOp, IoPlan};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemBudget {
    /// Bits per second across all channels.
    pub total_data_rate: f64,
    pub sample_bits: u32,
    /// Watts.
    pub power_budget: f64,
    /// Seconds.
    pub response_deadline: f64,
    /// Bytes of SRAM per accelerator.
    pub sram_capacity_accel: u64,
    /// Bytes of SRAM in the storage controller, pooled across accelerators.
    pub sram_capacity_controller: u64,
    /// Fixed controller logic power in watts.
    pub controller_overhead: f64,
}

impl SystemBudget {
    pub fn validate(&self) -> Result<()> {
        if !(self.total_data_rate > 0.0) {
            return Err(ModelError::param(
                "total_data_rate",
                self.total_data_rate,
                "> 0",
            ));
        }
        if self.sample_bits < 1 {
            return Err(ModelError::param("sample_bits", self.sample_bits, ">= 1"));
        }
        if !(self.power_budget > 0.0) {
            return Err(ModelError::param("power_budget", self.power_budget, "> 0"));
        }
        if !(self.response_deadline > 0.0) {
            return Err(ModelError::param(
                "response_deadline",
                self.response_deadline,
                "> 0",
            ));
        }
        if !(self.controller_overhead >= 0.0) {
            return Err(ModelError::param(
                "controller_overhead",
                self.controller_overhead,
                ">= 0",
            ));
        }
        Ok(())
    }

    /// Samples per second across all channels.
    pub fn sample_rate_total(&self) -> f64 {
        self.total_data_rate / self.sample_bits as f64
    }

    pub fn data_bytes_per_second(&self) -> f64 {
        self.total_data_rate / 8.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub channels: u64,
    /// Hertz per channel.
    pub sampling_rate: f64,
}

impl OperatingPoint {
    pub fn at(channels: u64, budget: &SystemBudget) -> Self {
        OperatingPoint {
            channels,
            sampling_rate: budget.sample_rate_total() / channels as f64,
        }
    }

    /// Seconds to accumulate `window_samples` samples per channel.
    pub fn window(&self, window_samples: u64) -> f64 {
        window_samples as f64 / self.sampling_rate
    }
}

/// A requested channel count whose sampling rate would drop below 1 Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegeneratePoint {
    pub channels: u64,
    pub sampling_rate: f64,
}

/// Fixed-data-rate points for `channels`, in input order. Zero channels and
/// sub-hertz sampling rates are excluded and returned separately.
pub fn operating_points(
    budget: &SystemBudget,
    channels: &[u64],
) -> (Vec<OperatingPoint>, Vec<DegeneratePoint>) {
    let mut points = Vec::with_capacity(channels.len());
    let mut degenerate = Vec::new();
    for &c in channels {
        if c == 0 {
            degenerate.push(DegeneratePoint {
                channels: 0,
                sampling_rate: f64::INFINITY,
            });
            continue;
        }
        let p = OperatingPoint::at(c, budget);
        if p.sampling_rate < 1.0 {
            degenerate.push(DegeneratePoint {
                channels: c,
                sampling_rate: p.sampling_rate,
            });
        } else {
            points.push(p);
        }
    }
    (points, degenerate)
}

/// Everything classification needs: the scenario minus its sweep grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct System {
    pub flash: FlashDevice,
    pub sram: SramModel,
    pub budget: SystemBudget,
    pub kernels: Vec<Kernel>,
    pub mode: SwapMode,
}

impl System {
    /// SRAM available to each kernel: its accelerator SRAM plus an equal
    /// share of the controller pool.
    pub fn kernel_capacity(&self) -> u64 {
        let n = self.kernels.len().max(1) as u64;
        self.budget.sram_capacity_accel + self.budget.sram_capacity_controller / n
    }

    pub fn with_kernel(&self, kernel: Kernel) -> System {
        System {
            kernels: vec![kernel],
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwapTraffic {
    pub write_bytes: u64,
    pub read_bytes: u64,
    /// Seconds per processing window.
    pub window: f64,
}

/// Bytes moved to and from flash per window for one kernel.
pub fn swap_traffic(
    kernel: &Kernel,
    point: &OperatingPoint,
    sram_capacity: u64,
    mode: SwapMode,
    page_size: u64,
) -> Result<SwapTraffic> {
    let window = point.window(kernel.window_samples);
    let overflow = overflow_bytes(kernel, point.channels, sram_capacity);
    if overflow == 0 {
        return Ok(SwapTraffic {
            write_bytes: 0,
            read_bytes: 0,
            window,
        });
    }
    match mode {
        SwapMode::Naive => Ok(SwapTraffic {
            write_bytes: dirty_bytes(kernel, overflow),
            read_bytes: overflow,
            window,
        }),
        SwapMode::Em => {
            let word = DEFAULT_WORD_BYTES;
            // one flash page per block; fast-memory size comes from sram_capacity
            let model = EmModel {
                memory_words: sram_capacity / word,
                block_words: (page_size / word).max(1),
                word_bytes: word,
            };
            let io = kernel_io_per_window(kernel, point.channels, sram_capacity, &model, mode)?;
            Ok(SwapTraffic {
                write_bytes: io.writes * model.block_bytes(),
                read_bytes: io.reads * model.block_bytes(),
                window,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Timing {
    Ok,
    LatencyLimited,
    BandwidthLimited,
}

impl Timing {
    pub fn as_str(self) -> &'static str {
        match self {
            Timing::Ok => "ok",
            Timing::LatencyLimited => "latency_limited",
            Timing::BandwidthLimited => "bandwidth_limited",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerStatus {
    Ok,
    OverBudget,
}

/// One-word summary of a report, as written to the sweep CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Cacheable,
    LatencyLimited,
    Feasible,
    BandwidthLimited,
    PowerLimited,
}

impl Verdict {
    pub const ALL: [Verdict; 5] = [
        Verdict::Cacheable,
        Verdict::LatencyLimited,
        Verdict::Feasible,
        Verdict::BandwidthLimited,
        Verdict::PowerLimited,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Cacheable => "cacheable",
            Verdict::LatencyLimited => "latency_limited",
            Verdict::Feasible => "feasible",
            Verdict::BandwidthLimited => "bandwidth_limited",
            Verdict::PowerLimited => "power_limited",
        }
    }

    /// Stable integer code for plotting.
    pub fn code(self) -> u8 {
        match self {
            Verdict::Cacheable => 0,
            Verdict::LatencyLimited => 1,
            Verdict::Feasible => 2,
            Verdict::BandwidthLimited => 3,
            Verdict::PowerLimited => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportDetail {
    pub write_bytes: u64,
    pub read_bytes: u64,
    pub pages_write: u64,
    pub pages_read: u64,
    /// Seconds per window.
    pub window: f64,
    /// `min(window, response_deadline)`.
    pub deadline: f64,
    /// Program-then-read I/O time per window.
    pub io_time: f64,
    /// Swap bytes over `io_time`, bytes per second.
    pub achieved_bandwidth: f64,
    /// Total system power, watts.
    pub watts: f64,
    pub chips_active: u32,
    pub parallelism: u32,
}

impl ReportDetail {
    pub fn swap_bytes(&self) -> u64 {
        self.write_bytes + self.read_bytes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub cacheable: bool,
    pub timing: Timing,
    pub power: PowerStatus,
    pub overall: bool,
    pub detail: ReportDetail,
}

impl FeasibilityReport {
    pub fn verdict(&self) -> Verdict {
        if self.overall {
            return if self.cacheable {
                Verdict::Cacheable
            } else {
                Verdict::Feasible
            };
        }
        if !self.cacheable && self.detail.chips_active > 0 {
            match self.timing {
                Timing::LatencyLimited => return Verdict::LatencyLimited,
                Timing::BandwidthLimited => return Verdict::BandwidthLimited,
                Timing::Ok => {}
            }
        }
        Verdict::PowerLimited
    }
}

struct IoEval {
    io_time: f64,
    array_time: f64,
    bus_time: f64,
    watts: f64,
    parallelism: u32,
}

fn eval_io(
    system: &System,
    chips: u32,
    pages_w: u64,
    pages_r: u64,
    window: f64,
    base_power: f64,
) -> Result<IoEval> {
    let flash = &system.flash;
    let k = chips * flash.geometry.units_per_chip();
    let program = IoPlan::new(IoOp::Program, pages_w, k, chips);
    let read = IoPlan::new(IoOp::Read, pages_r, k, chips);
    let t_program = flash.op_latency(&program)?;
    let t_read = flash.op_latency(&read)?;
    let io_time = t_program + t_read;
    let energy = flash.op_energy(&program, t_program)?
        + flash.op_energy(&read, t_read)?
        + (window - io_time).max(0.0) * flash.idle_power();
    Ok(IoEval {
        io_time,
        array_time: flash.array_latency(&program) + flash.array_latency(&read),
        bus_time: flash.bus_latency(&program) + flash.bus_latency(&read),
        watts: base_power + energy / window,
        parallelism: k,
    })
}

/// Classify one operating point.
///
/// Chip counts are tried from the most the peak-power share allows down to
/// one; the report uses the largest count that meets both the deadline and
/// the budget, or the largest allowed count when none does.
pub fn classify(point: &OperatingPoint, system: &System) -> Result<FeasibilityReport> {
    if system.kernels.is_empty() {
        return Err(ModelError::param("kernels", 0, "at least one kernel"));
    }
    let flash = &system.flash;
    let page = flash.page_size();
    if page == 0 {
        return Err(ModelError::param("page_size", 0, ">= 1"));
    }
    let budget = &system.budget;
    let capacity = system.kernel_capacity();

    let mut cacheable = true;
    let mut resident = 0u64;
    let mut write_bytes = 0u64;
    let mut read_bytes = 0u64;
    let mut window = f64::INFINITY;
    for kernel in &system.kernels {
        let ws = kernel.working_set_bytes(point.channels);
        cacheable &= ws <= capacity;
        resident += ws.min(capacity);
        let t = swap_traffic(kernel, point, capacity, system.mode, page)?;
        write_bytes += t.write_bytes;
        read_bytes += t.read_bytes;
        window = window.min(t.window);
    }
    let deadline = window.min(budget.response_deadline);
    let access_rate = budget.data_bytes_per_second() * system.kernels.len() as f64;
    let sram_power = system.sram.power(resident as f64, access_rate);
    let base_power = sram_power + budget.controller_overhead;

    if cacheable {
        let watts = base_power + flash.idle_power();
        let power_ok = watts <= budget.power_budget;
        return Ok(FeasibilityReport {
            cacheable,
            timing: Timing::Ok,
            power: if power_ok {
                PowerStatus::Ok
            } else {
                PowerStatus::OverBudget
            },
            overall: power_ok,
            detail: ReportDetail {
                write_bytes: 0,
                read_bytes: 0,
                pages_write: 0,
                pages_read: 0,
                window,
                deadline,
                io_time: 0.0,
                achieved_bandwidth: 0.0,
                watts,
                chips_active: 0,
                parallelism: 0,
            },
        });
    }

    let pages_w = write_bytes.div_ceil(page);
    let pages_r = read_bytes.div_ceil(page);
    let share = budget.power_budget - base_power;
    let max_chips = flash.max_parallel_chips(share);

    let mut chosen = None;
    for chips in (1..=max_chips).rev() {
        let e = eval_io(system, chips, pages_w, pages_r, window, base_power)?;
        if e.io_time <= deadline && e.watts <= budget.power_budget {
            chosen = Some((chips, e, true));
            break;
        }
    }
    let (chips, eval, found) = match chosen {
        Some(c) => c,
        None => {
            // no chip count works: report the fastest the share allows
            let chips = max_chips.max(1);
            (
                chips,
                eval_io(system, chips, pages_w, pages_r, window, base_power)?,
                false,
            )
        }
    };

    let timing = if eval.io_time <= deadline {
        Timing::Ok
    } else {
        let demand = (write_bytes + read_bytes) as f64 / deadline;
        if demand > flash.bus_ceiling() || eval.bus_time >= eval.array_time {
            Timing::BandwidthLimited
        } else {
            Timing::LatencyLimited
        }
    };
    let power_ok =
        found || (max_chips > 0 && timing != Timing::Ok && eval.watts <= budget.power_budget);
    let overall = found;
    Ok(FeasibilityReport {
        cacheable,
        timing,
        power: if power_ok {
            PowerStatus::Ok
        } else {
            PowerStatus::OverBudget
        },
        overall,
        detail: ReportDetail {
            write_bytes,
            read_bytes,
            pages_write: pages_w,
            pages_read: pages_r,
            window,
            deadline,
            io_time: eval.io_time,
            achieved_bandwidth: if eval.io_time > 0.0 {
                (write_bytes + read_bytes) as f64 / eval.io_time
            } else {
                0.0
            },
            watts: eval.watts,
            // zero when the share cannot power a single chip
            chips_active: chips.min(max_chips),
            parallelism: if max_chips == 0 { 0 } else { eval.parallelism },
        },
    })
}

/// Reports for a grid of points, in grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityMap {
    pub system: System,
    pub entries: Vec<(
        OperatingPoint,
        std::result::Result<FeasibilityReport, ModelError>,
    )>,
}

impl FeasibilityMap {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn reports(&self) -> impl Iterator<Item = (&OperatingPoint, &FeasibilityReport)> {
        self.entries
            .iter()
            .filter_map(|(p, r)| r.as_ref().ok().map(|r| (p, r)))
    }
}

/// Classify every point. Per-point failures are kept in the map.
pub fn sweep(points: &[OperatingPoint], system: &System) -> Result<FeasibilityMap> {
    if points.is_empty() {
        return Err(ModelError::param("grid", 0, "at least one point"));
    }
    let entries = points
        .par_iter()
        .map(|p| (*p, classify(p, system)))
        .collect();
    Ok(FeasibilityMap {
        system: system.clone(),
        entries,
    })
}

/// Accelerator SRAM sizes tried by [`required_sram`]: whole pages below the
/// size that makes the kernel cacheable, then that size itself.
pub fn sram_candidates(kernel: &Kernel, point: &OperatingPoint, system: &System) -> Vec<u64> {
    let page = system.flash.page_size();
    let top = kernel
        .working_set_bytes(point.channels)
        .saturating_sub(system.budget.sram_capacity_controller);
    let mut out: Vec<u64> = (0..).map(|j| j * page).take_while(|&c| c < top).collect();
    out.push(top);
    out
}

fn feasible_with_capacity(
    kernel: &Kernel,
    point: &OperatingPoint,
    system: &System,
    capacity: u64,
) -> Result<bool> {
    let mut sys = system.with_kernel(kernel.clone());
    sys.budget.sram_capacity_accel = capacity;
    classify(point, &sys).map(|r| r.overall)
}

/// Smallest accelerator SRAM (page granularity) that makes `kernel` feasible
/// at `point`, or `None` when even holding the whole working set fails.
pub fn required_sram(
    kernel: &Kernel,
    point: &OperatingPoint,
    system: &System,
    mode: SwapMode,
) -> Result<Option<u64>> {
    let mut sys = system.clone();
    sys.mode = mode;
    let candidates = sram_candidates(kernel, point, &sys);
    let last = *candidates.last().expect("candidates are never empty");
    if !feasible_with_capacity(kernel, point, &sys, last)? {
        return Ok(None);
    }
    // invariant: candidates[hi] feasible; everything below lo infeasible
    let (mut lo, mut hi) = (0usize, candidates.len() - 1);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if feasible_with_capacity(kernel, point, &sys, candidates[mid])? {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(Some(candidates[hi]))
}
