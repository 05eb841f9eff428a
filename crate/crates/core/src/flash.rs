//! NAND-Flash subsystem model.
//!
//! The device is a set of chips on one shared serial bus. Each chip holds
//! dies, each die holds planes; a plane is the smallest unit that can run an
//! array operation (page read, page program, block erase) concurrently with
//! the others. Page data crosses the bus serially.
//!
//! Latency is a two-phase, non-overlapped model: array time is charged once
//! per batch of `k` concurrent units, bus time once per page. The simulator
//! in [`crate::sim`] reproduces these formulas exactly when uncontended.

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlashGeometry {
    pub chips: u32,
    pub dies_per_chip: u32,
    pub planes_per_die: u32,
    pub blocks_per_plane: u32,
    pub pages_per_block: u32,
    /// Bytes per page.
    pub page_size: u64,
}

impl FlashGeometry {
    pub fn validate(&self) -> Result<()> {
        let fields: [(&'static str, u64); 6] = [
            ("chips", self.chips as u64),
            ("dies_per_chip", self.dies_per_chip as u64),
            ("planes_per_die", self.planes_per_die as u64),
            ("blocks_per_plane", self.blocks_per_plane as u64),
            ("pages_per_block", self.pages_per_block as u64),
            ("page_size", self.page_size),
        ];
        for (name, v) in fields {
            if v == 0 {
                return Err(ModelError::param(name, v, ">= 1"));
            }
        }
        Ok(())
    }

    /// Plane-level units per chip.
    pub fn units_per_chip(&self) -> u32 {
        self.dies_per_chip * self.planes_per_die
    }

    pub fn total_units(&self) -> u32 {
        self.chips * self.units_per_chip()
    }

    pub fn block_bytes(&self) -> u64 {
        self.pages_per_block as u64 * self.page_size
    }

    pub fn total_capacity(&self) -> u128 {
        self.chips as u128
            * self.dies_per_chip as u128
            * self.planes_per_die as u128
            * self.blocks_per_plane as u128
            * self.pages_per_block as u128
            * self.page_size as u128
    }
}

/// Timing parameters, all in seconds except the bus rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlashTiming {
    pub t_read: f64,
    pub t_program: f64,
    pub t_erase: f64,
    /// Bytes per second on the shared bus.
    pub bus_bandwidth: f64,
    /// Per-page command and addressing overhead on the bus.
    pub t_cmd: f64,
}

impl FlashTiming {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("t_read", self.t_read),
            ("t_program", self.t_program),
            ("t_erase", self.t_erase),
            ("t_cmd", self.t_cmd),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(ModelError::param(name, v, ">= 0"));
            }
        }
        if !(self.bus_bandwidth > 0.0) {
            return Err(ModelError::param(
                "bus_bandwidth",
                self.bus_bandwidth,
                "> 0",
            ));
        }
        Ok(())
    }
}

/// Energy and power parameters (joules, joules/byte, watts).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlashPower {
    pub e_read_page: f64,
    pub e_program_page: f64,
    pub e_erase_block: f64,
    pub e_bus_per_byte: f64,
    pub p_chip_active: f64,
    pub p_chip_idle: f64,
}

impl FlashPower {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("e_read_page", self.e_read_page),
            ("e_program_page", self.e_program_page),
            ("e_erase_block", self.e_erase_block),
            ("e_bus_per_byte", self.e_bus_per_byte),
            ("p_chip_active", self.p_chip_active),
            ("p_chip_idle", self.p_chip_idle),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(ModelError::param(name, v, ">= 0"));
            }
        }
        if self.p_chip_active < self.p_chip_idle {
            return Err(ModelError::param(
                "p_chip_active",
                self.p_chip_active,
                format!(">= p_chip_idle ({})", self.p_chip_idle),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IoOp {
    Read,
    Program,
    Erase,
}

/// A batch of identical array operations spread over `parallelism` units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IoPlan {
    pub op: IoOp,
    /// Pages for read/program, blocks for erase.
    pub n_units: u64,
    /// Concurrently operating plane-level units.
    pub parallelism: u32,
    pub chips_active: u32,
}

impl IoPlan {
    pub fn new(op: IoOp, n_units: u64, parallelism: u32, chips_active: u32) -> Self {
        IoPlan {
            op,
            n_units,
            parallelism,
            chips_active,
        }
    }

    /// Number of array-operation rounds, `ceil(n_units / parallelism)`.
    pub fn rounds(&self) -> u64 {
        self.n_units.div_ceil(self.parallelism as u64)
    }

    pub fn validate(&self, geometry: &FlashGeometry) -> Result<()> {
        if self.chips_active < 1 || self.chips_active > geometry.chips {
            return Err(ModelError::param(
                "chips_active",
                self.chips_active,
                format!("in 1..={}", geometry.chips),
            ));
        }
        let max_k = self.chips_active * geometry.units_per_chip();
        if self.parallelism < 1 || self.parallelism > max_k {
            return Err(ModelError::param(
                "parallelism",
                self.parallelism,
                format!("in 1..={max_k} for {} active chips", self.chips_active),
            ));
        }
        Ok(())
    }
}

/// Geometry, timing and power of one flash subsystem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlashDevice {
    pub geometry: FlashGeometry,
    pub timing: FlashTiming,
    pub power: FlashPower,
}

impl FlashDevice {
    pub fn new(geometry: FlashGeometry, timing: FlashTiming, power: FlashPower) -> Result<Self> {
        geometry.validate()?;
        timing.validate()?;
        power.validate()?;
        Ok(FlashDevice {
            geometry,
            timing,
            power,
        })
    }

    pub fn page_size(&self) -> u64 {
        self.geometry.page_size
    }

    /// Bus time for `bytes`: raw transfer plus one command overhead per page touched.
    pub fn transfer_time(&self, bytes: u64) -> f64 {
        if bytes == 0 {
            return 0.0;
        }
        let pages = bytes.div_ceil(self.geometry.page_size);
        bytes as f64 / self.timing.bus_bandwidth + self.timing.t_cmd * pages as f64
    }

    /// Bus time of one full page.
    pub fn page_transfer_time(&self) -> f64 {
        self.transfer_time(self.geometry.page_size)
    }

    /// Bus-limited ceiling, `page_size / t_x`, in bytes per second.
    pub fn bus_ceiling(&self) -> f64 {
        self.geometry.page_size as f64 / self.page_transfer_time()
    }

    pub fn array_time(&self, op: IoOp) -> f64 {
        match op {
            IoOp::Read => self.timing.t_read,
            IoOp::Program => self.timing.t_program,
            IoOp::Erase => self.timing.t_erase,
        }
    }

    /// Array-phase part of [`op_latency`](Self::op_latency).
    pub fn array_latency(&self, plan: &IoPlan) -> f64 {
        plan.rounds() as f64 * self.array_time(plan.op)
    }

    /// Bus-phase part of [`op_latency`](Self::op_latency).
    pub fn bus_latency(&self, plan: &IoPlan) -> f64 {
        match plan.op {
            IoOp::Erase => 0.0,
            _ => plan.n_units as f64 * self.page_transfer_time(),
        }
    }

    pub fn op_latency(&self, plan: &IoPlan) -> Result<f64> {
        plan.validate(&self.geometry)?;
        Ok(self.array_latency(plan) + self.bus_latency(plan))
    }

    /// Bytes a plan moves across the bus.
    pub fn moved_bytes(&self, plan: &IoPlan) -> u64 {
        match plan.op {
            IoOp::Erase => 0,
            _ => plan.n_units * self.geometry.page_size,
        }
    }

    /// Energy of the operations alone, without chip background power.
    pub fn dynamic_energy(&self, plan: &IoPlan) -> f64 {
        let per_unit = match plan.op {
            IoOp::Read => self.power.e_read_page,
            IoOp::Program => self.power.e_program_page,
            IoOp::Erase => self.power.e_erase_block,
        };
        plan.n_units as f64 * per_unit + self.moved_bytes(plan) as f64 * self.power.e_bus_per_byte
    }

    /// Background power with `chips_active` chips on and the rest idle.
    pub fn chip_power(&self, chips_active: u32) -> f64 {
        let idle = self.geometry.chips.saturating_sub(chips_active);
        chips_active as f64 * self.power.p_chip_active + idle as f64 * self.power.p_chip_idle
    }

    pub fn idle_power(&self) -> f64 {
        self.chip_power(0)
    }

    /// Energy of running `plan` over `duration` seconds.
    pub fn op_energy(&self, plan: &IoPlan, duration: f64) -> Result<f64> {
        let latency = self.op_latency(plan)?;
        // event-clock rounding in the simulator may undershoot by a few ns
        if duration < latency * (1.0 - 1e-9) {
            return Err(ModelError::param(
                "duration",
                duration,
                format!(">= op_latency ({latency})"),
            ));
        }
        Ok(self.dynamic_energy(plan) + duration * self.chip_power(plan.chips_active))
    }

    /// Steady-state throughput of a long run of page reads or programs.
    pub fn sustained_bandwidth(&self, op: IoOp, parallelism: u32) -> Result<f64> {
        if parallelism < 1 {
            return Err(ModelError::param("parallelism", parallelism, ">= 1"));
        }
        if op == IoOp::Erase {
            return Err(ModelError::param("op", "erase", "read or program"));
        }
        let t_x = self.page_transfer_time();
        Ok(self.geometry.page_size as f64 / (self.array_time(op) / parallelism as f64 + t_x))
    }

    /// Largest number of simultaneously active chips that fits in `power_share`.
    pub fn max_parallel_chips(&self, power_share: f64) -> u32 {
        (1..=self.geometry.chips)
            .rev()
            .find(|&k| self.chip_power(k) <= power_share)
            .unwrap_or(0)
    }
}
