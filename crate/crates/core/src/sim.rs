//! Discrete-event simulation of windowed swap traffic on the shared flash bus.
//!
//! Every kernel stream issues, at the start of each window, a program plan
//! (write-out) followed by a read plan (read-in for the next window). Plans
//! run in batches of up to `parallelism` pages: a batch first claims its
//! plane units, then moves pages over the bus one at a time and runs the
//! array operation on all claimed units at once (read: array first, then
//! bus). The bus and the unit pool are FCFS; ties are broken by the event
//! sequence number, and the clock is integer nanoseconds, so a run is fully
//! deterministic. With a single stream and no backlog the per-plan latency is
//! exactly the analytic [`FlashDevice::op_latency`].

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::feasibility::{
    swap_traffic, FeasibilityMap, FeasibilityReport, OperatingPoint, System, Timing,
};
use crate::flash::{FlashDevice, IoOp, IoPlan};

const NS: f64 = 1e9;

/// Seconds to whole nanoseconds, rounding up anything that is not already
/// an integer count, so simulated durations never undershoot the model.
pub fn to_ns(seconds: f64) -> u64 {
    let x = seconds * NS;
    let r = x.round();
    if (x - r).abs() < 1e-6 {
        r as u64
    } else {
        x.ceil() as u64
    }
}

fn to_s(ns: u64) -> f64 {
    ns as f64 / NS
}

/// Swap traffic of one kernel, per window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelStream {
    pub name: String,
    pub window_ns: u64,
    /// Relative to the window start.
    pub deadline_ns: u64,
    pub pages_write: u64,
    pub pages_read: u64,
    pub chips_active: u32,
    pub parallelism: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub flash: FlashDevice,
    pub streams: Vec<KernelStream>,
}

impl SimScenario {
    /// Streams for `point`, using the chip count `report` settled on.
    pub fn from_report(
        system: &System,
        point: &OperatingPoint,
        report: &FeasibilityReport,
    ) -> Result<Self> {
        let page = system.flash.page_size();
        let capacity = system.kernel_capacity();
        let chips = report.detail.chips_active.max(1);
        let parallelism = chips * system.flash.geometry.units_per_chip();
        let streams = system
            .kernels
            .iter()
            .map(|k| {
                let t = swap_traffic(k, point, capacity, system.mode, page)?;
                let window = t.window;
                Ok(KernelStream {
                    name: k.kind.to_string(),
                    window_ns: to_ns(window),
                    deadline_ns: to_ns(window.min(system.budget.response_deadline)),
                    pages_write: t.write_bytes.div_ceil(page),
                    pages_read: t.read_bytes.div_ceil(page),
                    chips_active: chips,
                    parallelism,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SimScenario {
            flash: system.flash,
            streams,
        })
    }

    /// Classify `point` and build the matching streams.
    pub fn from_system(system: &System, point: &OperatingPoint) -> Result<Self> {
        let report = crate::feasibility::classify(point, system)?;
        Self::from_report(system, point, &report)
    }

    pub fn longest_window_ns(&self) -> u64 {
        self.streams.iter().map(|s| s.window_ns).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub windows_total: u64,
    pub deadline_misses: u64,
    /// Seconds from window start to the end of its read plan.
    pub worst_io_latency: f64,
    pub mean_bus_utilization: f64,
    /// Joules.
    pub energy_total: f64,
    /// Watts over the simulated span.
    pub mean_power: f64,
    /// Watts, worst single window.
    pub peak_window_power: f64,
}

/// One executed plan and the energy charged for it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpRecord {
    pub stream: usize,
    pub plan: IoPlan,
    pub duration: f64,
    pub energy: f64,
}

/// One window of one stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub stream: usize,
    pub window: u64,
    pub start_s: f64,
    pub io_start_s: f64,
    pub io_end_s: f64,
    pub latency_s: f64,
    pub missed: bool,
    pub energy_j: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub report: SimReport,
    pub ops: Vec<OpRecord>,
    pub windows: Vec<WindowRecord>,
    /// Seconds with no plan in flight.
    pub idle_time: f64,
    /// Seconds simulated, including the drain after the horizon.
    pub span: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    WindowStart { stream: usize, index: u64 },
    IoIssue { stream: usize },
    IoComplete { stream: usize },
    SimEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    Acquire(u32),
    Bus,
    Array(u64),
    Release(u32),
    PlanEnd(usize),
}

struct Job {
    window: u64,
    start: u64,
    plans: Vec<IoPlan>,
    steps: Vec<Step>,
    cursor: usize,
    io_start: u64,
    plan_start: u64,
    energy: f64,
}

#[derive(Default)]
struct StreamState {
    pending: VecDeque<(u64, u64)>,
    job: Option<Job>,
}

fn build_steps(plans: &[IoPlan], t_read: u64, t_program: u64) -> Vec<Step> {
    let mut steps = Vec::new();
    for (i, plan) in plans.iter().enumerate() {
        let k = plan.parallelism as u64;
        let mut left = plan.n_units;
        while left > 0 {
            let batch = left.min(k);
            left -= batch;
            steps.push(Step::Acquire(batch as u32));
            match plan.op {
                IoOp::Program => {
                    steps.extend(std::iter::repeat_n(Step::Bus, batch as usize));
                    steps.push(Step::Array(t_program));
                }
                _ => {
                    steps.push(Step::Array(t_read));
                    steps.extend(std::iter::repeat_n(Step::Bus, batch as usize));
                }
            }
            steps.push(Step::Release(batch as u32));
        }
        steps.push(Step::PlanEnd(i));
    }
    steps
}

struct Engine<'a> {
    sc: &'a SimScenario,
    now: u64,
    seq: u64,
    queue: BinaryHeap<Reverse<(u64, u64, EventKind)>>,
    streams: Vec<StreamState>,
    t_x: u64,
    t_read: u64,
    t_program: u64,
    bus_busy: bool,
    bus_queue: VecDeque<usize>,
    bus_busy_ns: u64,
    units_free: u32,
    unit_queue: VecDeque<(usize, u32)>,
    active_jobs: usize,
    idle_since: u64,
    idle_ns: u64,
    ops: Vec<OpRecord>,
    windows: Vec<WindowRecord>,
    misses: u64,
    worst_latency: u64,
    peak_power: f64,
}

impl<'a> Engine<'a> {
    fn push(&mut self, time: u64, kind: EventKind) {
        self.seq += 1;
        self.queue.push(Reverse((time, self.seq, kind)));
    }

    fn start_job(&mut self, s: usize, window: u64, start: u64) {
        let st = &self.sc.streams[s];
        let plans: Vec<IoPlan> = [(IoOp::Program, st.pages_write), (IoOp::Read, st.pages_read)]
            .into_iter()
            .filter(|&(_, n)| n > 0)
            .map(|(op, n)| IoPlan::new(op, n, st.parallelism, st.chips_active))
            .collect();
        let steps = build_steps(&plans, self.t_read, self.t_program);
        if !plans.is_empty() {
            if self.active_jobs == 0 {
                self.idle_ns += self.now - self.idle_since;
            }
            self.active_jobs += 1;
        }
        self.streams[s].job = Some(Job {
            window,
            start,
            plans,
            steps,
            cursor: 0,
            io_start: self.now,
            plan_start: self.now,
            energy: 0.0,
        });
    }

    fn request_bus(&mut self, s: usize) {
        if self.bus_busy {
            self.bus_queue.push_back(s);
        } else {
            self.grant_bus(s);
        }
    }

    fn grant_bus(&mut self, s: usize) {
        self.bus_busy = true;
        self.bus_busy_ns += self.t_x;
        let t = self.now + self.t_x;
        self.push(t, EventKind::IoComplete { stream: s });
    }

    fn release_units(&mut self, n: u32) {
        self.units_free += n;
        while let Some(&(s, need)) = self.unit_queue.front() {
            if need > self.units_free {
                break;
            }
            self.unit_queue.pop_front();
            self.units_free -= need;
            if let Some(job) = self.streams[s].job.as_mut() {
                job.cursor += 1;
            }
            let now = self.now;
            self.push(now, EventKind::IoIssue { stream: s });
        }
    }

    fn job_mut(&mut self, s: usize) -> &mut Job {
        self.streams[s].job.as_mut().expect("stream has no job")
    }

    /// Run stream `s` forward until it blocks or runs out of work.
    fn advance(&mut self, s: usize) -> Result<()> {
        loop {
            let step = match self.streams[s].job.as_ref() {
                Some(job) => job.steps.get(job.cursor).copied(),
                None => match self.streams[s].pending.pop_front() {
                    Some((window, start)) => {
                        self.start_job(s, window, start);
                        continue;
                    }
                    None => return Ok(()),
                },
            };
            let Some(step) = step else {
                self.finish_job(s);
                continue;
            };
            match step {
                Step::Acquire(n) => {
                    if self.unit_queue.is_empty() && self.units_free >= n {
                        self.units_free -= n;
                        self.job_mut(s).cursor += 1;
                    } else {
                        self.unit_queue.push_back((s, n));
                        return Ok(());
                    }
                }
                Step::Bus => {
                    self.request_bus(s);
                    return Ok(());
                }
                Step::Array(d) => {
                    let t = self.now + d;
                    self.push(t, EventKind::IoComplete { stream: s });
                    return Ok(());
                }
                Step::Release(n) => {
                    self.job_mut(s).cursor += 1;
                    self.release_units(n);
                }
                Step::PlanEnd(i) => {
                    let now = self.now;
                    let (plan, start) = {
                        let job = self.job_mut(s);
                        (job.plans[i], job.plan_start)
                    };
                    let duration = to_s(now - start);
                    let energy = self.sc.flash.op_energy(&plan, duration)?;
                    let job = self.job_mut(s);
                    job.energy += energy;
                    job.plan_start = now;
                    job.cursor += 1;
                    self.ops.push(OpRecord {
                        stream: s,
                        plan,
                        duration,
                        energy,
                    });
                }
            }
        }
    }

    fn finish_job(&mut self, s: usize) {
        let job = self.streams[s].job.take().expect("finishing without a job");
        let st = &self.sc.streams[s];
        if !job.plans.is_empty() {
            self.active_jobs -= 1;
            if self.active_jobs == 0 {
                self.idle_since = self.now;
            }
        }
        let latency = self.now - job.start;
        let missed = latency > st.deadline_ns;
        self.misses += missed as u64;
        self.worst_latency = self.worst_latency.max(latency);
        let busy = to_s(self.now - job.io_start);
        let window_s = to_s(st.window_ns);
        let energy = job.energy + (window_s - busy).max(0.0) * self.sc.flash.idle_power();
        self.peak_power = self.peak_power.max(energy / window_s);
        self.windows.push(WindowRecord {
            stream: s,
            window: job.window,
            start_s: to_s(job.start),
            io_start_s: to_s(job.io_start),
            io_end_s: to_s(self.now),
            latency_s: to_s(latency),
            missed,
            energy_j: job.energy,
        });
    }

    fn handle(&mut self, kind: EventKind, horizon: u64) -> Result<()> {
        match kind {
            EventKind::WindowStart { stream, index } => {
                let window = self.sc.streams[stream].window_ns;
                let next = self.now + window;
                if next < horizon {
                    self.push(
                        next,
                        EventKind::WindowStart {
                            stream,
                            index: index + 1,
                        },
                    );
                }
                self.streams[stream].pending.push_back((index, self.now));
                if self.streams[stream].job.is_none() {
                    self.advance(stream)?;
                }
            }
            EventKind::IoIssue { stream } => self.advance(stream)?,
            EventKind::IoComplete { stream } => {
                let job = self.streams[stream]
                    .job
                    .as_mut()
                    .expect("completion without a job");
                let step = job.steps[job.cursor];
                job.cursor += 1;
                if step == Step::Bus {
                    self.bus_busy = false;
                    if let Some(next) = self.bus_queue.pop_front() {
                        self.grant_bus(next);
                    }
                }
                self.advance(stream)?;
            }
            EventKind::SimEnd => {}
        }
        Ok(())
    }
}

/// Simulate `scenario` for `horizon` seconds of window arrivals. Work issued
/// before the horizon is drained to completion.
pub fn simulate_detailed(scenario: &SimScenario, horizon: f64) -> Result<SimOutcome> {
    if scenario.streams.is_empty() {
        return Err(ModelError::param(
            "kernels",
            0,
            "at least one kernel stream",
        ));
    }
    for st in &scenario.streams {
        if st.window_ns == 0 {
            return Err(ModelError::param("window", 0, "> 0 ns"));
        }
        if st.pages_write + st.pages_read > 0 {
            IoPlan::new(IoOp::Read, 1, st.parallelism, st.chips_active)
                .validate(&scenario.flash.geometry)?;
        }
    }
    let horizon_ns = to_ns(horizon);
    let needed = 10 * scenario.longest_window_ns();
    if horizon_ns < needed {
        return Err(ModelError::param(
            "horizon",
            horizon,
            format!(">= 10 windows of the slowest kernel ({} s)", to_s(needed)),
        ));
    }

    let flash = &scenario.flash;
    let units = scenario
        .streams
        .iter()
        .map(|s| s.parallelism)
        .max()
        .unwrap_or(1);
    let mut eng = Engine {
        sc: scenario,
        now: 0,
        seq: 0,
        queue: BinaryHeap::new(),
        streams: (0..scenario.streams.len())
            .map(|_| StreamState::default())
            .collect(),
        t_x: to_ns(flash.page_transfer_time()),
        t_read: to_ns(flash.timing.t_read),
        t_program: to_ns(flash.timing.t_program),
        bus_busy: false,
        bus_queue: VecDeque::new(),
        bus_busy_ns: 0,
        units_free: units,
        unit_queue: VecDeque::new(),
        active_jobs: 0,
        idle_since: 0,
        idle_ns: 0,
        ops: Vec::new(),
        windows: Vec::new(),
        misses: 0,
        worst_latency: 0,
        peak_power: 0.0,
    };
    for s in 0..scenario.streams.len() {
        eng.push(
            0,
            EventKind::WindowStart {
                stream: s,
                index: 0,
            },
        );
    }
    eng.push(horizon_ns, EventKind::SimEnd);

    while let Some(Reverse((time, _, kind))) = eng.queue.pop() {
        debug_assert!(time >= eng.now);
        eng.now = time;
        eng.handle(kind, horizon_ns)?;
    }

    let span_ns = eng.now.max(horizon_ns);
    if eng.active_jobs == 0 {
        eng.idle_ns += span_ns - eng.idle_since;
    }
    let idle_time = to_s(eng.idle_ns);
    let span = to_s(span_ns);
    let mut energy_total = 0.0;
    for op in &eng.ops {
        energy_total += op.energy;
    }
    energy_total += idle_time * flash.idle_power();

    let report = SimReport {
        windows_total: eng.windows.len() as u64,
        deadline_misses: eng.misses,
        worst_io_latency: to_s(eng.worst_latency),
        mean_bus_utilization: eng.bus_busy_ns as f64 / span_ns as f64,
        energy_total,
        mean_power: energy_total / span,
        peak_window_power: eng.peak_power,
    };
    let mut windows = eng.windows;
    windows.sort_by_key(|w| (w.stream, w.window));
    Ok(SimOutcome {
        report,
        ops: eng.ops,
        windows,
        idle_time,
        span,
    })
}

pub fn simulate(scenario: &SimScenario, horizon: f64) -> Result<SimReport> {
    simulate_detailed(scenario, horizon).map(|o| o.report)
}

/// Analytic-versus-simulated agreement over a feasibility map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub points: usize,
    pub agreeing: usize,
    /// Points whose I/O time is within 5% of their deadline.
    pub borderline: Vec<u64>,
    pub off_boundary_points: usize,
    pub off_boundary_agreeing: usize,
    /// Channel counts where the two disagree.
    pub disagreements: Vec<u64>,
}

impl Agreement {
    pub fn fraction(&self) -> f64 {
        if self.points == 0 {
            1.0
        } else {
            self.agreeing as f64 / self.points as f64
        }
    }

    pub fn off_boundary_fraction(&self) -> f64 {
        if self.off_boundary_points == 0 {
            1.0
        } else {
            self.off_boundary_agreeing as f64 / self.off_boundary_points as f64
        }
    }
}

pub const BORDERLINE_MARGIN: f64 = 0.05;

/// Simulate every classified point of `map` and compare `misses == 0` with
/// `timing == ok`. Each point runs for at least ten of its windows.
pub fn validate(map: &FeasibilityMap, system: &System, horizon: f64) -> Result<Agreement> {
    if map.system != *system {
        return Err(ModelError::param(
            "scenario",
            "map",
            "the scenario the map was produced from",
        ));
    }
    let results = map
        .reports()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|(point, report)| {
            let sc = SimScenario::from_report(system, point, report)?;
            let h = horizon.max(10.0 * to_s(sc.longest_window_ns()));
            let sim = simulate(&sc, h)?;
            let analytic_ok = report.cacheable || report.timing == Timing::Ok;
            let sim_ok = sim.deadline_misses == 0;
            let border = !report.cacheable
                && report.detail.deadline > 0.0
                && (report.detail.io_time / report.detail.deadline - 1.0).abs()
                    <= BORDERLINE_MARGIN;
            Ok((point.channels, analytic_ok == sim_ok, border))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = Agreement {
        points: results.len(),
        agreeing: 0,
        borderline: Vec::new(),
        off_boundary_points: 0,
        off_boundary_agreeing: 0,
        disagreements: Vec::new(),
    };
    for (channels, agree, border) in results {
        out.agreeing += agree as usize;
        if border {
            out.borderline.push(channels);
        } else {
            out.off_boundary_points += 1;
            out.off_boundary_agreeing += agree as usize;
        }
        if !agree {
            out.disagreements.push(channels);
        }
    }
    Ok(out)
}
