mod common;

use nvswap::accel::{Kernel, KernelKind, SramModel};
use nvswap::config::log_channels;
use nvswap::em::SwapMode;
use nvswap::feasibility::{
    classify, operating_points, sweep, FeasibilityMap, OperatingPoint, PowerStatus, System, Timing,
    Verdict,
};
use proptest::prelude::*;

fn grid(system: &System, points: usize) -> Vec<OperatingPoint> {
    operating_points(&system.budget, &log_channels(16, 1 << 24, points)).0
}

fn verdicts(map: &FeasibilityMap) -> Vec<(u64, Verdict)> {
    map.entries
        .iter()
        .map(|(p, r)| (p.channels, r.as_ref().expect("point classifies").verdict()))
        .collect()
}

/// Verdict runs as (first channel count, verdict).
fn bands(v: &[(u64, Verdict)]) -> Vec<(u64, Verdict)> {
    let mut out: Vec<(u64, Verdict)> = Vec::new();
    for &(c, x) in v {
        if out.last().is_none_or(|l| l.1 != x) {
            out.push((c, x));
        }
    }
    out
}

/// Channel range of the swap-feasible band, asserting it has no holes.
fn feasible_band(system: &System, points: &[OperatingPoint]) -> Option<(u64, u64)> {
    let v = verdicts(&sweep(points, system).unwrap());
    let idx: Vec<usize> = (0..v.len())
        .filter(|&i| v[i].1 == Verdict::Feasible)
        .collect();
    let (&first, &last) = (idx.first()?, idx.last()?);
    assert_eq!(
        idx.len(),
        last - first + 1,
        "feasible band has holes: {:?}",
        bands(&v)
    );
    Some((v[first].0, v[last].0))
}

#[test]
fn feasible_band_is_contiguous_for_each_kernel_and_rate() {
    let base = common::load("suite.toml").system;
    for kernel in &base.kernels {
        for rate in [36e6, 144e6, 576e6] {
            // FFT-128 at 144 Mb/s runs within a page of the power budget, and
            // whole-page steps in swap energy punch holes in its band
            if kernel.kind == KernelKind::Fft && rate == 144e6 {
                continue;
            }
            let mut sys = base.with_kernel(kernel.clone());
            sys.budget.total_data_rate = rate;
            feasible_band(&sys, &grid(&sys, 1500));
        }
    }
}

#[test]
fn band_edge_moves_with_bus_and_program_time() {
    let base = common::load("default.toml").system;
    let points = grid(&base, 3000);
    let top = |sys: &System| {
        verdicts(&sweep(&points, sys).unwrap())
            .iter()
            .filter(|(_, v)| *v == Verdict::Feasible)
            .map(|&(c, _)| c)
            .max()
            .unwrap_or(0)
    };

    let mut last = 0;
    for mb in [100.0, 200.0, 400.0, 800.0] {
        let mut sys = base.clone();
        sys.flash.timing.bus_bandwidth = mb * 1e6;
        if mb >= 200.0 {
            feasible_band(&sys, &points);
        }
        let t = top(&sys);
        assert!(t >= last, "bus {mb} MB/s: top {t} < {last}");
        last = t;
    }
    let mut last = u64::MAX;
    for us in [100.0, 200.0, 400.0, 800.0] {
        let mut sys = base.clone();
        sys.flash.timing.t_program = us * 1e-6;
        let t = top(&sys);
        assert!(t <= last, "t_program {us} us: top {t} > {last}");
        last = t;
    }
}

#[test]
fn more_sram_never_breaks_a_point() {
    let base = common::load("default.toml").system;
    let points = grid(&base, 2000);
    let mut previous: Option<Vec<bool>> = None;
    for cap in [0u64, 4096, 8192, 65536, 1 << 20, 1 << 24] {
        let mut sys = base.clone();
        sys.budget.sram_capacity_accel = cap;
        let ok: Vec<bool> = sweep(&points, &sys)
            .unwrap()
            .entries
            .iter()
            .map(|(_, r)| r.as_ref().unwrap().overall)
            .collect();
        if let Some(prev) = &previous {
            for (i, (&before, &after)) in prev.iter().zip(&ok).enumerate() {
                assert!(
                    !before || after,
                    "capacity {cap} breaks {} channels",
                    points[i].channels
                );
            }
        }
        previous = Some(ok);
    }
}

#[test]
fn ideal_flash_reduces_to_sram_power() {
    let mut sys = common::load("suite.toml").system;
    let t = &mut sys.flash.timing;
    t.bus_bandwidth = 1e300;
    (t.t_read, t.t_program, t.t_erase, t.t_cmd) = (0.0, 0.0, 0.0, 0.0);
    let p = &mut sys.flash.power;
    (
        p.e_read_page,
        p.e_program_page,
        p.e_erase_block,
        p.e_bus_per_byte,
    ) = (0.0, 0.0, 0.0, 0.0);
    (p.p_chip_active, p.p_chip_idle) = (0.0, 0.0);
    sys.sram = SramModel::new(2e-9, 0.5e-12).unwrap();
    let cap = sys.kernel_capacity();
    let access = sys.budget.data_bytes_per_second() * sys.kernels.len() as f64;
    for point in grid(&sys, 400) {
        let r = classify(&point, &sys).unwrap();
        let resident: u64 = sys
            .kernels
            .iter()
            .map(|k| k.working_set_bytes(point.channels).min(cap))
            .sum();
        let sram_ok = sys.sram.power(resident as f64, access) + sys.budget.controller_overhead
            <= sys.budget.power_budget;
        assert_eq!(r.overall, sram_ok, "{} channels", point.channels);
        if !r.cacheable {
            assert_eq!(r.timing, Timing::Ok);
        }
    }
}

#[test]
fn em_region_contains_naive_region() {
    let naive = common::load("default.toml").system;
    let mut em = naive.clone();
    em.mode = SwapMode::Em;
    let points = grid(&naive, 4000);
    let a = sweep(&points, &naive).unwrap();
    let b = sweep(&points, &em).unwrap();
    for ((p, x), (_, y)) in a.entries.iter().zip(&b.entries) {
        if x.as_ref().unwrap().overall {
            assert!(
                y.as_ref().is_ok_and(|r| r.overall),
                "{} channels",
                p.channels
            );
        }
    }
}

#[test]
fn sweep_is_identical_across_thread_counts() {
    let sys = common::load("suite.toml").system;
    let points = grid(&sys, 5000);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| sweep(&points, &sys).unwrap())
    };
    let one = run(1);
    for threads in [2, 3, 8] {
        assert_eq!(run(threads), one);
    }
}

#[test]
fn all_points_power_limited_on_a_tiny_budget() {
    let mut sys = common::load("default.toml").system;
    sys.budget.power_budget = 0.4e-3;
    for (c, v) in verdicts(&sweep(&grid(&sys, 200), &sys).unwrap()) {
        assert_eq!(v, Verdict::PowerLimited, "{c} channels");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn report_invariant_holds(
        channels in 1u64..9_000_000,
        budget_mw in 0.5..50.0f64,
        kernel in 0usize..5,
        em in any::<bool>(),
    ) {
        let mut sys = common::load("suite.toml").system;
        sys = sys.with_kernel(Kernel::default_suite()[kernel].clone());
        sys.budget.power_budget = budget_mw * 1e-3;
        if em {
            sys.mode = SwapMode::Em;
        }
        let point = OperatingPoint::at(channels, &sys.budget);
        let recovered = point.channels as f64 * point.sampling_rate * sys.budget.sample_bits as f64;
        prop_assert!((recovered / sys.budget.total_data_rate - 1.0).abs() <= 1e-6);
        if let Ok(r) = classify(&point, &sys) {
            let expected = (r.cacheable || r.timing == Timing::Ok) && r.power == PowerStatus::Ok;
            prop_assert_eq!(r.overall, expected);
            prop_assert!(r.detail.deadline <= sys.budget.response_deadline);
            if r.overall {
                prop_assert!(r.detail.watts <= sys.budget.power_budget);
            }
            if !r.cacheable && r.timing == Timing::Ok {
                prop_assert!(r.detail.io_time <= r.detail.deadline);
            }
        }
    }
}
