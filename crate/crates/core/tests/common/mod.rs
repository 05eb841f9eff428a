#![allow(dead_code)]

use std::path::PathBuf;

use nvswap::config::Scenario;
use nvswap::em::IoCount;

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

pub fn load(name: &str) -> Scenario {
    Scenario::load(scenario_path(name)).expect("shipped scenario parses")
}

/// Multiway mergesort over a block device, counting transfers by walking the
/// runs of every pass. `m` and `b` are in words; `m` should be a multiple of
/// `b` so runs start on block boundaries.
pub fn counted_mergesort(n: u64, m: u64, b: u64) -> (IoCount, u32) {
    let blocks = |len: u64| len.div_ceil(b);
    let mut io = IoCount::default();
    let mut runs = Vec::new();
    let mut left = n;
    while left > 0 {
        let len = left.min(m);
        io.reads += blocks(len);
        io.writes += blocks(len);
        runs.push(len);
        left -= len;
    }
    let fanout = (m / b - 1) as usize;
    let mut passes = 0;
    while runs.len() > 1 {
        assert!(fanout >= 2, "cannot merge with fan-out {fanout}");
        let mut next = Vec::with_capacity(runs.len().div_ceil(fanout));
        for group in runs.chunks(fanout) {
            for &r in group {
                io.reads += blocks(r);
            }
            let merged: u64 = group.iter().sum();
            io.writes += blocks(merged);
            next.push(merged);
        }
        runs = next;
        passes += 1;
    }
    (io, passes)
}

/// Same pass-by-pass count with each pass summarised as `full` runs of
/// `size` words plus one shorter tail run, so every `n` up to 2^16 is cheap.
pub fn counted_mergesort_compact(n: u64, m: u64, b: u64) -> (IoCount, u32) {
    let blocks = |len: u64| len.div_ceil(b);
    let (mut full, mut size, mut tail) = (n / m, m, n % m);
    let mut io = IoCount::new(
        full * blocks(size) + blocks(tail),
        full * blocks(size) + blocks(tail),
    );
    let fanout = m / b - 1;
    let mut passes = 0;
    while full + (tail > 0) as u64 > 1 {
        assert!(fanout >= 2, "cannot merge with fan-out {fanout}");
        io.reads += full * blocks(size) + blocks(tail);
        let merged_full = full / fanout;
        let new_tail = (full % fanout) * size + tail;
        size *= fanout;
        io.writes += merged_full * blocks(size) + blocks(new_tail);
        full = merged_full;
        tail = new_tail;
        passes += 1;
    }
    (io, passes)
}

/// Block storage that counts every block moved in or out.
struct Disk {
    b: usize,
    blocks: Vec<Vec<u32>>,
    io: IoCount,
}

impl Disk {
    fn read(&mut self, i: usize) -> Vec<u32> {
        self.io.reads += 1;
        self.blocks[i].clone()
    }

    fn write(&mut self, block: Vec<u32>) -> usize {
        assert!(!block.is_empty() && block.len() <= self.b);
        self.io.writes += 1;
        self.blocks.push(block);
        self.blocks.len() - 1
    }
}

/// Sorts `data` through a block device with `m` words of memory and `b`-word
/// blocks. Returns the sorted data and the transfer count; reading the input
/// is charged, laying it out on the device is not.
pub fn external_sort(data: &[u32], m: usize, b: usize) -> (Vec<u32>, IoCount, u32) {
    let mut disk = Disk {
        b,
        blocks: data.chunks(b).map(|c| c.to_vec()).collect(),
        io: IoCount::default(),
    };
    let input: Vec<usize> = (0..disk.blocks.len()).collect();

    // run formation: fill memory, sort, write out
    let mut runs: Vec<Vec<usize>> = Vec::new();
    for load in input.chunks(m / b) {
        let mut buf: Vec<u32> = Vec::with_capacity(m);
        for &i in load {
            buf.extend(disk.read(i));
        }
        assert!(buf.len() <= m);
        buf.sort_unstable();
        runs.push(buf.chunks(b).map(|c| disk.write(c.to_vec())).collect());
    }

    let fanout = m / b - 1;
    let mut passes = 0;
    while runs.len() > 1 {
        let mut next = Vec::new();
        for group in runs.chunks(fanout) {
            next.push(merge(&mut disk, group));
        }
        runs = next;
        passes += 1;
    }

    let out = runs
        .first()
        .map(|r| r.iter().flat_map(|&i| disk.blocks[i].clone()).collect())
        .unwrap_or_default();
    (out, disk.io, passes)
}

/// Merge runs holding one input block per run and one output block.
fn merge(disk: &mut Disk, group: &[Vec<usize>]) -> Vec<usize> {
    let mut heads: Vec<(Vec<u32>, usize, usize)> =
        group.iter().map(|run| (disk.read(run[0]), 0, 1)).collect();
    let mut out_blocks = Vec::new();
    let mut out = Vec::with_capacity(disk.b);
    loop {
        let mut best: Option<usize> = None;
        for (j, (buf, pos, _)) in heads.iter().enumerate() {
            if *pos < buf.len() && best.is_none_or(|k| buf[*pos] < heads[k].0[heads[k].1]) {
                best = Some(j);
            }
        }
        let Some(j) = best else { break };
        let (buf, pos, next) = &mut heads[j];
        out.push(buf[*pos]);
        *pos += 1;
        if *pos == buf.len() && *next < group[j].len() {
            *buf = disk.read(group[j][*next]);
            *pos = 0;
            *next += 1;
        }
        if out.len() == disk.b {
            out_blocks.push(disk.write(std::mem::take(&mut out)));
        }
    }
    if !out.is_empty() {
        out_blocks.push(disk.write(out));
    }
    out_blocks
}

/// (M, B) pairs in words, M a multiple of B with fan-out at least two.
pub fn em_grid() -> Vec<(u64, u64)> {
    let mut grid = Vec::new();
    for b in [1u64, 2, 4, 8, 16, 32, 64] {
        for blocks in [3u64, 4, 5, 8, 17] {
            grid.push((b * blocks, b));
        }
    }
    grid.extend([(1024, 64), (2048, 64), (4096, 256)]);
    grid
}
