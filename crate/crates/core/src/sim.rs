//! Logical-time simulation of the grid algorithm on virtual processors.
//!
//! Each processor `(i, j, l)` of a `p1 x p2 x p3` grid
//!
//! 1. all-gathers block `A[i, j]` over the fiber `(i, j, :)`,
//! 2. all-gathers block `B[j, l]` over the fiber `(:, j, l)`,
//! 3. computes `D = A[i, j] * B[j, l]` locally,
//! 4. reduce-scatters `D` over the fiber `(i, :, l)` to own a shard of `C[i, l]`.
//!
//! Both collectives are rings. Every message is logged with its word count,
//! so the reported costs come from accounting, not from formulas.

use std::fmt;

use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{decimal_string, fraction_string, int};
use crate::grid::{comm_cost, CostBreakdown, ProcessorGrid};
use crate::model::{MachineModel, ProblemShape};

/// Inclusive range of generated matrix entries.
pub const ENTRY_RANGE: std::ops::RangeInclusive<i64> = -8..=8;

/// Bounds of the `index`-th of `parts` contiguous chunks of `len` elements.
/// The first `len % parts` chunks get one extra element.
pub fn split_range(len: usize, parts: usize, index: usize) -> std::ops::Range<usize> {
    let base = len / parts;
    let extra = len % parts;
    let start = index * base + index.min(extra);
    let size = base + usize::from(index < extra);
    start..start + size
}

/// Dense matrix stored column-major, matching the block-column distribution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<i64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0; rows * cols] }
    }

    pub fn random(rows: usize, cols: usize, rng: &mut impl Rng) -> Self {
        let data = (0..rows * cols).map(|_| rng.gen_range(ENTRY_RANGE)).collect();
        Matrix { rows, cols, data }
    }

    pub fn get(&self, r: usize, c: usize) -> i64 {
        self.data[c * self.rows + r]
    }

    pub fn set(&mut self, r: usize, c: usize, v: i64) {
        self.data[c * self.rows + r] = v;
    }

    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Matrix {
        let mut out = Matrix::zeros(rows, cols);
        for c in 0..cols {
            for r in 0..rows {
                out.set(r, c, self.get(r0 + r, c0 + c));
            }
        }
        out
    }

    pub fn multiply(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for c in 0..other.cols {
            for kk in 0..self.cols {
                let b = other.get(kk, c);
                for r in 0..self.rows {
                    out.data[c * self.rows + r] += self.get(r, kk) * b;
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Phase {
    GatherA,
    GatherB,
    ReduceScatterC,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::GatherA, Phase::GatherB, Phase::ReduceScatterC];

    pub fn name(&self) -> &'static str {
        match self {
            Phase::GatherA => "all_gather_a",
            Phase::GatherB => "all_gather_b",
            Phase::ReduceScatterC => "reduce_scatter_c",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One point-to-point transfer. `from`/`to` are the identifiers passed in
/// the fiber list (global ranks in a full simulation).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Message {
    pub step: usize,
    pub from: usize,
    pub to: usize,
    pub words: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AllGatherOutcome {
    /// Concatenation of all pieces in fiber order, one copy per member.
    pub gathered: Vec<Vec<i64>>,
    pub sent: Vec<u64>,
    pub received: Vec<u64>,
    pub messages: Vec<Message>,
}

/// Ring All-Gather: in step `t` member `r` forwards piece `(r - t) mod p` to
/// member `r + 1`. After `p - 1` steps member `r` has received every piece
/// but its own, i.e. `w - |piece r|` words; with equal pieces every member
/// sends and receives `(1 - 1/p) w`.
pub fn ring_all_gather(fiber: &[usize], pieces: Vec<Vec<i64>>) -> AllGatherOutcome {
    let p = fiber.len();
    assert!(p > 0, "fiber must be nonempty");
    assert_eq!(p, pieces.len(), "one piece per fiber member");

    let mut slots: Vec<Vec<Option<Vec<i64>>>> = (0..p)
        .map(|r| (0..p).map(|s| (s == r).then(|| pieces[r].clone())).collect())
        .collect();
    let mut sent = vec![0u64; p];
    let mut received = vec![0u64; p];
    let mut messages = Vec::new();

    for step in 0..p.saturating_sub(1) {
        let outgoing: Vec<(usize, usize, Vec<i64>)> = (0..p)
            .map(|r| {
                let idx = (r + p - step % p) % p;
                let data = slots[r][idx].clone().expect("ring invariant: piece present before forwarding");
                ((r + 1) % p, idx, data)
            })
            .collect();
        for (r, (to, idx, data)) in outgoing.into_iter().enumerate() {
            let words = data.len() as u64;
            sent[r] += words;
            received[to] += words;
            messages.push(Message { step, from: fiber[r], to: fiber[to], words });
            slots[to][idx] = Some(data);
        }
    }

    let gathered = slots
        .into_iter()
        .map(|s| s.into_iter().flat_map(|piece| piece.expect("all pieces gathered")).collect())
        .collect();
    AllGatherOutcome { gathered, sent, received, messages }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReduceScatterOutcome {
    /// Member `r` holds shard `r` of the elementwise sum.
    pub shards: Vec<Vec<i64>>,
    pub sent: Vec<u64>,
    pub received: Vec<u64>,
    /// Scalar additions performed per member; equals words received.
    pub additions: Vec<u64>,
    pub messages: Vec<Message>,
}

/// Ring Reduce-Scatter: addends are cut into `p` shards by [`split_range`];
/// in step `t` member `r` sends its running sum of shard `(r - t - 1) mod p`
/// to member `r + 1`, which accumulates it. Member `r` never sends shard `r`,
/// so it sends `w - |shard r|` words.
pub fn ring_reduce_scatter(fiber: &[usize], addends: Vec<Vec<i64>>) -> Result<ReduceScatterOutcome> {
    let p = fiber.len();
    assert!(p > 0, "fiber must be nonempty");
    assert_eq!(p, addends.len(), "one addend per fiber member");
    let w = addends[0].len();
    if let Some(bad) = addends.iter().find(|a| a.len() != w) {
        return Err(Error::AddendMismatch { expected: w, actual: bad.len() });
    }

    let mut partial = addends;
    let mut sent = vec![0u64; p];
    let mut received = vec![0u64; p];
    let mut additions = vec![0u64; p];
    let mut messages = Vec::new();

    for step in 0..p.saturating_sub(1) {
        let outgoing: Vec<(usize, std::ops::Range<usize>, Vec<i64>)> = (0..p)
            .map(|r| {
                let shard = (r + 2 * p - step - 1) % p;
                let range = split_range(w, p, shard);
                ((r + 1) % p, range.clone(), partial[r][range].to_vec())
            })
            .collect();
        for (r, (to, range, data)) in outgoing.into_iter().enumerate() {
            let words = data.len() as u64;
            sent[r] += words;
            received[to] += words;
            additions[to] += words;
            messages.push(Message { step, from: fiber[r], to: fiber[to], words });
            for (dst, v) in partial[to][range].iter_mut().zip(data) {
                *dst += v;
            }
        }
    }

    let shards = partial
        .into_iter()
        .enumerate()
        .map(|(r, full)| full[split_range(w, p, r)].to_vec())
        .collect();
    Ok(ReduceScatterOutcome { shards, sent, received, additions, messages })
}

/// Data held by one virtual processor.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ProcStore {
    pub coord: [usize; 3],
    /// Owned share of its A block (column-major chunk).
    pub a_piece: Vec<i64>,
    /// Owned share of its B block.
    pub b_piece: Vec<i64>,
    pub a_block: Option<Matrix>,
    pub b_block: Option<Matrix>,
    pub d_block: Option<Matrix>,
    /// Owned share of its C block after the reduce-scatter.
    pub c_piece: Option<Vec<i64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VirtualMachine {
    pub shape: ProblemShape,
    pub grid: ProcessorGrid,
    pub seed: u64,
    pub stores: Vec<ProcStore>,
    /// `(phase, message)` pairs in the order they were sent.
    pub log: Vec<(Phase, Message)>,
    reference: (Matrix, Matrix),
    block_dims: [usize; 3],
}

impl VirtualMachine {
    pub fn rank(&self, i: usize, j: usize, l: usize) -> usize {
        rank_of(&self.grid, i, j, l)
    }

    pub fn inputs(&self) -> (&Matrix, &Matrix) {
        (&self.reference.0, &self.reference.1)
    }

    /// Words of A and B across all stores.
    pub fn input_words(&self) -> (usize, usize) {
        let a = self.stores.iter().map(|s| s.a_piece.len()).sum();
        let b = self.stores.iter().map(|s| s.b_piece.len()).sum();
        (a, b)
    }

    pub fn output_words(&self) -> usize {
        self.stores.iter().map(|s| s.c_piece.as_ref().map_or(0, Vec::len)).sum()
    }
}

fn rank_of(grid: &ProcessorGrid, i: usize, j: usize, l: usize) -> usize {
    (i * grid.p2 as usize + j) * grid.p3 as usize + l
}

/// Fills A and B from `seed` and distributes them: block `A[i, j]` in
/// column-major chunks over `(i, j, :)`, block `B[j, l]` over `(:, j, l)`.
pub fn build_machine(shape: &ProblemShape, grid: &ProcessorGrid, seed: u64) -> Result<VirtualMachine> {
    if let Some(err) = grid.first_non_dividing(shape) {
        return Err(err);
    }
    let [n1, n2, n3] = shape.dims().map(|d| d as usize);
    let [p1, p2, p3] = grid.factors().map(|p| p as usize);
    let (b1, b2, b3) = (n1 / p1, n2 / p2, n3 / p3);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Matrix::random(n1, n2, &mut rng);
    let b = Matrix::random(n2, n3, &mut rng);

    let mut stores: Vec<ProcStore> = Vec::with_capacity(p1 * p2 * p3);
    for i in 0..p1 {
        for j in 0..p2 {
            for l in 0..p3 {
                stores.push(ProcStore { coord: [i, j, l], ..Default::default() });
            }
        }
    }
    for i in 0..p1 {
        for j in 0..p2 {
            let block = a.block(i * b1, j * b2, b1, b2);
            for l in 0..p3 {
                stores[rank_of(grid, i, j, l)].a_piece = block.data[split_range(block.data.len(), p3, l)].to_vec();
            }
        }
    }
    for j in 0..p2 {
        for l in 0..p3 {
            let block = b.block(j * b2, l * b3, b2, b3);
            for i in 0..p1 {
                stores[rank_of(grid, i, j, l)].b_piece = block.data[split_range(block.data.len(), p1, i)].to_vec();
            }
        }
    }

    Ok(VirtualMachine {
        shape: *shape,
        grid: *grid,
        seed,
        stores,
        log: Vec::new(),
        reference: (a, b),
        block_dims: [b1, b2, b3],
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PhaseStats {
    pub phase: Phase,
    pub fiber_size: u64,
    /// Words in the gathered (or reduced) block each member ends up with.
    pub block_words: u64,
    pub per_proc_sent: Vec<u64>,
    pub per_proc_received: Vec<u64>,
    pub max_sent: u64,
    /// The fiber size divides the block, so every chunk has equal length.
    pub even_split: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimReport {
    pub shape: ProblemShape,
    pub grid: ProcessorGrid,
    pub seed: u64,
    pub phases: Vec<PhaseStats>,
    /// Sum over phases of the largest per-processor send volume.
    pub critical_path_words: u64,
    pub multiplies_per_proc: Vec<u64>,
    pub additions_per_proc: Vec<u64>,
    pub correct: bool,
    pub predicted: CostBreakdown,
    pub message_count: usize,
}

impl SimReport {
    pub fn flops_per_proc(&self) -> Vec<u64> {
        self.multiplies_per_proc.iter().zip(&self.additions_per_proc).map(|(m, a)| m + a).collect()
    }

    pub fn phase(&self, phase: Phase) -> &PhaseStats {
        self.phases.iter().find(|s| s.phase == phase).expect("all phases recorded")
    }

    /// `beta * critical path words + gamma * max flops`.
    pub fn time_estimate(&self, model: &MachineModel) -> f64 {
        let flops = self.flops_per_proc().into_iter().max().unwrap_or(0);
        model.time(self.critical_path_words as f64, flops as f64)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let critical = int(self.critical_path_words);
        serde_json::json!({
            "shape": self.shape,
            "grid": self.grid,
            "seed": self.seed,
            "per_phase": self.phases.iter().map(|p| serde_json::json!({
                "phase": p.phase.name(),
                "per_proc_sent": p.per_proc_sent,
                "max_sent": p.max_sent,
            })).collect::<Vec<_>>(),
            "critical_path_words": decimal_string(&critical),
            "critical_path_words_fraction": fraction_string(&critical),
            "flops_per_proc": self.flops_per_proc(),
            "correctness": self.correct,
            "predicted_total": decimal_string(&self.predicted.total),
            "predicted_total_fraction": fraction_string(&self.predicted.total),
        })
    }
}

fn phase_stats(phase: Phase, fiber_size: usize, block_words: usize, sent: Vec<u64>, received: Vec<u64>) -> PhaseStats {
    PhaseStats {
        phase,
        fiber_size: fiber_size as u64,
        block_words: block_words as u64,
        max_sent: sent.iter().copied().max().unwrap_or(0),
        per_proc_sent: sent,
        per_proc_received: received,
        even_split: block_words.is_multiple_of(fiber_size),
    }
}

impl VirtualMachine {
    /// Runs the four steps of the algorithm and checks the product.
    pub fn run(&mut self) -> Result<SimReport> {
        let grid = self.grid;
        let [p1, p2, p3] = grid.factors().map(|p| p as usize);
        let [b1, b2, b3] = self.block_dims;
        let nprocs = p1 * p2 * p3;

        // A over (i, j, :)
        let mut sent = vec![0u64; nprocs];
        let mut recv = vec![0u64; nprocs];
        for i in 0..p1 {
            for j in 0..p2 {
                let fiber: Vec<usize> = (0..p3).map(|l| rank_of(&grid, i, j, l)).collect();
                let pieces = fiber.iter().map(|&r| self.stores[r].a_piece.clone()).collect();
                let out = ring_all_gather(&fiber, pieces);
                for (pos, &r) in fiber.iter().enumerate() {
                    sent[r] += out.sent[pos];
                    recv[r] += out.received[pos];
                    self.stores[r].a_block = Some(Matrix { rows: b1, cols: b2, data: out.gathered[pos].clone() });
                }
                self.log.extend(out.messages.into_iter().map(|m| (Phase::GatherA, m)));
            }
        }
        let stats_a = phase_stats(Phase::GatherA, p3, b1 * b2, sent, recv);

        // B over (:, j, l)
        let mut sent = vec![0u64; nprocs];
        let mut recv = vec![0u64; nprocs];
        for j in 0..p2 {
            for l in 0..p3 {
                let fiber: Vec<usize> = (0..p1).map(|i| rank_of(&grid, i, j, l)).collect();
                let pieces = fiber.iter().map(|&r| self.stores[r].b_piece.clone()).collect();
                let out = ring_all_gather(&fiber, pieces);
                for (pos, &r) in fiber.iter().enumerate() {
                    sent[r] += out.sent[pos];
                    recv[r] += out.received[pos];
                    self.stores[r].b_block = Some(Matrix { rows: b2, cols: b3, data: out.gathered[pos].clone() });
                }
                self.log.extend(out.messages.into_iter().map(|m| (Phase::GatherB, m)));
            }
        }
        let stats_b = phase_stats(Phase::GatherB, p1, b2 * b3, sent, recv);

        // Local multiply.
        let mut multiplies = vec![0u64; nprocs];
        for (r, store) in self.stores.iter_mut().enumerate() {
            let a = store.a_block.as_ref().expect("A gathered");
            let b = store.b_block.as_ref().expect("B gathered");
            store.d_block = Some(a.multiply(b));
            multiplies[r] = (a.rows * a.cols * b.cols) as u64;
        }

        // C over (i, :, l)
        let mut sent = vec![0u64; nprocs];
        let mut recv = vec![0u64; nprocs];
        let mut additions = vec![0u64; nprocs];
        for i in 0..p1 {
            for l in 0..p3 {
                let fiber: Vec<usize> = (0..p2).map(|j| rank_of(&grid, i, j, l)).collect();
                let addends = fiber
                    .iter()
                    .map(|&r| self.stores[r].d_block.as_ref().expect("D computed").data.clone())
                    .collect();
                let out = ring_reduce_scatter(&fiber, addends)?;
                for (pos, &r) in fiber.iter().enumerate() {
                    sent[r] += out.sent[pos];
                    recv[r] += out.received[pos];
                    additions[r] += out.additions[pos];
                    self.stores[r].c_piece = Some(out.shards[pos].clone());
                }
                self.log.extend(out.messages.into_iter().map(|m| (Phase::ReduceScatterC, m)));
            }
        }
        let stats_c = phase_stats(Phase::ReduceScatterC, p2, b1 * b3, sent, recv);

        let [n1, _, n3] = self.shape.dims().map(|d| d as usize);
        assert_eq!(self.output_words(), n1 * n3, "exactly one copy of C after the run");
        self.verify_product()?;

        let phases = vec![stats_a, stats_b, stats_c];
        let critical_path_words = phases.iter().map(|p| p.max_sent).sum();
        Ok(SimReport {
            shape: self.shape,
            grid,
            seed: self.seed,
            phases,
            critical_path_words,
            multiplies_per_proc: multiplies,
            additions_per_proc: additions,
            correct: true,
            predicted: comm_cost(&self.shape, &grid),
            message_count: self.log.len(),
        })
    }

    /// Reassembles C from the owned shards.
    pub fn assemble_output(&self) -> Matrix {
        let [n1, _, n3] = self.shape.dims().map(|d| d as usize);
        let [p1, p2, p3] = self.grid.factors().map(|p| p as usize);
        let [b1, _, b3] = self.block_dims;
        let mut c = Matrix::zeros(n1, n3);
        for i in 0..p1 {
            for l in 0..p3 {
                let block: Vec<i64> = (0..p2)
                    .flat_map(|j| self.stores[rank_of(&self.grid, i, j, l)].c_piece.clone().unwrap_or_default())
                    .collect();
                for cc in 0..b3 {
                    for rr in 0..b1 {
                        c.set(i * b1 + rr, l * b3 + cc, block[cc * b1 + rr]);
                    }
                }
            }
        }
        c
    }

    fn verify_product(&self) -> Result<()> {
        let expected = self.reference.0.multiply(&self.reference.1);
        let got = self.assemble_output();
        for col in 0..expected.cols {
            for row in 0..expected.rows {
                if expected.get(row, col) != got.get(row, col) {
                    return Err(Error::IncorrectProduct { row, col });
                }
            }
        }
        Ok(())
    }
}

pub fn run_algorithm(shape: &ProblemShape, grid: &ProcessorGrid, seed: u64) -> Result<SimReport> {
    build_machine(shape, grid, seed)?.run()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhaseComparison {
    pub phase: Phase,
    pub measured: u64,
    pub ideal: BigRational,
    pub exact: bool,
    /// `|measured - ideal| <= fiber size - 1`.
    pub within_bound: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredictionCheck {
    pub phases: Vec<PhaseComparison>,
    pub measured_total: u64,
    pub predicted_total: BigRational,
}

impl PredictionCheck {
    pub fn exact(&self) -> bool {
        self.phases.iter().all(|p| p.exact)
    }

    pub fn within_bounds(&self) -> bool {
        self.phases.iter().all(|p| p.within_bound)
    }
}

pub fn compare_to_prediction(report: &SimReport) -> PredictionCheck {
    let phases = Phase::ALL
        .iter()
        .zip(report.predicted.phases())
        .map(|(&phase, ideal)| {
            let stats = report.phase(phase);
            let measured = int(stats.max_sent);
            let diff = if measured > *ideal { &measured - ideal } else { ideal - &measured };
            PhaseComparison {
                phase,
                measured: stats.max_sent,
                ideal: ideal.clone(),
                exact: measured == *ideal,
                within_bound: diff <= int(stats.fiber_size - 1),
            }
        })
        .collect();
    PredictionCheck {
        phases,
        measured_total: report.critical_path_words,
        predicted_total: report.predicted.total.clone(),
    }
}
