//! Brute-force checks of the projection facts behind the lower bound:
//! Loomis-Whitney, the per-array access bound, and the minimum total
//! projection size over every work assignment at toy scale.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact::{int, Real};
use crate::model::{accessed_data, classify_regime, ProblemShape};

/// Largest lattice searched in exhaustive mode (2^24 subsets).
pub const EXHAUSTIVE_LIMIT: u64 = 24;
/// Largest lattice sampled point by point.
pub const SAMPLED_LIMIT: u64 = 1 << 22;
/// Random balanced partitions drawn per sampled search.
pub const SAMPLED_PARTITIONS: usize = 64;

pub type Point = (u64, u64, u64);

/// A set of multiplications `(i1, i2, i3)`, 1-based, inside a shape.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WorkSet {
    shape: ProblemShape,
    points: BTreeSet<Point>,
}

impl WorkSet {
    /// Repeated points collapse to one.
    pub fn new(shape: ProblemShape, points: impl IntoIterator<Item = Point>) -> Result<Self> {
        let [n1, n2, n3] = shape.dims();
        let mut set = BTreeSet::new();
        for p in points {
            let (a, b, c) = p;
            if !(1..=n1).contains(&a) || !(1..=n2).contains(&b) || !(1..=n3).contains(&c) {
                return Err(Error::PointOutOfRange(a, b, c));
            }
            set.insert(p);
        }
        Ok(WorkSet { shape, points: set })
    }

    pub fn empty(shape: ProblemShape) -> Self {
        WorkSet { shape, points: BTreeSet::new() }
    }

    pub fn full(shape: ProblemShape) -> Self {
        let [n1, n2, n3] = shape.dims();
        Self::brick(shape, [(1, n1), (1, n2), (1, n3)])
    }

    /// All points with `lo <= i_d <= hi` on each axis, clipped to the shape.
    pub fn brick(shape: ProblemShape, ranges: [(u64, u64); 3]) -> Self {
        let [n1, n2, n3] = shape.dims();
        let [(a0, a1), (b0, b1), (c0, c1)] = ranges;
        let mut points = BTreeSet::new();
        for a in a0.max(1)..=a1.min(n1) {
            for b in b0.max(1)..=b1.min(n2) {
                for c in c0.max(1)..=c1.min(n3) {
                    points.insert((a, b, c));
                }
            }
        }
        WorkSet { shape, points }
    }

    /// Subset encoded by bit `((i1 - 1) * n2 + (i2 - 1)) * n3 + (i3 - 1)`.
    pub fn from_mask(shape: ProblemShape, mask: u64) -> Self {
        let lattice = lattice_points(&shape);
        let points = lattice.iter().enumerate().filter(|(e, _)| mask >> e & 1 == 1).map(|(_, &p)| p).collect();
        WorkSet { shape, points }
    }

    pub fn shape(&self) -> &ProblemShape {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = &Point> {
        self.points.iter()
    }

    pub fn is_subset(&self, other: &WorkSet) -> bool {
        self.points.is_subset(&other.points)
    }
}

fn lattice_points(shape: &ProblemShape) -> Vec<Point> {
    let [n1, n2, n3] = shape.dims();
    let mut out = Vec::with_capacity((n1 * n2 * n3) as usize);
    for a in 1..=n1 {
        for b in 1..=n2 {
            for c in 1..=n3 {
                out.push((a, b, c));
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ProjectionCounts {
    /// Entries of A touched: distinct `(i1, i2)`.
    pub phi_a: u64,
    /// Entries of B touched: distinct `(i2, i3)`.
    pub phi_b: u64,
    /// Entries of C touched: distinct `(i1, i3)`.
    pub phi_c: u64,
}

impl ProjectionCounts {
    pub fn sum(&self) -> u64 {
        self.phi_a + self.phi_b + self.phi_c
    }

    pub fn product(&self) -> u128 {
        self.phi_a as u128 * self.phi_b as u128 * self.phi_c as u128
    }

    pub fn le(&self, other: &ProjectionCounts) -> bool {
        self.phi_a <= other.phi_a && self.phi_b <= other.phi_b && self.phi_c <= other.phi_c
    }
}

pub fn projections_of(work: &WorkSet) -> ProjectionCounts {
    let a: BTreeSet<_> = work.points.iter().map(|&(i, j, _)| (i, j)).collect();
    let b: BTreeSet<_> = work.points.iter().map(|&(_, j, l)| (j, l)).collect();
    let c: BTreeSet<_> = work.points.iter().map(|&(i, _, l)| (i, l)).collect();
    ProjectionCounts { phi_a: a.len() as u64, phi_b: b.len() as u64, phi_c: c.len() as u64 }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LoomisWhitney {
    pub size: u64,
    pub counts: ProjectionCounts,
    /// `|F| <= phi_A phi_B phi_C`.
    pub product_form: bool,
    /// `|F|^2 <= phi_A phi_B phi_C`, the form the optimization constraint uses.
    pub squared_form: bool,
}

impl LoomisWhitney {
    pub fn passed(&self) -> bool {
        self.product_form && self.squared_form
    }
}

fn loomis_whitney_holds(size: u64, counts: &ProjectionCounts) -> (bool, bool) {
    let size = size as u128;
    let product = counts.product();
    (size <= product, size * size <= product)
}

pub fn verify_loomis_whitney(work: &WorkSet) -> LoomisWhitney {
    let counts = projections_of(work);
    let size = work.len() as u64;
    let (product_form, squared_form) = loomis_whitney_holds(size, &counts);
    LoomisWhitney { size, counts, product_form, squared_form }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProjectionLb {
    /// `|F| < n1 n2 n3 / P`: the hypothesis does not hold.
    NotApplicable,
    Checked { a: bool, b: bool, c: bool },
}

impl ProjectionLb {
    /// Not-applicable counts as a pass.
    pub fn passed(&self) -> bool {
        match self {
            ProjectionLb::NotApplicable => true,
            ProjectionLb::Checked { a, b, c } => *a && *b && *c,
        }
    }
}

fn projection_lb_holds(shape: &ProblemShape, procs: u64, size: u64, counts: &ProjectionCounts) -> ProjectionLb {
    let [n1, n2, n3] = shape.dims().map(u128::from);
    let p = procs as u128;
    if (size as u128) * p < n1 * n2 * n3 {
        return ProjectionLb::NotApplicable;
    }
    ProjectionLb::Checked {
        a: counts.phi_a as u128 * p >= n1 * n2,
        b: counts.phi_b as u128 * p >= n2 * n3,
        c: counts.phi_c as u128 * p >= n1 * n3,
    }
}

pub fn verify_projection_lb(work: &WorkSet, procs: u64) -> Result<ProjectionLb> {
    if procs == 0 {
        return Err(Error::ZeroProcessors);
    }
    let counts = projections_of(work);
    Ok(projection_lb_holds(&work.shape, procs, work.len() as u64, &counts))
}

/// Per-size minima over every subset of the lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SizeMinimum {
    pub min_sum: u64,
    /// Bitmask of a subset attaining `min_sum`.
    pub witness: u32,
    pub min_phi: [u64; 3],
    pub subsets: u64,
}

impl SizeMinimum {
    fn unset() -> Self {
        SizeMinimum { min_sum: u64::MAX, witness: 0, min_phi: [u64::MAX; 3], subsets: 0 }
    }

    fn merge(&mut self, other: &SizeMinimum) {
        if other.min_sum < self.min_sum || (other.min_sum == self.min_sum && other.witness < self.witness) {
            self.min_sum = other.min_sum;
            self.witness = other.witness;
        }
        for d in 0..3 {
            self.min_phi[d] = self.min_phi[d].min(other.min_phi[d]);
        }
        self.subsets += other.subsets;
    }
}

/// Result of enumerating all `2^(n1 n2 n3)` subsets of a shape's lattice.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeScan {
    pub shape: ProblemShape,
    /// Indexed by subset size `0..=n1 n2 n3`.
    pub by_size: Vec<SizeMinimum>,
    /// Subsets violating `|F|^2 <= phi_A phi_B phi_C`.
    pub loomis_whitney_violations: u64,
    /// Subsets violating the per-array bound for the smallest `P` whose
    /// hypothesis they satisfy (which implies every larger `P`).
    pub projection_lb_violations: u64,
}

impl LatticeScan {
    pub fn lattice_size(&self) -> u64 {
        self.by_size.len() as u64 - 1
    }

    pub fn subsets(&self) -> u64 {
        self.by_size.iter().map(|s| s.subsets).sum()
    }

    /// Smallest size `|F|` with `|F| P >= n1 n2 n3`.
    pub fn threshold(&self, procs: u64) -> u64 {
        self.lattice_size().div_ceil(procs)
    }

    /// Minimum over all subsets with `|F| >= n1 n2 n3 / P`.
    pub fn qualifying_minimum(&self, procs: u64) -> SizeMinimum {
        let t = self.threshold(procs) as usize;
        let mut best = SizeMinimum::unset();
        for s in &self.by_size[t..] {
            best.merge(s);
        }
        best
    }
}

struct MaskTables {
    low: Vec<[u32; 3]>,
    high: Vec<[u32; 3]>,
    low_bits: u32,
}

impl MaskTables {
    fn new(shape: &ProblemShape) -> Self {
        let [_, n2, n3] = shape.dims();
        let masks: Vec<[u32; 3]> = lattice_points(shape)
            .into_iter()
            .map(|(a, b, c)| {
                let (a, b, c) = (a - 1, b - 1, c - 1);
                [1 << (a * n2 + b), 1 << (b * n3 + c), 1 << (a * n3 + c)]
            })
            .collect();
        let total = masks.len() as u32;
        let low_bits = total.min(12);
        let table = |bits: &[[u32; 3]]| -> Vec<[u32; 3]> {
            (0..1usize << bits.len())
                .map(|x| {
                    let mut acc = [0u32; 3];
                    for (e, m) in bits.iter().enumerate() {
                        if x >> e & 1 == 1 {
                            for d in 0..3 {
                                acc[d] |= m[d];
                            }
                        }
                    }
                    acc
                })
                .collect()
        };
        let (lo, hi) = masks.split_at(low_bits as usize);
        MaskTables { low: table(lo), high: table(hi), low_bits }
    }
}

/// Enumerates every subset of the lattice of a shape with at most
/// [`EXHAUSTIVE_LIMIT`] points, in parallel over the high bits.
pub fn scan_lattice(shape: &ProblemShape) -> Result<LatticeScan> {
    let points = shape.multiplications() as u64;
    if points > EXHAUSTIVE_LIMIT {
        return Err(Error::LatticeTooLarge { points, limit: EXHAUSTIVE_LIMIT });
    }
    let tables = MaskTables::new(shape);
    let size_slots = points as usize + 1;
    let shape_copy = *shape;

    let merged = (0..tables.high.len())
        .into_par_iter()
        .map(|hi| {
            let mut by_size = vec![SizeMinimum::unset(); size_slots];
            let mut lw_bad = 0u64;
            let mut lb_bad = 0u64;
            let hm = tables.high[hi];
            let hi_bits = (hi as u32) << tables.low_bits;
            for (lo, lm) in tables.low.iter().enumerate() {
                let mask = hi_bits | lo as u32;
                let size = mask.count_ones() as u64;
                let phi = [
                    (hm[0] | lm[0]).count_ones() as u64,
                    (hm[1] | lm[1]).count_ones() as u64,
                    (hm[2] | lm[2]).count_ones() as u64,
                ];
                let entry = &mut by_size[size as usize];
                entry.subsets += 1;
                let sum = phi[0] + phi[1] + phi[2];
                if sum < entry.min_sum {
                    entry.min_sum = sum;
                    entry.witness = mask;
                }
                for (lowest, v) in entry.min_phi.iter_mut().zip(phi) {
                    *lowest = (*lowest).min(v);
                }
                if size == 0 {
                    continue;
                }
                let counts = ProjectionCounts { phi_a: phi[0], phi_b: phi[1], phi_c: phi[2] };
                if !loomis_whitney_holds(size, &counts).1 {
                    lw_bad += 1;
                }
                let procs = points.div_ceil(size);
                if !projection_lb_holds(&shape_copy, procs, size, &counts).passed() {
                    lb_bad += 1;
                }
            }
            (by_size, lw_bad, lb_bad)
        })
        .reduce(
            || (vec![SizeMinimum::unset(); size_slots], 0, 0),
            |(mut a, la, ba), (b, lb, bb)| {
                for (x, y) in a.iter_mut().zip(&b) {
                    x.merge(y);
                }
                (a, la + lb, ba + bb)
            },
        );

    Ok(LatticeScan {
        shape: *shape,
        by_size: merged.0,
        loomis_whitney_violations: merged.1,
        projection_lb_violations: merged.2,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchMode {
    Exhaustive,
    Sampled { seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionMinimum {
    pub shape: ProblemShape,
    pub procs: u64,
    /// Exact minimum (exhaustive) or best value found (sampled).
    pub value: u64,
    pub exhaustive: bool,
    pub accessed: Real,
    /// `value >= D`, with tolerance only when `D` is irrational.
    pub at_least_accessed: bool,
    pub witness: Option<WorkSet>,
}

impl ProjectionMinimum {
    fn new(shape: &ProblemShape, procs: u64, value: u64, exhaustive: bool, witness: Option<WorkSet>) -> Result<Self> {
        let regime = classify_regime(shape, procs)?;
        let accessed = accessed_data(shape, procs, regime.tag);
        let at_least_accessed = Real::Exact(int(value)).tolerant_cmp(&accessed) != Ordering::Less;
        Ok(ProjectionMinimum { shape: *shape, procs, value, exhaustive, accessed, at_least_accessed, witness })
    }
}

pub fn min_projection_sum(shape: &ProblemShape, procs: u64, mode: SearchMode) -> Result<ProjectionMinimum> {
    if procs == 0 {
        return Err(Error::ZeroProcessors);
    }
    match mode {
        SearchMode::Exhaustive => {
            let scan = scan_lattice(shape)?;
            min_from_scan(&scan, procs)
        }
        SearchMode::Sampled { seed } => sampled_minimum(shape, procs, seed),
    }
}

/// Answers [`min_projection_sum`] for any `P` from one lattice scan.
pub fn min_from_scan(scan: &LatticeScan, procs: u64) -> Result<ProjectionMinimum> {
    if procs == 0 {
        return Err(Error::ZeroProcessors);
    }
    let best = scan.qualifying_minimum(procs);
    let witness = WorkSet::from_mask(scan.shape, best.witness as u64);
    ProjectionMinimum::new(&scan.shape, procs, best.min_sum, true, Some(witness))
}

/// Smallest `ab + bc + ac` over bricks `a x b x c` inside the shape with
/// `abc >= n1 n2 n3 / P`, with the brick's dimensions.
pub fn best_brick(shape: &ProblemShape, procs: u64) -> (u64, [u64; 3]) {
    let [n1, n2, n3] = shape.dims();
    let need = (shape.multiplications() as u64).div_ceil(procs);
    let mut best = (u64::MAX, [n1, n2, n3]);
    for a in 1..=n1 {
        for b in 1..=n2 {
            let c = need.div_ceil(a * b).max(1);
            if c > n3 {
                continue;
            }
            let sum = a * b + b * c + a * c;
            if sum < best.0 {
                best = (sum, [a, b, c]);
            }
        }
    }
    best
}

fn sampled_minimum(shape: &ProblemShape, procs: u64, seed: u64) -> Result<ProjectionMinimum> {
    let points = shape.multiplications() as u64;
    if points > SAMPLED_LIMIT {
        return Err(Error::LatticeTooLarge { points, limit: SAMPLED_LIMIT });
    }
    let (brick_sum, [a, b, c]) = best_brick(shape, procs);
    let mut best = (brick_sum, WorkSet::brick(*shape, [(1, a), (1, b), (1, c)]));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lattice = lattice_points(shape);
    let parts = procs.min(points) as usize;
    for _ in 0..SAMPLED_PARTITIONS {
        lattice.shuffle(&mut rng);
        // The first part of a balanced split has ceil(N / parts) >= N / P points.
        let take = (points as usize).div_ceil(parts);
        let work = WorkSet { shape: *shape, points: lattice[..take].iter().copied().collect() };
        let sum = projections_of(&work).sum();
        if sum < best.0 {
            best = (sum, work);
        }
    }
    ProjectionMinimum::new(shape, procs, best.0, false, Some(best.1))
}

/// Exact `n1 n2 n3 / P` as a rational, the size hypothesis of the access bound.
pub fn work_share(shape: &ProblemShape, procs: u64) -> BigRational {
    BigRational::new((shape.multiplications() as u64).into(), procs.into())
}
