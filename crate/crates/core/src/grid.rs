//! Communication cost of the grid algorithm and processor grid selection.

use std::cmp::Ordering;
use std::fmt;

use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{int, rat, rational_root, to_f64};
use crate::model::{classify_regime, ProblemShape, RegimeTag};

/// A `p1 x p2 x p3` logical grid; `p1` splits the rows of A and C, `p2` the
/// contraction dimension, `p3` the columns of B and C.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProcessorGrid {
    pub p1: u64,
    pub p2: u64,
    pub p3: u64,
}

impl ProcessorGrid {
    pub fn new(p1: u64, p2: u64, p3: u64) -> Result<Self> {
        if p1 == 0 || p2 == 0 || p3 == 0 {
            return Err(Error::ZeroGridFactor { p1, p2, p3 });
        }
        Ok(ProcessorGrid { p1, p2, p3 })
    }

    pub fn procs(&self) -> u64 {
        self.p1 * self.p2 * self.p3
    }

    pub fn factors(&self) -> [u64; 3] {
        [self.p1, self.p2, self.p3]
    }

    /// Number of grid factors larger than one.
    pub fn dimensionality(&self) -> usize {
        self.factors().iter().filter(|&&p| p > 1).count()
    }

    pub fn divides(&self, shape: &ProblemShape) -> bool {
        self.first_non_dividing(shape).is_none()
    }

    pub(crate) fn first_non_dividing(&self, shape: &ProblemShape) -> Option<Error> {
        self.factors()
            .into_iter()
            .zip(shape.dims())
            .enumerate()
            .find(|(_, (p, n))| n % p != 0)
            .map(|(i, (p, n))| Error::NonDividingGrid { axis: i + 1, factor: p, dim: n })
    }
}

impl fmt::Display for ProcessorGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.p1, self.p2, self.p3)
    }
}

/// Per-processor words moved by each collective of the algorithm.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostBreakdown {
    /// All-Gather of A over fibers of size `p3`.
    pub words_a: BigRational,
    /// All-Gather of B over fibers of size `p1`.
    pub words_b: BigRational,
    /// Reduce-Scatter of C over fibers of size `p2`.
    pub words_c: BigRational,
    pub total: BigRational,
    pub owned: BigRational,
}

impl CostBreakdown {
    /// The same total written as accessed blocks minus owned data.
    pub fn accessed_minus_owned(shape: &ProblemShape, grid: &ProcessorGrid) -> BigRational {
        block_words(shape, grid).iter().sum::<BigRational>() - shape.owned_words(grid.procs())
    }

    pub fn phases(&self) -> [&BigRational; 3] {
        [&self.words_a, &self.words_b, &self.words_c]
    }
}

/// Words in the A, B and C blocks a processor touches:
/// `n1n2/(p1p2)`, `n2n3/(p2p3)`, `n1n3/(p1p3)`.
pub fn block_words(shape: &ProblemShape, grid: &ProcessorGrid) -> [BigRational; 3] {
    let (n1, n2, n3) = (shape.n1, shape.n2, shape.n3);
    let (p1, p2, p3) = (grid.p1, grid.p2, grid.p3);
    [
        BigRational::new((n1 as u128 * n2 as u128).into(), (p1 as u128 * p2 as u128).into()),
        BigRational::new((n2 as u128 * n3 as u128).into(), (p2 as u128 * p3 as u128).into()),
        BigRational::new((n1 as u128 * n3 as u128).into(), (p1 as u128 * p3 as u128).into()),
    ]
}

/// `(1 - 1/p) w`: bandwidth of an All-Gather or Reduce-Scatter over `p`
/// processors with `w` words gathered (or reduced) per processor.
pub fn collective_words(fiber: u64, w: &BigRational) -> BigRational {
    (BigRational::one() - rat(1, fiber)) * w
}

pub fn comm_cost(shape: &ProblemShape, grid: &ProcessorGrid) -> CostBreakdown {
    let [a, b, c] = block_words(shape, grid);
    let words_a = collective_words(grid.p3, &a);
    let words_b = collective_words(grid.p1, &b);
    let words_c = collective_words(grid.p2, &c);
    let total = &words_a + &words_b + &words_c;
    CostBreakdown { words_a, words_b, words_c, total, owned: shape.owned_words(grid.procs()) }
}

/// The grid that attains the bound, or why it is not an integer grid.
#[derive(Clone, Debug, PartialEq)]
pub enum AnalyticGrid {
    Integral(ProcessorGrid),
    /// The ideal factors, aligned to `(p1, p2, p3)`, and the 1-based axes
    /// whose factor is not an integer.
    NonIntegral { factors: [f64; 3], fractional_axes: Vec<usize> },
}

impl AnalyticGrid {
    pub fn grid(&self) -> Option<ProcessorGrid> {
        match self {
            AnalyticGrid::Integral(g) => Some(*g),
            AnalyticGrid::NonIntegral { .. } => None,
        }
    }
}

enum Factor {
    Exact(BigRational),
    Approx(f64),
}

fn factor_root(q: BigRational, degree: u32) -> Factor {
    match rational_root(&q, degree) {
        Some(r) => Factor::Exact(r),
        None => Factor::Approx(to_f64(&q).powf(1.0 / degree as f64)),
    }
}

/// Grid factors that equalize the per-processor sub-volume sides of the
/// dimensions that are split: `p = P`, `q = r = 1` in the 1D case;
/// `m/p = n/q`, `r = 1` in the 2D case; `m/p = n/q = k/r` in the 3D case.
pub fn analytic_grid(shape: &ProblemShape, procs: u64) -> Result<AnalyticGrid> {
    let regime = classify_regime(shape, procs)?;
    let (m, n, k) = shape.sorted();
    let p = int(procs);
    let sorted: [Factor; 3] = match regime.tag {
        RegimeTag::OneD => [Factor::Exact(p), Factor::Exact(int(1)), Factor::Exact(int(1))],
        // p = (P/(mn))^(1/2) m = (P m/n)^(1/2)
        RegimeTag::TwoD => [
            factor_root(&p * rat(m, n), 2),
            factor_root(&p * rat(n, m), 2),
            Factor::Exact(int(1)),
        ],
        // p = (P/(mnk))^(1/3) m = (P m^2/(nk))^(1/3)
        RegimeTag::ThreeD => {
            let cube = |a: u64, b: u64, c: u64| {
                let num = BigRational::from_integer((a as u128 * a as u128).into());
                let den = BigRational::from_integer((b as u128 * c as u128).into());
                factor_root(&p * num / den, 3)
            };
            [cube(m, n, k), cube(n, m, k), cube(k, m, n)]
        }
    };

    let perm = shape.permutation();
    let mut aligned: [Option<&Factor>; 3] = [None, None, None];
    for (sorted_idx, &axis) in perm.iter().enumerate() {
        aligned[axis] = Some(&sorted[sorted_idx]);
    }
    let aligned = aligned.map(|f| f.expect("permutation covers all axes"));

    let mut ints = [0u64; 3];
    let mut fractional_axes = Vec::new();
    let mut factors = [0f64; 3];
    for (axis, f) in aligned.iter().enumerate() {
        match f {
            Factor::Exact(q) if q.is_integer() => {
                ints[axis] = q.to_integer().to_u64().expect("grid factor fits in u64");
                factors[axis] = ints[axis] as f64;
            }
            Factor::Exact(q) => {
                fractional_axes.push(axis + 1);
                factors[axis] = to_f64(q);
            }
            Factor::Approx(x) => {
                fractional_axes.push(axis + 1);
                factors[axis] = *x;
            }
        }
    }
    if fractional_axes.is_empty() {
        Ok(AnalyticGrid::Integral(ProcessorGrid { p1: ints[0], p2: ints[1], p3: ints[2] }))
    } else {
        Ok(AnalyticGrid::NonIntegral { factors, fractional_axes })
    }
}

/// Every ordered `(p1, p2, p3)` with `p1 p2 p3 = P`, in lexicographic order.
pub fn factor_triples(procs: u64) -> Vec<ProcessorGrid> {
    let divisors = |x: u64| -> Vec<u64> {
        let mut small = Vec::new();
        let mut large = Vec::new();
        let mut d = 1;
        while d * d <= x {
            if x.is_multiple_of(d) {
                small.push(d);
                if d * d != x {
                    large.push(x / d);
                }
            }
            d += 1;
        }
        small.extend(large.into_iter().rev());
        small
    };
    let mut out = Vec::new();
    for p1 in divisors(procs) {
        for p2 in divisors(procs / p1) {
            out.push(ProcessorGrid { p1, p2, p3: procs / p1 / p2 });
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridChoice {
    pub grid: ProcessorGrid,
    pub cost: CostBreakdown,
}

/// Minimizes [`comm_cost`] over all factor triples of `P`.
///
/// Equal costs are resolved toward the lexicographically greatest triple, so
/// a 1D split prefers `(P, 1, 1)`.
pub fn exhaustive_grid(shape: &ProblemShape, procs: u64, require_divisibility: bool) -> Result<GridChoice> {
    if procs == 0 {
        return Err(Error::ZeroProcessors);
    }
    let mut best: Option<GridChoice> = None;
    for grid in factor_triples(procs) {
        if require_divisibility && !grid.divides(shape) {
            continue;
        }
        let cost = comm_cost(shape, &grid);
        let better = match &best {
            None => true,
            Some(b) => match cost.total.cmp(&b.cost.total) {
                Ordering::Less => true,
                Ordering::Equal => grid > b.grid,
                Ordering::Greater => false,
            },
        };
        if better {
            best = Some(GridChoice { grid, cost });
        }
    }
    best.ok_or(Error::NoDividingGrid { procs, n1: shape.n1, n2: shape.n2, n3: shape.n3 })
}
