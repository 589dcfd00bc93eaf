//! Problem shapes, regime classification and the closed-form bounds.
//!
//! With `m >= n >= k` the sorted matrix dimensions, a processor that performs
//! its share of the `mnk` multiplications must access at least `D` words,
//! where
//!
//! ```text
//!        (mn + mk)/P + nk          if P <= m/n
//!   D =  2 (mnk^2/P)^(1/2) + mn/P  if m/n <= P <= mn/k^2
//!        3 (mnk/P)^(2/3)           if mn/k^2 <= P
//! ```
//!
//! and at most `(mn + mk + nk)/P` of those words can already be local, so it
//! communicates at least `D - (mn + mk + nk)/P`.

use std::cmp::Ordering;
use std::fmt;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{int, to_f64, Real};

/// Matrix dimensions: `A` is `n1 x n2`, `B` is `n2 x n3`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProblemShape {
    pub n1: u64,
    pub n2: u64,
    pub n3: u64,
}

impl ProblemShape {
    pub fn new(n1: u64, n2: u64, n3: u64) -> Result<Self> {
        for (name, v) in [("n1", n1), ("n2", n2), ("n3", n3)] {
            if v == 0 {
                return Err(Error::ZeroDimension { name });
            }
        }
        Ok(ProblemShape { n1, n2, n3 })
    }

    pub fn square(n: u64) -> Result<Self> {
        Self::new(n, n, n)
    }

    pub fn dims(&self) -> [u64; 3] {
        [self.n1, self.n2, self.n3]
    }

    /// Source dimension index (0 for `n1`, 1 for `n2`, 2 for `n3`) of each of
    /// `m`, `n`, `k`. Ties keep the original order.
    pub fn permutation(&self) -> [usize; 3] {
        let dims = self.dims();
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&a, &b| dims[b].cmp(&dims[a]).then(a.cmp(&b)));
        idx
    }

    /// `(m, n, k)`: max, median and min dimension.
    pub fn sorted(&self) -> (u64, u64, u64) {
        let dims = self.dims();
        let p = self.permutation();
        (dims[p[0]], dims[p[1]], dims[p[2]])
    }

    pub fn multiplications(&self) -> u128 {
        self.n1 as u128 * self.n2 as u128 * self.n3 as u128
    }

    /// `n1n2 + n2n3 + n1n3`, the total words of A, B and C.
    pub fn total_words(&self) -> u128 {
        let (a, b, c) = (self.n1 as u128, self.n2 as u128, self.n3 as u128);
        a * b + b * c + a * c
    }

    /// Words a processor may own under an even data distribution.
    pub fn owned_words(&self, procs: u64) -> BigRational {
        BigRational::new(self.total_words().into(), procs.into())
    }
}

impl fmt::Display for ProblemShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.n1, self.n2, self.n3)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RegimeTag {
    OneD,
    TwoD,
    ThreeD,
}

impl RegimeTag {
    pub fn label(&self) -> &'static str {
        match self {
            RegimeTag::OneD => "1D",
            RegimeTag::TwoD => "2D",
            RegimeTag::ThreeD => "3D",
        }
    }

    pub fn index(&self) -> u8 {
        match self {
            RegimeTag::OneD => 1,
            RegimeTag::TwoD => 2,
            RegimeTag::ThreeD => 3,
        }
    }
}

/// Which case of the bound applies. A `P` sitting exactly on a threshold is
/// tagged with the lower case and flagged `on_boundary`; both adjacent
/// formulas agree there.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Regime {
    pub tag: RegimeTag,
    pub on_boundary: bool,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag.label())?;
        if self.on_boundary {
            f.write_str(" (boundary)")?;
        }
        Ok(())
    }
}

pub fn classify_regime(shape: &ProblemShape, procs: u64) -> Result<Regime> {
    if procs == 0 {
        return Err(Error::ZeroProcessors);
    }
    ProblemShape::new(shape.n1, shape.n2, shape.n3)?;
    let (m, n, k) = shape.sorted();
    let (m, n, k, p) = (m as u128, n as u128, k as u128, procs as u128);
    // P <= m/n  <=>  P n <= m;  P <= mn/k^2  <=>  P k^2 <= mn.
    let regime = match (p * n).cmp(&m) {
        Ordering::Less => Regime { tag: RegimeTag::OneD, on_boundary: false },
        Ordering::Equal => Regime { tag: RegimeTag::OneD, on_boundary: true },
        Ordering::Greater => match (p * k * k).cmp(&(m * n)) {
            Ordering::Less => Regime { tag: RegimeTag::TwoD, on_boundary: false },
            Ordering::Equal => Regime { tag: RegimeTag::TwoD, on_boundary: true },
            Ordering::Greater => Regime { tag: RegimeTag::ThreeD, on_boundary: false },
        },
    };
    Ok(regime)
}

/// The accessed-data term `D` evaluated with the formula of `tag`, regardless
/// of whether `procs` lies inside that case's range.
pub fn accessed_data(shape: &ProblemShape, procs: u64, tag: RegimeTag) -> Real {
    let (m, n, k) = shape.sorted();
    let (mn, mk, nk) = (m as u128 * n as u128, m as u128 * k as u128, n as u128 * k as u128);
    let p = procs as u128;
    match tag {
        RegimeTag::OneD => Real::Exact(
            BigRational::new((mn + mk).into(), p.into()) + BigRational::from_integer(nk.into()),
        ),
        RegimeTag::TwoD => {
            let inner = BigRational::new((mn * k as u128 * k as u128).into(), p.into());
            Real::scaled_root(2, &inner, 2).add_rational(&BigRational::new(mn.into(), p.into()))
        }
        RegimeTag::ThreeD => {
            let per_proc = BigRational::new((mn * k as u128).into(), p.into());
            Real::scaled_root(3, &(&per_proc * &per_proc), 3)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Binding {
    MemoryIndependent,
    MemoryDependent,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub shape: ProblemShape,
    pub procs: u64,
    pub regime: Regime,
    /// Words the busiest processor must access.
    pub accessed: Real,
    /// `(mn + mk + nk)/P`, the words it may already own.
    pub owned: BigRational,
    /// `max(0, accessed - owned)`.
    pub lower_bound: Real,
    /// `2mnk/(P sqrt(M))`, present when a memory size was supplied.
    pub memory_dependent: Option<f64>,
    pub binding: Option<Binding>,
    /// Set when `P > mnk`, i.e. fewer than one multiplication per processor.
    pub exceeds_work: bool,
}

pub fn lower_bound(shape: &ProblemShape, procs: u64, memory: Option<f64>) -> Result<BoundReport> {
    let regime = classify_regime(shape, procs)?;
    let accessed = accessed_data(shape, procs, regime.tag);
    let owned = shape.owned_words(procs);
    let lower_bound = accessed.sub_rational(&owned).clamp_nonnegative();

    let (memory_dependent, binding) = match memory {
        None => (None, None),
        Some(mem) => {
            let md = memory_dependent_term(shape, procs, mem)?;
            let binding = if Real::Approx(md).tolerant_cmp(&accessed) == Ordering::Greater {
                Binding::MemoryDependent
            } else {
                Binding::MemoryIndependent
            };
            (Some(md), Some(binding))
        }
    };

    Ok(BoundReport {
        shape: *shape,
        procs,
        regime,
        accessed,
        owned,
        lower_bound,
        memory_dependent,
        binding,
        exceeds_work: procs as u128 > shape.multiplications(),
    })
}

fn memory_dependent_term(shape: &ProblemShape, procs: u64, memory: f64) -> Result<f64> {
    if !(memory.is_finite() && memory > 0.0) {
        return Err(Error::InvalidMemory(memory));
    }
    let owned = to_f64(&shape.owned_words(procs));
    // Equality is feasible; compare with a relative slack so the exact minimum
    // survives a round trip through f64.
    if memory < owned * (1.0 - 1e-15) {
        return Err(Error::MemoryTooSmall { memory, required: owned });
    }
    Ok(2.0 * shape.multiplications() as f64 / (procs as f64 * memory.sqrt()))
}

/// Bound for `n x n` times `n x n`: `3n^2/P^(2/3) - 3n^2/P`.
pub fn square_bound(n: u64, procs: u64) -> Result<BoundReport> {
    lower_bound(&ProblemShape::square(n)?, procs, None)
}

/// Direct evaluation of `3n^2/P^(2/3) - 3n^2/P`, exact when `P` is a cube.
pub fn square_formula(n: u64, procs: u64) -> Real {
    let n2 = n as u128 * n as u128;
    let p = int(procs);
    let leading = match crate::exact::rational_root(&(&p * &p), 3) {
        Some(p23) => Real::Exact(BigRational::from_integer((3 * n2).into()) / p23),
        None => Real::Approx(3.0 * n2 as f64 / (procs as f64).powf(2.0 / 3.0)),
    };
    leading.sub_rational(&BigRational::new((3 * n2).into(), procs.into()))
}

/// Comparison of the memory-dependent leading term against the
/// memory-independent accessed-data term `D`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dominance {
    pub memory_dependent: f64,
    pub memory_independent: Real,
    pub memory_dependent_dominates: bool,
    /// `mn/k^2 < P <= (8/27) mnk / M^(3/2)`.
    pub in_window: bool,
}

pub fn bound_dominance(shape: &ProblemShape, procs: u64, memory: f64) -> Result<Dominance> {
    let report = lower_bound(shape, procs, Some(memory))?;
    let md = report.memory_dependent.expect("memory supplied");
    let (m, n, k) = shape.sorted();
    let above_3d = procs as u128 * k as u128 * k as u128 > m as u128 * n as u128;
    let window_top = 8.0 / 27.0 * shape.multiplications() as f64 / memory.powf(1.5);
    let within_top = procs as f64 <= window_top * (1.0 + crate::exact::IRRATIONAL_REL_TOL);
    Ok(Dominance {
        memory_dependent: md,
        memory_independent: report.accessed,
        memory_dependent_dominates: report.binding == Some(Binding::MemoryDependent),
        in_window: above_3d && within_top,
    })
}

/// Leading-term constants of prior memory-independent bounds for one regime.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PriorConstants {
    pub regime: RegimeTag,
    pub leading_term: &'static str,
    pub acs90: Option<f64>,
    pub itt04: Option<f64>,
    pub de13: Option<f64>,
    pub this_work: f64,
}

pub fn prior_constants(tag: RegimeTag) -> PriorConstants {
    match tag {
        RegimeTag::OneD => PriorConstants {
            regime: tag,
            leading_term: "nk",
            acs90: None,
            itt04: None,
            de13: Some(16.0 / 25.0),
            this_work: 1.0,
        },
        RegimeTag::TwoD => PriorConstants {
            regime: tag,
            leading_term: "(mnk^2/P)^(1/2)",
            acs90: None,
            itt04: None,
            de13: Some((2.0f64 / 3.0).sqrt()),
            this_work: 2.0,
        },
        RegimeTag::ThreeD => PriorConstants {
            regime: tag,
            leading_term: "(mnk/P)^(2/3)",
            acs90: Some(0.5f64.powf(2.0 / 3.0)),
            itt04: Some(0.5),
            de13: Some(1.0),
            this_work: 3.0,
        },
    }
}

/// Latency, bandwidth and per-flop costs of the alpha-beta-gamma model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MachineModel {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl MachineModel {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Option<Self> {
        (alpha >= 0.0 && beta >= 0.0 && gamma >= 0.0).then_some(MachineModel { alpha, beta, gamma })
    }

    pub fn time(&self, words: f64, flops: f64) -> f64 {
        self.beta * words + self.gamma * flops
    }

    pub fn time_with_latency(&self, messages: f64, words: f64, flops: f64) -> f64 {
        self.alpha * messages + self.time(words, flops)
    }
}
