//! The projection-size minimization problem behind the bound, its closed-form
//! primal/dual solution, and independent numeric checks.
//!
//! ```text
//! min x1 + x2 + x3  s.t.  g1 = (mnk/P)^2 - x1 x2 x3 <= 0
//!                         g2 = nk/P - x1 <= 0
//!                         g3 = mk/P - x2 <= 0
//!                         g4 = mn/P - x3 <= 0
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{classify_regime, ProblemShape, RegimeTag};

/// Default relative tolerance for stationarity and complementary slackness.
pub const STATIONARITY_TOL: f64 = 1e-9;
/// Relative tolerance for primal feasibility, scaled by each constraint's magnitude.
pub const FEASIBILITY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct OptProblem {
    pub m: u64,
    pub n: u64,
    pub k: u64,
    pub procs: u64,
}

impl OptProblem {
    pub fn new(m: u64, n: u64, k: u64, procs: u64) -> Result<Self> {
        if m < n || n < k {
            return Err(Error::UnsortedDimensions { m, n, k });
        }
        if k == 0 {
            return Err(Error::ZeroDimension { name: "k" });
        }
        if procs == 0 {
            return Err(Error::ZeroProcessors);
        }
        Ok(OptProblem { m, n, k, procs })
    }

    pub fn from_shape(shape: &ProblemShape, procs: u64) -> Result<Self> {
        let (m, n, k) = shape.sorted();
        Self::new(m, n, k, procs)
    }

    pub fn shape(&self) -> ProblemShape {
        ProblemShape { n1: self.m, n2: self.n, n3: self.k }
    }

    fn floats(&self) -> (f64, f64, f64, f64) {
        (self.m as f64, self.n as f64, self.k as f64, self.procs as f64)
    }

    /// `(mnk/P)^2`, the right-hand side of the product constraint.
    pub fn product_bound(&self) -> f64 {
        let (m, n, k, p) = self.floats();
        let w = m * n * k / p;
        w * w
    }

    /// Lower bounds of the three individual constraints: `(nk/P, mk/P, mn/P)`.
    pub fn individual_bounds(&self) -> [f64; 3] {
        let (m, n, k, p) = self.floats();
        [n * k / p, m * k / p, m * n / p]
    }

    pub fn constraints(&self, x: &[f64; 3]) -> [f64; 4] {
        let lb = self.individual_bounds();
        [
            self.product_bound() - x[0] * x[1] * x[2],
            lb[0] - x[0],
            lb[1] - x[1],
            lb[2] - x[2],
        ]
    }

    /// Magnitude each constraint is measured against.
    fn constraint_scales(&self) -> [f64; 4] {
        let lb = self.individual_bounds();
        [self.product_bound(), lb[0], lb[1], lb[2]]
    }

    pub fn jacobian(x: &[f64; 3]) -> [[f64; 3]; 4] {
        [
            [-x[1] * x[2], -x[0] * x[2], -x[0] * x[1]],
            [-1.0, 0.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, -1.0],
        ]
    }

    pub fn objective(x: &[f64; 3]) -> f64 {
        x[0] + x[1] + x[2]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OptSolution {
    pub x: [f64; 3],
    pub mu: [f64; 4],
    pub case: RegimeTag,
}

impl OptSolution {
    pub fn objective(&self) -> f64 {
        OptProblem::objective(&self.x)
    }
}

/// Closed-form primal point and multipliers for the case containing `P`.
pub fn analytic_solution(problem: &OptProblem) -> OptSolution {
    let tag = classify_regime(&problem.shape(), problem.procs)
        .expect("OptProblem is validated on construction")
        .tag;
    case_solution(problem, tag)
}

/// The closed forms of one case, evaluated even outside that case's range.
pub fn case_solution(problem: &OptProblem, case: RegimeTag) -> OptSolution {
    let (m, n, k, p) = problem.floats();
    let (x, mu) = match case {
        RegimeTag::OneD => (
            [n * k, m * k / p, m * n / p],
            [p * p / (m * m * n * k), 0.0, 1.0 - p * n / m, 1.0 - p * k / m],
        ),
        RegimeTag::TwoD => {
            let side = (m * n * k * k / p).sqrt();
            (
                [side, side, m * n / p],
                [
                    (p / (m * n * k.powf(2.0 / 3.0))).powf(1.5),
                    0.0,
                    0.0,
                    1.0 - (p * k * k / (m * n)).sqrt(),
                ],
            )
        }
        RegimeTag::ThreeD => {
            let w = m * n * k / p;
            let side = (w * w).cbrt();
            ([side, side, side], [(p / (m * n * k)).powf(4.0 / 3.0), 0.0, 0.0, 0.0])
        }
    };
    OptSolution { x, mu, case }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Condition {
    pub passed: bool,
    pub residual: f64,
    /// Index (0-based) of the component with the largest residual.
    pub worst: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KktReport {
    pub primal_feasibility: Condition,
    pub dual_feasibility: Condition,
    pub stationarity: Condition,
    pub complementary_slackness: Condition,
}

impl KktReport {
    pub fn all_pass(&self) -> bool {
        self.conditions().iter().all(|(_, c)| c.passed)
    }

    pub fn conditions(&self) -> [(&'static str, Condition); 4] {
        [
            ("primal feasibility", self.primal_feasibility),
            ("dual feasibility", self.dual_feasibility),
            ("stationarity", self.stationarity),
            ("complementary slackness", self.complementary_slackness),
        ]
    }
}

fn worst_of(residuals: &[f64]) -> (f64, usize) {
    residuals
        .iter()
        .copied()
        .enumerate()
        .fold((0.0, 0), |(best, bi), (i, r)| if r > best { (r, i) } else { (best, bi) })
}

/// Evaluates the four KKT conditions of `sol` for `problem`.
///
/// Residuals:
/// * primal: `max(0, g_i) / |scale_i|`, checked against [`FEASIBILITY_TOL`];
/// * dual: `max(0, -mu_i)`;
/// * stationarity: `|grad f + mu J_g| / |grad f|` with `|grad f| = sqrt(3)`;
/// * complementary slackness: `|mu_i g_i| / f(x)`.
pub fn kkt_verify(problem: &OptProblem, sol: &OptSolution, tol: f64) -> KktReport {
    let g = problem.constraints(&sol.x);
    let scales = problem.constraint_scales();

    let primal: Vec<f64> = g.iter().zip(scales).map(|(gi, s)| gi.max(0.0) / s.abs()).collect();
    let (pr, pi) = worst_of(&primal);

    let dual: Vec<f64> = sol.mu.iter().map(|mu| (-mu).max(0.0)).collect();
    let (dr, di) = worst_of(&dual);

    let jac = OptProblem::jacobian(&sol.x);
    let mut grad = [1.0f64; 3];
    for (row, mu) in jac.iter().zip(sol.mu) {
        for (g, j) in grad.iter_mut().zip(row) {
            *g += mu * j;
        }
    }
    let stat_abs: Vec<f64> = grad.iter().map(|v| v.abs()).collect();
    let (_, si) = worst_of(&stat_abs);
    let sr = grad.iter().map(|v| v * v).sum::<f64>().sqrt() / 3f64.sqrt();

    let f = sol.objective().abs().max(f64::MIN_POSITIVE);
    let comp: Vec<f64> = sol.mu.iter().zip(g).map(|(mu, gi)| (mu * gi).abs() / f).collect();
    let (cr, ci) = worst_of(&comp);

    KktReport {
        primal_feasibility: Condition { passed: pr <= FEASIBILITY_TOL, residual: pr, worst: pi },
        dual_feasibility: Condition { passed: dr <= tol, residual: dr, worst: di },
        stationarity: Condition { passed: sr <= tol, residual: sr, worst: si },
        complementary_slackness: Condition { passed: cr <= tol, residual: cr, worst: ci },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OracleResult {
    pub objective: f64,
    pub x: [f64; 3],
    pub evaluations: usize,
}

/// Searches the feasible region numerically, without using the closed forms.
///
/// `(x1, x2)` range over a log-spaced grid between their individual lower
/// bounds and the objective of the feasible corner `(nk, mk, mn)`; `x3` is
/// set to the smallest value the remaining constraints allow. The best grid
/// point is then refined by a shrinking pattern search in log space.
pub fn numeric_minimize_oracle(problem: &OptProblem, budget: usize) -> Result<OracleResult> {
    if budget < 1000 {
        return Err(Error::BudgetTooSmall(budget));
    }
    let lb = problem.individual_bounds();
    let target = problem.product_bound();
    let (m, n, k, _) = problem.floats();
    let corner = m * n + m * k + n * k;

    let eval = |x1: f64, x2: f64| -> ([f64; 3], f64) {
        let x3 = lb[2].max(target / (x1 * x2));
        let x = [x1, x2, x3];
        (x, OptProblem::objective(&x))
    };

    let grid_budget = budget * 4 / 5;
    let side = (grid_budget as f64).sqrt().floor().max(2.0) as usize;
    let ln_lo = [lb[0].ln(), lb[1].ln()];
    let ln_hi = [corner.max(lb[0]).ln(), corner.max(lb[1]).ln()];
    let coord = |axis: usize, i: usize| -> f64 {
        let t = i as f64 / (side - 1) as f64;
        (ln_lo[axis] + t * (ln_hi[axis] - ln_lo[axis])).exp()
    };

    let mut best = ([f64::NAN; 3], f64::INFINITY);
    let mut evaluations = 0usize;
    for i in 0..side {
        let x1 = coord(0, i);
        for j in 0..side {
            let cand = eval(x1, coord(1, j));
            evaluations += 1;
            if cand.1 < best.1 {
                best = cand;
            }
        }
    }

    // Pattern search on (ln x1, ln x2), clamped to the individual bounds.
    // One step length for both axes, so the anti-diagonal moves keep x1 x2
    // fixed and can slide along the kink where the product constraint binds.
    let width = (ln_hi[0] - ln_lo[0]).max(ln_hi[1] - ln_lo[1]).max(f64::EPSILON);
    let mut step = [width / (side - 1) as f64; 2];
    let mut here = [best.0[0].ln(), best.0[1].ln()];
    let refine_budget = budget - evaluations;
    let mut spent = 0usize;
    while spent + 8 <= refine_budget && (step[0] > 1e-15 || step[1] > 1e-15) {
        let mut improved = false;
        for (d0, d1) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)] {
            let t0 = (here[0] + d0 * step[0]).max(ln_lo[0]);
            let t1 = (here[1] + d1 * step[1]).max(ln_lo[1]);
            let cand = eval(t0.exp().max(lb[0]), t1.exp().max(lb[1]));
            spent += 1;
            if cand.1 < best.1 {
                best = cand;
                here = [t0, t1];
                improved = true;
            }
        }
        if !improved {
            step = [step[0] * 0.5, step[1] * 0.5];
        }
    }
    evaluations += spent;

    if !best.1.is_finite() {
        return Err(Error::EmptyFeasibleRegion);
    }
    Ok(OracleResult { objective: best.1, x: best.0, evaluations })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuasiconvexViolation {
    pub x: [f64; 3],
    pub y: [f64; 3],
    pub inner_product: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuasiconvexReport {
    pub samples: usize,
    /// Pairs for which `g0(y) <= g0(x)` held, so the implication was tested.
    pub tested: usize,
    pub violation: Option<QuasiconvexViolation>,
}

impl QuasiconvexReport {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairOutcome {
    /// `g0(y) > g0(x)`: the implication holds trivially.
    Vacuous,
    Holds,
    Violated,
}

/// `<grad g0(x), y - x>` for `g0(x) = L - x1 x2 x3`.
pub fn product_gradient_inner(x: &[f64; 3], y: &[f64; 3]) -> f64 {
    let grad = [-x[1] * x[2], -x[0] * x[2], -x[0] * x[1]];
    grad.iter().zip(y.iter().zip(x)).map(|(g, (yi, xi))| g * (yi - xi)).sum()
}

/// Checks the quasiconvexity implication for one pair in the positive octant.
pub fn quasiconvex_pair(x: &[f64; 3], y: &[f64; 3]) -> PairOutcome {
    let px = x[0] * x[1] * x[2];
    let py = y[0] * y[1] * y[2];
    // g0(y) <= g0(x)  <=>  y1 y2 y3 >= x1 x2 x3
    if py < px {
        return PairOutcome::Vacuous;
    }
    let inner = product_gradient_inner(x, y);
    let scale = px * (3.0 + y[0] / x[0] + y[1] / x[1] + y[2] / x[2]);
    if inner <= 1e-12 * scale {
        PairOutcome::Holds
    } else {
        PairOutcome::Violated
    }
}

/// Samples `count` pairs log-uniformly from `[e^-6, e^6]^3` and tests the
/// quasiconvexity implication on each.
pub fn quasiconvexity_check(count: usize, seed: u64) -> QuasiconvexReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> [f64; 3] {
        [rng.gen_range(-6.0f64..6.0).exp(), rng.gen_range(-6.0f64..6.0).exp(), rng.gen_range(-6.0f64..6.0).exp()]
    };
    let mut tested = 0;
    for _ in 0..count {
        let x = draw(&mut rng);
        let y = draw(&mut rng);
        match quasiconvex_pair(&x, &y) {
            PairOutcome::Vacuous => {}
            PairOutcome::Holds => tested += 1,
            PairOutcome::Violated => {
                return QuasiconvexReport {
                    samples: count,
                    tested: tested + 1,
                    violation: Some(QuasiconvexViolation { x, y, inner_product: product_gradient_inner(&x, &y) }),
                };
            }
        }
    }
    QuasiconvexReport { samples: count, tested, violation: None }
}
