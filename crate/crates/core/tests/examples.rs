//! Worked values, each checked against a computation that does not share
//! code with the function under test.

use mmcomm::exact::{int, rat, to_f64, Real};
use mmcomm::grid::{analytic_grid, comm_cost, exhaustive_grid, ProcessorGrid};
use mmcomm::kkt::{numeric_minimize_oracle, OptProblem};
use mmcomm::model::{lower_bound, square_bound, ProblemShape, RegimeTag};
use mmcomm::projection::{min_projection_sum, projections_of, SearchMode, WorkSet};
use mmcomm::sim::run_algorithm;

fn shape(a: u64, b: u64, c: u64) -> ProblemShape {
    ProblemShape::new(a, b, c).unwrap()
}

fn grid(a: u64, b: u64, c: u64) -> ProcessorGrid {
    ProcessorGrid::new(a, b, c).unwrap()
}

/// Minimum of `x1 + x2 + x3` found by search, minus the owned words.
fn searched_bound(m: u64, n: u64, k: u64, p: u64) -> f64 {
    let pr = OptProblem::new(m, n, k, p).unwrap();
    let opt = numeric_minimize_oracle(&pr, 200_000).unwrap().objective;
    opt - (m * n + m * k + n * k) as f64 / p as f64
}

#[test]
fn three_d_example_matches_search() {
    let r = lower_bound(&shape(9600, 2400, 600), 512, None).unwrap();
    assert_eq!(r.regime.tag, RegimeTag::ThreeD);
    assert_eq!(r.lower_bound, Real::Exact(rat(421_875, 2)));
    let searched = searched_bound(9600, 2400, 600, 512);
    assert!((searched - 210_937.5).abs() <= 1e-6 * 210_937.5, "{searched}");
}

#[test]
fn each_case_matches_search() {
    for (m, n, k, p) in [(96, 24, 6, 3), (96, 24, 6, 36), (96, 96, 96, 8), (12, 12, 12, 8), (2, 1, 1, 2)] {
        let exact = lower_bound(&shape(m, n, k), p, None).unwrap().lower_bound.to_f64();
        let searched = searched_bound(m, n, k, p);
        assert!((searched - exact).abs() <= 1e-6 * exact.max(1.0), "{m} {n} {k} {p}: {searched} vs {exact}");
    }
}

#[test]
fn simulated_words_match_bound_values() {
    for (s, g, words) in [
        (shape(96, 24, 6), grid(3, 1, 1), 96u64),
        (shape(96, 24, 6), grid(12, 3, 1), 76),
        (shape(96, 96, 96), grid(2, 2, 2), 3456),
        (shape(12, 12, 12), grid(2, 2, 2), 54),
    ] {
        let r = run_algorithm(&s, &g, 1).unwrap();
        assert_eq!(r.critical_path_words, words, "{s} on {g}");
        assert_eq!(lower_bound(&s, g.procs(), None).unwrap().lower_bound, Real::Exact(int(words)));
    }
    assert_eq!(square_bound(12, 8).unwrap().lower_bound, Real::Exact(int(54)));
}

#[test]
fn reference_grids_by_enumeration() {
    let s = shape(9600, 2400, 600);
    for (p, expect) in [(3, grid(3, 1, 1)), (36, grid(12, 3, 1)), (512, grid(32, 8, 2))] {
        // brute force over all triples, independent of the factor enumeration
        let mut best: Option<(f64, ProcessorGrid)> = None;
        for a in 1..=p {
            for b in 1..=p {
                if p % (a * b) != 0 {
                    continue;
                }
                let g = grid(a, b, p / (a * b));
                let cost = to_f64(&comm_cost(&s, &g).total);
                if best.is_none_or(|(c, _)| cost < c) {
                    best = Some((cost, g));
                }
            }
        }
        assert_eq!(best.unwrap().1, expect);
        assert_eq!(analytic_grid(&s, p).unwrap().grid(), Some(expect));
        assert_eq!(exhaustive_grid(&s, p, true).unwrap().grid, expect);
    }
}

#[test]
fn projection_minima_by_direct_enumeration() {
    for (s, p, expect) in [(shape(2, 2, 2), 2u64, 8u64), (shape(2, 1, 1), 2, 3), (shape(1, 1, 1), 1, 3), (shape(3, 2, 2), 2, 11)] {
        let points = s.multiplications() as u64;
        let direct = (0u64..1 << points)
            .map(|mask| WorkSet::from_mask(s, mask))
            .filter(|w| w.len() as u64 * p >= points)
            .map(|w| projections_of(&w).sum())
            .min()
            .unwrap();
        assert_eq!(direct, expect, "{s}, P={p}");
        assert_eq!(min_projection_sum(&s, p, SearchMode::Exhaustive).unwrap().value, direct);
    }
}
