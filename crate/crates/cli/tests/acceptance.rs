//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero if any fails.

use std::cmp::Ordering;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use mmcomm::exact::{int, Real};
use mmcomm::grid::{analytic_grid, comm_cost, exhaustive_grid, ProcessorGrid};
use mmcomm::kkt::{analytic_solution, case_solution, kkt_verify, numeric_minimize_oracle, OptProblem, OptSolution};
use mmcomm::model::{accessed_data, classify_regime, lower_bound, square_bound, square_formula, Binding, ProblemShape, RegimeTag};
use mmcomm::projection::{min_from_scan, scan_lattice};
use mmcomm::sim::{ring_all_gather, ring_reduce_scatter, run_algorithm, Message};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn shape(a: u64, b: u64, c: u64) -> ProblemShape {
    ProblemShape::new(a, b, c).unwrap()
}

fn grid(a: u64, b: u64, c: u64) -> ProcessorGrid {
    ProcessorGrid::new(a, b, c).unwrap()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn reference_grids() -> Outcome {
    let s = shape(9600, 2400, 600);
    for (p, expect) in [(3, grid(3, 1, 1)), (36, grid(12, 3, 1)), (512, grid(32, 8, 2))] {
        let analytic = analytic_grid(&s, p).map_err(|e| e.to_string())?.grid();
        ensure(analytic == Some(expect), || format!("P={p}: analytic grid {analytic:?}, expected {expect}"))?;
        let best = exhaustive_grid(&s, p, false).map_err(|e| e.to_string())?;
        let cost = comm_cost(&s, &expect).total;
        ensure(best.cost.total == cost, || format!("P={p}: exhaustive cost {} != analytic {}", best.cost.total, cost))?;
    }
    Ok("(3,1,1), (12,3,1), (32,8,2); exhaustive costs agree".into())
}

fn attainment() -> Outcome {
    let mut seen = Vec::new();
    for (s, g, words) in [
        (shape(96, 24, 6), grid(3, 1, 1), 96u64),
        (shape(96, 24, 6), grid(12, 3, 1), 76),
        (shape(96, 96, 96), grid(2, 2, 2), 3456),
    ] {
        let report = run_algorithm(&s, &g, 2024).map_err(|e| e.to_string())?;
        ensure(report.correct, || format!("{s} on {g}: product incorrect"))?;
        let bound = lower_bound(&s, g.procs(), None).map_err(|e| e.to_string())?.lower_bound;
        let measured = Real::Exact(int(report.critical_path_words));
        ensure(measured == bound, || format!("{s} on {g}: measured {measured} != bound {bound}"))?;
        ensure(report.critical_path_words == words, || format!("{s} on {g}: {} words, expected {words}", report.critical_path_words))?;
        seen.push(report.critical_path_words.to_string());
    }
    Ok(format!("measured = bound exactly: {}", seen.join(", ")))
}

fn square_case() -> Outcome {
    let b = square_bound(12, 8).map_err(|e| e.to_string())?.lower_bound;
    ensure(b == Real::Exact(int(54)), || format!("square_bound(12, 8) = {b}"))?;
    let f = square_formula(12, 8);
    ensure(f == b, || format!("formula {f} != bound {b}"))?;
    let report = run_algorithm(&shape(96, 96, 96), &grid(2, 2, 2), 7).map_err(|e| e.to_string())?;
    let measured = Real::Exact(int(report.critical_path_words));
    let formula = square_formula(96, 8);
    ensure(measured == formula, || format!("simulated {measured} != 3n^2/P^(2/3) - 3n^2/P = {formula}"))?;
    Ok(format!("square_bound(12,8) = {b}; simulated 96^3/8 = {measured} = formula"))
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: u64, hi: u64) -> u64 {
    let x = rng.gen_range((lo as f64).ln()..=(hi as f64).ln()).exp().round() as u64;
    x.clamp(lo, hi)
}

fn sorted_triple(rng: &mut ChaCha8Rng, max: u64) -> (u64, u64, u64) {
    let mut v = [log_uniform(rng, 1, max), log_uniform(rng, 1, max), log_uniform(rng, 1, max)];
    v.sort_unstable_by(|a, b| b.cmp(a));
    (v[0], v[1], v[2])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Interior(RegimeTag),
    FirstBoundary,
    SecondBoundary,
}

/// Tuples `(m, n, k, P)` covering each case's interior and both boundaries.
fn kkt_tuples(rng: &mut ChaCha8Rng, per_kind: usize) -> Vec<(Kind, u64, u64, u64, u64)> {
    let mut out = Vec::new();
    let kinds = [
        Kind::Interior(RegimeTag::OneD),
        Kind::Interior(RegimeTag::TwoD),
        Kind::Interior(RegimeTag::ThreeD),
        Kind::FirstBoundary,
        Kind::SecondBoundary,
    ];
    for kind in kinds {
        let mut count = 0;
        while count < per_kind {
            let (m, n, k) = sorted_triple(rng, 200_000);
            let first = m / n;
            let second = (m as u128 * n as u128 / (k as u128 * k as u128)) as u64;
            let tuple = match kind {
                Kind::Interior(RegimeTag::OneD) if first >= 2 => {
                    let p = rng.gen_range(1..=first);
                    (p * n < m).then_some((m, n, k, p))
                }
                Kind::Interior(RegimeTag::TwoD) if second > first + 1 => {
                    let p = rng.gen_range(first + 1..=second);
                    (p * n > m && (p as u128) * (k as u128).pow(2) < m as u128 * n as u128).then_some((m, n, k, p))
                }
                Kind::Interior(RegimeTag::ThreeD) => Some((m, n, k, second + 1 + log_uniform(rng, 1, 1 << 20))),
                Kind::FirstBoundary => {
                    let p = log_uniform(rng, 1, 4096);
                    Some((n * p, n, k, p))
                }
                Kind::SecondBoundary => {
                    let k = log_uniform(rng, 1, 2000);
                    let a = log_uniform(rng, 1, 512);
                    let b = a + log_uniform(rng, 1, 4096) - 1;
                    Some((k * b, k * a, k, a * b))
                }
                _ => None,
            };
            if let Some((m, n, k, p)) = tuple {
                out.push((kind, m, n, k, p));
                count += 1;
            }
        }
    }
    out
}

fn coincide(a: &OptSolution, b: &OptSolution) -> bool {
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(y.abs());
    a.x.iter().zip(&b.x).all(|(x, y)| close(*x, *y)) && a.mu.iter().zip(&b.mu).all(|(x, y)| close(*x, *y))
}

fn kkt_certification() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x4b4b54);
    let tuples = kkt_tuples(&mut rng, 220);
    let failures: Vec<String> = tuples
        .par_iter()
        .filter_map(|&(kind, m, n, k, p)| {
            let pr = OptProblem::new(m, n, k, p).ok()?;
            let tag = classify_regime(&pr.shape(), p).ok()?;
            match kind {
                Kind::Interior(t) if t != tag.tag || tag.on_boundary => return Some(format!("{m},{n},{k},{p}: not interior to {t:?}")),
                Kind::FirstBoundary | Kind::SecondBoundary if !tag.on_boundary => {
                    return Some(format!("{m},{n},{k},{p}: not on a boundary"))
                }
                _ => {}
            }
            let sol = analytic_solution(&pr);
            let report = kkt_verify(&pr, &sol, 1e-9);
            if !report.all_pass() {
                return Some(format!("{m},{n},{k},{p}: {report:?}"));
            }
            let oracle = match numeric_minimize_oracle(&pr, 100_000) {
                Ok(o) => o,
                Err(e) => return Some(format!("{m},{n},{k},{p}: oracle {e}")),
            };
            if oracle.objective < sol.objective() * (1.0 - 1e-9) {
                return Some(format!("{m},{n},{k},{p}: oracle {} below analytic {}", oracle.objective, sol.objective()));
            }
            let adjacent = match kind {
                Kind::FirstBoundary if p * k * k != m * n => Some((RegimeTag::OneD, RegimeTag::TwoD)),
                Kind::SecondBoundary if p * n != m => Some((RegimeTag::TwoD, RegimeTag::ThreeD)),
                _ => None,
            };
            if let Some((lo, hi)) = adjacent {
                let (a, b) = (case_solution(&pr, lo), case_solution(&pr, hi));
                if !coincide(&a, &b) {
                    return Some(format!("{m},{n},{k},{p}: {lo:?} {a:?} vs {hi:?} {b:?}"));
                }
            }
            None
        })
        .collect();
    match failures.first() {
        None => Ok(format!("{} tuples: KKT at 1e-9, oracle (budget 1e5) never below, boundaries coincide at 1e-12", tuples.len())),
        Some(f) => Err(format!("{} of {} tuples failed, first: {f}", failures.len(), tuples.len())),
    }
}

fn projection_oracle() -> Outcome {
    let mut shapes = Vec::new();
    for a in 1..=24u64 {
        for b in 1..=24 / a {
            for c in 1..=24 / (a * b) {
                shapes.push(shape(a, b, c));
            }
        }
    }
    let mut checked = 0u64;
    for s in &shapes {
        let scan = scan_lattice(s).map_err(|e| e.to_string())?;
        ensure(scan.loomis_whitney_violations == 0, || format!("{s}: Loomis-Whitney violated"))?;
        ensure(scan.projection_lb_violations == 0, || format!("{s}: per-array access bound violated"))?;
        for p in 1..=scan.lattice_size() {
            let min = min_from_scan(&scan, p).map_err(|e| e.to_string())?;
            ensure(min.at_least_accessed, || format!("{s}, P={p}: minimum {} < D {}", min.value, min.accessed))?;
            checked += 1;
        }
    }
    let cube = min_from_scan(&scan_lattice(&shape(2, 2, 2)).unwrap(), 2).unwrap();
    let d = 3.0 * 4f64.powf(2.0 / 3.0);
    ensure(cube.value == 8 && 8.0 >= d, || format!("(2,2,2), P=2: minimum {}", cube.value))?;
    let line = min_from_scan(&scan_lattice(&shape(2, 1, 1)).unwrap(), 2).unwrap();
    ensure(line.accessed == Real::Exact(int(3)) && line.value == 3, || format!("(2,1,1), P=2: minimum {} vs D {}", line.value, line.accessed))?;
    Ok(format!("{} shapes, {checked} (shape, P) pairs; (2,2,2)/2 -> 8 >= {d:.4}; (2,1,1)/2 -> 3 = D", shapes.len()))
}

fn per_sender(messages: &[Message], p: usize) -> Vec<u64> {
    let mut sent = vec![0u64; p];
    for m in messages {
        sent[m.from] += m.words;
    }
    sent
}

fn collective_contract() -> Outcome {
    let mut cases = 0;
    for p in 2..=16usize {
        let fiber: Vec<usize> = (0..p).collect();
        for chunk in [1usize, 2, 3, 7, 16] {
            let w = p * chunk;
            let expect = (w - w / p) as u64;
            let pieces: Vec<Vec<i64>> = (0..p).map(|r| vec![r as i64; chunk]).collect();
            let ag = ring_all_gather(&fiber, pieces);
            let logged = per_sender(&ag.messages, p);
            ensure(logged.iter().all(|&s| s == expect), || format!("all-gather p={p} w={w}: {logged:?} != {expect}"))?;
            ensure(ag.received.iter().all(|&r| r == expect), || format!("all-gather p={p} w={w}: received {:?}", ag.received))?;

            let addends: Vec<Vec<i64>> = (0..p).map(|r| vec![r as i64 + 1; w]).collect();
            let rs = ring_reduce_scatter(&fiber, addends).map_err(|e| e.to_string())?;
            let logged = per_sender(&rs.messages, p);
            ensure(logged.iter().all(|&s| s == expect), || format!("reduce-scatter p={p} w={w}: {logged:?} != {expect}"))?;
            cases += 2;
        }
    }
    Ok(format!("{cases} collectives, p = 2..16, every processor sends (1-1/p)w by log accounting"))
}

fn table_constants() -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_mmcomm"))
        .args(["sweep", "--table", "constants", "--format", "csv"])
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || format!("exit status {}", out.status))?;
    let text = String::from_utf8(out.stdout).map_err(|e| e.to_string())?;
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let expected: [(&str, [Option<f64>; 4]); 3] = [
        ("3D", [Some(0.5f64.powf(2.0 / 3.0)), Some(0.5), Some(1.0), Some(3.0)]),
        ("2D", [None, None, Some((2.0f64 / 3.0).sqrt()), Some(2.0)]),
        ("1D", [None, None, Some(16.0 / 25.0), Some(1.0)]),
    ];
    ensure(rows.len() == 3, || format!("expected 3 rows, got {}", rows.len()))?;
    for ((label, values), row) in expected.iter().zip(&rows) {
        ensure(row[0] == *label, || format!("row {row:?} should be {label}"))?;
        for (cell, want) in row[2..6].iter().zip(values) {
            match want {
                None => ensure(cell.is_empty(), || format!("{label}: expected empty cell, got {cell}"))?,
                Some(v) => {
                    let got: f64 = cell.parse().map_err(|_| format!("{label}: bad number {cell}"))?;
                    ensure((got - v).abs() <= 1e-12 * v.abs(), || format!("{label}: {got} != {v}"))?;
                }
            }
        }
    }
    Ok("(1/2)^(2/3), 1/2, 1, 3 / -, -, (2/3)^(1/2), 2 / -, -, 16/25, 1".into())
}

fn boundaries_and_dominance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x626f756e64);
    for _ in 0..1000 {
        let (n, k) = {
            let (_, n, k) = sorted_triple(&mut rng, 100_000);
            (n, k)
        };
        let p = log_uniform(&mut rng, 1, 10_000);
        let s = shape(n * p, n, k);
        let (a, b) = (accessed_data(&s, p, RegimeTag::OneD), accessed_data(&s, p, RegimeTag::TwoD));
        ensure(a.tolerant_eq(&b), || format!("{s}, P={p}: {a} vs {b} at P = m/n"))?;

        let k = log_uniform(&mut rng, 1, 5000);
        let x = log_uniform(&mut rng, 1, 2000);
        let y = x + log_uniform(&mut rng, 1, 2000) - 1;
        let s = shape(k * y, k * x, k);
        let p = x * y;
        let (a, b) = (accessed_data(&s, p, RegimeTag::TwoD), accessed_data(&s, p, RegimeTag::ThreeD));
        ensure(a.tolerant_eq(&b), || format!("{s}, P={p}: {a} vs {b} at P = mn/k^2"))?;
    }

    let mut tested = 0;
    while tested < 1000 {
        let (m, n, k) = sorted_triple(&mut rng, 1_000_000);
        let top = (m as u128 * n as u128 / (k as u128 * k as u128)).min(1 << 40) as u64;
        let p = log_uniform(&mut rng, 1, top.max(1));
        let s = shape(m, n, k);
        let owned = mmcomm::exact::to_f64(&s.owned_words(p));
        let memory = owned * rng.gen_range(0.0f64..20.0).exp();
        let r = lower_bound(&s, p, Some(memory)).map_err(|e| e.to_string())?;
        let md = Real::Approx(r.memory_dependent.expect("memory given"));
        ensure(r.accessed.tolerant_cmp(&md) != Ordering::Less && r.binding == Some(Binding::MemoryIndependent), || {
            format!("{s}, P={p}, M={memory}: memory-dependent {md} exceeds D {}", r.accessed)
        })?;
        tested += 1;
    }
    Ok("D continuous at both boundaries for 1000 shapes; memory-independent term dominates in 1000 samples".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("1 grid reproduction", Duration::from_secs(1), reference_grids),
        ("2 attainment", Duration::from_secs(10), attainment),
        ("3 square case", Duration::from_secs(10), square_case),
        ("4 KKT certification", Duration::from_secs(120), kkt_certification),
        ("5 projection oracle", Duration::from_secs(120), projection_oracle),
        ("6 collective cost", Duration::from_secs(10), collective_contract),
        ("7 constants table", Duration::from_secs(10), table_constants),
        ("8 boundaries and dominance", Duration::from_secs(60), boundaries_and_dominance),
    ];
    let mut failed = 0;
    for (name, limit, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|detail| {
            if elapsed <= limit {
                Ok(detail)
            } else {
                Err(format!("took {elapsed:.2?}, limit {limit:?} ({detail})"))
            }
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {name} [{elapsed:.2?}]: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name} [{elapsed:.2?}]: {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
