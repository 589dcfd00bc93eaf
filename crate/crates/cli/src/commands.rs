//! The five subcommands. Each renders its result in the configured format.

use std::cmp::Ordering;

use mmcomm::exact::{int, Real};
use mmcomm::grid::{analytic_grid, comm_cost, exhaustive_grid, AnalyticGrid, GridChoice, ProcessorGrid};
use mmcomm::kkt::{analytic_solution, kkt_verify, numeric_minimize_oracle, quasiconvexity_check, OptProblem, STATIONARITY_TOL};
use mmcomm::model::{lower_bound, prior_constants, BoundReport, ProblemShape, RegimeTag};
use mmcomm::projection::{min_from_scan, scan_lattice};
use mmcomm::sim::{compare_to_prediction, run_algorithm, Phase};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::{CommandKind, Format, RunConfig, Table};
use crate::error::{CliError, CliResult};
use crate::output::{csv_text, human_lines, json_text, put_rational, put_real, yes_no};

/// Oracle budget used by `verify`.
pub const ORACLE_BUDGET: usize = 100_000;
/// Random pairs drawn by the quasiconvexity check in `verify`.
pub const QUASICONVEX_SAMPLES: usize = 10_000;

/// Rendered output, plus a failure to report after it has been written.
#[derive(Debug)]
pub struct Outcome {
    pub text: String,
    pub failure: Option<CliError>,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Outcome { text, failure: None }
    }
}

pub fn run(cfg: &RunConfig) -> CliResult<Outcome> {
    match cfg.command {
        CommandKind::Bound => cmd_bound(cfg),
        CommandKind::Grid => cmd_grid(cfg),
        CommandKind::Simulate => cmd_simulate(cfg),
        CommandKind::Verify => cmd_verify(cfg),
        CommandKind::Sweep => cmd_sweep(cfg),
    }
}

fn shape_json(shape: &ProblemShape) -> Value {
    json!({ "n1": shape.n1, "n2": shape.n2, "n3": shape.n3 })
}

fn grid_json(grid: &ProcessorGrid) -> Value {
    json!({ "p1": grid.p1, "p2": grid.p2, "p3": grid.p3 })
}

fn sorted_label(shape: &ProblemShape) -> String {
    let (m, n, k) = shape.sorted();
    format!("m={m} n={n} k={k}")
}

pub fn cmd_bound(cfg: &RunConfig) -> CliResult<Outcome> {
    let shape = cfg.require_shape()?;
    let procs = cfg.require_single_procs()?;
    let r = lower_bound(&shape, procs, cfg.memory)?;
    let binding = r.binding.map(|b| format!("{b:?}"));

    let text = match cfg.format {
        Format::Human => {
            let mut lines = vec![
                ("shape", format!("{shape} ({})", sorted_label(&shape))),
                ("processors", procs.to_string()),
                ("regime", r.regime.to_string()),
                ("accessed D", r.accessed.to_string()),
                ("owned", mmcomm::exact::decimal_string(&r.owned)),
                ("lower bound", r.lower_bound.to_string()),
            ];
            if let (Some(mem), Some(md)) = (cfg.memory, r.memory_dependent) {
                lines.push(("memory M", mem.to_string()));
                lines.push(("2mnk/(P sqrt M)", md.to_string()));
                lines.push(("binding", binding.clone().unwrap_or_default()));
            }
            if r.exceeds_work {
                lines.push(("note", "P exceeds the number of multiplications".into()));
            }
            human_lines(&lines)
        }
        Format::Json => json_text(&bound_json(&r, cfg.memory)),
        Format::Csv => csv_text(
            &[
                "n1", "n2", "n3", "procs", "regime", "on_boundary", "accessed", "owned", "lower_bound", "memory",
                "memory_dependent", "binding", "exceeds_work",
            ],
            &[vec![
                shape.n1.to_string(),
                shape.n2.to_string(),
                shape.n3.to_string(),
                procs.to_string(),
                r.regime.tag.label().into(),
                r.regime.on_boundary.to_string(),
                r.accessed.decimal(),
                mmcomm::exact::decimal_string(&r.owned),
                r.lower_bound.decimal(),
                cfg.memory.map(|m| m.to_string()).unwrap_or_default(),
                r.memory_dependent.map(|m| m.to_string()).unwrap_or_default(),
                binding.unwrap_or_default(),
                r.exceeds_work.to_string(),
            ]],
        )?,
    };
    Ok(Outcome::ok(text))
}

fn bound_json(r: &BoundReport, memory: Option<f64>) -> Value {
    let mut obj = Map::new();
    obj.insert("shape".into(), shape_json(&r.shape));
    obj.insert("procs".into(), json!(r.procs));
    obj.insert("regime".into(), json!(r.regime.tag.label()));
    obj.insert("on_boundary".into(), json!(r.regime.on_boundary));
    put_real(&mut obj, "accessed", &r.accessed);
    put_rational(&mut obj, "owned", &r.owned);
    put_real(&mut obj, "lower_bound", &r.lower_bound);
    obj.insert("memory".into(), json!(memory));
    obj.insert("memory_dependent".into(), json!(r.memory_dependent));
    obj.insert("binding".into(), json!(r.binding));
    obj.insert("exceeds_work".into(), json!(r.exceeds_work));
    Value::Object(obj)
}

struct GridSummary {
    analytic: AnalyticGrid,
    analytic_cost: Option<mmcomm::grid::CostBreakdown>,
    best: GridChoice,
    dividing: Option<GridChoice>,
    bound: Real,
}

impl GridSummary {
    fn new(shape: &ProblemShape, procs: u64) -> CliResult<Self> {
        let analytic = analytic_grid(shape, procs)?;
        let analytic_cost = analytic.grid().map(|g| comm_cost(shape, &g));
        let best = exhaustive_grid(shape, procs, false)?;
        let dividing = exhaustive_grid(shape, procs, true).ok();
        let bound = lower_bound(shape, procs, None)?.lower_bound;
        Ok(GridSummary { analytic, analytic_cost, best, dividing, bound })
    }

    fn agree(&self) -> bool {
        self.analytic_cost.as_ref().is_some_and(|c| c.total == self.best.cost.total)
    }

    fn analytic_label(&self) -> String {
        match &self.analytic {
            AnalyticGrid::Integral(g) => g.to_string(),
            AnalyticGrid::NonIntegral { .. } => "non-integral".into(),
        }
    }
}

pub fn cmd_grid(cfg: &RunConfig) -> CliResult<Outcome> {
    let shape = cfg.require_shape()?;
    let procs = cfg.require_single_procs()?;
    let s = GridSummary::new(&shape, procs)?;
    let dec = mmcomm::exact::decimal_string;

    let text = match cfg.format {
        Format::Human => {
            let analytic = match (&s.analytic, &s.analytic_cost) {
                (AnalyticGrid::Integral(g), Some(c)) => format!("{g} (cost {})", dec(&c.total)),
                (AnalyticGrid::NonIntegral { factors, fractional_axes }, _) => format!(
                    "non-integral: factors ({:.6}, {:.6}, {:.6}), fractional axes {}",
                    factors[0],
                    factors[1],
                    factors[2],
                    fractional_axes.iter().map(|a| format!("p{a}")).collect::<Vec<_>>().join(" ")
                ),
                _ => unreachable!("integral grids always have a cost"),
            };
            let dividing = match &s.dividing {
                Some(d) => format!("{} (cost {})", d.grid, dec(&d.cost.total)),
                None => "none".into(),
            };
            human_lines(&[
                ("shape", format!("{shape} ({})", sorted_label(&shape))),
                ("processors", procs.to_string()),
                ("analytic grid", analytic),
                ("exhaustive grid", format!("{} (cost {})", s.best.grid, dec(&s.best.cost.total))),
                ("best dividing grid", dividing),
                ("agree", yes_no(s.agree()).into()),
                ("lower bound", s.bound.to_string()),
            ])
        }
        Format::Json => {
            let mut analytic = Map::new();
            match &s.analytic {
                AnalyticGrid::Integral(g) => {
                    analytic.insert("integral".into(), json!(true));
                    analytic.insert("grid".into(), grid_json(g));
                    put_rational(&mut analytic, "cost", &s.analytic_cost.as_ref().expect("integral").total);
                }
                AnalyticGrid::NonIntegral { factors, fractional_axes } => {
                    analytic.insert("integral".into(), json!(false));
                    analytic.insert("grid".into(), Value::Null);
                    analytic.insert("factors".into(), json!(factors));
                    analytic.insert("fractional_axes".into(), json!(fractional_axes));
                }
            }
            let choice = |c: &GridChoice| {
                let mut o = Map::new();
                o.insert("grid".into(), grid_json(&c.grid));
                put_rational(&mut o, "cost", &c.cost.total);
                o.insert("divides".into(), json!(c.grid.divides(&shape)));
                Value::Object(o)
            };
            let mut obj = Map::new();
            obj.insert("shape".into(), shape_json(&shape));
            obj.insert("procs".into(), json!(procs));
            obj.insert("analytic".into(), Value::Object(analytic));
            obj.insert("exhaustive".into(), choice(&s.best));
            obj.insert("dividing".into(), s.dividing.as_ref().map_or(Value::Null, choice));
            obj.insert("agree".into(), json!(s.agree()));
            put_real(&mut obj, "lower_bound", &s.bound);
            json_text(&Value::Object(obj))
        }
        Format::Csv => csv_text(
            &["n1", "n2", "n3", "procs", "analytic_grid", "analytic_cost", "exhaustive_grid", "exhaustive_cost", "agree", "lower_bound"],
            &[vec![
                shape.n1.to_string(),
                shape.n2.to_string(),
                shape.n3.to_string(),
                procs.to_string(),
                s.analytic_label(),
                s.analytic_cost.as_ref().map(|c| dec(&c.total)).unwrap_or_default(),
                s.best.grid.to_string(),
                dec(&s.best.cost.total),
                s.agree().to_string(),
                s.bound.decimal(),
            ]],
        )?,
    };
    Ok(Outcome::ok(text))
}

pub fn cmd_simulate(cfg: &RunConfig) -> CliResult<Outcome> {
    let shape = cfg.require_shape()?;
    let grid = match (cfg.grid, cfg.procs) {
        (Some(g), Some(range)) => {
            if range.single() != Some(g.procs()) {
                return Err(CliError::Config(format!("grid {g} has {} processors, --procs is {range}", g.procs())));
            }
            g
        }
        (Some(g), None) => g,
        (None, _) => exhaustive_grid(&shape, cfg.require_single_procs()?, true)?.grid,
    };
    let report = run_algorithm(&shape, &grid, cfg.seed)?;
    let check = compare_to_prediction(&report);
    let bound = lower_bound(&shape, grid.procs(), None)?.lower_bound;
    let measured = Real::Exact(int(report.critical_path_words));
    let attains = measured.tolerant_eq(&bound);
    let dec = mmcomm::exact::decimal_string;

    let text = match cfg.format {
        Format::Human => {
            let mut lines = vec![
                ("shape", shape.to_string()),
                ("grid", grid.to_string()),
                ("seed", cfg.seed.to_string()),
            ];
            let phase_lines: Vec<(String, String)> = report
                .phases
                .iter()
                .map(|p| (p.phase.name().to_string(), format!("max {} words sent", p.max_sent)))
                .collect();
            for (name, value) in &phase_lines {
                lines.push((name.as_str(), value.clone()));
            }
            lines.extend([
                ("critical path words", report.critical_path_words.to_string()),
                ("predicted words", dec(&report.predicted.total)),
                ("lower bound", bound.to_string()),
                ("attains bound", yes_no(attains).into()),
                ("matches prediction", yes_no(check.exact()).into()),
                ("max flops", report.flops_per_proc().iter().max().copied().unwrap_or(0).to_string()),
                ("product correct", yes_no(report.correct).into()),
            ]);
            human_lines(&lines)
        }
        Format::Json => {
            let mut v = report.to_json();
            let obj = v.as_object_mut().expect("report serializes to an object");
            put_real(obj, "lower_bound", &bound);
            obj.insert("attains_bound".into(), json!(attains));
            obj.insert("matches_prediction".into(), json!(check.exact()));
            obj.insert("within_split_tolerance".into(), json!(check.within_bounds()));
            json_text(&v)
        }
        Format::Csv => csv_text(
            &[
                "n1", "n2", "n3", "p1", "p2", "p3", "seed", "words_a", "words_b", "words_c", "critical_path_words",
                "predicted_total", "lower_bound", "attains_bound", "correct",
            ],
            &[vec![
                shape.n1.to_string(),
                shape.n2.to_string(),
                shape.n3.to_string(),
                grid.p1.to_string(),
                grid.p2.to_string(),
                grid.p3.to_string(),
                cfg.seed.to_string(),
                report.phase(Phase::GatherA).max_sent.to_string(),
                report.phase(Phase::GatherB).max_sent.to_string(),
                report.phase(Phase::ReduceScatterC).max_sent.to_string(),
                report.critical_path_words.to_string(),
                dec(&report.predicted.total),
                bound.decimal(),
                attains.to_string(),
                report.correct.to_string(),
            ]],
        )?,
    };
    Ok(Outcome::ok(text))
}

struct Check {
    name: String,
    passed: bool,
    detail: String,
}

pub fn cmd_verify(cfg: &RunConfig) -> CliResult<Outcome> {
    let shape = cfg.require_shape()?;
    let procs = cfg.require_single_procs()?;
    let problem = OptProblem::from_shape(&shape, procs)?;
    let sol = analytic_solution(&problem);
    let mut checks = Vec::new();

    let kkt = kkt_verify(&problem, &sol, STATIONARITY_TOL);
    for (name, c) in kkt.conditions() {
        checks.push(Check {
            name: format!("kkt {name}"),
            passed: c.passed,
            detail: format!("residual {:e} (component {})", c.residual, c.worst + 1),
        });
    }

    let optimum = sol.objective();
    let oracle = numeric_minimize_oracle(&problem, ORACLE_BUDGET)?;
    checks.push(Check {
        name: "numeric oracle".into(),
        passed: oracle.objective >= optimum * (1.0 - STATIONARITY_TOL),
        detail: format!("best feasible {} vs analytic {} ({} evaluations)", oracle.objective, optimum, oracle.evaluations),
    });

    let qc = quasiconvexity_check(QUASICONVEX_SAMPLES, cfg.seed);
    checks.push(Check {
        name: "quasiconvexity".into(),
        passed: qc.passed(),
        detail: format!("{} of {} pairs tested", qc.tested, qc.samples),
    });

    if cfg.tiny {
        let scan = scan_lattice(&shape)?;
        let min = min_from_scan(&scan, procs)?;
        checks.push(Check {
            name: "projection minimum".into(),
            passed: min.at_least_accessed,
            detail: format!("min projection sum {} vs D {}", min.value, min.accessed),
        });
        checks.push(Check {
            name: "loomis-whitney".into(),
            passed: scan.loomis_whitney_violations == 0,
            detail: format!("{} violations over {} subsets", scan.loomis_whitney_violations, scan.subsets()),
        });
        checks.push(Check {
            name: "per-array access".into(),
            passed: scan.projection_lb_violations == 0,
            detail: format!("{} violations over {} subsets", scan.projection_lb_violations, scan.subsets()),
        });
    }

    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    let failure = (!failed.is_empty()).then(|| CliError::Verification(failed.join(", ")));

    let text = match cfg.format {
        Format::Human => {
            let mut out = human_lines(&[
                ("shape", format!("{shape} ({})", sorted_label(&shape))),
                ("processors", procs.to_string()),
                ("case", sol.case.label().into()),
                ("optimum x", format!("({}, {}, {})", sol.x[0], sol.x[1], sol.x[2])),
                ("optimum value", optimum.to_string()),
            ]);
            for c in &checks {
                out.push_str(&format!("{} {}: {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail));
            }
            out
        }
        Format::Json => json_text(&json!({
            "shape": shape_json(&shape),
            "procs": procs,
            "case": sol.case.label(),
            "optimum": { "x": sol.x, "mu": sol.mu, "value": optimum },
            "checks": checks.iter().map(|c| json!({ "name": c.name, "passed": c.passed, "detail": c.detail })).collect::<Vec<_>>(),
            "passed": failed.is_empty(),
        })),
        Format::Csv => csv_text(
            &["check", "passed", "detail"],
            &checks.iter().map(|c| vec![c.name.clone(), c.passed.to_string(), c.detail.clone()]).collect::<Vec<_>>(),
        )?,
    };
    Ok(Outcome { text, failure })
}

/// One row of a sweep over `P`.
pub struct SweepRow {
    pub procs: u64,
    pub report: BoundReport,
    pub grids: GridRow,
}

pub struct GridRow {
    analytic: Option<ProcessorGrid>,
    best: GridChoice,
}

impl SweepRow {
    pub fn new(shape: &ProblemShape, procs: u64) -> CliResult<Self> {
        let report = lower_bound(shape, procs, None)?;
        let analytic = analytic_grid(shape, procs)?.grid();
        let best = exhaustive_grid(shape, procs, false)?;
        Ok(SweepRow { procs, report, grids: GridRow { analytic, best } })
    }

    pub fn attains(&self) -> bool {
        Real::Exact(self.grids.best.cost.total.clone()).tolerant_cmp(&self.report.lower_bound) == Ordering::Equal
    }
}

pub fn sweep_rows(shape: &ProblemShape, lo: u64, hi: u64) -> CliResult<Vec<SweepRow>> {
    (lo..=hi).into_par_iter().map(|p| SweepRow::new(shape, p)).collect()
}

pub fn cmd_sweep(cfg: &RunConfig) -> CliResult<Outcome> {
    if cfg.table == Some(Table::Constants) {
        return constants_table(cfg.format).map(Outcome::ok);
    }
    let shape = cfg.require_shape()?;
    let range = cfg.require_range()?;
    let rows = sweep_rows(&shape, range.lo, range.hi)?;
    let (m, n, k) = shape.sorted();
    let first = mmcomm::exact::rat(m, n);
    let second = mmcomm::exact::rat(m * n, k * k);
    let dec = mmcomm::exact::decimal_string;
    let analytic_label = |r: &SweepRow| r.grids.analytic.map_or("non-integral".into(), |g| g.to_string());

    let header = [
        "procs", "regime", "on_boundary", "accessed", "owned", "lower_bound", "analytic_grid", "exhaustive_grid", "cost",
        "attains_bound",
    ];
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.procs.to_string(),
                r.report.regime.tag.label().into(),
                r.report.regime.on_boundary.to_string(),
                r.report.accessed.decimal(),
                dec(&r.report.owned),
                r.report.lower_bound.decimal(),
                analytic_label(r),
                r.grids.best.grid.to_string(),
                dec(&r.grids.best.cost.total),
                r.attains().to_string(),
            ]
        })
        .collect();

    let text = match cfg.format {
        Format::Csv => csv_text(&header, &table)?,
        Format::Human => {
            let mut out = format!(
                "shape {shape} ({}), regime boundaries at P = m/n = {} and P = mn/k^2 = {}\n",
                sorted_label(&shape),
                dec(&first),
                dec(&second)
            );
            let widths: Vec<usize> = (0..header.len())
                .map(|c| table.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
                .collect();
            let line = |cells: &[&str]| {
                let mut s = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect::<Vec<_>>().join("  ");
                s.truncate(s.trim_end().len());
                s.push('\n');
                s
            };
            out.push_str(&line(&header));
            for row in &table {
                out.push_str(&line(&row.iter().map(String::as_str).collect::<Vec<_>>()));
            }
            out
        }
        Format::Json => {
            let rows_json: Vec<Value> = rows
                .iter()
                .map(|r| {
                    let mut o = Map::new();
                    o.insert("procs".into(), json!(r.procs));
                    o.insert("regime".into(), json!(r.report.regime.tag.label()));
                    o.insert("on_boundary".into(), json!(r.report.regime.on_boundary));
                    put_real(&mut o, "accessed", &r.report.accessed);
                    put_rational(&mut o, "owned", &r.report.owned);
                    put_real(&mut o, "lower_bound", &r.report.lower_bound);
                    o.insert("analytic_grid".into(), r.grids.analytic.as_ref().map_or(Value::Null, grid_json));
                    o.insert("exhaustive_grid".into(), grid_json(&r.grids.best.grid));
                    put_rational(&mut o, "cost", &r.grids.best.cost.total);
                    o.insert("attains_bound".into(), json!(r.attains()));
                    Value::Object(o)
                })
                .collect();
            let mut boundaries = Map::new();
            put_rational(&mut boundaries, "one_two", &first);
            put_rational(&mut boundaries, "two_three", &second);
            json_text(&json!({
                "shape": shape_json(&shape),
                "boundaries": boundaries,
                "rows": rows_json,
            }))
        }
    };
    Ok(Outcome::ok(text))
}

fn constants_table(format: Format) -> CliResult<String> {
    let rows: Vec<_> = [RegimeTag::ThreeD, RegimeTag::TwoD, RegimeTag::OneD].into_iter().map(prior_constants).collect();
    let cell = |v: Option<f64>| v.map(|x| x.to_string());
    Ok(match format {
        Format::Json => json_text(&json!({
            "rows": rows.iter().map(|r| json!({
                "regime": r.regime.label(),
                "leading_term": r.leading_term,
                "acs90": r.acs90,
                "itt04": r.itt04,
                "de13": r.de13,
                "this_work": r.this_work,
            })).collect::<Vec<_>>(),
        })),
        Format::Csv => csv_text(
            &["regime", "leading_term", "acs90", "itt04", "de13", "this_work"],
            &rows
                .iter()
                .map(|r| {
                    vec![
                        r.regime.label().into(),
                        r.leading_term.into(),
                        cell(r.acs90).unwrap_or_default(),
                        cell(r.itt04).unwrap_or_default(),
                        cell(r.de13).unwrap_or_default(),
                        r.this_work.to_string(),
                    ]
                })
                .collect::<Vec<_>>(),
        )?,
        Format::Human => {
            let mut out = format!("{:<7}{:<18}{:<22}{:<8}{:<22}{}\n", "regime", "leading term", "acs90", "itt04", "de13", "this work");
            for r in &rows {
                let show = |v: Option<f64>| cell(v).unwrap_or_else(|| "-".into());
                out.push_str(&format!(
                    "{:<7}{:<18}{:<22}{:<8}{:<22}{}\n",
                    r.regime.label(),
                    r.leading_term,
                    show(r.acs90),
                    show(r.itt04),
                    show(r.de13),
                    r.this_work
                ));
            }
            out
        }
    })
}
