//! The `solve`, `validate` and `sweep` flows, generic over the oracle.

use std::time::Instant;

use anyhow::{bail, Context, Result};
use mixedctrl::ccmdp::{Mdp, MdpOracle};
use mixedctrl::dual::{check_optimality, solve_mixed_scalar};
use mixedctrl::scenarios::{edl_scenario, grid_scenario};
use mixedctrl::smpc::SmpcOracle;
use mixedctrl::{
    lagrangian_value, Bounds, Component, DualVector, LagrangianOracle, MixedSolution, PureCandidate,
};
use serde::Serialize;

use crate::config::{Kind, RunConfig, Scenario, SCHEMA_VERSION};
use crate::policy::{MdpIo, PolicyIo, SmpcIo, ToyIo};
use crate::report::{
    trace_csv, write_json, Aggregate, ComponentSummary, DualSummary, MixedSummary, RunReport,
    SavedReport, ValidationReport,
};

/// Error with the process exit status it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn config(error: anyhow::Error) -> Self {
        Self { code: 2, error }
    }

    pub fn solve(error: anyhow::Error) -> Self {
        Self { code: 1, error }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Validate,
    Sweep,
}

/// A config turned into something an oracle can be built on.
enum Built {
    Toy(mixedctrl::scenarios::FiniteSetOracle),
    Mdp(Mdp, f64),
    Smpc(Box<SmpcOracle>),
}

fn build(config: &RunConfig) -> Result<Built> {
    Ok(match &config.scenario {
        Scenario::Toy(o) => Built::Toy(o.clone()),
        Scenario::Grid(s) => Built::Mdp(grid_scenario(s)?, s.v),
        Scenario::Edl(s) => Built::Mdp(edl_scenario(s)?, s.v),
        Scenario::Smpc { model, pwl, config } => Built::Smpc(Box::new(SmpcOracle::with_config(
            model.clone(),
            pwl.clone(),
            *config,
        )?)),
    })
}

#[derive(Debug, Default, Serialize)]
struct Timing {
    build_seconds: f64,
    solve_seconds: f64,
    check_seconds: f64,
    total_seconds: f64,
}

pub fn execute(command: Command, config: &RunConfig) -> Result<(), Failure> {
    let start = Instant::now();
    let built = build(config).map_err(Failure::config)?;
    let build_seconds = start.elapsed().as_secs_f64();
    std::fs::create_dir_all(&config.out)
        .with_context(|| format!("cannot create {}", config.out.display()))
        .map_err(Failure::solve)?;
    let run = |timing: &mut Timing| -> Result<()> {
        match &built {
            Built::Toy(o) => dispatch(command, config, o, &o.bounds, &ToyIo, timing),
            Built::Mdp(mdp, v) => {
                let o = MdpOracle::new(mdp, *v);
                dispatch(command, config, &o, &o.bounds, &MdpIo { mdp }, timing)
            }
            Built::Smpc(o) => dispatch(command, config, o.as_ref(), &o.bounds, &SmpcIo { oracle: o }, timing),
        }
    };
    let mut timing = Timing { build_seconds, ..Default::default() };
    run(&mut timing).map_err(Failure::solve)?;
    if command == Command::Solve {
        timing.total_seconds = start.elapsed().as_secs_f64();
        write_json(&config.out.join("timing.json"), &timing).map_err(Failure::solve)?;
    }
    Ok(())
}

fn dispatch<O, I>(
    command: Command,
    config: &RunConfig,
    oracle: &O,
    bounds: &Bounds,
    io: &I,
    timing: &mut Timing,
) -> Result<()>
where
    O: LagrangianOracle,
    I: PolicyIo<O::Policy>,
{
    match command {
        Command::Solve => solve(config, oracle, bounds, io, timing),
        Command::Validate => validate(config, oracle, bounds, io),
        Command::Sweep => sweep(config, oracle, bounds),
    }
}

fn summary<P>(id: &str, c: &PureCandidate<P>, probability: f64) -> ComponentSummary {
    ComponentSummary {
        policy: id.to_string(),
        probability,
        cost: c.cost.c0,
        risk: c.cost.c1(),
    }
}

fn solve<O, I>(config: &RunConfig, oracle: &O, bounds: &Bounds, io: &I, timing: &mut Timing) -> Result<()>
where
    O: LagrangianOracle,
    I: PolicyIo<O::Policy>,
{
    let out = &config.out;
    let tol = config.solver.optimality_tol;
    let t = Instant::now();
    let (res, mixed) = solve_mixed_scalar(oracle, bounds, &config.solver.dual())?;
    timing.solve_seconds = t.elapsed().as_secs_f64();
    io.gate(&mixed)?;
    let pure = if res.lambda_star == 0.0 { &res.lower } else { &res.upper };
    if mixed.aggregate.c0 > pure.cost.c0 + tol * pure.cost.c0.abs().max(1.0) {
        bail!(
            "mixed cost {} exceeds the pure cost {}; the oracle is not an exact minimizer",
            mixed.aggregate.c0,
            pure.cost.c0
        );
    }
    let t = Instant::now();
    let optimality = check_optimality(&mixed, bounds, oracle, tol);
    let monte_carlo = io.monte_carlo(&mixed, &config.monte_carlo)?;
    timing.check_seconds = t.elapsed().as_secs_f64();

    let pure_file = io.file_name("pure");
    io.write(&pure.policy, &out.join(&pure_file))?;
    let mut components = Vec::new();
    for (i, c) in mixed.components.iter().enumerate() {
        let file = io.file_name(&format!("component_{i}"));
        io.write(&c.candidate.policy, &out.join(&file))?;
        components.push(summary(&file, &c.candidate, c.probability));
    }
    std::fs::write(out.join("dual_trace.csv"), trace_csv(&res.trace))?;
    let report = RunReport {
        schema: SCHEMA_VERSION,
        kind: config.kind,
        status: if optimality.overall { "optimal" } else { "not_optimal" },
        bound: bounds.v[0],
        dual: DualSummary {
            lambda_star: res.lambda_star,
            lambda_lower: res.lambda_lower,
            lambda_upper: res.lambda_upper,
            q_star: res.q_star,
            iterations: res.iterations,
            converged: res.converged,
        },
        pure: summary(&pure_file, pure, 1.0),
        mixed: MixedSummary {
            components,
            aggregate: Aggregate { cost: mixed.aggregate.c0, risk: mixed.aggregate.c1() },
            gap_estimate: mixed.gap_estimate,
        },
        optimality,
        monte_carlo,
    };
    write_json(&out.join("report.json"), &report)?;
    println!(
        "{} λ* = {}  mixture {:?}  cost {}  risk {}  (pure cost {})",
        report.status,
        report.dual.lambda_star,
        mixed.probabilities(),
        report.mixed.aggregate.cost,
        report.mixed.aggregate.risk,
        report.pure.cost
    );
    if let Some(mc) = &report.monte_carlo {
        println!("monte carlo: rate {} over {} samples, consistent: {}", mc.failure_rate, mc.n, mc.consistent);
    }
    Ok(())
}

fn validate<O, I>(config: &RunConfig, oracle: &O, bounds: &Bounds, io: &I) -> Result<()>
where
    O: LagrangianOracle,
    I: PolicyIo<O::Policy>,
{
    let out = &config.out;
    let path = out.join("report.json");
    let text = std::fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
    let saved: SavedReport = serde_json::from_str(&text).context("saved report is malformed")?;
    if saved.kind != config.kind {
        bail!("report was written for {:?}, config is {:?}", saved.kind, config.kind);
    }
    let tol = config.solver.optimality_tol;
    let mut components = Vec::new();
    let mut costs_match = true;
    for c in &saved.mixed.components {
        let policy = io.read(&out.join(&c.policy))?;
        let cost = oracle.evaluate(&policy)?;
        costs_match &= (cost.c0 - c.cost).abs() <= tol * c.cost.abs().max(1.0)
            && (cost.c1() - c.risk).abs() <= tol;
        components.push(Component { candidate: PureCandidate::new(policy, cost), probability: c.probability });
    }
    let mixed = MixedSolution::new(components, DualVector::scalar(saved.dual.lambda_star), saved.mixed.gap_estimate)?;
    let optimality = check_optimality(&mixed, bounds, oracle, tol);
    let monte_carlo = io.monte_carlo(&mixed, &config.monte_carlo)?;
    let passed = costs_match && optimality.overall && monte_carlo.as_ref().is_none_or(|m| m.consistent);
    let report = ValidationReport { kind: config.kind, costs_match, optimality, monte_carlo, passed };
    write_json(&out.join("validation.json"), &report)?;
    println!(
        "costs match: {}  optimality: {}  monte carlo: {}",
        report.costs_match,
        if report.optimality.overall { "pass".to_string() } else { format!("fail {:?}", report.optimality.failed()) },
        report.monte_carlo.as_ref().map_or("skipped", |m| if m.consistent { "pass" } else { "fail" })
    );
    if !passed {
        bail!("validation failed");
    }
    Ok(())
}

fn sweep<O: LagrangianOracle>(config: &RunConfig, oracle: &O, bounds: &Bounds) -> Result<()> {
    let mut csv = String::from("lambda,c0,c1,lagrangian_value\n");
    for lambda in config.sweep.grid()? {
        let dual = DualVector::scalar(lambda);
        let cand = oracle.query(&dual)?;
        let q = lagrangian_value(&cand.cost, &dual, bounds)?;
        csv.push_str(&format!("{lambda},{},{},{q}\n", cand.cost.c0, cand.cost.c1()));
    }
    std::fs::write(config.out.join("sweep.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Toy => "toy",
            Kind::Grid => "grid",
            Kind::Edl => "edl",
            Kind::Smpc => "smpc",
        }
    }
}
