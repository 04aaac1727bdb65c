use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use fincrash::costpoly::{CostModel, CostOptions};
use fincrash::isingcompile::{compile as compile_program, estimate_resources, CompileOptions, ResourceEstimate, GadgetScale, IsingProgram, Qubo};
use fincrash::netmodel::{
    enumerate_equilibria, failure_sweep_with, linear_market_values, perturb_with_noise, random_network, read_network,
    solve_with_policy, transition_window, unit_noise, write_network, write_sweep_csv, EquilibriumPolicy,
    FinancialNetwork, NetworkFile, RandomNetworkParams,
};
use fincrash::solvers::{decode_solution, solve_anneal, solve_exhaustive, AnnealSchedule, SolveMethod};
use fincrash::stepapprox::{approximation_grid, build_step_approximant, l2_error, sup_error};
use fincrash::{Error, Result};

use crate::config::{parse_amplitudes, parse_orders, RunConfig};
use crate::{ApproxGridArgs, CompileArgs, EquilibriumArgs, GenerateArgs, ResourcesArgs, SolveArgs, SweepArgs};

/// Programs up to this many spins are solved exhaustively unless a method
/// is forced.
const AUTO_EXHAUSTIVE_SPINS: usize = 20;

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// `path` with `suffix` appended to the file name.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Puts `config` first in a JSON object.
fn with_config(cfg: &RunConfig, body: impl Serialize) -> Result<Value> {
    let mut out = serde_json::Map::new();
    out.insert("config".into(), cfg.to_value());
    match serde_json::to_value(body)? {
        Value::Object(fields) => out.extend(fields),
        other => {
            out.insert("value".into(), other);
        }
    }
    Ok(Value::Object(out))
}

fn emit_json(out: Option<&Path>, v: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(v)? + "\n";
    match out {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn comment_block(cfg: &RunConfig) -> String {
    format!("# {}\n", cfg.comment())
}

pub fn generate(a: &GenerateArgs) -> Result<()> {
    let cfg = RunConfig::new("generate", a);
    let params = RandomNetworkParams {
        n: a.n,
        m: a.m,
        min_self_ownership: a.min_self,
        price_range: (0.0, a.price_max),
        beta_frac: a.beta_frac,
        theta: a.theta,
        seed: a.seed,
    };
    let net: FinancialNetwork<f64> = random_network(&params)?;
    write_network(&net, &a.out, Some(cfg.to_value()))
}

fn shocked_network(path: &Path, amplitude: f64, seed: u64) -> Result<FinancialNetwork<f64>> {
    let net: FinancialNetwork<f64> = read_network(path)?;
    if amplitude == 0.0 {
        return Ok(net);
    }
    perturb_with_noise(&net, amplitude, &unit_noise(net.m(), seed))
}

pub fn equilibrium(a: &EquilibriumArgs) -> Result<()> {
    let cfg = RunConfig::new("equilibrium", a);
    let net = shocked_network(&a.network, a.amplitude, a.seed)?;
    let policy: EquilibriumPolicy = a.policy.into();
    let state = solve_with_policy(&net, policy)?;
    let all = if a.enumerate { Some(enumerate_equilibria(&net)?) } else { None };
    let body = json!({
        "policy": policy,
        "amplitude": a.amplitude,
        "seed": a.seed,
        "prices": net.prices(),
        "linear_values": linear_market_values(&net)?,
        "failure_count": state.failure_count(),
        "state": state,
        "equilibria": all,
    });
    emit_json(a.out.as_deref(), &with_config(&cfg, body)?)
}

pub fn sweep(a: &SweepArgs) -> Result<()> {
    let cfg = RunConfig::new("sweep", a);
    let amplitudes = parse_amplitudes(&a.amplitudes)?;
    let net: FinancialNetwork<f64> = read_network(&a.network)?;
    let rows = failure_sweep_with(&net, &amplitudes, a.policy.into(), a.seed, a.noise.into())?;
    let mut csv = Vec::new();
    write_sweep_csv(&rows, &mut csv, Some(&cfg.comment())).expect("writing to memory");
    write_file(&a.out, csv)?;

    let window = transition_window(&rows, net.n());
    let unconverged: Vec<f64> = rows.iter().filter(|r| !r.converged).map(|r| r.amplitude).collect();
    let body = json!({
        "n": net.n(),
        "rows": rows.len(),
        "max_failures": rows.iter().filter_map(|r| r.failure_count).max(),
        "unconverged_amplitudes": unconverged,
        "transition": window,
    });
    let summary = a.summary.clone().unwrap_or_else(|| sibling(&a.out, ".summary.json"));
    emit_json(Some(&summary), &with_config(&cfg, body)?)
}

pub fn approx_grid(a: &ApproxGridArgs) -> Result<()> {
    let cfg = RunConfig::new("approx-grid", a);
    let orders = parse_orders(&a.orders)?;
    if a.points < 2 {
        return Err(invalid("points", "need at least 2 grid points"));
    }
    let mut header = comment_block(&cfg);
    let mut body = String::from("order,x,exact,approximant\n");
    for &order in &orders {
        let approx = build_step_approximant::<f64>(order, 0.0, 1.0)?;
        header.push_str(&format!(
            "# order {order} degree {} l2_error {:.6e} sup_error_outside_0.1 {:.6e}\n",
            approx.degree(),
            l2_error(&approx),
            sup_error(&approx, 20001, 0.1),
        ));
        for (x, exact, y) in approximation_grid(&approx, a.points) {
            body.push_str(&format!("{order},{x},{exact},{y}\n"));
        }
    }
    write_file(&a.out, header + &body)
}

/// Everything `solve` needs to decode a compiled instance.
#[derive(Serialize, Deserialize)]
struct ProgramBundle {
    config: Value,
    network: NetworkFile<f64>,
    model: CostModel<f64>,
    compile_options: CompileOptions,
    program: IsingProgram<f64>,
}

pub fn compile(a: &CompileArgs) -> Result<()> {
    let cfg = RunConfig::new("compile", a);
    let net: FinancialNetwork<f64> = read_network(&a.network)?;
    let model = CostModel::build(
        &net,
        CostOptions {
            q: a.q,
            order: a.r,
            prune_rel: a.prune_rel,
            ..Default::default()
        },
    )?;
    let options = CompileOptions {
        gamma: a.gamma,
        scale: if a.global_scale { GadgetScale::Global } else { GadgetScale::PerTerm },
        spin_cap: (a.spin_cap > 0).then_some(a.spin_cap),
        ..Default::default()
    };
    let program = compile_program(&model.polynomial, &options)?;

    let qubo = Qubo::from_program(&program);
    write_file(&a.out, qubo.to_text(&[cfg.comment()]))?;
    write_file(&sibling(&a.out, ".poly.txt"), comment_block(&cfg) + &model.polynomial.dump())?;

    let estimate = estimate_resources(net.n(), a.q, a.r, Some(&model.polynomial))?;
    let report = CompileReport {
        estimate: &estimate,
        polynomial_degree: model.polynomial.degree(),
        pruned_terms: model.pruned_terms,
        unrepresentable: &model.unrepresentable,
        num_spins: program.num_spins(),
        num_fields: program.fields.len(),
        num_couplings: program.couplings.len(),
        num_gadgets: program.gadgets.len(),
        resolution: model.encoding.resolution(),
        v_max: model.encoding.v_max_currency(),
    };
    let report = with_config(&cfg, &report)?;
    emit_json(Some(&sibling(&a.out, ".resources.json")), &report)?;

    let bundle = ProgramBundle {
        config: cfg.to_value(),
        network: NetworkFile::from_network(&net, None),
        model,
        compile_options: options,
        program,
    };
    write_file(&sibling(&a.out, ".program.json"), serde_json::to_string(&bundle)? + "\n")
}

#[derive(Serialize)]
struct CompileReport<'a> {
    #[serde(flatten)]
    estimate: &'a ResourceEstimate,
    polynomial_degree: usize,
    pruned_terms: usize,
    unrepresentable: &'a [usize],
    num_spins: usize,
    num_fields: usize,
    num_couplings: usize,
    num_gadgets: usize,
    resolution: f64,
    v_max: f64,
}

struct Loaded {
    source: &'static str,
    program: IsingProgram<f64>,
    decoder: Option<(FinancialNetwork<f64>, CostModel<f64>)>,
}

fn load_for_solve(a: &SolveArgs) -> Result<Loaded> {
    let text = read_file(&a.input)?;
    if text.trim_start().starts_with('{') {
        let bundle: ProgramBundle = serde_json::from_str(&text)?;
        bundle.program.validate()?;
        let net = bundle.network.into_network()?;
        return Ok(Loaded {
            source: "bundle",
            program: bundle.program,
            decoder: Some((net, bundle.model)),
        });
    }
    let program = Qubo::<f64>::parse(&text)?.to_program();
    program.validate()?;
    let decoder = match &a.network {
        Some(path) => {
            let net: FinancialNetwork<f64> = read_network(path)?;
            let model = CostModel::build(
                &net,
                CostOptions {
                    q: a.q,
                    order: a.r,
                    ..Default::default()
                },
            )?;
            if model.num_bits() != program.num_logical {
                return Err(Error::LengthMismatch {
                    expected: program.num_logical,
                    got: model.num_bits(),
                });
            }
            Some((net, model))
        }
        None => None,
    };
    Ok(Loaded {
        source: "qubo",
        program,
        decoder,
    })
}

pub fn solve(a: &SolveArgs) -> Result<()> {
    let cfg = RunConfig::new("solve", a);
    let loaded = load_for_solve(a)?;
    let program = &loaded.program;
    let spins = program.num_spins();
    let method = if a.exhaustive || (!a.anneal && spins <= AUTO_EXHAUSTIVE_SPINS) {
        SolveMethod::Exhaustive
    } else {
        SolveMethod::Anneal
    };

    let start = Instant::now();
    let (mut result, schedule) = match method {
        SolveMethod::Exhaustive => (solve_exhaustive(program)?, None),
        SolveMethod::Anneal => {
            let mut s = AnnealSchedule::default_for(program, a.seed);
            s.restarts = a.restarts.unwrap_or(s.restarts);
            s.steps = a.steps.unwrap_or(s.steps);
            s.sweeps_per_step = a.sweeps.unwrap_or(s.sweeps_per_step);
            (solve_anneal(program, &s)?, Some(s))
        }
    };
    let solve_seconds = start.elapsed().as_secs_f64();

    let mut forecast = Value::Null;
    if let Some((net, model)) = &loaded.decoder {
        let decoded = decode_solution(&result.bits, &model.encoding, net, &model.approximants)?;
        let classical = solve_with_policy(net, EquilibriumPolicy::FromAbove)?;
        forecast = json!({
            "failure_count": decoded.failure_count,
            "failed": decoded.failed,
            "exact_residual": decoded.exact_residual,
            "resolution": model.encoding.resolution(),
            "classical_failure_count": classical.failure_count(),
            "classical_values": classical.v,
            "matches_classical_failures": decoded.failed == classical.failed,
        });
        result.decoded = Some(decoded);
    }
    let body = json!({
        "input": a.input,
        "source": loaded.source,
        "num_spins": spins,
        "num_logical": program.num_logical,
        "num_ancilla": program.num_ancilla,
        "schedule": schedule,
        "result": result,
        "energy_histogram": result.energy_histogram(9),
        "forecast": forecast,
        "timing": { "solve_seconds": solve_seconds },
    });
    emit_json(a.out.as_deref(), &with_config(&cfg, body)?)
}

pub fn resources(a: &ResourcesArgs) -> Result<()> {
    let cfg = RunConfig::new("resources", a);
    let estimate = match &a.network {
        Some(path) => {
            let net: FinancialNetwork<f64> = read_network(path)?;
            let model = CostModel::build(
                &net,
                CostOptions {
                    q: a.q,
                    order: a.r,
                    ..Default::default()
                },
            )?;
            estimate_resources(net.n(), a.q, a.r, Some(&model.polynomial))?
        }
        None => estimate_resources::<f64>(a.n, a.q, a.r, None)?,
    };
    emit_json(a.out.as_deref(), &with_config(&cfg, &estimate)?)
}
