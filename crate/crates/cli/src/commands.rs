use std::fmt::Write as _;
use std::path::Path;

use serde_json::{json, Value};

use edgeimpact_core::graph_model::{
    complete_graph, erdos_renyi, benchmark_preset, grid_graph, path_graph, read_network, write_network,
    ErdosRenyi, NetworkFile,
};
use edgeimpact_core::laplacian_analysis::greedy_grow;
use edgeimpact_core::oracle::{coherence_by_eigenvalues, coherence_monte_carlo, h2_truncated, TruncationConfig};
use edgeimpact_core::report::{
    coherence_csv, coherence_json, delta_reports_csv, delta_reports_json, fmt_num, grow_json,
};
use edgeimpact_core::stable_analysis::{greedy_gramian_improve, sort_reports, ScanOptions};
use edgeimpact_core::{
    EdgeMod, LaplacianKernel, Network, NetworkKind, SpectralCondition, SteadyStateKernel,
};

use crate::output::{emit, json_text, usage, CliResult};
use crate::verify::{self, Verification, DEFAULT_EXACT_TOL, DEFAULT_HINF_TOL};
use crate::{
    CoherenceArgs, Command, Common, ConditionArg, Format, GenKind, GenerateArgs, GrowArgs,
    GrowMode, MarginArgs, NetArgs, ScanArgs, VerifyAllArgs, EXIT_VERIFY,
};

pub fn run(command: Command) -> CliResult<u8> {
    match command {
        Command::Validate(a) => validate(a),
        Command::Scan(a) => scan(a),
        Command::Grow(a) => grow(a),
        Command::Generate(a) => generate(a),
        Command::Coherence(a) => coherence(a),
        Command::Margin(a) => margin(a),
        Command::VerifyAll(a) => verify_all(a),
    }
}

fn setup(common: &Common) -> CliResult<()> {
    if let Some(jobs) = common.jobs {
        if jobs == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| usage(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn load(path: &Path, common: &Common) -> CliResult<Network> {
    setup(common)?;
    Ok(read_network(path)?)
}

/// Print the report to stderr and map failures to the verify exit code.
fn finish_verify(v: Option<Verification>) -> u8 {
    match v {
        Some(v) => {
            eprint!("{}", v.summary());
            if v.passed() {
                0
            } else {
                EXIT_VERIFY
            }
        }
        None => 0,
    }
}

fn tolerance(tol: Option<f64>, default: f64) -> CliResult<f64> {
    match tol {
        Some(t) if !(t > 0.0 && t.is_finite()) => Err(usage(format!("--tol must be positive, got {t}"))),
        Some(t) => Ok(t),
        None => Ok(default),
    }
}

fn require_seed(seed: Option<u64>, what: &str) -> CliResult<u64> {
    seed.ok_or_else(|| usage(format!("{what} requires --seed")))
}

/// Key/value pairs as two-column CSV or a flat JSON object.
fn emit_record(common: &Common, fields: &[(&str, Value)]) -> CliResult<()> {
    let text = match common.format {
        Format::Csv => {
            let mut out = String::from("field,value\n");
            for (k, v) in fields {
                let v = match v {
                    Value::String(s) => s.clone(),
                    Value::Null => String::new(),
                    other => other.to_string(),
                };
                let _ = writeln!(out, "{k},{v}");
            }
            out
        }
        Format::Json => {
            let map: serde_json::Map<String, Value> =
                fields.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
            json_text(&Value::Object(map))
        }
    };
    emit(common.out.as_deref(), &text)
}

fn num(x: f64) -> Value {
    Value::String(fmt_num(x))
}

fn validate(a: NetArgs) -> CliResult<u8> {
    let net = load(&a.net, &a.common)?;
    let mut fields = vec![
        ("n", json!(net.n())),
        ("kind", json!(net.kind().as_str())),
        ("edges", json!(net.edge_count())),
        ("inputs", json!(net.inputs().len())),
        ("outputs", json!(net.outputs().len())),
        ("spectral_radius", num(net.spectral_radius())),
    ];
    if net.kind() == NetworkKind::Laplacian {
        fields.push(("laplacian_spectral_radius", num(net.laplacian_spectral_radius())));
        fields.push(("condition", json!(net.condition().as_str())));
        fields.push(("connected", json!(net.is_connected())));
        fields.push(("hop_diameter", json!(net.hop_diameter())));
    }
    emit_record(&a.common, &fields)?;
    Ok(0)
}

fn scan(a: ScanArgs) -> CliResult<u8> {
    let net = load(&a.net, &a.common)?;
    let seed = if a.verify { Some(require_seed(a.seed, "--verify")?) } else { None };
    match net.kind() {
        NetworkKind::DirectStable => {
            let k = SteadyStateKernel::build(&net)?;
            let mut reports = k.batch_scan(a.w, &ScanOptions { sort: a.sort.into(), top_k: None, parallel: true })?;
            let checks = match seed {
                Some(seed) => {
                    let mut v = Verification::default();
                    let tol = tolerance(a.tol, DEFAULT_HINF_TOL)?;
                    verify::scan_rows(&net, &reports, a.samples, seed, tol, &mut v)?;
                    Some(v)
                }
                None => None,
            };
            sort_reports(&mut reports, a.sort.into());
            if let Some(k) = a.top_k {
                reports.truncate(k);
            }
            let text = match a.common.format {
                Format::Csv => delta_reports_csv(&reports),
                Format::Json => json_text(&delta_reports_json(&reports)),
            };
            emit(a.common.out.as_deref(), &text)?;
            Ok(finish_verify(checks))
        }
        NetworkKind::Laplacian => {
            let k = LaplacianKernel::build(&net)?;
            let report = k.batch_coherence_delta(a.w)?;
            let checks = match seed {
                Some(seed) => {
                    let mut v = Verification::default();
                    let tol = tolerance(a.tol, DEFAULT_EXACT_TOL)?;
                    let admissible: Vec<(usize, usize, f64)> = report
                        .pairs()
                        .into_iter()
                        .filter(|&(_, _, _, ok)| ok)
                        .map(|(s, t, d, _)| (s, t, d))
                        .collect();
                    let mut rng = verify::rng(seed);
                    let picks = rand::seq::index::sample(&mut rng, admissible.len(), a.samples.min(admissible.len()));
                    let base = coherence_by_eigenvalues(&net)?;
                    for i in picks {
                        let (s, t, d) = admissible[i];
                        let m = EdgeMod::new(s, t, a.w);
                        let exact = coherence_by_eigenvalues(&net.apply_mod(&m)?)? - base;
                        v.equal("coherence_delta", Some(m), d, exact, tol);
                    }
                    Some(v)
                }
                None => None,
            };
            let text = match a.common.format {
                Format::Csv => coherence_csv(&report),
                Format::Json => json_text(&coherence_json(&report)),
            };
            emit(a.common.out.as_deref(), &text)?;
            Ok(finish_verify(checks))
        }
    }
}

fn grow(a: GrowArgs) -> CliResult<u8> {
    let mut net = load(&a.net, &a.common)?;
    let mode = a.mode.unwrap_or(match net.kind() {
        NetworkKind::Laplacian => GrowMode::Coherence,
        NetworkKind::DirectStable => GrowMode::Gramian,
    });
    if let Some(c) = a.condition {
        if net.kind() != NetworkKind::Laplacian {
            return Err(usage("--condition applies to Laplacian networks only"));
        }
        net = net.with_condition(match c {
            ConditionArg::Strict => SpectralCondition::Strict,
            ConditionArg::Displacement => SpectralCondition::Displacement,
        })?;
    }
    let mut v = a.verify.then(Verification::default);
    let (text, grown) = match mode {
        GrowMode::Coherence => {
            let (result, grown) = greedy_grow(&net, a.w, a.budget)?;
            if let Some(v) = v.as_mut() {
                let tol = tolerance(a.tol, DEFAULT_EXACT_TOL)?;
                v.equal("final_coherence", None, result.final_coherence(), coherence_by_eigenvalues(&grown)?, tol);
            }
            let text = match a.common.format {
                Format::Csv => {
                    let mut out = String::from("step,s,t,w,coherence,coherence_plus_one\n");
                    let _ = writeln!(out, "0,,,,{},{}", fmt_num(result.initial), fmt_num(result.initial + 1.0));
                    for (i, s) in result.steps.iter().enumerate() {
                        let _ = writeln!(
                            out,
                            "{},{},{},{},{},{}",
                            i + 1,
                            s.s,
                            s.t,
                            fmt_num(s.w),
                            fmt_num(s.coherence),
                            fmt_num(s.coherence + 1.0)
                        );
                    }
                    out
                }
                Format::Json => {
                    let mut value = grow_json(&result);
                    value["condition"] = json!(net.condition().as_str());
                    value["final"] = num(result.final_coherence());
                    value["initial_plus_one"] = num(result.initial + 1.0);
                    value["final_plus_one"] = num(result.final_coherence() + 1.0);
                    value["hop_diameter_before"] = json!(net.hop_diameter());
                    value["hop_diameter_after"] = json!(grown.hop_diameter());
                    json_text(&value)
                }
            };
            (text, grown)
        }
        GrowMode::Gramian => {
            if net.kind() != NetworkKind::DirectStable {
                return Err(usage("gramian growth needs a direct network"));
            }
            let result = greedy_gramian_improve(&net, a.budget, a.w)?;
            let mut grown = net.clone();
            for m in result.edges() {
                grown = grown.apply_mod(&m)?;
            }
            if let Some(v) = v.as_mut() {
                let tol = tolerance(a.tol, DEFAULT_EXACT_TOL)?;
                let exact = h2_truncated(&grown.system(), &TruncationConfig::default())?;
                v.equal("final_output_energy", None, result.final_trace(), exact.value, tol);
            }
            let text = match a.common.format {
                Format::Csv => {
                    let mut out = String::from("step,s,t,w,bound,trace\n");
                    let _ = writeln!(out, "0,,,,,{}", fmt_num(result.initial_trace));
                    for (i, s) in result.steps.iter().enumerate() {
                        let _ = writeln!(
                            out,
                            "{},{},{},{},{},{}",
                            i + 1,
                            s.edge.s,
                            s.edge.t,
                            fmt_num(s.edge.w),
                            fmt_num(s.bound),
                            fmt_num(s.trace)
                        );
                    }
                    out
                }
                Format::Json => json_text(&json!({
                    "initial_trace": num(result.initial_trace),
                    "final_trace": num(result.final_trace()),
                    "steps": result.steps.iter().map(|s| json!({
                        "s": s.edge.s,
                        "t": s.edge.t,
                        "w": num(s.edge.w),
                        "bound": num(s.bound),
                        "trace": num(s.trace),
                    })).collect::<Vec<_>>(),
                })),
            };
            (text, grown)
        }
    };
    emit(a.common.out.as_deref(), &text)?;
    if let Some(path) = &a.save_net {
        write_network(&grown, path)?;
    }
    Ok(finish_verify(v))
}

fn generate(a: GenerateArgs) -> CliResult<u8> {
    let need_n = || a.n.ok_or_else(|| usage("--n is required"));
    let need_w = || a.w.ok_or_else(|| usage("--w is required"));
    let net = match a.kind {
        GenKind::Er => {
            let seed = require_seed(a.seed, "er")?;
            let p = a.p.ok_or_else(|| usage("--p is required"))?;
            let rho = a.rho.ok_or_else(|| usage("--rho is required"))?;
            erdos_renyi(&ErdosRenyi {
                directed: !a.undirected,
                inputs: a.inputs,
                outputs: a.outputs,
                ..ErdosRenyi::new(need_n()?, p, rho, seed)
            })?
        }
        GenKind::Benchmark => erdos_renyi(&benchmark_preset(require_seed(a.seed, "benchmark")?))?,
        GenKind::Path => path_graph(need_n()?, need_w()?)?,
        GenKind::Complete => complete_graph(need_n()?, need_w()?)?,
        GenKind::Grid => {
            let rows = a.rows.ok_or_else(|| usage("--rows is required"))?;
            let cols = a.cols.ok_or_else(|| usage("--cols is required"))?;
            grid_graph(rows, cols, need_w()?)?
        }
    };
    match &a.out {
        Some(path) => write_network(&net, path)?,
        None => emit(None, &(NetworkFile::from(&net).to_json() + "\n"))?,
    }
    Ok(0)
}

fn coherence(a: CoherenceArgs) -> CliResult<u8> {
    let net = load(&a.net, &a.common)?;
    let k = LaplacianKernel::build(&net)?;
    let c = k.coherence()?;
    let mut fields = vec![
        ("coherence", num(c)),
        ("coherence_plus_one", num(k.coherence_plus_one()?)),
        ("hop_diameter", json!(net.hop_diameter())),
    ];
    if let Some(trials) = a.monte_carlo {
        let seed = require_seed(a.seed, "--monte-carlo")?;
        let mc = coherence_monte_carlo(&net, trials, a.horizon, seed)?;
        fields.push(("monte_carlo_estimate", num(mc.estimate)));
        fields.push(("monte_carlo_standard_error", num(mc.standard_error)));
        fields.push(("monte_carlo_trials", json!(mc.trials)));
        fields.push(("monte_carlo_z", num((mc.estimate - c) / mc.standard_error)));
    }
    let v = if a.verify {
        let mut v = Verification::default();
        verify::coherence(&net, &k, tolerance(a.tol, DEFAULT_EXACT_TOL)?, &mut v)?;
        Some(v)
    } else {
        None
    };
    emit_record(&a.common, &fields)?;
    Ok(finish_verify(v))
}

fn margin(a: MarginArgs) -> CliResult<u8> {
    let net = load(&a.net, &a.common)?;
    let k = SteadyStateKernel::build(&net)?;
    let mut v = a.verify.then(Verification::default);
    let fields = match (a.s, a.t) {
        (Some(s), Some(t)) => {
            let m = k.stability_margin(s, t)?;
            if let Some(v) = v.as_mut() {
                verify::margin_sharpness(&net, s, t, m, v)?;
            }
            vec![("s", json!(s)), ("t", json!(t)), ("margin", num(m))]
        }
        _ => {
            let (radius, edge) = k.fragility_radius();
            if let (Some(v), Some(e)) = (v.as_mut(), edge) {
                verify::margin_sharpness(&net, e.s, e.t, radius, v)?;
            }
            vec![
                ("fragility_radius", num(radius)),
                ("s", json!(edge.map(|e| e.s))),
                ("t", json!(edge.map(|e| e.t))),
            ]
        }
    };
    emit_record(&a.common, &fields)?;
    Ok(finish_verify(v))
}

fn verify_all(a: VerifyAllArgs) -> CliResult<u8> {
    let net = load(&a.net, &a.common)?;
    let seed = require_seed(a.seed, "verify-all")?;
    let mut v = Verification::default();
    match net.kind() {
        NetworkKind::DirectStable => {
            let tol = tolerance(a.tol, DEFAULT_HINF_TOL)?;
            verify::direct_network(&net, a.w, a.samples, seed, tol, &mut v)?;
        }
        NetworkKind::Laplacian => {
            let tol = tolerance(a.tol, DEFAULT_EXACT_TOL)?;
            verify::laplacian_network(&net, a.w, a.samples, seed, tol, &mut v)?;
        }
    }
    let text = match a.common.format {
        Format::Csv => v.csv(),
        Format::Json => json_text(&v.json()),
    };
    emit(a.common.out.as_deref(), &text)?;
    Ok(finish_verify(Some(v)))
}
