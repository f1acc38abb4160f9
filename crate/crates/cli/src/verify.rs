//! Oracle cross-checks shared by `--verify` and `verify-all`.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use edgeimpact_core::laplacian_analysis::{displacement, pseudo_gramian};
use edgeimpact_core::oracle::{
    coherence_by_eigenvalues, dc_gain, h2_truncated, hinf_sweep, rebuilt_delta, SweepConfig,
    TruncationConfig,
};
use edgeimpact_core::report::fmt_num;
use edgeimpact_core::stable_analysis::DeltaReport;
use edgeimpact_core::{EdgeMod, LaplacianKernel, Network, SteadyStateKernel};

use crate::output::CliResult;

/// Above this state dimension the delta H∞ oracle is the DC gain instead of
/// a frequency sweep.
pub const SWEEP_MAX_ORDER: usize = 200;
pub const DEFAULT_HINF_TOL: f64 = 1e-6;
pub const DEFAULT_EXACT_TOL: f64 = 1e-9;
const ROUNDING_RTOL: f64 = 1e-12;
/// Scale floor for relative comparisons, so exact zeros compare cleanly
/// against oracle round-off.
const SCALE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub edge: Option<EdgeMod>,
    pub formula: f64,
    pub oracle: f64,
    pub relation: Relation,
    pub ok: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Equal,
    AtMost,
    AtLeast,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::Equal => "==",
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
        }
    }
}

#[derive(Debug, Default)]
pub struct Verification {
    pub checks: Vec<Check>,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.ok).count()
    }

    fn push(&mut self, name: &str, edge: Option<EdgeMod>, formula: f64, oracle: f64, relation: Relation, ok: bool) {
        self.checks.push(Check {
            name: name.to_string(),
            edge,
            formula,
            oracle,
            relation,
            ok,
        });
    }

    pub fn equal(&mut self, name: &str, edge: Option<EdgeMod>, formula: f64, oracle: f64, tol: f64) {
        let scale = formula.abs().max(oracle.abs()).max(SCALE_FLOOR);
        let ok = (formula - oracle).abs() <= tol * scale;
        self.push(name, edge, formula, oracle, Relation::Equal, ok);
    }

    /// `formula <= oracle`, up to rounding.
    pub fn at_most(&mut self, name: &str, edge: Option<EdgeMod>, formula: f64, oracle: f64) {
        let ok = formula <= oracle + ROUNDING_RTOL * oracle.abs();
        self.push(name, edge, formula, oracle, Relation::AtMost, ok);
    }

    /// `formula >= oracle`, up to rounding.
    pub fn at_least(&mut self, name: &str, edge: Option<EdgeMod>, formula: f64, oracle: f64) {
        let ok = formula >= oracle - ROUNDING_RTOL * oracle.abs();
        self.push(name, edge, formula, oracle, Relation::AtLeast, ok);
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("check,s,t,w,formula,relation,oracle,ratio,ok\n");
        for c in &self.checks {
            let (s, t, w) = match c.edge {
                Some(e) => (e.s.to_string(), e.t.to_string(), fmt_num(e.w)),
                None => (String::new(), String::new(), String::new()),
            };
            out.push_str(&format!(
                "{},{s},{t},{w},{},{},{},{},{}\n",
                c.name,
                fmt_num(c.formula),
                c.relation.symbol(),
                fmt_num(c.oracle),
                fmt_num(c.formula / c.oracle),
                c.ok
            ));
        }
        out
    }

    pub fn json(&self) -> Value {
        json!({
            "passed": self.passed(),
            "failures": self.failures(),
            "checks": self.checks.iter().map(|c| json!({
                "check": c.name,
                "edge": c.edge.map(|e| json!({"s": e.s, "t": e.t, "w": fmt_num(e.w)})),
                "formula": fmt_num(c.formula),
                "relation": c.relation.symbol(),
                "oracle": fmt_num(c.oracle),
                "ok": c.ok,
            })).collect::<Vec<_>>(),
        })
    }

    /// Human-readable summary for stderr.
    pub fn summary(&self) -> String {
        let mut out = format!(
            "verify: {} checks, {} failed\n",
            self.checks.len(),
            self.failures()
        );
        for c in self.checks.iter().filter(|c| !c.ok) {
            let edge = c.edge.map(|e| format!(" ({},{},{})", e.s, e.t, fmt_num(e.w))).unwrap_or_default();
            out.push_str(&format!(
                "  FAILED {}{edge}: {} {} {}\n",
                c.name,
                fmt_num(c.formula),
                c.relation.symbol(),
                fmt_num(c.oracle)
            ));
        }
        out
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Oracle H∞ norm of a delta realization: a sweep for small systems, the DC
/// gain otherwise.
fn delta_hinf_oracle(sys: &edgeimpact_core::LinearSystem) -> CliResult<f64> {
    Ok(if sys.order() > SWEEP_MAX_ORDER {
        dc_gain(sys)?
    } else {
        hinf_sweep(sys, &SweepConfig::default())?.value
    })
}

/// Check a sample of non-destabilizing scan rows against rebuilt networks.
pub fn scan_rows(
    net: &Network,
    reports: &[DeltaReport],
    samples: usize,
    seed: u64,
    tol: f64,
    v: &mut Verification,
) -> CliResult<()> {
    let stable: Vec<&DeltaReport> = reports.iter().filter(|r| !r.destabilizing).collect();
    let mut rng = rng(seed);
    let picks = index::sample(&mut rng, stable.len(), samples.min(stable.len()));
    let trunc = TruncationConfig::default();
    for i in picks {
        let r = stable[i];
        let m = EdgeMod::new(r.s, r.t, r.w);
        let (_, delta) = rebuilt_delta(net, &m)?;
        v.equal("hinf", Some(m), r.hinf, delta_hinf_oracle(&delta)?, tol);
        let exact = h2_truncated(&delta, &trunc)?;
        v.at_most("h2_lower_bound", Some(m), r.h2_lower_bound, exact.upper());
    }
    Ok(())
}

/// Stability just inside and just outside a finite margin.
pub fn margin_sharpness(net: &Network, s: usize, t: usize, margin: f64, v: &mut Verification) -> CliResult<()> {
    if !margin.is_finite() {
        return Ok(());
    }
    let inside = net.apply_mod(&EdgeMod::new(s, t, 0.99 * margin))?.spectral_radius();
    let outside = net.apply_mod(&EdgeMod::new(s, t, 1.01 * margin))?.spectral_radius();
    v.at_most("rho_at_0.99_margin", Some(EdgeMod::new(s, t, 0.99 * margin)), inside, 1.0 - f64::EPSILON);
    v.at_least("rho_at_1.01_margin", Some(EdgeMod::new(s, t, 1.01 * margin)), outside, 1.0 - 1e-8);
    Ok(())
}

pub fn direct_network(
    net: &Network,
    w: Option<f64>,
    samples: usize,
    seed: u64,
    tol: f64,
    v: &mut Verification,
) -> CliResult<()> {
    let k = SteadyStateKernel::build(net)?;
    let n = net.n();
    let mut rng = rng(seed);
    let trunc = TruncationConfig::default();
    for _ in 0..samples {
        let s = rng.random_range(0..n);
        let t = (s + rng.random_range(1..n)) % n;
        let margin = k.stability_margin(s, t)?;
        margin_sharpness(net, s, t, margin, v)?;
        let w = match w {
            Some(w) if w < margin => w,
            Some(_) => continue,
            None if margin.is_finite() => 0.5 * margin,
            None => 1.0,
        };
        let m = EdgeMod::new(s, t, w);
        let (_, delta) = rebuilt_delta(net, &m)?;
        v.equal("hinf", Some(m), k.delta_hinf(&m)?, delta_hinf_oracle(&delta)?, tol);
        if w >= 0.0 {
            let exact = h2_truncated(&delta, &trunc)?;
            v.at_most("h2_lower_bound", Some(m), k.delta_h2_lower_bound(&m)?, exact.upper());
        }
    }
    Ok(())
}

pub fn coherence(net: &Network, k: &LaplacianKernel, tol: f64, v: &mut Verification) -> CliResult<()> {
    let c = k.coherence()?;
    v.equal("coherence_vs_eigenvalues", None, c, coherence_by_eigenvalues(net)?, tol);
    let gram = pseudo_gramian(&displacement(net)?)?.trace;
    v.equal("coherence_vs_gramian", None, c, gram, tol);
    Ok(())
}

/// Random admissible non-edge additions checked against rebuilt networks.
pub fn laplacian_network(
    net: &Network,
    w: Option<f64>,
    samples: usize,
    seed: u64,
    tol: f64,
    v: &mut Verification,
) -> CliResult<()> {
    let k = LaplacianKernel::build(net)?;
    if net.has_all_node_terminals() {
        coherence(net, &k, tol, v)?;
    }
    let n = net.n();
    let candidates: Vec<(usize, usize)> = (0..n)
        .flat_map(|s| (s + 1..n).map(move |t| (s, t)))
        .filter(|&(s, t)| net.weight(s, t) == 0.0)
        .collect();
    if candidates.is_empty() {
        return Ok(());
    }
    let mut rng = rng(seed);
    let sweep = SweepConfig::default();
    let base = if net.has_all_node_terminals() {
        Some(coherence_by_eigenvalues(net)?)
    } else {
        None
    };
    let mut taken = 0;
    for _ in 0..20 * samples {
        if taken == samples {
            break;
        }
        let (s, t) = candidates[rng.random_range(0..candidates.len())];
        let w = w.unwrap_or_else(|| rng.random_range(0.01..0.2));
        if !k.addition_admissible(s, t, w) {
            continue;
        }
        taken += 1;
        let m = EdgeMod::new(s, t, w);
        let (rebuilt, delta) = rebuilt_delta(net, &m)?;
        let swept = if delta.order() > SWEEP_MAX_ORDER {
            dc_gain(&delta)?
        } else {
            hinf_sweep(&delta, &sweep)?.value
        };
        v.at_least("hinf_upper_bound", Some(m), k.delta_hinf_upper_bound(&m)?, swept);
        if let Some(c0) = base {
            let exact = coherence_by_eigenvalues(&rebuilt)? - c0;
            v.equal("coherence_delta", Some(m), k.coherence_delta(&m)?, exact, tol);
        }
    }
    Ok(())
}
