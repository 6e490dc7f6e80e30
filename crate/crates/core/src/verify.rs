//! Property suites shared by the `verify` subcommand and the test suite.
//!
//! Each check draws its samples from a seeded generator and stops at the
//! first violation, returning the offending input as JSON.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::capacity::scale_to_boundary;
use crate::cones::{
    enumerate_rank_orderings, lyapunov_gradient, lyapunov_star, lyapunov_value, resolve_cone, resolve_cone_pc,
    ConeOracle,
};
use crate::model::NetworkModel;
use crate::nodeset::{NodeId, NodeSet};
use crate::policies::{orcd_costs, rank_backpressure, rank_orcd, weighted_flow, Policy, PolicySpec, TieRule};
use crate::ranking::{class_backlog, compare_penalties, is_refinement, one_step_confinements, RankOrdering};
use crate::sim::{drift_estimate, ArrivalProcess};
use crate::topologies;
use crate::weights::WeightTable;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuiteStatus {
    Pass,
    Fail,
    /// Failed in a configuration where the theory does not promise success.
    ExpectedFail,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub status: SuiteStatus,
    pub checked: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Samples checked, or the first counterexample.
pub type CheckResult = Result<usize, Value>;

impl SuiteReport {
    pub fn from_check(name: &str, r: CheckResult) -> Self {
        match r {
            Ok(checked) => SuiteReport {
                name: name.into(),
                status: SuiteStatus::Pass,
                checked,
                counterexample: None,
                note: None,
            },
            Err(cx) => SuiteReport {
                name: name.into(),
                status: SuiteStatus::Fail,
                checked: 0,
                counterexample: Some(cx),
                note: None,
            },
        }
    }

    pub fn passed(&self) -> bool {
        self.status != SuiteStatus::Fail
    }
}

/// Backlogs uniform on `(0, 10)`; continuous, so ties have probability zero.
pub fn random_backlog<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(1e-9..10.0)).collect()
}

/// Uniformly labelled random ordered partition of `{1, ..., n}`.
pub fn random_rank_ordering<R: Rng + ?Sized>(n: usize, rng: &mut R) -> RankOrdering {
    let m = rng.gen_range(1..=n);
    let mut nodes: Vec<usize> = (1..=n).collect();
    nodes.shuffle(rng);
    let mut classes = vec![NodeSet::EMPTY; m];
    // the first m nodes seed the classes so none is empty
    for (idx, &k) in nodes.iter().enumerate() {
        let c = if idx < m { idx } else { rng.gen_range(0..m) };
        classes[c] = classes[c].with(k);
    }
    RankOrdering::new(classes).expect("partition")
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// The oracle finds exactly one cone and the constructive resolver returns it.
pub fn check_cone_partition(oracle: &ConeOracle, f: &WeightTable<f64>, samples: usize, rng: &mut impl Rng) -> CheckResult {
    let n = oracle.n_relays();
    for _ in 0..samples {
        let q = random_backlog(n, rng);
        let found = oracle.satisfiers(&q, f).map_err(|e| json!({ "q": q, "error": e.to_string() }))?;
        if found.len() != 1 {
            let orderings: Vec<_> = found.iter().map(|c| c.ordering.clone()).collect();
            return Err(json!({ "q": q, "satisfiers": orderings }));
        }
        match resolve_cone(&q, f) {
            Ok(c) if c.ordering == found[0].ordering => {}
            other => {
                return Err(json!({
                    "q": q,
                    "oracle": found[0].ordering,
                    "constructive": other.map(|c| c.ordering.to_json()).map_err(|e| e.to_string()),
                }))
            }
        }
    }
    Ok(samples)
}

/// Path-connected analogue of [`check_cone_partition`] on `m`.
pub fn check_pc_partition(
    m: &NetworkModel,
    oracle: &ConeOracle,
    f: &WeightTable<f64>,
    samples: usize,
    rng: &mut impl Rng,
) -> CheckResult {
    let n = m.n_relays();
    for _ in 0..samples {
        let q = random_backlog(n, rng);
        let found = oracle.satisfiers(&q, f).map_err(|e| json!({ "q": q, "error": e.to_string() }))?;
        if found.len() != 1 {
            let orderings: Vec<_> = found.iter().map(|c| c.ordering.clone()).collect();
            return Err(json!({ "q": q, "satisfiers": orderings }));
        }
        match resolve_cone_pc(&q, f, m) {
            Ok(c) if c.ordering == found[0].ordering => {}
            other => {
                return Err(json!({
                    "q": q,
                    "oracle": found[0].ordering,
                    "constructive": other.map(|c| c.ordering.to_json()).map_err(|e| e.to_string()),
                }))
            }
        }
    }
    Ok(samples)
}

/// Merging two adjacent classes: whenever one side wins the penalty
/// comparison, the three class weights sit in the matching order.
pub fn check_less_penalty(n: usize, f: &WeightTable<f64>, samples: usize, rng: &mut impl Rng) -> CheckResult {
    let mut done = 0;
    while done < samples {
        let r = random_rank_ordering(n, rng);
        if r.num_classes() < 2 {
            continue;
        }
        let i = rng.gen_range(0..r.num_classes() - 1);
        let merged = r.merge_at(i);
        let q = random_backlog(n, rng);
        let (a, b) = (r.classes()[i], r.classes()[i + 1]);
        let s = r.prefix_size(i);
        let low = f.get(s, a.len()) * class_backlog(&q, a);
        let mid = f.get(s, a.len() + b.len()) * (class_backlog(&q, a) + class_backlog(&q, b));
        let high = f.get(s + a.len(), b.len()) * class_backlog(&q, b);
        let slack = 1e-12 * high.abs().max(low.abs());
        let fwd = compare_penalties(&r, &merged, &q, f).expect("distinct").less;
        let back = compare_penalties(&merged, &r, &q, f).expect("distinct").less;
        let ok = (!fwd || (low <= mid + slack && mid <= high + slack)) && (!back || (low > mid && mid > high));
        if !ok || fwd == back {
            return Err(json!({ "q": q, "r": r, "merged": merged, "r_less": fwd, "merged_less": back }));
        }
        done += 1;
    }
    Ok(samples)
}

/// Class weights `f(|C^{i-1}|, |C_i|)·Q_{C_i}` are nondecreasing along the ordering.
pub fn check_class_weights_increase(r: &RankOrdering, q: &[f64], f: &WeightTable<f64>) -> bool {
    let mut below = 0;
    let w: Vec<f64> = r
        .classes()
        .iter()
        .map(|c| {
            let x = f.get(below, c.len()) * class_backlog(q, *c);
            below += c.len();
            x
        })
        .collect();
    w.windows(2).all(|p| p[0] <= p[1] + 1e-12 * p[1].abs())
}

/// Bound for node `k` of class `i ≥ 1` (0-based):
/// `Q_k > f(0, |C^{i-1}|) / f(|C^{i-1}|, 1) · Q_{C^{i-1}} ≥ Q_{C^{i-1}}`.
pub fn node_dominates_prefix(r: &RankOrdering, i: usize, k: usize, q: &[f64], f: &WeightTable<f64>) -> bool {
    let s = r.prefix_size(i);
    let below = class_backlog(q, r.prefix_union(i));
    let bound = f.get(0, s) / f.get(s, 1) * below;
    q[k - 1] > bound && bound >= below * (1.0 - 1e-12)
}

/// Class-weight order and the per-node prefix bound on general cones.
pub fn check_cone_class_bounds(n: usize, f: &WeightTable<f64>, samples: usize, rng: &mut impl Rng) -> CheckResult {
    for _ in 0..samples {
        let q = random_backlog(n, rng);
        let r = resolve_cone(&q, f).map_err(|e| json!({ "q": q, "error": e.to_string() }))?.ordering;
        if !check_class_weights_increase(&r, &q, f) {
            return Err(json!({ "property": "class weights", "q": q, "r": r }));
        }
        for (i, c) in r.classes().iter().enumerate().skip(1) {
            if let Some(k) = c.iter().find(|&k| !node_dominates_prefix(&r, i, k, &q, f)) {
                return Err(json!({ "property": "node dominates prefix", "q": q, "r": r, "node": k }));
            }
        }
    }
    Ok(samples)
}

/// Class-weight order and the prefix bound for nodes that reach a lower
/// class or the destination, on path-connected cones of `m`.
pub fn check_pc_cone_class_bounds(m: &NetworkModel, f: &WeightTable<f64>, samples: usize, rng: &mut impl Rng) -> CheckResult {
    let n = m.n_relays();
    for _ in 0..samples {
        let q = random_backlog(n, rng);
        let r = resolve_cone_pc(&q, f, m).map_err(|e| json!({ "q": q, "error": e.to_string() }))?.ordering;
        if !check_class_weights_increase(&r, &q, f) {
            return Err(json!({ "property": "class weights", "q": q, "r": r }));
        }
        for (i, c) in r.classes().iter().enumerate().skip(1) {
            let targets = r.prefix_union(i).with(0);
            let bad = c
                .iter()
                .filter(|&k| m.reach_set(k).intersects(targets))
                .find(|&k| !node_dominates_prefix(&r, i, k, &q, f));
            if let Some(k) = bad {
                return Err(json!({ "property": "reaching node dominates prefix", "q": q, "r": r, "node": k }));
            }
        }
    }
    Ok(samples)
}

/// Moves `q` onto the hyperplane where merging classes `i` and `i + 1` of
/// `r` leaves the penalty unchanged, by rescaling the upper class.
pub fn project_to_merge_boundary(r: &RankOrdering, i: usize, q: &mut [f64], f: &WeightTable<f64>) {
    let (a, b) = (r.classes()[i], r.classes()[i + 1]);
    let s = r.prefix_size(i);
    let qa = class_backlog(q, a);
    let target = qa * (f.get(s, a.len()) / f.get(s, a.len() + b.len()) - 1.0);
    let scale = target / class_backlog(q, b);
    for k in b.iter() {
        q[k - 1] *= scale;
    }
}

/// Value and gradient agree across every merge boundary (`n ≤ 4` keeps
/// the pair count small) and finite differences match the gradient.
pub fn check_lyapunov_smoothness(
    n: usize,
    f: &WeightTable<f64>,
    boundary_samples: usize,
    interior_samples: usize,
    rng: &mut impl Rng,
) -> CheckResult {
    let mut checked = 0;
    for r in enumerate_rank_orderings(n).map_err(|e| json!(e.to_string()))? {
        for (i, merged) in one_step_confinements(&r).into_iter().enumerate() {
            for _ in 0..boundary_samples {
                let mut q = random_backlog(n, rng);
                project_to_merge_boundary(&r, i, &mut q, f);
                let (la, lb) = (lyapunov_value(&q, f, &r), lyapunov_value(&q, f, &merged));
                let (ga, gb) = (lyapunov_gradient(&q, f, &r), lyapunov_gradient(&q, f, &merged));
                let value_ok = (la - lb).abs() <= 1e-9 * la.abs().max(1.0);
                let grad_ok = ga.iter().zip(&gb).all(|(x, y)| close(*x, *y, 1e-9));
                if !value_ok || !grad_ok {
                    return Err(json!({ "q": q, "r": r, "merged": merged, "values": [la, lb], "gradients": [ga, gb] }));
                }
                checked += 1;
            }
        }
    }
    for _ in 0..interior_samples {
        let q = random_backlog(n, rng);
        let res = resolve_cone(&q, f).map_err(|e| json!({ "q": q, "error": e.to_string() }))?;
        if res.on_boundary {
            continue;
        }
        let g = lyapunov_gradient(&q, f, &res.ordering);
        let gmax = g.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        for k in 0..n {
            let h = 1e-5 * q[k].max(1.0);
            let mut up = q.clone();
            let mut down = q.clone();
            up[k] += h;
            down[k] -= h;
            let fd = (lyapunov_star(&up, f) - lyapunov_star(&down, f)) / (2.0 * h);
            if (fd - g[k]).abs() > 1e-5 * g[k].abs().max(gmax) {
                return Err(json!({ "q": q, "node": k + 1, "finite_difference": fd, "gradient": g[k] }));
            }
        }
        checked += 1;
    }
    Ok(checked)
}

/// All feasible decisions for transmitters with realized sets `sets`.
fn enumerate_decisions(sets: &[(usize, NodeSet)]) -> Vec<Vec<(usize, usize)>> {
    let mut out = vec![Vec::new()];
    for &(k, s) in sets {
        let choices: Vec<usize> = if s.contains(0) { vec![0] } else { s.iter().collect() };
        out = out
            .into_iter()
            .flat_map(|d| {
                choices.iter().map(move |&j| {
                    let mut d = d.clone();
                    d.push((k, j));
                    d
                })
            })
            .collect();
    }
    out
}

/// Over realized forwarder sets drawn from `m`, the f-policy
/// decision maximizes the weighted class flow among all feasible decisions.
pub fn check_routing_maximizes(m: &NetworkModel, f: &WeightTable<f64>, samples: usize, rng: &mut impl Rng) -> CheckResult {
    let n = m.n_relays();
    let mut rank_rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..samples {
        let q = random_backlog(n, rng);
        let r = resolve_cone(&q, f).map_err(|e| json!({ "q": q, "error": e.to_string() }))?.ordering;
        let sets: Vec<(usize, NodeSet)> = (1..=n).map(|k| (k, m.sample_forwarder_set(NodeId(k), rng))).collect();
        let chosen: Vec<(usize, usize)> = sets
            .iter()
            .map(|&(k, s)| (k, crate::policies::select_forwarder(&r, NodeId(k), s, TieRule::LowestIndex, &mut rank_rng).0))
            .collect();
        let value = weighted_flow(&q, f, &r, &chosen);
        let best = enumerate_decisions(&sets)
            .iter()
            .map(|d| weighted_flow(&q, f, &r, d))
            .fold(f64::NEG_INFINITY, f64::max);
        if value < best - 1e-12 * best.abs().max(1.0) {
            return Err(json!({ "q": q, "r": r, "sets": sets.iter().map(|s| s.1.iter().collect::<Vec<_>>()).collect::<Vec<_>>(), "policy_value": value, "best": best }));
        }
    }
    Ok(samples)
}

/// Backpressure rank orderings refine f-policy ones.
pub fn check_backpressure_refines(n: usize, f: &WeightTable<f64>, samples: usize, rng: &mut impl Rng) -> CheckResult {
    for _ in 0..samples {
        let q = random_backlog(n, rng);
        let fp = resolve_cone(&q, f).map_err(|e| json!({ "q": q, "error": e.to_string() }))?.ordering;
        let bp = rank_backpressure(&q);
        if !is_refinement(&bp, &fp) {
            return Err(json!({ "q": q, "backpressure": bp, "fpolicy": fp }));
        }
    }
    Ok(samples)
}

/// ORCD rank orderings refine path-connected f-policy ones on `m`.
pub fn check_orcd_refines(m: &NetworkModel, f: &WeightTable<f64>, samples: usize, rng: &mut impl Rng) -> CheckResult {
    let n = m.n_relays();
    for _ in 0..samples {
        let q = random_backlog(n, rng);
        let pc = resolve_cone_pc(&q, f, m).map_err(|e| json!({ "q": q, "error": e.to_string() }))?.ordering;
        let orcd = rank_orcd(&q, m).map_err(|e| json!({ "q": q, "error": e.to_string() }))?;
        if !is_refinement(&orcd, &pc) {
            return Err(json!({ "q": q, "orcd": orcd, "pc_fpolicy": pc }));
        }
    }
    Ok(samples)
}

/// `V_a ≤ Q_a / p_min + V_b` on every reaches-edge `a → b`.
pub fn check_cost_edge_bound(m: &NetworkModel, samples: usize, rng: &mut impl Rng) -> CheckResult {
    let n = m.n_relays();
    let p_min = m.p_min().map_err(|e| json!(e.to_string()))?;
    let mut edges = 0;
    for _ in 0..samples {
        let q = random_backlog(n, rng);
        let v = orcd_costs(&q, m).map_err(|e| json!({ "q": q, "error": e.to_string() }))?.v;
        for a in 1..=n {
            for b in m.reach_set(a).iter() {
                let bound = q[a - 1] / p_min + v[b];
                if v[a] > bound + 1e-9 * bound.max(1.0) {
                    return Err(json!({ "q": q, "a": a, "b": b, "v": v }));
                }
                edges += 1;
            }
        }
    }
    Ok(edges)
}

/// Random backlog with integer total drawn from `[min_total, 4·min_total]`.
pub fn random_integer_backlog<R: Rng + ?Sized>(n: usize, min_total: u32, rng: &mut R) -> Vec<u32> {
    let total = rng.gen_range(min_total..=4 * min_total);
    let mut q = vec![0u32; n];
    for _ in 0..total {
        q[rng.gen_range(0..n)] += 1;
    }
    q
}

/// Drift of the policy's Lyapunov function is negative, `mean + 3·SE < 0`,
/// at sampled backlogs with large totals.
#[allow(clippy::too_many_arguments)]
pub fn check_negative_drift(
    m: &NetworkModel,
    policy: &Policy,
    f: &WeightTable<f64>,
    arrivals: &ArrivalProcess,
    states: usize,
    min_total: u32,
    mc_samples: usize,
    rng: &mut impl Rng,
) -> CheckResult {
    for _ in 0..states {
        let q = random_integer_backlog(m.n_relays(), min_total, rng);
        let seed = rng.gen();
        let d = drift_estimate(&q, m, policy, f, arrivals, mc_samples, seed)
            .map_err(|e| json!({ "q": q, "error": e.to_string() }))?;
        if d.mean + 3.0 * d.std_error >= 0.0 {
            return Err(json!({ "q": q, "drift": d.mean, "std_error": d.std_error }));
        }
    }
    Ok(states)
}

/// Knobs for [`run_suites`].
#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub model: NetworkModel,
    pub seed: u64,
    pub samples: usize,
    /// Relay counts for the model-free suites.
    pub n_max: usize,
    pub ks: Vec<f64>,
    /// Replaces the geometric tables in the cone suites.
    pub weight_override: Option<WeightTable<f64>>,
    /// Geometric base for the ORCD suite; `ceil(1 + 1/p_min)` when unset.
    pub orcd_k: Option<f64>,
    pub drift_states: usize,
    pub drift_mc: usize,
    pub drift_load: f64,
}

impl VerifyOptions {
    pub fn new(model: NetworkModel) -> Self {
        VerifyOptions {
            model,
            seed: 1,
            samples: 2000,
            n_max: 4,
            ks: vec![2.0, 3.0, 10.0],
            weight_override: None,
            orcd_k: None,
            drift_states: 10,
            drift_mc: 2000,
            drift_load: 0.8,
        }
    }
}

pub fn default_options() -> VerifyOptions {
    VerifyOptions::new(topologies::four_node_example())
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub all_passed: bool,
    pub suites: Vec<SuiteReport>,
}

/// Runs every suite; stops nothing early so the report is complete.
pub fn run_suites(opts: &VerifyOptions) -> VerifyReport {
    let mut suites = Vec::new();
    let m = &opts.model;
    let n = m.n_relays();
    let tables: Vec<(String, WeightTable<f64>)> = match &opts.weight_override {
        Some(w) => vec![(w.name().to_string(), w.clone())],
        None => opts
            .ks
            .iter()
            .map(|&k| (format!("K={k}"), WeightTable::geometric(k, opts.n_max.max(n)).expect("valid K")))
            .collect(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    for (label, f) in &tables {
        for size in 2..=opts.n_max.min(crate::cones::ORACLE_LIMIT) {
            let r = ConeOracle::general(size)
                .map_err(|e| json!(e.to_string()))
                .and_then(|o| check_cone_partition(&o, f, opts.samples, &mut rng));
            suites.push(SuiteReport::from_check(&format!("cone-partition N={size} {label}"), r));
        }
        let r = ConeOracle::path_connected(m)
            .map_err(|e| json!(e.to_string()))
            .and_then(|o| check_pc_partition(m, &o, f, opts.samples, &mut rng));
        suites.push(SuiteReport::from_check(&format!("pc-cone-partition {label}"), r));
        let r = check_less_penalty(opts.n_max, f, opts.samples, &mut rng);
        suites.push(SuiteReport::from_check(&format!("less-penalty {label}"), r));
        let r = check_cone_class_bounds(opts.n_max, f, opts.samples, &mut rng);
        suites.push(SuiteReport::from_check(&format!("cone-class-bounds {label}"), r));
        let r = check_pc_cone_class_bounds(m, f, opts.samples, &mut rng);
        suites.push(SuiteReport::from_check(&format!("pc-cone-class-bounds {label}"), r));
        let r = check_backpressure_refines(opts.n_max, f, opts.samples, &mut rng);
        suites.push(SuiteReport::from_check(&format!("backpressure-refines-fpolicy {label}"), r));
        let r = check_lyapunov_smoothness(opts.n_max.min(4), f, 20, opts.samples / 10, &mut rng);
        suites.push(SuiteReport::from_check(&format!("lyapunov-smoothness {label}"), r));
        let r = check_routing_maximizes(m, f, opts.samples / 10, &mut rng);
        suites.push(SuiteReport::from_check(&format!("routing-maximizes {label}"), r));
    }

    let p_min = m.p_min().unwrap_or(0.0);
    let orcd_k = opts.orcd_k.unwrap_or_else(|| WeightTable::orcd_base(p_min));
    let mut report = match WeightTable::geometric(orcd_k, n) {
        Ok(f) => {
            let mut rep =
                SuiteReport::from_check(&format!("orcd-refines-pc-fpolicy K={orcd_k}"), check_orcd_refines(m, &f, opts.samples, &mut rng));
            if !f.check_c3(p_min, n) {
                // the refinement is only guaranteed under the ratio condition
                let seen = if rep.status == SuiteStatus::Fail { "counterexample found" } else { "no counterexample found" };
                rep.note = Some(format!("ratio condition fails for K={orcd_k} at p_min={p_min}; {seen}"));
                rep.status = SuiteStatus::ExpectedFail;
            }
            rep
        }
        Err(e) => SuiteReport::from_check("orcd-refines-pc-fpolicy", Err(json!(e.to_string()))),
    };
    if report.name.is_empty() {
        report.name = "orcd-refines-pc-fpolicy".into();
    }
    suites.push(report);
    suites.push(SuiteReport::from_check(
        "cost-edge-bound",
        check_cost_edge_bound(m, opts.samples, &mut rng),
    ));

    if opts.drift_states > 0 {
        let f = WeightTable::geometric(3.0, n).expect("valid K");
        let direction = vec![1.0; n];
        let r = scale_to_boundary(m, &direction)
            .map_err(|e| json!(e.to_string()))
            .and_then(|theta| {
                let rates = direction.iter().map(|d| d * opts.drift_load * theta).collect();
                let policy = Policy::new(PolicySpec::FPolicy, f.clone(), TieRule::LowestIndex);
                check_negative_drift(
                    m,
                    &policy,
                    &f,
                    &ArrivalProcess::bernoulli(rates),
                    opts.drift_states,
                    50,
                    opts.drift_mc,
                    &mut rng,
                )
            });
        suites.push(SuiteReport::from_check("negative-drift", r));
    }

    VerifyReport {
        all_passed: suites.iter().all(SuiteReport::passed),
        suites,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(2)
    }

    #[test]
    fn random_orderings_are_partitions() {
        let mut r = rng();
        for n in 1..=6 {
            for _ in 0..50 {
                let o = random_rank_ordering(n, &mut r);
                assert!(crate::ranking::validate_rank_ordering(&o, n).is_ok());
            }
        }
    }

    #[test]
    fn boundary_projection_ties_penalties() {
        let f = WeightTable::geometric(3.0, 3).unwrap();
        let r = RankOrdering::from_lists(&[vec![2], vec![1, 3]]).unwrap();
        let mut q = vec![1.0, 2.0, 3.0];
        project_to_merge_boundary(&r, 0, &mut q, &f);
        let c = compare_penalties(&r, &r.merge_at(0), &q, &f).unwrap();
        assert!(c.tie);
    }

    #[test]
    fn decision_enumeration_counts() {
        let sets = [(1, NodeSet::from_nodes([1, 2])), (2, NodeSet::from_nodes([0, 2])), (3, NodeSet::from_nodes([1, 2, 3]))];
        assert_eq!(enumerate_decisions(&sets).len(), 6);
    }

    #[test]
    fn small_default_run_passes() {
        let mut o = default_options();
        o.samples = 100;
        o.n_max = 3;
        o.drift_states = 2;
        o.drift_mc = 2000;
        let rep = run_suites(&o);
        assert!(rep.all_passed, "{:#?}", rep.suites.iter().filter(|s| !s.passed()).collect::<Vec<_>>());
    }

    #[test]
    fn broken_weights_fail_uniqueness() {
        let mut o = default_options();
        o.samples = 50;
        o.n_max = 3;
        o.drift_states = 0;
        o.weight_override = Some(WeightTable::from_fn("constant", 3, |_, _| 1.0));
        let rep = run_suites(&o);
        let s = rep.suites.iter().find(|s| s.name.starts_with("cone-partition N=2")).unwrap();
        assert_eq!(s.status, SuiteStatus::Fail);
        assert!(s.counterexample.as_ref().unwrap().get("q").is_some());
    }

    #[test]
    fn orcd_with_small_k_is_expected_fail() {
        // K = 2 meets the ratio condition at p_min = 0.5 only up to two relays
        let mut o = VerifyOptions::new(topologies::chain(3, 0.5));
        o.samples = 400;
        o.n_max = 2;
        o.drift_states = 0;
        o.orcd_k = Some(2.0);
        let rep = run_suites(&o);
        let s = rep.suites.iter().find(|s| s.name.starts_with("orcd-refines")).unwrap();
        assert!(s.note.is_some());
        assert_eq!(s.status, SuiteStatus::ExpectedFail);
        assert!(rep.all_passed);
    }
}
