//! Arrival vectors against the stability region.
//!
//! A rate vector is stabilizable iff some stationary randomized routing,
//! deciding from the realized forwarder set only, delivers strictly more
//! net flow out of every relay than arrives there. The decision variables
//! `x[i, S, j]` give the probability that transmitter `i` hands its packet
//! to `j ∈ S` when `S` heard it; a set containing the destination always
//! delivers.

use serde::Serialize;
use thiserror::Error;

use crate::model::NetworkModel;
use crate::simplex::{LinearProgram, LpError, Relation};

/// Minimum slack for a rate vector to count as interior.
pub const INTERIOR_TOLERANCE: f64 = 1e-10;
/// Width at which [`scale_to_boundary`] stops bisecting.
pub const BISECTION_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CapacityError {
    #[error("network is not connected")]
    NotConnected,
    #[error("LP solver failed: {0}")]
    LpNumericalFailure(#[from] LpError),
    #[error("rate vector has {got} entries, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("rate vector must be nonnegative and finite")]
    BadRates,
}

/// Forwarding distribution of one transmitter for one realized set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WitnessEntry {
    pub node: usize,
    pub set: Vec<usize>,
    pub prob: f64,
    /// `(forwarder, probability)`.
    pub forward: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CapacityResult {
    pub feasible: bool,
    /// Optimal `ε`; negative when the rate vector is outside the region.
    pub slack: f64,
    pub witness: Vec<WitnessEntry>,
}

/// Variable layout of the flow LP.
struct FlowVars {
    /// `(node, outcome index, forwarder, column)`.
    cols: Vec<(usize, usize, usize, usize)>,
    n_cols: usize,
}

fn flow_vars(m: &NetworkModel) -> FlowVars {
    let mut cols = Vec::new();
    let mut next = 0;
    for i in 1..=m.n_relays() {
        for (o, out) in m.outcomes(i).iter().enumerate() {
            if out.set.contains(0) {
                continue;
            }
            for j in out.set.iter() {
                cols.push((i, o, j, next));
                next += 1;
            }
        }
    }
    FlowVars { cols, n_cols: next }
}

/// Constraint rows `net_out_k(x) - extra_k ≥ rhs_k`, with `extra` the
/// coefficient row of the scalar variable at column `scalar`, plus the
/// per-set normalisation rows.
fn add_flow_rows(lp: &mut LinearProgram, m: &NetworkModel, vars: &FlowVars, scalar: usize, extra: &[f64], rhs: &[f64]) {
    let n = m.n_relays();
    let width = lp.n_vars();
    for k in 1..=n {
        let mut row = vec![0.0; width];
        let mut constant = 0.0;
        for o in m.outcomes(k) {
            if o.set.contains(0) {
                constant += o.prob;
            }
        }
        for &(i, oi, j, c) in &vars.cols {
            let p = m.outcomes(i)[oi].prob;
            if i == k && j != k {
                row[c] += p;
            }
            if j == k && i != k {
                row[c] -= p;
            }
        }
        row[scalar] -= extra[k - 1];
        if scalar + 1 < width {
            row[scalar + 1] += extra[k - 1];
        }
        lp.add(row, Relation::Ge, rhs[k - 1] - constant);
    }
    for i in 1..=n {
        for (oi, o) in m.outcomes(i).iter().enumerate() {
            if o.set.contains(0) {
                continue;
            }
            let mut row = vec![0.0; width];
            for &(_, _, _, c) in vars.cols.iter().filter(|v| v.0 == i && v.1 == oi) {
                row[c] = 1.0;
            }
            lp.add(row, Relation::Eq, 1.0);
        }
    }
}

fn witness(m: &NetworkModel, vars: &FlowVars, x: &[f64]) -> Vec<WitnessEntry> {
    let mut out = Vec::new();
    for i in 1..=m.n_relays() {
        for (oi, o) in m.outcomes(i).iter().enumerate() {
            let forward = if o.set.contains(0) {
                vec![(0, 1.0)]
            } else {
                vars.cols
                    .iter()
                    .filter(|v| v.0 == i && v.1 == oi)
                    .map(|v| (v.2, x[v.3].max(0.0)))
                    .collect()
            };
            out.push(WitnessEntry {
                node: i,
                set: o.set.iter().collect(),
                prob: o.prob,
                forward,
            });
        }
    }
    out
}

/// Expected net outflow `Σ_j E[μ_kj] - Σ_i E[μ_ik]` of every relay under a witness.
pub fn witness_net_outflow(m: &NetworkModel, witness: &[WitnessEntry]) -> Vec<f64> {
    let mut net = vec![0.0; m.n_relays()];
    for w in witness {
        for &(j, x) in &w.forward {
            if j == w.node {
                continue;
            }
            net[w.node - 1] += w.prob * x;
            if j != 0 {
                net[j - 1] -= w.prob * x;
            }
        }
    }
    net
}

fn check_rates(m: &NetworkModel, lambda: &[f64]) -> Result<(), CapacityError> {
    if lambda.len() != m.n_relays() {
        return Err(CapacityError::LengthMismatch {
            got: lambda.len(),
            expected: m.n_relays(),
        });
    }
    if lambda.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(CapacityError::BadRates);
    }
    Ok(())
}

/// Maximizes `ε` with `net_out_k ≥ λ_k + ε` for every relay.
pub fn stability_lp_feasible(m: &NetworkModel, lambda: &[f64]) -> Result<CapacityResult, CapacityError> {
    check_rates(m, lambda)?;
    if !m.is_connected() {
        return Err(CapacityError::NotConnected);
    }
    let vars = flow_vars(m);
    // ε is free: ε = ε⁺ - ε⁻ in the last two columns
    let mut lp = LinearProgram::new(vars.n_cols + 2);
    lp.objective[vars.n_cols] = 1.0;
    lp.objective[vars.n_cols + 1] = -1.0;
    let ones = vec![1.0; m.n_relays()];
    add_flow_rows(&mut lp, m, &vars, vars.n_cols, &ones, lambda);
    let sol = lp.solve()?;
    let slack = sol.objective;
    Ok(CapacityResult {
        feasible: slack > INTERIOR_TOLERANCE,
        slack,
        witness: witness(m, &vars, &sol.x),
    })
}

/// `θ* = sup{θ : θ·direction is stabilizable}` by bisection on the slack LP.
pub fn scale_to_boundary(m: &NetworkModel, direction: &[f64]) -> Result<f64, CapacityError> {
    check_rates(m, direction)?;
    if direction.iter().all(|&d| d == 0.0) {
        return Err(CapacityError::BadRates);
    }
    let reachable = m.connected_relays();
    if direction
        .iter()
        .enumerate()
        .any(|(k, &d)| d > 0.0 && !reachable.contains(k + 1))
    {
        return Ok(0.0);
    }
    if !m.is_connected() {
        return Err(CapacityError::NotConnected);
    }
    let dmax = direction.iter().cloned().fold(0.0, f64::max);
    // a relay never pushes out more than one packet per slot
    let (mut lo, mut hi) = (0.0, 1.0 / dmax + BISECTION_TOLERANCE);
    let scaled = |t: f64| direction.iter().map(|d| d * t).collect::<Vec<_>>();
    while hi - lo > BISECTION_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if stability_lp_feasible(m, &scaled(mid))?.feasible {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `θ*` from a single LP maximizing `θ` with `net_out_k ≥ θ·d_k`; used to
/// cross-check the bisection.
pub fn max_scaling_lp(m: &NetworkModel, direction: &[f64]) -> Result<f64, CapacityError> {
    check_rates(m, direction)?;
    if !m.is_connected() {
        return Err(CapacityError::NotConnected);
    }
    let vars = flow_vars(m);
    let mut lp = LinearProgram::new(vars.n_cols + 1);
    lp.objective[vars.n_cols] = 1.0;
    let zeros = vec![0.0; m.n_relays()];
    add_flow_rows(&mut lp, m, &vars, vars.n_cols, direction, &zeros);
    Ok(lp.solve()?.objective)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topologies;

    #[test]
    fn single_relay_region() {
        let m = topologies::single_relay(0.5);
        let r = stability_lp_feasible(&m, &[0.4]).unwrap();
        assert!(r.feasible);
        assert!((r.slack - 0.1).abs() < 1e-9);
        assert!(!stability_lp_feasible(&m, &[0.6]).unwrap().feasible);
        assert!(stability_lp_feasible(&m, &[0.0]).unwrap().slack > 0.0);
        let theta = scale_to_boundary(&m, &[1.0]).unwrap();
        assert!((theta - 0.5).abs() < 1e-6);
        assert!((max_scaling_lp(&m, &[1.0]).unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn chain_relays_upstream_traffic() {
        // node 2 gets 0.5/slot to node 1, node 1 delivers at most 0.5/slot
        let m = topologies::chain(2, 0.5);
        let theta = scale_to_boundary(&m, &[0.0, 1.0]).unwrap();
        assert!((theta - 0.5).abs() < 1e-6);
        assert!((max_scaling_lp(&m, &[1.0, 1.0]).unwrap() - 0.25).abs() < 1e-9);
    }

    #[test]
    fn witness_reproduces_slack() {
        let m = topologies::four_node_example();
        let lambda = [0.1, 0.2, 0.1];
        let r = stability_lp_feasible(&m, &lambda).unwrap();
        let net = witness_net_outflow(&m, &r.witness);
        let achieved = net.iter().zip(&lambda).map(|(n, l)| n - l).fold(f64::INFINITY, f64::min);
        assert!((achieved - r.slack).abs() < 1e-8);
        for w in &r.witness {
            assert!(w.forward.iter().all(|x| x.1 >= 0.0));
            assert!((w.forward.iter().map(|x| x.1).sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn disconnected_models() {
        let m = NetworkModel::from_lists(2, &[(1, vec![(vec![0, 1], 0.5), (vec![1], 0.5)]), (2, vec![(vec![2], 1.0)])])
            .unwrap();
        assert_eq!(stability_lp_feasible(&m, &[0.1, 0.0]), Err(CapacityError::NotConnected));
        assert_eq!(scale_to_boundary(&m, &[0.0, 1.0]).unwrap(), 0.0);
    }
}
