//! Slotted queue dynamics driven by a priority-based policy.

use std::collections::VecDeque;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cones::{lyapunov_star, lyapunov_star_pc};
use crate::model::NetworkModel;
use crate::nodeset::{NodeId, NodeSet};
use crate::policies::{select_with_table, Policy, PolicyError, PolicySpec, RankTable};
use crate::ranking::RankOrdering;
use crate::rng::{derive_seed, Purpose, Substreams};
use crate::weights::WeightTable;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("invalid simulation config: {0}")]
    Config(String),
}

/// Per-relay FIFO queues of packet birth slots.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct QueueState {
    /// Indexed by node label; entry 0 (the destination) stays empty.
    queues: Vec<VecDeque<u64>>,
    pub arrived: u64,
    pub delivered: u64,
    pub delay_sum: u64,
}

impl QueueState {
    pub fn empty(n_relays: usize) -> Self {
        QueueState {
            queues: vec![VecDeque::new(); n_relays + 1],
            ..Default::default()
        }
    }

    /// State holding `q[k - 1]` packets at relay `k`, all born at `birth`.
    pub fn with_backlog(q: &[u32], birth: u64) -> Self {
        let mut s = Self::empty(q.len());
        for (k, &count) in q.iter().enumerate() {
            s.queues[k + 1].extend(std::iter::repeat_n(birth, count as usize));
        }
        s.arrived = q.iter().map(|&x| x as u64).sum();
        s
    }

    pub fn n_relays(&self) -> usize {
        self.queues.len() - 1
    }

    pub fn backlog(&self, node: usize) -> usize {
        self.queues[node].len()
    }

    /// `Q(t)` as counts, relay `k` at index `k - 1`.
    pub fn counts(&self) -> Vec<u32> {
        self.queues[1..].iter().map(|x| x.len() as u32).collect()
    }

    pub fn backlog_vector(&self) -> Vec<f64> {
        self.queues[1..].iter().map(|x| x.len() as f64).collect()
    }

    pub fn total_backlog(&self) -> u64 {
        self.queues[1..].iter().map(|x| x.len() as u64).sum()
    }

    pub fn head_birth(&self, node: usize) -> Option<u64> {
        self.queues[node].front().copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ArrivalKind {
    #[default]
    Bernoulli,
    /// Uniform batch on `{0, ..., A_max}`, each packet kept with a
    /// probability that brings the mean to `λ_i`.
    BatchUniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrivalProcess {
    pub kind: ArrivalKind,
    /// `λ_i` for relay `i` at index `i - 1`.
    pub rates: Vec<f64>,
    pub a_max: u32,
}

impl ArrivalProcess {
    pub fn bernoulli(rates: Vec<f64>) -> Self {
        ArrivalProcess {
            kind: ArrivalKind::Bernoulli,
            rates,
            a_max: 1,
        }
    }

    pub fn batch_uniform(rates: Vec<f64>, a_max: u32) -> Self {
        ArrivalProcess {
            kind: ArrivalKind::BatchUniform,
            rates,
            a_max,
        }
    }

    pub fn none(n_relays: usize) -> Self {
        Self::bernoulli(vec![0.0; n_relays])
    }

    pub fn validate(&self, n_relays: usize) -> Result<(), SimError> {
        if self.rates.len() != n_relays {
            return Err(SimError::Config(format!(
                "{} arrival rates for {} relays",
                self.rates.len(),
                n_relays
            )));
        }
        let cap = match self.kind {
            ArrivalKind::Bernoulli => 1.0,
            ArrivalKind::BatchUniform => self.a_max as f64 / 2.0,
        };
        if let Some((i, r)) = self
            .rates
            .iter()
            .enumerate()
            .find(|(_, &r)| !(0.0..=cap).contains(&r))
        {
            return Err(SimError::Config(format!(
                "arrival rate {r} at relay {} outside [0, {cap}]",
                i + 1
            )));
        }
        Ok(())
    }

    /// `A_i(t)` for relay `node`.
    pub fn sample<R: Rng + ?Sized>(&self, node: usize, rng: &mut R) -> u32 {
        let rate = self.rates[node - 1];
        if rate <= 0.0 {
            return 0;
        }
        match self.kind {
            ArrivalKind::Bernoulli => rng.gen_bool(rate) as u32,
            ArrivalKind::BatchUniform => {
                let batch = rng.gen_range(0..=self.a_max);
                let keep = (2.0 * rate / self.a_max as f64).min(1.0);
                (0..batch).filter(|_| rng.gen_bool(keep)).count() as u32
            }
        }
    }
}

/// One transmitter's slot: realized forwarder set and chosen forwarder.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transmission {
    pub node: usize,
    pub set: NodeSet,
    pub forwarder: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RoutingDecision {
    pub transmissions: Vec<Transmission>,
}

impl RoutingDecision {
    /// `(transmitter, forwarder)` pairs.
    pub fn moves(&self) -> Vec<(usize, usize)> {
        self.transmissions.iter().map(|t| (t.node, t.forwarder)).collect()
    }

    /// Forwarder inside the realized set, forced delivery when the
    /// destination heard the packet, one forwarder per transmitter.
    pub fn is_feasible(&self) -> bool {
        let mut seen = NodeSet::EMPTY;
        self.transmissions.iter().all(|t| {
            let ok = t.set.contains(t.node)
                && t.set.contains(t.forwarder)
                && (!t.set.contains(0) || t.forwarder == 0)
                && !seen.contains(t.node);
            seen = seen.with(t.node);
            ok
        })
    }
}

#[derive(Clone, Debug)]
pub struct StepRecord {
    pub ordering: RankOrdering,
    pub decision: RoutingDecision,
    pub arrivals: Vec<u32>,
}

/// One slot of the dynamics: rank, decide against `Q(t)`, move packets
/// atomically, then append exogenous arrivals born at `slot`.
pub fn step(
    state: &mut QueueState,
    m: &NetworkModel,
    policy: &Policy,
    arrivals: &ArrivalProcess,
    streams: &Substreams,
    slot: u64,
) -> Result<StepRecord, SimError> {
    let n = m.n_relays();
    let ordering = policy.rank(&state.backlog_vector(), m)?;
    let ranks = RankTable::new(&ordering);
    let mut decision = RoutingDecision::default();
    for i in 1..=n {
        if state.queues[i].is_empty() {
            continue;
        }
        let mut channel = streams.stream(Purpose::Channel, i as u64, slot);
        let set = m.sample_forwarder_set(NodeId(i), &mut channel);
        let mut tie = streams.stream(Purpose::TieBreak, i as u64, slot);
        let forwarder = select_with_table(&ranks, NodeId(i), set, policy.tie, &mut tie).0;
        decision.transmissions.push(Transmission { node: i, set, forwarder });
    }
    let mut in_flight = Vec::with_capacity(decision.transmissions.len());
    for t in &decision.transmissions {
        if t.forwarder != t.node {
            let birth = state.queues[t.node].pop_front().expect("transmitter holds a packet");
            in_flight.push((t.forwarder, birth));
        }
    }
    for (to, birth) in in_flight {
        if to == 0 {
            state.delivered += 1;
            state.delay_sum += slot - birth;
        } else {
            state.queues[to].push_back(birth);
        }
    }
    let mut arrived = vec![0; n];
    for (i, a) in arrived.iter_mut().enumerate() {
        let mut rng = streams.stream(Purpose::Arrival, (i + 1) as u64, slot);
        *a = arrivals.sample(i + 1, &mut rng);
        state.queues[i + 1].extend(std::iter::repeat_n(slot, *a as usize));
        state.arrived += *a as u64;
    }
    Ok(StepRecord {
        ordering,
        decision,
        arrivals: arrived,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceMode {
    #[default]
    Off,
    /// Backlog and arrivals of every relay at every slot.
    Full,
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub model: NetworkModel,
    pub policy: Policy,
    pub arrivals: ArrivalProcess,
    pub horizon: u64,
    pub warmup: u64,
    pub seed: u64,
    pub trace: TraceMode,
}

impl SimConfig {
    /// Config with the default 10% warmup and no trace.
    pub fn new(model: NetworkModel, policy: Policy, arrivals: ArrivalProcess, horizon: u64, seed: u64) -> Self {
        SimConfig {
            model,
            policy,
            arrivals,
            horizon,
            warmup: horizon / 10,
            seed,
            trace: TraceMode::Off,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.horizon <= self.warmup {
            return Err(SimError::Config(format!(
                "horizon {} must exceed warmup {}",
                self.horizon, self.warmup
            )));
        }
        self.arrivals.validate(self.model.n_relays())?;
        self.policy.validate(&self.model)?;
        Ok(())
    }
}

/// Backlog `Q(t)` at the start of slot `slot` and the arrivals of that slot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRow {
    pub slot: u64,
    pub backlog: Vec<u32>,
    pub arrivals: Vec<u32>,
}

/// Number of equal blocks over which the total backlog is averaged.
pub const BLOCKS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimStats {
    pub policy: String,
    pub seed: u64,
    pub horizon: u64,
    pub warmup: u64,
    /// Mean of `Σ_i Q_i(t)` over slots `t ≥ warmup`.
    pub avg_total_backlog: f64,
    pub avg_backlog: Vec<f64>,
    /// Mean delay of packets delivered at or after warmup.
    pub mean_delay: f64,
    pub delivered: u64,
    pub arrived: u64,
    /// Largest `Σ_i Q_i(t)` over `0 ≤ t ≤ horizon`.
    pub max_total_backlog: u64,
    pub final_backlog: Vec<u32>,
    /// Mean total backlog per block of `horizon / BLOCKS` slots, from slot 0.
    pub block_averages: Vec<f64>,
    #[serde(skip)]
    pub trace: Option<Vec<TraceRow>>,
}

impl SimStats {
    pub fn final_total_backlog(&self) -> u64 {
        self.final_backlog.iter().map(|&x| x as u64).sum()
    }

    /// Mean of the last `fraction` of the block averages.
    pub fn tail_average(&self, fraction: f64) -> f64 {
        let k = ((self.block_averages.len() as f64 * fraction).round() as usize).clamp(1, self.block_averages.len());
        let tail = &self.block_averages[self.block_averages.len() - k..];
        tail.iter().sum::<f64>() / k as f64
    }
}

/// Step-by-step driver over a validated config.
pub struct Simulation<'a> {
    cfg: &'a SimConfig,
    streams: Substreams,
    pub state: QueueState,
    pub slot: u64,
}

impl<'a> Simulation<'a> {
    pub fn new(cfg: &'a SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        Ok(Simulation {
            cfg,
            streams: Substreams::new(cfg.seed),
            state: QueueState::empty(cfg.model.n_relays()),
            slot: 0,
        })
    }

    pub fn step(&mut self) -> Result<StepRecord, SimError> {
        let rec = step(
            &mut self.state,
            &self.cfg.model,
            &self.cfg.policy,
            &self.cfg.arrivals,
            &self.streams,
            self.slot,
        )?;
        self.slot += 1;
        Ok(rec)
    }
}

/// Runs `cfg` to its horizon; deterministic given the seed.
pub fn run(cfg: &SimConfig) -> Result<SimStats, SimError> {
    run_observed(cfg, |_, _, _| {})
}

/// [`run`] with a callback seeing `(slot, Q(t), record)` for every slot.
pub fn run_observed(cfg: &SimConfig, mut observe: impl FnMut(u64, &[u32], &StepRecord)) -> Result<SimStats, SimError> {
    let mut sim = Simulation::new(cfg)?;
    let n = cfg.model.n_relays();
    let blocks = BLOCKS.min(cfg.horizon as usize);
    let mut block_sums = vec![0u64; blocks];
    let mut block_lens = vec![0u64; blocks];
    let mut per_node = vec![0u64; n];
    let mut total_sum = 0u64;
    let mut max_total = 0u64;
    let mut delivered_at_warmup = 0;
    let mut delay_at_warmup = 0;
    let mut trace = (cfg.trace == TraceMode::Full).then(|| Vec::with_capacity(cfg.horizon as usize));
    for t in 0..cfg.horizon {
        if t == cfg.warmup {
            delivered_at_warmup = sim.state.delivered;
            delay_at_warmup = sim.state.delay_sum;
        }
        let q = sim.state.counts();
        let total: u64 = q.iter().map(|&x| x as u64).sum();
        max_total = max_total.max(total);
        let b = (t as u128 * blocks as u128 / cfg.horizon as u128) as usize;
        block_sums[b] += total;
        block_lens[b] += 1;
        if t >= cfg.warmup {
            total_sum += total;
            for (acc, &x) in per_node.iter_mut().zip(&q) {
                *acc += x as u64;
            }
        }
        let rec = sim.step()?;
        observe(t, &q, &rec);
        if let Some(tr) = trace.as_mut() {
            tr.push(TraceRow {
                slot: t,
                backlog: q,
                arrivals: rec.arrivals,
            });
        }
    }
    max_total = max_total.max(sim.state.total_backlog());
    let measured = (cfg.horizon - cfg.warmup) as f64;
    let late = sim.state.delivered - delivered_at_warmup;
    Ok(SimStats {
        policy: cfg.policy.spec.name(),
        seed: cfg.seed,
        horizon: cfg.horizon,
        warmup: cfg.warmup,
        avg_total_backlog: total_sum as f64 / measured,
        avg_backlog: per_node.iter().map(|&x| x as f64 / measured).collect(),
        mean_delay: if late == 0 {
            0.0
        } else {
            (sim.state.delay_sum - delay_at_warmup) as f64 / late as f64
        },
        delivered: sim.state.delivered,
        arrived: sim.state.arrived,
        max_total_backlog: max_total,
        final_backlog: sim.state.counts(),
        block_averages: block_sums
            .iter()
            .zip(&block_lens)
            .map(|(&s, &l)| s as f64 / l.max(1) as f64)
            .collect(),
        trace,
    })
}

/// Monte Carlo estimate of a one-slot Lyapunov drift.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DriftEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// `E[L*_f(Q(t+1)) - L*_f(Q(t)) | Q(t) = q]` from `n_samples` independent
/// one-slot transitions. The path-connected Lyapunov function is used for
/// the path-connected f-policy, the general one otherwise.
#[allow(clippy::too_many_arguments)]
pub fn drift_estimate(
    q: &[u32],
    m: &NetworkModel,
    policy: &Policy,
    f: &WeightTable<f64>,
    arrivals: &ArrivalProcess,
    n_samples: usize,
    seed: u64,
) -> Result<DriftEstimate, SimError> {
    if n_samples == 0 {
        return Err(SimError::Config("n_samples must be at least 1".into()));
    }
    arrivals.validate(m.n_relays())?;
    policy.validate(m)?;
    let pc = policy.spec == PolicySpec::PcFPolicy;
    let lyap = |x: &[f64]| if pc { lyapunov_star_pc(x, f, m) } else { lyapunov_star(x, f) };
    let q0: Vec<f64> = q.iter().map(|&x| x as f64).collect();
    let before = lyap(&q0);
    let start = QueueState::with_backlog(q, 0);
    let diffs: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|s| {
            let streams = Substreams::new(derive_seed(seed, s as u64));
            let mut state = start.clone();
            step(&mut state, m, policy, arrivals, &streams, 1).map(|_| lyap(&state.backlog_vector()) - before)
        })
        .collect::<Result<_, _>>()?;
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = if diffs.len() > 1 {
        diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(DriftEstimate {
        mean,
        std_error: (var / n).sqrt(),
        samples: diffs.len(),
    })
}
