//! Discrete-event ground-truth simulator.
//!
//! A request travels: uplink radio (one FIFO serialization queue) -> transport
//! link -> edge server (one FIFO queue) -> transport link -> downlink radio
//! (one FIFO queue). The round-trip time of every request that completes
//! inside `[warmup, sim_duration]` is returned.
//!
//! All times inside the event loop are milliseconds.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{
    percentile_performance, performance_efficiency, resource_usage, ConfigAction, LatencySummary,
    NetworkState, PerfRecord,
};
use crate::error::{Error, Result};
use crate::seed;

/// Spectral efficiency (b/s/Hz) per MCS index 0..=28.
///
/// Even indices carry the LTE CQI 1..15 efficiencies; odd indices are the
/// midpoint of their neighbours.
pub const SPECTRAL_EFFICIENCY: [f64; 29] = [
    0.1523, 0.19335, 0.2344, 0.3057, 0.3770, 0.4893, 0.6016, 0.7393, 0.8770, 1.0264, 1.1758,
    1.3262, 1.4766, 1.69535, 1.9141, 2.1602, 2.4063, 2.5684, 2.7305, 3.0264, 3.3223, 3.6123,
    3.9023, 4.21285, 4.5234, 4.8193, 5.1152, 5.33495, 5.5547,
];

pub const MIN_MCS: usize = 4;
/// MCS index reached by the distance cap at the far edge (200 m).
pub const FAR_EDGE_MCS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Uplink,
    Downlink,
}

impl Direction {
    /// Highest MCS index the direction supports at all.
    pub fn global_max_mcs(self) -> usize {
        match self {
            Direction::Uplink => 20,
            Direction::Downlink => 28,
        }
    }
}

/// Distance-limited MCS cap: falls linearly from the direction's maximum at
/// 100 m to index 8 at 200 m, rounded down, never below 4.
pub fn mcs_cap(distance: f64, direction: Direction) -> usize {
    let gmax = direction.global_max_mcs() as f64;
    let frac = ((distance - 100.0) / 100.0).clamp(0.0, 1.0);
    let cap = (gmax - (gmax - FAR_EDGE_MCS as f64) * frac).floor();
    (cap as usize).max(MIN_MCS)
}

/// `min(mcs_max, cap(distance))`. Fractional `mcs_max` (attacked states) is floored.
pub fn effective_mcs(mcs_max: f64, distance: f64, direction: Direction) -> usize {
    let own = mcs_max.floor().clamp(MIN_MCS as f64, 28.0) as usize;
    own.min(mcs_cap(distance, direction))
}

pub fn spectral_efficiency(mcs: usize) -> f64 {
    SPECTRAL_EFFICIENCY[mcs.min(SPECTRAL_EFFICIENCY.len() - 1)]
}

/// Link rate in bits/second for `prbs` resource blocks of `prb_bandwidth` Hz.
pub fn link_rate_with(prbs: f64, mcs: usize, prb_bandwidth: f64) -> f64 {
    if prbs <= 0.0 {
        return 0.0;
    }
    prbs * prb_bandwidth * spectral_efficiency(mcs)
}

/// Link rate with the standard 180 kHz resource block.
pub fn link_rate(prbs: f64, mcs: usize) -> f64 {
    link_rate_with(prbs, mcs, 180_000.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_users: u32,
    /// Seconds.
    pub sim_duration: f64,
    /// Seconds; completions before this are discarded.
    pub warmup: f64,
    pub request_rate_per_user: f64,
    /// Milliseconds.
    pub tn_delay_one_way: f64,
    /// Bits/second.
    pub tn_capacity: f64,
    /// Milliseconds at `cpu_ratio = 1`.
    pub compute_mean: f64,
    pub compute_std: f64,
    /// Hertz per PRB.
    pub prb_bandwidth: f64,
    /// Payload spread around the state's average size, as a fraction (0.25 = ±25%).
    pub payload_jitter: f64,
    /// Milliseconds.
    pub latency_threshold: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_users: 6,
            sim_duration: 30.0,
            warmup: 2.0,
            request_rate_per_user: 1.0,
            tn_delay_one_way: 2.0,
            tn_capacity: 1e9,
            compute_mean: 81.0,
            compute_std: 35.0,
            prb_bandwidth: 180_000.0,
            payload_jitter: 0.25,
            latency_threshold: 200.0,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &'static str, reason: &str| {
            Err(Error::Validation {
                field,
                reason: reason.to_string(),
            })
        };
        if self.n_users == 0 {
            return bad("n_users", "must be at least 1");
        }
        if !(self.sim_duration > 0.0 && self.sim_duration.is_finite()) {
            return bad("sim_duration", "must be positive and finite");
        }
        if !(self.warmup >= 0.0 && self.warmup < self.sim_duration) {
            return bad("warmup", "must satisfy 0 <= warmup < sim_duration");
        }
        if !(self.request_rate_per_user > 0.0 && self.request_rate_per_user.is_finite()) {
            return bad("request_rate_per_user", "must be positive and finite");
        }
        if !(self.tn_delay_one_way >= 0.0) {
            return bad("tn_delay_one_way", "must be non-negative");
        }
        if !(self.tn_capacity > 0.0) {
            return bad("tn_capacity", "must be positive");
        }
        if !(self.compute_mean > 0.0) || !(self.compute_std >= 0.0) {
            return bad("compute_mean", "mean must be positive and std non-negative");
        }
        if !(self.prb_bandwidth > 0.0) {
            return bad("prb_bandwidth", "must be positive");
        }
        if !(0.0..1.0).contains(&self.payload_jitter) {
            return bad("payload_jitter", "must lie in [0, 1)");
        }
        if !(self.latency_threshold > 0.0) {
            return bad("latency_threshold", "must be positive");
        }
        Ok(())
    }

    /// Seed of the run for one (state, action) pair.
    pub fn run_seed(&self, s: &NetworkState, a: &ConfigAction) -> u64 {
        let mut words = s.to_array().to_vec();
        words.extend(a.to_array());
        seed::mix_f64(self.seed, &words)
    }
}

/// Event kinds in tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EventKind {
    RequestGenerated,
    UlTxDone,
    EdgeArrival,
    EdgeServiceDone,
    DlArrival,
    DlTxDone,
}

#[derive(Debug, Clone, Copy)]
pub struct SimEvent {
    pub time: f64,
    pub kind: EventKind,
    pub request_id: usize,
    pub user_id: u32,
}

impl SimEvent {
    fn key(&self) -> (f64, EventKind, usize) {
        (self.time, self.kind, self.request_id)
    }
}

impl PartialEq for SimEvent {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for SimEvent {}

impl PartialOrd for SimEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SimEvent {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        let (ta, ka, ra) = self.key();
        let (tb, kb, rb) = other.key();
        tb.total_cmp(&ta).then(kb.cmp(&ka)).then(rb.cmp(&ra))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    InFlight,
    Done,
    Dropped,
}

#[derive(Debug, Clone)]
struct Request {
    gen_time: f64,
    ul_bits: f64,
    dl_bits: f64,
    status: Status,
}

/// Result of one simulation run, with the request accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    /// Round-trip times (ms) of requests completing inside `[warmup, sim_duration]`.
    pub rtts: Vec<f64>,
    pub generated: usize,
    /// All completions, including those before warmup.
    pub completed: usize,
    pub in_flight: usize,
    /// Requests that met a zero-rate link.
    pub dropped: usize,
}

/// Single-server FIFO with a deterministic service-time function.
#[derive(Debug, Default)]
struct Fifo {
    queue: VecDeque<usize>,
    busy: bool,
}

struct Engine<'a, R: Rng> {
    cfg: &'a SimConfig,
    rng: R,
    heap: BinaryHeap<SimEvent>,
    requests: Vec<Request>,
    ul: Fifo,
    edge: Fifo,
    dl: Fifo,
    ul_rate: f64,
    dl_rate: f64,
    cpu_ratio: f64,
    ul_mean_bits: f64,
    dl_mean_bits: f64,
    service: Option<Normal<f64>>,
    interarrival: Exp<f64>,
    horizon: f64,
    warmup: f64,
    completed: usize,
    dropped: usize,
    rtts: Vec<f64>,
}

impl<R: Rng> Engine<'_, R> {
    fn push(&mut self, time: f64, kind: EventKind, request_id: usize, user_id: u32) {
        self.heap.push(SimEvent {
            time,
            kind,
            request_id,
            user_id,
        });
    }

    fn payload_bits(&mut self, mean_bits: f64) -> f64 {
        let j = self.cfg.payload_jitter;
        if j == 0.0 {
            mean_bits
        } else {
            mean_bits * self.rng.random_range((1.0 - j)..=(1.0 + j))
        }
    }

    fn service_time(&mut self) -> f64 {
        let raw = match self.service {
            Some(n) => n.sample(&mut self.rng),
            None => self.cfg.compute_mean,
        };
        (raw / self.cpu_ratio).max(1.0)
    }

    fn tn_delay(&self, bits: f64) -> f64 {
        bits / self.cfg.tn_capacity * 1e3 + self.cfg.tn_delay_one_way
    }

    /// Schedules the next generation for `user` after `now`, if inside the horizon.
    fn schedule_generation(&mut self, now: f64, user: u32) {
        let gap = self.interarrival.sample(&mut self.rng) * 1e3;
        let t = now + gap;
        if t < self.horizon {
            let ul_bits = self.payload_bits(self.ul_mean_bits);
            let dl_bits = self.payload_bits(self.dl_mean_bits);
            let id = self.requests.len();
            self.requests.push(Request {
                gen_time: t,
                ul_bits,
                dl_bits,
                status: Status::InFlight,
            });
            self.push(t, EventKind::RequestGenerated, id, user);
        }
    }

    fn start_ul(&mut self, now: f64, user: u32) {
        if self.ul.busy {
            return;
        }
        if let Some(r) = self.ul.queue.pop_front() {
            self.ul.busy = true;
            let t = now + self.requests[r].ul_bits / self.ul_rate * 1e3;
            self.push(t, EventKind::UlTxDone, r, user);
        }
    }

    fn start_edge(&mut self, now: f64, user: u32) {
        if self.edge.busy {
            return;
        }
        if let Some(r) = self.edge.queue.pop_front() {
            self.edge.busy = true;
            let t = now + self.service_time();
            self.push(t, EventKind::EdgeServiceDone, r, user);
        }
    }

    fn start_dl(&mut self, now: f64, user: u32) {
        if self.dl.busy {
            return;
        }
        if let Some(r) = self.dl.queue.pop_front() {
            self.dl.busy = true;
            let t = now + self.requests[r].dl_bits / self.dl_rate * 1e3;
            self.push(t, EventKind::DlTxDone, r, user);
        }
    }

    fn run(mut self) -> SimOutcome {
        for user in 0..self.cfg.n_users {
            self.schedule_generation(0.0, user);
        }
        while let Some(ev) = self.heap.pop() {
            if ev.time > self.horizon {
                break;
            }
            let (t, r, u) = (ev.time, ev.request_id, ev.user_id);
            match ev.kind {
                EventKind::RequestGenerated => {
                    self.schedule_generation(t, u);
                    if self.ul_rate > 0.0 {
                        self.ul.queue.push_back(r);
                        self.start_ul(t, u);
                    } else {
                        self.requests[r].status = Status::Dropped;
                        self.dropped += 1;
                    }
                }
                EventKind::UlTxDone => {
                    self.ul.busy = false;
                    let arrive = t + self.tn_delay(self.requests[r].ul_bits);
                    self.push(arrive, EventKind::EdgeArrival, r, u);
                    self.start_ul(t, u);
                }
                EventKind::EdgeArrival => {
                    self.edge.queue.push_back(r);
                    self.start_edge(t, u);
                }
                EventKind::EdgeServiceDone => {
                    self.edge.busy = false;
                    let arrive = t + self.tn_delay(self.requests[r].dl_bits);
                    self.push(arrive, EventKind::DlArrival, r, u);
                    self.start_edge(t, u);
                }
                EventKind::DlArrival => {
                    if self.dl_rate > 0.0 {
                        self.dl.queue.push_back(r);
                        self.start_dl(t, u);
                    } else {
                        self.requests[r].status = Status::Dropped;
                        self.dropped += 1;
                    }
                }
                EventKind::DlTxDone => {
                    self.dl.busy = false;
                    self.requests[r].status = Status::Done;
                    self.completed += 1;
                    if t >= self.warmup {
                        self.rtts.push(t - self.requests[r].gen_time);
                    }
                    self.start_dl(t, u);
                }
            }
        }
        let in_flight = self
            .requests
            .iter()
            .filter(|r| r.status == Status::InFlight)
            .count();
        SimOutcome {
            rtts: self.rtts,
            generated: self.requests.len(),
            completed: self.completed,
            in_flight,
            dropped: self.dropped,
        }
    }
}

/// Runs one simulation and returns the full request accounting.
pub fn simulate_detailed(
    s: &NetworkState,
    a: &ConfigAction,
    cfg: &SimConfig,
) -> Result<SimOutcome> {
    s.validate()?;
    a.validate()?;
    cfg.validate()?;
    let ul_mcs = effective_mcs(s.mcs_max_ul, s.avg_distance, Direction::Uplink);
    let dl_mcs = effective_mcs(s.mcs_max_dl, s.avg_distance, Direction::Downlink);
    let service = if cfg.compute_std > 0.0 {
        Some(Normal::new(cfg.compute_mean, cfg.compute_std).map_err(|e| Error::Validation {
            field: "compute_std",
            reason: e.to_string(),
        })?)
    } else {
        None
    };
    let interarrival = Exp::new(cfg.request_rate_per_user).map_err(|e| Error::Validation {
        field: "request_rate_per_user",
        reason: e.to_string(),
    })?;
    let engine = Engine {
        cfg,
        rng: seed::rng(cfg.run_seed(s, a)),
        heap: BinaryHeap::new(),
        requests: Vec::new(),
        ul: Fifo::default(),
        edge: Fifo::default(),
        dl: Fifo::default(),
        ul_rate: link_rate_with(a.bandwidth_ul, ul_mcs, cfg.prb_bandwidth),
        dl_rate: link_rate_with(a.bandwidth_dl, dl_mcs, cfg.prb_bandwidth),
        cpu_ratio: a.cpu_ratio.max(0.01),
        ul_mean_bits: s.ul_avg_size * 8.0,
        dl_mean_bits: s.dl_avg_size * 8.0,
        service,
        interarrival,
        horizon: cfg.sim_duration * 1e3,
        warmup: cfg.warmup * 1e3,
        completed: 0,
        dropped: 0,
        rtts: Vec::new(),
    };
    Ok(engine.run())
}

/// Round-trip times (ms) of the requests completing after warmup.
pub fn simulate(s: &NetworkState, a: &ConfigAction, cfg: &SimConfig) -> Result<Vec<f64>> {
    simulate_detailed(s, a, cfg).map(|o| o.rtts)
}

/// Simulates one pair and scores it.
pub fn pe_of(s: &NetworkState, a: &ConfigAction, cfg: &SimConfig) -> Result<PerfRecord> {
    let rtts = simulate(s, a, cfg)?;
    record_from_latencies(s, a, &rtts, cfg.latency_threshold)
}

pub fn record_from_latencies(
    s: &NetworkState,
    a: &ConfigAction,
    rtts: &[f64],
    threshold_ms: f64,
) -> Result<PerfRecord> {
    let prob = percentile_performance(rtts, threshold_ms);
    let usage = resource_usage(a)?;
    let pe = performance_efficiency(prob, usage)?;
    Ok(PerfRecord {
        state: *s,
        action: *a,
        latency: LatencySummary::from_latencies(rtts),
        prob,
        usage,
        pe,
    })
}

/// Anything that can score a (state, action) pair with its achieved PE.
pub trait GroundTruth: Sync {
    fn pe(&self, s: &NetworkState, a: &ConfigAction) -> Result<f64>;
}

/// The simulator as a ground-truth oracle.
#[derive(Debug, Clone)]
pub struct SimOracle {
    pub cfg: SimConfig,
}

impl SimOracle {
    pub fn new(cfg: SimConfig) -> Self {
        Self { cfg }
    }
}

impl GroundTruth for SimOracle {
    fn pe(&self, s: &NetworkState, a: &ConfigAction) -> Result<f64> {
        pe_of(s, a, &self.cfg)
            .map(|r| r.pe)
            .map_err(|e| Error::Simulation {
                state: s.to_array(),
                action: a.to_array(),
                source: Box::new(e),
            })
    }
}

impl<F> GroundTruth for F
where
    F: Fn(&NetworkState, &ConfigAction) -> Result<f64> + Sync,
{
    fn pe(&self, s: &NetworkState, a: &ConfigAction) -> Result<f64> {
        self(s, a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mid_state() -> NetworkState {
        NetworkState::new(15_000.0, 15_000.0, 12.0, 16.0, 150.0).unwrap()
    }

    #[test]
    fn effective_mcs_examples() {
        assert_eq!(effective_mcs(28.0, 100.0, Direction::Downlink), 28);
        assert_eq!(effective_mcs(4.0, 200.0, Direction::Uplink), 4);
        // 20 - (20 - 8) * 0.5
        assert_eq!(effective_mcs(20.0, 150.0, Direction::Uplink), 14);
        assert_eq!(mcs_cap(200.0, Direction::Downlink), 8);
    }

    #[test]
    fn spectral_table_interpolates_cqi_anchors() {
        let cqi = [
            0.1523, 0.2344, 0.3770, 0.6016, 0.8770, 1.1758, 1.4766, 1.9141, 2.4063, 2.7305, 3.3223,
            3.9023, 4.5234, 5.1152, 5.5547,
        ];
        for (k, &e) in cqi.iter().enumerate() {
            assert_eq!(SPECTRAL_EFFICIENCY[2 * k], e);
        }
        for i in (1..29).step_by(2) {
            let mid = 0.5 * (SPECTRAL_EFFICIENCY[i - 1] + SPECTRAL_EFFICIENCY[i + 1]);
            assert!((SPECTRAL_EFFICIENCY[i] - mid).abs() < 1e-12, "index {i}");
        }
        assert!(SPECTRAL_EFFICIENCY.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn link_rate_examples() {
        assert_eq!(link_rate(0.0, 10), 0.0);
        assert_eq!(link_rate(50.0, 28), 50.0 * 180_000.0 * 5.5547);
        for m in 4..28 {
            assert!(link_rate(50.0, m) <= link_rate(50.0, m + 1));
        }
    }

    #[test]
    fn zero_uplink_gives_no_completions() {
        let a = ConfigAction::new(0.0, 50.0, 1.0).unwrap();
        let out = simulate_detailed(&mid_state(), &a, &SimConfig::default()).unwrap();
        assert!(out.rtts.is_empty());
        assert_eq!(out.dropped, out.generated);
        let rec = pe_of(&mid_state(), &a, &SimConfig::default()).unwrap();
        assert_eq!(rec.prob, 0.0);
        assert_eq!(rec.pe, 0.0);
    }

    #[test]
    fn zero_downlink_terminates() {
        let a = ConfigAction::new(50.0, 0.0, 1.0).unwrap();
        let out = simulate_detailed(&mid_state(), &a, &SimConfig::default()).unwrap();
        assert!(out.rtts.is_empty());
        assert_eq!(out.completed + out.in_flight + out.dropped, out.generated);
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = SimConfig {
            warmup: 40.0,
            ..SimConfig::default()
        };
        let a = ConfigAction::new(10.0, 10.0, 1.0).unwrap();
        assert!(matches!(
            simulate(&mid_state(), &a, &cfg),
            Err(Error::Validation { field: "warmup", .. })
        ));
    }

    #[test]
    fn rtt_lower_bound() {
        let cfg = SimConfig::default();
        let a = ConfigAction::new(30.0, 30.0, 1.0).unwrap();
        let rtts = simulate(&mid_state(), &a, &cfg).unwrap();
        assert!(!rtts.is_empty());
        let floor = 2.0 * cfg.tn_delay_one_way + 1.0;
        assert!(rtts.iter().all(|&r| r >= floor));
    }

    #[test]
    fn more_cpu_reduces_mean_rtt() {
        let cfg = SimConfig::default();
        let mean = |cpu| {
            let a = ConfigAction::new(50.0, 50.0, cpu).unwrap();
            let r = simulate(&mid_state(), &a, &cfg).unwrap();
            r.iter().sum::<f64>() / r.len() as f64
        };
        assert!(mean(1.0) < mean(0.5));
    }

    #[test]
    fn event_order_breaks_ties_by_kind_then_id() {
        let mut heap = BinaryHeap::new();
        for (kind, id) in [
            (EventKind::DlTxDone, 0),
            (EventKind::RequestGenerated, 5),
            (EventKind::RequestGenerated, 2),
        ] {
            heap.push(SimEvent {
                time: 1.0,
                kind,
                request_id: id,
                user_id: 0,
            });
        }
        let order: Vec<_> = std::iter::from_fn(|| heap.pop())
            .map(|e| (e.kind, e.request_id))
            .collect();
        assert_eq!(
            order,
            vec![
                (EventKind::RequestGenerated, 2),
                (EventKind::RequestGenerated, 5),
                (EventKind::DlTxDone, 0)
            ]
        );
    }
}
