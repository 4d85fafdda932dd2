//! Network state, configuration action and performance-efficiency (PE) types.
//!
//! Every other module speaks in these types. States and actions have a raw
//! (physical units) view and a normalized view in `[0, 1]`; the normalization
//! ranges are frozen constants and are written into every dataset header.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of state components.
pub const STATE_DIM: usize = 5;
/// Number of action components.
pub const ACTION_DIM: usize = 3;
/// Predictor input width: normalized state followed by normalized action.
pub const FEATURE_DIM: usize = STATE_DIM + ACTION_DIM;

/// Floor on resource usage so the all-zero action does not divide by zero.
pub const USAGE_FLOOR: f64 = 0.05;

/// Maximum physical resource blocks per direction.
pub const MAX_PRB: f64 = 50.0;

/// Closed interval used for normalization of one component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn normalize(&self, x: f64) -> f64 {
        (x - self.lo) / self.width()
    }

    pub fn denormalize(&self, u: f64) -> f64 {
        self.lo + u * self.width()
    }
}

/// State component names, in normalized-vector order.
pub const STATE_FIELDS: [&str; STATE_DIM] = [
    "ul_avg_size",
    "dl_avg_size",
    "mcs_max_ul",
    "mcs_max_dl",
    "avg_distance",
];

/// Ranges for `(ul_avg_size [B], dl_avg_size [B], mcs_max_ul, mcs_max_dl, avg_distance [m])`.
pub const STATE_RANGES: [Range; STATE_DIM] = [
    Range::new(10_000.0, 20_000.0),
    Range::new(10_000.0, 20_000.0),
    Range::new(4.0, 20.0),
    Range::new(4.0, 28.0),
    Range::new(100.0, 200.0),
];

pub const ACTION_FIELDS: [&str; ACTION_DIM] = ["bandwidth_ul", "bandwidth_dl", "cpu_ratio"];

/// Ranges for `(bandwidth_ul [PRB], bandwidth_dl [PRB], cpu_ratio)`.
pub const ACTION_RANGES: [Range; ACTION_DIM] = [
    Range::new(0.0, MAX_PRB),
    Range::new(0.0, MAX_PRB),
    Range::new(0.0, 1.0),
];

fn check_range(field: &'static str, value: f64, range: Range) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::Validation {
            field,
            reason: format!("non-finite value {value}"),
        });
    }
    if !range.contains(value) {
        return Err(Error::OutOfRange {
            field,
            value,
            lo: range.lo,
            hi: range.hi,
        });
    }
    Ok(())
}

/// Observed network state of one user group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    /// Average uplink payload, bytes.
    pub ul_avg_size: f64,
    /// Average downlink payload, bytes.
    pub dl_avg_size: f64,
    pub mcs_max_ul: f64,
    pub mcs_max_dl: f64,
    /// Average user distance to the base station, meters.
    pub avg_distance: f64,
}

impl NetworkState {
    pub fn new(
        ul_avg_size: f64,
        dl_avg_size: f64,
        mcs_max_ul: f64,
        mcs_max_dl: f64,
        avg_distance: f64,
    ) -> Result<Self> {
        let s = Self {
            ul_avg_size,
            dl_avg_size,
            mcs_max_ul,
            mcs_max_dl,
            avg_distance,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn to_array(&self) -> [f64; STATE_DIM] {
        [
            self.ul_avg_size,
            self.dl_avg_size,
            self.mcs_max_ul,
            self.mcs_max_dl,
            self.avg_distance,
        ]
    }

    pub fn from_array(v: [f64; STATE_DIM]) -> Self {
        Self {
            ul_avg_size: v[0],
            dl_avg_size: v[1],
            mcs_max_ul: v[2],
            mcs_max_dl: v[3],
            avg_distance: v[4],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for ((field, value), range) in STATE_FIELDS
            .iter()
            .zip(self.to_array())
            .zip(STATE_RANGES)
        {
            check_range(field, value, range)?;
        }
        Ok(())
    }
}

/// A state mapped affinely into `[0, 1]^5`, component order as [`STATE_FIELDS`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedState(pub [f64; STATE_DIM]);

impl NormalizedState {
    /// Adds a perturbation and clips every component back into `[0, 1]`.
    pub fn perturbed(&self, delta: &[f64; STATE_DIM]) -> Self {
        let mut v = self.0;
        for (x, d) in v.iter_mut().zip(delta) {
            *x = (*x + d).clamp(0.0, 1.0);
        }
        Self(v)
    }
}

pub fn normalize_state(s: &NetworkState) -> Result<NormalizedState> {
    s.validate()?;
    let raw = s.to_array();
    let mut v = [0.0; STATE_DIM];
    for i in 0..STATE_DIM {
        v[i] = STATE_RANGES[i].normalize(raw[i]);
    }
    Ok(NormalizedState(v))
}

/// Inverse of [`normalize_state`]. Components outside `[0, 1]` are rejected.
pub fn denormalize_state(n: &NormalizedState) -> Result<NetworkState> {
    let mut raw = [0.0; STATE_DIM];
    for i in 0..STATE_DIM {
        check_range(STATE_FIELDS[i], n.0[i], Range::new(0.0, 1.0))?;
        raw[i] = STATE_RANGES[i].denormalize(n.0[i]).clamp(STATE_RANGES[i].lo, STATE_RANGES[i].hi);
    }
    Ok(NetworkState::from_array(raw))
}

/// Configuration action: radio bandwidth per direction and edge CPU share.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfigAction {
    pub bandwidth_ul: f64,
    pub bandwidth_dl: f64,
    pub cpu_ratio: f64,
}

impl ConfigAction {
    pub fn new(bandwidth_ul: f64, bandwidth_dl: f64, cpu_ratio: f64) -> Result<Self> {
        let a = Self {
            bandwidth_ul,
            bandwidth_dl,
            cpu_ratio,
        };
        a.validate()?;
        Ok(a)
    }

    pub fn to_array(&self) -> [f64; ACTION_DIM] {
        [self.bandwidth_ul, self.bandwidth_dl, self.cpu_ratio]
    }

    pub fn from_array(v: [f64; ACTION_DIM]) -> Self {
        Self {
            bandwidth_ul: v[0],
            bandwidth_dl: v[1],
            cpu_ratio: v[2],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for ((field, value), range) in ACTION_FIELDS
            .iter()
            .zip(self.to_array())
            .zip(ACTION_RANGES)
        {
            check_range(field, value, range)?;
        }
        Ok(())
    }

    /// PRB components divided by 50, CPU share unchanged.
    pub fn normalized(&self) -> [f64; ACTION_DIM] {
        [
            self.bandwidth_ul / MAX_PRB,
            self.bandwidth_dl / MAX_PRB,
            self.cpu_ratio,
        ]
    }

    pub fn from_normalized(v: [f64; ACTION_DIM]) -> Self {
        Self {
            bandwidth_ul: v[0] * MAX_PRB,
            bandwidth_dl: v[1] * MAX_PRB,
            cpu_ratio: v[2],
        }
    }
}

/// Predictor input: normalized state followed by normalized action.
pub fn features(s: &NormalizedState, a: &ConfigAction) -> [f64; FEATURE_DIM] {
    let mut x = [0.0; FEATURE_DIM];
    x[..STATE_DIM].copy_from_slice(&s.0);
    x[STATE_DIM..].copy_from_slice(&a.normalized());
    x
}

/// `|a|`: mean of the normalized action components, floored at [`USAGE_FLOOR`].
pub fn resource_usage(a: &ConfigAction) -> Result<f64> {
    a.validate()?;
    let n = a.normalized();
    let mean = n.iter().sum::<f64>() / ACTION_DIM as f64;
    Ok(mean.max(USAGE_FLOOR))
}

/// `PE = prob / usage`.
pub fn performance_efficiency(prob: f64, usage: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&prob) {
        return Err(Error::Invariant(format!("prob {prob} outside [0, 1]")));
    }
    if !(usage >= USAGE_FLOOR) {
        return Err(Error::Invariant(format!(
            "usage {usage} below floor {USAGE_FLOOR}"
        )));
    }
    Ok(prob / usage)
}

/// Fraction of latencies strictly below `threshold_ms`; `0` for an empty list.
pub fn percentile_performance(latencies: &[f64], threshold_ms: f64) -> f64 {
    if latencies.is_empty() {
        return 0.0;
    }
    let below = latencies.iter().filter(|&&l| l < threshold_ms).count();
    below as f64 / latencies.len() as f64
}

/// Compact latency description kept in place of the raw per-request list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub count: usize,
    /// 10th..90th percentiles in milliseconds; empty when `count == 0`.
    pub deciles: Vec<f64>,
}

impl LatencySummary {
    pub fn from_latencies(latencies: &[f64]) -> Self {
        if latencies.is_empty() {
            return Self {
                count: 0,
                deciles: Vec::new(),
            };
        }
        let mut sorted = latencies.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let deciles = (1..10)
            .map(|k| {
                // nearest-rank
                let rank = ((k * n) as f64 / 10.0).ceil() as usize;
                sorted[rank.clamp(1, n) - 1]
            })
            .collect();
        Self { count: n, deciles }
    }
}

/// One evaluated (state, action) transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfRecord {
    pub state: NetworkState,
    pub action: ConfigAction,
    pub latency: LatencySummary,
    pub prob: f64,
    pub usage: f64,
    pub pe: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_bounds_and_midpoints() {
        let lo = NetworkState::new(10_000.0, 10_000.0, 4.0, 4.0, 100.0).unwrap();
        assert_eq!(normalize_state(&lo).unwrap().0, [0.0; 5]);
        let hi = NetworkState::new(20_000.0, 20_000.0, 20.0, 28.0, 200.0).unwrap();
        assert_eq!(normalize_state(&hi).unwrap().0, [1.0; 5]);
        let mid = NetworkState::new(15_000.0, 15_000.0, 12.0, 16.0, 150.0).unwrap();
        assert_eq!(normalize_state(&mid).unwrap().0, [0.5; 5]);
    }

    #[test]
    fn out_of_range_names_field() {
        let s = NetworkState {
            ul_avg_size: 15_000.0,
            dl_avg_size: 15_000.0,
            mcs_max_ul: 12.0,
            mcs_max_dl: 30.0,
            avg_distance: 150.0,
        };
        let err = normalize_state(&s).unwrap_err();
        assert!(err.to_string().contains("mcs_max_dl"), "{err}");
    }

    #[test]
    fn usage_examples() {
        let u = |a, b, c| resource_usage(&ConfigAction::new(a, b, c).unwrap()).unwrap();
        assert_eq!(u(50.0, 50.0, 1.0), 1.0);
        assert_eq!(u(25.0, 25.0, 0.5), 0.5);
        assert_eq!(u(0.0, 0.0, 0.0), 0.05);
    }

    #[test]
    fn pe_examples() {
        assert_eq!(performance_efficiency(1.0, 1.0).unwrap(), 1.0);
        assert_eq!(performance_efficiency(0.0, 0.5).unwrap(), 0.0);
        assert!((performance_efficiency(0.9, 0.6).unwrap() - 1.5).abs() < 1e-15);
        assert!(performance_efficiency(0.5, 0.01).is_err());
    }

    #[test]
    fn action_out_of_range() {
        assert!(ConfigAction::new(51.0, 0.0, 0.5).is_err());
        assert!(ConfigAction::new(10.0, 10.0, 1.5).is_err());
    }

    #[test]
    fn percentile_counts_strictly_below() {
        assert!((percentile_performance(&[100.0, 150.0, 250.0], 200.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(percentile_performance(&[200.0], 200.0), 0.0);
        assert_eq!(percentile_performance(&[], 200.0), 0.0);
    }

    #[test]
    fn deciles_nearest_rank() {
        let l: Vec<f64> = (1..=10).map(f64::from).collect();
        let s = LatencySummary::from_latencies(&l);
        assert_eq!(s.count, 10);
        assert_eq!(s.deciles, (1..=9).map(f64::from).collect::<Vec<_>>());
    }

    fn state_strategy() -> impl Strategy<Value = NetworkState> {
        (
            10_000.0..=20_000.0f64,
            10_000.0..=20_000.0f64,
            4.0..=20.0f64,
            4.0..=28.0f64,
            100.0..=200.0f64,
        )
            .prop_map(|(a, b, c, d, e)| NetworkState::new(a, b, c, d, e).unwrap())
    }

    proptest! {
        #[test]
        fn normalize_round_trip(s in state_strategy()) {
            let back = denormalize_state(&normalize_state(&s).unwrap()).unwrap();
            for (x, y) in s.to_array().iter().zip(back.to_array()) {
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }

        #[test]
        fn usage_permutation_symmetric(a in 0.0..=1.0f64, b in 0.0..=1.0f64, c in 0.0..=1.0f64) {
            let u1 = resource_usage(&ConfigAction::from_normalized([a, b, c])).unwrap();
            let u2 = resource_usage(&ConfigAction::from_normalized([c, a, b])).unwrap();
            let u3 = resource_usage(&ConfigAction::from_normalized([b, c, a])).unwrap();
            prop_assert!((u1 - u2).abs() < 1e-15 && (u1 - u3).abs() < 1e-15);
        }

        #[test]
        fn pe_monotone(p1 in 0.0..=1.0f64, p2 in 0.0..=1.0f64, u1 in 0.05..=1.0f64, u2 in 0.05..=1.0f64) {
            let (plo, phi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
            let (ulo, uhi) = if u1 <= u2 { (u1, u2) } else { (u2, u1) };
            prop_assert!(performance_efficiency(plo, ulo).unwrap() <= performance_efficiency(phi, ulo).unwrap());
            prop_assert!(performance_efficiency(phi, uhi).unwrap() <= performance_efficiency(phi, ulo).unwrap());
        }
    }
}
