//! Network snapshots: node geometry, flows and their QoS demands, and the
//! association policies compared in experiments.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coalition::{
    self, default_visit_order, exhaustive_optimum, form_coalitions, CoalitionError,
    CoalitionGameResult, FlowId, Partition, RateTable, Side,
};
use crate::link_model::{self, LinkError, LinkGeometry, RadioConfig};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario config:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Coalition(#[from] CoalitionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub id: FlowId,
    /// Required throughput in bits/s.
    pub qos_bps: f64,
    pub user_index: usize,
    pub association: Option<Side>,
}

/// Everything needed to generate a scenario, in linear SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Side of the square deployment area in meters.
    pub area_size_m: f64,
    pub flow_count: usize,
    pub slots_per_frame: u64,
    pub qos_min_bps: f64,
    pub qos_max_bps: f64,
    pub radio: RadioConfig,
    pub bs_position: Point,
    pub mr_position: Point,
    pub blockage_prob: f64,
    /// Link distances are clamped to at least this many meters.
    pub min_distance_m: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            area_size_m: 300.0,
            flow_count: 10,
            slots_per_frame: 2048,
            qos_min_bps: 50e6,
            qos_max_bps: 500e6,
            radio: RadioConfig::default(),
            bs_position: Point::new(0.0, 150.0),
            mr_position: Point::new(150.0, 150.0),
            blockage_prob: 0.0,
            min_distance_m: 1.0,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    /// Places the relay `d` meters along the track from the base station.
    pub fn with_mr_displacement(mut self, d: f64) -> Self {
        self.mr_position = Point::new(self.bs_position.x + d, self.bs_position.y);
        self
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut errs = match self.radio.validate() {
            Ok(()) => Vec::new(),
            Err(e) => e,
        };
        if !(self.area_size_m.is_finite() && self.area_size_m > 0.0) {
            errs.push(format!("area_size_m must be > 0 (got {})", self.area_size_m));
        }
        if self.slots_per_frame < 1 {
            errs.push("slots_per_frame must be >= 1".into());
        }
        if self.flow_count as u64 > self.slots_per_frame {
            errs.push(format!(
                "flow_count ({}) may not exceed slots_per_frame ({})",
                self.flow_count, self.slots_per_frame
            ));
        }
        if !(self.qos_min_bps.is_finite() && self.qos_min_bps >= 0.0) {
            errs.push(format!("qos_min must be >= 0 (got {})", self.qos_min_bps));
        }
        if !(self.qos_max_bps.is_finite() && self.qos_max_bps >= self.qos_min_bps) {
            errs.push(format!(
                "qos_max ({}) must be >= qos_min ({})",
                self.qos_max_bps, self.qos_min_bps
            ));
        }
        if !(0.0..=1.0).contains(&self.blockage_prob) {
            errs.push(format!("blockage_prob must lie in [0, 1] (got {})", self.blockage_prob));
        }
        if !(self.min_distance_m.is_finite() && self.min_distance_m > 0.0) {
            errs.push(format!("min_distance_m must be > 0 (got {})", self.min_distance_m));
        }
        for (name, p) in [("bs", self.bs_position), ("mr", self.mr_position)] {
            if !self.inside(p) {
                errs.push(format!(
                    "{name} position ({}, {}) lies outside the {} m area",
                    p.x, p.y, self.area_size_m
                ));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError::Invalid(errs))
        }
    }

    fn inside(&self, p: Point) -> bool {
        (0.0..=self.area_size_m).contains(&p.x) && (0.0..=self.area_size_m).contains(&p.y)
    }
}

/// An immutable network snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub bs_position: Point,
    pub mr_position: Point,
    pub user_positions: Vec<Point>,
    pub flows: Vec<Flow>,
    pub radio: RadioConfig,
    pub blockage_prob: f64,
    pub slots_per_frame: u64,
    pub min_distance_m: f64,
    pub seed: u64,
}

/// Users uniform over the area with QoS uniform in the configured range.
/// Each user's coordinates and QoS are drawn together, so the first `k`
/// flows of a larger scenario match a `k`-flow scenario with the same seed.
pub fn generate_scenario(config: &ScenarioConfig, seed: u64) -> Result<Scenario, ScenarioError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = config.area_size_m;
    let mut user_positions = Vec::with_capacity(config.flow_count);
    let mut flows = Vec::with_capacity(config.flow_count);
    for i in 0..config.flow_count {
        let x = rng.random_range(0.0..=side);
        let y = rng.random_range(0.0..=side);
        let qos = rng.random_range(config.qos_min_bps..=config.qos_max_bps);
        user_positions.push(Point::new(x, y));
        flows.push(Flow { id: FlowId(i), qos_bps: qos, user_index: i, association: None });
    }
    Ok(Scenario {
        bs_position: config.bs_position,
        mr_position: config.mr_position,
        user_positions,
        flows,
        radio: config.radio,
        blockage_prob: config.blockage_prob,
        slots_per_frame: config.slots_per_frame,
        min_distance_m: config.min_distance_m,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RelayMode {
    FullDuplex,
    HalfDuplex,
}

impl Scenario {
    pub fn len(&self) -> usize {
        self.flows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flows.is_empty()
    }

    pub fn qos(&self) -> Vec<f64> {
        self.flows.iter().map(|f| f.qos_bps).collect()
    }

    fn link_distance(&self, a: &Point, b: &Point) -> f64 {
        let d = a.distance(b);
        if d < self.min_distance_m {
            log::warn!(
                "link distance {d:.3} m below minimum, clamped to {} m",
                self.min_distance_m
            );
            self.min_distance_m
        } else {
            d
        }
    }

    /// Per-flow rates on each side. Every link is aligned at boresight, so
    /// each end contributes its antenna's maximum gain.
    pub fn flow_rates(&self, mode: RelayMode) -> Result<RateTable, ScenarioError> {
        let cfg = &self.radio;
        let g_bs = cfg.bs_antenna()?.max_gain_db();
        let g_mr = cfg.mr_antenna()?.max_gain_db();
        let g_user = cfg.user_antenna()?.max_gain_db();
        let p_t = cfg.tx_power_w;
        let (bw_bs, bw_mr) = (cfg.bs_bandwidth(), cfg.mr_bandwidth());

        let backhaul = LinkGeometry {
            distance_m: self.link_distance(&self.bs_position, &self.mr_position),
            tx_gain_db: g_bs,
            rx_gain_db: g_mr,
        };
        let p_backhaul = link_model::received_power(p_t, &backhaul, cfg);

        let mut bs = Vec::with_capacity(self.len());
        let mut mr = Vec::with_capacity(self.len());
        for flow in &self.flows {
            let user = &self.user_positions[flow.user_index];
            let direct = LinkGeometry {
                distance_m: self.link_distance(&self.bs_position, user),
                tx_gain_db: g_bs,
                rx_gain_db: g_user,
            };
            let access = LinkGeometry {
                distance_m: self.link_distance(&self.mr_position, user),
                tx_gain_db: g_mr,
                rx_gain_db: g_user,
            };
            let p_direct = link_model::received_power(p_t, &direct, cfg);
            let p_access = link_model::received_power(p_t, &access, cfg);
            bs.push(if bw_bs > 0.0 { link_model::rate_hd(p_direct, bw_bs, cfg) } else { 0.0 });
            let relayed = if bw_mr <= 0.0 {
                0.0
            } else {
                match mode {
                    RelayMode::FullDuplex => link_model::two_hop_rate_fd(
                        link_model::rate_fd(p_backhaul, bw_mr, p_t, cfg),
                        link_model::rate_fd(p_access, bw_mr, p_t, cfg),
                    ),
                    RelayMode::HalfDuplex => link_model::two_hop_rate_hd(
                        link_model::rate_hd(p_backhaul, bw_mr, cfg),
                        link_model::rate_hd(p_access, bw_mr, cfg),
                    ),
                }
            };
            mr.push(relayed);
        }
        Ok(RateTable::new(bs, mr)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Policy {
    /// Coalition game with a full-duplex relay.
    #[serde(rename = "CG_FD")]
    CgFd,
    /// Coalition game with a half-duplex relay.
    #[serde(rename = "CG_HD")]
    CgHd,
    /// Every flow served by the base station.
    #[serde(rename = "FBSC")]
    Fbsc,
    /// Every flow served over the relay.
    #[serde(rename = "FMRC")]
    Fmrc,
    /// Exhaustive search for the best full-duplex partition.
    #[serde(rename = "ORACLE")]
    Oracle,
}

impl Policy {
    pub const ALL: [Policy; 5] = [Policy::CgFd, Policy::CgHd, Policy::Fbsc, Policy::Fmrc, Policy::Oracle];

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::CgFd => "CG_FD",
            Policy::CgHd => "CG_HD",
            Policy::Fbsc => "FBSC",
            Policy::Fmrc => "FMRC",
            Policy::Oracle => "ORACLE",
        }
    }

    pub fn relay_mode(self) -> RelayMode {
        match self {
            Policy::CgHd => RelayMode::HalfDuplex,
            _ => RelayMode::FullDuplex,
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        Policy::ALL
            .into_iter()
            .find(|p| p.as_str() == norm)
            .ok_or_else(|| format!("unknown policy '{s}' (expected CG_FD, CG_HD, FBSC, FMRC or ORACLE)"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Association {
    pub policy: Policy,
    pub partition: Partition,
    /// Rates the policy is evaluated with.
    pub rates: RateTable,
    pub sum_rate: f64,
    /// Present for the coalition-game policies.
    pub game: Option<CoalitionGameResult>,
}

impl Association {
    pub fn switch_count(&self) -> usize {
        self.game.as_ref().map_or(0, |g| g.switch_count)
    }

    /// Rate each flow gets on the side it was assigned to.
    pub fn assigned_rates(&self) -> Vec<f64> {
        self.partition
            .assignments()
            .iter()
            .enumerate()
            .map(|(i, &side)| self.rates.rate(FlowId(i), side).expect("partition covers table"))
            .collect()
    }
}

/// Random starting partition for the coalition game. It draws from its own
/// stream of the scenario seed, so it does not disturb scenario generation
/// and every game policy starts from the same partition.
pub fn initial_partition(scenario: &Scenario) -> Partition {
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    rng.set_stream(1);
    Partition::random(scenario.len(), &mut rng)
}

pub fn associate(scenario: &Scenario, policy: Policy) -> Result<Association, ScenarioError> {
    let rates = scenario.flow_rates(policy.relay_mode())?;
    associate_with_rates(rates, policy, initial_partition(scenario))
}

/// Association against a precomputed rate table; `initial` seeds the
/// coalition game and is ignored by the other policies.
pub fn associate_with_rates(
    rates: RateTable,
    policy: Policy,
    initial: Partition,
) -> Result<Association, ScenarioError> {
    let n = rates.len();
    let (partition, game) = match policy {
        Policy::Fbsc => (Partition::all_on(Side::Bs, n), None),
        Policy::Fmrc => (Partition::all_on(Side::Mr, n), None),
        Policy::CgFd | Policy::CgHd => {
            let g = form_coalitions(&rates, initial, &default_visit_order(n))?;
            (g.final_partition.clone(), Some(g))
        }
        Policy::Oracle => (exhaustive_optimum(&rates)?.0, None),
    };
    let sum_rate = coalition::total_rate(&partition, &rates)?;
    Ok(Association { policy, partition, rates, sum_rate, game })
}

/// Records each flow's side on a copy of the scenario.
pub fn with_associations(scenario: &Scenario, partition: &Partition) -> Scenario {
    let mut out = scenario.clone();
    for f in &mut out.flows {
        f.association = partition.side_of(f.id);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_scenario() {
        let cfg = ScenarioConfig::default();
        let a = generate_scenario(&cfg, 42).unwrap();
        let b = generate_scenario(&cfg, 42).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_ne!(a, generate_scenario(&cfg, 43).unwrap());
    }

    #[test]
    fn users_inside_area() {
        let cfg = ScenarioConfig { flow_count: 50, ..Default::default() };
        let s = generate_scenario(&cfg, 7).unwrap();
        assert_eq!(s.user_positions.len(), 50);
        for p in &s.user_positions {
            assert!((0.0..=300.0).contains(&p.x) && (0.0..=300.0).contains(&p.y));
        }
        for f in &s.flows {
            assert!((50e6..=500e6).contains(&f.qos_bps));
        }
    }

    #[test]
    fn prefix_stable_generation() {
        let small = generate_scenario(&ScenarioConfig { flow_count: 5, ..Default::default() }, 3).unwrap();
        let big = generate_scenario(&ScenarioConfig { flow_count: 9, ..Default::default() }, 3).unwrap();
        assert_eq!(&big.user_positions[..5], &small.user_positions[..]);
        assert_eq!(&big.flows[..5], &small.flows[..]);
    }

    #[test]
    fn defaults_echo_reference_parameters() {
        let r = ScenarioConfig::default().radio;
        assert_eq!(r.bandwidth_hz, 1e9);
        assert!((link_model::watts_to_dbm(r.tx_power_w) - 30.0).abs() < 1e-12);
        assert_eq!((r.bs_share, r.mr_share), (0.4, 0.6));
        assert_eq!(r.path_loss_exp, 3.0);
        assert_eq!(r.si_level, 1e-15);
    }

    #[test]
    fn validation_lists_every_violation() {
        let mut cfg = ScenarioConfig { qos_min_bps: -1.0, blockage_prob: 2.0, ..Default::default() };
        cfg.radio.bs_share = 0.7;
        match cfg.validate() {
            Err(ScenarioError::Invalid(v)) => assert_eq!(v.len(), 3, "{v:?}"),
            other => panic!("expected validation failure, got {other:?}"),
        }
    }

    #[test]
    fn policy_names() {
        for p in Policy::ALL {
            assert_eq!(p.as_str().parse::<Policy>().unwrap(), p);
            assert_eq!(serde_json::to_string(&p).unwrap(), format!("\"{p}\""));
        }
        assert_eq!("cg-hd".parse::<Policy>().unwrap(), Policy::CgHd);
        assert!("greedy".parse::<Policy>().is_err());
    }

    #[test]
    fn corner_policies() {
        let s = generate_scenario(&ScenarioConfig::default(), 1).unwrap();
        let a = associate(&s, Policy::Fbsc).unwrap();
        assert_eq!(a.partition.members(Side::Bs).len(), 10);
        assert_eq!(a.switch_count(), 0);
        let m = associate(&s, Policy::Fmrc).unwrap();
        assert_eq!(m.partition.members(Side::Mr).len(), 10);
        Partition::new(
            m.partition.members(Side::Bs).iter().copied(),
            m.partition.members(Side::Mr).iter().copied(),
            10,
        )
        .unwrap();
    }
}
