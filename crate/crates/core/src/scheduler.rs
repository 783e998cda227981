//! Superframe slot scheduling.
//!
//! A flow with rate `R` and throughput requirement `Q` needs the smallest
//! `δ` with `R·δ/M ≥ Q` slots out of the `M` per superframe. The scheduler
//! maximises the number of satisfied flows: sort by `δ` ascending and admit
//! the longest prefix that fits.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coalition::FlowId;

/// Largest demand list accepted by [`schedule_oracle`].
pub const ORACLE_CAP: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("slots per frame must be at least 1")]
    NoSlots,
    #[error("invalid demand input: {0}")]
    InvalidDemand(String),
    #[error("blockage probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("oracle refused: {n} flows exceeds the cap of {cap}")]
    TooManyFlows { n: usize, cap: usize },
    #[error("invalid schedule: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Requirement {
    Slots(u64),
    /// Zero rate with a positive requirement: no slot count can satisfy it.
    Unschedulable,
}

impl Requirement {
    pub fn slots(self) -> Option<u64> {
        match self {
            Requirement::Slots(n) => Some(n),
            Requirement::Unschedulable => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotDemand {
    pub flow_id: FlowId,
    pub rate_bps: f64,
    pub qos_bps: f64,
    pub required: Requirement,
}

/// q = R·γ/M.
pub fn throughput(rate: f64, slots: u64, slots_per_frame: u64) -> f64 {
    rate * slots as f64 / slots_per_frame as f64
}

/// Satisfaction indicator; a requirement met with equality counts.
pub fn satisfied(q: f64, qos: f64) -> bool {
    q >= qos
}

pub fn slot_demand(
    flow_id: FlowId,
    qos: f64,
    rate: f64,
    slots_per_frame: u64,
) -> Result<SlotDemand, ScheduleError> {
    if slots_per_frame < 1 {
        return Err(ScheduleError::NoSlots);
    }
    if !(qos >= 0.0 && qos.is_finite() && rate >= 0.0 && rate.is_finite()) {
        return Err(ScheduleError::InvalidDemand(format!("flow {flow_id}: qos={qos}, rate={rate}")));
    }
    let required = if qos == 0.0 {
        Requirement::Slots(0)
    } else if rate == 0.0 {
        Requirement::Unschedulable
    } else {
        let m = slots_per_frame;
        let raw = (qos * m as f64 / rate).ceil();
        // `as` saturates, which is fine for demands far beyond the frame.
        let mut d = raw as u64;
        if d <= m.saturating_add(1) {
            // pin d to the exact threshold the satisfaction test uses
            while !satisfied(throughput(rate, d, m), qos) {
                d += 1;
            }
            while d > 0 && satisfied(throughput(rate, d - 1, m), qos) {
                d -= 1;
            }
        }
        Requirement::Slots(d)
    };
    Ok(SlotDemand { flow_id, rate_bps: rate, qos_bps: qos, required })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pairing {
    pub flow_id: FlowId,
    pub start_slot: u64,
    pub slot_count: u64,
}

impl Pairing {
    pub fn end_slot(&self) -> u64 {
        self.start_slot + self.slot_count
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub slots_per_frame: u64,
    pub pairings: Vec<Pairing>,
    pub satisfied: BTreeMap<FlowId, bool>,
}

impl Schedule {
    pub fn total_slots_used(&self) -> u64 {
        self.pairings.iter().map(|p| p.slot_count).sum()
    }

    pub fn satisfied_count(&self) -> usize {
        self.satisfied.values().filter(|&&s| s).count()
    }

    pub fn pairing(&self, flow: FlowId) -> Option<&Pairing> {
        self.pairings.iter().find(|p| p.flow_id == flow)
    }

    pub fn slot_count(&self, flow: FlowId) -> u64 {
        self.pairing(flow).map_or(0, |p| p.slot_count)
    }

    /// Structural checks: one pairing per flow, pairings contiguous and
    /// disjoint, and no more than `slots_per_frame` slots in total.
    pub fn validate(&self) -> Result<(), ScheduleError> {
        let mut errs = Vec::new();
        if self.slots_per_frame < 1 {
            errs.push("slots_per_frame must be >= 1".to_string());
        }
        let mut seen = BTreeMap::new();
        for p in &self.pairings {
            if seen.insert(p.flow_id, ()).is_some() {
                errs.push(format!("flow {} holds more than one pairing", p.flow_id));
            }
            if !self.satisfied.contains_key(&p.flow_id) {
                errs.push(format!("flow {} has a pairing but no satisfaction flag", p.flow_id));
            }
        }
        let total: u128 = self.pairings.iter().map(|p| p.slot_count as u128).sum();
        if total > self.slots_per_frame as u128 {
            errs.push(format!("{total} slots used but the frame has {}", self.slots_per_frame));
        }
        let mut by_start: Vec<&Pairing> = self.pairings.iter().collect();
        by_start.sort_by_key(|p| (p.start_slot, p.slot_count));
        let mut cursor = 0u64;
        for p in by_start {
            if p.start_slot < cursor {
                errs.push(format!("pairing of flow {} overlaps the previous one", p.flow_id));
            }
            match p.start_slot.checked_add(p.slot_count) {
                Some(end) if end <= self.slots_per_frame => cursor = cursor.max(end),
                _ => errs.push(format!("pairing of flow {} runs past the frame end", p.flow_id)),
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ScheduleError::Invalid(errs))
        }
    }

    /// JSON document with the field names fixed in `schema/schedule.schema.json`.
    pub fn to_json(&self) -> serde_json::Value {
        let mut flows: Vec<serde_json::Value> = self
            .pairings
            .iter()
            .map(|p| {
                serde_json::json!({
                    "flow_id": p.flow_id.0,
                    "start_slot": p.start_slot,
                    "slot_count": p.slot_count,
                    "satisfied": self.satisfied.get(&p.flow_id).copied().unwrap_or(false),
                })
            })
            .collect();
        for (f, &s) in &self.satisfied {
            if self.pairing(*f).is_none() {
                flows.push(serde_json::json!({
                    "flow_id": f.0,
                    "start_slot": null,
                    "slot_count": 0,
                    "satisfied": s,
                }));
            }
        }
        serde_json::json!({
            "slots_per_frame": self.slots_per_frame,
            "total_slots_used": self.total_slots_used(),
            "flows": flows,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleOptions {
    /// Order by slot demand before admitting; `false` keeps input order.
    pub sort: bool,
    /// Hand leftover slots to the first flow that was not admitted.
    pub top_up: bool,
}

impl Default for ScheduleOptions {
    fn default() -> Self {
        Self { sort: true, top_up: false }
    }
}

pub fn schedule_greedy(demands: &[SlotDemand], slots_per_frame: u64) -> Schedule {
    schedule_with(demands, slots_per_frame, ScheduleOptions::default())
}

/// Admits the longest prefix (sorted by demand, ties by flow id, when
/// `opts.sort`) whose cumulative slot count fits in the frame, laying the
/// pairings out back to back from slot 0.
pub fn schedule_with(demands: &[SlotDemand], slots_per_frame: u64, opts: ScheduleOptions) -> Schedule {
    let mut order: Vec<&SlotDemand> = demands.iter().collect();
    if opts.sort {
        // Unschedulable orders after every finite demand.
        order.sort_by_key(|d| (d.required, d.flow_id));
    }

    let mut pairings = Vec::new();
    let mut cursor = 0u64;
    let mut admitted = 0;
    for d in &order {
        let Some(need) = d.required.slots() else { break };
        match cursor.checked_add(need) {
            Some(end) if end <= slots_per_frame => {
                pairings.push(Pairing { flow_id: d.flow_id, start_slot: cursor, slot_count: need });
                cursor = end;
                admitted += 1;
            }
            _ => break,
        }
    }

    if opts.top_up && cursor < slots_per_frame {
        if let Some(d) = order[admitted..].iter().find(|d| d.rate_bps > 0.0) {
            pairings.push(Pairing {
                flow_id: d.flow_id,
                start_slot: cursor,
                slot_count: slots_per_frame - cursor,
            });
        }
    }

    let mut schedule = Schedule { slots_per_frame, pairings, satisfied: BTreeMap::new() };
    for d in demands {
        let q = throughput(d.rate_bps, schedule.slot_count(d.flow_id), slots_per_frame);
        schedule.satisfied.insert(d.flow_id, satisfied(q, d.qos_bps));
    }
    schedule
}

/// Throughput actually delivered to `flow` under `schedule`.
pub fn achieved_throughput(schedule: &Schedule, flow: FlowId, rate: f64, slots_per_frame: u64) -> f64 {
    throughput(rate, schedule.slot_count(flow), slots_per_frame)
}

/// Expected satisfied-flow count under a constant blockage probability.
pub fn objective_value(schedule: &Schedule, p_b: f64) -> Result<f64, ScheduleError> {
    if !(0.0..=1.0).contains(&p_b) {
        return Err(ScheduleError::InvalidProbability(p_b));
    }
    Ok((1.0 - p_b) * schedule.satisfied_count() as f64)
}

/// Largest number of flows whose demands fit in the frame together, by
/// enumerating every subset.
pub fn schedule_oracle(demands: &[SlotDemand], slots_per_frame: u64) -> Result<usize, ScheduleError> {
    let n = demands.len();
    if n > ORACLE_CAP {
        return Err(ScheduleError::TooManyFlows { n, cap: ORACLE_CAP });
    }
    let need: Vec<Option<u64>> = demands.iter().map(|d| d.required.slots()).collect();
    // subset sums built from the subset without its lowest member
    let mut sums: Vec<Option<u64>> = vec![Some(0); 1 << n];
    let mut best = 0;
    for mask in 1usize..(1 << n) {
        let low = mask.trailing_zeros() as usize;
        sums[mask] = match (sums[mask & (mask - 1)], need[low]) {
            (Some(a), Some(b)) => a.checked_add(b),
            _ => None,
        };
        if matches!(sums[mask], Some(s) if s <= slots_per_frame) {
            best = best.max(mask.count_ones() as usize);
        }
    }
    Ok(best)
}
