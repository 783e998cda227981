//! Two-coalition formation game over flows.
//!
//! Every flow is served either directly by the base station (the BS
//! coalition) or over the relay (the MR coalition). A flow switches sides
//! when doing so strictly raises the total rate of both coalitions; the
//! dynamics stop at a Nash-stable partition.
//!
//! Per-flow rates on each side do not depend on who else shares that side
//! (access within a coalition is TDMA), so they are computed once into a
//! [`RateTable`] and every preference test is a handful of additions.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest flow count accepted by [`exhaustive_optimum`].
pub const EXHAUSTIVE_CAP: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FlowId(pub usize);

impl fmt::Display for FlowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Bs,
    Mr,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Bs => Side::Mr,
            Side::Mr => Side::Bs,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoalitionError {
    #[error("unknown flow id {0}")]
    UnknownFlow(FlowId),
    #[error("flow {0} is not in the partition")]
    NotInPartition(FlowId),
    #[error("flow {0} appears in both coalitions")]
    Overlap(FlowId),
    #[error("rate table columns differ in length ({bs} vs {mr})")]
    RateTableShape { bs: usize, mr: usize },
    #[error("visit order must be a permutation of all {0} flows")]
    BadVisitOrder(usize),
    #[error("exhaustive search refused: {n} flows exceeds the cap of {cap}")]
    TooManyFlows { n: usize, cap: usize },
}

/// Per-flow achievable rate (bits/s) on each side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    bs: Vec<f64>,
    mr: Vec<f64>,
}

impl RateTable {
    pub fn new(bs: Vec<f64>, mr: Vec<f64>) -> Result<Self, CoalitionError> {
        if bs.len() != mr.len() {
            return Err(CoalitionError::RateTableShape { bs: bs.len(), mr: mr.len() });
        }
        Ok(Self { bs, mr })
    }

    pub fn len(&self) -> usize {
        self.bs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bs.is_empty()
    }

    pub fn rate(&self, flow: FlowId, side: Side) -> Result<f64, CoalitionError> {
        let col = match side {
            Side::Bs => &self.bs,
            Side::Mr => &self.mr,
        };
        col.get(flow.0).copied().ok_or(CoalitionError::UnknownFlow(flow))
    }

    pub fn bs_rates(&self) -> &[f64] {
        &self.bs
    }

    pub fn mr_rates(&self) -> &[f64] {
        &self.mr
    }

    pub fn flow_ids(&self) -> impl Iterator<Item = FlowId> {
        (0..self.len()).map(FlowId)
    }
}

/// Assignment of every flow to exactly one of the two coalitions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    bs: BTreeSet<FlowId>,
    mr: BTreeSet<FlowId>,
}

impl Partition {
    /// Builds a partition over flows `0..n`, rejecting overlaps, gaps and
    /// out-of-range ids.
    pub fn new(
        bs: impl IntoIterator<Item = FlowId>,
        mr: impl IntoIterator<Item = FlowId>,
        n: usize,
    ) -> Result<Self, CoalitionError> {
        let bs: BTreeSet<FlowId> = bs.into_iter().collect();
        let mr: BTreeSet<FlowId> = mr.into_iter().collect();
        if let Some(&f) = bs.intersection(&mr).next() {
            return Err(CoalitionError::Overlap(f));
        }
        if let Some(&f) = bs.iter().chain(mr.iter()).find(|f| f.0 >= n) {
            return Err(CoalitionError::UnknownFlow(f));
        }
        if let Some(f) = (0..n).map(FlowId).find(|f| !bs.contains(f) && !mr.contains(f)) {
            return Err(CoalitionError::NotInPartition(f));
        }
        Ok(Self { bs, mr })
    }

    pub fn all_on(side: Side, n: usize) -> Self {
        let everyone: BTreeSet<FlowId> = (0..n).map(FlowId).collect();
        match side {
            Side::Bs => Self { bs: everyone, mr: BTreeSet::new() },
            Side::Mr => Self { bs: BTreeSet::new(), mr: everyone },
        }
    }

    /// Bit `i` set means flow `i` is in the BS coalition.
    pub fn from_bs_mask(mask: u64, n: usize) -> Self {
        assert!(n <= 64, "mask partitions hold at most 64 flows");
        let (bs, mr): (Vec<FlowId>, Vec<FlowId>) =
            (0..n).map(FlowId).partition(|f| mask >> f.0 & 1 == 1);
        Self { bs: bs.into_iter().collect(), mr: mr.into_iter().collect() }
    }

    /// Independent fair coin per flow.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut p = Self::all_on(Side::Bs, 0);
        for i in 0..n {
            if rng.random_bool(0.5) {
                p.bs.insert(FlowId(i));
            } else {
                p.mr.insert(FlowId(i));
            }
        }
        p
    }

    pub fn len(&self) -> usize {
        self.bs.len() + self.mr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn members(&self, side: Side) -> &BTreeSet<FlowId> {
        match side {
            Side::Bs => &self.bs,
            Side::Mr => &self.mr,
        }
    }

    pub fn side_of(&self, flow: FlowId) -> Option<Side> {
        if self.bs.contains(&flow) {
            Some(Side::Bs)
        } else if self.mr.contains(&flow) {
            Some(Side::Mr)
        } else {
            None
        }
    }

    /// Moves `flow` to the other coalition and returns its new side.
    pub fn switch(&mut self, flow: FlowId) -> Result<Side, CoalitionError> {
        let from = self.side_of(flow).ok_or(CoalitionError::NotInPartition(flow))?;
        let to = from.other();
        self.members_mut(from).remove(&flow);
        self.members_mut(to).insert(flow);
        Ok(to)
    }

    fn members_mut(&mut self, side: Side) -> &mut BTreeSet<FlowId> {
        match side {
            Side::Bs => &mut self.bs,
            Side::Mr => &mut self.mr,
        }
    }

    pub fn bs_mask(&self) -> u64 {
        self.bs.iter().fold(0u64, |m, f| m | 1 << f.0)
    }

    /// Side of each flow, indexed by flow id. Assumes ids are `0..len`.
    pub fn assignments(&self) -> Vec<Side> {
        let mut out = vec![Side::Bs; self.len()];
        for f in &self.mr {
            out[f.0] = Side::Mr;
        }
        out
    }
}

/// Sum of the member rates on `side`; an empty coalition contributes 0.
pub fn coalition_rate<'a>(
    members: impl IntoIterator<Item = &'a FlowId>,
    side: Side,
    rates: &RateTable,
) -> Result<f64, CoalitionError> {
    members.into_iter().try_fold(0.0, |acc, &f| Ok(acc + rates.rate(f, side)?))
}

/// R(F_bs) + R(F_mr), each coalition summed in ascending flow id order.
pub fn total_rate(partition: &Partition, rates: &RateTable) -> Result<f64, CoalitionError> {
    Ok(coalition_rate(&partition.bs, Side::Bs, rates)?
        + coalition_rate(&partition.mr, Side::Mr, rates)?)
}

/// Whether `flow` strictly raises the system rate by moving to the other
/// coalition.
pub fn prefers_switch(
    flow: FlowId,
    partition: &Partition,
    rates: &RateTable,
) -> Result<bool, CoalitionError> {
    let here = partition.side_of(flow).ok_or(CoalitionError::NotInPartition(flow))?;
    let there = here.other();
    let current = partition.members(here);
    let other = partition.members(there);

    let stay = coalition_rate(current, here, rates)? + coalition_rate(other, there, rates)?;
    let without: BTreeSet<FlowId> = current.iter().copied().filter(|&f| f != flow).collect();
    let mut with = other.clone();
    with.insert(flow);
    let moved = coalition_rate(&without, here, rates)? + coalition_rate(&with, there, rates)?;
    Ok(stay < moved)
}

/// No flow can strictly raise the system rate by switching alone.
pub fn is_nash_stable(partition: &Partition, rates: &RateTable) -> Result<bool, CoalitionError> {
    for &f in partition.bs.iter().chain(partition.mr.iter()) {
        if prefers_switch(f, partition, rates)? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoalitionGameResult {
    pub final_partition: Partition,
    pub switch_count: usize,
    pub pass_count: usize,
    pub sum_rate: f64,
    /// System rate of the initial partition followed by the rate after each
    /// switch, recomputed from coalition membership.
    pub trajectory: Vec<f64>,
}

/// Runs switch dynamics from `initial`, visiting flows in `visit_order`,
/// until a full pass makes no switch.
pub fn form_coalitions(
    rates: &RateTable,
    initial: Partition,
    visit_order: &[FlowId],
) -> Result<CoalitionGameResult, CoalitionError> {
    let n = rates.len();
    let order_ok = visit_order.len() == n
        && visit_order.iter().all(|f| f.0 < n)
        && visit_order.iter().collect::<BTreeSet<_>>().len() == n;
    if !order_ok {
        return Err(CoalitionError::BadVisitOrder(n));
    }
    // re-validate so a hand-built partition over the wrong flow set fails early
    let mut partition = Partition::new(initial.bs, initial.mr, n)?;

    let mut trajectory = vec![total_rate(&partition, rates)?];
    let mut switch_count = 0;
    let mut pass_count = 0;
    loop {
        pass_count += 1;
        let mut sums = [
            coalition_rate(&partition.bs, Side::Bs, rates)?,
            coalition_rate(&partition.mr, Side::Mr, rates)?,
        ];
        let idx = |s: Side| match s {
            Side::Bs => 0,
            Side::Mr => 1,
        };
        let mut switched = false;
        for &flow in visit_order {
            let here = partition.side_of(flow).ok_or(CoalitionError::NotInPartition(flow))?;
            let there = here.other();
            let r_here = rates.rate(flow, here)?;
            let r_there = rates.rate(flow, there)?;
            let stay = sums[idx(here)] + sums[idx(there)];
            let moved = (sums[idx(here)] - r_here) + (sums[idx(there)] + r_there);
            if stay < moved {
                partition.switch(flow)?;
                sums[idx(here)] -= r_here;
                sums[idx(there)] += r_there;
                switch_count += 1;
                switched = true;
                trajectory.push(total_rate(&partition, rates)?);
            }
        }
        if !switched {
            break;
        }
    }
    let sum_rate = total_rate(&partition, rates)?;
    Ok(CoalitionGameResult { final_partition: partition, switch_count, pass_count, sum_rate, trajectory })
}

/// Ascending flow ids.
pub fn default_visit_order(n: usize) -> Vec<FlowId> {
    (0..n).map(FlowId).collect()
}

/// Best partition by enumerating all 2^N assignments. Ties go to the
/// numerically smallest BS-membership bitmask.
pub fn exhaustive_optimum(rates: &RateTable) -> Result<(Partition, f64), CoalitionError> {
    exhaustive_optimum_capped(rates, EXHAUSTIVE_CAP)
}

pub fn exhaustive_optimum_capped(
    rates: &RateTable,
    cap: usize,
) -> Result<(Partition, f64), CoalitionError> {
    let n = rates.len();
    if n > cap || n > 63 {
        return Err(CoalitionError::TooManyFlows { n, cap: cap.min(63) });
    }
    let (bs, mr) = (rates.bs_rates(), rates.mr_rates());
    let mut best_mask = 0u64;
    let mut best = f64::NEG_INFINITY;
    for mask in 0..(1u64 << n) {
        // same summation order as total_rate so equal partitions give equal bits
        let (mut sb, mut sm) = (0.0, 0.0);
        for i in 0..n {
            if mask >> i & 1 == 1 {
                sb += bs[i];
            } else {
                sm += mr[i];
            }
        }
        let total = sb + sm;
        if total > best {
            best = total;
            best_mask = mask;
        }
    }
    Ok((Partition::from_bs_mask(best_mask, n), best))
}
