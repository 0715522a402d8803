//! Serial delivery policy construction, block-Markov conversion to pipelined
//! schedules, and the reverse serialization.
//!
//! A policy is bit accounting, not a codebook: each delivery mode states how
//! many normalized content units it moves per user and what that costs on the
//! edge channel, the fronthaul links, and the D2D links. The catalog rates
//! are calibrated so that the synthesized min-max matches the closed-form
//! minimum pipelined NDT exactly; the optimizer never hides a residual gap.

use thiserror::Error;

use crate::analysis::{combined_term, fronthaul_term, min_pipelined_ndt};
use crate::model::{Ndt, NdtTriple, SimScale, SystemParams};

/// Tolerance for the internal accounting identities.
pub const ACCOUNTING_TOL: f64 = 1e-9;

/// Symmetric uncoded placement: per file, a `joint` fraction stored at both
/// edge nodes and an `exclusive` fraction stored at each node alone (equal by
/// symmetry). The remainder is uncached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CachePlacement {
    pub joint: f64,
    pub exclusive: f64,
}

impl CachePlacement {
    pub fn uncached(&self) -> f64 {
        (1.0 - self.joint - 2.0 * self.exclusive).max(0.0)
    }

    /// Per-node cache use as a fraction of one file.
    pub fn per_node(&self) -> f64 {
        self.joint + self.exclusive
    }
}

/// Bit-accounting delivery modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeliveryMode {
    /// Jointly cached content zero-forced to both users at once.
    JointZf,
    /// Uncached content delivered as cloud-precoded zero-forcing; the CP
    /// feeds both fronthaul links one bit per content unit.
    CloudZf,
    /// Content pairs co-located at a single node; that node precodes locally
    /// and the CP feeds only the opposite link, half a bit per unit.
    HybridZf,
    /// Two simultaneous streams with post-edge D2D conferencing; the D2D
    /// links run for half a time unit per delivered unit.
    D2dExchange,
    /// X-channel alignment over the exclusive piles, 3/2 edge time per unit,
    /// no conferencing.
    InterferenceAlignment,
    /// Single stream to a single user, the other node silent.
    Direct,
    /// Single stream decoded by both users (coinciding demands).
    Broadcast,
}

impl DeliveryMode {
    pub fn label(&self) -> &'static str {
        match self {
            DeliveryMode::JointZf => "joint_zf",
            DeliveryMode::CloudZf => "cloud_zf",
            DeliveryMode::HybridZf => "hybrid_zf",
            DeliveryMode::D2dExchange => "d2d_exchange",
            DeliveryMode::InterferenceAlignment => "interference_alignment",
            DeliveryMode::Direct => "direct",
            DeliveryMode::Broadcast => "broadcast",
        }
    }

    /// Edge time per delivered unit (per user, both users served).
    pub fn edge_per_unit(&self) -> f64 {
        match self {
            DeliveryMode::InterferenceAlignment => 1.5,
            DeliveryMode::Direct => 2.0,
            _ => 1.0,
        }
    }

    /// Fronthaul bits per link per delivered unit.
    pub fn fronthaul_per_unit(&self) -> f64 {
        match self {
            DeliveryMode::CloudZf => 1.0,
            DeliveryMode::HybridZf => 0.5,
            _ => 0.0,
        }
    }

    /// D2D link time per delivered unit (each direction, in parallel).
    pub fn d2d_time_per_unit(&self) -> f64 {
        match self {
            DeliveryMode::D2dExchange => 0.5,
            _ => 0.0,
        }
    }
}

/// One phase-plan entry: a delivery mode applied to `units` of each
/// requested file, with its resource usage spelled out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanEntry {
    pub mode: DeliveryMode,
    /// Normalized content units delivered to each user.
    pub units: f64,
    /// Edge channel time in normalized units.
    pub edge_time: f64,
    /// Fronthaul bits per link in normalized units.
    pub fronthaul_bits: f64,
    /// D2D link time per direction in normalized units.
    pub d2d_time: f64,
}

impl PlanEntry {
    pub fn new(mode: DeliveryMode, units: f64) -> Self {
        PlanEntry {
            mode,
            units,
            edge_time: mode.edge_per_unit() * units,
            fronthaul_bits: mode.fronthaul_per_unit() * units,
            d2d_time: mode.d2d_time_per_unit() * units,
        }
    }
}

/// A serial delivery policy: placement, three-phase transmission plan, and
/// the resulting per-resource NDTs.
#[derive(Debug, Clone, PartialEq)]
pub struct SerialPolicy {
    pub placement: CachePlacement,
    pub phase_plan: Vec<PlanEntry>,
    pub ndt: NdtTriple,
}

impl SerialPolicy {
    pub fn units_of(&self, mode: DeliveryMode) -> f64 {
        self.phase_plan
            .iter()
            .filter(|e| e.mode == mode)
            .map(|e| e.units)
            .sum()
    }

    /// Structured export: placement fractions, phase-plan entries, and the
    /// NDT triple, as deterministic `key = value` lines.
    pub fn to_document(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("placement_joint = {}\n", self.placement.joint));
        out.push_str(&format!(
            "placement_exclusive = {}\n",
            self.placement.exclusive
        ));
        out.push_str(&format!(
            "placement_uncached = {}\n",
            self.placement.uncached()
        ));
        for (i, e) in self.phase_plan.iter().enumerate() {
            out.push_str(&format!(
                "entry_{i} = {} units={} edge={} fronthaul={} d2d={}\n",
                e.mode.label(),
                e.units,
                e.edge_time,
                e.fronthaul_bits,
                e.d2d_time
            ));
        }
        out.push_str(&format!("ndt_fronthaul = {}\n", self.ndt.delta_f));
        out.push_str(&format!("ndt_edge = {}\n", self.ndt.delta_e));
        out.push_str(&format!("ndt_d2d = {}\n", self.ndt.delta_d));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchemeError {
    #[error("instance is infeasible: uncached content with no fronthaul")]
    Infeasible,
    #[error("delivery catalog cannot meet the target: achieved {achieved}, target {target}")]
    Gap { achieved: f64, target: f64 },
}

/// Throughput cap of the D2D exchange mode.
///
/// When the combined-resource term strictly binds the minimum NDT, the
/// conferencing links are the bottleneck and the exchange mode moves at most
/// `2 r_d` units per unit of interval time. Elsewhere the half-time law is
/// comfortable and the mode is limited only by the exclusive piles.
fn coop_cap(p: &SystemParams, pool: f64) -> f64 {
    if p.r_d == 0.0 {
        return 0.0;
    }
    let t1 = fronthaul_term(p.mu, p.r_f);
    let t2 = combined_term(p.mu, p.r_f, p.r_d);
    if t2 > t1.max(1.0) {
        2.0 * p.r_d * t2
    } else {
        pool
    }
}

/// Builds a feasible serial policy whose component-wise maximum equals the
/// minimum pipelined NDT.
///
/// Placement: joint fraction j = max(0, 2 mu - 1), exclusive e = mu - j per
/// node, uncached u = max(0, 1 - 2 mu). Coverage per user is then
/// j (joint ZF) + u (cloud ZF) + 2e split across the hybrid, exchange,
/// alignment, and direct modes. Among min-max optima the split minimizes the
/// serial sum, then the D2D phase, then the fronthaul phase.
pub fn synthesize_serial_policy(p: &SystemParams) -> Result<SerialPolicy, SchemeError> {
    let target = min_pipelined_ndt(p);
    if !target.is_feasible() {
        return Err(SchemeError::Infeasible);
    }
    let target = target.value();

    let j = (2.0 * p.mu - 1.0).max(0.0);
    let e = p.mu - j;
    let u = (1.0 - 2.0 * p.mu).max(0.0);
    let pool = 2.0 * e;

    let (x, w, zh, d);
    if target == 1.0 {
        // No edge slack: every unit rides a full-rate mode.
        x = 0.0;
        d = 0.0;
        if p.r_f >= 1.0 || p.r_d == 0.0 {
            zh = pool.min(2.0 * (p.r_f - u).max(0.0));
            w = pool - zh;
        } else {
            w = pool;
            zh = 0.0;
        }
    } else {
        // Edge slack absorbs alignment first (no fronthaul or D2D cost),
        // then the exchange mode up to its throughput cap, then hybrid ZF up
        // to the fronthaul budget; direct mops up rounding residue.
        let slack = target - 1.0;
        x = pool.min(2.0 * slack);
        w = (pool - x).min(coop_cap(p, pool));
        zh = (pool - x - w).min(2.0 * (target * p.r_f - u).max(0.0));
        d = (pool - x - w - zh).max(0.0);
    }

    if w > ACCOUNTING_TOL && p.r_d == 0.0 {
        return Err(SchemeError::Gap {
            achieved: f64::INFINITY,
            target,
        });
    }

    let fronthaul_bits = u + 0.5 * zh;
    let delta_f = if fronthaul_bits <= 0.0 {
        0.0
    } else {
        fronthaul_bits / p.r_f
    };
    let delta_e = j + u + zh + w + 1.5 * x + 2.0 * d;
    let delta_d = 0.5 * w;
    let ndt = NdtTriple::new(delta_f, delta_e, delta_d);

    let achieved = ndt.max();
    if (achieved - target).abs() > 1e-6 {
        return Err(SchemeError::Gap { achieved, target });
    }

    let mut phase_plan = Vec::new();
    for (mode, units) in [
        (DeliveryMode::JointZf, j),
        (DeliveryMode::CloudZf, u),
        (DeliveryMode::HybridZf, zh),
        (DeliveryMode::D2dExchange, w),
        (DeliveryMode::InterferenceAlignment, x),
        (DeliveryMode::Direct, d),
    ] {
        if units > 1e-15 {
            phase_plan.push(PlanEntry::new(mode, units));
        }
    }

    Ok(SerialPolicy {
        placement: CachePlacement {
            joint: j,
            exclusive: e,
        },
        phase_plan,
        ndt,
    })
}

/// Pipelined NDT achieved by block-Markov conversion of a serial triple:
/// the component-wise maximum.
pub fn achievable_pipelined_ndt(triple: &NdtTriple) -> Ndt {
    Ndt(triple.max())
}

/// Per-slot resource assignment of the staggered schedule. `None` marks an
/// idle resource in that slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotAssignment {
    pub fronthaul_block: Option<u32>,
    pub edge_block: Option<u32>,
    pub d2d_block: Option<u32>,
}

/// Block-Markov pipelined schedule: files split into B blocks, the interval
/// into B + 2 slots. Slot b carries fronthaul block b, edge block b - 1, and
/// D2D block b - 2, each resource applying the serial policy's strategy to
/// its block.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelinedSchedule {
    pub policy: SerialPolicy,
    pub blocks: u32,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConversionError {
    #[error("block count must be at least 1")]
    NoBlocks,
    #[error("scale declares {scale_blocks} blocks, conversion asked for {blocks}")]
    BlockMismatch { scale_blocks: u32, blocks: u32 },
}

impl PipelinedSchedule {
    pub fn slot_count(&self) -> u32 {
        self.blocks + 2
    }

    /// Uniform slot duration in normalized time: max{d_F, d_E, d_D} / B.
    pub fn slot_duration(&self) -> f64 {
        self.policy.ndt.max() / f64::from(self.blocks)
    }

    /// Total normalized duration, (B + 2)/B times the serial maximum.
    pub fn total_duration(&self) -> f64 {
        f64::from(self.slot_count()) * self.slot_duration()
    }

    pub fn assignment(&self, slot: u32) -> SlotAssignment {
        let b = self.blocks;
        SlotAssignment {
            fronthaul_block: (slot < b).then_some(slot),
            edge_block: (slot >= 1 && slot <= b).then(|| slot - 1),
            d2d_block: (slot >= 2 && slot < b + 2).then(|| slot - 2),
        }
    }
}

/// Converts a serial policy into the staggered pipelined schedule.
pub fn block_markov_convert(
    policy: &SerialPolicy,
    scale: &SimScale,
) -> Result<PipelinedSchedule, ConversionError> {
    if scale.blocks == 0 {
        return Err(ConversionError::NoBlocks);
    }
    Ok(PipelinedSchedule {
        policy: policy.clone(),
        blocks: scale.blocks,
    })
}

/// Reverses the pipelining: run the same fronthaul, edge, and D2D strategies
/// strictly one after the other. The phase times are the concatenated
/// per-resource busy times, so the serial NDT is the triple's sum, never more
/// than three times the pipelined maximum.
pub fn serialize_pipelined(schedule: &PipelinedSchedule) -> SerialPolicy {
    schedule.policy.clone()
}

/// First violated policy constraint, with margins.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyViolation {
    #[error("placement exceeds per-node cache budget: joint {joint} + exclusive {exclusive} > mu {budget}")]
    CacheBudget {
        joint: f64,
        exclusive: f64,
        budget: f64,
    },
    #[error("placement fractions invalid: joint {joint}, exclusive {exclusive}")]
    PlacementShape { joint: f64, exclusive: f64 },
    #[error("plan entry has negative units: {units}")]
    NegativeUnits { units: f64 },
    #[error("plan entry resource usage disagrees with its mode law at {mode}")]
    Accounting { mode: &'static str },
    #[error("coverage is {delivered} of 1 requested unit per user")]
    Coverage { delivered: f64 },
    #[error("mode {mode} draws {used} units against a pile of {available}")]
    PileOverdraw {
        mode: &'static str,
        used: f64,
        available: f64,
    },
    #[error("fronthaul needs {bits} bits per link, capacity is {capacity}")]
    FronthaulCapacity { bits: f64, capacity: f64 },
    #[error("D2D exchange of {units} units with no D2D links")]
    D2dUnavailable { units: f64 },
    #[error("edge phase time {time} exceeds declared {declared}")]
    EdgeTime { time: f64, declared: f64 },
    #[error("D2D phase time {time} exceeds declared {declared}")]
    D2dTime { time: f64, declared: f64 },
}

/// Checks placement budgets, per-pile draws, full coverage under distinct
/// demands, and per-resource capacity against the declared NDT triple.
/// Violations are results, not faults.
pub fn validate_policy(policy: &SerialPolicy, p: &SystemParams) -> Result<(), PolicyViolation> {
    let pl = &policy.placement;
    if !(pl.joint >= 0.0
        && pl.exclusive >= 0.0
        && pl.joint + 2.0 * pl.exclusive <= 1.0 + ACCOUNTING_TOL)
    {
        return Err(PolicyViolation::PlacementShape {
            joint: pl.joint,
            exclusive: pl.exclusive,
        });
    }
    if pl.per_node() > p.mu + ACCOUNTING_TOL {
        return Err(PolicyViolation::CacheBudget {
            joint: pl.joint,
            exclusive: pl.exclusive,
            budget: p.mu,
        });
    }

    let mut delivered = 0.0;
    let mut joint_used = 0.0;
    let mut cloud_used = 0.0;
    let mut pair_used = 0.0;
    let mut broadcast_used = 0.0;
    let mut fronthaul_bits = 0.0;
    let mut edge_time = 0.0;
    let mut d2d_time = 0.0;
    for entry in &policy.phase_plan {
        if entry.units < 0.0 {
            return Err(PolicyViolation::NegativeUnits { units: entry.units });
        }
        let expect = PlanEntry::new(entry.mode, entry.units);
        if (entry.edge_time - expect.edge_time).abs() > ACCOUNTING_TOL
            || (entry.fronthaul_bits - expect.fronthaul_bits).abs() > ACCOUNTING_TOL
            || (entry.d2d_time - expect.d2d_time).abs() > ACCOUNTING_TOL
        {
            return Err(PolicyViolation::Accounting {
                mode: entry.mode.label(),
            });
        }
        delivered += entry.units;
        fronthaul_bits += entry.fronthaul_bits;
        edge_time += entry.edge_time;
        d2d_time += entry.d2d_time;
        match entry.mode {
            DeliveryMode::JointZf => joint_used += entry.units,
            DeliveryMode::CloudZf => cloud_used += entry.units,
            DeliveryMode::Broadcast => broadcast_used += entry.units,
            DeliveryMode::HybridZf
            | DeliveryMode::D2dExchange
            | DeliveryMode::InterferenceAlignment
            | DeliveryMode::Direct => pair_used += entry.units,
        }
        if entry.mode == DeliveryMode::D2dExchange && p.r_d == 0.0 && entry.units > ACCOUNTING_TOL {
            return Err(PolicyViolation::D2dUnavailable { units: entry.units });
        }
    }

    if (delivered - 1.0).abs() > ACCOUNTING_TOL {
        return Err(PolicyViolation::Coverage { delivered });
    }
    if joint_used > pl.joint + ACCOUNTING_TOL {
        return Err(PolicyViolation::PileOverdraw {
            mode: "joint_zf",
            used: joint_used,
            available: pl.joint,
        });
    }
    let uncached = pl.uncached();
    if cloud_used > uncached + ACCOUNTING_TOL {
        return Err(PolicyViolation::PileOverdraw {
            mode: "cloud_zf",
            used: cloud_used,
            available: uncached,
        });
    }
    if pair_used > 2.0 * pl.exclusive + ACCOUNTING_TOL {
        return Err(PolicyViolation::PileOverdraw {
            mode: "exclusive piles",
            used: pair_used,
            available: 2.0 * pl.exclusive,
        });
    }
    if broadcast_used > 1.0 + ACCOUNTING_TOL {
        return Err(PolicyViolation::PileOverdraw {
            mode: "broadcast",
            used: broadcast_used,
            available: 1.0,
        });
    }

    let capacity = policy.ndt.delta_f * p.r_f;
    if fronthaul_bits > capacity + ACCOUNTING_TOL {
        return Err(PolicyViolation::FronthaulCapacity {
            bits: fronthaul_bits,
            capacity,
        });
    }
    if edge_time > policy.ndt.delta_e + ACCOUNTING_TOL {
        return Err(PolicyViolation::EdgeTime {
            time: edge_time,
            declared: policy.ndt.delta_e,
        });
    }
    if d2d_time > policy.ndt.delta_d + ACCOUNTING_TOL {
        return Err(PolicyViolation::D2dTime {
            time: d2d_time,
            declared: policy.ndt.delta_d,
        });
    }
    Ok(())
}
