//! Slot-level execution of serial and pipelined delivery at finite file size,
//! finite SNR exponent, and finite block count.
//!
//! Files are striped: each of the B blocks carries the same proportional mix
//! of delivery segments, so the staggered schedule applies the serial
//! strategy blockwise. Symbol counts are ceilings; the rounding gap against
//! the closed form is reported, never absorbed. Within a slot the modes share
//! the channel continuously; capacity checks compare bits against
//! symbols-times-rate.

use thiserror::Error;

use crate::analysis::min_pipelined_ndt;
use crate::model::{DemandVector, SimScale, SystemParams};
use crate::scheme::{DeliveryMode, PipelinedSchedule, SerialPolicy};

/// Relative slack for float comparisons on bit and symbol counts.
const BIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("cache occupancy overflow on node {node}: {stored} bits against budget {budget}")]
    PlacementOverflow {
        node: usize,
        stored: u64,
        budget: u64,
    },
    #[error("{resource} needs {needed} bits but only {capacity} fit{}", slot.map(|s| format!(" in slot {s}")).unwrap_or_default())]
    ConstraintBreach {
        resource: &'static str,
        slot: Option<u32>,
        needed: f64,
        capacity: f64,
    },
    #[error("edge transmission of block {block} in slot {slot} precedes its fronthaul delivery")]
    CausalityViolation { slot: u32, block: u32 },
    #[error("broadcast segments are only valid for coinciding demands")]
    BroadcastUnderDistinctDemands,
    #[error("demand {d1},{d2} outside the library of {n_files} files")]
    BadDemand { d1: u32, d2: u32, n_files: u32 },
    #[error("instance is infeasible")]
    Infeasible,
}

/// Smallest symbol count whose capacity covers `bits` at `bits_per_symbol`.
fn symbols_needed(bits: u64, bits_per_symbol: f64) -> u64 {
    if bits == 0 {
        return 0;
    }
    let target = bits as f64;
    let tol = target * BIT_TOL + 1e-9;
    let mut t = (target / bits_per_symbol).ceil() as u64;
    while t > 1 && (t - 1) as f64 * bits_per_symbol >= target - tol {
        t -= 1;
    }
    while (t as f64) * bits_per_symbol < target - tol {
        t += 1;
    }
    t
}

/// Ceiling of a fractional symbol load, with the same tolerance.
fn ceil_symbols(frac: f64) -> u64 {
    let tol = frac.abs() * BIT_TOL + 1e-9;
    let c = frac.ceil();
    if c - frac > 1.0 - tol && c >= 1.0 {
        (c as u64) - 1
    } else {
        c as u64
    }
}

/// Integer bit counts of one block, split in plan order by cumulative
/// rounding so that every block carries the same mix.
#[derive(Debug, Clone, PartialEq)]
struct BlockLayout {
    block_bits: u64,
    /// (mode, bits per user) in plan order; bits sum to `covered`.
    segments: Vec<(DeliveryMode, u64)>,
    covered: u64,
    /// Placement piles inside the block: joint, uncached, paired-exclusive.
    joint_bits: u64,
    uncached_bits: u64,
    pair_bits: u64,
}

impl BlockLayout {
    fn new(policy: &SerialPolicy, scale: &SimScale) -> Self {
        let lb = scale.block_bits();
        let lbf = lb as f64;
        let mut segments = Vec::with_capacity(policy.phase_plan.len());
        let mut cum = 0.0;
        let mut prev = 0u64;
        for entry in &policy.phase_plan {
            cum += entry.units;
            let bound = ((cum * lbf).round() as u64).min(lb);
            segments.push((entry.mode, bound.saturating_sub(prev)));
            prev = prev.max(bound);
        }
        let covered = prev;
        let pl = &policy.placement;
        let joint_bits = ((pl.joint * lbf).round() as u64).min(lb);
        let uncached_end = (((pl.joint + pl.uncached()) * lbf).round() as u64).min(lb);
        let uncached_bits = uncached_end.saturating_sub(joint_bits);
        BlockLayout {
            block_bits: lb,
            segments,
            covered,
            joint_bits,
            uncached_bits,
            pair_bits: lb - joint_bits - uncached_bits,
        }
    }

    fn bits_of(&self, mode: DeliveryMode) -> u64 {
        self.segments
            .iter()
            .filter(|(m, _)| *m == mode)
            .map(|(_, b)| b)
            .sum()
    }

    /// Fronthaul bits per link for one block, (link 1, link 2).
    fn fronthaul_bits(&self) -> (u64, u64) {
        let cloud = self.bits_of(DeliveryMode::CloudZf);
        let hybrid = self.bits_of(DeliveryMode::HybridZf);
        let h1 = hybrid / 2;
        (cloud + h1, cloud + (hybrid - h1))
    }

    /// Exact fractional edge symbols for one block.
    fn edge_symbols(&self, log_p: f64) -> f64 {
        self.segments
            .iter()
            .map(|(mode, bits)| mode.edge_per_unit() * *bits as f64 / log_p)
            .sum()
    }

    /// Exact fractional D2D symbols per direction for one block.
    fn d2d_symbols(&self, log_p: f64) -> f64 {
        self.segments
            .iter()
            .map(|(mode, bits)| mode.d2d_time_per_unit() * *bits as f64 / log_p)
            .sum()
    }
}

/// Stored bit-ranges per node: every file carries the same striped layout.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheState {
    layout: BlockLayout,
    n_files: u32,
    blocks: u32,
    /// Bits of the paired-exclusive pile held by node 1 per block; node 2
    /// holds the rest.
    own_split: u64,
    pub occupancy: [u64; 2],
}

impl CacheState {
    /// Stored ranges of `file` at `node` (0 or 1), as half-open bit ranges.
    pub fn ranges(&self, node: usize, _file: u32) -> Vec<(u64, u64)> {
        let lb = self.layout.block_bits;
        let mut out = Vec::new();
        for b in 0..u64::from(self.blocks) {
            let base = b * lb;
            if self.layout.joint_bits > 0 {
                out.push((base, base + self.layout.joint_bits));
            }
            let pair_start = base + self.layout.joint_bits + self.layout.uncached_bits;
            if node == 0 {
                if self.own_split > 0 {
                    out.push((pair_start, pair_start + self.own_split));
                }
            } else {
                let rest = self.layout.pair_bits - self.own_split;
                if rest > 0 {
                    out.push((
                        pair_start + self.own_split,
                        pair_start + self.layout.pair_bits,
                    ));
                }
            }
        }
        out
    }
}

/// Realizes the placement fractions as striped bit-ranges. The joint range is
/// identical at both nodes; the exclusive halves are disjoint. Rounding costs
/// at most a couple of bits per file per block.
pub fn place_caches(
    policy: &SerialPolicy,
    p: &SystemParams,
    scale: &SimScale,
) -> Result<CacheState, SimError> {
    let layout = BlockLayout::new(policy, scale);
    let own_split = layout.pair_bits.div_ceil(2);
    let per_block = [
        layout.joint_bits + own_split,
        layout.joint_bits + (layout.pair_bits - own_split),
    ];
    let budget_block = (p.mu * layout.block_bits as f64).floor() as u64 + 2;
    for (node, stored) in per_block.iter().enumerate() {
        if *stored > budget_block {
            return Err(SimError::PlacementOverflow {
                node: node + 1,
                stored: stored * u64::from(p.n_files) * u64::from(scale.blocks),
                budget: (p.mu * p.n_files as f64 * scale.file_bits as f64).ceil() as u64
                    + 2 * u64::from(p.n_files) * u64::from(scale.blocks),
            });
        }
    }
    let total = u64::from(p.n_files) * u64::from(scale.blocks);
    Ok(CacheState {
        occupancy: [per_block[0] * total, per_block[1] * total],
        layout,
        n_files: p.n_files,
        blocks: scale.blocks,
        own_split,
    })
}

/// Busy symbol totals per resource.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BusySymbols {
    pub fronthaul_1: u64,
    pub fronthaul_2: u64,
    pub edge: u64,
    pub d2d_12: u64,
    pub d2d_21: u64,
}

/// Outcome of one transmission interval.
#[derive(Debug, Clone, PartialEq)]
pub struct DeliveryReport {
    pub total_symbols: u64,
    pub busy: BusySymbols,
    /// Received content ranges per user, merged and sorted.
    pub ledger: [Vec<(u64, u64)>; 2],
    pub decode_success: bool,
    pub empirical_ndt: f64,
    /// Empirical NDT minus the closed-form minimum; NaN when infeasible.
    pub gap_to_closed_form: f64,
}

impl DeliveryReport {
    /// Structured export with the report's canonical field names.
    pub fn to_document(&self) -> String {
        format!(
            "{{\"total_symbols\": {}, \"busy\": {{\"fronthaul_1\": {}, \"fronthaul_2\": {}, \
             \"edge\": {}, \"d2d_12\": {}, \"d2d_21\": {}}}, \"decode_success\": {}, \
             \"empirical_ndt\": {}, \"gap_to_closed_form\": {}}}",
            self.total_symbols,
            self.busy.fronthaul_1,
            self.busy.fronthaul_2,
            self.busy.edge,
            self.busy.d2d_12,
            self.busy.d2d_21,
            self.decode_success,
            self.empirical_ndt,
            self.gap_to_closed_form,
        )
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Skip the block staggering when only one resource is active.
    pub degenerate_passthrough: bool,
}

fn merge_ranges(mut ranges: Vec<(u64, u64)>) -> Vec<(u64, u64)> {
    ranges.sort_unstable();
    let mut out: Vec<(u64, u64)> = Vec::with_capacity(ranges.len());
    for r in ranges {
        if r.1 <= r.0 {
            continue;
        }
        match out.last_mut() {
            Some(last) if r.0 <= last.1 => last.1 = last.1.max(r.1),
            _ => out.push(r),
        }
    }
    out
}

fn covered_bits(ranges: &[(u64, u64)]) -> u64 {
    ranges.iter().map(|(s, e)| e - s).sum()
}

struct PhaseTotals {
    t_f: u64,
    t_e: u64,
    t_d: u64,
    busy: BusySymbols,
}

/// Phase symbol totals for the distinct-demand plan, ceilings applied per
/// phase.
fn distinct_phase_totals(
    layout: &BlockLayout,
    p: &SystemParams,
    scale: &SimScale,
) -> Result<PhaseTotals, SimError> {
    let blocks = u64::from(scale.blocks);
    let (f1, f2) = layout.fronthaul_bits();
    let link_bits = [f1 * blocks, f2 * blocks];
    let fronthaul_rate = p.r_f * scale.log_p;
    for bits in link_bits {
        if bits > 0 && fronthaul_rate <= 0.0 {
            return Err(SimError::ConstraintBreach {
                resource: "fronthaul",
                slot: None,
                needed: bits as f64,
                capacity: 0.0,
            });
        }
    }
    let t_f1 = symbols_needed(link_bits[0], fronthaul_rate);
    let t_f2 = symbols_needed(link_bits[1], fronthaul_rate);
    let w_bits = layout.bits_of(DeliveryMode::D2dExchange) * blocks;
    if w_bits > 0 && p.r_d <= 0.0 {
        return Err(SimError::ConstraintBreach {
            resource: "d2d",
            slot: None,
            needed: w_bits as f64,
            capacity: 0.0,
        });
    }
    let t_e = ceil_symbols(layout.edge_symbols(scale.log_p) * blocks as f64);
    let t_d = ceil_symbols(layout.d2d_symbols(scale.log_p) * blocks as f64);
    Ok(PhaseTotals {
        t_f: t_f1.max(t_f2),
        t_e,
        t_d,
        busy: BusySymbols {
            fronthaul_1: t_f1,
            fronthaul_2: t_f2,
            edge: t_e,
            d2d_12: t_d,
            d2d_21: t_d,
        },
    })
}

/// Broadcast phase totals for coinciding demands: uncached bits cross one
/// fronthaul link, then a single full-rate stream serves both users.
fn coinciding_phase_totals(
    layout: &BlockLayout,
    p: &SystemParams,
    scale: &SimScale,
) -> Result<PhaseTotals, SimError> {
    let blocks = u64::from(scale.blocks);
    let uncached = layout.uncached_bits * blocks;
    let fronthaul_rate = p.r_f * scale.log_p;
    if uncached > 0 && fronthaul_rate <= 0.0 {
        return Err(SimError::ConstraintBreach {
            resource: "fronthaul",
            slot: None,
            needed: uncached as f64,
            capacity: 0.0,
        });
    }
    let t_f = symbols_needed(uncached, fronthaul_rate);
    let t_e = symbols_needed(scale.file_bits, scale.log_p);
    Ok(PhaseTotals {
        t_f,
        t_e,
        t_d: 0,
        busy: BusySymbols {
            fronthaul_1: t_f,
            fronthaul_2: 0,
            edge: t_e,
            d2d_12: 0,
            d2d_21: 0,
        },
    })
}

fn check_demand(demand: &DemandVector, p: &SystemParams) -> Result<(), SimError> {
    if demand.d1 == 0 || demand.d2 == 0 || demand.d1 > p.n_files || demand.d2 > p.n_files {
        return Err(SimError::BadDemand {
            d1: demand.d1,
            d2: demand.d2,
            n_files: p.n_files,
        });
    }
    Ok(())
}

fn plan_has_broadcast(policy: &SerialPolicy) -> bool {
    policy
        .phase_plan
        .iter()
        .any(|e| e.mode == DeliveryMode::Broadcast)
}

fn full_coverage_ledger(layout: &BlockLayout, scale: &SimScale) -> Vec<(u64, u64)> {
    let lb = layout.block_bits;
    let mut ranges = Vec::new();
    for b in 0..u64::from(scale.blocks) {
        if layout.covered > 0 {
            ranges.push((b * lb, b * lb + layout.covered));
        }
    }
    merge_ranges(ranges)
}

fn finish_report(
    total_symbols: u64,
    busy: BusySymbols,
    ledger: [Vec<(u64, u64)>; 2],
    p: &SystemParams,
    scale: &SimScale,
) -> DeliveryReport {
    let decode_success = ledger.iter().all(|r| covered_bits(r) == scale.file_bits);
    let empirical_ndt = total_symbols as f64 * scale.log_p / scale.file_bits as f64;
    let closed = min_pipelined_ndt(p);
    let gap_to_closed_form = if closed.is_feasible() {
        empirical_ndt - closed.value()
    } else {
        f64::NAN
    };
    DeliveryReport {
        total_symbols,
        busy,
        ledger,
        decode_success,
        empirical_ndt,
        gap_to_closed_form,
    }
}

/// Runs one serial transmission interval: fronthaul, then edge, then D2D.
pub fn run_serial_ti(
    policy: &SerialPolicy,
    demand: &DemandVector,
    p: &SystemParams,
    scale: &SimScale,
) -> Result<DeliveryReport, SimError> {
    check_demand(demand, p)?;
    scale.validate().map_err(|_| SimError::ConstraintBreach {
        resource: "scale",
        slot: None,
        needed: scale.file_bits as f64,
        capacity: scale.blocks as f64,
    })?;
    let layout = BlockLayout::new(policy, scale);
    if demand.is_distinct() {
        if plan_has_broadcast(policy) {
            return Err(SimError::BroadcastUnderDistinctDemands);
        }
        let totals = distinct_phase_totals(&layout, p, scale)?;
        let ledger_one = full_coverage_ledger(&layout, scale);
        let total = totals.t_f + totals.t_e + totals.t_d;
        Ok(finish_report(
            total,
            totals.busy,
            [ledger_one.clone(), ledger_one],
            p,
            scale,
        ))
    } else {
        let totals = coinciding_phase_totals(&layout, p, scale)?;
        let full = vec![(0u64, scale.file_bits)];
        let total = totals.t_f + totals.t_e + totals.t_d;
        Ok(finish_report(
            total,
            totals.busy,
            [full.clone(), full],
            p,
            scale,
        ))
    }
}

/// Runs one pipelined transmission interval over B + 2 slots with the
/// staggered block assignment, causality tracking, and per-slot capacity
/// checks.
pub fn run_pipelined_ti(
    schedule: &PipelinedSchedule,
    demand: &DemandVector,
    p: &SystemParams,
    scale: &SimScale,
    opts: &RunOptions,
) -> Result<DeliveryReport, SimError> {
    check_demand(demand, p)?;
    if scale.blocks != schedule.blocks {
        return Err(SimError::ConstraintBreach {
            resource: "blocks",
            slot: None,
            needed: schedule.blocks as f64,
            capacity: scale.blocks as f64,
        });
    }
    let policy = &schedule.policy;
    let layout = BlockLayout::new(policy, scale);
    let distinct = demand.is_distinct();
    if distinct && plan_has_broadcast(policy) {
        return Err(SimError::BroadcastUnderDistinctDemands);
    }
    let totals = if distinct {
        distinct_phase_totals(&layout, p, scale)?
    } else {
        coinciding_phase_totals(&layout, p, scale)?
    };

    let active = [totals.t_f > 0, totals.t_e > 0, totals.t_d > 0]
        .iter()
        .filter(|&&a| a)
        .count();
    if opts.degenerate_passthrough && active <= 1 {
        // A single busy resource gains nothing from staggering; run it
        // straight through.
        let total = totals.t_f + totals.t_e + totals.t_d;
        let ledger_one = if distinct {
            full_coverage_ledger(&layout, scale)
        } else {
            vec![(0u64, scale.file_bits)]
        };
        return Ok(finish_report(
            total,
            totals.busy,
            [ledger_one.clone(), ledger_one],
            p,
            scale,
        ));
    }

    let b = scale.blocks;
    let max_phase = totals.t_f.max(totals.t_e).max(totals.t_d);
    let slot_symbols = max_phase.div_ceil(u64::from(b));

    // Per-block loads (every block carries the same mix).
    let (f1, f2) = if distinct {
        layout.fronthaul_bits()
    } else {
        (layout.uncached_bits, 0)
    };
    let edge_block_bits: u64 = if distinct {
        layout.covered
    } else {
        layout.block_bits
    };
    let edge_block_symbols = if distinct {
        layout.edge_symbols(scale.log_p)
    } else {
        layout.block_bits as f64 / scale.log_p
    };
    let d2d_block_symbols = if distinct {
        layout.d2d_symbols(scale.log_p)
    } else {
        0.0
    };

    let slot_capacity_f = slot_symbols as f64 * p.r_f * scale.log_p;
    let slot_capacity_e = slot_symbols as f64 * scale.log_p;

    let mut fronthaul_done = vec![u32::MAX; b as usize];
    let mut ledgers: [Vec<(u64, u64)>; 2] = [Vec::new(), Vec::new()];
    let mut busy = BusySymbols::default();
    for slot in 0..schedule.slot_count() {
        let assign = schedule.assignment(slot);
        if let Some(block) = assign.fronthaul_block {
            for (link, bits) in [f1, f2].into_iter().enumerate() {
                if bits as f64 > slot_capacity_f * (1.0 + BIT_TOL) + 1e-9 {
                    return Err(SimError::ConstraintBreach {
                        resource: if link == 0 {
                            "fronthaul link 1"
                        } else {
                            "fronthaul link 2"
                        },
                        slot: Some(slot),
                        needed: bits as f64,
                        capacity: slot_capacity_f,
                    });
                }
            }
            busy.fronthaul_1 += symbols_needed(f1, p.r_f * scale.log_p);
            busy.fronthaul_2 += symbols_needed(f2, p.r_f * scale.log_p);
            fronthaul_done[block as usize] = slot;
        }
        if let Some(block) = assign.edge_block {
            // Causality: the block's fronthaul message must be complete.
            if (f1 > 0 || f2 > 0) && fronthaul_done[block as usize] >= slot {
                return Err(SimError::CausalityViolation { slot, block });
            }
            if edge_block_bits as f64 > slot_capacity_e * (1.0 + BIT_TOL) + 1e-9 {
                return Err(SimError::ConstraintBreach {
                    resource: "edge",
                    slot: Some(slot),
                    needed: edge_block_bits as f64,
                    capacity: slot_capacity_e,
                });
            }
            busy.edge += ceil_symbols(edge_block_symbols);
            let base = u64::from(block) * layout.block_bits;
            let end = if distinct {
                base + layout.covered
            } else {
                base + layout.block_bits
            };
            if end > base {
                ledgers[0].push((base, end));
                ledgers[1].push((base, end));
            }
        }
        if assign.d2d_block.is_some() && d2d_block_symbols > 0.0 {
            let need = ceil_symbols(d2d_block_symbols);
            if need > slot_symbols {
                return Err(SimError::ConstraintBreach {
                    resource: "d2d",
                    slot: Some(slot),
                    needed: need as f64,
                    capacity: slot_symbols as f64,
                });
            }
            busy.d2d_12 += need;
            busy.d2d_21 += need;
        }
    }
    let total = u64::from(schedule.slot_count()) * slot_symbols;
    let ledgers = [
        merge_ranges(ledgers[0].clone()),
        merge_ranges(ledgers[1].clone()),
    ];
    Ok(finish_report(total, busy, ledgers, p, scale))
}

/// A delivery to evaluate: a serial policy or a pipelined schedule.
#[derive(Debug, Clone, Copy)]
pub enum Delivery<'a> {
    Serial(&'a SerialPolicy),
    Pipelined(&'a PipelinedSchedule),
}

/// Runs both demand classes and returns the report with the larger total
/// time (the distinct-demand report on ties).
pub fn worst_case_report(
    delivery: Delivery<'_>,
    p: &SystemParams,
    scale: &SimScale,
    opts: &RunOptions,
) -> Result<DeliveryReport, SimError> {
    let classes = crate::model::worst_case_demands(p.n_files).map_err(|_| SimError::BadDemand {
        d1: 0,
        d2: 0,
        n_files: p.n_files,
    })?;
    let mut best: Option<DeliveryReport> = None;
    for demand in classes {
        let report = match delivery {
            Delivery::Serial(policy) => run_serial_ti(policy, &demand, p, scale)?,
            Delivery::Pipelined(schedule) => run_pipelined_ti(schedule, &demand, p, scale, opts)?,
        };
        best = match best {
            Some(prev) if prev.total_symbols > report.total_symbols => Some(prev),
            _ => Some(report),
        };
    }
    Ok(best.expect("at least one demand class"))
}

/// One convergence measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceEntry {
    pub blocks: u32,
    pub log_p: f64,
    pub empirical_ndt: f64,
    pub gap_to_closed_form: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSeries {
    pub feasible: bool,
    pub entries: Vec<ConvergenceEntry>,
}

/// Sweeps block counts and SNR exponents, measuring the pipelined empirical
/// NDT against the closed form. Infeasible instances produce an empty series
/// with the flag cleared.
pub fn convergence_study(
    p: &SystemParams,
    b_list: &[u32],
    logp_list: &[f64],
    file_bits: u64,
) -> Result<ConvergenceSeries, SimError> {
    if !min_pipelined_ndt(p).is_feasible() {
        return Ok(ConvergenceSeries {
            feasible: false,
            entries: Vec::new(),
        });
    }
    let policy = crate::scheme::synthesize_serial_policy(p).map_err(|_| SimError::Infeasible)?;
    let mut entries = Vec::new();
    for &blocks in b_list {
        for &log_p in logp_list {
            let scale = SimScale::new(file_bits, log_p, blocks).map_err(|_| {
                SimError::ConstraintBreach {
                    resource: "scale",
                    slot: None,
                    needed: file_bits as f64,
                    capacity: blocks as f64,
                }
            })?;
            let schedule = crate::scheme::block_markov_convert(&policy, &scale)
                .expect("blocks validated by scale");
            let report = worst_case_report(
                Delivery::Pipelined(&schedule),
                p,
                &scale,
                &RunOptions::default(),
            )?;
            entries.push(ConvergenceEntry {
                blocks,
                log_p,
                empirical_ndt: report.empirical_ndt,
                gap_to_closed_form: report.gap_to_closed_form,
            });
        }
    }
    Ok(ConvergenceSeries {
        feasible: true,
        entries,
    })
}
