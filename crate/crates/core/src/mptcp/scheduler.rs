//! Sub-flow selection policies.

use crate::topology::RoutingContext;

use super::{Priority, Subflow, SubflowState};

/// Picks the sub-flows that carry the next segment.
///
/// An empty result means the segment waits at the sender.
pub trait PathScheduler: Send {
    fn select(&self, subflows: &[Subflow], ctx: &RoutingContext) -> Vec<usize>;
}

fn queue_bytes(sf: &Subflow, ctx: &RoutingContext) -> u64 {
    ctx.path(&sf.path.id).map(|p| p.queue_bytes).unwrap_or_else(|| sf.queued_bytes())
}

/// Estimated delivery delay in ms for a segment queued on `sf` now.
fn score(sf: &Subflow, ctx: &RoutingContext) -> f64 {
    let cap = sf.path.bottleneck_mbps();
    let drain_ms = queue_bytes(sf, ctx) as f64 * 8.0 / (cap * 1e3);
    sf.srtt_ms + drain_ms
}

/// Lowest `srtt + queue drain time`; ties go to the larger path capacity,
/// then the lower index.
pub fn min_score<'a>(candidates: impl Iterator<Item = &'a Subflow>, ctx: &RoutingContext) -> Option<usize> {
    candidates
        .map(|sf| (score(sf, ctx), sf.path.bottleneck_mbps(), sf.id))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)).then(a.2.cmp(&b.2)))
        .map(|(_, _, id)| id)
}

#[derive(Debug, Default, Clone, Copy)]
pub struct MinDelayScheduler;

impl PathScheduler for MinDelayScheduler {
    fn select(&self, subflows: &[Subflow], ctx: &RoutingContext) -> Vec<usize> {
        min_score(subflows.iter().filter(|s| s.is_active() && s.has_window()), ctx).into_iter().collect()
    }
}

/// Regular sub-flows first in declaration order; a backup sub-flow only
/// when no regular one is active. Exactly one sub-flow carries new data.
#[derive(Debug, Default, Clone, Copy)]
pub struct BackupScheduler;

impl PathScheduler for BackupScheduler {
    fn select(&self, subflows: &[Subflow], _ctx: &RoutingContext) -> Vec<usize> {
        let pick = |prio| subflows.iter().find(|s| s.priority == prio && s.is_active());
        match pick(Priority::Regular).or_else(|| pick(Priority::Backup)) {
            Some(sf) if sf.has_window() => vec![sf.id],
            _ => Vec::new(),
        }
    }
}

/// Every active sub-flow, or nothing if any of them is window-limited.
#[derive(Debug, Default, Clone, Copy)]
pub struct RedundantScheduler;

impl PathScheduler for RedundantScheduler {
    fn select(&self, subflows: &[Subflow], _ctx: &RoutingContext) -> Vec<usize> {
        let active: Vec<&Subflow> = subflows.iter().filter(|s| s.state == SubflowState::Active).collect();
        if active.iter().all(|s| s.has_window()) {
            active.iter().map(|s| s.id).collect()
        } else {
            Vec::new()
        }
    }
}
