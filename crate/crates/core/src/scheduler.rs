//! FIFO dispatch with configurable server selection.
//!
//! The queue is strictly head-of-line: only the head job is ever considered,
//! and a head that fits nowhere blocks everything behind it regardless of
//! size. There is no backfilling; consolidation is the mover's business.

use crate::cluster::{ClusterState, JobId, PowerState, ServerId};
use crate::config::PlacementPolicy;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Choice {
    /// Place on this server now.
    Server(ServerId),
    /// Nothing fits, but a server that will fit is already booting.
    WaitForBoot,
    /// Nothing fits; this powered-off server should boot.
    RequestPowerOn(ServerId),
    /// Nothing fits and power management cannot help.
    Blocked,
}

/// Picks a server for a `cores`-wide job among powered-on servers that fit
/// it: `Pack` takes the fewest free cores, `Spread` the most, ties toward
/// the lowest id. Under power management a miss asks for the lowest-id off
/// server, unless a suitable boot is already in flight (one boot at a time
/// is enough for one blocked head).
pub fn choose_server(
    cluster: &ClusterState,
    cores: u32,
    placement: PlacementPolicy,
    power_managed: bool,
) -> Choice {
    let mut best: Option<(u32, ServerId)> = None;
    for srv in cluster.servers() {
        if !srv.is_on() {
            continue;
        }
        let free = srv.free_cores();
        let better = match placement {
            PlacementPolicy::Pack => best.map_or(true, |(bf, _)| free < bf),
            PlacementPolicy::Spread => best.map_or(true, |(bf, _)| free > bf),
        };
        if free >= cores && better {
            best = Some((free, srv.id));
        }
    }
    if let Some((_, id)) = best {
        return Choice::Server(id);
    }
    if power_managed {
        let mut first_off = None;
        for srv in cluster.servers() {
            if srv.capacity < cores {
                continue;
            }
            match srv.power() {
                PowerState::PoweringOn { .. } => return Choice::WaitForBoot,
                PowerState::Off => {
                    if first_off.is_none() {
                        first_off = Some(srv.id);
                    }
                }
                PowerState::On => {}
            }
        }
        if let Some(id) = first_off {
            return Choice::RequestPowerOn(id);
        }
    }
    Choice::Blocked
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Placement {
    pub job: JobId,
    pub server: ServerId,
    pub completion_at: u64,
    pub epoch: u64,
}

#[derive(Debug, Default)]
pub struct DispatchOutcome {
    pub placements: Vec<Placement>,
    /// Boots initiated by this dispatch round: (server, ready time).
    pub boots: Vec<(ServerId, u64)>,
}

/// Dispatches queue heads until one blocks or the queue empties.
pub fn try_dispatch(
    cluster: &mut ClusterState,
    placement: PlacementPolicy,
    power_managed: bool,
    power_on_delay: u64,
) -> Result<DispatchOutcome> {
    let mut out = DispatchOutcome::default();
    while let Some(head) = cluster.queue_head() {
        let cores = cluster.job(head).spec.cores;
        match choose_server(cluster, cores, placement, power_managed) {
            Choice::Server(server) => {
                let placed = cluster.place(head, server)?;
                out.placements.push(Placement {
                    job: head,
                    server,
                    completion_at: placed.completion_at,
                    epoch: placed.epoch,
                });
            }
            Choice::RequestPowerOn(server) => {
                let ready_at = cluster.clock + power_on_delay;
                if cluster.begin_power_on(server, ready_at) {
                    out.boots.push((server, ready_at));
                }
                break;
            }
            Choice::WaitForBoot | Choice::Blocked => break,
        }
    }
    Ok(out)
}
