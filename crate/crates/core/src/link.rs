//! Access links as alternating up/down renewal processes.
//!
//! Each link alternates between an up phase (mean `psi_s`) and a down phase
//! (mean `gamma_s`). While down, the link carries nothing; anything in flight
//! when it drops is lost. Availability in the long run is `psi / (psi + gamma)`.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::sim::{RngStream, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseDistribution {
    #[default]
    Exponential,
    Deterministic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkAvailabilityParams {
    pub psi_s: f64,
    pub gamma_s: f64,
    #[serde(default)]
    pub distribution: PhaseDistribution,
}

impl LinkAvailabilityParams {
    pub fn new(psi_s: f64, gamma_s: f64, distribution: PhaseDistribution) -> Self {
        Self { psi_s, gamma_s, distribution }
    }

    pub fn never_fails(&self) -> bool {
        self.gamma_s == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Up,
    Down,
}

/// Draws the length of the next `phase`.
pub fn sample_phase(params: &LinkAvailabilityParams, phase: Phase, rng: &mut RngStream) -> SimTime {
    let mean = match phase {
        Phase::Up => params.psi_s,
        Phase::Down => params.gamma_s,
    };
    if mean <= 0.0 {
        return SimTime::ZERO;
    }
    match params.distribution {
        PhaseDistribution::Deterministic => SimTime::from_secs_f64(mean),
        PhaseDistribution::Exponential => {
            let exp = Exp::new(1.0 / mean).expect("positive rate");
            SimTime::from_secs_f64(exp.sample(rng.rng()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transition {
    GoUp,
    GoDown,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{event:?} while link is {}", if *.was_up { "up" } else { "down" })]
pub struct TransitionError {
    pub event: Transition,
    pub was_up: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TransmitOutcome {
    /// Reaches the far end after `latency` (propagation + serialization).
    Delivered {
        latency: SimTime,
    },
    Lost,
    Blocked,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkState {
    pub up: bool,
    pub capacity_mbps: f64,
    pub delay: SimTime,
    pub loss: f64,
    pub next_transition: Option<SimTime>,
}

impl LinkState {
    pub fn new(capacity_mbps: f64, delay: SimTime, loss: f64) -> Self {
        Self { up: true, capacity_mbps, delay, loss, next_transition: None }
    }

    pub fn effective_capacity_mbps(&self) -> f64 {
        if self.up {
            self.capacity_mbps
        } else {
            0.0
        }
    }

    /// Toggles the up flag. The event must match the current phase.
    pub fn advance(&mut self, event: Transition) -> Result<(), TransitionError> {
        match (event, self.up) {
            (Transition::GoDown, true) => self.up = false,
            (Transition::GoUp, false) => self.up = true,
            _ => return Err(TransitionError { event, was_up: self.up }),
        }
        Ok(())
    }

    pub fn serialization_time(&self, bytes: u32) -> SimTime {
        serialization_time(bytes, self.capacity_mbps)
    }

    pub fn transmit(&self, bytes: u32, rng: &mut RngStream) -> TransmitOutcome {
        if !self.up {
            return TransmitOutcome::Blocked;
        }
        let lost = if self.loss >= 1.0 {
            true
        } else if self.loss > 0.0 {
            rng.rng().random::<f64>() < self.loss
        } else {
            false
        };
        if lost {
            TransmitOutcome::Lost
        } else {
            TransmitOutcome::Delivered { latency: self.delay + self.serialization_time(bytes) }
        }
    }
}

pub fn serialization_time(bytes: u32, capacity_mbps: f64) -> SimTime {
    // bits / (Mbit/s) = microseconds
    SimTime::from_micros(((bytes as f64 * 8.0) / capacity_mbps).round().max(1.0) as u64)
}

/// A link plus its renewal-process bookkeeping.
#[derive(Debug, Clone)]
pub struct Link {
    pub id: String,
    pub params: LinkAvailabilityParams,
    pub state: LinkState,
    phase_rng: RngStream,
    loss_rng: RngStream,
    /// Bumped whenever the pending renewal event is superseded.
    generation: u64,
    /// Bumped on every up→down edge; packets stamped with an older epoch are lost.
    epoch: u64,
    /// Held down by a scripted event; renewal suspended.
    pinned: bool,
    up_time: SimTime,
    last_change: SimTime,
}

impl Link {
    pub fn new(id: &str, params: LinkAvailabilityParams, state: LinkState, seed: u64) -> Self {
        Self {
            id: id.to_owned(),
            params,
            state,
            phase_rng: RngStream::new(seed, &format!("link/{id}/phase")),
            loss_rng: RngStream::new(seed, &format!("link/{id}/loss")),
            generation: 0,
            epoch: 0,
            pinned: false,
            up_time: SimTime::ZERO,
            last_change: SimTime::ZERO,
        }
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn is_up(&self) -> bool {
        self.state.up
    }

    pub fn is_pinned(&self) -> bool {
        self.pinned
    }

    /// Starts the renewal process at `now`. `initially_up = false` pins the
    /// link down until a scripted release.
    ///
    /// Returns the first renewal transition to schedule, if any.
    pub fn start(&mut self, now: SimTime, initially_up: bool) -> Option<(SimTime, Transition)> {
        self.last_change = now;
        if !initially_up {
            self.state.up = false;
            self.pinned = true;
            self.state.next_transition = None;
            return None;
        }
        self.state.up = true;
        self.schedule_next(now)
    }

    fn schedule_next(&mut self, now: SimTime) -> Option<(SimTime, Transition)> {
        if self.pinned {
            self.state.next_transition = None;
            return None;
        }
        let (phase, next) = if self.state.up {
            if self.params.never_fails() {
                self.state.next_transition = None;
                return None;
            }
            (Phase::Up, Transition::GoDown)
        } else {
            (Phase::Down, Transition::GoUp)
        };
        let at = now + sample_phase(&self.params, phase, &mut self.phase_rng);
        self.state.next_transition = Some(at);
        Some((at, next))
    }

    fn apply(&mut self, now: SimTime, event: Transition) -> Result<(), TransitionError> {
        let was_up = self.state.up;
        self.state.advance(event)?;
        if was_up {
            self.up_time += now - self.last_change;
            self.epoch += 1;
        }
        self.last_change = now;
        Ok(())
    }

    /// Applies a renewal transition scheduled under `generation`.
    ///
    /// `Ok(None)` with no state change means the event was superseded.
    pub fn on_renewal(
        &mut self,
        now: SimTime,
        generation: u64,
        event: Transition,
    ) -> Result<RenewalStep, TransitionError> {
        if generation != self.generation || self.pinned {
            return Ok(RenewalStep { changed: false, next: None });
        }
        self.apply(now, event)?;
        Ok(RenewalStep { changed: true, next: self.schedule_next(now) })
    }

    /// Scripted override: `up = false` pins the link down, `up = true`
    /// releases it and restarts the renewal process with a fresh up phase.
    pub fn force(&mut self, now: SimTime, up: bool) -> Result<RenewalStep, TransitionError> {
        self.generation += 1;
        if up {
            self.pinned = false;
            let changed = !self.state.up;
            if changed {
                self.apply(now, Transition::GoUp)?;
            }
            Ok(RenewalStep { changed, next: self.schedule_next(now) })
        } else {
            self.pinned = true;
            self.state.next_transition = None;
            let changed = self.state.up;
            if changed {
                self.apply(now, Transition::GoDown)?;
            }
            Ok(RenewalStep { changed, next: None })
        }
    }

    /// Drops everything in flight without changing the up/down phase
    /// (the radio leg was replaced).
    pub fn reset_in_flight(&mut self) {
        self.epoch += 1;
    }

    pub fn transmit(&mut self, bytes: u32) -> TransmitOutcome {
        self.state.transmit(bytes, &mut self.loss_rng)
    }

    /// Exact time-weighted uptime up to `now`.
    pub fn up_time(&self, now: SimTime) -> SimTime {
        if self.state.up {
            self.up_time + (now - self.last_change)
        } else {
            self.up_time
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenewalStep {
    pub changed: bool,
    pub next: Option<(SimTime, Transition)>,
}
