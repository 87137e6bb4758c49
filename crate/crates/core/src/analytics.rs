//! Availability math, empirical estimators and the throughput sampler.

use serde::{Deserialize, Serialize};

use crate::error::DomainError;
use crate::link::LinkAvailabilityParams;
use crate::sim::SimTime;

fn check_unit(x: f64) -> Result<f64, DomainError> {
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err(DomainError::OutOfRange(x))
    }
}

/// Θ = ψ / (ψ + γ) for mean uptime ψ and mean downtime γ.
pub fn path_availability(psi_s: f64, gamma_s: f64) -> Result<f64, DomainError> {
    if psi_s.is_nan() || psi_s <= 0.0 {
        return Err(DomainError::NonPositiveUptime(psi_s));
    }
    if gamma_s.is_nan() || gamma_s < 0.0 {
        return Err(DomainError::NegativeDowntime(gamma_s));
    }
    Ok(psi_s / (psi_s + gamma_s))
}

/// Two independent paths; the pair fails only if both fail.
pub fn dc_availability(theta_mn: f64, theta_sn: f64) -> Result<f64, DomainError> {
    Ok(1.0 - (1.0 - check_unit(theta_mn)?) * (1.0 - check_unit(theta_sn)?))
}

/// 1 − Π(1 − Θ_i). Two inputs give exactly [`dc_availability`].
pub fn multi_path_availability(thetas: &[f64]) -> Result<f64, DomainError> {
    match thetas {
        [] => return Err(DomainError::Empty),
        [t] => return check_unit(*t),
        _ => {}
    }
    let mut all_down = 1.0;
    for &t in thetas {
        all_down *= 1.0 - check_unit(t)?;
    }
    Ok(1.0 - all_down)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AvailabilitySource {
    Analytic,
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathAvailability {
    pub path_id: String,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvailabilityReport {
    /// In sub-flow order; the first entry is the MN (or main) path.
    pub paths: Vec<PathAvailability>,
    pub theta_dc: f64,
    pub source: AvailabilitySource,
}

impl AvailabilityReport {
    pub fn theta_mn(&self) -> f64 {
        self.paths.first().map_or(0.0, |p| p.theta)
    }

    pub fn theta_sn(&self) -> f64 {
        self.paths.get(1).map_or(0.0, |p| p.theta)
    }

    pub fn theta(&self, path_id: &str) -> Option<f64> {
        self.paths.iter().find(|p| p.path_id == path_id).map(|p| p.theta)
    }
}

/// Closed-form report for independent paths with the given renewal parameters.
pub fn analytic_report(paths: &[(String, LinkAvailabilityParams)]) -> Result<AvailabilityReport, DomainError> {
    let paths = paths
        .iter()
        .map(|(id, p)| Ok(PathAvailability { path_id: id.clone(), theta: path_availability(p.psi_s, p.gamma_s)? }))
        .collect::<Result<Vec<_>, DomainError>>()?;
    let thetas: Vec<f64> = paths.iter().map(|p| p.theta).collect();
    let theta_dc = multi_path_availability(&thetas)?;
    Ok(AvailabilityReport { paths, theta_dc, source: AvailabilitySource::Analytic })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub path_id: String,
    pub up: bool,
    pub active: bool,
    /// First copies delivered over this path in the last interval.
    pub useful_bytes: u64,
    /// Later copies of already-delivered data.
    pub redundant_bytes: u64,
    pub throughput_mbps: f64,
    pub redundant_mbps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t: SimTime,
    pub paths: Vec<PathSample>,
}

impl TraceSample {
    pub fn aggregate_mbps(&self) -> f64 {
        self.paths.iter().map(|p| p.throughput_mbps).sum()
    }

    pub fn path(&self, id: &str) -> Option<&PathSample> {
        self.paths.iter().find(|p| p.path_id == id)
    }

    pub fn active_set(&self) -> Vec<&str> {
        self.paths.iter().filter(|p| p.active).map(|p| p.path_id.as_str()).collect()
    }

    pub fn any_up(&self) -> bool {
        self.paths.iter().any(|p| p.up)
    }
}

pub fn mbps(bytes: u64, interval: SimTime) -> f64 {
    bytes as f64 * 8.0 / interval.as_secs_f64() / 1e6
}

/// Accumulates per-path delivered bytes between sample ticks.
#[derive(Debug, Clone)]
pub struct ThroughputSampler {
    interval: SimTime,
    path_ids: Vec<String>,
    useful: Vec<u64>,
    redundant: Vec<u64>,
}

impl ThroughputSampler {
    pub fn new(path_ids: Vec<String>, interval: SimTime) -> Self {
        let n = path_ids.len();
        Self { interval, path_ids, useful: vec![0; n], redundant: vec![0; n] }
    }

    pub fn interval(&self) -> SimTime {
        self.interval
    }

    pub fn record_useful(&mut self, path: usize, bytes: u64) {
        self.useful[path] += bytes;
    }

    pub fn record_redundant(&mut self, path: usize, bytes: u64) {
        self.redundant[path] += bytes;
    }

    /// Closes the current interval at `t` and starts a new one.
    pub fn sample(&mut self, t: SimTime, up: &[bool], active: &[bool]) -> TraceSample {
        let paths = self
            .path_ids
            .iter()
            .enumerate()
            .map(|(i, id)| {
                let useful = std::mem::take(&mut self.useful[i]);
                let redundant = std::mem::take(&mut self.redundant[i]);
                PathSample {
                    path_id: id.clone(),
                    up: up[i],
                    active: active[i],
                    useful_bytes: useful,
                    redundant_bytes: redundant,
                    throughput_mbps: mbps(useful, self.interval),
                    redundant_mbps: mbps(redundant, self.interval),
                }
            })
            .collect();
        TraceSample { t, paths }
    }
}

/// Sample-based availability counters; constant memory for long runs.
#[derive(Debug, Clone, Default)]
pub struct AvailabilityAccumulator {
    path_ids: Vec<String>,
    up: Vec<u64>,
    any_up: u64,
    samples: u64,
}

impl AvailabilityAccumulator {
    pub fn add(&mut self, s: &TraceSample) {
        if self.samples == 0 {
            self.path_ids = s.paths.iter().map(|p| p.path_id.clone()).collect();
            self.up = vec![0; s.paths.len()];
        }
        for (i, p) in s.paths.iter().enumerate() {
            self.up[i] += p.up as u64;
        }
        self.any_up += s.any_up() as u64;
        self.samples += 1;
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn report(&self) -> Result<AvailabilityReport, DomainError> {
        if self.samples == 0 {
            return Err(DomainError::Empty);
        }
        let n = self.samples as f64;
        Ok(AvailabilityReport {
            paths: self
                .path_ids
                .iter()
                .zip(&self.up)
                .map(|(id, &u)| PathAvailability { path_id: id.clone(), theta: u as f64 / n })
                .collect(),
            theta_dc: self.any_up as f64 / n,
            source: AvailabilitySource::Empirical,
        })
    }
}

/// Fraction of samples each path was up, and fraction with at least one up.
pub fn empirical_availability(trace: &[TraceSample]) -> Result<AvailabilityReport, DomainError> {
    let mut acc = AvailabilityAccumulator::default();
    trace.iter().for_each(|s| acc.add(s));
    acc.report()
}

/// Exact time-weighted up time per path and for the union of paths.
#[derive(Debug, Clone)]
pub struct UpTimeTracker {
    up: Vec<bool>,
    up_time: Vec<SimTime>,
    any_time: SimTime,
    last: SimTime,
}

impl UpTimeTracker {
    pub fn new(initial: &[bool], now: SimTime) -> Self {
        Self { up: initial.to_vec(), up_time: vec![SimTime::ZERO; initial.len()], any_time: SimTime::ZERO, last: now }
    }

    fn advance(&mut self, now: SimTime) {
        let dt = now - self.last;
        for (t, &u) in self.up_time.iter_mut().zip(&self.up) {
            if u {
                *t += dt;
            }
        }
        if self.up.iter().any(|&u| u) {
            self.any_time += dt;
        }
        self.last = now;
    }

    pub fn set(&mut self, now: SimTime, path: usize, up: bool) {
        self.advance(now);
        self.up[path] = up;
    }

    /// `(per-path availability, union availability)` over `[start, now]`.
    pub fn fractions(&mut self, start: SimTime, now: SimTime) -> (Vec<f64>, f64) {
        self.advance(now);
        let span = (now - start).as_secs_f64();
        if span <= 0.0 {
            return (self.up.iter().map(|&u| u as u8 as f64).collect(), self.up.iter().any(|&u| u) as u8 as f64);
        }
        (self.up_time.iter().map(|t| t.as_secs_f64() / span).collect(), self.any_time.as_secs_f64() / span)
    }
}
