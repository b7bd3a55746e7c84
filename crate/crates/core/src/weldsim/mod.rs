//! Surrogate laser weld: a one-state melt recurrence with a hysteretic
//! keyhole flag, driving coaxial reflection (OR) and emission (OE) signals.
//!
//! OR rises with melt and collapses once the keyhole opens, so the highest
//! reflection sits just below the conduction-to-keyhole threshold. Rougher
//! surfaces absorb more and scatter more; scattering fades as the surface
//! melts.

mod noise;
mod params;
mod profile;

pub use noise::{Channel, NoiseKey};
pub use params::SimParams;
pub use profile::{
    Preset, Segment, SurfaceKind, SurfaceProfile, BRUSHED_SA, MIXED_SANDBLASTED_SA, SANDBLASTED_SA,
};

use thiserror::Error;

use crate::qnet::Action;
use crate::twin::Transition;

pub const POWER_MIN: f64 = 25.0;
pub const POWER_MAX: f64 = 100.0;
pub const SENSOR_MAX_VOLTS: f64 = 10.0;

/// Episode-id offset for baseline roll-outs so their noise never coincides
/// with training episodes.
pub const BASELINE_EPISODE_BASE: u64 = 1 << 40;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("power {0} W outside [25, 100]")]
    PowerOutOfRange(f64),
    #[error("episode over")]
    EpisodeOver,
    #[error("unknown surface preset {0:?}")]
    UnknownPreset(String),
    #[error("invalid profile: {0}")]
    Profile(String),
    #[error("empty power grid")]
    EmptyGrid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorReading {
    pub or_volts: f64,
    pub oe_volts: f64,
}

impl SensorReading {
    pub fn as_array(&self) -> [f64; 2] {
        [self.or_volts, self.oe_volts]
    }
}

/// Latent process state at the start of step `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeldState {
    pub t: u32,
    pub x_mm: f64,
    pub melt: f64,
    pub keyhole: bool,
    pub noise: NoiseKey,
}

impl WeldState {
    pub fn new(seed: u64, episode: u64) -> Self {
        Self {
            t: 0,
            x_mm: 0.0,
            melt: 0.0,
            keyhole: false,
            noise: NoiseKey::new(seed, episode),
        }
    }
}

/// Per-reading noise standard deviations.
struct NoiseDraw {
    or: f64,
    oe: f64,
}

/// Deterministic part of one transition, shared by `step` and `probe`.
fn physics(
    state: &WeldState,
    profile: &SurfaceProfile,
    p: &SimParams,
    power: f64,
    noise: NoiseDraw,
) -> (f64, bool, SensorReading) {
    let seg = profile.segment_at(state.x_mm);
    let absorptivity = p.a0 * (1.0 + p.kappa * seg.sa_um / p.sa_ref);
    let melt = (p.lambda * state.melt + p.c * absorptivity * power).clamp(0.0, p.m_max);
    let keyhole = if melt >= p.m_kh {
        true
    } else if melt <= 0.8 * p.m_kh {
        false
    } else {
        state.keyhole
    };
    let rho = p.rho0 * (seg.sa_um / p.sa_ref) * (1.0 - p.w * melt.min(1.0));
    let melt_term = if keyhole { p.or_kh_factor } else { melt / p.m_kh };
    let or = p.b0 * (power / 100.0) * (1.0 - rho) + p.or_peak * melt_term * (1.0 - rho);
    let oe = p.e0 * melt.min(1.0) + if keyhole { p.e1 } else { 0.0 };
    let (or_sd, oe_sd) = if p.noise {
        (seg.noise_sd_volts, p.sigma_oe)
    } else {
        (0.0, 0.0)
    };
    let reading = SensorReading {
        or_volts: (or + or_sd * noise.or).clamp(0.0, SENSOR_MAX_VOLTS),
        oe_volts: (oe + oe_sd * noise.oe).clamp(0.0, SENSOR_MAX_VOLTS),
    };
    (melt, keyhole, reading)
}

fn check_power(power: f64) -> Result<(), SimError> {
    if (POWER_MIN..=POWER_MAX).contains(&power) {
        Ok(())
    } else {
        Err(SimError::PowerOutOfRange(power))
    }
}

/// Advance one 10 ms window at constant `power`.
pub fn step(
    state: &WeldState,
    profile: &SurfaceProfile,
    params: &SimParams,
    power: f64,
) -> Result<(WeldState, SensorReading), SimError> {
    check_power(power)?;
    if state.t >= params.steps_per_episode {
        return Err(SimError::EpisodeOver);
    }
    let draw = if params.noise {
        NoiseDraw {
            or: state.noise.standard_normal(state.t, Channel::Or),
            oe: state.noise.standard_normal(state.t, Channel::Oe),
        }
    } else {
        NoiseDraw { or: 0.0, oe: 0.0 }
    };
    let (melt, keyhole, reading) = physics(state, profile, params, power, draw);
    let t = state.t + 1;
    let next = WeldState {
        t,
        x_mm: (params.mm_per_step * t as f64).min(profile.total_length()),
        melt,
        keyhole,
        noise: state.noise,
    };
    Ok((next, reading))
}

/// `OR / 10`.
pub fn reward(reading: &SensorReading) -> f64 {
    reading.or_volts / SENSOR_MAX_VOLTS
}

/// A weld line in progress: profile, parameters, and latent state.
#[derive(Debug, Clone)]
pub struct WeldEnv {
    pub profile: SurfaceProfile,
    pub params: SimParams,
    pub state: WeldState,
    probes: u32,
}

impl WeldEnv {
    pub fn new(profile: SurfaceProfile, params: SimParams, seed: u64, episode: u64) -> Self {
        Self {
            profile,
            params,
            state: WeldState::new(seed, episode),
            probes: 0,
        }
    }

    pub fn reset(&mut self, seed: u64, episode: u64) {
        self.state = WeldState::new(seed, episode);
        self.probes = 0;
    }

    /// Sensor reading the current state would produce under `power`, without
    /// advancing the line. Each probe draws fresh noise.
    pub fn probe(&mut self, power: f64) -> Result<SensorReading, SimError> {
        check_power(power)?;
        let draw = if self.params.noise {
            NoiseDraw {
                or: self.state.noise.standard_normal(self.probes, Channel::ProbeOr),
                oe: self.state.noise.standard_normal(self.probes, Channel::ProbeOe),
            }
        } else {
            NoiseDraw { or: 0.0, oe: 0.0 }
        };
        self.probes += 1;
        Ok(physics(&self.state, &self.profile, &self.params, power, draw).2)
    }

    pub fn step(&mut self, power: f64) -> Result<SensorReading, SimError> {
        let (next, reading) = step(&self.state, &self.profile, &self.params, power)?;
        self.state = next;
        Ok(reading)
    }

    pub fn done(&self) -> bool {
        self.state.t >= self.params.steps_per_episode
    }
}

/// One simulated weld line.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub transitions: Vec<Transition>,
    pub powers: Vec<f64>,
    pub keyhole: Vec<bool>,
    pub episode_return: f64,
}

impl EpisodeRecord {
    pub fn keyhole_fraction(&self) -> f64 {
        self.keyhole.iter().filter(|&&k| k).count() as f64 / self.keyhole.len().max(1) as f64
    }
}

/// Roll out a full episode. The first observation is a 25 W probe of the
/// cold surface; `policy(step, obs)` returns the power for each step.
pub fn run_episode(
    mut policy: impl FnMut(u32, SensorReading) -> f64,
    profile: &SurfaceProfile,
    params: &SimParams,
    seed: u64,
    episode: u64,
) -> Result<EpisodeRecord, SimError> {
    let mut env = WeldEnv::new(profile.clone(), params.clone(), seed, episode);
    let mut obs = env.probe(POWER_MIN)?;
    let n = params.steps_per_episode as usize;
    let mut rec = EpisodeRecord {
        transitions: Vec::with_capacity(n),
        powers: Vec::with_capacity(n),
        keyhole: Vec::with_capacity(n),
        episode_return: 0.0,
    };
    for t in 0..params.steps_per_episode {
        let power = policy(t, obs).clamp(POWER_MIN, POWER_MAX);
        let next = env.step(power)?;
        let r = reward(&next);
        rec.transitions.push(Transition {
            obs: obs.as_array(),
            action: Action::from_power(power).squashed,
            reward: r,
            next_obs: next.as_array(),
            done: env.done(),
        });
        rec.powers.push(power);
        rec.keyhole.push(env.state.keyhole);
        rec.episode_return += r;
        obs = next;
    }
    Ok(rec)
}

/// Result of the constant-power grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct Baseline {
    pub best_power: f64,
    pub best_mean_return: f64,
    /// `(power, mean return)` for every grid point, ascending in power.
    pub table: Vec<(f64, f64)>,
}

/// `25, 30, ..., 100`.
pub fn default_power_grid() -> Vec<f64> {
    (0..16).map(|i| 25.0 + 5.0 * i as f64).collect()
}

/// Best constant power by mean episode return; ties go to the lower power.
pub fn grid_search_baseline(
    profile: &SurfaceProfile,
    params: &SimParams,
    powers: &[f64],
    episodes_per_power: u32,
    seed: u64,
) -> Result<Baseline, SimError> {
    if powers.is_empty() || episodes_per_power == 0 {
        return Err(SimError::EmptyGrid);
    }
    let mut grid = powers.to_vec();
    for &p in &grid {
        check_power(p)?;
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut table = Vec::with_capacity(grid.len());
    for (i, &p) in grid.iter().enumerate() {
        let mut total = 0.0;
        for j in 0..episodes_per_power {
            let episode = BASELINE_EPISODE_BASE + (i as u64) * episodes_per_power as u64 + j as u64;
            total += run_episode(|_, _| p, profile, params, seed, episode)?.episode_return;
        }
        table.push((p, total / episodes_per_power as f64));
    }
    let (best_power, best_mean_return) = table
        .iter()
        .copied()
        .fold(None, |best: Option<(f64, f64)>, (p, r)| match best {
            Some((_, br)) if r <= br => best,
            _ => Some((p, r)),
        })
        .expect("grid is non-empty");
    Ok(Baseline {
        best_power,
        best_mean_return,
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brushed() -> SurfaceProfile {
        SurfaceProfile::preset(Preset::Brushed, 0.4, 0.15)
    }

    #[test]
    fn hand_evaluated_first_step() {
        let p = SimParams::noiseless();
        let (s, r) = step(&WeldState::new(0, 0), &brushed(), &p, 80.0).unwrap();
        assert!((s.melt - 0.28).abs() < 1e-12);
        assert!((r.or_volts - 2.25568).abs() < 1e-4);
        assert!((r.oe_volts - 1.4).abs() < 1e-12);
        assert!(!s.keyhole);
        assert_eq!(s.t, 1);
        assert_eq!(s.x_mm, 0.5);
    }

    #[test]
    fn keyhole_hysteresis() {
        let p = SimParams::noiseless();
        let prof = brushed();
        // Solve for the power that lands melt exactly on a target from a given state.
        let power_for = |from: f64, target: f64| (target - p.lambda * from) / (p.c * p.a0 * 1.25);
        let mut s = WeldState::new(0, 0);
        s.melt = 1.05;
        s.keyhole = true;
        let (s1, _) = step(&s, &prof, &p, power_for(1.05, 0.9)).unwrap();
        assert!((s1.melt - 0.9).abs() < 1e-9);
        assert!(s1.keyhole);
        let (s2, _) = step(&s1, &prof, &p, power_for(s1.melt, 0.75)).unwrap();
        assert!(!s2.keyhole);
    }

    #[test]
    fn keyhole_entry_drops_reflection() {
        let p = SimParams::noiseless();
        let below = p.or_peak * 0.999 / p.m_kh;
        let inside = p.or_peak * p.or_kh_factor;
        assert!(inside < below);
    }

    #[test]
    fn errors() {
        let p = SimParams::noiseless();
        let s = WeldState::new(0, 0);
        assert_eq!(step(&s, &brushed(), &p, 24.9), Err(SimError::PowerOutOfRange(24.9)));
        assert_eq!(step(&s, &brushed(), &p, 100.1), Err(SimError::PowerOutOfRange(100.1)));
        let mut end = s;
        end.t = 80;
        assert_eq!(step(&end, &brushed(), &p, 50.0), Err(SimError::EpisodeOver));
    }

    #[test]
    fn reward_is_or_over_ten() {
        let r = |v| reward(&SensorReading { or_volts: v, oe_volts: 0.0 });
        assert_eq!(r(10.0), 1.0);
        assert_eq!(r(0.0), 0.0);
        assert!((r(3.7) - 0.37).abs() < 1e-15);
    }

    #[test]
    fn episode_is_seed_deterministic() {
        let p = SimParams::default();
        let f = |t: u32, o: SensorReading| 40.0 + (t as f64) * 0.5 + o.or_volts;
        let a = run_episode(f, &brushed(), &p, 9, 2).unwrap();
        let b = run_episode(f, &brushed(), &p, 9, 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.transitions.len(), 80);
        assert!(a.transitions[79].done && !a.transitions[78].done);
        let c = run_episode(f, &brushed(), &p, 10, 2).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn degenerate_grid() {
        let b = grid_search_baseline(&brushed(), &SimParams::default(), &[60.0], 3, 1).unwrap();
        assert_eq!(b.best_power, 60.0);
        assert!(matches!(
            grid_search_baseline(&brushed(), &SimParams::default(), &[], 3, 1),
            Err(SimError::EmptyGrid)
        ));
    }
}
