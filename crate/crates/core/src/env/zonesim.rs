use std::f64::consts::TAU;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::ltl::{AlphabetContext, Assignment};

use super::{Action, ActionSpace, EnvError, Environment, Observation, StepResult};

const MAX_LAYOUT_ATTEMPTS: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    /// Proposition id of the zone's color.
    pub color: usize,
    pub center: [f64; 2],
    pub radius: f64,
}

impl Zone {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        (p[0] - self.center[0]).hypot(p[1] - self.center[1]) <= self.radius
    }

    /// Distance along the unit ray `origin + t·dir` to the zone boundary, if
    /// the ray meets it; zero from inside.
    pub fn ray_distance(&self, origin: [f64; 2], dir: [f64; 2]) -> Option<f64> {
        let (dx, dy) = (origin[0] - self.center[0], origin[1] - self.center[1]);
        let c = dx * dx + dy * dy - self.radius * self.radius;
        if c <= 0.0 {
            return Some(0.0);
        }
        let b = dir[0] * dx + dir[1] * dy;
        let disc = b * b - c;
        if disc < 0.0 {
            return None;
        }
        let t = -b - disc.sqrt();
        (t >= 0.0).then_some(t)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ZoneSimConfig {
    pub colors: Vec<String>,
    pub half_extent: f64,
    pub zones_per_color: usize,
    pub zone_radius: f64,
    pub lidar_beams: usize,
    pub lidar_range: f64,
    pub max_steps: usize,
    pub dt: f64,
    pub max_speed: f64,
    pub accel_scale: f64,
    pub turn_rate: f64,
    /// Zones may overlap; pairs of colors become achievable labels.
    pub overlap_mode: bool,
    /// Fixed layout instead of random sampling.
    pub zones: Option<Vec<Zone>>,
    /// Fixed start `[x, y, heading]`.
    pub start: Option<[f64; 3]>,
    pub seed: u64,
}

impl Default for ZoneSimConfig {
    fn default() -> Self {
        Self {
            colors: ["blue", "green", "magenta", "yellow"].map(String::from).to_vec(),
            half_extent: 2.5,
            zones_per_color: 2,
            zone_radius: 0.4,
            lidar_beams: 16,
            lidar_range: 5.0,
            max_steps: 1000,
            dt: 0.1,
            max_speed: 1.0,
            accel_scale: 2.0,
            turn_rate: 3.0,
            overlap_mode: false,
            zones: None,
            start: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZoneSimState {
    pub position: [f64; 2],
    pub heading: f64,
    pub speed: f64,
    pub step_count: usize,
}

/// Kinematic point robot steering among colored circular zones.
#[derive(Clone, Debug)]
pub struct ZoneSim {
    config: ZoneSimConfig,
    alphabet: AlphabetContext,
    zones: Vec<Zone>,
    state: ZoneSimState,
}

impl ZoneSim {
    pub fn new(config: ZoneSimConfig) -> Result<Self, EnvError> {
        if config.lidar_beams < 4 {
            return Err(EnvError::Config("at least 4 lidar beams required".into()));
        }
        if config.zone_radius <= 0.0 || config.zones_per_color == 0 || config.colors.is_empty() {
            return Err(EnvError::Config("zones need a positive radius and count".into()));
        }
        if let Some(zs) = &config.zones {
            if zs.iter().any(|z| z.radius <= 0.0 || z.color >= config.colors.len()) {
                return Err(EnvError::Config("fixed zones need positive radii and known colors".into()));
            }
        }
        let alphabet = AlphabetContext::from_names(&config.colors)?;
        Ok(Self {
            zones: config.zones.clone().unwrap_or_default(),
            state: ZoneSimState {
                position: [0.0, 0.0],
                heading: 0.0,
                speed: 0.0,
                step_count: 0,
            },
            alphabet,
            config,
        })
    }

    pub fn config(&self) -> &ZoneSimConfig {
        &self.config
    }

    pub fn zones(&self) -> &[Zone] {
        &self.zones
    }

    pub fn state(&self) -> &ZoneSimState {
        &self.state
    }

    pub fn set_state(&mut self, state: ZoneSimState) {
        self.state = state;
    }

    fn label_at(&self, p: [f64; 2]) -> Assignment {
        Assignment::from_ids(self.zones.iter().filter(|z| z.contains(p)).map(|z| z.color))
    }

    fn beam_dir(&self, i: usize) -> [f64; 2] {
        let a = self.state.heading + TAU * i as f64 / self.config.lidar_beams as f64;
        [a.cos(), a.sin()]
    }

    /// Closeness readings `1 − d/range` for one color; 0 when nothing is in range.
    pub fn lidar(&self, color: usize) -> Vec<f64> {
        let range = self.config.lidar_range;
        (0..self.config.lidar_beams)
            .map(|i| {
                let dir = self.beam_dir(i);
                self.zones
                    .iter()
                    .filter(|z| z.color == color)
                    .filter_map(|z| z.ray_distance(self.state.position, dir))
                    .filter(|&d| d < range)
                    .map(|d| 1.0 - d / range)
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    fn sample_zones(&self, rng: &mut dyn RngCore) -> Option<Vec<Zone>> {
        let r = self.config.zone_radius;
        let lim = self.config.half_extent - r;
        let mut zones: Vec<Zone> = Vec::new();
        for color in 0..self.config.colors.len() {
            for _ in 0..self.config.zones_per_color {
                let z = Zone {
                    color,
                    center: [rng.random_range(-lim..=lim), rng.random_range(-lim..=lim)],
                    radius: r,
                };
                let clash = zones.iter().any(|o| {
                    let d = (o.center[0] - z.center[0]).hypot(o.center[1] - z.center[1]);
                    !self.config.overlap_mode && d <= o.radius + z.radius
                });
                if clash {
                    return None;
                }
                zones.push(z);
            }
        }
        Some(zones)
    }
}

impl Environment for ZoneSim {
    fn alphabet(&self) -> &AlphabetContext {
        &self.alphabet
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Continuous(2)
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Result<Observation, EnvError> {
        let h = self.config.half_extent;
        for _ in 0..MAX_LAYOUT_ATTEMPTS {
            let zones = match &self.config.zones {
                Some(z) => z.clone(),
                None => match self.sample_zones(rng) {
                    Some(z) => z,
                    None => continue,
                },
            };
            let (position, heading) = match self.config.start {
                Some([x, y, th]) => ([x, y], th),
                None => (
                    [rng.random_range(-h..=h), rng.random_range(-h..=h)],
                    rng.random_range(0.0..TAU),
                ),
            };
            if self.config.start.is_none() && zones.iter().any(|z| z.contains(position)) {
                continue;
            }
            self.zones = zones;
            self.state = ZoneSimState {
                position,
                heading,
                speed: 0.0,
                step_count: 0,
            };
            return Ok(self.observation());
        }
        Err(EnvError::LayoutInfeasible(MAX_LAYOUT_ATTEMPTS))
    }

    fn step(&mut self, action: &Action) -> StepResult {
        let (accel, steer) = match action {
            Action::Continuous(v) => (v[0].clamp(-1.0, 1.0), v[1].clamp(-1.0, 1.0)),
            Action::Discrete(_) => panic!("ZoneSim takes continuous actions"),
        };
        let c = &self.config;
        let s = &mut self.state;
        s.heading = (s.heading + steer * c.turn_rate * c.dt).rem_euclid(TAU);
        s.speed = (s.speed + accel * c.accel_scale * c.dt).clamp(0.0, c.max_speed);
        let h = c.half_extent;
        s.position[0] = (s.position[0] + s.speed * s.heading.cos() * c.dt).clamp(-h, h);
        s.position[1] = (s.position[1] + s.speed * s.heading.sin() * c.dt).clamp(-h, h);
        s.step_count += 1;
        StepResult {
            observation: self.observation(),
            label: self.label(),
            done: self.state.step_count >= self.config.max_steps,
        }
    }

    fn label(&self) -> Assignment {
        self.label_at(self.state.position)
    }

    fn observation(&self) -> Observation {
        let s = &self.state;
        Observation::Lidar {
            ego: vec![s.speed / self.config.max_speed, s.heading.sin(), s.heading.cos()],
            lidar: (0..self.config.colors.len()).map(|c| self.lidar(c)).collect(),
        }
    }

    fn achievable(&self) -> Vec<Assignment> {
        let n = self.config.colors.len();
        let mut out: Vec<Assignment> = (0..n).map(Assignment::singleton).collect();
        if self.config.overlap_mode {
            for i in 0..n {
                for j in i + 1..n {
                    out.push(Assignment::from_ids([i, j]));
                }
            }
        }
        out
    }

    fn max_steps(&self) -> usize {
        self.config.max_steps
    }

    fn set_max_steps(&mut self, max_steps: usize) {
        self.config.max_steps = max_steps;
    }

    fn state_json(&self) -> Value {
        json!({
            "position": self.state.position,
            "heading": self.state.heading,
            "speed": self.state.speed,
            "step": self.state.step_count,
        })
    }

    fn layout_json(&self) -> Value {
        json!({
            "kind": "zonesim",
            "half_extent": self.config.half_extent,
            "colors": self.config.colors,
            "zones": self.zones,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fixed(zones: Vec<Zone>, start: [f64; 3]) -> ZoneSim {
        let mut env = ZoneSim::new(ZoneSimConfig {
            zones: Some(zones),
            start: Some(start),
            overlap_mode: true,
            ..Default::default()
        })
        .unwrap();
        env.reset(&mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        env
    }

    #[test]
    fn default_layout_has_eight_disjoint_zones() {
        let mut env = ZoneSim::new(ZoneSimConfig::default()).unwrap();
        env.reset(&mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(env.zones().len(), 8);
        assert!(env.label().is_empty());
        assert_eq!(env.achievable().len(), 4);
    }

    #[test]
    fn overlap_label_is_a_set() {
        let zones = vec![
            Zone { color: 0, center: [0.0, 0.0], radius: 0.4 },
            Zone { color: 1, center: [0.3, 0.0], radius: 0.4 },
        ];
        let env = fixed(zones, [0.15, 0.0, 0.0]);
        assert_eq!(env.label(), Assignment::from_ids([0, 1]));
        assert!(env.achievable().contains(&Assignment::from_ids([0, 1])));
    }

    #[test]
    fn zero_action_keeps_position() {
        let mut env = fixed(vec![Zone { color: 0, center: [2.0, 2.0], radius: 0.4 }], [-1.0, 0.5, 1.0]);
        let before = env.state().position;
        env.step(&Action::Continuous(vec![0.0, 0.0]));
        assert_eq!(env.state().position, before);
    }

    #[test]
    fn lidar_dead_ahead_matches_closed_form() {
        let env = fixed(vec![Zone { color: 0, center: [2.0, 0.0], radius: 0.4 }], [-1.0, 0.0, 0.0]);
        let d = 3.0 - 0.4;
        assert!((env.lidar(0)[0] - (1.0 - d / 5.0)).abs() < 1e-9);
        assert!(env.lidar(1).iter().all(|&v| v == 0.0));
        let inside = fixed(vec![Zone { color: 0, center: [0.0, 0.0], radius: 0.4 }], [0.1, 0.0, 0.0]);
        assert!(inside.lidar(0).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn walls_clamp_position() {
        let mut env = fixed(vec![Zone { color: 0, center: [0.0, 2.0], radius: 0.4 }], [2.45, 0.0, 0.0]);
        for _ in 0..20 {
            env.step(&Action::Continuous(vec![1.0, 0.0]));
        }
        assert_eq!(env.state().position[0], 2.5);
    }
}
