//! Run configuration: a flat, typed key-value format.
//!
//! `parse(serialize(config)) == config` holds exactly: floats are written
//! in shortest round-trip form. The configuration hash embedded in every
//! output file covers the serialized reproducible content (scenario,
//! physics and numerics), not output locations.

use crate::error::{Result, VlasovError};
use crate::kernels::Sign;
use crate::scenarios::{Scenario, ScenarioFamily};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub dt: f64,
    pub t_end: f64,
    pub particles: u64,
    pub mollify_n: u32,
    pub escape_radius: f64,
    /// Steps between diagnostics rows.
    pub cadence: u64,
    pub seed: u64,
    /// Field-grid nodes per axis.
    pub grid_cells: usize,
}

impl RunConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let scenario = Scenario::preset(name)?;
        let (dt, t_end, particles, grid_cells, mollify_n, escape_radius) = match name {
            "landau" => (0.05, 20.0, 20_000, 64, 4, 40.0),
            "two-stream" => (0.05, 30.0, 40_000, 64, 4, 40.0),
            "bump3d" => (0.01, 1.0, 50_000, 32, 12, 6.0),
            "disc2d" => (0.01, 1.0, 40_000, 64, 16, 6.0),
            _ => (0.05, 10.0, 20_000, 64, 4, 40.0),
        };
        Ok(Self {
            scenario,
            dt,
            t_end,
            particles,
            mollify_n,
            escape_radius,
            cadence: 10,
            seed: 1,
            grid_cells,
        })
    }

    /// Keys in serialization order.
    fn keys(&self) -> Vec<&'static str> {
        let mut keys = vec!["scenario", "sigma", "v_max"];
        match self.scenario.family {
            ScenarioFamily::Landau { .. } => {
                keys.extend(["length", "wavenumber", "alpha", "v_thermal", "mean_density"]);
            }
            ScenarioFamily::TwoStream { .. } => {
                keys.extend([
                    "length",
                    "wavenumber",
                    "alpha",
                    "v_thermal",
                    "v_drift",
                    "mean_density",
                ]);
            }
            ScenarioFamily::Bump3d { .. } => {
                keys.extend(["amplitude", "x_radius", "v_radius"]);
            }
            ScenarioFamily::Disc2d { .. } => {
                keys.extend(["amplitude", "x_radius", "v_radius", "background_radius"]);
            }
        }
        keys.extend([
            "dt",
            "t_end",
            "particles",
            "mollify_n",
            "escape_radius",
            "cadence",
            "seed",
            "grid_cells",
        ]);
        keys
    }

    fn get(&self, key: &str) -> String {
        let f = &self.scenario.family;
        match key {
            "scenario" => self.scenario.name.clone(),
            "sigma" => self.scenario.sigma.to_string(),
            "v_max" => self.scenario.v_max.to_string(),
            "length" => match f {
                ScenarioFamily::Landau { length, .. }
                | ScenarioFamily::TwoStream { length, .. } => length.to_string(),
                _ => String::new(),
            },
            "wavenumber" => match f {
                ScenarioFamily::Landau { wavenumber, .. }
                | ScenarioFamily::TwoStream { wavenumber, .. } => wavenumber.to_string(),
                _ => String::new(),
            },
            "alpha" => match f {
                ScenarioFamily::Landau { alpha, .. } | ScenarioFamily::TwoStream { alpha, .. } => {
                    alpha.to_string()
                }
                _ => String::new(),
            },
            "v_thermal" => match f {
                ScenarioFamily::Landau { v_thermal, .. }
                | ScenarioFamily::TwoStream { v_thermal, .. } => v_thermal.to_string(),
                _ => String::new(),
            },
            "v_drift" => match f {
                ScenarioFamily::TwoStream { v_drift, .. } => v_drift.to_string(),
                _ => String::new(),
            },
            "mean_density" => match f {
                ScenarioFamily::Landau { mean_density, .. }
                | ScenarioFamily::TwoStream { mean_density, .. } => mean_density.to_string(),
                _ => String::new(),
            },
            "amplitude" => match f {
                ScenarioFamily::Bump3d { amplitude, .. }
                | ScenarioFamily::Disc2d { amplitude, .. } => amplitude.to_string(),
                _ => String::new(),
            },
            "x_radius" => match f {
                ScenarioFamily::Bump3d { x_radius, .. }
                | ScenarioFamily::Disc2d { x_radius, .. } => x_radius.to_string(),
                _ => String::new(),
            },
            "v_radius" => match f {
                ScenarioFamily::Bump3d { v_radius, .. }
                | ScenarioFamily::Disc2d { v_radius, .. } => v_radius.to_string(),
                _ => String::new(),
            },
            "background_radius" => match f {
                ScenarioFamily::Disc2d { background_radius, .. } => background_radius.to_string(),
                _ => String::new(),
            },
            "dt" => self.dt.to_string(),
            "t_end" => self.t_end.to_string(),
            "particles" => self.particles.to_string(),
            "mollify_n" => self.mollify_n.to_string(),
            "escape_radius" => self.escape_radius.to_string(),
            "cadence" => self.cadence.to_string(),
            "seed" => self.seed.to_string(),
            "grid_cells" => self.grid_cells.to_string(),
            _ => String::new(),
        }
    }

    /// Apply a typed override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let parse_f64 = |v: &str| -> Result<f64> {
            v.parse::<f64>()
                .map_err(|_| VlasovError::Format(format!("key '{key}': bad float '{v}'")))
        };
        let parse_u64 = |v: &str| -> Result<u64> {
            v.parse::<u64>()
                .map_err(|_| VlasovError::Format(format!("key '{key}': bad integer '{v}'")))
        };
        let f = &mut self.scenario.family;
        match key {
            "scenario" => {
                if value != self.scenario.name {
                    *self = RunConfig::preset(value)?;
                }
            }
            "sigma" => {
                self.scenario.sigma = match value {
                    "+1" | "1" => Sign::Repulsive,
                    "-1" => Sign::Attractive,
                    other => {
                        return Err(VlasovError::Format(format!("sigma must be +1 or -1, got {other}")))
                    }
                };
            }
            "v_max" => self.scenario.v_max = parse_f64(value)?,
            "length" => match f {
                ScenarioFamily::Landau { length, .. }
                | ScenarioFamily::TwoStream { length, .. } => *length = parse_f64(value)?,
                _ => return Err(VlasovError::Format(format!("key '{key}' not valid here"))),
            },
            "wavenumber" => match f {
                ScenarioFamily::Landau { wavenumber, .. }
                | ScenarioFamily::TwoStream { wavenumber, .. } => *wavenumber = parse_f64(value)?,
                _ => return Err(VlasovError::Format(format!("key '{key}' not valid here"))),
            },
            "alpha" => match f {
                ScenarioFamily::Landau { alpha, .. } | ScenarioFamily::TwoStream { alpha, .. } => {
                    *alpha = parse_f64(value)?
                }
                _ => return Err(VlasovError::Format(format!("key '{key}' not valid here"))),
            },
            "v_thermal" => match f {
                ScenarioFamily::Landau { v_thermal, .. }
                | ScenarioFamily::TwoStream { v_thermal, .. } => *v_thermal = parse_f64(value)?,
                _ => return Err(VlasovError::Format(format!("key '{key}' not valid here"))),
            },
            "v_drift" => match f {
                ScenarioFamily::TwoStream { v_drift, .. } => *v_drift = parse_f64(value)?,
                _ => return Err(VlasovError::Format(format!("key '{key}' not valid here"))),
            },
            "mean_density" => match f {
                ScenarioFamily::Landau { mean_density, .. }
                | ScenarioFamily::TwoStream { mean_density, .. } => {
                    *mean_density = parse_f64(value)?
                }
                _ => return Err(VlasovError::Format(format!("key '{key}' not valid here"))),
            },
            "amplitude" => match f {
                ScenarioFamily::Bump3d { amplitude, .. }
                | ScenarioFamily::Disc2d { amplitude, .. } => *amplitude = parse_f64(value)?,
                _ => return Err(VlasovError::Format(format!("key '{key}' not valid here"))),
            },
            "x_radius" => match f {
                ScenarioFamily::Bump3d { x_radius, .. }
                | ScenarioFamily::Disc2d { x_radius, .. } => *x_radius = parse_f64(value)?,
                _ => return Err(VlasovError::Format(format!("key '{key}' not valid here"))),
            },
            "v_radius" => match f {
                ScenarioFamily::Bump3d { v_radius, .. }
                | ScenarioFamily::Disc2d { v_radius, .. } => *v_radius = parse_f64(value)?,
                _ => return Err(VlasovError::Format(format!("key '{key}' not valid here"))),
            },
            "background_radius" => match f {
                ScenarioFamily::Disc2d { background_radius, .. } => {
                    *background_radius = parse_f64(value)?
                }
                _ => return Err(VlasovError::Format(format!("key '{key}' not valid here"))),
            },
            "dt" => self.dt = parse_f64(value)?,
            "t_end" => self.t_end = parse_f64(value)?,
            "particles" => self.particles = parse_u64(value)?,
            "mollify_n" => {
                self.mollify_n = parse_u64(value)? as u32;
            }
            "escape_radius" => self.escape_radius = parse_f64(value)?,
            "cadence" => self.cadence = parse_u64(value)?,
            "seed" => self.seed = parse_u64(value)?,
            "grid_cells" => self.grid_cells = parse_u64(value)? as usize,
            other => return Err(VlasovError::Format(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for key in self.keys() {
            out.push_str(key);
            out.push_str(" = ");
            out.push_str(&self.get(key));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        let mut scenario_name = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(VlasovError::Format(format!(
                    "line {}: expected 'key = value', got '{line}'",
                    lineno + 1
                )));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key == "scenario" {
                scenario_name = Some(value.clone());
            }
            pairs.push((key, value));
        }
        let name = scenario_name
            .ok_or_else(|| VlasovError::Format("config must declare a scenario".into()))?;
        let mut config = RunConfig::preset(&name)?;
        for (key, value) in pairs {
            if key != "scenario" {
                config.set(&key, &value)?;
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.dt <= 0.0 || !self.dt.is_finite() {
            return Err(VlasovError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.t_end < 0.0 || !self.t_end.is_finite() {
            return Err(VlasovError::Config("t_end must be nonnegative".into()));
        }
        if self.particles == 0 {
            return Err(VlasovError::Config("need at least one particle".into()));
        }
        if self.mollify_n == 0 {
            return Err(VlasovError::Config("mollify_n must be >= 1".into()));
        }
        if self.escape_radius <= 0.0 {
            return Err(VlasovError::Config("escape_radius must be positive".into()));
        }
        if self.cadence == 0 {
            return Err(VlasovError::Config("cadence must be >= 1".into()));
        }
        // kernel-resolution precondition: the smoothing core must cover at
        // least one grid cell
        let grid = self.scenario.grid(self.grid_cells)?;
        if 1.0 / (self.mollify_n as f64) < grid.h {
            return Err(VlasovError::Config(format!(
                "mollification radius 1/{} is below the grid spacing {}",
                self.mollify_n, grid.h
            )));
        }
        Ok(())
    }

    /// FNV-1a hash of the serialized reproducible content.
    pub fn config_hash(&self) -> u64 {
        crate::numeric::fnv1a64(self.serialize().as_bytes())
    }

    pub fn config_hash_hex(&self) -> String {
        format!("{:016x}", self.config_hash())
    }

    pub fn kernel_spec(&self) -> Result<crate::kernels::KernelSpec> {
        crate::kernels::KernelSpec::mollified(self.scenario.d, self.scenario.sigma, self.mollify_n)
    }
}
