//! Command-line flags merged with an optional flat `key = value` config file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;

use mmpde_core::{BoundaryPolicy, Functional, IntegratorConfig, Scheme};

/// Options shared by all subcommands. Each may also be given in the config
/// file under the flag name (`-` and `_` are interchangeable); flags win.
#[derive(Args, Debug, Default, Clone)]
pub struct Settings {
    /// Flat `key = value` file; keys are flag names.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Input mesh as a `.node` and `.ele` pair.
    #[arg(long, num_args = 2, value_names = ["NODE", "ELE"], global = true)]
    pub mesh: Option<Vec<PathBuf>>,
    /// Nodal scalar field for adaptation of a custom mesh.
    #[arg(long, global = true)]
    pub field: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// `huang` or `winslow`.
    #[arg(long, global = true)]
    pub functional: Option<String>,
    #[arg(long, global = true)]
    pub p: Option<f64>,
    #[arg(long, global = true)]
    pub theta: Option<f64>,
    #[arg(long, global = true)]
    pub tau: Option<f64>,
    /// smooth2d, smooth3d, sinewave, ninespheres or custom.
    #[arg(long, global = true)]
    pub scenario: Option<String>,
    /// Grid resolutions per axis, comma separated.
    #[arg(long, value_delimiter = ',', global = true)]
    pub sizes: Option<Vec<usize>>,
    /// Grid resolution per axis of a builtin scenario.
    #[arg(long, global = true)]
    pub size: Option<usize>,
    /// `fixed` or `slide`.
    #[arg(long, global = true)]
    pub boundary: Option<String>,
    /// `euler` or `rk2`.
    #[arg(long, global = true)]
    pub scheme: Option<String>,
    #[arg(long, global = true)]
    pub t_end: Option<f64>,
    #[arg(long, global = true)]
    pub dt_init: Option<f64>,
    #[arg(long, global = true)]
    pub dt_min: Option<f64>,
    #[arg(long, global = true)]
    pub dt_max: Option<f64>,
    #[arg(long, global = true)]
    pub stop_rel_tol: Option<f64>,
    #[arg(long, global = true)]
    pub stop_window: Option<usize>,
    /// Perturbation of the smoothing scenarios, as a fraction of the grid spacing.
    #[arg(long, global = true)]
    pub perturbation: Option<f64>,
    /// Lemma draws per dimension (`verify`).
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Random meshes per dimension (`gradcheck`).
    #[arg(long, global = true)]
    pub count: Option<usize>,
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| anyhow!("config key '{key}': cannot parse '{v}'"))
}

fn fill<T: FromStr>(slot: &mut Option<T>, key: &str, v: &str) -> Result<()> {
    if slot.is_none() {
        *slot = Some(parse_value(key, v)?);
    }
    Ok(())
}

pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("{}:{}: expected key = value", path.display(), i + 1))?;
        map.insert(k.trim().replace('-', "_"), v.trim().to_string());
    }
    Ok(map)
}

impl Settings {
    /// Fills unset options from `--config`, if given.
    pub fn merged(mut self) -> Result<Self> {
        let Some(path) = self.config.clone() else { return Ok(self) };
        for (k, v) in read_config_file(&path)? {
            let key = k.as_str();
            match key {
                "mesh" => {
                    if self.mesh.is_none() {
                        let parts: Vec<PathBuf> = v.split_whitespace().map(PathBuf::from).collect();
                        if parts.len() != 2 {
                            bail!("config key 'mesh' needs a .node and an .ele path");
                        }
                        self.mesh = Some(parts);
                    }
                }
                "sizes" => {
                    if self.sizes.is_none() {
                        let s = v
                            .split(|c: char| c == ',' || c.is_whitespace())
                            .filter(|t| !t.is_empty())
                            .map(|t| parse_value(key, t))
                            .collect::<Result<Vec<usize>>>()?;
                        self.sizes = Some(s);
                    }
                }
                "field" => fill(&mut self.field, key, &v)?,
                "out" => fill(&mut self.out, key, &v)?,
                "seed" => fill(&mut self.seed, key, &v)?,
                "functional" => fill(&mut self.functional, key, &v)?,
                "p" => fill(&mut self.p, key, &v)?,
                "theta" => fill(&mut self.theta, key, &v)?,
                "tau" => fill(&mut self.tau, key, &v)?,
                "scenario" => fill(&mut self.scenario, key, &v)?,
                "size" => fill(&mut self.size, key, &v)?,
                "boundary" => fill(&mut self.boundary, key, &v)?,
                "scheme" => fill(&mut self.scheme, key, &v)?,
                "t_end" => fill(&mut self.t_end, key, &v)?,
                "dt_init" => fill(&mut self.dt_init, key, &v)?,
                "dt_min" => fill(&mut self.dt_min, key, &v)?,
                "dt_max" => fill(&mut self.dt_max, key, &v)?,
                "stop_rel_tol" => fill(&mut self.stop_rel_tol, key, &v)?,
                "stop_window" => fill(&mut self.stop_window, key, &v)?,
                "perturbation" => fill(&mut self.perturbation, key, &v)?,
                "samples" => fill(&mut self.samples, key, &v)?,
                "count" => fill(&mut self.count, key, &v)?,
                other => bail!("unknown config key '{other}'"),
            }
        }
        Ok(self)
    }

    pub fn functional(&self) -> Result<Functional> {
        match self.functional.as_deref().unwrap_or("huang") {
            "winslow" => Ok(Functional::Winslow),
            "huang" => Ok(Functional::huang(self.p.unwrap_or(1.5), self.theta.unwrap_or(1.0 / 3.0))?),
            other => bail!("unknown functional '{other}' (expected huang or winslow)"),
        }
    }

    /// The functional if one was requested, for commands that otherwise try both.
    pub fn requested_functional(&self) -> Result<Option<Functional>> {
        if self.functional.is_some() || self.p.is_some() || self.theta.is_some() {
            self.functional().map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn boundary(&self) -> Result<Option<BoundaryPolicy>> {
        self.boundary.as_deref().map(|b| b.parse().map_err(anyhow::Error::from)).transpose()
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// `base` with any integrator options overridden.
    pub fn integrator(&self, base: IntegratorConfig) -> Result<IntegratorConfig> {
        let mut c = base;
        if let Some(s) = &self.scheme {
            c.scheme = s.parse::<Scheme>()?;
        }
        if let Some(v) = self.t_end {
            c.t_end = v;
        }
        if let Some(v) = self.dt_init {
            c.dt_init = v;
        }
        if let Some(v) = self.dt_min {
            c.dt_min = v;
        }
        if let Some(v) = self.dt_max {
            c.dt_max = v;
        }
        if let Some(v) = self.stop_rel_tol {
            c.stop_rel_tol = v;
        }
        if let Some(v) = self.stop_window {
            c.stop_window = v;
        }
        c.dt_init = c.dt_init.min(c.dt_max);
        c.validate()?;
        Ok(c)
    }
}
