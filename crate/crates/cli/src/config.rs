//! Run configuration: flat `key = value` lines grouped under `[section]` headers.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown sections and
//! keys are rejected, and every value is validated before anything is
//! allocated on the grid.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use anyhow::{anyhow, bail, Context, Result};
use frgrav::fields::{Grid, Stencil};
use frgrav::identities::IdentityOptions;
use frgrav::initialdata::{DataSpec, Family};
use frgrav::solver::{EvolveConfig, Integrator};

#[derive(Clone, Debug, PartialEq)]
pub struct GridConfig {
    pub dims: usize,
    pub n: usize,
    pub lo: f64,
    pub hi: f64,
    pub stencil: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdentityConfig {
    pub seed: u64,
    pub samples: usize,
    pub fd_step: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DebugConfig {
    /// Flip the sign of the Christoffel symbols in the identity suite.
    pub corrupt_christoffel: bool,
    /// Drop the κ-dependent terms from the augmented system.
    pub ablate_kappa_terms: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub kappa: f64,
    pub kappas: Vec<f64>,
    pub data: DataSpec,
    pub evolve: EvolveConfig,
    pub snapshots: bool,
    pub norm_order: usize,
    pub identities: IdentityConfig,
    pub debug: DebugConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let id = IdentityOptions::default();
        Self {
            grid: GridConfig { dims: 1, n: 1024, lo: -10.0, hi: 10.0, stencil: 4 },
            kappa: 0.1,
            kappas: vec![1e-1, 1e-2, 1e-3],
            data: DataSpec::closed_bump(1e-3, 1.0),
            evolve: EvolveConfig { stride: 16, ..EvolveConfig::default() },
            snapshots: false,
            norm_order: 1,
            identities: IdentityConfig { seed: id.seed, samples: id.samples, fd_step: id.fd_step },
            debug: DebugConfig { corrupt_christoffel: false, ablate_kappa_terms: false },
        }
    }
}

const KEYS: &[(&str, &[&str])] = &[
    ("grid", &["dims", "n", "lo", "hi", "stencil"]),
    ("model", &["kappa", "kappas"]),
    ("data", &["family", "amplitude", "width", "center", "polarization", "mode", "warp", "seed"]),
    ("evolve", &["dt", "cfl", "t_end", "stride", "integrator", "tolerance", "max_iterations", "snapshots"]),
    ("norms", &["order"]),
    ("identities", &["seed", "samples", "fd_step"]),
    ("debug", &["corrupt_christoffel", "ablate_kappa_terms"]),
];

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| anyhow!("invalid value '{v}' for {key}: {e}"))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|x| parse_value::<f64>(key, x.trim())).collect()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<(String, String), String> = BTreeMap::new();
        let mut section: Option<String> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let at = || format!("line {}", lineno + 1);
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                if !KEYS.iter().any(|(s, _)| *s == name) {
                    bail!("{}: unknown section [{name}]", at());
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| anyhow!("{}: expected key = value", at()))?;
            let (key, value) = (key.trim(), value.trim());
            let sec = section.as_deref().ok_or_else(|| anyhow!("{}: key '{key}' outside a section", at()))?;
            let known = KEYS.iter().find(|(s, _)| *s == sec).is_some_and(|(_, ks)| ks.contains(&key));
            if !known {
                bail!("{}: unknown key '{key}' in [{sec}]", at());
            }
            if entries.insert((sec.to_string(), key.to_string()), value.to_string()).is_some() {
                bail!("{}: duplicate key '{key}' in [{sec}]", at());
            }
        }

        let mut cfg = Self::default();
        for ((sec, key), v) in &entries {
            let name = format!("{sec}.{key}");
            let k = name.as_str();
            match (sec.as_str(), key.as_str()) {
                ("grid", "dims") => cfg.grid.dims = parse_value(k, v)?,
                ("grid", "n") => cfg.grid.n = parse_value(k, v)?,
                ("grid", "lo") => cfg.grid.lo = parse_value(k, v)?,
                ("grid", "hi") => cfg.grid.hi = parse_value(k, v)?,
                ("grid", "stencil") => cfg.grid.stencil = parse_value(k, v)?,
                ("model", "kappa") => cfg.kappa = parse_value(k, v)?,
                ("model", "kappas") => cfg.kappas = parse_list(k, v)?,
                ("data", "family") => cfg.data.family = parse_value::<Family>(k, v)?,
                ("data", "amplitude") => cfg.data.amplitude = parse_value(k, v)?,
                ("data", "width") => cfg.data.width = parse_value(k, v)?,
                ("data", "center") => {
                    let c = parse_list(k, v)?;
                    if c.is_empty() || c.len() > 3 {
                        bail!("{k} takes one to three coordinates");
                    }
                    cfg.data.center = Some(std::array::from_fn(|i| c.get(i).copied().unwrap_or(0.0)));
                }
                ("data", "polarization") => cfg.data.polarization = parse_value(k, v)?,
                ("data", "mode") => cfg.data.mode = parse_value(k, v)?,
                ("data", "warp") => cfg.data.warp = parse_value(k, v)?,
                ("data", "seed") => cfg.data.seed = parse_value(k, v)?,
                ("evolve", "dt") => cfg.evolve.dt = Some(parse_value(k, v)?),
                ("evolve", "cfl") => cfg.evolve.cfl = parse_value(k, v)?,
                ("evolve", "t_end") => cfg.evolve.t_end = parse_value(k, v)?,
                ("evolve", "stride") => cfg.evolve.stride = parse_value(k, v)?,
                ("evolve", "integrator") => {
                    cfg.evolve.integrator = match v.as_str() {
                        "rk4" => Integrator::Rk4,
                        "picard" => Integrator::Picard,
                        _ => bail!("{k} must be rk4 or picard, got '{v}'"),
                    }
                }
                ("evolve", "tolerance") => cfg.evolve.tolerance = parse_value(k, v)?,
                ("evolve", "max_iterations") => cfg.evolve.max_iterations = parse_value(k, v)?,
                ("evolve", "snapshots") => cfg.snapshots = parse_value(k, v)?,
                ("norms", "order") => cfg.norm_order = parse_value(k, v)?,
                ("identities", "seed") => cfg.identities.seed = parse_value(k, v)?,
                ("identities", "samples") => cfg.identities.samples = parse_value(k, v)?,
                ("identities", "fd_step") => cfg.identities.fd_step = parse_value(k, v)?,
                ("debug", "corrupt_christoffel") => cfg.debug.corrupt_christoffel = parse_value(k, v)?,
                ("debug", "ablate_kappa_terms") => cfg.debug.ablate_kappa_terms = parse_value(k, v)?,
                _ => unreachable!("key table and parser disagree on {k}"),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Checks everything that does not need the grid to be allocated.
    pub fn validate(&self) -> Result<()> {
        let g = self.grid()?;
        self.data.validate(&g)?;
        if !(self.kappa > 0.0) || self.kappas.iter().any(|k| !(*k > 0.0)) {
            bail!("kappa values must be positive");
        }
        if self.evolve.stride == 0 {
            bail!("evolve.stride must be at least 1");
        }
        if self.evolve.max_iterations == 0 || !(self.evolve.tolerance > 0.0) {
            bail!("evolve.tolerance must be positive and evolve.max_iterations at least 1");
        }
        if self.norm_order > 4 || (self.grid.dims == 3 && self.norm_order > 2) {
            bail!("norms.order {} exceeds the limit for {}D grids", self.norm_order, self.grid.dims);
        }
        if self.identities.samples == 0 || !(self.identities.fd_step > 0.0) {
            bail!("identities.samples and identities.fd_step must be positive");
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        let stencil = Stencil::from_order(self.grid.stencil)?;
        Ok(Grid::new(self.grid.dims, self.grid.n, self.grid.lo, self.grid.hi, stencil)?)
    }

    /// Canonical text of the resolved configuration; hashed into every manifest.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let g = &self.grid;
        let d = &self.data;
        let e = &self.evolve;
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(",");
        let _ = writeln!(s, "[grid]\ndims={}\nn={}\nlo={:e}\nhi={:e}\nstencil={}", g.dims, g.n, g.lo, g.hi, g.stencil);
        let _ = writeln!(s, "[model]\nkappa={:e}\nkappas={}", self.kappa, list(&self.kappas));
        let _ = writeln!(
            s,
            "[data]\nfamily={:?}\namplitude={:e}\nwidth={:e}\ncenter={}\npolarization={}\nmode={}\nwarp={:e}\nseed={}",
            d.family,
            d.amplitude,
            d.width,
            d.center.map_or("box".into(), |c| list(&c)),
            d.polarization,
            d.mode,
            d.warp,
            d.seed
        );
        let _ = writeln!(
            s,
            "[evolve]\ndt={}\ncfl={:e}\nt_end={:e}\nstride={}\nintegrator={:?}\ntolerance={:e}\nmax_iterations={}\nsnapshots={}",
            e.dt.map_or("auto".into(), |x| format!("{x:e}")),
            e.cfl,
            e.t_end,
            e.stride,
            e.integrator,
            e.tolerance,
            e.max_iterations,
            self.snapshots
        );
        let _ = writeln!(s, "[norms]\norder={}", self.norm_order);
        let i = &self.identities;
        let _ = writeln!(s, "[identities]\nseed={}\nsamples={}\nfd_step={:e}", i.seed, i.samples, i.fd_step);
        let _ = writeln!(
            s,
            "[debug]\ncorrupt_christoffel={}\nablate_kappa_terms={}",
            self.debug.corrupt_christoffel, self.debug.ablate_kappa_terms
        );
        s
    }
}
