//! Experiment configuration: typed specification plus a strict line-oriented
//! file format.
//!
//! Files consist of `key = value` lines grouped under bracketed section
//! headers `[domain]`, `[function]`, `[grid]`, `[kernel]`, `[morrey]`,
//! `[run]`. Blank lines and `#` comments are ignored; unknown sections or
//! keys are errors, as are missing required keys. List values are comma
//! separated.

use std::collections::BTreeMap;
use std::fmt;

use anyhow::{anyhow, bail, Context, Result};
use steinx_core::analytic::{Gaussian, RadialPower, Sinusoid, SmoothFn};
use steinx_core::geometry::{GraphProfile, LipschitzGraph, SpecialLipschitzDomain};

/// Domain under experiment: either a Lipschitz epigraph or a bounded
/// patch-covered disk handled by the glued extension path.
#[derive(Debug, Clone, PartialEq)]
pub enum DomainSpec {
    HalfSpace { level: f64 },
    SmoothedAbs { slope: f64, smoothing: f64 },
    Sinusoid { amplitude: f64, frequency: f64 },
    Disk { patches: usize, patch_radius: f64, eps: f64, mult_bound: usize },
}

impl DomainSpec {
    pub fn is_bounded(&self) -> bool {
        matches!(self, DomainSpec::Disk { .. })
    }

    /// The epigraph description for the unbounded families.
    pub fn special(&self) -> Option<SpecialLipschitzDomain> {
        let profile = match *self {
            DomainSpec::HalfSpace { level } => GraphProfile::Constant { level },
            DomainSpec::SmoothedAbs { slope, smoothing } => {
                GraphProfile::SmoothedAbs { slope, smoothing }
            }
            DomainSpec::Sinusoid { amplitude, frequency } => {
                GraphProfile::Sinusoid { amplitude, frequency }
            }
            DomainSpec::Disk { .. } => return None,
        };
        Some(SpecialLipschitzDomain::new(
            LipschitzGraph::new(profile, 1).expect("validated profile"),
        ))
    }
}

/// Analytic function family sampled as the extension input.
#[derive(Debug, Clone, PartialEq)]
pub enum FunctionSpec {
    Gaussian { amplitude: f64, center: Vec<f64>, sigma: f64 },
    Sinusoid { amplitude: f64, wave: Vec<f64>, phase: f64 },
    Power { exponent: f64, smoothing: f64, center: Vec<f64> },
}

impl FunctionSpec {
    pub fn build(&self) -> Box<dyn SmoothFn + Send + Sync> {
        match self {
            FunctionSpec::Gaussian { amplitude, center, sigma } => {
                Box::new(Gaussian::new(*amplitude, center.clone(), *sigma))
            }
            FunctionSpec::Sinusoid { amplitude, wave, phase } => {
                Box::new(Sinusoid::new(*amplitude, wave.clone(), *phase))
            }
            FunctionSpec::Power { exponent, smoothing, center } => {
                Box::new(RadialPower::new(*exponent, *smoothing, center.clone()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub domain_id: String,
    pub domain: DomainSpec,
    pub function_id: String,
    pub function: FunctionSpec,
    pub box_min: Vec<f64>,
    pub box_max: Vec<f64>,
    pub resolution: usize,
    pub kernel_lambda: f64,
    pub kernel_degree: usize,
    pub p_list: Vec<f64>,
    pub gamma_list: Vec<f64>,
    pub delta_list: Vec<f64>,
    pub order: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    /// Checks the cross-field invariants not caught during parsing.
    pub fn validate(&self) -> Result<()> {
        if self.kernel_degree < self.order {
            bail!(
                "kernel degree {} must be at least the derivative order {}",
                self.kernel_degree,
                self.order
            );
        }
        if !self.resolution.is_power_of_two() || !(32..=512).contains(&self.resolution) {
            bail!("resolution must be a power of two in [32, 512], got {}", self.resolution);
        }
        if self.box_min.len() != 2 || self.box_max.len() != 2 {
            bail!("the experiment grid is planar; min/max need 2 entries");
        }
        if self.box_min.iter().zip(&self.box_max).any(|(a, b)| a >= b) {
            bail!("grid box needs min < max per axis");
        }
        if self.delta_list.iter().any(|&d| !(d > 0.0)) {
            bail!("δ values must be positive");
        }
        if self.p_list.iter().any(|&p| !(1.0..=16.0).contains(&p)) {
            bail!("p values must lie in [1, 16]");
        }
        if self.gamma_list.iter().any(|&g| !(g >= 0.0)) {
            bail!("γ values must be nonnegative");
        }
        if !(self.kernel_lambda > 1.0) {
            bail!("kernel Λ must exceed 1");
        }
        if self.order > 2 {
            bail!("derivative order above 2 is not supported by the grid stencils");
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        let sections = split_sections(text)?;
        let want = ["domain", "function", "grid", "kernel", "morrey", "run"];
        for name in sections.keys() {
            if !want.contains(&name.as_str()) {
                bail!("unknown section [{name}]");
            }
        }
        let get = |name: &str| -> Result<&Section> {
            sections.get(name).ok_or_else(|| anyhow!("missing section [{name}]"))
        };

        let dom = get("domain")?;
        let family = dom.take("family")?;
        let domain = match family.as_str() {
            "half_space" => DomainSpec::HalfSpace { level: dom.float("level")? },
            "smoothed_abs" => DomainSpec::SmoothedAbs {
                slope: dom.float("slope")?,
                smoothing: dom.float("smoothing")?,
            },
            "sinusoid" => DomainSpec::Sinusoid {
                amplitude: dom.float("amplitude")?,
                frequency: dom.float("frequency")?,
            },
            "disk" => DomainSpec::Disk {
                patches: dom.int("patches")?,
                patch_radius: dom.float("patch_radius")?,
                eps: dom.float("eps")?,
                mult_bound: dom.int("mult_bound")?,
            },
            other => bail!("unknown domain family '{other}'"),
        };
        let domain_id = dom.take("id")?;
        dom.finish("domain")?;

        let fun = get("function")?;
        let ffam = fun.take("family")?;
        let function = match ffam.as_str() {
            "gaussian" => FunctionSpec::Gaussian {
                amplitude: fun.float("amplitude")?,
                center: fun.floats("center")?,
                sigma: fun.float("sigma")?,
            },
            "sinusoid" => FunctionSpec::Sinusoid {
                amplitude: fun.float("amplitude")?,
                wave: fun.floats("wave")?,
                phase: fun.float("phase")?,
            },
            "power" => FunctionSpec::Power {
                exponent: fun.float("exponent")?,
                smoothing: fun.float("smoothing")?,
                center: fun.floats("center")?,
            },
            other => bail!("unknown function family '{other}'"),
        };
        let function_id = fun.take("id")?;
        fun.finish("function")?;

        let grid = get("grid")?;
        let cfg = ExperimentConfig {
            domain_id,
            domain,
            function_id,
            function,
            box_min: grid.floats("min")?,
            box_max: grid.floats("max")?,
            resolution: grid.int("resolution")?,
            kernel_lambda: get("kernel")?.float("lambda")?,
            kernel_degree: get("kernel")?.int("degree")?,
            p_list: get("morrey")?.floats("p")?,
            gamma_list: get("morrey")?.floats("gamma")?,
            delta_list: get("morrey")?.floats("delta")?,
            order: get("run")?.int("order")?,
            seed: get("run")?.int::<u64>("seed")?,
        };
        grid.finish("grid")?;
        get("kernel")?.finish("kernel")?;
        get("morrey")?.finish("morrey")?;
        get("run")?.finish("run")?;
        cfg.validate()?;
        Ok(cfg)
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            out,
            "{} × {} at {}², l = {}, seed {}",
            self.domain_id, self.function_id, self.resolution, self.order, self.seed
        )
    }
}

/// One parsed section: key → value, with reads tracked so leftovers can be
/// rejected as unknown keys.
struct Section {
    entries: BTreeMap<String, String>,
    read: std::cell::RefCell<Vec<String>>,
}

impl Section {
    fn take(&self, key: &str) -> Result<String> {
        let v = self
            .entries
            .get(key)
            .ok_or_else(|| anyhow!("missing key '{key}'"))?;
        self.read.borrow_mut().push(key.to_string());
        Ok(v.clone())
    }

    fn float(&self, key: &str) -> Result<f64> {
        let raw = self.take(key)?;
        raw.parse::<f64>().with_context(|| format!("key '{key}': bad float '{raw}'"))
    }

    fn floats(&self, key: &str) -> Result<Vec<f64>> {
        let raw = self.take(key)?;
        raw.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .with_context(|| format!("key '{key}': bad float '{}'", s.trim()))
            })
            .collect()
    }

    fn int<T: std::str::FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::error::Error + Send + Sync + 'static,
    {
        let raw = self.take(key)?;
        raw.parse::<T>().with_context(|| format!("key '{key}': bad integer '{raw}'"))
    }

    fn finish(&self, name: &str) -> Result<()> {
        let read = self.read.borrow();
        for key in self.entries.keys() {
            if !read.iter().any(|r| r == key) {
                bail!("unknown key '{key}' in section [{name}]");
            }
        }
        Ok(())
    }
}

fn split_sections(text: &str) -> Result<BTreeMap<String, Section>> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| anyhow!("line {}: malformed section header", lineno + 1))?
                .trim()
                .to_string();
            if sections.contains_key(&name) {
                bail!("line {}: duplicate section [{name}]", lineno + 1);
            }
            sections.insert(
                name.clone(),
                Section { entries: BTreeMap::new(), read: Default::default() },
            );
            current = Some(name);
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected 'key = value'", lineno + 1))?;
        let section = current
            .as_ref()
            .ok_or_else(|| anyhow!("line {}: key before any section header", lineno + 1))?;
        let key = key.trim().to_string();
        let entries = &mut sections.get_mut(section).unwrap().entries;
        if entries.insert(key.clone(), value.trim().to_string()).is_some() {
            bail!("line {}: duplicate key '{key}' in [{section}]", lineno + 1);
        }
    }
    Ok(sections)
}
