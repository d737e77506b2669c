use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use inflaton::experiments::Scenario;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// `simulate` input: one scenario plus output options.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    /// Defaults to `./<scenario name>`.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Unused by `simulate`; accepted so sweep members can be re-run verbatim.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub emit_plots: bool,
}

/// `sweep` input: a base scenario and the Cartesian grid of overrides.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: Scenario,
    /// Amplitudes of `initial.phi`; the base amplitude when empty.
    #[serde(default)]
    pub amplitudes: Vec<f64>,
    /// Hubble rates; the base rate when empty.
    #[serde(default)]
    pub hubbles: Vec<f64>,
    /// Each amplitude is multiplied by `1 + jitter·U(-1, 1)`.
    #[serde(default)]
    pub jitter: f64,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub emit_plots: bool,
}

pub fn load<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    // serde_json reports line and column, and names unknown keys.
    serde_json::from_str(&text).with_context(|| format!("{}: malformed config", path.display()))
}

pub struct SweepMember {
    pub scenario: Scenario,
    pub amplitude: f64,
    pub hubble: f64,
}

impl SweepConfig {
    /// Expands the Cartesian product in a fixed order. Jitter draws are made
    /// sequentially in that order, so the expansion depends only on the seed.
    pub fn expand(&self) -> Result<Vec<SweepMember>> {
        if !(self.jitter >= 0.0 && self.jitter < 1.0) {
            bail!("jitter must lie in [0, 1), got {}", self.jitter);
        }
        let amps = if self.amplitudes.is_empty() {
            vec![self.base.initial.phi.amplitude()]
        } else {
            self.amplitudes.clone()
        };
        let hubbles = if self.hubbles.is_empty() {
            vec![self.base.hubble]
        } else {
            self.hubbles.clone()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::with_capacity(amps.len() * hubbles.len());
        for &h in &hubbles {
            for &a in &amps {
                let a = if self.jitter > 0.0 {
                    a * (1.0 + self.jitter * rng.gen_range(-1.0..1.0))
                } else {
                    a
                };
                let mut s = self.base.clone();
                s.hubble = h;
                s.initial.phi = s.initial.phi.with_amplitude(a);
                s.name = format!("{}_a{a:.4}_H{h}", self.base.name);
                out.push(SweepMember {
                    scenario: s,
                    amplitude: a,
                    hubble: h,
                });
            }
        }
        Ok(out)
    }
}
