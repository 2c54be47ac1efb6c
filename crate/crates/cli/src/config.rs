//! JSON run configuration. Unknown keys are rejected everywhere.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context};
use kusuoka::ifs::{self, IfsSpec};
use kusuoka::symbolic::{truncate_to_memory, ConstantFamily, FirstSymbolFamily, GeometricFamily, HolderFamily};
use kusuoka::Potential;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub ifs: IfsConfig,
    #[serde(default = "one")]
    pub q: usize,
    #[serde(default)]
    pub potential: PotentialConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub solve: SolveConfig,
    #[serde(default)]
    pub count: CountConfig,
    #[serde(default)]
    pub zeta: ZetaConfig,
    #[serde(default)]
    pub variational: VariationalConfig,
    #[serde(default)]
    pub lyapunov: LyapunovConfig,
    #[serde(default)]
    pub root: RootConfig,
    #[serde(default)]
    pub scanline: ScanlineConfig,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
pub enum IfsConfig {
    Name(String),
    Preset(PresetConfig),
    Maps(MapsConfig),
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PresetConfig {
    pub preset: String,
    pub param: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MapsConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub maps: Vec<MapConfig>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    /// Row-major `d×d`.
    pub linear: Vec<f64>,
    pub offset: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
pub enum PotentialConfig {
    Table(TableConfig),
    Constant(ConstantConfig),
    Family(FamilyConfig),
}

impl Default for PotentialConfig {
    fn default() -> Self {
        PotentialConfig::Constant(ConstantConfig { constant: 0.0 })
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TableConfig {
    pub memory: usize,
    /// 1-based window keys, e.g. `"12"` or `"1-12"`.
    pub table: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantConfig {
    pub constant: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    /// `constant`, `first_symbol` or `geometric`.
    pub family: String,
    #[serde(default)]
    pub params: FamilyParams,
    pub truncation_k: usize,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyParams {
    pub value: Option<f64>,
    pub weights: Option<Vec<f64>>,
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            tol: kusuoka::transfer::DEFAULT_TOL,
            max_iter: kusuoka::transfer::DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl GridConfig {
    pub fn linear(&self) -> anyhow::Result<Vec<f64>> {
        self.check()?;
        let n = self.points;
        Ok((0..n)
            .map(|j| if n == 1 { self.min } else { self.min + (self.max - self.min) * j as f64 / (n - 1) as f64 })
            .collect())
    }

    pub fn geometric(&self) -> anyhow::Result<Vec<f64>> {
        self.check()?;
        if !(self.min > 0.0) {
            bail!("geometric grid needs min > 0");
        }
        let (a, b) = (self.min.ln(), self.max.ln());
        let n = self.points;
        Ok((0..n)
            .map(|j| if n == 1 { self.min } else { (a + (b - a) * j as f64 / (n - 1) as f64).exp() })
            .collect())
    }

    fn check(&self) -> anyhow::Result<()> {
        if self.points == 0 || !(self.min < self.max) || !self.min.is_finite() || !self.max.is_finite() {
            bail!("grid needs points >= 1 and finite min < max");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct CountConfig {
    pub max_period: usize,
    /// Geometric grid for `π(r)` and `S(r)`; by default up to the exactness limit.
    pub r_grid: Option<GridConfig>,
    pub gamma_prime: f64,
}

impl Default for CountConfig {
    fn default() -> Self {
        CountConfig {
            max_period: 12,
            r_grid: None,
            gamma_prime: 1.5,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct ZetaConfig {
    /// Evaluation points `[re, im]`; by default 20 points on `|z| = 0.5/β`.
    pub points: Option<Vec<[f64; 2]>>,
    pub n_terms: usize,
    pub max_period: usize,
}

impl Default for ZetaConfig {
    fn default() -> Self {
        ZetaConfig {
            points: None,
            n_terms: 400,
            max_period: 10,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct VariationalConfig {
    pub samples: usize,
    pub depth: usize,
    /// Bernoulli competitors; by default five fixed weight vectors.
    pub competitors: Option<Vec<Vec<f64>>>,
}

impl Default for VariationalConfig {
    fn default() -> Self {
        VariationalConfig {
            samples: 20_000,
            depth: 24,
            competitors: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct LyapunovConfig {
    pub words: usize,
    pub l: usize,
    pub gap_threshold: f64,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        LyapunovConfig {
            words: 32,
            l: 200,
            gap_threshold: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct RootConfig {
    pub tol: f64,
    /// Points of the monotonicity grid around the root.
    pub grid_points: usize,
}

impl Default for RootConfig {
    fn default() -> Self {
        RootConfig {
            tol: 1e-12,
            grid_points: 10,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanlineConfig {
    pub y: GridConfig,
    /// Grid points with `|y|` below this are left out of the minimum.
    pub exclude: f64,
}

impl Default for ScanlineConfig {
    fn default() -> Self {
        ScanlineConfig {
            y: GridConfig {
                min: 0.0,
                max: 20.0,
                points: 2001,
            },
            exclude: 0.1,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).context("parsing config")?;
        if cfg.q == 0 {
            bail!("q must be at least 1");
        }
        Ok(cfg)
    }

    pub fn build_ifs(&self) -> anyhow::Result<IfsSpec> {
        Ok(match &self.ifs {
            IfsConfig::Name(n) => ifs::preset(n, None)?,
            IfsConfig::Preset(p) => ifs::preset(&p.preset, p.param)?,
            IfsConfig::Maps(m) => {
                let linears: Vec<Vec<f64>> = m.maps.iter().map(|x| x.linear.clone()).collect();
                let offsets: Vec<Vec<f64>> = m.maps.iter().map(|x| x.offset.clone()).collect();
                let spec = IfsSpec::from_parts(&linears, &offsets)?;
                match &m.name {
                    Some(n) => IfsSpec::new(n.clone(), spec.maps().to_vec(), spec.verification())?,
                    None => spec,
                }
            }
        })
    }

    pub fn build_potential(&self, ifs: &IfsSpec) -> anyhow::Result<Potential> {
        let t = ifs.t();
        Ok(match &self.potential {
            PotentialConfig::Constant(c) => Potential::constant(t, c.constant),
            PotentialConfig::Table(tc) => {
                Potential::from_entries(t, tc.memory, tc.table.iter().map(|(k, v)| (k.as_str(), *v)))?
            }
            PotentialConfig::Family(f) => {
                let p = &f.params;
                let fam: Box<dyn HolderFamily> = match f.family.as_str() {
                    "constant" => Box::new(ConstantFamily {
                        t,
                        value: p.value.context("family \"constant\" needs params.value")?,
                    }),
                    "first_symbol" => {
                        let weights = p.weights.clone().context("family \"first_symbol\" needs params.weights")?;
                        if weights.len() != t {
                            bail!("params.weights has {} entries, the IFS has {t} maps", weights.len());
                        }
                        Box::new(FirstSymbolFamily { weights })
                    }
                    "geometric" => {
                        let weights = p.weights.clone().context("family \"geometric\" needs params.weights")?;
                        if weights.len() != t {
                            bail!("params.weights has {} entries, the IFS has {t} maps", weights.len());
                        }
                        Box::new(GeometricFamily::new(weights, p.lambda.context("family \"geometric\" needs params.lambda")?)?)
                    }
                    other => bail!("unknown potential family \"{other}\""),
                };
                truncate_to_memory(fam.as_ref(), f.truncation_k, ifs.eta())?.0
            }
        })
    }
}
