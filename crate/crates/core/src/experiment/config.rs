use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::ring::PrimeContext;
use crate::sums::{Gamma, WeightedSubset};
use crate::Complex64;

/// `T` as a number or `"max"` for `p - 1`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OrderSpec {
    Value(u64),
    #[default]
    #[serde(with = "max_tag")]
    Max,
}

mod max_tag {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str("max")
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        let s = String::deserialize(d)?;
        if s == "max" {
            Ok(())
        } else {
            Err(serde::de::Error::custom(format!(
                "expected \"max\" or a number, got \"{s}\""
            )))
        }
    }
}

impl OrderSpec {
    pub fn resolve(self, ctx: &PrimeContext) -> Result<u64, ExperimentError> {
        let n = ctx.group_order();
        match self {
            OrderSpec::Max => Ok(n),
            OrderSpec::Value(t) if ctx.divides_group_order(t) => Ok(t),
            OrderSpec::Value(t) => Err(ExperimentError::Config(format!(
                "T = {t} does not divide p - 1 = {n}"
            ))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SetSpec {
    /// All of `Z_{p-1}`.
    #[default]
    Full,
    List(Vec<u64>),
    /// `[lo, hi)`
    Interval(u64, u64),
    Random {
        size: u64,
        seed: u64,
    },
}

impl SetSpec {
    pub fn resolve(&self, modulus: u64, gamma: Gamma) -> Result<WeightedSubset, ExperimentError> {
        let set = match self {
            SetSpec::Full => WeightedSubset::full(modulus, gamma),
            SetSpec::List(v) => WeightedSubset::new(modulus, v.clone(), gamma),
            SetSpec::Interval(lo, hi) => WeightedSubset::interval(modulus, *lo, *hi, gamma),
            SetSpec::Random { size, seed } => WeightedSubset::random(modulus, *size, *seed, gamma),
        };
        set.map_err(|e| ExperimentError::Config(e.to_string()))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GammaSpec {
    #[default]
    Ones,
    Random {
        seed: u64,
    },
    /// CSV with header `y,re,im`.
    File(PathBuf),
}

#[derive(Deserialize)]
struct GammaRow {
    y: u64,
    re: f64,
    im: f64,
}

impl GammaSpec {
    pub fn resolve(&self) -> Result<Gamma, ExperimentError> {
        match self {
            GammaSpec::Ones => Ok(Gamma::Ones),
            GammaSpec::Random { seed } => Ok(Gamma::Seeded { seed: *seed }),
            GammaSpec::File(path) => {
                let gamma = Gamma::Explicit(read_gamma_file(path)?);
                gamma
                    .validate()
                    .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
                Ok(gamma)
            }
        }
    }
}

fn read_gamma_file(path: &Path) -> Result<BTreeMap<u64, Complex64>, ExperimentError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => ExperimentError::Config(format!("{}: {other:?}", path.display())),
    })?;
    let mut values = BTreeMap::new();
    for row in reader.deserialize::<GammaRow>() {
        let row = row.map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        values.insert(row.y, Complex64::new(row.re, row.im));
    }
    Ok(values)
}

/// Grid axes; each is optional and falls back to the top-level value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxes {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub p: Vec<u64>,
    /// Exponents `alpha`: `|X| = |Y| = min(round(p^alpha), p - 1)`, drawn at
    /// random. Without densities the top-level `x`/`y` specs are used.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub densities: Vec<f64>,
    #[serde(rename = "T", default, skip_serializing_if = "Vec::is_empty")]
    pub orders: Vec<OrderSpec>,
}

fn one() -> u64 {
    1
}

fn one_thread() -> usize {
    1
}

fn default_k() -> Vec<u32> {
    vec![1, 2, 3]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub p: u64,
    #[serde(rename = "T", default)]
    pub order: OrderSpec,
    #[serde(default = "one")]
    pub a: u64,
    #[serde(default = "default_k")]
    pub k: Vec<u32>,
    #[serde(default)]
    pub x: SetSpec,
    #[serde(default)]
    pub y: SetSpec,
    #[serde(default)]
    pub gamma: GammaSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepAxes>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default = "one_thread")]
    pub threads: usize,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    /// A config for a single prime with every default filled in.
    pub fn for_prime(p: u64) -> Self {
        Self {
            p,
            order: OrderSpec::Max,
            a: 1,
            k: default_k(),
            x: SetSpec::Full,
            y: SetSpec::Full,
            gamma: GammaSpec::Ones,
            sweep: None,
            out: None,
            threads: 1,
            seed: 0,
        }
    }

    pub fn primes(&self) -> Vec<u64> {
        match &self.sweep {
            Some(s) if !s.p.is_empty() => s.p.clone(),
            _ => vec![self.p],
        }
    }

    pub fn orders(&self) -> Vec<OrderSpec> {
        match &self.sweep {
            Some(s) if !s.orders.is_empty() => s.orders.clone(),
            _ => vec![self.order],
        }
    }

    pub fn densities(&self) -> Vec<f64> {
        self.sweep
            .as_ref()
            .map(|s| s.densities.clone())
            .unwrap_or_default()
    }

    /// `T` for the top-level prime.
    pub fn resolved_order(&self) -> Result<u64, ExperimentError> {
        self.order.resolve(&context(self.p)?)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |msg: String| Err(ExperimentError::Config(msg));
        if self.k.is_empty() {
            return bad("k must list at least one value".into());
        }
        if self.threads == 0 {
            return bad("threads must be at least 1".into());
        }
        if let Some(s) = &self.sweep {
            if let Some(d) = s.densities.iter().find(|d| !(**d > 0.0 && **d <= 1.0)) {
                return bad(format!("density exponent {d} must lie in (0, 1]"));
            }
        }
        let ctx = context(self.p)?;
        self.order.resolve(&ctx)?;
        for p in self.primes() {
            let ctx = context(p)?;
            if self.a.is_multiple_of(p) {
                return bad(format!("a = {} is divisible by p = {p}", self.a));
            }
            if let Some(&k) = self.k.iter().find(|&&k| k == 0 || k as u64 >= p) {
                return bad(format!("k = {k} must satisfy 1 <= k < p = {p}"));
            }
            if self.densities().is_empty() {
                let n = ctx.group_order();
                self.x.resolve(n, Gamma::Ones)?;
                self.y.resolve(n, Gamma::Ones)?;
            }
        }
        self.gamma.resolve()?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }
}

fn context(p: u64) -> Result<PrimeContext, ExperimentError> {
    PrimeContext::new(p).map_err(|e| ExperimentError::Config(format!("p = {p}: {e}")))
}

/// Parse and validate a JSON config.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ExperimentError> {
    let config: ExperimentConfig =
        serde_json::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}
