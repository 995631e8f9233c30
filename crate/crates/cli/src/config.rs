//! JSON run configuration, merged under command-line flags.

use std::path::Path;

use clap::ValueEnum;
use entropic_core::pricing::{Method, OptionStyle};
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum StyleArg {
    Call,
    Put,
}

impl From<StyleArg> for OptionStyle {
    fn from(s: StyleArg) -> Self {
        match s {
            StyleArg::Call => OptionStyle::Call,
            StyleArg::Put => OptionStyle::Put,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Closed,
    Quadrature,
    Pde,
    Mc,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Closed => Method::ClosedForm,
            MethodArg::Quadrature => Method::Quadrature,
            MethodArg::Pde => Method::Pde,
            MethodArg::Mc => Method::MonteCarlo,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub risk_free_rate: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub style: Option<StyleArg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strike: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expiry: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshots: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub numeric: Option<bool>,
}

/// Every setting a subcommand can take. Absent fields fall back to flags,
/// then to defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub market: MarketConfig,
    #[serde(default)]
    pub option: OptionConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spot: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<MethodArg>,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| {
            Failure::Usage(format!("--config: cannot read {}: {e}", path.display()))
        })?;
        serde_json::from_str(&text).map_err(|e| {
            Failure::Usage(format!("--config: invalid JSON in {}: {e}", path.display()))
        })
    }
}

/// Overwrites `slot` when the flag was given.
pub fn overlay<T: Copy>(slot: &mut Option<T>, flag: Option<T>) {
    if flag.is_some() {
        *slot = flag;
    }
}

/// Fills `slot` when neither the config nor a flag supplied it.
pub fn default_to<T>(slot: &mut Option<T>, value: T) {
    if slot.is_none() {
        *slot = Some(value);
    }
}

/// Collects every validation problem before reporting them together.
#[derive(Default)]
pub struct Checks {
    errors: Vec<String>,
}

impl Checks {
    pub fn fail(&mut self, flag: &str, msg: impl std::fmt::Display) {
        self.errors.push(format!("{flag}: {msg}"));
    }

    pub fn required<T: Copy>(&mut self, v: Option<T>, flag: &str) -> Option<T> {
        if v.is_none() {
            self.fail(flag, "is required");
        }
        v
    }

    pub fn finite(&mut self, v: Option<f64>, flag: &str) -> f64 {
        match self.required(v, flag) {
            Some(x) if x.is_finite() => x,
            Some(x) => {
                self.fail(flag, format!("must be finite (got {x})"));
                f64::NAN
            }
            None => f64::NAN,
        }
    }

    pub fn positive(&mut self, v: Option<f64>, flag: &str) -> f64 {
        let x = self.finite(v, flag);
        if x.is_finite() && x <= 0.0 {
            self.fail(flag, format!("must be > 0 (got {x})"));
        }
        x
    }

    pub fn non_negative(&mut self, v: Option<f64>, flag: &str) -> f64 {
        let x = self.finite(v, flag);
        if x < 0.0 {
            self.fail(flag, format!("must be >= 0 (got {x})"));
        }
        x
    }

    pub fn at_least(&mut self, v: Option<usize>, min: usize, flag: &str) -> usize {
        match self.required(v, flag) {
            Some(n) if n < min => {
                self.fail(flag, format!("must be at least {min} (got {n})"));
                n
            }
            Some(n) => n,
            None => 0,
        }
    }

    pub fn finish(self) -> Result<(), Failure> {
        if self.errors.is_empty() {
            Ok(())
        } else {
            Err(Failure::Usage(format!(
                "invalid configuration:\n  {}",
                self.errors.join("\n  ")
            )))
        }
    }
}
