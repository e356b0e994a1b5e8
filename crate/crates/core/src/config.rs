//! Run configuration, read from TOML.
//!
//! ```toml
//! example = "example1"
//! p = 4.0
//! strategy = "doerfler"
//! beta = 0.9
//! coarse_n = 8
//!
//! [solver]
//! max_outer = 100
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::BoundaryFlux;
use crate::manufactured::ExampleName;
use crate::solver::SolverConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Uniform,
    Doerfler,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Strategy::Uniform),
            "doerfler" => Ok(Strategy::Doerfler),
            other => Err(Error::config(
                "strategy",
                format!("unknown strategy `{other}`"),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub example: ExampleName,
    /// Lebesgue exponent of the estimator and the error norms.
    pub p: f64,
    pub strategy: Strategy,
    /// Dörfler fraction, ignored by the uniform strategy.
    pub beta: f64,
    /// Cells per side of the initial structured mesh.
    pub coarse_n: usize,
    pub max_cycles: usize,
    pub max_dofs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Keep the flux term on contact edges in the jump indicator.
    pub include_boundary_flux: bool,
    pub sample_density: usize,
    /// Use `f = Δw + w` for Example 2; `false` selects `f = -Δw + w`.
    pub example2_literal_sign: bool,
    pub solver: SolverConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            example: ExampleName::Example1,
            p: 4.0,
            strategy: Strategy::Doerfler,
            beta: 0.9,
            coarse_n: 8,
            max_cycles: 15,
            max_dofs: 200_000,
            output_dir: None,
            include_boundary_flux: false,
            sample_density: 2,
            example2_literal_sign: true,
            solver: SolverConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(Error::config(
                "p",
                format!("must be finite and > 1, got {}", self.p),
            ));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::config(
                "beta",
                format!("must lie in (0, 1], got {}", self.beta),
            ));
        }
        if self.coarse_n < 1 {
            return Err(Error::config("coarse_n", "must be at least 1"));
        }
        if self.max_cycles < 1 {
            return Err(Error::config("max_cycles", "must be at least 1"));
        }
        if self.sample_density < 1 {
            return Err(Error::config("sample_density", "must be at least 1"));
        }
        self.solver.validate()
    }

    pub fn boundary_flux(&self) -> BoundaryFlux {
        if self.include_boundary_flux {
            BoundaryFlux::Always
        } else {
            BoundaryFlux::NonContact
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config is always representable in TOML")
    }
}

/// Parses and validates a TOML document; missing keys take their defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let key = e
            .message()
            .split('`')
            .nth(1)
            .unwrap_or("document")
            .to_string();
        Error::Config {
            key,
            reason: e.message().to_string(),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.p, 4.0);
        assert_eq!(cfg.beta, 0.9);
        assert_eq!(cfg.coarse_n, 8);
        assert_eq!(cfg.max_cycles, 15);
        assert_eq!(cfg.max_dofs, 200_000);
    }

    #[test]
    fn full_document() {
        let cfg = parse_config(
            r#"
            example = "example2"
            p = 32.0
            strategy = "uniform"
            beta = 0.8
            coarse_n = 16
            output_dir = "out"
            include_boundary_flux = true

            [solver]
            max_outer = 7
            "#,
        )
        .unwrap();
        assert_eq!(cfg.example, ExampleName::Example2);
        assert_eq!(cfg.strategy, Strategy::Uniform);
        assert_eq!(cfg.solver.max_outer, 7);
        assert_eq!(cfg.solver.pdas_shift, 1.0);
        assert_eq!(cfg.output_dir, Some(PathBuf::from("out")));
        assert_eq!(cfg.boundary_flux(), BoundaryFlux::Always);
    }

    #[test]
    fn integer_exponent_is_accepted() {
        assert_eq!(parse_config("p = 4").unwrap().p, 4.0);
    }

    fn rejected_key(text: &str) -> String {
        match parse_config(text) {
            Err(Error::Config { key, .. }) => key,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert_eq!(rejected_key("beta = 1.5"), "beta");
        assert_eq!(rejected_key("beta = 0.0"), "beta");
        assert_eq!(rejected_key("p = 1.0"), "p");
        assert_eq!(rejected_key("coarse_n = 0"), "coarse_n");
        assert_eq!(
            rejected_key("[solver]\npdas_shift = -1.0"),
            "solver.pdas_shift"
        );
        assert!(parse_config("beta = 1.0").is_ok());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert_eq!(rejected_key("colour = 3"), "colour");
        assert_eq!(rejected_key("[solver]\nshift = 1.0"), "shift");
        assert!(parse_config("example = \"example3\"").is_err());
        assert!(parse_config("strategy = \"random\"").is_err());
    }

    #[test]
    fn serialization_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.example = ExampleName::Constant;
        cfg.p = 0.1 + 0.2 + 4.0;
        cfg.output_dir = Some(PathBuf::from("/tmp/a b"));
        cfg.solver.linear_tol = 3.3e-13;
        assert_eq!(parse_config(&cfg.to_toml()).unwrap(), cfg);
        let default = RunConfig::default();
        assert_eq!(parse_config(&default.to_toml()).unwrap(), default);
    }
}
