use std::fmt;
use std::path::Path;
use std::str::FromStr;

use riemann_arc::arc::{SolverConfig, StoppingRule, Variant};
use riemann_arc::jd::DEFAULT_NOISE;
use riemann_arc::rng;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

/// A solver in the comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Solver {
    Racr,
    Sracr,
    Ssracr,
    Ssrtr,
}

impl Solver {
    pub const ALL: [Solver; 4] = [Solver::Racr, Solver::Sracr, Solver::Ssracr, Solver::Ssrtr];

    pub fn name(self) -> &'static str {
        match self {
            Solver::Racr => "RACR",
            Solver::Sracr => "SRACR",
            Solver::Ssracr => "SSRACR",
            Solver::Ssrtr => "SSRTR",
        }
    }

    /// Cubic variant, or `None` for the trust-region baseline.
    pub fn variant(self) -> Option<Variant> {
        match self {
            Solver::Racr => Some(Variant::Racr),
            Solver::Sracr => Some(Variant::Sracr),
            Solver::Ssracr => Some(Variant::Ssracr),
            Solver::Ssrtr => None,
        }
    }

    /// Solver configuration with the oracle mode this solver uses. The
    /// trust-region baseline samples both derivatives.
    pub fn configure(self, cfg: &SolverConfig) -> SolverConfig {
        self.variant().unwrap_or(Variant::Ssracr).configure(cfg)
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Solver {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        Solver::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| BenchError::Plan(format!("unknown solver `{s}`")))
    }
}

impl Serialize for Solver {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Solver {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Problem size `(n, d, r)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Case {
    pub n: usize,
    pub d: usize,
    pub r: usize,
}

impl Case {
    pub fn id(&self) -> String {
        format!("n{}_d{}_r{}", self.n, self.d, self.r)
    }
}

/// Seeds for one `(case, repetition)`, shared by every solver.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSeeds {
    pub instance: u64,
    pub start: u64,
    pub oracle: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkPlan {
    pub master_seed: u64,
    pub repetitions: usize,
    pub solvers: Vec<Solver>,
    pub cases: Vec<Case>,
    /// Off-diagonal noise of the generated matrices.
    #[serde(default = "default_noise")]
    pub noise: f64,
    /// `|S_g| = n / grad_divisor`.
    #[serde(default = "default_grad_divisor")]
    pub grad_divisor: usize,
    /// `|S_H| = n / hess_divisor`.
    #[serde(default = "default_hess_divisor")]
    pub hess_divisor: usize,
    /// Overrides applied on top of [`BenchmarkPlan::base_config`].
    #[serde(default)]
    pub config: toml::Table,
}

fn default_noise() -> f64 {
    DEFAULT_NOISE
}

fn default_grad_divisor() -> usize {
    4
}

fn default_hess_divisor() -> usize {
    40
}

impl Default for BenchmarkPlan {
    /// Desk-scale version of the published comparison.
    fn default() -> Self {
        Self {
            master_seed: 2024,
            repetitions: 3,
            solvers: Solver::ALL.to_vec(),
            cases: vec![
                Case { n: 500, d: 5, r: 5 },
                Case { n: 500, d: 10, r: 10 },
                Case { n: 2015, d: 5, r: 5 },
            ],
            noise: DEFAULT_NOISE,
            grad_divisor: default_grad_divisor(),
            hess_divisor: default_hess_divisor(),
            config: toml::Table::new(),
        }
    }
}

impl BenchmarkPlan {
    /// Experiment defaults: `σ_0 = 0.001`, `ρ_TH = 0.9`, `γ = 2`, `Δ_0 = 1`,
    /// stop when `‖G_k‖² ≤ 0.001`, at most 2000 iterations.
    pub fn base_config() -> SolverConfig {
        SolverConfig {
            sigma0: 1e-3,
            rho_th: 0.9,
            gamma: 2.0,
            delta0: 1.0,
            stopping: StoppingRule::GradSquaredThreshold(1e-3),
            max_iters: Some(2000),
            ..SolverConfig::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let plan: Self = toml::from_str(text).map_err(|e| BenchError::Plan(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| BenchError::Plan(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(BenchError::Plan("repetitions must be at least 1".into()));
        }
        if self.solvers.is_empty() {
            return Err(BenchError::Plan("solver set is empty".into()));
        }
        if self.cases.is_empty() {
            return Err(BenchError::Plan("case list is empty".into()));
        }
        if self.grad_divisor == 0 || self.hess_divisor == 0 {
            return Err(BenchError::Plan("sample divisors must be positive".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(BenchError::Plan(format!("invalid noise {}", self.noise)));
        }
        for c in &self.cases {
            if c.n == 0 || c.r == 0 || c.r > c.d {
                return Err(BenchError::Plan(format!("invalid case {}", c.id())));
            }
        }
        self.solver_config(&self.cases[0], Solver::Racr, 0)?.validate()?;
        Ok(())
    }

    /// Sets `key` (dotted paths allowed) in the override table from a TOML
    /// literal, falling back to a bare string.
    pub fn set_override(&mut self, key: &str, literal: &str) -> Result<()> {
        let value = toml::from_str::<toml::Table>(&format!("v = {literal}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(literal.to_owned()));
        let mut parts: Vec<&str> = key.split('.').collect();
        let last = parts
            .pop()
            .filter(|s| !s.is_empty())
            .ok_or_else(|| BenchError::Plan(format!("bad key `{key}`")))?;
        let mut table = &mut self.config;
        for p in parts {
            table = table
                .entry(p)
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| BenchError::Plan(format!("`{p}` is not a table")))?;
        }
        table.insert(last.to_owned(), value);
        Ok(())
    }

    pub fn sample_sizes(&self, case: &Case) -> (usize, usize) {
        ((case.n / self.grad_divisor).max(1), (case.n / self.hess_divisor).max(1))
    }

    pub fn seeds(&self, case: &Case, repetition: usize) -> RunSeeds {
        let key = |purpose: u64| {
            rng::derive(
                self.master_seed,
                &[purpose, case.n as u64, case.d as u64, case.r as u64, repetition as u64],
            )
        };
        RunSeeds {
            instance: key(1),
            start: key(2),
            oracle: key(3),
        }
    }

    /// Full configuration of one run: defaults, plan overrides, sample
    /// sizes, the solver's oracle mode and the derived seed.
    pub fn solver_config(&self, case: &Case, solver: Solver, repetition: usize) -> Result<SolverConfig> {
        let mut table = toml::Table::try_from(Self::base_config()).map_err(|e| BenchError::Plan(e.to_string()))?;
        merge(&mut table, &self.config);
        let mut cfg: SolverConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| BenchError::Plan(format!("config: {e}")))?;
        let (sg, sh) = self.sample_sizes(case);
        cfg.grad_sample_size = sg;
        cfg.hess_sample_size = sh;
        cfg.seed = self.seeds(case, repetition).oracle;
        Ok(solver.configure(&cfg))
    }
}

fn merge(into: &mut toml::Table, from: &toml::Table) {
    for (k, v) in from {
        match (into.get_mut(k), v) {
            (Some(toml::Value::Table(a)), toml::Value::Table(b)) => merge(a, b),
            _ => {
                into.insert(k.clone(), v.clone());
            }
        }
    }
}
