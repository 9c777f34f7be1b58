use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{load_toml, ConfigError};

/// Environment variable that replaces the external solver command line.
pub const SOLVER_CMD_ENV: &str = "WARP_SOLVER_CMD";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    DiffLogic,
    Linear,
    External,
    BruteForce,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub external_solver_command: Vec<String>,
    pub timeout_ms: u64,
    pub strategy_order: Vec<Strategy>,
    pub max_concurrent_solvers: usize,
    /// Visited-assignment cap for the brute-force strategy.
    pub brute_force_budget: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            external_solver_command: vec!["z3".into(), "-in".into()],
            timeout_ms: 5000,
            strategy_order: vec![
                Strategy::DiffLogic,
                Strategy::Linear,
                Strategy::External,
                Strategy::BruteForce,
            ],
            max_concurrent_solvers: 4,
            brute_force_budget: crate::difflogic::BRUTE_FORCE_BUDGET,
        }
    }
}

impl SolverConfig {
    /// Defaults without the external process.
    pub fn internal() -> Self {
        SolverConfig {
            strategy_order: vec![Strategy::DiffLogic, Strategy::Linear, Strategy::BruteForce],
            ..SolverConfig::default()
        }
    }

    pub fn only(strategy: Strategy) -> Self {
        SolverConfig { strategy_order: vec![strategy], ..SolverConfig::default() }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.timeout_ms == 0 {
            return Err(ConfigError::Invalid("timeout_ms must be positive".into()));
        }
        if self.strategy_order.is_empty() {
            return Err(ConfigError::Invalid("strategy_order must not be empty".into()));
        }
        if self.max_concurrent_solvers == 0 {
            return Err(ConfigError::Invalid("max_concurrent_solvers must be positive".into()));
        }
        if self.strategy_order.contains(&Strategy::External)
            && self.external_solver_command.is_empty()
        {
            return Err(ConfigError::Invalid("external_solver_command is empty".into()));
        }
        Ok(())
    }

    pub fn from_toml_file(path: &Path) -> Result<Self, ConfigError> {
        let cfg: SolverConfig = load_toml(path)?;
        let cfg = cfg.with_env_overrides();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `WARP_SOLVER_CMD` (split on whitespace) when it is set and non-empty.
    pub fn with_env_overrides(self) -> Self {
        match std::env::var(SOLVER_CMD_ENV) {
            Ok(cmd) => self.with_solver_command_line(&cmd),
            Err(_) => self,
        }
    }

    fn with_solver_command_line(mut self, cmd: &str) -> Self {
        let parts: Vec<String> = cmd.split_whitespace().map(str::to_owned).collect();
        if !parts.is_empty() {
            self.external_solver_command = parts;
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_with_partial_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("solver.toml");
        std::fs::write(
            &path,
            "timeout_ms = 250\nstrategy_order = [\"diff_logic\", \"brute_force\"]\n",
        )
        .unwrap();
        let cfg: SolverConfig = load_toml(&path).unwrap();
        assert_eq!(cfg.timeout_ms, 250);
        assert_eq!(cfg.strategy_order, vec![Strategy::DiffLogic, Strategy::BruteForce]);
        assert_eq!(cfg.external_solver_command, vec!["z3", "-in"]);
    }

    #[test]
    fn rejects_bad_values() {
        let cfg = SolverConfig { timeout_ms: 0, ..SolverConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = SolverConfig { strategy_order: vec![], ..SolverConfig::default() };
        assert!(cfg.validate().is_err());
        assert!(SolverConfig::default().validate().is_ok());
    }

    #[test]
    fn command_line_override() {
        let cfg = SolverConfig::default().with_solver_command_line("  cvc5 --lang smt2 ");
        assert_eq!(cfg.external_solver_command, vec!["cvc5", "--lang", "smt2"]);
        let cfg = SolverConfig::default().with_solver_command_line("   ");
        assert_eq!(cfg.external_solver_command, vec!["z3", "-in"]);
    }
}
