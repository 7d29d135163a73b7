//! Experiment configuration and its `key = value` file format.

use std::fmt::Write as _;
use std::str::FromStr;

use super::rule::{Rule, RuleEnv};
use super::HarnessError;
use crate::objective::Model;
use crate::penalty::PenaltyParams;
use crate::sampling::OperatorKind;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub m: usize,
    pub n: usize,
    pub r: usize,
    pub kappa: usize,
    pub sample_ratio: f64,
    pub operator: OperatorKind,
    pub model: Model,
    pub a: f64,
    pub mu_tilde: f64,
    /// Value bound to `c` inside the rules.
    pub c: f64,
    pub lambda_rule: Rule,
    pub rho_rule: Rule,
    pub epsilon: f64,
    pub max_iters: usize,
    pub seed: u64,
}

/// The keys accepted by [`ExperimentConfig::set`], in file order.
pub const KEYS: [&str; 15] = [
    "m",
    "n",
    "r",
    "kappa",
    "sample_ratio",
    "operator",
    "model",
    "a",
    "mu_tilde",
    "c",
    "lambda_rule",
    "rho_rule",
    "epsilon",
    "max_iters",
    "seed",
];

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::fig1()
    }
}

impl ExperimentConfig {
    /// Desk-scale analogue of the l2,0 convergence experiment.
    pub fn fig1() -> Self {
        Self {
            m: 300,
            n: 300,
            r: 5,
            kappa: 15,
            sample_ratio: 0.25,
            operator: OperatorKind::UniformMask,
            model: Model::L20,
            a: 3.7,
            mu_tilde: 1e-3,
            c: 0.15,
            lambda_rule: Rule::parse("c * specnorm(X0)").expect("static rule"),
            rho_rule: Rule::constant(1.0),
            epsilon: 1e-10,
            max_iters: 20_000,
            seed: 1,
        }
    }

    /// Desk-scale analogue of the DC convergence experiment. `c` is smaller
    /// than at full scale so that true columns reach the saturated branch.
    pub fn fig2() -> Self {
        Self {
            model: Model::Dc,
            c: 0.02,
            lambda_rule: Rule::parse("((a+1)/2) * (c * specnorm(X0))^2").expect("static rule"),
            rho_rule: Rule::parse("2 / ((a+1) * c * specnorm(X0))").expect("static rule"),
            ..Self::fig1()
        }
    }

    /// Desk-scale lambda sweep.
    pub fn fig3() -> Self {
        Self {
            m: 200,
            n: 200,
            kappa: 10,
            ..Self::fig1()
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.m == 0 || self.n == 0 {
            return bad(format!("m = {}, n = {} must be positive", self.m, self.n));
        }
        if !(1 <= self.r && self.r <= self.kappa && self.kappa <= self.m.min(self.n)) {
            return bad(format!(
                "need 1 <= r ({}) <= kappa ({}) <= min(m, n) ({})",
                self.r,
                self.kappa,
                self.m.min(self.n)
            ));
        }
        if !(self.sample_ratio > 0.0 && self.sample_ratio <= 1.0) {
            return bad(format!("sample_ratio = {} must lie in (0, 1]", self.sample_ratio));
        }
        if self.sample_ratio * ((self.m * self.n) as f64) < 1.0 {
            return bad("sample_ratio * m * n must be >= 1".into());
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon = {} must be > 0", self.epsilon));
        }
        if self.max_iters == 0 {
            return bad("max_iters must be >= 1".into());
        }
        if !(self.a > 1.0 && self.a.is_finite()) {
            return bad(format!("a = {} must exceed 1", self.a));
        }
        if !(self.mu_tilde >= 0.0 && self.mu_tilde.is_finite()) {
            return bad(format!("mu_tilde = {} must be finite and >= 0", self.mu_tilde));
        }
        Ok(())
    }

    /// Evaluates both rules against `||X0||_2`.
    pub fn params(&self, specnorm_x0: f64) -> Result<PenaltyParams, HarnessError> {
        let env = RuleEnv {
            c: self.c,
            a: self.a,
            specnorm_x0,
        };
        let lambda = self.lambda_rule.eval(&env);
        let rho = self.rho_rule.eval(&env);
        Ok(PenaltyParams::new(self.a, lambda, rho, self.mu_tilde)?)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        let value = value.trim();
        match key.trim() {
            "m" => self.m = parse(key, value)?,
            "n" => self.n = parse(key, value)?,
            "r" => self.r = parse(key, value)?,
            "kappa" => self.kappa = parse(key, value)?,
            "sample_ratio" => self.sample_ratio = parse(key, value)?,
            "operator" => self.operator = parse(key, value)?,
            "model" => self.model = parse(key, value)?,
            "a" => self.a = parse(key, value)?,
            "mu_tilde" => self.mu_tilde = parse(key, value)?,
            "c" => self.c = parse(key, value)?,
            "lambda_rule" => self.lambda_rule = Rule::parse(value)?,
            "rho_rule" => self.rho_rule = Rule::parse(value)?,
            "epsilon" => self.epsilon = parse(key, value)?,
            "max_iters" => self.max_iters = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            other => return Err(HarnessError::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), HarnessError> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                HarnessError::Config(format!("line {}: expected key = value, got '{raw}'", lineno + 1))
            })?;
            self.set(k, v)
                .map_err(|e| HarnessError::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, HarnessError> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for key in KEYS {
            let _ = writeln!(s, "{key} = {}", self.get(key));
        }
        s
    }

    fn get(&self, key: &str) -> String {
        match key {
            "m" => self.m.to_string(),
            "n" => self.n.to_string(),
            "r" => self.r.to_string(),
            "kappa" => self.kappa.to_string(),
            "sample_ratio" => format!("{:?}", self.sample_ratio),
            "operator" => self.operator.to_string(),
            "model" => self.model.to_string(),
            "a" => format!("{:?}", self.a),
            "mu_tilde" => format!("{:?}", self.mu_tilde),
            "c" => format!("{:?}", self.c),
            "lambda_rule" => self.lambda_rule.to_string(),
            "rho_rule" => self.rho_rule.to_string(),
            "epsilon" => format!("{:?}", self.epsilon),
            "max_iters" => self.max_iters.to_string(),
            _ => self.seed.to_string(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, HarnessError> {
    value
        .parse()
        .map_err(|_| HarnessError::Config(format!("cannot parse {key} = '{value}'")))
}
