//! Session creation configs and their validation.

use std::collections::HashMap;

use gnt_core::engine::{Hypothesis, Rule};
use gnt_core::{BoundarySpec, MaskScheme};
use gnt_harness::scenario::Layout as ScenarioLayout;
use gnt_harness::Scenario;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Body of `POST /sessions`. Exactly one of `hypotheses` and `scenario` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    #[serde(default = "default_scheme")]
    pub scheme: MaskScheme,
    /// Level of the test; defaults to the boundary's level, then the service default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Boundary for sign bits; defaults to the stitched Gaussian boundary.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundarySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypotheses: Option<Vec<Hypothesis>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioSource>,
}

/// A generated instance; its truth labels never leave the generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSource {
    #[serde(flatten)]
    pub scenario: Scenario,
    #[serde(default)]
    pub rep: u64,
}

fn default_scheme() -> MaskScheme {
    MaskScheme::Tent
}

/// How covariates arrange the hypotheses.
#[derive(Debug, Clone, PartialEq)]
pub enum Layout {
    List,
    Grid,
    /// Parent of each entry position.
    Tree { parent: Vec<Option<usize>> },
}

impl Layout {
    pub fn name(&self) -> &'static str {
        match self {
            Layout::List => "list",
            Layout::Grid => "grid",
            Layout::Tree { .. } => "tree",
        }
    }
}

/// A validated config, ready to start an engine.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub hyps: Vec<Hypothesis>,
    pub layout: Layout,
    pub scheme: MaskScheme,
    pub rule: Rule,
    pub alpha: f64,
}

fn integral(x: f64) -> Option<i64> {
    (x.fract() == 0.0 && x.abs() < 1e15).then_some(x as i64)
}

/// Two integer covariates give a grid; one integer parent id (negative for
/// roots) that forms a forest gives a tree; anything else is a list.
pub fn infer_layout(hyps: &[Hypothesis]) -> Layout {
    if hyps.is_empty() {
        return Layout::List;
    }
    if hyps.iter().all(|h| h.covariates.len() == 2 && h.covariates.iter().all(|&c| integral(c).is_some())) {
        return Layout::Grid;
    }
    if hyps.iter().all(|h| h.covariates.len() == 1 && integral(h.covariates[0]).is_some()) {
        let pos: HashMap<usize, usize> = hyps.iter().enumerate().map(|(i, h)| (h.id, i)).collect();
        let mut parent = Vec::with_capacity(hyps.len());
        for h in hyps {
            let c = integral(h.covariates[0]).unwrap_or(-1);
            if c < 0 {
                parent.push(None);
            } else {
                match pos.get(&(c as usize)) {
                    Some(&p) => parent.push(Some(p)),
                    None => return Layout::List,
                }
            }
        }
        if is_forest(&parent) {
            return Layout::Tree { parent };
        }
    }
    Layout::List
}

fn is_forest(parent: &[Option<usize>]) -> bool {
    // 0 unvisited, 1 on the current path, 2 known to reach a root.
    let mut mark = vec![0u8; parent.len()];
    for start in 0..parent.len() {
        let mut path = Vec::new();
        let mut cur = Some(start);
        while let Some(i) = cur {
            match mark[i] {
                2 => break,
                1 => return false,
                _ => {
                    mark[i] = 1;
                    path.push(i);
                    cur = parent[i];
                }
            }
        }
        for i in path {
            mark[i] = 2;
        }
    }
    true
}

impl SessionConfig {
    pub fn upload(hyps: Vec<Hypothesis>) -> Self {
        Self { scheme: MaskScheme::Tent, alpha: None, boundary: None, hypotheses: Some(hyps), scenario: None }
    }

    pub fn generated(scenario: Scenario, rep: u64) -> Self {
        Self {
            scheme: MaskScheme::Tent,
            alpha: None,
            boundary: None,
            hypotheses: None,
            scenario: Some(ScenarioSource { scenario, rep }),
        }
    }

    pub fn with_scheme(mut self, scheme: MaskScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn with_boundary(mut self, spec: BoundarySpec) -> Self {
        self.boundary = Some(spec);
        self
    }

    fn level(&self, default_alpha: f64) -> Result<f64> {
        let alpha = match (self.alpha, self.boundary) {
            (Some(a), Some(b)) if a != b.alpha => {
                return Err(Error::InvalidConfig(format!("alpha {a} disagrees with boundary level {}", b.alpha)))
            }
            (Some(a), _) => a,
            (None, Some(b)) => b.alpha,
            (None, None) => default_alpha,
        };
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        Ok(alpha)
    }

    fn rule(&self, alpha: f64) -> Result<Rule> {
        if self.scheme.is_calibrator() {
            if self.boundary.is_some() {
                return Err(Error::InvalidConfig("calibrator schemes use the product rule, not a boundary".into()));
            }
            return Ok(Rule::ville(alpha)?);
        }
        let spec = self.boundary.unwrap_or_else(|| BoundarySpec::gaussian_stitched(alpha));
        Ok(Rule::boundary(spec)?)
    }

    pub fn resolve(&self, default_alpha: f64) -> Result<Resolved> {
        self.scheme.validate()?;
        let alpha = self.level(default_alpha)?;
        let rule = self.rule(alpha)?;
        let (hyps, layout) = match (&self.hypotheses, &self.scenario) {
            (Some(h), None) => (h.clone(), infer_layout(h)),
            (None, Some(src)) => {
                if src.scenario.is_online() {
                    return Err(Error::InvalidConfig("sessions host batch scenarios only".into()));
                }
                let (inst, _truth) = src.scenario.generate(src.rep)?;
                let layout = match inst.layout {
                    ScenarioLayout::Grid { .. } => Layout::Grid,
                    ScenarioLayout::Tree { parent } => Layout::Tree { parent },
                    _ => Layout::List,
                };
                (inst.hyps, layout)
            }
            _ => return Err(Error::InvalidConfig("give exactly one of `hypotheses` and `scenario`".into())),
        };
        if hyps.is_empty() {
            return Err(Error::InvalidConfig("no hypotheses".into()));
        }
        Ok(Resolved { hyps, layout, scheme: self.scheme, rule, alpha })
    }
}
