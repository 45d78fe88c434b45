//! JSON run configuration and attack construction.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{EavesdropperModel, EntangleAttack};
use crate::error::{Error, Result};
use crate::operator::Operator;
use crate::rng::SeedStream;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub d: usize,
    pub n: usize,
    #[serde(rename = "L")]
    pub decoys: usize,
    pub seed: u64,
    pub p: Vec<usize>,
    #[serde(default = "default_attack")]
    pub attack: String,
    #[serde(default)]
    pub attack_params: AttackParams,
}

fn default_attack() -> String {
    "honest".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitaryKind {
    Identity,
    #[default]
    ControlledShift,
    Haar,
}

/// Parameters for `entangle_measure`; ignored by the other models.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackParams {
    pub probe_dim: usize,
    pub unitary: UnitaryKind,
    /// Seed for the `haar` unitary.
    pub unitary_seed: u64,
}

impl Default for AttackParams {
    fn default() -> Self {
        Self { probe_dim: 2, unitary: UnitaryKind::default(), unitary_seed: 0 }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidConfig(format!("n must be at least 2, got {}", self.n)));
        }
        if self.p.len() != self.n {
            return Err(Error::InvalidConfig(format!("expected {} inputs, got {}", self.n, self.p.len())));
        }
        if self.decoys == 0 {
            return Err(Error::InvalidConfig("L must be at least 1".into()));
        }
        parse_attack(&self.attack, self.d, &self.attack_params).map(|_| ())
    }

    pub fn model(&self) -> Result<EavesdropperModel> {
        parse_attack(&self.attack, self.d, &self.attack_params)
    }
}

/// Builds the eavesdropper named `name` for dimension `d`.
pub fn parse_attack(name: &str, d: usize, params: &AttackParams) -> Result<EavesdropperModel> {
    match name {
        "honest" => Ok(EavesdropperModel::Honest),
        "intercept_resend" => Ok(EavesdropperModel::InterceptResend),
        "measure_resend" => Ok(EavesdropperModel::MeasureResend),
        "entangle_measure" => {
            let e = params.probe_dim;
            let unitary = match params.unitary {
                UnitaryKind::Identity => Operator::identity(d * e),
                UnitaryKind::ControlledShift => Operator::controlled_shift(d, e),
                UnitaryKind::Haar => {
                    Operator::haar_random(d * e, &mut SeedStream::new(params.unitary_seed).derive("unitary").rng())
                }
            };
            Ok(EavesdropperModel::EntangleMeasure(EntangleAttack::new(unitary, d, e)?))
        }
        other => Err(Error::InvalidConfig(format!(
            "unknown attack '{other}' (expected honest, intercept_resend, measure_resend or entangle_measure)"
        ))),
    }
}
