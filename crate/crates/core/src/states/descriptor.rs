use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    build_admixture, build_classical_correlated, build_mpe, build_multislit, build_smp,
    discretize_mixture, discretize_single, pair_grid_specs, single_grid_spec, EnvelopeSpec,
    MixtureState, ModularStateParams, SuperposedState, DEFAULT_HALFWIDTH_SIGMAS,
};
use crate::error::{Error, Result};
use crate::grid::{GridMixture, GridState};
use crate::modular::ModularScale;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    Multislit,
    Smp,
    Mpe,
    Classical,
    Admixture,
}

/// JSON description of a state. `lambda` doubles as the slit spacing L for
/// multislit states; `epsilon` is the classical weight of an admixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDescriptor {
    pub kind: StateKind,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default)]
    pub x0: f64,
    #[serde(rename = "N0", default)]
    pub n0: i64,
    pub lambda: f64,
    pub envelope: EnvelopeSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_ref: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

/// A constructed analytic state.
#[derive(Debug, Clone, PartialEq)]
pub enum BuiltState {
    Single(SuperposedState),
    Pair(MixtureState),
}

impl StateDescriptor {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("descriptor serializes")
    }

    /// Hex SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn scale(&self) -> Result<ModularScale> {
        ModularScale::new(self.lambda)
    }

    pub fn params(&self) -> Result<ModularStateParams> {
        let mut p = ModularStateParams::new(self.n, self.x0, self.n0, self.lambda, self.envelope.clone().try_into()?);
        p.phase_ref = self.phase_ref;
        Ok(p)
    }

    pub fn build(&self) -> Result<BuiltState> {
        if self.epsilon.is_some() && self.kind != StateKind::Admixture {
            return Err(Error::invalid("epsilon only applies to admixture states"));
        }
        let p = self.params()?;
        Ok(match self.kind {
            StateKind::Multislit => BuiltState::Single(build_multislit(self.n, self.lambda, p.envelope)?),
            StateKind::Smp => BuiltState::Single(build_smp(&p)?),
            StateKind::Mpe => BuiltState::Pair(build_mpe(&p)?.into()),
            StateKind::Classical => BuiltState::Pair(build_classical_correlated(&p)?),
            StateKind::Admixture => {
                let eps = self.epsilon.ok_or_else(|| Error::invalid("admixture needs epsilon"))?;
                BuiltState::Pair(build_admixture(&p, eps)?)
            }
        })
    }

    /// Human-readable caveat when the state leaves its intended regime.
    pub fn warning(&self) -> Result<Option<String>> {
        let p = self.params()?;
        Ok(match self.kind {
            StateKind::Multislit => super::multislit_warning(self.lambda, &p.envelope),
            _ => p.distinctness_warning(),
        })
    }
}

impl BuiltState {
    pub fn arity(&self) -> usize {
        match self {
            BuiltState::Single(_) => 1,
            BuiltState::Pair(_) => 2,
        }
    }

    /// Discretizes on default-extent grids commensurate with `scale`.
    pub fn to_grid(&self, points: usize, scale: ModularScale) -> Result<GridMixture> {
        match self {
            BuiltState::Single(s) => {
                let spec = single_grid_spec(s, points, DEFAULT_HALFWIDTH_SIGMAS, Some(scale))?;
                Ok(GridState::Single(discretize_single(s, spec, Some(scale))?).into())
            }
            BuiltState::Pair(m) => {
                let specs = pair_grid_specs(m, points, DEFAULT_HALFWIDTH_SIGMAS, Some(scale))?;
                discretize_mixture(m, specs, Some(scale))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_hashes_stably() {
        let text = r#"{"kind":"mpe","N":2,"lambda":1.0,"envelope":{"kind":"gaussian","sigma":5.0}}"#;
        let d = StateDescriptor::from_json(text).unwrap();
        assert_eq!(d.n, 2);
        assert_eq!(d.x0, 0.0);
        assert_eq!(d.hash().len(), 64);
        assert_eq!(d.hash(), StateDescriptor::from_json(&d.to_json()).unwrap().hash());
        assert!(matches!(d.build().unwrap(), BuiltState::Pair(_)));
    }

    #[test]
    fn rejects_unknown_fields_and_bad_values() {
        let extra = r#"{"kind":"mpe","N":2,"lambda":1.0,"envelope":{"kind":"gaussian","sigma":5.0},"foo":1}"#;
        assert!(StateDescriptor::from_json(extra).is_err());
        let bad = r#"{"kind":"smp","N":2,"lambda":-1.0,"envelope":{"kind":"gaussian","sigma":5.0}}"#;
        assert!(StateDescriptor::from_json(bad).unwrap().build().is_err());
        let no_eps = r#"{"kind":"admixture","N":2,"lambda":1.0,"envelope":{"kind":"gaussian","sigma":5.0}}"#;
        assert!(StateDescriptor::from_json(no_eps).unwrap().build().is_err());
    }
}
