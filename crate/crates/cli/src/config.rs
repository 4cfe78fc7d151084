use std::collections::BTreeMap;
use std::path::Path;

use bkp_tau::integrals::{
    BiMeasure, ContourMeasure, DeformationTimes, GrandSpec, IntegralId, Kernel, QuadratureSpec,
};
use bkp_tau::tausums::{
    ClosedForm, DMatrix, Model, Number, PairCoefficients, Series, SeriesId, SpecTarget, Truncation, WeightSpec,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Reads a JSON config, reporting the path of the offending key on failure.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Validation(format!("at `{path}`: {}", e.into_inner()))
    })
}

/// The data a series needs: `l` for S0/S00, weights for S1/S2/S4, pair
/// coefficients for S3 and a D matrix for S5.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesData {
    pub series: SeriesId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<WeightSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_coefficients: Option<PairCoefficients>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dmatrix: Option<DMatrix>,
}

fn need<T: Clone>(v: &Option<T>, key: &str, id: SeriesId) -> Result<T, CliError> {
    v.clone()
        .ok_or_else(|| CliError::Validation(format!("series {id:?} needs `{key}`")))
}

impl SeriesData {
    pub fn series(&self) -> Result<Series, CliError> {
        let id = self.series;
        let w = || need(&self.weights, "weights", id);
        let s = match id {
            SeriesId::S0 => Series::S0 { l: need(&self.l, "l", id)? },
            SeriesId::S00 => Series::S00 { l: need(&self.l, "l", id)? },
            SeriesId::S1 => Series::S1(w()?),
            SeriesId::S2 => Series::S2(w()?),
            SeriesId::S4 => Series::S4(w()?),
            SeriesId::S3 => Series::S3(need(&self.pair_coefficients, "pair_coefficients", id)?),
            SeriesId::S5 => Series::S5(need(&self.dmatrix, "dmatrix", id)?),
        };
        if let Some(w) = &self.weights {
            w.validate()?;
        }
        Ok(s)
    }

    pub fn closed_form(&self) -> Result<ClosedForm, CliError> {
        let id = self.series;
        Ok(match id {
            SeriesId::S1 => ClosedForm::S1DI(need(&self.weights, "weights", id)?),
            SeriesId::S2 => ClosedForm::S2DI(need(&self.weights, "weights", id)?),
            SeriesId::S4 => ClosedForm::S4DI(need(&self.weights, "weights", id)?),
            SeriesId::S5 => ClosedForm::S5DI(need(&self.dmatrix, "dmatrix", id)?),
            _ => return Err(CliError::Validation(format!("no closed form at t∞ for {id:?}"))),
        })
    }
}

/// `sum`: a polynomial (JSON) or, with `times`, a numeric value.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SumConfig {
    pub data: SeriesData,
    pub truncation: Truncation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<DeformationTimes>,
    /// Evaluate the closed form at `t = t̄ = t∞` instead.
    #[serde(default)]
    pub closed_form: bool,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub enum SpecializeTarget {
    S0,
    S1,
    S2,
    S00,
    S4,
    /// The diagonal D matrix reproducing S2 through S5.
    S5,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecializeConfig {
    pub target: SpecializeTarget,
    pub max_n: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<WeightSpec>,
}

impl SpecializeConfig {
    pub fn spec_target(&self) -> Result<SpecTarget, CliError> {
        let l = || self.l.ok_or_else(|| CliError::Validation("target needs `l`".into()));
        let w = || self.weights.clone().ok_or_else(|| CliError::Validation("target needs `weights`".into()));
        Ok(match self.target {
            SpecializeTarget::S0 => SpecTarget::S0 { l: l()? },
            SpecializeTarget::S00 => SpecTarget::S00 { l: l()? },
            SpecializeTarget::S1 => SpecTarget::S1(w()?),
            SpecializeTarget::S2 => SpecTarget::S2(w()?),
            SpecializeTarget::S4 => SpecTarget::S4(w()?),
            SpecializeTarget::S5 => return Err(CliError::Validation("S5 specializes to a D matrix".into())),
        })
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub enum ModelId {
    A,
    B,
    C,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    pub model: ModelId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<WeightSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_coefficients: Option<PairCoefficients>,
    pub truncation: Truncation,
    #[serde(default)]
    pub t: BTreeMap<u32, Number>,
    #[serde(default)]
    pub tbar: BTreeMap<u32, Number>,
    #[serde(default)]
    pub seed: u64,
    pub count: usize,
}

impl SampleConfig {
    pub fn model(&self) -> Result<Model, CliError> {
        let w = || self.weights.clone().ok_or_else(|| CliError::Validation("model needs `weights`".into()));
        Ok(match self.model {
            ModelId::A => Model::A(
                self.pair_coefficients
                    .clone()
                    .ok_or_else(|| CliError::Validation("model A needs `pair_coefficients`".into()))?,
            ),
            ModelId::B => Model::B(w()?),
            ModelId::C => Model::C(w()?),
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub data: SeriesData,
    /// Mode window `L` of the fermionic representation.
    pub window: u32,
    #[serde(default)]
    pub times: DeformationTimes,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum KernelName {
    Sgn,
    Cayley,
}

/// One of `I₁…I₅` with its measure, deformation and quadrature.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    /// 1 to 5.
    pub id: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<ContourMeasure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bimeasure: Option<BiMeasure>,
    #[serde(default)]
    pub times: DeformationTimes,
    /// Second time pair, used by `I₅` only.
    #[serde(default)]
    pub times2: DeformationTimes,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelName>,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
}

impl EnsembleConfig {
    pub fn grand_spec(&self) -> Result<GrandSpec, CliError> {
        if self.quadrature.order < 2 || self.quadrature.panels == 0 {
            return Err(CliError::Validation("quadrature needs order ≥ 2 and panels ≥ 1".into()));
        }
        let measure = || self.measure.clone().ok_or_else(|| CliError::Validation("`measure` is required".into()));
        let id = match self.id {
            1 => IntegralId::I1,
            2 => IntegralId::I2,
            3 => IntegralId::I3,
            4 => IntegralId::I4,
            5 => {
                let bm = self
                    .bimeasure
                    .clone()
                    .ok_or_else(|| CliError::Validation("I5 needs `bimeasure`".into()))?;
                return Ok(GrandSpec::Bilinear { measure: bm, times1: self.times.clone(), times2: self.times2.clone() });
            }
            other => return Err(CliError::Validation(format!("integral id {other} is not in 1..=5"))),
        };
        let kernel = match (id, self.kernel) {
            (IntegralId::I3, None) => return Err(CliError::Validation("I3 needs `kernel`".into())),
            (_, Some(KernelName::Sgn)) => Some(Kernel::Sgn),
            (_, Some(KernelName::Cayley)) => Some(Kernel::Cayley),
            (_, None) => None,
        };
        Ok(GrandSpec::Single { id, measure: measure()?, times: self.times.clone(), kernel })
    }
}

fn default_tolerance() -> f64 {
    1e-8
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegralConfig {
    pub ensemble: EnsembleConfig,
    pub n: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrandzConfig {
    pub ensemble: EnsembleConfig,
    pub mu: f64,
    pub n_max: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected_with_a_path() {
        let err = parse::<SumConfig>(
            r#"{"data": {"series": "S0", "l": 2, "colour": 1}, "truncation": {"max_part": 2, "max_length": 2, "degree_cap": 3}}"#,
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("data"), "{msg}");
        assert!(msg.contains("colour"), "{msg}");
    }

    #[test]
    fn series_requires_its_data() {
        let cfg: SumConfig = parse(
            r#"{"data": {"series": "S3"}, "truncation": {"max_part": 2, "max_length": 2, "degree_cap": 3}}"#,
        )
        .unwrap();
        assert!(cfg.data.series().is_err());
    }

    #[test]
    fn ensemble_parses() {
        let cfg: IntegralConfig = parse(
            r#"{"ensemble": {"id": 2, "measure": {"contour": {"kind": "A"}, "density": {"type": "exponential", "rate": 1.0}}}, "n": 1}"#,
        )
        .unwrap();
        assert!(matches!(cfg.ensemble.grand_spec().unwrap(), GrandSpec::Single { id: IntegralId::I2, .. }));
        assert_eq!(cfg.tolerance, 1e-8);
    }
}
