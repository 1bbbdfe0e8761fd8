//! JSON scenario and flow files.

use std::fmt;
use std::path::Path;

use lanechoice::{
    Bpr, CommuterDemand, DelayModel, FlowDistribution, HeadwayRatio, OccupancyProfile, PerClass, PerDecision,
    Scenario, Toll,
};
use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub demands: Demands,
    pub occupancy: Occupancy,
    pub mu: f64,
    pub delays: [Delay; 2],
    pub toll: TollSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub misbehavior: Option<DecisionMap>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<String>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Demands {
    pub hv_lo: f64,
    pub hv_ho: f64,
    pub av_lo: f64,
    pub av_ho: f64,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Occupancy {
    pub n_lo: f64,
    pub n_ho: f64,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Delay {
    pub theta: f64,
    pub gamma: f64,
    pub beta: f64,
    pub capacity: f64,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionMap {
    pub hv_lo: f64,
    pub hv_ho: f64,
    pub av_lo: f64,
}

impl From<DecisionMap> for PerDecision<f64> {
    fn from(m: DecisionMap) -> Self {
        PerDecision::new(m.hv_lo, m.hv_ho, m.av_lo)
    }
}

/// A single toll for every class, or one per decision-making class.
#[derive(Clone, Copy, Debug, Serialize)]
#[serde(untagged)]
pub enum TollSpec {
    Uniform(f64),
    PerClass(DecisionMap),
}

// Hand-written so that a bad per-class map reports the offending key
// instead of a generic "no variant matched".
impl<'de> Deserialize<'de> for TollSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct TollVisitor;

        impl<'de> Visitor<'de> for TollVisitor {
            type Value = TollSpec;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or a map with keys hv_lo, hv_ho, av_lo")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<TollSpec, E> {
                Ok(TollSpec::Uniform(v))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<TollSpec, E> {
                Ok(TollSpec::Uniform(v as f64))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<TollSpec, E> {
                Ok(TollSpec::Uniform(v as f64))
            }

            fn visit_map<A: MapAccess<'de>>(self, map: A) -> Result<TollSpec, A::Error> {
                DecisionMap::deserialize(de::value::MapAccessDeserializer::new(map)).map(TollSpec::PerClass)
            }
        }

        deserializer.deserialize_any(TollVisitor)
    }
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn into_scenario(self) -> lanechoice::Result<Scenario> {
        let d = self.demands;
        let bpr = |x: &Delay| Bpr { theta: x.theta, gamma: x.gamma, beta: x.beta, capacity: x.capacity };
        let toll = match self.toll {
            TollSpec::Uniform(t) => Toll::Uniform(t),
            TollSpec::PerClass(m) => Toll::Differentiated(m.into()),
        };
        let scenario = Scenario::new(
            CommuterDemand::new(PerClass::new(d.hv_lo, d.hv_ho, d.av_lo, d.av_ho))?,
            OccupancyProfile::new(self.occupancy.n_lo, self.occupancy.n_ho)?,
            HeadwayRatio::new(self.mu)?,
            DelayModel::bpr(bpr(&self.delays[0]), bpr(&self.delays[1]))?,
            toll,
        )?;
        match self.misbehavior {
            Some(m) => scenario.with_misbehavior(m.into()),
            None => Ok(scenario),
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn schema_error(path: &Path, e: &serde_json::Error) -> CliError {
    CliError::Input(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column()))
}

pub fn load(path: &Path) -> Result<Scenario, CliError> {
    let file = ScenarioFile::parse(&read(path)?).map_err(|e| schema_error(path, &e))?;
    file.into_scenario().map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Flows to check from a flow file: either a bare flow distribution or a
/// `solve --json` report, whose `best`, `worst` and `flow` entries are used.
pub fn load_flows(path: &Path) -> Result<Vec<(String, FlowDistribution)>, CliError> {
    let value: serde_json::Value = serde_json::from_str(&read(path)?).map_err(|e| schema_error(path, &e))?;
    let parse = |v: &serde_json::Value| {
        FlowDistribution::deserialize(v).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    };
    if value.get("lane1").is_some() {
        return Ok(vec![("flow".into(), parse(&value)?)]);
    }
    let flows = ["best", "worst", "flow"]
        .into_iter()
        .filter_map(|k| value.get(k).map(|v| parse(v).map(|f| (k.to_string(), f))))
        .collect::<Result<Vec<_>, _>>()?;
    if flows.is_empty() {
        return Err(CliError::Input(format!("{}: no flow distribution found", path.display())));
    }
    Ok(flows)
}
