//! Domain types for a two-lane tolled freeway segment and the elementary
//! quantities everything else is built from: vehicle and effective demands,
//! mobility degrees, effective lane flows, lane costs and total commuter delay.
//!
//! Lane 1 is the tolled lane. Autonomous high-occupancy vehicles always ride
//! it for free; the three remaining classes choose between paying the lane-1
//! toll and using lane 2. Units: minutes for delay and tolls (value of time is
//! one), vehicles per minute for flows, commuters per minute for demands.

use std::fmt;
use std::ops::{Index, IndexMut};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of points used when checking a delay function for strict monotonicity.
const MONOTONICITY_SAMPLES: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VehicleClass {
    #[serde(rename = "HV_LO")]
    HvLo,
    #[serde(rename = "HV_HO")]
    HvHo,
    #[serde(rename = "AV_LO")]
    AvLo,
    #[serde(rename = "AV_HO")]
    AvHo,
}

impl VehicleClass {
    pub const ALL: [VehicleClass; 4] = [Self::HvLo, Self::HvHo, Self::AvLo, Self::AvHo];

    /// The classes that choose a lane, in the fixed tie-breaking order.
    pub const DECISION: [VehicleClass; 3] = [Self::HvLo, Self::HvHo, Self::AvLo];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_decision(self) -> bool {
        self != Self::AvHo
    }

    pub fn is_autonomous(self) -> bool {
        matches!(self, Self::AvLo | Self::AvHo)
    }

    pub fn is_high_occupancy(self) -> bool {
        matches!(self, Self::HvHo | Self::AvHo)
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::HvLo => "HV_LO",
            Self::HvHo => "HV_HO",
            Self::AvLo => "AV_LO",
            Self::AvHo => "AV_HO",
        }
    }

    /// Parses `HV_LO`, `hv_lo`, `hv-lo` and similar spellings.
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().replace(['-', ','], "_").as_str() {
            "HV_LO" => Some(Self::HvLo),
            "HV_HO" => Some(Self::HvHo),
            "AV_LO" => Some(Self::AvLo),
            "AV_HO" => Some(Self::AvHo),
            _ => None,
        }
    }
}

impl fmt::Display for VehicleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A value for each of the four vehicle classes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PerClass<T> {
    pub hv_lo: T,
    pub hv_ho: T,
    pub av_lo: T,
    pub av_ho: T,
}

impl<T> PerClass<T> {
    pub fn new(hv_lo: T, hv_ho: T, av_lo: T, av_ho: T) -> Self {
        Self { hv_lo, hv_ho, av_lo, av_ho }
    }

    pub fn from_fn(mut f: impl FnMut(VehicleClass) -> T) -> Self {
        Self {
            hv_lo: f(VehicleClass::HvLo),
            hv_ho: f(VehicleClass::HvHo),
            av_lo: f(VehicleClass::AvLo),
            av_ho: f(VehicleClass::AvHo),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (VehicleClass, &T)> {
        VehicleClass::ALL.into_iter().map(move |p| (p, &self[p]))
    }
}

impl<T> Index<VehicleClass> for PerClass<T> {
    type Output = T;

    fn index(&self, p: VehicleClass) -> &T {
        match p {
            VehicleClass::HvLo => &self.hv_lo,
            VehicleClass::HvHo => &self.hv_ho,
            VehicleClass::AvLo => &self.av_lo,
            VehicleClass::AvHo => &self.av_ho,
        }
    }
}

impl<T> IndexMut<VehicleClass> for PerClass<T> {
    fn index_mut(&mut self, p: VehicleClass) -> &mut T {
        match p {
            VehicleClass::HvLo => &mut self.hv_lo,
            VehicleClass::HvHo => &mut self.hv_ho,
            VehicleClass::AvLo => &mut self.av_lo,
            VehicleClass::AvHo => &mut self.av_ho,
        }
    }
}

/// A value for each decision-making class. Indexing with `AvHo` panics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PerDecision<T> {
    pub hv_lo: T,
    pub hv_ho: T,
    pub av_lo: T,
}

impl<T> PerDecision<T> {
    pub fn new(hv_lo: T, hv_ho: T, av_lo: T) -> Self {
        Self { hv_lo, hv_ho, av_lo }
    }

    pub fn from_fn(mut f: impl FnMut(VehicleClass) -> T) -> Self {
        Self {
            hv_lo: f(VehicleClass::HvLo),
            hv_ho: f(VehicleClass::HvHo),
            av_lo: f(VehicleClass::AvLo),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (VehicleClass, &T)> {
        VehicleClass::DECISION.into_iter().map(move |p| (p, &self[p]))
    }
}

impl<T: Copy> PerDecision<T> {
    pub fn splat(v: T) -> Self {
        Self { hv_lo: v, hv_ho: v, av_lo: v }
    }
}

impl<T> Index<VehicleClass> for PerDecision<T> {
    type Output = T;

    fn index(&self, p: VehicleClass) -> &T {
        match p {
            VehicleClass::HvLo => &self.hv_lo,
            VehicleClass::HvHo => &self.hv_ho,
            VehicleClass::AvLo => &self.av_lo,
            VehicleClass::AvHo => panic!("AV_HO is not a decision-making class"),
        }
    }
}

impl<T> IndexMut<VehicleClass> for PerDecision<T> {
    fn index_mut(&mut self, p: VehicleClass) -> &mut T {
        match p {
            VehicleClass::HvLo => &mut self.hv_lo,
            VehicleClass::HvHo => &mut self.hv_ho,
            VehicleClass::AvLo => &mut self.av_lo,
            VehicleClass::AvHo => panic!("AV_HO is not a decision-making class"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupancyProfile {
    n_lo: f64,
    n_ho: f64,
}

impl OccupancyProfile {
    pub fn new(n_lo: f64, n_ho: f64) -> Result<Self> {
        if !n_lo.is_finite() || n_lo <= 0.0 {
            return Err(Error::invalid("occupancy.n_lo", format!("must be finite and > 0, got {n_lo}")));
        }
        if !n_ho.is_finite() || n_ho < 2.0 {
            return Err(Error::invalid("occupancy.n_ho", format!("must be finite and >= 2, got {n_ho}")));
        }
        if n_ho <= n_lo {
            return Err(Error::invalid(
                "occupancy.n_ho",
                format!("must exceed n_lo ({n_lo}), got {n_ho}"),
            ));
        }
        Ok(Self { n_lo, n_ho })
    }

    pub fn n_lo(&self) -> f64 {
        self.n_lo
    }

    pub fn n_ho(&self) -> f64 {
        self.n_ho
    }

    /// Commuters per vehicle of class `p`.
    pub fn of(&self, p: VehicleClass) -> f64 {
        if p.is_high_occupancy() {
            self.n_ho
        } else {
            self.n_lo
        }
    }
}

/// Ratio of autonomous to human-driven headway, strictly inside (0, 1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HeadwayRatio(f64);

impl HeadwayRatio {
    pub fn new(mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu < 1.0) {
            return Err(Error::invalid("mu", format!("must lie strictly between 0 and 1, got {mu}")));
        }
        Ok(Self(mu))
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// Effective-flow weight of one vehicle of class `p`.
    pub fn weight(self, p: VehicleClass) -> f64 {
        if p.is_autonomous() {
            self.0
        } else {
            1.0
        }
    }
}

/// Commuters per minute for each class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CommuterDemand(PerClass<f64>);

impl CommuterDemand {
    pub fn new(d: PerClass<f64>) -> Result<Self> {
        for (p, &v) in d.iter() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(
                    format!("demands.{}", p.label().to_ascii_lowercase()),
                    format!("must be finite and >= 0, got {v}"),
                ));
            }
        }
        if d.iter().all(|(_, &v)| v == 0.0) {
            return Err(Error::invalid("demands", "at least one class needs positive demand"));
        }
        Ok(Self(d))
    }

    pub fn get(&self) -> &PerClass<f64> {
        &self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().map(|(_, v)| v).sum()
    }
}

impl Index<VehicleClass> for CommuterDemand {
    type Output = f64;

    fn index(&self, p: VehicleClass) -> &f64 {
        &self.0[p]
    }
}

/// Lane delay as a function of effective flow. Implementations must be
/// continuous and strictly increasing on the feasible flow range.
pub trait LaneDelay: fmt::Debug + Send + Sync {
    fn delay(&self, flow: f64) -> f64;
}

/// Bureau of Public Roads volume-delay function
/// `theta + gamma * (flow / capacity)^beta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bpr {
    pub theta: f64,
    pub gamma: f64,
    pub beta: f64,
    pub capacity: f64,
}

impl Bpr {
    pub fn new(theta: f64, gamma: f64, beta: f64, capacity: f64) -> Result<Self> {
        Self { theta, gamma, beta, capacity }.validated("delays")
    }

    pub(crate) fn validated(self, field: &str) -> Result<Self> {
        let Self { theta, gamma, beta, capacity } = self;
        if !theta.is_finite() || theta < 0.0 {
            return Err(Error::invalid(format!("{field}.theta"), format!("must be finite and >= 0, got {theta}")));
        }
        if !gamma.is_finite() || gamma <= 0.0 {
            return Err(Error::invalid(
                format!("{field}.gamma"),
                format!("must be finite and > 0 (constant delay makes the equilibrium root non-unique), got {gamma}"),
            ));
        }
        if !beta.is_finite() || beta <= 0.0 {
            return Err(Error::invalid(format!("{field}.beta"), format!("must be finite and > 0, got {beta}")));
        }
        if !capacity.is_finite() || capacity <= 0.0 {
            return Err(Error::invalid(format!("{field}.capacity"), format!("must be finite and > 0, got {capacity}")));
        }
        Ok(self)
    }
}

impl LaneDelay for Bpr {
    fn delay(&self, flow: f64) -> f64 {
        let ratio = flow.max(0.0) / self.capacity;
        let load = if self.beta == 1.0 { ratio } else { ratio.powf(self.beta) };
        self.theta + self.gamma * load
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Lane {
    Lane1,
    Lane2,
}

/// The delay functions of both lanes.
#[derive(Clone, Debug)]
pub struct DelayModel {
    lanes: [Arc<dyn LaneDelay>; 2],
    bpr: Option<[Bpr; 2]>,
}

impl DelayModel {
    pub fn bpr(lane1: Bpr, lane2: Bpr) -> Result<Self> {
        let lane1 = lane1.validated("delays[0]")?;
        let lane2 = lane2.validated("delays[1]")?;
        Ok(Self { lanes: [Arc::new(lane1), Arc::new(lane2)], bpr: Some([lane1, lane2]) })
    }

    /// Arbitrary delay functions. Monotonicity is checked when the model is
    /// attached to a [`Scenario`].
    pub fn custom(lane1: Arc<dyn LaneDelay>, lane2: Arc<dyn LaneDelay>) -> Self {
        Self { lanes: [lane1, lane2], bpr: None }
    }

    pub fn delay(&self, lane: Lane, flow: f64) -> f64 {
        match lane {
            Lane::Lane1 => self.lanes[0].delay(flow),
            Lane::Lane2 => self.lanes[1].delay(flow),
        }
    }

    pub fn lane1(&self, flow: f64) -> f64 {
        self.lanes[0].delay(flow)
    }

    pub fn lane2(&self, flow: f64) -> f64 {
        self.lanes[1].delay(flow)
    }

    /// BPR parameters when the model was built from them.
    pub fn bpr_parameters(&self) -> Option<[Bpr; 2]> {
        self.bpr
    }

    /// Checks both lanes for strict increase on a uniform grid over
    /// `[0, upper]`. BPR lanes pass by construction: with `gamma > 0` and
    /// `beta > 0` they increase strictly, even where rounding flattens them
    /// near zero flow.
    pub fn check_monotone(&self, upper: f64) -> Result<()> {
        if self.bpr.is_some() {
            return Ok(());
        }
        let upper = if upper > 0.0 { upper } else { 1.0 };
        for (i, lane) in self.lanes.iter().enumerate() {
            let mut prev = lane.delay(0.0);
            if !prev.is_finite() {
                return Err(Error::invalid(format!("delays[{i}]"), "delay at zero flow is not finite"));
            }
            for k in 1..=MONOTONICITY_SAMPLES {
                let x = upper * k as f64 / MONOTONICITY_SAMPLES as f64;
                let v = lane.delay(x);
                if !v.is_finite() || v <= prev {
                    return Err(Error::invalid(
                        format!("delays[{i}]"),
                        format!("delay must be strictly increasing; fails near flow {x}"),
                    ));
                }
                prev = v;
            }
        }
        Ok(())
    }
}

/// Tolls paid per decision-making class on lane 1, in delay units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Toll {
    Uniform(f64),
    Differentiated(PerDecision<f64>),
}

impl Toll {
    pub fn per_class(&self) -> PerDecision<f64> {
        match *self {
            Toll::Uniform(t) => PerDecision::splat(t),
            Toll::Differentiated(t) => t,
        }
    }

    pub fn uniform(&self) -> Option<f64> {
        match *self {
            Toll::Uniform(t) => Some(t),
            Toll::Differentiated(_) => None,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Toll::Uniform(t) => {
                if !t.is_finite() || t < 0.0 {
                    return Err(Error::invalid("toll", format!("uniform toll must be finite and >= 0, got {t}")));
                }
            }
            Toll::Differentiated(t) => {
                for (p, &v) in t.iter() {
                    if !v.is_finite() || v <= 0.0 {
                        return Err(Error::invalid(
                            format!("toll.{}", p.label().to_ascii_lowercase()),
                            format!("differentiated tolls must be finite and > 0, got {v}"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Vehicle demand, effective demand and mobility degree per class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveQuantities {
    pub vehicle_demand: PerClass<f64>,
    pub effective_demand: PerClass<f64>,
    pub mobility: PerClass<f64>,
}

impl EffectiveQuantities {
    pub fn total_effective(&self) -> f64 {
        self.effective_demand.iter().map(|(_, v)| v).sum()
    }
}

pub fn effective_quantities(
    demand: &CommuterDemand,
    occupancy: &OccupancyProfile,
    headway: HeadwayRatio,
) -> EffectiveQuantities {
    let vehicle_demand = PerClass::from_fn(|p| demand[p] / occupancy.of(p));
    let effective_demand = PerClass::from_fn(|p| headway.weight(p) * vehicle_demand[p]);
    // closed forms, so classes without demand still rank
    let mobility = PerClass::from_fn(|p| occupancy.of(p) / headway.weight(p));
    EffectiveQuantities { vehicle_demand, effective_demand, mobility }
}

/// Per-lane flows of the decision-making classes, in vehicles per minute.
/// With misbehavior these are the honest vehicles only.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowDistribution {
    pub lane1: PerDecision<f64>,
    pub lane2: PerDecision<f64>,
}

impl FlowDistribution {
    /// Builds the distribution from lane-1 flows and the honest vehicle demands.
    pub fn from_lane1(lane1: PerDecision<f64>, honest_demand: &PerDecision<f64>) -> Self {
        let lane2 = PerDecision::from_fn(|p| (honest_demand[p] - lane1[p]).max(0.0));
        Self { lane1, lane2 }
    }

    pub fn on(&self, lane: Lane) -> &PerDecision<f64> {
        match lane {
            Lane::Lane1 => &self.lane1,
            Lane::Lane2 => &self.lane2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Scenario {
    demand: CommuterDemand,
    occupancy: OccupancyProfile,
    headway: HeadwayRatio,
    delays: DelayModel,
    toll: Toll,
    misbehavior: PerDecision<f64>,
    effective: EffectiveQuantities,
}

impl Scenario {
    pub fn new(
        demand: CommuterDemand,
        occupancy: OccupancyProfile,
        headway: HeadwayRatio,
        delays: DelayModel,
        toll: Toll,
    ) -> Result<Self> {
        toll.validate()?;
        let effective = effective_quantities(&demand, &occupancy, headway);
        delays.check_monotone(effective.total_effective())?;
        Ok(Self {
            demand,
            occupancy,
            headway,
            delays,
            toll,
            misbehavior: PerDecision::splat(0.0),
            effective,
        })
    }

    pub fn with_toll(&self, toll: Toll) -> Result<Self> {
        toll.validate()?;
        Ok(Self { toll, ..self.clone() })
    }

    pub fn with_misbehavior(&self, alpha: PerDecision<f64>) -> Result<Self> {
        for (p, &a) in alpha.iter() {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::invalid(
                    format!("misbehavior.{}", p.label().to_ascii_lowercase()),
                    format!("proportion must lie in [0, 1], got {a}"),
                ));
            }
        }
        Ok(Self { misbehavior: alpha, ..self.clone() })
    }

    pub fn with_demand(&self, demand: CommuterDemand, occupancy: OccupancyProfile) -> Result<Self> {
        Scenario::new(demand, occupancy, self.headway, self.delays.clone(), self.toll)
            .and_then(|s| s.with_misbehavior(self.misbehavior))
    }

    pub fn demand(&self) -> &CommuterDemand {
        &self.demand
    }

    pub fn occupancy(&self) -> &OccupancyProfile {
        &self.occupancy
    }

    pub fn headway(&self) -> HeadwayRatio {
        self.headway
    }

    pub fn delays(&self) -> &DelayModel {
        &self.delays
    }

    pub fn toll(&self) -> &Toll {
        &self.toll
    }

    pub fn misbehavior(&self) -> &PerDecision<f64> {
        &self.misbehavior
    }

    pub fn effective(&self) -> &EffectiveQuantities {
        &self.effective
    }

    pub fn total_effective(&self) -> f64 {
        self.effective.total_effective()
    }

    /// Vehicle demand of class `p` that chooses its lane honestly.
    pub fn honest_vehicle_demand(&self) -> PerDecision<f64> {
        PerDecision::from_fn(|p| self.effective.vehicle_demand[p] * (1.0 - self.misbehavior[p]))
    }

    pub fn honest_effective_demand(&self) -> PerDecision<f64> {
        PerDecision::from_fn(|p| self.effective.effective_demand[p] * (1.0 - self.misbehavior[p]))
    }

    /// Effective flow that sits on lane 1 regardless of lane choice: all
    /// AV_HO vehicles plus every misbehaving vehicle.
    pub fn fixed_lane1_load(&self) -> f64 {
        let eff = &self.effective.effective_demand;
        eff.av_ho
            + VehicleClass::DECISION
                .iter()
                .map(|&p| eff[p] * self.misbehavior[p])
                .sum::<f64>()
    }
}

/// Effective flows `(phi_1, phi_2)` of a flow distribution of honest vehicles.
pub fn effective_flows(
    flow: &FlowDistribution,
    eq: &EffectiveQuantities,
    headway: HeadwayRatio,
    misbehavior: &PerDecision<f64>,
) -> (f64, f64) {
    let mut phi1 = eq.effective_demand.av_ho;
    let mut phi2 = 0.0;
    for p in VehicleClass::DECISION {
        let w = headway.weight(p);
        phi1 += w * flow.lane1[p] + eq.effective_demand[p] * misbehavior[p];
        phi2 += w * flow.lane2[p];
    }
    (phi1, phi2)
}

/// Lane costs `(C1 per class, C2)` at the given effective flows.
pub fn lane_costs(phi1: f64, phi2: f64, tolls: &PerDecision<f64>, delays: &DelayModel) -> (PerDecision<f64>, f64) {
    let d1 = delays.lane1(phi1);
    (PerDecision::from_fn(|p| d1 + tolls[p]), delays.lane2(phi2))
}

/// Commuters per minute on each lane, counting misbehaving vehicles and
/// AV_HO vehicles on lane 1.
pub fn lane_commuters(flow: &FlowDistribution, scenario: &Scenario) -> (f64, f64) {
    let occ = scenario.occupancy();
    let vd = &scenario.effective().vehicle_demand;
    let alpha = scenario.misbehavior();
    let mut lane1 = scenario.demand()[VehicleClass::AvHo];
    let mut lane2 = 0.0;
    for p in VehicleClass::DECISION {
        lane1 += occ.of(p) * (flow.lane1[p] + vd[p] * alpha[p]);
        lane2 += occ.of(p) * flow.lane2[p];
    }
    (lane1, lane2)
}

/// Total delay experienced by all commuters, in commuter-minutes per minute.
pub fn total_commuter_delay(flow: &FlowDistribution, scenario: &Scenario) -> f64 {
    let (phi1, phi2) = effective_flows(flow, scenario.effective(), scenario.headway(), scenario.misbehavior());
    let (c1, c2) = lane_commuters(flow, scenario);
    c1 * scenario.delays().lane1(phi1) + c2 * scenario.delays().lane2(phi2)
}
