//! Scenario configuration: JSON in, validated [`ScenarioConfig`] out.
//!
//! Exact quantities (`tau`, `k`, probabilities, dyadic loads) are carried
//! as decimal strings. Adversaries, algorithms, load generators and trace
//! levels are either a bare name or an object with a `name` key and
//! parameters.

use num_bigint::BigInt;
use rand::Rng;
use serde::de::{DeserializeOwned, Deserializer, Error as _};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::AdversaryPolicy;
use crate::algorithms::budget::{
    deterministic_budget, gap_reduce_call_rounds, gapless_call_rounds, randomized_budget, smoothed_budget,
    DEFAULT_C1,
};
use crate::algorithms::continuous::decompose;
use crate::algorithms::psi_schedule;
use crate::dyadic::{Dyadic, ExactDecimal};
use crate::graph::{Graph, NodeId};
use crate::load::{total_load, LoadMode, LoadState};
use crate::metrics::CheckKind;
use crate::rng::{stream, Stream};
use crate::smoothing::DEFAULT_MAX_REJECTIONS;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("invalid JSON: {0}")]
    Syntax(String),
    #[error("{field}: {reason}")]
    Invalid { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field, reason: reason.into() }
}

/// Deserializes either `"name"` or `{"name": ..., params}` into `R`.
fn name_or_object<'de, D: Deserializer<'de>, R: DeserializeOwned>(d: D) -> Result<R, D::Error> {
    let v = serde_json::Value::deserialize(d)?;
    let v = match v {
        serde_json::Value::String(s) => serde_json::json!({ "name": s }),
        other => other,
    };
    serde_json::from_value(v).map_err(D::Error::custom)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum NamedGraph {
    Path,
    Star,
    Cycle,
    Complete,
}

/// Graph for the static adversary: a family name or an explicit edge list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphSpec {
    Named(NamedGraph),
    Edges(Vec<(NodeId, NodeId)>),
}

impl GraphSpec {
    pub fn build(&self, n: usize) -> Result<Graph, ConfigError> {
        let g = match self {
            GraphSpec::Named(NamedGraph::Path) => Graph::path(n),
            GraphSpec::Named(NamedGraph::Star) => Graph::star(n),
            GraphSpec::Named(NamedGraph::Cycle) => Graph::cycle(n),
            GraphSpec::Named(NamedGraph::Complete) => Graph::complete(n),
            GraphSpec::Edges(pairs) => {
                Graph::from_edges(n, pairs.iter().copied()).map_err(|e| invalid("adversary.graph", e.to_string()))?
            }
        };
        if !g.is_connected() {
            return Err(invalid("adversary.graph", "graph is not connected"));
        }
        Ok(g)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RawAdversary {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    graph: Option<GraphSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edge_probability: Option<ExactDecimal>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdversarySpec {
    Static(GraphSpec),
    ResortDescending,
    SortingLine,
    RandomConnected { edge_probability: ExactDecimal },
}

pub const DEFAULT_EDGE_PROBABILITY: &str = "0.1";

impl AdversarySpec {
    pub fn name(&self) -> &'static str {
        match self {
            AdversarySpec::Static(_) => "static",
            AdversarySpec::ResortDescending => "resortDescending",
            AdversarySpec::SortingLine => "sortingLine",
            AdversarySpec::RandomConnected { .. } => "randomConnected",
        }
    }

    pub fn policy(&self, n: usize) -> Result<AdversaryPolicy, ConfigError> {
        Ok(match self {
            AdversarySpec::Static(g) => AdversaryPolicy::Static(g.build(n)?),
            AdversarySpec::ResortDescending => AdversaryPolicy::ResortDescending,
            AdversarySpec::SortingLine => AdversaryPolicy::SortingLine,
            AdversarySpec::RandomConnected { edge_probability } => {
                AdversaryPolicy::RandomConnected { edge_probability: edge_probability.clone() }
            }
        })
    }

    fn to_raw(&self) -> RawAdversary {
        let mut raw = RawAdversary { name: self.name().to_string(), graph: None, edge_probability: None };
        match self {
            AdversarySpec::Static(g) => raw.graph = Some(g.clone()),
            AdversarySpec::RandomConnected { edge_probability } => raw.edge_probability = Some(edge_probability.clone()),
            _ => {}
        }
        raw
    }

    fn from_raw(raw: RawAdversary) -> Result<AdversarySpec, String> {
        let no_params = |raw: &RawAdversary| -> Result<(), String> {
            if raw.graph.is_some() || raw.edge_probability.is_some() {
                return Err(format!("adversary {} takes no parameters", raw.name));
            }
            Ok(())
        };
        match raw.name.as_str() {
            "static" => {
                if raw.edge_probability.is_some() {
                    return Err("static adversary takes only `graph`".into());
                }
                Ok(AdversarySpec::Static(raw.graph.unwrap_or(GraphSpec::Named(NamedGraph::Path))))
            }
            "resortDescending" => no_params(&raw).map(|_| AdversarySpec::ResortDescending),
            "sortingLine" => no_params(&raw).map(|_| AdversarySpec::SortingLine),
            "randomConnected" => {
                if raw.graph.is_some() {
                    return Err("randomConnected takes only `edgeProbability`".into());
                }
                let p = raw.edge_probability.unwrap_or_else(|| DEFAULT_EDGE_PROBABILITY.parse().expect("literal"));
                Ok(AdversarySpec::RandomConnected { edge_probability: p })
            }
            other => Err(format!("unknown adversary `{other}`")),
        }
    }
}

impl Serialize for AdversarySpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_raw().serialize(s)
    }
}

impl<'de> Deserialize<'de> for AdversarySpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw: RawAdversary = name_or_object(d)?;
        AdversarySpec::from_raw(raw).map_err(D::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum AlgorithmKind {
    Deterministic,
    RandMaxNeighbor,
    GapReduce,
    SmoothedBalance,
    GaplessGapReduce,
    GaplessBalance,
    ContinuousViaIntegral,
}

impl AlgorithmKind {
    pub fn name(self) -> &'static str {
        match self {
            AlgorithmKind::Deterministic => "deterministic",
            AlgorithmKind::RandMaxNeighbor => "randMaxNeighbor",
            AlgorithmKind::GapReduce => "gapReduce",
            AlgorithmKind::SmoothedBalance => "smoothedBalance",
            AlgorithmKind::GaplessGapReduce => "gaplessGapReduce",
            AlgorithmKind::GaplessBalance => "gaplessBalance",
            AlgorithmKind::ContinuousViaIntegral => "continuousViaIntegral",
        }
    }

    /// Protocols driven by the noise: their budgets divide by `c₁k`.
    pub fn is_smoothed(self) -> bool {
        !matches!(self, AlgorithmKind::Deterministic | AlgorithmKind::RandMaxNeighbor)
    }

    /// Each node takes part in at most one connection per round.
    pub fn is_matching_based(self) -> bool {
        self != AlgorithmKind::Deterministic
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AlgorithmSpec {
    pub name: AlgorithmKind,
    /// Hitting constant override for the smoothed budgets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<ExactDecimal>,
    /// Gap guess for a lone gapless call; defaults to the initial max gap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<u64>,
}

impl AlgorithmSpec {
    pub fn new(name: AlgorithmKind) -> AlgorithmSpec {
        AlgorithmSpec { name, c1: None, psi: None }
    }

    pub fn c1(&self) -> f64 {
        self.c1.as_ref().map(ExactDecimal::to_f64).unwrap_or(DEFAULT_C1)
    }
}

fn de_algorithm<'de, D: Deserializer<'de>>(d: D) -> Result<AlgorithmSpec, D::Error> {
    name_or_object(d)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum LoadGenerator {
    LineRamp,
    SingleSource,
    UniformRandom,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct GeneratorSpec {
    pub name: LoadGenerator,
    /// Load placed on node 0 by `singleSource`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total: Option<ExactDecimal>,
    /// Upper end of `uniformRandom` draws, inclusive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_value: Option<ExactDecimal>,
    /// Binary digits kept by continuous `uniformRandom` draws.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fraction_bits: Option<u32>,
}

pub const DEFAULT_FRACTION_BITS: u32 = 8;

/// A generator, or an explicit per-node list of decimal strings or integers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InitialLoads {
    Generator(GeneratorSpec),
    Explicit(Vec<Dyadic>),
}

impl Serialize for InitialLoads {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            InitialLoads::Generator(g) => g.serialize(s),
            InitialLoads::Explicit(v) => v.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for InitialLoads {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        match v {
            serde_json::Value::Array(items) => items
                .into_iter()
                .map(|item| match item {
                    serde_json::Value::String(s) => s.parse::<Dyadic>().map_err(D::Error::custom),
                    serde_json::Value::Number(num) => num
                        .as_u64()
                        .map(Dyadic::from)
                        .ok_or_else(|| D::Error::custom(format!("load {num} must be a non-negative integer or a decimal string"))),
                    other => Err(D::Error::custom(format!("load {other} must be a number or a string"))),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(InitialLoads::Explicit),
            serde_json::Value::String(s) => {
                serde_json::from_value(serde_json::json!({ "name": s })).map(InitialLoads::Generator).map_err(D::Error::custom)
            }
            other => serde_json::from_value(other).map(InitialLoads::Generator).map_err(D::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceLevel {
    Full,
    Sampled(u64),
    #[default]
    Summary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RawTrace {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stride: Option<u64>,
}

impl Serialize for TraceLevel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            TraceLevel::Full => s.serialize_str("full"),
            TraceLevel::Summary => s.serialize_str("summary"),
            TraceLevel::Sampled(stride) => RawTrace { name: "sampled".into(), stride: Some(*stride) }.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for TraceLevel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw: RawTrace = name_or_object(d)?;
        match (raw.name.as_str(), raw.stride) {
            ("full", None) => Ok(TraceLevel::Full),
            ("summary", None) => Ok(TraceLevel::Summary),
            ("sampled", Some(s)) if s >= 1 => Ok(TraceLevel::Sampled(s)),
            ("sampled", _) => Err(D::Error::custom("sampled trace level needs a stride >= 1")),
            (other, _) => Err(D::Error::custom(format!("unknown trace level `{other}`"))),
        }
    }
}

fn default_true() -> bool {
    true
}

fn default_trials() -> u64 {
    1
}

fn is_true(b: &bool) -> bool {
    *b
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n: usize,
    pub initial_loads: InitialLoads,
    pub mode: LoadMode,
    pub tau: ExactDecimal,
    pub k: ExactDecimal,
    pub adversary: AdversarySpec,
    #[serde(deserialize_with = "de_algorithm")]
    pub algorithm: AlgorithmSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub round_budget: Option<u64>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    pub seed: u64,
    #[serde(default)]
    pub checks: Vec<CheckKind>,
    #[serde(default)]
    pub trace_level: TraceLevel,
    #[serde(default = "default_true", skip_serializing_if = "is_true")]
    pub stop_on_converge: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rejections: Option<u32>,
    /// Evaluate checks every `checkStride` rounds only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check_stride: Option<u64>,
}

/// Parses and validates a JSON scenario.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn emit_config(cfg: &ScenarioConfig) -> String {
    serde_json::to_string_pretty(cfg).expect("config serializes")
}

impl ScenarioConfig {
    /// A minimal configuration; callers adjust fields and re-validate.
    pub fn new(
        n: usize,
        initial_loads: InitialLoads,
        mode: LoadMode,
        tau: &str,
        k: &str,
        adversary: AdversarySpec,
        algorithm: AlgorithmKind,
    ) -> ScenarioConfig {
        ScenarioConfig {
            n,
            initial_loads,
            mode,
            tau: tau.parse().expect("decimal tau"),
            k: k.parse().expect("decimal k"),
            adversary,
            algorithm: AlgorithmSpec::new(algorithm),
            round_budget: None,
            trials: 1,
            seed: 0,
            checks: Vec::new(),
            trace_level: TraceLevel::Summary,
            stop_on_converge: true,
            max_rejections: None,
            check_stride: None,
        }
    }

    pub fn tau_dyadic(&self) -> Dyadic {
        self.tau.to_dyadic().expect("validated dyadic tau")
    }

    pub fn max_rejections(&self) -> u32 {
        self.max_rejections.unwrap_or(DEFAULT_MAX_REJECTIONS)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n == 0 {
            return Err(invalid("n", "must be at least 1"));
        }
        if self.trials == 0 {
            return Err(invalid("trials", "must be at least 1"));
        }
        if self.tau.is_negative() {
            return Err(invalid("tau", "must be non-negative"));
        }
        if self.mode == LoadMode::Integral && !self.tau.is_integer() {
            return Err(invalid("tau", "integral mode requires integer tau"));
        }
        if self.tau.to_dyadic().is_none() {
            return Err(invalid("tau", "must be a dyadic rational (denominator a power of two)"));
        }
        if self.k.is_negative() {
            return Err(invalid("k", "must be non-negative"));
        }
        if self.max_rejections == Some(0) {
            return Err(invalid("maxRejections", "must be at least 1"));
        }
        if self.check_stride == Some(0) {
            return Err(invalid("checkStride", "must be at least 1"));
        }
        self.validate_loads()?;
        self.validate_adversary()?;
        self.validate_algorithm()?;
        for &c in &self.checks {
            if let Err(reason) = self.check_applies(c) {
                return Err(ConfigError::Invalid { field: "checks", reason: format!("{c}: {reason}") });
            }
        }
        if let InitialLoads::Explicit(_) = &self.initial_loads {
            let loads = self.initial_loads(self.seed)?;
            self.validate_generated(&loads)?;
        }
        Ok(())
    }

    fn validate_loads(&self) -> Result<(), ConfigError> {
        match &self.initial_loads {
            InitialLoads::Explicit(v) => {
                if v.len() != self.n {
                    return Err(invalid("initialLoads", format!("{} loads given for {} nodes", v.len(), self.n)));
                }
                if let Some(w) = v.iter().find(|w| w.is_negative()) {
                    return Err(invalid("initialLoads", format!("load {w} is negative")));
                }
                if self.mode == LoadMode::Integral {
                    if let Some(w) = v.iter().find(|w| !w.is_integer()) {
                        return Err(invalid("initialLoads", format!("integral mode requires integer loads, got {w}")));
                    }
                }
            }
            InitialLoads::Generator(g) => {
                let check_decimal = |field: &'static str, x: &Option<ExactDecimal>| -> Result<(), ConfigError> {
                    let Some(x) = x else {
                        return Err(invalid(field, format!("{:?} requires it", g.name)));
                    };
                    if x.is_negative() {
                        return Err(invalid(field, "must be non-negative"));
                    }
                    if self.mode == LoadMode::Integral && !x.is_integer() {
                        return Err(invalid(field, "integral mode requires an integer"));
                    }
                    if x.to_dyadic().is_none() {
                        return Err(invalid(field, "must be a dyadic rational"));
                    }
                    Ok(())
                };
                match g.name {
                    LoadGenerator::LineRamp => {
                        if g.total.is_some() || g.max_value.is_some() || g.fraction_bits.is_some() {
                            return Err(invalid("initialLoads", "lineRamp takes no parameters"));
                        }
                    }
                    LoadGenerator::SingleSource => {
                        check_decimal("initialLoads.total", &g.total)?;
                        if g.max_value.is_some() || g.fraction_bits.is_some() {
                            return Err(invalid("initialLoads", "singleSource takes only `total`"));
                        }
                    }
                    LoadGenerator::UniformRandom => {
                        check_decimal("initialLoads.maxValue", &g.max_value)?;
                        if g.total.is_some() {
                            return Err(invalid("initialLoads", "uniformRandom takes `maxValue` and `fractionBits`"));
                        }
                        if self.mode == LoadMode::Integral && g.fraction_bits.is_some() {
                            return Err(invalid("initialLoads.fractionBits", "only meaningful in continuous mode"));
                        }
                        if g.fraction_bits.is_some_and(|b| b > 64) {
                            return Err(invalid("initialLoads.fractionBits", "at most 64"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn validate_adversary(&self) -> Result<(), ConfigError> {
        match &self.adversary {
            AdversarySpec::Static(g) => {
                g.build(self.n)?;
            }
            AdversarySpec::RandomConnected { edge_probability }
                if edge_probability.is_negative() || edge_probability.cmp_dyadic(&Dyadic::from(1i64)).is_gt() =>
            {
                return Err(invalid("adversary.edgeProbability", "must lie in [0, 1]"));
            }
            _ => {}
        }
        Ok(())
    }

    fn validate_algorithm(&self) -> Result<(), ConfigError> {
        let kind = self.algorithm.name;
        let f = "algorithm";
        match kind {
            AlgorithmKind::Deterministic | AlgorithmKind::ContinuousViaIntegral => {
                if self.mode != LoadMode::Continuous {
                    return Err(invalid(f, format!("{} requires continuous mode", kind.name())));
                }
            }
            AlgorithmKind::RandMaxNeighbor => {}
            _ => {
                if self.mode != LoadMode::Integral {
                    return Err(invalid(f, format!("{} requires integral mode", kind.name())));
                }
            }
        }
        if kind.is_smoothed() && self.k.is_zero() {
            return Err(invalid("k", format!("{} requires k > 0", kind.name())));
        }
        if let Some(c1) = &self.algorithm.c1 {
            if !kind.is_smoothed() {
                return Err(invalid("algorithm.c1", format!("{} has no c1-dependent budget", kind.name())));
            }
            if c1.is_negative() || c1.is_zero() {
                return Err(invalid("algorithm.c1", "must be positive"));
            }
        }
        if let Some(psi) = self.algorithm.psi {
            if kind != AlgorithmKind::GaplessGapReduce {
                return Err(invalid("algorithm.psi", "only gaplessGapReduce takes psi"));
            }
            if psi < 2 {
                return Err(invalid("algorithm.psi", "must be at least 2"));
            }
        }
        let tau_zero = self.tau.is_zero();
        match kind {
            AlgorithmKind::SmoothedBalance | AlgorithmKind::GaplessBalance if tau_zero => {
                return Err(invalid("tau", format!("{} requires tau >= 1", kind.name())));
            }
            AlgorithmKind::ContinuousViaIntegral if tau_zero => {
                return Err(invalid("tau", "continuousViaIntegral requires tau > 0"));
            }
            AlgorithmKind::Deterministic | AlgorithmKind::RandMaxNeighbor if tau_zero && self.round_budget.is_none() => {
                return Err(invalid("roundBudget", "tau = 0 has no default budget; set roundBudget"));
            }
            _ => {}
        }
        Ok(())
    }

    /// Whether check `c` has a meaning in this scenario.
    pub fn check_applies(&self, c: CheckKind) -> Result<(), String> {
        let kind = self.algorithm.name;
        match c {
            CheckKind::Conservation | CheckKind::MatchingBudget | CheckKind::Integrality => Ok(()),
            CheckKind::PotentialDrop => {
                if kind == AlgorithmKind::Deterministic
                    || (kind == AlgorithmKind::RandMaxNeighbor && self.mode == LoadMode::Continuous)
                {
                    Ok(())
                } else {
                    Err("needs exact half-sum balancing (deterministic, or randMaxNeighbor in continuous mode)".into())
                }
            }
            CheckKind::CoveringEdge | CheckKind::ShiftLowerBound | CheckKind::SplitPotential => {
                if kind == AlgorithmKind::Deterministic {
                    Ok(())
                } else {
                    Err("only defined for the deterministic algorithm".into())
                }
            }
            CheckKind::PrefixMonotone => {
                if self.adversary != AdversarySpec::SortingLine {
                    Err("needs the sortingLine adversary".into())
                } else if !self.k.is_zero() {
                    Err("needs k = 0 so every round graph is the adversary's line".into())
                } else if self.mode != LoadMode::Integral || !kind.is_matching_based() {
                    Err("needs a matching-based integral algorithm".into())
                } else {
                    Ok(())
                }
            }
            CheckKind::StepSafety => match kind {
                AlgorithmKind::GapReduce | AlgorithmKind::SmoothedBalance => Ok(()),
                _ => Err("only defined for the GapReduce main loop".into()),
            },
            CheckKind::Flooding => match kind {
                AlgorithmKind::GapReduce | AlgorithmKind::SmoothedBalance | AlgorithmKind::ContinuousViaIntegral => Ok(()),
                _ => Err("only defined for protocols with a flooding phase".into()),
            },
        }
    }

    /// Checks on the generated loads that the schema cannot express.
    pub fn validate_generated(&self, loads: &LoadState) -> Result<(), ConfigError> {
        if self.checks.contains(&CheckKind::PrefixMonotone) {
            let mut sorted: Vec<&Dyadic> = loads.loads().iter().collect();
            sorted.sort();
            let one = Dyadic::from(1i64);
            if sorted.windows(2).any(|w| w[1] - w[0] > one) {
                return Err(invalid(
                    "checks",
                    "prefixMonotone: sorted initial loads must increase by at most 1 between neighbors",
                ));
            }
        }
        Ok(())
    }

    /// Initial loads of the trial with seed `seed`.
    pub fn initial_loads(&self, seed: u64) -> Result<LoadState, ConfigError> {
        let n = self.n;
        let loads: Vec<Dyadic> = match &self.initial_loads {
            InitialLoads::Explicit(v) => v.clone(),
            InitialLoads::Generator(g) => match g.name {
                LoadGenerator::LineRamp => (1..=n as u64).map(Dyadic::from).collect(),
                LoadGenerator::SingleSource => {
                    let total = g.total.as_ref().and_then(ExactDecimal::to_dyadic).ok_or_else(|| invalid("initialLoads.total", "missing"))?;
                    let mut v = vec![Dyadic::zero(); n];
                    v[0] = total;
                    v
                }
                LoadGenerator::UniformRandom => {
                    let max = g
                        .max_value
                        .as_ref()
                        .and_then(ExactDecimal::to_dyadic)
                        .ok_or_else(|| invalid("initialLoads.maxValue", "missing"))?;
                    let bits = match self.mode {
                        LoadMode::Integral => 0,
                        LoadMode::Continuous => g.fraction_bits.unwrap_or(DEFAULT_FRACTION_BITS),
                    };
                    // Uniform over multiples of 2^-bits in [0, max].
                    let steps = max.shl(bits).floor();
                    let steps = u128::try_from(steps).map_err(|_| invalid("initialLoads.maxValue", "too large"))?;
                    let mut rng = stream(seed, Stream::InitialLoads);
                    (0..n).map(|_| Dyadic::new(BigInt::from(rng.random_range(0..=steps)), bits)).collect()
                }
            },
        };
        LoadState::new(self.mode, loads).map_err(|e| invalid("initialLoads", e.to_string()))
    }

    /// The round budget: `roundBudget` if set, else the algorithm's own.
    pub fn budget_for(&self, loads: &LoadState) -> u64 {
        if let Some(b) = self.round_budget {
            return b;
        }
        let n = self.n;
        let total = total_load(loads);
        let tau = self.tau_dyadic();
        let c1 = self.algorithm.c1();
        let k = self.k.to_f64();
        match self.algorithm.name {
            AlgorithmKind::Deterministic => deterministic_budget(n, &total, &tau),
            AlgorithmKind::RandMaxNeighbor => randomized_budget(n, &total, &tau),
            AlgorithmKind::GapReduce => gap_reduce_call_rounds(n, &total, c1, k),
            AlgorithmKind::SmoothedBalance => smoothed_budget(n, &total, &tau, c1, k),
            AlgorithmKind::GaplessGapReduce => gapless_call_rounds(n, &total, c1, k),
            AlgorithmKind::GaplessBalance => {
                let total_int = total.floor();
                let calls = psi_schedule(&total_int, &tau.floor()).len() as u64;
                calls.saturating_mul(gapless_call_rounds(n, &total, c1, k))
            }
            AlgorithmKind::ContinuousViaIntegral => {
                let (units, _) = decompose(loads.loads(), &tau.half());
                let t = Dyadic::from(units.iter().sum::<BigInt>());
                smoothed_budget(n, &t, &Dyadic::from(1i64), c1, k)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"n":4,"initialLoads":"lineRamp","mode":"integral","tau":"1","k":"0",
        "adversary":"sortingLine","algorithm":"randMaxNeighbor","trials":1,"seed":7}"#;

    #[test]
    fn minimal_parses() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.n, 4);
        assert_eq!(cfg.adversary, AdversarySpec::SortingLine);
        assert_eq!(cfg.algorithm.name, AlgorithmKind::RandMaxNeighbor);
        assert!(cfg.stop_on_converge);
        assert_eq!(cfg.initial_loads(7).unwrap(), LoadState::integral([1, 2, 3, 4]));
    }

    #[test]
    fn integral_mode_rejects_fractional_tau() {
        let text = MINIMAL.replace(r#""tau":"1""#, r#""tau":"0.5""#);
        let err = parse_config(&text).unwrap_err();
        assert_eq!(err.to_string(), "tau: integral mode requires integer tau");
    }

    #[test]
    fn quarter_noise_is_exact() {
        let text = MINIMAL.replace(r#""k":"0""#, r#""k":"0.25""#);
        let cfg = parse_config(&text).unwrap();
        assert_eq!(cfg.k.fraction(), (BigInt::from(25), BigInt::from(100)));
        assert_eq!(cfg.k.to_dyadic(), Some(Dyadic::new(1, 2)));
    }

    #[test]
    fn unknown_fields_and_names_rejected() {
        let text = MINIMAL.replace(r#""seed":7"#, r#""seed":7,"colour":"red""#);
        assert!(matches!(parse_config(&text), Err(ConfigError::Syntax(_))));
        let text = MINIMAL.replace("sortingLine", "zigzag");
        assert!(parse_config(&text).unwrap_err().to_string().contains("unknown adversary"));
        let text = MINIMAL.replace("randMaxNeighbor", "magic");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn inapplicable_check_rejected() {
        let text = MINIMAL.replace(r#""seed":7"#, r#""seed":7,"checks":["coveringEdge"]"#);
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.starts_with("checks: coveringEdge"), "{err}");
        let text = MINIMAL.replace(r#""seed":7"#, r#""seed":7,"checks":["prefixMonotone","conservation"]"#);
        assert!(parse_config(&text).is_ok());
    }

    #[test]
    fn tau_zero_needs_budget() {
        let text = r#"{"n":2,"initialLoads":["4","0"],"mode":"continuous","tau":"0","k":"0",
            "adversary":{"name":"static","graph":"path"},"algorithm":"deterministic","seed":1}"#;
        assert!(parse_config(text).unwrap_err().to_string().starts_with("roundBudget"));
        let with_budget = text.replace(r#""seed":1"#, r#""seed":1,"roundBudget":5"#);
        assert!(parse_config(&with_budget).is_ok());
    }

    #[test]
    fn non_dyadic_tau_rejected() {
        let text = r#"{"n":2,"initialLoads":["4","0"],"mode":"continuous","tau":"0.1","k":"0",
            "adversary":"resortDescending","algorithm":"deterministic","seed":1}"#;
        assert!(parse_config(text).unwrap_err().to_string().contains("dyadic"));
    }

    #[test]
    fn round_trip() {
        let text = r#"{"n":5,"initialLoads":{"name":"uniformRandom","maxValue":"3.5","fractionBits":4},
            "mode":"continuous","tau":"0.25","k":"1","adversary":{"name":"randomConnected","edgeProbability":"0.3"},
            "algorithm":{"name":"continuousViaIntegral","c1":"1.5"},"trials":3,"seed":11,
            "checks":["conservation","flooding"],"traceLevel":{"name":"sampled","stride":10},
            "stopOnConverge":false,"maxRejections":50,"checkStride":2}"#;
        let cfg = parse_config(text).unwrap();
        let again = parse_config(&emit_config(&cfg)).unwrap();
        assert_eq!(cfg, again);
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(parse_config(&emit_config(&cfg)).unwrap(), cfg);
    }

    #[test]
    fn generators() {
        let mut cfg = parse_config(MINIMAL).unwrap();
        cfg.initial_loads = InitialLoads::Generator(GeneratorSpec {
            name: LoadGenerator::SingleSource,
            total: Some("64".parse().unwrap()),
            max_value: None,
            fraction_bits: None,
        });
        cfg.checks.clear();
        assert_eq!(cfg.initial_loads(0).unwrap(), LoadState::integral([64, 0, 0, 0]));
        cfg.initial_loads = InitialLoads::Generator(GeneratorSpec {
            name: LoadGenerator::UniformRandom,
            total: None,
            max_value: Some("9".parse().unwrap()),
            fraction_bits: None,
        });
        let a = cfg.initial_loads(3).unwrap();
        assert_eq!(a, cfg.initial_loads(3).unwrap());
        assert!(a.loads().iter().all(|w| w.is_integer() && *w <= Dyadic::from(9i64)));
    }
}
