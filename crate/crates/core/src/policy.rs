//! Operator A1 policies: slice weights, priorities and target KPIs.
//!
//! The document format is JSON with a top-level `network_slices` array. Each
//! slice carries `slice_name`, `weight` (or `priority`) and optionally
//! `target_kpis` holding `outage_kpis` / `soft_kpis` maps of predicate strings
//! such as `"bandwidth_mbps per slice < 10mbps"`. The outage map also carries
//! `"reliability_percent": "99.999%"`.
//!
//! Only throughput, buffer occupancy and dropped bytes can be evaluated against
//! the simulator telemetry. Latency, packet loss and jitter predicates are
//! recognised and kept verbatim in [`SlicePolicy::ignored_kpis`]; any other
//! metric name is rejected.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::UeId;

/// Tolerance on the sum of slice weights.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Throughput,
    BufferOccupancy,
    DroppedBytes,
}

impl Metric {
    pub fn unit(self) -> Unit {
        match self {
            Metric::Throughput => Unit::BitPerSecond,
            Metric::BufferOccupancy => Unit::Fraction,
            Metric::DroppedBytes => Unit::BytesPerFrame,
        }
    }

    fn canonical_name(self) -> &'static str {
        match self {
            Metric::Throughput => "throughput",
            Metric::BufferOccupancy => "buffer_occupancy",
            Metric::DroppedBytes => "dropped_bytes",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    PerUe,
    PerSlice,
}

impl Scope {
    fn label(self) -> &'static str {
        match self {
            Scope::PerUe => "per_ue",
            Scope::PerSlice => "per_slice",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparator {
    BelowIsViolation,
    AboveIsViolation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    #[serde(rename = "bit/s")]
    BitPerSecond,
    Fraction,
    #[serde(rename = "bytes/frame")]
    BytesPerFrame,
}

/// A single target KPI: the condition under which a UE or slice is in violation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPredicate", into = "RawPredicate")]
pub struct KpiPredicate {
    metric: Metric,
    scope: Scope,
    comparator: Comparator,
    threshold: f64,
}

#[derive(Serialize, Deserialize)]
struct RawPredicate {
    metric: Metric,
    scope: Scope,
    comparator: Comparator,
    threshold: f64,
    unit: Unit,
}

impl TryFrom<RawPredicate> for KpiPredicate {
    type Error = Error;

    fn try_from(raw: RawPredicate) -> Result<Self> {
        if raw.unit != raw.metric.unit() {
            return Err(Error::validation(format!(
                "unit {:?} is not valid for metric {:?}",
                raw.unit, raw.metric
            )));
        }
        KpiPredicate::new(raw.metric, raw.scope, raw.comparator, raw.threshold)
    }
}

impl From<KpiPredicate> for RawPredicate {
    fn from(p: KpiPredicate) -> Self {
        RawPredicate {
            metric: p.metric,
            scope: p.scope,
            comparator: p.comparator,
            threshold: p.threshold,
            unit: p.unit(),
        }
    }
}

impl std::fmt::Display for KpiPredicate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let op = match self.comparator {
            Comparator::BelowIsViolation => "<",
            Comparator::AboveIsViolation => ">",
        };
        let scope = match self.scope {
            Scope::PerUe => "per UE",
            Scope::PerSlice => "per slice",
        };
        let value = match self.metric {
            Metric::Throughput => format!("{}mbps", self.threshold / 1e6),
            Metric::BufferOccupancy => format!("{}%", self.threshold * 100.0),
            Metric::DroppedBytes => format!("{}B", self.threshold),
        };
        write!(f, "{} {scope} {op} {value}", self.metric.canonical_name())
    }
}

impl KpiPredicate {
    pub fn new(metric: Metric, scope: Scope, comparator: Comparator, threshold: f64) -> Result<Self> {
        if !threshold.is_finite() || threshold <= 0.0 {
            return Err(Error::validation(format!(
                "KPI threshold must be a positive finite number, got {threshold}"
            )));
        }
        if metric == Metric::BufferOccupancy && threshold > 1.0 {
            return Err(Error::validation(format!(
                "buffer occupancy threshold is a fraction of capacity, got {threshold}"
            )));
        }
        Ok(KpiPredicate {
            metric,
            scope,
            comparator,
            threshold,
        })
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn scope(&self) -> Scope {
        self.scope
    }

    pub fn comparator(&self) -> Comparator {
        self.comparator
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn unit(&self) -> Unit {
        self.metric.unit()
    }

    /// Whether `value` violates the predicate.
    ///
    /// For lower bounds an optional `demand` caps the threshold: a UE or slice
    /// that asks for less than the guaranteed rate is judged against what it
    /// asked for.
    pub fn is_violated(&self, value: f64, demand: Option<f64>) -> bool {
        match self.comparator {
            Comparator::AboveIsViolation => value > self.threshold,
            Comparator::BelowIsViolation => {
                let bound = demand.map_or(self.threshold, |d| self.threshold.min(d));
                value < bound
            }
        }
    }

    /// Canonical predicate string; parses back to an identical predicate.
    pub fn to_policy_string(&self) -> String {
        let scope = match self.scope {
            Scope::PerUe => "UE",
            Scope::PerSlice => "slice",
        };
        let op = match self.comparator {
            Comparator::BelowIsViolation => "<",
            Comparator::AboveIsViolation => ">",
        };
        let suffix = match self.metric {
            Metric::Throughput => "bps",
            Metric::BufferOccupancy => "",
            Metric::DroppedBytes => "bytes",
        };
        format!(
            "{} per {} {} {}{}",
            self.metric.canonical_name(),
            scope,
            op,
            self.threshold,
            suffix
        )
    }
}

/// Hard (outage) and soft target KPIs of a Policy slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlaSpec {
    pub outage_kpis: Vec<KpiPredicate>,
    pub soft_kpis: Vec<KpiPredicate>,
    /// Fraction in (0, 1).
    pub reliability: f64,
}

impl SlaSpec {
    pub fn new(outage_kpis: Vec<KpiPredicate>, soft_kpis: Vec<KpiPredicate>, reliability: f64) -> Result<Self> {
        if !(reliability > 0.0 && reliability < 1.0) {
            return Err(Error::validation(format!(
                "reliability must lie in (0, 1), got {reliability}"
            )));
        }
        Ok(SlaSpec {
            outage_kpis,
            soft_kpis,
            reliability,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SliceClass {
    #[serde(rename = "eMBB")]
    Embb,
    #[serde(rename = "URLLC")]
    Urllc,
    #[serde(rename = "MTC")]
    Mtc,
    #[serde(rename = "other")]
    Other,
}

impl SliceClass {
    pub fn from_name(name: &str) -> Self {
        match name.to_ascii_lowercase().as_str() {
            "embb" => SliceClass::Embb,
            "urllc" => SliceClass::Urllc,
            "mtc" | "mmtc" => SliceClass::Mtc,
            _ => SliceClass::Other,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SliceClass::Embb => "eMBB",
            SliceClass::Urllc => "URLLC",
            SliceClass::Mtc => "MTC",
            SliceClass::Other => "other",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "eMBB" => Some(SliceClass::Embb),
            "URLLC" => Some(SliceClass::Urllc),
            "MTC" => Some(SliceClass::Mtc),
            "other" => Some(SliceClass::Other),
            _ => None,
        }
    }
}

/// Per-slice quantity the resource-optimisation term rewards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizationKpi {
    MaximizeMeanThroughput,
    MinimizeMaxBuffer,
}

impl OptimizationKpi {
    pub fn default_for(class: SliceClass) -> Self {
        match class {
            SliceClass::Urllc => OptimizationKpi::MinimizeMaxBuffer,
            _ => OptimizationKpi::MaximizeMeanThroughput,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            OptimizationKpi::MaximizeMeanThroughput => "maximize_mean_throughput",
            OptimizationKpi::MinimizeMaxBuffer => "minimize_max_buffer",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "maximize_mean_throughput" => Some(OptimizationKpi::MaximizeMeanThroughput),
            "minimize_max_buffer" => Some(OptimizationKpi::MinimizeMaxBuffer),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KpiKind {
    Outage,
    Soft,
}

/// A recognised KPI the simulator cannot measure, kept verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IgnoredKpi {
    pub kind: KpiKind,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlicePolicy {
    pub name: String,
    pub class: SliceClass,
    pub weight: f64,
    pub priority: Option<u32>,
    /// `None` marks a No-Policy slice.
    pub sla: Option<SlaSpec>,
    pub optimization_kpi: OptimizationKpi,
    #[serde(default)]
    pub ignored_kpis: Vec<IgnoredKpi>,
}

impl SlicePolicy {
    pub fn outage_kpis(&self) -> &[KpiPredicate] {
        self.sla.as_ref().map_or(&[], |s| s.outage_kpis.as_slice())
    }

    pub fn soft_kpis(&self) -> &[KpiPredicate] {
        self.sla.as_ref().map_or(&[], |s| s.soft_kpis.as_slice())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct A1Policy {
    slices: Vec<SlicePolicy>,
}

impl A1Policy {
    /// Validates slice count, name uniqueness, weight ranges and the weight sum.
    pub fn new(slices: Vec<SlicePolicy>) -> Result<Self> {
        if slices.is_empty() {
            return Err(Error::validation("policy must define at least one slice"));
        }
        for (i, s) in slices.iter().enumerate() {
            if s.name.trim().is_empty() {
                return Err(Error::validation(format!("network_slices[{i}]: empty slice_name")));
            }
            if slices[..i].iter().any(|o| o.name == s.name) {
                return Err(Error::validation(format!("duplicate slice name `{}`", s.name)));
            }
            if !(0.0..=1.0).contains(&s.weight) {
                return Err(Error::validation(format!(
                    "slice `{}`: weight {} outside [0, 1]",
                    s.name, s.weight
                )));
            }
            if s.priority == Some(0) {
                return Err(Error::validation(format!("slice `{}`: priority must be >= 1", s.name)));
            }
        }
        let sum: f64 = slices.iter().map(|s| s.weight).sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::validation(format!("slice weights sum to {sum}, expected 1")));
        }
        Ok(A1Policy { slices })
    }

    pub fn slices(&self) -> &[SlicePolicy] {
        &self.slices
    }

    pub fn num_slices(&self) -> usize {
        self.slices.len()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.slices.iter().map(|s| s.weight).collect()
    }

    /// Serializes to the canonical A1 document.
    pub fn to_json_string(&self) -> String {
        let slices: Vec<Value> = self.slices.iter().map(slice_to_json).collect();
        let mut root = Map::new();
        root.insert("network_slices".into(), Value::Array(slices));
        serde_json::to_string_pretty(&Value::Object(root)).expect("policy JSON is always serializable")
    }
}

fn slice_to_json(s: &SlicePolicy) -> Value {
    let mut obj = Map::new();
    obj.insert("slice_name".into(), Value::from(s.name.clone()));
    obj.insert("class".into(), Value::from(s.class.label()));
    obj.insert("weight".into(), Value::from(s.weight));
    if let Some(p) = s.priority {
        obj.insert("priority".into(), Value::from(p));
    }
    obj.insert("optimization_kpi".into(), Value::from(s.optimization_kpi.label()));
    let ignored = |kind: KpiKind| s.ignored_kpis.iter().filter(move |k| k.kind == kind);
    if let Some(sla) = &s.sla {
        let mut outage = Map::new();
        let texts = sla
            .outage_kpis
            .iter()
            .map(KpiPredicate::to_policy_string)
            .chain(ignored(KpiKind::Outage).map(|k| k.text.clone()));
        for (i, text) in texts.enumerate() {
            outage.insert(format!("k_out_{}", i + 1), Value::from(text));
        }
        outage.insert(
            "reliability_percent".into(),
            Value::from(format!("{}%", shift_decimal(&sla.reliability.to_string(), 2))),
        );
        let mut soft = Map::new();
        let texts = sla
            .soft_kpis
            .iter()
            .map(KpiPredicate::to_policy_string)
            .chain(ignored(KpiKind::Soft).map(|k| k.text.clone()));
        for (i, text) in texts.enumerate() {
            soft.insert(format!("k_soft_{}", i + 1), Value::from(text));
        }
        let mut targets = Map::new();
        targets.insert("outage_kpis".into(), Value::Object(outage));
        targets.insert("soft_kpis".into(), Value::Object(soft));
        obj.insert("target_kpis".into(), Value::Object(targets));
    }
    Value::Object(obj)
}

/// Parses an A1 policy document.
pub fn parse_a1_policy(text: &str) -> Result<A1Policy> {
    let root: Value = serde_json::from_str(text).map_err(|e| {
        Error::parse(format!("line {} column {}", e.line(), e.column()), e.to_string())
    })?;
    let slices = root
        .get("network_slices")
        .ok_or_else(|| Error::parse("network_slices", "missing top-level key"))?
        .as_array()
        .ok_or_else(|| Error::parse("network_slices", "expected an array"))?;

    let mut parsed = Vec::with_capacity(slices.len());
    let mut weights = Vec::with_capacity(slices.len());
    for (i, raw) in slices.iter().enumerate() {
        let (slice, weight) = parse_slice(i, raw)?;
        parsed.push(slice);
        weights.push(weight);
    }

    let with_weight = weights.iter().filter(|w| w.is_some()).count();
    if with_weight == parsed.len() {
        for (s, w) in parsed.iter_mut().zip(&weights) {
            s.weight = w.unwrap();
        }
    } else if with_weight == 0 {
        let priorities: Option<Vec<u32>> = parsed.iter().map(|s| s.priority).collect();
        let priorities = priorities.ok_or_else(|| {
            Error::validation("every slice needs a weight, or every slice needs a priority")
        })?;
        for (s, w) in parsed.iter_mut().zip(weights_from_priorities(&priorities)?) {
            s.weight = w;
        }
    } else {
        return Err(Error::validation(
            "weights must be given for all slices or for none",
        ));
    }
    A1Policy::new(parsed)
}

fn parse_slice(index: usize, raw: &Value) -> Result<(SlicePolicy, Option<f64>)> {
    let at = |field: &str| format!("network_slices[{index}].{field}");
    let obj = raw
        .as_object()
        .ok_or_else(|| Error::parse(format!("network_slices[{index}]"), "expected an object"))?;
    let name = obj
        .get("slice_name")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::parse(at("slice_name"), "missing or not a string"))?
        .to_string();
    let weight = match obj.get("weight") {
        None | Some(Value::Null) => None,
        Some(v) => Some(v.as_f64().ok_or_else(|| Error::parse(at("weight"), "expected a number"))?),
    };
    let priority = match obj.get("priority") {
        None | Some(Value::Null) => None,
        Some(v) => {
            let p = v
                .as_u64()
                .filter(|p| *p >= 1 && *p <= u32::MAX as u64)
                .ok_or_else(|| Error::parse(at("priority"), "expected a positive integer"))?;
            Some(p as u32)
        }
    };
    let class = match obj.get("class") {
        None => SliceClass::from_name(&name),
        Some(v) => v
            .as_str()
            .and_then(SliceClass::parse)
            .ok_or_else(|| Error::parse(at("class"), "expected one of eMBB, URLLC, MTC, other"))?,
    };
    let optimization_kpi = match obj.get("optimization_kpi") {
        None => OptimizationKpi::default_for(class),
        Some(v) => v
            .as_str()
            .and_then(OptimizationKpi::parse)
            .ok_or_else(|| Error::parse(at("optimization_kpi"), "unknown optimization KPI"))?,
    };

    let mut ignored_kpis = Vec::new();
    let sla = match obj.get("target_kpis") {
        None | Some(Value::Null) => None,
        Some(targets) => {
            let targets = targets
                .as_object()
                .ok_or_else(|| Error::parse(at("target_kpis"), "expected an object"))?;
            let mut reliability = None;
            let mut outage = Vec::new();
            let mut soft = Vec::new();
            for (kind, key, out) in [
                (KpiKind::Outage, "outage_kpis", &mut outage),
                (KpiKind::Soft, "soft_kpis", &mut soft),
            ] {
                let Some(map) = targets.get(key) else { continue };
                let map = map
                    .as_object()
                    .ok_or_else(|| Error::parse(at(&format!("target_kpis.{key}")), "expected an object"))?;
                for (k, v) in map {
                    let location = at(&format!("target_kpis.{key}.{k}"));
                    let text = v
                        .as_str()
                        .ok_or_else(|| Error::parse(location.clone(), "expected a string"))?;
                    if k == "reliability_percent" {
                        reliability = Some(parse_percent(text).map_err(|m| Error::parse(location, m))?);
                        continue;
                    }
                    match parse_predicate(text).map_err(|e| match e {
                        PredicateError::Unsupported => Error::UnsupportedKpi {
                            slice: name.clone(),
                            kpi: text.to_string(),
                        },
                        PredicateError::Malformed(m) => Error::parse(location.clone(), m),
                        PredicateError::Invalid(e) => Error::parse(location.clone(), e.to_string()),
                    })? {
                        ParsedKpi::Supported(p) => out.push(p),
                        ParsedKpi::Ignored => ignored_kpis.push(IgnoredKpi {
                            kind,
                            text: text.to_string(),
                        }),
                    }
                }
            }
            let any_kpi = !outage.is_empty() || !soft.is_empty() || !ignored_kpis.is_empty();
            match reliability {
                Some(r) => Some(SlaSpec::new(outage, soft, r)?),
                None if any_kpi => {
                    return Err(Error::validation(format!(
                        "slice `{name}`: target KPIs require a reliability_percent"
                    )))
                }
                None => None,
            }
        }
    };

    Ok((
        SlicePolicy {
            name,
            class,
            weight: weight.unwrap_or(0.0),
            priority,
            sla,
            optimization_kpi,
            ignored_kpis,
        },
        weight,
    ))
}

/// Parses one predicate string on behalf of `slice`. `Ok(None)` means the
/// metric is recognised but not measured by the simulator.
pub fn parse_kpi(slice: &str, text: &str) -> Result<Option<KpiPredicate>> {
    match parse_predicate(text) {
        Ok(ParsedKpi::Supported(p)) => Ok(Some(p)),
        Ok(ParsedKpi::Ignored) => Ok(None),
        Err(PredicateError::Unsupported) => Err(Error::UnsupportedKpi {
            slice: slice.to_string(),
            kpi: text.to_string(),
        }),
        Err(PredicateError::Malformed(m)) => Err(Error::parse(format!("slice `{slice}`"), m)),
        Err(PredicateError::Invalid(e)) => Err(e),
    }
}

#[derive(Debug)]
enum PredicateError {
    Unsupported,
    Malformed(String),
    Invalid(Error),
}

#[derive(Debug)]
enum ParsedKpi {
    Supported(KpiPredicate),
    Ignored,
}

const IGNORED_METRICS: &[&str] = &["latency", "packet_loss_rate", "packet_loss", "jitter", "delay"];

/// `<metric> per <UE|slice> <'<'|'>'> <value>[unit]`
fn parse_predicate(text: &str) -> std::result::Result<ParsedKpi, PredicateError> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let metric_name = tokens
        .first()
        .ok_or_else(|| PredicateError::Malformed("empty predicate".into()))?
        .to_ascii_lowercase();
    let (metric, default_scale) = match metric_name.as_str() {
        "throughput" | "thr" | "bandwidth" | "bandwidth_bps" => (Metric::Throughput, 1.0),
        "bandwidth_kbps" => (Metric::Throughput, 1e3),
        "bandwidth_mbps" => (Metric::Throughput, 1e6),
        "buffer_occupancy" | "bfs" | "buffer_status" => (Metric::BufferOccupancy, 1.0),
        "dropped_bytes" | "tdp" => (Metric::DroppedBytes, 1.0),
        m if IGNORED_METRICS.contains(&m) => return Ok(ParsedKpi::Ignored),
        _ => return Err(PredicateError::Unsupported),
    };
    if tokens.len() < 5 || !tokens[1].eq_ignore_ascii_case("per") {
        return Err(PredicateError::Malformed(format!(
            "expected `<metric> per <UE|slice> <op> <value>`, got `{text}`"
        )));
    }
    let scope = match tokens[2].to_ascii_lowercase().as_str() {
        "ue" => Scope::PerUe,
        "slice" => Scope::PerSlice,
        other => return Err(PredicateError::Malformed(format!("unknown scope `{other}`"))),
    };
    let comparator = match tokens[3] {
        "<" => Comparator::BelowIsViolation,
        ">" => Comparator::AboveIsViolation,
        other => return Err(PredicateError::Malformed(format!("unknown comparator `{other}`"))),
    };
    let literal = tokens[4..].concat();
    let (number, unit) = split_number(&literal)
        .ok_or_else(|| PredicateError::Malformed(format!("bad threshold `{literal}`")))?;
    let scale = match (metric, unit.to_ascii_lowercase().as_str()) {
        (Metric::Throughput, "") => default_scale,
        (Metric::Throughput, "bps" | "bit/s") => 1.0,
        (Metric::Throughput, "kbps" | "kbit/s") => 1e3,
        (Metric::Throughput, "mbps" | "mbit/s") => 1e6,
        (Metric::Throughput, "gbps" | "gbit/s") => 1e9,
        (Metric::BufferOccupancy, "") => 1.0,
        (Metric::BufferOccupancy, "%") => 0.01,
        (Metric::DroppedBytes, "" | "b" | "byte" | "bytes") => 1.0,
        (_, u) => {
            return Err(PredicateError::Malformed(format!(
                "unit `{u}` is not valid for {}",
                metric.canonical_name()
            )))
        }
    };
    let threshold = if scale == 0.01 {
        shift_decimal(number, -2)
            .parse::<f64>()
            .map_err(|e| PredicateError::Malformed(e.to_string()))?
    } else {
        number.parse::<f64>().map_err(|e| PredicateError::Malformed(e.to_string()))? * scale
    };
    KpiPredicate::new(metric, scope, comparator, threshold)
        .map(ParsedKpi::Supported)
        .map_err(PredicateError::Invalid)
}

fn split_number(s: &str) -> Option<(&str, &str)> {
    (1..=s.len())
        .rev()
        .filter(|&i| s.is_char_boundary(i))
        .find(|&i| {
            s[..i]
                .parse::<f64>()
                .map(|v| v.is_finite() && s.as_bytes()[0] != b'i' && s.as_bytes()[0] != b'n')
                .unwrap_or(false)
        })
        .map(|i| (&s[..i], &s[i..]))
}

/// `"99.999%"` → 0.99999, rounding through the decimal string so the result is
/// the closest double to the written percentage divided by 100.
fn parse_percent(text: &str) -> std::result::Result<f64, String> {
    let digits = text
        .trim()
        .strip_suffix('%')
        .ok_or_else(|| format!("percentage `{text}` must end with `%`"))?
        .trim();
    if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit() || c == '.') {
        return Err(format!("bad percentage `{text}`"));
    }
    shift_decimal(digits, -2)
        .parse::<f64>()
        .map_err(|e| format!("bad percentage `{text}`: {e}"))
}

/// Moves the decimal point of a plain decimal literal by `shift` places
/// (positive = multiply by 10^shift). Scientific notation is expanded first.
fn shift_decimal(literal: &str, shift: i32) -> String {
    let (mantissa, exp) = match literal.find(['e', 'E']) {
        Some(i) => (&literal[..i], literal[i + 1..].parse::<i32>().unwrap_or(0)),
        None => (literal, 0),
    };
    let (negative, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mantissa),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits: String = format!("{int_part}{frac_part}");
    // position of the decimal point within `digits`
    let point = int_part.len() as i32 + exp + shift;
    let mut out = String::new();
    if point <= 0 {
        out.push_str("0.");
        out.extend(std::iter::repeat_n('0', (-point) as usize));
        out.push_str(&digits);
    } else if point as usize >= digits.len() {
        out.push_str(&digits);
        out.extend(std::iter::repeat_n('0', point as usize - digits.len()));
    } else {
        out.push_str(&digits[..point as usize]);
        out.push('.');
        out.push_str(&digits[point as usize..]);
    }
    let trimmed = if out.contains('.') {
        out.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        out
    };
    let trimmed = trimmed.trim_start_matches('0');
    let trimmed = if trimmed.is_empty() || trimmed.starts_with('.') {
        format!("0{trimmed}")
    } else {
        trimmed.to_string()
    };
    if negative {
        format!("-{trimmed}")
    } else {
        trimmed
    }
}

/// Maps operator priorities (1 = most important) to weights
/// `w_j = (2J + 1 - priority_j) / sum_k (2J + 1 - priority_k)`.
pub fn weights_from_priorities(priorities: &[u32]) -> Result<Vec<f64>> {
    let j = priorities.len();
    if j == 0 {
        return Err(Error::validation("priority list is empty"));
    }
    let mut seen = vec![false; j];
    for &p in priorities {
        let idx = (p as usize).wrapping_sub(1);
        if idx >= j || seen[idx] {
            return Err(Error::validation(format!(
                "priorities {priorities:?} are not a permutation of 1..={j}"
            )));
        }
        seen[idx] = true;
    }
    let raw: Vec<f64> = priorities.iter().map(|&p| (2 * j + 1) as f64 - p as f64).collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|r| r / total).collect())
}

/// One UE's value of the metric a predicate is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeSample {
    pub ue: UeId,
    pub value: f64,
    /// Offered load, used to cap lower-bound thresholds.
    pub demand: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetricSnapshot {
    PerUe(Vec<UeSample>),
    PerSlice { value: f64, demand: Option<f64> },
}

impl MetricSnapshot {
    fn scope(&self) -> Scope {
        match self {
            MetricSnapshot::PerUe(_) => Scope::PerUe,
            MetricSnapshot::PerSlice { .. } => Scope::PerSlice,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// Violating UEs, in snapshot order.
    Ues(Vec<UeId>),
    Slice(bool),
}

impl Violation {
    pub fn is_violated(&self) -> bool {
        match self {
            Violation::Ues(ues) => !ues.is_empty(),
            Violation::Slice(v) => *v,
        }
    }
}

pub fn evaluate_predicate(predicate: &KpiPredicate, snapshot: &MetricSnapshot) -> Result<Violation> {
    if predicate.scope() != snapshot.scope() {
        return Err(Error::ScopeMismatch {
            predicate: predicate.scope().label(),
            snapshot: snapshot.scope().label(),
        });
    }
    Ok(match snapshot {
        MetricSnapshot::PerUe(samples) => Violation::Ues(
            samples
                .iter()
                .filter(|s| predicate.is_violated(s.value, s.demand))
                .map(|s| s.ue)
                .collect(),
        ),
        MetricSnapshot::PerSlice { value, demand } => Violation::Slice(predicate.is_violated(*value, *demand)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pred(metric: Metric, scope: Scope, cmp: Comparator, t: f64) -> KpiPredicate {
        KpiPredicate::new(metric, scope, cmp, t).unwrap()
    }

    #[test]
    fn priorities_to_weights() {
        let w = weights_from_priorities(&[2, 1, 3]).unwrap();
        let expected = [0.3333, 0.4000, 0.2667];
        for (a, b) in w.iter().zip(expected) {
            assert!((a - b).abs() < 5e-5, "{w:?}");
        }
        assert_eq!(weights_from_priorities(&[1]).unwrap(), vec![1.0]);
        let w = weights_from_priorities(&[1, 2]).unwrap();
        assert!((w[0] - 4.0 / 7.0).abs() < 1e-12);
        assert!((w[1] - 3.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn priorities_must_be_a_permutation() {
        assert!(weights_from_priorities(&[1, 1]).is_err());
        assert!(weights_from_priorities(&[0, 1]).is_err());
        assert!(weights_from_priorities(&[1, 3]).is_err());
        assert!(weights_from_priorities(&[]).is_err());
    }

    #[test]
    fn predicate_strings() {
        let ParsedKpi::Supported(p) = parse_predicate("bandwidth_mbps per slice > 1500mbps").unwrap() else {
            panic!()
        };
        assert_eq!(p.metric(), Metric::Throughput);
        assert_eq!(p.scope(), Scope::PerSlice);
        assert_eq!(p.comparator(), Comparator::AboveIsViolation);
        assert_eq!(p.threshold(), 1.5e9);

        let ParsedKpi::Supported(p) = parse_predicate("bfs per UE > 3%").unwrap() else { panic!() };
        assert_eq!(p.threshold(), 0.03);
        assert_eq!(p.unit(), Unit::Fraction);

        let ParsedKpi::Supported(p) = parse_predicate("thr per slice < 10 Mbps").unwrap() else { panic!() };
        assert_eq!(p.threshold(), 10e6);

        assert!(matches!(parse_predicate("latency per UE > 5ms"), Ok(ParsedKpi::Ignored)));
        assert!(matches!(parse_predicate("energy per UE > 5J"), Err(PredicateError::Unsupported)));
        assert!(matches!(parse_predicate("bfs per cell > 3%"), Err(PredicateError::Malformed(_))));
        assert!(matches!(parse_predicate("bfs per UE > 300%"), Err(PredicateError::Invalid(_))));
        assert!(matches!(parse_predicate("thr per UE > 5furlongs"), Err(PredicateError::Malformed(_))));
    }

    #[test]
    fn canonical_strings_parse_back() {
        for p in [
            pred(Metric::Throughput, Scope::PerSlice, Comparator::BelowIsViolation, 1e7),
            pred(Metric::BufferOccupancy, Scope::PerUe, Comparator::AboveIsViolation, 0.03),
            pred(Metric::DroppedBytes, Scope::PerUe, Comparator::AboveIsViolation, 125.5),
        ] {
            let ParsedKpi::Supported(q) = parse_predicate(&p.to_policy_string()).unwrap() else { panic!() };
            assert_eq!(p, q);
        }
    }

    #[test]
    fn percent_parsing() {
        assert_eq!(parse_percent("99.999%").unwrap(), 0.99999);
        assert_eq!(parse_percent("99.99%").unwrap(), 0.9999);
        assert_eq!(parse_percent("3%").unwrap(), 0.03);
        assert!(parse_percent("99.9").is_err());
        assert!(parse_percent("abc%").is_err());
        assert_eq!(shift_decimal("0.99999", 2), "99.999");
        assert_eq!(shift_decimal("1e-5", 2), "0.001");
        assert_eq!(shift_decimal("12", -3), "0.012");
        assert_eq!(shift_decimal("5", 2), "500");
    }

    #[test]
    fn predicate_evaluation() {
        let bfs = pred(Metric::BufferOccupancy, Scope::PerUe, Comparator::AboveIsViolation, 0.03);
        let snap = MetricSnapshot::PerUe(vec![
            UeSample { ue: UeId(0), value: 0.01, demand: None },
            UeSample { ue: UeId(1), value: 0.05, demand: None },
        ]);
        assert_eq!(evaluate_predicate(&bfs, &snap).unwrap(), Violation::Ues(vec![UeId(1)]));

        let min_thr = pred(Metric::Throughput, Scope::PerSlice, Comparator::BelowIsViolation, 10e6);
        let slice = |v| MetricSnapshot::PerSlice { value: v, demand: None };
        assert_eq!(evaluate_predicate(&min_thr, &slice(12e6)).unwrap(), Violation::Slice(false));
        assert_eq!(evaluate_predicate(&min_thr, &slice(8e6)).unwrap(), Violation::Slice(true));

        let max_thr = pred(Metric::Throughput, Scope::PerSlice, Comparator::AboveIsViolation, 15e6);
        assert_eq!(evaluate_predicate(&max_thr, &slice(16e6)).unwrap(), Violation::Slice(true));

        assert!(matches!(
            evaluate_predicate(&bfs, &slice(0.5)),
            Err(Error::ScopeMismatch { .. })
        ));
    }

    #[test]
    fn demand_caps_lower_bounds() {
        let min_thr = pred(Metric::Throughput, Scope::PerSlice, Comparator::BelowIsViolation, 10e6);
        assert!(!min_thr.is_violated(240e3, Some(225e3)));
        assert!(min_thr.is_violated(200e3, Some(225e3)));
        assert!(min_thr.is_violated(8e6, Some(100e6)));
        let max_thr = pred(Metric::Throughput, Scope::PerSlice, Comparator::AboveIsViolation, 15e6);
        assert!(max_thr.is_violated(16e6, Some(1.0)));
    }

    #[test]
    fn single_no_policy_slice() {
        let p = parse_a1_policy(r#"{"network_slices":[{"slice_name":"best-effort","weight":1.0}]}"#).unwrap();
        assert_eq!(p.num_slices(), 1);
        assert!(p.slices()[0].sla.is_none());
        assert_eq!(p.slices()[0].class, SliceClass::Other);
    }

    #[test]
    fn weight_sum_violation() {
        let err = parse_a1_policy(
            r#"{"network_slices":[{"slice_name":"a","weight":0.5},{"slice_name":"b","weight":0.6}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn priorities_without_weights() {
        let p = parse_a1_policy(
            r#"{"network_slices":[
                {"slice_name":"eMBB","priority":2},
                {"slice_name":"URLLC","priority":1},
                {"slice_name":"MTC","priority":3}]}"#,
        )
        .unwrap();
        assert!((p.weights()[1] - 0.4).abs() < 1e-12);
        assert_eq!(p.slices()[1].optimization_kpi, OptimizationKpi::MinimizeMaxBuffer);
    }

    #[test]
    fn malformed_documents() {
        let err = parse_a1_policy("{\n  \"network_slices\": [\n    {\"slice_name\": }\n]}").unwrap_err();
        match err {
            Error::Parse { location, .. } => assert!(location.starts_with("line 3"), "{location}"),
            e => panic!("{e}"),
        }
        let err = parse_a1_policy(r#"{"network_slices":[{"slice_name":"a","weight":"heavy"}]}"#).unwrap_err();
        match err {
            Error::Parse { location, .. } => assert_eq!(location, "network_slices[0].weight"),
            e => panic!("{e}"),
        }
        assert!(parse_a1_policy(r#"{"slices":[]}"#).is_err());
        assert!(parse_a1_policy(r#"{"network_slices":[]}"#).is_err());
    }

    #[test]
    fn unsupported_metric_names_slice() {
        let err = parse_a1_policy(
            r#"{"network_slices":[{"slice_name":"x","weight":1.0,
                "target_kpis":{"outage_kpis":{"k_out_1":"energy per UE > 5J","reliability_percent":"99%"}}}]}"#,
        )
        .unwrap_err();
        match err {
            Error::UnsupportedKpi { slice, kpi } => {
                assert_eq!(slice, "x");
                assert_eq!(kpi, "energy per UE > 5J");
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn reliability_requires_percent_sign() {
        let err = parse_a1_policy(
            r#"{"network_slices":[{"slice_name":"x","weight":1.0,
                "target_kpis":{"outage_kpis":{"k_out_1":"bfs per UE > 3%","reliability_percent":"99"}}}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        let err = parse_a1_policy(
            r#"{"network_slices":[{"slice_name":"x","weight":1.0,
                "target_kpis":{"outage_kpis":{"k_out_1":"bfs per UE > 3%"}}}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }
}
