//! Mamdani fuzzy classifier: min/max connectives, min implication, max
//! aggregation on a fixed output grid and centroid defuzzification.
//!
//! Rule bases are plain text:
//!
//! ```text
//! # comment
//! set amp1 high trap 50 80 400 600
//! set dur1 spike tri 15 45 90
//! set out large trap 0.7 0.8 1 1
//! IF amp1 is high AND dur1 is spike THEN out is large
//! IF amp1 is not high OR dur1 is long THEN out is small
//! ```
//!
//! `AND` binds tighter than `OR`. Output sets are `small`, `medium` and
//! `large` on `[0, 1]`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::detector::CandidateEvent;
use crate::error::{Error, Result};
use crate::mimetic::{Feature, FeatureVector, HalfWavePair};
use crate::scalar::Real;
use crate::signal_io::EventClass;

/// Points of the aggregate output grid over `[0, 1]`.
pub const GRID_POINTS: usize = 1001;

pub const DEFAULT_RULEBASE: &str = include_str!("../data/default.rules");

/// Piecewise-linear membership function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MembershipFunction<T> {
    Triangular([T; 3]),
    Trapezoidal([T; 4]),
}

impl<T: Real> MembershipFunction<T> {
    pub fn triangular(a: T, b: T, c: T) -> Result<Self> {
        Self::check(&[a, b, c])?;
        Ok(Self::Triangular([a, b, c]))
    }

    pub fn trapezoidal(a: T, b: T, c: T, d: T) -> Result<Self> {
        Self::check(&[a, b, c, d])?;
        Ok(Self::Trapezoidal([a, b, c, d]))
    }

    fn check(points: &[T]) -> Result<()> {
        if points.iter().any(|p| p.is_nan()) {
            return Err(Error::config("membership breakpoint is NaN"));
        }
        if points.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::config(format!(
                "membership breakpoints must be non-decreasing, got {:?}",
                points.iter().map(|p| p.as_f64()).collect::<Vec<_>>()
            )));
        }
        if points[0] == points[points.len() - 1] && points[0].is_infinite() {
            return Err(Error::config("membership support is empty"));
        }
        Ok(())
    }

    fn corners(&self) -> [T; 4] {
        match *self {
            MembershipFunction::Triangular([a, b, c]) => [a, b, b, c],
            MembershipFunction::Trapezoidal(p) => p,
        }
    }

    /// Closed support `[first, last]` breakpoint.
    pub fn support(&self) -> (T, T) {
        let [a, _, _, d] = self.corners();
        (a, d)
    }
}

/// Degree of membership of `x`; zero outside the support.
pub fn membership<T: Real>(x: T, mf: &MembershipFunction<T>) -> T {
    let [a, b, c, d] = mf.corners();
    if x.is_nan() || x < a || x > d {
        T::zero()
    } else if x >= b && x <= c {
        T::one()
    } else if x < b {
        (x - a) / (b - a)
    } else {
        (d - x) / (d - c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OutputClass {
    Small,
    Medium,
    Large,
}

impl OutputClass {
    pub const ALL: [OutputClass; 3] = [OutputClass::Small, OutputClass::Medium, OutputClass::Large];

    pub fn as_str(self) -> &'static str {
        match self {
            OutputClass::Small => "small",
            OutputClass::Medium => "medium",
            OutputClass::Large => "large",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        OutputClass::ALL.into_iter().find(|c| c.as_str().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for OutputClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `feature is [not] set`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    pub feature: Feature,
    pub set: String,
    pub negated: bool,
}

/// Disjunction of conjunctions of clauses, with one consequent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub any_of: Vec<Vec<Clause>>,
    pub consequent: OutputClass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyRuleBase<T> {
    inputs: BTreeMap<Feature, BTreeMap<String, MembershipFunction<T>>>,
    outputs: BTreeMap<OutputClass, MembershipFunction<T>>,
    rules: Vec<Rule>,
}

impl<T: Real> FuzzyRuleBase<T> {
    /// Validates references, the output universe and the presence of a
    /// `large` conclusion.
    pub fn new(
        inputs: BTreeMap<Feature, BTreeMap<String, MembershipFunction<T>>>,
        outputs: BTreeMap<OutputClass, MembershipFunction<T>>,
        rules: Vec<Rule>,
    ) -> Result<Self> {
        for class in OutputClass::ALL {
            let mf = outputs.get(&class).ok_or_else(|| Error::config(format!("output set {class} is not declared")))?;
            let (lo, hi) = mf.support();
            if lo < T::zero() || hi > T::one() {
                return Err(Error::config(format!("output set {class} extends outside [0, 1]")));
            }
        }
        for (i, rule) in rules.iter().enumerate() {
            if rule.any_of.is_empty() || rule.any_of.iter().any(Vec::is_empty) {
                return Err(Error::config(format!("rule {} has an empty antecedent", i + 1)));
            }
            for clause in rule.any_of.iter().flatten() {
                let declared = inputs.get(&clause.feature).is_some_and(|sets| sets.contains_key(&clause.set));
                if !declared {
                    return Err(Error::config(format!(
                        "rule {} references undeclared set {:?} of {}",
                        i + 1,
                        clause.set,
                        clause.feature
                    )));
                }
            }
        }
        if !rules.iter().any(|r| r.consequent == OutputClass::Large) {
            return Err(Error::config("no rule concludes `out is large`"));
        }
        Ok(Self { inputs, outputs, rules })
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn input_set(&self, feature: Feature, name: &str) -> Option<&MembershipFunction<T>> {
        self.inputs.get(&feature).and_then(|s| s.get(name))
    }

    pub fn output_set(&self, class: OutputClass) -> &MembershipFunction<T> {
        &self.outputs[&class]
    }

    fn clause_degree(&self, clause: &Clause, features: &FeatureVector<T>) -> T {
        let mf = &self.inputs[&clause.feature][&clause.set];
        let mu = membership(features.get(clause.feature), mf);
        if clause.negated {
            T::one() - mu
        } else {
            mu
        }
    }

    /// Antecedent degree of one rule.
    pub fn rule_degree(&self, rule: &Rule, features: &FeatureVector<T>) -> T {
        rule.any_of
            .iter()
            .map(|conj| conj.iter().map(|c| self.clause_degree(c, features)).fold(T::one(), T::min))
            .fold(T::zero(), T::max)
    }

    pub fn firing_degrees(&self, features: &FeatureVector<T>) -> Vec<T> {
        self.rules.iter().map(|r| self.rule_degree(r, features)).collect()
    }
}

/// Aggregate output set sampled at `i / (GRID_POINTS - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate<T> {
    pub values: Vec<T>,
}

impl<T: Real> Aggregate<T> {
    pub fn grid(i: usize) -> T {
        T::of(i as f64 / (GRID_POINTS - 1) as f64)
    }

    /// Max-aggregation of consequents clipped at the given degrees.
    pub fn from_clipped(parts: &[(T, &MembershipFunction<T>)]) -> Self {
        let values = (0..GRID_POINTS)
            .map(|i| {
                let y = Self::grid(i);
                parts.iter().map(|&(deg, mf)| deg.min(membership(y, mf))).fold(T::zero(), T::max)
            })
            .collect();
        Self { values }
    }
}

pub fn infer<T: Real>(features: &FeatureVector<T>, base: &FuzzyRuleBase<T>) -> Aggregate<T> {
    let parts: Vec<(T, &MembershipFunction<T>)> = base
        .rules
        .iter()
        .map(|r| (base.rule_degree(r, features), base.output_set(r.consequent)))
        .filter(|(d, _)| *d > T::zero())
        .collect();
    Aggregate::from_clipped(&parts)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Defuzzified<T> {
    pub score: T,
    /// False when the aggregate is identically zero.
    pub fired: bool,
}

/// Discrete centroid `sum(y mu(y)) / sum(mu(y))`; zero with `fired = false`
/// for an empty aggregate.
pub fn defuzzify_centroid<T: Real>(agg: &Aggregate<T>) -> Defuzzified<T> {
    let (num, den) = agg
        .values
        .iter()
        .enumerate()
        .fold((T::zero(), T::zero()), |(n, d), (i, &mu)| (n + Aggregate::<T>::grid(i) * mu, d + mu));
    if den > T::zero() {
        Defuzzified { score: (num / den).max(T::zero()).min(T::one()), fired: true }
    } else {
        Defuzzified { score: T::zero(), fired: false }
    }
}

/// Score bands for the three-way label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassBands {
    pub epileptiform: f64,
    pub possible: f64,
}

impl Default for ClassBands {
    fn default() -> Self {
        Self { epileptiform: 0.8, possible: 0.5 }
    }
}

impl ClassBands {
    pub fn label<T: Real>(&self, score: T) -> EventClass {
        let s = score.as_f64();
        if s >= self.epileptiform {
            EventClass::Epileptiform
        } else if s >= self.possible.min(self.epileptiform) {
            EventClass::Possible
        } else {
            EventClass::NonEpileptiform
        }
    }
}

/// A candidate with its waveform decomposition, features and fuzzy verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifiedEvent<T> {
    pub candidate: CandidateEvent<T>,
    pub halfwaves: HalfWavePair,
    /// Time of the snapped raw peak.
    pub time_s: f64,
    pub features: FeatureVector<T>,
    pub score: T,
    pub class: EventClass,
}

pub fn classify<T: Real>(features: &FeatureVector<T>, base: &FuzzyRuleBase<T>, bands: &ClassBands) -> (T, EventClass) {
    let score = defuzzify_centroid(&infer(features, base)).score;
    (score, bands.label(score))
}

fn parse_number<T: Real>(tok: &str, line: usize) -> Result<T> {
    let v: f64 = tok.parse().map_err(|_| Error::config_at(line, format!("expected a number, found {tok:?}")))?;
    if v.is_nan() {
        return Err(Error::config_at(line, "NaN breakpoint"));
    }
    Ok(T::of(v))
}

fn parse_clause(tokens: &[&str], line: usize) -> Result<(Feature, String, bool)> {
    match tokens {
        [feat, is, name] if is.eq_ignore_ascii_case("is") => {
            Ok((feat.parse().map_err(|m| Error::config_at(line, m))?, name.to_string(), false))
        }
        [feat, is, not, name] if is.eq_ignore_ascii_case("is") && not.eq_ignore_ascii_case("not") => {
            Ok((feat.parse().map_err(|m| Error::config_at(line, m))?, name.to_string(), true))
        }
        _ => Err(Error::config_at(line, format!("expected `<feature> is [not] <set>`, found {:?}", tokens.join(" ")))),
    }
}

fn split_on<'a>(tokens: &'a [&'a str], keyword: &str) -> Vec<&'a [&'a str]> {
    tokens.split(|t| t.eq_ignore_ascii_case(keyword)).collect()
}

/// Parses a rule base; errors carry the offending line number.
pub fn parse_rulebase<T: Real>(text: &str) -> Result<FuzzyRuleBase<T>> {
    let mut inputs: BTreeMap<Feature, BTreeMap<String, MembershipFunction<T>>> = BTreeMap::new();
    let mut outputs = BTreeMap::new();
    let mut rules = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let head = tokens[0].to_ascii_lowercase();
        match head.as_str() {
            "set" => {
                if tokens.len() < 5 {
                    return Err(Error::config_at(line, "expected `set <feature> <name> tri|trap <breakpoints>`"));
                }
                let points = tokens[4..].iter().map(|t| parse_number::<T>(t, line)).collect::<Result<Vec<_>>>()?;
                let mf = match (tokens[3].to_ascii_lowercase().as_str(), points.as_slice()) {
                    ("tri", &[a, b, c]) => MembershipFunction::triangular(a, b, c),
                    ("trap", &[a, b, c, d]) => MembershipFunction::trapezoidal(a, b, c, d),
                    ("tri", _) => return Err(Error::config_at(line, "`tri` takes 3 breakpoints")),
                    ("trap", _) => return Err(Error::config_at(line, "`trap` takes 4 breakpoints")),
                    (kind, _) => return Err(Error::config_at(line, format!("unknown membership kind {kind:?}"))),
                }
                .map_err(|e| match e {
                    Error::Config { msg, .. } => Error::config_at(line, msg),
                    other => other,
                })?;
                if tokens[1].eq_ignore_ascii_case("out") {
                    let class = OutputClass::parse(tokens[2]).ok_or_else(|| {
                        Error::config_at(line, format!("output set must be small, medium or large, found {:?}", tokens[2]))
                    })?;
                    if outputs.insert(class, mf).is_some() {
                        return Err(Error::config_at(line, format!("output set {class} declared twice")));
                    }
                } else {
                    let feature: Feature = tokens[1].parse().map_err(|m| Error::config_at(line, m))?;
                    if inputs.entry(feature).or_default().insert(tokens[2].to_string(), mf).is_some() {
                        return Err(Error::config_at(line, format!("set {} of {feature} declared twice", tokens[2])));
                    }
                }
            }
            "if" => {
                let parts = split_on(&tokens[1..], "then");
                let [antecedent, consequent] = parts.as_slice() else {
                    return Err(Error::config_at(line, "expected exactly one THEN"));
                };
                let consequent = match consequent {
                    [out, is, class] if out.eq_ignore_ascii_case("out") && is.eq_ignore_ascii_case("is") => {
                        OutputClass::parse(class)
                            .ok_or_else(|| Error::config_at(line, format!("unknown output set {class:?}")))?
                    }
                    _ => return Err(Error::config_at(line, "expected `THEN out is <small|medium|large>`")),
                };
                let mut any_of = Vec::new();
                for disjunct in split_on(antecedent, "or") {
                    let mut all_of = Vec::new();
                    for clause in split_on(disjunct, "and") {
                        let (feature, set, negated) = parse_clause(clause, line)?;
                        let declared = inputs.get(&feature).is_some_and(|s| s.contains_key(&set));
                        if !declared {
                            return Err(Error::config_at(line, format!("undeclared set {set:?} of {feature}")));
                        }
                        all_of.push(Clause { feature, set, negated });
                    }
                    any_of.push(all_of);
                }
                rules.push(Rule { any_of, consequent });
            }
            other => return Err(Error::config_at(line, format!("unexpected keyword {other:?}"))),
        }
    }
    FuzzyRuleBase::new(inputs, outputs, rules)
}

pub fn load_rulebase<T: Real>(path: impl AsRef<Path>) -> Result<FuzzyRuleBase<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read rule base {}: {e}", path.display())))?;
    parse_rulebase(&text)
}

pub fn default_rulebase<T: Real>() -> FuzzyRuleBase<T> {
    parse_rulebase(DEFAULT_RULEBASE).expect("shipped rule base is valid")
}
