//! Mamdani fuzzy inference: fuzzification, min/max rule evaluation with
//! negation, min-implication, max-aggregation and centroid defuzzification.
//!
//! A [`RuleBase`] is immutable after construction and safe to share across
//! threads; inference is a pure function of the rulebase and the crisp inputs.

mod engine;
mod membership;

pub use engine::{centroid_exact, centroid_on_grid, ClippedSet};
pub use membership::MembershipFunction;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FisError {
    #[error("invalid membership breakpoints {points:?}: {reason}")]
    InvalidBreakpoints { points: Vec<f64>, reason: String },
    #[error("variable '{variable}': universe [{lo}, {hi}] is not a proper interval")]
    InvalidUniverse { variable: String, lo: f64, hi: f64 },
    #[error("variable '{variable}': set '{set}' support [{lo}, {hi}] lies outside the universe")]
    SupportOutsideUniverse {
        variable: String,
        set: String,
        lo: f64,
        hi: f64,
    },
    #[error("variable '{variable}': duplicate set name '{set}'")]
    DuplicateSet { variable: String, set: String },
    #[error("duplicate variable name '{variable}'")]
    DuplicateVariable { variable: String },
    #[error("rule {rule}: unknown {role} variable '{variable}'")]
    UnknownVariable {
        rule: usize,
        role: &'static str,
        variable: String,
    },
    #[error("rule {rule}: variable '{variable}' has no set named '{set}'")]
    UnknownSet {
        rule: usize,
        variable: String,
        set: String,
    },
    #[error("rule {rule} has no {part}")]
    EmptyRulePart { rule: usize, part: &'static str },
    #[error("rulebase has no rules")]
    EmptyRuleBase,
    #[error("no crisp value supplied for input '{variable}'")]
    MissingInput { variable: String },
    #[error("crisp value supplied for undeclared input '{variable}'")]
    UnknownInput { variable: String },
    #[error("input '{variable}' is {value}, which is not finite")]
    NonFiniteInput { variable: String, value: f64 },
}

/// Physical quantity a linguistic variable ranges over. Controllers bind
/// telemetry channels to variables through this, so declarations can use any
/// variable names they like.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "kV")]
    Kilovolt,
    #[serde(rename = "MVAr")]
    Megavar,
    #[serde(rename = "tap")]
    TapIndex,
    #[serde(rename = "status")]
    Status,
    #[serde(rename = "period")]
    Period,
}

impl std::fmt::Display for Unit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Unit::Kilovolt => "kV",
            Unit::Megavar => "MVAr",
            Unit::TapIndex => "tap",
            Unit::Status => "status",
            Unit::Period => "period",
        };
        f.write_str(s)
    }
}

/// Named variable with a closed universe and its fuzzy sets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinguisticVariable {
    name: String,
    unit: Unit,
    universe: (f64, f64),
    sets: IndexMap<String, MembershipFunction>,
    /// Crisp value returned when no rule clips any set of this variable.
    neutral: f64,
}

impl LinguisticVariable {
    pub fn new(
        name: impl Into<String>,
        unit: Unit,
        universe: (f64, f64),
        sets: Vec<(String, MembershipFunction)>,
        neutral: Option<f64>,
    ) -> Result<Self, FisError> {
        let name = name.into();
        let (lo, hi) = universe;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(FisError::InvalidUniverse {
                variable: name,
                lo,
                hi,
            });
        }
        let mut map = IndexMap::with_capacity(sets.len());
        for (set_name, mf) in sets {
            let (s_lo, s_hi) = mf.support();
            if s_lo < lo || s_hi > hi {
                return Err(FisError::SupportOutsideUniverse {
                    variable: name,
                    set: set_name,
                    lo: s_lo,
                    hi: s_hi,
                });
            }
            if map.insert(set_name.clone(), mf).is_some() {
                return Err(FisError::DuplicateSet {
                    variable: name,
                    set: set_name,
                });
            }
        }
        let neutral = neutral.unwrap_or((lo + hi) / 2.0);
        Ok(Self {
            name,
            unit,
            universe,
            sets: map,
            neutral,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn universe(&self) -> (f64, f64) {
        self.universe
    }

    pub fn neutral(&self) -> f64 {
        self.neutral
    }

    pub fn sets(&self) -> impl Iterator<Item = (&str, &MembershipFunction)> {
        self.sets.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn set(&self, name: &str) -> Option<&MembershipFunction> {
        self.sets.get(name)
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.universe.0, self.universe.1)
    }

    /// Degree of every declared set at `x`, after clamping `x` to the
    /// universe. Telemetry spikes outside the declared range must not make
    /// inference fail.
    pub fn fuzzify(&self, x: f64) -> IndexMap<String, f64> {
        let x = self.clamp(x);
        self.sets
            .iter()
            .map(|(name, mf)| (name.clone(), mf.degree(x)))
            .collect()
    }

    /// Shift the universe and every set by `delta`. Used to retarget the
    /// voltage variable when a scenario runs at a different reference.
    pub fn shifted(&self, delta: f64) -> Result<Self, FisError> {
        let sets = self
            .sets
            .iter()
            .map(|(name, mf)| {
                let (a, b, c, d) = mf.breakpoints();
                MembershipFunction::trapezoid(a + delta, b + delta, c + delta, d + delta)
                    .map(|mf| (name.clone(), mf))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(
            self.name.clone(),
            self.unit,
            (self.universe.0 + delta, self.universe.1 + delta),
            sets,
            Some(self.neutral + delta),
        )
    }
}

/// One antecedent condition: `variable is set` or `variable is not set`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clause {
    pub variable: String,
    pub set: String,
    pub negated: bool,
}

/// One consequent assignment: `variable is set`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub variable: String,
    pub set: String,
}

/// AND-combined antecedents with one or more consequents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub antecedents: Vec<Clause>,
    pub consequents: Vec<Assignment>,
}

/// Per-variable fuzzified degrees, keyed by variable then set name.
pub type Fuzzified = IndexMap<String, IndexMap<String, f64>>;

/// Intermediate and final inference results, for diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InferenceTrace {
    pub fuzzified: Fuzzified,
    /// Activation of each rule, in declaration order.
    pub activations: Vec<f64>,
    pub outputs: IndexMap<String, f64>,
}

/// Validated set of input variables, output variables and rules.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleBase {
    inputs: IndexMap<String, LinguisticVariable>,
    outputs: IndexMap<String, LinguisticVariable>,
    rules: Vec<Rule>,
}

impl RuleBase {
    /// Cross-checks every rule reference: antecedents must name declared
    /// inputs, consequents declared outputs, and every set must exist.
    pub fn new(
        inputs: Vec<LinguisticVariable>,
        outputs: Vec<LinguisticVariable>,
        rules: Vec<Rule>,
    ) -> Result<Self, FisError> {
        let mut input_map = IndexMap::with_capacity(inputs.len());
        let mut output_map = IndexMap::with_capacity(outputs.len());
        for var in inputs {
            let name = var.name().to_string();
            if input_map.insert(name.clone(), var).is_some() {
                return Err(FisError::DuplicateVariable { variable: name });
            }
        }
        for var in outputs {
            let name = var.name().to_string();
            if input_map.contains_key(&name) || output_map.insert(name.clone(), var).is_some() {
                return Err(FisError::DuplicateVariable { variable: name });
            }
        }
        if rules.is_empty() {
            return Err(FisError::EmptyRuleBase);
        }
        for (idx, rule) in rules.iter().enumerate() {
            let rule_no = idx + 1;
            if rule.antecedents.is_empty() {
                return Err(FisError::EmptyRulePart {
                    rule: rule_no,
                    part: "antecedent",
                });
            }
            if rule.consequents.is_empty() {
                return Err(FisError::EmptyRulePart {
                    rule: rule_no,
                    part: "consequent",
                });
            }
            for clause in &rule.antecedents {
                let var = input_map.get(&clause.variable).ok_or_else(|| {
                    FisError::UnknownVariable {
                        rule: rule_no,
                        role: "input",
                        variable: clause.variable.clone(),
                    }
                })?;
                if var.set(&clause.set).is_none() {
                    return Err(FisError::UnknownSet {
                        rule: rule_no,
                        variable: clause.variable.clone(),
                        set: clause.set.clone(),
                    });
                }
            }
            for assign in &rule.consequents {
                let var = output_map.get(&assign.variable).ok_or_else(|| {
                    FisError::UnknownVariable {
                        rule: rule_no,
                        role: "output",
                        variable: assign.variable.clone(),
                    }
                })?;
                if var.set(&assign.set).is_none() {
                    return Err(FisError::UnknownSet {
                        rule: rule_no,
                        variable: assign.variable.clone(),
                        set: assign.set.clone(),
                    });
                }
            }
        }
        Ok(Self {
            inputs: input_map,
            outputs: output_map,
            rules,
        })
    }

    pub fn inputs(&self) -> impl Iterator<Item = &LinguisticVariable> {
        self.inputs.values()
    }

    pub fn outputs(&self) -> impl Iterator<Item = &LinguisticVariable> {
        self.outputs.values()
    }

    pub fn input(&self, name: &str) -> Option<&LinguisticVariable> {
        self.inputs.get(name)
    }

    pub fn output(&self, name: &str) -> Option<&LinguisticVariable> {
        self.outputs.get(name)
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    /// Fuzzify one crisp value per declared input. Unknown or missing
    /// variables are configuration errors.
    pub fn fuzzify_inputs(&self, crisp: &IndexMap<String, f64>) -> Result<Fuzzified, FisError> {
        for name in crisp.keys() {
            if !self.inputs.contains_key(name) {
                return Err(FisError::UnknownInput {
                    variable: name.clone(),
                });
            }
        }
        let mut out = Fuzzified::with_capacity(self.inputs.len());
        for (name, var) in &self.inputs {
            let x = *crisp.get(name).ok_or_else(|| FisError::MissingInput {
                variable: name.clone(),
            })?;
            if !x.is_finite() {
                return Err(FisError::NonFiniteInput {
                    variable: name.clone(),
                    value: x,
                });
            }
            out.insert(name.clone(), var.fuzzify(x));
        }
        Ok(out)
    }

    /// Rule activation: min over clauses, where a negated clause contributes
    /// `1 - degree`.
    pub fn evaluate_rule(&self, rule: &Rule, fuzzified: &Fuzzified) -> Result<f64, FisError> {
        let mut activation = 1.0f64;
        for clause in &rule.antecedents {
            let degrees =
                fuzzified
                    .get(&clause.variable)
                    .ok_or_else(|| FisError::UnknownVariable {
                        rule: 0,
                        role: "input",
                        variable: clause.variable.clone(),
                    })?;
            let degree = *degrees.get(&clause.set).ok_or_else(|| FisError::UnknownSet {
                rule: 0,
                variable: clause.variable.clone(),
                set: clause.set.clone(),
            })?;
            let term = if clause.negated { 1.0 - degree } else { degree };
            activation = activation.min(term);
        }
        Ok(activation)
    }

    /// Full Mamdani pipeline returning crisp outputs plus all intermediates.
    pub fn infer_trace(&self, crisp: &IndexMap<String, f64>) -> Result<InferenceTrace, FisError> {
        let fuzzified = self.fuzzify_inputs(crisp)?;
        let activations = self
            .rules
            .iter()
            .map(|r| self.evaluate_rule(r, &fuzzified))
            .collect::<Result<Vec<_>, _>>()?;

        let mut outputs = IndexMap::with_capacity(self.outputs.len());
        for (name, var) in &self.outputs {
            let mut clipped: Vec<ClippedSet> = Vec::new();
            for (rule, &activation) in self.rules.iter().zip(&activations) {
                if activation <= 0.0 {
                    continue;
                }
                for assign in &rule.consequents {
                    if assign.variable == *name {
                        let mf = var
                            .set(&assign.set)
                            .expect("validated at construction");
                        clipped.push(ClippedSet {
                            mf: *mf,
                            cap: activation,
                        });
                    }
                }
            }
            let value = centroid_exact(&clipped).unwrap_or_else(|| var.neutral());
            outputs.insert(name.clone(), value);
        }
        Ok(InferenceTrace {
            fuzzified,
            activations,
            outputs,
        })
    }

    /// Crisp outputs only.
    pub fn infer(&self, crisp: &IndexMap<String, f64>) -> Result<IndexMap<String, f64>, FisError> {
        Ok(self.infer_trace(crisp)?.outputs)
    }
}
