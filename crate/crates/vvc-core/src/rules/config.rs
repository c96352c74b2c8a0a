//! Variable declarations (JSON) and rulebase loading.
//!
//! Declarations are kept separate from the rule text so rules stay in the
//! plain `If (..) then (..)` form. The JSON document looks like:
//!
//! ```json
//! {
//!   "reference": { "variable": "Voltage", "kv": 21.0 },
//!   "variables": [
//!     {
//!       "name": "Voltage", "role": "input", "unit": "kV",
//!       "universe": [19.5, 22.5],
//!       "sets": [
//!         { "name": "VL", "shape": "trapezoid", "points": [19.5, 19.5, 20.1, 20.3] }
//!       ]
//!     },
//!     {
//!       "name": "Taps", "role": "output", "unit": "tap",
//!       "universe": [-3, 3], "aliases": ["Tap"], "neutral": 0.0,
//!       "sets": [ { "name": "0", "shape": "triangle", "points": [-1, 0, 1] } ]
//!     }
//!   ]
//! }
//! ```
//!
//! `aliases` lets rule text refer to a variable under another spelling.
//! Aliases are resolved by clause position (antecedents against inputs,
//! consequents against outputs), so an output alias may coincide with an
//! input's name.
//!
//! The optional `reference` block names the variable whose sets are anchored
//! to a voltage reference; retargeting to a different reference shifts that
//! variable's universe and breakpoints by the difference.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::parse::{parse_rules_text, ParseError, ParsedRule};
use crate::fis::{FisError, LinguisticVariable, MembershipFunction, Rule, RuleBase, Unit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Input,
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Trapezoid,
    Triangle,
    Singleton,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SetDeclaration {
    pub name: String,
    pub shape: Shape,
    pub points: Vec<f64>,
}

impl SetDeclaration {
    pub fn membership(&self) -> Result<MembershipFunction, String> {
        let expected = match self.shape {
            Shape::Trapezoid => 4,
            Shape::Triangle => 3,
            Shape::Singleton => 1,
        };
        if self.points.len() != expected {
            return Err(format!(
                "{:?} needs {} points, got {}",
                self.shape,
                expected,
                self.points.len()
            ));
        }
        let p = &self.points;
        let mf = match self.shape {
            Shape::Trapezoid => MembershipFunction::trapezoid(p[0], p[1], p[2], p[3]),
            Shape::Triangle => MembershipFunction::triangle(p[0], p[1], p[2]),
            Shape::Singleton => MembershipFunction::singleton(p[0]),
        };
        mf.map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariableDeclaration {
    pub name: String,
    pub role: Role,
    pub unit: Unit,
    pub universe: [f64; 2],
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aliases: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neutral: Option<f64>,
    pub sets: Vec<SetDeclaration>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReferenceDeclaration {
    pub variable: String,
    pub kv: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeclarationFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceDeclaration>,
    pub variables: Vec<VariableDeclaration>,
}

impl DeclarationFile {
    pub fn from_json(src: &str) -> Result<Self, LoadError> {
        serde_json::from_str(src).map_err(|e| {
            LoadError::single(LoadIssue::Json {
                message: e.to_string(),
            })
        })
    }

    /// Shift the reference variable so its semantics track a new voltage
    /// reference (e.g. running the controller at 20.475 kV instead of 21.0).
    pub fn retargeted(mut self, new_kv: f64) -> Result<Self, LoadError> {
        let reference = self.reference.as_mut().ok_or_else(|| {
            LoadError::single(LoadIssue::Declaration {
                variable: "<reference>".into(),
                message: "declaration file has no reference block to retarget".into(),
            })
        })?;
        let delta = new_kv - reference.kv;
        if delta == 0.0 {
            return Ok(self);
        }
        let target = reference.variable.clone();
        reference.kv = new_kv;
        let var = self
            .variables
            .iter_mut()
            .find(|v| v.name == target)
            .ok_or_else(|| {
                LoadError::single(LoadIssue::Declaration {
                    variable: target.clone(),
                    message: "reference block names an undeclared variable".into(),
                })
            })?;
        var.universe = [var.universe[0] + delta, var.universe[1] + delta];
        if let Some(n) = var.neutral.as_mut() {
            *n += delta;
        }
        for set in &mut var.sets {
            for p in &mut set.points {
                *p += delta;
            }
        }
        Ok(self)
    }
}

/// One problem found while loading a rulebase.
#[derive(Debug, Clone, Serialize)]
pub enum LoadIssue {
    Io {
        path: String,
        message: String,
    },
    Json {
        message: String,
    },
    Parse(ParseError),
    Declaration {
        variable: String,
        message: String,
    },
    DuplicateVariable {
        name: String,
    },
    DuplicateAlias {
        alias: String,
        variable: String,
    },
    UndeclaredVariable {
        line: usize,
        variable: String,
    },
    UndeclaredSet {
        line: usize,
        variable: String,
        set: String,
    },
    OutputInAntecedent {
        line: usize,
        variable: String,
    },
    InputInConsequent {
        line: usize,
        variable: String,
    },
    Invalid {
        message: String,
    },
}

impl fmt::Display for LoadIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadIssue::Io { path, message } => write!(f, "{path}: {message}"),
            LoadIssue::Json { message } => write!(f, "declaration file: {message}"),
            LoadIssue::Parse(e) => write!(f, "{e}"),
            LoadIssue::Declaration { variable, message } => {
                write!(f, "variable '{variable}': {message}")
            }
            LoadIssue::DuplicateVariable { name } => {
                write!(f, "duplicate variable name '{name}'")
            }
            LoadIssue::DuplicateAlias { alias, variable } => {
                write!(f, "alias '{alias}' of '{variable}' collides with another name")
            }
            LoadIssue::UndeclaredVariable { line, variable } => {
                write!(f, "line {line}: undeclared variable '{variable}'")
            }
            LoadIssue::UndeclaredSet {
                line,
                variable,
                set,
            } => write!(f, "line {line}: variable '{variable}' has no set '{set}'"),
            LoadIssue::OutputInAntecedent { line, variable } => write!(
                f,
                "line {line}: output variable '{variable}' used as a condition"
            ),
            LoadIssue::InputInConsequent { line, variable } => write!(
                f,
                "line {line}: input variable '{variable}' used as a consequent"
            ),
            LoadIssue::Invalid { message } => f.write_str(message),
        }
    }
}

/// All problems found in one load attempt; nothing is reported piecemeal.
#[derive(Debug)]
pub struct LoadError {
    pub issues: Vec<LoadIssue>,
}

impl LoadError {
    fn single(issue: LoadIssue) -> Self {
        Self {
            issues: vec![issue],
        }
    }

    pub fn has_io_issue(&self) -> bool {
        self.issues.iter().any(|i| matches!(i, LoadIssue::Io { .. }))
    }
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

impl std::error::Error for LoadError {}

struct NameTable {
    /// maps every accepted spelling (canonical name or alias) to canonical
    by_name: HashMap<String, String>,
}

impl NameTable {
    fn new() -> Self {
        Self {
            by_name: HashMap::new(),
        }
    }

    fn insert(&mut self, decl: &VariableDeclaration, issues: &mut Vec<LoadIssue>) {
        if self
            .by_name
            .insert(decl.name.clone(), decl.name.clone())
            .is_some()
        {
            issues.push(LoadIssue::DuplicateVariable {
                name: decl.name.clone(),
            });
        }
        for alias in &decl.aliases {
            if self
                .by_name
                .insert(alias.clone(), decl.name.clone())
                .is_some()
            {
                issues.push(LoadIssue::DuplicateAlias {
                    alias: alias.clone(),
                    variable: decl.name.clone(),
                });
            }
        }
    }

    fn resolve(&self, name: &str) -> Option<&str> {
        self.by_name.get(name).map(String::as_str)
    }
}

/// Cross-check parsed rules against declarations and build the engine's
/// [`RuleBase`]. Collects every error instead of stopping at the first.
pub fn build_rulebase(decls: &DeclarationFile, rules_src: &str) -> Result<RuleBase, LoadError> {
    let mut issues = Vec::new();

    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    let mut input_names = NameTable::new();
    let mut output_names = NameTable::new();
    let mut canonical_seen: HashMap<&str, Role> = HashMap::new();

    for decl in &decls.variables {
        if canonical_seen.insert(&decl.name, decl.role).is_some() {
            issues.push(LoadIssue::DuplicateVariable {
                name: decl.name.clone(),
            });
            continue;
        }
        let mut sets = Vec::with_capacity(decl.sets.len());
        let mut bad = false;
        for set in &decl.sets {
            match set.membership() {
                Ok(mf) => sets.push((set.name.clone(), mf)),
                Err(msg) => {
                    issues.push(LoadIssue::Declaration {
                        variable: decl.name.clone(),
                        message: format!("set '{}': {msg}", set.name),
                    });
                    bad = true;
                }
            }
        }
        if bad {
            continue;
        }
        match LinguisticVariable::new(
            decl.name.clone(),
            decl.unit,
            (decl.universe[0], decl.universe[1]),
            sets,
            decl.neutral,
        ) {
            Ok(var) => match decl.role {
                Role::Input => {
                    input_names.insert(decl, &mut issues);
                    inputs.push(var);
                }
                Role::Output => {
                    output_names.insert(decl, &mut issues);
                    outputs.push(var);
                }
            },
            Err(e) => issues.push(LoadIssue::Declaration {
                variable: decl.name.clone(),
                message: e.to_string(),
            }),
        }
    }

    let parsed: Vec<ParsedRule> = match parse_rules_text(rules_src) {
        Ok(rules) => rules,
        Err(errors) => {
            issues.extend(errors.into_iter().map(LoadIssue::Parse));
            Vec::new()
        }
    };

    let set_exists = |vars: &[LinguisticVariable], name: &str, set: &str| -> bool {
        vars.iter()
            .find(|v| v.name() == name)
            .is_some_and(|v| v.set(set).is_some())
    };

    let mut resolved = Vec::with_capacity(parsed.len());
    for ParsedRule { rule, line } in parsed {
        let mut antecedents = Vec::with_capacity(rule.antecedents.len());
        let mut consequents = Vec::with_capacity(rule.consequents.len());
        let mut ok = true;
        for mut clause in rule.antecedents {
            match input_names.resolve(&clause.variable) {
                Some(canonical) => {
                    clause.variable = canonical.to_string();
                    if !set_exists(&inputs, &clause.variable, &clause.set) {
                        issues.push(LoadIssue::UndeclaredSet {
                            line,
                            variable: clause.variable.clone(),
                            set: clause.set.clone(),
                        });
                        ok = false;
                    }
                    antecedents.push(clause);
                }
                None => {
                    if output_names.resolve(&clause.variable).is_some() {
                        issues.push(LoadIssue::OutputInAntecedent {
                            line,
                            variable: clause.variable,
                        });
                    } else {
                        issues.push(LoadIssue::UndeclaredVariable {
                            line,
                            variable: clause.variable,
                        });
                    }
                    ok = false;
                }
            }
        }
        for mut assign in rule.consequents {
            match output_names.resolve(&assign.variable) {
                Some(canonical) => {
                    assign.variable = canonical.to_string();
                    if !set_exists(&outputs, &assign.variable, &assign.set) {
                        issues.push(LoadIssue::UndeclaredSet {
                            line,
                            variable: assign.variable.clone(),
                            set: assign.set.clone(),
                        });
                        ok = false;
                    }
                    consequents.push(assign);
                }
                None => {
                    if input_names.resolve(&assign.variable).is_some() {
                        issues.push(LoadIssue::InputInConsequent {
                            line,
                            variable: assign.variable,
                        });
                    } else {
                        issues.push(LoadIssue::UndeclaredVariable {
                            line,
                            variable: assign.variable,
                        });
                    }
                    ok = false;
                }
            }
        }
        if ok {
            resolved.push(Rule {
                antecedents,
                consequents,
            });
        }
    }

    if !issues.is_empty() {
        return Err(LoadError { issues });
    }

    RuleBase::new(inputs, outputs, resolved).map_err(|e: FisError| {
        LoadError::single(LoadIssue::Invalid {
            message: e.to_string(),
        })
    })
}

/// Load a rulebase from a declaration file and a rule file, optionally
/// retargeting the voltage reference first.
pub fn load_rulebase_files(
    variables_path: &Path,
    rules_path: &Path,
    retarget_kv: Option<f64>,
) -> Result<RuleBase, LoadError> {
    let read = |path: &Path| {
        std::fs::read_to_string(path).map_err(|e| {
            LoadError::single(LoadIssue::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })
        })
    };
    let decl_src = read(variables_path)?;
    let rules_src = read(rules_path)?;
    let mut decls = DeclarationFile::from_json(&decl_src)?;
    if let Some(kv) = retarget_kv {
        decls = decls.retargeted(kv)?;
    }
    build_rulebase(&decls, &rules_src)
}
