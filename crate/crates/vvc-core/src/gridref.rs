//! Brute-force fine-grid reference for Mamdani inference, used by the test
//! suites to cross-check [`crate::fis::RuleBase::infer`]. It shares only the
//! trapezoid degree primitive with the engine; rule evaluation, aggregation
//! and defuzzification are recomputed here by direct pointwise sampling.
#![doc(hidden)]

use indexmap::IndexMap;

use crate::fis::{FisError, RuleBase};

/// Compensated (Kahan) accumulator; 1e6-term sums must not lose the digits
/// the comparison tolerance is made of.
#[derive(Default)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    fn add(&mut self, value: f64) {
        let y = value - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Mamdani inference by sampling every output universe on `points` uniform
/// grid nodes (trapezoid end weights). Falls back to the variable's neutral
/// value when the aggregate area is zero.
pub fn infer_on_grid(
    rb: &RuleBase,
    crisp: &IndexMap<String, f64>,
    points: usize,
) -> Result<IndexMap<String, f64>, FisError> {
    assert!(points >= 2);

    // fuzzify independently: walk variables and sets directly
    let mut degrees: IndexMap<&str, IndexMap<&str, f64>> = IndexMap::new();
    for var in rb.inputs() {
        let x = *crisp
            .get(var.name())
            .ok_or_else(|| FisError::MissingInput {
                variable: var.name().to_string(),
            })?;
        let x = var.clamp(x);
        let per_set: IndexMap<&str, f64> = var.sets().map(|(n, mf)| (n, mf.degree(x))).collect();
        degrees.insert(var.name(), per_set);
    }

    let mut activations = Vec::with_capacity(rb.rules().len());
    for rule in rb.rules() {
        let mut act = 1.0f64;
        for clause in &rule.antecedents {
            let d = degrees[clause.variable.as_str()][clause.set.as_str()];
            act = act.min(if clause.negated { 1.0 - d } else { d });
        }
        activations.push(act);
    }

    let mut outputs = IndexMap::new();
    for var in rb.outputs() {
        let (lo, hi) = var.universe();
        let step = (hi - lo) / (points - 1) as f64;
        let mut area = Kahan::default();
        let mut moment = Kahan::default();
        for i in 0..points {
            let x = lo + step * i as f64;
            let mut g = 0.0f64;
            for (rule, &act) in rb.rules().iter().zip(&activations) {
                if act <= 0.0 {
                    continue;
                }
                for assign in &rule.consequents {
                    if assign.variable == var.name() {
                        let mf = var.set(&assign.set).expect("validated rulebase");
                        g = g.max(mf.degree(x).min(act));
                    }
                }
            }
            let w = if i == 0 || i == points - 1 { 0.5 } else { 1.0 };
            area.add(w * g);
            moment.add(w * x * g);
        }
        let value = if area.sum * step <= 1e-12 {
            var.neutral()
        } else {
            moment.sum / area.sum
        };
        outputs.insert(var.name().to_string(), value);
    }
    Ok(outputs)
}
