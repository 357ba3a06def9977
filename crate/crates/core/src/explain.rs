//! Linguistic IF…THEN rules built from prototype raw-space means, and
//! per-pixel explanations of the nearest-prototype vote.
//!
//! `~` in a rendered rule reads "is similar to". Rules describe prototypes;
//! decisions are still made by the kernel vote in [`crate::model`].

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::Result;
use crate::model::{IdssModel, PixelDecision};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Rule {
    pub class_id: u8,
    pub prototype_index: usize,
    /// One `(band name, mean reflectance)` term per raw band.
    pub terms: Vec<(String, f64)>,
    pub support_count: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RuleSet {
    pub by_class: BTreeMap<u8, Vec<Rule>>,
    pub class_names: BTreeMap<u8, String>,
    pub band_names: Vec<String>,
}

impl RuleSet {
    pub fn len(&self) -> usize {
        self.by_class.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn rules(&self) -> impl Iterator<Item = &Rule> {
        self.by_class.values().flatten()
    }

    /// Rule for a prototype index, if present.
    pub fn rule_for(&self, prototype_index: usize) -> Option<&Rule> {
        self.rules().find(|r| r.prototype_index == prototype_index)
    }

    /// One rule per line, classes in id order.
    pub fn to_text(&self, precision: usize) -> String {
        let mut out = String::new();
        for rule in self.rules() {
            out.push_str(&render_rule_text(rule, &self.class_names, precision));
            out.push('\n');
        }
        out
    }

    /// A single disjunctive rule for `class_id`.
    pub fn class_disjunction(&self, class_id: u8, precision: usize) -> Option<String> {
        let rules = self.by_class.get(&class_id).filter(|r| !r.is_empty())?;
        let body: Vec<String> = rules
            .iter()
            .map(|r| format!("({})", render_antecedent(r, precision)))
            .collect();
        Some(format!("IF {} THEN {}", body.join(" OR "), class_label(&self.class_names, class_id)))
    }

    /// Structured export: prototype fields plus the rendered text.
    pub fn to_json(&self, precision: usize) -> Result<String> {
        #[derive(Serialize)]
        struct Entry<'a> {
            class_id: u8,
            class_name: &'a str,
            prototype_index: usize,
            support_count: u64,
            raw_center: Vec<f64>,
            text: String,
        }
        #[derive(Serialize)]
        struct Export<'a> {
            band_names: &'a [String],
            class_names: &'a BTreeMap<u8, String>,
            precision: usize,
            rules: Vec<Entry<'a>>,
        }
        let rules = self
            .rules()
            .map(|r| Entry {
                class_id: r.class_id,
                class_name: class_label(&self.class_names, r.class_id),
                prototype_index: r.prototype_index,
                support_count: r.support_count,
                raw_center: r.terms.iter().map(|t| t.1).collect(),
                text: render_rule_text(r, &self.class_names, precision),
            })
            .collect();
        let export = Export {
            band_names: &self.band_names,
            class_names: &self.class_names,
            precision,
            rules,
        };
        let mut s = serde_json::to_string_pretty(&export).map_err(|e| crate::Error::Schema(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }
}

fn class_label(names: &BTreeMap<u8, String>, class_id: u8) -> &str {
    names.get(&class_id).map(String::as_str).unwrap_or("?")
}

pub fn generate_rules(model: &IdssModel) -> RuleSet {
    let mut by_class: BTreeMap<u8, Vec<Rule>> = BTreeMap::new();
    for (i, p) in model.prototypes.iter().enumerate() {
        by_class.entry(p.class_id).or_default().push(Rule {
            class_id: p.class_id,
            prototype_index: i,
            terms: model.band_names.iter().cloned().zip(p.raw_center.iter().copied()).collect(),
            support_count: p.support_count,
        });
    }
    RuleSet {
        by_class,
        class_names: model.class_names.clone(),
        band_names: model.band_names.clone(),
    }
}

fn render_antecedent(rule: &Rule, precision: usize) -> String {
    let mut s = String::new();
    for (i, (band, value)) in rule.terms.iter().enumerate() {
        if i > 0 {
            s.push_str(" AND ");
        }
        // `{:.N}` rounds the exact binary value half-to-even.
        let _ = write!(s, "({band} ~ {value:.precision$})");
    }
    s
}

/// `IF (B01 ~ v1) AND (B02 ~ v2) AND … THEN <class>`
pub fn render_rule_text(rule: &Rule, class_names: &BTreeMap<u8, String>, precision: usize) -> String {
    format!(
        "IF {} THEN {}",
        render_antecedent(rule, precision),
        class_label(class_names, rule.class_id)
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExplanationEntry<'a> {
    pub prototype_index: usize,
    pub class_id: u8,
    pub similarity: f64,
    pub rule: &'a Rule,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Explanation<'a> {
    pub decision: PixelDecision,
    /// The K neighbors, most similar first.
    pub entries: Vec<ExplanationEntry<'a>>,
}

pub fn explain_pixel<'r>(f: &[f32], model: &IdssModel, rules: &'r RuleSet) -> Result<Explanation<'r>> {
    let decision = model.decide(f)?;
    let by_index: BTreeMap<usize, &Rule> = rules.rules().map(|r| (r.prototype_index, r)).collect();
    let entries = decision
        .neighbor_ids
        .iter()
        .zip(&decision.neighbor_similarities)
        .map(|(&i, &s)| {
            let rule = by_index.get(&i).copied().ok_or_else(|| {
                crate::Error::Schema(format!("rule set has no rule for prototype {i}"))
            })?;
            Ok(ExplanationEntry {
                prototype_index: i,
                class_id: rule.class_id,
                similarity: s,
                rule,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Explanation { decision, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureSpace;
    use crate::kmeans::KMeansConfig;
    use crate::model::{default_class_names, ModelConfig, Prototype, FORMAT_VERSION};
    use crate::raster::Class;

    fn model(protos: Vec<(u8, Vec<f64>)>, k: usize) -> IdssModel {
        let d = protos[0].1.len();
        IdssModel {
            format_version: FORMAT_VERSION,
            config: ModelConfig {
                m_per_class: 1,
                k_neighbors: k,
                feature: FeatureSpace::raw(d).with_normalize(false),
                kmeans: KMeansConfig::default(),
            },
            band_names: crate::raster::default_band_names(d),
            class_names: default_class_names(),
            prototypes: protos
                .into_iter()
                .map(|(class_id, raw_center)| Prototype {
                    class_id,
                    support_count: 3,
                    raw_center,
                    latent_center: None,
                })
                .collect(),
        }
    }

    #[test]
    fn bijection_and_identity() {
        let m = model(vec![(2, vec![0.5, 0.25]), (1, vec![0.125, 0.75])], 1);
        let rules = generate_rules(&m);
        assert_eq!(rules.len(), 2);
        for r in rules.rules() {
            let p = &m.prototypes[r.prototype_index];
            let values: Vec<f64> = r.terms.iter().map(|t| t.1).collect();
            assert_eq!(values, p.raw_center);
            assert_eq!(r.class_id, p.class_id);
        }
        // Classes come out in id order.
        assert_eq!(rules.rules().next().unwrap().class_id, 1);
    }

    #[test]
    fn rendering() {
        let m = model(vec![(2, vec![0.5, 0.25])], 1);
        let rules = generate_rules(&m);
        let r = rules.rules().next().unwrap();
        let text = render_rule_text(r, &rules.class_names, 2);
        assert_eq!(text, "IF (B01 ~ 0.50) AND (B02 ~ 0.25) THEN Water");
        assert_eq!(text, render_rule_text(r, &rules.class_names, 2));
        // Exact ties round to even.
        assert_eq!(render_rule_text(r, &rules.class_names, 0), "IF (B01 ~ 0) AND (B02 ~ 0) THEN Water");
        let m = model(vec![(1, vec![1.5, 2.5])], 1);
        let rules = generate_rules(&m);
        assert_eq!(rules.to_text(0), "IF (B01 ~ 2) AND (B02 ~ 2) THEN Land\n");
    }

    #[test]
    fn disjunction() {
        let m = model(vec![(2, vec![0.5]), (2, vec![0.25]), (1, vec![1.0])], 1);
        let rules = generate_rules(&m);
        assert_eq!(
            rules.class_disjunction(2, 2).unwrap(),
            "IF ((B01 ~ 0.50)) OR ((B01 ~ 0.25)) THEN Water"
        );
        assert!(rules.class_disjunction(3, 2).is_none());
    }

    #[test]
    fn explanation_matches_decision() {
        let m = model(
            vec![(1, vec![0.0, 0.0]), (2, vec![1.0, 1.0]), (3, vec![2.0, 2.0]), (2, vec![1.1, 1.0])],
            3,
        );
        let rules = generate_rules(&m);
        let e = explain_pixel(&[1.0, 1.0], &m, &rules).unwrap();
        assert_eq!(e.entries.len(), 3);
        assert_eq!(e.entries[0].similarity, 1.0);
        assert_eq!(e.entries[0].prototype_index, 1);
        assert_eq!(e.entries[0].rule.terms[0].1, 1.0);
        assert!(e.entries.windows(2).all(|w| w[0].similarity >= w[1].similarity));
        assert_eq!(e.decision.label, Class::Water);
        assert_eq!(e.decision, m.decide(&[1.0, 1.0]).unwrap());
    }

    #[test]
    fn json_export_has_rendered_text() {
        let m = model(vec![(3, vec![0.5, 0.25])], 1);
        let json = generate_rules(&m).to_json(2).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["rules"][0]["text"], "IF (B01 ~ 0.50) AND (B02 ~ 0.25) THEN Cloud");
        assert_eq!(v["rules"][0]["raw_center"][1], 0.25);
    }
}
