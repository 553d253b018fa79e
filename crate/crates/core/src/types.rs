use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::config::TrainConfig;
use crate::error::{Error, Result};

/// Signed class label. The internal alphabet is {-1, +1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Neg,
    Pos,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Pos => 1.0,
            Label::Neg => -1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Label::Pos => 1,
            Label::Neg => -1,
        }
    }

    /// Maps a raw manifest value: 0 and -1 become `Neg`, 1 and +1 become `Pos`.
    pub fn from_raw(raw: i64) -> Option<Label> {
        match raw {
            1 => Some(Label::Pos),
            0 | -1 => Some(Label::Neg),
            _ => None,
        }
    }

    pub fn flip(self) -> Label {
        match self {
            Label::Pos => Label::Neg,
            Label::Neg => Label::Pos,
        }
    }

    pub fn from_sign(x: f64, tie: Label) -> Label {
        if x > 0.0 {
            Label::Pos
        } else if x < 0.0 {
            Label::Neg
        } else {
            tie
        }
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.serialize_i8(self.as_i8())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let raw = i64::deserialize(d)?;
        Label::from_raw(raw)
            .ok_or_else(|| serde::de::Error::custom(alloc::format!("unknown label value {raw}")))
    }
}

/// Which answer a stump maps to +1: `Pos` predicts +1 on "yes", `Neg` predicts +1 on "no".
pub type Polarity = Label;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub media_ref: String,
    pub label: Label,
}

impl Instance {
    pub fn new(id: impl Into<String>, media_ref: impl Into<String>, label: Label) -> Self {
        Instance {
            id: id.into(),
            media_ref: media_ref.into(),
            label,
        }
    }
}

/// An ordered, validated set of labeled instances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    instances: Vec<Instance>,
    index: BTreeMap<String, usize>,
}

impl Dataset {
    /// Requires at least two instances, unique ids and both classes present.
    pub fn new(instances: Vec<Instance>) -> Result<Self> {
        let ds = Dataset::unchecked_labels(instances)?;
        if ds.len() < 2 {
            return Err(Error::Dataset(alloc::format!(
                "need at least 2 instances, got {}",
                ds.len()
            )));
        }
        let pos = ds.count(Label::Pos);
        if pos == 0 || pos == ds.len() {
            return Err(Error::Dataset(
                "both classes must have at least one member".to_string(),
            ));
        }
        Ok(ds)
    }

    /// Only enforces unique ids and non-emptiness. Used for inference sets where
    /// labels are placeholders or a single class is legitimate.
    pub fn unchecked_labels(instances: Vec<Instance>) -> Result<Self> {
        if instances.is_empty() {
            return Err(Error::Dataset("dataset is empty".to_string()));
        }
        let mut index = BTreeMap::new();
        for (i, inst) in instances.iter().enumerate() {
            if index.insert(inst.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(inst.id.clone()));
            }
        }
        Ok(Dataset { instances, index })
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn get(&self, i: usize) -> &Instance {
        &self.instances[i]
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.instances.iter().map(|x| x.label).collect()
    }

    pub fn count(&self, label: Label) -> usize {
        self.instances.iter().filter(|x| x.label == label).count()
    }

    pub fn into_instances(self) -> Vec<Instance> {
        self.instances
    }
}

/// Content hash of a normalized question: first 16 hex chars of SHA-256.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AttrId(String);

impl AttrId {
    pub fn for_question(question: &str) -> AttrId {
        let normalized = normalize_question(question);
        let digest = Sha256::digest(normalized.as_bytes());
        AttrId(hex::encode(&digest[..8]))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Wraps a stored id, checking its shape only.
    pub fn parse(raw: &str) -> Result<AttrId> {
        if raw.len() == 16 && raw.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
            Ok(AttrId(raw.to_string()))
        } else {
            Err(Error::Attribute(alloc::format!("malformed attr_id `{raw}`")))
        }
    }
}

impl fmt::Display for AttrId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Trim, collapse internal whitespace runs to one space.
pub fn collapse_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Canonical form used for identity: collapsed whitespace, case-folded.
pub fn normalize_question(text: &str) -> String {
    collapse_whitespace(text).to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeDefinition {
    pub attr_id: AttrId,
    /// Round in which the question was first discovered (1-based).
    pub iteration: u32,
    pub question: String,
}

impl AttributeDefinition {
    /// Builds a definition from raw oracle text. The question must be non-empty
    /// and end with `?` once whitespace is collapsed.
    pub fn new(question: &str, iteration: u32) -> Result<Self> {
        let question = collapse_whitespace(question);
        if question.is_empty() {
            return Err(Error::Attribute("empty question".to_string()));
        }
        if !question.ends_with('?') {
            return Err(Error::Attribute(alloc::format!(
                "not a yes/no question: `{question}`"
            )));
        }
        if iteration == 0 {
            return Err(Error::Attribute("iteration must be >= 1".to_string()));
        }
        Ok(AttributeDefinition {
            attr_id: AttrId::for_question(&question),
            iteration,
            question,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Answer {
    Yes,
    No,
    Pending,
}

impl Answer {
    pub fn from_bool(b: bool) -> Answer {
        if b {
            Answer::Yes
        } else {
            Answer::No
        }
    }

    pub fn as_bool(self) -> Option<bool> {
        match self {
            Answer::Yes => Some(true),
            Answer::No => Some(false),
            Answer::Pending => None,
        }
    }
}

/// Instances x attributes table of tri-state answers, stored column by column
/// so that each round can append its fresh attributes cheaply.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeMatrix {
    rows: Vec<String>,
    row_index: BTreeMap<String, usize>,
    cols: Vec<AttrId>,
    col_index: BTreeMap<AttrId, usize>,
    cells: Vec<Vec<Answer>>,
}

impl AttributeMatrix {
    pub fn new<'a>(row_ids: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut rows = Vec::new();
        let mut row_index = BTreeMap::new();
        for id in row_ids {
            if row_index.insert(id.to_string(), rows.len()).is_some() {
                return Err(Error::DuplicateId(id.to_string()));
            }
            rows.push(id.to_string());
        }
        Ok(AttributeMatrix {
            rows,
            row_index,
            cols: Vec::new(),
            col_index: BTreeMap::new(),
            cells: Vec::new(),
        })
    }

    pub fn for_dataset(dataset: &Dataset) -> Self {
        // ids are unique by construction of Dataset
        AttributeMatrix::new(dataset.instances().iter().map(|x| x.id.as_str()))
            .expect("dataset ids are unique")
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn row_ids(&self) -> &[String] {
        &self.rows
    }

    pub fn col_ids(&self) -> &[AttrId] {
        &self.cols
    }

    pub fn row(&self, id: &str) -> Option<usize> {
        self.row_index.get(id).copied()
    }

    pub fn col(&self, attr: &AttrId) -> Option<usize> {
        self.col_index.get(attr).copied()
    }

    /// Returns the column index, adding an all-pending column if the attribute is new.
    pub fn ensure_column(&mut self, attr: &AttrId) -> usize {
        if let Some(c) = self.col(attr) {
            return c;
        }
        let c = self.cols.len();
        self.cols.push(attr.clone());
        self.col_index.insert(attr.clone(), c);
        self.cells.push(alloc::vec![Answer::Pending; self.rows.len()]);
        c
    }

    pub fn get(&self, row: usize, col: usize) -> Answer {
        self.cells[col][row]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.cells[col][row] = Answer::from_bool(value);
    }

    pub fn column(&self, col: usize) -> &[Answer] {
        &self.cells[col]
    }

    pub fn pending_in(&self, cols: &[usize]) -> Option<(usize, usize)> {
        for &c in cols {
            if let Some(r) = self.cells[c].iter().position(|a| *a == Answer::Pending) {
                return Some((r, c));
            }
        }
        None
    }

    pub fn pending_error(&self, row: usize, col: usize) -> Error {
        Error::PendingCell {
            instance: self.rows[row].clone(),
            attr: self.cols[col].to_string(),
        }
    }
}

/// Per-instance sampling weights forming a probability distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

/// Tolerance accepted on `Σw = 1` for externally supplied weights.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-6;

impl WeightVector {
    pub fn uniform(n: usize) -> Self {
        WeightVector(alloc::vec![1.0 / n as f64; n])
    }

    /// Accepts weights that already sum to one (within 1e-6). Zeros are allowed
    /// so that point masses can be expressed.
    pub fn from_normalized(w: Vec<f64>) -> Result<Self> {
        check_entries(&w)?;
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::Weights(alloc::format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        Ok(WeightVector(w))
    }

    /// Normalizes non-negative weights with a positive sum.
    pub fn normalize(w: Vec<f64>) -> Result<Self> {
        check_entries(&w)?;
        let sum: f64 = w.iter().sum();
        if sum.is_nan() || sum <= 0.0 {
            return Err(Error::Weights("weights sum to zero".to_string()));
        }
        Ok(WeightVector(w.into_iter().map(|x| x / sum).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        self.0
            .iter()
            .filter(|&&w| w > 0.0)
            .map(|&w| -w * libm::log(w))
            .sum()
    }
}

fn check_entries(w: &[f64]) -> Result<()> {
    if w.is_empty() {
        return Err(Error::Weights("no weights".to_string()));
    }
    if let Some(bad) = w.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::Weights(alloc::format!("invalid weight {bad}")));
    }
    Ok(())
}

/// A one-split classifier over a binary attribute.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stump {
    pub attr_id: AttrId,
    pub polarity: Polarity,
}

impl Stump {
    pub fn predict(&self, answer: bool) -> Label {
        if answer {
            self.polarity
        } else {
            self.polarity.flip()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub stump: Stump,
    pub alpha: f64,
}

/// The boosted ensemble: weighted stumps and the attribute dictionary they use.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    rounds: Vec<Round>,
    attributes: Vec<AttributeDefinition>,
    config: TrainConfig,
}

impl EnsembleModel {
    /// Validates that attribute ids are unique and every stump references a known attribute.
    pub fn new(
        rounds: Vec<Round>,
        attributes: Vec<AttributeDefinition>,
        config: TrainConfig,
    ) -> Result<Self> {
        let mut known = BTreeSet::new();
        for a in &attributes {
            if !known.insert(&a.attr_id) {
                return Err(Error::Model(alloc::format!(
                    "attribute {} listed twice",
                    a.attr_id
                )));
            }
        }
        for (i, r) in rounds.iter().enumerate() {
            if !known.contains(&r.stump.attr_id) {
                return Err(Error::Model(alloc::format!(
                    "round {} references unknown attribute {}",
                    i + 1,
                    r.stump.attr_id
                )));
            }
            if !r.alpha.is_finite() {
                return Err(Error::Model(alloc::format!(
                    "round {} has non-finite alpha",
                    i + 1
                )));
            }
        }
        Ok(EnsembleModel {
            rounds,
            attributes,
            config,
        })
    }

    pub fn rounds(&self) -> &[Round] {
        &self.rounds
    }

    pub fn attributes(&self) -> &[AttributeDefinition] {
        &self.attributes
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn attribute(&self, id: &AttrId) -> Option<&AttributeDefinition> {
        self.attributes.iter().find(|a| &a.attr_id == id)
    }

    /// Distinct attributes referenced by stumps, in first-use order.
    pub fn referenced_attributes(&self) -> Vec<&AttributeDefinition> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for r in &self.rounds {
            if seen.insert(&r.stump.attr_id) {
                out.push(
                    self.attribute(&r.stump.attr_id)
                        .expect("validated at construction"),
                );
            }
        }
        out
    }

    /// Σ αₜ hₜ(x) given the answers for the referenced attributes.
    pub fn margin(&self, answer: impl Fn(&AttrId) -> Option<bool>) -> Result<f64> {
        let mut score = 0.0;
        for r in &self.rounds {
            let a = answer(&r.stump.attr_id).ok_or_else(|| {
                Error::Model(alloc::format!("no answer for {}", r.stump.attr_id))
            })?;
            score += r.alpha * r.stump.predict(a).sign();
        }
        Ok(score)
    }

    /// Same model with every α multiplied by `c`.
    pub fn scaled(&self, c: f64) -> EnsembleModel {
        let mut m = self.clone();
        for r in &mut m.rounds {
            r.alpha *= c;
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn label_mapping() {
        assert_eq!(Label::from_raw(1), Some(Label::Pos));
        assert_eq!(Label::from_raw(0), Some(Label::Neg));
        assert_eq!(Label::from_raw(-1), Some(Label::Neg));
        assert_eq!(Label::from_raw(2), None);
        for y in [Label::Pos, Label::Neg] {
            assert_eq!(Label::from_raw(y.as_i8() as i64), Some(y));
        }
    }

    #[test]
    fn dataset_rejects_duplicates_and_single_class() {
        let a = Instance::new("a", "a.wav", Label::Pos);
        let b = Instance::new("b", "b.wav", Label::Neg);
        assert!(matches!(
            Dataset::new(vec![a.clone(), a.clone()]),
            Err(Error::DuplicateId(id)) if id == "a"
        ));
        assert!(matches!(
            Dataset::new(vec![a.clone(), Instance::new("c", "c", Label::Pos)]),
            Err(Error::Dataset(_))
        ));
        assert!(Dataset::new(vec![]).is_err());
        let ds = Dataset::new(vec![a, b]).unwrap();
        assert_eq!(ds.position("b"), Some(1));
    }

    #[test]
    fn attr_id_ignores_case_and_spacing() {
        let a = AttrId::for_question("Does the speaker sound cheerful?");
        let b = AttrId::for_question("  does  the speaker\tsound CHEERFUL? ");
        assert_eq!(a, b);
        assert_eq!(a.as_str().len(), 16);
        assert_ne!(a, AttrId::for_question("Does the speaker sound sad?"));
        assert!(AttrId::parse(a.as_str()).is_ok());
        assert!(AttrId::parse("XYZ").is_err());
    }

    #[test]
    fn attribute_definition_requires_question_mark() {
        assert!(AttributeDefinition::new("Is it loud", 1).is_err());
        assert!(AttributeDefinition::new("   ", 1).is_err());
        let d = AttributeDefinition::new(" Is   it loud? ", 2).unwrap();
        assert_eq!(d.question, "Is it loud?");
    }

    #[test]
    fn weights_validation() {
        assert!(WeightVector::from_normalized(vec![0.5, 0.5]).is_ok());
        assert!(WeightVector::from_normalized(vec![0.5, 0.6]).is_err());
        assert!(WeightVector::from_normalized(vec![1.5, -0.5]).is_err());
        let w = WeightVector::normalize(vec![1.0, 3.0]).unwrap();
        assert_eq!(w.as_slice(), &[0.25, 0.75]);
        assert!(WeightVector::normalize(vec![0.0, 0.0]).is_err());
        let u = WeightVector::uniform(4);
        assert!((u.entropy() - libm::log(4.0)).abs() < 1e-12);
    }

    #[test]
    fn matrix_columns_start_pending() {
        let mut m = AttributeMatrix::new(["x", "y"]).unwrap();
        let attr = AttrId::for_question("Loud?");
        let c = m.ensure_column(&attr);
        assert_eq!(m.ensure_column(&attr), c);
        assert_eq!(m.pending_in(&[c]), Some((0, c)));
        m.set(0, c, true);
        m.set(1, c, false);
        assert_eq!(m.pending_in(&[c]), None);
        assert_eq!(m.column(c), &[Answer::Yes, Answer::No]);
    }

    #[test]
    fn model_rejects_unknown_stump_attribute() {
        let attr = AttributeDefinition::new("Loud?", 1).unwrap();
        let stump = Stump {
            attr_id: AttrId::for_question("Quiet?"),
            polarity: Label::Pos,
        };
        let err = EnsembleModel::new(
            vec![Round { stump, alpha: 0.5 }],
            vec![attr],
            TrainConfig::default(),
        );
        assert!(matches!(err, Err(Error::Model(_))));
    }
}
