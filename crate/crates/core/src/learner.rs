//! Weighted decision stumps over binary attribute columns.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::types::{Answer, AttrId, AttributeMatrix, Label, Polarity, Stump, WeightVector};

#[derive(Debug, Clone, PartialEq)]
pub struct StumpSearchResult {
    pub stump: Stump,
    /// Matrix column of the chosen attribute.
    pub column: usize,
    /// `Σ wᵢ·1[hᵢ ≠ yᵢ]` over the (normalized) weights.
    pub weighted_error: f64,
    /// Weighted accuracy minus one half.
    pub edge: f64,
}

/// `Σ 1[yᵢ = hᵢ] wᵢ / Σ wᵢ − 0.5`.
pub fn edge(predictions: &[Label], labels: &[Label], weights: &[f64]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: labels.len(),
            actual: predictions.len(),
        });
    }
    if weights.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: labels.len(),
            actual: weights.len(),
        });
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::Weights("weights must be finite and non-negative".into()));
    }
    let total: f64 = weights.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::Weights("all weights are zero".into()));
    }
    let correct: f64 = predictions
        .iter()
        .zip(labels)
        .zip(weights)
        .filter(|((h, y), _)| h == y)
        .map(|(_, w)| w)
        .sum();
    Ok(correct / total - 0.5)
}

/// Weighted error of `(column, polarity)`, summed in index order.
fn candidate_error(column: &[Answer], polarity: Polarity, labels: &[Label], w: &[f64]) -> f64 {
    let mut err = 0.0;
    for i in 0..labels.len() {
        let yes = column[i] == Answer::Yes;
        let h = if yes { polarity } else { polarity.flip() };
        if h != labels[i] {
            err += w[i];
        }
    }
    err
}

/// Exhaustive search over `cols × {+1, −1}` for the stump with the lowest
/// weighted error. Ties go to the lowest column position in `cols`, then to
/// polarity +1.
pub fn train_stump(
    matrix: &AttributeMatrix,
    cols: &[usize],
    labels: &[Label],
    weights: &WeightVector,
) -> Result<StumpSearchResult> {
    if cols.is_empty() {
        return Err(Error::Attribute("stump search over an empty column set".into()));
    }
    let n = matrix.n_rows();
    if labels.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: labels.len(),
        });
    }
    if weights.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: weights.len(),
        });
    }
    let w = weights.as_slice();
    let total: f64 = w.iter().sum();
    if (total - 1.0).abs() > crate::types::WEIGHT_SUM_TOLERANCE {
        return Err(Error::Weights(alloc::format!(
            "stump search needs normalized weights, sum is {total}"
        )));
    }
    if let Some((r, c)) = matrix.pending_in(cols) {
        return Err(matrix.pending_error(r, c));
    }

    let mut best: Option<(f64, f64, usize, Polarity)> = None;
    for &c in cols {
        let column = matrix.column(c);
        let err_pos = candidate_error(column, Label::Pos, labels, w);
        let err_neg = candidate_error(column, Label::Neg, labels, w);
        for (err, other, polarity) in [(err_pos, err_neg, Label::Pos), (err_neg, err_pos, Label::Neg)] {
            if best.is_none_or(|(b, _, _, _)| err < b) {
                best = Some((err, other, c, polarity));
            }
        }
    }
    let (err, correct, column, polarity) = best.expect("cols is non-empty");
    // The instances a stump gets right are exactly those its mirror gets
    // wrong, so `correct` is the mirror's error and `correct >= err` exactly.
    let mass = correct + err;
    Ok(StumpSearchResult {
        stump: Stump {
            attr_id: matrix.col_ids()[column].clone(),
            polarity,
        },
        column,
        weighted_error: err,
        edge: 0.5 * (correct - err) / mass,
    })
}

/// ±1 predictions of `stump` over a fully answered column.
pub fn stump_predictions(matrix: &AttributeMatrix, column: usize, stump: &Stump) -> Result<Vec<Label>> {
    matrix
        .column(column)
        .iter()
        .enumerate()
        .map(|(r, a)| match a.as_bool() {
            Some(b) => Ok(stump.predict(b)),
            None => Err(matrix.pending_error(r, column)),
        })
        .collect()
}

/// Columns of `attrs` in `matrix`, in first-seen order without repeats.
pub fn columns_of(matrix: &AttributeMatrix, attrs: &[AttrId]) -> Result<Vec<usize>> {
    let mut cols = Vec::with_capacity(attrs.len());
    for a in attrs {
        let c = matrix
            .col(a)
            .ok_or_else(|| Error::Attribute(alloc::format!("attribute {a} not in matrix")))?;
        if !cols.contains(&c) {
            cols.push(c);
        }
    }
    Ok(cols)
}
