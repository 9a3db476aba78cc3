//! Evaluation metrics.

/// Precision, recall and F1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf { precision, recall, f1 }
    }

    pub fn mean(items: &[Prf]) -> Prf {
        let n = items.len().max(1) as f64;
        Prf {
            precision: items.iter().map(|p| p.precision).sum::<f64>() / n,
            recall: items.iter().map(|p| p.recall).sum::<f64>() / n,
            f1: items.iter().map(|p| p.f1).sum::<f64>() / n,
        }
    }
}

/// Scores of the positive class of a binary task.
pub fn positive_class(pred: &[bool], actual: &[bool]) -> Prf {
    class_scores(pred, actual, true)
}

fn class_scores(pred: &[bool], actual: &[bool], class: bool) -> Prf {
    assert_eq!(pred.len(), actual.len());
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (&p, &a) in pred.iter().zip(actual) {
        match (p == class, a == class) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    Prf::from_counts(tp, fp, fn_)
}

/// Macro average over the positive and negative class.
///
/// A class that appears in neither `pred` nor `actual` is left out of the
/// average; with both classes absent (empty input) the result is all zeros.
pub fn macro_f1(pred: &[bool], actual: &[bool]) -> Prf {
    let classes: Vec<Prf> = [true, false]
        .into_iter()
        .filter(|&c| pred.contains(&c) || actual.contains(&c))
        .map(|c| class_scores(pred, actual, c))
        .collect();
    Prf::mean(&classes)
}

pub fn mae(pred: &[f64], actual: &[f64]) -> f64 {
    assert_eq!(pred.len(), actual.len());
    if pred.is_empty() {
        return 0.0;
    }
    pred.iter().zip(actual).map(|(p, a)| (p - a).abs()).sum::<f64>() / pred.len() as f64
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation; 0 when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    if x.is_empty() {
        return 0.0;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Spearman rank correlation with average ranks for ties. Constant inputs
/// give 0.
pub fn spearman_rho(pred: &[f64], actual: &[f64]) -> f64 {
    pearson(&average_ranks(pred), &average_ranks(actual))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_examples() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(spearman_rho(&a, &a), 1.0);
        assert_eq!(spearman_rho(&a, &[4.0, 3.0, 2.0, 1.0]), -1.0);
        assert!((spearman_rho(&a, &[1.0, 3.0, 2.0, 4.0]) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn ties_share_rank() {
        assert_eq!(average_ranks(&[5.0, 1.0, 5.0, 3.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn perfect_predictions() {
        let y = [true, false, true, true];
        let m = macro_f1(&y, &y);
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
        let only_pos = [true, true];
        assert_eq!(macro_f1(&only_pos, &only_pos).f1, 1.0);
    }

    #[test]
    fn hand_counted_f1() {
        // positive: tp 1, fp 1, fn 1 -> P = R = F1 = 0.5
        // negative: tp 1, fp 1, fn 1 -> 0.5
        let pred = [true, true, false, false];
        let actual = [true, false, true, false];
        let m = macro_f1(&pred, &actual);
        assert_eq!(m.f1, 0.5);
        let pos = positive_class(&[true, false, false], &[true, true, false]);
        assert_eq!((pos.precision, pos.recall), (1.0, 0.5));
        assert!((pos.f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn mae_value() {
        assert_eq!(mae(&[1.0, 2.0], &[2.0, 0.0]), 1.5);
    }
}
