//! Benchmark metrics.
//!
//! Rank statistics use average ranks for ties. AUPRC is average precision:
//! the step integral of precision over recall at every distinct score.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::chem::{circular_fingerprint, parse_smiles, tanimoto, Molecule};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("inputs have different lengths ({0} and {1})")]
    LengthMismatch(usize, usize),
    #[error("no inputs")]
    Empty,
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
}

type Result<T> = std::result::Result<T, MetricError>;

fn check(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(MetricError::LengthMismatch(a, b));
    }
    if a == 0 {
        return Err(MetricError::Empty);
    }
    Ok(())
}

pub fn accuracy<T: PartialEq>(preds: &[T], truths: &[T]) -> Result<f64> {
    check(preds.len(), truths.len())?;
    let hits = preds.iter().zip(truths).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / preds.len() as f64)
}

pub fn mae(preds: &[f64], truths: &[f64]) -> Result<f64> {
    check(preds.len(), truths.len())?;
    Ok(preds.iter().zip(truths).map(|(p, t)| (p - t).abs()).sum::<f64>() / preds.len() as f64)
}

pub fn rmse(preds: &[f64], truths: &[f64]) -> Result<f64> {
    check(preds.len(), truths.len())?;
    let mse = preds.iter().zip(truths).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / preds.len() as f64;
    Ok(mse.sqrt())
}

/// 1-based ranks, ties sharing the mean of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricError::DegenerateInput("constant vector"));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check(x.len(), y.len())?;
    pearson(&average_ranks(x), &average_ranks(y))
}

fn class_counts(labels: &[bool]) -> Result<(usize, usize)> {
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(MetricError::DegenerateInput("single class"));
    }
    Ok((pos, neg))
}

/// Area under the ROC curve from the Mann-Whitney rank statistic.
pub fn auroc(labels: &[bool], scores: &[f64]) -> Result<f64> {
    check(labels.len(), scores.len())?;
    let (pos, neg) = class_counts(labels)?;
    let ranks = average_ranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos * neg) as f64)
}

/// Average precision over the distinct score thresholds, highest first.
pub fn auprc(labels: &[bool], scores: &[f64]) -> Result<f64> {
    check(labels.len(), scores.len())?;
    let (pos, _) = class_counts(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut seen, mut prev_recall, mut ap) = (0usize, 0usize, 0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            tp += labels[order[i]] as usize;
            seen += 1;
            i += 1;
        }
        let recall = tp as f64 / pos as f64;
        ap += (recall - prev_recall) * (tp as f64 / seen as f64);
        prev_recall = recall;
    }
    Ok(ap)
}

/// Fraction of repetitions that produced a usable answer.
pub fn validity_fraction(valid: &[bool]) -> Result<f64> {
    if valid.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(valid.iter().filter(|&&v| v).count() as f64 / valid.len() as f64)
}

/// A molecular property predictor.
pub trait PropertyOracle {
    fn name(&self) -> &str;
    fn predict(&self, m: &Molecule) -> f64;
}

/// One optimization objective: a property and the direction it should move.
pub struct Objective<'a> {
    pub oracle: &'a dyn PropertyOracle,
    pub maximize: bool,
}

/// Molecular weight; a stand-in property for end-to-end tests.
pub struct MolecularWeight;

impl PropertyOracle for MolecularWeight {
    fn name(&self) -> &str {
        "molecular_weight"
    }

    fn predict(&self, m: &Molecule) -> f64 {
        m.molecular_weight()
    }
}

/// Heavy-atom count; a stand-in property for end-to-end tests.
pub struct HeavyAtoms;

impl PropertyOracle for HeavyAtoms {
    fn name(&self) -> &str {
        "heavy_atoms"
    }

    fn predict(&self, m: &Molecule) -> f64 {
        m.heavy_atom_count() as f64
    }
}

fn molecule(s: &str) -> Option<Molecule> {
    parse_smiles(s).ok().filter(|m| !m.is_empty())
}

fn improved(input: &Molecule, output: &Molecule, objectives: &[Objective]) -> bool {
    objectives.iter().all(|o| {
        let (a, b) = (o.oracle.predict(input), o.oracle.predict(output));
        if o.maximize {
            b > a
        } else {
            b < a
        }
    })
}

/// Fraction of (input, output) pairs where the output is a valid molecule
/// that moves every objective in its direction. `None` outputs count as
/// failures.
pub fn success_rate(inputs: &[String], outputs: &[Option<String>], objectives: &[Objective]) -> Result<f64> {
    check(inputs.len(), outputs.len())?;
    let mut hits = 0;
    for (i, o) in inputs.iter().zip(outputs) {
        let (Some(a), Some(b)) = (molecule(i), o.as_deref().and_then(molecule)) else {
            continue;
        };
        hits += improved(&a, &b, objectives) as usize;
    }
    Ok(hits as f64 / inputs.len() as f64)
}

/// Mean relative change in the objectives' favoured direction, over the
/// successful pairs. A zero-valued input property is degenerate.
pub fn relative_improvement(inputs: &[String], outputs: &[Option<String>], objectives: &[Objective]) -> Result<f64> {
    check(inputs.len(), outputs.len())?;
    let mut total = 0.0;
    let mut n = 0usize;
    for (i, o) in inputs.iter().zip(outputs) {
        let (Some(a), Some(b)) = (molecule(i), o.as_deref().and_then(molecule)) else {
            continue;
        };
        if !improved(&a, &b, objectives) {
            continue;
        }
        let mut per = 0.0;
        for obj in objectives {
            let (pa, pb) = (obj.oracle.predict(&a), obj.oracle.predict(&b));
            if pa == 0.0 {
                return Err(MetricError::DegenerateInput("zero baseline property"));
            }
            let sign = if obj.maximize { 1.0 } else { -1.0 };
            per += sign * (pb - pa) / pa.abs();
        }
        total += per / objectives.len() as f64;
        n += 1;
    }
    if n == 0 {
        return Ok(0.0);
    }
    Ok(total / n as f64)
}

/// Mean Tanimoto similarity (radius 2, 2048 bits) over pairs where both
/// sides are valid molecules.
pub fn tanimoto_sim_mean(inputs: &[String], outputs: &[Option<String>]) -> Result<f64> {
    check(inputs.len(), outputs.len())?;
    let mut sims = Vec::new();
    for (i, o) in inputs.iter().zip(outputs) {
        let (Some(a), Some(b)) = (molecule(i), o.as_deref().and_then(molecule)) else {
            continue;
        };
        let fa = circular_fingerprint(&a, 2, 2048).expect("fixed fingerprint size is valid");
        let fb = circular_fingerprint(&b, 2, 2048).expect("fixed fingerprint size is valid");
        sims.push(tanimoto(&fa, &fb).expect("same fingerprint size"));
    }
    if sims.is_empty() {
        return Err(MetricError::DegenerateInput("no valid pairs"));
    }
    Ok(sims.iter().sum::<f64>() / sims.len() as f64)
}

/// Fraction of distinct valid answer sets. Each set is a list of SMILES
/// compared as canonical forms, order-insensitive; a set with any invalid
/// member does not count.
pub fn uniqueness(sets: &[Vec<String>]) -> Result<f64> {
    if sets.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut distinct = BTreeSet::new();
    for set in sets {
        let canon: Option<BTreeSet<String>> = set.iter().map(|s| molecule(s).map(|m| m.to_canonical_smiles())).collect();
        if let Some(c) = canon.filter(|c| !c.is_empty()) {
            distinct.insert(c);
        }
    }
    Ok(distinct.len() as f64 / sets.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 5.0]), vec![2.5, 4.0, 2.5, 1.0]);
    }

    #[test]
    fn simple_cases() {
        let l = [false, false, true, true];
        assert_eq!(auroc(&l, &[0.1, 0.2, 0.3, 0.4]).unwrap(), 1.0);
        assert_eq!(auprc(&l, &[0.1, 0.2, 0.3, 0.4]).unwrap(), 1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        assert_eq!(auroc(&[true, true], &[0.1, 0.2]), Err(MetricError::DegenerateInput("single class")));
        assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]), Err(MetricError::DegenerateInput("constant vector")));
        assert_eq!(mae(&[1.0], &[1.0, 2.0]), Err(MetricError::LengthMismatch(1, 2)));
    }

    #[test]
    fn uniqueness_is_order_insensitive() {
        let sets = vec![
            vec!["CCO".to_string(), "O".to_string()],
            vec!["O".to_string(), "OCC".to_string()],
            vec!["C(".to_string()],
            vec!["CC".to_string()],
        ];
        assert_eq!(uniqueness(&sets).unwrap(), 0.5);
    }
}
