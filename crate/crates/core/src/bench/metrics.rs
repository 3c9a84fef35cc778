//! Scores used by the experiments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{argmax_lowest, Mdp};
use crate::numeric::{entropy, mean, std_dev};

use super::random_mdp::policy_values;

/// `||V* - V^pi_hat|| / ||V*||` in the Euclidean norm.
pub fn value_loss(mdp: &Mdp, reward: &[f64], pi_star: &[usize], pi_hat: &[usize]) -> Result<f64> {
    let v_star = policy_values(mdp, pi_star, reward)?;
    let v_hat = policy_values(mdp, pi_hat, reward)?;
    value_loss_from_values(&v_star, &v_hat)
}

pub fn value_loss_from_values(v_star: &[f64], v_hat: &[f64]) -> Result<f64> {
    let num = v_star.iter().zip(v_hat).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let den = v_star.iter().map(|a| a * a).sum::<f64>().sqrt();
    if den == 0.0 {
        return if num == 0.0 { Ok(0.0) } else { Err(Error::Degenerate("optimal values are all zero".into())) };
    }
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Acquisition {
    /// Highest predictive entropy.
    Entropy,
    /// Least confidence, `1 - max p`.
    Confidence,
    /// Smallest margin between the two most likely actions.
    Margin,
    /// Uniformly random query states.
    Random,
}

impl std::fmt::Display for Acquisition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Acquisition::Entropy => "entropy",
            Acquisition::Confidence => "confidence",
            Acquisition::Margin => "margin",
            Acquisition::Random => "random",
        })
    }
}

/// Score of an action distribution; larger means more informative to
/// query. The random criterion scores every row 0.
pub fn acquisition_score(row: &[f64], kind: Acquisition) -> f64 {
    match kind {
        Acquisition::Entropy => entropy(row),
        Acquisition::Confidence => 1.0 - row.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        Acquisition::Margin => {
            let top = argmax_lowest(row);
            let second = row.iter().enumerate().filter(|(a, _)| *a != top).map(|(_, p)| *p).fold(f64::NEG_INFINITY, f64::max);
            if second == f64::NEG_INFINITY {
                -row[top]
            } else {
                second - row[top]
            }
        }
        Acquisition::Random => 0.0,
    }
}

/// Fraction of items whose labels agree under the best one-to-one matching
/// of predicted to true labels. Labels are arbitrary integers.
pub fn segmentation_agreement(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::InvalidArgument(format!(
            "label vectors differ in length ({} vs {})",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Ok(1.0);
    }
    let relabel = |v: &[usize]| {
        let mut ids: Vec<usize> = v.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let mapped: Vec<usize> = v.iter().map(|x| ids.binary_search(x).expect("present")).collect();
        (mapped, ids.len())
    };
    let (mut p, mut np) = relabel(predicted);
    let (mut t, mut nt) = relabel(truth);
    // the bitmask runs over the side with fewer labels
    if np < nt {
        std::mem::swap(&mut p, &mut t);
        std::mem::swap(&mut np, &mut nt);
    }
    if nt > 20 {
        return Err(Error::InvalidArgument(format!("too many labels to match exactly ({nt})")));
    }
    let mut overlap = vec![vec![0usize; nt]; np];
    for (a, b) in p.iter().zip(&t) {
        overlap[*a][*b] += 1;
    }
    // best[mask]: largest overlap using exactly the labels in mask
    let mut best = vec![usize::MIN; 1 << nt];
    let mut reachable = vec![false; 1 << nt];
    reachable[0] = true;
    for row in &overlap {
        for mask in (0..1usize << nt).rev() {
            if !reachable[mask] {
                continue;
            }
            for (j, &o) in row.iter().enumerate() {
                if mask & (1 << j) == 0 {
                    let next = mask | (1 << j);
                    let value = best[mask] + o;
                    if !reachable[next] || value > best[next] {
                        best[next] = value;
                        reachable[next] = true;
                    }
                }
            }
        }
    }
    let matched = best.iter().zip(&reachable).filter(|(_, r)| **r).map(|(b, _)| *b).max().unwrap_or(0);
    Ok(matched as f64 / truth.len() as f64)
}

/// Number of positions whose label differs from the previous one.
pub fn label_switches(labels: &[usize]) -> usize {
    labels.windows(2).filter(|w| w[0] != w[1]).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub stderr: f64,
}

pub fn summarize(values: &[f64]) -> Summary {
    let std = std_dev(values);
    Summary { n: values.len(), mean: mean(values), std, stderr: std / (values.len() as f64).sqrt() }
}

/// Standard error of the difference of two independent means.
pub fn pooled_stderr(a: &Summary, b: &Summary) -> f64 {
    (a.stderr.powi(2) + b.stderr.powi(2)).sqrt()
}
