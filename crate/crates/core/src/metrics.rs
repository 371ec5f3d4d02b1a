//! Partition comparison: adjusted mutual information.
//!
//! AMI subtracts from the mutual information its expectation under random
//! permutations of one labeling (the hypergeometric model) and normalizes
//! by the mean of the two entropies. Internally everything is in nats; the
//! result is dimensionless.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Sparse cross-tabulation of two labelings over the same nodes.
#[derive(Debug, Clone)]
pub struct Contingency {
    pub n: u64,
    pub a_sizes: Vec<u64>,
    pub b_sizes: Vec<u64>,
    pub counts: Vec<(u32, u32, u64)>,
}

impl Contingency {
    pub fn build(a: &[u32], b: &[u32]) -> Result<Contingency> {
        if a.len() != b.len() {
            return Err(Error::validation(format!(
                "labelings differ in length: {} vs {}",
                a.len(),
                b.len()
            )));
        }
        if a.is_empty() {
            return Err(Error::domain("cannot compare empty labelings"));
        }
        let mut a_map: HashMap<u32, u32> = HashMap::new();
        let mut b_map: HashMap<u32, u32> = HashMap::new();
        let mut a_sizes: Vec<u64> = Vec::new();
        let mut b_sizes: Vec<u64> = Vec::new();
        let mut joint: HashMap<(u32, u32), u64> = HashMap::new();
        for (&la, &lb) in a.iter().zip(b) {
            let next_a = a_map.len() as u32;
            let ia = *a_map.entry(la).or_insert(next_a);
            if ia as usize == a_sizes.len() {
                a_sizes.push(0);
            }
            a_sizes[ia as usize] += 1;
            let next_b = b_map.len() as u32;
            let ib = *b_map.entry(lb).or_insert(next_b);
            if ib as usize == b_sizes.len() {
                b_sizes.push(0);
            }
            b_sizes[ib as usize] += 1;
            *joint.entry((ia, ib)).or_insert(0) += 1;
        }
        let mut counts: Vec<(u32, u32, u64)> =
            joint.into_iter().map(|((i, j), c)| (i, j, c)).collect();
        counts.sort_unstable();
        Ok(Contingency {
            n: a.len() as u64,
            a_sizes,
            b_sizes,
            counts,
        })
    }

    fn entropy(sizes: &[u64], n: f64) -> f64 {
        sizes
            .iter()
            .filter(|&&s| s > 0)
            .map(|&s| {
                let p = s as f64 / n;
                -p * p.ln()
            })
            .sum()
    }

    pub fn entropy_a(&self) -> f64 {
        Self::entropy(&self.a_sizes, self.n as f64)
    }

    pub fn entropy_b(&self) -> f64 {
        Self::entropy(&self.b_sizes, self.n as f64)
    }

    /// Mutual information in nats.
    pub fn mutual_information(&self) -> f64 {
        let n = self.n as f64;
        self.counts
            .iter()
            .map(|&(i, j, c)| {
                let nij = c as f64;
                (nij / n)
                    * (n.ln() + nij.ln()
                        - (self.a_sizes[i as usize] as f64).ln()
                        - (self.b_sizes[j as usize] as f64).ln())
            })
            .sum()
    }
}

/// log(k!) table; compensated summation keeps it accurate for large n.
fn ln_factorials(n: u64) -> Vec<f64> {
    let mut table = vec![0.0; n as usize + 1];
    let mut sum = 0.0;
    let mut carry = 0.0;
    for k in 1..=n {
        let term = (k as f64).ln() - carry;
        let t = sum + term;
        carry = (t - sum) - term;
        sum = t;
        table[k as usize] = sum;
    }
    table
}

/// Expected mutual information (nats) under random permutations of one
/// labeling with the class sizes fixed.
pub fn expected_mutual_information(a_sizes: &[u64], b_sizes: &[u64], n: u64) -> f64 {
    let lf = ln_factorials(n);
    let nf = n as f64;
    let mut emi = 0.0;
    for &ai in a_sizes {
        if ai == 0 {
            continue;
        }
        for &bj in b_sizes {
            if bj == 0 {
                continue;
            }
            let lo = 1.max((ai + bj).saturating_sub(n));
            let hi = ai.min(bj);
            for nij in lo..=hi {
                let nij_f = nij as f64;
                let info = (nij_f / nf) * ((nf * nij_f) / (ai as f64 * bj as f64)).ln();
                let ln_p = lf[ai as usize] + lf[bj as usize]
                    + lf[(n - ai) as usize]
                    + lf[(n - bj) as usize]
                    - lf[n as usize]
                    - lf[nij as usize]
                    - lf[(ai - nij) as usize]
                    - lf[(bj - nij) as usize]
                    - lf[(n + nij - ai - bj) as usize];
                emi += info * ln_p.exp();
            }
        }
    }
    emi
}

/// Entropy normalization of the adjusted score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmiNormalization {
    MeanEntropy,
    MaxEntropy,
    MinEntropy,
}

/// Adjusted mutual information between two labelings of the same nodes:
/// `(MI - E[MI]) / (norm(H_a, H_b) - E[MI])`, with 0 returned when the
/// denominator degenerates (single-class labelings).
pub fn ami_normalized(a: &[u32], b: &[u32], norm: AmiNormalization) -> Result<f64> {
    let table = Contingency::build(a, b)?;
    if table.a_sizes.len() == 1 || table.b_sizes.len() == 1 {
        // One side carries no information; MI and E[MI] both vanish.
        return Ok(0.0);
    }
    let mi = table.mutual_information();
    let h_a = table.entropy_a();
    let h_b = table.entropy_b();
    let emi = expected_mutual_information(&table.a_sizes, &table.b_sizes, table.n);
    let h = match norm {
        AmiNormalization::MeanEntropy => 0.5 * (h_a + h_b),
        AmiNormalization::MaxEntropy => h_a.max(h_b),
        AmiNormalization::MinEntropy => h_a.min(h_b),
    };
    let denom = h - emi;
    if denom <= 0.0 {
        return Ok(0.0);
    }
    Ok((mi - emi) / denom)
}

/// [`ami_normalized`] with the mean-entropy normalization.
pub fn ami(a: &[u32], b: &[u32]) -> Result<f64> {
    ami_normalized(a, b, AmiNormalization::MeanEntropy)
}
