//! Search spaces and candidate encodings shared by both optimizers.
//!
//! A [`SearchSpace`] lists how many values each page variable can take. A
//! [`Candidate`] picks one value per variable. Value `0` is the default
//! ("control") setting of every variable. The genome form of a candidate is
//! the concatenation of one one-hot vector per variable.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-variable value counts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct SearchSpace {
    cardinalities: Vec<usize>,
}

impl SearchSpace {
    pub fn new(cardinalities: Vec<usize>) -> Result<Self> {
        if cardinalities.is_empty() {
            return Err(Error::InvalidSpace("no variables".into()));
        }
        if let Some((i, &k)) = cardinalities.iter().enumerate().find(|(_, &k)| k < 2) {
            return Err(Error::InvalidSpace(format!(
                "variable {i} has {k} values, need at least 2"
            )));
        }
        Ok(Self { cardinalities })
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    pub fn num_variables(&self) -> usize {
        self.cardinalities.len()
    }

    /// Number of distinct candidates, saturating at `u128::MAX`.
    pub fn combinations(&self) -> u128 {
        self.cardinalities
            .iter()
            .fold(1u128, |acc, &k| acc.saturating_mul(k as u128))
    }

    /// Length of the concatenated one-hot genome.
    pub fn genome_len(&self) -> usize {
        self.cardinalities.iter().sum()
    }

    /// Σ(kᵢ − 1): the size of the one-gene neighbourhood of control, which is
    /// also the evolutionary population size.
    pub fn neighbourhood_size(&self) -> usize {
        self.cardinalities.iter().map(|k| k - 1).sum()
    }

    /// The all-defaults candidate.
    pub fn control(&self) -> Candidate {
        Candidate(vec![0; self.cardinalities.len()])
    }

    pub fn check(&self, c: &Candidate) -> Result<()> {
        if c.0.len() != self.cardinalities.len() {
            return Err(Error::CandidateMismatch(format!(
                "candidate has {} choices, space has {} variables",
                c.0.len(),
                self.cardinalities.len()
            )));
        }
        for (i, (&v, &k)) in c.0.iter().zip(&self.cardinalities).enumerate() {
            if v >= k {
                return Err(Error::CandidateMismatch(format!(
                    "variable {i} has value {v} but only {k} values"
                )));
            }
        }
        Ok(())
    }

    pub fn to_one_hot(&self, c: &Candidate) -> Result<Vec<bool>> {
        self.check(c)?;
        let mut bits = vec![false; self.genome_len()];
        let mut offset = 0;
        for (&v, &k) in c.0.iter().zip(&self.cardinalities) {
            bits[offset + v] = true;
            offset += k;
        }
        Ok(bits)
    }

    pub fn from_one_hot(&self, bits: &[bool]) -> Result<Candidate> {
        if bits.len() != self.genome_len() {
            return Err(Error::CandidateMismatch(format!(
                "genome has {} bits, space needs {}",
                bits.len(),
                self.genome_len()
            )));
        }
        let mut choices = Vec::with_capacity(self.cardinalities.len());
        let mut offset = 0;
        for (variable, &k) in self.cardinalities.iter().enumerate() {
            let segment = &bits[offset..offset + k];
            let ones = segment.iter().filter(|&&b| b).count();
            if ones != 1 {
                return Err(Error::MalformedOneHot { variable, ones });
            }
            choices.push(segment.iter().position(|&b| b).unwrap());
            offset += k;
        }
        Ok(Candidate(choices))
    }

    /// Every candidate that differs from control in exactly one variable,
    /// ordered variable-major then by value.
    pub fn one_gene_variants(&self) -> Vec<Candidate> {
        let n = self.cardinalities.len();
        let mut out = Vec::with_capacity(self.neighbourhood_size());
        for (i, &k) in self.cardinalities.iter().enumerate() {
            for v in 1..k {
                let mut choices = vec![0; n];
                choices[i] = v;
                out.push(Candidate(choices));
            }
        }
        out
    }

    /// Iterates over all candidates in lexicographic order.
    pub fn iter_all(&self) -> AllCandidates<'_> {
        AllCandidates {
            space: self,
            next: Some(vec![0; self.cardinalities.len()]),
        }
    }
}

impl TryFrom<Vec<usize>> for SearchSpace {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        SearchSpace::new(v)
    }
}

impl From<SearchSpace> for Vec<usize> {
    fn from(s: SearchSpace) -> Self {
        s.cardinalities
    }
}

impl fmt::Display for SearchSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_list(f, &self.cardinalities)
    }
}

/// Lexicographic odometer over a search space.
pub struct AllCandidates<'a> {
    space: &'a SearchSpace,
    next: Option<Vec<usize>>,
}

impl Iterator for AllCandidates<'_> {
    type Item = Candidate;

    fn next(&mut self) -> Option<Candidate> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        for i in (0..succ.len()).rev() {
            succ[i] += 1;
            if succ[i] < self.space.cardinalities[i] {
                self.next = Some(succ);
                break;
            }
            succ[i] = 0;
        }
        Some(Candidate(current))
    }
}

/// One value index per variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Candidate(pub Vec<usize>);

impl Candidate {
    pub fn choices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_control(&self) -> bool {
        self.0.iter().all(|&v| v == 0)
    }

    /// Number of variables on which two candidates disagree.
    pub fn hamming(&self, other: &Candidate) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }
}

impl From<Vec<usize>> for Candidate {
    fn from(v: Vec<usize>) -> Self {
        Candidate(v)
    }
}

impl fmt::Display for Candidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_list(f, &self.0)
    }
}

fn write_list(f: &mut fmt::Formatter<'_>, xs: &[usize]) -> fmt::Result {
    f.write_str("[")?;
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{x}")?;
    }
    f.write_str("]")
}
