//! Projective measurement bases, Born-rule probabilities and shot sampling.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::quantum::Ket;

/// Probabilities more negative than this are reported as unphysical.
pub const NEGATIVE_PROBABILITY_TOL: f64 = 1e-9;

/// One measurement setting: a complete set of orthogonal projectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    pub label: String,
    pub outcomes: Vec<String>,
    pub elements: Vec<CMat>,
}

impl Basis {
    pub fn dim(&self) -> usize {
        self.elements[0].nrows()
    }
}

fn single_qubit_projectors(axis: char) -> [CMat; 2] {
    let (a, b) = match axis {
        'X' => (Ket::Plus, Ket::Minus),
        'Y' => (Ket::PlusI, Ket::MinusI),
        _ => (Ket::Zero, Ket::One),
    };
    [a.density().into_matrix(), b.density().into_matrix()]
}

/// Pauli bases on `n_qubits` qubits: every word over {X, Y, Z}, outcome
/// strings of 0 (+1 eigenvalue) and 1 (−1 eigenvalue).
pub fn pauli_bases(n_qubits: usize) -> Vec<Basis> {
    let mut words = vec![String::new()];
    for _ in 0..n_qubits {
        words = words
            .into_iter()
            .flat_map(|w| ['X', 'Y', 'Z'].map(|a| format!("{w}{a}")))
            .collect();
    }
    words
        .into_iter()
        .map(|word| {
            let mut outcomes = vec![String::new()];
            let mut elements = vec![CMat::identity(1, 1)];
            for axis in word.chars() {
                let proj = single_qubit_projectors(axis);
                let mut next_o = Vec::new();
                let mut next_e = Vec::new();
                for (o, e) in outcomes.iter().zip(&elements) {
                    for (k, p) in proj.iter().enumerate() {
                        next_o.push(format!("{o}{k}"));
                        next_e.push(linalg::kron(e, p));
                    }
                }
                outcomes = next_o;
                elements = next_e;
            }
            Basis { label: word, outcomes, elements }
        })
        .collect()
}

/// Single-qubit Pauli-6 set: X, Y, Z bases with two outcomes each.
pub fn pauli6() -> Vec<Basis> {
    pauli_bases(1)
}

/// p_k = Tr(ρ E_k), clipped to [0, 1].
pub fn born_probabilities(rho: &CMat, basis: &Basis) -> Result<Vec<f64>> {
    if rho.nrows() != basis.dim() {
        return Err(Error::Dimension { expected: basis.dim(), got: rho.nrows() });
    }
    basis
        .elements
        .iter()
        .map(|e| {
            let p = (rho * e).trace().re;
            if p < -NEGATIVE_PROBABILITY_TOL {
                return Err(Error::UnphysicalProbability(p));
            }
            Ok(p.clamp(0.0, 1.0))
        })
        .collect()
}

/// Shot counts for one (prep, basis, outcome) setting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementEntry {
    pub prep: String,
    pub basis: String,
    pub outcome: String,
    pub count: u64,
    pub shots: u64,
}

impl MeasurementEntry {
    pub fn frequency(&self) -> f64 {
        if self.shots == 0 {
            0.0
        } else {
            self.count as f64 / self.shots as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MeasurementRecord {
    pub entries: Vec<MeasurementEntry>,
}

impl MeasurementRecord {
    pub fn extend(&mut self, other: MeasurementRecord) {
        self.entries.extend(other.entries);
    }

    pub fn find(&self, prep: &str, basis: &str, outcome: &str) -> Option<&MeasurementEntry> {
        self.entries
            .iter()
            .find(|e| e.prep == prep && e.basis == basis && e.outcome == outcome)
    }

    /// Checks that counts of every (prep, basis) setting sum to its shots.
    pub fn validate(&self) -> Result<()> {
        let mut sums: std::collections::BTreeMap<(&str, &str), (u64, u64)> = Default::default();
        for e in &self.entries {
            let s = sums.entry((&e.prep, &e.basis)).or_insert((0, e.shots));
            if s.1 != e.shots {
                return Err(Error::InvalidParameter(format!("inconsistent shots in setting {}/{}", e.prep, e.basis)));
            }
            s.0 += e.count;
        }
        for ((p, b), (count, shots)) in sums {
            if count != shots {
                return Err(Error::InvalidParameter(format!("setting {p}/{b}: counts {count} != shots {shots}")));
            }
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for e in &self.entries {
            wtr.serialize(e)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let entries = rdr.deserialize().collect::<std::result::Result<Vec<MeasurementEntry>, _>>()?;
        let rec = Self { entries };
        rec.validate()?;
        Ok(rec)
    }
}

/// Multinomial draw over the outcomes of one basis, as a chain of binomials.
fn multinomial<R: Rng + ?Sized>(rng: &mut R, probs: &[f64], shots: u64) -> Vec<u64> {
    let mut remaining = shots;
    let mut mass = probs.iter().sum::<f64>();
    let mut counts = Vec::with_capacity(probs.len());
    for (k, &p) in probs.iter().enumerate() {
        if k + 1 == probs.len() {
            counts.push(remaining);
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let n = if remaining == 0 { 0 } else { Binomial::new(remaining, q).expect("q in [0,1]").sample(rng) };
        counts.push(n);
        remaining -= n;
        mass -= p;
    }
    counts
}

/// Samples `shots` outcomes per basis with a caller-provided generator.
pub fn sample_counts_with<R: Rng + ?Sized>(
    rng: &mut R,
    rho: &CMat,
    bases: &[Basis],
    shots: u64,
    prep: &str,
) -> Result<MeasurementRecord> {
    let mut entries = Vec::new();
    for b in bases {
        let probs = born_probabilities(rho, b)?;
        let counts = multinomial(rng, &probs, shots);
        for (o, count) in b.outcomes.iter().zip(counts) {
            entries.push(MeasurementEntry {
                prep: prep.to_string(),
                basis: b.label.clone(),
                outcome: o.clone(),
                count,
                shots,
            });
        }
    }
    Ok(MeasurementRecord { entries })
}

/// Seeded, reproducible shot sampling of a state in each basis.
pub fn sample_counts(rho: &CMat, bases: &[Basis], shots: u64, seed: u64) -> Result<MeasurementRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_counts_with(&mut rng, rho, bases, shots, "")
}
