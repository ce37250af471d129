//! Seeded generator for a synthetic promoter / non-promoter sequence set.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

pub const BASES: [u8; 4] = *b"ACGT";

/// Which stretch of the sequence the base-composition features summarize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompositionWindow {
    /// Base fractions over the motif window only.
    #[default]
    Motif,
    /// Base fractions over the whole sequence.
    Sequence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DnaGenerator {
    pub sequence_length: usize,
    pub motif: String,
    pub motif_position: usize,
    pub mutation_probability: f64,
    /// Forces every background base to this letter instead of sampling uniformly.
    pub fixed_background: Option<char>,
    pub window: CompositionWindow,
}

impl Default for DnaGenerator {
    fn default() -> Self {
        Self {
            sequence_length: 57,
            motif: "TATAAT".into(),
            motif_position: 30,
            mutation_probability: 0.15,
            fixed_background: None,
            window: CompositionWindow::Motif,
        }
    }
}

/// Generated sequences with their feature table. `sequences[i]` matches row `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DnaSamples {
    pub dataset: Dataset,
    pub sequences: Vec<String>,
}

impl DnaGenerator {
    fn validate(&self, num_samples: usize) -> Result<()> {
        if num_samples == 0 || !num_samples.is_multiple_of(2) {
            return Err(Error::Argument(format!(
                "num_samples must be a positive even number, got {num_samples}"
            )));
        }
        if !(0.0..=1.0).contains(&self.mutation_probability) {
            return Err(Error::Argument(format!(
                "mutation probability {} outside [0, 1]",
                self.mutation_probability
            )));
        }
        if self.motif.is_empty() || !self.motif.bytes().all(|b| BASES.contains(&b)) {
            return Err(Error::Argument(format!("motif '{}' is not over ACGT", self.motif)));
        }
        if self.motif_position + self.motif.len() > self.sequence_length {
            return Err(Error::Argument(format!(
                "motif at {} does not fit a length-{} sequence",
                self.motif_position, self.sequence_length
            )));
        }
        if let Some(b) = self.fixed_background {
            if !BASES.contains(&(b as u8)) {
                return Err(Error::Argument(format!("background base '{b}' is not ACGT")));
            }
        }
        Ok(())
    }

    /// `num_samples / 2` promoters (label 1) interleaved with as many
    /// non-promoters (label 0). Deterministic in `seed`.
    pub fn generate(&self, num_samples: usize, seed: u64) -> Result<DnaSamples> {
        self.validate(num_samples)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sequences = Vec::with_capacity(num_samples);
        let mut features = Vec::with_capacity(num_samples);
        let mut labels = Vec::with_capacity(num_samples);
        for i in 0..num_samples {
            let promoter = i % 2 == 0;
            let mut seq: Vec<u8> = (0..self.sequence_length)
                .map(|_| match self.fixed_background {
                    Some(b) => b as u8,
                    None => BASES[rng.random_range(0..4)],
                })
                .collect();
            if promoter {
                for (k, base) in self.motif.bytes().enumerate() {
                    seq[self.motif_position + k] = self.mutate(base, &mut rng);
                }
            }
            features.push(self.composition(&seq));
            labels.push(usize::from(promoter));
            sequences.push(String::from_utf8(seq).expect("ACGT is ascii"));
        }
        let dataset = Dataset::new(
            "dna",
            BASES
                .iter()
                .map(|b| format!("frac_{}", (*b as char).to_ascii_lowercase()))
                .collect(),
            features,
            labels,
            vec!["non_promoter".into(), "promoter".into()],
        )?;
        Ok(DnaSamples { dataset, sequences })
    }

    fn mutate(&self, base: u8, rng: &mut ChaCha8Rng) -> u8 {
        if rng.random::<f64>() >= self.mutation_probability {
            return base;
        }
        let others: Vec<u8> = BASES.iter().copied().filter(|&b| b != base).collect();
        others[rng.random_range(0..others.len())]
    }

    /// Fractions of A, C, G, T in the configured window.
    pub fn composition(&self, seq: &[u8]) -> Vec<f64> {
        let window = match self.window {
            CompositionWindow::Motif => {
                &seq[self.motif_position..self.motif_position + self.motif.len()]
            }
            CompositionWindow::Sequence => seq,
        };
        let len = window.len() as f64;
        BASES
            .iter()
            .map(|b| window.iter().filter(|&&s| s == *b).count() as f64 / len)
            .collect()
    }
}

/// Default generator, `num_samples` sequences from `seed`.
pub fn generate_dna(num_samples: usize, seed: u64) -> Result<Dataset> {
    Ok(DnaGenerator::default().generate(num_samples, seed)?.dataset)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_balanced() {
        let a = generate_dna(200, 42).unwrap();
        let b = generate_dna(200, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.class_counts(), vec![100, 100]);
        assert_ne!(a, generate_dna(200, 43).unwrap());
    }

    #[test]
    fn odd_count_rejected() {
        assert!(matches!(generate_dna(201, 1), Err(Error::Argument(_))));
        assert!(matches!(generate_dna(0, 1), Err(Error::Argument(_))));
    }

    #[test]
    fn unmutated_motif_on_fixed_background() {
        let generator = DnaGenerator {
            mutation_probability: 0.0,
            fixed_background: Some('G'),
            ..DnaGenerator::default()
        };
        let samples = generator.generate(20, 5).unwrap();
        for (seq, &label) in samples.sequences.iter().zip(&samples.dataset.labels) {
            assert_eq!(seq.len(), 57);
            if label == 1 {
                assert_eq!(&seq[30..36], "TATAAT");
                assert_eq!(seq.matches('G').count(), 51);
            } else {
                assert!(seq.bytes().all(|b| b == b'G'));
            }
        }
    }

    #[test]
    fn composition_sums_to_one() {
        let generator = DnaGenerator {
            window: CompositionWindow::Sequence,
            ..DnaGenerator::default()
        };
        let samples = generator.generate(10, 3).unwrap();
        for row in &samples.dataset.features {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let seq = &samples.sequences[0];
        let a = seq.matches('A').count() as f64 / 57.0;
        assert!((samples.dataset.features[0][0] - a).abs() < 1e-15);
    }

    #[test]
    fn motif_window_features() {
        let generator = DnaGenerator {
            mutation_probability: 0.0,
            ..DnaGenerator::default()
        };
        let samples = generator.generate(4, 9).unwrap();
        // TATAAT: three A, three T
        assert_eq!(samples.dataset.features[0], vec![0.5, 0.0, 0.0, 0.5]);
    }
}
