//! Seeded stochastic backend. Answers correctly with probability `A(n)`
//! and otherwise perturbs the true answer minimally within the task's
//! answer space, so scoring stays well-defined. Every outcome is a pure
//! function of (seed, call index, input length); concurrent callers cannot
//! change results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::answers::{classify_prompt, parse_counts, render_counts, PromptKind, TaskType};
use crate::doc::Document;

use super::symbolic::ground_truth_answer;
use super::{cost_of, derive_seed, Oracle, OracleCallRecord, OracleError, OracleProfile, OracleResponse};

pub struct StochasticOracle {
    profile: OracleProfile,
}

impl StochasticOracle {
    pub fn new(profile: OracleProfile) -> Self {
        StochasticOracle { profile }
    }

    pub fn with_seed(mut profile: OracleProfile, seed: u64) -> Self {
        profile.seed = seed;
        StochasticOracle { profile }
    }

    fn rng_for(&self, call_index: u64, input_len: usize) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(derive_seed(&[
            self.profile.seed,
            call_index,
            input_len as u64,
        ]))
    }
}

impl Oracle for StochasticOracle {
    fn profile(&self) -> &OracleProfile {
        &self.profile
    }

    fn backend_name(&self) -> &'static str {
        "stochastic"
    }

    fn call_extrapolated(
        &self,
        prompt: &Document,
        call_index: u64,
    ) -> Result<OracleResponse, OracleError> {
        let truth = ground_truth_answer(prompt);
        let mut rng = self.rng_for(call_index, prompt.len());
        let p = super::accuracy_at(&self.profile, prompt.len());
        let correct = rng.gen::<f64>() < p;
        let answer = if correct {
            truth
        } else {
            corrupt(&truth, classify_prompt(prompt), &mut rng)
        };
        let record = OracleCallRecord {
            input_tokens: prompt.len(),
            output_tokens: self.profile.n_out_bar,
            cost: cost_of(&self.profile, prompt.len()),
            was_correct: Some(correct),
        };
        Ok(OracleResponse { answer, record })
    }
}

/// Minimal in-space perturbation of a correct answer.
fn corrupt(truth: &Document, kind: Option<PromptKind>, rng: &mut ChaCha8Rng) -> Document {
    match kind {
        Some(PromptKind::Detect) => {
            let current = TaskType::from_name(&truth.to_text());
            let others: Vec<TaskType> = TaskType::ALL
                .into_iter()
                .filter(|t| Some(*t) != current)
                .collect();
            let pick = others[rng.gen_range(0..others.len())];
            Document::from_text(pick.name())
        }
        Some(PromptKind::Leaf(TaskType::Aggregate)) => {
            let mut counts = parse_counts(truth);
            if counts.is_empty() {
                counts.insert("spurious".to_string(), 1);
            } else {
                let keys: Vec<String> = counts.keys().cloned().collect();
                let key = &keys[rng.gen_range(0..keys.len())];
                let delta = rng.gen_range(1..=5u64);
                let entry = counts.get_mut(key).expect("picked existing key");
                if rng.gen::<bool>() {
                    *entry += delta;
                } else {
                    *entry = entry.saturating_sub(delta);
                }
            }
            render_counts(&counts)
        }
        Some(PromptKind::Leaf(TaskType::Classify)) | Some(PromptKind::Leaf(TaskType::Pairwise)) => {
            flip_one_label(truth, rng)
        }
        // search leaves and free-text answers: a wrong value of the same shape
        _ => {
            let mut tokens: Vec<String> = truth.tokens().map(str::to_owned).collect();
            let bogus = format!("corrupted-{:08x}", rng.gen::<u32>());
            if tokens.is_empty() {
                tokens.push(bogus);
            } else {
                tokens[0] = bogus;
            }
            Document::from_tokens(tokens)
        }
    }
}

fn flip_one_label(truth: &Document, rng: &mut ChaCha8Rng) -> Document {
    let mut tokens: Vec<String> = truth.tokens().map(str::to_owned).collect();
    if tokens.is_empty() {
        return Document::from_tokens(vec![format!("{}:x", rng.gen_range(0..1000))]);
    }
    let at = rng.gen_range(0..tokens.len());
    let (id, label) = match tokens[at].split_once(':') {
        Some((id, label)) => (id.to_string(), label.to_string()),
        None => (tokens[at].clone(), String::new()),
    };
    let distinct: Vec<String> = {
        let mut seen = Vec::new();
        for t in &tokens {
            if let Some((_, l)) = t.split_once(':') {
                if l != label && !seen.contains(&l.to_string()) {
                    seen.push(l.to_string());
                }
            }
        }
        seen
    };
    let new_label = if distinct.is_empty() {
        format!("{label}x")
    } else {
        distinct[rng.gen_range(0..distinct.len())].clone()
    };
    tokens[at] = format!("{id}:{new_label}");
    Document::from_tokens(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::answers::{header_doc, leaf_header};
    use crate::oracle::accuracy_at;

    fn leaf_prompt(task: TaskType, body: &str) -> Document {
        Document::concat(&[header_doc(&leaf_header(task)), Document::from_text(body)])
    }

    fn profile(seed: u64) -> OracleProfile {
        OracleProfile {
            peak_accuracy: 0.9,
            rho: 0.8,
            context_window: 64,
            seed,
            ..OracleProfile::appendix_a()
        }
    }

    #[test]
    fn outcomes_are_reproducible_and_index_sensitive() {
        let oracle = StochasticOracle::new(profile(7));
        let prompt = leaf_prompt(TaskType::Aggregate, "label:a label:b label:a");
        let again = StochasticOracle::new(profile(7));
        for index in 0..32 {
            let a = oracle.call(&prompt, index).unwrap();
            let b = again.call(&prompt, index).unwrap();
            assert_eq!(a.answer, b.answer);
            assert_eq!(a.record, b.record);
        }
        let outcomes: Vec<bool> = (0..256)
            .map(|i| oracle.call(&prompt, i).unwrap().record.was_correct.unwrap())
            .collect();
        assert!(outcomes.iter().any(|c| *c));
        assert!(outcomes.iter().any(|c| !*c));
    }

    #[test]
    fn perfect_accuracy_matches_symbolic() {
        let perfect = OracleProfile {
            peak_accuracy: 1.0,
            rho: 1.0,
            ..profile(3)
        };
        let stochastic = StochasticOracle::new(perfect.clone());
        let symbolic = super::super::SymbolicOracle::new(perfect);
        let prompt = leaf_prompt(TaskType::Aggregate, "label:a label:b label:a");
        for index in 0..64 {
            let a = stochastic.call(&prompt, index).unwrap();
            let b = symbolic.call(&prompt, index).unwrap();
            assert_eq!(a.answer, b.answer);
            assert_eq!(a.record.was_correct, Some(true));
        }
    }

    #[test]
    fn empirical_rate_tracks_accuracy_model() {
        let p = profile(11);
        let oracle = StochasticOracle::new(p.clone());
        let prompt = leaf_prompt(TaskType::Aggregate, "label:a label:b label:a label:c");
        let n = prompt.len();
        let expected = accuracy_at(&p, n);
        let trials = 20_000;
        let hits = (0..trials)
            .filter(|i| oracle.call(&prompt, *i).unwrap().record.was_correct.unwrap())
            .count();
        let observed = hits as f64 / trials as f64;
        assert!(
            (observed - expected).abs() < 0.02,
            "observed {observed:.4} vs model {expected:.4}"
        );
    }

    #[test]
    fn corrupted_counts_differ_minimally() {
        let p = OracleProfile {
            peak_accuracy: 0.05,
            rho: 0.5,
            ..profile(5)
        };
        let oracle = StochasticOracle::new(p);
        let prompt = leaf_prompt(TaskType::Aggregate, "label:a label:b label:a");
        let truth = parse_counts(&ground_truth_answer(&prompt));
        for index in 0..64 {
            let resp = oracle.call(&prompt, index).unwrap();
            let got = parse_counts(&resp.answer);
            if resp.record.was_correct.unwrap() {
                assert_eq!(got, truth);
            } else {
                assert_ne!(got, truth);
                let changed = truth
                    .iter()
                    .filter(|(k, v)| got.get(*k) != Some(v))
                    .count();
                assert!(changed <= 1, "at most one count perturbed");
            }
        }
    }

    #[test]
    fn corrupted_labels_flip_exactly_one() {
        let p = OracleProfile {
            peak_accuracy: 0.05,
            rho: 0.5,
            ..profile(9)
        };
        let oracle = StochasticOracle::new(p);
        let prompt = leaf_prompt(TaskType::Pairwise, "rec:1:A rec:2:B rec:3:A");
        for index in 0..64 {
            let resp = oracle.call(&prompt, index).unwrap();
            if !resp.record.was_correct.unwrap() {
                let (records, malformed) = crate::answers::parse_label_records(&resp.answer);
                assert_eq!(malformed, 0);
                assert_eq!(records.len(), 3);
                let truth = [(1, "A"), (2, "B"), (3, "A")];
                let diffs = records
                    .iter()
                    .zip(truth.iter())
                    .filter(|((id, l), (tid, tl))| id != tid || l != tl)
                    .count();
                assert_eq!(diffs, 1);
            }
        }
    }
}
