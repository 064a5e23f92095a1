//! Synthetic problem sets with oracle-verifiable answers.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::rng::stream;

/// Default fraction of problems whose training signal names a wrong answer.
pub const DEFAULT_LABEL_NOISE: f64 = 0.3;

/// One problem: `answer_count` atomic answers, a verifier given by
/// `correct`, and an optional corrupted training target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub answer_count: usize,
    /// Sorted, deduplicated, non-empty.
    pub correct: Vec<usize>,
    /// 1 is the easiest level.
    pub difficulty: u32,
    pub sampling_weight: f64,
    /// When set, training (supervised targets and policy-gradient rewards)
    /// sees this wrong answer instead of the verifier.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noisy_label: Option<usize>,
}

impl Problem {
    pub fn is_correct(&self, answer: usize) -> bool {
        self.correct.binary_search(&answer).is_ok()
    }

    /// Reward used for training; differs from the verifier on noisy problems.
    pub fn training_reward(&self, answer: usize) -> bool {
        match self.noisy_label {
            Some(label) => answer == label,
            None => self.is_correct(answer),
        }
    }

    /// Draw the supervised target: the noisy label if present, otherwise a
    /// uniformly chosen correct answer.
    pub fn training_target<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match self.noisy_label {
            Some(label) => label,
            None if self.correct.len() == 1 => self.correct[0],
            None => self.correct[rng.random_range(0..self.correct.len())],
        }
    }

    fn validate(&self, index: usize) -> Result<()> {
        if self.answer_count == 0 {
            return Err(domain(format!("problem {index} has no answers")));
        }
        if self.correct.is_empty() {
            return Err(domain(format!("problem {index} has an empty correct set")));
        }
        if self.correct.windows(2).any(|w| w[0] >= w[1]) {
            return Err(domain(format!(
                "problem {index}: correct set must be sorted and unique"
            )));
        }
        if *self.correct.last().unwrap() >= self.answer_count {
            return Err(domain(format!("problem {index}: correct answer out of range")));
        }
        if !(self.sampling_weight > 0.0 && self.sampling_weight.is_finite()) {
            return Err(domain(format!("problem {index}: sampling weight must be positive")));
        }
        if let Some(label) = self.noisy_label {
            if label >= self.answer_count {
                return Err(domain(format!("problem {index}: noisy label out of range")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Problem>", into = "Vec<Problem>")]
pub struct TaskSet {
    problems: Vec<Problem>,
}

impl TryFrom<Vec<Problem>> for TaskSet {
    type Error = crate::Error;

    fn try_from(problems: Vec<Problem>) -> Result<Self> {
        Self::new(problems)
    }
}

impl From<TaskSet> for Vec<Problem> {
    fn from(t: TaskSet) -> Self {
        t.problems
    }
}

impl TaskSet {
    pub fn new(problems: Vec<Problem>) -> Result<Self> {
        if problems.is_empty() {
            return Err(domain("task set is empty"));
        }
        for (i, p) in problems.iter().enumerate() {
            p.validate(i)?;
        }
        Ok(Self { problems })
    }

    pub fn problems(&self) -> &[Problem] {
        &self.problems
    }

    pub fn get(&self, index: usize) -> Option<&Problem> {
        self.problems.get(index)
    }

    pub fn len(&self) -> usize {
        self.problems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.problems.is_empty()
    }

    /// Number of problems per difficulty level, indexed from level 1.
    pub fn level_histogram(&self) -> Vec<usize> {
        let top = self.problems.iter().map(|p| p.difficulty).max().unwrap_or(0);
        let mut h = vec![0; top as usize];
        for p in &self.problems {
            if p.difficulty >= 1 {
                h[p.difficulty as usize - 1] += 1;
            }
        }
        h
    }

    pub fn ids_at_level(&self, level: u32) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.problems[i].difficulty == level)
            .collect()
    }

    pub fn noisy_ids(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.problems[i].noisy_label.is_some())
            .collect()
    }

    pub(crate) fn check_ids(&self, ids: &[usize]) -> Result<()> {
        match ids.iter().find(|&&i| i >= self.len()) {
            Some(i) => Err(domain(format!(
                "problem id {i} out of range for {} problems",
                self.len()
            ))),
            None => Ok(()),
        }
    }
}

/// Parameters of [`generate_tasks`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskGenConfig {
    pub problem_count: usize,
    pub answer_count: usize,
    /// Relative share of each difficulty level, easiest first.
    pub difficulty_levels: Vec<f64>,
    #[serde(default = "default_label_noise")]
    pub label_noise: f64,
    /// Correct-set size at the easiest level; the hardest level gets one.
    #[serde(default = "one")]
    pub max_correct: usize,
    /// Put answer 0 in the correct set of every problem in the easier half of
    /// the levels and exclude it elsewhere, so that a shared answer
    /// preference helps easy problems and hurts hard ones.
    #[serde(default)]
    pub shared_easy_answer: bool,
    pub seed: u64,
}

fn default_label_noise() -> f64 {
    DEFAULT_LABEL_NOISE
}

fn one() -> usize {
    1
}

impl TaskGenConfig {
    pub fn new(problem_count: usize, answer_count: usize, levels: usize, seed: u64) -> Self {
        Self {
            problem_count,
            answer_count,
            difficulty_levels: vec![1.0; levels],
            label_noise: DEFAULT_LABEL_NOISE,
            max_correct: 1,
            shared_easy_answer: false,
            seed,
        }
    }
}

/// Split `total` into integer counts proportional to `shares`
/// (largest remainder; ties to the earlier level).
fn apportion(total: usize, shares: &[f64]) -> Vec<usize> {
    let sum: f64 = shares.iter().sum();
    let quotas: Vec<f64> = shares.iter().map(|s| s / sum * total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut left = total - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in &order {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Deterministic synthetic task set.
///
/// Level `d` of `L` gets sampling weight `L - d + 1` (easy problems are drawn
/// more often) and a correct set shrinking linearly from `max_correct` to 1.
/// Exactly `round(label_noise * problem_count)` problems receive a fixed wrong
/// training label.
pub fn generate_tasks(config: &TaskGenConfig) -> Result<TaskSet> {
    let TaskGenConfig {
        problem_count,
        answer_count,
        ref difficulty_levels,
        label_noise,
        max_correct,
        shared_easy_answer,
        seed,
    } = *config;
    if problem_count == 0 || answer_count == 0 {
        return Err(domain("problem and answer counts must be positive"));
    }
    if difficulty_levels.is_empty()
        || difficulty_levels.iter().any(|s| !(*s >= 0.0 && s.is_finite()))
        || difficulty_levels.iter().sum::<f64>() <= 0.0
    {
        return Err(domain("difficulty shares must be non-negative with a positive sum"));
    }
    if !(0.0..=1.0).contains(&label_noise) {
        return Err(domain(format!("label noise {label_noise} is not in [0, 1]")));
    }
    if max_correct == 0 || max_correct > answer_count {
        return Err(domain("max_correct must be in 1..=answer_count"));
    }
    let levels = difficulty_levels.len() as u32;
    let easy_cut = levels.div_ceil(2);
    if shared_easy_answer && answer_count < 2 {
        return Err(domain("a shared easy answer needs at least two answers"));
    }

    let mut rng = stream(seed, "tasks.generate", 0);
    let counts = apportion(problem_count, difficulty_levels);
    let mut assigned: Vec<u32> = counts
        .iter()
        .enumerate()
        .flat_map(|(l, &c)| std::iter::repeat_n(l as u32 + 1, c))
        .collect();
    assigned.shuffle(&mut rng);

    let mut answers: Vec<usize> = (0..answer_count).collect();
    let mut problems = Vec::with_capacity(problem_count);
    for &d in &assigned {
        let size = if levels == 1 {
            max_correct
        } else {
            1 + (max_correct - 1) * (levels - d) as usize / (levels - 1) as usize
        };
        let mut correct: Vec<usize> = if shared_easy_answer {
            let pool = &mut answers[1..];
            pool.shuffle(&mut rng);
            if d <= easy_cut {
                std::iter::once(0).chain(pool[..size - 1].iter().copied()).collect()
            } else {
                pool[..size.min(answer_count - 1)].to_vec()
            }
        } else {
            answers.shuffle(&mut rng);
            answers[..size].to_vec()
        };
        correct.sort_unstable();
        problems.push(Problem {
            answer_count,
            correct,
            difficulty: d,
            sampling_weight: f64::from(levels - d + 1),
            noisy_label: None,
        });
    }

    let noisy = (label_noise * problem_count as f64).round() as usize;
    let mut order: Vec<usize> = (0..problem_count).collect();
    order.shuffle(&mut rng);
    for &i in order.iter().take(noisy) {
        let p = &mut problems[i];
        let wrong: Vec<usize> = (0..answer_count).filter(|a| !p.is_correct(*a)).collect();
        if !wrong.is_empty() {
            p.noisy_label = Some(wrong[rng.random_range(0..wrong.len())]);
        }
    }
    TaskSet::new(problems)
}

/// Seeded split of problem ids into two disjoint sorted sets, the first of
/// size `round(fraction * len)`.
pub fn split_ids(len: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut ids: Vec<usize> = (0..len).collect();
    ids.shuffle(&mut stream(seed, "tasks.split", 0));
    let cut = ((fraction.clamp(0.0, 1.0) * len as f64).round() as usize).min(len);
    let (mut a, mut b) = (ids[..cut].to_vec(), ids[cut..].to_vec());
    a.sort_unstable();
    b.sort_unstable();
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let cfg = TaskGenConfig::new(50, 8, 3, 7);
        assert_eq!(generate_tasks(&cfg).unwrap(), generate_tasks(&cfg).unwrap());
        let other = TaskGenConfig { seed: 8, ..cfg.clone() };
        assert_ne!(generate_tasks(&cfg).unwrap(), generate_tasks(&other).unwrap());
    }

    #[test]
    fn level_histogram_is_exact() {
        let mut cfg = TaskGenConfig::new(100, 8, 3, 1);
        cfg.difficulty_levels = vec![0.5, 0.3, 0.2];
        assert_eq!(generate_tasks(&cfg).unwrap().level_histogram(), vec![50, 30, 20]);
        cfg.problem_count = 10;
        cfg.difficulty_levels = vec![1.0, 1.0, 1.0];
        assert_eq!(generate_tasks(&cfg).unwrap().level_histogram(), vec![4, 3, 3]);
    }

    #[test]
    fn two_answer_setting() {
        let mut cfg = TaskGenConfig::new(2, 2, 1, 3);
        cfg.label_noise = 0.0;
        let t = generate_tasks(&cfg).unwrap();
        for p in t.problems() {
            assert_eq!(p.answer_count, 2);
            assert_eq!(p.correct.len(), 1);
        }
    }

    #[test]
    fn easy_problems_are_heavier_and_wider() {
        let mut cfg = TaskGenConfig::new(90, 16, 3, 5);
        cfg.max_correct = 3;
        let t = generate_tasks(&cfg).unwrap();
        for p in t.problems() {
            assert_eq!(p.correct.len(), 4 - p.difficulty as usize);
            assert_eq!(p.sampling_weight, 4.0 - p.difficulty as f64);
        }
    }

    #[test]
    fn noise_count_and_labels() {
        let cfg = TaskGenConfig::new(40, 6, 2, 11);
        let t = generate_tasks(&cfg).unwrap();
        let noisy = t.noisy_ids();
        assert_eq!(noisy.len(), 12);
        for i in noisy {
            let p = &t.problems()[i];
            let y = p.noisy_label.unwrap();
            assert!(!p.is_correct(y));
            assert!(p.training_reward(y));
        }
    }

    #[test]
    fn shared_easy_answer_layout() {
        let mut cfg = TaskGenConfig::new(40, 8, 4, 2);
        cfg.shared_easy_answer = true;
        let t = generate_tasks(&cfg).unwrap();
        for p in t.problems() {
            assert_eq!(p.is_correct(0), p.difficulty <= 2);
        }
    }

    #[test]
    fn json_round_trip_validates() {
        let t = generate_tasks(&TaskGenConfig::new(5, 4, 1, 0)).unwrap();
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(serde_json::from_str::<TaskSet>(&s).unwrap(), t);
        let bad = r#"[{"answer_count":2,"correct":[],"difficulty":1,"sampling_weight":1.0}]"#;
        assert!(serde_json::from_str::<TaskSet>(bad).is_err());
    }

    #[test]
    fn split_is_disjoint_and_complete() {
        let (a, b) = split_ids(10, 0.3, 4);
        assert_eq!(a.len(), 3);
        let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }
}
