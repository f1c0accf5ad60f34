//! Synthetic code-generation environments.
//!
//! A problem offers a fixed pool of candidate programs, each described only
//! by the pass vector it produces on the problem's suite. Executing a
//! candidate returns that vector, with each entry flipped independently with
//! probability `noise` (flaky tests).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticProblem {
    pub problem_id: String,
    /// `candidates[k][j]`: whether candidate `k` passes test `j`.
    pub candidates: Vec<Vec<bool>>,
    pub noise: f64,
}

impl SyntheticProblem {
    pub fn new(problem_id: impl Into<String>, candidates: Vec<Vec<bool>>, noise: f64) -> Result<Self> {
        let problem_id = problem_id.into();
        if candidates.len() < 2 {
            return Err(Error::Validation {
                problem_id,
                message: format!("needs at least 2 candidates, got {}", candidates.len()),
            });
        }
        let m = candidates[0].len();
        if m == 0 || candidates.iter().any(|c| c.len() != m) {
            return Err(Error::Validation {
                problem_id,
                message: "candidate pass vectors must share a non-zero length".into(),
            });
        }
        if !(0.0..1.0).contains(&noise) {
            return Err(Error::Validation {
                problem_id,
                message: format!("noise must lie in [0, 1), got {noise}"),
            });
        }
        Ok(SyntheticProblem {
            problem_id,
            candidates,
            noise,
        })
    }

    pub fn test_count(&self) -> usize {
        self.candidates[0].len()
    }

    pub fn action_count(&self) -> usize {
        self.candidates.len()
    }

    /// Some candidate passes a non-empty proper subset of the suite.
    pub fn has_partial_success(&self) -> bool {
        self.candidates.iter().any(|c| {
            let passed = c.iter().filter(|&&p| p).count();
            passed > 0 && passed < c.len()
        })
    }

    /// Executes candidate `action` once.
    pub fn execute(&self, action: usize, rng: &mut impl Rng) -> Vec<bool> {
        let mut passes = self.candidates[action].clone();
        if self.noise > 0.0 {
            for p in passes.iter_mut() {
                if rng.gen_bool(self.noise) {
                    *p = !*p;
                }
            }
        }
        passes
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub problems: Vec<SyntheticProblem>,
}

/// One explicitly listed problem; candidates are strings of `0`/`1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub problem_id: String,
    pub candidates: Vec<String>,
    #[serde(default)]
    pub noise: f64,
}

/// Generator for suites dominated by easy tests with a few hard ones.
///
/// Every problem gets `easy_tests` tests most candidates pass and
/// `hard_tests` tests few candidates pass, in a shuffled order. The pool
/// holds:
///
/// * `solvers` candidates passing everything;
/// * `easy_only` candidates passing every easy test and no hard test;
/// * `partial` candidates passing each easy test with probability
///   `partial_easy_rate` and each hard test with `partial_hard_rate`,
///   resampled until the result is a proper, non-empty subset;
/// * `failing` candidates passing nothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratedEnv {
    pub problems: usize,
    pub easy_tests: usize,
    pub hard_tests: usize,
    pub solvers: usize,
    pub easy_only: usize,
    pub partial: usize,
    pub failing: usize,
    pub partial_easy_rate: f64,
    pub partial_hard_rate: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for GeneratedEnv {
    fn default() -> Self {
        reference_env()
    }
}

/// The documented reference environment used by the ablation and
/// degeneracy experiments.
///
/// 128 problems with 52 tests each (48 easy, 4 hard) and 100 candidates:
/// one solver, 16 "trap" candidates that pass exactly the easy tests, 40
/// partial candidates and 43 that fail everything. A uniform policy solves
/// about 2.5% of 4-turn trajectories, so most binary-reward groups start out
/// all-fail, while trap candidates collect almost all of the reward under
/// uniform or difficulty-only test weights.
pub fn reference_env() -> GeneratedEnv {
    GeneratedEnv {
        problems: 128,
        easy_tests: 48,
        hard_tests: 4,
        solvers: 1,
        easy_only: 16,
        partial: 40,
        failing: 43,
        partial_easy_rate: 0.5,
        partial_hard_rate: 0.25,
        noise: 0.0,
        seed: 7,
    }
}

impl GeneratedEnv {
    pub fn validate(&self) -> Result<()> {
        let pool = self.solvers + self.easy_only + self.partial + self.failing;
        if self.problems == 0 {
            return Err(Error::param("generated environment needs at least one problem"));
        }
        if self.easy_tests + self.hard_tests == 0 {
            return Err(Error::param("generated environment needs at least one test"));
        }
        if pool < 2 {
            return Err(Error::param("generated environment needs at least two candidates"));
        }
        if self.partial > 0 && self.easy_tests + self.hard_tests < 2 {
            return Err(Error::param("partial candidates need at least two tests"));
        }
        for (name, v) in [
            ("partial_easy_rate", self.partial_easy_rate),
            ("partial_hard_rate", self.partial_hard_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::param(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.partial > 0 && self.partial_easy_rate == 0.0 && self.partial_hard_rate == 0.0 {
            return Err(Error::param("partial candidates need a non-zero pass rate"));
        }
        if self.partial > 0 && self.partial_easy_rate == 1.0 && self.partial_hard_rate == 1.0 {
            return Err(Error::param("partial candidates cannot pass every test"));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Environment> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let m = self.easy_tests + self.hard_tests;
        let mut problems = Vec::with_capacity(self.problems);
        for p in 0..self.problems {
            // hard[j]: test j is hard.
            let mut hard: Vec<bool> = (0..m).map(|j| j >= self.easy_tests).collect();
            hard.shuffle(&mut rng);

            let mut pool = Vec::new();
            pool.extend((0..self.solvers).map(|_| vec![true; m]));
            pool.extend((0..self.easy_only).map(|_| hard.iter().map(|&h| !h).collect()));
            for _ in 0..self.partial {
                loop {
                    let c: Vec<bool> = hard
                        .iter()
                        .map(|&h| {
                            let rate = if h { self.partial_hard_rate } else { self.partial_easy_rate };
                            rng.gen_bool(rate)
                        })
                        .collect();
                    let passed = c.iter().filter(|&&x| x).count();
                    if passed > 0 && passed < m {
                        pool.push(c);
                        break;
                    }
                }
            }
            pool.extend((0..self.failing).map(|_| vec![false; m]));
            pool.shuffle(&mut rng);
            problems.push(SyntheticProblem::new(format!("sim-{p:04}"), pool, self.noise)?);
        }
        Ok(Environment { problems })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvConfig {
    Explicit { problems: Vec<ProblemSpec> },
    Generated(GeneratedEnv),
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig::Generated(reference_env())
    }
}

fn parse_bits(problem_id: &str, bits: &str) -> Result<Vec<bool>> {
    bits.chars()
        .map(|c| match c {
            '1' => Ok(true),
            '0' => Ok(false),
            other => Err(Error::Validation {
                problem_id: problem_id.to_string(),
                message: format!("candidate bit string contains `{other}`"),
            }),
        })
        .collect()
}

impl EnvConfig {
    pub fn build(&self) -> Result<Environment> {
        match self {
            EnvConfig::Generated(g) => g.build(),
            EnvConfig::Explicit { problems } => {
                if problems.is_empty() {
                    return Err(Error::Empty("environment lists no problems"));
                }
                let problems = problems
                    .iter()
                    .map(|spec| {
                        let candidates = spec
                            .candidates
                            .iter()
                            .map(|b| parse_bits(&spec.problem_id, b))
                            .collect::<Result<Vec<_>>>()?;
                        SyntheticProblem::new(spec.problem_id.clone(), candidates, spec.noise)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Environment { problems })
            }
        }
    }
}
