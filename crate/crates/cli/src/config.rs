//! Line-oriented run configuration.
//!
//! ```text
//! # comment
//! alphabet c0 c1 out1 out2 halt
//! weight out1 4
//! task 1k2k k=1..30
//! task hanoi k=3
//! task planted c1 outv halt
//! ceiling 1000000
//! ```
//!
//! Every key except `weight` and `task` may appear at most once.

use std::fmt::Write as _;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use num_rational::Ratio;
use oops_core::isa::{Alphabet, Op};
use oops_core::oops::SearchConfig;
use oops_core::space::{WeightTable, WEIGHT_CAP};
use oops_core::task::{make_1k2k, make_hanoi, planted_task, Task};
use oops_core::FrozenStore;

use crate::error::CliError;

/// Step limit for running a planted program when the task is built.
pub const PLANTED_STEPS: u64 = 1 << 20;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TaskSpec {
    OneTwo(RangeInclusive<u32>),
    Hanoi(RangeInclusive<u32>),
    Planted(Vec<Op>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunConfig {
    pub alphabet: Alphabet,
    pub weights: Vec<(Op, u32)>,
    pub tasks: Vec<TaskSpec>,
    pub n_factor: u64,
    pub ceiling: u64,
    pub quantum: u64,
    pub samples: u64,
    pub global_steps: u64,
    pub store: Option<PathBuf>,
    pub workers: usize,
    pub seed: u64,
    pub gamma: Ratio<u64>,
    /// Output prefix whose sampled frequency `guess-sample` reports.
    pub prefix: Vec<i64>,
    pub out_cap: usize,
    pub verify_program: Option<usize>,
    pub verify_steps: u64,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            alphabet: Alphabet::full(),
            weights: Vec::new(),
            tasks: Vec::new(),
            n_factor: 1,
            ceiling: 1 << 32,
            quantum: 1 << 10,
            samples: 10_000,
            global_steps: 1 << 16,
            store: None,
            workers: 1,
            seed: 0,
            gamma: Ratio::new(1, 2),
            prefix: Vec::new(),
            out_cap: 64,
            verify_program: None,
            verify_steps: 1 << 32,
        }
    }
}

fn bad(path: &Path, line: usize, msg: impl Into<String>) -> CliError {
    CliError::Config { path: path.to_path_buf(), line, msg: msg.into() }
}

fn op(word: &str) -> Result<Op, String> {
    Op::from_mnemonic(word).ok_or_else(|| format!("unknown token `{word}`"))
}

fn int<T: std::str::FromStr>(word: &str) -> Result<T, String> {
    word.parse().map_err(|_| format!("`{word}` is not a non-negative integer"))
}

fn range(args: &[&str]) -> Result<RangeInclusive<u32>, String> {
    let [arg] = args else { return Err("expected k=<lo>..<hi> or k=<n>".into()) };
    let spec = arg.strip_prefix("k=").ok_or_else(|| format!("expected k=..., got `{arg}`"))?;
    let (lo, hi) = match spec.split_once("..") {
        Some((lo, hi)) => (int(lo)?, int(hi)?),
        None => {
            let k = int(spec)?;
            (k, k)
        }
    };
    if lo > hi {
        return Err(format!("empty range {lo}..{hi}"));
    }
    Ok(lo..=hi)
}

fn ratio(word: &str) -> Result<Ratio<u64>, String> {
    let (n, d) = word.split_once('/').ok_or_else(|| format!("expected a fraction like 1/2, got `{word}`"))?;
    let (n, d): (u64, u64) = (int(n)?, int(d)?);
    if n == 0 || n >= d {
        return Err(format!("{word} is not strictly between 0 and 1"));
    }
    Ok(Ratio::new(n, d))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        let mut cfg = RunConfig::parse(&text, path)?;
        if let Some(store) = &cfg.store {
            if store.is_relative() {
                let base = path.parent().unwrap_or(Path::new(""));
                cfg.store = Some(base.join(store));
            }
        }
        Ok(cfg)
    }

    /// Parses config text; `path` only labels error messages.
    pub fn parse(text: &str, path: &Path) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        let mut seen: Vec<&str> = Vec::new();
        let mut weight_lines = Vec::new();
        let mut alphabet_line = 0;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("");
            let words: Vec<&str> = content.split_whitespace().collect();
            let Some((&key, args)) = words.split_first() else { continue };
            let err = |msg: String| bad(path, line, msg);
            if !matches!(key, "weight" | "task") {
                if seen.contains(&key) {
                    return Err(err(format!("duplicate key `{key}`")));
                }
                seen.push(key);
            }
            let one = || match args {
                [v] => Ok(*v),
                _ => Err(err(format!("`{key}` takes exactly one value"))),
            };
            match key {
                "alphabet" => {
                    let ops = args.iter().map(|w| op(w)).collect::<Result<Vec<_>, _>>().map_err(err)?;
                    cfg.alphabet = Alphabet::new(&ops).map_err(|e| bad(path, line, e.to_string()))?;
                    alphabet_line = line;
                }
                "weight" => {
                    let [name, w] = args else { return Err(err("expected `weight <token> <integer>`".into())) };
                    let o = op(name).map_err(err)?;
                    let w: u32 = int(w).map_err(err)?;
                    if w == 0 || w > WEIGHT_CAP {
                        return Err(err(format!("weight {w} outside 1..={WEIGHT_CAP}")));
                    }
                    if cfg.weights.iter().any(|&(p, _)| p == o) {
                        return Err(err(format!("weight for `{name}` given twice")));
                    }
                    cfg.weights.push((o, w));
                    weight_lines.push(line);
                }
                "task" => {
                    let Some((&kind, rest)) = args.split_first() else { return Err(err("missing task kind".into())) };
                    let spec = match kind {
                        "1k2k" => TaskSpec::OneTwo(range(rest).map_err(err)?),
                        "hanoi" => {
                            let r = range(rest).map_err(err)?;
                            if *r.start() == 0 || *r.end() > 30 {
                                return Err(err("hanoi sizes must lie in 1..=30".into()));
                            }
                            TaskSpec::Hanoi(r)
                        }
                        "planted" => TaskSpec::Planted(rest.iter().map(|w| op(w)).collect::<Result<_, _>>().map_err(err)?),
                        other => return Err(err(format!("unknown task kind `{other}`"))),
                    };
                    cfg.tasks.push(spec);
                }
                "n_factor" => {
                    cfg.n_factor = int(one()?).map_err(err)?;
                    if cfg.n_factor == 0 {
                        return Err(err("n_factor must be at least 1".into()));
                    }
                }
                "ceiling" => {
                    cfg.ceiling = int(one()?).map_err(err)?;
                    if cfg.ceiling == 0 {
                        return Err(err("ceiling must be positive".into()));
                    }
                }
                "quantum" => {
                    cfg.quantum = int(one()?).map_err(err)?;
                    if cfg.quantum == 0 {
                        return Err(err("quantum must be positive".into()));
                    }
                }
                "samples" => cfg.samples = int(one()?).map_err(err)?,
                "global_steps" => cfg.global_steps = int(one()?).map_err(err)?,
                "store" => cfg.store = Some(PathBuf::from(one()?)),
                "workers" => cfg.workers = int::<usize>(one()?).map_err(err)?.max(1),
                "seed" => cfg.seed = int(one()?).map_err(err)?,
                "gamma" => cfg.gamma = ratio(one()?).map_err(err)?,
                "prefix" => cfg.prefix = args.iter().map(|w| w.parse().map_err(|_| format!("bad symbol `{w}`"))).collect::<Result<_, _>>().map_err(err)?,
                "out_cap" => cfg.out_cap = int(one()?).map_err(err)?,
                "verify_program" => cfg.verify_program = Some(int(one()?).map_err(err)?),
                "verify_steps" => cfg.verify_steps = int(one()?).map_err(err)?,
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        for (&(o, _), &line) in cfg.weights.iter().zip(&weight_lines) {
            if cfg.alphabet.id(o).is_none() {
                let at = if alphabet_line > 0 { format!(" (alphabet on line {alphabet_line})") } else { String::new() };
                return Err(bad(path, line, format!("token `{o}` is not in the alphabet{at}")));
            }
        }
        Ok(cfg)
    }

    /// Canonical text form; parses back to an equal config.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let d = RunConfig::default();
        if self.alphabet != d.alphabet {
            let names: Vec<&str> = self.alphabet.ops().iter().map(|o| o.mnemonic()).collect();
            let _ = writeln!(s, "alphabet {}", names.join(" "));
        }
        for (o, w) in &self.weights {
            let _ = writeln!(s, "weight {o} {w}");
        }
        for t in &self.tasks {
            let _ = match t {
                TaskSpec::OneTwo(r) => writeln!(s, "task 1k2k k={}..{}", r.start(), r.end()),
                TaskSpec::Hanoi(r) => writeln!(s, "task hanoi k={}..{}", r.start(), r.end()),
                TaskSpec::Planted(p) => {
                    let names: Vec<&str> = p.iter().map(|o| o.mnemonic()).collect();
                    writeln!(s, "task planted {}", names.join(" "))
                }
            };
        }
        let nums: [(&str, u64, u64); 8] = [
            ("n_factor", self.n_factor, d.n_factor),
            ("ceiling", self.ceiling, d.ceiling),
            ("quantum", self.quantum, d.quantum),
            ("samples", self.samples, d.samples),
            ("global_steps", self.global_steps, d.global_steps),
            ("workers", self.workers as u64, d.workers as u64),
            ("seed", self.seed, d.seed),
            ("out_cap", self.out_cap as u64, d.out_cap as u64),
        ];
        for (k, v, def) in nums {
            if v != def {
                let _ = writeln!(s, "{k} {v}");
            }
        }
        if let Some(p) = &self.store {
            let _ = writeln!(s, "store {}", p.display());
        }
        if self.gamma != d.gamma {
            let _ = writeln!(s, "gamma {}/{}", self.gamma.numer(), self.gamma.denom());
        }
        if !self.prefix.is_empty() {
            let syms: Vec<String> = self.prefix.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "prefix {}", syms.join(" "));
        }
        if let Some(i) = self.verify_program {
            let _ = writeln!(s, "verify_program {i}");
        }
        if self.verify_steps != d.verify_steps {
            let _ = writeln!(s, "verify_steps {}", self.verify_steps);
        }
        s
    }

    pub fn weight_table(&self) -> WeightTable {
        let mut t = WeightTable::uniform(self.alphabet.len());
        for &(o, w) in &self.weights {
            if let Some(id) = self.alphabet.id(o) {
                t.set(id, w);
            }
        }
        t
    }

    pub fn search_config(&self) -> SearchConfig {
        let mut c = SearchConfig::new(self.alphabet.clone(), self.weight_table());
        c.n_factor = self.n_factor;
        c.ceiling = self.ceiling;
        c.quantum = self.quantum;
        c
    }

    /// Expands the task lines in order. Planted programs run against `store`.
    pub fn build_tasks(&self, store: &FrozenStore) -> Result<Vec<Task>, CliError> {
        let table = self.weight_table();
        let mut out = Vec::new();
        for spec in &self.tasks {
            match spec {
                TaskSpec::OneTwo(r) => out.extend(r.clone().map(make_1k2k)),
                TaskSpec::Hanoi(r) => out.extend(r.clone().map(make_hanoi)),
                TaskSpec::Planted(p) => {
                    let planted = planted_task("", p, &self.alphabet, &table, store, PLANTED_STEPS).ok_or_else(|| {
                        let names: Vec<&str> = p.iter().map(|o| o.mnemonic()).collect();
                        CliError::Usage(format!(
                            "planted program `{}` does not halt right after its last token",
                            names.join(" ")
                        ))
                    })?;
                    out.push(planted.task);
                }
            }
        }
        Ok(out)
    }
}
