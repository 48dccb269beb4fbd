//! The subcommands. Each writes its tables into the output directory and a
//! short human-readable account to `msg`.

use std::io::Write;
use std::path::{Path, PathBuf};

use oops_core::dovetail::{program_at, Dovetailer};
use oops_core::guess::{prefix_frequency, speed_prior_tail, GuessEnd, GuessMachine, GuessTrace};
use oops_core::isa::Op;
use oops_core::lsearch::{adaptive_lsearch, lsearch, Found, LsearchError};
use oops_core::oops::{solve_sequence, NoObserver, SearchError, Side};
use oops_core::{ExecOutcome, FrozenStore};

use crate::config::RunConfig;
use crate::error::{CliError, Outcome};
use crate::formats::{self, program_text, Event, ReportRow};

pub struct Env<'a> {
    pub config: RunConfig,
    pub out: PathBuf,
    pub msg: &'a mut dyn Write,
}

impl Env<'_> {
    fn write(&self, name: &str, text: &str) -> Result<PathBuf, CliError> {
        std::fs::create_dir_all(&self.out).map_err(CliError::io(&self.out))?;
        let path = self.out.join(name);
        std::fs::write(&path, text).map_err(CliError::io(&path))?;
        Ok(path)
    }

    fn say(&mut self, line: impl AsRef<str>) {
        let _ = writeln!(self.msg, "{}", line.as_ref());
    }
}

pub fn load_store(path: Option<&Path>) -> Result<FrozenStore, CliError> {
    let Some(path) = path else { return Ok(FrozenStore::new()) };
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    formats::parse_store(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn cmd_oops(env: &mut Env) -> Result<Outcome, CliError> {
    let store = load_store(env.config.store.as_deref())?;
    let preloaded = store.len();
    let tasks = env.config.build_tasks(&store)?;
    let report = solve_sequence(&tasks, &env.config.search_config(), store, &mut NoObserver);

    let mut rows = Vec::new();
    let mut summary = String::new();
    for s in &report.solutions {
        let side = if s.side == Side::A { "A" } else { "B" };
        summary += &format!(
            "{}: solved by {side} after {} steps (A {}, B {}), frozen at {}: {}\n",
            tasks[s.task].id,
            s.steps_a + s.steps_b,
            s.steps_a,
            s.steps_b,
            s.addr,
            program_text(&s.program)
        );
        rows.push(ReportRow {
            task_id: tasks[s.task].id.clone(),
            solved: true,
            program: s.program.clone(),
            prob: Some(s.prob.clone()),
            steps_a: s.steps_a,
            steps_b: s.steps_b,
        });
    }
    let outcome = match &report.error {
        None => Outcome::Ok,
        Some(e) => {
            let (SearchError::CeilingExhausted { task } | SearchError::SpaceExhausted { task }) = *e;
            summary += &format!("{}: {e}\n", tasks[task].id);
            rows.push(ReportRow {
                task_id: tasks[task].id.clone(),
                solved: false,
                program: Vec::new(),
                prob: None,
                steps_a: report.unsolved_steps.0,
                steps_b: report.unsolved_steps.1,
            });
            Outcome::Ceiling
        }
    };
    summary += &format!(
        "{} of {} tasks solved; {} search steps, {} instructions executed; store has {} programs ({} preloaded)\n",
        report.solutions.len(),
        tasks.len(),
        report.total_steps,
        report.executed,
        report.store.len(),
        preloaded
    );
    env.write("report.tsv", &formats::render_report(&rows))?;
    env.write("store.txt", &formats::render_store(&report.store))?;
    env.write("summary.txt", &summary)?;
    env.say(summary.trim_end());
    Ok(outcome)
}

const LSEARCH_HEADER: [&str; 8] = ["task_id", "solved", "program", "prob", "steps", "phase_limit", "total_steps", "weights"];

fn lsearch_row(id: &str, result: &Result<Found, LsearchError>, weights: &[u32]) -> Vec<String> {
    let w: Vec<String> = weights.iter().map(|w| w.to_string()).collect();
    match result {
        Ok(f) => vec![
            id.to_string(),
            "1".into(),
            program_text(&f.program),
            format!("{}/{}", f.prob.numer(), f.prob.denom()),
            f.steps.to_string(),
            f.phase_limit.to_string(),
            f.total_steps.to_string(),
            w.join(" "),
        ],
        Err(LsearchError::CeilingExhausted { steps } | LsearchError::SpaceExhausted { steps }) => {
            vec![id.to_string(), "0".into(), String::new(), "-".into(), "-".into(), "-".into(), steps.to_string(), w.join(" ")]
        }
    }
}

pub fn cmd_lsearch(env: &mut Env) -> Result<Outcome, CliError> {
    let store = load_store(env.config.store.as_deref())?;
    let tasks = env.config.build_tasks(&store)?;
    let table = env.config.weight_table();
    let mut rows = Vec::new();
    let mut outcome = Outcome::Ok;
    for t in &tasks {
        let r = lsearch(t, &env.config.alphabet, &table, &store, env.config.ceiling);
        match &r {
            Ok(f) => env.say(format!("{}: {} steps, found {}", t.id, f.total_steps, program_text(&f.program))),
            Err(e) => {
                env.say(format!("{}: {e}", t.id));
                outcome = Outcome::Ceiling;
            }
        }
        rows.push(lsearch_row(&t.id, &r, table.weights()));
    }
    env.write("lsearch.tsv", &formats::render_tsv(&LSEARCH_HEADER, &rows))?;
    Ok(outcome)
}

pub fn cmd_als(env: &mut Env) -> Result<Outcome, CliError> {
    let tasks = env.config.build_tasks(&FrozenStore::new())?;
    let c = &env.config;
    let steps = adaptive_lsearch(&tasks, &c.alphabet, &c.weight_table(), c.gamma, c.ceiling);
    let mut rows = Vec::new();
    let mut outcome = Outcome::Ok;
    for (t, s) in tasks.iter().zip(&steps) {
        match &s.result {
            Ok(f) => env.say(format!("{}: {} steps, found {}", t.id, f.total_steps, program_text(&f.program))),
            Err(e) => {
                env.say(format!("{}: {e}", t.id));
                outcome = Outcome::Ceiling;
            }
        }
        rows.push(lsearch_row(&t.id, &s.result, s.table.weights()));
    }
    env.write("als.tsv", &formats::render_tsv(&LSEARCH_HEADER, &rows))?;
    Ok(outcome)
}

/// Draws samples `0..n` with `workers` threads. Each sample has its own
/// stream, and results come back in sample order.
pub fn sample_all(m: &GuessMachine, seed: u64, n: u64, workers: usize) -> Vec<GuessTrace> {
    let workers = workers.clamp(1, n.max(1) as usize) as u64;
    let chunk = n.div_ceil(workers);
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let range = (w * chunk).min(n)..((w + 1) * chunk).min(n);
                s.spawn(move || range.map(|i| m.sample_seeded(seed, i)).collect::<Vec<_>>())
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("sampler thread panicked")).collect()
    })
}

fn end_text(e: GuessEnd) -> String {
    match e {
        GuessEnd::Exit => "exit".into(),
        GuessEnd::Halted => "halt".into(),
        GuessEnd::Fault(f) => format!("fault: {f}"),
        GuessEnd::InvalidCode(c) => format!("invalid code {c}"),
        GuessEnd::Capped => "capped".into(),
        GuessEnd::OutOfCoins => "out of coins".into(),
    }
}

fn machine(c: &RunConfig) -> GuessMachine {
    let mut m = GuessMachine::new(c.alphabet.clone());
    m.out_cap = c.out_cap;
    m
}

pub fn cmd_guess(env: &mut Env) -> Result<Outcome, CliError> {
    let c = &env.config;
    let traces = sample_all(&machine(c), c.seed, c.samples, c.workers);
    let rows: Vec<Vec<String>> = traces
        .iter()
        .enumerate()
        .map(|(i, t)| {
            vec![
                i.to_string(),
                end_text(t.end),
                t.executed.to_string(),
                t.tosses.to_string(),
                program_text(&t.program),
                formats::output_text(&t.output),
            ]
        })
        .collect();
    let f = prefix_frequency(&traces, &c.prefix);
    let n = traces.len().max(1) as f64;
    let half = 1.96 * (f * (1.0 - f) / n).sqrt();
    let line = format!(
        "S({}) ~ {f:.5} +- {half:.5} over {} samples",
        formats::output_text(&c.prefix),
        traces.len()
    );
    env.write("guess.tsv", &formats::render_tsv(&formats::GUESS_HEADER, &rows))?;
    env.write("summary.txt", &format!("{line}\n"))?;
    env.say(line);
    Ok(Outcome::Ok)
}

pub fn cmd_speed_tail(env: &mut Env) -> Result<Outcome, CliError> {
    let c = &env.config;
    let traces = sample_all(&machine(c), c.seed, c.samples, c.workers);
    let runtimes: Vec<u64> = traces.iter().map(|t| t.executed).collect();
    let (rows, peak) = speed_prior_tail(&runtimes);
    let checks: u64 = traces.iter().map(|t| t.checks).sum();
    let heads: u64 = traces.iter().map(|t| t.heads).sum();
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.t.to_string(), r.fraction.to_string(), (r.t as f64 * r.fraction).to_string()])
        .collect();
    let rate = heads as f64 / checks.max(1) as f64;
    let z = (rate - 0.5) / (0.25 / checks.max(1) as f64).sqrt();
    let summary = format!("max t*fraction {peak:.4}\nhead rate {rate:.5} over {checks} checks (z = {z:.2})\n");
    env.write("tail.tsv", &formats::render_tsv(&formats::TAIL_HEADER, &table))?;
    env.write("summary.txt", &summary)?;
    env.say(summary.trim_end());
    Ok(Outcome::Ok)
}

pub fn cmd_dovetail(env: &mut Env) -> Result<Outcome, CliError> {
    let c = &env.config;
    let mut d = Dovetailer::new(c.alphabet.clone(), c.out_cap);
    let mut events = Vec::new();
    d.run(c.global_steps, |a| {
        if !a.new_output.is_empty() {
            let program = program_at(&c.alphabet, a.index);
            events.push(Event { phase: a.phase, program, new_output: a.new_output.clone() });
        }
    });
    let line = format!("{} output events in {} steps", events.len(), d.clock());
    env.write("events.tsv", &formats::render_events(&events))?;
    env.say(line);
    Ok(Outcome::Ok)
}

pub fn cmd_verify(env: &mut Env) -> Result<Outcome, CliError> {
    let Some(path) = env.config.store.clone() else {
        return Err(CliError::Usage("verify needs a `store` line in the config".into()));
    };
    let store = load_store(Some(&path))?;
    if store.is_empty() {
        env.say(format!("warning: {} holds no programs; nothing to verify", path.display()));
        return Ok(Outcome::Ok);
    }
    let index = env.config.verify_program.unwrap_or(store.len() - 1);
    let program = store
        .get(index)
        .ok_or_else(|| CliError::Usage(format!("store has no program {index}")))?
        .to_vec();
    let tasks = env.config.build_tasks(&store)?;
    let table = env.config.weight_table();
    let mut rows = Vec::new();
    let mut failing = Vec::new();
    for t in &tasks {
        let mut s = t.initial_state(&table);
        let outcome = s.run(&program, &store, env.config.verify_steps);
        let ok = outcome == ExecOutcome::Halted && t.accepts(&s.out);
        if !ok {
            failing.push(t.id.clone());
        }
        rows.push(vec![t.id.clone(), (ok as u8).to_string(), s.steps.to_string()]);
    }
    env.write("verify.tsv", &formats::render_tsv(&["task_id", "ok", "steps"], &rows))?;
    if failing.is_empty() {
        env.say(format!("program {index} passes all {} tasks", tasks.len()));
        Ok(Outcome::Ok)
    } else {
        env.say(format!("program {index} fails: {}", failing.join(" ")));
        Ok(Outcome::VerifyFailed)
    }
}

pub fn cmd_dump_isa(env: &mut Env) -> Result<Outcome, CliError> {
    let rows: Vec<Vec<String>> = Op::ALL
        .iter()
        .map(|&o| vec![(o as u8).to_string(), o.mnemonic().into(), o.arity().to_string(), o.summary().into()])
        .collect();
    let text = formats::render_tsv(&["id", "mnemonic", "arity", "summary"], &rows);
    let _ = env.msg.write_all(text.as_bytes());
    Ok(Outcome::Ok)
}
