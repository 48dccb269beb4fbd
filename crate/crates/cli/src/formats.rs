//! Text formats written and read by the harness. Every table is TSV with a
//! header row; programs are space-separated mnemonics.

use std::fmt::Write as _;
use std::str::FromStr;

use num_bigint::BigUint;
use oops_core::isa::Op;
use oops_core::{FrozenStore, Prob};

pub fn program_text(program: &[Op]) -> String {
    let names: Vec<&str> = program.iter().map(|o| o.mnemonic()).collect();
    names.join(" ")
}

pub fn parse_program(text: &str) -> Result<Vec<Op>, String> {
    text.split_whitespace().map(|w| Op::from_mnemonic(w).ok_or_else(|| format!("unknown token `{w}`"))).collect()
}

fn symbols_text(v: &[i64]) -> String {
    let s: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    s.join(" ")
}

fn parse_symbols(text: &str) -> Result<Vec<i64>, String> {
    text.split_whitespace().map(|w| w.parse().map_err(|_| format!("bad symbol `{w}`"))).collect()
}

fn num<T: FromStr>(w: &str) -> Result<T, String> {
    w.parse().map_err(|_| format!("bad number `{w}`"))
}

/// One line per program: `<index> <mnemonic...>`.
pub fn render_store(store: &FrozenStore) -> String {
    let mut s = String::new();
    for (i, p) in store.iter().enumerate() {
        let _ = if p.is_empty() { writeln!(s, "{i}") } else { writeln!(s, "{i} {}", program_text(p)) };
    }
    s
}

pub fn parse_store(text: &str) -> Result<FrozenStore, String> {
    let mut store = FrozenStore::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let mut words = line.split_whitespace();
        let idx: usize = words.next().and_then(|w| w.parse().ok()).ok_or(format!("line {}: missing index", i + 1))?;
        if idx != store.len() {
            return Err(format!("line {}: expected index {}, found {idx}", i + 1, store.len()));
        }
        let ops = words
            .map(|w| Op::from_mnemonic(w).ok_or_else(|| format!("line {}: unknown token `{w}`", i + 1)))
            .collect::<Result<Vec<_>, _>>()?;
        store.freeze(&ops);
    }
    Ok(store)
}

/// Splits a TSV document, checking the header. Returns the data rows.
pub fn parse_tsv<'a>(text: &'a str, header: &[&str]) -> Result<Vec<Vec<&'a str>>, String> {
    let mut lines = text.lines();
    let head: Vec<&str> = lines.next().ok_or("empty table")?.split('\t').collect();
    if head != header {
        return Err(format!("unexpected header {head:?}"));
    }
    lines
        .enumerate()
        .map(|(i, l)| {
            let row: Vec<&str> = l.split('\t').collect();
            if row.len() == header.len() {
                Ok(row)
            } else {
                Err(format!("row {}: {} columns, expected {}", i + 1, row.len(), header.len()))
            }
        })
        .collect()
}

pub fn render_tsv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = header.join("\t");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join("\t"));
        s.push('\n');
    }
    s
}

pub const REPORT_HEADER: [&str; 6] = ["task_id", "solved", "program", "prob", "steps_A", "steps_B"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReportRow {
    pub task_id: String,
    pub solved: bool,
    pub program: Vec<Op>,
    pub prob: Option<Prob>,
    pub steps_a: u64,
    pub steps_b: u64,
}

pub fn render_report(rows: &[ReportRow]) -> String {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.task_id.clone(),
                (r.solved as u8).to_string(),
                program_text(&r.program),
                r.prob.as_ref().map_or("-".into(), |p| format!("{}/{}", p.numer(), p.denom())),
                r.steps_a.to_string(),
                r.steps_b.to_string(),
            ]
        })
        .collect();
    render_tsv(&REPORT_HEADER, &rows)
}

pub fn parse_report(text: &str) -> Result<Vec<ReportRow>, String> {
    parse_tsv(text, &REPORT_HEADER)?
        .into_iter()
        .map(|r| {
            let prob = match r[3] {
                "-" => None,
                p => {
                    let (n, d) = p.split_once('/').ok_or(format!("bad probability `{p}`"))?;
                    let (n, d): (BigUint, BigUint) = (num(n)?, num(d)?);
                    Some(Prob::new(n, d))
                }
            };
            Ok(ReportRow {
                task_id: r[0].to_string(),
                solved: match r[1] {
                    "1" => true,
                    "0" => false,
                    s => return Err(format!("bad solved flag `{s}`")),
                },
                program: parse_program(r[2])?,
                prob,
                steps_a: num(r[4])?,
                steps_b: num(r[5])?,
            })
        })
        .collect()
}

pub const EVENT_HEADER: [&str; 3] = ["phase", "program", "new_output"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Event {
    pub phase: u32,
    pub program: Vec<Op>,
    pub new_output: Vec<i64>,
}

pub fn render_events(events: &[Event]) -> String {
    let rows: Vec<Vec<String>> = events
        .iter()
        .map(|e| vec![e.phase.to_string(), program_text(&e.program), symbols_text(&e.new_output)])
        .collect();
    render_tsv(&EVENT_HEADER, &rows)
}

pub fn parse_events(text: &str) -> Result<Vec<Event>, String> {
    parse_tsv(text, &EVENT_HEADER)?
        .into_iter()
        .map(|r| Ok(Event { phase: num(r[0])?, program: parse_program(r[1])?, new_output: parse_symbols(r[2])? }))
        .collect()
}

pub const TAIL_HEADER: [&str; 3] = ["t", "fraction", "t_times_fraction"];

pub fn parse_tail(text: &str) -> Result<Vec<(u64, f64)>, String> {
    parse_tsv(text, &TAIL_HEADER)?.into_iter().map(|r| Ok((num(r[0])?, num(r[1])?))).collect()
}

pub const GUESS_HEADER: [&str; 6] = ["sample", "end", "executed", "tosses", "program", "output"];

pub fn output_text(v: &[i64]) -> String {
    symbols_text(v)
}
