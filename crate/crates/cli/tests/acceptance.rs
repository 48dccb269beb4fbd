//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::path::{Path, PathBuf};
use std::time::Instant;

use num_bigint::BigUint;
use oops::commands::{self, Env};
use oops::formats::parse_report;
use oops::{Outcome, RunConfig};
use oops_core::dovetail::Dovetailer;
use oops_core::guess::{speed_prior_tail, GuessMachine};
use oops_core::isa::{Alphabet, Op};
use oops_core::lsearch::lsearch;
use oops_core::oops::{solve_sequence, Executed, NoObserver, Observer, SearchConfig};
use oops_core::space::{prob_one, WeightTable};
use oops_core::task::{hanoi_oracle, planted_task, verify_hanoi, Goal, Task};
use oops_core::vm::{ExecOutcome, MachineState};
use oops_core::{FrozenStore, Prob, ProbabilityEdit};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

// tolerances
const HANOI_ORACLE_MAX_K: u32 = 20;
const HANOI_ORACLE_SECONDS: f64 = 1.0;
const ONE_TWO_TRAIN_K: u32 = 30;
const ONE_TWO_VERIFY_K: u32 = 50;
const ONE_TWO_STEP_LIMIT: u64 = 10_000_000_000;
const HANOI_MIN_K: u32 = 5;
const FUZZ_RUNS: usize = 1000;
const PLANTED_OPTIMAL: usize = 50;
const PLANTED_LSEARCH: usize = 20;
const LSEARCH_FACTOR: u64 = 4;
const TAIL_SAMPLES: u64 = 100_000;
const TAIL_SEEDS: u64 = 5;
const TAIL_STABILITY: f64 = 2.0;
const DOVETAIL_STEPS: u64 = 1 << 22;
const ROUNDTRIPS: usize = 1000;
/// Planted tasks whose best solver needs a longer search are redrawn.
const PLANTED_MAX_T: u64 = 1 << 20;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run_cmd(cmd: fn(&mut Env) -> Result<Outcome, oops::CliError>, config: RunConfig, out: &Path) -> Outcome {
    let mut sink = Vec::new();
    let mut env = Env { config, out: out.to_path_buf(), msg: &mut sink };
    cmd(&mut env).expect("command failed")
}

fn below(rng: &mut ChaCha8Rng, n: u64) -> u64 {
    rng.next_u64() % n
}

/// Runs a complete program token by token; `Some((steps, output))` iff it
/// asks for every token and halts right after the last one.
fn run_complete(p: &[Op], task: &Task, table: &WeightTable, store: &FrozenStore, limit: u64) -> Option<(u64, Vec<i64>)> {
    let mut s = task.initial_state(table);
    for len in 0..=p.len() {
        match s.run(&p[..len], store, limit.saturating_sub(s.steps)) {
            ExecOutcome::RequestToken if len < p.len() => {}
            ExecOutcome::Halted if len == p.len() => return Some((s.steps, s.out)),
            _ => return None,
        }
    }
    None
}

/// Static product of token probabilities.
fn static_prob(p: &[Op], alphabet: &Alphabet, table: &WeightTable) -> Prob {
    let total: u64 = table.weights().iter().map(|&w| w as u64).sum();
    let mut num = BigUint::from(1u32);
    let mut den = BigUint::from(1u32);
    for &op in p {
        num *= table.weights()[alphabet.id(op).unwrap() as usize];
        den *= total;
    }
    Prob::new(num, den)
}

fn all_programs(alphabet: &Alphabet, max_len: usize) -> Vec<Vec<Op>> {
    let mut out = vec![];
    let mut layer: Vec<Vec<Op>> = vec![vec![]];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|p| alphabet.ops().iter().map(move |&o| [p.as_slice(), &[o]].concat()))
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

const POOL: [Op; 14] = [
    Op::C0, Op::C1, Op::C2, Op::Inc, Op::Dec, Op::Add, Op::Mul, Op::Dup, Op::Swap, Op::Out1, Op::Out2, Op::OutV, Op::Rec, Op::Ret,
];

fn random_alphabet(rng: &mut ChaCha8Rng) -> Alphabet {
    let mut ops = vec![Op::Halt, [Op::Out1, Op::Out2][below(rng, 2) as usize]];
    while ops.len() < 4 {
        let o = POOL[below(rng, POOL.len() as u64) as usize];
        if !ops.contains(&o) {
            ops.push(o);
        }
    }
    for i in (1..ops.len()).rev() {
        ops.swap(i, below(rng, i as u64 + 1) as usize);
    }
    Alphabet::new(&ops).unwrap()
}

fn random_table(rng: &mut ChaCha8Rng, n: usize) -> WeightTable {
    WeightTable::from_weights((0..n).map(|_| 1 + below(rng, 6) as u32).collect()).unwrap()
}

/// A random planted task with non-empty output over `alphabet`.
fn random_planted(rng: &mut ChaCha8Rng, alphabet: &Alphabet, table: &WeightTable) -> Task {
    for _ in 0..10_000 {
        let len = 1 + below(rng, 4) as usize;
        let mut p: Vec<Op> = (0..len).map(|_| alphabet.op(below(rng, 4) as u8)).collect();
        p.push(Op::Halt);
        if let Some(pl) = planted_task("", &p, alphabet, table, &FrozenStore::new(), 1000) {
            if matches!(&pl.task.goal, Goal::Exact(v) if !v.is_empty()) {
                return pl.task;
            }
        }
    }
    unreachable!("an alphabet with halt and out1 or out2 always plants something")
}

fn c1_hanoi_oracle() -> Verdict {
    let start = Instant::now();
    let mut bad = vec![];
    for k in 1..=HANOI_ORACLE_MAX_K {
        let m = hanoi_oracle(k);
        if m.len() != (1usize << k) - 1 || !verify_hanoi(&m, k) {
            bad.push(k);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(bad.is_empty() && secs < HANOI_ORACLE_SECONDS, format!("k=1..{HANOI_ORACLE_MAX_K}, failing {bad:?}, {secs:.3}s"))
}

fn c2_one_two(out: &Path) -> Verdict {
    let dir = out.join("1k2k");
    let cfg = RunConfig::load(&configs().join("1k2k.cfg")).unwrap();
    let outcome = run_cmd(commands::cmd_oops, cfg, &dir);
    let rows = parse_report(&std::fs::read_to_string(dir.join("report.tsv")).unwrap()).unwrap();
    let steps: u64 = rows.iter().map(|r| r.steps_a + r.steps_b).sum();
    let mut verify = RunConfig::parse(&format!("task 1k2k k=1..{ONE_TWO_VERIFY_K}"), Path::new("-")).unwrap();
    verify.store = Some(dir.join("store.txt"));
    let checked = run_cmd(commands::cmd_verify, verify, &out.join("verify"));
    let solved = rows.iter().filter(|r| r.solved).count();
    let pass = outcome == Outcome::Ok
        && solved == ONE_TWO_TRAIN_K as usize
        && checked == Outcome::Ok
        && steps <= ONE_TWO_STEP_LIMIT;
    let last = rows.last().map(|r| oops::formats::program_text(&r.program)).unwrap_or_default();
    verdict(pass, format!("{solved} trained, verify k=1..{ONE_TWO_VERIFY_K} {checked:?}, {steps} steps, solver `{last}`"))
}

fn hanoi_reach(dir: &Path) -> (u32, u64) {
    let rows = parse_report(&std::fs::read_to_string(dir.join("report.tsv")).unwrap()).unwrap();
    let mut k = 0;
    let mut steps = 0;
    for r in &rows {
        steps += r.steps_a + r.steps_b;
        if r.solved {
            k += 1;
        } else {
            break;
        }
    }
    (k, steps)
}

fn c3_hanoi(out: &Path, store: &Path) -> Verdict {
    let mut inc = RunConfig::load(&configs().join("hanoi-incremental.cfg")).unwrap();
    inc.store = Some(store.to_path_buf());
    run_cmd(commands::cmd_oops, inc, &out.join("hanoi-inc"));
    let scratch = RunConfig::load(&configs().join("hanoi-scratch.cfg")).unwrap();
    run_cmd(commands::cmd_oops, scratch, &out.join("hanoi-scratch"));
    let (ki, si) = hanoi_reach(&out.join("hanoi-inc"));
    let (ks, ss) = hanoi_reach(&out.join("hanoi-scratch"));
    verdict(ki >= HANOI_MIN_K, format!("incremental K={ki} in {si} steps, from scratch K={ks} in {ss} steps"))
}

struct BudgetAudit {
    checked: u64,
    violations: u64,
}

impl Observer for BudgetAudit {
    fn executed(&mut self, ev: &Executed<'_>) {
        self.checked += 1;
        // time - 1 <= P * clock / n
        let lhs = BigUint::from(ev.time.saturating_sub(1)) * ev.prob.denom() * BigUint::from(ev.n_factor);
        let rhs = ev.prob.numer() * BigUint::from(ev.clock);
        if lhs > rhs {
            self.violations += 1;
        }
    }
}

fn c4_budget() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut audit = BudgetAudit { checked: 0, violations: 0 };
    for _ in 0..FUZZ_RUNS {
        let alphabet = random_alphabet(&mut rng);
        let table = random_table(&mut rng, 4);
        let n_tasks = 1 + below(&mut rng, 3) as usize;
        let mut tasks: Vec<Task> = (0..n_tasks).map(|_| random_planted(&mut rng, &alphabet, &table)).collect();
        if below(&mut rng, 2) == 0 {
            // an unreachable goal keeps the search running up to the ceiling
            let mut never = tasks[0].clone();
            never.goal = Goal::Exact(vec![-7; 3]);
            never.out_cap = 3;
            tasks.push(never);
        }
        let mut config = SearchConfig::new(alphabet, table);
        config.n_factor = 1 + below(&mut rng, 3);
        config.ceiling = 2_000 + below(&mut rng, 1_000_000);
        config.quantum = 1 + below(&mut rng, 256);
        solve_sequence(&tasks, &config, FrozenStore::new(), &mut audit);
    }
    verdict(
        audit.violations == 0 && audit.checked > 0,
        format!("{FUZZ_RUNS} runs, {} instructions audited, {} violations", audit.checked, audit.violations),
    )
}

/// Best `(t, P)` over brute-forced solvers, by `t/P`.
fn best_solver(task: &Task, alphabet: &Alphabet, table: &WeightTable, max_len: usize) -> Option<(Vec<Op>, u64, Prob)> {
    let mut best: Option<(Vec<Op>, u64, Prob)> = None;
    for p in all_programs(alphabet, max_len) {
        let Some((t, out)) = run_complete(&p, task, table, &FrozenStore::new(), 1 << 12) else { continue };
        if !task.accepts(&out) {
            continue;
        }
        let pr = static_prob(&p, alphabet, table);
        let better = best
            .as_ref()
            .is_none_or(|(_, bt, bp)| Prob::from_integer(BigUint::from(t)) / &pr < Prob::from_integer(BigUint::from(*bt)) / bp);
        if better {
            best = Some((p, t, pr));
        }
    }
    best
}

fn ceil_div(num: BigUint, den: &BigUint) -> u64 {
    let q = (num + den - 1u32) / den;
    q.try_into().unwrap_or(u64::MAX)
}

fn c5_bias_optimal() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut misses = vec![];
    let mut tested = 0;
    while tested < PLANTED_OPTIMAL {
        let alphabet = random_alphabet(&mut rng);
        let table = random_table(&mut rng, 4);
        let task = random_planted(&mut rng, &alphabet, &table);
        let Some((_, t, p)) = best_solver(&task, &alphabet, &table, 6) else { continue };
        let n = 1 + below(&mut rng, 2);
        // smallest T with t <= P*T/n
        let t_max = ceil_div(BigUint::from(t * n) * p.denom(), p.numer());
        if t_max > PLANTED_MAX_T {
            continue;
        }
        let mut config = SearchConfig::new(alphabet.clone(), table.clone());
        config.n_factor = n;
        config.ceiling = t_max;
        let r = solve_sequence(std::slice::from_ref(&task), &config, FrozenStore::new(), &mut NoObserver);
        let ok = r.solved()
            && r.total_steps <= t_max
            && run_complete(&r.solutions[0].program, &task, &table, &FrozenStore::new(), 1 << 12)
                .is_some_and(|(_, out)| task.accepts(&out));
        if !ok {
            misses.push(task.id.clone());
        }
        tested += 1;
    }
    verdict(misses.is_empty(), format!("{tested} planted tasks, misses {misses:?}"))
}

fn c6_lsearch() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut bad = vec![];
    let mut worst = 0.0f64;
    let mut tested = 0;
    while tested < PLANTED_LSEARCH {
        let alphabet = random_alphabet(&mut rng);
        let table = random_table(&mut rng, 4);
        let task = random_planted(&mut rng, &alphabet, &table);
        let Some((_, t, p)) = best_solver(&task, &alphabet, &table, 6) else { continue };
        let bound = ceil_div(BigUint::from(LSEARCH_FACTOR * t) * p.denom(), p.numer());
        if bound > LSEARCH_FACTOR * PLANTED_MAX_T {
            continue;
        }
        match lsearch(&task, &alphabet, &table, &FrozenStore::new(), bound.saturating_mul(2)) {
            Ok(f) if f.total_steps <= bound => worst = worst.max(f.total_steps as f64 / bound as f64),
            _ => bad.push(task.id.clone()),
        }
        tested += 1;
    }
    verdict(bad.is_empty(), format!("{tested} planted tasks, worst steps/bound {worst:.3}, violations {bad:?}"))
}

fn c7_tail() -> Verdict {
    let m = GuessMachine::small();
    let mut peaks = vec![];
    let mut monotone = true;
    for seed in 0..TAIL_SEEDS {
        let runtimes: Vec<u64> = commands::sample_all(&m, seed, TAIL_SAMPLES, 1).iter().map(|t| t.executed).collect();
        let (rows, peak) = speed_prior_tail(&runtimes);
        monotone &= rows.windows(2).all(|w| w[1].fraction <= w[0].fraction);
        peaks.push(peak);
    }
    let hi = peaks.iter().cloned().fold(0.0, f64::max);
    let lo = peaks.iter().cloned().fold(f64::INFINITY, f64::min);
    let pass = monotone && lo > 0.0 && hi / lo <= TAIL_STABILITY;
    let shown: Vec<String> = peaks.iter().map(|p| format!("{p:.5}")).collect();
    verdict(pass, format!("max t*P(runtime>t) per seed [{}], spread x{:.2}, monotone {monotone}", shown.join(", "), hi / lo))
}

fn c8_dovetail() -> Verdict {
    let alphabet = Alphabet::new(&[Op::C1, Op::Dup, Op::BzBack]).unwrap();
    let mut d = Dovetailer::new(alphabet, 1 << 20);
    let mut probes = 0u64;
    let mut violations = 0u64;
    let mut last_end = 0;
    let mut overlap = false;
    // steps each program would have run had it never stopped
    let mut granted: Vec<u64> = vec![];
    let mut slices = 0u64;
    d.run(DOVETAIL_STEPS, |a| {
        overlap |= a.start != last_end;
        last_end = a.start + a.granted;
        let bound = |s: u64| (2u128 << a.index.min(100)) * (s as u128 + 1);
        for s in a.before + 1..=a.before + a.used {
            probes += 1;
            violations += ((a.start + (s - a.before)) as u128 > bound(s)) as u64;
        }
        let j = a.index as usize;
        if granted.len() < j {
            granted.resize(j, 0);
        }
        if a.granted > 0 {
            slices += 1;
            // the slice's first step is its tightest point
            violations += ((a.start + 1) as u128 > bound(granted[j - 1] + 1)) as u64;
            granted[j - 1] += a.granted;
        }
    });
    verdict(
        violations == 0 && !overlap && probes > 0,
        format!(
            "{probes} executed first-completion times and {slices} schedule slices probed, {violations} violations, slices disjoint {}",
            !overlap
        ),
    )
}

fn c9_half_waste(runs: &[(&str, PathBuf)]) -> Verdict {
    let mut lines = vec![];
    let mut pass = true;
    for (name, dir) in runs {
        let cfg = RunConfig::load(&configs().join(name)).unwrap();
        let rows = parse_report(&std::fs::read_to_string(dir.join("report.tsv")).unwrap()).unwrap();
        let store = commands::load_store(Some(&dir.join("store.txt"))).unwrap();
        let tasks = cfg.build_tasks(&FrozenStore::new()).unwrap();
        let table = cfg.weight_table();
        // first task whose frozen program solves every later task
        let universal = (0..rows.len()).find(|&m| {
            rows[m].solved
                && tasks[m..].iter().all(|t| {
                    run_complete(&rows[m].program, t, &table, &store, 1 << 32).is_some_and(|(_, out)| t.accepts(&out))
                })
        });
        let Some(m) = universal else {
            pass = false;
            lines.push(format!("{name}: no universal solver"));
            continue;
        };
        let post = &rows[m + 1..];
        let a: u64 = post.iter().map(|r| r.steps_a).sum();
        let total: u64 = post.iter().map(|r| r.steps_a + r.steps_b).sum();
        let ok = 2 * a <= total + 2 * cfg.quantum;
        pass &= ok;
        lines.push(format!("{name}: after {} A used {a} of {total} steps", tasks[m].id));
    }
    verdict(pass, lines.join("; "))
}

fn c10_mechanics() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let store = FrozenStore::from_iter([vec![Op::C1, Op::OutV], vec![Op::Out2]]);
    let mut snapshot_bad = 0;
    for _ in 0..ROUNDTRIPS {
        let len = 1 + below(&mut rng, 12) as usize;
        let program: Vec<Op> = (0..len).map(|_| Op::ALL[below(&mut rng, Op::ALL.len() as u64) as usize]).collect();
        let stack: Vec<i64> = (0..below(&mut rng, 4)).map(|_| below(&mut rng, 5) as i64).collect();
        let mut s = MachineState::new(WeightTable::uniform(Op::ALL.len()), 32).with_stack(&stack).with_counter(3);
        s.run(&program, &store, below(&mut rng, 20));
        let snap = s.snapshot();
        let budget = below(&mut rng, 40);
        let first = s.run(&program, &store, budget);
        let after = s.clone();
        let mut again = snap.restore();
        let second = again.run(&program, &store, budget);
        if first != second || after != again || snap.restore() != *snap.state() {
            snapshot_bad += 1;
        }
    }

    let mut store_bad = 0;
    let mut log: Vec<Vec<Op>> = vec![];
    let mut frozen = FrozenStore::new();
    for _ in 0..100 {
        let before = frozen.clone();
        let p: Vec<Op> = (0..below(&mut rng, 5)).map(|_| Op::ALL[below(&mut rng, 28) as usize]).collect();
        if frozen.freeze(&p) != log.len() {
            store_bad += 1;
        }
        log.push(p);
        store_bad += (0..before.len()).filter(|&i| before.get(i) != frozen.get(i)).count();
    }
    store_bad += (frozen != log.iter().cloned().collect::<FrozenStore>()) as usize;

    let mut norm_bad = 0;
    for _ in 0..ROUNDTRIPS {
        let mut table = random_table(&mut rng, 5);
        for _ in 0..below(&mut rng, 30) {
            let edit = ProbabilityEdit { target: below(&mut rng, 7) as i64 - 1, multiplier: below(&mut rng, 40) as i64 - 2 };
            let _ = table.apply(edit);
        }
        let total: u64 = table.weights().iter().map(|&w| w as u64).sum();
        let sum = (0..5u8).fold(Prob::from_integer(BigUint::from(0u32)), |acc, t| acc + table.token_probability(t));
        let exact = (0..5u8).all(|t| {
            table.token_probability(t) == Prob::new(BigUint::from(table.weights()[t as usize]), BigUint::from(total))
        });
        if sum != prob_one() || !exact {
            norm_bad += 1;
        }
    }

    let m = GuessMachine::small();
    let one = commands::sample_all(&m, 42, 3000, 1);
    let workers_bad = [2, 3, 7].iter().filter(|&&w| commands::sample_all(&m, 42, 3000, w) != one).count();

    let pass = snapshot_bad == 0 && store_bad == 0 && norm_bad == 0 && workers_bad == 0;
    verdict(
        pass,
        format!(
            "snapshot mismatches {snapshot_bad}/{ROUNDTRIPS}, store {store_bad}, normalization {norm_bad}/{ROUNDTRIPS}, worker-count differences {workers_bad}"
        ),
    )
}

fn timed(name: &'static str, f: impl FnOnce() -> Verdict) -> (&'static str, Verdict, f64) {
    let start = Instant::now();
    let v = f();
    let secs = start.elapsed().as_secs_f64();
    eprintln!("{name} done in {secs:.1}s");
    (name, v, secs)
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    let store = out.join("1k2k").join("store.txt");
    let runs = [("1k2k.cfg", out.join("1k2k")), ("hanoi-scratch.cfg", out.join("hanoi-scratch"))];
    let results = [
        timed("hanoi oracle length", c1_hanoi_oracle),
        timed("1k2k discovery", || c2_one_two(out)),
        timed("hanoi discovery", || c3_hanoi(out, &store)),
        timed("budget invariant", c4_budget),
        timed("bias-optimal discovery", c5_bias_optimal),
        timed("lsearch bound", c6_lsearch),
        timed("speed prior tail", c7_tail),
        timed("dovetailer bound", c8_dovetail),
        timed("half-waste", || c9_half_waste(&runs)),
        timed("mechanical invariants", c10_mechanics),
    ];
    let mut failed = 0;
    for (name, v, secs) in &results {
        println!("{} {name}: {} [{secs:.1}s]", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += !v.pass as usize;
    }
    println!("{} of {} criteria pass", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
