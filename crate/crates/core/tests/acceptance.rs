//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Run alone with `cargo test -p meshcast-core --test acceptance`; pass
//! criterion ids (`C4 C7`) after `--` to run a subset.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use meshcast::graph::{diameter, generate_graph, GeneratorSpec, MeshGraph, NodeId};
use meshcast::harness::run_trials;
use meshcast::protocols::{
    DecayClock, DecayState, Env, MultiState, PhaseStats, ProtocolParams, Registry, RobustSchedule,
};
use meshcast::rlnc::{gf256, DecoderState};
use meshcast::sgst::{build_sgst, rank_tree, verify_sgst, Sgst};
use meshcast::sim::{
    classic_receptions, default_max_rounds, run_protocol, FaultMode, NoiseModel, Observed, Resolver,
    SimConfig, SlotKind, Trace, TraceLevel, Transmission, Payload,
};
use meshcast::rng::CoinStream;
use meshcast::stats::{median, quantile};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Failure budget shared by the statistical criteria.
const DELTA: f64 = 0.1;
/// Fitted constants may differ by less than this factor between sizes.
const STABILITY: f64 = 2.0;
/// Constant in the robust round budget `C''(D + lg n (lg n + lg 1/delta))`.
const ROBUST_BUDGET_C: f64 = 16.0;
/// Criteria that fail with the current construction; see README.
const EXPECTED_FAIL: &[u32] = &[8];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn lg(n: usize) -> f64 {
    (n as f64).log2().ceil()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn generate(spec: &str, seed: u64) -> MeshGraph {
    generate_graph(&spec.parse().unwrap(), seed).unwrap()
}

/// Mixed-family connected graphs with at most `max_n` nodes.
fn corpus(count: usize, max_n: usize, seed: u64) -> Vec<(String, MeshGraph)> {
    let mut r = rng(seed);
    (0..count)
        .map(|i| {
            let n = r.gen_range(2..=max_n);
            let spec = match i % 6 {
                0 => GeneratorSpec::Path(n),
                1 => GeneratorSpec::Star(n),
                2 => GeneratorSpec::CompleteBinaryTree(n),
                3 => {
                    let w = r.gen_range(1..=(n as f64).sqrt() as usize);
                    GeneratorSpec::Grid(w, n / w)
                }
                4 => {
                    let n = n.max(8);
                    GeneratorSpec::RandomConnected(n, (3.0 * (n as f64).ln() / n as f64).min(1.0))
                }
                _ => {
                    let width = r.gen_range(2..=8);
                    GeneratorSpec::LayeredExpander {
                        depth: ((n - 1) / width).max(1),
                        width,
                    }
                }
            };
            let g = generate_graph(&spec, seed + i as u64).unwrap();
            (spec.to_string(), g)
        })
        .collect()
}

/// Ranks by direct recursion over the definition, filling `out`.
fn oracle_rank(children: &[Vec<NodeId>], v: NodeId, x: u32, out: &mut [u32]) -> u32 {
    let ranks: Vec<u32> = children[v].iter().map(|&c| oracle_rank(children, c, x, out)).collect();
    let r = match ranks.iter().max() {
        None => 1,
        Some(&top) if ranks.iter().filter(|&&r| r == top).count() as u32 >= x => top + 1,
        Some(&top) => top,
    };
    out[v] = r;
    r
}

/// Smallest `k` with `base^k >= n`, by repeated multiplication.
fn oracle_ceil_log(n: usize, base: u32) -> u32 {
    let mut k = 0;
    let mut p: u128 = 1;
    while p < n as u128 {
        p *= base as u128;
        k += 1;
    }
    k
}

fn c1_rank_bound() -> Verdict {
    let mut r = rng(1);
    let mut violations = 0;
    let mut mismatches = 0;
    let mut checked = 0;
    for t in 0..1000 {
        let n = if t < 10 { 2 + t } else { r.gen_range(2..=4096) };
        let mut order: Vec<NodeId> = (0..n).collect();
        order.shuffle(&mut r);
        let mut parent = vec![None; n];
        // Mix bushy, path-like and random-recursive shapes.
        let reach = match t % 3 {
            0 => 2,
            1 => usize::MAX,
            _ => 8,
        };
        for i in 1..n {
            let lo = i.saturating_sub(reach);
            parent[order[i]] = Some(order[r.gen_range(lo..i)]);
        }
        let mut children = vec![Vec::new(); n];
        for (v, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                children[p].push(v);
            }
        }
        let lgn = oracle_ceil_log(n, 2).max(2);
        for x in [2, 3, 8, lgn] {
            let rt = rank_tree(&parent, x).unwrap();
            let root = order[0];
            let mut want = vec![0; n];
            oracle_rank(&children, root, x, &mut want);
            if rt.rankx != want || rt.rmaxx != *want.iter().max().unwrap() {
                mismatches += 1;
            }
            if rt.rmaxx > oracle_ceil_log(n, x).max(1) {
                violations += 1;
            }
            checked += 1;
        }
    }
    verdict(
        violations == 0 && mismatches == 0,
        format!("{checked} (tree, x) pairs, {violations} bound violations, {mismatches} oracle mismatches"),
    )
}

fn c2_sgst_validity() -> Verdict {
    let graphs = corpus(100, 512, 2);
    let failures: Vec<String> = graphs
        .par_iter()
        .filter_map(|(label, g)| {
            let x = meshcast::sgst::default_x(g.node_count());
            match build_sgst(g, 0, x) {
                Ok(s) => {
                    let report = verify_sgst(g, &s);
                    (!report.passed()).then(|| format!("{label}: {:?}", report.first_failure()))
                }
                Err(e) => Some(format!("{label}: {e}")),
            }
        })
        .collect();
    verdict(
        failures.is_empty(),
        format!("{}/100 graphs verified{}", 100 - failures.len(), first(&failures)),
    )
}

fn first(errs: &[String]) -> String {
    errs.first().map(|e| format!("; first failure {e}")).unwrap_or_default()
}

fn prepare_env<'a>(g: &'a MeshGraph, s: Option<&'a Sgst>, cfg: &SimConfig, k: usize) -> Env<'a> {
    Env {
        graph: g,
        source: 0,
        sgst: s,
        params: ProtocolParams::resolve(g.node_count(), cfg, k),
    }
}

fn trials(name: &str, g: &MeshGraph, s: Option<&Sgst>, cfg: &SimConfig, n: u64, level: TraceLevel) -> Vec<Trace> {
    let registry = Registry::default();
    let sched = registry.get(name).unwrap().prepare(&prepare_env(g, s, cfg, 1)).unwrap();
    run_trials(sched.as_ref(), g, cfg, n, level)
        .unwrap()
        .into_iter()
        .map(|(t, _)| t)
        .collect()
}

fn c3_collision_free_slots() -> Verdict {
    let mut graphs = corpus(60, 400, 3);
    for spec in ["expander(64,7)", "grid(16,16)", "cbt(255)", "rand(300,0.03)"] {
        graphs.push((spec.to_string(), generate(spec, 3)));
    }
    let results: Vec<Result<(u64, u64, bool), String>> = graphs
        .par_iter()
        .map(|(label, g)| {
            let n = g.node_count();
            let s = build_sgst(g, 0, meshcast::sgst::default_x(n)).map_err(|e| e.to_string())?;
            let cfg = SimConfig {
                strict_slots: true,
                max_rounds: default_max_rounds(n, s.layering.depth(), None) * 4,
                ..SimConfig::default()
            };
            let registry = Registry::default();
            let sched = registry.get("faultless").unwrap().prepare(&prepare_env(g, Some(&s), &cfg, 1)).unwrap();
            let mut slots = 0;
            let mut collisions = 0;
            let mut ok = true;
            for trial in 0..3 {
                let cfg = cfg.with_trial(trial);
                let mut p = sched.start(&cfg);
                let t = run_protocol(g, p.as_mut(), &cfg, TraceLevel::Full).map_err(|e| format!("{label}: {e}"))?;
                collisions += t.slot_collisions;
                ok &= t.success;
                slots += t
                    .outcomes
                    .as_ref()
                    .unwrap()
                    .iter()
                    .flat_map(|o| o.transmitters.iter())
                    .filter(|tx| matches!(tx.slot, SlotKind::Fast | SlotKind::Slow))
                    .count() as u64;
            }
            Ok((slots, collisions, ok))
        })
        .collect();
    let errors: Vec<String> = results.iter().filter_map(|r| r.clone().err()).collect();
    let (slots, collisions, incomplete) = results.iter().flatten().fold((0, 0, 0), |acc, &(s, c, ok)| {
        (acc.0 + s, acc.1 + c, acc.2 + u64::from(!ok))
    });
    verdict(
        errors.is_empty() && collisions == 0 && incomplete == 0,
        format!(
            "{} graphs x 3 trials, {slots} scheduled transmissions, {collisions} attributable noise, {incomplete} incomplete runs{}",
            graphs.len(),
            first(&errors)
        ),
    )
}

fn c4_faultless_latency() -> Verdict {
    let mut fits = Vec::new();
    let mut worst_failure: f64 = 0.0;
    let mut lines = Vec::new();
    for d in [32usize, 64, 128, 256] {
        let g = generate(&format!("expander({d},7)"), 4);
        let n = g.node_count();
        let x = lg(n) as u32;
        let s = build_sgst(&g, 0, x).unwrap();
        let cfg = SimConfig {
            x: Some(x),
            max_rounds: default_max_rounds(n, d, None),
            seed: 4,
            ..SimConfig::default()
        };
        let ts = trials("faultless", &g, Some(&s), &cfg, 50, TraceLevel::Summary);
        let done: Vec<u64> = ts.iter().filter_map(|t| t.completion_round).collect();
        let failure = 1.0 - done.len() as f64 / ts.len() as f64;
        worst_failure = worst_failure.max(failure);
        let med = median(&done).unwrap_or(f64::INFINITY);
        let c = (med - d as f64) / (lg(n) * lg(n));
        fits.push(c);
        lines.push(format!("D={d} n={n} median={med} C={c:.3}"));
    }
    let ratios: Vec<f64> = fits.windows(2).map(|w| w[1].max(w[0]) / w[1].min(w[0])).collect();
    let stable = fits.iter().all(|c| c.is_finite() && *c > 0.0) && ratios.iter().all(|&r| r < STABILITY);
    verdict(
        stable && worst_failure <= DELTA,
        format!(
            "{}; successive ratios {:?}; worst failure {worst_failure:.2}",
            lines.join(", "),
            ratios.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>()
        ),
    )
}

fn c5_noise_reduction() -> Verdict {
    let mut r = rng(5);
    let graphs = corpus(20, 200, 5);
    let mut mismatches = 0;
    for round in 0..1000u64 {
        let g = &graphs[round as usize % graphs.len()].1;
        let n = g.node_count();
        let density = r.gen_range(0.0..0.5);
        let txs: Vec<NodeId> = (0..n).filter(|_| r.gen_bool(density)).collect();
        let seed = r.gen();
        let oracle = classic_receptions(g, &txs);
        let coins = CoinStream::new(seed, round);
        let models = [
            NoiseModel::faultless(),
            NoiseModel::new(0.0),
            NoiseModel { p: 0.0, mode: FaultMode::SenderOnly },
            NoiseModel { p: 0.0, mode: FaultMode::ReceiverOnly },
        ];
        let mut resolver = Resolver::new(n);
        for model in models {
            let set = txs.iter().map(|&v| Transmission::new(v, Payload::Source, SlotKind::Decay)).collect();
            let out = resolver.resolve(g, round + 1, set, model, &coins);
            let dense = out.dense(n);
            let same = (0..n).all(|v| {
                let (obs, from) = oracle[v];
                let got = &dense[v];
                got.observed() == obs
                    && match (obs, from) {
                        (Observed::Message, Some(s)) => out.messages().any(|(u, t)| u == v && t.node == s),
                        _ => true,
                    }
            });
            if !same {
                mismatches += 1;
            }
        }
    }
    verdict(
        mismatches == 0,
        format!("1000 rounds x 4 noise models at p=0, {mismatches} mismatches against the direct collision rule"),
    )
}

fn c6_decay_baseline() -> Verdict {
    let mut fits = Vec::new();
    let mut lines = Vec::new();
    let mut worst_failure: f64 = 0.0;
    for n in [64usize, 256, 1024] {
        let q = 3.0 * (n as f64).ln() / n as f64;
        let g = generate(&format!("rand({n},{q:.5})"), 6);
        let d = diameter(&g);
        let l = lg(n);
        let bound = d as f64 * l + l * l + l * (1.0 / DELTA).log2();
        let cfg = SimConfig {
            max_rounds: default_max_rounds(n, d, None),
            seed: 6,
            ..SimConfig::default()
        };
        let ts = trials("decay", &g, None, &cfg, 100, TraceLevel::Summary);
        let done: Vec<u64> = ts.iter().filter_map(|t| t.completion_round).collect();
        let failure = 1.0 - done.len() as f64 / ts.len() as f64;
        worst_failure = worst_failure.max(failure);
        let p90 = quantile(&done, 1.0 - DELTA).map_or(f64::INFINITY, |v| v as f64);
        let c = p90 / bound;
        fits.push(c);
        lines.push(format!("n={n} D={d} p90={p90} C'={c:.3}"));
    }
    let ratios: Vec<f64> = fits.windows(2).map(|w| w[1].max(w[0]) / w[1].min(w[0])).collect();
    let stable = fits.iter().all(|c| c.is_finite()) && ratios.iter().all(|&r| r < STABILITY);
    verdict(
        stable && worst_failure <= DELTA,
        format!(
            "{}; successive ratios {:?}; worst failure {worst_failure:.2}",
            lines.join(", "),
            ratios.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>()
        ),
    )
}

fn c7_robust_under_noise() -> Verdict {
    let g = generate("expander(64,7)", 7);
    let n = g.node_count();
    let d = diameter(&g);
    let s = build_sgst(&g, 0, meshcast::sgst::default_x(n)).unwrap();
    let l = lg(n);
    let budget = (ROBUST_BUDGET_C * (d as f64 + l * (l + (1.0 / DELTA).log2()))).floor() as u64;
    let mut ok = n <= 512 && d >= 64;
    let mut lines = vec![format!("n={n} D={d} budget={budget}")];
    for p in [0.05, 0.2] {
        let cfg = SimConfig {
            p,
            delta: DELTA,
            max_rounds: budget,
            seed: 7,
            ..SimConfig::default()
        };
        let ts = trials("robust", &g, Some(&s), &cfg, 200, TraceLevel::Summary);
        let done: Vec<u64> = ts.iter().filter_map(|t| t.completion_round).collect();
        let failure = 1.0 - done.len() as f64 / ts.len() as f64;
        ok &= failure <= DELTA;
        lines.push(format!(
            "p={p}: failure {failure:.3}, median {:?}, max {:?}",
            median(&done),
            done.iter().max()
        ));
    }
    verdict(ok, lines.join("; "))
}

fn c8_diameter_advantage() -> Verdict {
    let g = generate("expander(256,8)", 8);
    let n = g.node_count();
    let s = build_sgst(&g, 0, meshcast::sgst::default_x(n)).unwrap();
    let cfg = SimConfig {
        p: 0.2,
        max_rounds: 200_000,
        seed: 8,
        ..SimConfig::default()
    };
    let robust = trials("robust", &g, Some(&s), &cfg, 200, TraceLevel::Summary);
    let decay = trials("decay", &g, None, &cfg, 200, TraceLevel::Summary);
    let all = |ts: &[Trace]| -> Vec<u64> { ts.iter().map(|t| t.completion_round.unwrap_or(u64::MAX)).collect() };
    let (rm, dm) = (median(&all(&robust)).unwrap(), median(&all(&decay)).unwrap());
    let wins = robust
        .iter()
        .zip(&decay)
        .filter(|(r, d)| r.completion_round < d.completion_round && r.completion_round.is_some())
        .count();
    verdict(
        rm < dm,
        format!("n={n}, 200 paired trials: robust median {rm}, decay median {dm}, robust faster in {wins}/200 pairs"),
    )
}

fn c9_decay_phase_progress() -> Verdict {
    let specs = ["rand(256,0.065)", "expander(64,8)", "grid(16,16)", "cbt(511)", "star(128)"];
    let stats: Vec<PhaseStats> = specs
        .par_iter()
        .flat_map_iter(|spec| {
            let g = generate(spec, 9);
            let n = g.node_count();
            (0..40u64)
                .map(|trial| {
                    let cfg = SimConfig {
                        max_rounds: 100_000,
                        seed: 9,
                        trial_id: trial,
                        ..SimConfig::default()
                    };
                    let mut st = DecayState::new(&g, 0, DecayClock::for_nodes(n)).with_phase_tracking();
                    run_protocol(&g, &mut st, &cfg, TraceLevel::Summary).unwrap();
                    st.phase_stats()
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let total = stats.iter().fold(PhaseStats::default(), |a, s| PhaseStats {
        samples: a.samples + s.samples,
        successes: a.successes + s.successes,
    });
    verdict(
        total.samples >= 10_000 && total.rate() >= 0.25,
        format!("{} phases sampled, success frequency {:.3}", total.samples, total.rate()),
    )
}

struct MultiRun {
    completion: Option<u64>,
    full_rank: bool,
}

fn c10_multi_message() -> Verdict {
    let g = generate("grid(16,16)", 10);
    let n = g.node_count();
    let s = build_sgst(&g, 0, meshcast::sgst::default_x(n)).unwrap();
    let base = SimConfig {
        p: 0.1,
        max_rounds: 200_000,
        seed: 10,
        ..SimConfig::default()
    };
    let params = ProtocolParams::resolve(n, &base, 1);
    let sched = RobustSchedule::new(&g, &s, params.block_size, params.c_mult);
    let trials = 40u64;
    let mut medians = Vec::new();
    let mut rank_ok = true;
    let mut lines = Vec::new();
    for k in [1usize, 4, 16] {
        let runs: Vec<MultiRun> = (0..trials)
            .into_par_iter()
            .map(|trial| {
                let cfg = base.with_trial(trial);
                let mut st = MultiState::new(&sched, k, &cfg.coins());
                let t = run_protocol(&g, &mut st, &cfg, TraceLevel::Summary).unwrap();
                let full_rank = !t.success
                    || (0..n).all(|v| st.rank(v) == k && st.decoder(v).decoded().as_deref() == Some(st.messages()));
                MultiRun {
                    completion: t.completion_round,
                    full_rank,
                }
            })
            .collect();
        rank_ok &= runs.iter().all(|r| r.full_rank);
        let done: Vec<u64> = runs.iter().filter_map(|r| r.completion).collect();
        let med = median(&done).unwrap_or(f64::INFINITY);
        lines.push(format!("k={k}: median {med}, {}/{trials} complete", done.len()));
        medians.push((k, med));
    }
    let fits: Vec<f64> = medians
        .windows(2)
        .map(|w| (w[1].1 - w[0].1) / ((w[1].0 - w[0].0) as f64 * lg(n)))
        .collect();
    let b_stable = fits.iter().all(|b| b.is_finite() && *b > 0.0) && fits[0].max(fits[1]) / fits[0].min(fits[1]) < STABILITY;

    let mut trace_equal = true;
    for trial in 0..5 {
        let cfg = base.with_trial(trial);
        let mut single = sched.start();
        let a = run_protocol(&g, &mut single, &cfg, TraceLevel::Events).unwrap();
        let mut coded = MultiState::new(&sched, 1, &cfg.coins());
        let b = run_protocol(&g, &mut coded, &cfg, TraceLevel::Events).unwrap();
        let strip = |t: &Trace| -> Vec<(u64, NodeId, &'static str)> {
            t.events.as_ref().unwrap().iter().map(|e| (e.round, e.node, e.kind.as_str())).collect()
        };
        trace_equal &= strip(&a) == strip(&b) && a.informed_round == b.informed_round && a.completion_round == b.completion_round;
    }
    verdict(
        rank_ok && b_stable && trace_equal,
        format!(
            "{}; b fits {:?}; full rank in every success: {rank_ok}; k=1 trace equals single-message trace: {trace_equal}",
            lines.join(", "),
            fits.iter().map(|b| format!("{b:.3}")).collect::<Vec<_>>()
        ),
    )
}

/// Shift-and-add multiplication modulo x^8 + x^4 + x^3 + x + 1.
fn oracle_mul(mut a: u8, mut b: u8) -> u8 {
    let mut acc = 0u8;
    while b != 0 {
        if b & 1 != 0 {
            acc ^= a;
        }
        let carry = a & 0x80 != 0;
        a <<= 1;
        if carry {
            a ^= 0x1B;
        }
        b >>= 1;
    }
    acc
}

fn c11_rlnc() -> Verdict {
    let mut field_errors = 0u32;
    for a in 0..=255u8 {
        for b in 0..=255u8 {
            if gf256::mul(a, b) != oracle_mul(a, b) {
                field_errors += 1;
            }
        }
    }
    let mut r = rng(11);
    let mut decode_errors = 0;
    for _ in 0..1000 {
        let k = r.gen_range(1..=16);
        let len = r.gen_range(1..=64);
        let messages: Vec<Vec<u8>> = (0..k).map(|_| (0..len).map(|_| r.gen()).collect()).collect();
        let source = DecoderState::with_messages(&messages).unwrap();
        let mut relay = DecoderState::new(k, len);
        let mut sink = DecoderState::new(k, len);
        let mut steps = 0;
        while !sink.is_complete() && steps < 100 * k {
            relay.absorb(source.encode(&mut r).unwrap()).unwrap();
            if relay.rank() > 0 {
                sink.absorb(relay.encode(&mut r).unwrap()).unwrap();
            }
            steps += 1;
        }
        if sink.decoded().as_deref() != Some(&messages[..]) {
            decode_errors += 1;
        }
    }
    verdict(
        field_errors == 0 && decode_errors == 0,
        format!("65536 products, {field_errors} oracle mismatches; 1000 relayed decodes, {decode_errors} wrong"),
    )
}

type Criterion = (u32, &'static str, fn() -> Verdict);

const CRITERIA: &[Criterion] = &[
    (1, "rank bound on random trees", c1_rank_bound),
    (2, "SGST validity on mixed graphs", c2_sgst_validity),
    (3, "collision-free deterministic slots", c3_collision_free_slots),
    (4, "faultless latency D + C log^2 n", c4_faultless_latency),
    (5, "noise model reduces to the collision rule at p=0", c5_noise_reduction),
    (6, "Decay baseline latency fit", c6_decay_baseline),
    (7, "robust broadcast under noise", c7_robust_under_noise),
    (8, "robust beats Decay on expander(256,8) at p=0.2", c8_diameter_advantage),
    (9, "Decay phase progress", c9_decay_phase_progress),
    (10, "multi-message broadcast", c10_multi_message),
    (11, "RLNC correctness", c11_rlnc),
];

fn main() -> ExitCode {
    let wanted: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.strip_prefix('C').and_then(|n| n.parse().ok()))
        .collect();
    let mut unexpected = 0;
    let started = Instant::now();
    for &(id, name, run) in CRITERIA {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let t0 = Instant::now();
        let v = run();
        let took: Duration = t0.elapsed();
        let expected_fail = EXPECTED_FAIL.contains(&id);
        let tag = match (v.pass, expected_fail) {
            (true, false) => "PASS",
            (false, true) => "FAIL (expected)",
            (false, false) => "FAIL",
            (true, true) => "PASS (unexpected)",
        };
        if v.pass == expected_fail {
            unexpected += 1;
        }
        println!("C{id:<2} {tag:<17} {name} [{:.1}s] {}", took.as_secs_f64(), v.detail);
    }
    println!("acceptance finished in {:.1}s", started.elapsed().as_secs_f64());
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
