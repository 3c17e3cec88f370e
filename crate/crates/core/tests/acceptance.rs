//! Acceptance run: one PASS/FAIL line per criterion. Exits nonzero if any
//! criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use dyck_rnn::dyck::{DyckParams, TokenString};
use dyck_rnn::encoding::{ceil_log2, EncodingKind};
use dyck_rnn::network::{Architecture, Construction, Network, DEFAULT_NAIVE_UNIT_CEILING};
use dyck_rnn::numerics::NumericConfig;
use dyck_rnn::sampler::{Sampler, SamplerConfig};
use dyck_rnn::verify::{
    self, NetworkEncoder, NetworkModel, QuantizedEncoder, UniformModel, VerificationReport,
};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn report_line(n: &str, title: &str, o: &Outcome, secs: f64) {
    println!(
        "criterion {n} [{title}]: {} ({}; {secs:.2}s)",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail
    );
}

fn params(k: usize, m: usize) -> DyckParams {
    DyckParams::new(k, m).unwrap()
}

fn epsilon(k: usize) -> f64 {
    1.0 / (2.0 * (k as f64 + 1.0))
}

fn show_failure(r: &VerificationReport) -> String {
    format!(
        "{} {}: {}",
        r.suite,
        r.instance.construction.as_deref().unwrap_or("-"),
        r.counterexample.as_deref().unwrap_or("no counterexample")
    )
}

fn criterion_1() -> Outcome {
    let mut bad = Vec::new();
    let mut checked = 0;
    for k in [2usize, 3, 4, 8, 32, 128] {
        for m in [1usize, 2, 3, 5] {
            let p = params(k, m);
            let log = ceil_log2(k);
            let expect = [
                (Construction::SIMPLE_ONE_HOT, 2 * m * k),
                (Construction::LSTM_ONE_HOT, m * k),
                (Construction::SIMPLE_BINARY, 6 * m * log - 2 * m),
                (Construction::LSTM_BINARY, 3 * m * log - m),
            ];
            for (c, units) in expect {
                let net = Network::build(c, &p, &NumericConfig::for_k(k)).unwrap();
                checked += 1;
                if net.hidden_units() != units {
                    bad.push(format!("{c} k={k} m={m}: {} != {units}", net.hidden_units()));
                }
            }
        }
    }
    let big = Network::build(
        Construction::LSTM_BINARY,
        &params(100_000, 3),
        &NumericConfig::for_k(100_000),
    )
    .unwrap();
    if big.hidden_units() != 150 {
        bad.push(format!("lstm/binary k=100000 m=3: {}", big.hidden_units()));
    }
    Outcome::new(
        bad.is_empty(),
        if bad.is_empty() {
            format!("{checked} builds match the closed forms; k=100000, m=3 LSTM binary has 150 units")
        } else {
            bad.join("; ")
        },
    )
}

fn criterion_2(numeric_for: &dyn Fn(usize) -> NumericConfig) -> Outcome {
    let mut strings = 0u64;
    let mut failures = Vec::new();
    let mut runs = 0;
    for (k, m) in [(1, 1), (1, 2), (2, 1), (2, 2), (3, 1)] {
        for c in Construction::available(k) {
            let net = Network::build(c, &params(k, m), &numeric_for(k)).unwrap();
            let r = verify::check_generation_equivalence(&net, 8, epsilon(k)).unwrap();
            strings += r.checked;
            runs += 1;
            if !r.pass {
                failures.push(show_failure(&r));
            }
        }
    }
    Outcome::new(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{runs} instance/construction pairs, {strings} strings, 0 mismatches")
        } else {
            failures.join("; ")
        },
    )
}

/// Criteria 3, 4, 5 share corpora.
struct CorpusResults {
    stack: Outcome,
    margins: Outcome,
    saturation: Outcome,
}

fn criteria_3_4_5(numeric_for: &dyn Fn(usize) -> NumericConfig) -> CorpusResults {
    let mut prefixes = 0u64;
    let mut decode_bad = Vec::new();
    let mut margin_bad = Vec::new();
    let mut sat_bad = Vec::new();
    let (mut min_allowed, mut max_disallowed_ratio) = (f64::INFINITY, 0.0f64);
    for (k, m) in [(2, 3), (8, 3), (32, 5), (128, 5)] {
        let p = params(k, m);
        let corpus: Vec<TokenString> = Sampler::new(SamplerConfig::new(p, 1000 + k as u64))
            .unwrap()
            .strings(1000)
            .unwrap();
        for arch in [Architecture::SimpleRnn, Architecture::Lstm] {
            let c = Construction {
                architecture: arch,
                encoding: Some(EncodingKind::Binary),
            };
            let net = Network::build(c, &p, &numeric_for(k)).unwrap();
            let r = verify::check_stack_correspondence(&net, &corpus).unwrap();
            prefixes += r.checked;
            if r.count("decode_mismatches") > 0 {
                decode_bad.push(show_failure(&r));
            }
            let sat = r.count("saturation_violations") + r.count("sparsity_violations");
            if sat > 0 {
                sat_bad.push(format!("{c} k={k} m={m}: {sat} violations ({})", show_failure(&r)));
            }
            let r = verify::check_probability_margins(&net, &corpus, epsilon(k)).unwrap();
            if !r.pass {
                margin_bad.push(show_failure(&r));
            }
            min_allowed = min_allowed.min(r.metrics["min_allowed"] / epsilon(k));
            max_disallowed_ratio = max_disallowed_ratio
                .max(r.metrics["max_disallowed"] / NumericConfig::disallowed_bound(k));
        }
    }
    let detail = |bad: &[String], ok: String| if bad.is_empty() { ok } else { bad.join("; ") };
    CorpusResults {
        stack: Outcome::new(
            decode_bad.is_empty(),
            detail(&decode_bad, format!("8 runs x 1000 strings, {prefixes} prefixes, 0 mismatches")),
        ),
        margins: Outcome::new(
            margin_bad.is_empty(),
            detail(
                &margin_bad,
                format!(
                    "min allowed / eps = {min_allowed:.3}, max disallowed / (1/10k) = {max_disallowed_ratio:.3}"
                ),
            ),
        ),
        saturation: Outcome::new(
            sat_bad.is_empty(),
            detail(&sat_bad, format!("{prefixes} prefixes, every gate and hidden coordinate exact")),
        ),
    }
}

fn criterion_6(numeric_for: &dyn Fn(usize) -> NumericConfig) -> Outcome {
    let p = params(128, 5);
    let net = Network::build(Construction::LSTM_BINARY, &p, &numeric_for(128)).unwrap();
    let corpus = Sampler::new(SamplerConfig::new(p, 6).with_window(181, 360))
        .unwrap()
        .corpus(100_000)
        .unwrap();
    let tokens: usize = corpus.iter().map(TokenString::len).sum();
    let lstm = verify::closing_metric(&mut NetworkModel::new(&net), &p, &corpus).unwrap();
    let mut uniform = UniformModel {
        vocab_size: p.vocab_size(),
    };
    let base = verify::closing_metric(&mut uniform, &p, &corpus).unwrap();
    Outcome::new(
        net.hidden_units() == 100 && lstm.mean == 1.0 && base.mean == 0.0,
        format!(
            "{} units, {tokens} tokens in {} strings, LSTM mean_p = {}, uniform mean_p = {}, {} separations",
            net.hidden_units(),
            corpus.len(),
            lstm.mean,
            base.mean,
            lstm.per_separation.len()
        ),
    )
}

fn criterion_7(numeric_for: &dyn Fn(usize) -> NumericConfig) -> Outcome {
    let mut bad = Vec::new();
    let mut runs = 0;
    for (k, m) in [(2, 3), (4, 3), (8, 3)] {
        let p = params(k, m);
        for c in Construction::available(k) {
            if c == Construction::NAIVE
                && c.expected_units(&p).unwrap() > DEFAULT_NAIVE_UNIT_CEILING as u128
            {
                continue;
            }
            let net = Network::build(c, &p, &numeric_for(k)).unwrap();
            let r = verify::check_full_depth_distinctness(&NetworkEncoder(&net), &p).unwrap();
            runs += 1;
            if !r.pass || r.checked != (k as u64).pow(m as u32) {
                bad.push(format!("{c} k={k} m={m}: {}", show_failure(&r)));
            }
        }
    }
    let enc = QuantizedEncoder::mixing(1, 1, 2).unwrap();
    let collision = verify::find_collision(&enc, &params(2, 2)).unwrap();
    let collision_ok = collision.as_ref().is_some_and(|c| c.verified);
    if !collision_ok {
        bad.push(format!("quantized d=1 p=1: {collision:?}"));
    }
    Outcome::new(
        bad.is_empty(),
        if bad.is_empty() {
            format!(
                "{runs} networks with all k^m states distinct; d=1 p=1 collision {}",
                collision.unwrap()
            )
        } else {
            bad.join("; ")
        },
    )
}

/// Runs suites 2-4 on a network and names those that fail.
fn failing_suites(net: &Network, corpus: &[TokenString]) -> Vec<String> {
    let k = net.dyck().k();
    let reports = [
        verify::check_generation_equivalence(net, 8, epsilon(k)).unwrap(),
        verify::check_stack_correspondence(net, corpus).unwrap(),
        verify::check_probability_margins(net, corpus, epsilon(k)).unwrap(),
    ];
    reports
        .iter()
        .filter(|r| !r.pass && r.counterexample.is_some())
        .map(|r| format!("{} ({})", r.suite, r.counterexample.as_deref().unwrap()))
        .collect()
}

fn criterion_8() -> Outcome {
    let p = params(2, 2);
    let corpus = Sampler::new(SamplerConfig::new(p, 8)).unwrap().strings(200).unwrap();
    let cfg = NumericConfig::for_k(2);
    let mut bad = Vec::new();
    let mut caught = 0;
    for c in Construction::all() {
        let net = Network::build(c, &p, &cfg).unwrap();
        if !failing_suites(&net, &corpus).is_empty() {
            bad.push(format!("unsabotaged {c} fails"));
        }
        let broken = verify::sabotage_zero_close_rows(&net);
        let f = failing_suites(&broken, &corpus);
        if f.is_empty() {
            bad.push(format!("zeroed close rows of {c} not detected"));
        } else {
            caught += 1;
        }
    }
    let mut example = String::new();
    for c in [Construction::SIMPLE_ONE_HOT, Construction::SIMPLE_BINARY] {
        let net = Network::build(c, &p, &cfg).unwrap();
        let broken = verify::sabotage_flip_push_entry(&net).unwrap();
        let f = failing_suites(&broken, &corpus);
        if f.is_empty() {
            bad.push(format!("flipped push entry of {c} not detected"));
        } else {
            caught += 1;
            if example.is_empty() {
                example = f[0].clone();
            }
        }
    }
    Outcome::new(
        bad.is_empty(),
        if bad.is_empty() {
            format!("{caught}/7 sabotaged networks caught, e.g. {example}")
        } else {
            bad.join("; ")
        },
    )
}

fn main() -> ExitCode {
    let all = std::cell::Cell::new(true);
    let run = |n: &str, title: &str, f: &mut dyn FnMut() -> Outcome| -> bool {
        let t = Instant::now();
        let o = f();
        report_line(n, title, &o, t.elapsed().as_secs_f64());
        all.set(all.get() && o.pass);
        o.pass
    };

    run("1", "hidden-unit counts", &mut criterion_1);

    let mut outcomes: Vec<[bool; 6]> = Vec::new();
    for beta in [20.0, 40.0] {
        let numeric_for = move |k: usize| NumericConfig::with_beta(beta, k);
        let tag = |n: &str| if beta == 20.0 { n.to_string() } else { format!("{n}@beta={beta}") };
        let c2 = run(&tag("2"), "generation equivalence", &mut || criterion_2(&numeric_for));
        let t = Instant::now();
        let r = criteria_3_4_5(&numeric_for);
        let secs = t.elapsed().as_secs_f64();
        for (n, title, o) in [
            ("3", "stack correspondence", &r.stack),
            ("4", "probability margins", &r.margins),
            ("5", "saturation exactness", &r.saturation),
        ] {
            report_line(&tag(n), title, o, secs);
        }
        let c6 = run(&tag("6"), "closing metric", &mut || criterion_6(&numeric_for));
        let c7 = run(&tag("7"), "distinctness and collision", &mut || criterion_7(&numeric_for));
        if beta == 20.0 {
            all.set(all.get() && r.stack.pass && r.margins.pass && r.saturation.pass);
        }
        outcomes.push([c2, r.stack.pass, r.margins.pass, r.saturation.pass, c6, c7]);
    }

    // the beta=40 lines above only feed criterion 9
    run("8", "sabotage power", &mut criterion_8);
    run("9", "constant independence", &mut || {
        Outcome::new(
            outcomes[0] == outcomes[1],
            format!("criteria 2-7 at beta=20: {:?}, at beta=40: {:?}", outcomes[0], outcomes[1]),
        )
    });

    let all = all.get();
    println!("acceptance: {}", if all { "PASS" } else { "FAIL" });
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
