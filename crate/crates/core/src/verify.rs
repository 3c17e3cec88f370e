//! Machine checks of the construction claims against the automaton.
//!
//! Every check returns a [`VerificationReport`]; `pass` is true exactly when
//! no counterexample was found. Enumerations run in lexicographic vocabulary
//! order (opens, closes, end), so counterexamples are canonical.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::dyck::{self, DfaState, DyckParams, Token, TokenString};
use crate::error::{Error, Result};
use crate::network::{Construction, Network};
use crate::numerics::{sat_tanh, NumericConfig};
use crate::runtime::{NetworkState, StepTrace};

/// Default cap on `(2k+1)^max_len` for exhaustive enumeration.
pub const ENUMERATION_BUDGET: u128 = 100_000_000;

/// Default cap on `k^m` for full-depth enumeration.
pub const FULL_DEPTH_BUDGET: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub k: usize,
    pub m: usize,
    pub construction: Option<String>,
    pub numeric: Option<NumericConfig>,
}

impl Instance {
    fn of(net: &Network) -> Self {
        Self {
            k: net.dyck().k(),
            m: net.dyck().m(),
            construction: Some(net.construction().to_string()),
            numeric: Some(*net.numeric()),
        }
    }

    fn bare(params: &DyckParams) -> Self {
        Self {
            k: params.k(),
            m: params.m(),
            construction: None,
            numeric: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub suite: String,
    pub instance: Instance,
    /// Strings or prefixes examined, depending on the suite.
    pub checked: u64,
    pub counts: BTreeMap<String, u64>,
    pub metrics: BTreeMap<String, f64>,
    pub pass: bool,
    pub counterexample: Option<String>,
    /// Set when the numeric constants violate a margin requirement, so a
    /// failure is a configuration problem rather than a construction bug.
    pub config_violation: Option<String>,
    pub notes: Vec<String>,
}

impl VerificationReport {
    fn new(suite: &str, instance: Instance) -> Self {
        Self {
            suite: suite.to_string(),
            instance,
            checked: 0,
            counts: BTreeMap::new(),
            metrics: BTreeMap::new(),
            pass: true,
            counterexample: None,
            config_violation: None,
            notes: Vec::new(),
        }
    }

    fn fail(&mut self, counterexample: String) {
        self.pass = false;
        if self.counterexample.is_none() {
            self.counterexample = Some(counterexample);
        }
    }

    fn bump(&mut self, key: &str, by: u64) {
        *self.counts.entry(key.to_string()).or_default() += by;
    }

    pub fn count(&self, key: &str) -> u64 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} k={} m={}",
            if self.pass { "PASS" } else { "FAIL" },
            self.suite,
            self.instance.k,
            self.instance.m
        )?;
        if let Some(c) = &self.instance.construction {
            write!(f, " construction={c}")?;
        }
        if let Some(n) = &self.instance.numeric {
            write!(f, " beta={} lambda={} zeta={}", n.beta, n.lambda, n.zeta)?;
        }
        writeln!(f, " checked={}", self.checked)?;
        for (k, v) in &self.counts {
            writeln!(f, "  {k}: {v}")?;
        }
        for (k, v) in &self.metrics {
            writeln!(f, "  {k}: {v}")?;
        }
        if let Some(c) = &self.counterexample {
            writeln!(f, "  counterexample: {c}")?;
        }
        if let Some(c) = &self.config_violation {
            writeln!(f, "  config violation: {c}")?;
        }
        for n in &self.notes {
            writeln!(f, "  note: {n}")?;
        }
        Ok(())
    }
}

fn check_budget(params: &DyckParams, max_len: usize, budget: u128) -> Result<()> {
    let total = (params.vocab_size() as u128).checked_pow(max_len as u32);
    match total {
        Some(t) if t <= budget => Ok(()),
        _ => Err(Error::Budget(format!(
            "(2k+1)^max_len = {}^{max_len} exceeds the enumeration budget {budget}",
            params.vocab_size()
        ))),
    }
}

/// Number of strings `x $` with `|x| <= free` over the `2k` brackets.
fn subtree_strings(sigma: u128, free: usize) -> u128 {
    (0..=free).map(|j| sigma.pow(j as u32)).sum()
}

fn render_with(prefix: &[Token], tail: &[Token]) -> String {
    let all: Vec<Token> = prefix.iter().chain(tail).copied().collect();
    dyck::render(&all)
}

/// Exhaustive comparison of network generation with automaton membership.
///
/// A string `w $` belongs to the network's truncated support when every
/// conditional token probability is at least `epsilon`. All strings with at
/// most `max_len` tokens (including `$`) are decided; subtrees where both
/// the network and the automaton have already rejected are counted without
/// being visited.
pub fn check_generation_equivalence(
    net: &Network,
    max_len: usize,
    epsilon: f64,
) -> Result<VerificationReport> {
    check_generation_equivalence_with_budget(net, max_len, epsilon, ENUMERATION_BUDGET)
}

pub fn check_generation_equivalence_with_budget(
    net: &Network,
    max_len: usize,
    epsilon: f64,
    budget: u128,
) -> Result<VerificationReport> {
    let params = *net.dyck();
    check_budget(&params, max_len, budget)?;
    let mut report = VerificationReport::new("generation_equivalence", Instance::of(net));
    report.metrics.insert("epsilon".into(), epsilon);
    if max_len == 0 {
        return Ok(report);
    }
    let mut walk = Walk {
        net,
        params,
        max_len,
        epsilon,
        report: &mut report,
        prefix: Vec::new(),
        decided: 0,
        members: 0,
    };
    walk.visit(&net.initial_state(), &DfaState::initial(), true)?;
    let (decided, members) = (walk.decided, walk.members);
    report.checked = decided as u64;
    report.bump("members", members);
    Ok(report)
}

struct Walk<'a> {
    net: &'a Network,
    params: DyckParams,
    max_len: usize,
    epsilon: f64,
    report: &'a mut VerificationReport,
    prefix: Vec<Token>,
    decided: u128,
    members: u64,
}

impl Walk<'_> {
    fn visit(&mut self, state: &NetworkState, q: &DfaState, alive: bool) -> Result<()> {
        if !self.report.pass {
            return Ok(());
        }
        let k = self.params.k();
        let probs = self.net.next_distribution(state);

        // the string ending here
        let rnn = alive && probs[Token::End.vocab_index(k)] >= self.epsilon;
        let dfa = dyck::transition(&self.params, q, Token::End) == DfaState::Accept;
        self.decided += 1;
        if dfa && rnn {
            self.members += 1;
        }
        if rnn != dfa {
            self.report.fail(format!(
                "{} (network {}, automaton {})",
                render_with(&self.prefix, &[Token::End]),
                verdict(rnn),
                verdict(dfa)
            ));
            return Ok(());
        }
        if self.prefix.len() + 1 >= self.max_len {
            return Ok(());
        }

        let sigma = self.params.input_size() as u128;
        let child_free = self.max_len - self.prefix.len() - 2;
        for tok in self.params.alphabet() {
            let child_alive = alive && probs[tok.vocab_index(k)] >= self.epsilon;
            let child_q = dyck::transition(&self.params, q, tok);
            if !child_alive {
                if let Some(stack) = child_q.stack() {
                    let completion = dyck::completion(stack);
                    if self.prefix.len() + 1 + completion.len() <= self.max_len {
                        let mut head = self.prefix.clone();
                        head.push(tok);
                        self.report.fail(format!(
                            "{} (network rejects, automaton accepts)",
                            render_with(&head, &completion)
                        ));
                        return Ok(());
                    }
                }
                // nothing in this subtree is accepted by either side
                self.decided += subtree_strings(sigma, child_free);
                continue;
            }
            let mut next = state.clone();
            self.net.advance(&mut next, tok)?;
            self.prefix.push(tok);
            self.visit(&next, &child_q, true)?;
            self.prefix.pop();
            if !self.report.pass {
                return Ok(());
            }
        }
        Ok(())
    }
}

fn verdict(member: bool) -> &'static str {
    if member {
        "accepts"
    } else {
        "rejects"
    }
}

/// Strings in the network's truncated support with at most `max_len`
/// tokens, in lexicographic order.
pub fn truncated_support(net: &Network, max_len: usize, epsilon: f64) -> Result<Vec<Vec<Token>>> {
    fn go(
        net: &Network,
        state: &NetworkState,
        prefix: &mut Vec<Token>,
        max_len: usize,
        epsilon: f64,
        out: &mut Vec<Vec<Token>>,
    ) -> Result<()> {
        let k = net.dyck().k();
        let probs = net.next_distribution(state);
        if probs[Token::End.vocab_index(k)] >= epsilon {
            let mut s = prefix.clone();
            s.push(Token::End);
            out.push(s);
        }
        if prefix.len() + 1 >= max_len {
            return Ok(());
        }
        for tok in net.dyck().alphabet() {
            if probs[tok.vocab_index(k)] < epsilon {
                continue;
            }
            let mut next = state.clone();
            net.advance(&mut next, tok)?;
            prefix.push(tok);
            go(net, &next, prefix, max_len, epsilon, out)?;
            prefix.pop();
        }
        Ok(())
    }
    let mut out = Vec::new();
    if max_len > 0 {
        go(net, &net.initial_state(), &mut Vec::new(), max_len, epsilon, &mut out)?;
    }
    Ok(out)
}

/// Builds every available construction for `params` and checks that all of
/// them have the same truncated support up to `max_len`, and that it equals
/// the automaton's language.
pub fn check_cross_construction_agreement(
    params: &DyckParams,
    numeric: &NumericConfig,
    max_len: usize,
    epsilon: f64,
) -> Result<VerificationReport> {
    check_budget(params, max_len, ENUMERATION_BUDGET)?;
    let mut report = VerificationReport::new("cross_construction", Instance::bare(params));
    report.instance.numeric = Some(*numeric);
    let constructions = Construction::available(params.k());
    let nets = constructions
        .iter()
        .map(|c| Network::build(*c, params, numeric))
        .collect::<Result<Vec<_>>>()?;

    // automaton language by the same enumeration order
    let mut language = Vec::new();
    dfa_language(params, &mut Vec::new(), &DfaState::initial(), max_len, &mut language);

    let sigma = params.input_size() as u128;
    report.checked = if max_len == 0 { 0 } else { subtree_strings(sigma, max_len - 1) as u64 };
    report.bump("constructions", nets.len() as u64);
    report.bump("language_size", language.len() as u64);
    for (c, net) in constructions.iter().zip(&nets) {
        let support = truncated_support(net, max_len, epsilon)?;
        if support != language {
            let diff = first_difference(&support, &language);
            report.fail(format!("{c}: {diff}"));
        }
        report.notes.push(format!("{c}: {} hidden units", net.hidden_units()));
    }
    Ok(report)
}

fn dfa_language(
    params: &DyckParams,
    prefix: &mut Vec<Token>,
    q: &DfaState,
    max_len: usize,
    out: &mut Vec<Vec<Token>>,
) {
    if max_len == 0 {
        return;
    }
    if dyck::transition(params, q, Token::End) == DfaState::Accept {
        let mut s = prefix.clone();
        s.push(Token::End);
        out.push(s);
    }
    if q.stack().is_none() {
        return;
    }
    for tok in params.alphabet() {
        let next = dyck::transition(params, q, tok);
        if let Some(s) = next.stack() {
            if prefix.len() + 1 + s.len() < max_len {
                prefix.push(tok);
                dfa_language(params, prefix, &next, max_len, out);
                prefix.pop();
            }
        }
    }
}

fn first_difference(a: &[Vec<Token>], b: &[Vec<Token>]) -> String {
    let sa: std::collections::BTreeSet<_> = a.iter().collect();
    let sb: std::collections::BTreeSet<_> = b.iter().collect();
    if let Some(x) = sa.difference(&sb).next() {
        return format!("{} generated but not in the language", dyck::render(x));
    }
    if let Some(x) = sb.difference(&sa).next() {
        return format!("{} in the language but not generated", dyck::render(x));
    }
    "no difference".into()
}

/// Runs every prefix of every corpus string and checks, at each step:
///
/// * the decoded stack equals the automaton state (`decode_mismatches`),
/// * every LSTM gate coordinate, and every Simple RNN or naive hidden
///   coordinate, is exactly 0 or 1 (`saturation_violations`),
/// * the LSTM hidden vector shows only the top slot, as exactly
///   `tanh(codeword)`, with every other slot exactly 0
///   (`sparsity_violations`).
pub fn check_stack_correspondence(
    net: &Network,
    corpus: &[TokenString],
) -> Result<VerificationReport> {
    let params = *net.dyck();
    let mut report = VerificationReport::new("stack_correspondence", Instance::of(net));
    for key in ["decode_mismatches", "saturation_violations", "sparsity_violations"] {
        report.bump(key, 0);
    }
    let is_bit = |x: &f64| *x == 0.0 || *x == 1.0;
    for w in corpus {
        let mut state = net.initial_state();
        let mut q = DfaState::initial();
        for (t, &tok) in w.body().iter().enumerate() {
            let (next, trace) = net.step(&state, tok)?;
            state = next;
            q = dyck::transition(&params, &q, tok);
            report.checked += 1;
            report.bump("coordinates", state.h.len() as u64);
            let here = || dyck::render(&w.tokens()[..=t]);

            match net.decode_stack(&state) {
                Ok(decoded) if decoded == q => {}
                Ok(decoded) => {
                    report.bump("decode_mismatches", 1);
                    report.fail(format!("after {}: decoded {decoded}, automaton {q}", here()));
                }
                Err(e) => {
                    report.bump("decode_mismatches", 1);
                    report.fail(format!("after {}: {e}", here()));
                }
            }

            let saturated = match &trace {
                StepTrace::Lstm { f, i, o, .. } => {
                    f.iter().chain(i).chain(o).all(is_bit)
                }
                StepTrace::Elman { h, .. } => h.iter().all(is_bit),
            };
            if !saturated {
                report.bump("saturation_violations", 1);
                report.fail(format!("after {}: unsaturated coordinate", here()));
            }

            if let Network::Lstm(p) = net {
                let s = p.encoding.slot_width;
                let cfg = &p.numeric;
                let top = q.stack().map_or(0, <[usize]>::len);
                let ok = state.h.chunks(s).enumerate().all(|(j, slot)| {
                    if j + 1 == top {
                        let cw = p.encoding.codeword(q.stack().unwrap()[j]);
                        slot.iter().zip(cw).all(|(h, x)| *h == sat_tanh(cfg, *x))
                    } else {
                        slot.iter().all(|h| *h == 0.0)
                    }
                });
                if !ok {
                    report.bump("sparsity_violations", 1);
                    report.fail(format!("after {}: hidden state exposes more than the top", here()));
                }
            }
        }
    }
    report.bump("strings", corpus.len() as u64);
    Ok(report)
}

/// At every prefix of every corpus string (from the empty prefix up to the
/// one before `$`), every allowed token has probability at least `epsilon`
/// and every disallowed token at most `1 / (10k)`.
pub fn check_probability_margins(
    net: &Network,
    corpus: &[TokenString],
    epsilon: f64,
) -> Result<VerificationReport> {
    let params = *net.dyck();
    let k = params.k();
    let bound = NumericConfig::disallowed_bound(k);
    let mut report = VerificationReport::new("probability_margins", Instance::of(net));
    report.config_violation = net.numeric().margin_shortfall(k);
    report.bump("violations", 0);
    let mut min_allowed = f64::INFINITY;
    let mut max_disallowed: f64 = 0.0;
    for w in corpus {
        let mut state = net.initial_state();
        let mut q = DfaState::initial();
        for t in 0..w.len() {
            let probs = net.next_distribution(&state);
            let mask = dyck::allowed_mask(&params, &q);
            report.checked += 1;
            for (idx, (&p, &ok)) in probs.iter().zip(&mask).enumerate() {
                let bad = if ok {
                    min_allowed = min_allowed.min(p);
                    p < epsilon
                } else {
                    max_disallowed = max_disallowed.max(p);
                    p > bound
                };
                if bad {
                    report.bump("violations", 1);
                    report.fail(format!(
                        "after \"{}\": p({}) = {p} ({} token)",
                        dyck::render(&w.tokens()[..t]),
                        Token::from_vocab_index(idx, k),
                        if ok { "allowed" } else { "disallowed" }
                    ));
                }
            }
            let tok = w.tokens()[t];
            q = dyck::transition(&params, &q, tok);
            if tok != Token::End {
                net.advance(&mut state, tok)?;
            }
        }
    }
    if report.checked > 0 {
        report.metrics.insert("min_allowed".into(), min_allowed);
        report.metrics.insert("max_disallowed".into(), max_disallowed);
    }
    report.metrics.insert("epsilon".into(), epsilon);
    report.metrics.insert("disallowed_bound".into(), bound);
    Ok(report)
}

/// Something that assigns next-token distributions along a string.
pub trait NextTokenModel {
    fn reset(&mut self) -> Result<()>;
    fn distribution(&self) -> Vec<f64>;
    fn consume(&mut self, token: Token) -> Result<()>;
}

pub struct NetworkModel<'a> {
    net: &'a Network,
    state: NetworkState,
}

impl<'a> NetworkModel<'a> {
    pub fn new(net: &'a Network) -> Self {
        Self {
            net,
            state: net.initial_state(),
        }
    }
}

impl NextTokenModel for NetworkModel<'_> {
    fn reset(&mut self) -> Result<()> {
        self.state = self.net.initial_state();
        Ok(())
    }

    fn distribution(&self) -> Vec<f64> {
        self.net.next_distribution(&self.state)
    }

    fn consume(&mut self, token: Token) -> Result<()> {
        if token == Token::End {
            return Ok(());
        }
        self.net.advance(&mut self.state, token)
    }
}

/// Uniform distribution over the whole vocabulary; renormalized over the
/// close brackets it is uniform over them.
pub struct UniformModel {
    pub vocab_size: usize,
}

impl NextTokenModel for UniformModel {
    fn reset(&mut self) -> Result<()> {
        Ok(())
    }

    fn distribution(&self) -> Vec<f64> {
        vec![1.0 / self.vocab_size as f64; self.vocab_size]
    }

    fn consume(&mut self, _token: Token) -> Result<()> {
        Ok(())
    }
}

/// Threshold on the renormalized close-bracket probability.
pub const CONFIDENCE_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosingMetric {
    /// Mean over observed separations of the confident fraction.
    pub mean: f64,
    /// Separation -> (confident, total).
    pub per_separation: BTreeMap<usize, (u64, u64)>,
    /// Even separations up to the largest observed one that never occurred.
    /// Separations are always even, since the tokens between a bracket pair
    /// are balanced.
    pub missing: Vec<usize>,
}

impl fmt::Display for ClosingMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "mean_p: {}", self.mean)?;
        writeln!(f, "separation confident total p")?;
        for (l, (c, n)) in &self.per_separation {
            writeln!(f, "{l} {c} {n} {}", *c as f64 / *n as f64)?;
        }
        if !self.missing.is_empty() {
            writeln!(f, "missing separations (excluded): {:?}", self.missing)?;
        }
        Ok(())
    }
}

/// For each close bracket in the corpus, whether the model's probability of
/// the correct close, renormalized over all closes, exceeds 0.8; bucketed by
/// the number of tokens strictly between the close and its open.
pub fn closing_metric<M: NextTokenModel>(
    model: &mut M,
    params: &DyckParams,
    corpus: &[TokenString],
) -> Result<ClosingMetric> {
    let k = params.k();
    let mut buckets: BTreeMap<usize, (u64, u64)> = BTreeMap::new();
    for w in corpus {
        model.reset()?;
        let mut opens: Vec<usize> = Vec::new();
        for (t, &tok) in w.tokens().iter().enumerate() {
            if let Token::Close(_) = tok {
                let p = model.distribution();
                let total: f64 = (1..=k).map(|i| p[Token::Close(i).vocab_index(k)]).sum();
                let ratio = p[tok.vocab_index(k)] / total;
                let open = opens.pop().ok_or_else(|| {
                    Error::InvalidParams(format!("corpus string {w} is not balanced"))
                })?;
                let entry = buckets.entry(t - open - 1).or_default();
                entry.1 += 1;
                if ratio > CONFIDENCE_THRESHOLD {
                    entry.0 += 1;
                }
            } else if tok.is_open() {
                opens.push(t);
            }
            model.consume(tok)?;
        }
    }
    let mean = if buckets.is_empty() {
        f64::NAN
    } else {
        buckets
            .values()
            .map(|(c, n)| *c as f64 / *n as f64)
            .sum::<f64>()
            / buckets.len() as f64
    };
    let max = buckets.keys().next_back().copied().unwrap_or(0);
    let missing = (0..=max)
        .step_by(2)
        .filter(|l| !buckets.contains_key(l))
        .collect();
    Ok(ClosingMetric {
        mean,
        per_separation: buckets,
        missing,
    })
}

/// A deterministic state machine over hashable states, fed one token at a
/// time. Networks and quantized encoders both fit.
pub trait Encoder {
    type State: Clone + Eq + Hash + fmt::Debug;
    fn initial(&self) -> Self::State;
    fn update(&self, state: &Self::State, token: Token) -> Result<Self::State>;
}

/// A network as an encoder; the state is the bit pattern of `h` (Simple RNN,
/// naive) or `c` (LSTM).
pub struct NetworkEncoder<'a>(pub &'a Network);

fn memory_bits(net: &Network, state: &NetworkState) -> Vec<u64> {
    let v = match net {
        Network::Lstm(_) => state.c.as_ref().expect("LSTM cell"),
        _ => &state.h,
    };
    v.iter().map(|x| x.to_bits()).collect()
}

impl Encoder for NetworkEncoder<'_> {
    type State = TruncatedState;

    fn initial(&self) -> Self::State {
        TruncatedEncoder { net: self.0, width: usize::MAX }.initial()
    }

    fn update(&self, state: &Self::State, token: Token) -> Result<Self::State> {
        TruncatedEncoder { net: self.0, width: usize::MAX }.update(state, token)
    }
}

/// Keeps only the first `width` memory coordinates of a network.
pub struct TruncatedEncoder<'a> {
    pub net: &'a Network,
    pub width: usize,
}

/// Memory bit pattern used for comparison, plus the full network state
/// needed to keep stepping.
#[derive(Debug, Clone)]
pub struct TruncatedState {
    kept: Vec<u64>,
    full: NetworkState,
}

impl PartialEq for TruncatedState {
    fn eq(&self, other: &Self) -> bool {
        self.kept == other.kept
    }
}

impl Eq for TruncatedState {}

impl Hash for TruncatedState {
    fn hash<H: std::hash::Hasher>(&self, h: &mut H) {
        self.kept.hash(h);
    }
}

impl Encoder for TruncatedEncoder<'_> {
    type State = TruncatedState;

    fn initial(&self) -> Self::State {
        let full = self.net.initial_state();
        let mut kept = memory_bits(self.net, &full);
        kept.truncate(self.width);
        TruncatedState { kept, full }
    }

    fn update(&self, state: &Self::State, token: Token) -> Result<Self::State> {
        let mut full = state.full.clone();
        self.net.advance(&mut full, token)?;
        let mut kept = memory_bits(self.net, &full);
        kept.truncate(self.width);
        Ok(TruncatedState { kept, full })
    }
}

/// An arbitrary deterministic update over `d` units of `p` bits each, so the
/// state set has exactly `2^(d p)` elements.
pub struct QuantizedEncoder {
    pub d: u32,
    pub p: u32,
    rule: Box<dyn Fn(u64, Token) -> u64>,
}

impl QuantizedEncoder {
    /// Builds an encoder from any update rule; results are reduced to
    /// `d p` bits.
    pub fn new(d: u32, p: u32, rule: impl Fn(u64, Token) -> u64 + 'static) -> Result<Self> {
        if d == 0 || p == 0 || d * p > 63 {
            return Err(Error::InvalidParams(format!(
                "quantized encoder needs 1 <= d*p <= 63 (d={d}, p={p})"
            )));
        }
        Ok(Self {
            d,
            p,
            rule: Box::new(rule),
        })
    }

    /// A mixing update: `s' = 31 s + (token index + 1)` modulo `2^(dp)`.
    pub fn mixing(d: u32, p: u32, k: usize) -> Result<Self> {
        Self::new(d, p, move |s, t| {
            s.wrapping_mul(31).wrapping_add(t.vocab_index(k) as u64 + 1)
        })
    }

    pub fn state_count(&self) -> u128 {
        1u128 << (self.d * self.p)
    }

    fn mask(&self) -> u64 {
        (1u64 << (self.d * self.p)) - 1
    }
}

impl Encoder for QuantizedEncoder {
    type State = u64;

    fn initial(&self) -> u64 {
        0
    }

    fn update(&self, state: &u64, token: Token) -> Result<u64> {
        Ok((self.rule)(*state, token) & self.mask())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Collision {
    pub w: Vec<Token>,
    pub w_prime: Vec<Token>,
    pub suffix: Vec<Token>,
    /// `w s` is a member and `w' s` is not, both checked on the automaton.
    pub verified: bool,
}

impl fmt::Display for Collision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "w = \"{}\", w' = \"{}\", suffix = \"{}\" ({})",
            dyck::render(&self.w),
            dyck::render(&self.w_prime),
            dyck::render(&self.suffix),
            if self.verified { "verified" } else { "NOT verified" }
        )
    }
}

/// All-open strings of length `m` in lexicographic order.
fn full_depth_strings(params: &DyckParams, budget: u128) -> Result<Vec<Vec<Token>>> {
    let (k, m) = (params.k(), params.m());
    match (k as u128).checked_pow(m as u32) {
        Some(n) if n <= budget => {}
        _ => {
            return Err(Error::Budget(format!(
                "k^m = {k}^{m} exceeds the full-depth budget {budget}"
            )))
        }
    }
    let mut out = vec![Vec::new()];
    for _ in 0..m {
        out = out
            .into_iter()
            .flat_map(|p| {
                (1..=k).map(move |i| {
                    let mut q = p.clone();
                    q.push(Token::Open(i));
                    q
                })
            })
            .collect();
    }
    Ok(out)
}

type StringPair = (Vec<Token>, Vec<Token>);

fn first_collision<E: Encoder>(
    encoder: &E,
    params: &DyckParams,
    budget: u128,
) -> Result<(u64, Option<StringPair>)> {
    let strings = full_depth_strings(params, budget)?;
    let mut seen: HashMap<E::State, usize> = HashMap::with_capacity(strings.len());
    for (idx, w) in strings.iter().enumerate() {
        let mut s = encoder.initial();
        for &t in w {
            s = encoder.update(&s, t)?;
        }
        if let Some(&first) = seen.get(&s) {
            return Ok((idx as u64 + 1, Some((strings[first].clone(), w.clone()))));
        }
        seen.insert(s, idx);
    }
    Ok((strings.len() as u64, None))
}

fn distinguishing_suffix(params: &DyckParams, w: &[Token], w_prime: &[Token]) -> Collision {
    let stack: Vec<usize> = w.iter().filter_map(Token::bracket).collect();
    let suffix = dyck::completion(&stack);
    let join = |a: &[Token]| -> Vec<Token> { a.iter().chain(&suffix).copied().collect() };
    let verified =
        dyck::is_member(params, &join(w)) && !dyck::is_member(params, &join(w_prime));
    Collision {
        w: w.to_vec(),
        w_prime: w_prime.to_vec(),
        suffix,
        verified,
    }
}

/// Pigeonhole search: runs the encoder on every all-open string of length
/// `m` and returns the first pair with equal states, together with the
/// suffix (the closes of `w` in reverse, then `$`) that the automaton
/// accepts after `w` and rejects after `w'`.
pub fn find_collision<E: Encoder>(encoder: &E, params: &DyckParams) -> Result<Option<Collision>> {
    Ok(first_collision(encoder, params, FULL_DEPTH_BUDGET)?
        .1
        .map(|(w, w2)| distinguishing_suffix(params, &w, &w2)))
}

/// All `k^m` full-depth memory states of the encoder are pairwise distinct.
pub fn check_full_depth_distinctness<E: Encoder>(
    encoder: &E,
    params: &DyckParams,
) -> Result<VerificationReport> {
    let mut report = VerificationReport::new("full_depth_distinctness", Instance::bare(params));
    let (checked, collision) = first_collision(encoder, params, FULL_DEPTH_BUDGET)?;
    report.checked = checked;
    if let Some((w, w2)) = collision {
        let c = distinguishing_suffix(params, &w, &w2);
        report.fail(format!("collision {c}"));
    }
    Ok(report)
}

/// Report wrapper around [`find_collision`] for a quantized encoder.
pub fn collision_report(encoder: &QuantizedEncoder, params: &DyckParams) -> Result<VerificationReport> {
    let mut report = VerificationReport::new("collision_search", Instance::bare(params));
    report.checked = (params.k() as u128).pow(params.m() as u32) as u64;
    report.bump("encoder_states", encoder.state_count() as u64);
    match find_collision(encoder, params)? {
        Some(c) => {
            if !c.verified {
                report.pass = false;
            }
            report.notes.push(format!("collision {c}"));
            report.bump("collisions_found", 1);
        }
        None => {
            report.bump("collisions_found", 0);
            if encoder.state_count() < report.checked as u128 {
                report.fail("no collision although the state set is smaller than k^m".into());
            }
        }
    }
    Ok(report)
}

/// Copy of the network with the weights of every close-bracket readout row
/// set to zero (biases kept).
pub fn sabotage_zero_close_rows(net: &Network) -> Network {
    let mut out = net.clone();
    let k = net.dyck().k();
    let (v, _) = out.readout_mut();
    for j in 1..=k {
        let row = Token::Close(j).vocab_index(k);
        for c in 0..v.cols {
            v.set(row, c, 0.0);
        }
    }
    out
}

/// Copy of a Simple RNN with one push-shift entry of `W` (slot 2 reading
/// slot 1 of the push half, first coordinate) set to zero.
pub fn sabotage_flip_push_entry(net: &Network) -> Result<Network> {
    let mut out = net.clone();
    match &mut out {
        Network::Simple(p) if p.dyck.m() >= 2 => {
            let (row, col) = (p.slot_offset(false, 1), p.slot_offset(false, 0));
            let w = p.w.get(row, col);
            p.w.set(row, col, if w == 0.0 { 2.0 * p.numeric.beta } else { 0.0 });
            Ok(out)
        }
        _ => Err(Error::InvalidParams(
            "push-shift sabotage needs a Simple RNN with m >= 2".into(),
        )),
    }
}
