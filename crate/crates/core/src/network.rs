//! Explicit weight constructions.
//!
//! * Simple RNN stack: `2 m w` units for slot width `w`. The hidden state is
//!   a push half and a pop half of `m` slots each; slot 1 of their sum is the
//!   top of the stack.
//! * LSTM stack: `m w` units, `W_c = 0`. Slot 1 of the cell is the bottom of
//!   the stack; only the top slot is visible in the hidden state.
//! * Naive DFA RNN: one unit per (automaton state, input symbol) pair.
//!
//! With `w = k` (one-hot) or `w = 3 ceil(log2 k) - 1` (binary) this gives the
//! hidden sizes `2mk`, `mk`, `6m ceil(log2 k) - 2m` and `3m ceil(log2 k) - m`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dyck::{self, DfaState, DyckParams, Token};
use crate::encoding::{Encoding, EncodingKind, StackArch};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::numerics::{gamma, NumericConfig};

/// Default ceiling on naive-construction hidden units. The recurrent matrix
/// is dense and has `units^2` entries.
pub const DEFAULT_NAIVE_UNIT_CEILING: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    SimpleRnn,
    Lstm,
    NaiveDfa,
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Architecture::SimpleRnn => "simple_rnn",
            Architecture::Lstm => "lstm",
            Architecture::NaiveDfa => "naive_dfa",
        })
    }
}

/// One of the five constructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Construction {
    pub architecture: Architecture,
    pub encoding: Option<EncodingKind>,
}

impl Construction {
    pub const SIMPLE_ONE_HOT: Self = Self::stack(Architecture::SimpleRnn, EncodingKind::OneHot);
    pub const SIMPLE_BINARY: Self = Self::stack(Architecture::SimpleRnn, EncodingKind::Binary);
    pub const LSTM_ONE_HOT: Self = Self::stack(Architecture::Lstm, EncodingKind::OneHot);
    pub const LSTM_BINARY: Self = Self::stack(Architecture::Lstm, EncodingKind::Binary);
    pub const NAIVE: Self = Self {
        architecture: Architecture::NaiveDfa,
        encoding: None,
    };

    const fn stack(architecture: Architecture, kind: EncodingKind) -> Self {
        Self {
            architecture,
            encoding: Some(kind),
        }
    }

    pub fn all() -> [Construction; 5] {
        [
            Self::SIMPLE_ONE_HOT,
            Self::SIMPLE_BINARY,
            Self::LSTM_ONE_HOT,
            Self::LSTM_BINARY,
            Self::NAIVE,
        ]
    }

    /// Constructions that can be built for `k` (binary needs `k > 1`).
    pub fn available(k: usize) -> Vec<Construction> {
        Self::all()
            .into_iter()
            .filter(|c| k > 1 || c.encoding != Some(EncodingKind::Binary))
            .collect()
    }

    /// Hidden units predicted by the closed-form counts.
    pub fn expected_units(&self, params: &DyckParams) -> Option<u128> {
        let (k, m) = (params.k() as u128, params.m() as u128);
        let log = crate::encoding::ceil_log2(params.k()) as u128;
        Some(match (self.architecture, self.encoding) {
            (Architecture::SimpleRnn, Some(EncodingKind::OneHot)) => 2 * m * k,
            (Architecture::Lstm, Some(EncodingKind::OneHot)) => m * k,
            (Architecture::SimpleRnn, Some(EncodingKind::Binary)) => 6 * m * log - 2 * m,
            (Architecture::Lstm, Some(EncodingKind::Binary)) => 3 * m * log - m,
            (Architecture::NaiveDfa, _) => {
                (params.stack_state_count()? + 2).checked_mul(2 * k)?
            }
            _ => return None,
        })
    }
}

impl fmt::Display for Construction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.encoding {
            Some(e) => write!(f, "{}/{}", self.architecture, e),
            None => write!(f, "{}", self.architecture),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimpleRnnParams {
    pub dyck: DyckParams,
    pub encoding: Encoding,
    pub numeric: NumericConfig,
    pub w: Matrix,
    pub u: Matrix,
    pub b: Vec<f64>,
    pub v: Matrix,
    pub b_v: Vec<f64>,
}

impl SimpleRnnParams {
    pub fn hidden_units(&self) -> usize {
        self.w.rows
    }

    /// Offset of slot `j` (0-based, 0 = top) in the push (`false`) or pop
    /// (`true`) half.
    pub fn slot_offset(&self, pop_half: bool, j: usize) -> usize {
        let s = self.encoding.slot_width;
        (pop_half as usize) * self.dyck.m() * s + j * s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub dyck: DyckParams,
    pub encoding: Encoding,
    pub numeric: NumericConfig,
    pub w_f: Matrix,
    pub u_f: Matrix,
    pub b_f: Vec<f64>,
    pub w_i: Matrix,
    pub u_i: Matrix,
    pub b_i: Vec<f64>,
    pub w_o: Matrix,
    pub u_o: Matrix,
    pub b_o: Vec<f64>,
    pub w_c: Matrix,
    pub u_c: Matrix,
    pub b_c: Vec<f64>,
    pub v: Matrix,
    pub b_v: Vec<f64>,
}

impl LstmParams {
    pub fn hidden_units(&self) -> usize {
        self.w_f.rows
    }
}

/// Index of automaton states for the naive construction: stack states
/// shortest first (lexicographic, bottom first within a length), then
/// accept, then reject.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateIndex {
    params: DyckParams,
    stack_states: usize,
}

impl StateIndex {
    pub fn new(params: DyckParams) -> Option<Self> {
        let count = params.stack_state_count()?;
        Some(Self {
            params,
            stack_states: usize::try_from(count).ok()?,
        })
    }

    pub fn len(&self) -> usize {
        self.stack_states + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn offset(&self, depth: usize) -> usize {
        (0..depth).map(|d| self.params.k().pow(d as u32)).sum()
    }

    pub fn index(&self, state: &DfaState) -> usize {
        match state {
            DfaState::Stack(s) => {
                let k = self.params.k();
                self.offset(s.len()) + s.iter().fold(0, |acc, &i| acc * k + (i - 1))
            }
            DfaState::Accept => self.stack_states,
            DfaState::Reject => self.stack_states + 1,
        }
    }

    pub fn state(&self, index: usize) -> DfaState {
        if index == self.stack_states {
            return DfaState::Accept;
        }
        if index > self.stack_states {
            return DfaState::Reject;
        }
        let k = self.params.k();
        let mut depth = 0;
        while self.offset(depth + 1) <= index {
            depth += 1;
        }
        let mut rem = index - self.offset(depth);
        let mut stack = vec![0; depth];
        for slot in stack.iter_mut().rev() {
            *slot = rem % k + 1;
            rem /= k;
        }
        DfaState::Stack(stack)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NaiveDfaParams {
    pub dyck: DyckParams,
    pub numeric: NumericConfig,
    pub index: StateIndex,
    pub w: Matrix,
    pub u: Matrix,
    pub b: Vec<f64>,
    pub v: Matrix,
    pub b_v: Vec<f64>,
}

impl NaiveDfaParams {
    pub fn hidden_units(&self) -> usize {
        self.w.rows
    }

    /// Unit for the pair (state index, input symbol index).
    pub fn unit(&self, state: usize, symbol: usize) -> usize {
        state * self.dyck.input_size() + symbol
    }
}

/// A built network of any construction.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Network {
    Simple(SimpleRnnParams),
    Lstm(LstmParams),
    Naive(NaiveDfaParams),
}

impl Network {
    pub fn build(
        construction: Construction,
        params: &DyckParams,
        numeric: &NumericConfig,
    ) -> Result<Self> {
        match (construction.architecture, construction.encoding) {
            (Architecture::SimpleRnn, Some(kind)) => {
                let enc = Encoding::build(params, kind, StackArch::SimpleRnn)?;
                Ok(Network::Simple(build_simple_rnn(params, enc, numeric)?))
            }
            (Architecture::Lstm, Some(kind)) => {
                let enc = Encoding::build(params, kind, StackArch::Lstm)?;
                Ok(Network::Lstm(build_lstm(params, enc, numeric)?))
            }
            (Architecture::NaiveDfa, _) => Ok(Network::Naive(build_naive_dfa_rnn(
                params,
                numeric,
                DEFAULT_NAIVE_UNIT_CEILING,
            )?)),
            (arch, None) => Err(Error::InvalidParams(format!(
                "{arch} needs an encoding kind"
            ))),
        }
    }

    pub fn dyck(&self) -> &DyckParams {
        match self {
            Network::Simple(p) => &p.dyck,
            Network::Lstm(p) => &p.dyck,
            Network::Naive(p) => &p.dyck,
        }
    }

    pub fn numeric(&self) -> &NumericConfig {
        match self {
            Network::Simple(p) => &p.numeric,
            Network::Lstm(p) => &p.numeric,
            Network::Naive(p) => &p.numeric,
        }
    }

    pub fn construction(&self) -> Construction {
        match self {
            Network::Simple(p) => Construction::stack(Architecture::SimpleRnn, p.encoding.kind),
            Network::Lstm(p) => Construction::stack(Architecture::Lstm, p.encoding.kind),
            Network::Naive(_) => Construction::NAIVE,
        }
    }

    pub fn hidden_units(&self) -> usize {
        match self {
            Network::Simple(p) => p.hidden_units(),
            Network::Lstm(p) => p.hidden_units(),
            Network::Naive(p) => p.hidden_units(),
        }
    }

    pub fn readout(&self) -> (&Matrix, &[f64]) {
        match self {
            Network::Simple(p) => (&p.v, &p.b_v),
            Network::Lstm(p) => (&p.v, &p.b_v),
            Network::Naive(p) => (&p.v, &p.b_v),
        }
    }

    pub fn readout_mut(&mut self) -> (&mut Matrix, &mut Vec<f64>) {
        match self {
            Network::Simple(p) => (&mut p.v, &mut p.b_v),
            Network::Lstm(p) => (&mut p.v, &mut p.b_v),
            Network::Naive(p) => (&mut p.v, &mut p.b_v),
        }
    }

    pub fn encoding(&self) -> Option<&Encoding> {
        match self {
            Network::Simple(p) => Some(&p.encoding),
            Network::Lstm(p) => Some(&p.encoding),
            Network::Naive(_) => None,
        }
    }
}

/// The input embedding `E`, which is the identity over the `2k` input
/// symbols. It is never stored; inputs are applied as column lookups.
pub fn identity(n: usize) -> Matrix {
    let mut e = Matrix::zeros(n, n);
    for i in 0..n {
        e.set(i, i, 1.0);
    }
    e
}

fn fill_block(mat: &mut Matrix, row0: usize, col0: usize, rows: usize, cols: usize, v: f64) {
    for r in row0..row0 + rows {
        for c in col0..col0 + cols {
            mat.set(r, c, v);
        }
    }
}

/// Readout rows and biases.
///
/// Close-bracket rows read the slots that can hold the top with
/// `match_template`; open-bracket rows read slot `m` with `-detector` (fires
/// on a full stack); the end row reads every slot with `-detector` (fires on
/// a non-empty stack). Biases are `-0.5 zeta gamma` for closes and
/// `+0.5 zeta gamma` otherwise.
///
/// LSTM hidden values are `gamma` times a codeword, so LSTM rows use `zeta`.
/// Simple RNN hidden values are raw codewords, so its rows use `zeta gamma`;
/// both then produce logits of exactly `±0.5 zeta gamma`.
pub fn build_readout(
    params: &DyckParams,
    encoding: &Encoding,
    numeric: &NumericConfig,
    arch: StackArch,
) -> (Matrix, Vec<f64>) {
    let (k, m) = (params.k(), params.m());
    let s = encoding.slot_width;
    let (hidden, halves, scale) = match arch {
        StackArch::SimpleRnn => (2 * m * s, 2, numeric.zeta * gamma()),
        StackArch::Lstm => (m * s, 1, numeric.zeta),
    };
    let slot_offsets = |j: usize| (0..halves).map(move |h| h * m * s + j * s);
    let mut v = Matrix::zeros(params.vocab_size(), hidden);
    let detector = encoding.detector();
    let top_slots: Vec<usize> = match arch {
        StackArch::SimpleRnn => vec![0],
        StackArch::Lstm => (0..m).collect(),
    };
    for j in 1..=k {
        let row = Token::Close(j).vocab_index(k);
        let template = encoding.match_template(j);
        for &slot in &top_slots {
            for off in slot_offsets(slot) {
                for (c, t) in template.iter().enumerate() {
                    v.set(row, off + c, scale * t);
                }
            }
        }
        let row = Token::Open(j).vocab_index(k);
        for off in slot_offsets(m - 1) {
            for (c, d) in detector.iter().enumerate() {
                v.set(row, off + c, -scale * d);
            }
        }
    }
    let end = Token::End.vocab_index(k);
    for slot in 0..m {
        for off in slot_offsets(slot) {
            for (c, d) in detector.iter().enumerate() {
                v.set(end, off + c, -scale * d);
            }
        }
    }
    let half = numeric.half_margin();
    let b_v = params
        .vocabulary()
        .iter()
        .map(|t| if t.is_close() { -half } else { half })
        .collect();
    (v, b_v)
}

pub fn build_simple_rnn(
    params: &DyckParams,
    encoding: Encoding,
    numeric: &NumericConfig,
) -> Result<SimpleRnnParams> {
    numeric.validate()?;
    check_encoding(params, &encoding, StackArch::SimpleRnn)?;
    let (k, m) = (params.k(), params.m());
    let s = encoding.slot_width;
    let half = m * s;
    let n = 2 * half;
    let two_beta = 2.0 * numeric.beta;

    // W = [M_push; M_pop] [I I]: push shifts every slot one step deeper,
    // pop shifts every slot one step toward the top.
    let mut w = Matrix::zeros(n, n);
    for j in 0..m.saturating_sub(1) {
        for c in 0..s {
            for src_half in [0, half] {
                // push half: slot j+1 <- slot j
                w.set((j + 1) * s + c, src_half + j * s + c, two_beta);
                // pop half: slot j <- slot j+1
                w.set(half + j * s + c, src_half + (j + 1) * s + c, two_beta);
            }
        }
    }

    let mut u = Matrix::zeros(n, params.input_size());
    for i in 1..=k {
        let open = Token::Open(i).vocab_index(k);
        for (c, x) in encoding.codeword(i).iter().enumerate() {
            u.set(c, open, two_beta * x);
        }
        for r in half..n {
            u.set(r, open, -two_beta);
        }
        let close = Token::Close(i).vocab_index(k);
        for r in 0..half {
            u.set(r, close, -two_beta);
        }
    }

    let b = vec![-numeric.beta; n];
    let (v, b_v) = build_readout(params, &encoding, numeric, StackArch::SimpleRnn);
    Ok(SimpleRnnParams {
        dyck: *params,
        encoding,
        numeric: *numeric,
        w,
        u,
        b,
        v,
        b_v,
    })
}

pub fn build_lstm(
    params: &DyckParams,
    encoding: Encoding,
    numeric: &NumericConfig,
) -> Result<LstmParams> {
    numeric.validate()?;
    check_encoding(params, &encoding, StackArch::Lstm)?;
    let (k, m) = (params.k(), params.m());
    let s = encoding.slot_width;
    let n = m * s;
    let lam = numeric.lambda;
    let lg = numeric.lambda * gamma();
    let inputs = params.input_size();
    let opens: Vec<usize> = (1..=k).map(|i| Token::Open(i).vocab_index(k)).collect();
    let closes: Vec<usize> = (1..=k).map(|i| Token::Close(i).vocab_index(k)).collect();

    // Output gate: closed on every slot strictly below the next top.
    let mut w_o = Matrix::zeros(n, n);
    for j in 0..m {
        for jp in j..m {
            let v = if jp <= j + 1 { -lam } else { -2.0 * lam };
            fill_block(&mut w_o, j * s, jp * s, s, s, v);
        }
    }
    let mut u_o = Matrix::zeros(n, inputs);
    for r in 0..n {
        for &c in &closes {
            u_o.set(r, c, lg);
        }
    }
    let b_o = vec![0.5 * lg; n];

    // Forget gate: erase slot j when it is the top and a close arrives.
    let mut w_f = Matrix::zeros(n, n);
    for j in 0..m {
        fill_block(&mut w_f, j * s, j * s, s, s, -lam);
    }
    let mut u_f = Matrix::zeros(n, inputs);
    for r in 0..n {
        for &c in &closes {
            u_f.set(r, c, -lg);
        }
    }
    let b_f = vec![1.5 * lg; n];

    // Input gate: open only on the first free slot when an open arrives.
    let mut w_i = Matrix::zeros(n, n);
    fill_block(&mut w_i, 0, 0, s, n, -lam);
    for j in 1..m {
        fill_block(&mut w_i, j * s, (j - 1) * s, s, s, lam);
    }
    let mut u_i = Matrix::zeros(n, inputs);
    for r in 0..n {
        for &c in &opens {
            u_i.set(r, c, lg);
        }
    }
    let b_i = (0..n)
        .map(|r| if r < s { -0.5 * lg } else { -1.5 * lg })
        .collect();

    // Candidate: the new bracket's codeword in every slot, W_c = 0.
    let w_c = Matrix::zeros(n, n);
    let mut u_c = Matrix::zeros(n, inputs);
    for i in 1..=k {
        let col = opens[i - 1];
        for j in 0..m {
            for (c, x) in encoding.codeword(i).iter().enumerate() {
                u_c.set(j * s + c, col, lam * x);
            }
        }
    }
    let b_c = vec![0.0; n];

    let (v, b_v) = build_readout(params, &encoding, numeric, StackArch::Lstm);
    Ok(LstmParams {
        dyck: *params,
        encoding,
        numeric: *numeric,
        w_f,
        u_f,
        b_f,
        w_i,
        u_i,
        b_i,
        w_o,
        u_o,
        b_o,
        w_c,
        u_c,
        b_c,
        v,
        b_v,
    })
}

/// One-hot DFA simulation over (state, input symbol) units.
///
/// Unit `(q', a)` fires iff the input is `a` and the previous state `q`
/// satisfies `delta(q, a) = q'`, as a two-input conjunction
/// `2 beta (x_a + [prev ok] - 1.5)`. The all-zero start vector stands for the
/// empty stack, so for `q' = delta([], a)` the "prev ok" term is written as
/// `1 - sum of units whose state does not go to q'`.
///
/// The readout bias holds the logits of the empty stack and each unit's
/// column holds the difference to its own state's logits, so the logits are
/// exactly those of the decoded state.
pub fn build_naive_dfa_rnn(
    params: &DyckParams,
    numeric: &NumericConfig,
    unit_ceiling: usize,
) -> Result<NaiveDfaParams> {
    numeric.validate()?;
    let too_large = || {
        Error::TooLarge(format!(
            "naive construction for k={}, m={} needs more than {unit_ceiling} hidden units",
            params.k(),
            params.m()
        ))
    };
    let units = Construction::NAIVE
        .expected_units(params)
        .ok_or_else(too_large)?;
    if units > unit_ceiling as u128 {
        return Err(too_large());
    }
    let index = StateIndex::new(*params).ok_or_else(too_large)?;
    let n = units as usize;
    let sigma = params.input_size();
    let alphabet = params.alphabet();
    let two_beta = 2.0 * numeric.beta;
    let unit = |q: usize, a: usize| q * sigma + a;

    let states: Vec<DfaState> = (0..index.len()).map(|q| index.state(q)).collect();
    let mut w = Matrix::zeros(n, n);
    let mut u = Matrix::zeros(n, sigma);
    let mut b = vec![-3.0 * numeric.beta; n];
    for (a, &tok) in alphabet.iter().enumerate() {
        let from_start = index.index(&dyck::transition(params, &DfaState::initial(), tok));
        for q in 0..index.len() {
            u.set(unit(q, a), a, two_beta);
        }
        b[unit(from_start, a)] = -numeric.beta;
        for (q, state) in states.iter().enumerate() {
            let target = index.index(&dyck::transition(params, state, tok));
            if target == from_start {
                continue;
            }
            for src in 0..sigma {
                w.set(unit(target, a), unit(q, src), two_beta);
                w.set(unit(from_start, a), unit(q, src), -two_beta);
            }
        }
    }

    let half = numeric.half_margin();
    let logits_of = |state: &DfaState| -> Vec<f64> {
        dyck::allowed_mask(params, state)
            .into_iter()
            .map(|ok| if ok { half } else { -half })
            .collect()
    };
    let b_v = logits_of(&DfaState::initial());
    let mut v = Matrix::zeros(params.vocab_size(), n);
    for (q, state) in states.iter().enumerate() {
        let logits = logits_of(state);
        for (row, (l, base)) in logits.iter().zip(&b_v).enumerate() {
            let diff = l - base;
            if diff != 0.0 {
                for a in 0..sigma {
                    v.set(row, unit(q, a), diff);
                }
            }
        }
    }

    Ok(NaiveDfaParams {
        dyck: *params,
        numeric: *numeric,
        index,
        w,
        u,
        b,
        v,
        b_v,
    })
}

fn check_encoding(params: &DyckParams, encoding: &Encoding, arch: StackArch) -> Result<()> {
    if encoding.arch != arch || encoding.k() != params.k() {
        return Err(Error::UnsupportedEncoding(format!(
            "encoding built for {:?} with k={} used for {:?} with k={}",
            encoding.arch,
            encoding.k(),
            arch,
            params.k()
        )));
    }
    Ok(())
}
