//! Step-by-step execution of built networks with saturating arithmetic.

use std::fmt::Write as _;

use crate::dyck::{DfaState, Token};
use crate::encoding::DECODE_TOLERANCE;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::network::{LstmParams, NaiveDfaParams, Network, SimpleRnnParams};
use crate::numerics::{sat_sigmoid, sat_tanh, softmax, NumericConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub h: Vec<f64>,
    /// Cell vector; `None` for the Elman-style networks.
    pub c: Option<Vec<f64>>,
    pub t: usize,
}

/// Values recorded during one step.
#[derive(Debug, Clone, PartialEq)]
pub enum StepTrace {
    /// Simple RNN and naive construction: pre-activation and the saturated
    /// hidden vector.
    Elman { pre: Vec<f64>, h: Vec<f64> },
    Lstm {
        f: Vec<f64>,
        i: Vec<f64>,
        o: Vec<f64>,
        cand: Vec<f64>,
    },
}

/// Per-slot view of a stack network's state.
///
/// For the Simple RNN the slots are the sum of the two halves, top first.
/// For the LSTM they are the cell slots, bottom first.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotView {
    pub slots: Vec<Vec<f64>>,
    /// 1-based index of the slot holding the top, if the stack is non-empty.
    pub top_index: Option<usize>,
}

impl Network {
    pub fn initial_state(&self) -> NetworkState {
        let n = self.hidden_units();
        NetworkState {
            h: vec![0.0; n],
            c: matches!(self, Network::Lstm(_)).then(|| vec![0.0; n]),
            t: 0,
        }
    }

    fn check_state(&self, state: &NetworkState) -> Result<()> {
        let n = self.hidden_units();
        let cell_ok = match (self, &state.c) {
            (Network::Lstm(_), Some(c)) => c.len() == n,
            (Network::Lstm(_), None) => false,
            (_, c) => c.is_none(),
        };
        if state.h.len() != n || !cell_ok {
            return Err(Error::Dimension(format!(
                "state with h of length {} (cell {:?}) for a network with {n} units",
                state.h.len(),
                state.c.as_ref().map(Vec::len)
            )));
        }
        Ok(())
    }

    fn input_index(&self, token: Token) -> Result<usize> {
        if token == Token::End {
            return Err(Error::StepAfterEnd);
        }
        self.dyck().check_token(token)?;
        Ok(token.vocab_index(self.dyck().k()))
    }

    /// One update, recording gate values.
    pub fn step(&self, state: &NetworkState, token: Token) -> Result<(NetworkState, StepTrace)> {
        let mut next = state.clone();
        let trace = self.update(&mut next, token, true)?;
        Ok((next, trace.expect("trace requested")))
    }

    /// One update in place, without a trace.
    pub fn advance(&self, state: &mut NetworkState, token: Token) -> Result<()> {
        self.update(state, token, false).map(|_| ())
    }

    fn update(
        &self,
        state: &mut NetworkState,
        token: Token,
        want_trace: bool,
    ) -> Result<Option<StepTrace>> {
        self.check_state(state)?;
        let a = self.input_index(token)?;
        let trace = match self {
            Network::Simple(p) => elman_update(&p.w, &p.u, &p.b, &p.numeric, a, state, want_trace),
            Network::Naive(p) => elman_update(&p.w, &p.u, &p.b, &p.numeric, a, state, want_trace),
            Network::Lstm(p) => lstm_update(p, a, state, want_trace),
        };
        state.t += 1;
        Ok(trace)
    }

    /// `V h + b_v`.
    pub fn logits(&self, state: &NetworkState) -> Vec<f64> {
        let (v, b_v) = self.readout();
        let mut out = b_v.to_vec();
        v.mul_add_into(&state.h, &mut out);
        out
    }

    /// Next-token distribution over the vocabulary (opens, closes, end).
    pub fn next_distribution(&self, state: &NetworkState) -> Vec<f64> {
        softmax(&self.logits(state))
    }

    /// Folds [`Network::step`] over a prefix from the zero state.
    pub fn run_prefix(&self, prefix: &[Token]) -> Result<(NetworkState, Vec<StepTrace>)> {
        let mut state = self.initial_state();
        let mut traces = Vec::with_capacity(prefix.len());
        for &tok in prefix {
            let (next, trace) = self.step(&state, tok)?;
            state = next;
            traces.push(trace);
        }
        Ok((state, traces))
    }

    /// Reads the automaton state encoded in a network state.
    pub fn decode_stack(&self, state: &NetworkState) -> Result<DfaState> {
        self.check_state(state)?;
        match self {
            Network::Simple(p) => decode_simple(p, state),
            Network::Lstm(p) => decode_lstm(p, state),
            Network::Naive(p) => decode_naive(p, state),
        }
    }

    /// Slot view for the stack constructions; `None` for the naive one.
    pub fn slot_view(&self, state: &NetworkState) -> Option<SlotView> {
        match self {
            Network::Simple(p) => {
                let slots = simple_slots(p, &state.h);
                let top_index = slots[0].iter().any(|x| *x != 0.0).then_some(1);
                Some(SlotView { slots, top_index })
            }
            Network::Lstm(p) => {
                let c = state.c.as_ref()?;
                let s = p.encoding.slot_width;
                let slots: Vec<Vec<f64>> = c.chunks(s).map(<[f64]>::to_vec).collect();
                let top_index = slots
                    .iter()
                    .rposition(|slot| slot.iter().any(|x| *x != 0.0))
                    .map(|j| j + 1);
                Some(SlotView { slots, top_index })
            }
            Network::Naive(_) => None,
        }
    }

    /// Line-oriented dump of a run: one block per step with slot views and
    /// gate vectors. Meant for reading, not parsing.
    pub fn trace_dump(&self, prefix: &[Token]) -> Result<String> {
        let mut out = String::new();
        let mut state = self.initial_state();
        let _ = writeln!(out, "# {} k={} m={}", self.construction(), self.dyck().k(), self.dyck().m());
        for &tok in prefix {
            let (next, trace) = self.step(&state, tok)?;
            state = next;
            let _ = writeln!(out, "t={} token={}", state.t, tok);
            match &trace {
                StepTrace::Elman { pre, .. } => {
                    let _ = writeln!(out, "  pre = {}", fmt_vec(pre));
                }
                StepTrace::Lstm { f, i, o, cand } => {
                    let _ = writeln!(out, "  f = {}", fmt_vec(f));
                    let _ = writeln!(out, "  i = {}", fmt_vec(i));
                    let _ = writeln!(out, "  o = {}", fmt_vec(o));
                    let _ = writeln!(out, "  cand = {}", fmt_vec(cand));
                }
            }
            let _ = writeln!(out, "  h = {}", fmt_vec(&state.h));
            if let Some(view) = self.slot_view(&state) {
                for (j, slot) in view.slots.iter().enumerate() {
                    let _ = writeln!(out, "  slot[{}] = {}", j + 1, fmt_vec(slot));
                }
                match view.top_index {
                    Some(j) => {
                        let _ = writeln!(out, "  top = {j}");
                    }
                    None => {
                        let _ = writeln!(out, "  top = none");
                    }
                }
            }
            match self.decode_stack(&state) {
                Ok(q) => {
                    let _ = writeln!(out, "  stack = {q}");
                }
                Err(e) => {
                    let _ = writeln!(out, "  stack = <{e}>");
                }
            }
        }
        Ok(out)
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(" "))
}

fn elman_update(
    w: &Matrix,
    u: &Matrix,
    b: &[f64],
    numeric: &NumericConfig,
    input: usize,
    state: &mut NetworkState,
    want_trace: bool,
) -> Option<StepTrace> {
    let mut pre = b.to_vec();
    w.mul_add_into(&state.h, &mut pre);
    u.add_column_into(input, &mut pre);
    for (h, z) in state.h.iter_mut().zip(&pre) {
        *h = sat_sigmoid(numeric, *z);
    }
    want_trace.then(|| StepTrace::Elman {
        pre,
        h: state.h.clone(),
    })
}

fn gate(w: &Matrix, u: &Matrix, b: &[f64], h: &[f64], input: usize) -> Vec<f64> {
    let mut z = b.to_vec();
    w.mul_add_into(h, &mut z);
    u.add_column_into(input, &mut z);
    z
}

fn lstm_update(
    p: &LstmParams,
    input: usize,
    state: &mut NetworkState,
    want_trace: bool,
) -> Option<StepTrace> {
    let cfg = &p.numeric;
    let h = &state.h;
    let sig = |v: Vec<f64>| -> Vec<f64> { v.into_iter().map(|z| sat_sigmoid(cfg, z)).collect() };
    let f = sig(gate(&p.w_f, &p.u_f, &p.b_f, h, input));
    let i = sig(gate(&p.w_i, &p.u_i, &p.b_i, h, input));
    let o = sig(gate(&p.w_o, &p.u_o, &p.b_o, h, input));
    let cand: Vec<f64> = gate(&p.w_c, &p.u_c, &p.b_c, h, input)
        .into_iter()
        .map(|z| sat_tanh(cfg, z))
        .collect();
    let c = state.c.as_mut().expect("checked cell");
    for r in 0..c.len() {
        c[r] = f[r] * c[r] + i[r] * cand[r];
        state.h[r] = o[r] * sat_tanh(cfg, c[r]);
    }
    want_trace.then_some(StepTrace::Lstm { f, i, o, cand })
}

fn simple_slots(p: &SimpleRnnParams, h: &[f64]) -> Vec<Vec<f64>> {
    let s = p.encoding.slot_width;
    (0..p.dyck.m())
        .map(|j| {
            let push = p.slot_offset(false, j);
            let pop = p.slot_offset(true, j);
            (0..s).map(|c| h[push + c] + h[pop + c]).collect()
        })
        .collect()
}

/// Turns decoded slots into a stack, requiring every empty slot to come
/// after every occupied one in `order` (top-first or bottom-first).
fn collect_stack(decoded: Vec<Option<usize>>, top_first: bool) -> Result<DfaState> {
    let occupied = decoded.iter().take_while(|d| d.is_some()).count();
    if decoded[occupied..].iter().any(Option::is_some) {
        return Err(Error::Decode(format!(
            "occupied slot after an empty one: {decoded:?}"
        )));
    }
    let mut stack: Vec<usize> = decoded.into_iter().flatten().collect();
    if top_first {
        stack.reverse();
    }
    Ok(DfaState::Stack(stack))
}

fn decode_simple(p: &SimpleRnnParams, state: &NetworkState) -> Result<DfaState> {
    let decoded = simple_slots(p, &state.h)
        .iter()
        .map(|slot| p.encoding.decode(slot))
        .collect::<Result<Vec<_>>>()?;
    collect_stack(decoded, true)
}

fn decode_lstm(p: &LstmParams, state: &NetworkState) -> Result<DfaState> {
    let c = state.c.as_ref().expect("checked cell");
    let decoded = c
        .chunks(p.encoding.slot_width)
        .map(|slot| p.encoding.decode(slot))
        .collect::<Result<Vec<_>>>()?;
    collect_stack(decoded, false)
}

fn decode_naive(p: &NaiveDfaParams, state: &NetworkState) -> Result<DfaState> {
    let active: Vec<usize> = state
        .h
        .iter()
        .enumerate()
        .filter(|(_, x)| x.abs() > DECODE_TOLERANCE)
        .map(|(i, _)| i)
        .collect();
    match active.as_slice() {
        [] => Ok(DfaState::initial()),
        [u] if (state.h[*u] - 1.0).abs() <= DECODE_TOLERANCE => {
            Ok(p.index.state(u / p.dyck.input_size()))
        }
        _ => Err(Error::Decode(format!(
            "naive hidden state is not one-hot (active units {active:?})"
        ))),
    }
}
