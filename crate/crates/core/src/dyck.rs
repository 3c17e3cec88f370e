//! The bounded-depth Dyck language Dyck-(k,m) as a deterministic finite
//! automaton.
//!
//! States other than accept/reject are stacks of at most `m` open-bracket
//! indices. The automaton is never tabulated: transitions are computed
//! directly from the stack, so very large `(k, m)` stay usable.
//!
//! Token text syntax (used by the CLI, corpus files and test fixtures):
//! open bracket `i` is `(i`, close bracket `i` is `)i`, the end symbol is `$`,
//! tokens separated by whitespace, e.g. `(1 (2 )2 )1 $`. Bracket indices are
//! 1-based.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of bracket types `k` and depth bound `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyckParams {
    k: usize,
    m: usize,
}

impl DyckParams {
    pub fn new(k: usize, m: usize) -> Result<Self> {
        if k == 0 || m == 0 {
            return Err(Error::InvalidParams(format!(
                "k and m must be positive (got k={k}, m={m})"
            )));
        }
        Ok(Self { k, m })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Size of the output vocabulary: `2k` brackets plus the end symbol.
    pub fn vocab_size(&self) -> usize {
        2 * self.k + 1
    }

    /// Number of input symbols (brackets only).
    pub fn input_size(&self) -> usize {
        2 * self.k
    }

    /// Number of stack states: `sum_{d=0}^{m} k^d`, or `None` on overflow.
    pub fn stack_state_count(&self) -> Option<u128> {
        let mut total: u128 = 0;
        let mut pow: u128 = 1;
        for _ in 0..=self.m {
            total = total.checked_add(pow)?;
            pow = pow.checked_mul(self.k as u128)?;
        }
        Some(total)
    }

    /// Every token in vocabulary order: opens, closes, then `End`.
    pub fn vocabulary(&self) -> Vec<Token> {
        (0..self.vocab_size())
            .map(|i| Token::from_vocab_index(i, self.k))
            .collect()
    }

    /// Input alphabet (opens then closes), no `End`.
    pub fn alphabet(&self) -> Vec<Token> {
        (0..self.input_size())
            .map(|i| Token::from_vocab_index(i, self.k))
            .collect()
    }

    pub fn check_token(&self, token: Token) -> Result<()> {
        match token.bracket() {
            Some(i) if i == 0 || i > self.k => Err(Error::InvalidToken(format!(
                "bracket index {i} outside 1..={}",
                self.k
            ))),
            _ => Ok(()),
        }
    }
}

/// A vocabulary symbol. Bracket indices are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Token {
    Open(usize),
    Close(usize),
    End,
}

impl Token {
    pub fn bracket(&self) -> Option<usize> {
        match *self {
            Token::Open(i) | Token::Close(i) => Some(i),
            Token::End => None,
        }
    }

    pub fn is_open(&self) -> bool {
        matches!(self, Token::Open(_))
    }

    pub fn is_close(&self) -> bool {
        matches!(self, Token::Close(_))
    }

    /// Position in the vocabulary `[(1..(k, )1..)k, $]`.
    pub fn vocab_index(&self, k: usize) -> usize {
        match *self {
            Token::Open(i) => i - 1,
            Token::Close(i) => k + i - 1,
            Token::End => 2 * k,
        }
    }

    pub fn from_vocab_index(index: usize, k: usize) -> Token {
        if index < k {
            Token::Open(index + 1)
        } else if index < 2 * k {
            Token::Close(index - k + 1)
        } else {
            Token::End
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Open(i) => write!(f, "({i}"),
            Token::Close(i) => write!(f, "){i}"),
            Token::End => f.write_str("$"),
        }
    }
}

impl FromStr for Token {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "$" {
            return Ok(Token::End);
        }
        let bad = || Error::Parse {
            position: 0,
            message: format!("unrecognized token {s:?}"),
        };
        let (head, rest) = s.split_at(s.chars().next().map_or(0, char::len_utf8));
        let index: usize = rest.parse().map_err(|_| bad())?;
        if index == 0 {
            return Err(bad());
        }
        match head {
            "(" => Ok(Token::Open(index)),
            ")" => Ok(Token::Close(index)),
            _ => Err(bad()),
        }
    }
}

/// An ordered token sequence. `End` may only appear once, as the last token.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TokenString(Vec<Token>);

impl TokenString {
    pub fn new(tokens: Vec<Token>) -> Result<Self> {
        if let Some(pos) = tokens.iter().position(|t| *t == Token::End) {
            if pos + 1 != tokens.len() {
                return Err(Error::Parse {
                    position: pos + 1,
                    message: "`$` may only appear as the final token".into(),
                });
            }
        }
        Ok(Self(tokens))
    }

    /// Parses the textual syntax; positions in errors are 1-based.
    pub fn parse(text: &str) -> Result<Self> {
        let tokens = text
            .split_whitespace()
            .enumerate()
            .map(|(i, raw)| {
                raw.parse::<Token>().map_err(|e| match e {
                    Error::Parse { message, .. } => Error::Parse {
                        position: i + 1,
                        message,
                    },
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(tokens)
    }

    /// Parses and checks every bracket index against `params`.
    pub fn parse_for(text: &str, params: &DyckParams) -> Result<Self> {
        let s = Self::parse(text)?;
        for (i, t) in s.0.iter().enumerate() {
            params.check_token(*t).map_err(|e| Error::Parse {
                position: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(s)
    }

    pub fn tokens(&self) -> &[Token] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ends_with_end(&self) -> bool {
        self.0.last() == Some(&Token::End)
    }

    /// The tokens before a trailing `End`, if any.
    pub fn body(&self) -> &[Token] {
        if self.ends_with_end() {
            &self.0[..self.0.len() - 1]
        } else {
            &self.0
        }
    }

    pub fn into_inner(self) -> Vec<Token> {
        self.0
    }
}

impl fmt::Display for TokenString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        format_tokens(&self.0, f)
    }
}

/// Renders a token slice in text syntax.
pub fn render(tokens: &[Token]) -> String {
    struct Fmt<'a>(&'a [Token]);
    impl fmt::Display for Fmt<'_> {
        fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            format_tokens(self.0, f)
        }
    }
    Fmt(tokens).to_string()
}

fn format_tokens(tokens: &[Token], f: &mut fmt::Formatter<'_>) -> fmt::Result {
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            f.write_str(" ")?;
        }
        write!(f, "{t}")?;
    }
    Ok(())
}

/// A state of the automaton. The stack lists open-bracket indices bottom
/// first, so the last element is the top.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DfaState {
    Stack(Vec<usize>),
    Accept,
    Reject,
}

impl DfaState {
    pub fn initial() -> Self {
        DfaState::Stack(Vec::new())
    }

    pub fn stack(&self) -> Option<&[usize]> {
        match self {
            DfaState::Stack(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_reject(&self) -> bool {
        matches!(self, DfaState::Reject)
    }
}

impl fmt::Display for DfaState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DfaState::Stack(s) => {
                f.write_str("[")?;
                for (i, b) in s.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "({b}")?;
                }
                f.write_str("]")
            }
            DfaState::Accept => f.write_str("[$]"),
            DfaState::Reject => f.write_str("reject"),
        }
    }
}

/// One application of the transition function. Total: every pair not
/// explicitly allowed goes to `Reject`, and `Reject`/`Accept` absorb
/// (nothing may follow `End`).
pub fn transition(params: &DyckParams, state: &DfaState, token: Token) -> DfaState {
    let stack = match state {
        DfaState::Stack(s) => s,
        DfaState::Accept | DfaState::Reject => return DfaState::Reject,
    };
    if params.check_token(token).is_err() {
        return DfaState::Reject;
    }
    match token {
        Token::End if stack.is_empty() => DfaState::Accept,
        Token::Open(i) if stack.len() < params.m => {
            let mut next = Vec::with_capacity(stack.len() + 1);
            next.extend_from_slice(stack);
            next.push(i);
            DfaState::Stack(next)
        }
        Token::Close(i) if stack.last() == Some(&i) => {
            DfaState::Stack(stack[..stack.len() - 1].to_vec())
        }
        _ => DfaState::Reject,
    }
}

/// Left fold of [`transition`] from the empty stack.
pub fn run(params: &DyckParams, tokens: &[Token]) -> DfaState {
    tokens
        .iter()
        .fold(DfaState::initial(), |q, t| transition(params, &q, *t))
}

pub fn is_member(params: &DyckParams, tokens: &[Token]) -> bool {
    run(params, tokens) == DfaState::Accept
}

/// Opens minus closes; may be negative for non-prefixes.
pub fn depth(tokens: &[Token]) -> i64 {
    tokens
        .iter()
        .map(|t| match t {
            Token::Open(_) => 1,
            Token::Close(_) => -1,
            Token::End => 0,
        })
        .sum()
}

/// Tokens that do not lead to `Reject`, in vocabulary order.
pub fn allowed_tokens(params: &DyckParams, state: &DfaState) -> Vec<Token> {
    let stack = match state {
        DfaState::Stack(s) => s,
        DfaState::Accept | DfaState::Reject => return Vec::new(),
    };
    let mut out = Vec::with_capacity(params.k + 1);
    if stack.len() < params.m {
        out.extend((1..=params.k).map(Token::Open));
    }
    if let Some(&top) = stack.last() {
        out.push(Token::Close(top));
    } else {
        out.push(Token::End);
    }
    out
}

/// Boolean mask over the vocabulary marking allowed next tokens.
pub fn allowed_mask(params: &DyckParams, state: &DfaState) -> Vec<bool> {
    let mut mask = vec![false; params.vocab_size()];
    for t in allowed_tokens(params, state) {
        mask[t.vocab_index(params.k)] = true;
    }
    mask
}

/// The tokens that close every open bracket in `stack`, top first, followed
/// by `End`.
pub fn completion(stack: &[usize]) -> Vec<Token> {
    stack
        .iter()
        .rev()
        .map(|&i| Token::Close(i))
        .chain(std::iter::once(Token::End))
        .collect()
}

/// Every stack state with up to `m` elements, shortest first, lexicographic
/// within a length. Materializes `sum k^d` states, so only call on small
/// instances.
pub fn enumerate_stack_states(params: &DyckParams) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut frontier: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..params.m {
        let mut next = Vec::with_capacity(frontier.len() * params.k);
        for s in &frontier {
            for i in 1..=params.k {
                let mut t = s.clone();
                t.push(i);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(k: usize, m: usize) -> DyckParams {
        DyckParams::new(k, m).unwrap()
    }

    fn s(text: &str) -> Vec<Token> {
        TokenString::parse(text).unwrap().into_inner()
    }

    #[test]
    fn transition_examples() {
        let params = p(2, 2);
        assert_eq!(
            transition(&params, &DfaState::initial(), Token::Open(1)),
            DfaState::Stack(vec![1])
        );
        assert_eq!(
            transition(&params, &DfaState::Stack(vec![1, 2]), Token::Close(2)),
            DfaState::Stack(vec![1])
        );
        for t in params.vocabulary() {
            assert_eq!(transition(&params, &DfaState::Reject, t), DfaState::Reject);
        }
        let full = DfaState::Stack(vec![1, 1]);
        assert_eq!(transition(&params, &full, Token::Open(1)), DfaState::Reject);
        assert_eq!(transition(&params, &full, Token::End), DfaState::Reject);
        assert_eq!(
            transition(&params, &DfaState::initial(), Token::End),
            DfaState::Accept
        );
    }

    #[test]
    fn run_and_membership() {
        assert_eq!(run(&p(1, 1), &s("(1 )1 $")), DfaState::Accept);
        assert_eq!(run(&p(1, 1), &s("(1 (1")), DfaState::Reject);
        assert_eq!(run(&p(2, 2), &s("(1 )2")), DfaState::Reject);
        assert!(is_member(&p(2, 2), &s("(2 (1 )1 )2 $")));
        assert!(!is_member(&p(1, 1), &s("(1 )1")));
    }

    #[test]
    fn depth_examples() {
        assert_eq!(depth(&[]), 0);
        assert_eq!(depth(&s("(1 (2")), 2);
        assert_eq!(depth(&s("(1 )1")), 0);
        assert_eq!(depth(&s(")1 )1")), -2);
    }

    #[test]
    fn allowed_tokens_examples() {
        assert_eq!(
            allowed_tokens(&p(2, 3), &DfaState::initial()),
            vec![Token::Open(1), Token::Open(2), Token::End]
        );
        let full = DfaState::Stack(vec![1, 2]);
        let allowed = allowed_tokens(&p(2, 2), &full);
        assert_eq!(allowed, vec![Token::Close(2)]);
        for t in p(2, 2).vocabulary() {
            let rejects = transition(&p(2, 2), &full, t).is_reject();
            assert_eq!(!rejects, allowed.contains(&t));
        }
        assert!(allowed_tokens(&p(2, 2), &DfaState::Reject).is_empty());
    }

    #[test]
    fn stack_state_count_matches_enumeration() {
        for k in 1..=3 {
            for m in 1..=3 {
                let params = p(k, m);
                let states = enumerate_stack_states(&params);
                let expected: usize = (0..=m).map(|d| k.pow(d as u32)).sum();
                assert_eq!(states.len(), expected);
                assert_eq!(params.stack_state_count(), Some(expected as u128));
            }
        }
    }

    #[test]
    fn parse_and_render() {
        let text = "(1 (2 )2 )1 $";
        let ts = TokenString::parse(text).unwrap();
        assert_eq!(ts.to_string(), text);
        assert!(matches!(
            TokenString::parse("(1 $ )1"),
            Err(Error::Parse { position: 2, .. })
        ));
        assert!(matches!(
            TokenString::parse("(1 [2"),
            Err(Error::Parse { position: 2, .. })
        ));
        assert!(matches!(
            TokenString::parse_for("(1 (3", &p(2, 2)),
            Err(Error::Parse { position: 2, .. })
        ));
        assert!(TokenString::parse("(0").is_err());
    }

    #[test]
    fn invalid_params() {
        assert!(DyckParams::new(0, 1).is_err());
        assert!(DyckParams::new(1, 0).is_err());
    }
}
