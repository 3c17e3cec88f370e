//! Reference distribution over Dyck-(k,m).
//!
//! At the empty stack push or end with probability 1/2 each; below the depth
//! bound push or pop with probability 1/2 each; at the bound pop. Pushes pick
//! a bracket type uniformly. Strings outside the length window are rejected
//! and redrawn; an attempt is abandoned as soon as it can no longer finish
//! within `max_len`, which leaves the distribution inside the window
//! unchanged.

use std::fmt::Write as _;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dyck::{DyckParams, Token, TokenString};
use crate::error::{Error, Result};

/// Name of the generator, written to corpus headers.
pub const RNG_NAME: &str = "ChaCha8Rng";

pub const DEFAULT_RETRY_BUDGET: u64 = 1_000_000;

/// Default length window (token counts including the end symbol).
pub fn default_window(m: usize) -> (usize, usize) {
    if m <= 3 {
        (1, 84)
    } else {
        (1, 180)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplerConfig {
    pub params: DyckParams,
    pub seed: u64,
    pub min_len: usize,
    pub max_len: usize,
    pub retry_budget: u64,
}

impl SamplerConfig {
    pub fn new(params: DyckParams, seed: u64) -> Self {
        let (min_len, max_len) = default_window(params.m());
        Self {
            params,
            seed,
            min_len,
            max_len,
            retry_budget: DEFAULT_RETRY_BUDGET,
        }
    }

    pub fn with_window(mut self, min_len: usize, max_len: usize) -> Self {
        self.min_len = min_len;
        self.max_len = max_len;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_len == 0 || self.min_len > self.max_len {
            return Err(Error::InvalidParams(format!(
                "length window {}:{} must satisfy 1 <= min_len <= max_len",
                self.min_len, self.max_len
            )));
        }
        if self.max_len < 1 {
            return Err(Error::InvalidParams("max_len must be positive".into()));
        }
        Ok(())
    }
}

/// Counts of the process's decisions, over every attempt including rejected
/// ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SamplerStats {
    pub empty_push: u64,
    pub empty_end: u64,
    pub partial_push: u64,
    pub partial_pop: u64,
    pub full_pop: u64,
    /// `push_type[i - 1]` counts pushes of bracket `i`.
    pub push_type: Vec<u64>,
    pub attempts: u64,
    pub accepted: u64,
    hitting_total: u64,
    hitting_count: u64,
}

impl SamplerStats {
    /// Mean number of tokens from the start until the stack first reaches
    /// depth `m`, over attempts where it did.
    pub fn mean_hitting_time(&self) -> Option<f64> {
        (self.hitting_count > 0).then(|| self.hitting_total as f64 / self.hitting_count as f64)
    }
}

pub struct Sampler {
    cfg: SamplerConfig,
    rng: ChaCha8Rng,
    pub stats: SamplerStats,
}

impl Sampler {
    pub fn new(cfg: SamplerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            stats: SamplerStats {
                push_type: vec![0; cfg.params.k()],
                ..Default::default()
            },
        })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.cfg
    }

    /// One attempt of the process, `None` if it fell outside the window.
    fn attempt(&mut self) -> Option<Vec<Token>> {
        let (k, m) = (self.cfg.params.k(), self.cfg.params.m());
        let max_len = self.cfg.max_len;
        let mut stack: Vec<usize> = Vec::new();
        let mut out = Vec::new();
        let mut hit = false;
        self.stats.attempts += 1;
        loop {
            let push = match stack.len() {
                0 => {
                    let push = self.rng.gen_bool(0.5);
                    if push {
                        self.stats.empty_push += 1;
                    } else {
                        self.stats.empty_end += 1;
                        out.push(Token::End);
                        break;
                    }
                    true
                }
                d if d < m => {
                    let push = self.rng.gen_bool(0.5);
                    if push {
                        self.stats.partial_push += 1;
                    } else {
                        self.stats.partial_pop += 1;
                    }
                    push
                }
                _ => {
                    self.stats.full_pop += 1;
                    false
                }
            };
            if push {
                let i = self.rng.gen_range(1..=k);
                self.stats.push_type[i - 1] += 1;
                stack.push(i);
                out.push(Token::Open(i));
                if stack.len() == m && !hit {
                    hit = true;
                    self.stats.hitting_total += out.len() as u64;
                    self.stats.hitting_count += 1;
                }
            } else {
                let i = stack.pop().expect("non-empty");
                out.push(Token::Close(i));
            }
            // shortest completion is the remaining closes plus the end symbol
            if out.len() + stack.len() + 1 > max_len {
                return None;
            }
        }
        (out.len() >= self.cfg.min_len && out.len() <= max_len).then_some(out)
    }

    pub fn next_string(&mut self) -> Result<TokenString> {
        for _ in 0..self.cfg.retry_budget {
            if let Some(tokens) = self.attempt() {
                self.stats.accepted += 1;
                return TokenString::new(tokens);
            }
        }
        Err(Error::RetryBudget(format!(
            "no string with length in {}:{} after {} attempts (k={}, m={})",
            self.cfg.min_len,
            self.cfg.max_len,
            self.cfg.retry_budget,
            self.cfg.params.k(),
            self.cfg.params.m()
        )))
    }

    /// Samples strings until their total token count reaches `n_tokens`.
    pub fn corpus(&mut self, n_tokens: usize) -> Result<Vec<TokenString>> {
        let mut out = Vec::new();
        let mut total = 0;
        while total < n_tokens {
            let s = self.next_string()?;
            total += s.len();
            out.push(s);
        }
        Ok(out)
    }

    /// Samples exactly `n` strings.
    pub fn strings(&mut self, n: usize) -> Result<Vec<TokenString>> {
        (0..n).map(|_| self.next_string()).collect()
    }
}

pub fn sample_string(cfg: &SamplerConfig) -> Result<TokenString> {
    Sampler::new(*cfg)?.next_string()
}

pub fn sample_corpus(cfg: &SamplerConfig, n_tokens: usize) -> Result<Vec<TokenString>> {
    Sampler::new(*cfg)?.corpus(n_tokens)
}

/// Corpus file: a header line, then one string per line.
///
/// ```text
/// # k=2 m=3 seed=7 min_len=1 max_len=84 rng=ChaCha8Rng
/// (1 )1 $
/// $
/// ```
pub fn format_corpus(cfg: &SamplerConfig, corpus: &[TokenString]) -> String {
    let mut out = format!(
        "# k={} m={} seed={} min_len={} max_len={} rng={}\n",
        cfg.params.k(),
        cfg.params.m(),
        cfg.seed,
        cfg.min_len,
        cfg.max_len,
        RNG_NAME
    );
    for s in corpus {
        let _ = writeln!(out, "{s}");
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusHeader {
    pub k: usize,
    pub m: usize,
    pub seed: u64,
    pub min_len: usize,
    pub max_len: usize,
    pub rng: String,
}

/// Parses a corpus file. The header is optional; blank lines are skipped.
pub fn parse_corpus(text: &str) -> Result<(Option<CorpusHeader>, Vec<TokenString>)> {
    let mut header = None;
    let mut strings = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if lineno == 0 {
                header = Some(parse_header(rest)?);
            }
            continue;
        }
        strings.push(TokenString::parse(line).map_err(|e| {
            Error::InvalidParams(format!("corpus line {}: {e}", lineno + 1))
        })?);
    }
    Ok((header, strings))
}

fn parse_header(rest: &str) -> Result<CorpusHeader> {
    let mut fields = std::collections::HashMap::new();
    for part in rest.split_whitespace() {
        if let Some((key, value)) = part.split_once('=') {
            fields.insert(key, value);
        }
    }
    let get = |key: &str| -> Result<&str> {
        fields
            .get(key)
            .copied()
            .ok_or_else(|| Error::InvalidParams(format!("corpus header lacks `{key}`")))
    };
    let num = |key: &str| -> Result<u64> {
        get(key)?
            .parse()
            .map_err(|_| Error::InvalidParams(format!("corpus header field `{key}` is not a number")))
    };
    Ok(CorpusHeader {
        k: num("k")? as usize,
        m: num("m")? as usize,
        seed: num("seed")?,
        min_len: num("min_len")? as usize,
        max_len: num("max_len")? as usize,
        rng: get("rng")?.to_string(),
    })
}
