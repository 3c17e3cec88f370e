//! Codewords for stack slots.
//!
//! A slot holds either the zero vector (empty) or the codeword of one open
//! bracket. Two codebooks exist: one-hot (`k` units per slot) and
//! binary-with-negation (`3 ceil(log2 k) - 1` units per slot).
//!
//! Binary codewords are `[p; 1 - p; tail]` where `p` is the
//! `ceil(log2 k)`-bit expansion of `i - 1`, least-significant bit first, and
//! `tail` is `ceil(log2 k) - 1` copies of `+1` for the Simple RNN or `-1` for
//! the LSTM. The LSTM tail makes every codeword sum to exactly 1.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dyck::DyckParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingKind {
    OneHot,
    Binary,
}

impl fmt::Display for EncodingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EncodingKind::OneHot => "one_hot",
            EncodingKind::Binary => "binary",
        })
    }
}

/// Which stack construction a codebook is built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StackArch {
    SimpleRnn,
    Lstm,
}

/// `ceil(log2 k)` for `k >= 1`.
pub fn ceil_log2(k: usize) -> usize {
    assert!(k >= 1);
    (usize::BITS - (k - 1).leading_zeros()) as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoding {
    pub kind: EncodingKind,
    pub arch: StackArch,
    pub slot_width: usize,
    /// `codebook[i - 1]` is the codeword of open bracket `i`.
    pub codebook: Vec<Vec<f64>>,
}

/// Per-coordinate tolerance when matching a slot against the codebook.
pub const DECODE_TOLERANCE: f64 = 1e-9;

impl Encoding {
    pub fn build(params: &DyckParams, kind: EncodingKind, arch: StackArch) -> Result<Self> {
        let k = params.k();
        let codebook = match kind {
            EncodingKind::OneHot => (0..k)
                .map(|i| {
                    let mut v = vec![0.0; k];
                    v[i] = 1.0;
                    v
                })
                .collect(),
            EncodingKind::Binary => {
                if k < 2 {
                    return Err(Error::UnsupportedEncoding(
                        "binary encoding requires k > 1; use one-hot for k = 1".into(),
                    ));
                }
                let bits = ceil_log2(k);
                let tail = match arch {
                    StackArch::SimpleRnn => 1.0,
                    StackArch::Lstm => -1.0,
                };
                (0..k)
                    .map(|i| {
                        let p: Vec<f64> = (0..bits).map(|b| ((i >> b) & 1) as f64).collect();
                        p.iter()
                            .copied()
                            .chain(p.iter().map(|x| 1.0 - x))
                            .chain(std::iter::repeat_n(tail, bits - 1))
                            .collect()
                    })
                    .collect()
            }
        };
        let slot_width = match kind {
            EncodingKind::OneHot => k,
            EncodingKind::Binary => 3 * ceil_log2(k) - 1,
        };
        Ok(Self {
            kind,
            arch,
            slot_width,
            codebook,
        })
    }

    pub fn k(&self) -> usize {
        self.codebook.len()
    }

    /// Codeword of open bracket `i` (1-based).
    pub fn codeword(&self, i: usize) -> &[f64] {
        &self.codebook[i - 1]
    }

    fn bits(&self) -> usize {
        ceil_log2(self.k())
    }

    /// A vector whose dot product with every codeword is exactly 1
    /// (used to detect "slot non-empty").
    pub fn detector(&self) -> Vec<f64> {
        match (self.kind, self.arch) {
            (EncodingKind::OneHot, _) | (EncodingKind::Binary, StackArch::Lstm) => {
                vec![1.0; self.slot_width]
            }
            (EncodingKind::Binary, StackArch::SimpleRnn) => {
                let b = self.bits();
                let mut v = vec![1.0; 2 * b];
                v.extend(std::iter::repeat_n(-1.0, b - 1));
                v
            }
        }
    }

    /// A vector `t_j` with `t_j . codeword(i) = 1` if `i = j` and `<= 0`
    /// otherwise (used to read which bracket is on top).
    pub fn match_template(&self, j: usize) -> Vec<f64> {
        match self.kind {
            EncodingKind::OneHot => self.codeword(j).to_vec(),
            EncodingKind::Binary => {
                let b = self.bits();
                let cw = self.codeword(j);
                let mut v = cw[..2 * b].to_vec();
                v.extend(cw[2 * b..].iter().map(|x| -x));
                v
            }
        }
    }

    /// Maps a slot vector back to a bracket: `Ok(None)` for the empty slot,
    /// `Ok(Some(i))` for codeword `i`, an error for anything else.
    pub fn decode(&self, slot: &[f64]) -> Result<Option<usize>> {
        let close = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .all(|(x, y)| (x - y).abs() <= DECODE_TOLERANCE)
        };
        if slot.iter().all(|x| x.abs() <= DECODE_TOLERANCE) {
            return Ok(None);
        }
        self.codebook
            .iter()
            .position(|cw| close(cw, slot))
            .map(|i| Some(i + 1))
            .ok_or_else(|| Error::Decode(format!("slot {slot:?} is not a codeword")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn enc(k: usize, kind: EncodingKind, arch: StackArch) -> Encoding {
        Encoding::build(&DyckParams::new(k, 1).unwrap(), kind, arch).unwrap()
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn ceil_log2_values() {
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(3), 2);
        assert_eq!(ceil_log2(4), 2);
        assert_eq!(ceil_log2(5), 3);
        assert_eq!(ceil_log2(128), 7);
        assert_eq!(ceil_log2(100_000), 17);
    }

    #[test]
    fn one_hot_k2() {
        let e = enc(2, EncodingKind::OneHot, StackArch::Lstm);
        assert_eq!(e.codeword(1), &[1.0, 0.0]);
        assert_eq!(e.codeword(2), &[0.0, 1.0]);
    }

    #[test]
    fn binary_simple_k2() {
        let e = enc(2, EncodingKind::Binary, StackArch::SimpleRnn);
        assert_eq!(e.slot_width, 2);
        assert_eq!(e.codeword(1), &[0.0, 1.0]);
        assert_eq!(e.codeword(2), &[1.0, 0.0]);
    }

    #[test]
    fn binary_lstm_k4_sums_to_one() {
        let e = enc(4, EncodingKind::Binary, StackArch::Lstm);
        assert_eq!(e.slot_width, 5);
        for cw in &e.codebook {
            assert_eq!(cw.len(), 5);
            assert_eq!(cw.iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn binary_rejects_k1() {
        let p = DyckParams::new(1, 2).unwrap();
        assert!(Encoding::build(&p, EncodingKind::Binary, StackArch::SimpleRnn).is_err());
        assert!(Encoding::build(&p, EncodingKind::OneHot, StackArch::SimpleRnn).is_ok());
    }

    #[test]
    fn codebooks_valid_and_templates_separate() {
        for k in [2usize, 3, 4, 5, 8, 17, 32] {
            for kind in [EncodingKind::OneHot, EncodingKind::Binary] {
                for arch in [StackArch::SimpleRnn, StackArch::Lstm] {
                    let e = enc(k, kind, arch);
                    let allowed: &[f64] = match (kind, arch) {
                        (EncodingKind::Binary, StackArch::Lstm) => &[-1.0, 0.0, 1.0],
                        _ => &[0.0, 1.0],
                    };
                    for (a, cw) in e.codebook.iter().enumerate() {
                        assert!(cw.iter().all(|x| allowed.contains(x)));
                        assert!(cw.iter().any(|x| *x != 0.0));
                        for other in &e.codebook[a + 1..] {
                            assert_ne!(cw, other);
                        }
                        if arch == StackArch::Lstm {
                            assert_eq!(cw.iter().sum::<f64>(), 1.0);
                        }
                        assert_eq!(dot(&e.detector(), cw), 1.0);
                    }
                    for i in 1..=k {
                        for j in 1..=k {
                            let d = dot(&e.match_template(j), e.codeword(i));
                            if i == j {
                                assert_eq!(d, 1.0);
                            } else {
                                assert!(d <= 0.0, "k={k} {kind:?} {arch:?} i={i} j={j} d={d}");
                            }
                        }
                        assert_eq!(e.decode(e.codeword(i)).unwrap(), Some(i));
                    }
                    assert_eq!(e.decode(&vec![0.0; e.slot_width]).unwrap(), None);
                    let mut junk = vec![0.0; e.slot_width];
                    junk[0] = 0.5;
                    assert!(e.decode(&junk).is_err());
                }
            }
        }
    }
}
