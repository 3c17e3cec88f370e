//! JSON weight files.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "architecture": "lstm",
//!   "k": 2, "m": 2,
//!   "encoding_kind": "one_hot",
//!   "numeric_config": {"beta": 20.0, "lambda": 53.5, "zeta": 5.0},
//!   "matrices": {"W_f": {"rows": 4, "cols": 4, "data": [...]}, ...}
//! }
//! ```
//!
//! Biases are stored as single-column matrices. `encoding_kind` is `null` for
//! the naive construction.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dyck::DyckParams;
use crate::encoding::{Encoding, EncodingKind, StackArch};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::network::{
    identity, Architecture, LstmParams, NaiveDfaParams, Network, SimpleRnnParams, StateIndex,
};
use crate::numerics::NumericConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightFile {
    pub schema_version: u32,
    pub architecture: Architecture,
    pub k: usize,
    pub m: usize,
    pub encoding_kind: Option<EncodingKind>,
    pub numeric_config: NumericConfig,
    pub matrices: BTreeMap<String, Matrix>,
}

fn column(v: &[f64]) -> Matrix {
    Matrix {
        rows: v.len(),
        cols: 1,
        data: v.to_vec(),
    }
}

impl WeightFile {
    pub fn from_network(net: &Network) -> Self {
        let mut mats = BTreeMap::new();
        let mut put = |name: &str, m: Matrix| {
            mats.insert(name.to_string(), m);
        };
        let params = *net.dyck();
        match net {
            Network::Simple(p) => {
                put("W", p.w.clone());
                put("U", p.u.clone());
                put("b", column(&p.b));
            }
            Network::Naive(p) => {
                put("W", p.w.clone());
                put("U", p.u.clone());
                put("b", column(&p.b));
            }
            Network::Lstm(p) => {
                for (g, w, u, b) in [
                    ("f", &p.w_f, &p.u_f, &p.b_f),
                    ("i", &p.w_i, &p.u_i, &p.b_i),
                    ("o", &p.w_o, &p.u_o, &p.b_o),
                    ("c", &p.w_c, &p.u_c, &p.b_c),
                ] {
                    put(&format!("W_{g}"), w.clone());
                    put(&format!("U_{g}"), u.clone());
                    put(&format!("b_{g}"), column(b));
                }
            }
        }
        let (v, b_v) = net.readout();
        put("V", v.clone());
        put("b_v", column(b_v));
        put("E", identity(params.input_size()));
        let c = net.construction();
        Self {
            schema_version: SCHEMA_VERSION,
            architecture: c.architecture,
            k: params.k(),
            m: params.m(),
            encoding_kind: c.encoding,
            numeric_config: *net.numeric(),
            matrices: mats,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Rebuilds a network, checking every matrix shape.
    pub fn into_network(mut self) -> Result<Network> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Weights(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let params = DyckParams::new(self.k, self.m)?;
        let numeric = self.numeric_config;
        let sigma = params.input_size();
        let vocab = params.vocab_size();

        let e = self.take("E", sigma, sigma)?;
        if e != identity(sigma) {
            return Err(Error::Weights("E must be the identity".into()));
        }

        let hidden = match self.architecture {
            Architecture::Lstm => self.shape_of("W_f")?.0,
            _ => self.shape_of("W")?.0,
        };
        let v = self.take("V", vocab, hidden)?;
        let b_v = self.take_bias("b_v", vocab)?;

        let (kind, architecture) = (self.encoding_kind, self.architecture);
        let encoding = |arch| -> Result<Encoding> {
            let kind = kind.ok_or_else(|| {
                Error::Weights(format!("{architecture} requires encoding_kind"))
            })?;
            Encoding::build(&params, kind, arch)
        };

        let net = match self.architecture {
            Architecture::SimpleRnn => {
                let encoding = encoding(StackArch::SimpleRnn)?;
                let expect = 2 * params.m() * encoding.slot_width;
                if hidden != expect {
                    return Err(Error::Weights(format!(
                        "hidden size {hidden} does not match the layout ({expect})"
                    )));
                }
                Network::Simple(SimpleRnnParams {
                    dyck: params,
                    encoding,
                    numeric,
                    w: self.take("W", hidden, hidden)?,
                    u: self.take("U", hidden, sigma)?,
                    b: self.take_bias("b", hidden)?,
                    v,
                    b_v,
                })
            }
            Architecture::Lstm => {
                let encoding = encoding(StackArch::Lstm)?;
                let expect = params.m() * encoding.slot_width;
                if hidden != expect {
                    return Err(Error::Weights(format!(
                        "hidden size {hidden} does not match the layout ({expect})"
                    )));
                }
                Network::Lstm(LstmParams {
                    dyck: params,
                    encoding,
                    numeric,
                    w_f: self.take("W_f", hidden, hidden)?,
                    u_f: self.take("U_f", hidden, sigma)?,
                    b_f: self.take_bias("b_f", hidden)?,
                    w_i: self.take("W_i", hidden, hidden)?,
                    u_i: self.take("U_i", hidden, sigma)?,
                    b_i: self.take_bias("b_i", hidden)?,
                    w_o: self.take("W_o", hidden, hidden)?,
                    u_o: self.take("U_o", hidden, sigma)?,
                    b_o: self.take_bias("b_o", hidden)?,
                    w_c: self.take("W_c", hidden, hidden)?,
                    u_c: self.take("U_c", hidden, sigma)?,
                    b_c: self.take_bias("b_c", hidden)?,
                    v,
                    b_v,
                })
            }
            Architecture::NaiveDfa => {
                let index = StateIndex::new(params)
                    .ok_or_else(|| Error::Weights("state space too large".into()))?;
                let expect = index.len() * sigma;
                if hidden != expect {
                    return Err(Error::Weights(format!(
                        "hidden size {hidden} does not match the layout ({expect})"
                    )));
                }
                Network::Naive(NaiveDfaParams {
                    dyck: params,
                    numeric,
                    index,
                    w: self.take("W", hidden, hidden)?,
                    u: self.take("U", hidden, sigma)?,
                    b: self.take_bias("b", hidden)?,
                    v,
                    b_v,
                })
            }
        };
        if let Some(extra) = self.matrices.keys().next() {
            return Err(Error::Weights(format!("unexpected matrix `{extra}`")));
        }
        Ok(net)
    }

    fn shape_of(&self, name: &str) -> Result<(usize, usize)> {
        self.matrices
            .get(name)
            .map(|m| (m.rows, m.cols))
            .ok_or_else(|| Error::Weights(format!("missing matrix `{name}`")))
    }

    fn take(&mut self, name: &str, rows: usize, cols: usize) -> Result<Matrix> {
        let m = self
            .matrices
            .remove(name)
            .ok_or_else(|| Error::Weights(format!("missing matrix `{name}`")))?;
        if m.rows != rows || m.cols != cols || m.data.len() != rows * cols {
            return Err(Error::Weights(format!(
                "`{name}` is {}x{} with {} values, expected {rows}x{cols}",
                m.rows,
                m.cols,
                m.data.len()
            )));
        }
        Ok(m)
    }

    fn take_bias(&mut self, name: &str, len: usize) -> Result<Vec<f64>> {
        Ok(self.take(name, len, 1)?.data)
    }
}

pub fn export_network(net: &Network) -> Result<String> {
    WeightFile::from_network(net).to_json()
}

pub fn import_network(json: &str) -> Result<Network> {
    WeightFile::from_json(json)?.into_network()
}

pub fn load_network(path: &Path) -> Result<Network> {
    import_network(&std::fs::read_to_string(path)?)
}
