//! Command-line front end.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use dyck_rnn::dyck::{self, DfaState, DyckParams, Token, TokenString};
use dyck_rnn::network::{Architecture, Construction, Network};
use dyck_rnn::numerics::NumericConfig;
use dyck_rnn::sampler::{self, Sampler, SamplerConfig};
use dyck_rnn::verify::{self, NetworkEncoder, NetworkModel, QuantizedEncoder, UniformModel, VerificationReport};
use dyck_rnn::weights;
use dyck_rnn::EncodingKind;

#[derive(Parser, Debug)]
#[command(name = "dyckrnn", version, about = "Hand-built RNN/LSTM generators for Dyck-(k,m)")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a network and write its weights as JSON.
    Build(BuildArgs),
    /// Sample a corpus from the reference distribution.
    Sample(SampleArgs),
    /// Check membership of a token string.
    Check(CheckArgs),
    /// Run verification suites; exits nonzero if any fails.
    Verify(VerifyArgs),
    /// Closing-bracket metric of a network (or the uniform baseline).
    Metric(MetricArgs),
    /// Print a step-by-step trace of a network on a prefix.
    Trace(TraceArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArchArg {
    Simple,
    Lstm,
    Naive,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum EncArg {
    OneHot,
    Binary,
}

#[derive(Args, Debug, Clone)]
pub struct Dims {
    /// Number of bracket types.
    #[arg(short = 'k', long = "k")]
    pub k: usize,
    /// Depth bound.
    #[arg(short = 'm', long = "m")]
    pub m: usize,
}

#[derive(Args, Debug, Clone, Default)]
pub struct NumericArgs {
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub zeta: Option<f64>,
}

#[derive(Args, Debug)]
pub struct BuildArgs {
    #[arg(long, value_enum, default_value = "simple")]
    pub arch: ArchArg,
    #[arg(long, value_enum, default_value = "one-hot")]
    pub enc: EncArg,
    #[command(flatten)]
    pub dims: Dims,
    #[command(flatten)]
    pub numeric: NumericArgs,
    /// Output path for the weight file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct WindowArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub min_len: Option<usize>,
    #[arg(long)]
    pub max_len: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[command(flatten)]
    pub dims: Dims,
    #[command(flatten)]
    pub window: WindowArgs,
    /// Sample until at least this many tokens.
    #[arg(long, default_value_t = 10_000)]
    pub tokens: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    #[command(flatten)]
    pub dims: Dims,
    /// Whitespace-separated tokens, e.g. "(1 (2 )2 )1 $".
    pub string: String,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SuiteArg {
    All,
    Equivalence,
    Stack,
    Margins,
    Distinct,
    Cross,
    Collide,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Verify this weight file instead of building.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Architecture to build; every construction when omitted.
    #[arg(long, value_enum)]
    pub arch: Option<ArchArg>,
    #[arg(long, value_enum)]
    pub enc: Option<EncArg>,
    #[arg(short = 'k', long = "k")]
    pub k: Option<usize>,
    #[arg(short = 'm', long = "m")]
    pub m: Option<usize>,
    #[command(flatten)]
    pub numeric: NumericArgs,
    #[arg(long, value_enum, default_value = "all")]
    pub suite: SuiteArg,
    /// Longest enumerated string (tokens including `$`).
    #[arg(long = "enum-len", default_value_t = 8)]
    pub enum_len: usize,
    /// Corpus for the corpus-based suites; sampled when omitted.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Strings to sample when no corpus is given.
    #[arg(long, default_value_t = 1000)]
    pub strings: usize,
    #[command(flatten)]
    pub window: WindowArgs,
    /// Truncation threshold; defaults to 1/(2(k+1)).
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Quantized encoder width for the collision suite.
    #[arg(short = 'd', default_value_t = 1)]
    pub d: u32,
    /// Quantized encoder bits per unit for the collision suite.
    #[arg(short = 'p', default_value_t = 1)]
    pub p: u32,
    /// Write `<out>.txt` and `<out>.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MetricArgs {
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub arch: Option<ArchArg>,
    #[arg(long, value_enum, default_value = "one-hot")]
    pub enc: EncArg,
    #[arg(short = 'k', long = "k")]
    pub k: Option<usize>,
    #[arg(short = 'm', long = "m")]
    pub m: Option<usize>,
    #[command(flatten)]
    pub numeric: NumericArgs,
    /// Score a model that is uniform over the vocabulary.
    #[arg(long)]
    pub uniform_baseline: bool,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Tokens to sample when no corpus is given.
    #[arg(long, default_value_t = 100_000)]
    pub tokens: usize,
    #[command(flatten)]
    pub window: WindowArgs,
}

#[derive(Args, Debug)]
pub struct TraceArgs {
    #[arg(long, value_enum, default_value = "lstm")]
    pub arch: ArchArg,
    #[arg(long, value_enum, default_value = "one-hot")]
    pub enc: EncArg,
    #[command(flatten)]
    pub dims: Dims,
    #[command(flatten)]
    pub numeric: NumericArgs,
    /// Prefix without `$`.
    pub prefix: String,
}

fn construction(arch: ArchArg, enc: EncArg) -> Construction {
    let enc = match enc {
        EncArg::OneHot => EncodingKind::OneHot,
        EncArg::Binary => EncodingKind::Binary,
    };
    match arch {
        ArchArg::Simple => Construction {
            architecture: Architecture::SimpleRnn,
            encoding: Some(enc),
        },
        ArchArg::Lstm => Construction {
            architecture: Architecture::Lstm,
            encoding: Some(enc),
        },
        ArchArg::Naive => Construction::NAIVE,
    }
}

fn numeric_config(args: &NumericArgs, k: usize) -> anyhow::Result<NumericConfig> {
    let mut cfg = NumericConfig::with_beta(args.beta.unwrap_or(20.0), k);
    if let Some(l) = args.lambda {
        cfg.lambda = l;
    }
    if let Some(z) = args.zeta {
        cfg.zeta = z;
    }
    cfg.validate().context("refusing numeric overrides")?;
    if let Some(w) = cfg.margin_shortfall(k) {
        eprintln!("warning: {w}; probability margins may fail");
    }
    Ok(cfg)
}

fn params(k: Option<usize>, m: Option<usize>) -> anyhow::Result<DyckParams> {
    match (k, m) {
        (Some(k), Some(m)) => Ok(DyckParams::new(k, m)?),
        _ => bail!("-k and -m are required"),
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating a temporary file in {}", dir.display()))?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .map_err(|e| anyhow!("writing {}: {}", path.display(), e.error))?;
    Ok(())
}

fn sampler_config(p: DyckParams, w: &WindowArgs, default: (usize, usize)) -> SamplerConfig {
    let (lo, hi) = default;
    SamplerConfig::new(p, w.seed.unwrap_or(0))
        .with_window(w.min_len.unwrap_or(lo), w.max_len.unwrap_or(hi))
}

fn read_corpus(path: &Path, p: &DyckParams) -> anyhow::Result<Vec<TokenString>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let (header, strings) = sampler::parse_corpus(&text)?;
    if let Some(h) = header {
        if (h.k, h.m) != (p.k(), p.m()) {
            bail!("corpus is for k={}, m={}, not k={}, m={}", h.k, h.m, p.k(), p.m());
        }
    }
    for s in &strings {
        if !dyck::is_member(p, s.tokens()) {
            bail!("corpus string \"{s}\" is not in Dyck-({},{})", p.k(), p.m());
        }
    }
    Ok(strings)
}

/// Runs the command; `Ok(false)` means a check failed and the exit status
/// should be nonzero.
pub fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Build(a) => cmd_build(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Check(a) => cmd_check(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Metric(a) => cmd_metric(a),
        Command::Trace(a) => cmd_trace(a),
    }
}

fn cmd_build(a: BuildArgs) -> anyhow::Result<bool> {
    let p = DyckParams::new(a.dims.k, a.dims.m)?;
    let cfg = numeric_config(&a.numeric, p.k())?;
    let c = construction(a.arch, a.enc);
    let net = Network::build(c, &p, &cfg)?;
    println!("construction: {c}");
    println!("hidden_units: {}", net.hidden_units());
    if let Some(out) = a.out {
        write_atomic(&out, &weights::export_network(&net)?)?;
        println!("wrote {}", out.display());
    }
    Ok(true)
}

fn cmd_sample(a: SampleArgs) -> anyhow::Result<bool> {
    let p = DyckParams::new(a.dims.k, a.dims.m)?;
    let cfg = sampler_config(p, &a.window, sampler::default_window(p.m()));
    let mut s = Sampler::new(cfg)?;
    let corpus = s.corpus(a.tokens)?;
    let text = sampler::format_corpus(&cfg, &corpus);
    match a.out {
        Some(out) => {
            write_atomic(&out, &text)?;
            let tokens: usize = corpus.iter().map(TokenString::len).sum();
            println!("wrote {} strings ({tokens} tokens) to {}", corpus.len(), out.display());
            if let Some(h) = s.stats.mean_hitting_time() {
                println!("mean_hitting_time: {h}");
            }
        }
        None => print!("{text}"),
    }
    Ok(true)
}

fn cmd_check(a: CheckArgs) -> anyhow::Result<bool> {
    let p = DyckParams::new(a.dims.k, a.dims.m)?;
    let w = TokenString::parse_for(&a.string, &p)?;
    let mut q = DfaState::initial();
    for (t, &tok) in w.tokens().iter().enumerate() {
        let next = dyck::transition(&p, &q, tok);
        if next.is_reject() {
            let reason = match (&q, tok) {
                (DfaState::Stack(s), Token::Open(_)) if s.len() == p.m() => "depth bound",
                (DfaState::Stack(s), Token::Close(_)) if s.is_empty() => "close on empty stack",
                (DfaState::Stack(_), Token::Close(_)) => "mismatched close",
                (DfaState::Stack(_), Token::End) => "end with open brackets",
                _ => "not allowed",
            };
            println!("false at position {}: {tok} ({reason}), state {q}", t + 1);
            return Ok(false);
        }
        q = next;
    }
    if q == DfaState::Accept {
        println!("true");
        Ok(true)
    } else {
        println!("false at position {}: missing $, state {q}", w.len() + 1);
        Ok(false)
    }
}

fn cmd_verify(a: VerifyArgs) -> anyhow::Result<bool> {
    let nets: Vec<Network> = match &a.weights {
        Some(path) => vec![weights::load_network(path)
            .with_context(|| format!("loading {}", path.display()))?],
        None => {
            let p = params(a.k, a.m)?;
            let cfg = numeric_config(&a.numeric, p.k())?;
            let constructions = match a.arch {
                Some(arch) => vec![construction(arch, a.enc.unwrap_or(EncArg::OneHot))],
                None => Construction::available(p.k()),
            };
            constructions
                .into_iter()
                .map(|c| Network::build(c, &p, &cfg))
                .collect::<Result<_, _>>()?
        }
    };
    let p = *nets[0].dyck();
    let eps = a.epsilon.unwrap_or_else(|| NumericConfig::epsilon(p.k()));
    let corpus = match &a.corpus {
        Some(path) => read_corpus(path, &p)?,
        None => {
            let cfg = sampler_config(p, &a.window, sampler::default_window(p.m()));
            Sampler::new(cfg)?.strings(a.strings)?
        }
    };
    let wants = |s: SuiteArg| a.suite == s || (a.suite == SuiteArg::All && s != SuiteArg::Collide);
    let mut reports: Vec<VerificationReport> = Vec::new();
    for net in &nets {
        if wants(SuiteArg::Equivalence) {
            reports.push(verify::check_generation_equivalence(net, a.enum_len, eps)?);
        }
        if wants(SuiteArg::Stack) {
            reports.push(verify::check_stack_correspondence(net, &corpus)?);
        }
        if wants(SuiteArg::Margins) {
            reports.push(verify::check_probability_margins(net, &corpus, eps)?);
        }
        if wants(SuiteArg::Distinct) {
            let mut r = verify::check_full_depth_distinctness(&NetworkEncoder(net), &p)?;
            r.instance.construction = Some(net.construction().to_string());
            reports.push(r);
        }
    }
    if wants(SuiteArg::Cross) && a.weights.is_none() {
        reports.push(verify::check_cross_construction_agreement(
            &p,
            nets[0].numeric(),
            a.enum_len,
            eps,
        )?);
    }
    if a.suite == SuiteArg::Collide {
        let enc = QuantizedEncoder::mixing(a.d, a.p, p.k())?;
        reports.push(verify::collision_report(&enc, &p)?);
    }

    let text: String = reports.iter().map(ToString::to_string).collect();
    print!("{text}");
    let pass = reports.iter().all(|r| r.pass);
    println!("overall: {}", if pass { "PASS" } else { "FAIL" });
    if let Some(out) = &a.out {
        let json = serde_json::to_string_pretty(&reports)?;
        write_atomic(&out.with_extension("txt"), &text)?;
        write_atomic(&out.with_extension("json"), &json)?;
    }
    Ok(pass)
}

fn cmd_metric(a: MetricArgs) -> anyhow::Result<bool> {
    let net = match (&a.weights, a.arch) {
        (Some(path), _) => Some(weights::load_network(path)?),
        (None, Some(arch)) => {
            let p = params(a.k, a.m)?;
            let cfg = numeric_config(&a.numeric, p.k())?;
            Some(Network::build(construction(arch, a.enc), &p, &cfg)?)
        }
        (None, None) if a.uniform_baseline => None,
        (None, None) => bail!("give --weights, --arch, or --uniform-baseline"),
    };
    let p = match &net {
        Some(n) => *n.dyck(),
        None => params(a.k, a.m.or(Some(1)))?,
    };
    let corpus = match &a.corpus {
        Some(path) => read_corpus(path, &p)?,
        None => {
            let cfg = sampler_config(p, &a.window, sampler::default_window(p.m()));
            Sampler::new(cfg)?.corpus(a.tokens)?
        }
    };
    let metric = if a.uniform_baseline {
        let mut m = UniformModel {
            vocab_size: p.vocab_size(),
        };
        verify::closing_metric(&mut m, &p, &corpus)?
    } else {
        let net = net.expect("network");
        verify::closing_metric(&mut NetworkModel::new(&net), &p, &corpus)?
    };
    print!("{metric}");
    Ok(true)
}

fn cmd_trace(a: TraceArgs) -> anyhow::Result<bool> {
    let p = DyckParams::new(a.dims.k, a.dims.m)?;
    let cfg = numeric_config(&a.numeric, p.k())?;
    let net = Network::build(construction(a.arch, a.enc), &p, &cfg)?;
    let prefix = TokenString::parse_for(&a.prefix, &p)?;
    print!("{}", net.trace_dump(prefix.tokens())?);
    Ok(true)
}
