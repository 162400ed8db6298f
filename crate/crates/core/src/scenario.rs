//! Scenario files, batch runs, sweeps and report rendering.
//!
//! A scenario is a TOML document (see `docs/scenario.schema.json`). Field
//! and section validation happens while deserializing, so every error carries
//! the line and column of the offending value.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::{self, Deserializer};
use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::auth::{AuthError, OtsParams};
use crate::bb84::{BasisStrategy, ProtocolConfig};
use crate::channel::{ChannelParams, EveKind, EveModel};
use crate::netsim::{network_csv, HashPqc, HybridPolicy, NetError, Network, NetworkTopology, NETWORK_CSV_HEADER};
use crate::postproc::{AbortReason, CodeParams, PostprocError};
use crate::rng::{derive_rng, derive_seed};
use crate::session::{RoundOutcome, RoundReport, Session, SessionConfig, SessionError};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{0}")]
    Parse(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Topology { path: String, source: NetError },
    #[error("{0}")]
    Invalid(String),
}

/// Process exit codes; every failure mode maps to exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExitStatus {
    Success = 0,
    Io = 1,
    Config = 2,
    Abort = 3,
    DecodeFailure = 4,
    PoolExhausted = 5,
    AuthFailure = 6,
    NetworkFailure = 7,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn describe(self) -> &'static str {
        match self {
            ExitStatus::Success => "success",
            ExitStatus::Io => "i/o error",
            ExitStatus::Config => "configuration error",
            ExitStatus::Abort => "protocol aborted",
            ExitStatus::DecodeFailure => "error correction failed",
            ExitStatus::PoolExhausted => "authentication pool exhausted",
            ExitStatus::AuthFailure => "authentication failed",
            ExitStatus::NetworkFailure => "network key request failed",
        }
    }

    pub fn for_session_error(e: &SessionError) -> Self {
        match e {
            SessionError::Auth(AuthError::PoolExhausted { .. }) => ExitStatus::PoolExhausted,
            SessionError::Auth(_) | SessionError::Rejected { .. } => ExitStatus::AuthFailure,
            SessionError::Postproc(PostprocError::DecodeFailure { .. }) => ExitStatus::DecodeFailure,
            SessionError::Protocol(_) | SessionError::Postproc(_) => ExitStatus::Config,
        }
    }

    pub fn for_abort(reason: AbortReason) -> Self {
        match reason {
            AbortReason::DecodeFailure => ExitStatus::DecodeFailure,
            _ => ExitStatus::Abort,
        }
    }
}

fn in_range<'de, D: Deserializer<'de>>(d: D, name: &str, lo: f64, hi: f64, hi_open: bool) -> Result<f64, D::Error> {
    let v = f64::deserialize(d)?;
    let ok = v >= lo && if hi_open { v < hi } else { v <= hi };
    if ok {
        Ok(v)
    } else {
        let close = if hi_open { ")" } else { "]" };
        Err(de::Error::custom(format!("{name} must lie in [{lo}, {hi}{close}, got {v}")))
    }
}

fn probability<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    in_range(d, "probability", 0.0, 1.0, false)
}

fn half_open_probability<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    in_range(d, "probability", 0.0, 1.0, true)
}

fn threshold<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    let v = f64::deserialize(d)?;
    if v > 0.0 && v < 0.5 {
        Ok(v)
    } else {
        Err(de::Error::custom(format!("threshold must lie in (0, 0.5), got {v}")))
    }
}

fn positive<'de, D: Deserializer<'de>, T>(d: D) -> Result<T, D::Error>
where
    T: Deserialize<'de> + Default + PartialOrd + fmt::Display,
{
    let v = T::deserialize(d)?;
    if v > T::default() {
        Ok(v)
    } else {
        Err(de::Error::custom(format!("must be positive, got {v}")))
    }
}

fn hex_bytes(s: &str) -> Result<Vec<u8>, String> {
    if !s.len().is_multiple_of(2) || !s.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(format!("`{s}` is not an even-length hex string"));
    }
    Ok((0..s.len()).step_by(2).map(|i| u8::from_str_radix(&s[i..i + 2], 16).unwrap()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisChoice {
    Symmetric,
    Asymmetric,
    Preshared,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProtocol {
    #[serde(default = "defaults::n_pulses", deserialize_with = "positive")]
    n_pulses: usize,
    #[serde(default = "defaults::basis")]
    basis: BasisChoice,
    #[serde(default = "defaults::p_z", deserialize_with = "probability")]
    p_z: f64,
    #[serde(default)]
    preshared_seed: Option<String>,
    #[serde(default = "defaults::decoy", deserialize_with = "half_open_probability")]
    decoy_probability: f64,
}

impl TryFrom<RawProtocol> for ProtocolConfig {
    type Error = String;

    fn try_from(r: RawProtocol) -> Result<Self, String> {
        let strategy = match r.basis {
            BasisChoice::Symmetric => BasisStrategy::SymmetricRandom,
            BasisChoice::Asymmetric => BasisStrategy::asymmetric(r.p_z).map_err(|e| e.to_string())?,
            BasisChoice::Preshared => {
                let seed = r.preshared_seed.ok_or("basis = \"preshared\" needs preshared_seed (hex)")?;
                BasisStrategy::preshared(hex_bytes(&seed)?).map_err(|e| e.to_string())?
            }
        };
        ProtocolConfig::new(r.n_pulses, strategy, r.decoy_probability).map_err(|e| e.to_string())
    }
}

fn de_protocol<'de, D: Deserializer<'de>>(d: D) -> Result<ProtocolConfig, D::Error> {
    RawProtocol::deserialize(d)?.try_into().map_err(de::Error::custom)
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    #[serde(default = "defaults::transmittance", deserialize_with = "probability")]
    transmittance: f64,
    #[serde(default, deserialize_with = "probability")]
    misalignment: f64,
    #[serde(default = "defaults::one", deserialize_with = "probability")]
    decoy_detect_scale: f64,
}

fn de_channel<'de, D: Deserializer<'de>>(d: D) -> Result<ChannelParams, D::Error> {
    let r = RawChannel::deserialize(d)?;
    ChannelParams::new(r.transmittance, r.misalignment, r.decoy_detect_scale).map_err(de::Error::custom)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum RawEveKind {
    None,
    InterceptResend,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEve {
    #[serde(default = "defaults::eve_kind")]
    kind: RawEveKind,
    #[serde(default = "defaults::one", deserialize_with = "probability")]
    fraction: f64,
}

fn de_eve<'de, D: Deserializer<'de>>(d: D) -> Result<EveModel, D::Error> {
    let r = RawEve::deserialize(d)?;
    match r.kind {
        RawEveKind::None => Ok(EveModel::none()),
        RawEveKind::InterceptResend => EveModel::new(EveKind::InterceptResend, r.fraction).map_err(de::Error::custom),
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostprocSection {
    #[serde(default = "defaults::threshold", deserialize_with = "threshold")]
    pub threshold: f64,
    #[serde(default = "defaults::tag_len", deserialize_with = "positive")]
    pub verification_len: usize,
    #[serde(default)]
    pub security_margin: u64,
    #[serde(default = "defaults::qber_margin", deserialize_with = "half_open_probability")]
    pub qber_margin: f64,
    #[serde(default = "defaults::max_iterations", deserialize_with = "positive")]
    pub max_iterations: usize,
    #[serde(default = "defaults::yes")]
    pub fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuthModeChoice {
    OtsBootstrap,
    Preshared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OtsSchemeChoice {
    Lamport,
    Winternitz,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAuth {
    #[serde(default = "defaults::auth_mode")]
    mode: AuthModeChoice,
    #[serde(default)]
    preshared_bits: usize,
    #[serde(default = "defaults::tag_len")]
    tag_len: usize,
    #[serde(default = "defaults::reserve")]
    reserve: usize,
    #[serde(default = "defaults::ots_scheme")]
    ots_scheme: OtsSchemeChoice,
    #[serde(default = "defaults::ots_w")]
    ots_w: u8,
    #[serde(default = "defaults::ots_bits")]
    ots_preimage_bits: usize,
    #[serde(default = "defaults::ots_bits")]
    ots_digest_bits: usize,
    #[serde(default = "defaults::ots_keys")]
    ots_keys: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuthSection {
    pub mode: AuthModeChoice,
    pub preshared_bits: usize,
    pub tag_len: usize,
    pub reserve: usize,
    pub ots: OtsParams,
    pub ots_keys: usize,
}

impl TryFrom<RawAuth> for AuthSection {
    type Error = String;

    fn try_from(r: RawAuth) -> Result<Self, String> {
        if r.tag_len == 0 || r.tag_len > crate::auth::mac::MAX_TAG_LEN {
            return Err(format!("tag_len must lie in 1..={}", crate::auth::mac::MAX_TAG_LEN));
        }
        match r.mode {
            AuthModeChoice::Preshared if r.preshared_bits == 0 => {
                return Err("mode = \"preshared\" needs preshared_bits > 0".into())
            }
            AuthModeChoice::OtsBootstrap if r.preshared_bits > 0 => {
                return Err("preshared_bits is only used with mode = \"preshared\"".into())
            }
            AuthModeChoice::OtsBootstrap if r.ots_keys == 0 => {
                return Err("mode = \"ots-bootstrap\" needs ots_keys > 0".into())
            }
            _ => {}
        }
        let ots = match r.ots_scheme {
            OtsSchemeChoice::Lamport => OtsParams::lamport(r.ots_preimage_bits, r.ots_digest_bits),
            OtsSchemeChoice::Winternitz => OtsParams::winternitz(r.ots_w, r.ots_preimage_bits, r.ots_digest_bits),
        };
        // Key generation validates the parameters.
        crate::auth::ots_keygen(&mut derive_rng(0, "validate"), ots).map_err(|e| e.to_string())?;
        Ok(AuthSection {
            mode: r.mode,
            preshared_bits: r.preshared_bits,
            tag_len: r.tag_len,
            reserve: r.reserve,
            ots,
            ots_keys: r.ots_keys,
        })
    }
}

fn de_auth<'de, D: Deserializer<'de>>(d: D) -> Result<AuthSection, D::Error> {
    RawAuth::deserialize(d)?.try_into().map_err(de::Error::custom)
}

fn de_policy<'de, D: Deserializer<'de>>(d: D) -> Result<HybridPolicy, D::Error> {
    String::deserialize(d)?.parse().map_err(de::Error::custom)
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyRequest {
    pub src: String,
    pub dst: String,
    #[serde(deserialize_with = "de_policy")]
    pub policy: HybridPolicy,
    #[serde(deserialize_with = "positive")]
    pub key_len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    /// Topology file, relative to the scenario file.
    #[serde(default)]
    pub topology: Option<String>,
    /// Inline topology, as an alternative to `topology`.
    #[serde(default)]
    pub topology_text: Option<String>,
    /// Hex secret for the post-quantum stand-in; derived from the seed if absent.
    #[serde(default)]
    pub pqc_secret: Option<String>,
    /// Node pairs whose post-quantum keys the adversary knows.
    #[serde(default)]
    pub broken_pqc: Vec<[String; 2]>,
    /// MAC pool bits per QKD link; zero leaves relay messages untagged.
    #[serde(default)]
    pub link_auth_bits: usize,
    #[serde(default = "defaults::tag_len")]
    pub link_tag_len: usize,
    #[serde(default)]
    pub requests: Vec<KeyRequest>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default)]
    seed: u64,
    #[serde(default = "defaults::rounds", deserialize_with = "positive")]
    rounds: u32,
    #[serde(default = "defaults::protocol", deserialize_with = "de_protocol")]
    protocol: ProtocolConfig,
    #[serde(default = "defaults::channel", deserialize_with = "de_channel")]
    channel: ChannelParams,
    #[serde(default = "EveModel::none", deserialize_with = "de_eve")]
    eve: EveModel,
    #[serde(default = "defaults::postproc")]
    postproc: PostprocSection,
    #[serde(default = "defaults::auth", deserialize_with = "de_auth")]
    auth: AuthSection,
    #[serde(default)]
    network: Option<NetworkSection>,
}

mod defaults {
    use super::*;

    pub fn n_pulses() -> usize {
        1 << 17
    }
    pub fn basis() -> BasisChoice {
        BasisChoice::Asymmetric
    }
    pub fn p_z() -> f64 {
        0.9
    }
    pub fn decoy() -> f64 {
        0.1
    }
    pub fn transmittance() -> f64 {
        0.5
    }
    pub fn one() -> f64 {
        1.0
    }
    pub fn eve_kind() -> RawEveKind {
        RawEveKind::None
    }
    pub fn threshold() -> f64 {
        crate::postproc::DEFAULT_THRESHOLD
    }
    pub fn tag_len() -> usize {
        64
    }
    pub fn qber_margin() -> f64 {
        CodeParams::default().qber_margin
    }
    pub fn max_iterations() -> usize {
        CodeParams::default().max_iterations
    }
    pub fn yes() -> bool {
        true
    }
    pub fn auth_mode() -> AuthModeChoice {
        AuthModeChoice::OtsBootstrap
    }
    pub fn reserve() -> usize {
        SessionConfig::default().auth_reserve
    }
    pub fn ots_scheme() -> OtsSchemeChoice {
        OtsSchemeChoice::Lamport
    }
    pub fn ots_w() -> u8 {
        4
    }
    pub fn ots_bits() -> usize {
        256
    }
    pub fn ots_keys() -> usize {
        8
    }
    pub fn rounds() -> u32 {
        1
    }
    pub fn protocol() -> ProtocolConfig {
        SessionConfig::default().protocol
    }
    pub fn channel() -> ChannelParams {
        SessionConfig::default().channel
    }
    pub fn postproc() -> PostprocSection {
        toml::from_str("").expect("empty section uses defaults")
    }
    pub fn auth() -> AuthSection {
        toml::from_str::<RawAuth>("").expect("defaults").try_into().expect("valid defaults")
    }
}

/// A fully validated run description.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub seed: u64,
    pub rounds: u32,
    pub protocol: ProtocolConfig,
    pub channel: ChannelParams,
    pub eve: EveModel,
    pub postproc: PostprocSection,
    pub auth: AuthSection,
    pub network: Option<NetworkSection>,
    /// Parsed topology for `network`, if any.
    pub topology: Option<NetworkTopology>,
    /// SHA-256 of the scenario text (and topology file, if separate).
    pub digest: String,
}

impl Scenario {
    /// Parses scenario text; a `network.topology` path is resolved against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: Option<&Path>) -> Result<Self, ScenarioError> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        let topology = match &raw.network {
            None => None,
            Some(net) => {
                let (label, topo_text) = match (&net.topology, &net.topology_text) {
                    (Some(_), Some(_)) => {
                        return Err(ScenarioError::Invalid(
                            "network: set either topology or topology_text, not both".into(),
                        ))
                    }
                    (None, None) => {
                        return Err(ScenarioError::Invalid("network: topology or topology_text is required".into()))
                    }
                    (Some(p), None) => {
                        let path = base_dir.map_or_else(|| PathBuf::from(p), |b| b.join(p));
                        let t = std::fs::read_to_string(&path).map_err(|e| ScenarioError::Io {
                            path: path.clone(),
                            message: e.to_string(),
                        })?;
                        hasher.update(t.as_bytes());
                        (path.display().to_string(), t)
                    }
                    (None, Some(t)) => ("network.topology_text".to_string(), t.clone()),
                };
                let topo = NetworkTopology::parse(&topo_text).map_err(|source| ScenarioError::Topology {
                    path: label.clone(),
                    source,
                })?;
                for r in &net.requests {
                    for n in [&r.src, &r.dst] {
                        if topo.role(n).is_none() {
                            return Err(ScenarioError::Invalid(format!("network request names unknown node `{n}`")));
                        }
                    }
                }
                if let Some(s) = &net.pqc_secret {
                    let b = hex_bytes(s).map_err(ScenarioError::Invalid)?;
                    if b.len() != 32 {
                        return Err(ScenarioError::Invalid("network.pqc_secret must be 64 hex digits".into()));
                    }
                }
                Some(topo)
            }
        };
        Ok(Scenario {
            seed: raw.seed,
            rounds: raw.rounds,
            protocol: raw.protocol,
            channel: raw.channel,
            eve: raw.eve,
            postproc: raw.postproc,
            auth: raw.auth,
            network: raw.network,
            topology,
            digest: hasher.finalize().iter().map(|b| format!("{b:02x}")).collect(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text, path.parent())
    }

    pub fn session_config(&self) -> SessionConfig {
        SessionConfig {
            protocol: self.protocol.clone(),
            channel: self.channel,
            eve: self.eve,
            threshold: self.postproc.threshold,
            code: CodeParams {
                qber_estimate: 0.0,
                qber_margin: self.postproc.qber_margin,
                max_iterations: self.postproc.max_iterations,
                fallback: self.postproc.fallback,
            },
            verification_len: self.postproc.verification_len,
            mac_tag_len: self.auth.tag_len,
            security_margin: self.postproc.security_margin,
            auth_reserve: self.auth.reserve,
            preshared_auth_bits: match self.auth.mode {
                AuthModeChoice::Preshared => self.auth.preshared_bits,
                AuthModeChoice::OtsBootstrap => 0,
            },
            ots: self.auth.ots,
            ots_keys: self.auth.ots_keys,
        }
    }
}

pub const REPORT_HEADER: &str = "round,auth_mode,n_pulses,n_detected,n_sifted,sample_size,e_x,decision,abort_reason,\
code,fallback,sifting_bits,syndrome_bits,verification_bits,seed_bits,control_bits,final_len,keys_equal,\
reserved,app_key_len,sustainable,auth_consumed,pool_after";

fn fmt_rate(v: Option<f64>) -> String {
    v.map_or_else(String::new, |e| format!("{e:.6}"))
}

pub fn report_row(r: &RoundReport) -> String {
    let (decision, reason) = match r.outcome {
        RoundOutcome::Completed => ("proceed", ""),
        RoundOutcome::Aborted(a) => ("abort", a.code()),
    };
    let l = &r.ledger;
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.round,
        r.auth_mode,
        r.n_pulses,
        r.n_detected,
        r.n_sifted,
        r.sample_size,
        fmt_rate(r.e_x),
        decision,
        reason,
        r.code_name.unwrap_or(""),
        r.used_fallback,
        l.sifting_disclosed,
        l.syndrome_bits,
        l.verification_bits,
        l.seed_bits,
        l.control_bits,
        r.final_len,
        r.keys_equal,
        r.reserved,
        r.app_key_len,
        r.sustainable,
        r.auth_consumed,
        r.pool_after
    )
}

/// Everything a run produces, as in-memory files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutput {
    pub status: ExitStatus,
    /// File name to contents, written in name order.
    pub files: BTreeMap<String, String>,
}

impl RunOutput {
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, body) in &self.files {
            std::fs::write(dir.join(name), body)?;
        }
        Ok(())
    }
}

fn run_network(s: &Scenario, net: &NetworkSection, topo: &NetworkTopology) -> (String, Vec<String>) {
    let secret = match &net.pqc_secret {
        Some(h) => hex_bytes(h).expect("validated").try_into().expect("validated length"),
        None => derive_seed(s.seed, "network/pqc-secret"),
    };
    let mut kem = HashPqc::new(secret);
    for [a, b] in &net.broken_pqc {
        kem.break_pair(a, b);
    }
    let mut network = Network::new(topo.clone(), derive_rng(s.seed, "network/links"), kem);
    if net.link_auth_bits > 0 {
        network.enable_link_auth(net.link_auth_bits, net.link_tag_len);
    }
    let mut failures = Vec::new();
    for (i, r) in net.requests.iter().enumerate() {
        if let Err(e) = network.hybrid_establish(&r.src, &r.dst, r.policy, r.key_len) {
            failures.push(format!("request {} ({} -> {}, {}): {e}", i + 1, r.src, r.dst, r.policy));
        }
    }
    (network_csv(topo, &network.log), failures)
}

/// Runs the chained rounds and any network requests. Stops at the first
/// round that aborts or fails.
pub fn run_scenario(s: &Scenario, transcripts: bool) -> RunOutput {
    let mut files = BTreeMap::new();
    let mut report = String::from(REPORT_HEADER);
    report.push('\n');
    let mut summary = format!(
        "scenario {}\nseed {}\nrounds requested {}\nfinal lengths are asymptotic estimates\n",
        s.digest, s.seed, s.rounds
    );
    let mut status = ExitStatus::Success;

    match Session::new(s.session_config(), s.seed) {
        Err(e) => {
            status = ExitStatus::for_session_error(&e);
            summary += &format!("setup failed: {e}\n");
        }
        Ok(mut session) => {
            let run = session.run(s.rounds);
            for r in &run.rounds {
                let rep = &r.report;
                report += &report_row(rep);
                report.push('\n');
                summary += &format!(
                    "round {}: {} auth, {} sifted, e_x {}, {}, final {} bits, application {} bits\n",
                    rep.round,
                    rep.auth_mode,
                    rep.n_sifted,
                    if rep.e_x.is_some() { fmt_rate(rep.e_x) } else { "n/a".into() },
                    match rep.outcome {
                        RoundOutcome::Completed => "completed".to_string(),
                        RoundOutcome::Aborted(a) => format!("aborted ({})", a.code()),
                    },
                    rep.final_len,
                    rep.app_key_len
                );
                if let RoundOutcome::Aborted(a) = rep.outcome {
                    status = ExitStatus::for_abort(a);
                }
                if transcripts {
                    files.insert(format!("transcript_round{}.csv", rep.round), r.quantum.dump());
                    files.insert(format!("channel_round{}.csv", rep.round), r.channel.to_csv());
                }
            }
            if let Some((round, e)) = &run.error {
                status = ExitStatus::for_session_error(e);
                summary += &format!("round {round}: failed: {e}\n");
            }
            summary += &format!("rounds completed {}\n", run.rounds.iter().filter(|r| r.report.outcome == RoundOutcome::Completed).count());
        }
    }

    let mut network = format!("{NETWORK_CSV_HEADER}\n");
    if let (Some(net), Some(topo)) = (&s.network, &s.topology) {
        let (csv, failures) = run_network(s, net, topo);
        network = csv;
        summary += &format!("network requests {} failed {}\n", net.requests.len(), failures.len());
        for f in &failures {
            summary += &format!("  {f}\n");
        }
        if !failures.is_empty() && status == ExitStatus::Success {
            status = ExitStatus::NetworkFailure;
        }
    }
    summary += &format!("exit {} ({})\n", status.code(), status.describe());

    files.insert("report.csv".into(), report);
    files.insert("summary.txt".into(), summary);
    files.insert("network.csv".into(), network);
    RunOutput { status, files }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    PZ,
    Transmittance,
    EveFraction,
    Threshold,
}

impl std::str::FromStr for SweepParam {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "p_z" => Ok(SweepParam::PZ),
            "transmittance" => Ok(SweepParam::Transmittance),
            "eve_fraction" => Ok(SweepParam::EveFraction),
            "threshold" => Ok(SweepParam::Threshold),
            _ => Err(ScenarioError::Invalid(format!(
                "cannot sweep `{s}` (expected p_z, transmittance, eve_fraction or threshold)"
            ))),
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::PZ => "p_z",
            SweepParam::Transmittance => "transmittance",
            SweepParam::EveFraction => "eve_fraction",
            SweepParam::Threshold => "threshold",
        })
    }
}

pub const SWEEP_HEADER: &str = "param,value,n_sifted,sample_size,e_x,decision,final_len,key_rate";

fn apply(base: &Scenario, param: SweepParam, v: f64) -> Result<SessionConfig, ScenarioError> {
    let mut cfg = base.session_config();
    let bad = |e: String| ScenarioError::Invalid(format!("{param} = {v}: {e}"));
    match param {
        SweepParam::PZ => {
            cfg.protocol.strategy = BasisStrategy::asymmetric(v).map_err(|e| bad(e.to_string()))?;
        }
        SweepParam::Transmittance => {
            let c = &base.channel;
            cfg.channel =
                ChannelParams::new(v, c.misalignment_error(), c.decoy_detect_scale()).map_err(|e| bad(e.to_string()))?;
        }
        SweepParam::EveFraction => {
            cfg.eve = EveModel::new(EveKind::InterceptResend, v).map_err(|e| bad(e.to_string()))?;
        }
        SweepParam::Threshold => {
            if !(v > 0.0 && v < 0.5) {
                return Err(bad("threshold must lie in (0, 0.5)".into()));
            }
            cfg.threshold = v;
        }
    }
    Ok(cfg)
}

/// One single-round run per grid value, in ascending value order.
pub fn sweep(base: &Scenario, param: SweepParam, values: &[f64]) -> Result<String, ScenarioError> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(ScenarioError::Invalid("sweep values must be finite".into()));
    }
    let mut grid = values.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let configs = grid.iter().map(|&v| apply(base, param, v)).collect::<Result<Vec<_>, _>>()?;

    let mut out = format!("{SWEEP_HEADER}\n");
    for (v, cfg) in grid.iter().zip(configs) {
        let n_pulses = cfg.protocol.n_pulses;
        let mut session = Session::new(cfg, base.seed).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        let (n_sifted, sample, e_x, decision, final_len) = match session.run_round() {
            Ok(r) => {
                let rep = r.report;
                let decision = match rep.outcome {
                    RoundOutcome::Completed => "proceed".to_string(),
                    RoundOutcome::Aborted(a) => format!("abort:{}", a.code()),
                };
                (rep.n_sifted, rep.sample_size, rep.e_x, decision, rep.final_len)
            }
            Err(e) => (0, 0, None, format!("error:{}", ExitStatus::for_session_error(&e).describe()), 0),
        };
        out += &format!(
            "{param},{v},{n_sifted},{sample},{},{decision},{final_len},{:.6}\n",
            fmt_rate(e_x),
            final_len as f64 / n_pulses as f64
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        Scenario::from_toml_str(text, None)
    }

    #[test]
    fn defaults_match_session_defaults() {
        let s = parse("").unwrap();
        assert_eq!(s.session_config(), SessionConfig::default());
        assert_eq!(s.rounds, 1);
        assert!(s.network.is_none());
    }

    #[test]
    fn errors_point_at_lines() {
        let e = parse("seed = 1\n[channel]\ntransmittance = 1.5\n").unwrap_err().to_string();
        assert!(e.contains("line 3"), "{e}");
        assert!(e.contains("[0, 1]"), "{e}");

        let e = parse("[protocol]\nn_pulses = 10\nbasis = \"preshared\"\n").unwrap_err().to_string();
        assert!(e.contains("preshared_seed"), "{e}");
        assert!(e.contains("line 1"), "{e}");

        let e = parse("[postproc]\nthreshold = 0.7\n").unwrap_err().to_string();
        assert!(e.contains("line 2"), "{e}");

        let e = parse("rounds = 2\nsed = 5\n").unwrap_err().to_string();
        assert!(e.contains("line 2") && e.contains("sed"), "{e}");

        let e = parse("[auth]\nmode = \"preshared\"\n").unwrap_err().to_string();
        assert!(e.contains("preshared_bits"), "{e}");
    }

    #[test]
    fn network_section() {
        let text = r#"
[network]
topology_text = """
node A user
node R relay
node B user
link A R qkd 512
link R B qkd 512
link A B pqc
"""
[[network.requests]]
src = "A"
dst = "B"
policy = "hybrid-xor"
key_len = 128
"#;
        let s = parse(text).unwrap();
        assert_eq!(s.topology.as_ref().unwrap().node_count(), 3);

        let bad = text.replace("link R B qkd 512", "link R Q qkd 512");
        assert!(matches!(parse(&bad), Err(ScenarioError::Topology { .. })));
        let bad = text.replace("\"hybrid-xor\"", "\"quantum\"");
        assert!(parse(&bad).unwrap_err().to_string().contains("unknown policy"));
    }

    #[test]
    fn sweep_degenerate_and_invalid() {
        let s = parse("[protocol]\nn_pulses = 2000\n").unwrap();
        assert_eq!(sweep(&s, SweepParam::PZ, &[]).unwrap(), format!("{SWEEP_HEADER}\n"));
        assert!("gain".parse::<SweepParam>().is_err());
        assert!(sweep(&s, SweepParam::Threshold, &[0.6]).is_err());
        let csv = sweep(&s, SweepParam::Transmittance, &[1.0, 0.5]).unwrap();
        let values: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
        assert_eq!(values, ["0.5", "1"]);
    }

    #[test]
    fn exit_codes_are_distinct() {
        use ExitStatus::*;
        let all = [Success, Io, Config, Abort, DecodeFailure, PoolExhausted, AuthFailure, NetworkFailure];
        let codes: std::collections::BTreeSet<i32> = all.iter().map(|s| s.code()).collect();
        assert_eq!(codes.len(), all.len());
    }
}
