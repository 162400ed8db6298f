//! Trusted-node key relay networks with optional post-quantum hybrid keys.
//!
//! A relayed key is the first hop's link key. Each trusted relay forwards it
//! to the next node as `key XOR next-hop link key` over the public channel,
//! so every interior relay ends up holding enough material to rebuild it.
//! A hybrid key XORs the relayed key with a post-quantum key; a relay alone
//! cannot rebuild it unless the post-quantum ingredient is also known.

pub mod pqc;
pub mod topology;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::auth::{wc_tag, wc_verify, AuthKeyPool, Verdict};
use crate::bits::Bits;
use crate::postproc::{KeyMaterial, Stage};
use crate::rng::SimRng;

pub use pqc::{HashPqc, PqcKem, PqcKey};
pub use topology::{preshared_pairs_count, Edge, NetworkTopology, NodeRole};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NetError {
    #[error("topology line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Topology(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("no {kind} path from `{src}` to `{dst}`")]
    NoPath { kind: &'static str, src: String, dst: String },
    #[error("link {edge} has {remaining} bits left, {needed} needed")]
    BudgetExceeded { edge: Edge, needed: u64, remaining: u64 },
    #[error("interior node `{0}` is not a trusted relay")]
    UntrustedInterior(String),
    #[error("source and destination are both `{0}`")]
    SameEndpoints(String),
    #[error("key length must be positive")]
    ZeroLength,
    #[error("relay message on link {edge} rejected: {reason}")]
    Authentication { edge: Edge, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HybridPolicy {
    QkdOnly,
    PqcOnly,
    HybridXor,
}

impl fmt::Display for HybridPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HybridPolicy::QkdOnly => "qkd-only",
            HybridPolicy::PqcOnly => "pqc-only",
            HybridPolicy::HybridXor => "hybrid-xor",
        })
    }
}

impl std::str::FromStr for HybridPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "qkd-only" => Ok(HybridPolicy::QkdOnly),
            "pqc-only" => Ok(HybridPolicy::PqcOnly),
            "hybrid-xor" => Ok(HybridPolicy::HybridXor),
            _ => Err(format!("unknown policy `{s}` (expected qkd-only, pqc-only or hybrid-xor)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    QkdDirect,
    QkdRelayed(Vec<String>),
    Pqc,
    Hybrid(Vec<String>),
}

/// One hop of a relay: the link key both hop endpoints hold and, for every
/// hop after the first, the wrapped key sent in the clear.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HopRecord {
    pub edge: Edge,
    pub link_key: Bits,
    pub ciphertext: Option<Bits>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionRecord {
    pub id: usize,
    pub src: String,
    pub dst: String,
    pub policy: HybridPolicy,
    /// QKD route, empty for post-quantum-only keys.
    pub path: Vec<String>,
    pub hops: Vec<HopRecord>,
    pub pqc: Option<PqcKey>,
    /// Ground truth, kept for audits and replay checks.
    pub key: Bits,
}

impl SessionRecord {
    pub fn interior(&self) -> &[String] {
        if self.path.len() > 2 {
            &self.path[1..self.path.len() - 1]
        } else {
            &[]
        }
    }

    pub fn key_len(&self) -> usize {
        self.key.len()
    }

    /// Secret material a node holds for this session: its final key copy if it
    /// is an endpoint, and the link keys of the hops it sits on.
    pub fn material_of(&self, node: &str) -> Vec<Bits> {
        let mut out = Vec::new();
        if node == self.src || node == self.dst {
            out.push(self.key.clone());
        }
        for h in &self.hops {
            if h.edge.0 == node || h.edge.1 == node {
                out.push(h.link_key.clone());
            }
        }
        out
    }

    /// Wrapped keys visible on the public channel.
    pub fn public_transcript(&self) -> Vec<Bits> {
        self.hops.iter().filter_map(|h| h.ciphertext.clone()).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SessionLog {
    pub records: Vec<SessionRecord>,
}

#[derive(Debug, Clone)]
pub struct StoredKey {
    pub id: usize,
    pub src_copy: KeyMaterial,
    pub dst_copy: KeyMaterial,
    pub provenance: Provenance,
}

/// Established keys per unordered pair, handed out once each.
#[derive(Debug, Clone, Default)]
pub struct KeyStore {
    keys: BTreeMap<Edge, Vec<StoredKey>>,
}

impl KeyStore {
    pub fn insert(&mut self, src: &str, dst: &str, key: StoredKey) {
        self.keys.entry(Edge::new(src, dst)).or_default().push(key);
    }

    pub fn available(&self, a: &str, b: &str) -> usize {
        self.keys.get(&Edge::new(a, b)).map_or(0, Vec::len)
    }

    /// Removes and returns the oldest unused key for the pair.
    pub fn take(&mut self, a: &str, b: &str) -> Option<StoredKey> {
        let v = self.keys.get_mut(&Edge::new(a, b))?;
        (!v.is_empty()).then(|| v.remove(0))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EstablishedKey {
    pub id: usize,
    pub src_key: Bits,
    pub dst_key: Bits,
    pub path: Vec<String>,
    pub provenance: Provenance,
    /// Bits drawn from each link budget.
    pub consumed: Vec<(Edge, u64)>,
}

#[derive(Debug, Clone)]
struct LinkAuth {
    sender: AuthKeyPool,
    receiver: AuthKeyPool,
    tag_len: usize,
}

/// Mutable network state: link budgets, the PQC primitive, the key store and
/// the session log. Requests are processed strictly in call order.
pub struct Network<K: PqcKem = HashPqc> {
    topology: NetworkTopology,
    budgets: BTreeMap<Edge, u64>,
    rng: SimRng,
    kem: K,
    auth: BTreeMap<Edge, LinkAuth>,
    pub store: KeyStore,
    pub log: SessionLog,
}

impl<K: PqcKem> Network<K> {
    pub fn new(topology: NetworkTopology, rng: SimRng, kem: K) -> Self {
        let budgets = topology.qkd_links().map(|(e, r)| (e.clone(), r)).collect();
        Network {
            topology,
            budgets,
            rng,
            kem,
            auth: BTreeMap::new(),
            store: KeyStore::default(),
            log: SessionLog::default(),
        }
    }

    /// Funds mirrored MAC pools on every QKD link so relay messages are
    /// tagged and checked hop by hop.
    pub fn enable_link_auth(&mut self, bits_per_link: usize, tag_len: usize) {
        let edges: Vec<Edge> = self.budgets.keys().cloned().collect();
        for e in edges {
            let bits = Bits::random(&mut self.rng, bits_per_link);
            self.auth.insert(
                e,
                LinkAuth {
                    sender: AuthKeyPool::with_bits(bits.clone()),
                    receiver: AuthKeyPool::with_bits(bits),
                    tag_len,
                },
            );
        }
    }

    pub fn topology(&self) -> &NetworkTopology {
        &self.topology
    }

    pub fn kem_mut(&mut self) -> &mut K {
        &mut self.kem
    }

    pub fn remaining_budget(&self, a: &str, b: &str) -> Option<u64> {
        self.budgets.get(&Edge::new(a, b)).copied()
    }

    fn check_request(&self, src: &str, dst: &str, key_len: usize) -> Result<(), NetError> {
        for n in [src, dst] {
            if self.topology.role(n).is_none() {
                return Err(NetError::UnknownNode(n.to_string()));
            }
        }
        if src == dst {
            return Err(NetError::SameEndpoints(src.to_string()));
        }
        if key_len == 0 {
            return Err(NetError::ZeroLength);
        }
        Ok(())
    }

    fn route(&self, src: &str, dst: &str, key_len: usize) -> Result<Vec<String>, NetError> {
        let path = self.topology.qkd_path(src, dst)?.ok_or_else(|| NetError::NoPath {
            kind: "qkd",
            src: src.to_string(),
            dst: dst.to_string(),
        })?;
        for n in &path[1..path.len() - 1] {
            if self.topology.role(n) != Some(NodeRole::TrustedRelay) {
                return Err(NetError::UntrustedInterior(n.clone()));
            }
        }
        for w in path.windows(2) {
            let edge = Edge::new(&w[0], &w[1]);
            let remaining = self.budgets[&edge];
            if remaining < key_len as u64 {
                return Err(NetError::BudgetExceeded {
                    edge,
                    needed: key_len as u64,
                    remaining,
                });
            }
        }
        Ok(path)
    }

    fn send_tagged(&mut self, edge: &Edge, message: &Bits) -> Result<(), NetError> {
        let Some(link) = self.auth.get_mut(edge) else {
            return Ok(());
        };
        let fail = |reason: String| NetError::Authentication {
            edge: edge.clone(),
            reason,
        };
        let tag = wc_tag(message, &mut link.sender, link.tag_len).map_err(|e| fail(e.to_string()))?;
        match wc_verify(message, &tag, &mut link.receiver) {
            Verdict::Accept => Ok(()),
            Verdict::Reject(r) => Err(fail(format!("{r:?}"))),
        }
    }

    /// Relays over the QKD path. Returns both endpoint copies, reconstructed
    /// independently, plus the hop records.
    fn relay(&mut self, path: &[String], key_len: usize) -> Result<(Bits, Bits, Vec<HopRecord>), NetError> {
        let mut hops: Vec<HopRecord> = path
            .windows(2)
            .map(|w| HopRecord {
                edge: Edge::new(&w[0], &w[1]),
                link_key: Bits::random(&mut self.rng, key_len),
                ciphertext: None,
            })
            .collect();
        for h in &hops {
            *self.budgets.get_mut(&h.edge).expect("routed edge") -= key_len as u64;
        }
        let src_key = hops[0].link_key.clone();
        // Each node decrypts what it received and re-wraps for the next hop.
        let mut held = hops[0].link_key.clone();
        for hop in hops.iter_mut().skip(1) {
            let c = &held ^ &hop.link_key;
            self.send_tagged(&hop.edge, &c)?;
            held = &c ^ &hop.link_key;
            hop.ciphertext = Some(c);
        }
        Ok((src_key, held, hops))
    }

    fn record(&mut self, rec: SessionRecord, dst_key: Bits, provenance: Provenance) -> EstablishedKey {
        let consumed = rec.hops.iter().map(|h| (h.edge.clone(), rec.key_len() as u64)).collect();
        let out = EstablishedKey {
            id: rec.id,
            src_key: rec.key.clone(),
            dst_key: dst_key.clone(),
            path: rec.path.clone(),
            provenance: provenance.clone(),
            consumed,
        };
        self.store.insert(
            &rec.src,
            &rec.dst,
            StoredKey {
                id: rec.id,
                src_copy: KeyMaterial::new(rec.key.clone(), Stage::Final),
                dst_copy: KeyMaterial::new(dst_key, Stage::Final),
                provenance,
            },
        );
        self.log.records.push(rec);
        out
    }

    /// Establishes a key over the fewest-hop QKD route through trusted
    /// relays, charging `key_len` bits to every hop's budget.
    pub fn establish_path_key(&mut self, src: &str, dst: &str, key_len: usize) -> Result<EstablishedKey, NetError> {
        self.hybrid_establish(src, dst, HybridPolicy::QkdOnly, key_len)
    }

    pub fn hybrid_establish(
        &mut self,
        src: &str,
        dst: &str,
        policy: HybridPolicy,
        key_len: usize,
    ) -> Result<EstablishedKey, NetError> {
        self.check_request(src, dst, key_len)?;
        let needs_qkd = policy != HybridPolicy::PqcOnly;
        let needs_pqc = policy != HybridPolicy::QkdOnly;
        // Validate everything before touching budgets or the PQC counter.
        let path = if needs_qkd { self.route(src, dst, key_len)? } else { Vec::new() };
        if needs_pqc && self.topology.pqc_path(src, dst)?.is_none() {
            return Err(NetError::NoPath {
                kind: "pqc",
                src: src.to_string(),
                dst: dst.to_string(),
            });
        }

        let (qkd_src, qkd_dst, hops) = if needs_qkd {
            self.relay(&path, key_len)?
        } else {
            (Bits::zeros(key_len), Bits::zeros(key_len), Vec::new())
        };
        let pqc = needs_pqc.then(|| self.kem.establish(src, dst, key_len));
        let (key, dst_key) = match &pqc {
            Some(p) => (&qkd_src ^ &p.key, &qkd_dst ^ &p.key),
            None => (qkd_src, qkd_dst),
        };
        let provenance = match policy {
            HybridPolicy::QkdOnly if path.len() == 2 => Provenance::QkdDirect,
            HybridPolicy::QkdOnly => Provenance::QkdRelayed(path.clone()),
            HybridPolicy::PqcOnly => Provenance::Pqc,
            HybridPolicy::HybridXor => Provenance::Hybrid(path.clone()),
        };
        let rec = SessionRecord {
            id: self.log.records.len(),
            src: src.to_string(),
            dst: dst.to_string(),
            policy,
            path,
            hops,
            pqc,
            key,
        };
        Ok(self.record(rec, dst_key, provenance))
    }
}

/// Session ids whose keys an adversary holding `node`'s material (plus the
/// public transcript and any post-quantum keys flagged as known) can rebuild:
/// the node's own endpoint keys, and keys relayed through it unless a secret
/// post-quantum ingredient protects them.
pub fn compromise_node(topology: &NetworkTopology, node: &str, log: &SessionLog) -> Result<BTreeSet<usize>, NetError> {
    if topology.role(node).is_none() {
        return Err(NetError::UnknownNode(node.to_string()));
    }
    let pqc_known = |r: &SessionRecord| r.pqc.as_ref().is_none_or(|p| p.adversary_known);
    Ok(log
        .records
        .iter()
        .filter(|r| {
            let endpoint = r.src == node || r.dst == node;
            let relay = r.interior().iter().any(|n| n == node) && pqc_known(r);
            let pqc_only_known = r.policy == HybridPolicy::PqcOnly && pqc_known(r);
            endpoint || relay || pqc_only_known
        })
        .map(|r| r.id)
        .collect())
}

/// Nodes whose compromise exposes each session, in node order.
pub fn exposure_table(topology: &NetworkTopology, log: &SessionLog) -> BTreeMap<usize, Vec<String>> {
    let mut out: BTreeMap<usize, Vec<String>> = log.records.iter().map(|r| (r.id, Vec::new())).collect();
    for (node, _) in topology.nodes() {
        for id in compromise_node(topology, node, log).expect("node from topology") {
            out.get_mut(&id).expect("logged id").push(node.to_string());
        }
    }
    out
}

pub const NETWORK_CSV_HEADER: &str = "src,dst,policy,path,key_len,exposed_by";

/// One row per session: the path joins node ids with `>`, and `exposed_by`
/// lists with `;` the nodes whose compromise reveals the key.
pub fn network_csv(topology: &NetworkTopology, log: &SessionLog) -> String {
    let exposure = exposure_table(topology, log);
    let mut out = String::from(NETWORK_CSV_HEADER);
    out.push('\n');
    for r in &log.records {
        out += &format!(
            "{},{},{},{},{},{}\n",
            r.src,
            r.dst,
            r.policy,
            r.path.join(">"),
            r.key_len(),
            exposure[&r.id].join(";")
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;

    fn net(text: &str) -> Network {
        Network::new(NetworkTopology::parse(text).unwrap(), derive_rng(1, "net"), HashPqc::new([1; 32]))
    }

    const ARB: &str = "node A user\nnode R relay\nnode B user\nnode C user\n\
                       link A R qkd 1000\nlink R B qkd 1000\nlink A B pqc\nlink B C qkd 64\n";

    #[test]
    fn direct_key_is_link_key() {
        let mut n = net(ARB);
        let k = n.establish_path_key("C", "B", 64).unwrap();
        assert_eq!(k.provenance, Provenance::QkdDirect);
        assert_eq!(k.src_key, n.log.records[0].hops[0].link_key);
        assert_eq!(k.src_key, k.dst_key);
        assert!(n.log.records[0].public_transcript().is_empty());
    }

    #[test]
    fn two_hop_relay_agrees_and_charges_budgets() {
        let mut n = net(ARB);
        let k = n.establish_path_key("A", "B", 300).unwrap();
        assert_eq!(k.src_key, k.dst_key);
        assert_eq!(k.path, ["A", "R", "B"]);
        assert_eq!(n.remaining_budget("A", "R"), Some(700));
        assert_eq!(n.remaining_budget("B", "R"), Some(700));
        let err = n.establish_path_key("A", "B", 701).unwrap_err();
        assert!(matches!(err, NetError::BudgetExceeded { remaining: 700, .. }));
        assert_eq!(n.remaining_budget("R", "B"), Some(700));
    }

    #[test]
    fn untrusted_interior_is_refused() {
        let mut n = net(ARB);
        let err = n.establish_path_key("A", "C", 8).unwrap_err();
        assert_eq!(err, NetError::UntrustedInterior("B".into()));
        assert_eq!(n.remaining_budget("A", "R"), Some(1000));
    }

    #[test]
    fn policy_requirements() {
        let mut n = net(ARB);
        let h = n.hybrid_establish("A", "B", HybridPolicy::HybridXor, 128).unwrap();
        assert_eq!(h.src_key.len(), 128);
        assert_eq!(h.src_key, h.dst_key);
        let err = n.hybrid_establish("C", "B", HybridPolicy::HybridXor, 8).unwrap_err();
        assert!(matches!(err, NetError::NoPath { kind: "pqc", .. }));
        let mut split = net("node A user\nnode B user\nlink A B pqc\n");
        assert!(matches!(
            split.hybrid_establish("A", "B", HybridPolicy::QkdOnly, 8),
            Err(NetError::NoPath { kind: "qkd", .. })
        ));
        assert_eq!(split.hybrid_establish("A", "B", HybridPolicy::PqcOnly, 8).unwrap().provenance, Provenance::Pqc);
        assert!(matches!(split.hybrid_establish("A", "A", HybridPolicy::PqcOnly, 8), Err(NetError::SameEndpoints(_))));
    }

    #[test]
    fn compromise_examples() {
        let mut n = net(ARB);
        n.establish_path_key("A", "B", 32).unwrap();
        n.hybrid_establish("A", "B", HybridPolicy::HybridXor, 32).unwrap();
        n.establish_path_key("B", "C", 32).unwrap();
        let topo = n.topology().clone();
        assert_eq!(compromise_node(&topo, "R", &n.log).unwrap(), BTreeSet::from([0]));
        assert_eq!(compromise_node(&topo, "C", &n.log).unwrap(), BTreeSet::from([2]));
        assert_eq!(compromise_node(&topo, "B", &n.log).unwrap(), BTreeSet::from([0, 1, 2]));
        assert!(compromise_node(&topo, "Z", &n.log).is_err());

        n.kem_mut().break_all(true);
        n.hybrid_establish("A", "B", HybridPolicy::HybridXor, 32).unwrap();
        assert_eq!(compromise_node(&topo, "R", &n.log).unwrap(), BTreeSet::from([0, 3]));
    }

    #[test]
    fn csv_rows() {
        let mut n = net(ARB);
        n.establish_path_key("A", "B", 16).unwrap();
        n.hybrid_establish("A", "B", HybridPolicy::PqcOnly, 8).unwrap();
        let csv = network_csv(n.topology(), &n.log);
        assert_eq!(csv, format!("{NETWORK_CSV_HEADER}\nA,B,qkd-only,A>R>B,16,A;B;R\nA,B,pqc-only,,8,A;B\n"));
    }

    #[test]
    fn relay_messages_are_tagged() {
        let mut n = net(ARB);
        n.enable_link_auth(2_000, 32);
        n.establish_path_key("A", "B", 64).unwrap();
        let cost = crate::auth::mac::key_bits(64, 32);
        assert_eq!(n.auth[&Edge::new("R", "B")].sender.available(), 2_000 - cost);
        assert_eq!(n.auth[&Edge::new("A", "R")].sender.available(), 2_000);
        n.enable_link_auth(10, 32);
        assert!(matches!(n.establish_path_key("A", "B", 64), Err(NetError::Authentication { .. })));
    }

    #[test]
    fn keystore_is_one_time() {
        let mut n = net(ARB);
        n.establish_path_key("A", "B", 8).unwrap();
        assert_eq!(n.store.available("B", "A"), 1);
        let k = n.store.take("B", "A").unwrap();
        assert_eq!(k.src_copy.bits(), k.dst_copy.bits());
        assert!(n.store.take("A", "B").is_none());
    }
}
