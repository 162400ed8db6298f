use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use super::NetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeRole {
    EndUser,
    TrustedRelay,
}

impl FromStr for NodeRole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "user" | "enduser" | "end-user" => Ok(NodeRole::EndUser),
            "relay" | "trustedrelay" | "trusted-relay" => Ok(NodeRole::TrustedRelay),
            _ => Err(format!("unknown role `{s}` (expected `user` or `relay`)")),
        }
    }
}

impl fmt::Display for NodeRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeRole::EndUser => "user",
            NodeRole::TrustedRelay => "relay",
        })
    }
}

/// Unordered node pair, stored with the smaller id first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge(pub String, pub String);

impl Edge {
    pub fn new(a: &str, b: &str) -> Self {
        if a <= b {
            Edge(a.to_string(), b.to_string())
        } else {
            Edge(b.to_string(), a.to_string())
        }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.0, self.1)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NetworkTopology {
    nodes: BTreeMap<String, NodeRole>,
    /// QKD links with their key budget in bits per round.
    qkd: BTreeMap<Edge, u64>,
    pqc: BTreeSet<Edge>,
}

impl NetworkTopology {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, id: &str, role: NodeRole) -> Result<(), NetError> {
        if id.is_empty() || id.chars().any(|c| c.is_whitespace() || c == ',' || c == '>' || c == ';') {
            return Err(NetError::Topology(format!("invalid node id `{id}`")));
        }
        if self.nodes.insert(id.to_string(), role).is_some() {
            return Err(NetError::Topology(format!("duplicate node `{id}`")));
        }
        Ok(())
    }

    fn check_endpoints(&self, a: &str, b: &str) -> Result<Edge, NetError> {
        for n in [a, b] {
            if !self.nodes.contains_key(n) {
                return Err(NetError::UnknownNode(n.to_string()));
            }
        }
        if a == b {
            return Err(NetError::Topology(format!("self-loop on `{a}`")));
        }
        Ok(Edge::new(a, b))
    }

    pub fn add_qkd_link(&mut self, a: &str, b: &str, rate: u64) -> Result<(), NetError> {
        let e = self.check_endpoints(a, b)?;
        if self.qkd.insert(e.clone(), rate).is_some() {
            return Err(NetError::Topology(format!("duplicate qkd link {e}")));
        }
        Ok(())
    }

    pub fn add_pqc_link(&mut self, a: &str, b: &str) -> Result<(), NetError> {
        let e = self.check_endpoints(a, b)?;
        if !self.pqc.insert(e.clone()) {
            return Err(NetError::Topology(format!("duplicate pqc link {e}")));
        }
        Ok(())
    }

    /// Parses `node <id> <role>`, `link <a> <b> qkd <rate>` and
    /// `link <a> <b> pqc` records; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, NetError> {
        let mut topo = NetworkTopology::new();
        for (i, raw) in text.lines().enumerate() {
            let at_line = |e: NetError| NetError::Parse {
                line: i + 1,
                message: e.to_string(),
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            let words: Vec<&str> = line.split_whitespace().collect();
            match words.as_slice() {
                [] => {}
                ["node", id, role] => {
                    let role = role.parse().map_err(|m| NetError::Parse { line: i + 1, message: m })?;
                    topo.add_node(id, role).map_err(at_line)?;
                }
                ["link", a, b, "qkd", rate] => {
                    let rate = rate.parse().map_err(|_| NetError::Parse {
                        line: i + 1,
                        message: format!("qkd rate `{rate}` is not a non-negative integer"),
                    })?;
                    topo.add_qkd_link(a, b, rate).map_err(at_line)?;
                }
                ["link", a, b, "pqc"] => topo.add_pqc_link(a, b).map_err(at_line)?,
                _ => {
                    return Err(NetError::Parse {
                        line: i + 1,
                        message: format!("unrecognised record `{line}`"),
                    })
                }
            }
        }
        Ok(topo)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (id, role) in &self.nodes {
            out += &format!("node {id} {role}\n");
        }
        for (e, rate) in &self.qkd {
            out += &format!("link {} {} qkd {rate}\n", e.0, e.1);
        }
        for e in &self.pqc {
            out += &format!("link {} {} pqc\n", e.0, e.1);
        }
        out
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (&str, NodeRole)> {
        self.nodes.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn role(&self, id: &str) -> Option<NodeRole> {
        self.nodes.get(id).copied()
    }

    pub fn qkd_links(&self) -> impl Iterator<Item = (&Edge, u64)> {
        self.qkd.iter().map(|(e, r)| (e, *r))
    }

    pub fn pqc_links(&self) -> impl Iterator<Item = &Edge> {
        self.pqc.iter()
    }

    pub fn qkd_rate(&self, a: &str, b: &str) -> Option<u64> {
        self.qkd.get(&Edge::new(a, b)).copied()
    }

    fn shortest<'a, I>(&self, src: &str, dst: &str, edges: I) -> Result<Option<Vec<String>>, NetError>
    where
        I: Iterator<Item = &'a Edge>,
    {
        for n in [src, dst] {
            if !self.nodes.contains_key(n) {
                return Err(NetError::UnknownNode(n.to_string()));
            }
        }
        let mut adj: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for e in edges {
            adj.entry(&e.0).or_default().insert(&e.1);
            adj.entry(&e.1).or_default().insert(&e.0);
        }
        let mut prev: BTreeMap<&str, &str> = BTreeMap::new();
        let mut queue = VecDeque::from([src]);
        let mut seen = BTreeSet::from([src]);
        while let Some(u) = queue.pop_front() {
            if u == dst {
                let mut path = vec![dst.to_string()];
                let mut cur = dst;
                while let Some(&p) = prev.get(cur) {
                    path.push(p.to_string());
                    cur = p;
                }
                path.reverse();
                return Ok(Some(path));
            }
            for &v in adj.get(u).into_iter().flatten() {
                if seen.insert(v) {
                    prev.insert(v, u);
                    queue.push_back(v);
                }
            }
        }
        Ok(None)
    }

    /// Fewest-hop QKD route; among equal lengths, neighbours are explored in
    /// ascending id order.
    pub fn qkd_path(&self, src: &str, dst: &str) -> Result<Option<Vec<String>>, NetError> {
        self.shortest(src, dst, self.qkd.keys())
    }

    pub fn pqc_path(&self, src: &str, dst: &str) -> Result<Option<Vec<String>>, NetError> {
        self.shortest(src, dst, self.pqc.iter())
    }
}

/// Pre-shared symmetric keys a fully meshed network of `n` nodes needs.
pub fn preshared_pairs_count(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}
