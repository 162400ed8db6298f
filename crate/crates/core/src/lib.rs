//! Deterministic simulator and protocol library for hybrid quantum-secured
//! key infrastructure: decoy-tagged BB84 over a lossy, possibly eavesdropped
//! channel, the classical post-processing pipeline, authenticated public
//! messaging, trusted-node relay networks, and key consumers.

pub mod apps;
pub mod auth;
pub mod bb84;
pub mod bits;
pub mod channel;
pub mod netsim;
pub mod postproc;
pub mod rng;
pub mod scenario;
pub mod session;
