//! Python module `hyqkd`: scenarios, two-party sessions, relay networks,
//! one-time signatures and the risk helpers.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use hyqkd::apps;
use hyqkd::auth::{ots_keygen, ots_sign, ots_verify, OtsKeypair, OtsParams, OtsPublicKey, OtsSignature};
use hyqkd::bits::Bits;
use hyqkd::netsim::{self, HashPqc, HybridPolicy, NetworkTopology};
use hyqkd::postproc::ToeplitzSeed;
use hyqkd::rng::{derive_rng, derive_seed};
use hyqkd::scenario::{self, SweepParam};
use hyqkd::session::{self, RoundOutcome};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn bits_from(bits: Vec<u8>) -> PyResult<Bits> {
    if bits.iter().any(|&b| b > 1) {
        return Err(PyValueError::new_err("bit lists may only contain 0 and 1"));
    }
    Ok(Bits::from_bits(bits))
}

/// A validated scenario, parsed from TOML text.
#[pyclass(module = "hyqkd")]
struct Scenario {
    inner: scenario::Scenario,
}

#[pymethods]
impl Scenario {
    #[staticmethod]
    #[pyo3(signature = (text, base_dir = None))]
    fn from_toml(text: &str, base_dir: Option<&str>) -> PyResult<Self> {
        let inner = scenario::Scenario::from_toml_str(text, base_dir.map(std::path::Path::new)).map_err(value_err)?;
        Ok(Scenario { inner })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let inner = scenario::Scenario::load(std::path::Path::new(path)).map_err(value_err)?;
        Ok(Scenario { inner })
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    #[getter]
    fn rounds(&self) -> u32 {
        self.inner.rounds
    }

    #[getter]
    fn digest(&self) -> String {
        self.inner.digest.clone()
    }

    /// Returns `(exit_code, {file_name: contents})`.
    #[pyo3(signature = (transcripts = false))]
    fn run(&self, transcripts: bool) -> (i32, BTreeMap<String, String>) {
        let out = scenario::run_scenario(&self.inner, transcripts);
        (out.status.code(), out.files)
    }

    fn sweep(&self, param: &str, values: Vec<f64>) -> PyResult<String> {
        let p: SweepParam = param.parse().map_err(value_err)?;
        scenario::sweep(&self.inner, p, &values).map_err(value_err)
    }
}

/// Per-round summary, mirroring one row of `report.csv`.
#[pyclass(module = "hyqkd", get_all)]
struct RoundReport {
    round: u32,
    auth_mode: String,
    n_pulses: usize,
    n_detected: usize,
    n_sifted: usize,
    sample_size: usize,
    e_x: Option<f64>,
    decision: String,
    abort_reason: Option<String>,
    code: Option<String>,
    leaked_bits: u64,
    final_len: usize,
    keys_equal: bool,
    app_key_len: usize,
    auth_consumed: usize,
    pool_after: usize,
    alice_key: Py<PyBytes>,
    bob_key: Py<PyBytes>,
}

#[pymethods]
impl RoundReport {
    fn __repr__(&self) -> String {
        format!(
            "RoundReport(round={}, auth_mode={:?}, n_sifted={}, e_x={:?}, decision={:?}, final_len={})",
            self.round, self.auth_mode, self.n_sifted, self.e_x, self.decision, self.final_len
        )
    }
}

/// Alice and Bob running chained rounds from one master seed.
#[pyclass(module = "hyqkd")]
struct Session {
    inner: session::Session,
}

#[pymethods]
impl Session {
    #[new]
    #[pyo3(signature = (scenario, seed = None))]
    fn new(scenario: &Scenario, seed: Option<u64>) -> PyResult<Self> {
        let inner = session::Session::new(scenario.inner.session_config(), seed.unwrap_or(scenario.inner.seed))
            .map_err(value_err)?;
        Ok(Session { inner })
    }

    #[getter]
    fn rounds_run(&self) -> u32 {
        self.inner.rounds_run()
    }

    /// Runs one round; protocol failures raise `RuntimeError`.
    fn run_round(&mut self, py: Python<'_>) -> PyResult<RoundReport> {
        let r = self.inner.run_round().map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        let rep = r.report;
        let key = |k: &Option<hyqkd::postproc::KeyMaterial>| {
            PyBytes::new(py, &k.as_ref().map(|k| k.bits().to_bytes()).unwrap_or_default()).unbind()
        };
        let (decision, abort_reason) = match rep.outcome {
            RoundOutcome::Completed => ("proceed".to_string(), None),
            RoundOutcome::Aborted(a) => ("abort".to_string(), Some(a.code().to_string())),
        };
        Ok(RoundReport {
            round: rep.round,
            auth_mode: rep.auth_mode.to_string(),
            n_pulses: rep.n_pulses,
            n_detected: rep.n_detected,
            n_sifted: rep.n_sifted,
            sample_size: rep.sample_size,
            e_x: rep.e_x,
            decision,
            abort_reason,
            code: rep.code_name.map(str::to_string),
            leaked_bits: rep.ledger.total(),
            final_len: rep.final_len,
            keys_equal: rep.keys_equal,
            app_key_len: rep.app_key_len,
            auth_consumed: rep.auth_consumed,
            pool_after: rep.pool_after,
            alice_key: key(&r.alice_app_key),
            bob_key: key(&r.bob_app_key),
        })
    }
}

/// Trusted-relay network with a deterministic post-quantum stand-in.
#[pyclass(module = "hyqkd")]
struct Network {
    inner: netsim::Network<HashPqc>,
}

#[pymethods]
impl Network {
    #[new]
    #[pyo3(signature = (topology, seed = 0))]
    fn new(topology: &str, seed: u64) -> PyResult<Self> {
        let topo = NetworkTopology::parse(topology).map_err(value_err)?;
        let kem = HashPqc::new(derive_seed(seed, "network/pqc-secret"));
        Ok(Network {
            inner: netsim::Network::new(topo, derive_rng(seed, "network/links"), kem),
        })
    }

    fn break_pqc(&mut self, a: &str, b: &str) {
        self.inner.kem_mut().break_pair(a, b);
    }

    /// Returns `(session_id, path, key_bytes)`.
    fn establish(&mut self, py: Python<'_>, src: &str, dst: &str, policy: &str, key_len: usize) -> PyResult<(usize, Vec<String>, Py<PyBytes>)> {
        let policy: HybridPolicy = policy.parse().map_err(value_err)?;
        let k = self.inner.hybrid_establish(src, dst, policy, key_len).map_err(value_err)?;
        Ok((k.id, k.path, PyBytes::new(py, &k.src_key.to_bytes()).unbind()))
    }

    fn remaining_budget(&self, a: &str, b: &str) -> Option<u64> {
        self.inner.remaining_budget(a, b)
    }

    /// Session ids whose keys the node learns if compromised.
    fn compromise(&self, node: &str) -> PyResult<Vec<usize>> {
        let s = netsim::compromise_node(self.inner.topology(), node, &self.inner.log).map_err(value_err)?;
        Ok(s.into_iter().collect())
    }

    fn csv(&self) -> String {
        netsim::network_csv(self.inner.topology(), &self.inner.log)
    }
}

/// A one-time signature key pair; a second `sign` raises `RuntimeError`.
#[pyclass(module = "hyqkd")]
struct OtsKey {
    inner: OtsKeypair,
}

#[pymethods]
impl OtsKey {
    #[new]
    #[pyo3(signature = (seed, scheme = "lamport", w = 4, preimage_bits = 256, digest_bits = 256))]
    fn new(seed: u64, scheme: &str, w: u8, preimage_bits: usize, digest_bits: usize) -> PyResult<Self> {
        let params = match scheme {
            "lamport" => OtsParams::lamport(preimage_bits, digest_bits),
            "winternitz" => OtsParams::winternitz(w, preimage_bits, digest_bits),
            _ => return Err(PyValueError::new_err("scheme must be `lamport` or `winternitz`")),
        };
        let inner = ots_keygen(&mut derive_rng(seed, "python/ots"), params).map_err(value_err)?;
        Ok(OtsKey { inner })
    }

    fn public_key<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.inner.public().to_blob())
    }

    /// Signature as a list of byte strings.
    fn sign(&mut self, message: &[u8]) -> PyResult<Vec<Vec<u8>>> {
        let sig = ots_sign(&Bits::from_bytes(message), &mut self.inner).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        Ok(sig.values)
    }
}

#[pyfunction]
fn ots_verify_blob(public_key: &[u8], message: &[u8], signature: Vec<Vec<u8>>) -> PyResult<bool> {
    let pk = OtsPublicKey::from_blob(public_key).map_err(value_err)?;
    Ok(ots_verify(&Bits::from_bytes(message), &OtsSignature { values: signature }, &pk))
}

/// Toeplitz hash of `key` (one 0/1 value per element) with a seed of
/// `in + out - 1` bits. Returns `bytes` holding one output bit per byte.
#[pyfunction]
fn toeplitz_hash(seed: Vec<u8>, key: Vec<u8>, out_len: usize) -> PyResult<Vec<u8>> {
    let key = bits_from(key)?;
    let t = ToeplitzSeed::new(bits_from(seed)?, key.len(), out_len).map_err(value_err)?;
    Ok(t.hash(&key).map_err(value_err)?.iter().collect())
}

/// Returns `(verdict, slack)` with verdict `"at-risk"` or `"safe"`.
#[pyfunction]
fn mosca_check(shelf_life: f64, migration: f64, threat_horizon: f64) -> PyResult<(String, f64)> {
    let p = apps::MoscaParams::new(shelf_life, migration, threat_horizon).map_err(value_err)?;
    let a = apps::mosca_check(&p);
    let v = match a.verdict {
        apps::MoscaVerdict::AtRisk => "at-risk",
        apps::MoscaVerdict::Safe => "safe",
    };
    Ok((v.to_string(), a.slack))
}

#[pyfunction]
fn grover_adjusted_length(classical_len: usize) -> PyResult<usize> {
    apps::grover_adjusted_length(classical_len).map_err(value_err)
}

#[pyfunction]
fn preshared_pairs_count(n: u64) -> u64 {
    netsim::preshared_pairs_count(n)
}

#[pymodule]
#[pyo3(name = "hyqkd")]
fn hyqkd_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Scenario>()?;
    m.add_class::<Session>()?;
    m.add_class::<RoundReport>()?;
    m.add_class::<Network>()?;
    m.add_class::<OtsKey>()?;
    m.add_function(wrap_pyfunction!(ots_verify_blob, m)?)?;
    m.add_function(wrap_pyfunction!(toeplitz_hash, m)?)?;
    m.add_function(wrap_pyfunction!(mosca_check, m)?)?;
    m.add_function(wrap_pyfunction!(grover_adjusted_length, m)?)?;
    m.add_function(wrap_pyfunction!(preshared_pairs_count, m)?)?;
    Ok(())
}
