//! Regenerates the shipped parity-check matrices in `data/ldpc/`.
//!
//!     cargo run --release -p hyqkd --example gen_ldpc -- crates/core/data/ldpc
//!
//! Each code has column weight 3 and near-uniform row weight, built greedily
//! (lowest-degree check first) while refusing any edge that would close a
//! 4-cycle. The recorded `design_qber` is the largest grid error rate at which
//! at most one of `TRIALS` random blocks failed to decode.

use std::path::PathBuf;

use hyqkd::bits::Bits;
use hyqkd::postproc::ldpc::LdpcCode;
use hyqkd::rng::derive_rng;
use rand::seq::SliceRandom;
use rand::Rng;

const N: usize = 4096;
const COLUMN_WEIGHT: usize = 3;
const TRIALS: usize = 300;
const MAX_ITERATIONS: usize = 100;

fn build(n: usize, m: usize, seed: u64) -> Vec<Vec<u32>> {
    let mut rng = derive_rng(seed, "ldpc/construction");
    let mut rows: Vec<Vec<u32>> = vec![Vec::new(); m];
    let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut forbidden = vec![usize::MAX; m];

    for &v in &order {
        for _ in 0..COLUMN_WEIGHT {
            for &c in &cols[v] {
                forbidden[c] = v;
                for &u in &rows[c] {
                    for &c2 in &cols[u as usize] {
                        forbidden[c2] = v;
                    }
                }
            }
            let open = |c: usize, allow_cycles: bool| {
                (allow_cycles && !cols[v].contains(&c)) || forbidden[c] != v
            };
            let candidates = |allow_cycles: bool| -> Vec<usize> {
                let Some(min) = (0..m).filter(|&c| open(c, allow_cycles)).map(|c| rows[c].len()).min() else {
                    return Vec::new();
                };
                (0..m).filter(|&c| open(c, allow_cycles) && rows[c].len() == min).collect()
            };
            let mut pool = candidates(false);
            if pool.is_empty() {
                pool = candidates(true);
            }
            let c = pool[rng.random_range(0..pool.len())];
            rows[c].push(v as u32);
            cols[v].push(c);
        }
    }
    for r in &mut rows {
        r.sort_unstable();
    }
    rows
}

fn failures(code: &LdpcCode, qber: f64, seed: u64) -> usize {
    let mut rng = derive_rng(seed, &format!("ldpc/fer/{qber}"));
    (0..TRIALS)
        .filter(|_| {
            let x = Bits::random(&mut rng, code.n());
            let mut y = x.clone();
            for i in 0..code.n() {
                if rng.random_bool(qber) {
                    y.flip(i);
                }
            }
            match code.decode(&y, &code.syndrome(&x), qber, code.n(), MAX_ITERATIONS) {
                Some((z, _)) => z != x,
                None => true,
            }
        })
        .count()
}

fn main() {
    let out_dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "crates/core/data/ldpc".into()));
    for (tag, rate) in [
        ("r090", 0.9),
        ("r080", 0.8),
        ("r070", 0.7),
        ("r060", 0.6),
        ("r050", 0.5),
        ("r040", 0.4),
        ("r030", 0.3),
    ] {
        let m = ((1.0 - rate) * N as f64).round() as usize;
        let rows = build(N, m, 0x1d9c);
        let draft = LdpcCode::from_rows(tag, N, 0.0, rows.clone()).unwrap();
        let mut design = 0.0;
        let mut q = 0.002;
        while q < 0.2 {
            let f = failures(&draft, q, 7);
            eprintln!("{tag}: qber {q:.3} failures {f}/{TRIALS}");
            if f > 1 {
                break;
            }
            design = q;
            q += 0.002;
        }
        let code = LdpcCode::from_rows(tag, N, design, rows).unwrap();
        let path = out_dir.join(format!("v1_n{N}_{tag}.txt"));
        std::fs::write(&path, code.to_text()).unwrap();
        eprintln!("wrote {} (design_qber {design:.3})", path.display());
    }
}
