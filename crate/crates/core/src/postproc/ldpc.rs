//! LDPC parity-check matrices and a sum-product syndrome decoder.
//!
//! Matrices ship as text files under `data/ldpc/`:
//!
//! ```text
//! # hyqkd-ldpc v1
//! # name=r050 n=4096 m=2048 design_qber=0.060
//! 12 907 3301 3998 ...
//! ...
//! ```
//!
//! The first line is the format tag; the second carries the parameters.
//! Every following non-comment line is one check row: the column indices
//! (0-based, space-separated) of its nonzero entries.

use std::collections::HashMap;
use std::fmt;

use super::PostprocError;
use crate::bits::Bits;

pub const FORMAT_TAG: &str = "# hyqkd-ldpc v1";

#[derive(Clone, PartialEq)]
pub struct LdpcCode {
    name: String,
    n: usize,
    design_qber: f64,
    rows: Vec<Vec<u32>>,
    cols: Vec<Vec<u32>>,
}

impl fmt::Debug for LdpcCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LdpcCode")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("m", &self.rows.len())
            .field("design_qber", &self.design_qber)
            .finish()
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> PostprocError {
    PostprocError::CodeFormat {
        line,
        message: msg.into(),
    }
}

impl LdpcCode {
    pub fn from_rows(name: &str, n: usize, design_qber: f64, rows: Vec<Vec<u32>>) -> Result<Self, PostprocError> {
        let mut cols = vec![Vec::new(); n];
        for (r, row) in rows.iter().enumerate() {
            for &c in row {
                let c = c as usize;
                if c >= n {
                    return Err(parse_err(r + 3, format!("column {c} out of range for n={n}")));
                }
                cols[c].push(r as u32);
            }
        }
        Ok(LdpcCode {
            name: name.to_string(),
            n,
            design_qber,
            rows,
            cols,
        })
    }

    pub fn parse(text: &str) -> Result<Self, PostprocError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l.trim() == FORMAT_TAG => {}
            _ => return Err(parse_err(1, format!("expected '{FORMAT_TAG}'"))),
        }
        let (_, header) = lines.next().ok_or_else(|| parse_err(2, "missing parameter line"))?;
        let params: HashMap<&str, &str> = header
            .trim_start_matches('#')
            .split_whitespace()
            .filter_map(|kv| kv.split_once('='))
            .collect();
        let get = |k: &str| params.get(k).copied().ok_or_else(|| parse_err(2, format!("missing '{k}'")));
        let name = get("name")?;
        let n: usize = get("n")?.parse().map_err(|_| parse_err(2, "bad n"))?;
        let m: usize = get("m")?.parse().map_err(|_| parse_err(2, "bad m"))?;
        let design_qber: f64 = get("design_qber")?.parse().map_err(|_| parse_err(2, "bad design_qber"))?;

        let mut rows = Vec::with_capacity(m);
        for (i, line) in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|t| t.parse::<u32>().map_err(|_| parse_err(i + 1, format!("bad column index '{t}'"))))
                .collect::<Result<Vec<_>, _>>()?;
            if let Some(&c) = row.iter().find(|&&c| c as usize >= n) {
                return Err(parse_err(i + 1, format!("column {c} out of range for n={n}")));
            }
            rows.push(row);
        }
        if rows.len() != m {
            return Err(parse_err(2, format!("header says m={m} but found {} rows", rows.len())));
        }
        Self::from_rows(name, n, design_qber, rows)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{FORMAT_TAG}\n# name={} n={} m={} design_qber={:.3}\n",
            self.name,
            self.n,
            self.rows.len(),
            self.design_qber
        );
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(u32::to_string).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Block length.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of checks, i.e. syndrome bits per block.
    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn rate(&self) -> f64 {
        1.0 - self.m() as f64 / self.n as f64
    }

    /// Highest error rate at which the shipped block decodes reliably.
    pub fn design_qber(&self) -> f64 {
        self.design_qber
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.rows
    }

    pub fn syndrome(&self, word: &Bits) -> Bits {
        assert_eq!(word.len(), self.n, "syndrome of a word with wrong length");
        let w = word.as_slice();
        self.rows
            .iter()
            .map(|row| row.iter().fold(0u8, |acc, &c| acc ^ w[c as usize]))
            .collect()
    }

    /// Sum-product decoding of `noisy` toward the word whose syndrome is
    /// `target`, assuming a binary symmetric channel with crossover `qber`.
    ///
    /// Positions at or beyond `known_from` are known exactly (shortened block).
    /// Returns the decoded word and the iteration count, or `None` if no
    /// word with the target syndrome was reached.
    pub fn decode(
        &self,
        noisy: &Bits,
        target: &Bits,
        qber: f64,
        known_from: usize,
        max_iterations: usize,
    ) -> Option<(Bits, usize)> {
        assert_eq!(noisy.len(), self.n);
        assert_eq!(target.len(), self.m());
        if &self.syndrome(noisy) == target {
            return Some((noisy.clone(), 0));
        }

        const CLAMP: f64 = 40.0;
        let q = qber.clamp(1e-6, 0.499);
        let channel = ((1.0 - q) / q).ln();
        let prior: Vec<f64> = (0..self.n)
            .map(|i| {
                let mag = if i >= known_from { CLAMP } else { channel };
                if noisy[i] == 0 {
                    mag
                } else {
                    -mag
                }
            })
            .collect();

        // Edge e belongs to check row_of[e] and variable var_of[e]; edges are
        // laid out row by row.
        let mut row_start = Vec::with_capacity(self.m() + 1);
        let mut var_of = Vec::new();
        row_start.push(0);
        for row in &self.rows {
            var_of.extend(row.iter().map(|&c| c as usize));
            row_start.push(var_of.len());
        }
        let mut var_edges: Vec<Vec<usize>> = vec![Vec::new(); self.n];
        for (e, &v) in var_of.iter().enumerate() {
            var_edges[v].push(e);
        }

        let mut v2c: Vec<f64> = var_of.iter().map(|&v| prior[v]).collect();
        let mut c2v = vec![0.0f64; var_of.len()];
        let mut tanh_buf = Vec::new();
        let mut hard = noisy.clone();

        for iteration in 1..=max_iterations {
            for c in 0..self.m() {
                let edges = row_start[c]..row_start[c + 1];
                tanh_buf.clear();
                tanh_buf.extend(edges.clone().map(|e| (v2c[e] / 2.0).tanh()));
                let sign = if target[c] == 1 { -1.0 } else { 1.0 };
                // prefix/suffix products avoid dividing by near-zero tanh values
                let k = tanh_buf.len();
                let mut prefix = 1.0;
                let mut suffix = vec![1.0; k + 1];
                for j in (0..k).rev() {
                    suffix[j] = suffix[j + 1] * tanh_buf[j];
                }
                for (j, e) in edges.enumerate() {
                    let p = (sign * prefix * suffix[j + 1]).clamp(-0.999_999_999_999, 0.999_999_999_999);
                    c2v[e] = (2.0 * p.atanh()).clamp(-CLAMP, CLAMP);
                    prefix *= tanh_buf[j];
                }
            }
            for v in 0..self.n {
                let total: f64 = prior[v] + var_edges[v].iter().map(|&e| c2v[e]).sum::<f64>();
                for &e in &var_edges[v] {
                    v2c[e] = (total - c2v[e]).clamp(-CLAMP, CLAMP);
                }
                hard.set(v, u8::from(total < 0.0));
            }
            if &self.syndrome(&hard) == target {
                return Some((hard, iteration));
            }
        }
        None
    }
}

macro_rules! shipped {
    ($($file:literal),* $(,)?) => {
        &[$(include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/data/ldpc/", $file))),*]
    };
}

/// Shipped matrix files, highest rate first.
const SHIPPED: &[&str] = shipped!(
    "v1_n4096_r090.txt",
    "v1_n4096_r080.txt",
    "v1_n4096_r070.txt",
    "v1_n4096_r060.txt",
    "v1_n4096_r050.txt",
    "v1_n4096_r040.txt",
    "v1_n4096_r030.txt",
);

/// The shipped code family, ordered from highest to lowest rate.
pub fn shipped_codes() -> &'static [LdpcCode] {
    use std::sync::OnceLock;
    static CODES: OnceLock<Vec<LdpcCode>> = OnceLock::new();
    CODES.get_or_init(|| {
        SHIPPED
            .iter()
            .map(|text| LdpcCode::parse(text).expect("shipped LDPC matrix must parse"))
            .collect()
    })
}

/// Highest-rate shipped code rated for `qber`; the lowest-rate code if none is.
pub fn select_code(qber: f64) -> &'static LdpcCode {
    let codes = shipped_codes();
    codes
        .iter()
        .find(|c| c.design_qber() >= qber)
        .unwrap_or_else(|| codes.last().expect("at least one shipped code"))
}

pub fn code_by_name(name: &str) -> Option<&'static LdpcCode> {
    shipped_codes().iter().find(|c| c.name() == name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;
    use rand::Rng;

    fn hamming_7_4() -> LdpcCode {
        LdpcCode::from_rows("h74", 7, 0.1, vec![vec![0, 1, 2, 4], vec![0, 1, 3, 5], vec![0, 2, 3, 6]]).unwrap()
    }

    #[test]
    fn text_roundtrip() {
        let code = hamming_7_4();
        let parsed = LdpcCode::parse(&code.to_text()).unwrap();
        assert_eq!(parsed.rows(), code.rows());
        assert_eq!(parsed.n(), 7);
        assert_eq!(parsed.name(), "h74");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = format!("{FORMAT_TAG}\n# name=x n=4 m=1 design_qber=0.1\n0 9\n");
        match LdpcCode::parse(&bad) {
            Err(PostprocError::CodeFormat { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(LdpcCode::parse("garbage").is_err());
        let short = format!("{FORMAT_TAG}\n# name=x n=4 m=2 design_qber=0.1\n0 1\n");
        assert!(LdpcCode::parse(&short).is_err());
    }

    #[test]
    fn zero_difference_converges_immediately() {
        let code = &shipped_codes()[0];
        let mut rng = derive_rng(1, "ldpc");
        let x = Bits::random(&mut rng, code.n());
        let s = code.syndrome(&x);
        let (y, iters) = code.decode(&x, &s, code.design_qber(), code.n(), 50).unwrap();
        assert_eq!(y, x);
        assert_eq!(iters, 0);
    }

    #[test]
    fn corrects_single_flip_in_every_code() {
        let mut rng = derive_rng(2, "ldpc");
        for code in shipped_codes() {
            let x = Bits::random(&mut rng, code.n());
            let mut y = x.clone();
            y.flip(rng.random_range(0..code.n()));
            let (z, _) = code.decode(&y, &code.syndrome(&x), 0.05, code.n(), 100).unwrap();
            assert_eq!(z, x, "{}", code.name());
        }
    }

    #[test]
    fn shipped_family_is_ordered() {
        let codes = shipped_codes();
        assert!(codes.len() >= 2);
        for w in codes.windows(2) {
            assert!(w[0].rate() > w[1].rate());
            assert!(w[0].design_qber() < w[1].design_qber());
        }
        assert_eq!(select_code(0.0).name(), codes[0].name());
        assert_eq!(select_code(0.49).name(), codes.last().unwrap().name());
    }
}
