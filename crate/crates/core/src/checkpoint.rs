//! Plain-text checkpoint files.
//!
//! ```text
//! curvo-checkpoint 1
//! kind ddpg-agents
//! meta hidden relu
//! tensor flow.actor.l0.weight 64 2
//! <one line of space-separated values per row>
//! end
//! ```
//!
//! Values use shortest round-trip formatting, so a save/load cycle is exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{Activation, Mlp};

pub const MAGIC: &str = "curvo-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub kind: String,
    pub meta: BTreeMap<String, String>,
    pub tensors: Vec<Tensor>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

impl Checkpoint {
    pub fn new(kind: impl Into<String>) -> Self {
        Self {
            kind: kind.into(),
            ..Default::default()
        }
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        self.meta.insert(key.to_string(), value.to_string());
    }

    pub fn meta(&self, key: &str) -> Result<&str> {
        self.meta
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| bad(format!("missing meta key '{key}'")))
    }

    pub fn push(&mut self, name: impl Into<String>, rows: usize, cols: usize, data: Vec<f64>) {
        assert_eq!(rows * cols, data.len(), "tensor shape");
        self.tensors.push(Tensor {
            name: name.into(),
            rows,
            cols,
            data,
        });
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| bad(format!("missing tensor '{name}'")))
    }

    /// Stores each layer as `{prefix}.l{k}.weight` (out x in) and `{prefix}.l{k}.bias` (out x 1),
    /// with the activations in meta.
    pub fn push_mlp(&mut self, prefix: &str, net: &Mlp) {
        self.set_meta(&format!("{prefix}.hidden"), net.hidden_activation().name());
        self.set_meta(&format!("{prefix}.output"), net.output_activation().name());
        let sizes = net.sizes();
        for l in 0..net.num_layers() {
            let (start, end) = net.layer_range(l);
            let (ni, no) = (sizes[l], sizes[l + 1]);
            let p = &net.params()[start..end];
            self.push(format!("{prefix}.l{l}.weight"), no, ni, p[..ni * no].to_vec());
            self.push(format!("{prefix}.l{l}.bias"), no, 1, p[ni * no..].to_vec());
        }
    }

    pub fn mlp(&self, prefix: &str) -> Result<Mlp> {
        let act = |key: &str| -> Result<Activation> {
            let name = self.meta(&format!("{prefix}.{key}"))?;
            Activation::from_name(name).ok_or_else(|| bad(format!("unknown activation '{name}'")))
        };
        let (hidden, output) = (act("hidden")?, act("output")?);
        let mut sizes = Vec::new();
        let mut params = Vec::new();
        let mut l = 0;
        while let Ok(w) = self.tensor(&format!("{prefix}.l{l}.weight")) {
            let b = self.tensor(&format!("{prefix}.l{l}.bias"))?;
            if b.rows != w.rows || b.cols != 1 {
                return Err(bad(format!("{prefix} layer {l}: bias shape {}x{}", b.rows, b.cols)));
            }
            match sizes.last() {
                None => sizes.push(w.cols),
                Some(prev) if *prev != w.cols => {
                    return Err(bad(format!("{prefix} layer {l}: input {} does not chain from {prev}", w.cols)));
                }
                _ => {}
            }
            sizes.push(w.rows);
            params.extend_from_slice(&w.data);
            params.extend_from_slice(&b.data);
            l += 1;
        }
        if l == 0 {
            return Err(bad(format!("no layers under '{prefix}'")));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(bad(format!("non-finite parameter in '{prefix}'")));
        }
        Ok(Mlp::from_params(&sizes, hidden, output, params).expect("sizes derived from tensors"))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{MAGIC} {VERSION}").unwrap();
        writeln!(out, "kind {}", self.kind).unwrap();
        for (k, v) in &self.meta {
            writeln!(out, "meta {k} {v}").unwrap();
        }
        for t in &self.tensors {
            writeln!(out, "tensor {} {} {}", t.name, t.rows, t.cols).unwrap();
            for r in 0..t.rows {
                let row: Vec<String> = t.data[r * t.cols..(r + 1) * t.cols].iter().map(|v| format!("{v:?}")).collect();
                writeln!(out, "{}", row.join(" ")).unwrap();
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty checkpoint"))?;
        match header.split_whitespace().collect::<Vec<_>>().as_slice() {
            [m, v] if *m == MAGIC => {
                if v.parse::<u32>().ok() != Some(VERSION) {
                    return Err(bad(format!("unsupported checkpoint version '{v}'")));
                }
            }
            _ => return Err(bad("not a checkpoint file")),
        }
        let mut ck = Checkpoint::default();
        let mut ended = false;
        while let Some(line) = lines.next() {
            let mut it = line.splitn(2, ' ');
            let (tag, rest) = (it.next().unwrap_or(""), it.next().unwrap_or(""));
            match tag {
                "kind" => ck.kind = rest.to_string(),
                "meta" => {
                    let (k, v) = rest.split_once(' ').ok_or_else(|| bad(format!("bad meta line '{line}'")))?;
                    ck.meta.insert(k.to_string(), v.to_string());
                }
                "tensor" => {
                    let f: Vec<&str> = rest.split_whitespace().collect();
                    let [name, rows, cols] = f.as_slice() else {
                        return Err(bad(format!("bad tensor header '{line}'")));
                    };
                    let rows: usize = rows.parse().map_err(|_| bad(format!("bad row count in '{line}'")))?;
                    let cols: usize = cols.parse().map_err(|_| bad(format!("bad column count in '{line}'")))?;
                    let mut data = Vec::with_capacity(rows * cols);
                    for _ in 0..rows {
                        let row = lines.next().ok_or_else(|| bad(format!("truncated tensor '{name}'")))?;
                        let before = data.len();
                        for v in row.split_whitespace() {
                            data.push(v.parse::<f64>().map_err(|_| bad(format!("bad value '{v}' in '{name}'")))?);
                        }
                        if data.len() - before != cols {
                            return Err(bad(format!("tensor '{name}': row with {} values, expected {cols}", data.len() - before)));
                        }
                    }
                    ck.tensors.push(Tensor {
                        name: name.to_string(),
                        rows,
                        cols,
                        data,
                    });
                }
                "end" => {
                    ended = true;
                    break;
                }
                "" => {}
                other => return Err(bad(format!("unknown record '{other}'"))),
            }
        }
        if !ended {
            return Err(bad("missing end marker"));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mlp_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::random(&[3, 5, 4, 2], Activation::Relu, Activation::Sigmoid, 0.3, &mut rng);
        let mut ck = Checkpoint::new("test");
        ck.set_meta("note", "two words");
        ck.push_mlp("net", &net);
        let back = Checkpoint::from_text(&ck.to_text()).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.mlp("net").unwrap(), net);
        assert_eq!(back.meta("note").unwrap(), "two words");
    }

    #[test]
    fn rejects_corruption() {
        let mut ck = Checkpoint::new("test");
        ck.push("a", 2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let text = ck.to_text();
        assert!(Checkpoint::from_text("hello\n").is_err());
        assert!(Checkpoint::from_text(&text.replace("curvo-checkpoint 1", "curvo-checkpoint 9")).is_err());
        assert!(Checkpoint::from_text(&text.replace("3.0 4.0", "3.0")).is_err());
        assert!(Checkpoint::from_text(&text.replace("end\n", "")).is_err());
        assert!(ck.mlp("missing").is_err());
    }
}
