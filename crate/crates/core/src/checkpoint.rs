//! Plain-text parameter checkpoints.
//!
//! ```text
//! flowrl-checkpoint 1
//! dim 2
//! time_freqs 3
//! emb_dim 8
//! prompts 16
//! layer 0 19 64 tanh        # index, in, out, activation ("linear" for the output layer)
//! layer 1 64 2 linear
//! w 0 5 3 -0.118...         # weight: layer, row, col, value
//! b 0 5 0.0071...           # bias: layer, row, value
//! e 4 2 0.25                # embedding: prompt, col, value
//! end
//! ```
//!
//! Values use Rust's shortest round-trip float formatting, so a written
//! checkpoint reads back bit-identically.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{Activation, Layer, MlpParams};
use crate::policy::VelocityNet;

const MAGIC: &str = "flowrl-checkpoint 1";

pub fn write_checkpoint<W: Write>(net: &VelocityNet, out: &mut W) -> Result<()> {
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "dim {}", net.dim)?;
    writeln!(out, "time_freqs {}", net.time_freqs)?;
    writeln!(out, "emb_dim {}", net.emb_dim)?;
    writeln!(out, "prompts {}", net.n_prompts)?;
    let last = net.mlp.layers.len() - 1;
    for (k, layer) in net.mlp.layers.iter().enumerate() {
        let act = if k < last { net.mlp.activations[k].name() } else { "linear" };
        writeln!(out, "layer {k} {} {} {act}", layer.in_dim, layer.out_dim)?;
    }
    for (k, layer) in net.mlp.layers.iter().enumerate() {
        for row in 0..layer.out_dim {
            for col in 0..layer.in_dim {
                writeln!(out, "w {k} {row} {col} {:?}", layer.weight(row, col))?;
            }
        }
        for (row, b) in layer.bias.iter().enumerate() {
            writeln!(out, "b {k} {row} {b:?}")?;
        }
    }
    for p in 0..net.n_prompts {
        for c in 0..net.emb_dim {
            writeln!(out, "e {p} {c} {:?}", net.embeddings[p * net.emb_dim + c])?;
        }
    }
    writeln!(out, "end")?;
    Ok(())
}

pub fn save(net: &VelocityNet, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint(net, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<VelocityNet> {
    if !path.exists() {
        return Err(Error::MissingCheckpoint(path.to_path_buf()));
    }
    read_checkpoint(BufReader::new(fs::File::open(path)?))
}

fn bad(line: usize, msg: impl Into<String>) -> Error {
    Error::Checkpoint(format!("line {line}: {}", msg.into()))
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    tok.ok_or_else(|| bad(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| bad(line, format!("unparsable {what}")))
}

pub fn read_checkpoint<R: BufRead>(reader: R) -> Result<VelocityNet> {
    let mut dim = None;
    let mut time_freqs = None;
    let mut emb_dim = None;
    let mut prompts = None;
    let mut shapes: Vec<(usize, usize, Option<Activation>)> = Vec::new();
    let mut layers: Vec<Layer> = Vec::new();
    let mut filled: Vec<Vec<bool>> = Vec::new();
    let mut embeddings: Vec<f64> = Vec::new();
    let mut emb_filled: Vec<bool> = Vec::new();
    let mut saw_magic = false;
    let mut saw_end = false;

    for (idx, line) in reader.lines().enumerate() {
        let n = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if !saw_magic {
            if line != MAGIC {
                return Err(bad(n, "not a flowrl checkpoint"));
            }
            saw_magic = true;
            continue;
        }
        if saw_end {
            return Err(bad(n, "content after end marker"));
        }
        let mut toks = line.split_whitespace();
        let kind = toks.next().unwrap_or_default();
        match kind {
            "dim" => dim = Some(field::<usize>(toks.next(), n, "dim")?),
            "time_freqs" => time_freqs = Some(field::<usize>(toks.next(), n, "time_freqs")?),
            "emb_dim" => emb_dim = Some(field::<usize>(toks.next(), n, "emb_dim")?),
            "prompts" => {
                let p = field::<usize>(toks.next(), n, "prompts")?;
                let e = emb_dim.ok_or_else(|| bad(n, "prompts before emb_dim"))?;
                prompts = Some(p);
                embeddings = vec![0.0; p * e];
                emb_filled = vec![false; p * e];
            }
            "layer" => {
                let k: usize = field(toks.next(), n, "layer index")?;
                if k != shapes.len() {
                    return Err(bad(n, "layers must be declared in order"));
                }
                let i: usize = field(toks.next(), n, "in_dim")?;
                let o: usize = field(toks.next(), n, "out_dim")?;
                let act = toks.next().ok_or_else(|| bad(n, "missing activation"))?;
                let act = if act == "linear" {
                    None
                } else {
                    Some(Activation::parse(act).ok_or_else(|| bad(n, "unknown activation"))?)
                };
                shapes.push((i, o, act));
                layers.push(Layer::zeros(i, o));
                filled.push(vec![false; i * o + o]);
            }
            "w" | "b" => {
                let k: usize = field(toks.next(), n, "layer index")?;
                let layer = layers.get_mut(k).ok_or_else(|| bad(n, "undeclared layer"))?;
                let row: usize = field(toks.next(), n, "row")?;
                if row >= layer.out_dim {
                    return Err(bad(n, "row out of range"));
                }
                let slot = if kind == "w" {
                    let col: usize = field(toks.next(), n, "col")?;
                    if col >= layer.in_dim {
                        return Err(bad(n, "col out of range"));
                    }
                    row * layer.in_dim + col
                } else {
                    layer.in_dim * layer.out_dim + row
                };
                let value: f64 = field(toks.next(), n, "value")?;
                if !value.is_finite() {
                    return Err(bad(n, "non-finite value"));
                }
                if std::mem::replace(&mut filled[k][slot], true) {
                    return Err(bad(n, "duplicate record"));
                }
                if kind == "w" {
                    layer.weights[slot] = value;
                } else {
                    layer.bias[row] = value;
                }
            }
            "e" => {
                let e = emb_dim.ok_or_else(|| bad(n, "embedding before emb_dim"))?;
                let p: usize = field(toks.next(), n, "prompt")?;
                let c: usize = field(toks.next(), n, "col")?;
                if prompts.is_none_or(|np| p >= np) || c >= e {
                    return Err(bad(n, "embedding index out of range"));
                }
                let value: f64 = field(toks.next(), n, "value")?;
                if !value.is_finite() {
                    return Err(bad(n, "non-finite value"));
                }
                if std::mem::replace(&mut emb_filled[p * e + c], true) {
                    return Err(bad(n, "duplicate record"));
                }
                embeddings[p * e + c] = value;
            }
            "end" => saw_end = true,
            other => return Err(bad(n, format!("unknown record kind {other:?}"))),
        }
        if toks.next().is_some() {
            return Err(bad(n, "trailing tokens"));
        }
    }
    if !saw_end {
        return Err(Error::Checkpoint("truncated: no end marker".into()));
    }
    if filled.iter().flatten().chain(emb_filled.iter()).any(|f| !f) {
        return Err(Error::Checkpoint("missing parameter records".into()));
    }
    let last = shapes.len().saturating_sub(1);
    let mut activations = Vec::new();
    for (k, (_, _, act)) in shapes.iter().enumerate() {
        match (k < last, act) {
            (true, Some(a)) => activations.push(*a),
            (false, None) => {}
            _ => return Err(Error::Checkpoint(format!("layer {k} has the wrong activation kind"))),
        }
    }
    let missing = |what: &str| Error::Checkpoint(format!("missing {what} header"));
    let net = VelocityNet {
        mlp: MlpParams::new(layers, activations)?,
        dim: dim.ok_or_else(|| missing("dim"))?,
        time_freqs: time_freqs.ok_or_else(|| missing("time_freqs"))?,
        emb_dim: emb_dim.ok_or_else(|| missing("emb_dim"))?,
        n_prompts: prompts.ok_or_else(|| missing("prompts"))?,
        embeddings,
    };
    net.validate()?;
    Ok(net)
}
