//! Tensor text and JSON file formats.
//!
//! Text format, 1-based indices, `#` comments:
//!
//! ```text
//! p=1 alpha=3 n=2
//! 1 1 1  1.5578
//! 2 2 2  1.1226
//! ```
//!
//! For symmetric shapes one representative per within-group orbit suffices;
//! unspecified entries are zero. Serialization emits one canonical
//! representative per nonzero orbit with 17 significant digits, so
//! parse∘serialize is the identity.

use std::collections::HashMap;
use std::fmt::Write as _;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use tensor_dnn::{Shape, Tensor};

#[derive(Serialize, Deserialize)]
struct JsonTensor {
    p: usize,
    alpha: Vec<usize>,
    n: Vec<usize>,
    /// `[i_1, …, i_r, value]` rows, 1-based indices.
    entries: Vec<JsonEntry>,
}

#[derive(Serialize, Deserialize)]
struct JsonEntry {
    idx: Vec<usize>,
    value: f64,
}

pub fn parse(text: &str) -> Result<Tensor> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        return parse_json(text);
    }
    parse_text(text)
}

fn parse_header(line: &str) -> Result<Shape> {
    let mut p: Option<usize> = None;
    let mut alpha: Option<Vec<usize>> = None;
    let mut n: Option<Vec<usize>> = None;
    for tok in line.split_whitespace() {
        let (key, val) = tok
            .split_once('=')
            .ok_or_else(|| anyhow!("malformed header token {tok:?}"))?;
        match key {
            "p" => p = Some(val.parse().context("parsing p")?),
            "alpha" => {
                alpha = Some(
                    val.split(',')
                        .map(|s| s.parse().context("parsing alpha"))
                        .collect::<Result<_>>()?,
                )
            }
            "n" => {
                n = Some(
                    val.split(',')
                        .map(|s| s.parse().context("parsing n"))
                        .collect::<Result<_>>()?,
                )
            }
            other => bail!("unknown header key {other:?}"),
        }
    }
    let p = p.ok_or_else(|| anyhow!("header missing p="))?;
    let alpha = alpha.ok_or_else(|| anyhow!("header missing alpha="))?;
    let n = n.ok_or_else(|| anyhow!("header missing n="))?;
    if alpha.len() != p || n.len() != p {
        bail!(
            "header inconsistent: p={p} but {} orders and {} dims",
            alpha.len(),
            n.len()
        );
    }
    Ok(Shape::new(alpha, n)?)
}

fn parse_text(text: &str) -> Result<Tensor> {
    let mut lines = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty());
    let header = lines.next().ok_or_else(|| anyhow!("empty tensor file"))?;
    let shape = parse_header(header)?;
    let order = shape.order();
    let slot_dims = shape.slot_dims();
    let mut tensor = Tensor::zeros(shape);
    let mut seen: HashMap<Vec<usize>, f64> = HashMap::new();
    for (lineno, line) in lines.enumerate() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != order + 1 {
            bail!(
                "body line {} has {} fields, expected {} indices and a value",
                lineno + 2,
                toks.len(),
                order
            );
        }
        let mut idx = Vec::with_capacity(order);
        for (s, tok) in toks[..order].iter().enumerate() {
            let i: usize = tok.parse().with_context(|| format!("index {tok:?}"))?;
            if i == 0 || i > slot_dims[s] {
                bail!(
                    "index {i} out of range 1..={} in slot {}",
                    slot_dims[s],
                    s + 1
                );
            }
            idx.push(i - 1);
        }
        let value: f64 = toks[order]
            .parse()
            .with_context(|| format!("value {:?}", toks[order]))?;
        let canon = canonical_orbit_rep(&tensor, &idx);
        if let Some(&prev) = seen.get(&canon) {
            if prev != value {
                bail!(
                    "conflicting duplicate entry at indices {:?}: {prev} vs {value}",
                    idx.iter().map(|i| i + 1).collect::<Vec<_>>()
                );
            }
            continue;
        }
        seen.insert(canon, value);
        tensor.set_orbit(&idx, value);
    }
    Ok(tensor)
}

fn parse_json(text: &str) -> Result<Tensor> {
    let jt: JsonTensor = serde_json::from_str(text).context("parsing JSON tensor")?;
    if jt.alpha.len() != jt.p || jt.n.len() != jt.p {
        bail!(
            "JSON tensor inconsistent: p={} but {} orders",
            jt.p,
            jt.alpha.len()
        );
    }
    let shape = Shape::new(jt.alpha, jt.n)?;
    let order = shape.order();
    let slot_dims = shape.slot_dims();
    let mut tensor = Tensor::zeros(shape);
    let mut seen: HashMap<Vec<usize>, f64> = HashMap::new();
    for e in &jt.entries {
        if e.idx.len() != order {
            bail!("JSON entry has {} indices, expected {order}", e.idx.len());
        }
        let mut idx = Vec::with_capacity(order);
        for (s, &i) in e.idx.iter().enumerate() {
            if i == 0 || i > slot_dims[s] {
                bail!("index {i} out of range in slot {}", s + 1);
            }
            idx.push(i - 1);
        }
        let canon = canonical_orbit_rep(&tensor, &idx);
        if let Some(&prev) = seen.get(&canon) {
            if prev != e.value {
                bail!("conflicting duplicate entry at {:?}", e.idx);
            }
            continue;
        }
        seen.insert(canon, e.value);
        tensor.set_orbit(&idx, e.value);
    }
    Ok(tensor)
}

/// Within-group sorted representative of an index tuple.
fn canonical_orbit_rep(t: &Tensor, idx: &[usize]) -> Vec<usize> {
    let groups = t.shape().slot_groups();
    let p = t.shape().num_groups();
    let mut by_group: Vec<Vec<usize>> = vec![Vec::new(); p];
    for (s, &g) in groups.iter().enumerate() {
        by_group[g].push(idx[s]);
    }
    let mut out = Vec::with_capacity(idx.len());
    for mut v in by_group {
        v.sort_unstable();
        out.extend(v);
    }
    out
}

pub fn serialize(t: &Tensor) -> String {
    let shape = t.shape();
    let mut out = String::new();
    let alpha: Vec<String> = shape.alpha().iter().map(|a| a.to_string()).collect();
    let n: Vec<String> = shape.n().iter().map(|d| d.to_string()).collect();
    writeln!(
        out,
        "p={} alpha={} n={}",
        shape.num_groups(),
        alpha.join(","),
        n.join(",")
    )
    .unwrap();
    // one canonical representative per nonzero orbit
    let order = shape.order();
    let slot_dims = shape.slot_dims();
    let mut idx = vec![0usize; order];
    let total = shape.entry_count();
    let mut emitted: HashMap<Vec<usize>, ()> = HashMap::new();
    for flat in 0..total {
        let mut rem = flat;
        for k in (0..order).rev() {
            idx[k] = rem % slot_dims[k];
            rem /= slot_dims[k];
        }
        let canon = canonical_orbit_rep(t, &idx);
        if canon != idx {
            continue;
        }
        let v = t.get(&idx);
        if v == 0.0 {
            continue;
        }
        if emitted.insert(canon, ()).is_some() {
            continue;
        }
        let ones: Vec<String> = idx.iter().map(|i| (i + 1).to_string()).collect();
        writeln!(out, "{} {:.16e}", ones.join(" "), v).unwrap();
    }
    out
}

pub fn serialize_json(t: &Tensor) -> String {
    let shape = t.shape();
    let order = shape.order();
    let slot_dims = shape.slot_dims();
    let mut idx = vec![0usize; order];
    let mut entries = Vec::new();
    let mut seen: HashMap<Vec<usize>, ()> = HashMap::new();
    for flat in 0..shape.entry_count() {
        let mut rem = flat;
        for k in (0..order).rev() {
            idx[k] = rem % slot_dims[k];
            rem /= slot_dims[k];
        }
        let canon = canonical_orbit_rep(t, &idx);
        if canon != idx {
            continue;
        }
        let v = t.get(&idx);
        if v == 0.0 || seen.insert(canon, ()).is_some() {
            continue;
        }
        entries.push(JsonEntry {
            idx: idx.iter().map(|i| i + 1).collect(),
            value: v,
        });
    }
    let jt = JsonTensor {
        p: shape.num_groups(),
        alpha: shape.alpha().to_vec(),
        n: shape.n().to_vec(),
        entries,
    };
    serde_json::to_string_pretty(&jt).expect("serializing tensor")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_example_one_header() {
        let t = parse("p=1 alpha=3 n=2\n1 1 1 1.5578\n").unwrap();
        assert_eq!(t.get(&[0, 0, 0]), 1.5578);
        assert_eq!(t.shape().alpha(), &[3]);
    }

    #[test]
    fn orbit_replication() {
        let t = parse("p=1 alpha=3 n=2\n1 1 2 -2.4443\n").unwrap();
        assert_eq!(t.get(&[0, 1, 0]), -2.4443);
        assert_eq!(t.get(&[1, 0, 0]), -2.4443);
    }

    #[test]
    fn empty_body_is_zero_tensor() {
        let t = parse("p=2 alpha=1,1 n=2,3\n").unwrap();
        assert!(t.entries().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conflicting_duplicates_rejected() {
        assert!(parse("p=1 alpha=2 n=2\n1 2 1.0\n2 1 2.0\n").is_err());
        // agreeing duplicates pass
        assert!(parse("p=1 alpha=2 n=2\n1 2 1.0\n2 1 1.0\n").is_ok());
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(parse("p=1 alpha=2 n=2\n1 3 1.0\n").is_err());
        assert!(parse("p=1 alpha=2 n=2\n0 1 1.0\n").is_err());
    }

    #[test]
    fn round_trip_exact() {
        let text = "p=2 alpha=2,1 n=2,2\n1 1 1 0.12345678901234567\n1 2 2 -3.5e-9\n2 2 1 7.0\n";
        let t = parse(text).unwrap();
        let s = serialize(&t);
        let t2 = parse(&s).unwrap();
        assert_eq!(t.entries(), t2.entries());
        // json round trip
        let j = serialize_json(&t);
        let t3 = parse(&j).unwrap();
        assert_eq!(t.entries(), t3.entries());
    }

    #[test]
    fn comments_ignored() {
        let t = parse("# a tensor\np=1 alpha=2 n=2 # inline\n1 1 2.0 # entry\n").unwrap();
        assert_eq!(t.get(&[0, 0]), 2.0);
    }
}
