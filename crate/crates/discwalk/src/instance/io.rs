//! Line-oriented text formats for instances and weight vectors.
//!
//! Instance files: `disc-instance v1 <n> <m> <mode>` followed by one line per
//! row, `j: i1:a1 i2:a2 ...`, 0-based indices, coefficients printed as
//! shortest round-trip decimals. Weight files: a `w v1` header followed by
//! one weight per line.

use super::{InstanceError, ModeHint, RowWeights, SparseInstance};
use crate::scalar::Scalar;

pub fn write_instance<S: Scalar>(inst: &SparseInstance<S>) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "disc-instance v1 {} {} {}\n",
        inst.n(),
        inst.m(),
        inst.mode().token()
    ));
    for j in 0..inst.m() {
        let (cols, vals) = inst.row(j);
        out.push_str(&format!("{j}:"));
        for (&c, &a) in cols.iter().zip(vals) {
            out.push_str(&format!(" {c}:{a}"));
        }
        out.push('\n');
    }
    out
}

pub fn parse_instance<S: Scalar>(text: &str) -> Result<SparseInstance<S>, InstanceError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != "disc-instance" || fields[1] != "v1" {
        return Err(parse_err(1, "expected header `disc-instance v1 <n> <m> <mode>`"));
    }
    let n: usize = fields[2].parse().map_err(|_| parse_err(1, "bad n"))?;
    let m: usize = fields[3].parse().map_err(|_| parse_err(1, "bad m"))?;
    let mode = match fields[4] {
        "setsystem" => ModeHint::SetSystem,
        "general" => ModeHint::General,
        other => return Err(parse_err(1, &format!("unknown mode `{other}`"))),
    };

    let mut rows: Vec<Vec<(u32, S)>> = Vec::with_capacity(m);
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (label, rest) = line
            .split_once(':')
            .ok_or_else(|| parse_err(lineno, "expected `j: ...`"))?;
        let j: usize = label.trim().parse().map_err(|_| parse_err(lineno, "bad row index"))?;
        if j != rows.len() {
            return Err(parse_err(lineno, &format!("row index {j} out of order")));
        }
        let mut entries = Vec::new();
        for tok in rest.split_whitespace() {
            let (is, as_) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(lineno, &format!("expected `i:a`, got `{tok}`")))?;
            let i: u32 = is.parse().map_err(|_| parse_err(lineno, "bad column index"))?;
            let a: S = as_
                .parse()
                .map_err(|_| parse_err(lineno, &format!("bad coefficient `{as_}`")))?;
            entries.push((i, a));
        }
        rows.push(entries);
    }
    if rows.len() != m {
        return Err(parse_err(0, &format!("expected {m} rows, found {}", rows.len())));
    }
    SparseInstance::from_rows(n, rows, mode)
}

pub fn write_weights<S: Scalar>(w: &RowWeights<S>) -> String {
    let mut out = String::from("w v1\n");
    for v in &w.0 {
        out.push_str(&format!("{v}\n"));
    }
    out
}

pub fn parse_weights<S: Scalar>(text: &str) -> Result<RowWeights<S>, InstanceError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    if header.trim() != "w v1" {
        return Err(parse_err(1, "expected header `w v1`"));
    }
    let mut w = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let v: S = line
            .trim()
            .parse()
            .map_err(|_| parse_err(idx + 1, &format!("bad weight `{}`", line.trim())))?;
        w.push(v);
    }
    Ok(RowWeights(w))
}

/// FNV-1a content fingerprint, hex-encoded. Used to tie reports to the
/// instance file they were produced from.
pub fn fingerprint(text: &str) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in text.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

fn parse_err(line: usize, msg: &str) -> InstanceError {
    InstanceError::Parse { line, msg: msg.to_string() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate, Family};

    #[test]
    fn round_trips_set_system() {
        let inst = generate::<f64>(&Family::FanoPlane, 0).unwrap();
        let text = write_instance(&inst);
        assert!(text.starts_with("disc-instance v1 7 7 setsystem\n"));
        let back = parse_instance::<f64>(&text).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn round_trips_general_floats() {
        let inst = generate::<f64>(&Family::KomlosRandom { n: 6, m: 5 }, 9).unwrap();
        let text = write_instance(&inst);
        let back = parse_instance::<f64>(&text).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_instance::<f64>("nope\n").is_err());
        assert!(parse_instance::<f64>("disc-instance v1 2 1 setsystem\n1: 0:1\n").is_err());
        assert!(parse_instance::<f64>("disc-instance v1 2 1 setsystem\n0: 0:x\n").is_err());
    }

    #[test]
    fn weights_round_trip() {
        let w = RowWeights(vec![1.0f64, 0.5, 2.25]);
        let text = write_weights(&w);
        assert_eq!(parse_weights::<f64>(&text).unwrap(), w);
    }

    #[test]
    fn fingerprint_is_stable() {
        assert_eq!(fingerprint("abc"), fingerprint("abc"));
        assert_ne!(fingerprint("abc"), fingerprint("abd"));
    }
}
