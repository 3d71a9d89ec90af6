//! Portable text format for networks.
//!
//! ```text
//! net <input-width> <layer-count>
//! layer <width> <relu|identity> <dropout>
//! ...
//! weight <layer> <rows> <cols>
//! <row-major values, one matrix row per line>
//! bias <layer> <len>
//! <values>
//! end
//! ```
//!
//! Values use the shortest representation that parses back to the same
//! float, so a write/read cycle is exact.

use std::fmt::Write as _;

use super::matrix::Matrix;
use super::net::{Activation, Dense, LayerSpec, NetSpec, Params};
use crate::error::{Error, Result};
use crate::Scalar;

fn join<T: Scalar>(out: &mut String, values: &[T]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v}");
    }
    out.push('\n');
}

pub fn write_net<T: Scalar>(out: &mut String, spec: &NetSpec, params: &Params<T>) {
    let _ = writeln!(out, "net {} {}", spec.input, spec.layers.len());
    for l in &spec.layers {
        let _ = writeln!(out, "layer {} {} {}", l.width, l.activation.name(), l.dropout);
    }
    for (i, d) in params.layers.iter().enumerate() {
        let _ = writeln!(out, "weight {i} {} {}", d.weight.rows(), d.weight.cols());
        for row in d.weight.row_iter() {
            join(out, row);
        }
        let _ = writeln!(out, "bias {i} {}", d.bias.len());
        join(out, &d.bias);
    }
    out.push_str("end\n");
}

pub fn net_to_string<T: Scalar>(spec: &NetSpec, params: &Params<T>) -> String {
    let mut s = String::new();
    write_net(&mut s, spec, params);
    s
}

fn fmt_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

fn next_line<'a>(lines: &mut impl Iterator<Item = &'a str>) -> Result<&'a str> {
    loop {
        match lines.next() {
            Some(l) if l.trim().is_empty() => continue,
            Some(l) => return Ok(l.trim()),
            None => return Err(fmt_err("unexpected end of input")),
        }
    }
}

fn parse_num<N: std::str::FromStr>(tok: Option<&str>, what: &str) -> Result<N> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| fmt_err(format!("cannot parse {what}")))
}

fn parse_values<T: Scalar>(line: &str, expect: usize) -> Result<Vec<T>> {
    let v: Vec<T> = line
        .split_whitespace()
        .map(|t| t.parse::<T>().map_err(|_| fmt_err(format!("bad number '{t}'"))))
        .collect::<Result<_>>()?;
    if v.len() != expect {
        return Err(fmt_err(format!("expected {expect} values, found {}", v.len())));
    }
    Ok(v)
}

/// Reads one network block written by [`write_net`].
pub fn read_net<'a, T: Scalar>(lines: &mut impl Iterator<Item = &'a str>) -> Result<(NetSpec, Params<T>)> {
    let head = next_line(lines)?;
    let mut tok = head.split_whitespace();
    if tok.next() != Some("net") {
        return Err(fmt_err(format!("expected 'net', found '{head}'")));
    }
    let input: usize = parse_num(tok.next(), "input width")?;
    let count: usize = parse_num(tok.next(), "layer count")?;
    let mut layers = Vec::with_capacity(count);
    for _ in 0..count {
        let l = next_line(lines)?;
        let mut tok = l.split_whitespace();
        if tok.next() != Some("layer") {
            return Err(fmt_err(format!("expected 'layer', found '{l}'")));
        }
        let width = parse_num(tok.next(), "layer width")?;
        let activation = match tok.next() {
            Some("relu") => Activation::Relu,
            Some("identity") => Activation::Identity,
            other => return Err(fmt_err(format!("unknown activation {other:?}"))),
        };
        let dropout = parse_num(tok.next(), "dropout")?;
        layers.push(LayerSpec { width, activation, dropout });
    }
    let spec = NetSpec::new(input, layers)?;
    let mut dense = Vec::with_capacity(count);
    for i in 0..count {
        let l = next_line(lines)?;
        let mut tok = l.split_whitespace();
        if tok.next() != Some("weight") || parse_num::<usize>(tok.next(), "layer index")? != i {
            return Err(fmt_err(format!("expected 'weight {i}', found '{l}'")));
        }
        let rows: usize = parse_num(tok.next(), "rows")?;
        let cols: usize = parse_num(tok.next(), "cols")?;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            data.extend(parse_values::<T>(next_line(lines)?, cols)?);
        }
        let weight = Matrix::from_vec(rows, cols, data)?;
        let l = next_line(lines)?;
        let mut tok = l.split_whitespace();
        if tok.next() != Some("bias") || parse_num::<usize>(tok.next(), "layer index")? != i {
            return Err(fmt_err(format!("expected 'bias {i}', found '{l}'")));
        }
        let len: usize = parse_num(tok.next(), "bias length")?;
        let bias = parse_values::<T>(next_line(lines)?, len)?;
        dense.push(Dense { weight, bias });
    }
    if next_line(lines)? != "end" {
        return Err(fmt_err("missing 'end'"));
    }
    let params = Params { layers: dense };
    if !params.matches(&spec) {
        return Err(Error::shape("stored parameters do not match stored spec"));
    }
    Ok((spec, params))
}

pub fn net_from_str<T: Scalar>(text: &str) -> Result<(NetSpec, Params<T>)> {
    read_net(&mut text.lines())
}
