use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Alphabet, LabeledDataset, Sequence};
use crate::error::{Error, Result};

const CSV_HEADER: &str = "sequence,fitness";

pub fn parse_labeled_csv(path: impl AsRef<Path>, alphabet: &Alphabet) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_labeled_csv_str(&text, alphabet, name)
}

/// Parses `sequence,fitness` CSV text. Data rows are numbered from 1.
pub fn parse_labeled_csv_str(
    text: &str,
    alphabet: &Alphabet,
    name: impl Into<String>,
) -> Result<LabeledDataset> {
    let mut lines = text.lines().map(|l| l.trim_end_matches('\r'));
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        Some(h) => {
            return Err(Error::MalformedRow {
                row: 0,
                msg: format!("expected header '{CSV_HEADER}', found '{h}'"),
            })
        }
        None => return Err(Error::EmptyDataset),
    }
    let mut sequences = Vec::new();
    let mut labels = Vec::new();
    let mut expected_len = None;
    for (i, line) in lines.enumerate() {
        let row = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (seq, fit) = line.split_once(',').ok_or_else(|| Error::MalformedRow {
            row,
            msg: "expected two comma-separated fields".into(),
        })?;
        let y: f64 = fit.trim().parse().map_err(|_| Error::MalformedRow {
            row,
            msg: format!("cannot parse fitness '{}'", fit.trim()),
        })?;
        if !y.is_finite() {
            return Err(Error::MalformedRow {
                row,
                msg: "fitness is not finite".into(),
            });
        }
        let s = alphabet.encode(seq.trim(), row)?;
        let len = *expected_len.get_or_insert(s.len());
        if s.len() != len {
            return Err(Error::LengthMismatch {
                row,
                expected: len,
                found: s.len(),
            });
        }
        sequences.push(s);
        labels.push(y);
    }
    if sequences.is_empty() {
        return Err(Error::EmptyDataset);
    }
    LabeledDataset::new(name, alphabet.clone(), sequences, labels)
}

/// Serializes with the shortest round-trip float representation.
pub fn write_labeled_csv(data: &LabeledDataset) -> String {
    let mut out = String::with_capacity(data.len() * (data.seq_len() + 24));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (s, y) in data.sequences.iter().zip(&data.labels) {
        let _ = writeln!(out, "{},{}", data.alphabet.decode(s), y);
    }
    out
}

pub fn parse_fasta(path: impl AsRef<Path>, alphabet: &Alphabet) -> Result<Vec<Sequence>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_fasta_str(&text, alphabet)
}

/// Headers are discarded, multi-line bodies concatenated and uppercased.
/// Errors report the 1-based record index.
pub fn parse_fasta_str(text: &str, alphabet: &Alphabet) -> Result<Vec<Sequence>> {
    let mut bodies: Vec<String> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('>') {
            bodies.push(String::new());
        } else if let Some(body) = bodies.last_mut() {
            body.push_str(&line.to_uppercase());
        } else {
            return Err(Error::MalformedRow {
                row: 0,
                msg: "sequence data before the first '>' header".into(),
            });
        }
    }
    if bodies.is_empty() {
        return Err(Error::NoRecords);
    }
    bodies
        .iter()
        .enumerate()
        .map(|(i, b)| {
            if b.is_empty() {
                return Err(Error::MalformedRow {
                    row: i + 1,
                    msg: "empty FASTA record".into(),
                });
            }
            alphabet.encode(b, i + 1)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_basic() {
        let a = Alphabet::dna();
        let d = parse_labeled_csv_str("sequence,fitness\nACGT,1.0\nAAAA,0.2\n", &a, "t").unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.labels, vec![1.0, 0.2]);
        assert_eq!(a.decode(&d.sequences[0]), "ACGT");
    }

    #[test]
    fn csv_empty() {
        let a = Alphabet::dna();
        let err = parse_labeled_csv_str("sequence,fitness\n", &a, "t").unwrap_err();
        assert!(matches!(err, Error::EmptyDataset));
        assert_eq!(err.to_string(), "empty dataset");
    }

    #[test]
    fn csv_bad_symbol_names_row_and_symbol() {
        let a = Alphabet::dna();
        let err = parse_labeled_csv_str("sequence,fitness\nACGX,1.0\n", &a, "t").unwrap_err();
        assert!(matches!(err, Error::InvalidSymbol { row: 1, symbol: 'X' }));
        let msg = err.to_string();
        assert!(msg.contains("row 1") && msg.contains('X'), "{msg}");
    }

    #[test]
    fn csv_malformed_and_ragged() {
        let a = Alphabet::dna();
        let err = parse_labeled_csv_str("sequence,fitness\nACGT,1\nACGT\n", &a, "t").unwrap_err();
        assert!(matches!(err, Error::MalformedRow { row: 2, .. }));
        let err = parse_labeled_csv_str("sequence,fitness\nACGT,1\nACG,2\n", &a, "t").unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { row: 2, .. }));
        let err = parse_labeled_csv_str("seq,y\nACGT,1\n", &a, "t").unwrap_err();
        assert!(matches!(err, Error::MalformedRow { row: 0, .. }));
    }

    #[test]
    fn fasta_records() {
        let a = Alphabet::dna();
        let one = parse_fasta_str(">a\nACGT\n", &a).unwrap();
        assert_eq!(one, vec![a.encode("ACGT", 1).unwrap()]);
        let multi = parse_fasta_str(">a\nAC\nGT\n>b\nTT\n", &a).unwrap();
        assert_eq!(multi.len(), 2);
        assert_eq!(a.decode(&multi[0]), "ACGT");
        assert_eq!(a.decode(&multi[1]), "TT");
    }

    #[test]
    fn fasta_lowercase_uppercased() {
        let a = Alphabet::dna();
        let lower = parse_fasta_str(">x\nacgt\n", &a).unwrap();
        let upper = parse_fasta_str(">x\nACGT\n", &a).unwrap();
        assert_eq!(lower, upper);
        // round trip back through the alphabet yields the uppercase body
        assert_eq!(a.decode(&lower[0]), "ACGT");
    }

    #[test]
    fn fasta_errors() {
        let a = Alphabet::dna();
        assert!(matches!(parse_fasta_str("", &a), Err(Error::NoRecords)));
        assert!(matches!(
            parse_fasta_str(">a\nACGT\n>b\nACXT\n", &a),
            Err(Error::InvalidSymbol { row: 2, symbol: 'X' })
        ));
    }
}
