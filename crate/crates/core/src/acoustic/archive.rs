//! Matrix archives keyed by utterance id.
//!
//! Text: `utt-id [ v v v ; v v v ]`, one matrix per line. Binary: the magic
//! `GFMAT1\0\0`, then per matrix a u32 id length, the id bytes, u32 rows,
//! u32 cols and rows*cols little-endian f32 values.

use std::fmt::Write as _;

use super::{AcousticError, Matrix};

pub const BINARY_MAGIC: &[u8; 8] = b"GFMAT1\0\0";

pub fn write_text(entries: &[(String, Matrix)]) -> String {
    let mut out = String::new();
    for (id, m) in entries {
        out.push_str(id);
        out.push_str(" [");
        for (r, row) in m.iter_rows().enumerate() {
            if r > 0 {
                out.push_str(" ;");
            }
            for v in row {
                let _ = write!(out, " {v}");
            }
        }
        out.push_str(" ]\n");
    }
    out
}

pub fn read_text(text: &str) -> Result<Vec<(String, Matrix)>, AcousticError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: &str| AcousticError::Parse {
            line: idx + 1,
            msg: msg.to_string(),
        };
        let (id, rest) = line
            .split_once(char::is_whitespace)
            .ok_or_else(|| err("missing matrix"))?;
        let body = rest
            .trim()
            .strip_prefix('[')
            .and_then(|s| s.strip_suffix(']'))
            .ok_or_else(|| err("matrix must be enclosed in [ ]"))?;
        let mut rows = Vec::new();
        if !body.trim().is_empty() {
            for r in body.split(';') {
                let row = r
                    .split_whitespace()
                    .map(|v| v.parse::<f64>().map_err(|_| err(&format!("bad number {v:?}"))))
                    .collect::<Result<Vec<_>, _>>()?;
                rows.push(row);
            }
        }
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(err("rows have different lengths"));
        }
        out.push((id.to_string(), Matrix::from_rows(rows)));
    }
    Ok(out)
}

pub fn write_binary(entries: &[(String, Matrix)]) -> Vec<u8> {
    let mut out = BINARY_MAGIC.to_vec();
    for (id, m) in entries {
        out.extend((id.len() as u32).to_le_bytes());
        out.extend(id.as_bytes());
        out.extend((m.rows() as u32).to_le_bytes());
        out.extend((m.cols() as u32).to_le_bytes());
        for row in m.iter_rows() {
            for &v in row {
                out.extend((v as f32).to_le_bytes());
            }
        }
    }
    out
}

pub fn read_binary(bytes: &[u8]) -> Result<Vec<(String, Matrix)>, AcousticError> {
    let err = |msg: &str| AcousticError::Parse {
        line: 0,
        msg: msg.to_string(),
    };
    let mut rest = bytes
        .strip_prefix(BINARY_MAGIC.as_slice())
        .ok_or_else(|| err("missing binary archive header"))?;
    let mut take = |n: usize| -> Result<&[u8], AcousticError> {
        if rest.len() < n {
            return Err(err("truncated binary archive"));
        }
        let (head, tail) = rest.split_at(n);
        rest = tail;
        Ok(head)
    };
    let mut out = Vec::new();
    loop {
        let Ok(len) = take(4) else { break };
        let len = u32::from_le_bytes(len.try_into().unwrap()) as usize;
        let id = String::from_utf8(take(len)?.to_vec()).map_err(|_| err("id is not UTF-8"))?;
        let rows = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let data = take(rows * cols * 4)?;
        let mut m = Matrix::zeros(rows, cols);
        for (i, chunk) in data.chunks_exact(4).enumerate() {
            m.set(i / cols, i % cols, f32::from_le_bytes(chunk.try_into().unwrap()) as f64);
        }
        out.push((id, m));
    }
    Ok(out)
}

/// Reads either format, detected by the binary header.
pub fn read_any(bytes: &[u8]) -> Result<Vec<(String, Matrix)>, AcousticError> {
    if bytes.starts_with(BINARY_MAGIC) {
        read_binary(bytes)
    } else {
        let text = std::str::from_utf8(bytes).map_err(|_| AcousticError::Parse {
            line: 0,
            msg: "archive is neither binary nor UTF-8 text".into(),
        })?;
        read_text(text)
    }
}
