//! Text I/O in the usual automata convention.
//!
//! Arcs are `src<TAB>dst<TAB>ilabel<TAB>olabel<TAB>weight`, final states are
//! `state<TAB>weight`. The start state is the source of the first line.
//! Labels are written as symbols from the machine's tables. Symbol tables
//! are `symbol<TAB>id` with `<eps>` at id 0.

use std::fmt::Write as _;
use std::sync::Arc as Shared;

use super::{Arc, Fst, StateId, SymbolTable, WfstError};

fn fmt_weight(w: f64) -> String {
    // shortest representation that round-trips
    format!("{w}")
}

pub fn write_text(fst: &Fst) -> String {
    let mut out = String::new();
    let Some(start) = fst.start() else {
        return out;
    };
    let order = std::iter::once(start).chain(fst.states().filter(|&s| s != start));
    for s in order {
        for a in fst.arcs(s) {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                s,
                a.nextstate,
                fst.isyms().symbol(a.ilabel).unwrap_or("?"),
                fst.osyms().symbol(a.olabel).unwrap_or("?"),
                fmt_weight(a.weight)
            );
        }
        if fst.is_final(s) {
            let _ = writeln!(out, "{}\t{}", s, fmt_weight(fst.final_weight(s)));
        }
    }
    out
}

pub fn read_text(text: &str, isyms: Shared<SymbolTable>, osyms: Shared<SymbolTable>) -> Result<Fst, WfstError> {
    let mut fst = Fst::new(isyms, osyms);
    let ensure = |fst: &mut Fst, s: StateId| {
        while fst.num_states() <= s {
            fst.add_state();
        }
    };
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        let err = |msg: &str| WfstError::Parse {
            line: line_no,
            msg: msg.to_string(),
        };
        let state = |f: &str| f.parse::<StateId>().map_err(|_| err("bad state id"));
        let weight = |f: &str| f.parse::<f64>().map_err(|_| err("bad weight"));
        match fields.len() {
            1 | 2 => {
                let s = state(fields[0])?;
                ensure(&mut fst, s);
                if fst.start().is_none() {
                    fst.set_start(s);
                }
                let w = if fields.len() == 2 { weight(fields[1])? } else { 0.0 };
                fst.set_final(s, w);
            }
            4 | 5 => {
                let src = state(fields[0])?;
                let dst = state(fields[1])?;
                ensure(&mut fst, src.max(dst));
                if fst.start().is_none() {
                    fst.set_start(src);
                }
                let il = fst
                    .isyms()
                    .find(fields[2])
                    .ok_or_else(|| err(&format!("unknown input symbol {:?}", fields[2])))?;
                let ol = fst
                    .osyms()
                    .find(fields[3])
                    .ok_or_else(|| err(&format!("unknown output symbol {:?}", fields[3])))?;
                let w = if fields.len() == 5 { weight(fields[4])? } else { 0.0 };
                fst.add_arc(src, Arc::new(il, ol, w, dst));
            }
            _ => return Err(err("expected 1, 2, 4 or 5 tab-separated fields")),
        }
    }
    fst.check()?;
    Ok(fst)
}

pub fn write_symbols(syms: &SymbolTable) -> String {
    let mut out = String::new();
    for (s, id) in syms.iter() {
        let _ = writeln!(out, "{s}\t{id}");
    }
    out
}

pub fn read_symbols(text: &str) -> Result<SymbolTable, WfstError> {
    let mut pairs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let (Some(sym), Some(id)) = (it.next(), it.next()) else {
            return Err(WfstError::Parse {
                line: idx + 1,
                msg: "expected `symbol id`".into(),
            });
        };
        let id: usize = id.parse().map_err(|_| WfstError::Parse {
            line: idx + 1,
            msg: "bad id".into(),
        })?;
        pairs.push((id, sym.to_string()));
    }
    pairs.sort();
    let mut table = SymbolTable::new();
    for (i, (id, sym)) in pairs.iter().enumerate() {
        if *id != i {
            return Err(WfstError::Parse {
                line: 0,
                msg: format!("symbol ids must be dense from 0, found {id} at position {i}"),
            });
        }
        if i == 0 {
            continue;
        }
        table.add(sym);
    }
    Ok(table)
}

/// `states`, `arcs`, `finals`, `deterministic` summary lines.
pub fn info(fst: &Fst) -> String {
    let finals = fst.states().filter(|&s| fst.is_final(s)).count();
    let eps = fst
        .states()
        .flat_map(|s| fst.arcs(s))
        .filter(|a| a.ilabel == super::EPS)
        .count();
    format!(
        "states\t{}\narcs\t{}\nfinal-states\t{}\ninput-epsilon-arcs\t{}\ndeterministic\t{}\ninput-symbols\t{}\noutput-symbols\t{}\n",
        fst.num_states(),
        fst.num_arcs(),
        finals,
        eps,
        fst.is_deterministic(),
        fst.isyms().len(),
        fst.osyms().len()
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_roundtrip() {
        let syms = Shared::new(SymbolTable::from_symbols(["a", "b"]));
        let text = "0\t1\ta\tb\t0.5\n1\t1\tb\t<eps>\t1.25\n1\t2\n";
        let fst = read_text(text, syms.clone(), syms.clone()).unwrap();
        assert_eq!(fst.num_states(), 2);
        assert_eq!(fst.final_weight(1), 2.0);
        assert_eq!(write_text(&fst), text);
        assert_eq!(read_symbols(&write_symbols(&syms)).unwrap(), *syms);
    }

    #[test]
    fn rejects_unknown_symbols() {
        let syms = Shared::new(SymbolTable::from_symbols(["a"]));
        assert!(matches!(
            read_text("0\t1\tz\ta\t0\n", syms.clone(), syms),
            Err(WfstError::Parse { line: 1, .. })
        ));
    }
}
