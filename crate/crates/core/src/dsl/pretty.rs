use std::fmt::{self, Write};

use super::{CircuitProgram, Statement};
use crate::state::ModeId;

fn join(modes: &[ModeId]) -> String {
    modes
        .iter()
        .map(ModeId::as_str)
        .collect::<Vec<_>>()
        .join(" ")
}

fn lit(x: &[f64; 4]) -> String {
    x.iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Canonical single-line form; floats print in shortest round-trip notation.
impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kw = self.keyword();
        let p = self.photon().map(|p| p.number()).unwrap_or_default();
        match self {
            Statement::Modes { names, .. } => write!(f, "{kw} {p} {}", join(names)),
            Statement::Pair { a1, a2, b1, b2 } => write!(f, "{kw} {a1} {a2} {b1} {b2}"),
            Statement::Jones { modes, literal, .. } => {
                write!(f, "{kw} {p} {} {}", join(modes), lit(literal))
            }
            Statement::Pbs {
                input,
                out_v,
                out_h,
                ..
            } => write!(f, "{kw} {p} {input} {out_v} {out_h}"),
            Statement::RotToH { mode, .. }
            | Statement::RotHToV { mode, .. }
            | Statement::C1 { mode, .. }
            | Statement::C2 { mode, .. } => write!(f, "{kw} {p} {mode}"),
            Statement::Bs {
                in1,
                in2,
                out1,
                out2,
                ..
            } => write!(f, "{kw} {p} {in1} {in2} {out1} {out2}"),
            Statement::Phase { mode, radians, .. } => write!(f, "{kw} {p} {mode} {radians:?}"),
            Statement::Merge {
                in_v, in_h, out, ..
            } => write!(f, "{kw} {p} {in_v} {in_h} {out}"),
            Statement::Detect { entries, .. } => {
                write!(f, "{kw} {p}")?;
                for (m, label) in entries {
                    write!(f, " {m}={label}")?;
                }
                Ok(())
            }
            Statement::Polarizer { mode, literal, .. } => {
                write!(f, "{kw} {p} {mode} {}", lit(literal))
            }
        }
    }
}

/// One statement per line, comments and spacing dropped.
pub fn pretty_print(program: &CircuitProgram) -> String {
    let mut out = String::new();
    for s in program.statements() {
        writeln!(out, "{s}").expect("writing to a String");
    }
    out
}
