//! Line-oriented language for optical tables.
//!
//! One statement per line, fixed arity, `#` comments. Every mode is declared
//! with `modes` before use. `c1`/`c2` after a `detect` act as feed-forward
//! cells gated by the correction table, which needs labels `D1`..`D4`.

mod exec;
mod lexer;
mod parser;
mod pretty;

use std::fmt;

use crate::state::{ModeId, Photon};

pub use exec::{compile_and_run, DslBranch, DslExact, DslRun, RunError};
pub use lexer::{tokenize, SourceLine, Token};
pub use parser::{parse, parse_str};
pub use pretty::pretty_print;

/// Tolerance on the squared norm of `jones` and `polarizer` literals.
pub const LITERAL_NORM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Warning => "warning",
            Severity::Error => "error",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub line: usize,
    /// 1-based columns, end exclusive.
    pub cols: (usize, usize),
    pub message: String,
    pub expected: Option<String>,
    pub found: Option<String>,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}-{}: {}: {}",
            self.line, self.cols.0, self.cols.1, self.severity, self.message
        )?;
        match (&self.expected, &self.found) {
            (Some(e), Some(x)) => write!(f, " (expected {e}, found {x})"),
            (Some(e), None) => write!(f, " (expected {e})"),
            (None, Some(x)) => write!(f, " (found {x})"),
            (None, None) => Ok(()),
        }
    }
}

/// A parsed statement. Literals are kept as written; normalization happens at
/// compile time.
#[derive(Debug, Clone, PartialEq)]
pub enum Statement {
    Modes {
        photon: Photon,
        names: Vec<ModeId>,
    },
    Pair {
        a1: ModeId,
        a2: ModeId,
        b1: ModeId,
        b2: ModeId,
    },
    Jones {
        photon: Photon,
        modes: Vec<ModeId>,
        literal: [f64; 4],
    },
    Pbs {
        photon: Photon,
        input: ModeId,
        out_v: ModeId,
        out_h: ModeId,
    },
    RotToH {
        photon: Photon,
        mode: ModeId,
    },
    RotHToV {
        photon: Photon,
        mode: ModeId,
    },
    Bs {
        photon: Photon,
        in1: ModeId,
        in2: ModeId,
        out1: ModeId,
        out2: ModeId,
    },
    Phase {
        photon: Photon,
        mode: ModeId,
        radians: f64,
    },
    C1 {
        photon: Photon,
        mode: ModeId,
    },
    C2 {
        photon: Photon,
        mode: ModeId,
    },
    Merge {
        photon: Photon,
        in_v: ModeId,
        in_h: ModeId,
        out: ModeId,
    },
    Detect {
        photon: Photon,
        entries: Vec<(ModeId, String)>,
    },
    Polarizer {
        photon: Photon,
        mode: ModeId,
        literal: [f64; 4],
    },
}

impl Statement {
    pub fn keyword(&self) -> &'static str {
        match self {
            Statement::Modes { .. } => "modes",
            Statement::Pair { .. } => "pair",
            Statement::Jones { .. } => "jones",
            Statement::Pbs { .. } => "pbs",
            Statement::RotToH { .. } => "rot_to_h",
            Statement::RotHToV { .. } => "rot_h_to_v",
            Statement::Bs { .. } => "bs",
            Statement::Phase { .. } => "phase",
            Statement::C1 { .. } => "c1",
            Statement::C2 { .. } => "c2",
            Statement::Merge { .. } => "merge",
            Statement::Detect { .. } => "detect",
            Statement::Polarizer { .. } => "polarizer",
        }
    }

    /// Photon the statement acts on; `None` for `pair`.
    pub fn photon(&self) -> Option<Photon> {
        match self {
            Statement::Pair { .. } => None,
            Statement::Modes { photon, .. }
            | Statement::Jones { photon, .. }
            | Statement::Pbs { photon, .. }
            | Statement::RotToH { photon, .. }
            | Statement::RotHToV { photon, .. }
            | Statement::Bs { photon, .. }
            | Statement::Phase { photon, .. }
            | Statement::C1 { photon, .. }
            | Statement::C2 { photon, .. }
            | Statement::Merge { photon, .. }
            | Statement::Detect { photon, .. }
            | Statement::Polarizer { photon, .. } => Some(*photon),
        }
    }
}

/// A checked program: statements in source order with their line numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitProgram {
    statements: Vec<(usize, Statement)>,
    warnings: Vec<Diagnostic>,
}

impl CircuitProgram {
    pub fn statements(&self) -> impl Iterator<Item = &Statement> {
        self.statements.iter().map(|(_, s)| s)
    }

    pub fn lines(&self) -> &[(usize, Statement)] {
        &self.statements
    }

    pub fn warnings(&self) -> &[Diagnostic] {
        &self.warnings
    }

    pub fn has_detect(&self) -> bool {
        self.statements()
            .any(|s| matches!(s, Statement::Detect { .. }))
    }

    /// Same statements, ignoring line numbers.
    pub fn same_structure(&self, other: &Self) -> bool {
        self.statements().eq(other.statements())
    }
}
