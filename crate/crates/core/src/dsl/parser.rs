use std::collections::HashMap;

use super::lexer::{tokenize, SourceLine};
use super::{CircuitProgram, Diagnostic, Severity, Statement, LITERAL_NORM_TOL};
use crate::elements::ElementSpec;
use crate::jones::{JonesError, JonesVector};
use crate::protocol::OutcomeId;
use crate::state::{ModeId, Photon};

/// Tokenizes and parses `text`.
pub fn parse_str(text: &str) -> Result<CircuitProgram, Vec<Diagnostic>> {
    parse(&tokenize(text))
}

/// Parses and checks a tokenized program. Every bad line yields at least one
/// diagnostic and is skipped; checking continues with the next line.
pub fn parse(lines: &[SourceLine]) -> Result<CircuitProgram, Vec<Diagnostic>> {
    let mut c = Checker::default();
    for l in lines {
        if let Ok(s) = c.statement(l) {
            c.accept(l, s);
        }
    }
    if c.pair_line.is_none() {
        let line = lines.first().map_or(1, |l| l.line);
        let end = lines
            .first()
            .map_or(1, |l| l.raw.chars().count().max(1) + 1);
        c.diags.push(Diagnostic {
            severity: Severity::Error,
            line,
            cols: (1, end),
            message: "program has no pair statement".into(),
            expected: Some("exactly one pair".into()),
            found: Some("none".into()),
        });
    }
    c.diags.sort_by_key(|d| (d.line, d.cols.0));
    if c.diags.iter().any(|d| d.severity == Severity::Error) {
        Err(c.diags)
    } else {
        Ok(CircuitProgram {
            statements: c.statements,
            warnings: c.diags,
        })
    }
}

/// Normalized literal; checked by the parser before any statement is kept.
pub(super) fn literal_vector(literal: &[f64; 4]) -> Result<JonesVector<f64>, JonesError> {
    let [ar, ai, br, bi] = *literal;
    JonesVector::normalized_from_parts(ar, ai, br, bi, LITERAL_NORM_TOL)
}

/// The optical element behind a statement, if it is one.
pub(super) fn element_spec(s: &Statement) -> Option<Result<ElementSpec<f64>, JonesError>> {
    Some(Ok(match s.clone() {
        Statement::Jones { modes, literal, .. } => {
            return Some(
                literal_vector(&literal).map(|psi| ElementSpec::JonesRotation { psi, modes }),
            )
        }
        Statement::Pbs {
            input,
            out_v,
            out_h,
            ..
        } => ElementSpec::Pbs {
            input,
            out_v,
            out_h,
        },
        Statement::RotToH { mode, .. } => ElementSpec::PolRotateToH(mode),
        Statement::RotHToV { mode, .. } => ElementSpec::PolRotateHtoV(mode),
        Statement::Bs {
            in1,
            in2,
            out1,
            out2,
            ..
        } => ElementSpec::SymmetricBs {
            in1,
            in2,
            out1,
            out2,
        },
        Statement::Phase { mode, radians, .. } => ElementSpec::PhaseShift { mode, phi: radians },
        Statement::C1 { mode, .. } => ElementSpec::PockelsC1(mode),
        Statement::C2 { mode, .. } => ElementSpec::PockelsC2(mode),
        Statement::Merge {
            in_v, in_h, out, ..
        } => ElementSpec::Merge { in_v, in_h, out },
        Statement::Modes { .. }
        | Statement::Pair { .. }
        | Statement::Detect { .. }
        | Statement::Polarizer { .. } => return None,
    }))
}

struct DetectInfo {
    line: usize,
    photon: Photon,
    labels: Vec<String>,
}

#[derive(Default)]
struct Checker {
    diags: Vec<Diagnostic>,
    declared: HashMap<String, (Photon, usize)>,
    pair_line: Option<usize>,
    detect: Option<DetectInfo>,
    polarizer_line: Option<usize>,
    statements: Vec<(usize, Statement)>,
}

type Checked<T> = Result<T, ()>;

impl Checker {
    fn error(
        &mut self,
        l: &SourceLine,
        tokens: std::ops::Range<usize>,
        message: impl Into<String>,
        expected: Option<String>,
        found: Option<String>,
    ) {
        self.report(Severity::Error, l, tokens, message, expected, found);
    }

    fn report(
        &mut self,
        severity: Severity,
        l: &SourceLine,
        tokens: std::ops::Range<usize>,
        message: impl Into<String>,
        expected: Option<String>,
        found: Option<String>,
    ) {
        let last = tokens.end.min(l.tokens.len()).max(tokens.start + 1) - 1;
        let first = tokens.start.min(l.tokens.len() - 1);
        self.diags.push(Diagnostic {
            severity,
            line: l.line,
            cols: (
                l.tokens[first].col,
                l.tokens[last.min(l.tokens.len() - 1)].end_col(),
            ),
            message: message.into(),
            expected,
            found,
        });
    }

    fn whole(l: &SourceLine) -> std::ops::Range<usize> {
        0..l.tokens.len()
    }

    fn arity(&mut self, l: &SourceLine, operands: usize, shape: &str) -> Checked<()> {
        let found = l.tokens.len() - 1;
        if found == operands {
            return Ok(());
        }
        let kw = l.tokens[0].text.clone();
        self.error(
            l,
            Self::whole(l),
            format!("wrong number of operands for {kw}"),
            Some(format!("{operands} ({kw} {shape})")),
            Some(found.to_string()),
        );
        Err(())
    }

    fn at_least(&mut self, l: &SourceLine, operands: usize, shape: &str) -> Checked<()> {
        let found = l.tokens.len() - 1;
        if found >= operands {
            return Ok(());
        }
        let kw = l.tokens[0].text.clone();
        self.error(
            l,
            Self::whole(l),
            format!("too few operands for {kw}"),
            Some(format!("at least {operands} ({kw} {shape})")),
            Some(found.to_string()),
        );
        Err(())
    }

    fn photon(&mut self, l: &SourceLine, i: usize) -> Checked<Photon> {
        let t = &l.tokens[i].text;
        match t.parse::<u8>().ok().and_then(Photon::from_number) {
            Some(p) => Ok(p),
            None => {
                let found = t.clone();
                self.error(
                    l,
                    i..i + 1,
                    "bad photon number",
                    Some("1 or 2".into()),
                    Some(found),
                );
                Err(())
            }
        }
    }

    fn number(&mut self, l: &SourceLine, i: usize) -> Checked<f64> {
        let t = l.tokens[i].text.clone();
        match t.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            Ok(_) => {
                self.error(
                    l,
                    i..i + 1,
                    "numeric literal must be finite",
                    Some("a finite decimal".into()),
                    Some(t),
                );
                Err(())
            }
            Err(_) => {
                self.error(
                    l,
                    i..i + 1,
                    "bad numeric literal",
                    Some("a decimal number".into()),
                    Some(t),
                );
                Err(())
            }
        }
    }

    /// A declared mode of `photon`.
    fn mode(&mut self, l: &SourceLine, i: usize, photon: Photon) -> Checked<ModeId> {
        let t = l.tokens[i].text.clone();
        match self.declared.get(&t) {
            Some(&(p, _)) if p == photon => Ok(ModeId::new(&t).expect("declared names are valid")),
            Some(&(p, line)) => {
                self.error(
                    l,
                    i..i + 1,
                    format!(
                        "mode {t} belongs to photon {} (declared at line {line})",
                        p.number()
                    ),
                    Some(format!("a mode of photon {}", photon.number())),
                    Some(t),
                );
                Err(())
            }
            None => {
                self.error(
                    l,
                    i..i + 1,
                    format!("undeclared mode {t}"),
                    Some(format!("a mode declared with modes {}", photon.number())),
                    Some(t),
                );
                Err(())
            }
        }
    }

    fn modes_from(
        &mut self,
        l: &SourceLine,
        range: std::ops::Range<usize>,
        photon: Photon,
    ) -> Checked<Vec<ModeId>> {
        let mut out = Vec::new();
        let mut ok = true;
        for i in range {
            match self.mode(l, i, photon) {
                Ok(m) => out.push(m),
                Err(()) => ok = false,
            }
        }
        if ok {
            Ok(out)
        } else {
            Err(())
        }
    }

    fn literal(&mut self, l: &SourceLine, first: usize) -> Checked<[f64; 4]> {
        let mut lit = [0.0; 4];
        let mut ok = true;
        for (j, x) in lit.iter_mut().enumerate() {
            match self.number(l, first + j) {
                Ok(v) => *x = v,
                Err(()) => ok = false,
            }
        }
        if !ok {
            return Err(());
        }
        let [ar, ai, br, bi] = lit;
        let norm_sq = ar * ar + ai * ai + br * br + bi * bi;
        match literal_vector(&lit) {
            Ok(_) => {
                if (norm_sq - 1.0).abs() > 1e-12 {
                    self.report(
                        Severity::Warning,
                        l,
                        first..first + 4,
                        format!("literal renormalized from squared norm {norm_sq:?}"),
                        None,
                        None,
                    );
                }
                Ok(lit)
            }
            Err(_) => {
                self.error(
                    l,
                    first..first + 4,
                    "polarization literal is not normalized",
                    Some(format!(
                        "|alpha|^2 + |beta|^2 = 1 within {LITERAL_NORM_TOL:e}"
                    )),
                    Some(format!("{norm_sq:?}")),
                );
                Err(())
            }
        }
    }

    fn statement(&mut self, l: &SourceLine) -> Checked<Statement> {
        let kw = l.tokens[0].text.as_str();
        let s = match kw {
            "modes" => {
                self.at_least(l, 2, "<photon> <id>...")?;
                let photon = self.photon(l, 1)?;
                let mut names = Vec::new();
                let mut ok = true;
                for i in 2..l.tokens.len() {
                    let t = l.tokens[i].text.clone();
                    if let Some(&(_, line)) = self.declared.get(&t) {
                        self.error(
                            l,
                            i..i + 1,
                            format!("mode {t} already declared at line {line}"),
                            Some("a new mode name".into()),
                            Some(t),
                        );
                        ok = false;
                        continue;
                    }
                    match ModeId::new(&t) {
                        Ok(m) => {
                            self.declared.insert(t, (photon, l.line));
                            names.push(m);
                        }
                        Err(_) => {
                            self.error(
                                l,
                                i..i + 1,
                                "invalid mode name",
                                Some("a mode name".into()),
                                Some(t),
                            );
                            ok = false;
                        }
                    }
                }
                if !ok {
                    return Err(());
                }
                Statement::Modes { photon, names }
            }
            "pair" => {
                self.arity(l, 4, "<a1> <a2> <b1> <b2>")?;
                let a1 = self.mode(l, 1, Photon::One);
                let a2 = self.mode(l, 2, Photon::Two);
                let b1 = self.mode(l, 3, Photon::One);
                let b2 = self.mode(l, 4, Photon::Two);
                let (a1, a2, b1, b2) = (a1?, a2?, b1?, b2?);
                if a1 == b1 || a2 == b2 {
                    self.error(
                        l,
                        1..5,
                        "pair needs two distinct modes per photon",
                        None,
                        None,
                    );
                    return Err(());
                }
                if let Some(line) = self.pair_line {
                    self.error(
                        l,
                        0..1,
                        "second pair statement",
                        Some("exactly one pair".into()),
                        Some(format!("another at line {line}")),
                    );
                    return Err(());
                }
                Statement::Pair { a1, a2, b1, b2 }
            }
            "jones" => {
                self.at_least(l, 6, "<photon> <mode>... <ar> <ai> <br> <bi>")?;
                let photon = self.photon(l, 1)?;
                let n = l.tokens.len();
                let modes = self.modes_from(l, 2..n - 4, photon);
                let literal = self.literal(l, n - 4);
                Statement::Jones {
                    photon,
                    modes: modes?,
                    literal: literal?,
                }
            }
            "pbs" => {
                self.arity(l, 4, "<photon> <in> <outV> <outH>")?;
                let photon = self.photon(l, 1)?;
                let m = self.modes_from(l, 2..5, photon)?;
                Statement::Pbs {
                    photon,
                    input: m[0].clone(),
                    out_v: m[1].clone(),
                    out_h: m[2].clone(),
                }
            }
            "rot_to_h" | "rot_h_to_v" | "c1" | "c2" => {
                self.arity(l, 2, "<photon> <mode>")?;
                let photon = self.photon(l, 1)?;
                let mode = self.mode(l, 2, photon)?;
                match kw {
                    "rot_to_h" => Statement::RotToH { photon, mode },
                    "rot_h_to_v" => Statement::RotHToV { photon, mode },
                    "c1" => Statement::C1 { photon, mode },
                    _ => Statement::C2 { photon, mode },
                }
            }
            "bs" => {
                self.arity(l, 5, "<photon> <in1> <in2> <out1> <out2>")?;
                let photon = self.photon(l, 1)?;
                let m = self.modes_from(l, 2..6, photon)?;
                Statement::Bs {
                    photon,
                    in1: m[0].clone(),
                    in2: m[1].clone(),
                    out1: m[2].clone(),
                    out2: m[3].clone(),
                }
            }
            "phase" => {
                self.arity(l, 3, "<photon> <mode> <radians>")?;
                let photon = self.photon(l, 1)?;
                let mode = self.mode(l, 2, photon);
                let radians = self.number(l, 3);
                Statement::Phase {
                    photon,
                    mode: mode?,
                    radians: radians?,
                }
            }
            "merge" => {
                self.arity(l, 4, "<photon> <inV> <inH> <out>")?;
                let photon = self.photon(l, 1)?;
                let m = self.modes_from(l, 2..5, photon)?;
                Statement::Merge {
                    photon,
                    in_v: m[0].clone(),
                    in_h: m[1].clone(),
                    out: m[2].clone(),
                }
            }
            "detect" => {
                self.at_least(l, 2, "<photon> <mode>=<label>...")?;
                let photon = self.photon(l, 1)?;
                let mut entries: Vec<(ModeId, String)> = Vec::new();
                let mut ok = true;
                for i in 2..l.tokens.len() {
                    let t = l.tokens[i].text.clone();
                    let Some((m, label)) = t
                        .split_once('=')
                        .filter(|(m, lab)| !m.is_empty() && !lab.is_empty())
                    else {
                        self.error(
                            l,
                            i..i + 1,
                            "bad detector entry",
                            Some("<mode>=<label>".into()),
                            Some(t),
                        );
                        ok = false;
                        continue;
                    };
                    let mode = match self.declared.get(m) {
                        Some(&(p, _)) if p == photon => {
                            ModeId::new(m).expect("declared names are valid")
                        }
                        _ => {
                            self.error(
                                l,
                                i..i + 1,
                                format!("detector on mode {m}, which is not a declared mode of photon {}", photon.number()),
                                Some(format!("a mode of photon {}", photon.number())),
                                Some(m.to_string()),
                            );
                            ok = false;
                            continue;
                        }
                    };
                    if entries.iter().any(|(_, x)| x == label) {
                        self.error(
                            l,
                            i..i + 1,
                            format!("duplicate detector label {label}"),
                            None,
                            Some(label.to_string()),
                        );
                        ok = false;
                    } else if entries.iter().any(|(x, _)| *x == mode) {
                        self.error(
                            l,
                            i..i + 1,
                            format!("mode {m} has two detectors"),
                            None,
                            Some(m.to_string()),
                        );
                        ok = false;
                    } else {
                        entries.push((mode, label.to_string()));
                    }
                }
                if let Some(d) = &self.detect {
                    let line = d.line;
                    self.error(
                        l,
                        0..1,
                        "second detect statement",
                        Some("at most one detect per program".into()),
                        Some(format!("another at line {line}")),
                    );
                    return Err(());
                }
                if !ok {
                    return Err(());
                }
                Statement::Detect { photon, entries }
            }
            "polarizer" => {
                self.arity(l, 6, "<photon> <mode> <ar> <ai> <br> <bi>")?;
                let photon = self.photon(l, 1)?;
                let mode = self.mode(l, 2, photon);
                let literal = self.literal(l, 3);
                Statement::Polarizer {
                    photon,
                    mode: mode?,
                    literal: literal?,
                }
            }
            other => {
                let found = other.to_string();
                self.error(
                    l,
                    0..1,
                    format!("unknown statement {found}"),
                    Some("modes, pair, jones, pbs, rot_to_h, rot_h_to_v, bs, phase, c1, c2, merge, detect or polarizer".into()),
                    Some(found),
                );
                return Err(());
            }
        };
        self.order(l, &s)?;
        if let Some(spec) = element_spec(&s) {
            let built = spec
                .map_err(|e| e.to_string())
                .and_then(|spec| spec.build().map(|_| ()).map_err(|e| e.to_string()));
            if let Err(e) = built {
                self.error(
                    l,
                    Self::whole(l),
                    format!("invalid element: {e}"),
                    None,
                    None,
                );
                return Err(());
            }
        }
        Ok(s)
    }

    /// Ordering rules: source first, nothing after the polarizer, nothing on a
    /// consumed photon, feed-forward only on the standard labels.
    fn order(&mut self, l: &SourceLine, s: &Statement) -> Checked<()> {
        if let Some(line) = self.polarizer_line {
            self.error(
                l,
                0..1,
                format!("statement after the polarizer at line {line}"),
                Some("polarizer as the last statement".into()),
                Some(s.keyword().into()),
            );
            return Err(());
        }
        if matches!(s, Statement::Modes { .. } | Statement::Pair { .. }) {
            return Ok(());
        }
        if self.pair_line.is_none() {
            self.error(
                l,
                0..1,
                format!("{} before the pair source", s.keyword()),
                Some("pair first".into()),
                Some(s.keyword().into()),
            );
            return Err(());
        }
        let photon = s.photon().expect("only pair has no photon");
        if let Some(d) = &self.detect {
            if d.photon == photon {
                let line = d.line;
                self.error(
                    l,
                    1..2,
                    format!(
                        "photon {} was consumed by the detect at line {line}",
                        photon.number()
                    ),
                    Some(format!("photon {}", photon.other().number())),
                    Some(photon.number().to_string()),
                );
                return Err(());
            }
            let gated = matches!(s, Statement::C1 { .. } | Statement::C2 { .. });
            if gated && d.labels.iter().any(|x| x.parse::<OutcomeId>().is_err()) {
                let line = d.line;
                self.error(
                    l,
                    0..1,
                    format!(
                        "feed-forward {} needs detector labels D1..D4 (detect at line {line})",
                        s.keyword()
                    ),
                    Some("labels D1, D2, D3, D4".into()),
                    Some(d.labels.join(",")),
                );
                return Err(());
            }
        }
        Ok(())
    }

    fn accept(&mut self, l: &SourceLine, s: Statement) {
        match &s {
            Statement::Pair { .. } => self.pair_line = Some(l.line),
            Statement::Detect { photon, entries } => {
                self.detect = Some(DetectInfo {
                    line: l.line,
                    photon: *photon,
                    labels: entries.iter().map(|(_, x)| x.clone()).collect(),
                })
            }
            Statement::Polarizer { .. } => self.polarizer_line = Some(l.line),
            _ => {}
        }
        self.statements.push((l.line, s));
    }
}
