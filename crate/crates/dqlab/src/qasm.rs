//! OpenQASM 2 frontend for the `{u3, u2, u1, ry, cx}` subset.
//!
//! `parse` produces a [`QasmProgram`] — registers plus gate statements whose
//! angle arguments are kept as expression trees — and `lower` evaluates it
//! into a [`Circuit`]. Every parse error carries the 1-based line and column
//! where it was detected. `serialize` emits the same subset grammar; because
//! angles are printed with Rust's shortest-round-trip float formatting,
//! `lower(parse(serialize(c)))` reproduces `c` gate-for-gate.
//!
//! Unsupported OpenQASM 2 constructs (`creg`, `measure`, `barrier`, `gate`
//! definitions, `if`, `reset`, `opaque`) are rejected with an explicit
//! "unsupported statement" error rather than skipped.

use std::fmt::Write as _;
use std::iter::Peekable;
use std::str::Chars;

use crate::circuit::{Circuit, Gate};
use crate::qcore;

/// Four-qubit ground-state preparation circuit bundled with the crate
/// (used as the file-based initial state for the fermion quench runs).
pub const GROUND_STATE_PREP_QASM: &str = include_str!("../data/ground_state_prep.qasm");

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum Error {
    #[error("{line}:{col}: unexpected character {ch:?}")]
    UnexpectedChar { line: usize, col: usize, ch: char },
    #[error("{line}:{col}: malformed number '{text}'")]
    BadNumber {
        line: usize,
        col: usize,
        text: String,
    },
    #[error("{line}:{col}: unterminated string literal")]
    UnterminatedString { line: usize, col: usize },
    #[error("{line}:{col}: expected {expected}, found {found}")]
    Syntax {
        line: usize,
        col: usize,
        expected: String,
        found: String,
    },
    #[error("{line}:{col}: unknown gate '{name}'")]
    UnknownGate {
        line: usize,
        col: usize,
        name: String,
    },
    #[error("{line}:{col}: unsupported statement '{name}'")]
    UnsupportedStatement {
        line: usize,
        col: usize,
        name: String,
    },
    #[error("{line}:{col}: '{gate}' expects {expected} angle parameter(s), got {got}")]
    ParamCount {
        line: usize,
        col: usize,
        gate: String,
        expected: usize,
        got: usize,
    },
    #[error("{line}:{col}: '{gate}' expects {expected} qubit argument(s), got {got}")]
    ArgCount {
        line: usize,
        col: usize,
        gate: String,
        expected: usize,
        got: usize,
    },
    #[error("{line}:{col}: undeclared register '{name}'")]
    UndeclaredRegister {
        line: usize,
        col: usize,
        name: String,
    },
    #[error("{line}:{col}: register '{name}' redeclared")]
    RegisterRedeclared {
        line: usize,
        col: usize,
        name: String,
    },
    #[error("{line}:{col}: index {index} out of bounds for register '{name}' of size {size}")]
    IndexOutOfBounds {
        line: usize,
        col: usize,
        name: String,
        index: usize,
        size: usize,
    },
    #[error("{line}:{col}: duplicate qubit operand")]
    DuplicateQubit { line: usize, col: usize },
    #[error("{line}:{col}: register size {size} outside supported range 1..={max}")]
    RegisterSize {
        line: usize,
        col: usize,
        size: usize,
        max: usize,
    },
    #[error("{line}:{col}: angle expression does not evaluate to a finite number")]
    NonFiniteAngle { line: usize, col: usize },
    #[error("program declares {0} quantum registers; exactly one is supported")]
    MultipleRegisters(usize),
    #[error("program declares no quantum register")]
    NoRegister,
}

/// Arithmetic over angle arguments: literals, `pi`, unary minus, `+ - * /`.
#[derive(Debug, Clone, PartialEq)]
pub enum AngleExpr {
    Literal(f64),
    Pi,
    Neg(Box<AngleExpr>),
    Add(Box<AngleExpr>, Box<AngleExpr>),
    Sub(Box<AngleExpr>, Box<AngleExpr>),
    Mul(Box<AngleExpr>, Box<AngleExpr>),
    Div(Box<AngleExpr>, Box<AngleExpr>),
}

impl AngleExpr {
    pub fn eval(&self) -> f64 {
        match self {
            AngleExpr::Literal(v) => *v,
            AngleExpr::Pi => std::f64::consts::PI,
            AngleExpr::Neg(e) => -e.eval(),
            AngleExpr::Add(a, b) => a.eval() + b.eval(),
            AngleExpr::Sub(a, b) => a.eval() - b.eval(),
            AngleExpr::Mul(a, b) => a.eval() * b.eval(),
            AngleExpr::Div(a, b) => a.eval() / b.eval(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateName {
    U3,
    U2,
    U1,
    Ry,
    Cx,
}

impl GateName {
    fn from_str(s: &str) -> Option<Self> {
        match s {
            "u3" => Some(GateName::U3),
            "u2" => Some(GateName::U2),
            "u1" => Some(GateName::U1),
            "ry" => Some(GateName::Ry),
            "cx" => Some(GateName::Cx),
            _ => None,
        }
    }

    fn param_count(self) -> usize {
        match self {
            GateName::U3 => 3,
            GateName::U2 => 2,
            GateName::U1 | GateName::Ry => 1,
            GateName::Cx => 0,
        }
    }

    fn arg_count(self) -> usize {
        match self {
            GateName::Cx => 2,
            _ => 1,
        }
    }
}

/// One gate application with unevaluated angle arguments.
#[derive(Debug, Clone, PartialEq)]
pub struct GateStmt {
    pub name: GateName,
    pub params: Vec<AngleExpr>,
    /// `(register, index)` operands, already bounds-checked against the
    /// declaration.
    pub args: Vec<(String, usize)>,
    pub line: usize,
    pub col: usize,
}

/// Parsed program: register declarations plus gate statements in source
/// order. Register names are unique and every operand index is in bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct QasmProgram {
    pub registers: Vec<(String, usize)>,
    pub statements: Vec<GateStmt>,
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number { text: String, value: f64 },
    Str(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Plus,
    Minus,
    Star,
    Slash,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Number { text, .. } => format!("number '{text}'"),
            Tok::Str(_) => "string literal".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::LBracket => "'['".into(),
            Tok::RBracket => "']'".into(),
            Tok::Comma => "','".into(),
            Tok::Semi => "';'".into(),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Star => "'*'".into(),
            Tok::Slash => "'/'".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

struct Lexer<'a> {
    chars: Peekable<Chars<'a>>,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            chars: src.chars().peekable(),
            line: 1,
            col: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn tokenize(mut self) -> Result<Vec<Token>, Error> {
        let mut out = Vec::new();
        loop {
            while matches!(self.chars.peek(), Some(c) if c.is_whitespace()) {
                self.bump();
            }
            let (line, col) = (self.line, self.col);
            let Some(&c) = self.chars.peek() else {
                out.push(Token {
                    tok: Tok::Eof,
                    line,
                    col,
                });
                return Ok(out);
            };
            let tok = match c {
                '(' => {
                    self.bump();
                    Tok::LParen
                }
                ')' => {
                    self.bump();
                    Tok::RParen
                }
                '[' => {
                    self.bump();
                    Tok::LBracket
                }
                ']' => {
                    self.bump();
                    Tok::RBracket
                }
                ',' => {
                    self.bump();
                    Tok::Comma
                }
                ';' => {
                    self.bump();
                    Tok::Semi
                }
                '+' => {
                    self.bump();
                    Tok::Plus
                }
                '-' => {
                    self.bump();
                    Tok::Minus
                }
                '*' => {
                    self.bump();
                    Tok::Star
                }
                '/' => {
                    self.bump();
                    if self.chars.peek() == Some(&'/') {
                        // line comment
                        while matches!(self.chars.peek(), Some(&c) if c != '\n') {
                            self.bump();
                        }
                        continue;
                    }
                    Tok::Slash
                }
                '"' => {
                    self.bump();
                    let mut s = String::new();
                    loop {
                        match self.bump() {
                            Some('"') => break,
                            Some(c) => s.push(c),
                            None => return Err(Error::UnterminatedString { line, col }),
                        }
                    }
                    Tok::Str(s)
                }
                c if c.is_ascii_digit() || c == '.' => self.lex_number(line, col)?,
                c if c.is_ascii_alphabetic() || c == '_' => {
                    let mut s = String::new();
                    while matches!(self.chars.peek(), Some(&c) if c.is_ascii_alphanumeric() || c == '_')
                    {
                        s.push(self.bump().unwrap());
                    }
                    Tok::Ident(s)
                }
                other => return Err(Error::UnexpectedChar { line, col, ch: other }),
            };
            out.push(Token { tok, line, col });
        }
    }

    fn lex_number(&mut self, line: usize, col: usize) -> Result<Tok, Error> {
        let mut text = String::new();
        let mut seen_dot = false;
        while let Some(&c) = self.chars.peek() {
            if c.is_ascii_digit() {
                text.push(self.bump().unwrap());
            } else if c == '.' && !seen_dot {
                seen_dot = true;
                text.push(self.bump().unwrap());
            } else {
                break;
            }
        }
        if matches!(self.chars.peek(), Some(&'e') | Some(&'E')) {
            text.push(self.bump().unwrap());
            if matches!(self.chars.peek(), Some(&'+') | Some(&'-')) {
                text.push(self.bump().unwrap());
            }
            let mut digits = 0;
            while matches!(self.chars.peek(), Some(&c) if c.is_ascii_digit()) {
                text.push(self.bump().unwrap());
                digits += 1;
            }
            if digits == 0 {
                return Err(Error::BadNumber { line, col, text });
            }
        }
        match text.parse::<f64>() {
            Ok(value) => Ok(Tok::Number { text, value }),
            Err(_) => Err(Error::BadNumber { line, col, text }),
        }
    }
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

/// OpenQASM 2 statements we recognise but do not support; reported as
/// "unsupported" rather than "unknown gate".
const UNSUPPORTED: &[&str] = &[
    "creg", "measure", "barrier", "gate", "reset", "if", "opaque",
];

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    registers: Vec<(String, usize)>,
    statements: Vec<GateStmt>,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: &Tok, expected: &str) -> Result<Token, Error> {
        let t = self.bump();
        if &t.tok == want {
            Ok(t)
        } else {
            Err(Error::Syntax {
                line: t.line,
                col: t.col,
                expected: expected.into(),
                found: t.tok.describe(),
            })
        }
    }

    fn expect_ident(&mut self, expected: &str) -> Result<(String, usize, usize), Error> {
        let t = self.bump();
        match t.tok {
            Tok::Ident(s) => Ok((s, t.line, t.col)),
            other => Err(Error::Syntax {
                line: t.line,
                col: t.col,
                expected: expected.into(),
                found: other.describe(),
            }),
        }
    }

    fn expect_index(&mut self) -> Result<(usize, usize, usize), Error> {
        let t = self.bump();
        match &t.tok {
            Tok::Number { text, .. } if text.chars().all(|c| c.is_ascii_digit()) => {
                match text.parse::<usize>() {
                    Ok(v) => Ok((v, t.line, t.col)),
                    Err(_) => Err(Error::BadNumber {
                        line: t.line,
                        col: t.col,
                        text: text.clone(),
                    }),
                }
            }
            other => Err(Error::Syntax {
                line: t.line,
                col: t.col,
                expected: "non-negative integer".into(),
                found: other.describe(),
            }),
        }
    }

    fn program(&mut self) -> Result<(), Error> {
        // optional OPENQASM 2.0; header
        if matches!(&self.peek().tok, Tok::Ident(s) if s == "OPENQASM") {
            self.bump();
            let t = self.bump();
            match t.tok {
                Tok::Number { value, .. } if value == 2.0 => {}
                other => {
                    return Err(Error::Syntax {
                        line: t.line,
                        col: t.col,
                        expected: "version 2.0".into(),
                        found: other.describe(),
                    })
                }
            }
            self.expect(&Tok::Semi, "';'")?;
        }
        loop {
            let t = self.peek().clone();
            match &t.tok {
                Tok::Eof => return Ok(()),
                Tok::Ident(name) => match name.as_str() {
                    "include" => {
                        self.bump();
                        let t = self.bump();
                        if !matches!(t.tok, Tok::Str(_)) {
                            return Err(Error::Syntax {
                                line: t.line,
                                col: t.col,
                                expected: "file name string".into(),
                                found: t.tok.describe(),
                            });
                        }
                        self.expect(&Tok::Semi, "';'")?;
                    }
                    "qreg" => self.qreg()?,
                    name if UNSUPPORTED.contains(&name) => {
                        return Err(Error::UnsupportedStatement {
                            line: t.line,
                            col: t.col,
                            name: name.into(),
                        })
                    }
                    _ => self.gate_stmt()?,
                },
                other => {
                    return Err(Error::Syntax {
                        line: t.line,
                        col: t.col,
                        expected: "statement".into(),
                        found: other.describe(),
                    })
                }
            }
        }
    }

    fn qreg(&mut self) -> Result<(), Error> {
        self.bump(); // qreg
        let (name, nline, ncol) = self.expect_ident("register name")?;
        if self.registers.iter().any(|(n, _)| n == &name) {
            return Err(Error::RegisterRedeclared {
                line: nline,
                col: ncol,
                name,
            });
        }
        self.expect(&Tok::LBracket, "'['")?;
        let (size, sline, scol) = self.expect_index()?;
        if size == 0 || size > qcore::MAX_QUBITS {
            return Err(Error::RegisterSize {
                line: sline,
                col: scol,
                size,
                max: qcore::MAX_QUBITS,
            });
        }
        self.expect(&Tok::RBracket, "']'")?;
        self.expect(&Tok::Semi, "';'")?;
        self.registers.push((name, size));
        Ok(())
    }

    fn gate_stmt(&mut self) -> Result<(), Error> {
        let (name, line, col) = self.expect_ident("gate name")?;
        let Some(gate) = GateName::from_str(&name) else {
            return Err(Error::UnknownGate { line, col, name });
        };
        let mut params = Vec::new();
        if self.peek().tok == Tok::LParen {
            self.bump();
            loop {
                params.push(self.expr()?);
                let t = self.bump();
                match t.tok {
                    Tok::Comma => continue,
                    Tok::RParen => break,
                    other => {
                        return Err(Error::Syntax {
                            line: t.line,
                            col: t.col,
                            expected: "',' or ')'".into(),
                            found: other.describe(),
                        })
                    }
                }
            }
        }
        if params.len() != gate.param_count() {
            return Err(Error::ParamCount {
                line,
                col,
                gate: name,
                expected: gate.param_count(),
                got: params.len(),
            });
        }
        let mut args = Vec::new();
        loop {
            args.push(self.arg()?);
            let t = self.bump();
            match t.tok {
                Tok::Comma => continue,
                Tok::Semi => break,
                other => {
                    return Err(Error::Syntax {
                        line: t.line,
                        col: t.col,
                        expected: "',' or ';'".into(),
                        found: other.describe(),
                    })
                }
            }
        }
        if args.len() != gate.arg_count() {
            return Err(Error::ArgCount {
                line,
                col,
                gate: name,
                expected: gate.arg_count(),
                got: args.len(),
            });
        }
        if gate == GateName::Cx && args[0] == args[1] {
            return Err(Error::DuplicateQubit { line, col });
        }
        self.statements.push(GateStmt {
            name: gate,
            params,
            args,
            line,
            col,
        });
        Ok(())
    }

    fn arg(&mut self) -> Result<(String, usize), Error> {
        let (name, line, col) = self.expect_ident("register operand")?;
        let Some(&(_, size)) = self.registers.iter().find(|(n, _)| n == &name) else {
            return Err(Error::UndeclaredRegister { line, col, name });
        };
        self.expect(&Tok::LBracket, "'['")?;
        let (index, iline, icol) = self.expect_index()?;
        if index >= size {
            return Err(Error::IndexOutOfBounds {
                line: iline,
                col: icol,
                name,
                index,
                size,
            });
        }
        self.expect(&Tok::RBracket, "']'")?;
        Ok((name, index))
    }

    // expr := term (('+'|'-') term)*
    fn expr(&mut self) -> Result<AngleExpr, Error> {
        let mut lhs = self.term()?;
        loop {
            match self.peek().tok {
                Tok::Plus => {
                    self.bump();
                    lhs = AngleExpr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = AngleExpr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    // term := factor (('*'|'/') factor)*
    fn term(&mut self) -> Result<AngleExpr, Error> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek().tok {
                Tok::Star => {
                    self.bump();
                    lhs = AngleExpr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Tok::Slash => {
                    self.bump();
                    lhs = AngleExpr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    // factor := '-' factor | 'pi' | NUMBER | '(' expr ')'
    fn factor(&mut self) -> Result<AngleExpr, Error> {
        let t = self.bump();
        match t.tok {
            Tok::Minus => Ok(AngleExpr::Neg(Box::new(self.factor()?))),
            Tok::Number { value, .. } => Ok(AngleExpr::Literal(value)),
            Tok::Ident(ref s) if s == "pi" => Ok(AngleExpr::Pi),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(&Tok::RParen, "')'")?;
                Ok(inner)
            }
            other => Err(Error::Syntax {
                line: t.line,
                col: t.col,
                expected: "angle expression".into(),
                found: other.describe(),
            }),
        }
    }
}

/// Parse source text into a validated program.
pub fn parse(src: &str) -> Result<QasmProgram, Error> {
    let tokens = Lexer::new(src).tokenize()?;
    let mut p = Parser {
        tokens,
        pos: 0,
        registers: Vec::new(),
        statements: Vec::new(),
    };
    p.program()?;
    Ok(QasmProgram {
        registers: p.registers,
        statements: p.statements,
    })
}

/// Evaluate a program into a gate-level circuit. Requires exactly one
/// quantum register; register qubit `i` becomes circuit qubit `i`.
pub fn lower(p: &QasmProgram) -> Result<Circuit, Error> {
    match p.registers.len() {
        1 => {}
        0 => return Err(Error::NoRegister),
        n => return Err(Error::MultipleRegisters(n)),
    }
    let size = p.registers[0].1;
    let mut circuit = Circuit::new(size).expect("register size already validated");
    for stmt in &p.statements {
        let mut angles = Vec::with_capacity(stmt.params.len());
        for e in &stmt.params {
            let v = e.eval();
            if !v.is_finite() {
                return Err(Error::NonFiniteAngle {
                    line: stmt.line,
                    col: stmt.col,
                });
            }
            angles.push(v);
        }
        let gate = match stmt.name {
            GateName::U3 => Gate::U3 {
                theta: angles[0],
                phi: angles[1],
                lambda: angles[2],
                qubit: stmt.args[0].1,
            },
            GateName::U2 => Gate::U3 {
                theta: std::f64::consts::FRAC_PI_2,
                phi: angles[0],
                lambda: angles[1],
                qubit: stmt.args[0].1,
            },
            GateName::U1 => Gate::U1 {
                lambda: angles[0],
                qubit: stmt.args[0].1,
            },
            GateName::Ry => Gate::Ry {
                theta: angles[0],
                qubit: stmt.args[0].1,
            },
            GateName::Cx => Gate::Cx {
                control: stmt.args[0].1,
                target: stmt.args[1].1,
            },
        };
        circuit
            .push(gate)
            .expect("operand indices already validated");
    }
    Ok(circuit)
}

/// Convenience: parse and lower in one step.
pub fn parse_circuit(src: &str) -> Result<Circuit, Error> {
    lower(&parse(src)?)
}

/// Emit the subset grammar for `circuit`, using a register named `q`.
/// Angles are printed with shortest-round-trip formatting, so parsing the
/// output reproduces the circuit exactly.
pub fn serialize(circuit: &Circuit) -> String {
    let mut out = String::new();
    out.push_str("OPENQASM 2.0;\n");
    out.push_str("include \"qelib1.inc\";\n");
    let _ = writeln!(out, "qreg q[{}];", circuit.n_qubits());
    for g in circuit.gates() {
        let _ = match *g {
            Gate::U3 {
                theta,
                phi,
                lambda,
                qubit,
            } => writeln!(out, "u3({theta},{phi},{lambda}) q[{qubit}];"),
            Gate::U1 { lambda, qubit } => writeln!(out, "u1({lambda}) q[{qubit}];"),
            Gate::Ry { theta, qubit } => writeln!(out, "ry({theta}) q[{qubit}];"),
            Gate::Cx { control, target } => writeln!(out, "cx q[{control}], q[{target}];"),
        };
    }
    out
}
