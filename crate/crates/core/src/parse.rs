//! Lexer and recursive-descent parser for the input grammar shared by the
//! library and the CLI. Four file kinds exist, distinguished by their header
//! word: `atlas`, `bundle`, `splitting`, and `series`.
//!
//! ```text
//! atlas <name> n=<arity> convention=<zsp|parity|comm>
//! vars x, y;                  # base variables
//! vars xi:(0,1), theta:(1,1); # formal variables with degrees
//! chart U;
//! overlap U V;
//! triple U V W;
//! transition U -> V { x' = x + theta^2; xi' = xi; }
//! ```
//!
//! Expressions: terms joined by `+`/`-`, factors joined by `*` or
//! juxtaposition, `^` for powers, rational literals `a/b`, `#` comments.
//! Inside a transition or morphism block the primed left-hand names are the
//! target coordinates; unassigned coordinates default to the identity.

use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::atlas::Atlas;
use crate::bundle::{BundleTransition, GradedBundle};
use crate::degree::Degree;
use crate::error::{Error, Result};
use crate::linalg::PolyMatrix;
use crate::morphism::morphism_from_assignments;
use crate::poly::BasePolynomial;
use crate::series::{Cap, GradedSeries};
use crate::table::{SignRule, VariableTable};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident { name: String, primed: bool },
    Int(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Colon,
    Plus,
    Minus,
    Star,
    Caret,
    Slash,
    Eq,
    Arrow,
    Eof,
}

impl std::fmt::Display for Tok {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tok::Ident { name, primed } => {
                write!(f, "{name}{}", if *primed { "'" } else { "" })
            }
            Tok::Int(s) => write!(f, "{s}"),
            Tok::LParen => write!(f, "("),
            Tok::RParen => write!(f, ")"),
            Tok::LBrace => write!(f, "{{"),
            Tok::RBrace => write!(f, "}}"),
            Tok::LBracket => write!(f, "["),
            Tok::RBracket => write!(f, "]"),
            Tok::Comma => write!(f, ","),
            Tok::Semi => write!(f, ";"),
            Tok::Colon => write!(f, ":"),
            Tok::Plus => write!(f, "+"),
            Tok::Minus => write!(f, "-"),
            Tok::Star => write!(f, "*"),
            Tok::Caret => write!(f, "^"),
            Tok::Slash => write!(f, "/"),
            Tok::Eq => write!(f, "="),
            Tok::Arrow => write!(f, "->"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = text.chars().peekable();
    macro_rules! push {
        ($t:expr) => {
            out.push(Spanned { tok: $t, line, col })
        };
    }
    while let Some(&c) = chars.peek() {
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            ' ' | '\t' | '\r' => {
                chars.next();
                col += 1;
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            '0'..='9' => {
                let start_col = col;
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_digit() {
                        s.push(c);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                out.push(Spanned {
                    tok: Tok::Int(s),
                    line,
                    col: start_col,
                });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start_col = col;
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        s.push(c);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                let primed = if chars.peek() == Some(&'\'') {
                    chars.next();
                    col += 1;
                    true
                } else {
                    false
                };
                out.push(Spanned {
                    tok: Tok::Ident { name: s, primed },
                    line,
                    col: start_col,
                });
            }
            '-' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'>') {
                    chars.next();
                    col += 1;
                    push!(Tok::Arrow);
                } else {
                    push!(Tok::Minus);
                }
            }
            _ => {
                let tok = match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    ',' => Tok::Comma,
                    ';' => Tok::Semi,
                    ':' => Tok::Colon,
                    '+' => Tok::Plus,
                    '*' => Tok::Star,
                    '^' => Tok::Caret,
                    '/' => Tok::Slash,
                    '=' => Tok::Eq,
                    other => {
                        return Err(Error::Syntax {
                            line,
                            col,
                            msg: format!("unexpected character `{other}`"),
                        })
                    }
                };
                chars.next();
                push!(tok);
                col += 1;
            }
        }
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

/// Raw content of a `splitting` file: a family of chart-wise morphism
/// blocks, still unbound to any atlas.
#[derive(Clone, Debug)]
pub struct SplittingSpec {
    pub name: String,
    pub arity: u8,
    pub order: u32,
    pub rule: SignRule,
    pub base_names: Vec<String>,
    pub formal: Vec<(String, Degree)>,
    /// Per chart: assignments split-coordinate = expression-over-chart-vars.
    pub morphisms: Vec<(String, Vec<(String, GradedSeries)>)>,
}

/// Content of a `series` file: expressions over one variable table.
#[derive(Clone, Debug)]
pub struct SeriesFile {
    pub name: String,
    pub table: Arc<VariableTable>,
    pub exprs: Vec<GradedSeries>,
}

#[derive(Clone, Debug)]
pub enum ParsedFile {
    Atlas(Atlas),
    Bundle(GradedBundle),
    Splitting(SplittingSpec),
    Series(SeriesFile),
}

pub fn parse_file(text: &str) -> Result<ParsedFile> {
    parse_file_with_convention(text, None)
}

/// Parses a file, optionally overriding the convention named in the header.
pub fn parse_file_with_convention(text: &str, convention: Option<SignRule>) -> Result<ParsedFile> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    p.parse_file(convention)
}

/// Parses a single expression over the given table (handy in tests and for
/// round-trip checks).
pub fn parse_expression(text: &str, table: &Arc<VariableTable>, cap: Cap) -> Result<GradedSeries> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    let s = p.parse_expr(table, cap)?;
    p.expect(&Tok::Eof)?;
    Ok(s)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> (usize, usize) {
        (self.toks[self.pos].line, self.toks[self.pos].col)
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        let (line, col) = self.here();
        Error::Syntax {
            line,
            col,
            msg: msg.into(),
        }
    }

    fn expect(&mut self, t: &Tok) -> Result<()> {
        if self.peek() == t {
            self.bump();
            Ok(())
        } else {
            Err(self.err(format!("expected `{t}`, found `{}`", self.peek())))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident {
                name,
                primed: false,
            } => {
                self.bump();
                Ok(name)
            }
            other => Err(self.err(format!("expected identifier, found `{other}`"))),
        }
    }

    fn int_u32(&mut self) -> Result<u32> {
        match self.peek().clone() {
            Tok::Int(s) => {
                self.bump();
                s.parse::<u32>()
                    .map_err(|_| self.err(format!("integer `{s}` out of range")))
            }
            other => Err(self.err(format!("expected integer, found `{other}`"))),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<()> {
        let (line, col) = self.here();
        match self.peek().clone() {
            Tok::Ident {
                name,
                primed: false,
            } if name == kw => {
                self.bump();
                Ok(())
            }
            other => Err(Error::Syntax {
                line,
                col,
                msg: format!("expected `{kw}`, found `{other}`"),
            }),
        }
    }

    fn degree(&mut self, arity: u8) -> Result<Degree> {
        self.expect(&Tok::LParen)?;
        let mut digits = Vec::new();
        loop {
            let d = self.int_u32()?;
            if d > 1 {
                return Err(self.err(format!("degree digits must be 0 or 1, got {d}")));
            }
            digits.push(d as u8);
            match self.bump() {
                Tok::Comma => continue,
                Tok::RParen => break,
                other => return Err(self.err(format!("expected `,` or `)`, found `{other}`"))),
            }
        }
        if digits.len() != arity as usize {
            return Err(self.err(format!(
                "degree has {} digits, file arity is {arity}",
                digits.len()
            )));
        }
        Degree::new(&digits)
    }

    /// header := kind name n=INT [k=INT] convention=WORD
    fn header(
        &mut self,
        kind: &str,
        with_order: bool,
    ) -> Result<(String, u8, Option<u32>, SignRule)> {
        self.keyword(kind)?;
        let name = self.ident()?;
        self.keyword("n")?;
        self.expect(&Tok::Eq)?;
        let n = self.int_u32()?;
        if n == 0 || n > crate::degree::MAX_ARITY as u32 {
            return Err(self.err(format!("arity must be between 1 and 16, got {n}")));
        }
        let order = if with_order {
            self.keyword("k")?;
            self.expect(&Tok::Eq)?;
            Some(self.int_u32()?)
        } else {
            None
        };
        self.keyword("convention")?;
        self.expect(&Tok::Eq)?;
        let conv = self.ident()?;
        let rule = SignRule::parse(&conv).map_err(|_| {
            self.err(format!(
                "unknown convention `{conv}` (expected zsp, parity, or comm)"
            ))
        })?;
        Ok((name, n as u8, order, rule))
    }

    fn parse_file(&mut self, convention: Option<SignRule>) -> Result<ParsedFile> {
        match self.peek().clone() {
            Tok::Ident {
                name,
                primed: false,
            } => match name.as_str() {
                "atlas" => self.parse_atlas(convention).map(ParsedFile::Atlas),
                "bundle" => self.parse_bundle(convention).map(ParsedFile::Bundle),
                "splitting" => self.parse_splitting(convention).map(ParsedFile::Splitting),
                "series" => self.parse_series(convention).map(ParsedFile::Series),
                other => Err(self.err(format!(
                    "expected `atlas`, `bundle`, `splitting`, or `series`, found `{other}`"
                ))),
            },
            other => Err(self.err(format!("expected a file header, found `{other}`"))),
        }
    }

    /// vars statement: `vars decl (, decl)* ;` with decl := name [: degree]
    fn vars_stmt(
        &mut self,
        arity: u8,
        base: &mut Vec<String>,
        formal: &mut Vec<(String, Degree)>,
    ) -> Result<()> {
        loop {
            let name = self.ident()?;
            if self.peek() == &Tok::Colon {
                self.bump();
                let d = self.degree(arity)?;
                formal.push((name, d));
            } else {
                if !formal.is_empty() {
                    return Err(self.err(format!(
                        "base variable `{name}` declared after formal variables; declare base variables first"
                    )));
                }
                base.push(name);
            }
            match self.bump() {
                Tok::Comma => continue,
                Tok::Semi => return Ok(()),
                other => return Err(self.err(format!("expected `,` or `;`, found `{other}`"))),
            }
        }
    }

    fn parse_atlas(&mut self, convention: Option<SignRule>) -> Result<Atlas> {
        let (name, arity, _, mut rule) = self.header("atlas", false)?;
        if let Some(r) = convention {
            rule = r;
        }
        let mut base: Vec<String> = Vec::new();
        let mut formal: Vec<(String, Degree)> = Vec::new();
        let mut charts: Vec<String> = Vec::new();
        let mut overlaps = Vec::new();
        let mut triples = Vec::new();
        type RawTransition = (String, String, Vec<(String, GradedSeries)>);
        let mut raw_transitions: Vec<RawTransition> = Vec::new();
        let mut tables: std::collections::BTreeMap<String, Arc<VariableTable>> = Default::default();
        loop {
            match self.peek().clone() {
                Tok::Eof => break,
                Tok::Ident {
                    name: kw,
                    primed: false,
                } => match kw.as_str() {
                    "vars" => {
                        self.bump();
                        if !raw_transitions.is_empty() || !charts.is_empty() {
                            return Err(self.err("vars must be declared before charts"));
                        }
                        self.vars_stmt(arity, &mut base, &mut formal)?;
                    }
                    "chart" => {
                        self.bump();
                        let c = self.ident()?;
                        let t = VariableTable::new(
                            c.clone(),
                            arity,
                            base.clone(),
                            formal.clone(),
                            rule,
                        )?;
                        tables.insert(c.clone(), t);
                        charts.push(c);
                        self.expect(&Tok::Semi)?;
                    }
                    "overlap" => {
                        self.bump();
                        let a = self.ident()?;
                        let b = self.ident()?;
                        overlaps.push((a, b));
                        self.expect(&Tok::Semi)?;
                    }
                    "triple" => {
                        self.bump();
                        let u = self.ident()?;
                        let v = self.ident()?;
                        let w = self.ident()?;
                        triples.push((u, v, w));
                        self.expect(&Tok::Semi)?;
                    }
                    "transition" => {
                        self.bump();
                        let src = self.ident()?;
                        self.expect(&Tok::Arrow)?;
                        let dst = self.ident()?;
                        let table = tables
                            .get(&src)
                            .ok_or_else(|| self.err(format!("unknown chart `{src}`")))?
                            .clone();
                        let assigns = self.assignment_block(&table)?;
                        raw_transitions.push((src, dst, assigns));
                    }
                    other => return Err(self.err(format!("unexpected statement `{other}`"))),
                },
                other => return Err(self.err(format!("unexpected token `{other}`"))),
            }
        }
        let mut transitions = Vec::new();
        for (src, dst, assigns) in raw_transitions {
            let src_table = tables
                .get(&src)
                .ok_or_else(|| Error::MalformedAtlas(format!("unknown chart `{src}`")))?;
            let dst_table = tables
                .get(&dst)
                .ok_or_else(|| Error::MalformedAtlas(format!("unknown chart `{dst}`")))?;
            let m = morphism_from_assignments(
                src_table.clone(),
                dst_table.clone(),
                &assigns,
                Cap::Exact,
            )?;
            transitions.push(((src, dst), m));
        }
        Atlas::new(
            name,
            arity,
            rule,
            base,
            formal,
            charts,
            overlaps,
            triples,
            transitions,
        )
    }

    /// `{ coord' = expr; ... }`
    fn assignment_block(
        &mut self,
        table: &Arc<VariableTable>,
    ) -> Result<Vec<(String, GradedSeries)>> {
        self.expect(&Tok::LBrace)?;
        let mut out = Vec::new();
        loop {
            match self.peek().clone() {
                Tok::RBrace => {
                    self.bump();
                    return Ok(out);
                }
                Tok::Ident { name, primed: true } => {
                    self.bump();
                    self.expect(&Tok::Eq)?;
                    let s = self.parse_expr(table, Cap::Exact)?;
                    self.expect(&Tok::Semi)?;
                    out.push((name, s));
                }
                other => {
                    return Err(self.err(format!(
                        "expected a primed coordinate assignment or `}}`, found `{other}`"
                    )))
                }
            }
        }
    }

    fn parse_bundle(&mut self, convention: Option<SignRule>) -> Result<GradedBundle> {
        let (name, arity, _, mut rule) = self.header("bundle", false)?;
        if let Some(r) = convention {
            rule = r;
        }
        let mut base: Vec<String> = Vec::new();
        let mut formal: Vec<(String, Degree)> = Vec::new();
        let mut charts: Vec<String> = Vec::new();
        let mut overlaps = Vec::new();
        let mut triples = Vec::new();
        let mut transitions: Vec<((String, String), BundleTransition)> = Vec::new();
        let mut table: Option<Arc<VariableTable>> = None;
        loop {
            match self.peek().clone() {
                Tok::Eof => break,
                Tok::Ident {
                    name: kw,
                    primed: false,
                } => match kw.as_str() {
                    "vars" => {
                        self.bump();
                        self.vars_stmt(arity, &mut base, &mut formal)?;
                        table = None;
                    }
                    "chart" => {
                        self.bump();
                        let c = self.ident()?;
                        charts.push(c);
                        self.expect(&Tok::Semi)?;
                    }
                    "overlap" => {
                        self.bump();
                        let a = self.ident()?;
                        let b = self.ident()?;
                        overlaps.push((a, b));
                        self.expect(&Tok::Semi)?;
                    }
                    "triple" => {
                        self.bump();
                        let u = self.ident()?;
                        let v = self.ident()?;
                        let w = self.ident()?;
                        triples.push((u, v, w));
                        self.expect(&Tok::Semi)?;
                    }
                    "transition" => {
                        self.bump();
                        let src = self.ident()?;
                        self.expect(&Tok::Arrow)?;
                        let dst = self.ident()?;
                        if table.is_none() {
                            table = Some(VariableTable::new(
                                "bundle",
                                arity,
                                base.clone(),
                                formal.clone(),
                                rule,
                            )?);
                        }
                        let t = table.as_ref().unwrap().clone();
                        let tr = self.bundle_transition_block(&t, &base)?;
                        transitions.push(((src, dst), tr));
                    }
                    other => return Err(self.err(format!("unexpected statement `{other}`"))),
                },
                other => return Err(self.err(format!("unexpected token `{other}`"))),
            }
        }
        GradedBundle::new(
            name,
            arity,
            rule,
            base,
            formal,
            charts,
            overlaps,
            triples,
            transitions,
        )
    }

    /// `{ x' = base-expr; block (deg) [ e, e; e, e ]; ... }`
    fn bundle_transition_block(
        &mut self,
        table: &Arc<VariableTable>,
        base_names: &[String],
    ) -> Result<BundleTransition> {
        self.expect(&Tok::LBrace)?;
        let p = base_names.len();
        let mut base_images: Vec<Option<BasePolynomial>> = vec![None; p];
        let mut blocks = std::collections::BTreeMap::new();
        loop {
            match self.peek().clone() {
                Tok::RBrace => {
                    self.bump();
                    let base_images = base_images
                        .into_iter()
                        .enumerate()
                        .map(|(j, img)| img.unwrap_or_else(|| BasePolynomial::var(p, j)))
                        .collect();
                    return Ok(BundleTransition {
                        base_images,
                        blocks,
                    });
                }
                Tok::Ident { name, primed: true } => {
                    self.bump();
                    self.expect(&Tok::Eq)?;
                    let s = self.parse_expr(table, Cap::Exact)?;
                    self.expect(&Tok::Semi)?;
                    let poly = self.base_only(&s)?;
                    let j = base_names
                        .iter()
                        .position(|n| n == &name)
                        .ok_or_else(|| self.err(format!("`{name}` is not a base coordinate")))?;
                    base_images[j] = Some(poly);
                }
                Tok::Ident {
                    name,
                    primed: false,
                } if name == "block" => {
                    self.bump();
                    let d = self.degree(table.arity())?;
                    self.expect(&Tok::LBracket)?;
                    let mut rows: Vec<Vec<BasePolynomial>> = vec![Vec::new()];
                    loop {
                        let s = self.parse_expr(table, Cap::Exact)?;
                        rows.last_mut().unwrap().push(self.base_only(&s)?);
                        match self.bump() {
                            Tok::Comma => continue,
                            Tok::Semi => rows.push(Vec::new()),
                            Tok::RBracket => break,
                            other => {
                                return Err(
                                    self.err(format!("expected `,`, `;`, or `]`, found `{other}`"))
                                )
                            }
                        }
                    }
                    self.expect(&Tok::Semi)?;
                    blocks.insert(d, PolyMatrix::from_rows(rows));
                }
                other => {
                    return Err(self.err(format!(
                        "expected an assignment, `block`, or `}}`, found `{other}`"
                    )))
                }
            }
        }
    }

    fn base_only(&self, s: &GradedSeries) -> Result<BasePolynomial> {
        let eps = s.epsilon();
        let whole = GradedSeries::from_poly(s.table().clone(), s.cap(), eps.clone());
        if &whole != s {
            return Err(self.err("expression must involve base variables only"));
        }
        Ok(eps)
    }

    fn parse_splitting(&mut self, convention: Option<SignRule>) -> Result<SplittingSpec> {
        let (name, arity, order, mut rule) = self.header("splitting", true)?;
        if let Some(r) = convention {
            rule = r;
        }
        let mut base: Vec<String> = Vec::new();
        let mut formal: Vec<(String, Degree)> = Vec::new();
        let mut morphisms = Vec::new();
        loop {
            match self.peek().clone() {
                Tok::Eof => break,
                Tok::Ident {
                    name: kw,
                    primed: false,
                } => match kw.as_str() {
                    "vars" => {
                        self.bump();
                        self.vars_stmt(arity, &mut base, &mut formal)?;
                    }
                    "morphism" => {
                        self.bump();
                        let chart = self.ident()?;
                        let table = VariableTable::new(
                            chart.clone(),
                            arity,
                            base.clone(),
                            formal.clone(),
                            rule,
                        )?;
                        let assigns = self.assignment_block(&table)?;
                        morphisms.push((chart, assigns));
                    }
                    other => return Err(self.err(format!("unexpected statement `{other}`"))),
                },
                other => return Err(self.err(format!("unexpected token `{other}`"))),
            }
        }
        Ok(SplittingSpec {
            name,
            arity,
            order: order.expect("header with k"),
            rule,
            base_names: base,
            formal,
            morphisms,
        })
    }

    fn parse_series(&mut self, convention: Option<SignRule>) -> Result<SeriesFile> {
        let (name, arity, _, mut rule) = self.header("series", false)?;
        if let Some(r) = convention {
            rule = r;
        }
        let mut base: Vec<String> = Vec::new();
        let mut formal: Vec<(String, Degree)> = Vec::new();
        let mut exprs = Vec::new();
        let mut table: Option<Arc<VariableTable>> = None;
        loop {
            match self.peek().clone() {
                Tok::Eof => break,
                Tok::Ident {
                    name: kw,
                    primed: false,
                } => match kw.as_str() {
                    "vars" => {
                        self.bump();
                        self.vars_stmt(arity, &mut base, &mut formal)?;
                        table = None;
                    }
                    "expr" => {
                        self.bump();
                        if table.is_none() {
                            table = Some(VariableTable::new(
                                name.clone(),
                                arity,
                                base.clone(),
                                formal.clone(),
                                rule,
                            )?);
                        }
                        let t = table.as_ref().unwrap().clone();
                        let s = self.parse_expr(&t, Cap::Exact)?;
                        self.expect(&Tok::Semi)?;
                        exprs.push(s);
                    }
                    other => return Err(self.err(format!("unexpected statement `{other}`"))),
                },
                other => return Err(self.err(format!("unexpected token `{other}`"))),
            }
        }
        let table = match table {
            Some(t) => t,
            None => VariableTable::new(name.clone(), arity, base, formal, rule)?,
        };
        Ok(SeriesFile { name, table, exprs })
    }

    // --- expressions -----------------------------------------------------

    fn parse_expr(&mut self, table: &Arc<VariableTable>, cap: Cap) -> Result<GradedSeries> {
        let mut acc = self.parse_term(table, cap)?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    let t = self.parse_term(table, cap)?;
                    acc = acc.add(&t)?;
                }
                Tok::Minus => {
                    self.bump();
                    let t = self.parse_term(table, cap)?;
                    acc = acc.sub(&t)?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn parse_term(&mut self, table: &Arc<VariableTable>, cap: Cap) -> Result<GradedSeries> {
        let mut negate = false;
        while self.peek() == &Tok::Minus {
            self.bump();
            negate = !negate;
        }
        let mut acc = self.parse_factor(table, cap)?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    let f = self.parse_factor(table, cap)?;
                    acc = acc.mul(&f)?;
                }
                Tok::Ident { .. } | Tok::Int(_) | Tok::LParen => {
                    let f = self.parse_factor(table, cap)?;
                    acc = acc.mul(&f)?;
                }
                _ => break,
            }
        }
        Ok(if negate { acc.neg() } else { acc })
    }

    fn parse_factor(&mut self, table: &Arc<VariableTable>, cap: Cap) -> Result<GradedSeries> {
        let base = self.parse_primary(table, cap)?;
        if self.peek() == &Tok::Caret {
            self.bump();
            let e = self.int_u32()?;
            return base.pow(e);
        }
        Ok(base)
    }

    fn parse_primary(&mut self, table: &Arc<VariableTable>, cap: Cap) -> Result<GradedSeries> {
        match self.peek().clone() {
            Tok::Int(s) => {
                self.bump();
                let numer: BigInt = s.parse().map_err(|_| self.err("malformed integer"))?;
                let value = if self.peek() == &Tok::Slash {
                    self.bump();
                    let d = match self.bump() {
                        Tok::Int(d) => d,
                        other => {
                            return Err(self
                                .err(format!("expected denominator after `/`, found `{other}`")))
                        }
                    };
                    let denom: BigInt = d.parse().map_err(|_| self.err("malformed integer"))?;
                    if denom == BigInt::from(0) {
                        return Err(self.err("zero denominator"));
                    }
                    BigRational::new(numer, denom)
                } else {
                    BigRational::from_integer(numer)
                };
                Ok(GradedSeries::constant(table.clone(), cap, value))
            }
            Tok::Ident { name, primed } => {
                if primed {
                    return Err(self.err(format!(
                        "primed name `{name}'` is only allowed as an assignment target"
                    )));
                }
                self.bump();
                match table.var(&name) {
                    Some(crate::table::VarRef::Base(i)) => {
                        Ok(GradedSeries::base_var(table.clone(), cap, i))
                    }
                    Some(crate::table::VarRef::Formal(a)) => {
                        Ok(GradedSeries::formal_var(table.clone(), cap, a))
                    }
                    None => Err(self.err(format!("unknown variable `{name}`"))),
                }
            }
            Tok::LParen => {
                self.bump();
                let s = self.parse_expr(table, cap)?;
                self.expect(&Tok::RParen)?;
                Ok(s)
            }
            other => Err(self.err(format!("expected an expression, found `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> Arc<VariableTable> {
        VariableTable::new(
            "T",
            2,
            vec!["x".into()],
            vec![
                ("xi".into(), Degree::new(&[0, 1]).unwrap()),
                ("eta".into(), Degree::new(&[1, 0]).unwrap()),
                ("theta".into(), Degree::new(&[1, 1]).unwrap()),
            ],
            SignRule::ScalarProduct,
        )
        .unwrap()
    }

    #[test]
    fn expressions_and_juxtaposition() {
        let t = table();
        let s = parse_expression("2 xi eta + 3/2 x^2", &t, Cap::Exact).unwrap();
        assert_eq!(s.to_string(), "3/2*x^2 + 2*xi*eta");
        let normalized = parse_expression("theta * eta", &t, Cap::Exact).unwrap();
        assert_eq!(normalized.to_string(), "-eta*theta");
        let zero = parse_expression("xi xi", &t, Cap::Exact).unwrap();
        assert!(zero.is_zero());
        let paren = parse_expression("(x + theta^2) * (x - theta^2)", &t, Cap::Exact).unwrap();
        assert_eq!(paren.to_string(), "x^2 - theta^4");
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let t = table();
        let err = parse_expression("x + %", &t, Cap::Exact).unwrap_err();
        match err {
            Error::Syntax { line, col, .. } => {
                assert_eq!(line, 1);
                assert_eq!(col, 5);
            }
            other => panic!("expected syntax error, got {other:?}"),
        }
        assert!(matches!(
            parse_expression("x + unknown", &t, Cap::Exact),
            Err(Error::Syntax { .. })
        ));
    }

    #[test]
    fn parses_small_atlas() {
        let text = "\
atlas demo n=2 convention=zsp
vars x;
vars xi:(0,1), eta:(1,0), theta:(1,1);
chart U;
chart V;
overlap U V;
transition U -> V { x' = x + theta^2; }
transition V -> U { x' = x - theta^2; }
";
        let ParsedFile::Atlas(atlas) = parse_file(text).unwrap() else {
            panic!("expected atlas");
        };
        assert_eq!(atlas.charts(), ["U", "V"]);
        let m = atlas.transition("U", "V").unwrap();
        assert_eq!(m.image_of("x").unwrap().to_string(), "x + theta^2");
        // unassigned coordinates default to identity
        assert_eq!(m.image_of("theta").unwrap().to_string(), "theta");
        // round trip through the canonical printer
        let ParsedFile::Atlas(again) = parse_file(&atlas.to_text()).unwrap() else {
            panic!("expected atlas");
        };
        assert_eq!(atlas, again);
    }

    #[test]
    fn grading_violation_detected_at_parse() {
        let text = "\
atlas bad n=2 convention=zsp
vars x;
vars xi:(0,1);
chart U;
chart V;
overlap U V;
transition U -> V { x' = x + xi; }
";
        assert!(matches!(parse_file(text), Err(Error::DegreeMismatch(_))));
    }

    #[test]
    fn parses_series_file() {
        let text = "\
series demo n=2 convention=zsp
vars x;
vars xi:(0,1), eta:(1,0), theta:(1,1);
expr (x + theta^2)*(x - theta^2);
expr theta eta;
";
        let ParsedFile::Series(f) = parse_file(text).unwrap() else {
            panic!("expected series file");
        };
        assert_eq!(f.exprs.len(), 2);
        assert_eq!(f.exprs[0].to_string(), "x^2 - theta^4");
        assert_eq!(f.exprs[1].to_string(), "-eta*theta");
    }
}
