//! The `.srcm` scenario language: world declarations, business and
//! contract overlays, D_outs blocks, patterns, lots, bids, and a script of
//! transformations, primitive steps, and assertions.

mod lexer;
mod parser;
mod printer;
mod resolve;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::douts::DoutsInput;
use crate::model::*;
use crate::patterns::{Bid, Constraint, Lot, Pattern};
use crate::transformations::TransformationSpec;
use crate::transitions::PrimitiveStep;

pub use printer::{print, script_item};

/// 1-based line/column range, end exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Span {
    pub line: u32,
    pub column: u32,
    pub end_line: u32,
    pub end_column: u32,
}

impl Span {
    pub fn new(start: (u32, u32), end: (u32, u32)) -> Self {
        Self { line: start.0, column: start.1, end_line: end.0, end_column: end.1 }
    }

    pub fn to(self, other: Span) -> Span {
        Span { end_line: other.end_line, end_column: other.end_column, ..self }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostic {
    pub span: Span,
    pub severity: Severity,
    pub code: String,
    pub message: String,
    /// The source line the diagnostic points into.
    pub excerpt: String,
}

impl ParseDiagnostic {
    pub fn new(span: Span, code: &str, message: impl Into<String>, lines: &[&str]) -> Self {
        let excerpt = lines
            .get(span.line.saturating_sub(1) as usize)
            .map(|l| l.trim_end_matches('\r').to_owned())
            .unwrap_or_default();
        Self { span, severity: Severity::Error, code: code.to_owned(), message: message.into(), excerpt }
    }
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let severity = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
            Severity::Info => "info",
        };
        write!(f, "{}: {severity}[{}]: {}", self.span, self.code, self.message)?;
        if !self.excerpt.is_empty() {
            write!(f, "\n    | {}", self.excerpt)?;
            let pad = " ".repeat(self.span.column.saturating_sub(1) as usize);
            let width = if self.span.end_line == self.span.line {
                self.span.end_column.saturating_sub(self.span.column).max(1)
            } else {
                1
            };
            write!(f, "\n    | {pad}{}", "^".repeat(width as usize))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DoutsDecl {
    pub id: String,
    pub input: DoutsInput,
}

/// `pattern P from sourcement X vary [..]` plus any extra constraints; the
/// pattern itself is derived from the initial world.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternDecl {
    pub id: String,
    pub sourcement: SourcementId,
    pub vary: BTreeSet<String>,
    #[serde(default)]
    pub extra_constraints: Vec<Constraint>,
    pub pattern: Pattern,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LotDecl {
    pub id: String,
    pub patterns: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TypeFlag {
    SelfsourcingType,
    PartialSelfsourcingType,
    NonSelfsourcingType,
    PartialNonSelfsourcingType,
}

impl TypeFlag {
    pub const ALL: [TypeFlag; 4] = [
        TypeFlag::SelfsourcingType,
        TypeFlag::PartialSelfsourcingType,
        TypeFlag::NonSelfsourcingType,
        TypeFlag::PartialNonSelfsourcingType,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            TypeFlag::SelfsourcingType => "selfsourcing_type",
            TypeFlag::PartialSelfsourcingType => "partial_selfsourcing_type",
            TypeFlag::NonSelfsourcingType => "non_selfsourcing_type",
            TypeFlag::PartialNonSelfsourcingType => "partial_non_selfsourcing_type",
        }
    }
}

/// Range of recorded states: 0 is the initial state, n the state after
/// the n-th successful script action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateRange {
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "query", rename_all = "snake_case")]
pub enum Query {
    Uses { unit: UnitId, source: SourceId },
    Selfsourcing { unit: UnitId, source: SourceId },
    NonSelfsourcing { unit: UnitId, source: SourceId },
    TypeStatus { unit: UnitId, source_type: SourceTypeId },
    TypeFlag { flag: TypeFlag, unit: UnitId, source_type: SourceTypeId },
    Closure { source: SourceId },
    Owner { source: SourceId },
    Maintainer { theme: ThemeId },
    Contracts { unit: UnitId },
    Classify { unit: UnitId, states: Option<StateRange> },
    Commitments { unit: UnitId, states: Option<StateRange> },
    Service { contract: ContractId },
    Provenance { unit: UnitId, source: SourceId },
    Douts { id: String },
    Fit { lot: String },
    BidValid { bid: String },
    Valid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CmpOp {
    Eq,
    Ne,
    Ge,
    Le,
    Gt,
    Lt,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Ge => ">=",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Lt => "<",
        }
    }

    pub fn holds(self, left: usize, right: usize) -> bool {
        match self {
            CmpOp::Eq => left == right,
            CmpOp::Ne => left != right,
            CmpOp::Ge => left >= right,
            CmpOp::Le => left <= right,
            CmpOp::Gt => left > right,
            CmpOp::Lt => left < right,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Value {
    Bool(bool),
    Word(String),
    List(Vec<String>),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Word(w) => f.write_str(w),
            Value::List(items) => write!(f, "[{}]", items.join(", ")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    Equals(Value),
    NotEquals(Value),
    Contains(String),
    Count(CmpOp, usize),
}

impl fmt::Display for Expectation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expectation::Equals(v) => write!(f, "== {v}"),
            Expectation::NotEquals(v) => write!(f, "!= {v}"),
            Expectation::Contains(w) => write!(f, "contains {w}"),
            Expectation::Count(op, n) => write!(f, "count {} {n}", op.symbol()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assertion {
    pub query: Query,
    pub expectation: Expectation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[allow(clippy::large_enum_variant)]
#[serde(tag = "item", rename_all = "snake_case")]
pub enum ScriptAction {
    Apply {
        spec: TransformationSpec,
        /// Expected failure code; the item passes only if the
        /// transformation is rejected with it.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect: Option<String>,
    },
    Step {
        step: PrimitiveStep,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect: Option<String>,
    },
    Assert(Assertion),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptItem {
    #[serde(skip)]
    pub span: Span,
    pub action: ScriptAction,
}

/// A parsed scenario. Locations are excluded from serialization, so the
/// scenario digest depends on content only.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Scenario {
    pub world: WorldState,
    pub business: Vec<BusinessConfig>,
    pub contract_configs: Vec<ContractConfig>,
    pub douts: Vec<DoutsDecl>,
    pub patterns: Vec<PatternDecl>,
    pub lots: Vec<LotDecl>,
    pub bids: Vec<Bid>,
    pub script: Vec<ScriptItem>,
}

impl Scenario {
    pub fn digest(&self) -> Fingerprint {
        fingerprint_of(self)
    }

    pub fn assertions(&self) -> impl Iterator<Item = (&Span, &Assertion)> {
        self.script.iter().filter_map(|item| match &item.action {
            ScriptAction::Assert(a) => Some((&item.span, a)),
            _ => None,
        })
    }

    pub fn douts_input(&self, id: &str) -> Option<&DoutsInput> {
        self.douts.iter().find(|d| d.id == id).map(|d| &d.input)
    }

    pub fn pattern(&self, id: &str) -> Option<&Pattern> {
        self.patterns.iter().find(|p| p.id == id).map(|p| &p.pattern)
    }

    pub fn lot(&self, id: &str) -> Option<Lot> {
        let decl = self.lots.iter().find(|l| l.id == id)?;
        let patterns = decl.patterns.iter().map(|p| self.pattern(p).cloned()).collect::<Option<Vec<_>>>()?;
        Some(Lot { id: decl.id.clone(), patterns })
    }

    pub fn bids_on(&self, lot: &str) -> Vec<Bid> {
        self.bids.iter().filter(|b| b.lot == lot).cloned().collect()
    }
}

/// Parse scenario text. Either a scenario whose world and overlays validate,
/// or every diagnostic found.
pub fn parse(text: &str) -> Result<Scenario, Vec<ParseDiagnostic>> {
    let lines: Vec<&str> = text.split('\n').collect();
    let mut diagnostics = Vec::new();
    let tokens = lexer::lex(text, &mut diagnostics, &lines);
    let statements = parser::parse_statements(&tokens, &lines, &mut diagnostics);
    let scenario = resolve::build(statements, &lines, &mut diagnostics);
    if diagnostics.iter().any(|d| d.severity == Severity::Error) {
        diagnostics.sort_by(|a, b| a.span.cmp(&b.span).then_with(|| a.code.cmp(&b.code)));
        return Err(diagnostics);
    }
    Ok(scenario)
}

/// Parse raw bytes, rejecting non-UTF-8 input with a diagnostic.
pub fn parse_bytes(bytes: &[u8]) -> Result<Scenario, Vec<ParseDiagnostic>> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse(text),
        Err(e) => {
            let before = &bytes[..e.valid_up_to()];
            let line = before.iter().filter(|b| **b == b'\n').count() as u32 + 1;
            let column = (before.len() - before.iter().rposition(|b| *b == b'\n').map_or(0, |p| p + 1)) as u32 + 1;
            Err(vec![ParseDiagnostic {
                span: Span::new((line, column), (line, column + 1)),
                severity: Severity::Error,
                code: "INVALID_UTF8".to_owned(),
                message: format!("input is not valid UTF-8 (byte {})", e.valid_up_to()),
                excerpt: String::new(),
            }])
        }
    }
}

/// Parse a scenario together with a query written as in an assertion
/// (`selfsourcing U S`) and resolved against the scenario's declarations.
pub fn parse_with_query(text: &str, query: &str) -> Result<(Scenario, Query), Vec<ParseDiagnostic>> {
    let line = text.split('\n').count() as u32 + 1;
    let rejected = |message: &str| {
        vec![ParseDiagnostic {
            span: Span::new((line, 1), (line, 1)),
            severity: Severity::Error,
            code: "SYNTAX".to_owned(),
            message: message.to_owned(),
            excerpt: query.to_owned(),
        }]
    };
    if query.contains(['\n', '\r', ';', '#']) {
        return Err(rejected("a query is a single line without `;` or comments"));
    }
    let mut scenario = parse(&format!("{text}\nassert {query} == _\n"))?;
    match scenario.script.pop() {
        Some(ScriptItem { action: ScriptAction::Assert(a), span }) if span.line == line => Ok((scenario, a.query)),
        _ => Err(rejected("not a query")),
    }
}

/// Words that start a top-level statement.
pub const KEYWORDS: [&str; 18] = [
    "clock",
    "unit",
    "source_type",
    "source",
    "theme",
    "use",
    "contract",
    "commit",
    "sourcement",
    "business",
    "contract_config",
    "douts",
    "pattern",
    "lot",
    "bid",
    "apply",
    "step",
    "assert",
];
