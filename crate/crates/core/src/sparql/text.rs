//! Canonical text rendering and parsing for the SPARQL subset.
//!
//! Rendering is bit-exact: one pattern per line, two-space indentation per
//! block depth, FILTER lines after the triples they constrain (in the order
//! the query stores them), modifiers on their own lines. Parsing accepts any
//! whitespace layout; `render(parse(render(q))) == render(q)`.

use crate::sparql::ast::{
    FilterCond, PatternElement, QueryForm, SortDir, SparqlError, SparqlQuery, TermPattern,
    TriplePattern,
};
use crate::triples::Term;
use crate::value::{parse_date, parse_number, parse_quantity, parse_year, CompareOp, Value};

pub fn render_sparql(q: &SparqlQuery) -> String {
    let mut out = String::new();
    match q.form {
        QueryForm::Select => {
            out.push_str("SELECT ");
            if q.distinct {
                out.push_str("DISTINCT ");
            }
            out.push('?');
            out.push_str(q.projection.as_deref().unwrap_or("_"));
            out.push_str(" WHERE {\n");
        }
        QueryForm::SelectCount => {
            out.push_str("SELECT (COUNT(DISTINCT ?");
            out.push_str(q.projection.as_deref().unwrap_or("_"));
            out.push_str(") AS ?count) WHERE {\n");
        }
        QueryForm::Ask => out.push_str("ASK {\n"),
    }
    render_elements(&mut out, &q.patterns, 1);
    out.push('}');
    if let Some((v, dir)) = &q.order_by {
        out.push_str("\nORDER BY ");
        match dir {
            SortDir::Asc => out.push_str(&format!("ASC(?{v})")),
            SortDir::Desc => out.push_str(&format!("DESC(?{v})")),
        }
    }
    if let Some(n) = q.limit {
        out.push_str(&format!("\nLIMIT {n}"));
    }
    out
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn render_elements(out: &mut String, elements: &[PatternElement], depth: usize) {
    for el in elements {
        match el {
            PatternElement::Triple(t) => {
                indent(out, depth);
                out.push_str(&format!(
                    "{} {} {} .\n",
                    render_term_pattern(&t.subject),
                    render_term_pattern(&t.predicate),
                    render_term_pattern(&t.object)
                ));
            }
            PatternElement::Filter(f) => {
                indent(out, depth);
                out.push_str(&format!(
                    "FILTER ( ?{} {} {} )\n",
                    f.var,
                    f.op.token(),
                    render_literal(&f.value)
                ));
            }
            PatternElement::Union(a, b) => {
                indent(out, depth);
                out.push_str("{\n");
                render_elements(out, a, depth + 1);
                indent(out, depth);
                out.push_str("} UNION {\n");
                render_elements(out, b, depth + 1);
                indent(out, depth);
                out.push_str("}\n");
            }
        }
    }
}

fn render_term_pattern(tp: &TermPattern) -> String {
    match tp {
        TermPattern::Var(v) => format!("?{v}"),
        TermPattern::Term(t) => render_term(t),
    }
}

fn render_term(t: &Term) -> String {
    match t {
        Term::Pred(p) => format!("<{p}>"),
        Term::Entity(id) => format!("<ent:{id}>"),
        Term::Concept(id) => format!("<con:{id}>"),
        Term::Blank(h) => format!("_:b{h:016x}"),
        Term::Literal(v) => render_literal(v),
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn render_literal(v: &Value) -> String {
    match v {
        Value::String(s) => format!("\"{}\"", escape(s)),
        Value::Quantity { magnitude, unit } if unit == crate::value::UNITLESS => {
            crate::value::render_number(*magnitude)
        }
        Value::Quantity { magnitude, unit } => format!(
            "\"{} {}\"^^kopl:quantity",
            crate::value::render_number(*magnitude),
            escape(unit)
        ),
        Value::Date(d) => format!("\"{}\"^^xsd:date", d.format("%Y-%m-%d")),
        Value::Year(y) => format!("\"{y}\"^^xsd:gYear"),
    }
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Keyword(String),
    Var(String),
    Iri(String),
    Literal(Value),
    Number(f64),
    Punct(char),
    Op(CompareOp),
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

pub struct Parser {
    tokens: Vec<(Tok, String)>,
    pos: usize,
}

fn violation(position: impl Into<String>, message: impl Into<String>) -> SparqlError {
    SparqlError::SubsetViolation {
        position: position.into(),
        message: message.into(),
    }
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src,
            bytes: src.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn here(&self) -> String {
        format!("line {}, column {}", self.line, self.col)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.src[self.pos..].chars().next()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn lex(mut self) -> Result<Vec<(Tok, String)>, SparqlError> {
        let mut out = Vec::new();
        while let Some(c) = self.peek() {
            let at = self.here();
            match c {
                ' ' | '\t' | '\r' | '\n' => {
                    self.bump();
                }
                '{' | '}' | '(' | ')' | '.' => {
                    self.bump();
                    out.push((Tok::Punct(c), at));
                }
                '=' => {
                    self.bump();
                    out.push((Tok::Op(CompareOp::Eq), at));
                }
                '!' => {
                    self.bump();
                    if self.peek() == Some('=') {
                        self.bump();
                        out.push((Tok::Op(CompareOp::Ne), at));
                    } else {
                        return Err(violation(at, "expected != operator"));
                    }
                }
                '<' => out.push(self.lex_angle()?),
                '>' => {
                    self.bump();
                    out.push((Tok::Op(CompareOp::Gt), at));
                }
                '?' => {
                    self.bump();
                    let name = self.take_while(|c| c.is_alphanumeric() || c == '_');
                    if name.is_empty() {
                        return Err(violation(at, "empty variable name"));
                    }
                    out.push((Tok::Var(name), at));
                }
                '"' => out.push(self.lex_string()?),
                c if c.is_ascii_digit() || c == '-' || c == '+' => {
                    let text = self.take_while(|c| {
                        c.is_ascii_digit() || c == '.' || c == '-' || c == '+' || c == 'e'
                    });
                    let n = parse_number(&text)
                        .map_err(|e| violation(at.clone(), e.to_string()))?;
                    out.push((Tok::Number(n), at));
                }
                c if c.is_alphabetic() => {
                    let word = self.take_while(|c| c.is_alphanumeric() || c == '_');
                    out.push((Tok::Keyword(word.to_uppercase()), at));
                }
                other => return Err(violation(at, format!("unexpected character {other:?}"))),
            }
        }
        Ok(out)
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if pred(c) {
                s.push(c);
                self.bump();
            } else {
                break;
            }
        }
        s
    }

    /// `<` begins an IRI-like term when it closes on the same line before
    /// whitespace shenanigans; a bare `<` is the comparison operator.
    fn lex_angle(&mut self) -> Result<(Tok, String), SparqlError> {
        let at = self.here();
        let rest = &self.src[self.pos + 1..];
        if let Some(end) = rest.find('>') {
            let inner = &rest[..end];
            if !inner.contains('\n') && !inner.is_empty() && self.looks_like_iri(inner) {
                for _ in 0..inner.len() + 2 {
                    self.bump();
                }
                return Ok((Tok::Iri(inner.to_string()), at));
            }
        }
        self.bump();
        Ok((Tok::Op(CompareOp::Lt), at))
    }

    fn looks_like_iri(&self, inner: &str) -> bool {
        // Predicate names: words, spaces, colons — no quotes or braces.
        inner
            .chars()
            .all(|c| c.is_alphanumeric() || " _:-./#".contains(c))
    }

    fn lex_string(&mut self) -> Result<(Tok, String), SparqlError> {
        let at = self.here();
        self.bump(); // opening quote
        let mut s = String::new();
        loop {
            match self.bump() {
                None => return Err(violation(at, "unterminated string")),
                Some('\\') => match self.bump() {
                    Some('"') => s.push('"'),
                    Some('\\') => s.push('\\'),
                    Some(c) => {
                        s.push('\\');
                        s.push(c);
                    }
                    None => return Err(violation(at, "unterminated escape")),
                },
                Some('"') => break,
                Some(c) => s.push(c),
            }
        }
        // Optional datatype suffix.
        if self.peek() == Some('^') {
            self.bump();
            if self.bump() != Some('^') {
                return Err(violation(self.here(), "expected ^^datatype"));
            }
            let dt = self.take_while(|c| c.is_alphanumeric() || c == ':' || c == '_');
            let v = match dt.as_str() {
                "xsd:date" => {
                    parse_date(&s).map_err(|e| violation(at.clone(), e.to_string()))?
                }
                "xsd:gYear" => {
                    parse_year(&s).map_err(|e| violation(at.clone(), e.to_string()))?
                }
                "kopl:quantity" => {
                    parse_quantity(&s).map_err(|e| violation(at.clone(), e.to_string()))?
                }
                "xsd:double" | "xsd:integer" | "xsd:decimal" => Value::number(
                    parse_number(&s).map_err(|e| violation(at.clone(), e.to_string()))?,
                ),
                other => return Err(violation(at.clone(), format!("unknown datatype {other:?}"))),
            };
            return Ok((Tok::Literal(v), at));
        }
        Ok((Tok::Literal(Value::String(s)), at))
    }

    fn src_len(&self) -> usize {
        self.bytes.len()
    }
}

impl Parser {
    fn new(src: &str) -> Result<Self, SparqlError> {
        let lexer = Lexer::new(src);
        let _ = lexer.src_len();
        let tokens = Lexer::new(src).lex()?;
        Ok(Parser { tokens, pos: 0 })
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> String {
        self.tokens
            .get(self.pos)
            .or_else(|| self.tokens.last())
            .map(|(_, p)| p.clone())
            .unwrap_or_else(|| "end of input".into())
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos).map(|(t, _)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eat_punct(&mut self, c: char) -> Result<(), SparqlError> {
        match self.next() {
            Some(Tok::Punct(p)) if p == c => Ok(()),
            _ => Err(violation(self.here(), format!("expected {c:?}"))),
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> Result<(), SparqlError> {
        match self.next() {
            Some(Tok::Keyword(k)) if k == kw => Ok(()),
            other => Err(violation(
                self.here(),
                format!("expected {kw}, found {other:?}"),
            )),
        }
    }

    fn keyword_is(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Keyword(k)) if k == kw)
    }

    fn eat_var(&mut self) -> Result<String, SparqlError> {
        match self.next() {
            Some(Tok::Var(v)) => Ok(v),
            other => Err(violation(
                self.here(),
                format!("expected a variable, found {other:?}"),
            )),
        }
    }

    fn parse_query(&mut self) -> Result<SparqlQuery, SparqlError> {
        let q = match self.next() {
            Some(Tok::Keyword(k)) if k == "SELECT" => self.parse_select()?,
            Some(Tok::Keyword(k)) if k == "ASK" => {
                if self.keyword_is("WHERE") {
                    self.next();
                }
                let patterns = self.parse_group()?;
                SparqlQuery {
                    form: QueryForm::Ask,
                    projection: None,
                    patterns,
                    order_by: None,
                    limit: None,
                    distinct: false,
                }
            }
            other => {
                return Err(violation(
                    self.here(),
                    format!("expected SELECT or ASK, found {other:?}"),
                ))
            }
        };
        let q = self.parse_modifiers(q)?;
        if self.pos != self.tokens.len() {
            return Err(violation(self.here(), "trailing input after query"));
        }
        Ok(q)
    }

    fn parse_select(&mut self) -> Result<SparqlQuery, SparqlError> {
        let mut distinct = false;
        let form;
        let projection;
        match self.peek() {
            Some(Tok::Punct('(')) => {
                self.next();
                self.eat_keyword("COUNT")?;
                self.eat_punct('(')?;
                if self.keyword_is("DISTINCT") {
                    self.next();
                }
                projection = self.eat_var()?;
                self.eat_punct(')')?;
                self.eat_keyword("AS")?;
                let _alias = self.eat_var()?;
                self.eat_punct(')')?;
                form = QueryForm::SelectCount;
                distinct = true;
            }
            Some(Tok::Keyword(k)) if k == "DISTINCT" => {
                self.next();
                distinct = true;
                projection = self.eat_var()?;
                form = QueryForm::Select;
            }
            _ => {
                projection = self.eat_var()?;
                form = QueryForm::Select;
            }
        }
        if self.keyword_is("WHERE") {
            self.next();
        }
        let patterns = self.parse_group()?;
        Ok(SparqlQuery {
            form,
            projection: Some(projection),
            patterns,
            order_by: None,
            limit: None,
            distinct,
        })
    }

    fn parse_modifiers(&mut self, mut q: SparqlQuery) -> Result<SparqlQuery, SparqlError> {
        if self.keyword_is("ORDER") {
            self.next();
            self.eat_keyword("BY")?;
            let (var, dir) = match self.next() {
                Some(Tok::Keyword(k)) if k == "ASC" || k == "DESC" => {
                    self.eat_punct('(')?;
                    let v = self.eat_var()?;
                    self.eat_punct(')')?;
                    (
                        v,
                        if k == "ASC" {
                            SortDir::Asc
                        } else {
                            SortDir::Desc
                        },
                    )
                }
                Some(Tok::Var(v)) => (v, SortDir::Asc),
                other => {
                    return Err(violation(
                        self.here(),
                        format!("expected ASC/DESC or a variable, found {other:?}"),
                    ))
                }
            };
            q.order_by = Some((var, dir));
        }
        if self.keyword_is("LIMIT") {
            self.next();
            match self.next() {
                Some(Tok::Number(n)) if n >= 0.0 && n.fract() == 0.0 => {
                    q.limit = Some(n as usize);
                }
                other => {
                    return Err(violation(
                        self.here(),
                        format!("expected a limit count, found {other:?}"),
                    ))
                }
            }
        }
        Ok(q)
    }

    fn parse_group(&mut self) -> Result<Vec<PatternElement>, SparqlError> {
        self.eat_punct('{')?;
        let mut out = Vec::new();
        loop {
            match self.peek() {
                None => return Err(violation(self.here(), "unterminated group")),
                Some(Tok::Punct('}')) => {
                    self.next();
                    break;
                }
                Some(Tok::Punct('{')) => {
                    let a = self.parse_group()?;
                    self.eat_keyword("UNION")?;
                    let b = self.parse_group()?;
                    out.push(PatternElement::Union(a, b));
                    self.skip_dot();
                }
                Some(Tok::Keyword(k)) if k == "FILTER" => {
                    self.next();
                    self.eat_punct('(')?;
                    let var = self.eat_var()?;
                    let op = match self.next() {
                        Some(Tok::Op(op)) => op,
                        other => {
                            return Err(violation(
                                self.here(),
                                format!("expected a comparison operator, found {other:?}"),
                            ))
                        }
                    };
                    let value = match self.next() {
                        Some(Tok::Literal(v)) => v,
                        Some(Tok::Number(n)) => Value::number(n),
                        other => {
                            return Err(violation(
                                self.here(),
                                format!("expected a literal, found {other:?}"),
                            ))
                        }
                    };
                    self.eat_punct(')')?;
                    out.push(PatternElement::Filter(FilterCond { var, op, value }));
                    self.skip_dot();
                }
                Some(Tok::Keyword(k)) => {
                    let k = k.clone();
                    return Err(violation(
                        self.here(),
                        format!("{k} is outside the supported subset"),
                    ));
                }
                _ => {
                    let s = self.parse_term_pattern()?;
                    let p = self.parse_term_pattern()?;
                    let o = self.parse_term_pattern()?;
                    out.push(PatternElement::Triple(TriplePattern::new(s, p, o)));
                    self.skip_dot();
                }
            }
        }
        Ok(out)
    }

    fn skip_dot(&mut self) {
        if matches!(self.peek(), Some(Tok::Punct('.'))) {
            self.next();
        }
    }

    fn parse_term_pattern(&mut self) -> Result<TermPattern, SparqlError> {
        match self.next() {
            Some(Tok::Var(v)) => Ok(TermPattern::Var(v)),
            Some(Tok::Iri(iri)) => Ok(TermPattern::Term(iri_to_term(&iri))),
            Some(Tok::Literal(v)) => Ok(TermPattern::Term(Term::Literal(v))),
            Some(Tok::Number(n)) => Ok(TermPattern::Term(Term::lit_num(n))),
            other => Err(violation(
                self.here(),
                format!("expected a term, found {other:?}"),
            )),
        }
    }
}

fn iri_to_term(iri: &str) -> Term {
    if let Some(id) = iri.strip_prefix("ent:") {
        Term::Entity(id.to_string())
    } else if let Some(id) = iri.strip_prefix("con:") {
        Term::Concept(id.to_string())
    } else {
        Term::Pred(iri.to_string())
    }
}

/// Parses a query in the supported subset; positions are reported for
/// anything outside it.
pub fn parse_sparql(src: &str) -> Result<SparqlQuery, SparqlError> {
    Parser::new(src)?.parse_query()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_pattern_select_parses() {
        let q = parse_sparql("SELECT ?e WHERE { }").unwrap();
        assert_eq!(q.form, QueryForm::Select);
        assert_eq!(q.projection.as_deref(), Some("e"));
        assert!(q.patterns.is_empty());
        assert!(!q.distinct);
    }

    #[test]
    fn optional_clause_is_a_subset_violation() {
        let err = parse_sparql(
            "SELECT ?e WHERE { ?e <pred:name> \"A\" . OPTIONAL { ?e <height> ?f . } }",
        )
        .unwrap_err();
        match err {
            SparqlError::SubsetViolation { position, message } => {
                assert!(message.contains("OPTIONAL"), "{message}");
                assert!(position.contains("line 1"), "{position}");
            }
            other => panic!("expected SubsetViolation, got {other:?}"),
        }
    }

    #[test]
    fn render_parse_round_trip() {
        let src = concat!(
            "SELECT DISTINCT ?e1 WHERE {\n",
            "  ?e1 <pred:name> \"LeBron James\" .\n",
            "  ?e1 <height> ?f2 .\n",
            "  ?f2 <pred:unit> \"centimetre\" .\n",
            "  ?f2 <pred:value> ?v3 .\n",
            "  FILTER ( ?v3 > 200 )\n",
            "}"
        );
        let q = parse_sparql(src).unwrap();
        assert_eq!(render_sparql(&q), src);
        assert_eq!(parse_sparql(&render_sparql(&q)).unwrap(), q);
    }

    #[test]
    fn union_and_modifiers_round_trip() {
        let src = concat!(
            "SELECT DISTINCT ?e1 WHERE {\n",
            "  {\n",
            "    ?e1 <pred:name> \"Akron\" .\n",
            "  } UNION {\n",
            "    ?e1 <pred:name> \"Cleveland\" .\n",
            "  }\n",
            "  ?e1 <population> ?f2 .\n",
            "  ?f2 <pred:value> ?v3 .\n",
            "}\n",
            "ORDER BY DESC(?v3)\n",
            "LIMIT 1"
        );
        let q = parse_sparql(src).unwrap();
        assert_eq!(render_sparql(&q), src);
    }

    #[test]
    fn count_form_round_trips() {
        let src = concat!(
            "SELECT (COUNT(DISTINCT ?e1) AS ?count) WHERE {\n",
            "  ?e1 <pred:name> ?n2 .\n",
            "}"
        );
        let q = parse_sparql(src).unwrap();
        assert_eq!(q.form, QueryForm::SelectCount);
        assert_eq!(render_sparql(&q), src);
    }

    #[test]
    fn typed_literals_round_trip() {
        let src = concat!(
            "ASK {\n",
            "  ?f1 <pred:value> ?v2 .\n",
            "  FILTER ( ?v2 = \"1980-06-01\"^^xsd:date )\n",
            "  FILTER ( ?v2 != \"1980\"^^xsd:gYear )\n",
            "  FILTER ( ?v2 < \"2 metre\"^^kopl:quantity )\n",
            "}"
        );
        let q = parse_sparql(src).unwrap();
        assert_eq!(render_sparql(&q), src);
    }

    #[test]
    fn angle_bracket_disambiguation() {
        // `<` as operator inside FILTER, `<...>` as predicate term.
        let q = parse_sparql(
            "SELECT ?e WHERE { ?e <height> ?v . FILTER ( ?v < 200 ) }",
        )
        .unwrap();
        assert_eq!(q.patterns.len(), 2);
    }
}
