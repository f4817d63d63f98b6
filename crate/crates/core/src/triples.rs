//! Reified triple view of a knowledge base.
//!
//! Every fact is anchored by a deterministic blank node so qualifier triples
//! have something to attach to:
//!
//! - entity naming/typing: `(entity, pred:name, "…")`, `(entity,
//!   pred:instance_of, concept)`; concepts carry `pred:name` and
//!   `pred:subclass_of` edges
//! - attribute fact `(e, k, v)`: a value node `F` with `(e, k, F)`, `(F,
//!   pred:value, lit)` and, for quantities, `(F, pred:unit, "…")`; reification
//!   `(F, pred:fact_h, e)` and `(F, pred:fact_r, "k")`; qualifiers on `F`
//! - relation fact `(s, p, o)`: the direct edge `(s, p, o)` plus a fact node
//!   `F` with `pred:fact_h`/`pred:fact_r`/`pred:fact_t` edges; qualifiers on `F`
//! - qualifier values attach as one triple each; a quantity qualifier value
//!   with a real unit gets its own nested value node
//!
//! Blank node labels hash the fact's content, so the view is a pure function
//! of the knowledge base.

use std::collections::HashMap;

use crate::kb::{AttributeFact, KnowledgeBase, Qualifier, RelationFact};
use crate::value::{render_number, Value, UNITLESS};

pub const PRED_NAME: &str = "pred:name";
pub const PRED_INSTANCE_OF: &str = "pred:instance_of";
pub const PRED_SUBCLASS_OF: &str = "pred:subclass_of";
pub const PRED_VALUE: &str = "pred:value";
pub const PRED_UNIT: &str = "pred:unit";
pub const PRED_FACT_H: &str = "pred:fact_h";
pub const PRED_FACT_R: &str = "pred:fact_r";
pub const PRED_FACT_T: &str = "pred:fact_t";

/// A node or literal in the triple view.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    /// An entity node, keyed by entity id.
    Entity(String),
    /// A concept node, keyed by concept id.
    Concept(String),
    /// A blank node, keyed by content hash.
    Blank(u64),
    /// A predicate term: reserved vocabulary, relation names, attribute keys,
    /// and qualifier keys.
    Pred(String),
    /// A literal value. Bare numbers are unitless quantities.
    Literal(Value),
}

impl Term {
    pub fn pred(s: impl Into<String>) -> Term {
        Term::Pred(s.into())
    }

    pub fn lit_str(s: impl Into<String>) -> Term {
        Term::Literal(Value::String(s.into()))
    }

    pub fn lit_num(m: f64) -> Term {
        Term::Literal(Value::number(m))
    }

    pub fn as_literal(&self) -> Option<&Value> {
        match self {
            Term::Literal(v) => Some(v),
            _ => None,
        }
    }

    /// N-Triples-style rendering used by the debug dump.
    pub fn dump_form(&self) -> String {
        match self {
            Term::Entity(id) => format!("<ent:{id}>"),
            Term::Concept(id) => format!("<con:{id}>"),
            Term::Blank(h) => format!("_:b{h:016x}"),
            Term::Pred(p) => format!("<{p}>"),
            Term::Literal(v) => literal_dump_form(v),
        }
    }
}

fn literal_dump_form(v: &Value) -> String {
    match v {
        Value::String(s) => format!("{:?}", s),
        Value::Quantity { magnitude, unit } if unit == UNITLESS => render_number(*magnitude),
        Value::Quantity { magnitude, unit } => {
            // Only value nodes carry units; a full quantity literal occurs
            // nowhere in the view, but render it unambiguously anyway.
            format!("\"{} {}\"^^kopl:quantity", render_number(*magnitude), unit)
        }
        Value::Date(d) => format!("\"{}\"^^xsd:date", d.format("%Y-%m-%d")),
        Value::Year(y) => format!("\"{y}\"^^xsd:gYear"),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub subject: Term,
    pub predicate: Term,
    pub object: Term,
}

fn t(subject: Term, predicate: Term, object: Term) -> Triple {
    Triple {
        subject,
        predicate,
        object,
    }
}

// FNV-1a, fixed so blank-node labels are stable across platforms and runs.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn fact_hash(parts: &[&str]) -> u64 {
    let mut buf = String::new();
    for p in parts {
        buf.push_str(p);
        buf.push('\u{1f}');
    }
    fnv1a(buf.as_bytes())
}

fn qualifier_fingerprint(qs: &[Qualifier]) -> String {
    let mut s = String::new();
    for q in qs {
        s.push_str(&q.key);
        s.push('=');
        s.push_str(&q.value.render());
        s.push(';');
    }
    s
}

pub fn attribute_fact_node(f: &AttributeFact) -> Term {
    Term::Blank(fact_hash(&[
        "attr",
        &f.subject.0,
        &f.key,
        &f.value.render(),
        &qualifier_fingerprint(&f.qualifiers),
    ]))
}

pub fn relation_fact_node(f: &RelationFact) -> Term {
    Term::Blank(fact_hash(&[
        "rel",
        &f.subject.0,
        &f.predicate,
        &f.object.0,
        &qualifier_fingerprint(&f.qualifiers),
    ]))
}

/// The literal stored under `pred:value` for a fact's value: quantity
/// magnitudes become unitless number literals, everything else keeps its type.
pub fn value_literal(v: &Value) -> Term {
    match v {
        Value::Quantity { magnitude, .. } => Term::lit_num(*magnitude),
        other => Term::Literal(other.clone()),
    }
}

fn emit_qualifiers(out: &mut Vec<Triple>, anchor: &Term, qs: &[Qualifier]) {
    for q in qs {
        match &q.value {
            Value::Quantity { magnitude, unit } if unit != UNITLESS => {
                // A unit-bearing qualifier value needs its own node for the
                // unit edge.
                let node = Term::Blank(fact_hash(&[
                    "qval",
                    &format!("{anchor:?}"),
                    &q.key,
                    &q.value.render(),
                ]));
                out.push(t(anchor.clone(), Term::pred(&q.key), node.clone()));
                out.push(t(node.clone(), Term::pred(PRED_VALUE), Term::lit_num(*magnitude)));
                out.push(t(node, Term::pred(PRED_UNIT), Term::lit_str(unit)));
            }
            other => {
                out.push(t(
                    anchor.clone(),
                    Term::pred(&q.key),
                    Term::Literal(match other {
                        Value::Quantity { magnitude, .. } => Value::number(*magnitude),
                        v => v.clone(),
                    }),
                ));
            }
        }
    }
}

/// Emits the full reified triple encoding of the knowledge base, sorted.
pub fn triple_view(kb: &KnowledgeBase) -> Vec<Triple> {
    let mut out = Vec::new();
    for c in kb.concepts() {
        let node = Term::Concept(c.id.0.clone());
        out.push(t(node.clone(), Term::pred(PRED_NAME), Term::lit_str(&c.name)));
        for parent in &c.subclass_of {
            out.push(t(
                node.clone(),
                Term::pred(PRED_SUBCLASS_OF),
                Term::Concept(parent.0.clone()),
            ));
        }
    }
    for e in kb.entities() {
        let node = Term::Entity(e.id.0.clone());
        out.push(t(node.clone(), Term::pred(PRED_NAME), Term::lit_str(&e.name)));
        for c in &e.instance_of {
            out.push(t(
                node.clone(),
                Term::pred(PRED_INSTANCE_OF),
                Term::Concept(c.0.clone()),
            ));
        }
        for a in &e.attributes {
            let f = attribute_fact_node(a);
            out.push(t(node.clone(), Term::pred(&a.key), f.clone()));
            out.push(t(f.clone(), Term::pred(PRED_VALUE), value_literal(&a.value)));
            if let Value::Quantity { unit, .. } = &a.value {
                out.push(t(f.clone(), Term::pred(PRED_UNIT), Term::lit_str(unit)));
            }
            out.push(t(f.clone(), Term::pred(PRED_FACT_H), node.clone()));
            out.push(t(f.clone(), Term::pred(PRED_FACT_R), Term::lit_str(&a.key)));
            emit_qualifiers(&mut out, &f, &a.qualifiers);
        }
        for r in &e.relations {
            let obj = Term::Entity(r.object.0.clone());
            out.push(t(node.clone(), Term::pred(&r.predicate), obj.clone()));
            let f = relation_fact_node(r);
            out.push(t(f.clone(), Term::pred(PRED_FACT_H), node.clone()));
            out.push(t(f.clone(), Term::pred(PRED_FACT_R), Term::lit_str(&r.predicate)));
            out.push(t(f.clone(), Term::pred(PRED_FACT_T), obj));
            emit_qualifiers(&mut out, &f, &r.qualifiers);
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Sorted tab-separated dump, one triple per line.
pub fn dump(kb: &KnowledgeBase) -> String {
    let mut s = String::new();
    for triple in triple_view(kb) {
        s.push_str(&triple.subject.dump_form());
        s.push('\t');
        s.push_str(&triple.predicate.dump_form());
        s.push('\t');
        s.push_str(&triple.object.dump_form());
        s.push('\n');
    }
    s
}

/// Triple store with positional indexes for pattern lookup.
#[derive(Debug)]
pub struct TripleStore {
    triples: Vec<Triple>,
    by_s: HashMap<Term, Vec<u32>>,
    by_p: HashMap<Term, Vec<u32>>,
    by_o: HashMap<Term, Vec<u32>>,
    by_sp: HashMap<(Term, Term), Vec<u32>>,
    by_po: HashMap<(Term, Term), Vec<u32>>,
}

impl TripleStore {
    pub fn new(kb: &KnowledgeBase) -> Self {
        let triples = triple_view(kb);
        let mut by_s: HashMap<Term, Vec<u32>> = HashMap::new();
        let mut by_p: HashMap<Term, Vec<u32>> = HashMap::new();
        let mut by_o: HashMap<Term, Vec<u32>> = HashMap::new();
        let mut by_sp: HashMap<(Term, Term), Vec<u32>> = HashMap::new();
        let mut by_po: HashMap<(Term, Term), Vec<u32>> = HashMap::new();
        for (i, tr) in triples.iter().enumerate() {
            let i = i as u32;
            by_s.entry(tr.subject.clone()).or_default().push(i);
            by_p.entry(tr.predicate.clone()).or_default().push(i);
            by_o.entry(tr.object.clone()).or_default().push(i);
            by_sp
                .entry((tr.subject.clone(), tr.predicate.clone()))
                .or_default()
                .push(i);
            by_po
                .entry((tr.predicate.clone(), tr.object.clone()))
                .or_default()
                .push(i);
        }
        TripleStore {
            triples,
            by_s,
            by_p,
            by_o,
            by_sp,
            by_po,
        }
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    /// Candidate triples for a pattern with the given bound positions. The
    /// most selective available index is used; `None` positions are free.
    pub fn candidates(
        &self,
        s: Option<&Term>,
        p: Option<&Term>,
        o: Option<&Term>,
    ) -> CandidateIter<'_> {
        let ids = match (s, p, o) {
            (Some(s), Some(p), _) => self.by_sp.get(&(s.clone(), p.clone())),
            (_, Some(p), Some(o)) => self.by_po.get(&(p.clone(), o.clone())),
            (Some(s), None, _) => self.by_s.get(s),
            (None, None, Some(o)) => self.by_o.get(o),
            (None, Some(p), None) => self.by_p.get(p),
            (None, None, None) => {
                return CandidateIter {
                    store: self,
                    ids: None,
                    all: 0..self.triples.len() as u32,
                }
            }
        };
        CandidateIter {
            store: self,
            ids: Some(ids.map(|v| v.iter()).unwrap_or_else(|| [].iter())),
            all: 0..0,
        }
    }

    /// Estimated candidate count for pattern ordering.
    pub fn estimate(&self, s: Option<&Term>, p: Option<&Term>, o: Option<&Term>) -> usize {
        match (s, p, o) {
            (Some(s), Some(p), _) => self
                .by_sp
                .get(&(s.clone(), p.clone()))
                .map_or(0, Vec::len),
            (_, Some(p), Some(o)) => self
                .by_po
                .get(&(p.clone(), o.clone()))
                .map_or(0, Vec::len),
            (Some(s), None, _) => self.by_s.get(s).map_or(0, Vec::len),
            (None, None, Some(o)) => self.by_o.get(o).map_or(0, Vec::len),
            (None, Some(p), None) => self.by_p.get(p).map_or(0, Vec::len),
            (None, None, None) => self.triples.len(),
        }
    }
}

pub struct CandidateIter<'a> {
    store: &'a TripleStore,
    ids: Option<std::slice::Iter<'a, u32>>,
    all: std::ops::Range<u32>,
}

impl<'a> Iterator for CandidateIter<'a> {
    type Item = &'a Triple;

    fn next(&mut self) -> Option<&'a Triple> {
        let ix = match &mut self.ids {
            Some(iter) => *iter.next()?,
            None => self.all.next()?,
        };
        Some(&self.store.triples[ix as usize])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;
    use crate::kb::KnowledgeBase;

    #[test]
    fn height_fact_emits_five_triples() {
        let kb = fixture::nba_mini();
        let lebron = Term::Entity("Q1".into());
        let triples = triple_view(&kb);
        let height_edge: Vec<&Triple> = triples
            .iter()
            .filter(|t| t.subject == lebron && t.predicate == Term::pred("height"))
            .collect();
        assert_eq!(height_edge.len(), 1);
        let node = height_edge[0].object.clone();
        assert!(matches!(node, Term::Blank(_)));
        let about_node: Vec<&Triple> =
            triples.iter().filter(|t| t.subject == node).collect();
        // pred:value, pred:unit, pred:fact_h, pred:fact_r — plus the edge = 5.
        assert_eq!(about_node.len(), 4);
        assert!(about_node
            .iter()
            .any(|t| t.predicate == Term::pred(PRED_VALUE) && t.object == Term::lit_num(206.0)));
        assert!(about_node
            .iter()
            .any(|t| t.predicate == Term::pred(PRED_UNIT)
                && t.object == Term::lit_str("centimetre")));
    }

    #[test]
    fn relation_qualifier_attaches_to_fact_node() {
        let kb = fixture::nba_mini();
        let triples = triple_view(&kb);
        let drafted: Vec<&Triple> = triples
            .iter()
            .filter(|t| {
                t.predicate == Term::pred(PRED_FACT_R) && t.object == Term::lit_str("drafted by")
            })
            .collect();
        assert_eq!(drafted.len(), 1);
        let node = drafted[0].subject.clone();
        assert!(triples.iter().any(|t| t.subject == node
            && t.predicate == Term::pred("point in time")
            && t.object == Term::Literal(Value::Year(2003))));
    }

    #[test]
    fn empty_kb_empty_view() {
        let kb = KnowledgeBase::from_json_str(r#"{"concepts": [], "entities": []}"#).unwrap();
        assert!(triple_view(&kb).is_empty());
    }

    #[test]
    fn view_is_deterministic() {
        let kb = fixture::nba_mini();
        assert_eq!(dump(&kb), dump(&fixture::nba_mini()));
    }

    #[test]
    fn dump_is_tab_separated_with_hashed_blanks() {
        let kb = fixture::nba_mini();
        let d = dump(&kb);
        let line = d
            .lines()
            .find(|l| l.contains("<pred:unit>"))
            .expect("unit triple present");
        let cols: Vec<&str> = line.split('\t').collect();
        assert_eq!(cols.len(), 3);
        assert!(cols[0].starts_with("_:b"));
    }

    #[test]
    fn unitless_quantities_still_get_unit_edges() {
        let kb = fixture::nba_mini();
        let triples = triple_view(&kb);
        let unit_one = triples
            .iter()
            .filter(|t| t.predicate == Term::pred(PRED_UNIT) && t.object == Term::lit_str(UNITLESS))
            .count();
        // followers + two population facts
        assert_eq!(unit_one, 3);
    }
}
