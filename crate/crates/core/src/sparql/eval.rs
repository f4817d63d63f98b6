//! In-process evaluation of the SPARQL subset: a backtracking join over the
//! reified triple view, with greedy pattern ordering by index selectivity.

use std::collections::HashMap;

use crate::kb::{ConceptId, EntityId, KnowledgeBase};
use crate::sparql::ast::{
    FilterCond, PatternElement, QueryForm, SortDir, SparqlError, SparqlQuery, TermPattern,
};
use crate::triples::{Term, TripleStore, PRED_UNIT, PRED_VALUE};
use crate::value::{compare, Value, UNITLESS};

/// Result of evaluating a query.
#[derive(Debug, Clone, PartialEq)]
pub enum QueryOutcome {
    /// Projected terms in evaluation order, after ORDER BY/LIMIT, before any
    /// answer-level deduplication.
    Rows(Vec<Term>),
    Boolean(bool),
}

type Binding = HashMap<String, Term>;

/// Evaluates a validated query over the knowledge base's triple view.
pub fn evaluate(kb: &KnowledgeBase, q: &SparqlQuery) -> Result<QueryOutcome, SparqlError> {
    q.validate()?;
    let store = kb.store();
    match q.form {
        QueryForm::Ask => {
            let mut any = false;
            solve(store, &q.patterns, &mut Binding::new(), &mut |_| {
                any = true;
                false // stop at the first solution
            });
            Ok(QueryOutcome::Boolean(any))
        }
        QueryForm::Select | QueryForm::SelectCount => {
            let proj = q.projection.as_deref().expect("validated");
            let order_var = q.order_by.as_ref().map(|(v, _)| v.as_str());
            let mut rows: Vec<(Term, Option<Term>)> = Vec::new();
            solve(store, &q.patterns, &mut Binding::new(), &mut |b| {
                let p = b.get(proj).cloned();
                if let Some(p) = p {
                    let k = order_var.and_then(|v| b.get(v).cloned());
                    rows.push((p, k));
                }
                true
            });
            if let Some((_, dir)) = &q.order_by {
                // Stable sort on the key keeps evaluation order among equals.
                rows.sort_by(|(_, a), (_, b)| {
                    let ord = cmp_order_keys(a, b);
                    match dir {
                        SortDir::Asc => ord,
                        SortDir::Desc => ord.reverse(),
                    }
                });
            }
            if let Some(limit) = q.limit {
                truncate_keeping_ties(&mut rows, limit);
            }
            Ok(QueryOutcome::Rows(rows.into_iter().map(|(t, _)| t).collect()))
        }
    }
}

/// Rows tied with the last kept row survive the limit, so a tie for an
/// extreme shows up as more than one row.
fn truncate_keeping_ties(rows: &mut Vec<(Term, Option<Term>)>, limit: usize) {
    if rows.len() <= limit || limit == 0 {
        if limit == 0 {
            rows.clear();
        }
        return;
    }
    let boundary = rows[limit - 1].1.clone();
    let mut keep = limit;
    while keep < rows.len()
        && cmp_order_keys(&rows[keep].1, &boundary) == std::cmp::Ordering::Equal
    {
        keep += 1;
    }
    rows.truncate(keep);
}

fn cmp_order_keys(a: &Option<Term>, b: &Option<Term>) -> std::cmp::Ordering {
    match (a, b) {
        (None, None) => std::cmp::Ordering::Equal,
        (None, Some(_)) => std::cmp::Ordering::Less,
        (Some(_), None) => std::cmp::Ordering::Greater,
        (Some(x), Some(y)) => x.cmp(y),
    }
}

/// Resolves a pattern position under the current binding.
fn resolved(tp: &TermPattern, binding: &Binding) -> Option<Term> {
    match tp {
        TermPattern::Term(t) => Some(t.clone()),
        TermPattern::Var(v) => binding.get(v).cloned(),
    }
}

fn filter_ready(f: &FilterCond, binding: &Binding) -> bool {
    binding.contains_key(&f.var)
}

fn filter_passes(f: &FilterCond, binding: &Binding) -> bool {
    match binding.get(&f.var) {
        Some(Term::Literal(v)) => compare(v, &f.value, f.op),
        // Comparing a node (or nothing) to a value never holds.
        _ => false,
    }
}

/// Backtracking solver. `emit` returns `false` to stop early; `solve` itself
/// returns `false` when stopped.
fn solve(
    store: &TripleStore,
    elements: &[PatternElement],
    binding: &mut Binding,
    emit: &mut dyn FnMut(&Binding) -> bool,
) -> bool {
    // Evaluate any ready filter first: cheap pruning, no branching.
    if let Some(pos) = elements.iter().position(|el| match el {
        PatternElement::Filter(f) => filter_ready(f, binding),
        _ => false,
    }) {
        let PatternElement::Filter(f) = &elements[pos] else {
            unreachable!()
        };
        if !filter_passes(f, binding) {
            return true; // prune this branch, keep searching elsewhere
        }
        let rest: Vec<PatternElement> = skip_index(elements, pos);
        return solve(store, &rest, binding, emit);
    }

    // Pick the most selective triple pattern under the current binding.
    let mut best: Option<(usize, usize)> = None;
    for (i, el) in elements.iter().enumerate() {
        if let PatternElement::Triple(t) = el {
            let s = resolved(&t.subject, binding);
            let p = resolved(&t.predicate, binding);
            let o = resolved(&t.object, binding);
            let est = store.estimate(s.as_ref(), p.as_ref(), o.as_ref());
            if best.map_or(true, |(_, e)| est < e) {
                best = Some((i, est));
            }
        }
    }
    if let Some((pos, _)) = best {
        let PatternElement::Triple(t) = elements[pos].clone() else {
            unreachable!()
        };
        let rest: Vec<PatternElement> = skip_index(elements, pos);
        let s = resolved(&t.subject, binding);
        let p = resolved(&t.predicate, binding);
        let o = resolved(&t.object, binding);
        let candidates: Vec<_> = store
            .candidates(s.as_ref(), p.as_ref(), o.as_ref())
            .cloned()
            .collect();
        for triple in candidates {
            let mut bound_here: Vec<String> = Vec::new();
            let ok = bind_position(&t.subject, &triple.subject, binding, &mut bound_here)
                && bind_position(&t.predicate, &triple.predicate, binding, &mut bound_here)
                && bind_position(&t.object, &triple.object, binding, &mut bound_here);
            let keep_going = if ok {
                solve(store, &rest, binding, emit)
            } else {
                true
            };
            for v in bound_here {
                binding.remove(&v);
            }
            if !keep_going {
                return false;
            }
        }
        return true;
    }

    // Unions last: branch into each side with the remaining elements.
    if let Some(pos) = elements
        .iter()
        .position(|el| matches!(el, PatternElement::Union(_, _)))
    {
        let PatternElement::Union(a, b) = elements[pos].clone() else {
            unreachable!()
        };
        let rest: Vec<PatternElement> = skip_index(elements, pos);
        let mut with_a = a;
        with_a.extend(rest.iter().cloned());
        if !solve(store, &with_a, binding, emit) {
            return false;
        }
        let mut with_b = b;
        with_b.extend(rest);
        return solve(store, &with_b, binding, emit);
    }

    // Only unready filters may remain; validation guarantees none can.
    if elements
        .iter()
        .any(|el| matches!(el, PatternElement::Filter(_)))
    {
        return true; // unreachable for validated queries
    }
    emit(binding)
}

fn skip_index(elements: &[PatternElement], pos: usize) -> Vec<PatternElement> {
    elements
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != pos)
        .map(|(_, el)| el.clone())
        .collect()
}

fn bind_position(
    tp: &TermPattern,
    actual: &Term,
    binding: &mut Binding,
    bound_here: &mut Vec<String>,
) -> bool {
    match tp {
        TermPattern::Term(t) => t == actual,
        TermPattern::Var(v) => match binding.get(v) {
            Some(existing) => existing == actual,
            None => {
                binding.insert(v.clone(), actual.clone());
                bound_here.push(v.clone());
                true
            }
        },
    }
}

/// Reconstructs the typed value behind a value node: its `pred:value` literal
/// plus an optional `pred:unit` edge.
pub fn reconstruct_value(kb: &KnowledgeBase, node: &Term) -> Option<Value> {
    let store = kb.store();
    let value_lit = store
        .candidates(Some(node), Some(&Term::pred(PRED_VALUE)), None)
        .next()
        .and_then(|t| t.object.as_literal().cloned())?;
    let unit = store
        .candidates(Some(node), Some(&Term::pred(PRED_UNIT)), None)
        .next()
        .and_then(|t| match &t.object {
            Term::Literal(Value::String(u)) => Some(u.clone()),
            _ => None,
        });
    match (value_lit, unit) {
        (Value::Quantity { magnitude, .. }, Some(u)) => Some(Value::Quantity {
            magnitude,
            unit: u,
        }),
        (Value::Quantity { magnitude, .. }, None) => Some(Value::quantity(magnitude, UNITLESS)),
        (other, _) => Some(other),
    }
}

/// Renders a projected term as an answer string: entities and concepts by
/// name, value nodes by their reconstructed value, literals canonically.
pub fn render_term(kb: &KnowledgeBase, term: &Term) -> String {
    match term {
        Term::Literal(v) => v.render(),
        Term::Entity(id) => kb.entity_name(&EntityId(id.clone())).to_string(),
        Term::Concept(id) => kb
            .concept(&ConceptId(id.clone()))
            .map(|c| c.name.clone())
            .unwrap_or_else(|| "?".into()),
        Term::Pred(p) => p.clone(),
        Term::Blank(_) => reconstruct_value(kb, term)
            .map(|v| v.render())
            .unwrap_or_else(|| term.dump_form()),
    }
}

/// Key under which answer rows deduplicate: entities stay distinct by id,
/// value nodes and literals collapse by their rendered value.
pub fn term_answer_key(kb: &KnowledgeBase, term: &Term) -> String {
    match term {
        Term::Entity(id) => format!("\u{1}ent\u{1}{id}"),
        Term::Concept(id) => format!("\u{1}con\u{1}{id}"),
        Term::Pred(p) => format!("\u{1}pred\u{1}{p}"),
        Term::Literal(v) => format!("\u{1}val\u{1}{}", v.render()),
        Term::Blank(_) => match reconstruct_value(kb, term) {
            Some(v) => format!("\u{1}val\u{1}{}", v.render()),
            None => format!("\u{1}node\u{1}{}", term.dump_form()),
        },
    }
}

/// Deduplicated rendered answers of a query outcome. For ASK this is
/// `yes`/`no`; for SELECT-COUNT the distinct-row count.
pub fn answers(kb: &KnowledgeBase, q: &SparqlQuery, outcome: &QueryOutcome) -> Vec<String> {
    match outcome {
        QueryOutcome::Boolean(b) => vec![if *b { "yes" } else { "no" }.to_string()],
        QueryOutcome::Rows(rows) => {
            let mut seen = std::collections::HashSet::new();
            let distinct: Vec<&Term> = rows
                .iter()
                .filter(|t| seen.insert(term_answer_key(kb, t)))
                .collect();
            match q.form {
                QueryForm::SelectCount => vec![distinct.len().to_string()],
                _ => distinct.into_iter().map(|t| render_term(kb, t)).collect(),
            }
        }
    }
}
