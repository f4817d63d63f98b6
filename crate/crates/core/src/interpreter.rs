//! Program execution over a knowledge base.
//!
//! States flow between calls as ordered entity sets, optionally paired with
//! the facts that put each entity there; terminal calls produce an answer.
//! Execution is pure: the same knowledge base and program always give the
//! same answer and trace.

use std::collections::HashSet;

use serde::Serialize;

use crate::kb::{EntityId, FactRef, KnowledgeBase};
use crate::program::{DataKind, Function, FunctionCall, Program, TypeError};
use crate::value::{compare, parse_date, parse_quantity, parse_year, CompareOp, Value};

/// Owned handle to a fact: the entity whose fact list holds it, which list,
/// and the position. Resolution is O(1).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FactKey {
    pub owner: EntityId,
    pub kind: FactKind,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FactKind {
    Attribute,
    Relation,
}

impl FactKey {
    pub fn resolve<'k>(&self, kb: &'k KnowledgeBase) -> Option<FactRef<'k>> {
        let e = kb.entity(&self.owner)?;
        match self.kind {
            FactKind::Attribute => e.attributes.get(self.index).map(FactRef::Attribute),
            FactKind::Relation => e.relations.get(self.index).map(FactRef::Relation),
        }
    }
}

/// Output of a single call.
#[derive(Debug, Clone, PartialEq)]
pub enum StepOutput {
    /// Ordered entity set without duplicates.
    Entities(Vec<EntityId>),
    /// Parallel (entity, evidence fact) pairs; an entity may repeat with
    /// distinct facts, pairs themselves are unique.
    EntitiesWithFacts(Vec<(EntityId, FactKey)>),
    Value(Value),
    Str(String),
    Number(i64),
    Boolean(bool),
    Predicate(String),
}

impl StepOutput {
    pub fn kind(&self) -> DataKind {
        match self {
            StepOutput::Entities(_) => DataKind::Entities,
            StepOutput::EntitiesWithFacts(_) => DataKind::EntitiesWithFacts,
            StepOutput::Value(_) => DataKind::Value,
            StepOutput::Str(_) => DataKind::String,
            StepOutput::Number(_) => DataKind::Number,
            StepOutput::Boolean(_) => DataKind::Boolean,
            StepOutput::Predicate(_) => DataKind::Predicate,
        }
    }

    /// Entity projection, de-duplicated preserving first occurrence.
    pub fn entities(&self) -> Option<Vec<EntityId>> {
        match self {
            StepOutput::Entities(es) => Some(es.clone()),
            StepOutput::EntitiesWithFacts(pairs) => {
                let mut seen = HashSet::new();
                Some(
                    pairs
                        .iter()
                        .filter(|(e, _)| seen.insert(e.clone()))
                        .map(|(e, _)| e.clone())
                        .collect(),
                )
            }
            _ => None,
        }
    }
}

/// Terminal answer of a program.
#[derive(Debug, Clone, PartialEq)]
pub enum Answer {
    Name(String),
    Count(i64),
    Value(Value),
    Boolean(bool),
    Predicate(String),
}

impl Answer {
    /// Canonical rendering: booleans as `yes`/`no`, quantities as
    /// `magnitude unit`, dates ISO, counts bare.
    pub fn render(&self) -> String {
        match self {
            Answer::Name(s) => s.clone(),
            Answer::Count(n) => n.to_string(),
            Answer::Value(v) => v.render(),
            Answer::Boolean(b) => if *b { "yes" } else { "no" }.to_string(),
            Answer::Predicate(p) => p.clone(),
        }
    }
}

/// One step of the execution trace.
#[derive(Debug, Clone, Serialize)]
pub struct TraceStep {
    pub index: usize,
    pub function: String,
    pub textual_inputs: Vec<String>,
    pub output_kind: DataKind,
    /// Up to 20 rendered items of the step output.
    pub preview: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

const PREVIEW_LIMIT: usize = 20;

#[derive(Debug, Clone)]
pub struct Execution {
    pub answer: Answer,
    pub trace: Vec<TraceStep>,
}

impl Execution {
    pub fn trace_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.trace).expect("trace serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalErrorKind {
    #[error("no unique answer ({candidates} candidate(s))")]
    NonUniqueAnswer { candidates: usize },
    #[error("expected exactly one entity, found {count}")]
    NonUniqueEntity { count: usize },
    #[error("upstream step produced a bare entity set without facts")]
    MissingFacts,
    #[error("the designated fact does not exist")]
    FactNotFound,
    #[error("invalid textual value {text:?}: {message}")]
    InvalidValue { text: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("call {index} ({function}): {kind}")]
pub struct EvalError {
    pub index: usize,
    pub function: String,
    pub kind: EvalErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExecuteError {
    #[error("typecheck failed: {0}")]
    Type(#[from] TypeError),
    #[error("execution failed: {0}")]
    Eval(#[from] EvalError),
}

/// Executes a typechecked program and returns the rendered answer plus the
/// full per-step trace.
pub fn execute(kb: &KnowledgeBase, program: &Program) -> Result<Execution, ExecuteError> {
    let kinds = program.typecheck()?;
    let mut outputs: Vec<StepOutput> = Vec::with_capacity(program.len());
    let mut trace: Vec<TraceStep> = Vec::with_capacity(program.len());
    for (index, call) in program.calls.iter().enumerate() {
        let mut note = None;
        let out = eval_call(kb, call, index, &outputs, &mut note).map_err(|kind| EvalError {
            index,
            function: call.function.name().to_string(),
            kind,
        })?;
        debug_assert_eq!(out.kind(), kinds[index]);
        trace.push(TraceStep {
            index,
            function: call.function.name().to_string(),
            textual_inputs: call.textual_inputs.clone(),
            output_kind: out.kind(),
            preview: preview(kb, &out),
            note,
        });
        outputs.push(out);
    }
    let answer = match outputs.pop().expect("non-empty program") {
        StepOutput::Str(s) => Answer::Name(s),
        StepOutput::Number(n) => Answer::Count(n),
        StepOutput::Value(v) => Answer::Value(v),
        StepOutput::Boolean(b) => Answer::Boolean(b),
        StepOutput::Predicate(p) => Answer::Predicate(p),
        StepOutput::Entities(_) | StepOutput::EntitiesWithFacts(_) => {
            unreachable!("typecheck rejects entity roots")
        }
    };
    Ok(Execution { answer, trace })
}

/// Runs a post-order call fragment (no terminal root required) and returns
/// the final step output. Used by the generator to denote located sets.
pub(crate) fn run_fragment(
    kb: &KnowledgeBase,
    calls: &[FunctionCall],
) -> Result<StepOutput, EvalError> {
    let mut outputs: Vec<StepOutput> = Vec::with_capacity(calls.len());
    let mut last = None;
    for (index, call) in calls.iter().enumerate() {
        let mut note = None;
        let out = eval_call(kb, call, index, &outputs, &mut note).map_err(|kind| EvalError {
            index,
            function: call.function.name().to_string(),
            kind,
        })?;
        outputs.push(out.clone());
        last = Some(out);
    }
    last.ok_or(EvalError {
        index: 0,
        function: "<empty>".into(),
        kind: EvalErrorKind::FactNotFound,
    })
}

fn preview(kb: &KnowledgeBase, out: &StepOutput) -> Vec<String> {
    match out {
        StepOutput::Entities(es) => es
            .iter()
            .take(PREVIEW_LIMIT)
            .map(|e| kb.entity_name(e).to_string())
            .collect(),
        StepOutput::EntitiesWithFacts(pairs) => pairs
            .iter()
            .take(PREVIEW_LIMIT)
            .map(|(e, f)| {
                let fact = f
                    .resolve(kb)
                    .map(|r| r.describe(kb))
                    .unwrap_or_else(|| "?".into());
                format!("{} via {}", kb.entity_name(e), fact)
            })
            .collect(),
        StepOutput::Value(v) => vec![v.render()],
        StepOutput::Str(s) => vec![s.clone()],
        StepOutput::Number(n) => vec![n.to_string()],
        StepOutput::Boolean(b) => vec![if *b { "yes" } else { "no" }.to_string()],
        StepOutput::Predicate(p) => vec![p.clone()],
    }
}

fn eval_call(
    kb: &KnowledgeBase,
    call: &FunctionCall,
    _index: usize,
    outputs: &[StepOutput],
    note: &mut Option<String>,
) -> Result<StepOutput, EvalErrorKind> {
    let dep = |slot: usize| &outputs[call.functional_inputs[slot]];
    let text = |slot: usize| call.textual_inputs[slot].as_str();
    match call.function {
        Function::FindAll => Ok(StepOutput::Entities(find_all(kb))),
        Function::Find => Ok(StepOutput::Entities(find(kb, text(0)))),
        Function::FilterConcept => Ok(StepOutput::Entities(filter_concept(
            kb,
            &require_entities(dep(0))?,
            text(0),
        ))),
        Function::FilterStr => {
            let value = Value::String(text(1).trim().to_string());
            Ok(StepOutput::EntitiesWithFacts(filter_attribute(
                kb,
                &require_entities(dep(0))?,
                text(0),
                &value,
                CompareOp::Eq,
            )))
        }
        Function::FilterNum | Function::FilterYear | Function::FilterDate => {
            let value = parse_typed(kb, call.function, text(1))?;
            let op = parse_op(text(2))?;
            Ok(StepOutput::EntitiesWithFacts(filter_attribute(
                kb,
                &require_entities(dep(0))?,
                text(0),
                &value,
                op,
            )))
        }
        Function::QFilterStr => {
            let value = Value::String(text(1).trim().to_string());
            qualifier_filter(kb, dep(0), text(0), &value, CompareOp::Eq)
                .map(StepOutput::EntitiesWithFacts)
        }
        Function::QFilterNum | Function::QFilterYear | Function::QFilterDate => {
            let value = parse_typed(kb, call.function, text(1))?;
            let op = parse_op(text(2))?;
            qualifier_filter(kb, dep(0), text(0), &value, op).map(StepOutput::EntitiesWithFacts)
        }
        Function::Relate => {
            let forward = match text(1) {
                "forward" => true,
                "backward" => false,
                other => {
                    return Err(EvalErrorKind::InvalidValue {
                        text: other.to_string(),
                        message: "direction must be forward or backward".into(),
                    })
                }
            };
            Ok(StepOutput::EntitiesWithFacts(relate(
                kb,
                &require_entities(dep(0))?,
                text(0),
                forward,
            )))
        }
        Function::And => {
            let a = require_entities(dep(0))?;
            let b = require_entities(dep(1))?;
            Ok(StepOutput::Entities(set_and(&a, &b)))
        }
        Function::Or => {
            let a = require_entities(dep(0))?;
            let b = require_entities(dep(1))?;
            Ok(StepOutput::Entities(set_or(&a, &b)))
        }
        Function::QueryName => {
            let es = require_entities(dep(0))?;
            if es.len() != 1 {
                return Err(EvalErrorKind::NonUniqueAnswer {
                    candidates: es.len(),
                });
            }
            Ok(StepOutput::Str(kb.entity_name(&es[0]).to_string()))
        }
        Function::Count => {
            let es = require_entities(dep(0))?;
            Ok(StepOutput::Number(es.len() as i64))
        }
        Function::QueryAttr => {
            let e = single_entity(dep(0))?;
            query_attr_values(kb, &e, text(0), None).map(StepOutput::Value)
        }
        Function::QueryAttrUnderCondition => {
            let e = single_entity(dep(0))?;
            let qvalue = kb.parse_qual_value(text(1), text(2));
            query_attr_values(kb, &e, text(0), Some((text(1), &qvalue))).map(StepOutput::Value)
        }
        Function::QueryRelation => {
            let a = single_entity(dep(0))?;
            let b = single_entity(dep(1))?;
            query_relation(kb, &a, &b).map(StepOutput::Predicate)
        }
        Function::SelectBetween => {
            let a = single_entity(dep(0))?;
            let b = single_entity(dep(1))?;
            let greater = match text(1) {
                "greater" => true,
                "less" => false,
                other => {
                    return Err(EvalErrorKind::InvalidValue {
                        text: other.to_string(),
                        message: "op must be greater or less".into(),
                    })
                }
            };
            select_between(kb, &a, &b, text(0), greater).map(StepOutput::Str)
        }
        Function::SelectAmong => {
            let es = require_entities(dep(0))?;
            let largest = match text(1) {
                "largest" => true,
                "smallest" => false,
                other => {
                    return Err(EvalErrorKind::InvalidValue {
                        text: other.to_string(),
                        message: "op must be largest or smallest".into(),
                    })
                }
            };
            select_among(kb, &es, text(0), largest, note).map(StepOutput::Str)
        }
        Function::VerifyStr => {
            let queried = require_value(dep(0))?;
            let target = Value::String(text(0).trim().to_string());
            Ok(StepOutput::Boolean(compare(queried, &target, CompareOp::Eq)))
        }
        Function::VerifyNum | Function::VerifyYear | Function::VerifyDate => {
            let queried = require_value(dep(0))?;
            let target = parse_typed(kb, call.function, text(0))?;
            let op = parse_op(text(1))?;
            Ok(StepOutput::Boolean(compare(queried, &target, op)))
        }
        Function::QueryAttrQualifier => {
            let e = single_entity(dep(0))?;
            let value = kb.parse_attr_value(text(0), text(1));
            query_attr_qualifier(kb, &e, text(0), &value, text(2)).map(StepOutput::Value)
        }
        Function::QueryRelationQualifier => {
            let a = single_entity(dep(0))?;
            let b = single_entity(dep(1))?;
            query_relation_qualifier(kb, &a, &b, text(0), text(1)).map(StepOutput::Value)
        }
    }
}

fn parse_op(tok: &str) -> Result<CompareOp, EvalErrorKind> {
    CompareOp::from_token(tok).ok_or_else(|| EvalErrorKind::InvalidValue {
        text: tok.to_string(),
        message: "op must be one of =, !=, <, >".into(),
    })
}

/// Type-directed parse of a textual value by the function family.
fn parse_typed(kb: &KnowledgeBase, f: Function, text: &str) -> Result<Value, EvalErrorKind> {
    let invalid = |e: crate::value::ValueParseError| EvalErrorKind::InvalidValue {
        text: text.to_string(),
        message: e.to_string(),
    };
    match f {
        Function::FilterNum | Function::QFilterNum | Function::VerifyNum => {
            let v = parse_quantity(text).map_err(invalid)?;
            match v {
                Value::Quantity { magnitude, unit } => Ok(Value::Quantity {
                    magnitude,
                    unit: kb.normalize_unit(&unit),
                }),
                _ => unreachable!(),
            }
        }
        Function::FilterYear | Function::QFilterYear | Function::VerifyYear => {
            parse_year(text).map_err(invalid)
        }
        Function::FilterDate | Function::QFilterDate | Function::VerifyDate => {
            parse_date(text).map_err(invalid)
        }
        _ => unreachable!("parse_typed only covers typed families"),
    }
}

fn require_entities(out: &StepOutput) -> Result<Vec<EntityId>, EvalErrorKind> {
    out.entities().ok_or(EvalErrorKind::MissingFacts)
}

fn single_entity(out: &StepOutput) -> Result<EntityId, EvalErrorKind> {
    let es = require_entities(out)?;
    if es.len() != 1 {
        return Err(EvalErrorKind::NonUniqueEntity { count: es.len() });
    }
    Ok(es[0].clone())
}

fn require_value(out: &StepOutput) -> Result<&Value, EvalErrorKind> {
    match out {
        StepOutput::Value(v) => Ok(v),
        // Typecheck guarantees this; guard anyway for direct calls.
        _ => Err(EvalErrorKind::MissingFacts),
    }
}

pub fn find_all(kb: &KnowledgeBase) -> Vec<EntityId> {
    kb.entities().map(|e| e.id.clone()).collect()
}

pub fn find(kb: &KnowledgeBase, name: &str) -> Vec<EntityId> {
    kb.entities_named(name.trim()).to_vec()
}

pub fn filter_concept(kb: &KnowledgeBase, input: &[EntityId], concept: &str) -> Vec<EntityId> {
    let members = kb.entities_of_concept(concept.trim());
    input.iter().filter(|e| members.contains(*e)).cloned().collect()
}

pub fn filter_attribute(
    kb: &KnowledgeBase,
    input: &[EntityId],
    key: &str,
    value: &Value,
    op: CompareOp,
) -> Vec<(EntityId, FactKey)> {
    let mut out = Vec::new();
    for id in input {
        let Some(e) = kb.entity(id) else { continue };
        for (i, fact) in e.attributes.iter().enumerate() {
            if fact.key == key && compare(&fact.value, value, op) {
                out.push((
                    id.clone(),
                    FactKey {
                        owner: id.clone(),
                        kind: FactKind::Attribute,
                        index: i,
                    },
                ));
            }
        }
    }
    out
}

pub fn qualifier_filter(
    kb: &KnowledgeBase,
    state: &StepOutput,
    qkey: &str,
    qvalue: &Value,
    op: CompareOp,
) -> Result<Vec<(EntityId, FactKey)>, EvalErrorKind> {
    let pairs = match state {
        StepOutput::EntitiesWithFacts(pairs) => pairs,
        StepOutput::Entities(_) => return Err(EvalErrorKind::MissingFacts),
        _ => return Err(EvalErrorKind::MissingFacts),
    };
    Ok(pairs
        .iter()
        .filter(|(_, key)| {
            key.resolve(kb).is_some_and(|fact| {
                fact.qualifiers()
                    .iter()
                    .any(|q| q.key == qkey && compare(&q.value, qvalue, op))
            })
        })
        .cloned()
        .collect())
}

pub fn relate(
    kb: &KnowledgeBase,
    input: &[EntityId],
    predicate: &str,
    forward: bool,
) -> Vec<(EntityId, FactKey)> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for id in input {
        if forward {
            let Some(e) = kb.entity(id) else { continue };
            for (i, r) in e.relations.iter().enumerate() {
                if r.predicate == predicate {
                    let pair = (
                        r.object.clone(),
                        FactKey {
                            owner: id.clone(),
                            kind: FactKind::Relation,
                            index: i,
                        },
                    );
                    if seen.insert(pair.clone()) {
                        out.push(pair);
                    }
                }
            }
        } else {
            for fact in kb.relations_to(id) {
                if fact.predicate == predicate {
                    let Some(subject) = kb.entity(&fact.subject) else {
                        continue;
                    };
                    let index = subject
                        .relations
                        .iter()
                        .position(|r| r == fact)
                        .expect("fact comes from its subject's list");
                    let pair = (
                        fact.subject.clone(),
                        FactKey {
                            owner: fact.subject.clone(),
                            kind: FactKind::Relation,
                            index,
                        },
                    );
                    if seen.insert(pair.clone()) {
                        out.push(pair);
                    }
                }
            }
        }
    }
    out
}

pub fn set_and(a: &[EntityId], b: &[EntityId]) -> Vec<EntityId> {
    let b_set: HashSet<&EntityId> = b.iter().collect();
    a.iter().filter(|e| b_set.contains(*e)).cloned().collect()
}

pub fn set_or(a: &[EntityId], b: &[EntityId]) -> Vec<EntityId> {
    let a_set: HashSet<&EntityId> = a.iter().collect();
    let mut out = a.to_vec();
    out.extend(b.iter().filter(|e| !a_set.contains(*e)).cloned());
    out
}

/// Shared by QueryAttr and QueryAttrUnderCondition: collect the values of
/// `key` facts (optionally restricted by an equality qualifier condition) and
/// demand exactly one distinct value.
fn query_attr_values(
    kb: &KnowledgeBase,
    id: &EntityId,
    key: &str,
    condition: Option<(&str, &Value)>,
) -> Result<Value, EvalErrorKind> {
    let mut values: Vec<Value> = Vec::new();
    if let Some(e) = kb.entity(id) {
        for fact in &e.attributes {
            if fact.key != key {
                continue;
            }
            if let Some((qkey, qvalue)) = condition {
                let hit = fact
                    .qualifiers
                    .iter()
                    .any(|q| q.key == qkey && compare(&q.value, qvalue, CompareOp::Eq));
                if !hit {
                    continue;
                }
            }
            if !values.contains(&fact.value) {
                values.push(fact.value.clone());
            }
        }
    }
    if values.len() == 1 {
        Ok(values.pop().expect("len checked"))
    } else {
        Err(EvalErrorKind::NonUniqueAnswer {
            candidates: values.len(),
        })
    }
}

fn query_relation(
    kb: &KnowledgeBase,
    a: &EntityId,
    b: &EntityId,
) -> Result<String, EvalErrorKind> {
    let mut predicates: Vec<String> = Vec::new();
    if let Some(e) = kb.entity(a) {
        for r in &e.relations {
            if &r.object == b && !predicates.contains(&r.predicate) {
                predicates.push(r.predicate.clone());
            }
        }
    }
    if predicates.len() == 1 {
        Ok(predicates.pop().expect("len checked"))
    } else {
        Err(EvalErrorKind::NonUniqueAnswer {
            candidates: predicates.len(),
        })
    }
}

fn attribute_values(kb: &KnowledgeBase, id: &EntityId, key: &str) -> Vec<Value> {
    let mut out = Vec::new();
    if let Some(e) = kb.entity(id) {
        for fact in &e.attributes {
            if fact.key == key && !out.contains(&fact.value) {
                out.push(fact.value.clone());
            }
        }
    }
    out
}

fn select_between(
    kb: &KnowledgeBase,
    a: &EntityId,
    b: &EntityId,
    key: &str,
    greater: bool,
) -> Result<String, EvalErrorKind> {
    let va = attribute_values(kb, a, key);
    let vb = attribute_values(kb, b, key);
    if va.len() != 1 || vb.len() != 1 {
        return Err(EvalErrorKind::NonUniqueAnswer {
            candidates: va.len().max(vb.len()),
        });
    }
    let op = if greater { CompareOp::Gt } else { CompareOp::Lt };
    let a_wins = compare(&va[0], &vb[0], op);
    let b_wins = compare(&vb[0], &va[0], op);
    match (a_wins, b_wins) {
        (true, false) => Ok(kb.entity_name(a).to_string()),
        (false, true) => Ok(kb.entity_name(b).to_string()),
        // Tie or incomparable values (e.g. mismatched units).
        _ => Err(EvalErrorKind::NonUniqueAnswer { candidates: 0 }),
    }
}

/// Unit grouping tag: quantities by their unit, years and dates pooled
/// together (they compare), strings excluded from ordering.
fn unit_tag(v: &Value) -> Option<String> {
    match v {
        Value::Quantity { unit, .. } => Some(format!("u:{unit}")),
        Value::Year(_) | Value::Date(_) => Some("t:".to_string()),
        Value::String(_) => None,
    }
}

fn select_among(
    kb: &KnowledgeBase,
    input: &[EntityId],
    key: &str,
    largest: bool,
    note: &mut Option<String>,
) -> Result<String, EvalErrorKind> {
    if input.len() < 2 {
        return Err(EvalErrorKind::NonUniqueEntity { count: input.len() });
    }
    let mut candidates: Vec<(EntityId, Value, String)> = Vec::new();
    for id in input {
        for v in attribute_values(kb, id, key) {
            if let Some(tag) = unit_tag(&v) {
                candidates.push((id.clone(), v, tag));
            }
        }
    }
    if candidates.is_empty() {
        return Err(EvalErrorKind::NonUniqueAnswer { candidates: 0 });
    }
    // Comparisons only make sense within one unit: keep the most common tag,
    // breaking count ties lexicographically.
    let mut counts: std::collections::BTreeMap<&str, usize> = std::collections::BTreeMap::new();
    for (_, _, tag) in &candidates {
        *counts.entry(tag).or_default() += 1;
    }
    let plurality = counts
        .iter()
        .max_by(|(ta, ca), (tb, cb)| ca.cmp(cb).then(tb.cmp(ta)))
        .map(|(t, _)| t.to_string())
        .expect("non-empty");
    let skipped: Vec<&EntityId> = candidates
        .iter()
        .filter(|(_, _, tag)| *tag != plurality)
        .map(|(e, _, _)| e)
        .collect();
    if !skipped.is_empty() {
        let names: Vec<String> = skipped
            .iter()
            .take(PREVIEW_LIMIT)
            .map(|e| kb.entity_name(e).to_string())
            .collect();
        *note = Some(format!(
            "skipped {} candidate value(s) outside the majority unit: {}",
            skipped.len(),
            names.join(", ")
        ));
    }
    candidates.retain(|(_, _, tag)| *tag == plurality);
    let op = if largest { CompareOp::Gt } else { CompareOp::Lt };
    // Winners: candidates no other candidate beats.
    let mut winners: Vec<&EntityId> = Vec::new();
    for (i, (e, v, _)) in candidates.iter().enumerate() {
        let beaten = candidates
            .iter()
            .enumerate()
            .any(|(j, (_, w, _))| j != i && compare(w, v, op));
        if !beaten {
            winners.push(e);
        }
    }
    let mut names: Vec<String> = winners
        .iter()
        .map(|e| kb.entity_name(e).to_string())
        .collect();
    names.sort();
    names.dedup();
    if names.len() == 1 {
        Ok(names.pop().expect("len checked"))
    } else {
        Err(EvalErrorKind::NonUniqueAnswer {
            candidates: names.len(),
        })
    }
}

fn query_attr_qualifier(
    kb: &KnowledgeBase,
    id: &EntityId,
    key: &str,
    value: &Value,
    qkey: &str,
) -> Result<Value, EvalErrorKind> {
    let mut matched = false;
    let mut qvalues: Vec<Value> = Vec::new();
    if let Some(e) = kb.entity(id) {
        for fact in &e.attributes {
            if fact.key == key && compare(&fact.value, value, CompareOp::Eq) {
                matched = true;
                for q in &fact.qualifiers {
                    if q.key == qkey && !qvalues.contains(&q.value) {
                        qvalues.push(q.value.clone());
                    }
                }
            }
        }
    }
    if !matched {
        return Err(EvalErrorKind::FactNotFound);
    }
    if qvalues.len() == 1 {
        Ok(qvalues.pop().expect("len checked"))
    } else {
        Err(EvalErrorKind::NonUniqueAnswer {
            candidates: qvalues.len(),
        })
    }
}

fn query_relation_qualifier(
    kb: &KnowledgeBase,
    a: &EntityId,
    b: &EntityId,
    predicate: &str,
    qkey: &str,
) -> Result<Value, EvalErrorKind> {
    let mut matched = false;
    let mut qvalues: Vec<Value> = Vec::new();
    if let Some(e) = kb.entity(a) {
        for fact in &e.relations {
            if fact.predicate == predicate && &fact.object == b {
                matched = true;
                for q in &fact.qualifiers {
                    if q.key == qkey && !qvalues.contains(&q.value) {
                        qvalues.push(q.value.clone());
                    }
                }
            }
        }
    }
    if !matched {
        return Err(EvalErrorKind::FactNotFound);
    }
    if qvalues.len() == 1 {
        Ok(qvalues.pop().expect("len checked"))
    } else {
        Err(EvalErrorKind::NonUniqueAnswer {
            candidates: qvalues.len(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;

    fn run(text: &str) -> Result<String, ExecuteError> {
        let kb = fixture::nba_mini();
        let p = Program::parse_text(text).unwrap();
        execute(&kb, &p).map(|ex| ex.answer.render())
    }

    fn run_err(text: &str) -> EvalErrorKind {
        match run(text) {
            Err(ExecuteError::Eval(e)) => e.kind,
            other => panic!("expected eval error, got {other:?}"),
        }
    }

    #[test]
    fn target_entity_via_relation_and_concept() {
        assert_eq!(
            run("Find <arg> LeBron James <func> Relate <arg> drafted by <arg> forward <func> FilterConcept <arg> team <func> QueryName").unwrap(),
            "Cleveland Cavaliers"
        );
    }

    #[test]
    fn relate_forward_follows_subject_to_object() {
        assert_eq!(
            run("Find <arg> LeBron James Jr. <func> Relate <arg> father <arg> forward <func> QueryName").unwrap(),
            "LeBron James"
        );
    }

    #[test]
    fn relate_backward_finds_subjects() {
        assert_eq!(
            run("Find <arg> LeBron James <func> Relate <arg> father <arg> backward <func> QueryName").unwrap(),
            "LeBron James Jr."
        );
    }

    #[test]
    fn unqualified_akron_population_is_ambiguous() {
        assert_eq!(
            run_err("Find <arg> Akron <func> QueryAttr <arg> population"),
            EvalErrorKind::NonUniqueAnswer { candidates: 2 }
        );
    }

    #[test]
    fn qualified_population_is_unique() {
        assert_eq!(
            run("Find <arg> Akron <func> QueryAttrUnderCondition <arg> population <arg> point in time <arg> 2010").unwrap(),
            "199110"
        );
    }

    #[test]
    fn attr_qualifier_lookup() {
        assert_eq!(
            run("Find <arg> Akron <func> QueryAttrQualifier <arg> population <arg> 199,110 <arg> point in time").unwrap(),
            "2010"
        );
    }

    #[test]
    fn relation_qualifier_lookup() {
        assert_eq!(
            run("Find <arg> LeBron James <func> Find <arg> Cleveland Cavaliers <func> QueryRelationQualifier <arg> drafted by <arg> point in time").unwrap(),
            "2003"
        );
    }

    #[test]
    fn verify_height_against_threshold() {
        assert_eq!(
            run("Find <arg> LeBron James <func> QueryAttr <arg> height <func> VerifyNum <arg> 180 centimetres <arg> >").unwrap(),
            "yes"
        );
        assert_eq!(
            run("Find <arg> LeBron James <func> QueryAttr <arg> height <func> VerifyNum <arg> 2 metres <arg> >").unwrap(),
            "no"
        );
    }

    #[test]
    fn select_between_and_among() {
        assert_eq!(
            run("Find <arg> LeBron James Jr. <func> Find <arg> LeBron James <func> SelectBetween <arg> height <arg> greater").unwrap(),
            "LeBron James"
        );
        assert_eq!(
            run("FindAll <func> FilterConcept <arg> basketball player <func> SelectAmong <arg> height <arg> largest").unwrap(),
            "LeBron James"
        );
    }

    #[test]
    fn count_and_sets() {
        assert_eq!(run("FindAll <func> Count").unwrap(), "5");
        assert_eq!(
            run("FindAll <func> FilterConcept <arg> athlete <func> Count").unwrap(),
            "2"
        );
        assert_eq!(
            run("Find <arg> Akron <func> Find <arg> Cleveland <func> Or <func> Count").unwrap(),
            "2"
        );
        assert_eq!(
            run("Find <arg> Akron <func> Find <arg> Cleveland <func> And <func> Count").unwrap(),
            "0"
        );
    }

    #[test]
    fn filter_num_with_plural_unit_and_qualifier_filter() {
        assert_eq!(
            run("FindAll <func> FilterNum <arg> social media followers <arg> 3,000,000 <arg> > <func> QFilterYear <arg> point in time <arg> 2021 <arg> = <func> FilterConcept <arg> basketball team <func> QueryName").unwrap(),
            "Cleveland Cavaliers"
        );
        assert_eq!(
            run("FindAll <func> FilterNum <arg> height <arg> 200 centimetres <arg> > <func> QueryName").unwrap(),
            "LeBron James"
        );
    }

    #[test]
    fn find_unknown_name_is_empty() {
        assert_eq!(
            run_err("Find <arg> Nobody <func> QueryName"),
            EvalErrorKind::NonUniqueAnswer { candidates: 0 }
        );
    }

    #[test]
    fn query_relation_unique_and_zero() {
        assert_eq!(
            run("Find <arg> LeBron James Jr. <func> Find <arg> LeBron James <func> QueryRelation").unwrap(),
            "father"
        );
        assert_eq!(
            run("Find <arg> Akron <func> Find <arg> Cleveland <func> QueryRelation"),
            Err(ExecuteError::Eval(EvalError {
                index: 2,
                function: "QueryRelation".into(),
                kind: EvalErrorKind::NonUniqueAnswer { candidates: 0 },
            }))
        );
    }

    #[test]
    fn trace_shape_matches_program() {
        let kb = fixture::nba_mini();
        let p = Program::parse_text(
            "Find <arg> LeBron James <func> Relate <arg> drafted by <arg> forward <func> FilterConcept <arg> team <func> QueryName",
        )
        .unwrap();
        let ex = execute(&kb, &p).unwrap();
        assert_eq!(ex.trace.len(), 4);
        let kinds: Vec<DataKind> = ex.trace.iter().map(|s| s.output_kind).collect();
        assert_eq!(kinds, p.typecheck().unwrap());
        assert_eq!(ex.trace[1].preview.len(), 1);
    }

    #[test]
    fn execution_is_deterministic() {
        let kb = fixture::nba_mini();
        let p = Program::parse_text(
            "FindAll <func> FilterConcept <arg> person <func> SelectAmong <arg> height <arg> smallest",
        )
        .unwrap();
        let a = execute(&kb, &p).unwrap();
        let b = execute(&kb, &p).unwrap();
        assert_eq!(a.answer, b.answer);
        assert_eq!(a.trace_json(), b.trace_json());
    }

    #[test]
    fn qualifier_filter_after_and_is_rejected_at_typecheck() {
        let kb = fixture::nba_mini();
        let p = Program::parse_text(
            "Find <arg> Akron <func> Find <arg> Cleveland <func> And <func> QFilterStr <arg> k <arg> v <func> Count",
        )
        .unwrap();
        assert!(matches!(execute(&kb, &p), Err(ExecuteError::Type(_))));
        // Called directly with a bare entity set, the op reports MissingFacts.
        let bare = StepOutput::Entities(vec![EntityId::from("Q1")]);
        assert_eq!(
            qualifier_filter(&kb, &bare, "k", &Value::string("v"), CompareOp::Eq),
            Err(EvalErrorKind::MissingFacts)
        );
    }

    #[test]
    fn select_among_skips_minority_units() {
        // Mixed units: both players in centimetres, so a synthetic state with
        // mixed-unit values exercises the majority rule via mass (kilogram)
        // absent in fixture -> candidates empty -> NonUniqueAnswer(0).
        assert_eq!(
            run_err("FindAll <func> FilterConcept <arg> person <func> SelectAmong <arg> mass <arg> largest"),
            EvalErrorKind::NonUniqueAnswer { candidates: 0 }
        );
    }

    #[test]
    fn string_qualifier_filter() {
        assert_eq!(
            run("Find <arg> LeBron James <func> Relate <arg> drafted by <arg> forward <func> QFilterStr <arg> draft pick <arg> first overall <func> QueryName").unwrap(),
            "Cleveland Cavaliers"
        );
    }

    #[test]
    fn date_family_roundtrip() {
        assert_eq!(
            run("FindAll <func> FilterDate <arg> date of birth <arg> 1990-01-01 <arg> < <func> QueryName").unwrap(),
            "LeBron James"
        );
        assert_eq!(
            run("Find <arg> LeBron James Jr. <func> QueryAttr <arg> date of birth <func> VerifyDate <arg> 2004-10-06 <arg> =").unwrap(),
            "yes"
        );
        // FilterYear over a date-valued attribute matches on the year component.
        assert_eq!(
            run("FindAll <func> FilterYear <arg> date of birth <arg> 1984 <arg> = <func> QueryName").unwrap(),
            "LeBron James"
        );
    }
}
