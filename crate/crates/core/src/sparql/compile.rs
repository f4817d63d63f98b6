//! Compilation of typechecked programs into the SPARQL subset over the
//! reified triple encoding. Each call contributes a pattern fragment; the
//! root call fixes the query form.

use crate::kb::KnowledgeBase;
use crate::program::{Function, Program};
use crate::sparql::ast::{
    rename_var, FilterCond, PatternElement, QueryForm, SortDir, SparqlQuery, TermPattern,
    TriplePattern,
};
use crate::sparql::SparqlError;
use crate::triples::{
    Term, PRED_FACT_H, PRED_FACT_R, PRED_FACT_T, PRED_INSTANCE_OF, PRED_NAME, PRED_UNIT,
    PRED_VALUE,
};
use crate::value::{parse_date, parse_quantity, parse_year, CompareOp, Value, UNITLESS};

/// Pattern fragment produced by one call.
#[derive(Debug, Clone, Default)]
struct Frag {
    patterns: Vec<PatternElement>,
    /// Variable ranging over the fragment's entity set.
    entity_var: Option<String>,
    /// Variable bound to the fact/value node, when the call exposes one.
    fact_var: Option<String>,
}

struct Compiler<'k> {
    kb: &'k KnowledgeBase,
    counter: usize,
}

fn tp_var(v: &str) -> TermPattern {
    TermPattern::var(v)
}

fn tp_pred(p: &str) -> TermPattern {
    TermPattern::Term(Term::pred(p))
}

fn tp_str(s: &str) -> TermPattern {
    TermPattern::Term(Term::lit_str(s))
}

fn triple(s: TermPattern, p: TermPattern, o: TermPattern) -> PatternElement {
    PatternElement::Triple(TriplePattern::new(s, p, o))
}

fn filter(var: &str, op: CompareOp, value: Value) -> PatternElement {
    PatternElement::Filter(FilterCond {
        var: var.to_string(),
        op,
        value,
    })
}

/// Right-nests groups into binary unions.
fn union_all(mut groups: Vec<Vec<PatternElement>>) -> Vec<PatternElement> {
    match groups.len() {
        0 => Vec::new(),
        1 => groups.pop().expect("len checked"),
        _ => {
            let first = groups.remove(0);
            vec![PatternElement::Union(first, union_all(groups))]
        }
    }
}

impl<'k> Compiler<'k> {
    fn fresh(&mut self, prefix: &str) -> String {
        self.counter += 1;
        format!("{prefix}{}", self.counter)
    }

    fn invalid(&self, text: &str, message: impl Into<String>) -> SparqlError {
        SparqlError::InvalidValue {
            text: text.to_string(),
            message: message.into(),
        }
    }

    /// Patterns matching attribute facts of `entity_var` under `key` whose
    /// value satisfies `op value`; binds the fact node to the returned var.
    fn attr_condition(
        &mut self,
        entity_var: &str,
        key: &str,
        value: &Value,
        op: CompareOp,
    ) -> (Vec<PatternElement>, String) {
        let f = self.fresh("f");
        let mut out = vec![triple(tp_var(entity_var), tp_pred(key), tp_var(&f))];
        out.extend(self.value_condition(&f, value, op));
        (out, f)
    }

    /// Conditions on a fact/value node `f` for `pred:value`/`pred:unit`.
    /// Attribute value nodes always carry a unit edge for quantities, so a
    /// unit mismatch under `!=` is expressible as a union branch.
    fn value_condition(&mut self, f: &str, value: &Value, op: CompareOp) -> Vec<PatternElement> {
        match value {
            Value::Quantity { magnitude, unit } => {
                let v = self.fresh("v");
                match op {
                    CompareOp::Eq | CompareOp::Lt | CompareOp::Gt => vec![
                        triple(tp_var(f), tp_pred(PRED_UNIT), tp_str(unit)),
                        triple(tp_var(f), tp_pred(PRED_VALUE), tp_var(&v)),
                        filter(&v, op, Value::number(*magnitude)),
                    ],
                    CompareOp::Ne => {
                        let u = self.fresh("u");
                        union_all(vec![
                            vec![
                                triple(tp_var(f), tp_pred(PRED_UNIT), tp_str(unit)),
                                triple(tp_var(f), tp_pred(PRED_VALUE), tp_var(&v)),
                                filter(&v, CompareOp::Ne, Value::number(*magnitude)),
                            ],
                            vec![
                                triple(tp_var(f), tp_pred(PRED_UNIT), tp_var(&u)),
                                filter(&u, CompareOp::Ne, Value::string(unit)),
                            ],
                        ])
                    }
                }
            }
            other => {
                let v = self.fresh("v");
                vec![
                    triple(tp_var(f), tp_pred(PRED_VALUE), tp_var(&v)),
                    filter(&v, op, other.clone()),
                ]
            }
        }
    }

    /// Conditions on a qualifier of fact node `f`: direct literal for
    /// strings, dates, years, and unitless quantities; a nested value node
    /// for quantities with a real unit.
    fn qualifier_condition(
        &mut self,
        f: &str,
        qkey: &str,
        value: &Value,
        op: CompareOp,
    ) -> Vec<PatternElement> {
        match value {
            Value::Quantity { magnitude, unit } if unit != UNITLESS => {
                let qn = self.fresh("q");
                let v = self.fresh("v");
                match op {
                    CompareOp::Eq | CompareOp::Lt | CompareOp::Gt => vec![
                        triple(tp_var(f), tp_pred(qkey), tp_var(&qn)),
                        triple(tp_var(&qn), tp_pred(PRED_UNIT), tp_str(unit)),
                        triple(tp_var(&qn), tp_pred(PRED_VALUE), tp_var(&v)),
                        filter(&v, op, Value::number(*magnitude)),
                    ],
                    CompareOp::Ne => {
                        let qn2 = self.fresh("q");
                        let u = self.fresh("u");
                        let ql = self.fresh("q");
                        union_all(vec![
                            vec![
                                triple(tp_var(f), tp_pred(qkey), tp_var(&qn)),
                                triple(tp_var(&qn), tp_pred(PRED_UNIT), tp_str(unit)),
                                triple(tp_var(&qn), tp_pred(PRED_VALUE), tp_var(&v)),
                                filter(&v, CompareOp::Ne, Value::number(*magnitude)),
                            ],
                            vec![
                                triple(tp_var(f), tp_pred(qkey), tp_var(&qn2)),
                                triple(tp_var(&qn2), tp_pred(PRED_UNIT), tp_var(&u)),
                                filter(&u, CompareOp::Ne, Value::string(unit)),
                            ],
                            // Direct-literal qualifier values: only a
                            // unit-mismatched plain number passes `!=` here.
                            vec![
                                triple(tp_var(f), tp_pred(qkey), tp_var(&ql)),
                                filter(&ql, CompareOp::Ne, value.clone()),
                            ],
                        ])
                    }
                }
            }
            Value::Quantity { magnitude, unit } => {
                // Unitless: stored as a direct literal.
                let qv = self.fresh("q");
                let base = vec![
                    triple(tp_var(f), tp_pred(qkey), tp_var(&qv)),
                    filter(&qv, op, Value::quantity(*magnitude, unit.clone())),
                ];
                match op {
                    CompareOp::Ne => {
                        let qn = self.fresh("q");
                        let u = self.fresh("u");
                        union_all(vec![
                            base,
                            // Any unit-bearing qualifier value differs from a
                            // unitless one.
                            vec![
                                triple(tp_var(f), tp_pred(qkey), tp_var(&qn)),
                                triple(tp_var(&qn), tp_pred(PRED_UNIT), tp_var(&u)),
                                filter(&u, CompareOp::Ne, Value::string(UNITLESS)),
                            ],
                        ])
                    }
                    _ => base,
                }
            }
            other => {
                let qv = self.fresh("q");
                vec![
                    triple(tp_var(f), tp_pred(qkey), tp_var(&qv)),
                    filter(&qv, op, other.clone()),
                ]
            }
        }
    }

    /// FilterConcept: the concept-closure name set, expanded into unions.
    fn concept_condition(&mut self, entity_var: &str, concept: &str) -> Vec<PatternElement> {
        let mut names = self.kb.concept_closure_names(concept.trim());
        if names.is_empty() {
            // Unknown concept: an unsatisfiable exact-name pattern keeps the
            // query well-formed and the result empty.
            names.push(concept.trim().to_string());
        }
        let groups: Vec<Vec<PatternElement>> = names
            .iter()
            .map(|name| {
                let c = self.fresh("c");
                vec![
                    triple(tp_var(entity_var), tp_pred(PRED_INSTANCE_OF), tp_var(&c)),
                    triple(tp_var(&c), tp_pred(PRED_NAME), tp_str(name)),
                ]
            })
            .collect();
        union_all(groups)
    }

    fn parse_typed(&self, function: Function, text: &str) -> Result<Value, SparqlError> {
        match function {
            Function::FilterNum | Function::QFilterNum | Function::VerifyNum => {
                match parse_quantity(text) {
                    Ok(Value::Quantity { magnitude, unit }) => Ok(Value::Quantity {
                        magnitude,
                        unit: self.kb.normalize_unit(&unit),
                    }),
                    _ => Err(self.invalid(text, "expected a number with optional unit")),
                }
            }
            Function::FilterYear | Function::QFilterYear | Function::VerifyYear => {
                parse_year(text).map_err(|e| self.invalid(text, e.to_string()))
            }
            Function::FilterDate | Function::QFilterDate | Function::VerifyDate => {
                parse_date(text).map_err(|e| self.invalid(text, e.to_string()))
            }
            _ => unreachable!("only typed families"),
        }
    }
}

/// Compiles a typechecked program to an equivalent query. The knowledge base
/// supplies the concept tree for closure expansion, key-directed parsing of
/// untyped textual values, and unit normalization.
pub fn compile(kb: &KnowledgeBase, program: &Program) -> Result<SparqlQuery, SparqlError> {
    program
        .typecheck()
        .map_err(|e| SparqlError::Unsupported(format!("program fails typecheck: {e}")))?;
    let mut c = Compiler { kb, counter: 0 };
    let mut frags: Vec<Frag> = Vec::with_capacity(program.len());
    let last = program.len() - 1;

    for (index, call) in program.calls.iter().enumerate() {
        let text = |slot: usize| call.textual_inputs[slot].as_str();
        let is_root = index == last;
        macro_rules! take {
            ($slot:expr) => {
                std::mem::take(&mut frags[call.functional_inputs[$slot]])
            };
        }

        let frag: Frag = match call.function {
            Function::FindAll => {
                let e = c.fresh("e");
                let x = c.fresh("n");
                Frag {
                    patterns: vec![triple(tp_var(&e), tp_pred(PRED_NAME), tp_var(&x))],
                    entity_var: Some(e),
                    fact_var: None,
                }
            }
            Function::Find => {
                let e = c.fresh("e");
                Frag {
                    patterns: vec![triple(tp_var(&e), tp_pred(PRED_NAME), tp_str(text(0).trim()))],
                    entity_var: Some(e),
                    fact_var: None,
                }
            }
            Function::FilterConcept => {
                let mut input = take!(0);
                let e = input.entity_var.clone().expect("entity input");
                input.patterns.extend(c.concept_condition(&e, text(0)));
                Frag {
                    patterns: input.patterns,
                    entity_var: Some(e),
                    fact_var: None,
                }
            }
            Function::FilterStr
            | Function::FilterNum
            | Function::FilterYear
            | Function::FilterDate => {
                let mut input = take!(0);
                let e = input.entity_var.clone().expect("entity input");
                let (value, op) = if call.function == Function::FilterStr {
                    (Value::String(text(1).trim().to_string()), CompareOp::Eq)
                } else {
                    let v = c.parse_typed(call.function, text(1))?;
                    let op = CompareOp::from_token(text(2))
                        .ok_or_else(|| c.invalid(text(2), "bad operator"))?;
                    (v, op)
                };
                let (patterns, f) = c.attr_condition(&e, text(0).trim(), &value, op);
                input.patterns.extend(patterns);
                Frag {
                    patterns: input.patterns,
                    entity_var: Some(e),
                    fact_var: Some(f),
                }
            }
            Function::QFilterStr
            | Function::QFilterNum
            | Function::QFilterYear
            | Function::QFilterDate => {
                let mut input = take!(0);
                let f = input.fact_var.clone().expect("facts input");
                let (value, op) = if call.function == Function::QFilterStr {
                    (Value::String(text(1).trim().to_string()), CompareOp::Eq)
                } else {
                    let v = c.parse_typed(call.function, text(1))?;
                    let op = CompareOp::from_token(text(2))
                        .ok_or_else(|| c.invalid(text(2), "bad operator"))?;
                    (v, op)
                };
                input
                    .patterns
                    .extend(c.qualifier_condition(&f, text(0).trim(), &value, op));
                Frag {
                    patterns: input.patterns,
                    entity_var: input.entity_var,
                    fact_var: Some(f),
                }
            }
            Function::Relate => {
                let mut input = take!(0);
                let e = input.entity_var.clone().expect("entity input");
                let out = c.fresh("e");
                let f = c.fresh("f");
                let (head, tail) = match text(1) {
                    "forward" => (e.clone(), out.clone()),
                    "backward" => (out.clone(), e.clone()),
                    other => return Err(c.invalid(other, "direction")),
                };
                input.patterns.extend([
                    triple(tp_var(&f), tp_pred(PRED_FACT_H), tp_var(&head)),
                    triple(tp_var(&f), tp_pred(PRED_FACT_R), tp_str(text(0).trim())),
                    triple(tp_var(&f), tp_pred(PRED_FACT_T), tp_var(&tail)),
                ]);
                Frag {
                    patterns: input.patterns,
                    entity_var: Some(out),
                    fact_var: Some(f),
                }
            }
            Function::And => {
                let a = take!(0);
                let mut b = take!(1);
                let av = a.entity_var.clone().expect("entity input");
                let bv = b.entity_var.clone().expect("entity input");
                rename_var(&mut b.patterns, &bv, &av);
                let mut patterns = a.patterns;
                patterns.extend(b.patterns);
                Frag {
                    patterns,
                    entity_var: Some(av),
                    fact_var: None,
                }
            }
            Function::Or => {
                let a = take!(0);
                let mut b = take!(1);
                let av = a.entity_var.clone().expect("entity input");
                let bv = b.entity_var.clone().expect("entity input");
                rename_var(&mut b.patterns, &bv, &av);
                Frag {
                    patterns: vec![PatternElement::Union(a.patterns, b.patterns)],
                    entity_var: Some(av),
                    fact_var: None,
                }
            }
            Function::QueryName | Function::Count => {
                let input = take!(0);
                let e = input.entity_var.clone().expect("entity input");
                let form = if call.function == Function::Count {
                    QueryForm::SelectCount
                } else {
                    QueryForm::Select
                };
                return finish(
                    SparqlQuery {
                        form,
                        projection: Some(e),
                        patterns: input.patterns,
                        order_by: None,
                        limit: None,
                        distinct: true,
                    },
                    is_root,
                );
            }
            Function::QueryAttr => {
                let mut input = take!(0);
                let e = input.entity_var.clone().expect("entity input");
                let f = c.fresh("f");
                input
                    .patterns
                    .push(triple(tp_var(&e), tp_pred(text(0).trim()), tp_var(&f)));
                // Non-root QueryAttr feeds a Verify; the fact node carries it.
                if is_root {
                    return finish(
                        SparqlQuery {
                            form: QueryForm::Select,
                            projection: Some(f),
                            patterns: input.patterns,
                            order_by: None,
                            limit: None,
                            distinct: true,
                        },
                        true,
                    );
                }
                Frag {
                    patterns: input.patterns,
                    entity_var: Some(e),
                    fact_var: Some(f),
                }
            }
            Function::QueryAttrUnderCondition => {
                let mut input = take!(0);
                let e = input.entity_var.clone().expect("entity input");
                let f = c.fresh("f");
                input
                    .patterns
                    .push(triple(tp_var(&e), tp_pred(text(0).trim()), tp_var(&f)));
                let qvalue = kb.parse_qual_value(text(1).trim(), text(2));
                input
                    .patterns
                    .extend(c.qualifier_condition(&f, text(1).trim(), &qvalue, CompareOp::Eq));
                if is_root {
                    return finish(
                        SparqlQuery {
                            form: QueryForm::Select,
                            projection: Some(f),
                            patterns: input.patterns,
                            order_by: None,
                            limit: None,
                            distinct: true,
                        },
                        true,
                    );
                }
                Frag {
                    patterns: input.patterns,
                    entity_var: Some(e),
                    fact_var: Some(f),
                }
            }
            Function::QueryRelation => {
                let a = take!(0);
                let b = take!(1);
                let av = a.entity_var.clone().expect("entity input");
                let bv = b.entity_var.clone().expect("entity input");
                let p = c.fresh("p");
                let mut patterns = a.patterns;
                patterns.extend(b.patterns);
                patterns.push(triple(tp_var(&av), tp_var(&p), tp_var(&bv)));
                return finish(
                    SparqlQuery {
                        form: QueryForm::Select,
                        projection: Some(p),
                        patterns,
                        order_by: None,
                        limit: None,
                        distinct: true,
                    },
                    is_root,
                );
            }
            Function::SelectBetween | Function::SelectAmong => {
                let (mut patterns, e) = if call.function == Function::SelectBetween {
                    let a = take!(0);
                    let mut b = take!(1);
                    let av = a.entity_var.clone().expect("entity input");
                    let bv = b.entity_var.clone().expect("entity input");
                    let merged = c.fresh("e");
                    let mut ap = a.patterns;
                    rename_var(&mut ap, &av, &merged);
                    rename_var(&mut b.patterns, &bv, &merged);
                    (vec![PatternElement::Union(ap, b.patterns)], merged)
                } else {
                    let input = take!(0);
                    let e = input.entity_var.clone().expect("entity input");
                    (input.patterns, e)
                };
                let f = c.fresh("f");
                let v = c.fresh("v");
                patterns.extend([
                    triple(tp_var(&e), tp_pred(text(0).trim()), tp_var(&f)),
                    triple(tp_var(&f), tp_pred(PRED_VALUE), tp_var(&v)),
                ]);
                let dir = match (call.function, text(1)) {
                    (Function::SelectBetween, "greater") | (Function::SelectAmong, "largest") => {
                        SortDir::Desc
                    }
                    (Function::SelectBetween, "less") | (Function::SelectAmong, "smallest") => {
                        SortDir::Asc
                    }
                    (_, other) => return Err(c.invalid(other, "selection operator")),
                };
                return finish(
                    SparqlQuery {
                        form: QueryForm::Select,
                        projection: Some(e),
                        patterns,
                        order_by: Some((v, dir)),
                        limit: Some(1),
                        distinct: true,
                    },
                    is_root,
                );
            }
            Function::VerifyStr
            | Function::VerifyNum
            | Function::VerifyYear
            | Function::VerifyDate => {
                let input = take!(0);
                let f = input.fact_var.clone().expect("value input");
                let (value, op) = if call.function == Function::VerifyStr {
                    (Value::String(text(0).trim().to_string()), CompareOp::Eq)
                } else {
                    let v = c.parse_typed(call.function, text(0))?;
                    let op = CompareOp::from_token(text(1))
                        .ok_or_else(|| c.invalid(text(1), "bad operator"))?;
                    (v, op)
                };
                let mut patterns = input.patterns;
                patterns.extend(c.value_condition(&f, &value, op));
                return finish(
                    SparqlQuery {
                        form: QueryForm::Ask,
                        projection: None,
                        patterns,
                        order_by: None,
                        limit: None,
                        distinct: false,
                    },
                    is_root,
                );
            }
            Function::QueryAttrQualifier => {
                let mut input = take!(0);
                let e = input.entity_var.clone().expect("entity input");
                let f = c.fresh("f");
                input
                    .patterns
                    .push(triple(tp_var(&e), tp_pred(text(0).trim()), tp_var(&f)));
                let value = kb.parse_attr_value(text(0).trim(), text(1));
                input.patterns.extend(c.value_condition(&f, &value, CompareOp::Eq));
                let qv = c.fresh("q");
                input
                    .patterns
                    .push(triple(tp_var(&f), tp_pred(text(2).trim()), tp_var(&qv)));
                return finish(
                    SparqlQuery {
                        form: QueryForm::Select,
                        projection: Some(qv),
                        patterns: input.patterns,
                        order_by: None,
                        limit: None,
                        distinct: true,
                    },
                    is_root,
                );
            }
            Function::QueryRelationQualifier => {
                let a = take!(0);
                let b = take!(1);
                let av = a.entity_var.clone().expect("entity input");
                let bv = b.entity_var.clone().expect("entity input");
                let f = c.fresh("f");
                let qv = c.fresh("q");
                let mut patterns = a.patterns;
                patterns.extend(b.patterns);
                patterns.extend([
                    triple(tp_var(&f), tp_pred(PRED_FACT_H), tp_var(&av)),
                    triple(tp_var(&f), tp_pred(PRED_FACT_R), tp_str(text(0).trim())),
                    triple(tp_var(&f), tp_pred(PRED_FACT_T), tp_var(&bv)),
                    triple(tp_var(&f), tp_pred(text(1).trim()), tp_var(&qv)),
                ]);
                return finish(
                    SparqlQuery {
                        form: QueryForm::Select,
                        projection: Some(qv),
                        patterns,
                        order_by: None,
                        limit: None,
                        distinct: true,
                    },
                    is_root,
                );
            }
        };
        frags.push(frag);
    }
    unreachable!("typecheck guarantees a terminal root call")
}

fn finish(q: SparqlQuery, is_root: bool) -> Result<SparqlQuery, SparqlError> {
    if !is_root {
        return Err(SparqlError::Unsupported(
            "terminal call in non-root position".into(),
        ));
    }
    q.validate()?;
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;
    use crate::sparql::eval::{answers, evaluate};

    fn compile_text(text: &str) -> SparqlQuery {
        let kb = fixture::nba_mini();
        let p = Program::parse_text(text).unwrap();
        compile(&kb, &p).unwrap()
    }

    fn run_answers(text: &str) -> Vec<String> {
        let kb = fixture::nba_mini();
        let p = Program::parse_text(text).unwrap();
        let q = compile(&kb, &p).unwrap();
        let outcome = evaluate(&kb, &q).unwrap();
        answers(&kb, &q, &outcome)
    }

    #[test]
    fn target_entity_query_compiles_and_evaluates() {
        let rows = run_answers(
            "Find <arg> LeBron James <func> Relate <arg> drafted by <arg> forward <func> FilterConcept <arg> team <func> QueryName",
        );
        assert_eq!(rows, vec!["Cleveland Cavaliers"]);
    }

    #[test]
    fn concept_closure_is_expanded_as_union() {
        let q = compile_text("FindAll <func> FilterConcept <arg> team <func> Count");
        // team has the subclass basketball team: two union branches.
        let has_union = q
            .patterns
            .iter()
            .any(|el| matches!(el, PatternElement::Union(_, _)));
        assert!(has_union, "closure should expand to a union: {q:?}");
        let kb = fixture::nba_mini();
        let outcome = evaluate(&kb, &q).unwrap();
        assert_eq!(answers(&kb, &q, &outcome), vec!["1"]);
    }

    #[test]
    fn count_query_counts_distinct_entities() {
        let rows = run_answers("FindAll <func> FilterConcept <arg> athlete <func> Count");
        assert_eq!(rows, vec!["2"]);
    }

    #[test]
    fn verify_compiles_to_ask() {
        let q = compile_text(
            "Find <arg> LeBron James <func> QueryAttr <arg> height <func> VerifyNum <arg> 180 centimetres <arg> >",
        );
        assert_eq!(q.form, QueryForm::Ask);
        let kb = fixture::nba_mini();
        let outcome = evaluate(&kb, &q).unwrap();
        assert_eq!(answers(&kb, &q, &outcome), vec!["yes"]);
    }

    #[test]
    fn ne_quantity_filter_matches_mismatched_units() {
        // Heights are in centimetres; a metre-valued != filter keeps both
        // players via the unit-mismatch branch.
        let rows = run_answers(
            "FindAll <func> FilterNum <arg> height <arg> 2 metres <arg> != <func> Count",
        );
        assert_eq!(rows, vec!["2"]);
    }

    #[test]
    fn qualifier_queries_project_qualifier_values() {
        let rows = run_answers(
            "Find <arg> LeBron James <func> Find <arg> Cleveland Cavaliers <func> QueryRelationQualifier <arg> drafted by <arg> point in time",
        );
        assert_eq!(rows, vec!["2003"]);
        let rows = run_answers(
            "Find <arg> Akron <func> QueryAttrQualifier <arg> population <arg> 199110 <arg> point in time",
        );
        assert_eq!(rows, vec!["2010"]);
    }

    #[test]
    fn select_among_orders_and_limits() {
        let q = compile_text(
            "FindAll <func> FilterConcept <arg> basketball player <func> SelectAmong <arg> height <arg> largest",
        );
        assert_eq!(q.limit, Some(1));
        assert!(matches!(q.order_by, Some((_, SortDir::Desc))));
        let kb = fixture::nba_mini();
        let outcome = evaluate(&kb, &q).unwrap();
        assert_eq!(answers(&kb, &q, &outcome), vec!["LeBron James"]);
    }

    #[test]
    fn select_between_unions_both_sides() {
        let rows = run_answers(
            "Find <arg> LeBron James Jr. <func> Find <arg> LeBron James <func> SelectBetween <arg> height <arg> greater",
        );
        assert_eq!(rows, vec!["LeBron James"]);
        let rows = run_answers(
            "Find <arg> LeBron James Jr. <func> Find <arg> LeBron James <func> SelectBetween <arg> height <arg> less",
        );
        assert_eq!(rows, vec!["LeBron James Jr."]);
    }

    #[test]
    fn query_attr_under_condition_selects_the_qualified_value() {
        let rows = run_answers(
            "Find <arg> Akron <func> QueryAttrUnderCondition <arg> population <arg> point in time <arg> 2010",
        );
        assert_eq!(rows, vec!["199110"]);
    }

    #[test]
    fn or_compiles_to_union() {
        let rows = run_answers(
            "Find <arg> Akron <func> Find <arg> Cleveland <func> Or <func> Count",
        );
        assert_eq!(rows, vec!["2"]);
    }

    #[test]
    fn query_relation_uses_predicate_variable() {
        let rows = run_answers(
            "Find <arg> LeBron James <func> Find <arg> Akron <func> QueryRelation",
        );
        assert_eq!(rows, vec!["place of birth"]);
    }
}
