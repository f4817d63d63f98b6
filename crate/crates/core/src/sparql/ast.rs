//! Abstract syntax of the SPARQL subset: conjunctive triple patterns, value
//! filters, binary unions, and an optional order/limit tail.

use std::collections::BTreeSet;

use rand::Rng;

use crate::triples::Term;
use crate::value::{CompareOp, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TermPattern {
    Var(String),
    Term(Term),
}

impl TermPattern {
    pub fn var(name: impl Into<String>) -> Self {
        TermPattern::Var(name.into())
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            TermPattern::Var(v) => Some(v),
            TermPattern::Term(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriplePattern {
    pub subject: TermPattern,
    pub predicate: TermPattern,
    pub object: TermPattern,
}

impl TriplePattern {
    pub fn new(subject: TermPattern, predicate: TermPattern, object: TermPattern) -> Self {
        TriplePattern {
            subject,
            predicate,
            object,
        }
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        [&self.subject, &self.predicate, &self.object]
            .into_iter()
            .filter_map(TermPattern::as_var)
    }
}

/// `FILTER ( ?var op literal )`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterCond {
    pub var: String,
    pub op: CompareOp,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PatternElement {
    Triple(TriplePattern),
    Filter(FilterCond),
    Union(Vec<PatternElement>, Vec<PatternElement>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryForm {
    Select,
    SelectCount,
    Ask,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SortDir {
    Asc,
    Desc,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparqlQuery {
    pub form: QueryForm,
    /// The projected variable; `None` only for ASK.
    pub projection: Option<String>,
    pub patterns: Vec<PatternElement>,
    pub order_by: Option<(String, SortDir)>,
    pub limit: Option<usize>,
    pub distinct: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SparqlError {
    #[error("variable ?{0} is never bound by a triple pattern")]
    UnboundVariable(String),
    #[error("outside the supported subset at {position}: {message}")]
    SubsetViolation { position: String, message: String },
    #[error("no droppable condition clause")]
    NothingDroppable,
    #[error("unsupported program construct: {0}")]
    Unsupported(String),
    #[error("invalid textual value {text:?}: {message}")]
    InvalidValue { text: String, message: String },
}

/// Variables certainly bound by these elements: triples bind their variables,
/// a union binds the intersection of its branches.
fn bound_vars(elements: &[PatternElement]) -> BTreeSet<String> {
    let mut bound = BTreeSet::new();
    for el in elements {
        match el {
            PatternElement::Triple(t) => bound.extend(t.vars().map(str::to_string)),
            PatternElement::Filter(_) => {}
            PatternElement::Union(a, b) => {
                let ba = bound_vars(a);
                let bb = bound_vars(b);
                bound.extend(ba.intersection(&bb).cloned());
            }
        }
    }
    bound
}

fn check_filters(
    elements: &[PatternElement],
    inherited: &BTreeSet<String>,
) -> Result<(), SparqlError> {
    let mut scope = inherited.clone();
    scope.extend(bound_vars(elements));
    for el in elements {
        match el {
            PatternElement::Filter(f) => {
                if !scope.contains(&f.var) {
                    return Err(SparqlError::UnboundVariable(f.var.clone()));
                }
            }
            PatternElement::Union(a, b) => {
                check_filters(a, &scope)?;
                check_filters(b, &scope)?;
            }
            PatternElement::Triple(_) => {}
        }
    }
    Ok(())
}

impl SparqlQuery {
    /// Checks the boundness invariants: the projected and ordering variables
    /// appear in some triple pattern on every path, and every filter
    /// references a variable bound in its scope.
    pub fn validate(&self) -> Result<(), SparqlError> {
        let bound = bound_vars(&self.patterns);
        if let Some(p) = &self.projection {
            if !bound.contains(p) {
                return Err(SparqlError::UnboundVariable(p.clone()));
            }
        }
        if self.form != QueryForm::Ask && self.projection.is_none() {
            return Err(SparqlError::SubsetViolation {
                position: "query".into(),
                message: "SELECT requires a projected variable".into(),
            });
        }
        if let Some((v, _)) = &self.order_by {
            if !bound.contains(v) {
                return Err(SparqlError::UnboundVariable(v.clone()));
            }
        }
        check_filters(&self.patterns, &BTreeSet::new())
    }

    /// True when removing the top-level element at `index` leaves a valid
    /// query: a dropped clause must not unbind the projection, ordering, or
    /// any remaining filter variable.
    fn droppable(&self, index: usize) -> bool {
        let mut reduced = self.clone();
        reduced.patterns.remove(index);
        if reduced.patterns.is_empty() {
            return false;
        }
        reduced.validate().is_ok()
    }

    pub fn droppable_indices(&self) -> Vec<usize> {
        (0..self.patterns.len()).filter(|i| self.droppable(*i)).collect()
    }
}

/// The golden query with one condition clause removed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbridgedQuery {
    pub base: SparqlQuery,
    pub dropped_index: usize,
}

impl AbridgedQuery {
    pub fn query(&self) -> SparqlQuery {
        let mut q = self.base.clone();
        q.patterns.remove(self.dropped_index);
        q
    }
}

/// Uniformly drops one droppable condition clause.
pub fn abridge(q: &SparqlQuery, rng: &mut impl Rng) -> Result<AbridgedQuery, SparqlError> {
    let candidates = q.droppable_indices();
    if candidates.is_empty() {
        return Err(SparqlError::NothingDroppable);
    }
    let dropped_index = candidates[rng.gen_range(0..candidates.len())];
    Ok(AbridgedQuery {
        base: q.clone(),
        dropped_index,
    })
}

/// Renames every occurrence of variable `from` to `to` in a pattern list.
pub fn rename_var(elements: &mut [PatternElement], from: &str, to: &str) {
    fn fix(tp: &mut TermPattern, from: &str, to: &str) {
        if let TermPattern::Var(v) = tp {
            if v == from {
                *v = to.to_string();
            }
        }
    }
    for el in elements {
        match el {
            PatternElement::Triple(t) => {
                fix(&mut t.subject, from, to);
                fix(&mut t.predicate, from, to);
                fix(&mut t.object, from, to);
            }
            PatternElement::Filter(f) => {
                if f.var == from {
                    f.var = to.to_string();
                }
            }
            PatternElement::Union(a, b) => {
                rename_var(a, from, to);
                rename_var(b, from, to);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::triples::PRED_NAME;

    fn name_pattern(entity_var: &str, name: &str) -> PatternElement {
        PatternElement::Triple(TriplePattern::new(
            TermPattern::var(entity_var),
            TermPattern::Term(Term::pred(PRED_NAME)),
            TermPattern::Term(Term::lit_str(name)),
        ))
    }

    fn select(projection: &str, patterns: Vec<PatternElement>) -> SparqlQuery {
        SparqlQuery {
            form: QueryForm::Select,
            projection: Some(projection.into()),
            patterns,
            order_by: None,
            limit: None,
            distinct: true,
        }
    }

    #[test]
    fn unbound_projection_rejected() {
        let q = select("x", vec![name_pattern("e", "A")]);
        assert_eq!(q.validate(), Err(SparqlError::UnboundVariable("x".into())));
    }

    #[test]
    fn filter_on_union_bound_var_is_ok() {
        let q = select(
            "e",
            vec![
                PatternElement::Union(
                    vec![name_pattern("e", "A")],
                    vec![name_pattern("e", "B")],
                ),
                PatternElement::Filter(FilterCond {
                    var: "e".into(),
                    op: CompareOp::Ne,
                    value: Value::string("A"),
                }),
            ],
        );
        assert!(q.validate().is_ok());
    }

    #[test]
    fn single_condition_query_has_nothing_droppable() {
        let q = select("e", vec![name_pattern("e", "A")]);
        let mut rng = rand::rngs::mock::StepRng::new(0, 1);
        assert_eq!(abridge(&q, &mut rng), Err(SparqlError::NothingDroppable));
    }

    #[test]
    fn abridge_is_deterministic_under_a_seed() {
        use rand::SeedableRng;
        let q = select(
            "e",
            vec![
                name_pattern("e", "A"),
                PatternElement::Triple(TriplePattern::new(
                    TermPattern::var("e"),
                    TermPattern::Term(Term::pred("height")),
                    TermPattern::var("f"),
                )),
                PatternElement::Triple(TriplePattern::new(
                    TermPattern::var("e"),
                    TermPattern::Term(Term::pred("gender")),
                    TermPattern::var("g"),
                )),
            ],
        );
        let a = abridge(&q, &mut rand_chacha::ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = abridge(&q, &mut rand_chacha::ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.query().patterns.len(), 2);
    }

    #[test]
    fn dropping_never_unbinds_a_filtered_var() {
        let q = SparqlQuery {
            form: QueryForm::Select,
            projection: Some("e".into()),
            patterns: vec![
                name_pattern("e", "A"),
                PatternElement::Triple(TriplePattern::new(
                    TermPattern::var("e"),
                    TermPattern::Term(Term::pred("height")),
                    TermPattern::var("v"),
                )),
                PatternElement::Filter(FilterCond {
                    var: "v".into(),
                    op: CompareOp::Gt,
                    value: Value::number(100.0),
                }),
            ],
            order_by: None,
            limit: None,
            distinct: true,
        };
        // Dropping the height triple would leave FILTER(?v …) unbound, so
        // only the name triple and the filter itself qualify.
        let droppable = q.droppable_indices();
        assert_eq!(droppable, vec![0, 2]);
    }
}
