//! Program representation: typed ASTs over the 27-function library, the flat
//! `<func>`/`<arg>` text form, the structured JSON form, and typechecking.
//!
//! A program is a post-order-serialized binary tree: each call's functional
//! inputs are indices of earlier calls, every non-root call is consumed
//! exactly once, and the last call is the root.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::value::CompareOp;

/// The function library. Ordering matters nowhere; names are the wire form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Function {
    FindAll,
    Find,
    FilterConcept,
    FilterStr,
    FilterNum,
    FilterYear,
    FilterDate,
    QFilterStr,
    QFilterNum,
    QFilterYear,
    QFilterDate,
    Relate,
    And,
    Or,
    QueryName,
    Count,
    QueryAttr,
    QueryAttrUnderCondition,
    QueryRelation,
    SelectBetween,
    SelectAmong,
    VerifyStr,
    VerifyNum,
    VerifyYear,
    VerifyDate,
    QueryAttrQualifier,
    QueryRelationQualifier,
}

pub const ALL_FUNCTIONS: [Function; 27] = [
    Function::FindAll,
    Function::Find,
    Function::FilterConcept,
    Function::FilterStr,
    Function::FilterNum,
    Function::FilterYear,
    Function::FilterDate,
    Function::QFilterStr,
    Function::QFilterNum,
    Function::QFilterYear,
    Function::QFilterDate,
    Function::Relate,
    Function::And,
    Function::Or,
    Function::QueryName,
    Function::Count,
    Function::QueryAttr,
    Function::QueryAttrUnderCondition,
    Function::QueryRelation,
    Function::SelectBetween,
    Function::SelectAmong,
    Function::VerifyStr,
    Function::VerifyNum,
    Function::VerifyYear,
    Function::VerifyDate,
    Function::QueryAttrQualifier,
    Function::QueryRelationQualifier,
];

/// Kind of data flowing between calls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum DataKind {
    Entities,
    EntitiesWithFacts,
    Value,
    String,
    Number,
    Boolean,
    Predicate,
}

impl fmt::Display for DataKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DataKind::Entities => "ENTITIES",
            DataKind::EntitiesWithFacts => "ENTITIES_WITH_FACTS",
            DataKind::Value => "VALUE",
            DataKind::String => "STRING",
            DataKind::Number => "NUMBER",
            DataKind::Boolean => "BOOLEAN",
            DataKind::Predicate => "PREDICATE",
        };
        f.write_str(s)
    }
}

impl DataKind {
    /// Entities-with-facts degrades to a bare entity set wherever one is
    /// expected; nothing else converts.
    pub fn accepts(expected: DataKind, found: DataKind) -> bool {
        expected == found
            || (expected == DataKind::Entities && found == DataKind::EntitiesWithFacts)
    }
}

/// Signature row: functional input kinds, textual arity, output kind.
pub struct Signature {
    pub inputs: &'static [DataKind],
    pub textual: usize,
    pub output: DataKind,
}

impl Function {
    pub fn name(self) -> &'static str {
        match self {
            Function::FindAll => "FindAll",
            Function::Find => "Find",
            Function::FilterConcept => "FilterConcept",
            Function::FilterStr => "FilterStr",
            Function::FilterNum => "FilterNum",
            Function::FilterYear => "FilterYear",
            Function::FilterDate => "FilterDate",
            Function::QFilterStr => "QFilterStr",
            Function::QFilterNum => "QFilterNum",
            Function::QFilterYear => "QFilterYear",
            Function::QFilterDate => "QFilterDate",
            Function::Relate => "Relate",
            Function::And => "And",
            Function::Or => "Or",
            Function::QueryName => "QueryName",
            Function::Count => "Count",
            Function::QueryAttr => "QueryAttr",
            Function::QueryAttrUnderCondition => "QueryAttrUnderCondition",
            Function::QueryRelation => "QueryRelation",
            Function::SelectBetween => "SelectBetween",
            Function::SelectAmong => "SelectAmong",
            Function::VerifyStr => "VerifyStr",
            Function::VerifyNum => "VerifyNum",
            Function::VerifyYear => "VerifyYear",
            Function::VerifyDate => "VerifyDate",
            Function::QueryAttrQualifier => "QueryAttrQualifier",
            Function::QueryRelationQualifier => "QueryRelationQualifier",
        }
    }

    pub fn from_name(name: &str) -> Option<Function> {
        ALL_FUNCTIONS.iter().copied().find(|f| f.name() == name)
    }

    pub fn signature(self) -> Signature {
        use DataKind as K;
        macro_rules! sig {
            ($inputs:expr, $textual:expr, $output:expr) => {
                Signature {
                    inputs: $inputs,
                    textual: $textual,
                    output: $output,
                }
            };
        }
        match self {
            Function::FindAll => sig!(&[], 0, K::Entities),
            Function::Find => sig!(&[], 1, K::Entities),
            Function::FilterConcept => sig!(&[K::Entities], 1, K::Entities),
            Function::FilterStr => sig!(&[K::Entities], 2, K::EntitiesWithFacts),
            Function::FilterNum | Function::FilterYear | Function::FilterDate => {
                sig!(&[K::Entities], 3, K::EntitiesWithFacts)
            }
            Function::QFilterStr => sig!(&[K::EntitiesWithFacts], 2, K::EntitiesWithFacts),
            Function::QFilterNum | Function::QFilterYear | Function::QFilterDate => {
                sig!(&[K::EntitiesWithFacts], 3, K::EntitiesWithFacts)
            }
            Function::Relate => sig!(&[K::Entities], 2, K::EntitiesWithFacts),
            Function::And | Function::Or => sig!(&[K::Entities, K::Entities], 0, K::Entities),
            Function::QueryName => sig!(&[K::Entities], 0, K::String),
            Function::Count => sig!(&[K::Entities], 0, K::Number),
            Function::QueryAttr => sig!(&[K::Entities], 1, K::Value),
            Function::QueryAttrUnderCondition => sig!(&[K::Entities], 3, K::Value),
            Function::QueryRelation => sig!(&[K::Entities, K::Entities], 0, K::Predicate),
            Function::SelectBetween => sig!(&[K::Entities, K::Entities], 2, K::String),
            Function::SelectAmong => sig!(&[K::Entities], 2, K::String),
            Function::VerifyStr => sig!(&[K::Value], 1, K::Boolean),
            Function::VerifyNum | Function::VerifyYear | Function::VerifyDate => {
                sig!(&[K::Value], 2, K::Boolean)
            }
            Function::QueryAttrQualifier => sig!(&[K::Entities], 3, K::Value),
            Function::QueryRelationQualifier => sig!(&[K::Entities, K::Entities], 2, K::Value),
        }
    }

    pub fn functional_arity(self) -> usize {
        self.signature().inputs.len()
    }

    pub fn is_verify(self) -> bool {
        matches!(
            self,
            Function::VerifyStr | Function::VerifyNum | Function::VerifyYear | Function::VerifyDate
        )
    }

    pub fn is_attribute_filter(self) -> bool {
        matches!(
            self,
            Function::FilterStr | Function::FilterNum | Function::FilterYear | Function::FilterDate
        )
    }

    pub fn is_qualifier_filter(self) -> bool {
        matches!(
            self,
            Function::QFilterStr
                | Function::QFilterNum
                | Function::QFilterYear
                | Function::QFilterDate
        )
    }

    pub fn touches_qualifiers(self) -> bool {
        self.is_qualifier_filter()
            || matches!(
                self,
                Function::QueryAttrUnderCondition
                    | Function::QueryAttrQualifier
                    | Function::QueryRelationQualifier
            )
    }
}

impl fmt::Display for Function {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One step of a program.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FunctionCall {
    pub function: Function,
    /// The textual arguments, kept verbatim.
    pub textual_inputs: Vec<String>,
    /// Indices of the earlier calls whose outputs feed this one.
    pub functional_inputs: Vec<usize>,
}

impl FunctionCall {
    pub fn new(
        function: Function,
        textual_inputs: impl IntoIterator<Item = impl Into<String>>,
        functional_inputs: impl IntoIterator<Item = usize>,
    ) -> Self {
        FunctionCall {
            function,
            textual_inputs: textual_inputs.into_iter().map(Into::into).collect(),
            functional_inputs: functional_inputs.into_iter().collect(),
        }
    }
}

/// An ordered list of calls forming a post-order-serialized binary tree.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Program {
    pub calls: Vec<FunctionCall>,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum ProgramError {
    #[error("unknown function {0:?}")]
    UnknownFunction(String),
    #[error("arity mismatch at call {index} ({function}): {message}")]
    ArityMismatch {
        index: usize,
        function: String,
        message: String,
    },
    #[error("empty program")]
    EmptyProgram,
    #[error("call {index} is not in post order: {message}")]
    NotPostOrder { index: usize, message: String },
    #[error("program json malformed: {0}")]
    MalformedJson(String),
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum TypeError {
    #[error("kind mismatch at call {index}: expected {expected}, found {found}")]
    KindMismatch {
        index: usize,
        expected: DataKind,
        found: DataKind,
    },
    #[error("bad token at call {index}: {argument:?} not in {domain}")]
    BadToken {
        index: usize,
        argument: String,
        domain: &'static str,
    },
    #[error("root kind {found} is not a terminal answer kind")]
    BadRootKind { found: DataKind },
}

pub const FUNC_SEP: &str = "<func>";
pub const ARG_SEP: &str = "<arg>";

impl Program {
    pub fn new(calls: Vec<FunctionCall>) -> Result<Self, ProgramError> {
        let p = Program { calls };
        p.validate()?;
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.calls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.calls.is_empty()
    }

    pub fn root(&self) -> &FunctionCall {
        self.calls.last().expect("programs are non-empty")
    }

    /// Structural validation: known arities, strictly-earlier dependencies,
    /// and post-order stack discipline (each call consumes the operands on
    /// top of the stack, every non-root call is consumed exactly once).
    pub fn validate(&self) -> Result<(), ProgramError> {
        if self.calls.is_empty() {
            return Err(ProgramError::EmptyProgram);
        }
        let mut stack: Vec<usize> = Vec::new();
        for (i, call) in self.calls.iter().enumerate() {
            let arity = call.function.functional_arity();
            if call.functional_inputs.len() != arity {
                return Err(ProgramError::ArityMismatch {
                    index: i,
                    function: call.function.name().to_string(),
                    message: format!(
                        "takes {arity} functional input(s), has {}",
                        call.functional_inputs.len()
                    ),
                });
            }
            let texts = call.function.signature().textual;
            if call.textual_inputs.len() != texts {
                return Err(ProgramError::ArityMismatch {
                    index: i,
                    function: call.function.name().to_string(),
                    message: format!(
                        "takes {texts} textual input(s), has {}",
                        call.textual_inputs.len()
                    ),
                });
            }
            if stack.len() < arity {
                return Err(ProgramError::NotPostOrder {
                    index: i,
                    message: format!("needs {arity} operand(s), {} available", stack.len()),
                });
            }
            let operands: Vec<usize> = stack.split_off(stack.len() - arity);
            if call.functional_inputs != operands {
                return Err(ProgramError::NotPostOrder {
                    index: i,
                    message: format!(
                        "dependencies {:?} do not match pending operands {:?}",
                        call.functional_inputs, operands
                    ),
                });
            }
            stack.push(i);
        }
        if stack.len() != 1 {
            return Err(ProgramError::NotPostOrder {
                index: self.calls.len() - 1,
                message: format!("{} unconsumed result(s) besides the root", stack.len() - 1),
            });
        }
        Ok(())
    }

    /// Parses the flat text form:
    /// `Find <arg> LeBron James <func> Relate <arg> drafted by <arg> forward …`
    pub fn parse_text(s: &str) -> Result<Self, ProgramError> {
        let s = s.trim();
        if s.is_empty() {
            return Err(ProgramError::EmptyProgram);
        }
        let mut calls = Vec::new();
        let mut stack: Vec<usize> = Vec::new();
        for (i, chunk) in s.split(FUNC_SEP).enumerate() {
            let mut parts = chunk.split(ARG_SEP);
            let name = parts.next().unwrap_or("").trim();
            if name.is_empty() {
                return Err(ProgramError::ArityMismatch {
                    index: i,
                    function: String::new(),
                    message: "missing function name".into(),
                });
            }
            let function = Function::from_name(name)
                .ok_or_else(|| ProgramError::UnknownFunction(name.to_string()))?;
            let textual_inputs: Vec<String> = parts.map(|a| a.trim().to_string()).collect();
            let arity = function.functional_arity();
            if stack.len() < arity {
                return Err(ProgramError::ArityMismatch {
                    index: i,
                    function: function.name().to_string(),
                    message: format!(
                        "needs {arity} earlier result(s), {} available",
                        stack.len()
                    ),
                });
            }
            let functional_inputs = stack.split_off(stack.len() - arity);
            stack.push(calls.len());
            calls.push(FunctionCall {
                function,
                textual_inputs,
                functional_inputs,
            });
        }
        if stack.len() != 1 {
            return Err(ProgramError::ArityMismatch {
                index: calls.len().saturating_sub(1),
                function: calls.last().map(|c| c.function.name().to_string()).unwrap_or_default(),
                message: format!("{} leftover operand(s)", stack.len() - 1),
            });
        }
        Program::new(calls)
    }

    /// Inverse of [`Program::parse_text`]; textual inputs are emitted verbatim.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (i, call) in self.calls.iter().enumerate() {
            if i > 0 {
                out.push(' ');
                out.push_str(FUNC_SEP);
                out.push(' ');
            }
            out.push_str(call.function.name());
            for a in &call.textual_inputs {
                out.push(' ');
                out.push_str(ARG_SEP);
                out.push(' ');
                out.push_str(a);
            }
        }
        out
    }

    /// Structured JSON form: an array of
    /// `{"function": …, "inputs": […], "dependencies": […]}` records.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.calls
                .iter()
                .map(|c| {
                    serde_json::json!({
                        "function": c.function.name(),
                        "inputs": c.textual_inputs,
                        "dependencies": c.functional_inputs,
                    })
                })
                .collect(),
        )
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self, ProgramError> {
        #[derive(Deserialize)]
        struct Rec {
            function: String,
            #[serde(default)]
            inputs: Vec<String>,
            #[serde(default)]
            dependencies: Vec<usize>,
        }
        let recs: Vec<Rec> = serde_json::from_value(v.clone())
            .map_err(|e| ProgramError::MalformedJson(e.to_string()))?;
        let calls = recs
            .into_iter()
            .map(|r| {
                let function = Function::from_name(&r.function)
                    .ok_or_else(|| ProgramError::UnknownFunction(r.function.clone()))?;
                Ok(FunctionCall {
                    function,
                    textual_inputs: r.inputs,
                    functional_inputs: r.dependencies,
                })
            })
            .collect::<Result<Vec<_>, ProgramError>>()?;
        Program::new(calls)
    }

    pub fn from_json_str(s: &str) -> Result<Self, ProgramError> {
        let v: serde_json::Value = serde_json::from_str(s)
            .map_err(|e| ProgramError::MalformedJson(e.to_string()))?;
        Program::from_json(&v)
    }

    /// Assigns each call its output kind; checks functional input kinds and
    /// enumerated textual domains; requires a terminal root kind.
    pub fn typecheck(&self) -> Result<Vec<DataKind>, TypeError> {
        let mut kinds: Vec<DataKind> = Vec::with_capacity(self.calls.len());
        for (index, call) in self.calls.iter().enumerate() {
            let sig = call.function.signature();
            for (slot, &dep) in call.functional_inputs.iter().enumerate() {
                let found = kinds[dep];
                let expected = sig.inputs[slot];
                if !DataKind::accepts(expected, found) {
                    return Err(TypeError::KindMismatch {
                        index,
                        expected,
                        found,
                    });
                }
            }
            check_tokens(index, call)?;
            kinds.push(sig.output);
        }
        let root = *kinds.last().expect("validated programs are non-empty");
        match root {
            DataKind::String
            | DataKind::Number
            | DataKind::Boolean
            | DataKind::Value
            | DataKind::Predicate => Ok(kinds),
            other => Err(TypeError::BadRootKind { found: other }),
        }
    }

    /// Relation/attribute traversal steps in the locating phase.
    pub fn hop_count(&self) -> usize {
        self.calls
            .iter()
            .filter(|c| c.function == Function::Relate || c.function.is_attribute_filter())
            .count()
    }
}

fn check_tokens(index: usize, call: &FunctionCall) -> Result<(), TypeError> {
    let bad = |argument: &str, domain: &'static str| TypeError::BadToken {
        index,
        argument: argument.to_string(),
        domain,
    };
    match call.function {
        Function::FilterNum
        | Function::FilterYear
        | Function::FilterDate
        | Function::QFilterNum
        | Function::QFilterYear
        | Function::QFilterDate
        | Function::VerifyNum
        | Function::VerifyYear
        | Function::VerifyDate => {
            let op = call.textual_inputs.last().expect("arity checked");
            if CompareOp::from_token(op).is_none() {
                return Err(bad(op, "{=, !=, <, >}"));
            }
        }
        Function::Relate => {
            let dir = &call.textual_inputs[1];
            if dir != "forward" && dir != "backward" {
                return Err(bad(dir, "{forward, backward}"));
            }
        }
        Function::SelectBetween => {
            let op = &call.textual_inputs[1];
            if op != "greater" && op != "less" {
                return Err(bad(op, "{greater, less}"));
            }
        }
        Function::SelectAmong => {
            let op = &call.textual_inputs[1];
            if op != "largest" && op != "smallest" {
                return Err(bad(op, "{largest, smallest}"));
            }
        }
        _ => {}
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG2_TEXT: &str = "Find <arg> LeBron James <func> Relate <arg> drafted by <arg> backward <func> FilterConcept <arg> team <func> QueryName";

    #[test]
    fn parse_left_deep_chain() {
        let p = Program::parse_text(FIG2_TEXT).unwrap();
        assert_eq!(p.len(), 4);
        assert_eq!(p.calls[0].function, Function::Find);
        assert_eq!(p.calls[0].textual_inputs, vec!["LeBron James"]);
        assert_eq!(p.calls[1].function, Function::Relate);
        assert_eq!(p.calls[1].functional_inputs, vec![0]);
        assert_eq!(p.calls[1].textual_inputs, vec!["drafted by", "backward"]);
        assert_eq!(p.calls[2].functional_inputs, vec![1]);
        assert_eq!(p.calls[3].functional_inputs, vec![2]);
    }

    #[test]
    fn lone_query_name_underflows() {
        match Program::parse_text("QueryName") {
            Err(ProgramError::ArityMismatch { function, .. }) => {
                assert_eq!(function, "QueryName");
            }
            other => panic!("expected ArityMismatch, got {other:?}"),
        }
    }

    #[test]
    fn binary_nodes_pop_in_push_order() {
        let p = Program::parse_text(
            "Find <arg> X <func> Find <arg> Y <func> And <func> Count",
        )
        .unwrap();
        assert_eq!(p.len(), 4);
        assert_eq!(p.calls[2].function, Function::And);
        assert_eq!(p.calls[2].functional_inputs, vec![0, 1]);
        assert_eq!(p.calls[3].functional_inputs, vec![2]);
    }

    #[test]
    fn serialize_inverts_parse() {
        for text in [
            FIG2_TEXT,
            "Find <arg> X <func> Find <arg> Y <func> And <func> Count",
            "FindAll <func> FilterNum <arg> height <arg> 200 centimetres <arg> > <func> QueryName",
        ] {
            let p = Program::parse_text(text).unwrap();
            assert_eq!(p.serialize(), text);
            assert_eq!(Program::parse_text(&p.serialize()).unwrap(), p);
        }
    }

    #[test]
    fn unknown_function_is_reported() {
        assert_eq!(
            Program::parse_text("Fnd <arg> X"),
            Err(ProgramError::UnknownFunction("Fnd".into()))
        );
    }

    #[test]
    fn leftover_operands_are_an_arity_error() {
        assert!(matches!(
            Program::parse_text("Find <arg> X <func> Find <arg> Y <func> QueryName"),
            Err(ProgramError::ArityMismatch { .. })
        ));
    }

    #[test]
    fn typecheck_assigns_kinds() {
        let p = Program::parse_text(FIG2_TEXT).unwrap();
        let kinds = p.typecheck().unwrap();
        assert_eq!(
            kinds,
            vec![
                DataKind::Entities,
                DataKind::EntitiesWithFacts,
                DataKind::Entities,
                DataKind::String
            ]
        );
    }

    #[test]
    fn count_of_boolean_is_kind_mismatch() {
        let p = Program::parse_text(
            "Find <arg> X <func> QueryAttr <arg> height <func> VerifyStr <arg> male <func> Count",
        );
        // VerifyStr yields BOOLEAN; Count needs ENTITIES.
        let p = p.unwrap();
        match p.typecheck() {
            Err(TypeError::KindMismatch {
                index,
                expected,
                found,
            }) => {
                assert_eq!(index, 3);
                assert_eq!(expected, DataKind::Entities);
                assert_eq!(found, DataKind::Boolean);
            }
            other => panic!("expected KindMismatch, got {other:?}"),
        }
    }

    #[test]
    fn bad_direction_token() {
        let p =
            Program::parse_text("Find <arg> X <func> Relate <arg> father <arg> sideways <func> QueryName")
                .unwrap();
        match p.typecheck() {
            Err(TypeError::BadToken { argument, .. }) => assert_eq!(argument, "sideways"),
            other => panic!("expected BadToken, got {other:?}"),
        }
    }

    #[test]
    fn qualifier_filter_requires_facts_kind() {
        // And drops facts, so a QFilter directly after it must not typecheck.
        let p = Program::parse_text(
            "Find <arg> X <func> Find <arg> Y <func> And <func> QFilterStr <arg> k <arg> v <func> Count",
        )
        .unwrap();
        assert!(matches!(
            p.typecheck(),
            Err(TypeError::KindMismatch { index: 3, .. })
        ));
    }

    #[test]
    fn entity_root_is_rejected() {
        let p = Program::parse_text("Find <arg> X").unwrap();
        assert!(matches!(
            p.typecheck(),
            Err(TypeError::BadRootKind { .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let p = Program::parse_text(FIG2_TEXT).unwrap();
        let json = p.to_json();
        assert_eq!(Program::from_json(&json).unwrap(), p);
        assert_eq!(json[0]["function"], "Find");
        assert_eq!(json[1]["dependencies"][0], 0);
    }

    #[test]
    fn json_rejects_non_post_order() {
        // Both Finds feed And out of stack order.
        let v: serde_json::Value = serde_json::json!([
            {"function": "Find", "inputs": ["X"], "dependencies": []},
            {"function": "Find", "inputs": ["Y"], "dependencies": []},
            {"function": "And", "inputs": [], "dependencies": [1, 0]},
            {"function": "Count", "inputs": [], "dependencies": [2]}
        ]);
        assert!(matches!(
            Program::from_json(&v),
            Err(ProgramError::NotPostOrder { .. })
        ));
    }

    #[test]
    fn hop_count_counts_traversals() {
        let p = Program::parse_text(
            "Find <arg> X <func> Relate <arg> father <arg> forward <func> FilterNum <arg> height <arg> 200 centimetres <arg> > <func> QueryName",
        )
        .unwrap();
        assert_eq!(p.hop_count(), 2);
    }
}
