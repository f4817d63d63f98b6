//! The knowledge base: concepts in a subclass tree, entities with typed
//! attribute facts and relation facts, both kinds carrying qualifiers.
//!
//! A loaded [`KnowledgeBase`] is immutable. Facts are canonically sorted and
//! de-duplicated at load time, so the same multiset of input records always
//! produces an identical store.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::value::{parse_number, Value, ValueType, UNITLESS};

/// Identifier of a concept, unique within the concept namespace.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConceptId(pub String);

/// Identifier of an entity, unique within the entity namespace.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub String);

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ConceptId {
    fn from(s: &str) -> Self {
        ConceptId(s.to_string())
    }
}

impl From<&str> for EntityId {
    fn from(s: &str) -> Self {
        EntityId(s.to_string())
    }
}

/// Key/value annotation restricting the validity of a fact.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Qualifier {
    pub key: String,
    pub value: Value,
}

/// Literal knowledge: `(entity, attribute key, attribute value)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AttributeFact {
    pub subject: EntityId,
    pub key: String,
    pub value: Value,
    pub qualifiers: Vec<Qualifier>,
}

/// Relational knowledge: `(entity, relation, entity)`, stored once in the
/// forward direction from its subject.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelationFact {
    pub subject: EntityId,
    pub predicate: String,
    pub object: EntityId,
    pub qualifiers: Vec<Qualifier>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entity {
    pub id: EntityId,
    pub name: String,
    pub instance_of: BTreeSet<ConceptId>,
    pub attributes: Vec<AttributeFact>,
    pub relations: Vec<RelationFact>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Concept {
    pub id: ConceptId,
    pub name: String,
    pub subclass_of: BTreeSet<ConceptId>,
}

/// A handle to a fact inside the knowledge base. Handles are small, ordered,
/// and resolve back to the owning entity's fact list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FactRef<'a> {
    Attribute(&'a AttributeFact),
    Relation(&'a RelationFact),
}

impl<'a> FactRef<'a> {
    pub fn qualifiers(&self) -> &'a [Qualifier] {
        match self {
            FactRef::Attribute(f) => &f.qualifiers,
            FactRef::Relation(f) => &f.qualifiers,
        }
    }

    /// Short human-readable form, used by execution traces.
    pub fn describe(&self, kb: &KnowledgeBase) -> String {
        match self {
            FactRef::Attribute(f) => format!(
                "({}, {}, {})",
                kb.entity_name(&f.subject),
                f.key,
                f.value.render()
            ),
            FactRef::Relation(f) => format!(
                "({}, {}, {})",
                kb.entity_name(&f.subject),
                f.predicate,
                kb.entity_name(&f.object)
            ),
        }
    }
}

/// Errors raised while loading or validating a knowledge base document.
#[derive(Debug, thiserror::Error)]
pub enum KbError {
    #[error("malformed input at {position}: {message}")]
    MalformedInput { position: String, message: String },
    #[error("dangling reference: {context} mentions unknown id {id:?}")]
    DanglingReference { id: String, context: String },
    #[error("cyclic concept graph through {0:?}")]
    CyclicConceptGraph(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

fn malformed(position: impl Into<String>, message: impl Into<String>) -> KbError {
    KbError::MalformedInput {
        position: position.into(),
        message: message.into(),
    }
}

/// Supported serialization formats for knowledge bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KbFormat {
    /// Single JSON document with top-level `concepts` and `entities`.
    Json,
}

/// Immutable, fully indexed knowledge base.
#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    concepts: BTreeMap<ConceptId, Concept>,
    entities: BTreeMap<EntityId, Entity>,
    name_index: BTreeMap<String, Vec<EntityId>>,
    concept_name_index: BTreeMap<String, Vec<ConceptId>>,
    /// Transitive members: every entity whose `instance_of` concept is the key
    /// concept or one of its descendants.
    concept_members: BTreeMap<ConceptId, BTreeSet<EntityId>>,
    /// Object entity -> (subject, index into the subject's relation list).
    backward_index: BTreeMap<EntityId, Vec<(EntityId, usize)>>,
    /// Attribute key -> value types seen anywhere in the KB.
    attr_key_types: BTreeMap<String, BTreeSet<ValueType>>,
    /// Qualifier key -> value types seen anywhere in the KB.
    qual_key_types: BTreeMap<String, BTreeSet<ValueType>>,
    /// Every quantity unit that occurs in the KB.
    units: BTreeSet<String>,
    /// Lazily built reified triple view, shared between clones.
    store: OnceLock<Arc<crate::triples::TripleStore>>,
}

impl PartialEq for KnowledgeBase {
    fn eq(&self, other: &Self) -> bool {
        // Indexes and the triple store are derived from these two maps.
        self.concepts == other.concepts && self.entities == other.entities
    }
}

impl KnowledgeBase {
    pub fn load(source: impl Read, format: KbFormat) -> Result<Self, KbError> {
        match format {
            KbFormat::Json => Self::load_json(source),
        }
    }

    pub fn load_json(mut source: impl Read) -> Result<Self, KbError> {
        let mut text = String::new();
        source.read_to_string(&mut text)?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self, KbError> {
        let doc: Json = serde_json::from_str(text).map_err(|e| {
            malformed(format!("line {}, column {}", e.line(), e.column()), e.to_string())
        })?;
        Self::from_document(&doc)
    }

    fn from_document(doc: &Json) -> Result<Self, KbError> {
        let root = doc
            .as_object()
            .ok_or_else(|| malformed("document root", "expected a JSON object"))?;
        let mut concepts: BTreeMap<ConceptId, Concept> = BTreeMap::new();
        for (pos, item) in iterate_records(root.get("concepts"), "concepts")? {
            let c = parse_concept(&pos, &item)?;
            if concepts.insert(c.id.clone(), c.clone()).is_some() {
                return Err(malformed(pos, format!("duplicate concept id {:?}", c.id.0)));
            }
        }
        let mut entities: BTreeMap<EntityId, Entity> = BTreeMap::new();
        for (pos, item) in iterate_records(root.get("entities"), "entities")? {
            let e = parse_entity(&pos, &item)?;
            if entities.insert(e.id.clone(), e.clone()).is_some() {
                return Err(malformed(pos, format!("duplicate entity id {:?}", e.id.0)));
            }
        }
        Self::build(concepts, entities)
    }

    /// Validates references and acyclicity, canonicalizes fact order, and
    /// builds every index.
    fn build(
        concepts: BTreeMap<ConceptId, Concept>,
        mut entities: BTreeMap<EntityId, Entity>,
    ) -> Result<Self, KbError> {
        for c in concepts.values() {
            for parent in &c.subclass_of {
                if !concepts.contains_key(parent) {
                    return Err(KbError::DanglingReference {
                        id: parent.0.clone(),
                        context: format!("concept {:?} subclass_of", c.id.0),
                    });
                }
            }
        }
        check_acyclic(&concepts)?;

        for e in entities.values() {
            for c in &e.instance_of {
                if !concepts.contains_key(c) {
                    return Err(KbError::DanglingReference {
                        id: c.0.clone(),
                        context: format!("entity {:?} instance_of", e.id.0),
                    });
                }
            }
        }

        // Relation facts parsed from backward records sit on the object's
        // entity; re-home every fact to its subject.
        let mut all_relations = Vec::new();
        for e in entities.values_mut() {
            all_relations.extend(e.relations.drain(..));
        }
        for r in &all_relations {
            for (end, id) in [("subject", &r.subject), ("object", &r.object)] {
                if !entities.contains_key(id) {
                    return Err(KbError::DanglingReference {
                        id: id.0.clone(),
                        context: format!("relation {:?} {end}", r.predicate),
                    });
                }
            }
        }
        for r in all_relations {
            entities
                .get_mut(&r.subject.clone())
                .expect("subject checked above")
                .relations
                .push(r);
        }

        // Canonical fact order makes the store independent of input order.
        for e in entities.values_mut() {
            e.attributes.sort_by(cmp_attr);
            e.attributes.dedup();
            e.relations.sort_by(cmp_rel);
            e.relations.dedup();
        }

        let mut name_index: BTreeMap<String, Vec<EntityId>> = BTreeMap::new();
        for e in entities.values() {
            name_index.entry(e.name.clone()).or_default().push(e.id.clone());
        }
        let mut concept_name_index: BTreeMap<String, Vec<ConceptId>> = BTreeMap::new();
        for c in concepts.values() {
            concept_name_index
                .entry(c.name.clone())
                .or_default()
                .push(c.id.clone());
        }

        // descendants(c) includes c itself.
        let mut children: BTreeMap<&ConceptId, Vec<&ConceptId>> = BTreeMap::new();
        for c in concepts.values() {
            for parent in &c.subclass_of {
                children.entry(parent).or_default().push(&c.id);
            }
        }
        let mut direct_members: BTreeMap<&ConceptId, BTreeSet<EntityId>> = BTreeMap::new();
        for e in entities.values() {
            for c in &e.instance_of {
                direct_members.entry(c).or_default().insert(e.id.clone());
            }
        }
        let mut concept_members: BTreeMap<ConceptId, BTreeSet<EntityId>> = BTreeMap::new();
        for c in concepts.keys() {
            let mut members = BTreeSet::new();
            let mut stack = vec![c];
            let mut seen = BTreeSet::new();
            while let Some(k) = stack.pop() {
                if !seen.insert(k.clone()) {
                    continue;
                }
                if let Some(direct) = direct_members.get(k) {
                    members.extend(direct.iter().cloned());
                }
                if let Some(kids) = children.get(k) {
                    stack.extend(kids.iter().copied());
                }
            }
            concept_members.insert(c.clone(), members);
        }

        let mut backward_index: BTreeMap<EntityId, Vec<(EntityId, usize)>> = BTreeMap::new();
        for e in entities.values() {
            for (i, r) in e.relations.iter().enumerate() {
                backward_index
                    .entry(r.object.clone())
                    .or_default()
                    .push((e.id.clone(), i));
            }
        }

        let mut attr_key_types: BTreeMap<String, BTreeSet<ValueType>> = BTreeMap::new();
        let mut qual_key_types: BTreeMap<String, BTreeSet<ValueType>> = BTreeMap::new();
        let mut units = BTreeSet::new();
        let record_value = |units: &mut BTreeSet<String>, v: &Value| {
            if let Value::Quantity { unit, .. } = v {
                units.insert(unit.clone());
            }
        };
        for e in entities.values() {
            for a in &e.attributes {
                attr_key_types
                    .entry(a.key.clone())
                    .or_default()
                    .insert(a.value.type_name());
                record_value(&mut units, &a.value);
                for q in &a.qualifiers {
                    qual_key_types
                        .entry(q.key.clone())
                        .or_default()
                        .insert(q.value.type_name());
                    record_value(&mut units, &q.value);
                }
            }
            for r in &e.relations {
                for q in &r.qualifiers {
                    qual_key_types
                        .entry(q.key.clone())
                        .or_default()
                        .insert(q.value.type_name());
                    record_value(&mut units, &q.value);
                }
            }
        }

        Ok(KnowledgeBase {
            concepts,
            entities,
            name_index,
            concept_name_index,
            concept_members,
            backward_index,
            attr_key_types,
            qual_key_types,
            units,
            store: OnceLock::new(),
        })
    }

    /// Builds a KB from already-constructed parts (used by fixtures and the
    /// synthetic expander); runs the same validation as loading.
    pub fn from_parts(
        concepts: impl IntoIterator<Item = Concept>,
        entities: impl IntoIterator<Item = Entity>,
    ) -> Result<Self, KbError> {
        let concepts = concepts.into_iter().map(|c| (c.id.clone(), c)).collect();
        let entities = entities.into_iter().map(|e| (e.id.clone(), e)).collect();
        Self::build(concepts, entities)
    }

    pub fn concepts(&self) -> impl Iterator<Item = &Concept> {
        self.concepts.values()
    }

    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    pub fn concept_count(&self) -> usize {
        self.concepts.len()
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn entity(&self, id: &EntityId) -> Option<&Entity> {
        self.entities.get(id)
    }

    pub fn concept(&self, id: &ConceptId) -> Option<&Concept> {
        self.concepts.get(id)
    }

    pub fn entity_name(&self, id: &EntityId) -> &str {
        self.entities.get(id).map(|e| e.name.as_str()).unwrap_or("?")
    }

    /// Entities bearing exactly this name, in stable id order.
    pub fn entities_named(&self, name: &str) -> &[EntityId] {
        self.name_index.get(name).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn concepts_named(&self, name: &str) -> &[ConceptId] {
        self.concept_name_index
            .get(name)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// All entities belonging to the named concept or any transitive subclass
    /// of it. Unknown names yield the empty set.
    pub fn entities_of_concept(&self, concept_name: &str) -> BTreeSet<EntityId> {
        let mut out = BTreeSet::new();
        for cid in self.concepts_named(concept_name) {
            if let Some(members) = self.concept_members.get(cid) {
                out.extend(members.iter().cloned());
            }
        }
        out
    }

    pub fn concept_members(&self, id: &ConceptId) -> Option<&BTreeSet<EntityId>> {
        self.concept_members.get(id)
    }

    /// The named concept(s) plus all transitive subclasses, as a sorted,
    /// de-duplicated list of concept names.
    pub fn concept_closure_names(&self, concept_name: &str) -> Vec<String> {
        let mut children: BTreeMap<&ConceptId, Vec<&ConceptId>> = BTreeMap::new();
        for c in self.concepts.values() {
            for parent in &c.subclass_of {
                children.entry(parent).or_default().push(&c.id);
            }
        }
        let mut names = BTreeSet::new();
        let mut stack: Vec<&ConceptId> = self.concepts_named(concept_name).iter().collect();
        let mut seen = BTreeSet::new();
        while let Some(k) = stack.pop() {
            if !seen.insert(k.clone()) {
                continue;
            }
            if let Some(c) = self.concepts.get(k) {
                names.insert(c.name.clone());
            }
            if let Some(kids) = children.get(k) {
                stack.extend(kids.iter().copied());
            }
        }
        names.into_iter().collect()
    }

    /// Ancestor concepts of an entity (direct `instance_of` plus transitive
    /// superclasses), in stable id order.
    pub fn ancestor_concepts(&self, id: &EntityId) -> Vec<ConceptId> {
        let mut seen = BTreeSet::new();
        let Some(e) = self.entities.get(id) else {
            return Vec::new();
        };
        let mut stack: Vec<ConceptId> = e.instance_of.iter().cloned().collect();
        while let Some(c) = stack.pop() {
            if !seen.insert(c.clone()) {
                continue;
            }
            if let Some(concept) = self.concepts.get(&c) {
                stack.extend(concept.subclass_of.iter().cloned());
            }
        }
        seen.into_iter().collect()
    }

    /// Relation facts in which `id` is the object, as fact handles.
    pub fn relations_to(&self, id: &EntityId) -> impl Iterator<Item = &RelationFact> {
        self.backward_index
            .get(id)
            .into_iter()
            .flatten()
            .filter_map(|(subj, ix)| self.entities.get(subj).and_then(|e| e.relations.get(*ix)))
    }

    pub fn attr_key_types(&self, key: &str) -> Option<&BTreeSet<ValueType>> {
        self.attr_key_types.get(key)
    }

    pub fn qual_key_types(&self, key: &str) -> Option<&BTreeSet<ValueType>> {
        self.qual_key_types.get(key)
    }

    /// Resolves a possibly pluralized unit against the units present in the
    /// KB: exact match wins, otherwise a trailing `s` is stripped.
    pub fn normalize_unit(&self, unit: &str) -> String {
        if unit == UNITLESS || self.units.contains(unit) {
            return unit.to_string();
        }
        if let Some(stripped) = unit.strip_suffix('s') {
            if self.units.contains(stripped) {
                return stripped.to_string();
            }
        }
        unit.to_string()
    }

    pub fn units(&self) -> &BTreeSet<String> {
        &self.units
    }

    /// The indexed reified triple view, built on first use and cached.
    pub fn store(&self) -> &crate::triples::TripleStore {
        self.store
            .get_or_init(|| Arc::new(crate::triples::TripleStore::new(self)))
    }

    /// Parses a textual value whose expected type is directed by the value
    /// types a key has been observed with; earlier types in
    /// date > year > quantity > string order win. Unknown keys fall back to
    /// the same heuristic over all types. Total: the string reading always
    /// succeeds. Quantity units are normalized plural-insensitively.
    fn parse_directed(&self, types: Option<&BTreeSet<ValueType>>, text: &str) -> Value {
        use crate::value::{parse_date, parse_quantity, parse_year};
        let order = [
            ValueType::Date,
            ValueType::Year,
            ValueType::Quantity,
            ValueType::String,
        ];
        for ty in order {
            if let Some(ts) = types {
                if !ts.contains(&ty) {
                    continue;
                }
            }
            match ty {
                ValueType::Date => {
                    if let Ok(v) = parse_date(text) {
                        return v;
                    }
                }
                ValueType::Year => {
                    if !text.contains(',') {
                        if let Ok(v) = parse_year(text) {
                            return v;
                        }
                    }
                }
                ValueType::Quantity => {
                    if let Ok(Value::Quantity { magnitude, unit }) = parse_quantity(text) {
                        return Value::Quantity {
                            magnitude,
                            unit: self.normalize_unit(&unit),
                        };
                    }
                }
                ValueType::String => return Value::String(text.trim().to_string()),
            }
        }
        Value::String(text.trim().to_string())
    }

    /// Reads a textual value destined to match values of the given attribute key.
    pub fn parse_attr_value(&self, key: &str, text: &str) -> Value {
        self.parse_directed(self.attr_key_types.get(key), text)
    }

    /// Reads a textual value destined to match values of the given qualifier key.
    pub fn parse_qual_value(&self, key: &str, text: &str) -> Value {
        self.parse_directed(self.qual_key_types.get(key), text)
    }

    /// Serializes back to the canonical JSON document form.
    pub fn to_json(&self) -> Json {
        let concepts: Vec<Json> = self
            .concepts
            .values()
            .map(|c| {
                serde_json::json!({
                    "id": c.id.0,
                    "name": c.name,
                    "subclassOf": c.subclass_of.iter().map(|i| i.0.clone()).collect::<Vec<_>>(),
                })
            })
            .collect();
        let entities: Vec<Json> = self
            .entities
            .values()
            .map(|e| {
                serde_json::json!({
                    "id": e.id.0,
                    "name": e.name,
                    "instanceOf": e.instance_of.iter().map(|i| i.0.clone()).collect::<Vec<_>>(),
                    "attributes": e.attributes.iter().map(attr_to_json).collect::<Vec<_>>(),
                    "relations": e.relations.iter().map(rel_to_json).collect::<Vec<_>>(),
                })
            })
            .collect();
        serde_json::json!({ "concepts": concepts, "entities": entities })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("kb json")
    }
}

fn cmp_attr(a: &AttributeFact, b: &AttributeFact) -> std::cmp::Ordering {
    a.key
        .cmp(&b.key)
        .then_with(|| a.value.sort_key_cmp(&b.value))
        .then_with(|| cmp_qualifiers(&a.qualifiers, &b.qualifiers))
}

fn cmp_rel(a: &RelationFact, b: &RelationFact) -> std::cmp::Ordering {
    a.predicate
        .cmp(&b.predicate)
        .then_with(|| a.object.cmp(&b.object))
        .then_with(|| cmp_qualifiers(&a.qualifiers, &b.qualifiers))
}

fn cmp_qualifiers(a: &[Qualifier], b: &[Qualifier]) -> std::cmp::Ordering {
    let key = |qs: &[Qualifier]| -> Vec<(String, String)> {
        qs.iter()
            .map(|q| (q.key.clone(), q.value.render()))
            .collect()
    };
    key(a).cmp(&key(b))
}

/// Sorts a fact's qualifiers into canonical order.
pub(crate) fn sort_qualifiers(qs: &mut Vec<Qualifier>) {
    qs.sort_by(|a, b| a.key.cmp(&b.key).then_with(|| a.value.sort_key_cmp(&b.value)));
    qs.dedup();
}

fn check_acyclic(concepts: &BTreeMap<ConceptId, Concept>) -> Result<(), KbError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Visiting,
        Done,
    }
    let mut marks: BTreeMap<&ConceptId, Mark> = BTreeMap::new();
    for start in concepts.keys() {
        if marks.contains_key(start) {
            continue;
        }
        // Iterative DFS with an explicit exit marker per node.
        let mut stack: Vec<(&ConceptId, bool)> = vec![(start, false)];
        while let Some((node, exiting)) = stack.pop() {
            if exiting {
                marks.insert(node, Mark::Done);
                continue;
            }
            match marks.get(node) {
                Some(Mark::Done) => continue,
                Some(Mark::Visiting) => {
                    return Err(KbError::CyclicConceptGraph(node.0.clone()));
                }
                None => {}
            }
            marks.insert(node, Mark::Visiting);
            stack.push((node, true));
            if let Some(c) = concepts.get(node) {
                for parent in &c.subclass_of {
                    match marks.get(parent) {
                        Some(Mark::Visiting) => {
                            return Err(KbError::CyclicConceptGraph(parent.0.clone()));
                        }
                        Some(Mark::Done) => {}
                        None => stack.push((parent, false)),
                    }
                }
            }
        }
    }
    Ok(())
}

fn iterate_records<'a>(
    node: Option<&'a Json>,
    section: &str,
) -> Result<Vec<(String, &'a Json)>, KbError> {
    match node {
        None => Ok(Vec::new()),
        // Canonical form: array of records each carrying its own id. A map
        // keyed by id (the layout of some published dumps) is also accepted.
        Some(Json::Array(items)) => Ok(items
            .iter()
            .enumerate()
            .map(|(i, v)| (format!("{section}[{i}]"), v))
            .collect()),
        Some(Json::Object(map)) => Ok(map
            .iter()
            .map(|(k, v)| (format!("{section}[{k:?}]"), v))
            .collect()),
        Some(_) => Err(malformed(section, "expected an array or object")),
    }
}

fn field<'a>(pos: &str, item: &'a Json, names: &[&str]) -> Result<&'a Json, KbError> {
    for n in names {
        if let Some(v) = item.get(n) {
            return Ok(v);
        }
    }
    Err(malformed(pos, format!("missing field {:?}", names[0])))
}

fn as_str<'a>(pos: &str, v: &'a Json, what: &str) -> Result<&'a str, KbError> {
    v.as_str()
        .ok_or_else(|| malformed(pos, format!("{what} must be a string")))
}

fn id_list(pos: &str, v: &Json, what: &str) -> Result<Vec<String>, KbError> {
    let arr = v
        .as_array()
        .ok_or_else(|| malformed(pos, format!("{what} must be an array")))?;
    arr.iter().map(|x| as_str(pos, x, what).map(str::to_string)).collect()
}

fn record_id(pos: &str, item: &Json) -> Result<String, KbError> {
    // Records in map form carry their id as the map key, recovered here from
    // the position string `section["id"]`.
    if let Some(v) = item.get("id") {
        return as_str(pos, v, "id").map(str::to_string);
    }
    if let (Some(start), Some(end)) = (pos.find("[\""), pos.rfind("\"]")) {
        return Ok(pos[start + 2..end].to_string());
    }
    Err(malformed(pos, "missing field \"id\""))
}

fn parse_concept(pos: &str, item: &Json) -> Result<Concept, KbError> {
    let id = record_id(pos, item)?;
    let name = as_str(pos, field(pos, item, &["name"])?, "name")?.to_string();
    if name.is_empty() {
        return Err(malformed(pos, "concept name must be non-empty"));
    }
    let subclass_of = match item.get("subclassOf") {
        Some(v) => id_list(pos, v, "subclassOf")?,
        None => Vec::new(),
    };
    Ok(Concept {
        id: ConceptId(id),
        name,
        subclass_of: subclass_of.into_iter().map(ConceptId).collect(),
    })
}

fn parse_entity(pos: &str, item: &Json) -> Result<Entity, KbError> {
    let id = EntityId(record_id(pos, item)?);
    let name = as_str(pos, field(pos, item, &["name"])?, "name")?.to_string();
    if name.is_empty() {
        return Err(malformed(pos, "entity name must be non-empty"));
    }
    let instance_of = match item.get("instanceOf") {
        Some(v) => id_list(pos, v, "instanceOf")?,
        None => Vec::new(),
    };
    let mut attributes = Vec::new();
    if let Some(attrs) = item.get("attributes") {
        let arr = attrs
            .as_array()
            .ok_or_else(|| malformed(pos, "attributes must be an array"))?;
        for (i, a) in arr.iter().enumerate() {
            let apos = format!("{pos}.attributes[{i}]");
            let key = as_str(&apos, field(&apos, a, &["key"])?, "key")?.to_string();
            if key.is_empty() {
                return Err(malformed(&apos, "attribute key must be non-empty"));
            }
            let value = parse_value(&apos, field(&apos, a, &["value"])?)?;
            let mut qualifiers = parse_qualifiers(&apos, a.get("qualifiers"))?;
            sort_qualifiers(&mut qualifiers);
            attributes.push(AttributeFact {
                subject: id.clone(),
                key,
                value,
                qualifiers,
            });
        }
    }
    let mut relations = Vec::new();
    if let Some(rels) = item.get("relations") {
        let arr = rels
            .as_array()
            .ok_or_else(|| malformed(pos, "relations must be an array"))?;
        for (i, r) in arr.iter().enumerate() {
            let rpos = format!("{pos}.relations[{i}]");
            let predicate =
                as_str(&rpos, field(&rpos, r, &["predicate", "relation"])?, "predicate")?
                    .to_string();
            if predicate.is_empty() {
                return Err(malformed(&rpos, "relation predicate must be non-empty"));
            }
            let object = EntityId(as_str(&rpos, field(&rpos, r, &["object"])?, "object")?.to_string());
            let direction = match r.get("direction") {
                Some(v) => as_str(&rpos, v, "direction")?,
                None => "forward",
            };
            let mut qualifiers = parse_qualifiers(&rpos, r.get("qualifiers"))?;
            sort_qualifiers(&mut qualifiers);
            // Backward records describe the same fact from the object's side;
            // normalize so every fact is stored once, forward from its subject.
            let fact = match direction {
                "forward" => RelationFact {
                    subject: id.clone(),
                    predicate,
                    object,
                    qualifiers,
                },
                "backward" => RelationFact {
                    subject: object,
                    predicate,
                    object: id.clone(),
                    qualifiers,
                },
                other => {
                    return Err(malformed(
                        &rpos,
                        format!("direction must be \"forward\" or \"backward\", got {other:?}"),
                    ))
                }
            };
            relations.push(fact);
        }
    }
    // Facts parsed from backward records still sit on this entity; `build`
    // re-homes them to their subject.
    Ok(Entity {
        id,
        name,
        instance_of: instance_of.into_iter().map(ConceptId).collect(),
        attributes,
        relations,
    })
}

fn parse_qualifiers(pos: &str, node: Option<&Json>) -> Result<Vec<Qualifier>, KbError> {
    let mut out = Vec::new();
    match node {
        None => {}
        Some(Json::Object(map)) => {
            for (key, vals) in map {
                if key.is_empty() {
                    return Err(malformed(pos, "qualifier key must be non-empty"));
                }
                let list = vals
                    .as_array()
                    .ok_or_else(|| malformed(pos, "qualifier values must be an array"))?;
                for v in list {
                    out.push(Qualifier {
                        key: key.clone(),
                        value: parse_value(pos, v)?,
                    });
                }
            }
        }
        Some(Json::Array(items)) => {
            for q in items {
                let key = as_str(pos, field(pos, q, &["key"])?, "qualifier key")?.to_string();
                if key.is_empty() {
                    return Err(malformed(pos, "qualifier key must be non-empty"));
                }
                out.push(Qualifier {
                    key,
                    value: parse_value(pos, field(pos, q, &["value"])?)?,
                });
            }
        }
        Some(_) => return Err(malformed(pos, "qualifiers must be an object or array")),
    }
    Ok(out)
}

fn parse_value(pos: &str, v: &Json) -> Result<Value, KbError> {
    let obj = v
        .as_object()
        .ok_or_else(|| malformed(pos, "value must be an object with a \"type\" tag"))?;
    let ty = as_str(pos, field(pos, v, &["type"])?, "value type")?;
    let raw = field(pos, v, &["value"])?;
    match ty {
        "string" => Ok(Value::String(as_str(pos, raw, "string value")?.to_string())),
        "quantity" => {
            let magnitude = match raw {
                Json::Number(n) => n
                    .as_f64()
                    .filter(|m| m.is_finite())
                    .ok_or_else(|| malformed(pos, "quantity magnitude out of range"))?,
                Json::String(s) => parse_number(s)
                    .map_err(|e| malformed(pos, e.to_string()))?,
                _ => return Err(malformed(pos, "quantity value must be a number")),
            };
            let unit = match obj.get("unit") {
                Some(u) => {
                    let u = as_str(pos, u, "unit")?;
                    if u.is_empty() {
                        return Err(malformed(pos, "quantity unit must be non-empty"));
                    }
                    u.to_string()
                }
                None => UNITLESS.to_string(),
            };
            Ok(Value::Quantity { magnitude, unit })
        }
        "date" => {
            let s = as_str(pos, raw, "date value")?;
            crate::value::parse_date(s).map_err(|e| malformed(pos, e.to_string()))
        }
        "year" => match raw {
            Json::Number(n) => n
                .as_i64()
                .map(Value::Year)
                .ok_or_else(|| malformed(pos, "year must be an integer")),
            Json::String(s) => crate::value::parse_year(s)
                .map_err(|e| malformed(pos, e.to_string())),
            _ => Err(malformed(pos, "year must be an integer")),
        },
        other => Err(malformed(pos, format!("unknown value type {other:?}"))),
    }
}

fn value_to_json(v: &Value) -> Json {
    match v {
        Value::String(s) => serde_json::json!({"type": "string", "value": s}),
        Value::Quantity { magnitude, unit } => serde_json::json!({
            "type": "quantity",
            "value": magnitude,
            "unit": unit,
        }),
        Value::Date(d) => serde_json::json!({
            "type": "date",
            "value": d.format("%Y-%m-%d").to_string(),
        }),
        Value::Year(y) => serde_json::json!({"type": "year", "value": y}),
    }
}

fn qualifiers_to_json(qs: &[Qualifier]) -> Json {
    let mut map = serde_json::Map::new();
    for q in qs {
        map.entry(q.key.clone())
            .or_insert_with(|| Json::Array(Vec::new()))
            .as_array_mut()
            .expect("qualifier array")
            .push(value_to_json(&q.value));
    }
    Json::Object(map)
}

fn attr_to_json(a: &AttributeFact) -> Json {
    serde_json::json!({
        "key": a.key,
        "value": value_to_json(&a.value),
        "qualifiers": qualifiers_to_json(&a.qualifiers),
    })
}

fn rel_to_json(r: &RelationFact) -> Json {
    serde_json::json!({
        "predicate": r.predicate,
        "object": r.object.0,
        "direction": "forward",
        "qualifiers": qualifiers_to_json(&r.qualifiers),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;

    #[test]
    fn fixture_loads_with_expected_shape() {
        let kb = fixture::nba_mini();
        assert_eq!(kb.concept_count(), 6);
        assert_eq!(kb.entity_count(), 5);
    }

    #[test]
    fn dangling_relation_object_is_rejected() {
        let doc = r#"{
            "concepts": [{"id": "c1", "name": "thing", "subclassOf": []}],
            "entities": [
                {"id": "q1", "name": "A", "instanceOf": ["c1"], "attributes": [],
                 "relations": [{"predicate": "knows", "object": "Q999", "direction": "forward", "qualifiers": {}}]}
            ]
        }"#;
        match KnowledgeBase::from_json_str(doc) {
            Err(KbError::DanglingReference { id, .. }) => assert_eq!(id, "Q999"),
            other => panic!("expected DanglingReference, got {other:?}"),
        }
    }

    #[test]
    fn cyclic_concepts_are_rejected() {
        let doc = r#"{
            "concepts": [
                {"id": "c1", "name": "a", "subclassOf": ["c2"]},
                {"id": "c2", "name": "b", "subclassOf": ["c1"]}
            ],
            "entities": []
        }"#;
        assert!(matches!(
            KnowledgeBase::from_json_str(doc),
            Err(KbError::CyclicConceptGraph(_))
        ));
    }

    #[test]
    fn malformed_json_reports_position() {
        let err = KnowledgeBase::from_json_str("{ \"concepts\": [ }").unwrap_err();
        match err {
            KbError::MalformedInput { position, .. } => assert!(position.contains("line 1")),
            other => panic!("expected MalformedInput, got {other:?}"),
        }
    }

    #[test]
    fn entities_of_concept_follows_subclass_closure() {
        let kb = fixture::nba_mini();
        let players = kb.entities_of_concept("basketball player");
        let athletes = kb.entities_of_concept("athlete");
        let people = kb.entities_of_concept("person");
        assert_eq!(players.len(), 2);
        assert_eq!(players, athletes);
        assert_eq!(players, people);
        assert!(kb.entities_of_concept("asteroid").is_empty());
    }

    #[test]
    fn name_index_covers_every_entity() {
        let kb = fixture::nba_mini();
        for e in kb.entities() {
            assert!(kb.entities_named(&e.name).contains(&e.id));
        }
        let flattened: usize = {
            let names: std::collections::BTreeSet<_> =
                kb.entities().map(|e| e.name.clone()).collect();
            names.iter().map(|n| kb.entities_named(n).len()).sum()
        };
        assert_eq!(flattened, kb.entity_count());
    }

    #[test]
    fn load_is_order_independent() {
        let kb = fixture::nba_mini();
        let json = kb.to_json();
        let mut doc = json.clone();
        // Reverse both record arrays and every fact list.
        let arr = doc["entities"].as_array_mut().unwrap();
        arr.reverse();
        for e in arr.iter_mut() {
            e["attributes"].as_array_mut().unwrap().reverse();
            e["relations"].as_array_mut().unwrap().reverse();
        }
        doc["concepts"].as_array_mut().unwrap().reverse();
        let a = KnowledgeBase::from_json_str(&json.to_string()).unwrap();
        let b = KnowledgeBase::from_json_str(&doc.to_string()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn serialize_round_trip() {
        let kb = fixture::nba_mini();
        let reloaded = KnowledgeBase::from_json_str(&kb.to_json_string()).unwrap();
        assert_eq!(kb, reloaded);
    }

    #[test]
    fn backward_records_normalize_to_forward_facts() {
        let doc = r#"{
            "concepts": [{"id": "c1", "name": "thing", "subclassOf": []}],
            "entities": [
                {"id": "q1", "name": "A", "instanceOf": ["c1"], "attributes": [], "relations": [
                    {"predicate": "knows", "object": "q2", "direction": "forward", "qualifiers": {}}
                ]},
                {"id": "q2", "name": "B", "instanceOf": ["c1"], "attributes": [], "relations": [
                    {"predicate": "knows", "object": "q1", "direction": "backward", "qualifiers": {}}
                ]}
            ]
        }"#;
        let kb = KnowledgeBase::from_json_str(doc).unwrap();
        // Both records describe (q1, knows, q2); it must be stored once.
        let q1 = kb.entity(&EntityId::from("q1")).unwrap();
        let q2 = kb.entity(&EntityId::from("q2")).unwrap();
        let total = q1.relations.len() + q2.relations.len();
        assert_eq!(total, 1, "duplicate fact should collapse");
        assert_eq!(kb.relations_to(&EntityId::from("q2")).count(), 1);
    }

    #[test]
    fn unit_normalization_is_plural_insensitive() {
        let kb = fixture::nba_mini();
        assert_eq!(kb.normalize_unit("centimetre"), "centimetre");
        assert_eq!(kb.normalize_unit("centimetres"), "centimetre");
        assert_eq!(kb.normalize_unit("parsecs"), "parsecs");
        assert_eq!(kb.normalize_unit(UNITLESS), UNITLESS);
    }
}
