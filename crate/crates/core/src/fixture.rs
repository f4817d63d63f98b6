//! Built-in knowledge bases: the small `nba-mini` fixture used throughout the
//! test suite, and a deterministic synthetic expander for scale tests.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::kb::{
    AttributeFact, Concept, ConceptId, Entity, EntityId, KnowledgeBase, Qualifier, RelationFact,
};
use crate::value::Value;

pub const NBA_MINI_JSON: &str = include_str!("../fixtures/nba_mini.json");

/// The `nba-mini` fixture: 6 concepts, 5 entities.
pub fn nba_mini() -> KnowledgeBase {
    KnowledgeBase::from_json_str(NBA_MINI_JSON).expect("bundled fixture is valid")
}

const CITY_PREFIX: [&str; 10] = [
    "Oak", "River", "Lake", "Hill", "Stone", "Maple", "Cedar", "Ash", "Elm", "Birch",
];
const CITY_SUFFIX: [&str; 10] = [
    "ton", "field", "ville", "burg", "port", "wood", "dale", "view", "ford", "haven",
];
const MASCOTS: [&str; 10] = [
    "Hawks", "Wolves", "Bulls", "Eagles", "Sharks", "Lions", "Bears", "Tigers", "Foxes", "Owls",
];
const FIRST_NAMES: [&str; 20] = [
    "Avery", "Blake", "Casey", "Devon", "Ellis", "Frankie", "Gray", "Harper", "Indy", "Jordan",
    "Kendall", "Logan", "Morgan", "Noel", "Oakley", "Parker", "Quinn", "Reese", "Sawyer", "Taylor",
];
const LAST_NAMES: [&str; 25] = [
    "Abbott", "Barnes", "Carver", "Dalton", "Emerson", "Fletcher", "Granger", "Holloway",
    "Ibarra", "Jennings", "Keller", "Lambert", "Mercer", "Norwood", "Osborne", "Prescott",
    "Quimby", "Radford", "Sheffield", "Thatcher", "Underhill", "Vance", "Whitfield", "Yates",
    "Zimmer",
];

/// Deterministically grows an `nba-mini`-shaped knowledge base to roughly
/// `target_entities` entities: 60% players, 20% teams, 20% cities, with the
/// same concept tree, attribute vocabulary, and qualifier patterns. A few
/// players intentionally share a name.
pub fn synthetic(target_entities: usize, seed: u64) -> KnowledgeBase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let concepts = vec![
        concept("C10", "person", &[]),
        concept("C11", "athlete", &["C10"]),
        concept("C12", "basketball player", &["C11"]),
        concept("C20", "team", &[]),
        concept("C21", "basketball team", &["C20"]),
        concept("C30", "city", &[]),
    ];

    let n_cities = (target_entities / 5).max(2);
    let n_teams = (target_entities / 5).max(2);
    let n_players = target_entities.saturating_sub(n_cities + n_teams).max(2);

    let mut entities = Vec::new();

    let mut city_ids = Vec::new();
    let mut city_names: Vec<String> = CITY_PREFIX
        .iter()
        .flat_map(|p| CITY_SUFFIX.iter().map(move |s| format!("{p}{s}")))
        .collect();
    city_names.shuffle(&mut rng);
    for i in 0..n_cities {
        let id = EntityId(format!("Q{}", 1000 + i));
        let name = city_names[i % city_names.len()].clone();
        let mut attributes = Vec::new();
        let base_pop = rng.gen_range(20_000..2_000_000) as f64;
        attributes.push(AttributeFact {
            subject: id.clone(),
            key: "population".into(),
            value: Value::number(base_pop),
            qualifiers: vec![q_year("point in time", rng.gen_range(2000..=2020))],
        });
        // A third of the cities carry a second, older population figure, so
        // unqualified population queries over them are ambiguous.
        if rng.gen_bool(0.33) {
            attributes.push(AttributeFact {
                subject: id.clone(),
                key: "population".into(),
                value: Value::number((base_pop * rng.gen_range(0.5..0.95)).round()),
                qualifiers: vec![q_year("point in time", rng.gen_range(1950..2000))],
            });
        }
        entities.push(Entity {
            id: id.clone(),
            name,
            instance_of: [ConceptId::from("C30")].into(),
            attributes,
            relations: Vec::new(),
        });
        city_ids.push(id);
    }

    let mut team_ids = Vec::new();
    for i in 0..n_teams {
        let id = EntityId(format!("Q{}", 2000 + i));
        let city = &city_ids[rng.gen_range(0..city_ids.len())];
        let city_name = entities
            .iter()
            .find(|e| &e.id == city)
            .map(|e| e.name.clone())
            .unwrap_or_default();
        let name = format!("{} {}", city_name, MASCOTS[rng.gen_range(0..MASCOTS.len())]);
        let attributes = vec![AttributeFact {
            subject: id.clone(),
            key: "social media followers".into(),
            value: Value::number(rng.gen_range(50_000..9_000_000) as f64),
            qualifiers: vec![q_year("point in time", rng.gen_range(2015..=2023))],
        }];
        let relations = vec![RelationFact {
            subject: id.clone(),
            predicate: "home venue city".into(),
            object: city.clone(),
            qualifiers: Vec::new(),
        }];
        entities.push(Entity {
            id: id.clone(),
            name,
            instance_of: [ConceptId::from("C21")].into(),
            attributes,
            relations,
        });
        team_ids.push(id);
    }

    let mut player_ids: Vec<EntityId> = Vec::new();
    let mut used_names: Vec<String> = Vec::new();
    for i in 0..n_players {
        let id = EntityId(format!("Q{}", 3000 + i));
        // Reuse an earlier player's name now and then: ambiguous names make
        // single-entity questions fail uniqueness unless narrowed further.
        let name = if !used_names.is_empty() && rng.gen_bool(0.04) {
            used_names[rng.gen_range(0..used_names.len())].clone()
        } else {
            format!(
                "{} {}",
                FIRST_NAMES[rng.gen_range(0..FIRST_NAMES.len())],
                LAST_NAMES[rng.gen_range(0..LAST_NAMES.len())]
            )
        };
        used_names.push(name.clone());

        let mut attributes = vec![
            AttributeFact {
                subject: id.clone(),
                key: "height".into(),
                value: Value::quantity(rng.gen_range(170..=230) as f64, "centimetre"),
                qualifiers: Vec::new(),
            },
            AttributeFact {
                subject: id.clone(),
                key: "gender".into(),
                value: Value::string(if rng.gen_bool(0.5) { "male" } else { "female" }),
                qualifiers: Vec::new(),
            },
            AttributeFact {
                subject: id.clone(),
                key: "date of birth".into(),
                value: random_date(&mut rng, 1960, 2004),
                qualifiers: Vec::new(),
            },
        ];
        if rng.gen_bool(0.5) {
            attributes.push(AttributeFact {
                subject: id.clone(),
                key: "mass".into(),
                value: Value::quantity(rng.gen_range(60..=130) as f64, "kilogram"),
                qualifiers: Vec::new(),
            });
        }

        let mut relations = vec![RelationFact {
            subject: id.clone(),
            predicate: "place of birth".into(),
            object: city_ids[rng.gen_range(0..city_ids.len())].clone(),
            qualifiers: Vec::new(),
        }];
        if rng.gen_bool(0.8) {
            let team = team_ids[rng.gen_range(0..team_ids.len())].clone();
            let draft_year = rng.gen_range(1980..=2023);
            relations.push(RelationFact {
                subject: id.clone(),
                predicate: "drafted by".into(),
                object: team.clone(),
                qualifiers: vec![q_year("point in time", draft_year)],
            });
            relations.push(RelationFact {
                subject: id.clone(),
                predicate: "member of sports team".into(),
                object: team,
                qualifiers: vec![
                    q_year("start time", draft_year),
                    Qualifier {
                        key: "number of matches played".into(),
                        value: Value::number(rng.gen_range(10..1500) as f64),
                    },
                ],
            });
        }
        if !player_ids.is_empty() && rng.gen_bool(0.1) {
            relations.push(RelationFact {
                subject: id.clone(),
                predicate: "father".into(),
                object: player_ids[rng.gen_range(0..player_ids.len())].clone(),
                qualifiers: Vec::new(),
            });
        }

        entities.push(Entity {
            id: id.clone(),
            name,
            instance_of: [ConceptId::from("C12")].into(),
            attributes,
            relations,
        });
        player_ids.push(id);
    }

    KnowledgeBase::from_parts(concepts, entities).expect("synthetic kb is valid")
}

fn concept(id: &str, name: &str, parents: &[&str]) -> Concept {
    Concept {
        id: ConceptId::from(id),
        name: name.to_string(),
        subclass_of: parents.iter().map(|p| ConceptId::from(*p)).collect(),
    }
}

fn q_year(key: &str, year: i64) -> Qualifier {
    Qualifier {
        key: key.to_string(),
        value: Value::Year(year),
    }
}

fn random_date(rng: &mut ChaCha8Rng, min_year: i32, max_year: i32) -> Value {
    let year = rng.gen_range(min_year..=max_year);
    let month = rng.gen_range(1..=12);
    let day = rng.gen_range(1..=28);
    Value::date(year, month, day).expect("day <= 28 always valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_is_deterministic_and_sized() {
        let a = synthetic(100, 42);
        let b = synthetic(100, 42);
        assert_eq!(a, b);
        assert_eq!(a.entity_count(), 100);
        let c = synthetic(100, 43);
        assert_ne!(a, c);
    }

    #[test]
    fn synthetic_has_ambiguous_material() {
        let kb = synthetic(300, 7);
        let dup_names = kb
            .entities()
            .filter(|e| kb.entities_named(&e.name).len() > 1)
            .count();
        assert!(dup_names > 0, "expected some shared names");
        let multi_pop = kb
            .entities()
            .filter(|e| e.attributes.iter().filter(|a| a.key == "population").count() > 1)
            .count();
        assert!(multi_pop > 0, "expected some two-population cities");
    }
}
