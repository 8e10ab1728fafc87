use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::{EntityId, RelationId};
use crate::{Error, Result};

/// Start relation `r₀`, paired with the source entity to form the first LSTM input.
pub const START: RelationId = 0;
/// Self-loop relation; walking it keeps the agent in place.
pub const NO_OP: RelationId = 1;

const START_NAME: &str = "<START>";
const NO_OP_NAME: &str = "<NO_OP>";
const INVERSE_MARKER: &str = "^-1";

/// Bidirectional name ↔ id maps for entities and relations.
///
/// Relation ids are laid out as `START = 0`, `NO_OP = 1`, then each dataset
/// relation `r` at an even id `2 + 2k` with its inverse at `3 + 2k`, so
/// `inverse(r) = r ^ 1` for every non-reserved relation.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    entities: Vec<String>,
    entity_ids: HashMap<String, EntityId>,
    relations: Vec<String>,
    relation_ids: HashMap<String, RelationId>,
    frozen: bool,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    pub fn new() -> Self {
        let relations = vec![START_NAME.to_string(), NO_OP_NAME.to_string()];
        let relation_ids = relations
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i as RelationId))
            .collect();
        Self {
            entities: Vec::new(),
            entity_ids: HashMap::new(),
            relations,
            relation_ids,
            frozen: false,
        }
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    /// All relation ids, including reserved and inverse relations.
    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    /// Relations that appear in the data (no reserved, no inverses).
    pub fn num_dataset_relations(&self) -> usize {
        (self.relations.len() - 2) / 2
    }

    pub fn entity_name(&self, id: EntityId) -> &str {
        &self.entities[id as usize]
    }

    pub fn relation_name(&self, id: RelationId) -> &str {
        &self.relations[id as usize]
    }

    pub fn entity_id(&self, name: &str) -> Option<EntityId> {
        self.entity_ids.get(name).copied()
    }

    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.relation_ids.get(name).copied()
    }

    pub fn is_reserved(r: RelationId) -> bool {
        r == START || r == NO_OP
    }

    pub fn inverse(r: RelationId) -> RelationId {
        if Self::is_reserved(r) {
            r
        } else {
            r ^ 1
        }
    }

    pub fn is_inverse(r: RelationId) -> bool {
        !Self::is_reserved(r) && r % 2 == 1
    }

    /// Id for `name`, adding it unless the vocabulary is frozen.
    pub fn entity(&mut self, name: &str) -> Result<EntityId> {
        if let Some(id) = self.entity_ids.get(name) {
            return Ok(*id);
        }
        if self.frozen {
            return Err(Error::Vocabulary {
                kind: "entity",
                name: name.to_string(),
            });
        }
        let id = self.entities.len() as EntityId;
        self.entities.push(name.to_string());
        self.entity_ids.insert(name.to_string(), id);
        Ok(id)
    }

    /// Id for a dataset relation, allocating it and its inverse unless frozen.
    pub fn relation(&mut self, name: &str) -> Result<RelationId> {
        if let Some(id) = self.relation_ids.get(name) {
            return Ok(*id);
        }
        if self.frozen || name.ends_with(INVERSE_MARKER) || name == START_NAME || name == NO_OP_NAME {
            return Err(Error::Vocabulary {
                kind: "relation",
                name: name.to_string(),
            });
        }
        let id = self.relations.len() as RelationId;
        let inv = format!("{name}{INVERSE_MARKER}");
        self.relations.push(name.to_string());
        self.relations.push(inv.clone());
        self.relation_ids.insert(name.to_string(), id);
        self.relation_ids.insert(inv, id + 1);
        Ok(id)
    }

    /// Writes `entities.txt` and `relations.txt` (one name per line, line = id).
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::write(dir.join("entities.txt"), lines(&self.entities))?;
        fs::write(dir.join("relations.txt"), lines(&self.relations))?;
        Ok(())
    }

    /// Reads a saved vocabulary; the result is frozen.
    pub fn load(dir: &Path) -> Result<Self> {
        let mut v = Self::new();
        let ents = fs::read_to_string(dir.join("entities.txt"))?;
        for name in ents.lines() {
            v.entity(name)?;
        }
        let rels_path = dir.join("relations.txt");
        let rels = fs::read_to_string(&rels_path)?;
        for (i, name) in rels.lines().enumerate() {
            let ok = match i {
                0 => name == START_NAME,
                1 => name == NO_OP_NAME,
                _ if i % 2 == 0 => v.relation(name).map(|id| id as usize == i).unwrap_or(false),
                _ => v.relation_id(name) == Some(i as RelationId),
            };
            if !ok {
                return Err(Error::Parse {
                    path: rels_path,
                    line: i + 1,
                    msg: format!("relation '{name}' breaks the reserved/inverse id layout"),
                });
            }
        }
        v.freeze();
        Ok(v)
    }
}

fn lines(names: &[String]) -> String {
    let mut s = names.join("\n");
    if !names.is_empty() {
        s.push('\n');
    }
    s
}
