use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{EntityId, RelationId, Vocabulary};
use crate::{Error, Result};

/// A fact `(subject, relation, object)` over vocabulary ids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub subject: EntityId,
    pub relation: RelationId,
    pub object: EntityId,
}

impl Triple {
    pub fn new(subject: EntityId, relation: RelationId, object: EntityId) -> Self {
        Self {
            subject,
            relation,
            object,
        }
    }

    /// `(o, r⁻¹, s)`.
    pub fn inverse(&self) -> Self {
        Self::new(self.object, Vocabulary::inverse(self.relation), self.subject)
    }
}

/// Reads tab-separated `subject<TAB>relation<TAB>object` lines.
///
/// Names are indexed through `vocab`; a frozen vocabulary turns unknown
/// names into errors. Blank lines are skipped.
pub fn load_triples(path: &Path, vocab: &mut Vocabulary) -> Result<Vec<Triple>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        let s = vocab.entity(fields[0])?;
        let r = vocab.relation(fields[1])?;
        let o = vocab.entity(fields[2])?;
        out.push(Triple::new(s, r, o));
    }
    Ok(out)
}

pub fn write_triples(path: &Path, triples: &[Triple], vocab: &Vocabulary) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for t in triples {
        writeln!(
            w,
            "{}\t{}\t{}",
            vocab.entity_name(t.subject),
            vocab.relation_name(t.relation),
            vocab.entity_name(t.object)
        )?;
    }
    w.flush()?;
    Ok(())
}
