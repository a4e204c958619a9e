use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::FlowRecord;

/// Ground-truth traffic category of a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    Normal,
    #[serde(rename = "DoS")]
    Dos,
    Probe,
    U2R,
    R2L,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Normal,
        Category::Dos,
        Category::Probe,
        Category::U2R,
        Category::R2L,
    ];
    pub const ATTACKS: [Category; 4] = [Category::Dos, Category::Probe, Category::U2R, Category::R2L];

    pub fn is_attack(self) -> bool {
        self != Category::Normal
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Normal => "Normal",
            Category::Dos => "DoS",
            Category::Probe => "Probe",
            Category::U2R => "U2R",
            Category::R2L => "R2L",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" => Ok(Category::Normal),
            "dos" => Ok(Category::Dos),
            "probe" => Ok(Category::Probe),
            "u2r" => Ok(Category::U2R),
            "r2l" => Ok(Category::R2L),
            other => Err(Error::Input(format!("unknown category {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomyEntry {
    pub category: Category,
    /// Attack appears only in the test split.
    pub new: bool,
}

/// Attack-name → category table.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Taxonomy {
    entries: BTreeMap<String, TaxonomyEntry>,
}

const BUILTIN: &str = include_str!("../../data/attack_taxonomy");

impl Taxonomy {
    /// The NSL-KDD table shipped with the crate (`data/attack_taxonomy`).
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("shipped taxonomy parses")
    }

    /// Parses `name,category[,new]` rows; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = |message: String| Error::Parse { line: i + 1, message };
            if !(2..=3).contains(&cols.len()) {
                return Err(bad(format!("expected name,category[,new], got {line:?}")));
            }
            let category: Category = cols[1].parse().map_err(|e: Error| bad(e.to_string()))?;
            if category == Category::Normal {
                return Err(bad("attack names cannot map to Normal".into()));
            }
            let new = match cols.get(2) {
                None => false,
                Some(&"new") => true,
                Some(other) => return Err(bad(format!("unknown flag {other:?}"))),
            };
            entries.insert(cols[0].to_ascii_lowercase(), TaxonomyEntry { category, new });
        }
        Ok(Taxonomy { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, e) in &self.entries {
            out.push_str(name);
            out.push(',');
            out.push_str(&e.category.as_str().to_ascii_lowercase());
            if e.new {
                out.push_str(",new");
            }
            out.push('\n');
        }
        out
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, name: &str) -> Option<TaxonomyEntry> {
        self.entries.get(&name.trim().to_ascii_lowercase()).copied()
    }

    /// Maps a raw label to its category. Unlisted attack names are an error,
    /// never silently Normal.
    pub fn category_of(&self, raw_label: &str) -> Result<Category> {
        let name = raw_label.trim().to_ascii_lowercase();
        if name == "normal" {
            return Ok(Category::Normal);
        }
        self.entries
            .get(&name)
            .map(|e| e.category)
            .ok_or(Error::UnknownAttack(vec![name]))
    }

    /// True when the label names an attack flagged as test-only.
    pub fn is_new(&self, raw_label: &str) -> bool {
        self.entry(raw_label).is_some_and(|e| e.new)
    }

    /// Labels every record, collecting all unlisted names into one error.
    pub fn label_records(&self, records: &[FlowRecord]) -> Result<Vec<Category>> {
        let mut missing = BTreeSet::new();
        let mut out = Vec::with_capacity(records.len());
        for r in records {
            match self.category_of(r.label()?) {
                Ok(c) => out.push(c),
                Err(Error::UnknownAttack(names)) => {
                    missing.extend(names);
                    out.push(Category::Normal);
                }
                Err(e) => return Err(e),
            }
        }
        if missing.is_empty() {
            Ok(out)
        } else {
            Err(Error::UnknownAttack(missing.into_iter().collect()))
        }
    }
}

pub fn map_attack_category(taxonomy: &Taxonomy, raw_label: &str) -> Result<Category> {
    taxonomy.category_of(raw_label)
}

/// Known/new record counts per category (Table-2 style).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Census {
    pub records: usize,
    pub normal: usize,
    /// Indexed like [`Category::ATTACKS`]: (known, new).
    pub attacks: [(usize, usize); 4],
}

impl Census {
    pub fn compute(taxonomy: &Taxonomy, records: &[FlowRecord]) -> Result<Self> {
        let categories = taxonomy.label_records(records)?;
        let mut census = Census {
            records: records.len(),
            ..Default::default()
        };
        for (r, c) in records.iter().zip(&categories) {
            match c {
                Category::Normal => census.normal += 1,
                c => {
                    let slot = &mut census.attacks[attack_index(*c)];
                    if taxonomy.is_new(r.label()?) {
                        slot.1 += 1;
                    } else {
                        slot.0 += 1;
                    }
                }
            }
        }
        Ok(census)
    }

    pub fn known(&self, c: Category) -> usize {
        self.attacks[attack_index(c)].0
    }

    pub fn new_attacks(&self, c: Category) -> usize {
        self.attacks[attack_index(c)].1
    }

    pub fn total(&self, c: Category) -> usize {
        match c {
            Category::Normal => self.normal,
            c => self.known(c) + self.new_attacks(c),
        }
    }

    pub fn render(&self) -> String {
        let mut out = format!("{:<14}{:>8}{:>8}{:>8}{:>8}\n", "", "DoS", "R2L", "U2R", "Probe");
        let order = [Category::Dos, Category::R2L, Category::U2R, Category::Probe];
        for (name, known) in [("Known attacks", true), ("New attacks", false)] {
            out.push_str(&format!("{name:<14}"));
            for c in order {
                let v = if known { self.known(c) } else { self.new_attacks(c) };
                out.push_str(&format!("{v:>8}"));
            }
            out.push('\n');
            out.push_str(&format!("{:<14}", ""));
            for c in order {
                let v = if known { self.known(c) } else { self.new_attacks(c) };
                let total = self.total(c);
                let pct = if total == 0 { 0.0 } else { 100.0 * v as f64 / total as f64 };
                out.push_str(&format!("{:>7.2}%", pct));
            }
            out.push('\n');
        }
        out.push_str(&format!("{:<14}", "Total"));
        for c in order {
            out.push_str(&format!("{:>8}", self.total(c)));
        }
        out.push_str(&format!("\nNormal: {}  Records: {}\n", self.normal, self.records));
        out
    }
}

fn attack_index(c: Category) -> usize {
    Category::ATTACKS
        .iter()
        .position(|a| *a == c)
        .expect("attack category")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_has_39_attacks() {
        let t = Taxonomy::builtin();
        assert_eq!(t.len(), 39);
        let new = t.entries.values().filter(|e| e.new).count();
        assert_eq!(new, 17);
    }

    #[test]
    fn maps_reference_names() {
        let t = Taxonomy::builtin();
        assert_eq!(map_attack_category(&t, "normal").unwrap(), Category::Normal);
        assert_eq!(map_attack_category(&t, "NORMAL").unwrap(), Category::Normal);
        assert_eq!(map_attack_category(&t, "neptune").unwrap(), Category::Dos);
        assert_eq!(map_attack_category(&t, "satan").unwrap(), Category::Probe);
        assert_eq!(map_attack_category(&t, "buffer_overflow").unwrap(), Category::U2R);
        assert_eq!(map_attack_category(&t, "Guess_Passwd").unwrap(), Category::R2L);
        assert!(t.is_new("mscan"));
        assert!(!t.is_new("smurf"));
    }

    #[test]
    fn unknown_name_is_an_error() {
        let t = Taxonomy::builtin();
        match map_attack_category(&t, "zeroday") {
            Err(Error::UnknownAttack(names)) => assert_eq!(names, vec!["zeroday".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn text_roundtrip_and_bad_rows() {
        let t = Taxonomy::builtin();
        assert_eq!(Taxonomy::parse(&t.to_text()).unwrap(), t);
        assert!(Taxonomy::parse("foo").is_err());
        assert!(Taxonomy::parse("foo,bar").is_err());
        assert!(Taxonomy::parse("foo,normal").is_err());
        assert!(Taxonomy::parse("foo,dos,old").is_err());
    }
}
