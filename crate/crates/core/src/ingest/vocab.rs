//! Closed label vocabularies for conversational phases and communication
//! techniques, including their subcategories.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Which annotation scheme a tier follows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TierKind {
    Phases,
    Techniques,
}

impl TierKind {
    pub const ALL: [TierKind; 2] = [TierKind::Phases, TierKind::Techniques];

    pub fn as_str(self) -> &'static str {
        match self {
            TierKind::Phases => "phases",
            TierKind::Techniques => "techniques",
        }
    }

    pub fn parse(s: &str) -> Option<TierKind> {
        match s {
            "phases" => Some(TierKind::Phases),
            "techniques" => Some(TierKind::Techniques),
            _ => None,
        }
    }

    fn categories(self) -> &'static [Category] {
        match self {
            TierKind::Phases => PHASES,
            TierKind::Techniques => TECHNIQUES,
        }
    }

    /// Labels in table order. With `keep_subcategories`, every category with
    /// subcategories contributes itself (unspecified) followed by its subs.
    pub fn vocabulary(self, keep_subcategories: bool) -> Vec<Label> {
        let mut out = Vec::new();
        for (ci, cat) in self.categories().iter().enumerate() {
            out.push(Label {
                kind: self,
                category: ci as u8,
                sub: None,
            });
            if keep_subcategories {
                for si in 0..cat.subs.len() {
                    out.push(Label {
                        kind: self,
                        category: ci as u8,
                        sub: Some(si as u8),
                    });
                }
            }
        }
        out
    }
}

impl fmt::Display for TierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

struct Category {
    name: &'static str,
    subs: &'static [&'static str],
}

const PHASES: &[Category] = &[
    Category {
        name: "Beginning",
        subs: &["Greeting", "Smalltalk", "Time Frame", "Content Frame"],
    },
    Category {
        name: "Informational",
        subs: &[],
    },
    Category {
        name: "Argumentative",
        subs: &[],
    },
    Category {
        name: "Decision-Making",
        subs: &[],
    },
    Category {
        name: "Concluding",
        subs: &["Appreciative Reflection", "Appointment", "Farewell"],
    },
];

const TECHNIQUES: &[Category] = &[
    Category {
        name: "Verbalising",
        subs: &[
            "Undefined Attention Reaction",
            "Statement",
            "Clarifying Question",
            "Further Question",
        ],
    },
    Category {
        name: "Paraphrasing",
        subs: &[],
    },
    Category {
        name: "Structuring",
        subs: &[],
    },
];

/// One entry of a closed vocabulary: a category and optionally one of its
/// subcategories.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label {
    kind: TierKind,
    category: u8,
    sub: Option<u8>,
}

fn normalize(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

impl Label {
    /// Parses `Category`, `Subcategory` or `Category/Subcategory`, ignoring
    /// case, whitespace and hyphenation.
    pub fn parse(kind: TierKind, text: &str) -> Option<Label> {
        let cats = kind.categories();
        let find_cat = |name: &str| {
            let key = normalize(name);
            cats.iter().position(|c| normalize(c.name) == key)
        };
        if let Some((head, tail)) = text.split_once('/') {
            let ci = find_cat(head)?;
            let key = normalize(tail);
            let si = cats[ci].subs.iter().position(|s| normalize(s) == key)?;
            return Some(Label {
                kind,
                category: ci as u8,
                sub: Some(si as u8),
            });
        }
        if let Some(ci) = find_cat(text) {
            return Some(Label {
                kind,
                category: ci as u8,
                sub: None,
            });
        }
        let key = normalize(text);
        let mut hits = cats.iter().enumerate().flat_map(|(ci, c)| {
            c.subs
                .iter()
                .enumerate()
                .filter(|(_, s)| normalize(s) == key)
                .map(move |(si, _)| (ci, si))
        });
        let (ci, si) = hits.next()?;
        if hits.next().is_some() {
            return None;
        }
        Some(Label {
            kind,
            category: ci as u8,
            sub: Some(si as u8),
        })
    }

    pub fn kind(&self) -> TierKind {
        self.kind
    }

    pub fn category_name(&self) -> &'static str {
        self.kind.categories()[self.category as usize].name
    }

    pub fn subcategory_name(&self) -> Option<&'static str> {
        self.sub
            .map(|s| self.kind.categories()[self.category as usize].subs[s as usize])
    }

    /// The parent category of this label.
    pub fn collapsed(&self) -> Label {
        Label { sub: None, ..*self }
    }

    /// Canonical text form, `Category` or `Category/Subcategory`.
    pub fn name(&self) -> String {
        match self.subcategory_name() {
            Some(sub) => format!("{}/{}", self.category_name(), sub),
            None => self.category_name().to_string(),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}
