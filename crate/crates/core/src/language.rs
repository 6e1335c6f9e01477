//! Template-grammar instructions, their parser, and the speaker's 18-bit
//! concept vector.
//!
//! Template: `VERB [to] the [SIZE] [COLOR] [WEIGHT] NOUN [ADVERB]`, where `to`
//! appears exactly for the intransitive verb `walk`, sizes render as
//! `size-N`, and counts 2..=4 render as a numeral adverb.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{Color, ObjectSpec, Shape, TaskSpec, Verb, Weight, MAX_SIZE, MIN_SIZE};

pub const CONCEPT_BITS: usize = 18;
pub const MAX_COUNT: u32 = 4;

/// Start offsets and widths of the five one-hot groups of a concept vector:
/// size, shape, color, weight, task.
pub const CONCEPT_GROUPS: [(usize, usize); 5] = [(0, 4), (4, 4), (8, 4), (12, 2), (14, 4)];

/// Verbs that have a task slot in the concept vector, in bit order.
pub const CONCEPT_VERBS: [Verb; 4] = [Verb::Walk, Verb::Push, Verb::Pull, Verb::Pickup];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrammarKind {
    SimpleIntrans,
    SimpleTrans,
}

impl GrammarKind {
    pub fn verbs(self) -> &'static [Verb] {
        match self {
            GrammarKind::SimpleIntrans => &[Verb::Walk],
            GrammarKind::SimpleTrans => &[Verb::Push, Verb::Pull, Verb::Pickup],
        }
    }

    pub fn admits(self, verb: Verb) -> bool {
        self.verbs().contains(&verb)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LanguageError {
    #[error("verb `{verb}` is not allowed by grammar {grammar:?}")]
    GrammarMismatch { verb: &'static str, grammar: GrammarKind },
    #[error("count {0} cannot be expressed (supported 1..=4)")]
    UnsupportedCount(u32),
    #[error("unknown token `{token}` at position {position}")]
    UnknownToken { position: usize, token: String },
    #[error("unexpected token `{token}` at position {position}, expected {expected}")]
    UnexpectedToken { position: usize, token: String, expected: &'static str },
    #[error("instruction ended early, expected {expected}")]
    UnexpectedEnd { expected: &'static str },
    #[error("verb `drop` has no slot in the concept vector")]
    NoConceptSlot,
    #[error("instruction attribute `{0}` disagrees with the target object")]
    TargetMismatch(String),
    #[error("invalid lexicon: {0}")]
    Lexicon(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Instruction {
    pub tokens: Vec<String>,
}

impl Instruction {
    pub fn from_text(text: &str) -> Self {
        Self { tokens: text.split_whitespace().map(str::to_lowercase).collect() }
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tokens.join(" "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adjective {
    Size(u8),
    Color(Color),
    Weight(Weight),
}

impl Adjective {
    fn slot(&self) -> usize {
        match self {
            Adjective::Size(_) => 0,
            Adjective::Color(_) => 1,
            Adjective::Weight(_) => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedInstruction {
    pub verb: Verb,
    /// At most one per kind, in template order (size, color, weight).
    pub adjectives: Vec<Adjective>,
    pub noun: Shape,
    pub count: u32,
}

/// Plain-text lexicon section. Every key is optional; missing keys keep the
/// default surface word.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LexiconConfig {
    #[serde(default)]
    pub verbs: BTreeMap<String, String>,
    #[serde(default)]
    pub shapes: BTreeMap<String, String>,
    #[serde(default)]
    pub colors: BTreeMap<String, String>,
    #[serde(default)]
    pub weights: BTreeMap<String, String>,
    /// Adverbs for counts 2, 3, 4; multi-word phrases allowed.
    pub adverbs: Option<Vec<String>>,
    pub size_prefix: Option<String>,
    pub preposition: Option<String>,
    pub determiner: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    verbs: BTreeMap<Verb, String>,
    shapes: BTreeMap<Shape, String>,
    colors: BTreeMap<Color, String>,
    weights: BTreeMap<Weight, String>,
    adverbs: Vec<Vec<String>>,
    size_prefix: String,
    preposition: String,
    determiner: String,
}

impl Default for Lexicon {
    fn default() -> Self {
        Self {
            verbs: Verb::ALL.iter().map(|v| (*v, v.name().to_string())).collect(),
            shapes: Shape::ALL.iter().map(|s| (*s, s.name().to_string())).collect(),
            colors: Color::ALL.iter().map(|c| (*c, c.name().to_string())).collect(),
            weights: Weight::ALL.iter().map(|w| (*w, w.name().to_string())).collect(),
            adverbs: vec![vec!["twice".into()], vec!["thrice".into()], vec!["four".into(), "times".into()]],
            size_prefix: "size-".into(),
            preposition: "to".into(),
            determiner: "the".into(),
        }
    }
}

fn override_words<K: Ord + Copy>(
    table: &mut BTreeMap<K, String>,
    overrides: &BTreeMap<String, String>,
    canon: impl Fn(K) -> &'static str,
    kind: &str,
) -> Result<(), LanguageError> {
    for (key, word) in overrides {
        let k = table
            .keys()
            .copied()
            .find(|k| canon(*k) == key)
            .ok_or_else(|| LanguageError::Lexicon(format!("unknown {kind} `{key}`")))?;
        table.insert(k, word.clone());
    }
    Ok(())
}

impl Lexicon {
    pub fn from_config(cfg: &LexiconConfig) -> Result<Self, LanguageError> {
        let mut lex = Lexicon::default();
        override_words(&mut lex.verbs, &cfg.verbs, Verb::name, "verb")?;
        override_words(&mut lex.shapes, &cfg.shapes, Shape::name, "shape")?;
        override_words(&mut lex.colors, &cfg.colors, Color::name, "color")?;
        override_words(&mut lex.weights, &cfg.weights, Weight::name, "weight")?;
        if let Some(adverbs) = &cfg.adverbs {
            if adverbs.len() != (MAX_COUNT - 1) as usize {
                return Err(LanguageError::Lexicon("exactly three adverbs (counts 2, 3, 4) required".into()));
            }
            lex.adverbs = adverbs
                .iter()
                .map(|a| a.split_whitespace().map(str::to_lowercase).collect())
                .collect();
        }
        if let Some(p) = &cfg.size_prefix {
            lex.size_prefix = p.clone();
        }
        if let Some(p) = &cfg.preposition {
            lex.preposition = p.clone();
        }
        if let Some(d) = &cfg.determiner {
            lex.determiner = d.clone();
        }
        lex.check()?;
        Ok(lex)
    }

    fn check(&self) -> Result<(), LanguageError> {
        let mut seen = std::collections::BTreeSet::new();
        let singles = self
            .verbs
            .values()
            .chain(self.shapes.values())
            .chain(self.colors.values())
            .chain(self.weights.values())
            .chain([&self.preposition, &self.determiner])
            .chain(self.adverbs.iter().map(|a| &a[0]));
        for w in singles {
            if w.is_empty() || w.contains(char::is_whitespace) || w != &w.to_lowercase() {
                return Err(LanguageError::Lexicon(format!("word `{w}` must be a single lowercase token")));
            }
            if w.starts_with(&self.size_prefix) {
                return Err(LanguageError::Lexicon(format!("word `{w}` collides with the size prefix")));
            }
            if !seen.insert(w.clone()) {
                return Err(LanguageError::Lexicon(format!("word `{w}` used twice")));
            }
        }
        if self.adverbs.iter().any(Vec::is_empty) {
            return Err(LanguageError::Lexicon("empty adverb".into()));
        }
        Ok(())
    }

    /// Renders an instruction with an explicit adjective set.
    pub fn render(
        &self,
        verb: Verb,
        adjectives: &[Adjective],
        noun: Shape,
        count: u32,
    ) -> Result<Instruction, LanguageError> {
        if count == 0 || count > MAX_COUNT {
            return Err(LanguageError::UnsupportedCount(count));
        }
        let mut adjectives = adjectives.to_vec();
        adjectives.sort_by_key(Adjective::slot);
        let mut tokens = vec![self.verbs[&verb].clone()];
        if verb == Verb::Walk {
            tokens.push(self.preposition.clone());
        }
        tokens.push(self.determiner.clone());
        for adj in adjectives {
            tokens.push(match adj {
                Adjective::Size(s) => format!("{}{}", self.size_prefix, s),
                Adjective::Color(c) => self.colors[&c].clone(),
                Adjective::Weight(w) => self.weights[&w].clone(),
            });
        }
        tokens.push(self.shapes[&noun].clone());
        if count > 1 {
            tokens.extend(self.adverbs[(count - 2) as usize].iter().cloned());
        }
        Ok(Instruction { tokens })
    }

    /// Samples an instruction for `task` on `target`; each of size, color and
    /// weight is named independently with probability 1/2.
    pub fn generate<R: Rng + ?Sized>(
        &self,
        task: &TaskSpec,
        target: &ObjectSpec,
        grammar: GrammarKind,
        rng: &mut R,
    ) -> Result<Instruction, LanguageError> {
        if !grammar.admits(task.verb) {
            return Err(LanguageError::GrammarMismatch { verb: task.verb.name(), grammar });
        }
        let mut adjectives = Vec::new();
        if rng.gen_bool(0.5) {
            adjectives.push(Adjective::Size(target.size));
        }
        if rng.gen_bool(0.5) {
            adjectives.push(Adjective::Color(target.color));
        }
        if rng.gen_bool(0.5) {
            adjectives.push(Adjective::Weight(target.weight));
        }
        self.render(task.verb, &adjectives, target.shape, task.count)
    }

    pub fn parse(&self, instr: &Instruction) -> Result<ParsedInstruction, LanguageError> {
        let toks = &instr.tokens;
        let mut pos = 0;
        let next = |pos: usize, expected: &'static str| -> Result<&str, LanguageError> {
            toks.get(pos).map(String::as_str).ok_or(LanguageError::UnexpectedEnd { expected })
        };

        let word = next(pos, "a verb")?;
        let verb = lookup(&self.verbs, word).ok_or_else(|| self.reject(pos, word, "a verb"))?;
        pos += 1;

        if verb == Verb::Walk {
            let word = next(pos, "preposition")?;
            if word != self.preposition {
                return Err(self.reject(pos, word, "preposition"));
            }
            pos += 1;
        }
        let word = next(pos, "determiner")?;
        if word != self.determiner {
            return Err(self.reject(pos, word, "determiner"));
        }
        pos += 1;

        let mut adjectives: Vec<Adjective> = Vec::new();
        let noun = loop {
            let word = next(pos, "an adjective or noun")?;
            if let Some(shape) = lookup(&self.shapes, word) {
                pos += 1;
                break shape;
            }
            let adj = self
                .adjective(word)
                .ok_or_else(|| self.reject(pos, word, "an adjective or noun"))?;
            if adjectives.last().is_some_and(|prev| prev.slot() >= adj.slot()) {
                return Err(LanguageError::UnexpectedToken {
                    position: pos,
                    token: word.to_string(),
                    expected: "adjectives in size, color, weight order without repeats",
                });
            }
            adjectives.push(adj);
            pos += 1;
        };

        let rest = &toks[pos..];
        let count = if rest.is_empty() {
            1
        } else {
            let idx = self
                .adverbs
                .iter()
                .position(|a| a.as_slice() == rest)
                .ok_or_else(|| self.reject(pos, &rest[0], "a numeral adverb or end of instruction"))?;
            idx as u32 + 2
        };
        Ok(ParsedInstruction { verb, adjectives, noun, count })
    }

    fn adjective(&self, word: &str) -> Option<Adjective> {
        if let Some(c) = lookup(&self.colors, word) {
            return Some(Adjective::Color(c));
        }
        if let Some(w) = lookup(&self.weights, word) {
            return Some(Adjective::Weight(w));
        }
        let digits = word.strip_prefix(&self.size_prefix)?;
        let size: u8 = digits.parse().ok()?;
        (MIN_SIZE..=MAX_SIZE).contains(&size).then_some(Adjective::Size(size))
    }

    fn known(&self, word: &str) -> bool {
        self.verbs.values().any(|w| w == word)
            || self.shapes.values().any(|w| w == word)
            || self.adjective(word).is_some()
            || word == self.preposition
            || word == self.determiner
            || self.adverbs.iter().flatten().any(|w| w == word)
    }

    fn reject(&self, position: usize, token: &str, expected: &'static str) -> LanguageError {
        if self.known(token) {
            LanguageError::UnexpectedToken { position, token: token.to_string(), expected }
        } else {
            LanguageError::UnknownToken { position, token: token.to_string() }
        }
    }
}

fn lookup<K: Copy>(table: &BTreeMap<K, String>, word: &str) -> Option<K> {
    table.iter().find(|(_, w)| w.as_str() == word).map(|(k, _)| *k)
}

fn default_lexicon() -> &'static Lexicon {
    static LEXICON: OnceLock<Lexicon> = OnceLock::new();
    LEXICON.get_or_init(Lexicon::default)
}

pub fn generate_instruction<R: Rng + ?Sized>(
    task: &TaskSpec,
    target: &ObjectSpec,
    grammar: GrammarKind,
    rng: &mut R,
) -> Result<Instruction, LanguageError> {
    default_lexicon().generate(task, target, grammar, rng)
}

pub fn parse_instruction(instr: &Instruction) -> Result<ParsedInstruction, LanguageError> {
    default_lexicon().parse(instr)
}

/// Speaker input: `[1, 2, 3, 4, square, cylinder, circle, diamond, r, b, y, g,
/// light, heavy, walk, push, pull, pickup]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConceptVector(pub [u8; CONCEPT_BITS]);

/// Decoded contents of a fully specified concept vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConceptParts {
    pub size: u8,
    pub shape: Shape,
    pub color: Color,
    pub weight: Weight,
    pub verb: Verb,
}

impl ConceptVector {
    pub fn from_parts(parts: ConceptParts) -> Result<Self, LanguageError> {
        let task = CONCEPT_VERBS
            .iter()
            .position(|v| *v == parts.verb)
            .ok_or(LanguageError::NoConceptSlot)?;
        let mut bits = [0u8; CONCEPT_BITS];
        bits[(parts.size - MIN_SIZE) as usize] = 1;
        bits[4 + parts.shape.index()] = 1;
        bits[8 + parts.color.index()] = 1;
        bits[12 + parts.weight.index()] = 1;
        bits[14 + task] = 1;
        Ok(ConceptVector(bits))
    }

    pub fn bits(&self) -> &[u8; CONCEPT_BITS] {
        &self.0
    }

    pub fn set_bits(&self) -> Vec<usize> {
        (0..CONCEPT_BITS).filter(|&i| self.0[i] == 1).collect()
    }

    /// Index of the set bit within each one-hot group (`None` when the group is empty
    /// or not one-hot).
    pub fn group_indices(&self) -> [Option<usize>; 5] {
        CONCEPT_GROUPS.map(|(start, width)| {
            let set: Vec<usize> = (0..width).filter(|i| self.0[start + i] == 1).collect();
            (set.len() == 1).then(|| set[0])
        })
    }

    pub fn is_well_formed(&self) -> bool {
        self.0.iter().all(|&b| b <= 1)
            && CONCEPT_GROUPS
                .iter()
                .all(|&(s, w)| self.0[s..s + w].iter().filter(|&&b| b == 1).count() <= 1)
            && self.0[14..18].contains(&1)
    }

    pub fn parts(&self) -> Option<ConceptParts> {
        let [size, shape, color, weight, verb] = self.group_indices();
        Some(ConceptParts {
            size: size? as u8 + MIN_SIZE,
            shape: Shape::ALL[shape?],
            color: Color::ALL[color?],
            weight: Weight::ALL[weight?],
            verb: CONCEPT_VERBS[verb?],
        })
    }

    /// Bits packed into an integer, bit 0 first.
    pub fn to_index(&self) -> u32 {
        self.0.iter().enumerate().map(|(i, &b)| u32::from(b) << i).sum()
    }
}

/// Speaker input for a parsed instruction. Attributes omitted from the
/// instruction are still taken from the target object; any attribute the
/// instruction does name must agree with it.
pub fn encode_concept(parsed: &ParsedInstruction, target: &ObjectSpec) -> Result<ConceptVector, LanguageError> {
    if parsed.verb == Verb::Drop {
        return Err(LanguageError::NoConceptSlot);
    }
    if parsed.noun != target.shape {
        return Err(LanguageError::TargetMismatch(parsed.noun.name().into()));
    }
    for adj in &parsed.adjectives {
        let agrees = match *adj {
            Adjective::Size(s) => s == target.size,
            Adjective::Color(c) => c == target.color,
            Adjective::Weight(w) => w == target.weight,
        };
        if !agrees {
            return Err(LanguageError::TargetMismatch(format!("{adj:?}")));
        }
    }
    ConceptVector::from_parts(ConceptParts {
        size: target.size,
        shape: target.shape,
        color: target.color,
        weight: target.weight,
        verb: parsed.verb,
    })
}
