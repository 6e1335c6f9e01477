use std::collections::BTreeSet;

use gridcomm::language::{
    encode_concept, generate_instruction, parse_instruction, Adjective, ConceptVector, GrammarKind, Instruction,
    Lexicon, LexiconConfig, CONCEPT_VERBS,
};
use gridcomm::world::{Color, ObjectSpec, Shape, TaskSpec, Verb, Weight};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const NAMES: [&str; 18] = [
    "1", "2", "3", "4", "square", "cylinder", "circle", "diamond", "r", "b", "y", "g", "light", "heavy", "walk", "push",
    "pull", "pickup",
];

/// Hand-built expectation: the named positions that should be set.
fn expected(size: u8, shape: Shape, color: Color, weight: Weight, verb: Verb) -> [u8; 18] {
    let shape_name = shape.name();
    let color_name = &color.name()[..1];
    let mut out = [0u8; 18];
    for (i, name) in NAMES.iter().enumerate() {
        let hit = *name == size.to_string()
            || *name == shape_name
            || (8..12).contains(&i) && *name == color_name
            || *name == weight.name()
            || *name == verb.name();
        out[i] = u8::from(hit);
    }
    out
}

fn all_concepts() -> impl Iterator<Item = (u8, Shape, Color, Weight, Verb)> {
    (1..=4u8).flat_map(|size| {
        Shape::ALL.into_iter().flat_map(move |shape| {
            Color::ALL.into_iter().flat_map(move |color| {
                Weight::ALL
                    .into_iter()
                    .flat_map(move |weight| CONCEPT_VERBS.into_iter().map(move |verb| (size, shape, color, weight, verb)))
            })
        })
    })
}

#[test]
fn every_concept_matches_the_layout() {
    let lex = Lexicon::default();
    let mut seen = BTreeSet::new();
    for (size, shape, color, weight, verb) in all_concepts() {
        let target = ObjectSpec::new(0, shape, color, size, weight).unwrap();
        let adjectives = [Adjective::Size(size), Adjective::Color(color), Adjective::Weight(weight)];
        // fully specified and bare instructions encode identically
        for adj in [&adjectives[..], &[]] {
            let instr = lex.render(verb, adj, shape, 1).unwrap();
            let parsed = lex.parse(&instr).unwrap();
            let c = encode_concept(&parsed, &target).unwrap();
            assert_eq!(*c.bits(), expected(size, shape, color, weight, verb), "{instr}");
            assert!(c.is_well_formed());
            assert_eq!(c.set_bits().len(), 5);
            let parts = c.parts().unwrap();
            assert_eq!((parts.size, parts.shape, parts.color, parts.weight, parts.verb), (size, shape, color, weight, verb));
        }
        let c = ConceptVector::from_parts(gridcomm::language::ConceptParts { size, shape, color, weight, verb }).unwrap();
        seen.insert(c.to_index());
    }
    assert_eq!(seen.len(), 512);
}

#[test]
fn drop_has_no_concept_slot() {
    let lex = Lexicon::default();
    let target = ObjectSpec::new(0, Shape::Square, Color::Red, 1, Weight::Light).unwrap();
    let parsed = lex.parse(&lex.render(Verb::Drop, &[], Shape::Square, 1).unwrap()).unwrap();
    assert!(encode_concept(&parsed, &target).is_err());
}

#[test]
fn mismatched_description_is_rejected() {
    let target = ObjectSpec::new(0, Shape::Square, Color::Red, 1, Weight::Light).unwrap();
    for text in ["walk to the blue square", "walk to the circle", "walk to the size-2 square", "walk to the heavy square"] {
        let parsed = parse_instruction(&Instruction::from_text(text)).unwrap();
        assert!(encode_concept(&parsed, &target).is_err(), "{text}");
    }
}

#[test]
fn custom_lexicon_round_trips() {
    let cfg: LexiconConfig = toml::from_str(
        r#"
        verbs = { push = "shove" }
        colors = { red = "crimson" }
        adverbs = ["two times", "three times", "four times"]
        "#,
    )
    .unwrap();
    let lex = Lexicon::from_config(&cfg).unwrap();
    let instr = lex.render(Verb::Push, &[Adjective::Color(Color::Red)], Shape::Circle, 3).unwrap();
    assert_eq!(instr.to_string(), "shove the crimson circle three times");
    let parsed = lex.parse(&instr).unwrap();
    assert_eq!((parsed.verb, parsed.count), (Verb::Push, 3));
    assert!(lex.parse(&Instruction::from_text("push the circle")).is_err());
}

fn arb_target() -> impl Strategy<Value = ObjectSpec> {
    (1u8..=4, 0usize..4, 0usize..4, 0usize..2)
        .prop_map(|(s, sh, c, w)| ObjectSpec::new(3, Shape::ALL[sh], Color::ALL[c], s, Weight::ALL[w]).unwrap())
}

proptest! {
    #[test]
    fn generated_instructions_parse_back(target in arb_target(), verb in 0usize..4, count in 1u32..=4, seed in any::<u64>()) {
        let verb = CONCEPT_VERBS[verb];
        let (grammar, count) = match verb {
            Verb::Walk => (GrammarKind::SimpleIntrans, 1),
            Verb::Pickup => (GrammarKind::SimpleTrans, 1),
            _ => (GrammarKind::SimpleTrans, count),
        };
        let task = TaskSpec::new(verb, count, target.id);
        let instr = generate_instruction(&task, &target, grammar, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let parsed = parse_instruction(&instr).unwrap();
        prop_assert_eq!(parsed.verb, verb);
        prop_assert_eq!(parsed.noun, target.shape);
        prop_assert_eq!(parsed.count, count);
        let c = encode_concept(&parsed, &target).unwrap();
        prop_assert_eq!(*c.bits(), expected(target.size, target.shape, target.color, target.weight, verb));
        // text round trip
        prop_assert_eq!(parse_instruction(&Instruction::from_text(&instr.to_string())).unwrap(), parsed);
    }

    #[test]
    fn parser_never_panics(words in prop::collection::vec("[a-z0-9-]{1,8}", 0..8)) {
        let _ = parse_instruction(&Instruction::from_text(&words.join(" ")));
    }
}
