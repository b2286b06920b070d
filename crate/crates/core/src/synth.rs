//! Deterministic templated corpora whose answers are known by construction.
//!
//! [`planted_coref_corpus`] talks about one man and one woman, so every
//! pronoun resolves by gender alone. [`planted_relation_corpus`] states each
//! relation only through a pronoun in a later turn, so the relation of an
//! argument pair can be read off only by following that argument's chain.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dialogue::{ArgumentPair, ChainType, CoreferenceChain, Dialogue, Mention, Utterance};

pub const MALE_NAMES: [&str; 8] = ["John", "Peter", "Mark", "David", "Paul", "James", "Tom", "Steve"];
pub const FEMALE_NAMES: [&str; 8] = ["Mary", "Susan", "Anna", "Linda", "Kate", "Emma", "Julia", "Sarah"];
const PLACES: [&str; 6] = ["store", "park", "office", "party", "gym", "library"];
const ADJECTIVES: [&str; 5] = ["tired", "happy", "busy", "late", "sick"];
const TIMES: [&str; 4] = ["yesterday", "today", "again", "earlier"];
const THINGS: [&str; 5] = ["car", "dog", "bike", "phone", "house"];

/// Relation nouns of the relation corpus and the label each one states.
pub const RELATION_NOUNS: [(&str, &str); 6] = [
    ("boss", "per:boss"),
    ("neighbor", "per:neighbor"),
    ("roommate", "per:roommate"),
    ("friend", "per:friends"),
    ("client", "per:client"),
    ("cousin", "per:other_family"),
];

/// Slots of a template. `Male` / `Female` tokens join the respective chain.
#[derive(Clone, Copy)]
enum Slot {
    Word(&'static str),
    Male(&'static str),
    Female(&'static str),
    Place,
    Adj,
    Time,
    Thing,
}

use Slot::*;

const OPENERS: [&[Slot]; 2] = [
    &[Male("{M}"), Word("met"), Female("{F}"), Word("at"), Word("the"), Place, Word(".")],
    &[Female("{F}"), Word("met"), Male("{M}"), Word("at"), Word("the"), Place, Word(".")],
];

const TURNS: [&[Slot]; 9] = [
    &[Word("did"), Male("he"), Word("talk"), Word("to"), Female("her"), Word("?")],
    &[Female("she"), Word("said"), Male("he"), Word("was"), Adj, Word(".")],
    &[Male("he"), Word("called"), Female("her"), Time, Word(".")],
    &[Female("she"), Word("likes"), Male("his"), Thing, Word(".")],
    &[Male("he"), Word("is"), Adj, Time, Word(".")],
    &[Female("she"), Word("is"), Adj, Time, Word(".")],
    &[Word("maybe"), Female("she"), Word("saw"), Male("him"), Time, Word(".")],
    &[Male("his"), Thing, Word("is"), Word("at"), Word("the"), Place, Word(".")],
    &[Female("her"), Thing, Word("is"), Word("new"), Word(".")],
];

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// `n` two-speaker dialogues of 4 to 5 turns with one male and one female
/// person chain each.
pub fn planted_coref_corpus(n: usize, seed: u64) -> Vec<Dialogue> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let m = *MALE_NAMES.choose(&mut rng).expect("names");
            let f = *FEMALE_NAMES.choose(&mut rng).expect("names");
            let mut templates = vec![OPENERS[rng.gen_range(0..2)]];
            let k = rng.gen_range(3..=4);
            templates.extend(TURNS.choose_multiple(&mut rng, k).copied());
            let mut utterances = Vec::new();
            let (mut male, mut female) = (Vec::new(), Vec::new());
            for (u, tpl) in templates.iter().enumerate() {
                let mut toks = Vec::new();
                for slot in tpl.iter() {
                    let t = match *slot {
                        Word(w) => w.to_string(),
                        Male(w) => {
                            male.push((u, toks.len()));
                            if w == "{M}" { m.to_string() } else { w.to_string() }
                        }
                        Female(w) => {
                            female.push((u, toks.len()));
                            if w == "{F}" { f.to_string() } else { w.to_string() }
                        }
                        Place => PLACES.choose(&mut rng).expect("places").to_string(),
                        Adj => ADJECTIVES.choose(&mut rng).expect("adjectives").to_string(),
                        Time => TIMES.choose(&mut rng).expect("times").to_string(),
                        Thing => THINGS.choose(&mut rng).expect("things").to_string(),
                    };
                    toks.push(t);
                }
                toks[0] = capitalize(&toks[0]);
                let speaker = if u % 2 == 0 { "S1" } else { "S2" };
                utterances.push(Utterance::new(u, speaker, toks.join(" ")));
            }
            let mut d = Dialogue {
                id: format!("coref-{i}"),
                utterances,
                pairs: vec![ArgumentPair::new(m, f, &["per:friends"])],
                chains: Vec::new(),
            };
            let chain = |d: &Dialogue, head: &str, at: &[(usize, usize)]| CoreferenceChain {
                chain_type: ChainType::Person,
                head: head.to_string(),
                mentions: at.iter().map(|&(u, t)| d.mention(u, t, t).expect("template span")).collect(),
            };
            let (cm, cf) = (chain(&d, m, &male), chain(&d, f, &female));
            d.chains = if male[0] < female[0] { vec![cm, cf] } else { vec![cf, cm] };
            d
        })
        .collect()
}

const FILLERS: [&str; 4] = ["Really ?", "Interesting .", "Go on .", "Nice ."];

/// `n` dialogues in which S1 introduces a man and a woman, then names the
/// relation to each in separate turns that refer to them only as `he` and
/// `she`. Pairs are (S1, man) and (S1, woman), relations always distinct.
pub fn planted_relation_corpus(n: usize, seed: u64) -> Vec<Dialogue> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let m = *MALE_NAMES.choose(&mut rng).expect("names");
            let f = *FEMALE_NAMES.choose(&mut rng).expect("names");
            let rels: Vec<&(&str, &str)> = RELATION_NOUNS.choose_multiple(&mut rng, 2).collect();
            let (rm, rf) = (rels[0], rels[1]);
            let male_first_named = rng.gen_bool(0.5);
            let male_first_described = rng.gen_bool(0.5);
            let intro = if male_first_named {
                format!("I met {m} and {f} at the party .")
            } else {
                format!("I met {f} and {m} at the party .")
            };
            let (first, second) = if male_first_described {
                (format!("He is my {} .", rm.0), format!("She is my {} .", rf.0))
            } else {
                (format!("She is my {} .", rf.0), format!("He is my {} .", rm.0))
            };
            let filler = |rng: &mut ChaCha8Rng| *FILLERS.choose(rng).expect("fillers");
            let turns = [
                ("S1", intro),
                ("S2", filler(&mut rng).to_string()),
                ("S1", first),
                ("S2", filler(&mut rng).to_string()),
                ("S1", second),
            ];
            let utterances: Vec<Utterance> = turns.iter().enumerate().map(|(k, (s, t))| Utterance::new(k, *s, t.as_str())).collect();
            let mut d = Dialogue {
                id: format!("rel-{i}"),
                utterances,
                pairs: vec![
                    ArgumentPair::new("S1", m, &[rm.1]),
                    ArgumentPair::new("S1", f, &[rf.1]),
                ],
                chains: Vec::new(),
            };
            let (mi, fi) = if male_first_named { (2, 4) } else { (4, 2) };
            let (hu, su) = if male_first_described { (2, 4) } else { (4, 2) };
            let mention = |d: &Dialogue, u: usize, t: usize| -> Mention { d.mention(u, t, t).expect("template span") };
            d.chains = vec![
                CoreferenceChain {
                    chain_type: ChainType::Speaker,
                    head: "S1".into(),
                    mentions: vec![mention(&d, 0, 0), mention(&d, 2, 2), mention(&d, 4, 2)],
                },
                CoreferenceChain {
                    chain_type: ChainType::Person,
                    head: m.into(),
                    mentions: vec![mention(&d, 0, mi), mention(&d, hu, 0)],
                },
                CoreferenceChain {
                    chain_type: ChainType::Person,
                    head: f.into(),
                    mentions: vec![mention(&d, 0, fi), mention(&d, su, 0)],
                },
            ];
            d
        })
        .collect()
}

/// Splits a corpus into consecutive train / dev / test parts.
pub fn split3(mut ds: Vec<Dialogue>, train: usize, dev: usize) -> (Vec<Dialogue>, Vec<Dialogue>, Vec<Dialogue>) {
    let test = ds.split_off((train + dev).min(ds.len()));
    let dev_part = ds.split_off(train.min(ds.len()));
    (ds, dev_part, test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dialogue::validate_dialogue;

    #[test]
    fn planted_coref_dialogues_validate_and_repeat() {
        let a = planted_coref_corpus(30, 4);
        assert_eq!(a, planted_coref_corpus(30, 4));
        assert_ne!(a, planted_coref_corpus(30, 5));
        for d in &a {
            assert!(validate_dialogue(d).is_valid(), "{}", d.id);
            assert_eq!(d.chains.len(), 2);
            for c in &d.chains {
                assert!(c.mentions.len() >= 2);
                let male = MALE_NAMES.contains(&c.head.as_str());
                for m in &c.mentions[1..] {
                    let w = m.surface.to_lowercase();
                    let ok = if male { ["he", "him", "his"].contains(&w.as_str()) } else { ["she", "her"].contains(&w.as_str()) };
                    assert!(ok || m.surface == c.head, "{} in {}", m.surface, c.head);
                }
            }
        }
    }

    #[test]
    fn relation_dialogues_state_relations_through_pronouns() {
        let ds = planted_relation_corpus(40, 9);
        assert_eq!(ds, planted_relation_corpus(40, 9));
        for d in &ds {
            assert!(validate_dialogue(d).is_valid(), "{}", d.id);
            assert_ne!(d.pairs[0].relations, d.pairs[1].relations);
            for p in &d.pairs {
                let ci = d.chain_of(&p.object).unwrap().unwrap();
                let pron = d.chains[ci].mentions[1].clone();
                let noun = &d.utterances[pron.utterance_index].tokens[3];
                let label = RELATION_NOUNS.iter().find(|(n, _)| n == noun).unwrap().1;
                assert_eq!(p.relations, vec![label.to_string()]);
                // the object's name never shares a turn with its relation noun
                assert!(!d.utterances[pron.utterance_index].tokens.contains(&p.object));
            }
        }
    }
}
