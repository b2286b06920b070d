//! Small hand-annotated dialogues used across tests, the CLI and the Python
//! bindings. Token offsets are inclusive and refer to the canonical tokenizer.

use crate::dialogue::{ArgumentPair, ChainType, CoreferenceChain, Dialogue};

/// Builds a chain, reading each mention's surface from the dialogue tokens.
///
/// Panics on an out-of-range span; fixtures are static data.
pub fn chain(d: &Dialogue, chain_type: ChainType, head: &str, spans: &[(usize, usize, usize)]) -> CoreferenceChain {
    CoreferenceChain {
        chain_type,
        head: head.into(),
        mentions: spans
            .iter()
            .map(|&(u, s, e)| d.mention(u, s, e).unwrap_or_else(|| panic!("bad fixture span {u}:{s}-{e}")))
            .collect(),
    }
}

/// The Pheebs / Frank conversation: S2 is Frank's sibling.
///
/// Chain 0 is the speaker chain of S2, chain 1 the person chain of Frank
/// (`your brother`, `he`, `him`, `Frank`, `he`).
pub fn frank_dialogue() -> Dialogue {
    let mut d = Dialogue::from_turns(
        "frank",
        &[
            ("S1", "Hey Pheebs."),
            ("S2", "Hey!"),
            ("S1", "Any sign of your brother?"),
            ("S2", "No, but he is always late."),
            ("S1", "I thought you only met him once?"),
            ("S2", "Yeah, I did. I think it sounds big sistery, Frank is always late."),
            ("S1", "Well relax, he will be here."),
        ],
    );
    d.chains = vec![
        chain(&d, ChainType::Speaker, "S2", &[(0, 1, 1), (4, 2, 2), (5, 2, 2), (5, 5, 5)]),
        chain(
            &d,
            ChainType::Person,
            "Frank",
            &[(2, 3, 4), (3, 3, 3), (4, 5, 5), (5, 12, 12), (6, 3, 3)],
        ),
    ];
    d.pairs = vec![
        ArgumentPair::new("S2", "Frank", &["per:siblings"]),
        ArgumentPair::new("S2", "Pheebs", &["per:alternate_names"]),
        ArgumentPair::new("Frank", "S2", &["per:siblings"]),
    ];
    d
}

/// Speaker chain `[S3 <- (Bob, he, this guy)]`.
pub fn speaker_dialogue() -> Dialogue {
    let mut d = Dialogue::from_turns(
        "speakers",
        &[
            ("S1", "Have you met Bob yet?"),
            ("S2", "Yes, he is my new roommate."),
            ("S1", "I think this guy is really nice."),
            ("S3", "Thanks, guys."),
        ],
    );
    d.chains = vec![chain(&d, ChainType::Speaker, "S3", &[(0, 3, 3), (1, 2, 2), (2, 2, 3)])];
    d.pairs = vec![
        ArgumentPair::new("S2", "S3", &["per:roommate"]),
        ArgumentPair::new("S3", "Bob", &["per:alternate_names"]),
    ];
    d
}

/// Location chain `[Uruguay <- (it, it)]`.
pub fn location_dialogue() -> Dialogue {
    let mut d = Dialogue::from_turns(
        "location",
        &[
            ("S1", "I just got back from Uruguay."),
            ("S2", "Really?"),
            ("S3", "I heard it is beautiful."),
            ("S1", "Yes, it was amazing."),
        ],
    );
    d.chains = vec![chain(&d, ChainType::Location, "Uruguay", &[(0, 5, 5), (2, 2, 2), (3, 2, 2)])];
    let mut p = ArgumentPair::new("S1", "Uruguay", &["per:visited_place"]);
    p.object_type = "GPE".into();
    d.pairs = vec![p];
    d
}

/// Organization chain `[Paul's Café <- (They, it)]`.
pub fn organization_dialogue() -> Dialogue {
    let mut d = Dialogue::from_turns(
        "organization",
        &[
            ("S1", "Let's go to Paul's Café tonight."),
            ("S2", "They have great coffee."),
            ("S1", "I know, it is my favorite place."),
        ],
    );
    d.chains = vec![chain(
        &d,
        ChainType::Organization,
        "Paul's Café",
        &[(0, 3, 4), (1, 0, 0), (2, 3, 3)],
    )];
    let mut p = ArgumentPair::new("S1", "Paul's Café", &["per:positive_impression"]);
    p.object_type = "ORG".into();
    d.pairs = vec![p];
    d
}

/// A five-speaker conversation without chains and with a no-relation pair.
pub fn five_speakers() -> Dialogue {
    let mut d = Dialogue::from_turns(
        "five",
        &[
            ("S1", "Where is Monica?"),
            ("S2", "She went out with Richard."),
            ("S3", "Richard is her boyfriend."),
            ("S4", "I did not know that."),
            ("S5", "Neither did I."),
        ],
    );
    d.pairs = vec![
        ArgumentPair::new("Monica", "Richard", &["per:girl/boyfriend"]),
        ArgumentPair::new("S4", "S5", &["unanswerable"]),
    ];
    d
}

/// Every fixture above, in a fixed order.
pub fn all() -> Vec<Dialogue> {
    vec![frank_dialogue(), speaker_dialogue(), location_dialogue(), organization_dialogue(), five_speakers()]
}
