use super::*;
use crate::dialogue::ChainType;
use crate::fixtures::{self, chain};

fn set(kinds: &[EdgeKind]) -> BTreeSet<EdgeKind> {
    kinds.iter().copied().collect()
}

fn frank_pair() -> (Dialogue, ArgumentPair) {
    let d = fixtures::frank_dialogue();
    let p = d.pairs[0].clone();
    (d, p)
}

#[test]
fn tucore_counts_on_frank() {
    let (d, p) = frank_pair();
    let g = build_tucore(&d, &p).unwrap();
    assert_eq!(g.count_nodes(NodeKind::Dialogue), 1);
    assert_eq!(g.count_nodes(NodeKind::Utterance), 7);
    assert_eq!(g.count_nodes(NodeKind::Argument), 2);
    assert_eq!(g.count_nodes(NodeKind::Mention), 9);
    assert_eq!(g.count(EdgeKind::DU), 7);
    assert_eq!(g.count(EdgeKind::UU), 6);
    assert_eq!(g.count(EdgeKind::MU), 9);
    // Frank: C(5,2); S2: C(4,2)
    assert_eq!(g.count(EdgeKind::CC), 10 + 6);
    // S2 speaks turns 1, 3, 5; "Frank" is written in turn 5
    assert_eq!(g.count(EdgeKind::AU), 4);
    assert_eq!(g.edge_kinds(), set(Recipe::Tucore.declared_kinds()));
    assert!(g.warnings.is_empty());
}

#[test]
fn tucore_single_mention_chain_has_no_cc() {
    let mut d = fixtures::frank_dialogue();
    d.chains[1].mentions.truncate(1);
    let g = build_tucore(&d, &d.pairs[0]).unwrap();
    assert_eq!(g.count(EdgeKind::CC), 6);
    d.chains.remove(0);
    let g = build_tucore(&d, &d.pairs[0]).unwrap();
    assert_eq!(g.count(EdgeKind::CC), 0);
}

#[test]
fn every_mention_has_one_mu_edge_to_its_turn() {
    for d in fixtures::all() {
        for p in &d.pairs {
            let g = build_tucore(&d, p).unwrap();
            for n in g.nodes.iter().filter(|n| n.kind == NodeKind::Mention) {
                let us = g.neighbors(n.id, EdgeKind::MU);
                assert_eq!(us.len(), 1);
                let Payload::Mention { mention, .. } = &n.payload else { panic!() };
                assert_eq!(g.nodes[us[0]].payload, Payload::Utterance { index: mention.utterance_index });
            }
        }
    }
}

#[test]
fn stripping_cc_and_mu_equals_chain_free_build() {
    for d in fixtures::all() {
        let mut bare = d.clone();
        bare.chains.clear();
        for p in &d.pairs {
            let full = build_tucore(&d, p).unwrap();
            let stripped = strip_edges(&full, &set(&[EdgeKind::CC, EdgeKind::MU])).unwrap();
            assert_eq!(stripped, build_tucore(&bare, p).unwrap(), "{} {:?}", d.id, p);
            assert_eq!(stripped.count_nodes(NodeKind::Mention), 0);
        }
    }
}

#[test]
fn strip_cc_keeps_mentions() {
    let (d, p) = frank_pair();
    let g = build_tucore(&d, &p).unwrap();
    let s = strip_edges(&g, &set(&[EdgeKind::CC])).unwrap();
    assert_eq!(s.count(EdgeKind::CC), 0);
    assert_eq!(s.count(EdgeKind::MU), 9);
    assert_eq!(s.count_nodes(NodeKind::Mention), 9);
    // the original is untouched
    assert_eq!(g.count(EdgeKind::CC), 16);
}

#[test]
fn strip_nothing_is_identity() {
    let (d, p) = frank_pair();
    let g = build_tucore(&d, &p).unwrap();
    assert_eq!(strip_edges(&g, &BTreeSet::new()).unwrap(), g);
}

#[test]
fn strip_rejects_foreign_kind() {
    let (d, p) = frank_pair();
    let g = build_tucore(&d, &p).unwrap();
    let e = strip_edges(&g, &set(&[EdgeKind::CW])).unwrap_err();
    assert!(matches!(e, Error::UnknownKind { .. }));
    assert!(EdgeKind::parse_set("CC,XX").is_err());
    assert_eq!(EdgeKind::parse_set("cc, MU").unwrap(), set(&[EdgeKind::CC, EdgeKind::MU]));
}

#[test]
fn redialog_is_complete_over_mentions_and_arguments() {
    let mut d = fixtures::frank_dialogue();
    d.chains[0].mentions.truncate(3);
    let g = build_redialog(&d, &d.pairs[0], None).unwrap();
    assert_eq!(g.nodes.len(), 10);
    assert_eq!(g.edges.len(), 45);
    assert_eq!(g.edge_kinds(), set(&[EdgeKind::FULL]));
    assert_eq!(g.count_nodes(NodeKind::Mdp), 0);
}

#[test]
fn redialog_with_unresolved_argument() {
    let mut d = Dialogue::from_turns("x", &[("S1", "I like Bob ."), ("S2", "Me too .")]);
    d.pairs = vec![ArgumentPair::new("Bob", "Zed", &["per:friends"])];
    let g = build_redialog(&d, &d.pairs[0], None).unwrap();
    assert_eq!(g.nodes.len(), 3);
    assert_eq!(g.edges.len(), 3);
    assert_eq!(
        g.warnings,
        vec![GraphWarning::UnresolvedArgument {
            role: Some(ArgRole::Object),
            name: "Zed".into()
        }]
    );
}

struct Between;

impl DependencyProvider for Between {
    // every token strictly between the two mentions of one turn
    fn shortest_path(&self, _d: &Dialogue, a: &Mention, b: &Mention) -> Vec<(usize, usize)> {
        if a.utterance_index != b.utterance_index {
            return Vec::new();
        }
        let (x, y) = if a.token_end < b.token_start { (a, b) } else { (b, a) };
        (x.token_end + 1..y.token_start).map(|t| (a.utterance_index, t)).collect()
    }
}

#[test]
fn redialog_adds_mdp_nodes_from_provider() {
    let mut d = Dialogue::from_turns("x", &[("S1", "Ann really loves Bob .")]);
    d.pairs = vec![ArgumentPair::new("Ann", "Bob", &["per:friends"])];
    let g = build_redialog(&d, &d.pairs[0], Some(&Between)).unwrap();
    assert_eq!(g.count_nodes(NodeKind::Mdp), 2);
    assert_eq!(g.nodes.len(), 6);
    assert_eq!(g.edges.len(), 15);
}

#[test]
fn gain_entity_edge_between_cooccurring_chains() {
    let (d, p) = frank_pair();
    let (m, e) = build_gain(&d, &p).unwrap();
    let s2 = e.node_by_key("E:S2").unwrap().id;
    let frank = e.node_by_key("E:Frank").unwrap().id;
    assert!(e.edges.iter().any(|x| (x.src, x.dst) == (s2.min(frank), s2.max(frank))));
    assert_eq!(e.edge_kinds(), set(&[EdgeKind::EE]));
    assert_eq!(m.edge_kinds(), set(Recipe::GainMention.declared_kinds()));
    let dn = m.node_by_key("D").unwrap().id;
    for n in m.nodes.iter().filter(|n| n.kind == NodeKind::Mention) {
        assert!(m.neighbors(n.id, EdgeKind::DM).contains(&dn));
    }
}

#[test]
fn gain_entities_without_shared_turns_are_disconnected() {
    let mut d = Dialogue::from_turns("x", &[("S1", "Ann is here ."), ("S2", "Bob is not .")]);
    d.chains = vec![
        chain(&d, ChainType::Person, "Ann", &[(0, 0, 0)]),
        chain(&d, ChainType::Person, "Bob", &[(1, 0, 0)]),
    ];
    d.pairs = vec![ArgumentPair::new("Ann", "Bob", &["per:friends"])];
    let (m, e) = build_gain(&d, &d.pairs[0]).unwrap();
    assert_eq!(e.nodes.len(), 2);
    assert!(e.edges.is_empty());
    assert_eq!(m.count(EdgeKind::IU), 0);
    assert_eq!(m.count(EdgeKind::DM), 2);
}

#[test]
fn gain_includes_chains_of_non_arguments() {
    let mut d = fixtures::frank_dialogue();
    d.pairs.truncate(1);
    d.chains[0].head = "S9".into();
    let (m, _) = build_gain(&d, &d.pairs[0]).unwrap();
    // S2 now resolves only by surface (nothing), the S9 chain still appears
    assert_eq!(m.count_nodes(NodeKind::Mention), 9);
}

#[test]
fn hgat_coreference_edges() {
    let (d, p) = frank_pair();
    let g = build_hgat(&d, &p).unwrap();
    assert_eq!(g.edge_kinds(), set(Recipe::Hgat.declared_kinds()));
    let s2 = g.argument_node(ArgRole::Subject).unwrap();
    let frank = g.argument_node(ArgRole::Object).unwrap();
    let sp = g.node_by_key("S:S2").unwrap().id;
    assert_eq!(g.count(EdgeKind::CS), 1);
    assert_eq!(g.neighbors(s2, EdgeKind::CS), vec![sp]);
    let cw = g.neighbors(frank, EdgeKind::CW);
    for w in ["your", "brother", "he", "him", "frank"] {
        assert!(cw.contains(&g.node_by_key(&format!("W:{w}")).unwrap().id), "{w}");
    }
    assert_eq!(g.count_nodes(NodeKind::Speaker), 2);
    assert_eq!(g.count_nodes(NodeKind::Type), 1);
}

#[test]
fn hgat_without_chains_keeps_base_edges() {
    let (d, p) = frank_pair();
    let mut bare = d.clone();
    bare.chains.clear();
    let full = build_hgat(&d, &p).unwrap();
    let g = build_hgat(&bare, &p).unwrap();
    for k in [EdgeKind::CW, EdgeKind::CS, EdgeKind::CU] {
        assert_eq!(g.count(k), 0);
    }
    for k in [EdgeKind::UW, EdgeKind::UA, EdgeKind::US, EdgeKind::TW, EdgeKind::TA] {
        assert_eq!(g.count(k), full.count(k));
    }
    let stripped = strip_edges(&full, &set(&[EdgeKind::CW, EdgeKind::CS, EdgeKind::CU])).unwrap();
    assert_eq!(stripped, g);
}

#[test]
fn builds_are_deterministic_and_dump_round_trips() {
    for d in fixtures::all() {
        for p in &d.pairs {
            for r in [Recipe::Tucore, Recipe::Redialog, Recipe::GainMention, Recipe::Hgat] {
                let a = build(r, &d, p, None).unwrap();
                let b = build(r, &d, p, None).unwrap();
                for (x, y) in a.iter().zip(&b) {
                    assert_eq!(x.to_json(), y.to_json());
                    let back: DialogueGraph = serde_json::from_str(&x.to_json()).unwrap();
                    assert_eq!(&back, x);
                    for e in &x.edges {
                        assert!(e.src < e.dst && e.dst < x.nodes.len());
                    }
                }
            }
        }
    }
}

#[test]
fn ambiguous_head_is_an_error() {
    let mut d = fixtures::frank_dialogue();
    let c = d.chains[1].clone();
    d.chains.push(crate::dialogue::CoreferenceChain {
        mentions: vec![c.mentions[0].clone()],
        ..c
    });
    assert!(matches!(build_tucore(&d, &d.pairs[0]), Err(Error::AmbiguousHead { .. })));
}

#[test]
fn recipe_names_parse() {
    assert_eq!(Recipe::parse("tucore"), Some(Recipe::Tucore));
    assert_eq!(Recipe::parse("GAIN"), Some(Recipe::GainMention));
    assert_eq!(Recipe::parse("gain-entity"), Some(Recipe::GainEntity));
    assert_eq!(Recipe::parse("bert"), None);
}
