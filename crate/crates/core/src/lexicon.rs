//! Closed pronoun lists used for chain typing and head selection.

pub const FIRST_PERSON: [&str; 5] = ["i", "me", "my", "mine", "myself"];
pub const SECOND_PERSON: [&str; 5] = ["you", "your", "yours", "yourself", "yourselves"];
pub const THIRD_PERSON: [&str; 16] = [
    "he", "him", "his", "himself", "she", "her", "hers", "herself", "it", "its", "itself", "they", "them", "their",
    "this", "that",
];

pub fn is_first_person(tok: &str) -> bool {
    FIRST_PERSON.contains(&tok.to_lowercase().as_str())
}

pub fn is_second_person(tok: &str) -> bool {
    SECOND_PERSON.contains(&tok.to_lowercase().as_str())
}

pub fn is_pronoun(tok: &str) -> bool {
    let t = tok.to_lowercase();
    FIRST_PERSON.contains(&t.as_str()) || SECOND_PERSON.contains(&t.as_str()) || THIRD_PERSON.contains(&t.as_str())
}

/// True when every token of the surface is a pronoun or a determiner-like
/// function word, e.g. `he` or `this`.
pub fn is_pronominal(surface: &str) -> bool {
    let toks: Vec<&str> = surface.split_whitespace().collect();
    !toks.is_empty() && toks.iter().all(|t| is_pronoun(t))
}

/// Index of the surface best suited as a chain head: the first capitalized
/// non-pronominal one, else the first non-pronominal one, else the first.
pub fn pick_head<S: AsRef<str>>(surfaces: &[S]) -> Option<usize> {
    let named = |s: &S| !is_pronominal(s.as_ref());
    surfaces
        .iter()
        .position(|s| named(s) && s.as_ref().starts_with(char::is_uppercase))
        .or_else(|| surfaces.iter().position(named))
        .or(if surfaces.is_empty() { None } else { Some(0) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn head_prefers_capitalized_names() {
        assert_eq!(pick_head(&["your brother", "he", "Frank"]), Some(2));
        assert_eq!(pick_head(&["he", "your brother"]), Some(1));
        assert_eq!(pick_head(&["he", "him"]), Some(0));
        assert_eq!(pick_head::<&str>(&[]), None);
    }
}
