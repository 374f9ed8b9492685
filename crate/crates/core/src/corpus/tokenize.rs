/// Lowercases, splits on whitespace and strips leading/trailing ASCII
/// punctuation from each token. Interior punctuation (apostrophes in
/// contractions, hyphens) is kept; tokens that end up empty are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|raw| raw.trim_matches(|c: char| c.is_ascii_punctuation()))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn strips_edge_punctuation() {
        assert_eq!(
            tokenize("Oh, I really know!"),
            ["oh", "i", "really", "know"]
        );
    }

    #[test]
    fn empty_input() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("  \t\n ").is_empty());
        assert!(tokenize("... !!! --").is_empty());
    }

    #[test]
    fn keeps_interior_apostrophes() {
        assert_eq!(tokenize("don't   go"), ["don't", "go"]);
        assert_eq!(tokenize("'Sheldon's'"), ["sheldon's"]);
    }

    #[test]
    fn non_ascii_is_kept() {
        assert_eq!(tokenize("Café «ok»"), ["café", "«ok»"]);
    }

    proptest! {
        #[test]
        fn idempotent(s in "\\PC{0,60}") {
            let once = tokenize(&s);
            let again = tokenize(&once.join(" "));
            prop_assert_eq!(once, again);
        }
    }
}
