//! String views shared by the index, the match predicates and the features.

/// Unicode-aware lowercase.
pub fn casefold(s: &str) -> String {
    s.to_lowercase()
}

/// Casefolded with every whitespace character removed.
pub fn normalize(s: &str) -> String {
    s.chars()
        .filter(|c| !c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect()
}

/// Casefolded tokens, split on anything that is not alphanumeric.
pub fn tokens(s: &str) -> Vec<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(casefold)
        .collect()
}

/// Character 3-grams of the normalized form, without boundary padding.
/// Strings shorter than three characters yield nothing.
pub fn trigrams(s: &str) -> Vec<[char; 3]> {
    let chars: Vec<char> = normalize(s).chars().collect();
    chars.windows(3).map(|w| [w[0], w[1], w[2]]).collect()
}

/// The capital letters of `name` in order, if there are at least two.
pub fn abbreviation_key(name: &str) -> Option<String> {
    let key: String = name.chars().filter(|c| c.is_uppercase()).collect();
    (key.chars().count() >= 2).then_some(key)
}

/// Sorted, deduplicated copy.
pub(crate) fn dedup_sorted<T: Ord>(mut v: Vec<T>) -> Vec<T> {
    v.sort_unstable();
    v.dedup();
    v
}

/// Jaccard similarity of two sets given as sorted, deduplicated slices.
/// Two empty sets have similarity 0.
pub(crate) fn jaccard<T: Ord>(a: &[T], b: &[T]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    inter as f64 / (a.len() + b.len() - inter) as f64
}
