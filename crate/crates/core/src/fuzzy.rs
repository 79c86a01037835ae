//! Bounded Levenshtein search over a sorted term list.
//!
//! Sorted terms form an implicit trie: consecutive terms share prefixes, so the
//! dynamic-programming rows of the shared prefix are kept on a stack and only
//! the suffix is recomputed. When every cell of a row exceeds the bound, no
//! extension of that prefix can come back under it, and the whole block of
//! terms sharing the prefix is skipped with a binary search.

/// Indices of `terms` whose character-level edit distance to `query` is in
/// `1..=max`. `terms` must be sorted and deduplicated.
pub(crate) fn search(terms: &[String], query: &[char], max: usize) -> Vec<usize> {
    let n = query.len();
    let mut hits = Vec::new();
    // rows[d] is the DP row after consuming the first d characters of the prefix.
    let mut rows: Vec<Vec<usize>> = vec![(0..=n).collect()];
    let mut prefix: Vec<char> = Vec::new();
    let mut term_chars: Vec<char> = Vec::new();

    let mut i = 0;
    while i < terms.len() {
        term_chars.clear();
        term_chars.extend(terms[i].chars());

        let common = prefix.iter().zip(&term_chars).take_while(|(a, b)| a == b).count();
        prefix.truncate(common);
        rows.truncate(common + 1);

        let mut pruned_at = None;
        for (depth, &c) in term_chars.iter().enumerate().skip(common) {
            let prev = &rows[depth];
            let mut row = Vec::with_capacity(n + 1);
            row.push(prev[0] + 1);
            for j in 1..=n {
                let sub = prev[j - 1] + usize::from(query[j - 1] != c);
                row.push(sub.min(prev[j] + 1).min(row[j - 1] + 1));
            }
            let row_min = *row.iter().min().unwrap();
            prefix.push(c);
            rows.push(row);
            if row_min > max {
                pruned_at = Some(depth + 1);
                break;
            }
        }

        match pruned_at {
            Some(len) => {
                let stem: String = term_chars[..len].iter().collect();
                i += 1 + terms[i + 1..].partition_point(|t| t.starts_with(&stem));
            }
            None => {
                let d = rows.last().unwrap()[n];
                if d >= 1 && d <= max {
                    hits.push(i);
                }
                i += 1;
            }
        }
    }
    hits
}
