/// Unit-cost edit distance (insert, delete, substitute), two-row DP.
pub fn levenshtein<E: PartialEq>(a: &[E], b: &[E]) -> usize {
    let (a, b) = if a.len() < b.len() { (b, a) } else { (a, b) };
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// True when `levenshtein(a, b) < bound`, exiting as soon as every DP cell
/// in a row reaches the bound.
pub fn levenshtein_within<E: PartialEq>(a: &[E], b: &[E], bound: usize) -> bool {
    if bound == 0 {
        return false;
    }
    if a.len().abs_diff(b.len()) >= bound {
        return false;
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        let mut row_min = cur[0];
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
            row_min = row_min.min(cur[j + 1]);
        }
        if row_min >= bound {
            return false;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()] < bound
}
