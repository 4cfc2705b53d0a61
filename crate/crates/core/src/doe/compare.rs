use super::DesignTable;

/// Whether two designs are the same up to row order, factor-column order and
/// per-column sign flips (coded values compared to 1e-9).
///
/// Column assignments are searched by backtracking, pruned whenever the
/// multisets of partial rows disagree.
pub fn equivalent_designs(a: &DesignTable, b: &DesignTable) -> bool {
    let k = a.factors.len();
    if k != b.factors.len() || a.len() != b.len() {
        return false;
    }
    let quantize = |t: &DesignTable| -> Vec<Vec<i64>> {
        t.rows
            .iter()
            .map(|r| r.coded.iter().map(|v| (v * 1e9).round() as i64).collect())
            .collect()
    };
    let qa = quantize(a);
    let qb = quantize(b);
    let mut used = vec![false; k];
    let mut mapping: Vec<(usize, i64)> = Vec::with_capacity(k);
    search(&qa, &qb, &mut used, &mut mapping)
}

fn prefix_multiset(rows: &[Vec<i64>], cols: &[(usize, i64)]) -> Vec<Vec<i64>> {
    let mut out: Vec<Vec<i64>> = rows
        .iter()
        .map(|r| cols.iter().map(|&(c, s)| s * r[c]).collect())
        .collect();
    out.sort_unstable();
    out
}

fn search(a: &[Vec<i64>], b: &[Vec<i64>], used: &mut [bool], mapping: &mut Vec<(usize, i64)>) -> bool {
    let depth = mapping.len();
    if depth == used.len() {
        return true;
    }
    let target = prefix_multiset(b, &(0..=depth).map(|c| (c, 1)).collect::<Vec<_>>());
    for col in 0..used.len() {
        if used[col] {
            continue;
        }
        for sign in [1, -1] {
            mapping.push((col, sign));
            if prefix_multiset(a, mapping) == target {
                used[col] = true;
                if search(a, b, used, mapping) {
                    return true;
                }
                used[col] = false;
            }
            mapping.pop();
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doe::{generate_bbd, generate_dsd};
    use crate::params::default_factors;

    #[test]
    fn design_equivalent_to_itself_and_shuffles() {
        let d = generate_dsd(&default_factors(), 2, 3, 0).unwrap();
        assert!(equivalent_designs(&d, &d));
        assert!(equivalent_designs(&d, &d.shuffled(3)));
    }

    #[test]
    fn column_permutation_and_sign_flip() {
        let d = generate_dsd(&default_factors(), 2, 3, 0).unwrap();
        let mut e = d.clone();
        for r in &mut e.rows {
            r.coded.swap(0, 4);
            r.coded[2] = -r.coded[2];
        }
        assert!(equivalent_designs(&d, &e));
    }

    #[test]
    fn different_designs_differ() {
        let d = generate_dsd(&default_factors(), 2, 3, 0).unwrap();
        let mut e = d.clone();
        e.rows[0].coded[1] = -e.rows[0].coded[1];
        assert!(!equivalent_designs(&d, &e));
        let bbd = generate_bbd(&default_factors(), 0).unwrap();
        assert!(!equivalent_designs(&d, &bbd));
    }
}
