//! Conference matrices used to build definitive screening designs.

use super::DoeError;

/// A square conference matrix: zero diagonal, ±1 elsewhere, `CᵀC = (n − 1)·I`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConferenceMatrix {
    order: usize,
    entries: Vec<i8>,
}

impl ConferenceMatrix {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, row: usize, col: usize) -> i8 {
        self.entries[row * self.order + col]
    }

    pub fn row(&self, row: usize) -> &[i8] {
        &self.entries[row * self.order..(row + 1) * self.order]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[i8]> {
        self.entries.chunks(self.order)
    }

    /// Checks the defining properties in integer arithmetic.
    pub fn is_valid(&self) -> bool {
        let n = self.order;
        for i in 0..n {
            for j in 0..n {
                let v = self.get(i, j);
                if (i == j && v != 0) || (i != j && v.abs() != 1) {
                    return false;
                }
                let dot: i64 = (0..n)
                    .map(|k| i64::from(self.get(k, i)) * i64::from(self.get(k, j)))
                    .sum();
                let expected = if i == j { n as i64 - 1 } else { 0 };
                if dot != expected {
                    return false;
                }
            }
        }
        true
    }
}

/// Returns the normalized conference matrix of the given order.
///
/// Orders 2 through 16 (even) are embedded. Orders 4, 8, 12 and 16 are
/// skew (Paley type I or doubled skew-Hadamard), 6, 10 and 14 symmetric
/// (Paley type II, order 10 over GF(9)).
pub fn conference_matrix(order: usize) -> Result<ConferenceMatrix, DoeError> {
    let rows = catalogue(order).ok_or(DoeError::UnsupportedOrder(order))?;
    let entries = rows
        .iter()
        .flat_map(|r| {
            r.bytes().map(|b| match b {
                b'+' => 1,
                b'-' => -1,
                _ => 0,
            })
        })
        .collect();
    Ok(ConferenceMatrix { order, entries })
}

fn catalogue(order: usize) -> Option<&'static [&'static str]> {
    let rows: &'static [&'static str] = match order {
    2 => &[
        "0+",
        "+0",
    ],
    4 => &[
        "0+++",
        "+0-+",
        "++0-",
        "+-+0",
    ],
    6 => &[
        "0+++++",
        "+0+--+",
        "++0+--",
        "+-+0+-",
        "+--+0+",
        "++--+0",
    ],
    8 => &[
        "0+++++++",
        "+0--+-++",
        "++0--+-+",
        "+++0--+-",
        "+-++0--+",
        "++-++0--",
        "+-+-++0-",
        "+--+-++0",
    ],
    10 => &[
        "0+++++++++",
        "+0+++--+--",
        "++0+-+--+-",
        "+++0--+--+",
        "++--0+++--",
        "+-+-+0+-+-",
        "+--+++0--+",
        "++--+--0++",
        "+-+--+-+0+",
        "+--+--+++0",
    ],
    12 => &[
        "0+++++++++++",
        "+0-+---+++-+",
        "++0-+---+++-",
        "+-+0-+---+++",
        "++-+0-+---++",
        "+++-+0-+---+",
        "++++-+0-+---",
        "+-+++-+0-+--",
        "+--+++-+0-+-",
        "+---+++-+0-+",
        "++---+++-+0-",
        "+-+---+++-+0",
    ],
    14 => &[
        "0+++++++++++++",
        "+0+-++----++-+",
        "++0+-++----++-",
        "+-+0+-++----++",
        "++-+0+-++----+",
        "+++-+0+-++----",
        "+-++-+0+-++---",
        "+--++-+0+-++--",
        "+---++-+0+-++-",
        "+----++-+0+-++",
        "++----++-+0+-+",
        "+++----++-+0+-",
        "+-++----++-+0+",
        "++-++----++-+0",
    ],
    16 => &[
        "0+++++++++++++++",
        "+0--+-+++---+-++",
        "++0--+-+++---+-+",
        "+++0--+-+++---+-",
        "+-++0--++-++---+",
        "++-++0--++-++---",
        "+-+-++0-+-+-++--",
        "+--+-++0+--+-++-",
        "+-------0+++++++",
        "++--+-++-0++-+--",
        "+++--+-+--0++-+-",
        "++++--+----0++-+",
        "+-+++--+-+--0++-",
        "++-+++----+--0++",
        "+-+-+++--+-+--0+",
        "+--+-+++-++-+--0",
    ],
        _ => return None,
    };
    Some(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_embedded_order_is_a_conference_matrix() {
        for n in (2..=16).step_by(2) {
            let c = conference_matrix(n).unwrap();
            assert_eq!(c.order(), n);
            assert!(c.is_valid(), "order {n}");
        }
    }

    #[test]
    fn order_two_is_the_swap_matrix() {
        let c = conference_matrix(2).unwrap();
        assert_eq!(c.row(0), &[0, 1]);
        assert_eq!(c.row(1), &[1, 0]);
    }

    #[test]
    fn order_six_gram_matrix() {
        let c = conference_matrix(6).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let dot: i32 = (0..6).map(|k| i32::from(c.get(k, i) * c.get(k, j))).sum();
                assert_eq!(dot, if i == j { 5 } else { 0 });
            }
        }
    }

    #[test]
    fn unsupported_orders() {
        for n in [0, 1, 3, 7, 9, 18, 20] {
            assert!(matches!(conference_matrix(n), Err(DoeError::UnsupportedOrder(m)) if m == n));
        }
    }

    #[test]
    fn normalized_first_row_and_column() {
        for n in (2..=16).step_by(2) {
            let c = conference_matrix(n).unwrap();
            assert!((1..n).all(|j| c.get(0, j) == 1 && c.get(j, 0) == 1));
        }
    }
}
