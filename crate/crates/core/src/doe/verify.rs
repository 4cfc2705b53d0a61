use serde::Serialize;

use super::{DesignTable, RowRole};

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
    pub ok: bool,
}

impl VerificationReport {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Structural checks for a definitive screening design in canonical order
/// (fold-over pairs adjacent, centers last).
pub fn verify_dsd(design: &DesignTable) -> VerificationReport {
    let checks = vec![
        foldover_pairs(design),
        one_zero_per_row(design),
        center_rows(design),
        main_effect_orthogonality(design),
        main_vs_quadratic(design),
    ];
    let ok = checks.iter().all(|c| c.passed);
    VerificationReport { checks, ok }
}

fn check(name: &'static str, problems: Vec<String>) -> Check {
    Check {
        name,
        passed: problems.is_empty(),
        detail: if problems.is_empty() {
            "ok".into()
        } else {
            problems.join("; ")
        },
    }
}

fn foldover_rows(design: &DesignTable) -> Vec<(usize, &super::DesignRow)> {
    design
        .rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.role == RowRole::Foldover)
        .collect()
}

fn foldover_pairs(design: &DesignTable) -> Check {
    let mut problems = Vec::new();
    let rows = foldover_rows(design);
    if rows.is_empty() || !rows.len().is_multiple_of(2) {
        problems.push(format!("{} fold-over rows (need a positive even count)", rows.len()));
    }
    for pair in rows.chunks(2) {
        let [(i, a), (j, b)] = pair else { continue };
        if *j != i + 1 {
            problems.push(format!("runs {} and {} are not adjacent", i + 1, j + 1));
        }
        let sums_to_zero = a.coded.iter().zip(&b.coded).all(|(x, y)| (x + y).abs() < EPS)
            && a.dummy_coded.len() == b.dummy_coded.len()
            && a.dummy_coded.iter().zip(&b.dummy_coded).all(|(x, y)| (x + y).abs() < EPS);
        if !sums_to_zero {
            problems.push(format!("runs {} and {} are not mirror images", i + 1, j + 1));
        }
    }
    check("fold-over pairing", problems)
}

fn is_zero(v: f64) -> bool {
    v.abs() < EPS
}

fn is_extreme(v: f64) -> bool {
    (v.abs() - 1.0).abs() < EPS
}

fn one_zero_per_row(design: &DesignTable) -> Check {
    let mut problems = Vec::new();
    let rows = foldover_rows(design);
    let dummies_known = rows.iter().all(|(_, r)| r.dummy_coded.len() == design.dummy_count);
    let mut all_extreme = 0usize;
    for (i, r) in &rows {
        let cells: Vec<f64> = if dummies_known {
            r.coded.iter().chain(&r.dummy_coded).copied().collect()
        } else {
            r.coded.clone()
        };
        let zeros = cells.iter().filter(|v| is_zero(**v)).count();
        if cells.iter().any(|v| !is_zero(*v) && !is_extreme(*v)) {
            problems.push(format!("run {} has a level other than -1/0/+1", i + 1));
        }
        if zeros == 0 {
            all_extreme += 1;
        }
        let allowed = if dummies_known { zeros == 1 } else { zeros <= 1 };
        if !allowed {
            problems.push(format!("run {} has {zeros} coded zeros", i + 1));
        }
    }
    if !dummies_known && all_extreme != 2 * design.dummy_count {
        problems.push(format!(
            "{all_extreme} runs without a visible zero, expected {} for {} dummy factors",
            2 * design.dummy_count,
            design.dummy_count
        ));
    }
    for c in 0..design.factors.len() {
        let zeros = rows.iter().filter(|(_, r)| is_zero(r.coded[c])).count();
        if zeros != 2 {
            problems.push(format!("column {} has {zeros} zeros among fold-over runs", c + 1));
        }
    }
    check("one zero per row", problems)
}

fn center_rows(design: &DesignTable) -> Check {
    let mut problems = Vec::new();
    let first_center = design.rows.iter().position(|r| r.role == RowRole::Center);
    for (i, r) in design.rows.iter().enumerate() {
        if r.role == RowRole::Center && !r.coded.iter().chain(&r.dummy_coded).all(|v| is_zero(*v)) {
            problems.push(format!("center run {} is not at the center", i + 1));
        }
        if r.role != RowRole::Center && first_center.is_some_and(|c| i > c) {
            problems.push(format!("run {} follows a center run", i + 1));
        }
    }
    if first_center.is_none() {
        problems.push("no center run".into());
    }
    check("center runs", problems)
}

fn column_dot(design: &DesignTable, f: impl Fn(&[f64]) -> f64) -> f64 {
    design.rows.iter().map(|r| f(&r.coded)).sum()
}

fn main_effect_orthogonality(design: &DesignTable) -> Check {
    let k = design.factors.len();
    let mut problems = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let dot = column_dot(design, |x| x[i] * x[j]);
            if !is_zero(dot) {
                problems.push(format!("X{}·X{} = {dot}", i + 1, j + 1));
            }
        }
    }
    check("main-effect orthogonality", problems)
}

fn main_vs_quadratic(design: &DesignTable) -> Check {
    let k = design.factors.len();
    let mut problems = Vec::new();
    for i in 0..k {
        for j in 0..k {
            let dot = column_dot(design, |x| x[i] * x[j] * x[j]);
            if !is_zero(dot) {
                problems.push(format!("X{}·X{}² = {dot}", i + 1, j + 1));
            }
        }
    }
    check("main vs quadratic orthogonality", problems)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doe::generate_dsd;
    use crate::params::default_factors;

    #[test]
    fn generated_design_passes() {
        for (dummy, centers) in [(2, 3), (0, 0), (2, 0), (4, 1)] {
            let d = generate_dsd(&default_factors(), dummy, centers, 1).unwrap();
            let r = verify_dsd(&d);
            assert!(r.ok, "{dummy}/{centers}: {:?}", r.failures().collect::<Vec<_>>());
        }
    }

    #[test]
    fn sign_flip_breaks_foldover() {
        let mut d = generate_dsd(&default_factors(), 2, 3, 1).unwrap();
        d.rows[4].coded[1] = -d.rows[4].coded[1];
        let r = verify_dsd(&d);
        assert!(!r.ok);
        assert!(!r.checks[0].passed);
    }

    #[test]
    fn hand_entered_design_without_dummy_columns() {
        let d = generate_dsd(&default_factors(), 2, 3, 1).unwrap();
        let rows = d
            .rows
            .iter()
            .map(|r| (r.values.clone(), r.role, None))
            .collect();
        let manual = DesignTable::from_natural(&default_factors(), rows, 2);
        assert!(verify_dsd(&manual).ok);
        let wrong_dummy = DesignTable::from_natural(
            &default_factors(),
            d.rows.iter().map(|r| (r.values.clone(), r.role, None)).collect(),
            1,
        );
        assert!(!verify_dsd(&wrong_dummy).ok);
    }

    #[test]
    fn shuffled_design_fails_adjacency() {
        let d = generate_dsd(&default_factors(), 2, 3, 1).unwrap().shuffled(2);
        assert!(!verify_dsd(&d).ok);
    }
}
