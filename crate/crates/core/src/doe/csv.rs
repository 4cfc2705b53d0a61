//! Design-table CSV: `run,X1,…,Xk,role,batch`, reals at 6 significant digits.

use super::{DesignKind, DesignRow, DesignTable, DoeError, RowRole};
use crate::params::{fmt_sig, FactorSpec};

impl DesignTable {
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        let mut header = vec!["run".to_string()];
        header.extend((1..=self.factors.len()).map(|i| format!("X{i}")));
        header.extend(["role".into(), "batch".into()]);
        w.write_record(&header).expect("in-memory write");
        for (i, row) in self.rows.iter().enumerate() {
            let mut rec = vec![(i + 1).to_string()];
            rec.extend(row.values.iter().map(|v| fmt_sig(*v, 6)));
            rec.push(row.role.as_str().into());
            rec.push(row.batch_id.clone().unwrap_or_default());
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    /// Parses a design CSV; coded values are recomputed from `factors`.
    pub fn from_csv(text: &str, factors: &[FactorSpec], dummy_count: usize) -> Result<Self, DoeError> {
        let err = |m: String| DoeError::Csv(m);
        let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let header = r.headers().map_err(|e| err(e.to_string()))?.clone();
        let k = factors.len();
        let expected: Vec<String> = std::iter::once("run".to_string())
            .chain((1..=k).map(|i| format!("X{i}")))
            .chain(["role".into(), "batch".into()])
            .collect();
        if header.iter().ne(expected.iter().map(String::as_str)) {
            return Err(err(format!("expected header {}", expected.join(","))));
        }
        let mut rows = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| err(e.to_string()))?;
            let values = (1..=k)
                .map(|c| {
                    rec[c]
                        .trim()
                        .parse::<f64>()
                        .map_err(|_| err(format!("row {}: bad value {:?}", line + 1, &rec[c])))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let role = RowRole::parse(rec[k + 1].trim())
                .ok_or_else(|| err(format!("row {}: unknown role {:?}", line + 1, &rec[k + 1])))?;
            let batch = rec[k + 2].trim();
            let coded = factors.iter().zip(&values).map(|(f, &v)| f.encode(v)).collect();
            let out_of_bounds = factors.iter().zip(&values).any(|(f, &v)| !f.contains(v));
            rows.push(DesignRow {
                values,
                coded,
                dummy_coded: Vec::new(),
                role,
                batch_id: (!batch.is_empty()).then(|| batch.to_string()),
                out_of_bounds,
            });
        }
        Ok(DesignTable {
            factors: factors.to_vec(),
            rows,
            dummy_count,
            seed: 0,
            kind: DesignKind::Imported,
        })
    }
}

#[cfg(test)]
mod tests {
    use crate::doe::{allocate_batches, generate_dsd, verify_dsd, DesignTable};
    use crate::params::default_factors;

    #[test]
    fn header_and_line_endings() {
        let d = generate_dsd(&default_factors(), 2, 3, 0).unwrap();
        let text = d.to_csv();
        assert!(text.starts_with("run,X1,X2,X3,X4,X5,X6,role,batch\n"));
        assert!(!text.contains('\r'));
        assert_eq!(text.lines().count(), 21);
        assert_eq!(text.lines().nth(1).unwrap(), "1,1,2,2.5,1.5,3.5,1.5,foldover,");
        assert_eq!(text.lines().last().unwrap(), "20,1,1.5,2,1,3,1,center,");
    }

    #[test]
    fn csv_round_trip_keeps_values_roles_and_batches() {
        let fs = default_factors();
        let d = generate_dsd(&fs, 2, 3, 0).unwrap();
        let ids: Vec<String> = (0..10).map(|i| format!("25040{i}")).collect();
        let d = allocate_batches(&d, &ids, 1).unwrap();
        let back = DesignTable::from_csv(&d.to_csv(), &fs, 2).unwrap();
        assert_eq!(back.len(), d.len());
        for (a, b) in d.rows.iter().zip(&back.rows) {
            assert_eq!(a.values, b.values);
            assert_eq!(a.coded, b.coded);
            assert_eq!(a.role, b.role);
            assert_eq!(a.batch_id, b.batch_id);
        }
        assert!(verify_dsd(&back).ok);
    }

    #[test]
    fn rejects_bad_header_and_values() {
        let fs = default_factors();
        assert!(DesignTable::from_csv("a,b\n", &fs, 0).is_err());
        let bad = "run,X1,X2,X3,X4,X5,X6,role,batch\n1,x,1,1,1,1,1,center,\n";
        assert!(DesignTable::from_csv(bad, &fs, 0).is_err());
        let bad_role = "run,X1,X2,X3,X4,X5,X6,role,batch\n1,1,1,1,1,1,1,middle,\n";
        assert!(DesignTable::from_csv(bad_role, &fs, 0).is_err());
    }
}
