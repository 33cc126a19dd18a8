use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use hdapx::harness::{ErrorRecord, Method};
use hdapx::test_functions::Family;

/// One block per dimension: a row per (family, method) and an
/// `e_max_wc | e_mean_wc` column pair per scale. The smallest value among
/// the methods of a (family, scale, metric) is marked with `*`; exact ties
/// are all marked.
pub fn render(records: &[ErrorRecord]) -> String {
    let mut by_d: BTreeMap<usize, Vec<&ErrorRecord>> = BTreeMap::new();
    for r in records {
        by_d.entry(r.d).or_default().push(r);
    }
    let mut out = String::new();
    for (d, rows) in by_d {
        let scales: BTreeSet<usize> = rows.iter().map(|r| r.scale).collect();
        let families: BTreeSet<Family> = rows.iter().map(|r| r.family).collect();
        let methods: BTreeSet<Method> = rows.iter().map(|r| r.method).collect();
        let cell: BTreeMap<(Family, Method, usize), &ErrorRecord> = rows
            .iter()
            .map(|r| ((r.family, r.method, r.scale), *r))
            .collect();

        let _ = writeln!(out, "d = {d}");
        let mut header = format!("{:<18} {:<13}", "family", "method");
        for s in &scales {
            let _ = write!(
                header,
                " | {:>10} {:>10}",
                format!("max k={s}"),
                format!("mean k={s}")
            );
        }
        let _ = writeln!(out, "{header}");
        let _ = writeln!(out, "{}", "-".repeat(header.len()));
        for &family in &families {
            for &method in &methods {
                let mut line = format!("{:<18} {:<13}", family.name(), method.name());
                let mut any = false;
                for &s in &scales {
                    let Some(r) = cell.get(&(family, method, s)) else {
                        let _ = write!(line, " | {:>10} {:>10}", "-", "-");
                        continue;
                    };
                    any = true;
                    let best = |pick: fn(&ErrorRecord) -> f64| {
                        methods
                            .iter()
                            .filter_map(|m| cell.get(&(family, *m, s)))
                            .map(|r| pick(r))
                            .fold(f64::INFINITY, f64::min)
                    };
                    let mark =
                        |v: f64, min: f64| format!("{v:.2e}{}", if v == min { "*" } else { "" });
                    let _ = write!(
                        line,
                        " | {:>10} {:>10}",
                        mark(r.e_max_wc, best(|r| r.e_max_wc)),
                        mark(r.e_mean_wc, best(|r| r.e_mean_wc))
                    );
                }
                if any {
                    let _ = writeln!(out, "{line}");
                }
            }
        }
        out.push('\n');
    }
    out
}
