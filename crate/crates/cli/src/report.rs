//! Verification report: a list of claims plus run metadata.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{json, Map, Value};

/// One checked statement. `pass` is exact equality for counts and flags and
/// an absolute-tolerance comparison for reals.
#[derive(Clone, Debug, Serialize)]
pub struct Claim {
    pub claim_id: String,
    pub anchor: String,
    pub expected: Value,
    pub observed: Value,
    pub pass: bool,
}

impl Claim {
    pub fn exact<E: Serialize, O: Serialize>(id: &str, anchor: &str, expected: E, observed: O) -> Self {
        let expected = json!(expected);
        let observed = json!(observed);
        let pass = expected == observed;
        Self { claim_id: id.into(), anchor: anchor.into(), expected, observed, pass }
    }

    pub fn approx(id: &str, anchor: &str, expected: f64, observed: f64, tol: f64) -> Self {
        Self {
            claim_id: id.into(),
            anchor: anchor.into(),
            expected: json!(expected),
            observed: json!(observed),
            pass: (expected - observed).abs() <= tol,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub claims: Vec<Claim>,
    pub runtime_ms: u128,
    pub config: Value,
    pub artifacts: Map<String, Value>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.claims.iter().all(|c| c.pass)
    }

    pub fn render_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for c in &self.claims {
            let tag = if c.pass { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "{tag}  {:<40} expected {}  observed {}", c.claim_id, c.expected, c.observed);
        }
        let failed = self.claims.iter().filter(|c| !c.pass).count();
        let _ = writeln!(
            out,
            "{} claims, {} passed, {failed} failed in {} ms",
            self.claims.len(),
            self.claims.len() - failed,
            self.runtime_ms
        );
        out
    }

    /// Claims table, then any tabular artifacts, separated by blank lines.
    pub fn render_tsv(&self) -> String {
        let mut out = String::from("claim_id\tanchor\texpected\tobserved\tpass\n");
        for c in &self.claims {
            let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}", c.claim_id, c.anchor, c.expected, c.observed, c.pass);
        }
        for (name, value) in &self.artifacts {
            if let Some(table) = tsv_table(value) {
                let _ = write!(out, "\n# {name}\n{table}");
            }
        }
        out
    }
}

/// Renders an array of flat objects as TSV, using the first row's keys.
fn tsv_table(value: &Value) -> Option<String> {
    let rows = value.as_array()?;
    let first = rows.first()?.as_object()?;
    if first.values().any(|v| v.is_object() || v.is_array()) {
        return None;
    }
    let keys: Vec<&String> = first.keys().collect();
    let mut out = keys.iter().map(|k| k.as_str()).collect::<Vec<_>>().join("\t");
    out.push('\n');
    for row in rows {
        let obj = row.as_object()?;
        let cells: Vec<String> = keys
            .iter()
            .map(|k| match obj.get(*k) {
                Some(Value::String(s)) => s.clone(),
                Some(v) => v.to_string(),
                None => String::new(),
            })
            .collect();
        out.push_str(&cells.join("\t"));
        out.push('\n');
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_and_approx_claims() {
        assert!(Claim::exact("a.b", "x", 3, 3usize).pass);
        assert!(!Claim::exact("a.b", "x", 3, 4).pass);
        assert!(Claim::approx("a.c", "x", 0.5, 0.5 + 1e-12, 1e-9).pass);
        assert!(!Claim::approx("a.c", "x", 0.5, 0.6, 1e-9).pass);
    }

    #[test]
    fn tsv_renders_flat_tables_only() {
        let mut artifacts = Map::new();
        artifacts.insert("rows".into(), json!([{"a": 1, "b": "x"}, {"a": 2, "b": "y"}]));
        artifacts.insert("nested".into(), json!([{"a": [1, 2]}]));
        let r = Report { claims: vec![Claim::exact("m.n", "t", true, true)], runtime_ms: 1, config: json!({}), artifacts };
        let tsv = r.render_tsv();
        assert!(tsv.contains("m.n\tt\ttrue\ttrue\ttrue"));
        assert!(tsv.contains("# rows\na\tb\n1\tx\n2\ty\n"));
        assert!(!tsv.contains("# nested"));
    }
}
