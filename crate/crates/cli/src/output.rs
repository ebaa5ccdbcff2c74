use std::path::Path;

use serde::Serialize;

use crate::error::CliResult;

/// A rendered output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl Artifact {
    /// Lines after the leading metadata comment.
    pub fn data_rows(&self) -> impl Iterator<Item = &str> {
        self.contents.lines().filter(|l| !l.starts_with('#'))
    }
}

/// CSV with a `#` metadata line followed by a header row and `rows`.
pub fn csv_artifact<T: Serialize>(name: &str, metadata: &str, rows: &[T]) -> CliResult<Artifact> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv writes utf-8");
    Ok(Artifact {
        name: name.to_string(),
        contents: format!("{metadata}\n{body}"),
    })
}

/// Pretty JSON with a `metadata` member merged into the body object.
pub fn json_artifact<T: Serialize>(name: &str, metadata: serde_json::Value, body: &T) -> CliResult<Artifact> {
    let mut map = serde_json::Map::new();
    map.insert("metadata".into(), metadata);
    match serde_json::to_value(body)? {
        serde_json::Value::Object(o) => map.extend(o),
        other => {
            map.insert("result".into(), other);
        }
    }
    let mut contents = serde_json::to_string_pretty(&serde_json::Value::Object(map))?;
    contents.push('\n');
    Ok(Artifact {
        name: name.to_string(),
        contents,
    })
}

/// Writes every artifact into `dir`, or prints them to stdout when no
/// directory is given.
pub fn emit(artifacts: &[Artifact], dir: Option<&Path>) -> CliResult<()> {
    match dir {
        Some(d) => {
            std::fs::create_dir_all(d)?;
            for a in artifacts {
                std::fs::write(d.join(&a.name), &a.contents)?;
            }
        }
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            for a in artifacts {
                if artifacts.len() > 1 {
                    writeln!(out, "## {}", a.name)?;
                }
                out.write_all(a.contents.as_bytes())?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        t: usize,
        v: Option<f64>,
    }

    #[test]
    fn csv_layout() {
        let a = csv_artifact("x.csv", "# meta", &[Row { t: 1, v: Some(0.5) }, Row { t: 2, v: None }]).unwrap();
        assert_eq!(a.contents, "# meta\nt,v\n1,0.5\n2,\n");
        assert_eq!(a.data_rows().count(), 3);
    }

    #[test]
    fn json_layout() {
        let a = json_artifact("x.json", serde_json::json!({"seed": 1}), &serde_json::json!({"slope": 0.25})).unwrap();
        let v: serde_json::Value = serde_json::from_str(&a.contents).unwrap();
        assert_eq!(v["metadata"]["seed"], 1);
        assert_eq!(v["slope"], 0.25);
    }
}
