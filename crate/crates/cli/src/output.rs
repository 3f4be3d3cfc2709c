use std::path::Path;

use serde::Serialize;
use serde_json::Value;

/// CSV cell text. Floats use the shortest round-trip form, switching to
/// exponent notation for very small and very large magnitudes.
pub trait Cell {
    fn cell(&self) -> String;
}

impl Cell for f64 {
    fn cell(&self) -> String {
        format!("{self:?}")
    }
}

macro_rules! display_cell {
    ($($t:ty),*) => {
        $(impl Cell for $t {
            fn cell(&self) -> String {
                self.to_string()
            }
        })*
    };
}

display_cell!(i64, u64, usize, u8, bool, str, &str, String, Value);

/// One output file.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub name: String,
    pub body: String,
}

/// CSV table whose first lines are `#` comments carrying the resolved
/// configuration.
pub struct Csv {
    body: String,
}

impl Csv {
    pub fn new(config: &Value, columns: &[&str]) -> Self {
        let command = config["command"].as_str().unwrap_or_default();
        let mut body = format!("# transportctl {command}\n# config: {config}\n");
        body.push_str(&columns.join(","));
        body.push('\n');
        Self { body }
    }

    /// Comment line placed before the column header.
    pub fn note(mut self, key: &str, value: impl Cell) -> Self {
        let at = self.body.rfind("\n#").map(|i| i + 1).unwrap_or(0);
        let end = self.body[at..].find('\n').map(|i| at + i + 1).unwrap_or(self.body.len());
        self.body.insert_str(end, &format!("# {key}: {}\n", value.cell()));
        self
    }

    pub fn row(&mut self, cells: &[&dyn Cell]) {
        let line: Vec<String> = cells.iter().map(|c| c.cell()).collect();
        self.body.push_str(&line.join(","));
        self.body.push('\n');
    }

    pub fn finish(self, name: &str) -> Artifact {
        Artifact { name: name.into(), body: self.body }
    }
}

/// Single-line JSON of `result` with the resolved configuration under
/// `"config"`.
pub fn json<T: Serialize>(name: &str, config: &Value, result: &T) -> Artifact {
    let mut value = serde_json::to_value(result).expect("results serialize");
    if let Value::Object(map) = &mut value {
        map.insert("config".into(), config.clone());
    }
    Artifact { name: name.into(), body: format!("{value}\n") }
}

/// Writes every artifact into `dir`, or concatenates them on stdout.
pub fn emit(artifacts: &[Artifact], dir: Option<&Path>) -> std::io::Result<()> {
    match dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            for a in artifacts {
                std::fs::write(dir.join(&a.name), &a.body)?;
            }
        }
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            for a in artifacts {
                out.write_all(a.body.as_bytes())?;
            }
        }
    }
    Ok(())
}
