//! Dataset manifests: one `<rgb> <disparity> <mask>` triple per line,
//! paths relative to the manifest's directory. Blank lines and `#` comments
//! are skipped.

use std::path::{Path, PathBuf};

use crate::failure::{Failure, Outcome};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub rgb: PathBuf,
    pub disparity: PathBuf,
    pub mask: PathBuf,
}

impl Entry {
    /// Output stem: the RGB file stem without a trailing `_rgb`.
    pub fn stem(&self) -> String {
        let s = self.rgb.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        s.strip_suffix("_rgb").map(str::to_owned).unwrap_or(s)
    }
}

pub fn parse(text: &str, base: &Path) -> Outcome<Vec<Entry>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [rgb, disparity, mask] = fields[..] else {
            return Err(Failure::input(format!(
                "manifest line {}: expected `<rgb> <disparity> <mask>`, got {} fields",
                n + 1,
                fields.len()
            )));
        };
        out.push(Entry {
            rgb: base.join(rgb),
            disparity: base.join(disparity),
            mask: base.join(mask),
        });
    }
    if out.is_empty() {
        return Err(Failure::input("manifest lists no images"));
    }
    Ok(out)
}

pub fn load(path: &Path) -> Outcome<Vec<Entry>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("cannot read manifest {}: {e}", path.display())))?;
    parse(&text, path.parent().unwrap_or(Path::new("")))
}

pub fn render(entries: &[(String, String, String)]) -> String {
    entries.iter().map(|(a, b, c)| format!("{a} {b} {c}\n")).collect()
}
