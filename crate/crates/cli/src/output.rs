use crate::Failure;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    /// The directory is created on first write, so a rejected config leaves
    /// nothing behind.
    pub fn new(root: &Path) -> Self {
        Self { root: root.to_path_buf() }
    }

    /// Write `name` through a buffered writer.
    pub fn write<F>(&self, name: &str, f: F) -> Result<(), Failure>
    where
        F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    {
        std::fs::create_dir_all(&self.root)
            .map_err(|e| Failure::Compute(anyhow::anyhow!("creating {}: {e}", self.root.display())))?;
        let path = self.root.join(name);
        let file = File::create(&path)
            .map_err(|e| Failure::Compute(anyhow::anyhow!("creating {}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        f(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// `config.toml` holds the resolved flat config and can be fed back with
    /// `--config`; `manifest.toml` adds the command, version and file list.
    pub fn finish(&self, command: &str, config: &toml::Table, files: &[String]) -> Result<(), Failure> {
        let flat = toml::to_string(config).map_err(|e| Failure::Compute(e.into()))?;
        self.write("config.toml", |w| w.write_all(flat.as_bytes()))?;
        let mut m = toml::Table::new();
        m.insert("command".into(), command.into());
        m.insert("version".into(), env!("CARGO_PKG_VERSION").into());
        m.insert(
            "rerun".into(),
            format!("coopsurface {command} --config config.toml").into(),
        );
        m.insert(
            "files".into(),
            toml::Value::Array(files.iter().map(|f| toml::Value::from(f.as_str())).collect()),
        );
        m.insert("config".into(), toml::Value::Table(config.clone()));
        let text = toml::to_string(&m).map_err(|e| Failure::Compute(e.into()))?;
        self.write("manifest.toml", |w| w.write_all(text.as_bytes()))
    }
}
