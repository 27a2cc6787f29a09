//! Flat key/value configuration. Each subcommand has a resolved settings
//! struct (figure defaults, unknown keys rejected) and a mirror of optional
//! flags. A config file is overlaid with the flags that were given and the
//! result is deserialized into the settings.

use anyhow::{bail, Context};
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::path::Path;

/// Parse a bare number; anything carrying a unit suffix is refused.
pub fn unitless(s: &str) -> Result<f64, String> {
    let t = s.trim();
    t.parse::<f64>().map_err(|_| {
        if t.chars().next().is_some_and(|c| c.is_ascii_digit() || c == '-' || c == '+' || c == '.') {
            format!("`{s}` looks dimensioned; give lengths in λ and rates in Γ₀ as bare numbers")
        } else {
            format!("`{s}` is not a number")
        }
    })
}

macro_rules! settings {
    (
        $(#[$sm:meta])*
        $name:ident / $flags:ident {
            $( $(#[$fm:meta])* $field:ident : $ty:ty = $def:expr ),* $(,)?
        }
    ) => {
        $(#[$sm])*
        #[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
        #[serde(deny_unknown_fields, default)]
        pub struct $name {
            $( pub $field: $ty, )*
        }

        impl Default for $name {
            fn default() -> Self {
                Self { $( $field: $def, )* }
            }
        }

        #[derive(Debug, Clone, Default, clap::Args, serde::Serialize)]
        pub struct $flags {
            $(
                $(#[$fm])*
                #[serde(skip_serializing_if = "Option::is_none")]
                pub $field: Option<$ty>,
            )*
        }
    };
}

settings! {
    Bands / BandsFlags {
        /// Lattice as kind:spacing, e.g. square:0.8
        #[arg(long)]
        lattice: String = "square:0.8".into(),
        /// Symmetry points, comma separated; defaults to the lattice's standard path
        #[arg(long, value_delimiter = ',')]
        path: Vec<String> = Vec::new(),
        /// Samples per path segment
        #[arg(long)]
        samples: usize = 60,
        #[arg(long = "mub-x", alias = "muBx", value_parser = unitless, allow_hyphen_values = true)]
        mub_x: f64 = 0.0,
        #[arg(long = "mub-y", alias = "muBy", value_parser = unitless, allow_hyphen_values = true)]
        mub_y: f64 = 0.0,
        #[arg(long = "mub-z", alias = "muBz", value_parser = unitless, allow_hyphen_values = true)]
        mub_z: f64 = 0.0,
        /// Detuning used for the polarizability table
        #[arg(long, value_parser = unitless, allow_hyphen_values = true)]
        delta: f64 = 0.0,
    }
}

settings! {
    Polarizer / PolarizerFlags {
        #[arg(long, value_parser = unitless)]
        a_min: f64 = 0.1,
        #[arg(long, value_parser = unitless)]
        a_max: f64 = 0.95,
        #[arg(long)]
        a_count: usize = 201,
        #[arg(long, value_parser = unitless, allow_hyphen_values = true)]
        delta_min: f64 = -5.0,
        #[arg(long, value_parser = unitless, allow_hyphen_values = true)]
        delta_max: f64 = 5.0,
        #[arg(long)]
        delta_count: usize = 201,
        #[arg(long = "mub-x", alias = "muBx", value_parser = unitless, allow_hyphen_values = true)]
        mub_x: f64 = 3.0,
        #[arg(long = "mub-y", alias = "muBy", value_parser = unitless, allow_hyphen_values = true)]
        mub_y: f64 = 0.0,
        #[arg(long = "mub-z", alias = "muBz", value_parser = unitless, allow_hyphen_values = true)]
        mub_z: f64 = 0.0,
        /// Incident polarization (x, y), real amplitudes
        #[arg(long, value_delimiter = ',', value_parser = unitless, allow_hyphen_values = true)]
        e_in: Vec<f64> = vec![1.0, 1.0],
    }
}

settings! {
    Waveplate / WaveplateFlags {
        /// Spacing for the ε line scan
        #[arg(long, value_parser = unitless)]
        a: f64 = 0.6,
        /// Detuning for the ε line scan
        #[arg(long, value_parser = unitless, allow_hyphen_values = true)]
        delta: f64 = 1.0,
        #[arg(long, value_parser = unitless, allow_hyphen_values = true)]
        eps_min: f64 = -4.0,
        #[arg(long, value_parser = unitless, allow_hyphen_values = true)]
        eps_max: f64 = 4.0,
        #[arg(long)]
        eps_count: usize = 401,
        #[arg(long, value_parser = unitless)]
        a_min: f64 = 0.1,
        #[arg(long, value_parser = unitless)]
        a_max: f64 = 0.95,
        #[arg(long)]
        a_count: usize = 101,
        #[arg(long, value_parser = unitless, allow_hyphen_values = true)]
        delta_min: f64 = -5.0,
        #[arg(long, value_parser = unitless, allow_hyphen_values = true)]
        delta_max: f64 = 5.0,
        #[arg(long)]
        delta_count: usize = 101,
        /// Field for the (a, Δ) maps
        #[arg(long = "mub-x", alias = "muBx", value_parser = unitless, allow_hyphen_values = true)]
        mub_x: f64 = 3.0,
        #[arg(long = "mub-y", alias = "muBy", value_parser = unitless, allow_hyphen_values = true)]
        mub_y: f64 = 0.0,
        #[arg(long = "mub-z", alias = "muBz", value_parser = unitless, allow_hyphen_values = true)]
        mub_z: f64 = 0.0,
        #[arg(long, value_delimiter = ',', value_parser = unitless, allow_hyphen_values = true)]
        e_in: Vec<f64> = vec![1.0, 1.0],
    }
}

settings! {
    /// Shared by fieldmap, disorder and vacancy.
    RealSpace / RealSpaceFlags {
        #[arg(long)]
        lattice: String = "square:0.8".into(),
        /// Cells along each primitive vector
        #[arg(long)]
        extent: usize = 40,
        #[arg(long, value_parser = unitless, allow_hyphen_values = true)]
        delta: f64 = 0.0,
        #[arg(long = "mub-x", alias = "muBx", value_parser = unitless, allow_hyphen_values = true)]
        mub_x: f64 = 1.0,
        #[arg(long = "mub-y", alias = "muBy", value_parser = unitless, allow_hyphen_values = true)]
        mub_y: f64 = 0.0,
        #[arg(long = "mub-z", alias = "muBz", value_parser = unitless, allow_hyphen_values = true)]
        mub_z: f64 = 0.0,
        #[arg(long, value_delimiter = ',', value_parser = unitless, allow_hyphen_values = true)]
        e_in: Vec<f64> = vec![1.0, 1.0],
        /// Map plane: xz, yz or xy
        #[arg(long)]
        plane: String = "xz".into(),
        /// Position of the plane along its normal
        #[arg(long, value_parser = unitless, allow_hyphen_values = true)]
        plane_offset: f64 = 0.0,
        #[arg(long, value_parser = unitless, allow_hyphen_values = true)]
        u_min: f64 = -24.0,
        #[arg(long, value_parser = unitless, allow_hyphen_values = true)]
        u_max: f64 = 24.0,
        #[arg(long)]
        u_count: usize = 121,
        #[arg(long, value_parser = unitless, allow_hyphen_values = true)]
        v_min: f64 = -12.0,
        #[arg(long, value_parser = unitless, allow_hyphen_values = true)]
        v_max: f64 = 12.0,
        #[arg(long)]
        v_count: usize = 61,
        /// Write field maps; `false` keeps only the summaries
        #[arg(long)]
        map: bool = true,
        #[arg(long)]
        max_unknowns: usize = 15123,
    }
}

settings! {
    Disorder / DisorderFlags {
        #[arg(long, value_parser = unitless)]
        sigma_xy: f64 = 0.1,
        #[arg(long, value_parser = unitless)]
        sigma_z: f64 = 0.0,
        #[arg(long)]
        n_configs: usize = 100,
        #[arg(long)]
        seed: u64 = 1,
        /// Extent of the lattice used for the averaged band diagram (0 skips it)
        #[arg(long)]
        band_extent: usize = 20,
        #[arg(long)]
        band_samples: usize = 20,
    }
}

settings! {
    Vacancy / VacancyFlags {
        /// Vacancy probabilities, comma separated
        #[arg(long, value_delimiter = ',', value_parser = unitless)]
        p: Vec<f64> = vec![0.0, 0.01, 0.05, 0.10],
        #[arg(long)]
        seed: u64 = 1,
    }
}

settings! {
    Nonlinear / NonlinearFlags {
        #[arg(long)]
        lattice: String = "square:0.8".into(),
        #[arg(long)]
        extent: usize = 31,
        /// Drive strengths in Γ₀, comma separated
        #[arg(long, value_delimiter = ',', value_parser = unitless)]
        eta: Vec<f64> = vec![0.05, 0.25, 0.5, 1.0],
        /// Detuning measured from the collective resonance Ω̃ˣˣ(0)
        #[arg(long, value_parser = unitless, allow_hyphen_values = true)]
        delta_offset: f64 = 0.0,
        #[arg(long, value_parser = unitless)]
        dt: f64 = 0.02,
        #[arg(long, value_parser = unitless)]
        t_max: f64 = 50.0,
        /// Also write an xz field map per drive strength
        #[arg(long)]
        map: bool = false,
        #[arg(long, value_parser = unitless, allow_hyphen_values = true)]
        u_min: f64 = -20.0,
        #[arg(long, value_parser = unitless, allow_hyphen_values = true)]
        u_max: f64 = 20.0,
        #[arg(long)]
        u_count: usize = 81,
        #[arg(long, value_parser = unitless, allow_hyphen_values = true)]
        v_min: f64 = -10.0,
        #[arg(long, value_parser = unitless, allow_hyphen_values = true)]
        v_max: f64 = 10.0,
        #[arg(long)]
        v_count: usize = 41,
    }
}

settings! {
    Honeycomb / HoneycombFlags {
        /// Nearest-neighbour distance
        #[arg(long, value_parser = unitless)]
        d: f64 = 0.9,
        #[arg(long, value_parser = unitless, allow_hyphen_values = true)]
        delta: f64 = -0.18,
        #[arg(long = "mub-x", alias = "muBx", value_parser = unitless, allow_hyphen_values = true)]
        mub_x: f64 = 5.0,
        #[arg(long = "mub-y", alias = "muBy", value_parser = unitless, allow_hyphen_values = true)]
        mub_y: f64 = 0.0,
        #[arg(long = "mub-z", alias = "muBz", value_parser = unitless, allow_hyphen_values = true)]
        mub_z: f64 = 0.0,
        #[arg(long)]
        samples: usize = 60,
        #[arg(long, value_parser = unitless, allow_hyphen_values = true)]
        delta_min: f64 = -3.0,
        #[arg(long, value_parser = unitless, allow_hyphen_values = true)]
        delta_max: f64 = 3.0,
        #[arg(long)]
        delta_count: usize = 301,
    }
}

/// Read a flat TOML file. Nested tables are refused, as are strings that
/// look like a number with a unit attached.
pub fn read_file(path: &Path) -> anyhow::Result<toml::Table> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let table: toml::Table = text.parse().with_context(|| format!("parsing {}", path.display()))?;
    for (k, v) in &table {
        check_value(k, v)?;
    }
    Ok(table)
}

fn check_value(key: &str, v: &toml::Value) -> anyhow::Result<()> {
    match v {
        toml::Value::Table(_) => bail!("key `{key}`: nested tables are not supported; the config is flat"),
        toml::Value::Array(items) => items.iter().try_for_each(|x| check_value(key, x)),
        toml::Value::String(s) if key != "lattice" => {
            if unitless(s).is_err() && s.trim().starts_with(|c: char| c.is_ascii_digit() || c == '-' || c == '.') {
                bail!("key `{key}`: `{s}` looks dimensioned; give bare numbers in units of λ and Γ₀");
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

/// Overlay `flags` on `file` and deserialize into the settings `T`.
pub fn resolve<T, F>(file: &toml::Table, flags: &F) -> anyhow::Result<(T, toml::Table)>
where
    T: DeserializeOwned + Serialize,
    F: Serialize,
{
    let mut merged = file.clone();
    let over = toml::Table::try_from(flags).context("encoding flags")?;
    for (k, v) in over {
        merged.insert(k, v);
    }
    let value: T = toml::Value::Table(merged).try_into().map_err(|e: toml::de::Error| anyhow::anyhow!("{}", e.message()))?;
    let resolved = toml::Table::try_from(&value).context("encoding resolved config")?;
    Ok((value, resolved))
}

/// Like [`resolve`] for commands whose keys are split over two settings
/// structs. Keys known to `A` go there, the rest must belong to `B`.
pub fn resolve_split<A, B, FA, FB>(file: &toml::Table, fa: &FA, fb: &FB) -> anyhow::Result<(A, B, toml::Table)>
where
    A: DeserializeOwned + Serialize + Default,
    B: DeserializeOwned + Serialize,
    FA: Serialize,
    FB: Serialize,
{
    let known = toml::Table::try_from(A::default()).context("encoding defaults")?;
    let (mut ta, mut tb) = (toml::Table::new(), toml::Table::new());
    for (k, v) in file {
        if known.contains_key(k) {
            ta.insert(k.clone(), v.clone());
        } else {
            tb.insert(k.clone(), v.clone());
        }
    }
    let (a, mut ra) = resolve::<A, _>(&ta, fa)?;
    let (b, rb) = resolve::<B, _>(&tb, fb)?;
    ra.extend(rb);
    Ok((a, b, ra))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file: toml::Table = "samples = 10\nmub_x = 2.0\n".parse().unwrap();
        let flags = BandsFlags {
            mub_x: Some(4.0),
            ..Default::default()
        };
        let (b, _): (Bands, _) = resolve(&file, &flags).unwrap();
        assert_eq!(b.samples, 10);
        assert_eq!(b.mub_x, 4.0);
        assert_eq!(b.lattice, "square:0.8");
    }

    #[test]
    fn unknown_key_rejected() {
        let file: toml::Table = "sampels = 10\n".parse().unwrap();
        let r: anyhow::Result<(Bands, _)> = resolve(&file, &BandsFlags::default());
        assert!(r.unwrap_err().to_string().contains("sampels"));
    }

    #[test]
    fn split_keys() {
        let file: toml::Table = "extent = 8\nsigma_xy = 0.05\n".parse().unwrap();
        let (rs, d, all): (RealSpace, Disorder, _) =
            resolve_split(&file, &RealSpaceFlags::default(), &DisorderFlags::default()).unwrap();
        assert_eq!(rs.extent, 8);
        assert_eq!(d.sigma_xy, 0.05);
        assert!(all.contains_key("n_configs") && all.contains_key("plane"));
        let bad: toml::Table = "extnt = 8\n".parse().unwrap();
        let r: anyhow::Result<(RealSpace, Disorder, _)> =
            resolve_split(&bad, &RealSpaceFlags::default(), &DisorderFlags::default());
        assert!(r.is_err());
    }

    #[test]
    fn dimensioned_values_refused() {
        assert!(unitless("0.8nm").unwrap_err().contains("dimensioned"));
        assert_eq!(unitless("-1.5").unwrap(), -1.5);
        let v = toml::Value::String("3 MHz".into());
        assert!(check_value("mub_x", &v).is_err());
    }
}
