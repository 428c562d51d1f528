//! Multi-angle DEER datasets: a TOML manifest listing one trace table per
//! field setting. Trace paths are relative to the manifest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::table::{check_toml_header, load_trace, save_trace, Meta, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::inference::MultiAngleDataset;
use crate::physics::FieldSetting;
use crate::Vec3;

pub const DATASET_FORMAT: &str = "reporter-dataset";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub field_gauss: f64,
    /// Unit field direction in the lab frame.
    pub direction: [f64; 3],
    pub trace: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetFile {
    format: String,
    version: u32,
    #[serde(default)]
    entry: Vec<DatasetEntry>,
}

/// Writes `<stem>.toml` and `<stem>_<i>.csv` into `dir`; returns every path
/// written, manifest first.
pub fn save_dataset(
    dir: impl AsRef<Path>,
    stem: &str,
    dataset: &MultiAngleDataset,
    meta: &Meta,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut written = vec![dir.join(format!("{stem}.toml"))];
    let mut entry = Vec::with_capacity(dataset.entries.len());
    for (i, (field, trace)) in dataset.entries.iter().enumerate() {
        let name = format!("{stem}_{i}.csv");
        let d = field.direction();
        let mut m = meta.clone();
        m.insert("field_gauss".into(), field.magnitude().to_string());
        m.insert("field_direction".into(), format!("{},{},{}", d.x, d.y, d.z));
        save_trace(dir.join(&name), trace, &m)?;
        written.push(dir.join(&name));
        entry.push(DatasetEntry {
            field_gauss: field.magnitude(),
            direction: [d.x, d.y, d.z],
            trace: name,
        });
    }
    let text = toml::to_string(&DatasetFile {
        format: DATASET_FORMAT.into(),
        version: FORMAT_VERSION,
        entry,
    })
    .map_err(|e| Error::schema(e.to_string()))?;
    std::fs::write(&written[0], text)?;
    Ok(written)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<MultiAngleDataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    check_toml_header(&text, DATASET_FORMAT)?;
    let file: DatasetFile = toml::from_str(&text).map_err(|e| super::config::toml_error(&text, &e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let entries = file
        .entry
        .iter()
        .map(|e| {
            let [x, y, z] = e.direction;
            let field = FieldSetting::new(e.field_gauss, Vec3::new(x, y, z))?;
            let (trace, _) = load_trace(base.join(&e.trace))?;
            Ok((field, trace))
        })
        .collect::<Result<Vec<_>>>()?;
    MultiAngleDataset::new(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::field_cone;
    use crate::physics::default_nv_axis;
    use crate::{DecoherenceParams, PhysicalConstants, SpinSystem};

    #[test]
    fn round_trip() {
        let c = PhysicalConstants::default();
        let fields = field_cone(300.0, &default_nv_axis(), 30.0, 3).unwrap();
        let scene = SpinSystem::new(fields[0]).with_reporters([Vec3::new(1.0, 2.0, 4.0)]);
        let ds = MultiAngleDataset::simulate(&c, &scene, &fields, &[0.0, 0.5, 1.25], 1.0, &DecoherenceParams::default())
            .unwrap();
        let dir = std::env::temp_dir().join(format!("reporter-dataset-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let paths = save_dataset(&dir, "deer", &ds, &Meta::new()).unwrap();
        assert_eq!(paths.len(), 4);
        let back = load_dataset(&paths[0]).unwrap();
        assert_eq!(back.entries.len(), 3);
        for ((fa, ta), (fb, tb)) in ds.entries.iter().zip(&back.entries) {
            assert_eq!(ta, tb);
            assert!((fa.direction() - fb.direction()).norm() < 1e-15);
            assert_eq!(fa.magnitude(), fb.magnitude());
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn wrong_format_is_rejected() {
        let dir = std::env::temp_dir().join(format!("reporter-dataset-bad-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("x.toml");
        std::fs::write(&p, "format = \"reporter-fit\"\nversion = 1\n").unwrap();
        assert!(matches!(load_dataset(&p), Err(Error::Schema { .. })));
        std::fs::write(&p, "format = \"reporter-dataset\"\nversion = 9\n").unwrap();
        assert!(matches!(load_dataset(&p), Err(Error::VersionMismatch { .. })));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
