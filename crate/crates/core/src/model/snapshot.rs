use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CaseStress, Configuration, LoadKind, StressComponent, StressSnapshot};
use crate::error::{Error, Result};
use crate::util::io::{read_f64_raw, write_f64_raw};
use crate::util::rng::fnv1a64_f64;

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotManifest {
    schema: u32,
    config: Vec<f64>,
    space_version: u32,
    load_cases: Vec<String>,
    element_count: usize,
    node_count: usize,
    /// FNV-1a over all stress component arrays, hex.
    checksum: String,
}

fn checksum(snapshot: &StressSnapshot) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for case in &snapshot.cases {
        for comp in StressComponent::ALL {
            h ^= fnv1a64_f64(case.component(comp));
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// Persists one snapshot as a directory: a JSON manifest plus raw
/// little-endian f64 arrays, one file per (load case, component) and one for
/// the displacements.
pub fn save_snapshot(dir: &Path, snapshot: &StressSnapshot, space_version: u32) -> Result<()> {
    fs::create_dir_all(dir)?;
    let manifest = SnapshotManifest {
        schema: 1,
        config: snapshot.config.values.clone(),
        space_version,
        load_cases: snapshot
            .cases
            .iter()
            .map(|c| c.kind.name().to_string())
            .collect(),
        element_count: snapshot.n_elements(),
        node_count: snapshot.n_nodes(),
        checksum: format!("{:016x}", checksum(snapshot)),
    };
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_vec_pretty(&manifest)?,
    )?;
    for case in &snapshot.cases {
        for comp in StressComponent::ALL {
            let name = format!("{}_{}.f64", case.kind.name(), comp.name());
            write_f64_raw(&dir.join(name), case.component(comp))?;
        }
    }
    // displacements: row-major (case, node, dof)
    let mut disp = Vec::with_capacity(snapshot.cases.len() * snapshot.n_nodes() * 2);
    for case in &snapshot.cases {
        for u in &case.displacements {
            disp.extend_from_slice(u);
        }
    }
    write_f64_raw(&dir.join("displacements.f64"), &disp)?;
    Ok(())
}

/// Loads a snapshot saved by [`save_snapshot`], verifying the checksum.
/// Returns the snapshot and the space version it was solved under.
pub fn load_snapshot(dir: &Path) -> Result<(StressSnapshot, u32)> {
    let manifest: SnapshotManifest = serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?;
    if manifest.schema != 1 {
        return Err(Error::Data(format!(
            "unsupported snapshot schema {} in {}",
            manifest.schema,
            dir.display()
        )));
    }
    let mut cases = Vec::with_capacity(manifest.load_cases.len());
    for case_name in &manifest.load_cases {
        let kind = match case_name.as_str() {
            "hogging" => LoadKind::Hogging,
            "sagging" => LoadKind::Sagging,
            other => return Err(Error::Data(format!("unknown load case {other}"))),
        };
        let mut case = CaseStress::zeros(kind, manifest.element_count, manifest.node_count);
        for comp in StressComponent::ALL {
            let name = format!("{}_{}.f64", case_name, comp.name());
            let values = read_f64_raw(&dir.join(&name))?;
            if values.len() != manifest.element_count {
                return Err(Error::Data(format!("{name} has wrong length")));
            }
            *case.component_mut(comp) = values;
        }
        cases.push(case);
    }
    let disp = read_f64_raw(&dir.join("displacements.f64"))?;
    if disp.len() != cases.len() * manifest.node_count * 2 {
        return Err(Error::Data("displacements.f64 has wrong length".into()));
    }
    for (ci, case) in cases.iter_mut().enumerate() {
        let base = ci * manifest.node_count * 2;
        for n in 0..manifest.node_count {
            case.displacements[n] = [disp[base + 2 * n], disp[base + 2 * n + 1]];
        }
    }
    let snapshot = StressSnapshot {
        config: Configuration::new(manifest.config.clone()),
        cases,
    };
    let expect = manifest.checksum;
    let got = format!("{:016x}", checksum(&snapshot));
    if got != expect {
        return Err(Error::Data(format!(
            "snapshot checksum mismatch in {}: {got} != {expect}",
            dir.display()
        )));
    }
    Ok((snapshot, manifest.space_version))
}
