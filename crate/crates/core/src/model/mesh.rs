use std::collections::BTreeMap;

use super::spec::{LoadProfile, ModelSpec};
use super::{
    Element, HullModel, LoadCase, LoadKind, ParameterDef, ParameterSpace, Patch, RegionTag,
};
use crate::error::{Error, Result};

/// Node id of (column, row) with column-major numbering; rows count R+1 node
/// rows. Numbering along the short direction keeps the stiffness bandwidth
/// small.
#[inline]
pub(super) fn node_id(col: usize, row: usize, n_node_rows: usize) -> usize {
    col * n_node_rows + row
}

pub(super) fn build(spec: &ModelSpec) -> Result<(HullModel, ParameterSpace)> {
    spec.validate()?;
    let nx = spec.grid.nx;
    let dx = spec.grid.length / nx as f64;
    let total_rows: usize = spec.panels.iter().map(|p| p.rows).sum();
    let n_node_rows = total_rows + 1;

    // z coordinate of every node row, stacking the bands bottom-up.
    let mut z_rows = Vec::with_capacity(n_node_rows);
    z_rows.push(0.0);
    for panel in &spec.panels {
        for _ in 0..panel.rows {
            z_rows.push(z_rows.last().unwrap() + panel.row_height);
        }
    }

    let mut nodes = Vec::with_capacity((nx + 1) * n_node_rows);
    for col in 0..=nx {
        for &z in &z_rows {
            nodes.push([col as f64 * dx, z]);
        }
    }

    // Elements, column-major ids to match node numbering.
    let band_of_row: Vec<usize> = spec
        .panels
        .iter()
        .enumerate()
        .flat_map(|(b, p)| std::iter::repeat_n(b, p.rows))
        .collect();
    let n_elements = nx * total_rows;
    let mut elements = Vec::with_capacity(n_elements);
    let mut element_nodes = Vec::with_capacity(n_elements);
    let mut fixed_thickness = vec![None; n_elements];
    for col in 0..nx {
        for row in 0..total_rows {
            let id = col * total_rows + row;
            let panel = &spec.panels[band_of_row[row]];
            elements.push(Element {
                id,
                patch_id: usize::MAX, // assigned below
                centroid_z: 0.5 * (z_rows[row] + z_rows[row + 1]),
                area: dx * panel.row_height,
                panel_width_b: panel.row_height,
                panel_length_a: panel.patch_cols as f64 * dx,
                region_tag: panel.region,
            });
            element_nodes.push([
                node_id(col, row, n_node_rows),
                node_id(col + 1, row, n_node_rows),
                node_id(col + 1, row + 1, n_node_rows),
                node_id(col, row + 1, n_node_rows),
            ]);
            if let Some(t) = panel.fixed {
                fixed_thickness[id] = Some(t);
            }
        }
    }

    // Patches: per parameterized band, chunks of `patch_cols` columns over
    // the full band height.
    let mut patches: Vec<Patch> = Vec::new();
    let mut region_patches: BTreeMap<RegionTag, Vec<usize>> = BTreeMap::new();
    let mut row_start = 0usize;
    for panel in &spec.panels {
        if panel.fixed.is_none() {
            let mut col = 0;
            while col < nx {
                let col_end = (col + panel.patch_cols).min(nx);
                let pid = patches.len();
                let mut element_ids = Vec::new();
                for c in col..col_end {
                    for r in row_start..row_start + panel.rows {
                        let eid = c * total_rows + r;
                        elements[eid].patch_id = pid;
                        element_ids.push(eid);
                    }
                }
                let area: f64 = element_ids.iter().map(|&e| elements[e].area).sum();
                let vcg = element_ids
                    .iter()
                    .map(|&e| elements[e].area * elements[e].centroid_z)
                    .sum::<f64>()
                    / area;
                patches.push(Patch {
                    id: pid,
                    element_ids,
                    // t/mm: density [t/m³] x area [m²] x 1e-3 [m/mm]
                    linear_density_coeff: spec.material.density * area * 1e-3,
                    vcg,
                });
                region_patches.entry(panel.region).or_default().push(pid);
                col = col_end;
            }
        }
        row_start += panel.rows;
    }
    if patches.is_empty() {
        return Err(Error::Config(
            "every panel band is fixed; nothing to optimize".into(),
        ));
    }

    // One parameter per region, ordered by first appearance in the panel list.
    let mut region_order: Vec<RegionTag> = Vec::new();
    for panel in &spec.panels {
        if panel.fixed.is_none() && !region_order.contains(&panel.region) {
            region_order.push(panel.region);
        }
    }
    let mut params = Vec::with_capacity(region_order.len());
    for (index, region) in region_order.iter().enumerate() {
        let patch_ids = region_patches[region].clone();
        let d: f64 = patch_ids
            .iter()
            .map(|&p| patches[p].linear_density_coeff)
            .sum();
        let vcg = patch_ids
            .iter()
            .map(|&p| patches[p].linear_density_coeff * patches[p].vcg)
            .sum::<f64>()
            / d;
        let rspec = &spec.regions[region];
        params.push(ParameterDef {
            index,
            label: region.name().to_string(),
            patch_ids,
            domain: rspec.domain.clone(),
            parent: None,
            linear_density: d,
            vcg,
            default_value: rspec.default,
        });
    }
    let space = ParameterSpace { params, version: 0 };
    space.validate(&patches)?;

    // Simply-supported ends: vertical pins at both bottom corners, one
    // longitudinal pin at the left corner.
    let bottom_left = node_id(0, 0, n_node_rows);
    let bottom_right = node_id(nx, 0, n_node_rows);
    let supports = vec![(bottom_left, 1), (bottom_left, 0), (bottom_right, 1)];

    let monitored_node = spec
        .loads
        .monitored_node
        .unwrap_or_else(|| node_id(nx / 2, total_rows, n_node_rows));
    if monitored_node >= nodes.len() {
        return Err(Error::Config(format!(
            "monitored node {monitored_node} out of range ({} nodes)",
            nodes.len()
        )));
    }

    let mut model = HullModel {
        nodes,
        element_nodes,
        elements,
        patches,
        fixed_thickness,
        loads: Vec::new(),
        monitored_node,
        material: spec.material,
        supports,
    };
    model.loads = build_loads(spec, &model, &space)?;
    Ok((model, space))
}

/// End tractions are fixed nodal forces representing the wave bending moment:
/// they are integrated once against the reference (default) thickness
/// profile, so thicker designs see lower stresses.
fn build_loads(
    spec: &ModelSpec,
    model: &HullModel,
    space: &ParameterSpace,
) -> Result<Vec<LoadCase>> {
    let nx = spec.grid.nx;
    let total_rows: usize = spec.panels.iter().map(|p| p.rows).sum();
    let n_node_rows = total_rows + 1;
    let reference = space.default_config();
    let t_ref = model.thickness_map(space, &reference)?;

    // Neutral axis of the end section under the reference profile.
    let mut first = 0.0;
    let mut area = 0.0;
    for row in 0..total_rows {
        let eid = row; // column 0
        let t = t_ref[eid] * 1e-3;
        let h = model.nodes[node_id(0, row + 1, n_node_rows)][1]
            - model.nodes[node_id(0, row, n_node_rows)][1];
        let z_mid = model.elements[eid].centroid_z;
        first += t * h * z_mid;
        area += t * h;
    }
    let z_na = first / area;
    let z_top = model.nodes[node_id(0, total_rows, n_node_rows)][1];
    let c = (z_top - z_na).max(z_na);

    let mut cases = Vec::with_capacity(2);
    for kind in LoadKind::ALL {
        let dir = match kind {
            LoadKind::Hogging => 1.0,
            LoadKind::Sagging => -1.0,
        };
        // Linear traction sigma(z) = a + b z in Pa.
        let (a, b) = match spec.loads.profile {
            LoadProfile::Bending => {
                let scale = dir * spec.loads.bending_stress * 1e6 / c;
                (-scale * z_na, scale)
            }
            LoadProfile::Uniform => (dir * spec.loads.bending_stress * 1e6, 0.0),
        };

        let mut forces = vec![[0.0f64; 2]; model.nodes.len()];
        for (end_col, elem_col, sign) in [(0usize, 0usize, -1.0), (nx, nx - 1, 1.0)] {
            for row in 0..total_rows {
                let eid = elem_col * total_rows + row;
                let t = t_ref[eid] * 1e-3;
                let z1 = model.nodes[node_id(end_col, row, n_node_rows)][1];
                let z2 = model.nodes[node_id(end_col, row + 1, n_node_rows)][1];
                let len = z2 - z1;
                // Consistent loads of a linear traction on a 2-node edge.
                let f1 = sign * t * len * (a / 2.0 + b * (2.0 * z1 + z2) / 6.0);
                let f2 = sign * t * len * (a / 2.0 + b * (z1 + 2.0 * z2) / 6.0);
                forces[node_id(end_col, row, n_node_rows)][0] += f1;
                forces[node_id(end_col, row + 1, n_node_rows)][0] += f2;
            }
        }
        let boundary_tractions: Vec<(usize, [f64; 2])> = forces
            .into_iter()
            .enumerate()
            .filter(|(_, f)| f[0] != 0.0 || f[1] != 0.0)
            .collect();

        cases.push(LoadCase {
            kind,
            boundary_tractions,
            lateral_pressure: vec![spec.loads.pressure; model.n_elements()],
        });
    }
    Ok(cases)
}
