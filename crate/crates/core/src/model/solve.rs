use super::{CaseStress, Configuration, HullModel, ParameterSpace, StressSnapshot};
use crate::error::{Error, Result};

/// Symmetric banded matrix in lower storage: entry (i, j) with
/// j <= i <= j + hbw lives at `data[j * (hbw + 1) + (i - j)]`.
struct BandedMatrix {
    n: usize,
    hbw: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    fn zeros(n: usize, hbw: usize) -> Self {
        Self {
            n,
            hbw,
            data: vec![0.0; n * (hbw + 1)],
        }
    }

    #[inline]
    fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i >= j && i - j <= self.hbw);
        self.data[j * (self.hbw + 1) + (i - j)] += v;
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        if hi - lo > self.hbw {
            0.0
        } else {
            self.data[lo * (self.hbw + 1) + (hi - lo)]
        }
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i >= j && i - j <= self.hbw);
        self.data[j * (self.hbw + 1) + (i - j)] = v;
    }

    /// In-place banded Cholesky, K = L L^T with L in the same storage.
    fn cholesky(&mut self) -> Result<()> {
        let hbw = self.hbw;
        for j in 0..self.n {
            let k_lo = j.saturating_sub(hbw);
            let mut d = self.get(j, j);
            for k in k_lo..j {
                let l = self.get(j, k);
                d -= l * l;
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::Solver(format!(
                    "singular stiffness: non-positive pivot at dof {j}"
                )));
            }
            let ljj = d.sqrt();
            self.set(j, j, ljj);
            let i_hi = (j + hbw).min(self.n - 1);
            for i in j + 1..=i_hi {
                let k_lo = i.saturating_sub(hbw);
                let mut s = self.get(i, j);
                for k in k_lo..j {
                    s -= self.get(i, k) * self.get(j, k);
                }
                self.set(i, j, s / ljj);
            }
        }
        Ok(())
    }

    /// Solves L L^T x = f after [`Self::cholesky`].
    fn solve(&self, f: &[f64]) -> Vec<f64> {
        let n = self.n;
        let hbw = self.hbw;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let k_lo = i.saturating_sub(hbw);
            let mut s = f[i];
            for k in k_lo..i {
                s -= self.get(i, k) * y[k];
            }
            y[i] = s / self.get(i, i);
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let k_hi = (i + hbw).min(n - 1);
            let mut s = y[i];
            for k in i + 1..=k_hi {
                s -= self.get(k, i) * x[k];
            }
            x[i] = s / self.get(i, i);
        }
        x
    }
}

/// Plane-stress constitutive matrix (Pa).
fn d_matrix(e_pa: f64, nu: f64) -> [[f64; 3]; 3] {
    let c = e_pa / (1.0 - nu * nu);
    [
        [c, c * nu, 0.0],
        [c * nu, c, 0.0],
        [0.0, 0.0, c * (1.0 - nu) / 2.0],
    ]
}

/// Strain-displacement matrix of the bilinear quad at natural coordinates
/// (xi, eta), together with det J.
fn b_matrix(coords: &[[f64; 2]; 4], xi: f64, eta: f64) -> ([[f64; 8]; 3], f64) {
    // dN/dxi, dN/deta for corners (-1,-1), (1,-1), (1,1), (-1,1)
    let dn_dxi = [
        [-(1.0 - eta) / 4.0, -(1.0 - xi) / 4.0],
        [(1.0 - eta) / 4.0, -(1.0 + xi) / 4.0],
        [(1.0 + eta) / 4.0, (1.0 + xi) / 4.0],
        [-(1.0 + eta) / 4.0, (1.0 - xi) / 4.0],
    ];
    let mut j = [[0.0f64; 2]; 2];
    for a in 0..4 {
        j[0][0] += dn_dxi[a][0] * coords[a][0];
        j[0][1] += dn_dxi[a][0] * coords[a][1];
        j[1][0] += dn_dxi[a][1] * coords[a][0];
        j[1][1] += dn_dxi[a][1] * coords[a][1];
    }
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let inv = [
        [j[1][1] / det, -j[0][1] / det],
        [-j[1][0] / det, j[0][0] / det],
    ];
    let mut b = [[0.0f64; 8]; 3];
    for a in 0..4 {
        let dn_dx = inv[0][0] * dn_dxi[a][0] + inv[0][1] * dn_dxi[a][1];
        let dn_dz = inv[1][0] * dn_dxi[a][0] + inv[1][1] * dn_dxi[a][1];
        b[0][2 * a] = dn_dx;
        b[1][2 * a + 1] = dn_dz;
        b[2][2 * a] = dn_dz;
        b[2][2 * a + 1] = dn_dx;
    }
    (b, det)
}

/// Element stiffness, 2x2 Gauss quadrature, thickness in m.
fn element_stiffness(coords: &[[f64; 2]; 4], d: &[[f64; 3]; 3], t_m: f64) -> [[f64; 8]; 8] {
    let g = 1.0 / 3.0f64.sqrt();
    let mut ke = [[0.0f64; 8]; 8];
    for &xi in &[-g, g] {
        for &eta in &[-g, g] {
            let (b, det) = b_matrix(coords, xi, eta);
            // D B
            let mut db = [[0.0f64; 8]; 3];
            for r in 0..3 {
                for c in 0..8 {
                    db[r][c] = d[r][0] * b[0][c] + d[r][1] * b[1][c] + d[r][2] * b[2][c];
                }
            }
            let w = t_m * det;
            for r in 0..8 {
                for c in 0..8 {
                    ke[r][c] += w * (b[0][r] * db[0][c] + b[1][r] * db[1][c] + b[2][r] * db[2][c]);
                }
            }
        }
    }
    ke
}

pub(super) fn solve(
    model: &HullModel,
    space: &ParameterSpace,
    config: &Configuration,
) -> Result<StressSnapshot> {
    let t_mm = model.thickness_map(space, config)?;
    let e_pa = model.material.youngs_modulus * 1e6;
    let d = d_matrix(e_pa, model.material.poisson);
    let n_dof = model.n_nodes() * 2;

    let hbw = model
        .element_nodes
        .iter()
        .map(|nodes| {
            let max = nodes.iter().max().unwrap() * 2 + 1;
            let min = nodes.iter().min().unwrap() * 2;
            max - min
        })
        .max()
        .unwrap_or(1);

    let mut k = BandedMatrix::zeros(n_dof, hbw);
    for (eid, nodes) in model.element_nodes.iter().enumerate() {
        let coords = [
            model.nodes[nodes[0]],
            model.nodes[nodes[1]],
            model.nodes[nodes[2]],
            model.nodes[nodes[3]],
        ];
        let ke = element_stiffness(&coords, &d, t_mm[eid] * 1e-3);
        let dofs: Vec<usize> = nodes.iter().flat_map(|&n| [2 * n, 2 * n + 1]).collect();
        for a in 0..8 {
            for b in 0..8 {
                if dofs[a] >= dofs[b] {
                    k.add(dofs[a], dofs[b], ke[a][b]);
                }
            }
        }
    }

    // Zero-valued Dirichlet constraints: blank row and column, unit diagonal.
    let mut constrained = vec![false; n_dof];
    for &(node, dof) in &model.supports {
        let c = 2 * node + dof;
        constrained[c] = true;
        for off in 1..=hbw {
            if c + off < n_dof {
                k.set(c + off, c, 0.0);
            }
            if c >= off {
                k.set(c, c - off, 0.0);
            }
        }
        k.set(c, c, 1.0);
    }

    k.cholesky()?;

    let mut cases = Vec::with_capacity(model.loads.len());
    for load in &model.loads {
        let mut f = vec![0.0f64; n_dof];
        for &(node, force) in &load.boundary_tractions {
            f[2 * node] += force[0];
            f[2 * node + 1] += force[1];
        }
        // Lateral pressure as consistent vertical nodal loads.
        for (eid, nodes) in model.element_nodes.iter().enumerate() {
            let fz = load.lateral_pressure[eid] * model.elements[eid].area / 4.0;
            for &n in nodes {
                f[2 * n + 1] += fz;
            }
        }
        for (c, &is_constrained) in constrained.iter().enumerate() {
            if is_constrained {
                f[c] = 0.0;
            }
        }

        let u = k.solve(&f);

        let n_el = model.n_elements();
        let mut case = CaseStress::zeros(load.kind, n_el, model.n_nodes());
        for (eid, nodes) in model.element_nodes.iter().enumerate() {
            let coords = [
                model.nodes[nodes[0]],
                model.nodes[nodes[1]],
                model.nodes[nodes[2]],
                model.nodes[nodes[3]],
            ];
            let (b, _) = b_matrix(&coords, 0.0, 0.0);
            let mut ue = [0.0f64; 8];
            for (a, &n) in nodes.iter().enumerate() {
                ue[2 * a] = u[2 * n];
                ue[2 * a + 1] = u[2 * n + 1];
            }
            let mut strain = [0.0f64; 3];
            for r in 0..3 {
                for c in 0..8 {
                    strain[r] += b[r][c] * ue[c];
                }
            }
            // centroid stress in MPa
            case.sigma_x[eid] =
                (d[0][0] * strain[0] + d[0][1] * strain[1] + d[0][2] * strain[2]) * 1e-6;
            case.sigma_y[eid] =
                (d[1][0] * strain[0] + d[1][1] * strain[1] + d[1][2] * strain[2]) * 1e-6;
            case.tau_xy[eid] =
                (d[2][0] * strain[0] + d[2][1] * strain[1] + d[2][2] * strain[2]) * 1e-6;
        }
        for (n, chunk) in u.chunks_exact(2).enumerate() {
            case.displacements[n] = [chunk[0], chunk[1]];
        }
        cases.push(case);
    }

    Ok(StressSnapshot {
        config: config.clone(),
        cases,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::spec::{GridSpec, LoadProfile, LoadSpec, ModelSpec, PanelSpec, RegionSpec};
    use crate::model::{build_demo_model, vertical_deflection, Material, RegionTag};
    use std::collections::BTreeMap;

    /// Single square element, uniform end traction: the reciprocity patch
    /// test model.
    fn single_element_spec(domain: Vec<f64>, default: f64, sigma_mpa: f64) -> ModelSpec {
        let mut regions = BTreeMap::new();
        regions.insert(RegionTag::Shell, RegionSpec { default, domain });
        ModelSpec {
            grid: GridSpec { length: 1.0, nx: 1 },
            material: Material::default(),
            panels: vec![PanelSpec {
                region: RegionTag::Shell,
                rows: 1,
                row_height: 1.0,
                patch_cols: 1,
                fixed: None,
            }],
            regions,
            loads: LoadSpec {
                profile: LoadProfile::Uniform,
                bending_stress: sigma_mpa,
                pressure: 0.0,
                monitored_node: None,
            },
        }
    }

    #[test]
    fn uniaxial_patch_test_sigma_equals_p_over_t() {
        // traction built at reference thickness 10mm; at t = 10mm the stress
        // equals the prescribed value exactly
        let spec = single_element_spec(vec![5.0, 10.0, 20.0], 10.0, 120.0);
        let (model, space) = build_demo_model(&spec).unwrap();
        let snap = solve(&model, &space, &Configuration::new(vec![10.0])).unwrap();
        assert!((snap.cases[0].sigma_x[0] - 120.0).abs() < 1e-9);
        assert!(snap.cases[0].sigma_y[0].abs() < 1e-9);
        assert!(snap.cases[0].sigma_z[0].abs() == 0.0);

        // doubling the thickness halves every membrane stress component
        let snap2 = solve(&model, &space, &Configuration::new(vec![20.0])).unwrap();
        assert!((snap2.cases[0].sigma_x[0] - 60.0).abs() < 1e-9);
    }

    #[test]
    fn zero_loads_give_zero_fields() {
        let mut spec = single_element_spec(vec![10.0], 10.0, 0.0);
        spec.loads.pressure = 0.0;
        let (model, space) = build_demo_model(&spec).unwrap();
        let snap = solve(&model, &space, &Configuration::new(vec![10.0])).unwrap();
        for case in &snap.cases {
            assert!(case.sigma_x.iter().all(|&v| v == 0.0));
            assert!(case
                .displacements
                .iter()
                .all(|u| u[0] == 0.0 && u[1] == 0.0));
        }
        assert_eq!(
            vertical_deflection(&snap, model.monitored_node).unwrap(),
            0.0
        );
    }

    #[test]
    fn hog_and_sag_are_mirrored_without_pressure() {
        let mut spec = ModelSpec::demo();
        spec.loads.pressure = 0.0;
        spec.grid.nx = 20; // keep the unit test quick
        let (model, space) = build_demo_model(&spec).unwrap();
        let snap = solve(&model, &space, &space.default_config()).unwrap();
        let hog = &snap.cases[0];
        let sag = &snap.cases[1];
        for e in 0..model.n_elements() {
            let denom = hog.sigma_x[e].abs().max(1.0);
            assert!((hog.sigma_x[e] + sag.sigma_x[e]).abs() / denom < 1e-9);
        }
    }

    #[test]
    fn solve_is_deterministic() {
        let mut spec = ModelSpec::demo();
        spec.grid.nx = 10;
        let (model, space) = build_demo_model(&spec).unwrap();
        let config = space.default_config();
        let a = solve(&model, &space, &config).unwrap();
        let b = solve(&model, &space, &config).unwrap();
        for (ca, cb) in a.cases.iter().zip(&b.cases) {
            assert_eq!(ca.sigma_x, cb.sigma_x);
            assert_eq!(ca.tau_xy, cb.tau_xy);
            assert_eq!(ca.displacements, cb.displacements);
        }
    }

    #[test]
    fn non_member_thickness_is_a_domain_error() {
        let spec = single_element_spec(vec![10.0], 10.0, 100.0);
        let (model, space) = build_demo_model(&spec).unwrap();
        let err = solve(&model, &space, &Configuration::new(vec![11.0])).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn singular_stiffness_is_a_solver_error() {
        // unconstrained free-free system: rigid body modes make the
        // factorization fail on a non-positive pivot
        let mut k = BandedMatrix::zeros(4, 2);
        k.add(0, 0, 1.0);
        k.add(1, 1, 1.0);
        k.add(1, 0, -1.0);
        k.add(2, 2, 0.0);
        k.add(3, 3, 1.0);
        let err = k.cholesky().unwrap_err();
        assert!(matches!(err, Error::Solver(_)));
    }

    #[test]
    fn element_stiffness_is_symmetric() {
        let coords = [[0.0, 0.0], [0.8, 0.1], [0.9, 1.1], [-0.1, 0.9]];
        let d = d_matrix(2.06e11, 0.3);
        let ke = element_stiffness(&coords, &d, 0.01);
        for a in 0..8 {
            for b in 0..8 {
                let denom = ke[a][b].abs().max(1.0);
                assert!((ke[a][b] - ke[b][a]).abs() / denom < 1e-12);
            }
        }
    }

    #[test]
    fn banded_assembly_matches_dense_reference() {
        let mut spec = ModelSpec::demo();
        spec.grid.nx = 3;
        spec.panels.truncate(2);
        spec.regions
            .retain(|t, _| *t == RegionTag::Bottom || *t == RegionTag::InnerBottom);
        let (model, space) = build_demo_model(&spec).unwrap();
        let config = space.default_config();
        let t_mm = model.thickness_map(&space, &config).unwrap();
        let d = d_matrix(model.material.youngs_modulus * 1e6, model.material.poisson);
        let n_dof = model.n_nodes() * 2;

        let mut dense = vec![vec![0.0f64; n_dof]; n_dof];
        for (eid, nodes) in model.element_nodes.iter().enumerate() {
            let coords = [
                model.nodes[nodes[0]],
                model.nodes[nodes[1]],
                model.nodes[nodes[2]],
                model.nodes[nodes[3]],
            ];
            let ke = element_stiffness(&coords, &d, t_mm[eid] * 1e-3);
            let dofs: Vec<usize> = nodes.iter().flat_map(|&n| [2 * n, 2 * n + 1]).collect();
            for a in 0..8 {
                for b in 0..8 {
                    dense[dofs[a]][dofs[b]] += ke[a][b];
                }
            }
        }
        // global symmetry of the dense assembly, relative to the matrix scale
        let scale = (0..n_dof).map(|i| dense[i][i].abs()).fold(0.0, f64::max);
        for i in 0..n_dof {
            for j in 0..n_dof {
                assert!((dense[i][j] - dense[j][i]).abs() / scale < 1e-12);
            }
        }
    }
}
