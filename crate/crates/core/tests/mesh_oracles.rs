use std::collections::BTreeSet;

use lodhelm::mesh::{build_embedding, patch, patch_dof_sets, MeshPair, StructuredTriMesh};
use proptest::prelude::*;

/// Element patch grown by scanning every element for a shared vertex.
fn brute_force_patch(mesh: &StructuredTriMesh, seed: usize, m: usize) -> BTreeSet<usize> {
    let mut set: BTreeSet<usize> = [seed].into();
    for _ in 0..m {
        let nodes: BTreeSet<usize> = set.iter().flat_map(|&e| mesh.elements()[e]).collect();
        set = (0..mesh.num_elements())
            .filter(|&e| mesh.elements()[e].iter().any(|v| nodes.contains(v)))
            .collect();
    }
    set
}

fn interior_seed(mesh: &StructuredTriMesh) -> usize {
    let n = mesh.cells_per_side();
    2 * ((n / 2) * n + n / 2)
}

#[test]
fn one_layer_patch_matches_brute_force() {
    let mesh = StructuredTriMesh::new(4).unwrap();
    for seed in [interior_seed(&mesh), interior_seed(&mesh) + 1] {
        let p = patch(&mesh, seed, 1).unwrap();
        assert!((8..=14).contains(&p.elements.len()), "{}", p.elements.len());
        let oracle: Vec<usize> = brute_force_patch(&mesh, seed, 1).into_iter().collect();
        assert_eq!(p.elements, oracle);
    }
}

#[test]
fn patches_are_nested_and_bounded() {
    for level in 1..=4 {
        let mesh = StructuredTriMesh::new(level).unwrap();
        for seed in 0..mesh.num_elements() {
            let mut prev = patch(&mesh, seed, 0).unwrap();
            assert_eq!(prev.elements, vec![seed]);
            for m in 1..=3 {
                let p = patch(&mesh, seed, m).unwrap();
                assert!(prev.elements.iter().all(|&e| p.contains(e)));
                assert!(p.elements.len() <= StructuredTriMesh::patch_size_bound(m));
                prev = p;
            }
        }
    }
}

#[test]
fn saturated_patch_is_whole_mesh() {
    let mesh = StructuredTriMesh::new(3).unwrap();
    for seed in 0..mesh.num_elements() {
        let p = patch(&mesh, seed, mesh.saturating_layers()).unwrap();
        assert_eq!(p.elements.len(), mesh.num_elements());
    }
    assert!(patch(&mesh, mesh.num_elements(), 1).is_err());
}

#[test]
fn patch_dofs_match_element_star_oracle() {
    let mesh = StructuredTriMesh::new(5).unwrap();
    let seed = interior_seed(&mesh);
    for m in [0, 1, 2] {
        let p = patch(&mesh, seed, m).unwrap();
        let dofs = patch_dof_sets(&mesh, &p.mask(mesh.num_elements()));
        let oracle: Vec<usize> = (0..mesh.num_nodes())
            .filter(|&v| {
                let star: Vec<usize> =
                    (0..mesh.num_elements()).filter(|&e| mesh.elements()[e].contains(&v)).collect();
                star.iter().all(|e| p.contains(*e))
            })
            .collect();
        assert_eq!(dofs.interior_nodes, oracle);
        if m == 0 {
            assert!(dofs.interior_nodes.is_empty());
        }
        assert!(dofs.robin_edges.is_empty());
    }
}

#[test]
fn boundary_patch_keeps_robin_dofs() {
    let mesh = StructuredTriMesh::new(3).unwrap();
    let p = patch(&mesh, 0, 2).unwrap();
    let dofs = patch_dof_sets(&mesh, &p.mask(mesh.num_elements()));
    assert!(dofs.interior_nodes.contains(&0));
    assert!(!dofs.robin_edges.is_empty());
    for &i in &dofs.robin_edges {
        let [a, b] = mesh.boundary_edges()[i];
        assert!(dofs.interior_nodes.contains(&a) && dofs.interior_nodes.contains(&b));
    }
    let all = patch_dof_sets(&mesh, &vec![true; mesh.num_elements()]);
    assert_eq!(all.interior_nodes.len(), mesh.num_nodes());
    assert_eq!(all.robin_edges.len(), mesh.boundary_edges().len());
}

#[test]
fn mesh_counts_areas_and_ordering() {
    for level in 1..=6 {
        let mesh = StructuredTriMesh::new(level).unwrap();
        let n = 1usize << level;
        assert_eq!(mesh.num_nodes(), (n + 1) * (n + 1));
        assert_eq!(mesh.num_elements(), 2 * n * n);
        let area = 0.5 / (n * n) as f64;
        let total: f64 = (0..mesh.num_elements()).map(|e| mesh.signed_area(e)).sum();
        assert!((0..mesh.num_elements()).all(|e| (mesh.signed_area(e) - area).abs() < 1e-15));
        assert!((total - 1.0).abs() < 1e-12);
        // lexicographic by (row, column)
        for (i, p) in mesh.nodes().iter().enumerate() {
            assert_eq!(p[0], (i % (n + 1)) as f64 / n as f64);
            assert_eq!(p[1], (i / (n + 1)) as f64 / n as f64);
        }
        let length: f64 = mesh
            .boundary_edges()
            .iter()
            .map(|&[a, b]| {
                let (p, q) = (mesh.nodes()[a], mesh.nodes()[b]);
                ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
            })
            .sum();
        assert!((length - 4.0).abs() < 1e-12);
        assert!((mesh.mesh_size() - 2f64.sqrt() / n as f64).abs() < 1e-15);
    }
    assert_eq!(StructuredTriMesh::new(1).unwrap().num_nodes(), 9);
    assert!(StructuredTriMesh::new(0).is_err());
    assert!(StructuredTriMesh::new(13).is_err());
}

#[test]
fn construction_is_deterministic() {
    let a = MeshPair::new(2, 5).unwrap();
    let b = MeshPair::new(2, 5).unwrap();
    assert_eq!(a.fine.elements(), b.fine.elements());
    assert_eq!(a.embedding.prolongation, b.embedding.prolongation);
}

/// Coarse P1 function evaluated by solving for barycentric coordinates on
/// each coarse element directly.
fn barycentric_eval(coarse: &StructuredTriMesh, v: &[f64], x: [f64; 2]) -> f64 {
    for tri in coarse.elements() {
        let [a, b, c] = tri.map(|i| coarse.nodes()[i]);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let l1 = ((x[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (x[1] - a[1])) / det;
        let l2 = ((b[0] - a[0]) * (x[1] - a[1]) - (x[0] - a[0]) * (b[1] - a[1])) / det;
        let l0 = 1.0 - l1 - l2;
        if l0 >= -1e-14 && l1 >= -1e-14 && l2 >= -1e-14 {
            return l0 * v[tri[0]] + l1 * v[tri[1]] + l2 * v[tri[2]];
        }
    }
    panic!("point outside the mesh");
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn prolongation_matches_barycentric_evaluation(
        v in proptest::collection::vec(-1.0f64..1.0, 25),
    ) {
        let pair = MeshPair::new(2, 4).unwrap();
        let pv = pair.embedding.prolongation.mul_vec(&v);
        for (i, &x) in pair.fine.nodes().iter().enumerate() {
            prop_assert!((pv[i] - barycentric_eval(&pair.coarse, &v, x)).abs() < 1e-14);
        }
    }

    #[test]
    fn patch_is_idempotent_and_brute_force(level in 2u32..=4, seed_frac in 0.0f64..1.0, m in 0usize..4) {
        let mesh = StructuredTriMesh::new(level).unwrap();
        let seed = ((mesh.num_elements() as f64 * seed_frac) as usize).min(mesh.num_elements() - 1);
        let p = patch(&mesh, seed, m).unwrap();
        prop_assert_eq!(&p, &patch(&mesh, seed, m).unwrap());
        let oracle: Vec<usize> = brute_force_patch(&mesh, seed, m).into_iter().collect();
        prop_assert_eq!(p.elements, oracle);
    }
}

#[test]
fn prolongation_reproduces_linears_and_hats() {
    let pair = MeshPair::new(3, 5).unwrap();
    let p = &pair.embedding.prolongation;
    let xs: Vec<f64> = pair.coarse.nodes().iter().map(|q| q[0]).collect();
    let fx = p.mul_vec(&xs);
    for (i, q) in pair.fine.nodes().iter().enumerate() {
        assert!((fx[i] - q[0]).abs() < 1e-15);
    }
    let ones = p.mul_vec(&vec![1.0; pair.coarse.num_nodes()]);
    assert!(ones.iter().all(|&s| (s - 1.0).abs() < 1e-15));
    let z = 4 * 9 + 4;
    let centre = pair.coarse.nodes()[z];
    let f = pair.fine.nodes().iter().position(|&q| q == centre).unwrap();
    assert_eq!(p.get(f, z), 1.0);
}

#[test]
fn prolongations_compose() {
    let (c, m, f) = (2, 3, 5);
    let cm = build_embedding(&StructuredTriMesh::new(c).unwrap(), &StructuredTriMesh::new(m).unwrap()).unwrap();
    let mf = build_embedding(&StructuredTriMesh::new(m).unwrap(), &StructuredTriMesh::new(f).unwrap()).unwrap();
    let cf = build_embedding(&StructuredTriMesh::new(c).unwrap(), &StructuredTriMesh::new(f).unwrap()).unwrap();
    let composed = mf.prolongation.matmul(&cm.prolongation);
    for i in 0..cf.prolongation.nrows() {
        for j in 0..cf.prolongation.ncols() {
            assert!((composed.get(i, j) - cf.prolongation.get(i, j)).abs() < 1e-15);
        }
    }
    assert!(build_embedding(&StructuredTriMesh::new(4).unwrap(), &StructuredTriMesh::new(4).unwrap()).is_err());
}
