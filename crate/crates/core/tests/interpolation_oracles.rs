use lodhelm::interpolation::kernel_constraint_rows;
use lodhelm::mesh::{patch, patch_dof_sets};
use lodhelm::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mie_fine(level: u32) -> FineProblem {
    FineProblem::new(build_coefficient(&GeometrySpec::new(GeometryKind::MieSquare, 3)).unwrap(), level, 9.0).unwrap()
}

/// Value of the coarse hat of node `z` at `x`, from the vertex coordinates of
/// the coarse elements around `z`.
fn hat(coarse: &StructuredTriMesh, z: usize, x: [f64; 2]) -> f64 {
    for tri in coarse.elements().iter().filter(|t| t.contains(&z)) {
        let [a, b, c] = tri.map(|i| coarse.nodes()[i]);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let l1 = ((x[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (x[1] - a[1])) / det;
        let l2 = ((b[0] - a[0]) * (x[1] - a[1]) - (x[0] - a[0]) * (b[1] - a[1])) / det;
        let l = [1.0 - l1 - l2, l1, l2];
        if l.iter().all(|&v| v >= -1e-14) {
            return l[tri.iter().position(|&v| v == z).unwrap()];
        }
    }
    0.0
}

fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().partial_cmp(&a[j][k].abs()).unwrap()).unwrap();
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x
}

fn gauss_rank(mut a: Vec<Vec<f64>>, tol: f64) -> usize {
    let (nr, nc) = (a.len(), a.first().map_or(0, |r| r.len()));
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut rank = 0;
    for c in 0..nc {
        if rank == nr {
            break;
        }
        let p = (rank..nr).max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap()).unwrap();
        if a[p][c].abs() <= tol * scale {
            continue;
        }
        a.swap(rank, p);
        for i in rank + 1..nr {
            let f = a[i][c] / a[rank][c];
            for j in c..nc {
                a[i][j] -= f * a[rank][j];
            }
        }
        rank += 1;
    }
    rank
}

#[test]
fn weighted_interpolant_matches_dense_gram_oracle() {
    let fine = mie_fine(5);
    let coarse = CoarseSpace::new(&fine, 3, InterpolantKind::Weighted).unwrap();
    let fm = &fine.mesh;
    let cm = &coarse.mesh;
    // nodal indicator of the closed inclusion set
    let v: Vec<f64> = fm.nodes().iter().map(|&p| {
        let touching = (0..fm.num_elements()).any(|e| fine.element_a[e] < 1.0 && fm.element_vertices(e).contains(&p));
        if touching { 1.0 } else { 0.0 }
    }).collect();
    let iv = coarse.interp.matrix.mul_vec(&v);
    for z in 0..cm.num_nodes() {
        let star: Vec<usize> = (0..cm.num_elements()).filter(|&t| cm.elements()[t].contains(&z)).collect();
        let mut basis: Vec<usize> = star.iter().flat_map(|&t| cm.elements()[t]).collect();
        basis.sort_unstable();
        basis.dedup();
        let nb = basis.len();
        let mut gram = vec![vec![0.0; nb]; nb];
        let mut rhs = vec![0.0; nb];
        // fine elements inside the star: barycentre inside one of its coarse elements
        for e in 0..fm.num_elements() {
            let b = fm.barycenter(e);
            if !star.iter().any(|&t| hat(cm, cm.elements()[t][0], b) > 0.0 && {
                let tri = cm.elements()[t];
                tri.iter().map(|&y| hat(cm, y, b)).sum::<f64>() > 1.0 - 1e-12
                    && tri.iter().all(|&y| hat(cm, y, b) > 0.0)
            }) {
                continue;
            }
            let verts = fm.element_vertices(e);
            let tri = fm.elements()[e];
            let area = fm.signed_area(e);
            // edge midpoint rule, exact for quadratics
            for (i, j) in [(0, 1), (1, 2), (2, 0)] {
                let mid = [0.5 * (verts[i][0] + verts[j][0]), 0.5 * (verts[i][1] + verts[j][1])];
                let vm = 0.5 * (v[tri[i]] + v[tri[j]]);
                let w = fine.element_a[e] * area / 3.0;
                let h: Vec<f64> = basis.iter().map(|&y| hat(cm, y, mid)).collect();
                for a in 0..nb {
                    rhs[a] += w * vm * h[a];
                    for b2 in 0..nb {
                        gram[a][b2] += w * h[a] * h[b2];
                    }
                }
            }
        }
        let c = gauss_solve(gram, rhs);
        let want = c[basis.iter().position(|&y| y == z).unwrap()];
        assert!((iv[z] - want).abs() < 1e-11, "node {z}: {} vs {want}", iv[z]);
    }
}

#[test]
fn projection_constants_and_locality() {
    for (lc, lf) in [(3, 5), (4, 6)] {
        let fine = mie_fine(lf);
        for kind in [InterpolantKind::Weighted, InterpolantKind::Unweighted] {
            let coarse = CoarseSpace::new(&fine, lc, kind).unwrap();
            let ones = coarse.interp.matrix.mul_vec(&vec![1.0; fine.mesh.num_nodes()]);
            assert!(ones.iter().all(|v| (v - 1.0).abs() < 1e-12));
            let h = coarse.mesh.grid_spacing();
            for z in 0..coarse.num_nodes() {
                let pz = coarse.mesh.nodes()[z];
                let (cols, _) = coarse.interp.matrix.row(z);
                for &x in cols {
                    let px = fine.mesh.nodes()[x];
                    assert!((px[0] - pz[0]).abs() <= h + 1e-15 && (px[1] - pz[1]).abs() <= h + 1e-15);
                }
            }
        }
    }
}

#[test]
fn constant_coefficient_kinds_coincide() {
    let one = FineProblem::new(build_coefficient(&GeometrySpec::new(GeometryKind::ConstantOne, 2)).unwrap(), 5, 9.0).unwrap();
    let w = CoarseSpace::new(&one, 3, InterpolantKind::Weighted).unwrap();
    let u = CoarseSpace::new(&one, 3, InterpolantKind::Unweighted).unwrap();
    assert_eq!(w.interp.matrix, u.interp.matrix);
    let fine = mie_fine(5);
    let w = CoarseSpace::new(&fine, 3, InterpolantKind::Weighted).unwrap();
    let u = CoarseSpace::new(&fine, 3, InterpolantKind::Unweighted).unwrap();
    assert_ne!(w.interp.matrix, u.interp.matrix);
}

#[test]
fn constraint_rows_rank_and_edge_cases() {
    let fine = mie_fine(6);
    let coarse = CoarseSpace::new(&fine, 4, InterpolantKind::Weighted).unwrap();
    let n = coarse.mesh.cells_per_side();
    let seed = 2 * ((n / 2) * n + n / 2);
    let p = patch(&coarse.mesh, seed, 2).unwrap();
    let dofs = patch_dof_sets(&fine.mesh, &coarse.embedding.fine_mask(&p)).interior_nodes;
    let c = kernel_constraint_rows(&coarse.interp, &dofs);
    assert!(c.matrix.nrows() > 0);
    assert_eq!(gauss_rank(c.matrix.to_dense(), 1e-10), c.matrix.nrows());

    let all: Vec<usize> = (0..fine.mesh.num_nodes()).collect();
    let full = kernel_constraint_rows(&coarse.interp, &all);
    assert_eq!(full.matrix, coarse.interp.matrix);

    let tiny = patch(&coarse.mesh, seed, 0).unwrap();
    let tiny_dofs = patch_dof_sets(&fine.mesh, &coarse.embedding.fine_mask(&tiny)).interior_nodes;
    assert!(!tiny_dofs.is_empty());
    let empty = kernel_constraint_rows(&coarse.interp, &[]);
    assert_eq!(empty.matrix.nrows(), 0);
}

#[test]
fn kernel_functions_satisfy_approximation_bound() {
    // |w|_{0,A} / (H |w|_{1,A}) for w in ker I, across coarse levels
    let fine = mie_fine(7);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = Vec::new();
    let mid = CoarseSpace::new(&fine, 6, InterpolantKind::Weighted).unwrap();
    for lc in 3..=6 {
        let coarse = CoarseSpace::new(&fine, lc, InterpolantKind::Weighted).unwrap();
        let p = coarse.prolongation();
        let h = coarse.mesh.mesh_size();
        let mut max_ratio: f64 = 0.0;
        for _ in 0..50 {
            // smooth-ish random field: prolongated coarse noise plus fine noise
            let xs: Vec<f64> = (0..mid.num_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut w = mid.prolongation().mul_vec(&xs);
            for v in w.iter_mut() {
                *v += 0.1 * rng.gen_range(-1.0..1.0);
            }
            let iw = coarse.interp.matrix.mul_vec(&w);
            let piw = p.mul_vec(&iw);
            let k: Vec<C64> = w.iter().zip(&piw).map(|(a, b)| C64::new(a - b, 0.0)).collect();
            let l2a = norm(&fine.ops, &k, NormKind::L2A).unwrap();
            let semi = norm(&fine.ops, &k, NormKind::SemiA).unwrap();
            max_ratio = max_ratio.max(l2a / (h * semi));
        }
        worst.push(max_ratio);
    }
    println!("approximation ratios {worst:?}");
    assert!(worst.iter().all(|&r| r < 1.0), "{worst:?}");
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn interpolation_inverts_prolongation(x in proptest::collection::vec(-1.0f64..1.0, 81), weighted in any::<bool>()) {
        let fine = mie_fine(5);
        let kind = if weighted { InterpolantKind::Weighted } else { InterpolantKind::Unweighted };
        let coarse = CoarseSpace::new(&fine, 3, kind).unwrap();
        let back = coarse.interp.matrix.mul_vec(&coarse.prolongation().mul_vec(&x));
        for (a, b) in back.iter().zip(&x) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }
}
