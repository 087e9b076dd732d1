//! Statistical properties of projections, sampling and tree reconstruction
//! checked on synthetic data.

use llm_dna::analysis::{mantel_test, DistanceMatrix};
use llm_dna::dna::{
    dna_distance, functional_distance, hoeffding_sample_size, jl_dimension, plan_from_constants, project,
    project_streaming, sample_projection, ProjectionSpec,
};
use llm_dna::phylo::{midpoint_root, neighbor_joining, parse_newick, robinson_foulds, to_newick};
use llm_dna::synth::{make_family_representations, perturb, random_binary_tree, SyntheticFamilySpec};
use llm_dna::util::rng;
use rand::Rng;

fn families(seed: u64, dim: usize) -> SyntheticFamilySpec {
    SyntheticFamilySpec {
        seed,
        n_families: 4,
        per_family: 5,
        dim,
        centroid_scale: 1.0,
        within_noise: 0.1,
        separable: true,
    }
}

#[test]
fn lipschitz_upper_bound_holds_for_perturbations() {
    let plan = plan_from_constants(0.7, 1.3, 32).unwrap();
    let (reps, _) = make_family_representations(&families(1, 2048)).unwrap();
    let spec = ProjectionSpec::gaussian(5, plan.dna_dim, 2048).unwrap();
    let matrix = sample_projection(&spec).unwrap();
    for (i, rep) in reps.iter().take(8).enumerate() {
        let base = project(rep, &matrix, plan.alpha).unwrap();
        for (k, sigma) in [0.001, 0.01, 0.1, 0.5].into_iter().enumerate() {
            let other = perturb(rep, sigma, (i * 10 + k) as u64).unwrap();
            let moved = project(&other, &matrix, plan.alpha).unwrap();
            let d_dna = dna_distance(&base, &moved).unwrap();
            let d_fun = functional_distance(rep, &other).unwrap();
            assert!(d_dna <= plan.c2 * d_fun, "sigma {sigma}: {d_dna} > {} * {d_fun}", plan.c2);
            assert!(d_dna >= plan.c1 * d_fun);
        }
    }
}

#[test]
fn relatives_stay_closer_than_strangers() {
    let (reps, labels) = make_family_representations(&families(2, 1024)).unwrap();
    let spec = ProjectionSpec::gaussian(11, 64, 1024).unwrap();
    let dnas: Vec<_> = reps.iter().map(|r| project_streaming(r, &spec, 1.0).unwrap()).collect();
    let mut max_within = 0.0f64;
    let mut min_across = f64::INFINITY;
    for i in 0..dnas.len() {
        for j in i + 1..dnas.len() {
            let d = dna_distance(&dnas[i], &dnas[j]).unwrap();
            if labels[i] == labels[j] {
                max_within = max_within.max(d);
            } else {
                min_across = min_across.min(d);
            }
        }
    }
    assert!(max_within < min_across, "{max_within} vs {min_across}");
}

#[test]
fn projection_depends_only_on_seed() {
    let (reps, _) = make_family_representations(&families(3, 256)).unwrap();
    let spec = ProjectionSpec::gaussian(42, 16, 256).unwrap();
    let a = project(&reps[0], &sample_projection(&spec).unwrap(), 2.0).unwrap();
    let b = project_streaming(&reps[0], &spec, 2.0).unwrap();
    assert_eq!(a.vector, b.vector);
    let other = ProjectionSpec::gaussian(43, 16, 256).unwrap();
    assert_ne!(project_streaming(&reps[0], &other, 2.0).unwrap().vector, a.vector);
}

#[test]
fn hoeffding_sample_size_controls_deviation() {
    let plan = hoeffding_sample_size(0.05, 0.05, 1.0).unwrap();
    let mut r = rng(17);
    let trials = 1000;
    let mut hits = 0;
    for _ in 0..trials {
        // bounded draws in [0, 1] with mean 0.3
        let mean = (0..plan.t).map(|_| if r.random_bool(0.3) { 1.0 } else { 0.0 }).sum::<f64>() / plan.t as f64;
        if (mean - 0.3).abs() >= 0.05 {
            hits += 1;
        }
    }
    let sigma = (0.05f64 * 0.95 / trials as f64).sqrt();
    assert!((hits as f64 / trials as f64) <= 0.05 + 3.0 * sigma, "{hits} deviations");
}

#[test]
fn jl_dimension_reference_values() {
    assert_eq!(jl_dimension(0.3, 305).unwrap(), 636);
    assert_eq!(jl_dimension(0.3, 64).unwrap(), 463);
    assert_eq!(jl_dimension(0.5, 100).unwrap(), 222);
}

fn paths(t: &llm_dna::phylo::PhyloTree) -> DistanceMatrix {
    let (labels, values) = t.path_lengths();
    DistanceMatrix::new(labels, values).unwrap()
}

#[test]
fn neighbor_joining_recovers_random_trees() {
    let mut r = rng(5);
    for seed in 0..40 {
        let n = r.random_range(8..=16);
        let truth = random_binary_tree(n, 0.1, 1.0, seed).unwrap();
        let d = paths(&truth);
        let got = neighbor_joining(&d).unwrap();
        assert_eq!(robinson_foulds(&truth, &got).unwrap(), 0, "seed {seed}");
        let (_, v) = got.path_lengths();
        let (_, expected) = truth.path_lengths();
        for (a, b) in v.iter().zip(&expected) {
            assert!((a - b).abs() <= 1e-9);
        }
    }
}

#[test]
fn midpoint_rooting_preserves_paths_and_newick_round_trips() {
    for seed in 0..20 {
        let t = random_binary_tree(16, 0.1, 1.0, 100 + seed).unwrap();
        let rooted = midpoint_root(&t).unwrap();
        let (_, before) = t.path_lengths();
        let (_, after) = rooted.path_lengths();
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).abs() <= 1e-9);
        }
        for tree in [&t, &rooted] {
            let text = to_newick(tree);
            let back = parse_newick(&text).unwrap();
            assert_eq!(back.is_rooted(), tree.is_rooted());
            assert_eq!(to_newick(&back), text);
            assert_eq!(robinson_foulds(tree, &back).unwrap(), 0);
            let (_, p1) = tree.path_lengths();
            let (_, p2) = back.path_lengths();
            for (a, b) in p1.iter().zip(&p2) {
                assert!((a - b).abs() <= 1e-5 * a.abs().max(1.0));
            }
        }
    }
}

#[test]
fn mantel_null_is_calibrated() {
    let mut r = rng(21);
    let labels: Vec<String> = (0..12).map(|i| format!("m{i:02}")).collect();
    let random = |r: &mut rand_chacha::ChaCha20Rng| {
        DistanceMatrix::from_fn(labels.clone(), |_, _| Ok(r.random_range(0.0..1.0))).unwrap()
    };
    let mut significant = 0;
    for trial in 0..40 {
        let (a, b) = (random(&mut r), random(&mut r));
        if mantel_test(&a, &b, 199, trial).unwrap().p_value < 0.05 {
            significant += 1;
        }
    }
    assert!(significant <= 6, "{significant} of 40 significant under the null");
}
