//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! Every expected value below is computed independently of the code under
//! test (closed-form arithmetic, exact path lengths of a generated tree,
//! binomial bounds), never read back from the implementation.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use llm_dna::analysis::{
    evaluate_greedy, evaluate_random, mantel_test, stratified_split, DistanceMatrix, RelationClassifier, SvmParams,
};
use llm_dna::dna::{hoeffding_sample_size, jl_dimension};
use llm_dna::extraction::{DnaStore, RECORDS_FILE};
use llm_dna::phylo::{midpoint_root, neighbor_joining, robinson_foulds, PhyloTree};
use llm_dna::routing::{
    random_router_accuracy, routing_accuracy, single_best_baseline, train_router, RouterHyperparams,
};
use llm_dna::synth::{
    distortion_experiment, random_binary_tree, relation_fixture, routing_cluster_fixture, spawn_mock_endpoint,
    MockScript, ModelScript, SyntheticFamilySpec,
};
use llm_dna::util::{derive_seed, rng};
use rand::Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn within_budget(start: Instant, budget: Duration) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took < budget, || format!("took {took:.1?}, budget {budget:?}"))
}

fn jl_distortion() -> Check {
    let start = Instant::now();
    let exp = distortion_experiment(64, 4096, 0.3, 20, 2024).map_err(err)?;
    ensure(exp.dna_dim == 463, || format!("L = {}", exp.dna_dim))?;
    ensure(exp.successes >= 18, || format!("{}/20 seeds without violations", exp.successes))?;
    within_budget(start, Duration::from_secs(60))?;
    Ok(format!(
        "{}/20 seeds clean, worst |ratio - 1| = {:.4}, {:.1?}",
        exp.successes,
        exp.worst_deviation,
        start.elapsed()
    ))
}

fn hoeffding_coverage() -> Check {
    let start = Instant::now();
    let plan = hoeffding_sample_size(0.05, 0.05, 1.0).map_err(err)?;
    ensure(plan.t == 738, || format!("t = {}", plan.t))?;
    let trials = 1000;
    let mut r = rng(99);
    let mut deviations = 0usize;
    for _ in 0..trials {
        // uniform draws on [0, 1]: bounded by c = 1, true mean 0.5
        let mean = (0..plan.t).map(|_| r.random::<f64>()).sum::<f64>() / plan.t as f64;
        if (mean - 0.5).abs() >= 0.05 {
            deviations += 1;
        }
    }
    let sigma = (0.05f64 * 0.95 / trials as f64).sqrt();
    let limit = 0.05 + 3.0 * sigma;
    let rate = deviations as f64 / trials as f64;
    ensure(rate <= limit, || format!("deviation rate {rate} > {limit:.4}"))?;
    within_budget(start, Duration::from_secs(10))?;
    Ok(format!("t = 738, {deviations}/1000 deviations (limit {limit:.4}), {:.1?}", start.elapsed()))
}

fn paths(t: &PhyloTree) -> DistanceMatrix {
    let (labels, values) = t.path_lengths();
    DistanceMatrix::new(labels, values).expect("path lengths form a distance matrix")
}

fn max_path_error(a: &PhyloTree, b: &PhyloTree) -> Result<f64, String> {
    let (la, va) = a.path_lengths();
    let (lb, vb) = b.path_lengths();
    ensure(la == lb, || "leaf labels differ".into())?;
    Ok(va.iter().zip(&vb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

/// The 200 trees shared by the tree criteria.
fn random_trees() -> Vec<PhyloTree> {
    let mut r = rng(derive_seed(7, "acceptance-trees"));
    (0..200u64)
        .map(|i| {
            let n = r.random_range(8..=16);
            random_binary_tree(n, 0.1, 1.0, 1000 + i).expect("valid tree parameters")
        })
        .collect()
}

fn nj_correctness() -> Check {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (i, truth) in random_trees().iter().enumerate() {
        let got = neighbor_joining(&paths(truth)).map_err(err)?;
        let rf = robinson_foulds(truth, &got).map_err(err)?;
        ensure(rf == 0, || format!("tree {i}: RF distance {rf}"))?;
        let e = max_path_error(truth, &got)?;
        ensure(e <= 1e-9, || format!("tree {i}: path error {e:e}"))?;
        worst = worst.max(e);
    }
    within_budget(start, Duration::from_secs(30))?;
    Ok(format!("200/200 RF = 0, max path error {worst:.1e}, {:.1?}", start.elapsed()))
}

fn midpoint_rooting() -> Check {
    let mut worst = 0.0f64;
    for (i, t) in random_trees().iter().enumerate() {
        let rooted = midpoint_root(t).map_err(err)?;
        ensure(rooted.is_rooted(), || format!("tree {i} not rooted"))?;
        let e = max_path_error(t, &rooted)?;
        ensure(e <= 1e-9, || format!("tree {i}: path error {e:e}"))?;
        worst = worst.max(e);
    }
    // two leaves joined by a branch of 3.7: the root sits 1.85 from each
    let labels = vec![Some("A".to_string()), Some("B".to_string())];
    let pair = PhyloTree::new(labels, vec![llm_dna::phylo::Edge { a: 0, b: 1, raw_length: 3.7 }], None)
        .map_err(err)?;
    let rooted = midpoint_root(&pair).map_err(err)?;
    let root = rooted.root().ok_or("two-leaf tree not rooted")?;
    let d = rooted.distances_from(root);
    let leaves = rooted.leaves();
    ensure(leaves.len() == 2, || format!("{} leaves", leaves.len()))?;
    for &leaf in &leaves {
        ensure(d[leaf] == 1.85, || format!("leaf at {} from root", d[leaf]))?;
    }
    Ok(format!("200/200 paths preserved (max error {worst:.1e}), two-leaf root at 1.85/1.85"))
}

fn euclidean_matrix(points: &[Vec<f64>]) -> DistanceMatrix {
    let labels = (0..points.len()).map(|i| format!("x{i:02}")).collect();
    DistanceMatrix::from_fn(labels, |i, j| {
        Ok(points[i].iter().zip(&points[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
    })
    .expect("finite distances")
}

fn random_points(r: &mut impl Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| r.random_range(-1.0..1.0)).collect()).collect()
}

fn mantel_calibration() -> Check {
    let mut r = rng(derive_seed(11, "acceptance-mantel"));
    let m = euclidean_matrix(&random_points(&mut r, 30, 5));
    let perms = 999;
    let own = mantel_test(&m, &m, perms, 3).map_err(err)?;
    ensure(own.r == 1.0, || format!("self r = {}", own.r))?;
    ensure(own.p_value == 1.0 / 1000.0, || format!("self p = {}", own.p_value))?;
    let mut calm = 0;
    for trial in 0..100u64 {
        let a = euclidean_matrix(&random_points(&mut r, 30, 5));
        let b = euclidean_matrix(&random_points(&mut r, 30, 5));
        if mantel_test(&a, &b, perms, trial).map_err(err)?.p_value >= 0.05 {
            calm += 1;
        }
    }
    ensure(calm >= 90, || format!("only {calm}/100 null trials with p >= 0.05"))?;
    Ok(format!("self r = 1, p = 1/1000; null p >= 0.05 in {calm}/100"))
}

fn relation_detection() -> Check {
    let (mut svm, mut random, mut greedy) = (0.0, 0.0, 0.0);
    let seeds = [1u64, 2, 3, 4, 5];
    for &seed in &seeds {
        let spec = SyntheticFamilySpec {
            seed,
            n_families: 10,
            per_family: 8,
            dim: 256,
            centroid_scale: 1.0,
            within_noise: 0.1,
            separable: true,
        };
        let fx = relation_fixture(&spec, 128).map_err(err)?;
        let (train, test) = stratified_split(&fx.pairs, 0.2, seed).map_err(err)?;
        let params = SvmParams {
            seed,
            ..SvmParams::default()
        };
        let clf = RelationClassifier::train(&fx.store, &train, &params).map_err(err)?;
        let auc = |m: llm_dna::analysis::BinaryMetrics| m.auc.ok_or("test split has one class");
        svm += auc(clf.evaluate(&fx.store, &test).map_err(err)?)?;
        random += auc(evaluate_random(&test, seed).map_err(err)?)?;
        greedy += auc(evaluate_greedy(&test).map_err(err)?)?;
    }
    let n = seeds.len() as f64;
    let (svm, random, greedy) = (svm / n, random / n, greedy / n);
    let summary = format!("mean AUC svm {svm:.4}, random {random:.4}, greedy {greedy:.4}");
    ensure(svm >= 0.95, || summary.clone())?;
    ensure(svm > random && svm > greedy, || summary.clone())?;
    Ok(summary)
}

fn router() -> Check {
    let (store, examples) = routing_cluster_fixture(5, 100, 16, 32, 41).map_err(err)?;
    // clusters are interleaved, so a prefix split keeps them balanced
    let (train, test) = examples.split_at(400);
    let trained = train_router(&store, train, &RouterHyperparams::default()).map_err(err)?;
    let acc = routing_accuracy(&trained.router, test).map_err(err)?;
    let best = single_best_baseline(train, test).map_err(err)?;
    let models: Vec<String> = store.model_ids().map(String::from).collect();
    let random = random_router_accuracy(test, &models, 41).map_err(err)?;
    let summary = format!(
        "held-out {acc:.3}, single-best {:.3}, random {random:.3}",
        best.test_accuracy
    );
    ensure(acc >= 0.90 && acc > best.test_accuracy && acc > random, || summary.clone())?;

    let router = &trained.router;
    let batch = &train[..32];
    let g = router.loss_and_gradient(batch).map_err(err)?;
    let h = 1e-6;
    let loss_at = |r: &llm_dna::routing::RouterModel| r.loss(batch).expect("loss on valid batch");
    let mut worst = 0.0f64;
    for k in (0..router.w.len()).step_by(7) {
        let (mut plus, mut minus) = (router.clone(), router.clone());
        plus.w[k] += h;
        minus.w[k] -= h;
        let fd = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
        let rel = (fd - g.w[k]).abs() / fd.abs().max(g.w[k].abs()).max(1e-3);
        worst = worst.max(rel);
    }
    for (m, gb) in &g.biases {
        let (mut plus, mut minus) = (router.clone(), router.clone());
        *plus.biases.get_mut(m).expect("model bias") += h;
        *minus.biases.get_mut(m).expect("model bias") -= h;
        let fd = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
        worst = worst.max((fd - gb).abs() / fd.abs().max(gb.abs()).max(1e-3));
    }
    ensure(worst <= 1e-5, || format!("gradient relative error {worst:e}"))?;
    Ok(format!("{summary}; gradient relative error {worst:.1e}"))
}

fn dna(args: &[&str], cwd: &Path, envs: &[(&str, &str)]) -> Result<Vec<u8>, String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dna"));
    cmd.args(args).current_dir(cwd).env_remove("DNA_CONFIG").env_remove("DNA_FORMAT");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    let out = cmd.output().map_err(err)?;
    ensure(out.status.success(), || {
        format!("dna {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr))
    })?;
    Ok(out.stdout)
}

fn roster(base_url: &str, models: &[&str]) -> String {
    let mut s = format!("[embedder]\nmodel_id = \"embed\"\nbase_url = \"{base_url}\"\n");
    for m in models {
        s.push_str(&format!("\n[[models]]\nmodel_id = \"{m}\"\nbase_url = \"{base_url}\"\ntemperature = 0.0\n"));
    }
    s
}

fn read(path: &Path) -> Result<Vec<u8>, String> {
    std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn pipeline_determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(err)?;
    let root = tmp.path();
    let prompts: Vec<String> = (0..6).map(|i| format!("what is {i} squared?")).collect();
    let mut script = MockScript::default();
    for m in ["alpha", "beta", "gamma"] {
        let responses = prompts.iter().map(|p| (p.clone(), format!("{m}: {}", p.len() * m.len()))).collect();
        script.models.insert(m.to_string(), ModelScript { responses, fail_status: None });
    }
    let server = spawn_mock_endpoint(script, 0).map_err(err)?;
    let url = server.base_url();

    let data: String = prompts
        .iter()
        .enumerate()
        .map(|(i, p)| format!("{{\"id\": {i}, \"text\": \"{p}\"}}\n"))
        .collect();
    std::fs::write(root.join("data.jsonl"), data).map_err(err)?;
    std::fs::write(root.join("two.toml"), roster(&url, &["alpha", "beta"])).map_err(err)?;
    std::fs::write(root.join("three.toml"), roster(&url, &["alpha", "beta", "gamma"])).map_err(err)?;
    dna(
        &["--seed", "5", "sample-prompts", "--source", "qa=data.jsonl", "--per-dataset", "6", "--out", "prompts.jsonl"],
        root,
        &[],
    )?;

    let cache = root.join("cache");
    let cache = cache.to_str().ok_or("non-UTF-8 temp path")?;
    let prompts_path = root.join("prompts.jsonl");
    let prompts_path = prompts_path.to_str().ok_or("non-UTF-8 temp path")?;
    let extract = |cwd: &Path, roster: &str| -> Result<Vec<u8>, String> {
        std::fs::create_dir_all(cwd).map_err(err)?;
        let roster = root.join(roster);
        dna(
            &[
                "--seed", "9", "--cache-dir", cache, "extract", "--roster", roster.to_str().unwrap_or_default(),
                "--prompts", prompts_path, "--dim", "16", "--out", "store",
            ],
            cwd,
            &[("SOURCE_DATE_EPOCH", "1700000000")],
        )
    };

    let (w1, w2, w3) = (root.join("w1"), root.join("w2"), root.join("w3"));
    let out1 = extract(&w1, "two.toml")?;
    let cold_requests = server.request_count();
    let out2 = extract(&w2, "two.toml")?;
    let out3 = extract(&w3, "two.toml")?;
    let warm_requests = server.request_count() - cold_requests;
    ensure(warm_requests == 0, || format!("{warm_requests} requests with a warm cache"))?;
    ensure(out1 == out2 && out2 == out3, || "stdout differs between runs".into())?;
    for file in ["manifest.json", RECORDS_FILE] {
        let a = read(&w1.join("store").join(file))?;
        ensure(a == read(&w2.join("store").join(file))?, || format!("{file} differs"))?;
        ensure(a == read(&w3.join("store").join(file))?, || format!("{file} differs"))?;
    }

    let before_bytes = read(&w1.join("store").join(RECORDS_FILE))?;
    let before = DnaStore::load(w1.join("store")).map_err(err)?;
    extract(&w1, "three.toml")?;
    let after_bytes = read(&w1.join("store").join(RECORDS_FILE))?;
    let after = DnaStore::load(w1.join("store")).map_err(err)?;
    ensure(after_bytes.starts_with(&before_bytes), || "existing records were rewritten".into())?;
    ensure(after.len() == 3, || format!("{} records after append", after.len()))?;
    for rec in before.records() {
        let new = after.get(&rec.model_id).ok_or("record lost")?;
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        ensure(bits(&rec.vector) == bits(&new.vector), || format!("{} changed", rec.model_id))?;
    }
    Ok(format!(
        "{cold_requests} cold requests, 0 warm; 3 runs byte-identical; append kept {} records bit-exact",
        before.len()
    ))
}

fn planner_cli() -> Check {
    let out = dna(&["--format", "json", "plan", "--c1", "0.7", "--c2", "1.3", "--k", "305"], Path::new("."), &[])?;
    let doc: serde_json::Value = serde_json::from_slice(&out).map_err(err)?;
    let res = &doc["result"];
    // epsilon = 0.6 / 2.0, alpha = 2.0 / 2, L = ceil(4 ln 305 / (0.045 - 0.009))
    let expected_l = (4.0 * 305f64.ln() / (0.3f64.powi(2) / 2.0 - 0.3f64.powi(3) / 3.0)).ceil() as u64;
    ensure(expected_l == 636, || format!("hand evaluation gives {expected_l}"))?;
    ensure(res["epsilon"].as_f64() == Some(0.3), || format!("epsilon {}", res["epsilon"]))?;
    ensure(res["alpha"].as_f64() == Some(1.0), || format!("alpha {}", res["alpha"]))?;
    ensure(res["dna_dim"].as_u64() == Some(expected_l), || format!("L {}", res["dna_dim"]))?;
    ensure(jl_dimension(0.3, 305).map_err(err)? == 636, || "library disagrees".into())?;
    Ok("epsilon = 0.3, alpha = 1.0, L = 636".into())
}

fn main() {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("JL distortion", jl_distortion),
        ("Hoeffding coverage", hoeffding_coverage),
        ("NJ correctness", nj_correctness),
        ("midpoint rooting", midpoint_rooting),
        ("Mantel calibration", mantel_calibration),
        ("relation detection", relation_detection),
        ("router", router),
        ("pipeline determinism", pipeline_determinism),
        ("planner CLI", planner_cli),
    ];
    let mut results = BTreeMap::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(format!("panic: {msg}"))
        });
        match &outcome {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => println!("FAIL {} {name}: {why}", i + 1),
        }
        results.insert(i + 1, outcome.is_ok());
    }
    let failed = results.values().filter(|ok| !**ok).count();
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
