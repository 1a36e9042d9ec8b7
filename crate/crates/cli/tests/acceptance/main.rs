//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

mod instances;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use voselect_core::attribute::Comparison;
use voselect_core::indicators::DataQuery;
use voselect_core::registry::{ElementKind, RegistryDocument};
use voselect_core::selection::ranking::dominates;
use voselect_core::selection::{
    crossover, enumerate_all, mutate, rank, repair, run_ga, Candidate, CandidateSet, Genome, SearchSpace,
};
use voselect_core::social::GraphDocument;
use voselect_core::spec::{
    fitness_of, performance_fitness_of, Activity, Metric, Optimize, PerformanceComponent, PerformanceScope,
    ProcessStructure, RankingMethod,
};
use voselect_core::*;

type Outcome = Result<String, String>;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn load(name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(fixtures().join(name)).unwrap()).unwrap()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Every genome of the candidate product, valid or not.
fn product(sets: &[CandidateSet]) -> Vec<Genome> {
    let mut out = vec![Genome(Vec::new())];
    for s in sets {
        out = out
            .into_iter()
            .flat_map(|g| {
                s.candidates.iter().map(move |c| {
                    let mut next = g.0.clone();
                    next.push(c.element_id.clone());
                    Genome(next)
                })
            })
            .collect();
    }
    out
}

fn distinct(g: &Genome) -> bool {
    g.0.iter().collect::<BTreeSet<_>>().len() == g.0.len()
}

fn c1_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    let mut worst = 10;
    for i in 0..20 {
        let inst = instances::generate(&mut rng, 4, 4, 6, i % 2 == 1);
        let f = fitness_of(&inst.spec, &inst.snapshot).map_err(|e| e.to_string())?;
        let space = SearchSpace::new(&inst.sets, inst.spec.exclusivity);
        let best = enumerate_all(&f, &space, 1_000_000).map_err(|e| e.to_string())?.variants[0].fitness;
        let mut hits = 0;
        for seed in 0..10 {
            let config = GaConfig {
                population_size: 50,
                generations: 100,
                seed,
                ..GaConfig::default()
            };
            let out = run_ga(&f, &space, &config).map_err(|e| e.to_string())?;
            if out.variants.first().map(|v| v.fitness) == Some(best) {
                hits += 1;
            }
        }
        worst = worst.min(hits);
        ensure(hits >= 9, || format!("instance {i}: optimum reached in {hits}/10 seeds"))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("20 instances, worst {worst}/10 seeds, {:.1}s", elapsed.as_secs_f64()))
}

fn fixture_workspace() -> Workspace {
    let mut ws = Workspace::in_memory();
    let registry: RegistryDocument = serde_json::from_value(load("registry.json")).unwrap();
    let graph: GraphDocument = serde_json::from_value(load("graph.json")).unwrap();
    ws.import_registry(registry).unwrap();
    ws.import_graph(graph).unwrap();
    ws
}

fn c2_determinism() -> Outcome {
    let mut checked = 0;
    for (seed, method) in [(7, "weighted_sum"), (11, "pareto"), (3, "lexicographic")] {
        let mut spec = load("spec.json");
        spec["ranking"] = json!({ "method": method });
        let spec: VOSpecification = serde_json::from_value(spec).unwrap();
        let config = RunConfig {
            ga: GaConfig::with_seed(seed),
            ..RunConfig::default()
        };
        let bytes: Vec<String> = (0..2)
            .map(|_| {
                let mut ws = fixture_workspace();
                let run = ws.start_run(spec.clone(), config.clone(), RunState::PerformanceRanked).unwrap();
                serde_json::to_string(&run.variants).unwrap()
            })
            .collect();
        ensure(bytes[0] == bytes[1], || format!("seed {seed}, {method}: variant JSON differs"))?;
        checked += 1;
    }
    Ok(format!("{checked} configurations byte-identical"))
}

fn pools(rng: &mut ChaCha8Rng, n: usize, shared: bool) -> Vec<CandidateSet> {
    let shared_pool = rng.gen_range(n..=n + 3);
    (0..n)
        .map(|i| {
            let m = if shared { shared_pool } else { rng.gen_range(1..=4) };
            CandidateSet {
                role: format!("r{i}"),
                kind: ElementKind::Partner,
                candidates: (0..m)
                    .map(|j| Candidate {
                        element_id: if shared { format!("e{j}") } else { format!("e{i}.{j}") },
                        conformance: 1.0,
                    })
                    .collect(),
            }
        })
        .collect()
}

fn random_genome(rng: &mut ChaCha8Rng, sets: &[CandidateSet]) -> Genome {
    sets.iter()
        .map(|s| s.candidates[rng.gen_range(0..s.candidates.len())].element_id.clone())
        .collect()
}

fn c3_operators() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC3);
    for t in 0..1000 {
        let n = rng.gen_range(2..8);
        let sets = pools(&mut rng, n, false);
        let (a, b) = (random_genome(&mut rng, &sets), random_genome(&mut rng, &sets));
        let cut_a = rng.gen_range(0..n);
        let cut_b = rng.gen_range(cut_a + 1..=n);
        let (x, y) = crossover(&a, &b, cut_a, cut_b).map_err(|e| e.to_string())?;
        for i in 0..n {
            ensure(x.0[i] == a.0[i] || x.0[i] == b.0[i], || format!("crossover trial {t}: gene {i} of child 1"))?;
            ensure(y.0[i] == a.0[i] || y.0[i] == b.0[i], || format!("crossover trial {t}: gene {i} of child 2"))?;
        }
    }
    for t in 0..1000 {
        let n = rng.gen_range(1..8);
        let sets = pools(&mut rng, n, false);
        let space = SearchSpace::new(&sets, false);
        let g = random_genome(&mut rng, &sets);
        let m = mutate(&g, &space, &mut rng);
        let changed: Vec<usize> = (0..n).filter(|&i| m.0[i] != g.0[i]).collect();
        ensure(changed.len() <= 1, || format!("mutation trial {t}: distance {}", changed.len()))?;
        if let Some(&i) = changed.first() {
            ensure(sets[i].candidates.iter().any(|c| c.element_id == m.0[i]), || {
                format!("mutation trial {t}: gene outside pool")
            })?;
        } else {
            ensure(sets.iter().any(|s| s.candidates.len() == 1), || {
                format!("mutation trial {t}: no change although every pool has alternatives")
            })?;
        }
    }
    let mut repaired = 0;
    for t in 0..1000 {
        let n = rng.gen_range(2..6);
        let sets = pools(&mut rng, n, true);
        let space = SearchSpace::new(&sets, true);
        let g = random_genome(&mut rng, &sets);
        if let Some(r) = repair(g, &space) {
            ensure(distinct(&r), || format!("repair trial {t}: duplicate partner in {r}"))?;
            ensure(space.is_valid(&r), || format!("repair trial {t}: invalid genome"))?;
            repaired += 1;
        }
        let m = mutate(&space.first_feasible().unwrap(), &space, &mut rng);
        ensure(distinct(&m), || format!("exclusive mutation trial {t}: duplicate partner in {m}"))?;
    }
    Ok(format!("3x1000 trials, {repaired} repairs, zero violations"))
}

fn c4_threshold() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC4);
    let mut emitted = 0;
    for trial in 0..100 {
        let mut inst = instances::generate(&mut rng, 4, 4, 6, trial % 2 == 0);
        let t: f64 = rng.gen_range(0.0..1.0);
        inst.spec.thresholds.phase3_threshold = t;

        // phase 3 through the pipeline
        let config = RunConfig {
            ga: GaConfig {
                population_size: 20,
                generations: 20,
                seed: trial,
                ..GaConfig::default()
            },
            ..RunConfig::default()
        };
        let mut run = Run::new(inst.spec.clone(), &inst.snapshot, config).map_err(|e| e.to_string())?;
        run.advance(&inst.snapshot).map_err(|e| e.to_string())?;
        run.advance(&inst.snapshot).map_err(|e| e.to_string())?;
        for v in run.variants.iter().flatten() {
            ensure(v.fitness >= t, || format!("trial {trial}: phase 3 emitted {} < {t}", v.fitness))?;
            emitted += 1;
        }

        // exhaustive enumeration versus a filter over the whole product
        let f = fitness_of(&inst.spec, &inst.snapshot).map_err(|e| e.to_string())?;
        let space = SearchSpace::new(&inst.sets, inst.spec.exclusivity);
        let got: BTreeSet<Genome> = enumerate_all(&f, &space, 1_000_000)
            .map_err(|e| e.to_string())?
            .variants
            .into_iter()
            .map(|v| v.assignment)
            .collect();
        let expect: BTreeSet<Genome> = product(&inst.sets)
            .into_iter()
            .filter(|g| !inst.spec.exclusivity || distinct(g))
            .filter(|g| f.evaluate(&g.0).unwrap().value >= t)
            .collect();
        ensure(got == expect, || {
            format!("trial {trial}: enumerate_all kept {} genomes, expected {}", got.len(), expect.len())
        })?;
    }
    Ok(format!("100 trials, {emitted} phase-3 variants checked"))
}

fn c5_conformance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC5);
    for t in 0..1000 {
        let k = rng.gen_range(1..=3);
        let mut role = Role::partner("r");
        let mut anchors = Vec::new();
        for a in 0..k {
            let optimal: f64 = rng.gen_range(-100.0..100.0);
            let reject = optimal + rng.gen_range(1.0..50.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            role = role.with_requirement(
                RoleRequirement::numeric(&format!("attributes.a{a}"), optimal, reject, Some("u"))
                    .with_weight(rng.gen_range(0.5..3.0)),
            );
            anchors.push((optimal, reject));
        }
        let values: Vec<f64> = (0..k).map(|_| rng.gen_range(-200.0..200.0)).collect();
        let pick = rng.gen_range(0..k);
        let (optimal, reject) = anchors[pick];
        let step = rng.gen_range(0.0..60.0) * (optimal - reject).signum();
        let score = |vals: &[f64]| -> f64 {
            let mut reg = Registry::new();
            let mut e = Element::partner("x", "x");
            for (a, v) in vals.iter().enumerate() {
                e = e.with_attribute(format!("a{a}"), AttributeValue::number(*v, "u"));
            }
            reg.register_element(e, vec![]).unwrap();
            reg.evaluate_conformance("x", &role).unwrap()
        };
        let before = score(&values);
        let mut improved = values.clone();
        improved[pick] += step;
        let after = score(&improved);
        ensure(after >= before, || format!("trial {t}: {before} -> {after} after moving toward optimal"))?;

        let single = Role::partner("s").with_requirement(RoleRequirement::numeric("attributes.a0", optimal, reject, Some("u")));
        for (v, expect) in [(optimal, 1.0), (reject, 0.0)] {
            let mut reg = Registry::new();
            reg.register_element(Element::partner("y", "y").with_attribute("a0", AttributeValue::number(v, "u")), vec![])
                .unwrap();
            let got = reg.evaluate_conformance("y", &single).unwrap();
            ensure(got == expect, || format!("trial {t}: anchor {v} scored {got}, expected {expect}"))?;
        }
    }
    Ok("1000 pairs monotone, anchors exact".into())
}

fn all_paths_longest(w: &[f64], edges: &[(usize, usize)]) -> f64 {
    fn walk(v: usize, w: &[f64], edges: &[(usize, usize)], acc: f64, best: &mut f64) {
        let acc = acc + w[v];
        if acc > *best {
            *best = acc;
        }
        for &(a, b) in edges {
            if a == v {
                walk(b, w, edges, acc, best);
            }
        }
    }
    let mut best = 0.0;
    for v in 0..w.len() {
        walk(v, w, edges, 0.0, &mut best);
    }
    best
}

fn c6_performance_dag() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC6);
    for t in 0..100 {
        let n = rng.gen_range(1..=10);
        let mut store = Store::new();
        store.register_element(Element::partner("host", "Host"), vec![]).unwrap();
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            let w = rng.gen_range(0..50) as f64;
            weights.push(w);
            let d = ServiceDescription::new(format!("svc{i}"))
                .with_non_functional("response_time", AttributeValue::number(w, "h"));
            store
                .register_element(Element::service(format!("svc{i}"), "svc", "host"), vec![Description::Service(d)])
                .unwrap();
        }
        // random topological labelling so edges are not always low-to-high ids
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let mut edges = Vec::new();
        for x in 0..n {
            for y in x + 1..n {
                if rng.gen_bool(0.3) {
                    edges.push((order[x], order[y]));
                }
            }
        }
        let mut spec = VOSpecification {
            roles: (0..n).map(|i| Role::service(format!("R{i}"))).collect(),
            ..VOSpecification::default()
        };
        spec.protocol.process = ProcessStructure {
            activities: (0..n)
                .map(|i| Activity {
                    id: format!("a{i}"),
                    roles: vec![format!("R{i}")],
                })
                .collect(),
            precedence: edges.iter().map(|(a, b)| (format!("a{a}"), format!("a{b}"))).collect(),
            ..ProcessStructure::default()
        };
        spec.performance_fitness.components = vec![PerformanceComponent {
            name: "duration".into(),
            metric: Metric::ProcessDuration,
            scope: PerformanceScope::Process,
            direction: Optimize::Minimize,
            weight: 1.0,
            priority: 0,
        }];
        let snap = store.snapshot();
        let perf = performance_fitness_of(&spec, &snap).map_err(|e| e.to_string())?;
        let genome: Vec<String> = (0..n).map(|i| format!("svc{i}")).collect();
        let got = perf.evaluate(&genome).map_err(|e| e.to_string())?.values[0];
        let expect = all_paths_longest(&weights, &edges);
        ensure(got == Some(expect), || format!("dag {t}: got {got:?}, brute force {expect}"))?;
    }
    Ok("100 DAGs exact".into())
}

fn c7_ranking() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC7);
    for t in 0..100 {
        let k = rng.gen_range(1..=4);
        let n = rng.gen_range(1..=20);
        let vectors: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..k).map(|_| rng.gen_range(0..20) as f64 * 0.5).collect())
            .collect();
        let opts: Vec<Vec<Option<f64>>> = vectors.iter().map(|v| v.iter().map(|x| Some(*x)).collect()).collect();
        let criteria: Vec<Criterion> = (0..k)
            .map(|_| {
                let w = rng.gen_range(0.1..5.0);
                if rng.gen_bool(0.5) {
                    Criterion::minimize(w)
                } else {
                    Criterion::maximize(w)
                }
            })
            .collect();
        let factor: f64 = rng.gen_range(0.001..1000.0);
        let scaled: Vec<Criterion> = criteria.iter().map(|c| Criterion { weight: c.weight * factor, ..*c }).collect();
        let order = |cs: &[Criterion]| -> Vec<usize> {
            rank(&opts, cs, RankingMethod::WeightedSum, |a, b| a.cmp(&b))
                .unwrap()
                .into_iter()
                .map(|r| r.index)
                .collect()
        };
        ensure(order(&criteria) == order(&scaled), || format!("trial {t}: argsort changed under scale {factor}"))?;

        let pareto = rank(&opts, &criteria, RankingMethod::Pareto, |a, b| a.cmp(&b)).map_err(|e| e.to_string())?;
        let first: BTreeSet<usize> = pareto.iter().filter(|r| r.front == Some(1)).map(|r| r.index).collect();
        let undominated: BTreeSet<usize> = (0..n)
            .filter(|&i| !(0..n).any(|j| dominates(&vectors[j], &vectors[i], &criteria)))
            .collect();
        ensure(first == undominated, || format!("trial {t}: front 1 {first:?} vs brute force {undominated:?}"))?;
    }
    Ok("100 trials scale-invariant, fronts exact".into())
}

fn c8_monitoring() -> Outcome {
    let mut store = Store::new();
    let load = Indicator::new(
        "load",
        IndicatorExpr::sum(DataQuery::elements(Some(ElementKind::Partner), vec![]).project("attributes.load")),
    )
    .with_alarm(Comparison::Gt, 10.0)
    .subscribe("planner")
    .subscribe("broker");
    store.define_indicator(load).map_err(|e| e.to_string())?;
    let el = |id: &str, v: f64| Element::partner(id, id).with_attribute("load", AttributeValue::plain(v));
    // expected notifications after each step
    let script: Vec<(Box<dyn Fn(&mut Store)>, usize)> = vec![
        (Box::new(move |s: &mut Store| drop(s.register_element(el("p1", 4.0), vec![]).unwrap())), 0),
        (Box::new(move |s: &mut Store| drop(s.register_element(el("p2", 3.0), vec![]).unwrap())), 0),
        (Box::new(move |s: &mut Store| drop(s.update_element(el("p1", 9.0), vec![]).unwrap())), 2),
        (Box::new(move |s: &mut Store| drop(s.register_element(el("p3", 1.0), vec![]).unwrap())), 0),
        (Box::new(move |s: &mut Store| drop(s.update_element(el("p2", 5.0), vec![]).unwrap())), 0),
        (Box::new(|s: &mut Store| drop(s.add_relation(Relation::new("k", "knows", "p1", "p2")).unwrap())), 0),
        (Box::new(move |s: &mut Store| drop(s.update_element(el("p1", 0.0), vec![]).unwrap())), 0),
        (Box::new(move |s: &mut Store| drop(s.update_element(el("p1", 20.0), vec![]).unwrap())), 2),
    ];
    for (step, (act, expect)) in script.iter().enumerate() {
        let before = store.monitor().feed().len();
        act(&mut store);
        let fresh = &store.monitor().feed()[before..];
        ensure(fresh.len() == *expect, || format!("step {step}: {} notifications, expected {expect}", fresh.len()))?;
        let subs: BTreeSet<&str> = fresh.iter().map(|n| n.subscriber.as_str()).collect();
        ensure(subs.len() == fresh.len(), || format!("step {step}: duplicate subscriber notification"))?;
        for _ in 0..3 {
            store.evaluate_indicator("load").map_err(|e| e.to_string())?;
        }
        ensure(store.monitor().feed().len() == before + expect, || format!("step {step}: re-evaluation notified"))?;
        let incremental = store.monitor().state("load").unwrap().value.clone();
        let full = store.snapshot().evaluate_indicator("load").map_err(|e| e.to_string())?;
        ensure(incremental == full, || format!("step {step}: incremental {incremental:?} vs full {full:?}"))?;
    }
    Ok(format!("{} scripted events, 2 crossings, 4 notifications", script.len()))
}

fn c9_matrix() -> Outcome {
    let base = load("spec.json");
    let baseline: VOSpecification = serde_json::from_value(base.clone()).unwrap();
    ensure(validate_spec(&baseline).is_empty(), || "fixture spec is not valid".into())?;
    let perf = |scope: Value, aspect: Option<&str>| {
        let mut r = json!({"id": "extra", "metric": "total_cost", "scope": scope, "optimal": 100.0, "reject": 900.0});
        if let Some(a) = aspect {
            r["aspect"] = json!(a);
        }
        r
    };
    type Edit = Box<dyn Fn(&mut Value)>;
    let corpus: Vec<(&str, Edit)> = vec![
        ("role on partner subset", Box::new(|s| s["roles"][0]["aspect"] = json!("partner_subset"))),
        ("role on service subset", Box::new(|s| s["roles"][2]["aspect"] = json!("service_subset"))),
        ("role on process", Box::new(|s| s["roles"][1]["aspect"] = json!("process"))),
        ("social on partner", Box::new(|s| s["protocol"]["schema"]["requirements"][0]["aspect"] = json!("partner"))),
        ("social on service", Box::new(|s| s["protocol"]["schema"]["requirements"][1]["aspect"] = json!("service"))),
        ("social on process", Box::new(|s| s["protocol"]["schema"]["requirements"][2]["aspect"] = json!("process"))),
        (
            "social between one partner role",
            Box::new(|s| s["protocol"]["schema"]["requirements"][0]["between"] = json!(["builder", "builder"])),
        ),
        (
            "performance on partner",
            Box::new(move |s| s["performance_requirements"].as_array_mut().unwrap().push(perf(json!({"role": "builder"}), None))),
        ),
        (
            "performance on service",
            Box::new(move |s| s["performance_requirements"].as_array_mut().unwrap().push(perf(json!({"role": "logistics"}), None))),
        ),
        (
            "performance on partner subset",
            Box::new(move |s| s["performance_requirements"].as_array_mut().unwrap().push(perf(json!("process"), Some("partner_subset")))),
        ),
    ];
    let mut rejected = 0;
    for (name, edit) in &corpus {
        let mut doc = base.clone();
        edit(&mut doc);
        let spec: VOSpecification = serde_json::from_value(doc).map_err(|e| format!("{name}: {e}"))?;
        let kinds: Vec<ViolationKind> = validate_spec(&spec).into_iter().map(|v| v.category).collect();
        ensure(kinds == vec![ViolationKind::AspectPhaseMismatch], || format!("{name}: got {kinds:?}"))?;
        rejected += 1;
    }
    Ok(format!("{rejected}/{} malformed specs rejected as aspect_phase_mismatch", corpus.len()))
}

struct Cli<'a> {
    dir: &'a Path,
}

impl Cli<'_> {
    fn run(&self, args: &[&str]) -> Result<Value, String> {
        let out = Command::new(env!("CARGO_BIN_EXE_voselect"))
            .arg("--data-dir")
            .arg(self.dir)
            .arg("--json")
            .args(args)
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!(
                "`voselect {}` exited {:?}: {}",
                args.join(" "),
                out.status.code(),
                String::from_utf8_lossy(&out.stderr)
            ));
        }
        serde_json::from_slice(&out.stdout).map_err(|e| format!("`voselect {}`: {e}", args.join(" ")))
    }

    fn load_fixture(&self) -> Result<(), String> {
        let f = fixtures();
        self.run(&["registry", "import", f.join("registry.json").to_str().unwrap()])?;
        self.run(&["graph", "import", f.join("graph.json").to_str().unwrap()])?;
        Ok(())
    }
}

fn c10_end_to_end() -> Outcome {
    let spec = fixtures().join("spec.json");
    let spec = spec.to_str().unwrap();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cli = Cli { dir: dir.path() };
    cli.load_fixture()?;
    let valid = cli.run(&["spec", "validate", spec])?;
    ensure(valid["valid"] == true, || format!("fixture invalid: {valid}"))?;

    let run = cli.run(&["run", "start", "--spec", spec, "--seed", "7", "--until", "specified"])?;
    let id = run["run_id"].as_str().ok_or("no run id")?.to_string();
    let mut states = vec![run["state"].as_str().unwrap_or("").to_string()];
    for _ in 0..3 {
        let r = cli.run(&["run", "advance", &id])?;
        states.push(r["state"].as_str().unwrap_or("").to_string());
    }
    let variants = cli.run(&["run", "variants", &id])?;
    let chosen = variants[0]["assignment"].clone();
    let vo = cli.run(&["run", "incept", &id])?["vo_id"].as_str().ok_or("no vo id")?.to_string();
    states.push(cli.run(&["run", "show", &id])?["state"].as_str().unwrap_or("").to_string());
    ensure(
        states == ["specified", "candidates_selected", "variants_generated", "performance_ranked", "incepted"],
        || format!("state sequence {states:?}"),
    )?;

    // union of the members' competence names, from the exported registry
    let registry = cli.run(&["registry", "export"])?;
    let doc: RegistryDocument = serde_json::from_value(registry).map_err(|e| e.to_string())?;
    let mut members: BTreeSet<String> = BTreeSet::new();
    for id in chosen.as_array().unwrap().iter().filter_map(Value::as_str) {
        let e = doc.elements.iter().find(|e| e.id == id).ok_or("member missing")?;
        members.insert(e.provider_id.clone().unwrap_or_else(|| e.id.clone()));
    }
    let expected: BTreeSet<String> = doc
        .competences
        .iter()
        .filter(|c| members.contains(&c.owner_id))
        .map(|c| c.competence_name.clone())
        .collect();
    let got: BTreeSet<String> = doc
        .competences
        .iter()
        .filter(|c| c.owner_id == vo)
        .map(|c| c.competence_name.clone())
        .collect();
    ensure(got == expected && !got.is_empty(), || format!("VO competences {got:?}, expected {expected:?}"))?;
    for name in &expected {
        let cond = format!("competence_name = {name}");
        let found = cli.run(&["registry", "search", "--where", &cond])?;
        ensure(found.as_array().unwrap().iter().any(|e| e["id"] == vo.as_str()), || {
            format!("{vo} not found by `{cond}`")
        })?;
    }

    let oracle_dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let oracle = Cli { dir: oracle_dir.path() };
    oracle.load_fixture()?;
    let o = oracle.run(&["run", "start", "--spec", spec, "--seed", "7", "--oracle"])?;
    let again = oracle.run(&["run", "start", "--spec", spec, "--seed", "7", "--oracle"])?;
    ensure(o == again, || "oracle rerun output differs".into())?;
    let oracle_choice = o["variants"][0]["assignment"].clone();
    ensure(oracle_choice == chosen, || format!("GA chose {chosen}, oracle chose {oracle_choice}"))?;
    Ok(format!("incepted {vo} with competences {got:?}; oracle agrees on {chosen}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("oracle equivalence", c1_oracle_equivalence),
        ("determinism", c2_determinism),
        ("operators", c3_operators),
        ("threshold contract", c4_threshold),
        ("conformance calculus", c5_conformance),
        ("performance DAG", c6_performance_dag),
        ("ranking", c7_ranking),
        ("monitoring", c8_monitoring),
        ("aspect/phase matrix", c9_matrix),
        ("end to end", c10_end_to_end),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}
