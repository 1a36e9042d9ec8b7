#![allow(dead_code)]

use rand::Rng;
use voselect_core::registry::ElementKind;
use voselect_core::selection::{Candidate, CandidateSet};
use voselect_core::social::{Direction, SocialNetworkSchema};
use voselect_core::spec::{Activity, ProcessStructure, SocialProtocol};
use voselect_core::*;

pub struct Instance {
    pub spec: VOSpecification,
    pub snapshot: Snapshot,
    pub sets: Vec<CandidateSet>,
}

pub struct Shape {
    pub max_roles: usize,
    pub max_candidates: usize,
    pub max_requirements: usize,
    /// All roles draw from one pool, so exclusivity matters.
    pub shared_pool: bool,
}

impl Default for Shape {
    fn default() -> Self {
        Shape {
            max_roles: 4,
            max_candidates: 4,
            max_requirements: 6,
            shared_pool: false,
        }
    }
}

pub fn random_instance<R: Rng>(rng: &mut R, shape: &Shape) -> Instance {
    let n = rng.gen_range(2..=shape.max_roles);
    let mut store = Store::new();
    let mut sets = Vec::new();
    let pool_size = rng.gen_range(n.min(shape.max_candidates)..=shape.max_candidates);
    for i in 0..n {
        let m = if shape.shared_pool { pool_size } else { rng.gen_range(1..=shape.max_candidates) };
        let mut candidates = Vec::new();
        for j in 0..m {
            let id = if shape.shared_pool { format!("e{j}") } else { format!("e{i}_{j}") };
            if store.registry().get(&id).is_none() {
                store.register_element(Element::partner(id.clone(), id.clone()), vec![]).unwrap();
            }
            candidates.push(Candidate {
                element_id: id,
                conformance: 1.0,
            });
        }
        sets.push(CandidateSet {
            role: format!("R{i}"),
            kind: ElementKind::Partner,
            candidates,
        });
    }
    let ids: Vec<String> = store.registry().elements().map(|e| e.id.clone()).collect();
    let mut k = 0;
    for a in &ids {
        for b in &ids {
            if a != b && rng.gen_bool(0.3) {
                let t = if rng.gen_bool(0.5) { "t0" } else { "t1" };
                let rel = Relation::new(format!("rel{k}"), t, a.clone(), b.clone())
                    .with_attribute("w", AttributeValue::plain(rng.gen_range(0..=10) as f64));
                store.add_relation(rel).unwrap();
                k += 1;
            }
        }
    }
    let roles: Vec<String> = (0..n).map(|i| format!("R{i}")).collect();
    let mut requirements = Vec::new();
    for r in 0..rng.gen_range(0..=shape.max_requirements) {
        let a = rng.gen_range(0..n);
        let mut b = rng.gen_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        let t = if rng.gen_bool(0.5) { "t0" } else { "t1" };
        let mut req = SocialRequirement::new(format!("q{r}"), roles[a].clone(), roles[b].clone(), t)
            .with_weight(rng.gen_range(1..=4) as f64 * 0.5);
        if rng.gen_bool(0.5) {
            req.direction = Direction::Directed;
        }
        if rng.gen_bool(0.5) {
            req = req.with_condition("w", 10.0, 0.0);
        }
        requirements.push(req);
    }
    let spec = VOSpecification {
        name: "random".into(),
        protocol: SocialProtocol {
            process: ProcessStructure {
                activities: roles
                    .iter()
                    .map(|r| Activity {
                        id: format!("a-{r}"),
                        roles: vec![r.clone()],
                    })
                    .collect(),
                ..ProcessStructure::default()
            },
            schema: SocialNetworkSchema {
                roles: roles.clone(),
                requirements,
            },
        },
        roles: roles.iter().map(|r| Role::partner(r.clone())).collect(),
        exclusivity: shape.shared_pool,
        ..VOSpecification::default()
    };
    Instance {
        spec,
        snapshot: store.snapshot(),
        sets,
    }
}
