//! Random selection instances for the acceptance checks.

use rand::seq::SliceRandom;
use rand::Rng;
use voselect_core::registry::ElementKind;
use voselect_core::selection::{Candidate, CandidateSet};
use voselect_core::social::{Direction, SocialNetworkSchema};
use voselect_core::spec::{Activity, ProcessStructure, SocialProtocol};
use voselect_core::{AttributeValue, Element, Relation, Role, Snapshot, SocialRequirement, Store, VOSpecification};

pub struct Instance {
    pub spec: VOSpecification,
    pub snapshot: Snapshot,
    pub sets: Vec<CandidateSet>,
}

const TYPES: [&str; 3] = ["cooperated", "trusts", "audited"];

/// Up to `max_roles` partner roles with up to `max_candidates` candidates
/// each and up to `max_requirements` social requirements. With `shared`,
/// every role draws from the same pool and exclusivity is on.
pub fn generate<R: Rng>(rng: &mut R, max_roles: usize, max_candidates: usize, max_requirements: usize, shared: bool) -> Instance {
    let roles = rng.gen_range(2..=max_roles);
    let mut store = Store::new();
    let pool: Vec<String> = (0..rng.gen_range(roles.min(max_candidates)..=max_candidates))
        .map(|j| format!("org{j}"))
        .collect();
    let mut sets = Vec::with_capacity(roles);
    for r in 0..roles {
        let ids: Vec<String> = if shared {
            pool.clone()
        } else {
            (0..rng.gen_range(1..=max_candidates)).map(|j| format!("org{r}-{j}")).collect()
        };
        for id in &ids {
            if !store.registry().contains(id) {
                store.register_element(Element::partner(id.clone(), id.to_uppercase()), vec![]).unwrap();
            }
        }
        sets.push(CandidateSet {
            role: format!("role{r}"),
            kind: ElementKind::Partner,
            candidates: ids
                .into_iter()
                .map(|element_id| Candidate {
                    element_id,
                    conformance: 1.0,
                })
                .collect(),
        });
    }

    let all: Vec<String> = store.registry().elements().map(|e| e.id.clone()).collect();
    let edges = rng.gen_range(0..=all.len() * 2);
    for k in 0..edges {
        let a = all.choose(rng).unwrap();
        let b = all.choose(rng).unwrap();
        if a == b {
            continue;
        }
        let t = TYPES.choose(rng).unwrap();
        let rel = Relation::new(format!("x{k}"), *t, a.clone(), b.clone())
            .with_attribute("strength", AttributeValue::plain(rng.gen_range(0..=8) as f64));
        store.add_relation(rel).unwrap();
    }

    let names: Vec<String> = (0..roles).map(|r| format!("role{r}")).collect();
    let mut requirements = Vec::new();
    for q in 0..rng.gen_range(0..=max_requirements) {
        let pair: Vec<&String> = names.choose_multiple(rng, 2).collect();
        let mut req = SocialRequirement::new(format!("s{q}"), pair[0].clone(), pair[1].clone(), *TYPES.choose(rng).unwrap())
            .with_weight(rng.gen_range(1..=3) as f64);
        if rng.gen_bool(0.4) {
            req.direction = Direction::Directed;
        }
        if rng.gen_bool(0.5) {
            req = req.with_condition("strength", 8.0, 1.0);
        }
        requirements.push(req);
    }

    let spec = VOSpecification {
        name: "generated".into(),
        roles: names.iter().map(|n| Role::partner(n.clone())).collect(),
        protocol: SocialProtocol {
            process: ProcessStructure {
                activities: names
                    .iter()
                    .map(|n| Activity {
                        id: format!("do-{n}"),
                        roles: vec![n.clone()],
                    })
                    .collect(),
                ..ProcessStructure::default()
            },
            schema: SocialNetworkSchema {
                roles: names.clone(),
                requirements,
            },
        },
        exclusivity: shared,
        ..VOSpecification::default()
    };
    Instance {
        spec,
        snapshot: store.snapshot(),
        sets,
    }
}
