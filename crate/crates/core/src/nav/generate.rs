use std::collections::BTreeSet;

use num_traits::Float;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::program::{Direction, NavProgram, Step, Turn};
use super::render::{render_program, RenderStyle};
use super::simulate::trace;
use super::world::{build_world, World, WorldParams};
use super::{NavError, NavInstance, NavKind};

pub const MAX_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub world: WorldParams,
    pub style: RenderStyle,
}

/// Seed for instance `index` of a batch, mixed with splitmix64 so nearby
/// indices and kinds give unrelated streams.
pub fn instance_seed(master: u64, kind: NavKind, index: usize) -> u64 {
    let kind_tag = NavKind::ALL.iter().position(|k| *k == kind).unwrap_or(0) as u64;
    let mut z = master
        .wrapping_add((kind_tag + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((index as u64).wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn max_count<T: Float>(world: &World<T>) -> u32 {
    match world.grid_side {
        Some(side) => (side - 1) as u32,
        None => world.len() as u32,
    }
}

fn turns_for(kind: NavKind) -> &'static [Turn] {
    if kind.is_grid() {
        &[Turn::Left, Turn::Right, Turn::Around]
    } else {
        &[Turn::Around]
    }
}

fn candidate_steps<T: Float>(world: &World<T>, style: RenderStyle) -> Vec<Step> {
    let mut out = Vec::new();
    for count in 1..=max_count(world) {
        for &direction in Direction::legal_for(world.kind) {
            out.push(Step::Move { direction, count });
        }
        if style.relative_turns {
            for &turn in turns_for(world.kind) {
                out.push(Step::TurnAndMove { turn, count });
            }
        }
    }
    out
}

fn random_step<T: Float, R: Rng + ?Sized>(world: &World<T>, style: RenderStyle, rng: &mut R) -> Step {
    let count = rng.random_range(1..=max_count(world));
    if style.relative_turns && rng.random_bool(0.5) {
        let turn = *turns_for(world.kind).choose(rng).expect("non-empty");
        Step::TurnAndMove { turn, count }
    } else {
        let direction = *Direction::legal_for(world.kind).choose(rng).expect("non-empty");
        Step::Move { direction, count }
    }
}

/// Samples a world and a legal `num_steps` program whose final node was
/// already visited (so the text names its object), then renders it.
///
/// Moves that would leave a grid are rejected and redrawn. Gives up with
/// [`NavError::GenerationFailed`] after [`MAX_ATTEMPTS`] rejections.
pub fn generate_instance<T: Float, R: Rng + ?Sized>(
    id: impl Into<String>,
    kind: NavKind,
    num_steps: usize,
    config: &GenConfig,
    rng: &mut R,
) -> Result<NavInstance<T>, NavError> {
    if num_steps == 0 {
        return Err(NavError::InvalidParams("num_steps must be at least 1".into()));
    }
    let world: World<T> = build_world(kind, &config.world, rng)?;
    let candidates = candidate_steps(&world, config.style);
    let mut rejections = 0usize;
    let mut reject = || {
        rejections += 1;
        if rejections >= MAX_ATTEMPTS {
            Err(NavError::GenerationFailed {
                kind,
                attempts: rejections,
            })
        } else {
            Ok(())
        }
    };

    'attempt: loop {
        let mut program = NavProgram::default();
        while program.steps.len() + 1 < num_steps {
            let step = random_step(&world, config.style, rng);
            program.steps.push(step);
            if trace(&world, &program).is_err() {
                program.steps.pop();
                reject()?;
            }
        }

        let prefix = trace(&world, &program)?;
        let visited: BTreeSet<usize> = std::iter::once(world.start)
            .chain(prefix.iter().flatten().copied())
            .collect();
        let finals: Vec<(Step, usize)> = candidates
            .iter()
            .filter_map(|step| {
                program.steps.push(*step);
                let end = trace(&world, &program)
                    .ok()
                    .and_then(|t| t.last().and_then(|s| s.last().copied()));
                program.steps.pop();
                end.filter(|n| visited.contains(n)).map(|n| (*step, n))
            })
            .collect();
        let Some(&(last, end)) = finals.choose(rng) else {
            reject()?;
            continue 'attempt;
        };
        program.steps.push(last);

        let text = render_program(&world, &program, rng)?;
        let target = world.label(end).expect("every node is labelled").to_string();
        return Ok(NavInstance {
            id: id.into(),
            kind,
            text,
            target,
            program: Some(program),
            world: Some(world),
        });
    }
}

/// `n` instances with ids `<kind>-<index>`, each from its own seeded stream.
pub fn generate_batch<T: Float>(
    kind: NavKind,
    n: usize,
    num_steps: usize,
    master_seed: u64,
    config: &GenConfig,
) -> Result<Vec<NavInstance<T>>, NavError> {
    (0..n)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(instance_seed(master_seed, kind, i));
            generate_instance(format!("{kind}-{i:04}"), kind, num_steps, config, &mut rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nav::simulate::simulate;

    #[test]
    fn same_seed_same_bytes() {
        let gen = || {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let inst: NavInstance<f64> =
                generate_instance("c", NavKind::Circle, 3, &GenConfig::default(), &mut rng).unwrap();
            serde_json::to_string(&inst).unwrap()
        };
        assert_eq!(gen(), gen());
    }

    #[test]
    fn batch_ids_unique_and_verified() {
        for kind in NavKind::ALL {
            let batch: Vec<NavInstance<f64>> = generate_batch(kind, 100, 4, 7, &GenConfig::default()).unwrap();
            let ids: BTreeSet<_> = batch.iter().map(|i| i.id.clone()).collect();
            assert_eq!(ids.len(), 100);
            for inst in &batch {
                let world = inst.world.as_ref().unwrap();
                let end = simulate(world, inst.program.as_ref().unwrap()).unwrap();
                assert_eq!(world.label(end).unwrap(), inst.target);
                assert_eq!(inst.program.as_ref().unwrap().steps.len(), 4);
            }
        }
    }

    #[test]
    fn relative_style_generates() {
        let config = GenConfig {
            style: RenderStyle { relative_turns: true },
            ..Default::default()
        };
        let batch: Vec<NavInstance<f64>> = generate_batch(NavKind::Square, 50, 5, 3, &config).unwrap();
        assert!(batch.iter().any(|i| !i.program.as_ref().unwrap().is_absolute()));
    }

    #[test]
    fn single_step_grid_is_unanswerable() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let got = generate_instance::<f64, _>("x", NavKind::Square, 1, &GenConfig::default(), &mut rng);
        assert!(matches!(got, Err(NavError::GenerationFailed { .. })));
        let ok = generate_instance::<f64, _>("y", NavKind::Hexagon, 1, &GenConfig::default(), &mut rng);
        assert!(ok.is_ok());
    }

    #[test]
    fn seeds_spread() {
        let seeds: BTreeSet<u64> = NavKind::ALL
            .iter()
            .flat_map(|k| (0..100).map(move |i| instance_seed(0, *k, i)))
            .collect();
        assert_eq!(seeds.len(), 500);
    }
}
