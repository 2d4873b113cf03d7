use num_traits::Float;
use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::program::{NavProgram, Step};
use super::simulate::trace;
use super::world::World;
use super::{NavError, NavKind};

pub const FINAL_QUESTION: &str = "What will you find?";

/// Phrasing options. Relative turns are opt-in.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderStyle {
    pub relative_turns: bool,
}

const START: &[&str] = &[
    "You start at the {o}.",
    "You begin next to the {o}.",
    "Your starting spot holds the {o}.",
];
const MOVE: &[&str] = &["Move {d} {k}.", "Go {d} {k}.", "Walk {k} {d}."];
const TURN: &[&str] = &["Turn {t} and move {k}.", "Turn {t}, then walk {k}."];
const ARRIVE: &[&str] = &["You find the {o}.", "There is the {o}.", "You reach the {o}."];
const PASS: &[&str] = &["On the way you pass {list}.", "You walk past {list}."];

fn steps_phrase(count: u32) -> String {
    if count == 1 {
        "1 step".into()
    } else {
        format!("{count} steps")
    }
}

fn listing(labels: &[&str]) -> String {
    let items: Vec<String> = labels.iter().map(|l| format!("the {l}")).collect();
    match items.len() {
        0 => String::new(),
        1 => items[0].clone(),
        2 => format!("{} and {}", items[0], items[1]),
        n => format!("{}, and {}", items[..n - 1].join(", "), items[n - 1]),
    }
}

fn pick<'a, R: Rng + ?Sized>(options: &'a [&'a str], rng: &mut R) -> &'a str {
    options.choose(rng).expect("template sets are non-empty")
}

fn intro<T: Float>(world: &World<T>) -> String {
    let n = world.len();
    match world.kind {
        NavKind::Square => {
            let s = world.grid_side.unwrap_or(0);
            format!(
                "You are in a {s} by {s} grid of rooms with one object in each room. \
                 You can move between neighbouring rooms up, down, left, or right."
            )
        }
        NavKind::Rhombus => {
            let s = world.grid_side.unwrap_or(0);
            format!(
                "You are in a {s} by {s} grid of rooms turned 45 degrees so that it stands on a corner, \
                 with one object in each room. You can move between neighbouring rooms \
                 up-left, up-right, down-left, or down-right."
            )
        }
        NavKind::Circle => {
            format!("You are on a circular path with {n} evenly spaced stops and one object at each stop.")
        }
        NavKind::Hexagon => {
            "You are walking along the edges of a hexagon with one object at each of its 6 corners.".into()
        }
        NavKind::Triangle => format!(
            "You are walking along the edges of a triangle with {n} evenly spaced stops, \
             including its 3 corners, and one object at each stop."
        ),
    }
}

fn step_sentence<R: Rng + ?Sized>(step: &Step, rng: &mut R) -> String {
    match *step {
        Step::Move { direction, count } => pick(MOVE, rng)
            .replace("{d}", direction.phrase())
            .replace("{k}", &steps_phrase(count)),
        Step::TurnAndMove { turn, count } => pick(TURN, rng)
            .replace("{t}", turn.phrase())
            .replace("{k}", &steps_phrase(count)),
    }
}

/// Natural-language form of `program`: an intro, one sentence per step with
/// the objects seen along the way, and a closing question. Only nodes the
/// walk visits before the last step are ever named; the last step's nodes
/// are left for the reader.
pub fn render_program<T: Float, R: Rng + ?Sized>(
    world: &World<T>,
    program: &NavProgram,
    rng: &mut R,
) -> Result<String, NavError> {
    let steps = trace(world, program)?;
    let label = |n: usize| world.label(n).unwrap_or("?");

    let mut parts = vec![intro(world), pick(START, rng).replace("{o}", label(world.start))];
    for (i, (step, entered)) in program.steps.iter().zip(&steps).enumerate() {
        parts.push(step_sentence(step, rng));
        if i + 1 == program.steps.len() {
            break;
        }
        let (last, passed) = entered.split_last().expect("steps enter at least one node");
        if !passed.is_empty() {
            let names: Vec<&str> = passed.iter().map(|n| label(*n)).collect();
            parts.push(pick(PASS, rng).replace("{list}", &listing(&names)));
        }
        parts.push(pick(ARRIVE, rng).replace("{o}", label(*last)));
    }
    parts.push(FINAL_QUESTION.to_string());
    Ok(parts.join(" "))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nav::program::Direction;
    use crate::nav::world::{build_world, WorldParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn circle() -> World<f64> {
        build_world(
            NavKind::Circle,
            &WorldParams::default(),
            &mut ChaCha8Rng::seed_from_u64(5),
        )
        .unwrap()
    }

    #[test]
    fn step_sentence_has_count_and_direction() {
        let w = circle();
        let p = NavProgram::new(vec![Step::Move {
            direction: Direction::Clockwise,
            count: 2,
        }]);
        let text = render_program(&w, &p, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(text.contains("2 steps"));
        assert!(text.contains("clockwise"));
        assert!(text.ends_with(FINAL_QUESTION));
    }

    #[test]
    fn same_seed_same_text() {
        let w = circle();
        let p = NavProgram::new(vec![
            Step::Move {
                direction: Direction::Clockwise,
                count: 3,
            },
            Step::Move {
                direction: Direction::Counterclockwise,
                count: 1,
            },
        ]);
        let a = render_program(&w, &p, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = render_program(&w, &p, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unvisited_labels_never_appear() {
        let w = circle();
        let p = NavProgram::new(vec![
            Step::Move {
                direction: Direction::Clockwise,
                count: 2,
            },
            Step::Move {
                direction: Direction::Clockwise,
                count: 3,
            },
        ]);
        let text = render_program(&w, &p, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        for node in [0usize, 1, 2] {
            assert!(text.contains(&format!("the {}", w.label(node).unwrap())));
        }
        let words: Vec<&str> = text.split(|c: char| !c.is_ascii_alphanumeric() && c != '-').collect();
        for node in [3usize, 4, 5, 6, 7] {
            assert!(!words.contains(&w.label(node).unwrap()), "leaked node {node}: {text}");
        }
    }

    #[test]
    fn listing_forms() {
        assert_eq!(listing(&["a"]), "the a");
        assert_eq!(listing(&["a", "b"]), "the a and the b");
        assert_eq!(listing(&["a", "b", "c"]), "the a, the b, and the c");
    }
}
