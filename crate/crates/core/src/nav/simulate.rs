use num_traits::Float;

use super::geometry::{lit, Point};
use super::program::{Direction, NavProgram, Step, Turn};
use super::world::World;
use super::{NavError, NavKind};

/// Nodes entered by one step, in order; the last one is where it ends.
pub type StepTrace = Vec<usize>;

fn initial_heading<T: Float>(world: &World<T>) -> Direction {
    if !world.kind.is_grid() {
        return Direction::Clockwise;
    }
    let h = world.start_heading;
    *Direction::legal_for(world.kind)
        .iter()
        .max_by(|a, b| {
            let score = |d: &Direction| {
                let (x, y) = d.unit().expect("grid token");
                h.dot(Point::from_f64(x, y))
            };
            score(a).partial_cmp(&score(b)).expect("finite heading")
        })
        .expect("grid kinds have tokens")
}

fn grid_next<T: Float>(world: &World<T>, node: usize, dir: Direction) -> Option<usize> {
    let (x, y) = dir.unit()?;
    let want = Point::from_f64(x, y);
    let threshold: T = lit(0.99);
    world
        .neighbors(node)
        .find(|e| e.direction.dot(want) > threshold)
        .map(|e| e.to)
}

fn cycle_next<T: Float>(world: &World<T>, node: usize, dir: Direction, center: Point<T>) -> Option<usize> {
    let radial = world.nodes[node].pos - center;
    world
        .neighbors(node)
        .find(|e| {
            let turn = radial.cross(e.direction);
            match dir {
                Direction::Clockwise => turn < T::zero(),
                Direction::Counterclockwise => turn > T::zero(),
                _ => false,
            }
        })
        .map(|e| e.to)
}

/// Walks `program` over `world` edge by edge and records every node entered.
///
/// Grid moves follow the edge whose direction vector matches the token;
/// cycle moves pick the neighbour on the requested rotational side of the
/// centroid. Facing starts at the world's start heading (clockwise on
/// cycles) and becomes the direction of the last move.
pub fn trace<T: Float>(world: &World<T>, program: &NavProgram) -> Result<Vec<StepTrace>, NavError> {
    let kind = world.kind;
    let center = world.centroid();
    let mut node = world.start;
    let mut heading = initial_heading(world);
    let mut out = Vec::with_capacity(program.steps.len());

    for (index, step) in program.steps.iter().enumerate() {
        let illegal = |reason: String| NavError::IllegalStep { step: index, reason };
        if step.count() == 0 {
            return Err(illegal("count must be at least 1".into()));
        }
        let dir = match *step {
            Step::Move { direction, .. } => {
                if !direction.is_legal_for(kind) {
                    return Err(illegal(format!("`{}` is not a {kind} direction", direction.phrase())));
                }
                direction
            }
            Step::TurnAndMove { turn, .. } => match turn {
                Turn::Around => heading.reversed(),
                Turn::Left => heading
                    .turned_left()
                    .ok_or_else(|| illegal(format!("cannot turn left on a {kind}")))?,
                Turn::Right => heading
                    .turned_right()
                    .ok_or_else(|| illegal(format!("cannot turn right on a {kind}")))?,
            },
        };
        heading = dir;

        let mut entered = Vec::with_capacity(step.count() as usize);
        for _ in 0..step.count() {
            let next = if kind.is_grid() {
                grid_next(world, node, dir)
            } else {
                cycle_next(world, node, dir, center)
            };
            node = next.ok_or(NavError::OffWorld { step: index })?;
            entered.push(node);
        }
        out.push(entered);
    }
    Ok(out)
}

/// Final node of `program`.
pub fn simulate<T: Float>(world: &World<T>, program: &NavProgram) -> Result<usize, NavError> {
    Ok(trace(world, program)?
        .last()
        .and_then(|s| s.last().copied())
        .unwrap_or(world.start))
}

fn lattice_delta(kind: NavKind, dir: Direction) -> Option<(i64, i64)> {
    use Direction::*;
    match (kind, dir) {
        (NavKind::Square, Up) | (NavKind::Rhombus, UpLeft) => Some((0, 1)),
        (NavKind::Square, Down) | (NavKind::Rhombus, DownRight) => Some((0, -1)),
        (NavKind::Square, Right) | (NavKind::Rhombus, UpRight) => Some((1, 0)),
        (NavKind::Square, Left) | (NavKind::Rhombus, DownLeft) => Some((-1, 0)),
        _ => None,
    }
}

/// Grid-only cross-check for [`simulate`]: sums per-step (col, row)
/// displacements and indexes the grid directly, without touching positions
/// or edges.
pub fn displacement_oracle<T: Float>(world: &World<T>, program: &NavProgram) -> Result<usize, NavError> {
    let side = match (world.kind.is_grid(), world.grid_side) {
        (true, Some(side)) => side as i64,
        _ => return Err(NavError::UnsupportedKind(world.kind)),
    };
    let (mut col, mut row) = ((world.start as i64) % side, (world.start as i64) / side);
    for (index, step) in program.steps.iter().enumerate() {
        let Step::Move { direction, count } = *step else {
            return Err(NavError::IllegalStep {
                step: index,
                reason: "relative turns are not supported by the displacement oracle".into(),
            });
        };
        let (dc, dr) = lattice_delta(world.kind, direction).ok_or_else(|| NavError::IllegalStep {
            step: index,
            reason: format!("`{}` is not a {} direction", direction.phrase(), world.kind),
        })?;
        col += dc * i64::from(count);
        row += dr * i64::from(count);
        if !(0..side).contains(&col) || !(0..side).contains(&row) {
            return Err(NavError::OffWorld { step: index });
        }
    }
    Ok((row * side + col) as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nav::world::{build_world, WorldParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn world(kind: NavKind, side: usize) -> World<f64> {
        let params = if kind.is_grid() {
            WorldParams {
                grid_side: side,
                cycle_len: None,
            }
        } else {
            WorldParams::default()
        };
        build_world(kind, &params, &mut ChaCha8Rng::seed_from_u64(3)).unwrap()
    }

    fn mv(direction: Direction, count: u32) -> Step {
        Step::Move { direction, count }
    }

    #[test]
    fn empty_program_stays_at_start() {
        for kind in NavKind::ALL {
            let w = world(kind, 3);
            assert_eq!(simulate(&w, &NavProgram::default()).unwrap(), w.start);
        }
    }

    #[test]
    fn right_then_up_on_three_grid() {
        let w = world(NavKind::Square, 3);
        let p = NavProgram::new(vec![mv(Direction::Right, 1), mv(Direction::Up, 1)]);
        let end = simulate(&w, &p).unwrap();
        assert!(w.nodes[end].pos.approx_eq(Point::new(1.0, 1.0), 1e-12));
        assert_eq!(end, displacement_oracle(&w, &p).unwrap());
    }

    #[test]
    fn up_two_on_five_grid() {
        let w = world(NavKind::Square, 5);
        let p = NavProgram::new(vec![mv(Direction::Up, 2)]);
        assert_eq!(displacement_oracle(&w, &p).unwrap(), 12 + 10);
        assert_eq!(simulate(&w, &p).unwrap(), 22);
    }

    #[test]
    fn hexagon_wraps() {
        let w = world(NavKind::Hexagon, 0);
        let p = NavProgram::new(vec![mv(Direction::Clockwise, 7)]);
        assert_eq!(simulate(&w, &p).unwrap(), (w.start + 7) % 6);
        let back = NavProgram::new(vec![mv(Direction::Counterclockwise, 1)]);
        assert_eq!(simulate(&w, &back).unwrap(), 5);
    }

    #[test]
    fn off_world_and_illegal_tokens() {
        let w = world(NavKind::Square, 3);
        let p = NavProgram::new(vec![mv(Direction::Up, 1), mv(Direction::Up, 1)]);
        assert!(matches!(simulate(&w, &p), Err(NavError::OffWorld { step: 1 })));
        assert!(matches!(
            displacement_oracle(&w, &p),
            Err(NavError::OffWorld { step: 1 })
        ));
        let p = NavProgram::new(vec![mv(Direction::Clockwise, 1)]);
        assert!(matches!(simulate(&w, &p), Err(NavError::IllegalStep { .. })));
        let c = world(NavKind::Circle, 0);
        assert!(matches!(
            displacement_oracle(&c, &NavProgram::default()),
            Err(NavError::UnsupportedKind(NavKind::Circle))
        ));
        let p = NavProgram::new(vec![Step::TurnAndMove {
            turn: Turn::Left,
            count: 1,
        }]);
        assert!(matches!(simulate(&c, &p), Err(NavError::IllegalStep { .. })));
    }

    #[test]
    fn relative_turns_follow_last_move() {
        let w = world(NavKind::Square, 3);
        // facing up at start; a left turn heads left
        let p = NavProgram::new(vec![Step::TurnAndMove {
            turn: Turn::Left,
            count: 1,
        }]);
        assert_eq!(simulate(&w, &p).unwrap(), 3);
        let p = NavProgram::new(vec![
            mv(Direction::Right, 1),
            Step::TurnAndMove {
                turn: Turn::Right,
                count: 1,
            },
            Step::TurnAndMove {
                turn: Turn::Around,
                count: 2,
            },
        ]);
        assert_eq!(simulate(&w, &p).unwrap(), 8);

        let r = world(NavKind::Rhombus, 3);
        let p = NavProgram::new(vec![Step::TurnAndMove {
            turn: Turn::Right,
            count: 1,
        }]);
        let q = NavProgram::new(vec![mv(Direction::UpRight, 1)]);
        assert_eq!(simulate(&r, &p).unwrap(), simulate(&r, &q).unwrap());

        let c = world(NavKind::Circle, 0);
        let p = NavProgram::new(vec![
            mv(Direction::Clockwise, 2),
            Step::TurnAndMove {
                turn: Turn::Around,
                count: 3,
            },
        ]);
        assert_eq!(simulate(&c, &p).unwrap(), 7);
    }

    #[test]
    fn trace_lists_entered_nodes() {
        let w = world(NavKind::Triangle, 0);
        let p = NavProgram::new(vec![mv(Direction::Clockwise, 3), mv(Direction::Counterclockwise, 4)]);
        assert_eq!(trace(&w, &p).unwrap(), vec![vec![1, 2, 3], vec![2, 1, 0, 8]]);
    }
}
