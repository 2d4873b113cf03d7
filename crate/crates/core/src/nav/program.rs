use serde::{Deserialize, Serialize};

use super::NavKind;

/// World-relative movement token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
    UpLeft,
    UpRight,
    DownLeft,
    DownRight,
    Clockwise,
    Counterclockwise,
}

impl Direction {
    /// Tokens a program may use on a world of `kind`. Square grids move along
    /// the screen axes; the rhombus grid's axes are the diagonals.
    pub fn legal_for(kind: NavKind) -> &'static [Direction] {
        use Direction::*;
        match kind {
            NavKind::Square => &[Up, Right, Down, Left],
            NavKind::Rhombus => &[UpLeft, UpRight, DownRight, DownLeft],
            NavKind::Circle | NavKind::Hexagon | NavKind::Triangle => &[Clockwise, Counterclockwise],
        }
    }

    pub fn is_legal_for(self, kind: NavKind) -> bool {
        Self::legal_for(kind).contains(&self)
    }

    /// Screen-space unit vector (y up) for grid tokens.
    pub fn unit(self) -> Option<(f64, f64)> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        use Direction::*;
        Some(match self {
            Up => (0.0, 1.0),
            Down => (0.0, -1.0),
            Left => (-1.0, 0.0),
            Right => (1.0, 0.0),
            UpLeft => (-h, h),
            UpRight => (h, h),
            DownLeft => (-h, -h),
            DownRight => (h, -h),
            Clockwise | Counterclockwise => return None,
        })
    }

    /// Quarter turn counterclockwise (grid tokens), or `None` for cycles.
    pub fn turned_left(self) -> Option<Direction> {
        use Direction::*;
        Some(match self {
            Up => Left,
            Left => Down,
            Down => Right,
            Right => Up,
            UpLeft => DownLeft,
            DownLeft => DownRight,
            DownRight => UpRight,
            UpRight => UpLeft,
            Clockwise | Counterclockwise => return None,
        })
    }

    pub fn turned_right(self) -> Option<Direction> {
        self.turned_left()
            .and_then(Direction::turned_left)
            .and_then(Direction::turned_left)
    }

    pub fn reversed(self) -> Direction {
        use Direction::*;
        match self {
            Clockwise => Counterclockwise,
            Counterclockwise => Clockwise,
            other => other
                .turned_left()
                .and_then(Direction::turned_left)
                .expect("grid token"),
        }
    }

    /// The rhombus token a square token becomes after a 45 degree
    /// counterclockwise rotation.
    pub fn rotated_45(self) -> Direction {
        use Direction::*;
        match self {
            Up => UpLeft,
            Left => DownLeft,
            Down => DownRight,
            Right => UpRight,
            other => other,
        }
    }

    pub fn phrase(self) -> &'static str {
        use Direction::*;
        match self {
            Up => "up",
            Down => "down",
            Left => "left",
            Right => "right",
            UpLeft => "up-left",
            UpRight => "up-right",
            DownLeft => "down-left",
            DownRight => "down-right",
            Clockwise => "clockwise",
            Counterclockwise => "counterclockwise",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Turn {
    Left,
    Right,
    Around,
}

impl Turn {
    pub fn phrase(self) -> &'static str {
        match self {
            Turn::Left => "left",
            Turn::Right => "right",
            Turn::Around => "around",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Step {
    Move {
        direction: Direction,
        count: u32,
    },
    /// Turn relative to the current facing (the direction of the last
    /// movement), then move.
    TurnAndMove {
        turn: Turn,
        count: u32,
    },
}

impl Step {
    pub fn count(&self) -> u32 {
        match *self {
            Step::Move { count, .. } | Step::TurnAndMove { count, .. } => count,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NavProgram {
    pub steps: Vec<Step>,
}

impl NavProgram {
    pub fn new(steps: Vec<Step>) -> Self {
        Self { steps }
    }

    pub fn is_absolute(&self) -> bool {
        self.steps.iter().all(|s| matches!(s, Step::Move { .. }))
    }

    /// Same program with every square token rotated onto the rhombus axes.
    pub fn rotated_45(&self) -> NavProgram {
        NavProgram::new(
            self.steps
                .iter()
                .map(|s| match *s {
                    Step::Move { direction, count } => Step::Move {
                        direction: direction.rotated_45(),
                        count,
                    },
                    other => other,
                })
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn turning_cycles() {
        for d in Direction::legal_for(NavKind::Square)
            .iter()
            .chain(Direction::legal_for(NavKind::Rhombus))
        {
            let back = d.turned_left().and_then(Direction::turned_right).unwrap();
            assert_eq!(back, *d);
            assert_eq!(d.reversed().reversed(), *d);
            assert_ne!(d.reversed(), *d);
        }
        assert_eq!(Direction::Clockwise.reversed(), Direction::Counterclockwise);
    }

    #[test]
    fn rotation_maps_square_to_rhombus_axes() {
        for d in Direction::legal_for(NavKind::Square) {
            let r = d.rotated_45();
            assert!(r.is_legal_for(NavKind::Rhombus));
            let (x, y) = d.unit().unwrap();
            let (rx, ry) = r.unit().unwrap();
            let h = std::f64::consts::FRAC_1_SQRT_2;
            assert!((x * h - y * h - rx).abs() < 1e-12);
            assert!((x * h + y * h - ry).abs() < 1e-12);
        }
    }

    #[test]
    fn step_serialization() {
        let step = Step::Move {
            direction: Direction::Clockwise,
            count: 2,
        };
        let json = serde_json::to_string(&step).unwrap();
        assert_eq!(json, r#"{"op":"move","direction":"clockwise","count":2}"#);
    }
}
