use std::collections::{BTreeMap, VecDeque};

use num_traits::Float;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::geometry::{lit, Point};
use super::{NavError, NavKind};

/// Everyday objects placed on the nodes. Single lowercase words so an exact
/// match has one spelling.
pub const OBJECT_WORDS: [&str; 64] = [
    "apple", "bag", "ball", "basket", "bell", "bench", "bicycle", "blanket", "book", "bottle", "bowl", "box", "broom",
    "brush", "bucket", "button", "camera", "candle", "chair", "clock", "coin", "comb", "cup", "desk", "drum", "fan",
    "feather", "flag", "fork", "glove", "guitar", "hammer", "hat", "helmet", "jar", "kettle", "key", "kite", "ladder",
    "lamp", "lantern", "leaf", "mirror", "mug", "necklace", "notebook", "pencil", "piano", "pillow", "plate", "pot",
    "radio", "ring", "rope", "scarf", "shell", "shoe", "sock", "spoon", "stool", "table", "teapot", "towel",
    "umbrella",
];

pub const DEFAULT_GRID_SIDE: usize = 3;
pub const DEFAULT_CIRCLE_LEN: usize = 8;
pub const HEXAGON_LEN: usize = 6;
pub const DEFAULT_TRIANGLE_LEN: usize = 9;

/// Size knobs for [`build_world`]. `cycle_len` of `None` picks the kind's
/// default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldParams {
    pub grid_side: usize,
    pub cycle_len: Option<usize>,
}

impl Default for WorldParams {
    fn default() -> Self {
        Self {
            grid_side: DEFAULT_GRID_SIDE,
            cycle_len: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node<T> {
    pub id: usize,
    pub pos: Point<T>,
}

/// Directed half of an undirected edge; both halves are stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge<T> {
    pub from: usize,
    pub to: usize,
    pub direction: Point<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World<T> {
    pub kind: NavKind,
    pub nodes: Vec<Node<T>>,
    pub edges: Vec<Edge<T>>,
    pub objects: BTreeMap<usize, String>,
    pub start: usize,
    pub start_heading: Point<T>,
    /// Side length for grid kinds. Grid node ids are `row * side + col`
    /// with row 0 at the bottom.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_side: Option<usize>,
}

impl<T: Float> World<T> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn label(&self, node: usize) -> Option<&str> {
        self.objects.get(&node).map(String::as_str)
    }

    pub fn neighbors(&self, node: usize) -> impl Iterator<Item = &Edge<T>> + '_ {
        self.edges.iter().filter(move |e| e.from == node)
    }

    pub fn degree(&self, node: usize) -> usize {
        self.neighbors(node).count()
    }

    pub fn centroid(&self) -> Point<T> {
        let n = T::from(self.nodes.len().max(1)).expect("node count fits");
        self.nodes
            .iter()
            .fold(Point::zero(), |acc, node| acc + node.pos)
            .scale(n.recip())
    }

    pub fn is_connected(&self) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(n) = queue.pop_front() {
            for e in self.neighbors(n) {
                if e.to < seen.len() && !seen[e.to] {
                    seen[e.to] = true;
                    queue.push_back(e.to);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Structural checks used when a world arrives from a file.
    pub fn validate(&self) -> Result<(), NavError> {
        let bad = |m: String| Err(NavError::InvalidWorld(m));
        if self.nodes.iter().enumerate().any(|(i, n)| n.id != i) {
            return bad("node ids must be 0..n in order".into());
        }
        if self.start >= self.nodes.len() {
            return bad(format!("start {} out of range", self.start));
        }
        if self.edges.iter().any(|e| e.from >= self.len() || e.to >= self.len()) {
            return bad("edge endpoint out of range".into());
        }
        if !self.is_connected() {
            return bad("graph is not connected".into());
        }
        if self.objects.len() != self.nodes.len() || self.objects.keys().any(|k| *k >= self.len()) {
            return bad("every node needs exactly one object".into());
        }
        let mut labels: Vec<&String> = self.objects.values().collect();
        labels.sort();
        labels.dedup();
        if labels.len() != self.objects.len() {
            return bad("object labels must be distinct".into());
        }
        match self.kind {
            NavKind::Square | NavKind::Rhombus => {
                let side = self.grid_side.unwrap_or(0);
                if side * side != self.len() {
                    return bad("grid world needs grid_side with side^2 nodes".into());
                }
            }
            _ => {
                if (0..self.len()).any(|n| self.degree(n) != 2) {
                    return bad("cycle world nodes must have degree 2".into());
                }
            }
        }
        Ok(())
    }

    /// Same world with coordinates in another float type.
    pub fn cast<U: Float>(&self) -> World<U> {
        World {
            kind: self.kind,
            nodes: self
                .nodes
                .iter()
                .map(|n| Node {
                    id: n.id,
                    pos: n.pos.cast(),
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| Edge {
                    from: e.from,
                    to: e.to,
                    direction: e.direction.cast(),
                })
                .collect(),
            objects: self.objects.clone(),
            start: self.start,
            start_heading: self.start_heading.cast(),
            grid_side: self.grid_side,
        }
    }
}

fn link<T: Float>(edges: &mut Vec<Edge<T>>, positions: &[Point<T>], a: usize, b: usize) {
    let dir = (positions[b] - positions[a]).normalized();
    edges.push(Edge {
        from: a,
        to: b,
        direction: dir,
    });
    edges.push(Edge {
        from: b,
        to: a,
        direction: dir.scale(-T::one()),
    });
}

fn grid_positions<T: Float>(side: usize, rotate: bool) -> Vec<Point<T>> {
    let center = (side as f64 - 1.0) / 2.0;
    let angle = if rotate { std::f64::consts::FRAC_PI_4 } else { 0.0 };
    (0..side * side)
        .map(|id| {
            let (row, col) = (id / side, id % side);
            Point::from_f64(col as f64 - center, row as f64 - center).rotated(lit(angle))
        })
        .collect()
}

/// Points on a unit circle, clockwise from the top.
fn ring<T: Float>(n: usize) -> Vec<Point<T>> {
    (0..n)
        .map(|i| {
            let theta = std::f64::consts::FRAC_PI_2 - std::f64::consts::TAU * i as f64 / n as f64;
            Point::from_f64(theta.cos(), theta.sin())
        })
        .collect()
}

fn triangle_perimeter<T: Float>(per_side: usize) -> Vec<Point<T>> {
    let corners = ring::<T>(3);
    let mut out = Vec::with_capacity(3 * per_side);
    for s in 0..3 {
        let (a, b) = (corners[s], corners[(s + 1) % 3]);
        for j in 0..per_side {
            let t: T = lit(j as f64 / per_side as f64);
            out.push(a + (b - a).scale(t));
        }
    }
    out
}

fn cycle_len(kind: NavKind, params: &WorldParams) -> Result<usize, NavError> {
    let invalid = |m: String| Err(NavError::InvalidParams(m));
    match kind {
        NavKind::Hexagon => match params.cycle_len {
            None | Some(HEXAGON_LEN) => Ok(HEXAGON_LEN),
            Some(n) => invalid(format!("hexagon has 6 nodes, got {n}")),
        },
        NavKind::Triangle => {
            let n = params.cycle_len.unwrap_or(DEFAULT_TRIANGLE_LEN);
            if n == 0 || !n.is_multiple_of(3) {
                return invalid(format!("triangle needs a positive multiple of 3 nodes, got {n}"));
            }
            Ok(n)
        }
        NavKind::Circle => {
            let n = params.cycle_len.unwrap_or(DEFAULT_CIRCLE_LEN);
            if n < 3 {
                return invalid(format!("circle needs at least 3 nodes, got {n}"));
            }
            Ok(n)
        }
        NavKind::Square | NavKind::Rhombus => unreachable!("grid kind"),
    }
}

/// Builds a world of `kind` with objects drawn from [`OBJECT_WORDS`] by
/// `rng`. Grids start at the center node facing up (up-left for the
/// rhombus); cycles start at node 0, the top.
pub fn build_world<T: Float, R: Rng + ?Sized>(
    kind: NavKind,
    params: &WorldParams,
    rng: &mut R,
) -> Result<World<T>, NavError> {
    let (positions, mut edges, start, grid_side) = if kind.is_grid() {
        let side = params.grid_side;
        if side < 2 {
            return Err(NavError::InvalidParams(format!(
                "grid_side must be at least 2, got {side}"
            )));
        }
        if params.cycle_len.is_some() {
            return Err(NavError::InvalidParams("cycle_len does not apply to grid kinds".into()));
        }
        let positions = grid_positions::<T>(side, kind == NavKind::Rhombus);
        let mut edges = Vec::new();
        for row in 0..side {
            for col in 0..side {
                let id = row * side + col;
                if col + 1 < side {
                    link(&mut edges, &positions, id, id + 1);
                }
                if row + 1 < side {
                    link(&mut edges, &positions, id, id + side);
                }
            }
        }
        let mid = (side - 1) / 2;
        (positions, edges, mid * side + mid, Some(side))
    } else {
        let n = cycle_len(kind, params)?;
        let positions = match kind {
            NavKind::Triangle => triangle_perimeter::<T>(n / 3),
            _ => ring::<T>(n),
        };
        let mut edges = Vec::new();
        for i in 0..n {
            link(&mut edges, &positions, i, (i + 1) % n);
        }
        (positions, edges, 0, None)
    };

    if positions.len() > OBJECT_WORDS.len() {
        return Err(NavError::InvalidParams(format!(
            "{} nodes exceed the {} available object labels",
            positions.len(),
            OBJECT_WORDS.len()
        )));
    }
    edges.sort_by_key(|e| (e.from, e.to));

    let mut words = OBJECT_WORDS.to_vec();
    words.shuffle(rng);
    let objects = (0..positions.len()).map(|i| (i, words[i].to_string())).collect();

    let up = Point::from_f64(0.0, 1.0);
    let start_heading = if kind == NavKind::Rhombus {
        up.rotated(lit(std::f64::consts::FRAC_PI_4))
    } else {
        up
    };

    Ok(World {
        kind,
        nodes: positions
            .into_iter()
            .enumerate()
            .map(|(id, pos)| Node { id, pos })
            .collect(),
        edges,
        objects,
        start,
        start_heading,
        grid_side,
    })
}
