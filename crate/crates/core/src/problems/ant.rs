//! Santa Fe artificial ant. Programs are read from the tree's terminal
//! stream: `left();`, `right();`, `move();` and
//! `if(food_ahead()) { ... } else { ... }`.

use super::{Problem, ProblemError};
use crate::derivation::{DerivationTree, Leaf};

/// The standard 32x32 trail with 89 food pellets; `#` marks food.
pub const SANTA_FE_TRAIL: &str = include_str!("../../../../data/santafe.trail");

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Heading {
    North,
    East,
    South,
    West,
}

impl Heading {
    fn left(self) -> Self {
        match self {
            Heading::North => Heading::West,
            Heading::West => Heading::South,
            Heading::South => Heading::East,
            Heading::East => Heading::North,
        }
    }

    fn right(self) -> Self {
        self.left().left().left()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrailWorld {
    width: usize,
    height: usize,
    food: Vec<bool>,
    food_total: usize,
    max_steps: usize,
}

impl TrailWorld {
    /// Parses rows of `#` (food) and `.` (empty). All rows must have the
    /// same width.
    pub fn parse(text: &str, max_steps: usize) -> Result<Self, ProblemError> {
        let rows: Vec<&str> = text
            .lines()
            .map(str::trim_end)
            .filter(|l| !l.is_empty())
            .collect();
        let width = rows.first().map_or(0, |r| r.len());
        if width == 0 {
            return Err(ProblemError::Malformed("empty trail".into()));
        }
        let mut food = Vec::with_capacity(width * rows.len());
        for (i, r) in rows.iter().enumerate() {
            if r.len() != width {
                return Err(ProblemError::Malformed(format!(
                    "trail row {} has width {}, expected {width}",
                    i + 1,
                    r.len()
                )));
            }
            for c in r.chars() {
                match c {
                    '#' => food.push(true),
                    '.' => food.push(false),
                    other => {
                        return Err(ProblemError::Malformed(format!(
                            "unexpected trail character '{other}'"
                        )))
                    }
                }
            }
        }
        let food_total = food.iter().filter(|f| **f).count();
        Ok(TrailWorld {
            width,
            height: rows.len(),
            food,
            food_total,
            max_steps,
        })
    }

    pub fn santa_fe(max_steps: usize) -> Self {
        Self::parse(SANTA_FE_TRAIL, max_steps).expect("bundled trail parses")
    }

    pub fn food_total(&self) -> usize {
        self.food_total
    }

    pub fn max_steps(&self) -> usize {
        self.max_steps
    }

    pub fn size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn has_food(&self, x: usize, y: usize) -> bool {
        self.food[y * self.width + x]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stmt {
    Left,
    Right,
    Move,
    IfFoodAhead(Vec<Stmt>, Vec<Stmt>),
}

/// Parses the terminal stream of `tree` into statements.
pub fn compile_ant(tree: &DerivationTree) -> Result<Vec<Stmt>, ProblemError> {
    let leaves = tree.leaves();
    let mut toks = Vec::with_capacity(leaves.len());
    for l in &leaves {
        match l {
            Leaf::Literal(t) => toks.push(*t),
            Leaf::Constant(v) => return Err(ProblemError::UnknownTerminal(v.to_string())),
        }
    }
    let mut pos = 0;
    let body = parse_block(&toks, &mut pos)?;
    if pos != toks.len() {
        return Err(ProblemError::Malformed(format!(
            "unexpected '{}'",
            toks[pos]
        )));
    }
    Ok(body)
}

fn parse_block(toks: &[&str], pos: &mut usize) -> Result<Vec<Stmt>, ProblemError> {
    let mut out = Vec::new();
    while let Some(&t) = toks.get(*pos) {
        let stmt = match t {
            "}" => break,
            "left();" => Stmt::Left,
            "right();" => Stmt::Right,
            "move();" => Stmt::Move,
            "if(food_ahead())" => {
                *pos += 1;
                expect(toks, pos, "{")?;
                let then = parse_block(toks, pos)?;
                expect(toks, pos, "}")?;
                expect(toks, pos, "else")?;
                expect(toks, pos, "{")?;
                let other = parse_block(toks, pos)?;
                expect(toks, pos, "}")?;
                out.push(Stmt::IfFoodAhead(then, other));
                continue;
            }
            other => return Err(ProblemError::UnknownTerminal(other.to_string())),
        };
        *pos += 1;
        out.push(stmt);
    }
    Ok(out)
}

fn expect(toks: &[&str], pos: &mut usize, want: &str) -> Result<(), ProblemError> {
    match toks.get(*pos) {
        Some(&t) if t == want => {
            *pos += 1;
            Ok(())
        }
        Some(t) => Err(ProblemError::Malformed(format!(
            "expected '{want}', found '{t}'"
        ))),
        None => Err(ProblemError::Malformed(format!(
            "expected '{want}', found end"
        ))),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AntOutcome {
    pub eaten: usize,
    pub steps: usize,
    /// Position `(x, y)` and heading after each step, in order.
    pub trace: Vec<(usize, usize, Heading)>,
}

struct Ant<'w> {
    world: &'w TrailWorld,
    food: Vec<bool>,
    x: usize,
    y: usize,
    heading: Heading,
    eaten: usize,
    steps: usize,
    trace: Vec<(usize, usize, Heading)>,
}

impl Ant<'_> {
    fn ahead(&self) -> (usize, usize) {
        let (w, h) = (self.world.width, self.world.height);
        match self.heading {
            Heading::North => (self.x, (self.y + h - 1) % h),
            Heading::South => (self.x, (self.y + 1) % h),
            Heading::East => ((self.x + 1) % w, self.y),
            Heading::West => ((self.x + w - 1) % w, self.y),
        }
    }

    fn done(&self) -> bool {
        self.steps >= self.world.max_steps || self.eaten == self.world.food_total
    }

    fn exec(&mut self, body: &[Stmt]) {
        for s in body {
            if self.done() {
                return;
            }
            match s {
                Stmt::Left => self.heading = self.heading.left(),
                Stmt::Right => self.heading = self.heading.right(),
                Stmt::Move => {
                    (self.x, self.y) = self.ahead();
                    let cell = self.y * self.world.width + self.x;
                    if self.food[cell] {
                        self.food[cell] = false;
                        self.eaten += 1;
                    }
                }
                Stmt::IfFoodAhead(a, b) => {
                    let (x, y) = self.ahead();
                    if self.food[y * self.world.width + x] {
                        self.exec(a)
                    } else {
                        self.exec(b)
                    }
                    continue;
                }
            }
            self.steps += 1;
            self.trace.push((self.x, self.y, self.heading));
        }
    }
}

/// Runs `program` repeatedly from `(0, 0)` facing east until the step
/// budget is spent, all food is eaten, or a full pass takes no step.
pub fn run_ant(program: &[Stmt], world: &TrailWorld) -> AntOutcome {
    let mut ant = Ant {
        world,
        food: world.food.clone(),
        x: 0,
        y: 0,
        heading: Heading::East,
        eaten: 0,
        steps: 0,
        trace: Vec::new(),
    };
    while !ant.done() {
        let before = ant.steps;
        ant.exec(program);
        if ant.steps == before {
            break;
        }
    }
    AntOutcome {
        eaten: ant.eaten,
        steps: ant.steps,
        trace: ant.trace,
    }
}

/// Fitness is the number of pellets left uneaten.
#[derive(Clone, Debug)]
pub struct AntProblem {
    world: TrailWorld,
}

impl AntProblem {
    pub fn new(world: TrailWorld) -> Self {
        AntProblem { world }
    }

    /// The Santa Fe trail with a 600-step budget.
    pub fn santa_fe() -> Self {
        Self::new(TrailWorld::santa_fe(600))
    }

    pub fn world(&self) -> &TrailWorld {
        &self.world
    }
}

impl Problem for AntProblem {
    fn name(&self) -> &str {
        "santa-fe-ant"
    }

    fn fitness(&self, tree: &DerivationTree) -> f64 {
        match compile_ant(tree) {
            Ok(p) => (self.world.food_total - run_ant(&p, &self.world).eaten) as f64,
            Err(_) => super::WORST_FITNESS,
        }
    }

    fn knows_terminal(&self, token: &str) -> bool {
        matches!(
            token,
            "left();" | "right();" | "move();" | "if(food_ahead())" | "{" | "}" | "else"
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_trail() {
        let w = TrailWorld::santa_fe(600);
        assert_eq!(w.size(), (32, 32));
        assert_eq!(w.food_total(), 89);
        assert!(w.has_food(1, 0));
        assert!(!w.has_food(0, 0));
    }

    #[test]
    fn rejects_ragged_trail() {
        assert!(TrailWorld::parse("#..\n##\n", 10).is_err());
        assert!(TrailWorld::parse("#x.\n", 10).is_err());
    }

    #[test]
    fn moves_wrap_around() {
        let w = TrailWorld::parse(".#.\n...\n..#\n", 100).unwrap();
        let out = run_ant(&[Stmt::Left, Stmt::Move], &w);
        // facing north from (0,0) wraps to the bottom row
        assert_eq!(out.trace[1], (0, 2, Heading::North));
        let out = run_ant(&[Stmt::Move], &w);
        assert_eq!(out.eaten, 1);
        assert_eq!(out.trace[2], (0, 0, Heading::East));
    }

    #[test]
    fn budget_is_respected() {
        let w = TrailWorld::santa_fe(600);
        let out = run_ant(&[Stmt::Left, Stmt::Right, Stmt::Move], &w);
        assert_eq!(out.steps, 600);
        assert_eq!(out.trace.len(), 600);
    }

    #[test]
    fn stepless_program_terminates() {
        let w = TrailWorld::santa_fe(600);
        let out = run_ant(&[Stmt::IfFoodAhead(vec![], vec![])], &w);
        assert_eq!(out.steps, 0);
    }
}
