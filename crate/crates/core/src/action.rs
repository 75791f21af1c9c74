//! The discrete GUI action space: structured actions, bounding boxes, and
//! the stable bijection between actions and logit indices.

use crate::error::{Error, Result};

/// Scroll directions, in index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScrollDirection {
    Up,
    Down,
    Left,
    Right,
}

impl ScrollDirection {
    pub const ALL: [ScrollDirection; 4] = [
        ScrollDirection::Up,
        ScrollDirection::Down,
        ScrollDirection::Left,
        ScrollDirection::Right,
    ];

    pub fn index(self) -> usize {
        match self {
            ScrollDirection::Up => 0,
            ScrollDirection::Down => 1,
            ScrollDirection::Left => 2,
            ScrollDirection::Right => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScrollDirection::Up => "up",
            ScrollDirection::Down => "down",
            ScrollDirection::Left => "left",
            ScrollDirection::Right => "right",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::parse(format!("unknown scroll direction `{s}`")))
    }
}

/// A structured action from the unified GUI action space.
///
/// Exactly the argument fields required by the variant are present;
/// coordinates are normalized to `[0, 1]^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GuiAction {
    Click { x: f64, y: f64 },
    LongPress { x: f64, y: f64 },
    InputText { token: u32 },
    Scroll { direction: ScrollDirection },
    OpenApp { app: u32 },
    Home,
    Back,
    Wait,
    Finish,
}

/// Reward classes for GUI actions: navigation/state actions score type
/// match only; parameterized and spatial actions score type plus argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionClass {
    NavState,
    Parameterized,
    Spatial,
}

impl ActionClass {
    /// Full-reward ceiling for a ground-truth action of this class.
    pub fn r_max(self) -> u32 {
        match self {
            ActionClass::NavState => 1,
            ActionClass::Parameterized | ActionClass::Spatial => 2,
        }
    }
}

impl GuiAction {
    pub fn class(&self) -> ActionClass {
        match self {
            GuiAction::Home | GuiAction::Back | GuiAction::Wait | GuiAction::Finish => {
                ActionClass::NavState
            }
            GuiAction::InputText { .. } | GuiAction::Scroll { .. } | GuiAction::OpenApp { .. } => {
                ActionClass::Parameterized
            }
            GuiAction::Click { .. } | GuiAction::LongPress { .. } => ActionClass::Spatial,
        }
    }

    /// Kind discriminant without arguments, used for type-match scoring.
    pub fn kind_index(&self) -> usize {
        match self {
            GuiAction::Click { .. } => 0,
            GuiAction::LongPress { .. } => 1,
            GuiAction::InputText { .. } => 2,
            GuiAction::Scroll { .. } => 3,
            GuiAction::OpenApp { .. } => 4,
            GuiAction::Home => 5,
            GuiAction::Back => 6,
            GuiAction::Wait => 7,
            GuiAction::Finish => 8,
        }
    }

    pub fn coord(&self) -> Option<(f64, f64)> {
        match *self {
            GuiAction::Click { x, y } | GuiAction::LongPress { x, y } => Some((x, y)),
            _ => None,
        }
    }
}

/// Axis-aligned bounding box in normalized screen coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        if !(x_min < x_max && y_min < y_max) {
            return Err(Error::invalid(format!(
                "degenerate bbox ({x_min}, {y_min}, {x_max}, {y_max})"
            )));
        }
        Ok(BoundingBox {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    /// Closed-interval containment: boundary points count as inside.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.x_min <= x && x <= self.x_max && self.y_min <= y && y <= self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }
}

/// Sizing of the discrete action space: an `R x R` coordinate grid, a text
/// vocabulary of `V` tokens, and `M` app ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionSpace {
    pub grid: usize,
    pub vocab: usize,
    pub apps: usize,
}

impl ActionSpace {
    pub fn new(grid: usize, vocab: usize, apps: usize) -> Result<Self> {
        if grid == 0 {
            return Err(Error::invalid("grid resolution must be positive"));
        }
        Ok(ActionSpace { grid, vocab, apps })
    }

    /// Total number of discrete actions:
    /// `2*R^2` click/long-press cells + `V` tokens + 4 scroll directions
    /// + `M` apps + 4 nullary actions.
    pub fn len(&self) -> usize {
        2 * self.grid * self.grid + self.vocab + 4 + self.apps + 4
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid cell for a normalized coordinate; the upper boundary clamps
    /// into the last cell.
    pub fn discretize(&self, x: f64, y: f64) -> Result<(usize, usize)> {
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            return Err(Error::invalid(format!("coordinate ({x}, {y}) outside [0,1]^2")));
        }
        let r = self.grid;
        let ix = ((x * r as f64) as usize).min(r - 1);
        let iy = ((y * r as f64) as usize).min(r - 1);
        Ok((ix, iy))
    }

    /// Center point of a grid cell.
    pub fn cell_center(&self, ix: usize, iy: usize) -> (f64, f64) {
        let r = self.grid as f64;
        ((ix as f64 + 0.5) / r, (iy as f64 + 0.5) / r)
    }

    fn cell_index(&self, ix: usize, iy: usize) -> usize {
        iy * self.grid + ix
    }

    /// Logit index for an action. Coordinates are discretized to their
    /// grid cell, so `encode` is total over valid actions.
    pub fn encode(&self, action: &GuiAction) -> Result<usize> {
        let r2 = self.grid * self.grid;
        Ok(match *action {
            GuiAction::Click { x, y } => {
                let (ix, iy) = self.discretize(x, y)?;
                self.cell_index(ix, iy)
            }
            GuiAction::LongPress { x, y } => {
                let (ix, iy) = self.discretize(x, y)?;
                r2 + self.cell_index(ix, iy)
            }
            GuiAction::InputText { token } => {
                if token as usize >= self.vocab {
                    return Err(Error::invalid(format!("token {token} outside vocab")));
                }
                2 * r2 + token as usize
            }
            GuiAction::Scroll { direction } => 2 * r2 + self.vocab + direction.index(),
            GuiAction::OpenApp { app } => {
                if app as usize >= self.apps {
                    return Err(Error::invalid(format!("app id {app} outside range")));
                }
                2 * r2 + self.vocab + 4 + app as usize
            }
            GuiAction::Home => self.nullary_base(),
            GuiAction::Back => self.nullary_base() + 1,
            GuiAction::Wait => self.nullary_base() + 2,
            GuiAction::Finish => self.nullary_base() + 3,
        })
    }

    fn nullary_base(&self) -> usize {
        2 * self.grid * self.grid + self.vocab + 4 + self.apps
    }

    /// Action for a logit index; spatial actions come back with
    /// cell-center coordinates.
    pub fn decode(&self, index: usize) -> Result<GuiAction> {
        let r = self.grid;
        let r2 = r * r;
        if index >= self.len() {
            return Err(Error::invalid(format!("action index {index} out of range")));
        }
        Ok(if index < r2 {
            let (x, y) = self.cell_center(index % r, index / r);
            GuiAction::Click { x, y }
        } else if index < 2 * r2 {
            let c = index - r2;
            let (x, y) = self.cell_center(c % r, c / r);
            GuiAction::LongPress { x, y }
        } else if index < 2 * r2 + self.vocab {
            GuiAction::InputText {
                token: (index - 2 * r2) as u32,
            }
        } else if index < 2 * r2 + self.vocab + 4 {
            GuiAction::Scroll {
                direction: ScrollDirection::ALL[index - 2 * r2 - self.vocab],
            }
        } else if index < self.nullary_base() {
            GuiAction::OpenApp {
                app: (index - 2 * r2 - self.vocab - 4) as u32,
            }
        } else {
            match index - self.nullary_base() {
                0 => GuiAction::Home,
                1 => GuiAction::Back,
                2 => GuiAction::Wait,
                _ => GuiAction::Finish,
            }
        })
    }
}
