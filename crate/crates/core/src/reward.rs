//! Three-class GUI reward: navigation/state actions score type match only;
//! parameterized actions add exact argument equality; spatial actions add
//! bounding-box containment of the predicted point.

use crate::action::{ActionClass, BoundingBox, GuiAction};
use crate::error::{Error, Result};

/// Outcome of scoring one predicted action against the ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RewardOutcome {
    pub value: u32,
    pub r_max: u32,
    pub type_matched: bool,
    pub arg_matched: bool,
}

/// Scores a predicted action against a ground-truth action. `gt_bbox` must
/// be present exactly when the ground truth is spatial; for discretized
/// policies the predicted point is the emitted cell center.
pub fn score(pred: &GuiAction, gt: &GuiAction, gt_bbox: Option<&BoundingBox>) -> Result<RewardOutcome> {
    let class = gt.class();
    let r_max = class.r_max();
    if (class == ActionClass::Spatial) != gt_bbox.is_some() {
        return Err(Error::Contract(
            "gt_bbox must be present iff the ground truth is spatial".into(),
        ));
    }
    let type_matched = pred.kind_index() == gt.kind_index();
    if !type_matched {
        return Ok(RewardOutcome {
            value: 0,
            r_max,
            type_matched: false,
            arg_matched: false,
        });
    }
    let arg_matched = match (class, pred, gt) {
        (ActionClass::NavState, _, _) => true,
        (ActionClass::Parameterized, GuiAction::InputText { token: a }, GuiAction::InputText { token: b }) => a == b,
        (ActionClass::Parameterized, GuiAction::Scroll { direction: a }, GuiAction::Scroll { direction: b }) => a == b,
        (ActionClass::Parameterized, GuiAction::OpenApp { app: a }, GuiAction::OpenApp { app: b }) => a == b,
        (ActionClass::Spatial, pred, _) => {
            let (x, y) = pred.coord().expect("spatial pred has coordinates");
            gt_bbox.expect("checked above").contains(x, y)
        }
        _ => unreachable!("type_matched guarantees same variant"),
    };
    let value = match class {
        ActionClass::NavState => 1,
        _ => 1 + arg_matched as u32,
    };
    Ok(RewardOutcome {
        value,
        r_max,
        type_matched,
        arg_matched: arg_matched && type_matched,
    })
}

/// A step counts as correct for accuracy metrics iff it earned the full
/// reward for its class.
pub fn is_step_correct(outcome: &RewardOutcome) -> bool {
    outcome.value == outcome.r_max
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::ScrollDirection;

    fn bbox(x0: f64, y0: f64, x1: f64, y1: f64) -> BoundingBox {
        BoundingBox::new(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn nav_state_match() {
        let out = score(&GuiAction::Home, &GuiAction::Home, None).unwrap();
        assert_eq!((out.value, out.r_max), (1, 1));
        assert!(is_step_correct(&out));
    }

    #[test]
    fn parameterized_type_match_only() {
        let out = score(
            &GuiAction::Scroll {
                direction: ScrollDirection::Up,
            },
            &GuiAction::Scroll {
                direction: ScrollDirection::Down,
            },
            None,
        )
        .unwrap();
        assert_eq!((out.value, out.r_max), (1, 2));
        assert!(out.type_matched && !out.arg_matched);
        assert!(!is_step_correct(&out));
    }

    #[test]
    fn spatial_containment() {
        let out = score(
            &GuiAction::Click { x: 0.5, y: 0.15 },
            &GuiAction::Click { x: 0.5, y: 0.15 },
            Some(&bbox(0.4, 0.1, 0.6, 0.2)),
        )
        .unwrap();
        assert_eq!(out.value, 2);
        assert!(is_step_correct(&out));
    }

    #[test]
    fn type_mismatch_scores_zero() {
        let out = score(
            &GuiAction::InputText { token: 3 },
            &GuiAction::Click { x: 0.2, y: 0.2 },
            Some(&bbox(0.1, 0.1, 0.3, 0.3)),
        )
        .unwrap();
        assert_eq!((out.value, out.r_max), (0, 2));
    }

    #[test]
    fn missing_bbox_for_spatial_gt_is_contract_error() {
        assert!(score(
            &GuiAction::Click { x: 0.5, y: 0.5 },
            &GuiAction::Click { x: 0.5, y: 0.5 },
            None
        )
        .is_err());
        // a bbox for a non-spatial gt is equally a contract violation
        assert!(score(
            &GuiAction::Home,
            &GuiAction::Home,
            Some(&bbox(0.1, 0.1, 0.2, 0.2))
        )
        .is_err());
    }

    /// One representative action per kind, argument-equal across calls.
    fn representative(kind: usize) -> GuiAction {
        match kind {
            0 => GuiAction::Click { x: 0.51, y: 0.52 },
            1 => GuiAction::LongPress { x: 0.51, y: 0.52 },
            2 => GuiAction::InputText { token: 5 },
            3 => GuiAction::Scroll {
                direction: ScrollDirection::Left,
            },
            4 => GuiAction::OpenApp { app: 2 },
            5 => GuiAction::Home,
            6 => GuiAction::Back,
            7 => GuiAction::Wait,
            _ => GuiAction::Finish,
        }
    }

    #[test]
    fn exhaustive_kind_pair_table() {
        // Stage-1 reward over all 9x9 kind pairs: type match earns 1, and
        // the argument stage can only add on top of a type match.
        let b = bbox(0.45, 0.45, 0.6, 0.6);
        for gt_kind in 0..9 {
            let gt = representative(gt_kind);
            let gt_box = (gt.class() == ActionClass::Spatial).then_some(&b);
            for pred_kind in 0..9 {
                let pred = representative(pred_kind);
                let out = score(&pred, &gt, gt_box).unwrap();
                assert_eq!(out.r_max, gt.class().r_max());
                if pred_kind == gt_kind {
                    // identical representative: full score
                    assert_eq!(out.value, out.r_max, "kinds {pred_kind}/{gt_kind}");
                } else {
                    assert_eq!(out.value, 0, "kinds {pred_kind}/{gt_kind}");
                }
                assert!(out.value <= out.r_max && out.r_max <= 2);
                assert!(!out.arg_matched || out.type_matched);
            }
        }
    }

    #[test]
    fn bbox_boundary_cases() {
        let b = bbox(0.25, 0.4, 0.5, 0.6);
        let gt = GuiAction::Click { x: 0.3, y: 0.5 };
        // (point, expected containment) including all edges and corners
        let cases: [(f64, f64, bool); 20] = [
            (0.25, 0.4, true),   // corner min/min
            (0.5, 0.4, true),    // corner max/min
            (0.25, 0.6, true),   // corner min/max
            (0.5, 0.6, true),    // corner max/max
            (0.25, 0.5, true),   // left edge
            (0.5, 0.5, true),    // right edge
            (0.375, 0.4, true),  // bottom edge
            (0.375, 0.6, true),  // top edge
            (0.375, 0.5, true),  // interior
            (0.26, 0.41, true),  // near corner inside
            (0.2499, 0.5, false),
            (0.5001, 0.5, false),
            (0.375, 0.3999, false),
            (0.375, 0.6001, false),
            (0.0, 0.0, false),
            (1.0, 1.0, false),
            (0.24, 0.39, false),
            (0.51, 0.61, false),
            (0.25, 0.3999, false), // on x edge, outside y
            (0.5001, 0.6, false),  // on y edge, outside x
        ];
        for &(x, y, inside) in &cases {
            let out = score(&GuiAction::Click { x, y }, &gt, Some(&b)).unwrap();
            let expected = if inside { 2 } else { 1 };
            assert_eq!(out.value, expected, "point ({x}, {y})");
        }
    }
}
