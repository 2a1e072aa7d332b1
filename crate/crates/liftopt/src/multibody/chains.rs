//! Small reference chains used by the test suite and the guide.

use super::{JointKind, JointSpec, Model, NamedPoint, Segment};
use crate::geom::Vec2;
use crate::GRAVITY;
use std::collections::BTreeMap;

/// A free-floating chain: a compact base block with `n` rod links hanging
/// from it at the zero configuration. Link `i` (1-based) has mass
/// `1 + 0.3 i` kg, length `0.5 + 0.1 i` m, COM at mid-length, and rod
/// inertia `m l^2 / 12`. A named point `tip` marks the distal end of the
/// last link. Coordinates: `q[0..3]` base (x, z, rotation), then one angle
/// per link.
pub fn n_link_chain(n: usize) -> Model {
    assert!(n >= 1, "chain needs at least one link");
    let mut segments = vec![Segment {
        name: "base".into(),
        mass: 2.0,
        com_offset: Vec2::zeros(),
        inertia_zz: 0.1,
        length: 0.4,
        parent: None,
        joint: JointSpec {
            name: String::new(),
            kind: JointKind::FloatingBase,
            axis_sign: 1.0,
            limits: (0.0, 0.0),
            anchor: Vec2::zeros(),
        },
    }];
    let mut prev_len = 0.0;
    for i in 1..=n {
        let len = 0.5 + 0.1 * i as f64;
        let mass = 1.0 + 0.3 * i as f64;
        segments.push(Segment {
            name: format!("link{i}"),
            mass,
            com_offset: Vec2::new(0.0, -0.5 * len),
            inertia_zz: mass * len * len / 12.0,
            length: len,
            parent: Some(i - 1),
            joint: JointSpec {
                name: format!("joint{i}"),
                kind: JointKind::Revolute,
                axis_sign: 1.0,
                limits: (-6.0, 6.0),
                anchor: Vec2::new(0.0, -prev_len),
            },
        });
        prev_len = len;
    }
    let mut points = BTreeMap::new();
    points.insert(
        "tip".to_string(),
        NamedPoint {
            segment: n,
            local: Vec2::new(0.0, -prev_len),
        },
    );
    Model::new(
        format!("chain{n}"),
        segments,
        points,
        Vec2::new(0.0, -GRAVITY),
    )
    .expect("reference chain is valid")
}
