//! Anthropometric scaling and human model construction.
//!
//! Segment masses, lengths, COM positions, and radii of gyration come from
//! a scaling table in the style of De Leva (1996): every quantity is a
//! fraction of total body mass, body height, or segment length. The embedded
//! table carries the male column only (the modeled subject is male); female
//! subjects require a caller-supplied table file in the same CSV format.
//!
//! The full model has 16 segments: pelvis (floating base), middle trunk,
//! upper trunk, head, and left/right thigh, shank, foot, upper arm, forearm,
//! hand. All joints are revolute with `axis_sign = +1`, so a positive angle
//! is a counterclockwise rotation of the child relative to its parent
//! (positive lumbar angle = extension / backward lean). A reduced 6-segment
//! symmetric variant for fast runs is provided by [`build_smoke_model`].

use crate::geom::Vec2;
use crate::multibody::{JointKind, JointSpec, Model, MultibodyError, NamedPoint, Segment};
use crate::GRAVITY;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Embedded male scaling table (CSV source, checksum-pinned by tests).
pub const DELEVA_MALE_CSV: &str = include_str!("../data/deleva_male.csv");

/// Ankle joint height above the sole as a fraction of body height.
pub const ANKLE_HEIGHT_FRAC: f64 = 0.039;
/// Part of the foot length that lies behind the ankle joint.
pub const FOOT_HEEL_BACK_FRAC: f64 = 0.25;

/// Exoskeleton attachment offsets in their host segment frames (m):
/// hinge `P` on the pelvis at hip level, trunk pad `T` at mid upper trunk,
/// thigh pad `U` at mid thigh. Chosen so the hinge sits slightly posterior
/// and the upright leg bar is near-vertical.
pub const EXO_P_OFFSET: [f64; 2] = [-0.08, 0.0];
pub const EXO_T_X_OFFSET: f64 = -0.08;
pub const EXO_U_X_OFFSET: f64 = -0.058;

#[derive(Debug, Error)]
pub enum AnthroError {
    #[error("invalid subject: {0}")]
    InvalidSubject(String),
    #[error("scaling table: {0}")]
    InvalidTable(String),
    #[error("no embedded female table; supply a table file in the documented CSV format")]
    NoFemaleTable,
    #[error("unknown segment `{0}`")]
    UnknownSegment(String),
    #[error("mass distribution fractions sum to {0}, expected 1")]
    BadDistribution(f64),
    #[error(transparent)]
    Multibody(#[from] MultibodyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sex {
    Male,
    Female,
}

/// The modeled subject.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubjectParams {
    pub height_m: f64,
    pub mass_kg: f64,
    pub age: u32,
    pub sex: Sex,
}

impl SubjectParams {
    pub fn validate(&self) -> Result<(), AnthroError> {
        if !(1.2..=2.3).contains(&self.height_m) {
            return Err(AnthroError::InvalidSubject(format!(
                "height {} m outside [1.2, 2.3]",
                self.height_m
            )));
        }
        if !(30.0..=200.0).contains(&self.mass_kg) {
            return Err(AnthroError::InvalidSubject(format!(
                "mass {} kg outside [30, 200]",
                self.mass_kg
            )));
        }
        Ok(())
    }
}

/// One row of the scaling table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableRow {
    pub mass_frac: f64,
    pub length_frac: f64,
    pub com_frac: f64,
    pub rgyr_frac: f64,
}

/// The 16-segment scaling table keyed by segment name.
#[derive(Debug, Clone)]
pub struct DeLevaTable {
    rows: BTreeMap<String, TableRow>,
}

/// All segment names the table must provide.
pub const SEGMENT_NAMES: [&str; 16] = [
    "pelvis",
    "middle_trunk",
    "upper_trunk",
    "head",
    "thigh_l",
    "thigh_r",
    "shank_l",
    "shank_r",
    "foot_l",
    "foot_r",
    "upper_arm_l",
    "upper_arm_r",
    "forearm_l",
    "forearm_r",
    "hand_l",
    "hand_r",
];

impl DeLevaTable {
    /// The embedded table for the given sex. Only the male column ships with
    /// the crate; `Sex::Female` returns [`AnthroError::NoFemaleTable`].
    pub fn embedded(sex: Sex) -> Result<Self, AnthroError> {
        match sex {
            Sex::Male => Self::from_csv_str(DELEVA_MALE_CSV),
            Sex::Female => Err(AnthroError::NoFemaleTable),
        }
    }

    /// Parses a table from CSV text. Lines starting with `#` are comments;
    /// the header row must be
    /// `segment,mass_frac,length_frac,com_frac,rgyr_frac`.
    pub fn from_csv_str(text: &str) -> Result<Self, AnthroError> {
        let mut rows = BTreeMap::new();
        let mut saw_header = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !saw_header {
                if line != "segment,mass_frac,length_frac,com_frac,rgyr_frac" {
                    return Err(AnthroError::InvalidTable(format!(
                        "line {}: unexpected header `{line}`",
                        lineno + 1
                    )));
                }
                saw_header = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(AnthroError::InvalidTable(format!(
                    "line {}: expected 5 fields, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let parse = |s: &str, what: &str| {
                s.trim().parse::<f64>().map_err(|_| {
                    AnthroError::InvalidTable(format!(
                        "line {}: cannot parse {what} `{s}`",
                        lineno + 1
                    ))
                })
            };
            let row = TableRow {
                mass_frac: parse(fields[1], "mass_frac")?,
                length_frac: parse(fields[2], "length_frac")?,
                com_frac: parse(fields[3], "com_frac")?,
                rgyr_frac: parse(fields[4], "rgyr_frac")?,
            };
            if rows.insert(fields[0].trim().to_string(), row).is_some() {
                return Err(AnthroError::InvalidTable(format!(
                    "duplicate segment `{}`",
                    fields[0]
                )));
            }
        }
        let table = DeLevaTable { rows };
        table.validate()?;
        Ok(table)
    }

    fn validate(&self) -> Result<(), AnthroError> {
        for name in SEGMENT_NAMES {
            let row = self
                .rows
                .get(name)
                .ok_or_else(|| AnthroError::InvalidTable(format!("missing segment `{name}`")))?;
            for (v, what) in [
                (row.mass_frac, "mass_frac"),
                (row.length_frac, "length_frac"),
                (row.com_frac, "com_frac"),
                (row.rgyr_frac, "rgyr_frac"),
            ] {
                if !(v.is_finite() && v > 0.0 && v < 1.0) {
                    return Err(AnthroError::InvalidTable(format!(
                        "segment `{name}`: {what} = {v} outside (0, 1)"
                    )));
                }
            }
        }
        let sum: f64 = SEGMENT_NAMES.iter().map(|n| self.rows[*n].mass_frac).sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(AnthroError::InvalidTable(format!(
                "mass fractions sum to {sum}, expected 1 +- 1e-6"
            )));
        }
        Ok(())
    }

    pub fn row(&self, segment: &str) -> Result<&TableRow, AnthroError> {
        self.rows
            .get(segment)
            .ok_or_else(|| AnthroError::UnknownSegment(segment.to_string()))
    }

    /// Scaled (mass kg, length m, com offset along axis m, inertia kg m^2)
    /// for one segment.
    pub fn scaled(&self, segment: &str, subject: &SubjectParams) -> Result<Scaled, AnthroError> {
        let row = self.row(segment)?;
        let mass = row.mass_frac * subject.mass_kg;
        let length = row.length_frac * subject.height_m;
        let r = row.rgyr_frac * length;
        Ok(Scaled {
            mass,
            length,
            com_along: row.com_frac * length,
            inertia_zz: mass * r * r,
        })
    }
}

/// Scaled inertial properties of one segment.
#[derive(Debug, Clone, Copy)]
pub struct Scaled {
    pub mass: f64,
    pub length: f64,
    /// COM distance from the segment frame origin along the long axis.
    pub com_along: f64,
    pub inertia_zz: f64,
}

struct SegmentPlan<'a> {
    name: &'a str,
    parent: Option<usize>,
    joint_name: &'a str,
    limits: (f64, f64),
    anchor: Vec2,
    /// Unit vector of the long axis in the segment frame (+z up, -z down).
    axis: Vec2,
}

/// Revolute joint limits (rad) shared by the full and smoke models.
pub fn joint_limit_table(joint: &str) -> (f64, f64) {
    let base = joint.trim_end_matches("_l").trim_end_matches("_r");
    match base {
        "lumbar" | "thoracic" => (-0.7, 0.12),
        "neck" => (-0.9, 0.6),
        "hip" => (-0.3, 2.3),
        "knee" => (-2.3, 0.05),
        "ankle" => (-0.8, 0.65),
        "shoulder" => (-1.2, 3.0),
        "elbow" => (-0.05, 2.5),
        "wrist" => (-1.2, 1.2),
        _ => (-3.0, 3.0),
    }
}

/// [`build_human_model`] with the embedded scaling table for the
/// subject's sex.
pub fn default_human_model(subject: &SubjectParams) -> Result<Model, AnthroError> {
    build_human_model(subject, &DeLevaTable::embedded(subject.sex)?)
}

/// [`build_smoke_model`] with the embedded scaling table.
pub fn default_smoke_model(subject: &SubjectParams) -> Result<Model, AnthroError> {
    build_smoke_model(subject, &DeLevaTable::embedded(subject.sex)?)
}

/// Builds the 16-segment sagittal-plane human model. At the zero
/// configuration the subject stands upright with arms hanging and the pelvis
/// origin (mid-hip) at the world origin; the soles are then at
/// `-(L_thigh + L_shank + ankle height)`.
///
/// Named points: `heel_l/r`, `toe_l/r` (sole corners), `hand_l/r` (hand
/// contact points), and exoskeleton attachments `exo_P_l/r` (pelvis),
/// `exo_T_l/r` (upper trunk), `exo_U_l/r` (thighs).
pub fn build_human_model(
    subject: &SubjectParams,
    table: &DeLevaTable,
) -> Result<Model, AnthroError> {
    subject.validate()?;
    let h = subject.height_m;
    let up = Vec2::new(0.0, 1.0);
    let down = Vec2::new(0.0, -1.0);

    let pelvis = table.scaled("pelvis", subject)?;
    let mt = table.scaled("middle_trunk", subject)?;
    let ut = table.scaled("upper_trunk", subject)?;
    let thigh = table.scaled("thigh_l", subject)?;
    let shank = table.scaled("shank_l", subject)?;
    let ua = table.scaled("upper_arm_l", subject)?;
    let fa = table.scaled("forearm_l", subject)?;

    let plans = [
        SegmentPlan {
            name: "pelvis",
            parent: None,
            joint_name: "",
            limits: (0.0, 0.0),
            anchor: Vec2::zeros(),
            axis: up,
        },
        SegmentPlan {
            name: "middle_trunk",
            parent: Some(0),
            joint_name: "lumbar",
            limits: joint_limit_table("lumbar"),
            anchor: Vec2::new(0.0, pelvis.length),
            axis: up,
        },
        SegmentPlan {
            name: "upper_trunk",
            parent: Some(1),
            joint_name: "thoracic",
            limits: joint_limit_table("thoracic"),
            anchor: Vec2::new(0.0, mt.length),
            axis: up,
        },
        SegmentPlan {
            name: "head",
            parent: Some(2),
            joint_name: "neck",
            limits: joint_limit_table("neck"),
            anchor: Vec2::new(0.0, ut.length),
            axis: up,
        },
        SegmentPlan {
            name: "thigh_l",
            parent: Some(0),
            joint_name: "hip_l",
            limits: joint_limit_table("hip_l"),
            anchor: Vec2::zeros(),
            axis: down,
        },
        SegmentPlan {
            name: "shank_l",
            parent: Some(4),
            joint_name: "knee_l",
            limits: joint_limit_table("knee_l"),
            anchor: Vec2::new(0.0, -thigh.length),
            axis: down,
        },
        SegmentPlan {
            name: "foot_l",
            parent: Some(5),
            joint_name: "ankle_l",
            limits: joint_limit_table("ankle_l"),
            anchor: Vec2::new(0.0, -shank.length),
            axis: Vec2::new(1.0, 0.0),
        },
        SegmentPlan {
            name: "thigh_r",
            parent: Some(0),
            joint_name: "hip_r",
            limits: joint_limit_table("hip_r"),
            anchor: Vec2::zeros(),
            axis: down,
        },
        SegmentPlan {
            name: "shank_r",
            parent: Some(7),
            joint_name: "knee_r",
            limits: joint_limit_table("knee_r"),
            anchor: Vec2::new(0.0, -thigh.length),
            axis: down,
        },
        SegmentPlan {
            name: "foot_r",
            parent: Some(8),
            joint_name: "ankle_r",
            limits: joint_limit_table("ankle_r"),
            anchor: Vec2::new(0.0, -shank.length),
            axis: Vec2::new(1.0, 0.0),
        },
        SegmentPlan {
            name: "upper_arm_l",
            parent: Some(2),
            joint_name: "shoulder_l",
            limits: joint_limit_table("shoulder_l"),
            anchor: Vec2::new(0.0, ut.length),
            axis: down,
        },
        SegmentPlan {
            name: "forearm_l",
            parent: Some(10),
            joint_name: "elbow_l",
            limits: joint_limit_table("elbow_l"),
            anchor: Vec2::new(0.0, -ua.length),
            axis: down,
        },
        SegmentPlan {
            name: "hand_l",
            parent: Some(11),
            joint_name: "wrist_l",
            limits: joint_limit_table("wrist_l"),
            anchor: Vec2::new(0.0, -fa.length),
            axis: down,
        },
        SegmentPlan {
            name: "upper_arm_r",
            parent: Some(2),
            joint_name: "shoulder_r",
            limits: joint_limit_table("shoulder_r"),
            anchor: Vec2::new(0.0, ut.length),
            axis: down,
        },
        SegmentPlan {
            name: "forearm_r",
            parent: Some(13),
            joint_name: "elbow_r",
            limits: joint_limit_table("elbow_r"),
            anchor: Vec2::new(0.0, -ua.length),
            axis: down,
        },
        SegmentPlan {
            name: "hand_r",
            parent: Some(14),
            joint_name: "wrist_r",
            limits: joint_limit_table("wrist_r"),
            anchor: Vec2::new(0.0, -fa.length),
            axis: down,
        },
    ];

    let ankle_h = ANKLE_HEIGHT_FRAC * h;
    let mut segments = Vec::with_capacity(16);
    for plan in &plans {
        let s = table.scaled(plan.name, subject)?;
        let com_offset = if plan.axis.x != 0.0 {
            // Foot: frame origin at the ankle, long axis along the sole.
            // com_frac runs from the heel; the COM sits halfway down to
            // the sole plane.
            Vec2::new(
                s.com_along - FOOT_HEEL_BACK_FRAC * s.length,
                -0.5 * ankle_h,
            )
        } else {
            plan.axis * s.com_along
        };
        segments.push(Segment {
            name: plan.name.to_string(),
            mass: s.mass,
            com_offset,
            inertia_zz: s.inertia_zz,
            length: s.length,
            parent: plan.parent,
            joint: JointSpec {
                name: plan.joint_name.to_string(),
                kind: if plan.parent.is_none() {
                    JointKind::FloatingBase
                } else {
                    JointKind::Revolute
                },
                axis_sign: 1.0,
                limits: plan.limits,
                anchor: plan.anchor,
            },
        });
    }

    let foot = table.scaled("foot_l", subject)?;
    let hand = table.scaled("hand_l", subject)?;
    let heel_x = -FOOT_HEEL_BACK_FRAC * foot.length;
    let toe_x = (1.0 - FOOT_HEEL_BACK_FRAC) * foot.length;
    let mut points = BTreeMap::new();
    for (name, seg, local) in [
        ("heel_l", 6, Vec2::new(heel_x, -ankle_h)),
        ("toe_l", 6, Vec2::new(toe_x, -ankle_h)),
        ("heel_r", 9, Vec2::new(heel_x, -ankle_h)),
        ("toe_r", 9, Vec2::new(toe_x, -ankle_h)),
        ("hand_l", 12, Vec2::new(0.0, -hand.length)),
        ("hand_r", 15, Vec2::new(0.0, -hand.length)),
        ("exo_P_l", 0, Vec2::new(EXO_P_OFFSET[0], EXO_P_OFFSET[1])),
        ("exo_P_r", 0, Vec2::new(EXO_P_OFFSET[0], EXO_P_OFFSET[1])),
        ("exo_T_l", 2, Vec2::new(EXO_T_X_OFFSET, 0.5 * ut.length)),
        ("exo_T_r", 2, Vec2::new(EXO_T_X_OFFSET, 0.5 * ut.length)),
        ("exo_U_l", 4, Vec2::new(EXO_U_X_OFFSET, -0.5 * thigh.length)),
        ("exo_U_r", 7, Vec2::new(EXO_U_X_OFFSET, -0.5 * thigh.length)),
    ] {
        points.insert(name.to_string(), NamedPoint { segment: seg, local });
    }

    Ok(Model::new(
        "human16",
        segments,
        points,
        Vec2::new(0.0, -GRAVITY),
    )?)
}

/// Composes a rigid stack of segments (each with its own origin offset along
/// +z between attachment points) into a single (mass, com, inertia) triple.
fn compose(parts: &[(Scaled, f64)]) -> (f64, f64, f64) {
    // parts: (scaled properties, frame z of the part origin); COM along +z.
    let mass: f64 = parts.iter().map(|(p, _)| p.mass).sum();
    let com: f64 = parts
        .iter()
        .map(|(p, z0)| p.mass * (z0 + p.com_along))
        .sum::<f64>()
        / mass;
    let inertia: f64 = parts
        .iter()
        .map(|(p, z0)| {
            let d = z0 + p.com_along - com;
            p.inertia_zz + p.mass * d * d
        })
        .sum();
    (mass, com, inertia)
}

/// Builds the reduced 6-segment symmetric model used for fast runs and CI:
/// pelvis, lumped trunk (middle + upper trunk + head), lumped bilateral
/// thigh, shank, and foot, and a lumped single arm (upper arm + forearm +
/// hand, both sides). Joint names: `lumbar`, `hip`, `knee`, `ankle`,
/// `shoulder`. Bilateral joints carry twice the single-side actuator
/// strength (see the actuator assembly in the scenario module).
pub fn build_smoke_model(
    subject: &SubjectParams,
    table: &DeLevaTable,
) -> Result<Model, AnthroError> {
    subject.validate()?;
    let h = subject.height_m;
    let pelvis = table.scaled("pelvis", subject)?;
    let mt = table.scaled("middle_trunk", subject)?;
    let ut = table.scaled("upper_trunk", subject)?;
    let head = table.scaled("head", subject)?;
    let thigh = table.scaled("thigh_l", subject)?;
    let shank = table.scaled("shank_l", subject)?;
    let foot = table.scaled("foot_l", subject)?;
    let ua = table.scaled("upper_arm_l", subject)?;
    let fa = table.scaled("forearm_l", subject)?;
    let hand = table.scaled("hand_l", subject)?;

    // Trunk: middle trunk at z 0, upper trunk stacked, head on top.
    let (trunk_mass, trunk_com, trunk_inertia) =
        compose(&[(mt, 0.0), (ut, mt.length), (head, mt.length + ut.length)]);
    let trunk_len = mt.length + ut.length + head.length;
    // Arm: upper arm, forearm, hand hanging downward; compose along -z by
    // mirroring into +z and negating at the end.
    let (arm_mass_single, arm_com_down, arm_inertia_single) = compose(&[
        (ua, 0.0),
        (fa, ua.length),
        (hand, ua.length + fa.length),
    ]);
    let arm_len = ua.length + fa.length + hand.length;

    let ankle_h = ANKLE_HEIGHT_FRAC * h;
    let double = |s: Scaled| Scaled {
        mass: 2.0 * s.mass,
        inertia_zz: 2.0 * s.inertia_zz,
        ..s
    };
    let thigh2 = double(thigh);
    let shank2 = double(shank);
    let foot2 = double(foot);

    let mk_joint = |name: &str, anchor: Vec2| JointSpec {
        name: name.to_string(),
        kind: JointKind::Revolute,
        axis_sign: 1.0,
        limits: joint_limit_table(name),
        anchor,
    };
    let segments = vec![
        Segment {
            name: "pelvis".into(),
            mass: pelvis.mass,
            com_offset: Vec2::new(0.0, pelvis.com_along),
            inertia_zz: pelvis.inertia_zz,
            length: pelvis.length,
            parent: None,
            joint: JointSpec {
                name: String::new(),
                kind: JointKind::FloatingBase,
                axis_sign: 1.0,
                limits: (0.0, 0.0),
                anchor: Vec2::zeros(),
            },
        },
        Segment {
            name: "trunk".into(),
            mass: trunk_mass,
            com_offset: Vec2::new(0.0, trunk_com),
            inertia_zz: trunk_inertia,
            length: trunk_len,
            parent: Some(0),
            joint: mk_joint("lumbar", Vec2::new(0.0, pelvis.length)),
        },
        Segment {
            name: "thigh".into(),
            mass: thigh2.mass,
            com_offset: Vec2::new(0.0, -thigh2.com_along),
            inertia_zz: thigh2.inertia_zz,
            length: thigh2.length,
            parent: Some(0),
            joint: mk_joint("hip", Vec2::zeros()),
        },
        Segment {
            name: "shank".into(),
            mass: shank2.mass,
            com_offset: Vec2::new(0.0, -shank2.com_along),
            inertia_zz: shank2.inertia_zz,
            length: shank2.length,
            parent: Some(2),
            joint: mk_joint("knee", Vec2::new(0.0, -thigh.length)),
        },
        Segment {
            name: "foot".into(),
            mass: foot2.mass,
            com_offset: Vec2::new(
                foot.com_along - FOOT_HEEL_BACK_FRAC * foot.length,
                -0.5 * ankle_h,
            ),
            inertia_zz: foot2.inertia_zz,
            length: foot2.length,
            parent: Some(3),
            joint: mk_joint("ankle", Vec2::new(0.0, -shank.length)),
        },
        Segment {
            name: "arm".into(),
            mass: 2.0 * arm_mass_single,
            com_offset: Vec2::new(0.0, -arm_com_down),
            inertia_zz: 2.0 * arm_inertia_single,
            length: arm_len,
            parent: Some(1),
            joint: mk_joint("shoulder", Vec2::new(0.0, mt.length + ut.length)),
        },
    ];

    let heel_x = -FOOT_HEEL_BACK_FRAC * foot.length;
    let toe_x = (1.0 - FOOT_HEEL_BACK_FRAC) * foot.length;
    let mut points = BTreeMap::new();
    for (name, seg, local) in [
        ("heel", 4, Vec2::new(heel_x, -ankle_h)),
        ("toe", 4, Vec2::new(toe_x, -ankle_h)),
        ("hand", 5, Vec2::new(0.0, -arm_len)),
        ("exo_P", 0, Vec2::new(EXO_P_OFFSET[0], EXO_P_OFFSET[1])),
        (
            "exo_T",
            1,
            Vec2::new(EXO_T_X_OFFSET, mt.length + 0.5 * ut.length),
        ),
        (
            "exo_U",
            2,
            Vec2::new(EXO_U_X_OFFSET, -0.5 * thigh.length),
        ),
    ] {
        points.insert(name.to_string(), NamedPoint { segment: seg, local });
    }

    Ok(Model::new(
        "human6",
        segments,
        points,
        Vec2::new(0.0, -GRAVITY),
    )?)
}

/// Adds `total_mass` kg to the model as point masses at the COM of each
/// listed host segment, weighted by the given fractions (which must sum to
/// 1). Placing the extra mass exactly at a segment's COM leaves the COM and
/// the inertia about it unchanged, so only the segment masses grow.
pub fn distribute_exo_mass(
    model: &Model,
    total_mass: f64,
    distribution: &[(&str, f64)],
) -> Result<Model, AnthroError> {
    let sum: f64 = distribution.iter().map(|(_, f)| f).sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(AnthroError::BadDistribution(sum));
    }
    if !(total_mass.is_finite() && total_mass >= 0.0) {
        return Err(AnthroError::InvalidSubject(format!(
            "exoskeleton mass {total_mass} must be finite and >= 0"
        )));
    }
    let mut out = model.clone();
    for (name, frac) in distribution {
        let idx = model
            .segment_by_name(name)
            .ok_or_else(|| AnthroError::UnknownSegment(name.to_string()))?;
        out.segment_mut(idx).mass += frac * total_mass;
    }
    Ok(out)
}

/// Default exoskeleton mass distribution: half on the pelvis, an eighth each
/// on the thighs and the two trunk segments.
pub fn default_exo_distribution(model: &Model) -> Vec<(&'static str, f64)> {
    if model.segment_by_name("thigh_l").is_some() {
        vec![
            ("pelvis", 0.5),
            ("thigh_l", 0.125),
            ("thigh_r", 0.125),
            ("middle_trunk", 0.125),
            ("upper_trunk", 0.125),
        ]
    } else {
        // Smoke model: bilateral thighs are one segment, trunk is one segment.
        vec![("pelvis", 0.5), ("thigh", 0.25), ("trunk", 0.25)]
    }
}

/// Rigidly attaches `mass_kg`, split equally across the named points, to
/// their host segments. COM and inertia follow the parallel-axis
/// composition of a point mass at the attachment point.
pub fn attach_load(
    model: &Model,
    mass_kg: f64,
    points: &[&str],
) -> Result<Model, AnthroError> {
    if !(mass_kg.is_finite() && mass_kg >= 0.0) {
        return Err(AnthroError::InvalidSubject(format!(
            "load mass {mass_kg} must be finite and >= 0"
        )));
    }
    if points.is_empty() {
        return Err(AnthroError::InvalidSubject(
            "attach_load needs at least one point".into(),
        ));
    }
    let mut out = model.clone();
    let share = mass_kg / points.len() as f64;
    for name in points {
        let p = model.point(name)?.clone();
        let seg = out.segment_mut(p.segment);
        let m0 = seg.mass;
        let m1 = m0 + share;
        let com0 = seg.com_offset;
        let com1 = (m0 * com0 + share * p.local) / m1;
        seg.inertia_zz += m0 * (com0 - com1).norm_squared()
            + share * (p.local - com1).norm_squared();
        seg.com_offset = com1;
        seg.mass = m1;
    }
    Ok(out)
}

/// The standard subject: 35-year-old male, 1.72 m, 77.5 kg.
pub fn default_subject() -> SubjectParams {
    SubjectParams {
        height_m: 1.72,
        mass_kg: 77.5,
        age: 35,
        sex: Sex::Male,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn embedded_table_is_valid_and_sums_to_one() {
        let t = DeLevaTable::embedded(Sex::Male).unwrap();
        let sum: f64 = SEGMENT_NAMES.iter().map(|n| t.row(n).unwrap().mass_frac).sum();
        assert!((sum - 1.0).abs() <= 1e-6, "mass fractions sum to {sum}");
    }

    #[test]
    fn female_table_is_not_embedded() {
        assert!(matches!(
            DeLevaTable::embedded(Sex::Female),
            Err(AnthroError::NoFemaleTable)
        ));
    }

    #[test]
    fn full_model_has_expected_layout() {
        let subject = default_subject();
        let table = DeLevaTable::embedded(Sex::Male).unwrap();
        let m = build_human_model(&subject, &table).unwrap();
        assert_eq!(m.n_segments(), 16);
        assert_eq!(m.nq(), 18);
        assert_relative_eq!(m.total_mass(), 77.5, epsilon = 1e-9);
        for joint in ["lumbar", "thoracic", "neck", "hip_l", "wrist_r"] {
            assert!(m.segment_by_joint(joint).is_some(), "missing joint {joint}");
        }
        for point in ["heel_l", "toe_r", "hand_l", "exo_P_l", "exo_T_r", "exo_U_l"] {
            assert!(m.point(point).is_ok(), "missing point {point}");
        }
        // Thigh mass cross-check against the embedded fraction.
        let idx = m.segment_by_name("thigh_l").unwrap();
        let frac = table.row("thigh_l").unwrap().mass_frac;
        assert_relative_eq!(m.segment(idx).mass, frac * 77.5, epsilon = 1e-12);
    }

    #[test]
    fn scaling_is_linear_in_height() {
        let table = DeLevaTable::embedded(Sex::Male).unwrap();
        let mut s1 = default_subject();
        s1.height_m = 1.4;
        let mut s2 = s1;
        s2.height_m = 1.5 * 1.4;
        let m1 = build_human_model(&s1, &table).unwrap();
        let m2 = build_human_model(&s2, &table).unwrap();
        for i in 0..m1.n_segments() {
            assert_relative_eq!(
                1.5 * m1.segment(i).length,
                m2.segment(i).length,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn subject_bounds_are_enforced() {
        let table = DeLevaTable::embedded(Sex::Male).unwrap();
        let mut s = default_subject();
        s.height_m = 1.0;
        assert!(build_human_model(&s, &table).is_err());
        let mut s = default_subject();
        s.mass_kg = 220.0;
        assert!(build_human_model(&s, &table).is_err());
    }

    #[test]
    fn smoke_model_preserves_total_mass() {
        let subject = default_subject();
        let table = DeLevaTable::embedded(Sex::Male).unwrap();
        let m = build_smoke_model(&subject, &table).unwrap();
        assert_eq!(m.n_segments(), 6);
        assert_eq!(m.nq(), 8);
        assert_relative_eq!(m.total_mass(), 77.5, epsilon = 1e-9);
        for point in ["heel", "toe", "hand", "exo_P", "exo_T", "exo_U"] {
            assert!(m.point(point).is_ok(), "missing point {point}");
        }
    }

    #[test]
    fn exo_mass_distribution_adds_up_and_preserves_com_inertia() {
        let subject = default_subject();
        let table = DeLevaTable::embedded(Sex::Male).unwrap();
        let m = build_human_model(&subject, &table).unwrap();
        let with_exo = distribute_exo_mass(&m, 6.6, &default_exo_distribution(&m)).unwrap();
        assert_relative_eq!(with_exo.total_mass(), 77.5 + 6.6, epsilon = 1e-9);
        let i = m.segment_by_name("pelvis").unwrap();
        assert_eq!(with_exo.segment(i).com_offset, m.segment(i).com_offset);
        assert_eq!(with_exo.segment(i).inertia_zz, m.segment(i).inertia_zz);
        assert!(matches!(
            distribute_exo_mass(&m, 6.6, &[("pelvis", 0.9)]),
            Err(AnthroError::BadDistribution(_))
        ));
    }

    #[test]
    fn load_attachment_composes_with_parallel_axis() {
        let subject = default_subject();
        let table = DeLevaTable::embedded(Sex::Male).unwrap();
        let m = build_human_model(&subject, &table).unwrap();
        let loaded = attach_load(&m, 15.0, &["hand_l", "hand_r"]).unwrap();
        assert_relative_eq!(loaded.total_mass(), 92.5, epsilon = 1e-9);
        let i = m.segment_by_name("hand_l").unwrap();
        let s0 = m.segment(i);
        let s1 = loaded.segment(i);
        assert_relative_eq!(s1.mass, s0.mass + 7.5, epsilon = 1e-12);
        assert!(s1.inertia_zz >= s0.inertia_zz);
        // COM moves toward the attachment point.
        let p = m.point("hand_l").unwrap().local;
        assert!((s1.com_offset - p).norm() < (s0.com_offset - p).norm());
    }
}
