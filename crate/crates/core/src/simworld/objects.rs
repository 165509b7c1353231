//! The nine theme-object classes and their resting habitats.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::geometry::{self, angles_close, Vec3};
use crate::error::Error;

/// Tolerance for matching a rotation against a rest orientation.
pub const REST_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassName {
    Cube,
    Sphere,
    Cylinder,
    Capsule,
    Egg,
    RectPrism,
    Cone,
    Pyramid,
    SmallCube,
}

impl ClassName {
    pub const ALL: [ClassName; 9] = [
        ClassName::Cube,
        ClassName::Sphere,
        ClassName::Cylinder,
        ClassName::Capsule,
        ClassName::Egg,
        ClassName::RectPrism,
        ClassName::Cone,
        ClassName::Pyramid,
        ClassName::SmallCube,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassName::Cube => "cube",
            ClassName::Sphere => "sphere",
            ClassName::Cylinder => "cylinder",
            ClassName::Capsule => "capsule",
            ClassName::Egg => "egg",
            ClassName::RectPrism => "rect_prism",
            ClassName::Cone => "cone",
            ClassName::Pyramid => "pyramid",
            ClassName::SmallCube => "small_cube",
        }
    }

    pub fn index(self) -> usize {
        ClassName::ALL.iter().position(|&c| c == self).unwrap()
    }

    pub fn class(self) -> ObjectClass {
        ObjectClass::new(self)
    }
}

impl fmt::Display for ClassName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        ClassName::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == norm || (norm == "rectangular_prism" && *c == ClassName::RectPrism))
            .ok_or_else(|| Error::InvalidInput(format!("unknown object class `{s}`")))
    }
}

/// Parses a comma-separated class list such as `cube,sphere`.
pub fn parse_class_list(s: &str) -> Result<Vec<ClassName>, Error> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(str::parse).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub fn local(self) -> Vec3 {
        match self {
            Axis::X => geometry::LOCAL_X,
            Axis::Y => geometry::LOCAL_Y,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Contact {
    Flat,
    Round,
}

impl Contact {
    pub fn as_str(self) -> &'static str {
        match self {
            Contact::Flat => "flat",
            Contact::Round => "round",
        }
    }
}

/// How the rotations of a rest habitat are parameterised.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Orientation {
    /// One Euler triple.
    Fixed(Vec3),
    /// Lying along world X, free to roll about its own X axis: `(θ, 0, 0)`.
    RollAboutX,
    /// Any orientation at all (sphere).
    Free,
}

/// A settled habitat: how the object touches the surface beneath it.
#[derive(Clone, Debug)]
pub struct RestPose {
    pub label: &'static str,
    pub orientation: Orientation,
    pub contact: Contact,
    /// Horizontal half-extents of the flat contact patch (zero for round contacts).
    pub patch: [f64; 2],
    /// Horizontal offset of the centre of mass from the patch centre.
    pub com_offset: [f64; 2],
    /// Height of the object's centre above the supporting plane.
    pub center_height: f64,
    /// Horizontal reach from the centre to the object's side, used when it lands beside the cube.
    pub reach: f64,
    /// Probability of rolling away under jitter when the contact is round.
    pub roll_probability: f64,
}

impl RestPose {
    /// The up-offset this habitat fixes, if any.
    pub fn up_offset(&self) -> Option<f64> {
        match self.orientation {
            Orientation::Fixed(e) => Some(geometry::up_offset(e)),
            _ => None,
        }
    }

    pub fn matches(&self, rotation: Vec3) -> bool {
        match self.orientation {
            Orientation::Fixed(e) => (0..3).all(|i| angles_close(rotation[i], e[i], REST_TOLERANCE)),
            Orientation::RollAboutX => {
                angles_close(rotation[1], 0.0, REST_TOLERANCE) && angles_close(rotation[2], 0.0, REST_TOLERANCE)
            }
            Orientation::Free => rotation.iter().all(|a| a.is_finite()),
        }
    }
}

/// Geometric description of a theme object.
#[derive(Clone, Debug)]
pub struct ObjectClass {
    pub name: ClassName,
    /// Body-frame half extents in world units.
    pub half_extents: Vec3,
    pub sym_axis: Option<Axis>,
    pub rests: Vec<RestPose>,
    /// Relative weights of the starting habitat when a scene is re-randomised.
    pub initial_weights: Vec<f64>,
    /// `transitions[i][j]`: relative weight of landing in habitat `j` after falling from `i`.
    pub transitions: Vec<Vec<f64>>,
}

/// Side of a square with the same area as a unit-diameter disc, halved.
const DISC_PATCH: f64 = 0.443_113_462_726_379_1;
/// Centre height of a cone or pyramid lying on a slanted face.
const SLANT_HEIGHT: f64 = 0.335;
const SLANT_REST: f64 = 2.0 * PI / 3.0;

fn flat(label: &'static str, e: Vec3, patch: [f64; 2], h: f64, reach: f64) -> RestPose {
    RestPose {
        label,
        orientation: Orientation::Fixed(e),
        contact: Contact::Flat,
        patch,
        com_offset: [0.0, 0.0],
        center_height: h,
        reach,
        roll_probability: 0.0,
    }
}

fn round(label: &'static str, orientation: Orientation, h: f64, reach: f64, roll: f64) -> RestPose {
    RestPose {
        label,
        orientation,
        contact: Contact::Round,
        patch: [0.0, 0.0],
        com_offset: [0.0, 0.0],
        center_height: h,
        reach,
        roll_probability: roll,
    }
}

fn box_rests(s: f64) -> Vec<RestPose> {
    let p = [s, s];
    vec![
        flat("upright", [0.0, 0.0, 0.0], p, s, s),
        flat("front", [FRAC_PI_2, 0.0, 0.0], p, s, s),
        flat("inverted", [PI, 0.0, 0.0], p, s, s),
        flat("back", [3.0 * FRAC_PI_2, 0.0, 0.0], p, s, s),
        flat("left", [0.0, 0.0, FRAC_PI_2], p, s, s),
        flat("right", [0.0, 0.0, 3.0 * FRAC_PI_2], p, s, s),
    ]
}

impl ObjectClass {
    pub fn new(name: ClassName) -> Self {
        let z = [0.0, 0.0, 0.0];
        let (half_extents, sym_axis, rests, initial_weights, transitions): (Vec3, _, Vec<RestPose>, Vec<f64>, Vec<Vec<f64>>) =
            match name {
                ClassName::Cube | ClassName::SmallCube => {
                    let s = if name == ClassName::Cube { 0.5 } else { 0.25 };
                    (
                        [s, s, s],
                        None,
                        box_rests(s),
                        vec![1.0; 6],
                        vec![vec![1.0; 6]; 6],
                    )
                }
                ClassName::RectPrism => {
                    let lying = [0.75, 0.5];
                    let rests = vec![
                        flat("lying", z, lying, 0.5, 0.75),
                        flat("lying_front", [FRAC_PI_2, 0.0, 0.0], lying, 0.5, 0.75),
                        flat("lying_inverted", [PI, 0.0, 0.0], lying, 0.5, 0.75),
                        flat("lying_back", [3.0 * FRAC_PI_2, 0.0, 0.0], lying, 0.5, 0.75),
                        flat("on_end_left", [0.0, 0.0, FRAC_PI_2], [0.5, 0.5], 0.75, 0.5),
                        flat("on_end_right", [0.0, 0.0, 3.0 * FRAC_PI_2], [0.5, 0.5], 0.75, 0.5),
                    ];
                    let w = vec![1.0, 1.0, 1.0, 1.0, 0.5, 0.5];
                    let t = vec![1.0, 1.0, 1.0, 1.0, 0.2, 0.2];
                    ([0.75, 0.5, 0.5], Some(Axis::X), rests, w, vec![t; 6])
                }
                ClassName::Sphere => (
                    [0.5, 0.5, 0.5],
                    None,
                    vec![round("any", Orientation::Free, 0.5, 0.5, 1.0)],
                    vec![1.0],
                    vec![vec![1.0]],
                ),
                ClassName::Egg => (
                    [0.75, 0.5, 0.5],
                    Some(Axis::X),
                    vec![round("lying", Orientation::RollAboutX, 0.5, 0.75, 1.0)],
                    vec![1.0],
                    vec![vec![1.0]],
                ),
                ClassName::Cylinder => {
                    let p = [DISC_PATCH, DISC_PATCH];
                    let rests = vec![
                        flat("upright", z, p, 0.5, 0.5),
                        flat("inverted", [PI, 0.0, 0.0], p, 0.5, 0.5),
                        round("horizontal_left", Orientation::Fixed([0.0, 0.0, FRAC_PI_2]), 0.5, 0.5, 0.9),
                        round("horizontal_right", Orientation::Fixed([0.0, 0.0, 3.0 * FRAC_PI_2]), 0.5, 0.5, 0.9),
                    ];
                    let t = vec![
                        vec![0.2, 0.0, 0.4, 0.4],
                        vec![0.0, 0.2, 0.4, 0.4],
                        vec![0.05, 0.05, 0.45, 0.45],
                        vec![0.05, 0.05, 0.45, 0.45],
                    ];
                    ([0.5, 0.5, 0.5], Some(Axis::Y), rests, vec![0.35, 0.15, 0.25, 0.25], t)
                }
                ClassName::Capsule => {
                    let rests = vec![
                        round("vertical", Orientation::Fixed(z), 0.75, 0.4, 0.98),
                        round("vertical_inverted", Orientation::Fixed([PI, 0.0, 0.0]), 0.75, 0.4, 0.98),
                        round("horizontal_left", Orientation::Fixed([0.0, 0.0, FRAC_PI_2]), 0.4, 0.75, 0.85),
                        round("horizontal_right", Orientation::Fixed([0.0, 0.0, 3.0 * FRAC_PI_2]), 0.4, 0.75, 0.85),
                    ];
                    let t = vec![
                        vec![0.05, 0.05, 0.45, 0.45],
                        vec![0.05, 0.05, 0.45, 0.45],
                        vec![0.025, 0.025, 0.475, 0.475],
                        vec![0.025, 0.025, 0.475, 0.475],
                    ];
                    ([0.4, 0.75, 0.4], Some(Axis::Y), rests, vec![1.0; 4], t)
                }
                ClassName::Cone => {
                    let rests = vec![
                        flat("upright", z, [DISC_PATCH, DISC_PATCH], 0.25, 0.5),
                        round("side_left", Orientation::Fixed([0.0, 0.0, SLANT_REST]), SLANT_HEIGHT, 0.6, 0.7),
                        round("side_right", Orientation::Fixed([0.0, 0.0, 2.0 * SLANT_REST]), SLANT_HEIGHT, 0.6, 0.7),
                    ];
                    let t = vec![vec![0.2, 0.4, 0.4], vec![0.1, 0.45, 0.45], vec![0.1, 0.45, 0.45]];
                    ([0.5, 0.5, 0.5], Some(Axis::Y), rests, vec![0.5, 0.25, 0.25], t)
                }
                ClassName::Pyramid => {
                    let mut left = flat("side_left", [0.0, 0.0, SLANT_REST], [0.35, 0.3], SLANT_HEIGHT, 0.6);
                    left.com_offset = [0.1, 0.0];
                    let mut right = flat("side_right", [0.0, 0.0, 2.0 * SLANT_REST], [0.35, 0.3], SLANT_HEIGHT, 0.6);
                    right.com_offset = [-0.1, 0.0];
                    let rests = vec![flat("upright", z, [0.5, 0.5], 0.25, 0.5), left, right];
                    let t = vec![vec![0.3, 0.35, 0.35], vec![0.4, 0.3, 0.3], vec![0.4, 0.3, 0.3]];
                    ([0.5, 0.5, 0.5], Some(Axis::Y), rests, vec![0.5, 0.25, 0.25], t)
                }
            };
        ObjectClass { name, half_extents, sym_axis, rests, initial_weights, transitions }
    }

    /// Index of the habitat a rotation belongs to, if it is a rest rotation.
    pub fn rest_index(&self, rotation: Vec3) -> Option<usize> {
        self.rests.iter().position(|r| r.matches(rotation))
    }

    /// `(label, up-offset)` for each habitat; free habitats have no fixed up-offset.
    pub fn rest_orientations(&self) -> Vec<(&'static str, Option<f64>)> {
        self.rests.iter().map(|r| (r.label, r.up_offset())).collect()
    }

    /// Contact types this object can present.
    pub fn face_profile(&self) -> Vec<Contact> {
        let mut out: Vec<Contact> = Vec::new();
        for r in &self.rests {
            if !out.contains(&r.contact) {
                out.push(r.contact);
            }
        }
        out
    }

    /// World-space direction of the rotational symmetry axis for a rotation.
    pub fn world_sym_axis(&self, rotation: Vec3) -> Option<Vec3> {
        self.sym_axis.map(|a| geometry::rotate(rotation, a.local()))
    }
}
