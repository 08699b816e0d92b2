//! Deterministic synthetic body model with the SMPL array schema.
//!
//! Each of the 24 joints owns a short tube of vertex rings running toward its
//! primary child (or past the tip, for leaf joints). Rings near a joint are
//! skinned partly to the parent, the middle rings fully to the owner.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{BodyModel, BodyModelData, UvEntry, NUM_BETAS};
use crate::error::Result;

pub const TOY_JOINT_COUNT: usize = 24;

/// SMPL kinematic tree.
const PARENTS: [i64; TOY_JOINT_COUNT] = [
    -1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21,
];

/// Rest joint locations in millimeters, y up, +x on the body's left.
const REST_JOINTS: [[f64; 3]; TOY_JOINT_COUNT] = [
    [0.0, 0.0, 0.0],
    [80.0, -80.0, 0.0],
    [-80.0, -80.0, 0.0],
    [0.0, 100.0, 0.0],
    [90.0, -420.0, 10.0],
    [-90.0, -420.0, 10.0],
    [0.0, 220.0, 0.0],
    [90.0, -780.0, -20.0],
    [-90.0, -780.0, -20.0],
    [0.0, 280.0, 0.0],
    [100.0, -830.0, 90.0],
    [-100.0, -830.0, 90.0],
    [0.0, 460.0, 0.0],
    [70.0, 380.0, 0.0],
    [-70.0, 380.0, 0.0],
    [0.0, 540.0, 20.0],
    [160.0, 400.0, 0.0],
    [-160.0, 400.0, 0.0],
    [400.0, 400.0, 0.0],
    [-400.0, 400.0, 0.0],
    [620.0, 400.0, 0.0],
    [-620.0, 400.0, 0.0],
    [690.0, 400.0, 0.0],
    [-690.0, 400.0, 0.0],
];

/// Joint whose position ends each joint's tube; `None` for leaves.
const PRIMARY_CHILD: [Option<usize>; TOY_JOINT_COUNT] = [
    Some(3),
    Some(4),
    Some(5),
    Some(6),
    Some(7),
    Some(8),
    Some(9),
    Some(10),
    Some(11),
    Some(12),
    None,
    None,
    Some(15),
    Some(16),
    Some(17),
    None,
    Some(18),
    Some(19),
    Some(20),
    Some(21),
    Some(22),
    Some(23),
    None,
    None,
];

/// Tube direction and length for leaf joints.
fn leaf_extent(joint: usize) -> Vector3<f64> {
    match joint {
        10 | 11 => Vector3::new(0.0, 0.0, 70.0),
        15 => Vector3::new(0.0, 130.0, 0.0),
        22 => Vector3::new(60.0, 0.0, 0.0),
        23 => Vector3::new(-60.0, 0.0, 0.0),
        _ => unreachable!("joint {joint} is not a leaf"),
    }
}

const RADII: [f64; TOY_JOINT_COUNT] = [
    130.0, 80.0, 80.0, 120.0, 55.0, 55.0, 125.0, 45.0, 45.0, 130.0, 35.0, 35.0, 50.0, 50.0, 50.0, 90.0, 50.0, 50.0,
    40.0, 40.0, 30.0, 30.0, 28.0, 28.0,
];

/// Coarse part labels: torso, head, left/right arm, left/right leg.
const PART_CHAINS: [&[usize]; 6] = [
    &[0, 3, 6, 9, 13, 14],
    &[12, 15],
    &[16, 18, 20, 22],
    &[17, 19, 21, 23],
    &[1, 4, 7, 10],
    &[2, 5, 8, 11],
];

/// Joints feeding the 14 LSP-ordered keypoints. The last entry marks the
/// head top, taken from the tip of the head tube instead of a joint ring.
pub const LSP_KEYPOINT_JOINTS: [usize; 14] = [8, 5, 2, 1, 4, 7, 21, 19, 17, 16, 18, 20, 12, 15];

const RING_FRACTIONS: [f64; 4] = [0.0, 0.3, 0.6, 0.9];
const RING_SIZE: usize = 8;
const VERTS_PER_JOINT: usize = RING_FRACTIONS.len() * RING_SIZE + 1;

/// Generator settings for [`toy_model`].
#[derive(Clone, Copy, Debug)]
pub struct ToyModelSpec {
    pub seed: u64,
    /// Rows of the downsampling matrix.
    pub sample_count: usize,
}

impl Default for ToyModelSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            sample_count: 431,
        }
    }
}

pub fn toy_model(spec: ToyModelSpec) -> Result<BodyModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let j = TOY_JOINT_COUNT;
    let n = j * VERTS_PER_JOINT;
    let rest: Vec<Vector3<f64>> = REST_JOINTS.iter().map(|p| Vector3::new(p[0], p[1], p[2])).collect();

    let mut template = Vec::with_capacity(n);
    let mut radial = Vec::with_capacity(n);
    let mut owner = Vec::with_capacity(n);
    let mut weights = DMatrix::zeros(n, j);
    let mut uv_table = Vec::with_capacity(n);
    let mut faces = Vec::new();

    for joint in 0..j {
        let axis = match PRIMARY_CHILD[joint] {
            Some(c) => rest[c] - rest[joint],
            None => leaf_extent(joint),
        };
        let (e1, e2) = perpendicular_basis(&axis);
        let parent = usize::try_from(PARENTS[joint]).ok();
        let (part, chain_pos, chain_len) = part_of(joint);
        let base = template.len();

        for (ring, &f) in RING_FRACTIONS.iter().enumerate() {
            for k in 0..RING_SIZE {
                let angle = 2.0 * PI * k as f64 / RING_SIZE as f64;
                let dir = angle.cos() * e1 + angle.sin() * e2;
                let r = RADII[joint] * rng.random_range(0.92..1.08);
                template.push(rest[joint] + f * axis + r * dir);
                radial.push(dir);
                owner.push(joint);
                let row = template.len() - 1;
                match (ring, parent, PRIMARY_CHILD[joint]) {
                    (0, Some(p), _) => {
                        weights[(row, joint)] = 0.5;
                        weights[(row, p)] = 0.5;
                    }
                    (3, _, Some(c)) => {
                        weights[(row, joint)] = 0.75;
                        weights[(row, c)] = 0.25;
                    }
                    _ => weights[(row, joint)] = 1.0,
                }
                uv_table.push(UvEntry {
                    part,
                    u: k as f64 / RING_SIZE as f64,
                    v: (chain_pos as f64 + f) / chain_len as f64,
                });
            }
        }
        // tip vertex closing the tube
        template.push(rest[joint] + axis);
        radial.push(Vector3::zeros());
        owner.push(joint);
        let tip = template.len() - 1;
        match PRIMARY_CHILD[joint] {
            Some(c) => {
                weights[(tip, joint)] = 0.5;
                weights[(tip, c)] = 0.5;
            }
            None => weights[(tip, joint)] = 1.0,
        }
        uv_table.push(UvEntry {
            part,
            u: 0.5,
            v: (chain_pos + 1) as f64 / chain_len as f64,
        });

        for ring in 0..RING_FRACTIONS.len() - 1 {
            for k in 0..RING_SIZE {
                let a = base + ring * RING_SIZE + k;
                let b = base + ring * RING_SIZE + (k + 1) % RING_SIZE;
                faces.push([a, b, a + RING_SIZE]);
                faces.push([b, b + RING_SIZE, a + RING_SIZE]);
            }
        }
        let last = base + (RING_FRACTIONS.len() - 1) * RING_SIZE;
        for k in 0..RING_SIZE {
            faces.push([last + k, last + (k + 1) % RING_SIZE, tip]);
        }
    }

    let blendshapes = build_blendshapes(&template, &radial, &owner, &mut rng);

    let ring0 = |joint: usize| (0..RING_SIZE).map(move |k| joint * VERTS_PER_JOINT + k);
    let mut joint_regressor = DMatrix::zeros(j, n);
    for joint in 0..j {
        for v in ring0(joint) {
            joint_regressor[(joint, v)] = 1.0 / RING_SIZE as f64;
        }
    }
    let kp = LSP_KEYPOINT_JOINTS.len();
    let mut keypoint_regressor = DMatrix::zeros(kp, n);
    for (row, &joint) in LSP_KEYPOINT_JOINTS.iter().enumerate() {
        if row == kp - 1 {
            keypoint_regressor[(row, joint * VERTS_PER_JOINT + VERTS_PER_JOINT - 1)] = 1.0;
        } else {
            for v in ring0(joint) {
                keypoint_regressor[(row, v)] = 1.0 / RING_SIZE as f64;
            }
        }
    }

    let picks = farthest_point_sampling(&template, spec.sample_count.min(n));
    let mut downsample = DMatrix::zeros(picks.len(), n);
    for (row, &v) in picks.iter().enumerate() {
        downsample[(row, v)] = 1.0;
    }

    BodyModel::new(BodyModelData {
        template,
        blendshapes,
        weights,
        parents: PARENTS.iter().map(|&p| usize::try_from(p).ok()).collect(),
        joint_regressor,
        keypoint_regressor,
        downsample,
        faces,
        uv_table,
    })
}

fn part_of(joint: usize) -> (u32, usize, usize) {
    for (i, chain) in PART_CHAINS.iter().enumerate() {
        if let Some(pos) = chain.iter().position(|&c| c == joint) {
            return (i as u32 + 1, pos, chain.len());
        }
    }
    unreachable!("joint {joint} has no part")
}

fn perpendicular_basis(axis: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let d = axis.normalize();
    let helper = if d.z.abs() < 0.9 { Vector3::z() } else { Vector3::x() };
    let e1 = d.cross(&helper).normalize();
    let e2 = d.cross(&e1);
    (e1, e2)
}

/// β₀ scales the body about the pelvis, β₁ inflates every tube, the rest
/// move whole tubes along random directions and vary their girth.
fn build_blendshapes(
    template: &[Vector3<f64>],
    radial: &[Vector3<f64>],
    owner: &[usize],
    rng: &mut ChaCha8Rng,
) -> Vec<[Vector3<f64>; NUM_BETAS]> {
    let normal = Normal::new(0.0, 6.0).expect("valid sigma");
    let offsets: Vec<[Vector3<f64>; NUM_BETAS]> = (0..TOY_JOINT_COUNT)
        .map(|_| std::array::from_fn(|_| Vector3::from_fn(|_, _| normal.sample(rng))))
        .collect();
    let girth: Vec<[f64; NUM_BETAS]> = (0..TOY_JOINT_COUNT)
        .map(|_| std::array::from_fn(|_| rng.random_range(-4.0..4.0)))
        .collect();

    template
        .iter()
        .zip(radial)
        .zip(owner)
        .map(|((t, r), &joint)| {
            std::array::from_fn(|k| match k {
                0 => 0.04 * t,
                1 => 8.0 * r,
                _ => offsets[joint][k] + girth[joint][k] * r,
            })
        })
        .collect()
}

/// Greedy farthest-point subset, seeded at vertex 0; ties go to the lower index.
fn farthest_point_sampling(points: &[Vector3<f64>], count: usize) -> Vec<usize> {
    if count == 0 || points.is_empty() {
        return Vec::new();
    }
    let mut picks = vec![0];
    let mut dist: Vec<f64> = points.iter().map(|p| (p - points[0]).norm_squared()).collect();
    while picks.len() < count {
        let (next, _) = dist.iter().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |best, (i, &d)| if d > best.1 { (i, d) } else { best },
        );
        picks.push(next);
        for (i, p) in points.iter().enumerate() {
            dist[i] = dist[i].min((p - points[next]).norm_squared());
        }
    }
    picks
}
