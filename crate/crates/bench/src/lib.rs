//! Seeded synthetic inputs shared by the benchmarks.

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use raylight::GaussianScene;

/// `n` random degree-1 Gaussians inside a 6-unit cube around the origin.
pub fn random_scene(seed: u64, n: usize) -> GaussianScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means = Vec::with_capacity(n);
    let mut scales = Vec::with_capacity(n);
    let mut rots = Vec::with_capacity(n);
    let mut ops = Vec::with_capacity(n);
    let mut sh = Vec::with_capacity(4 * n);
    for _ in 0..n {
        means.push(Vector3::from_fn(|_, _| rng.gen_range(-3.0..3.0)));
        scales.push(Vector3::from_fn(|_, _| rng.gen_range(0.05..0.4)));
        let q = UnitQuaternion::from_quaternion(Quaternion::new(
            rng.gen_range(0.1..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ));
        rots.push([q.w, q.i, q.j, q.k]);
        ops.push(rng.gen_range(0.2..1.0));
        for _ in 0..4 {
            sh.push([
                rng.gen_range(-1.0..1.0f32),
                rng.gen_range(-1.0..1.0f32),
                rng.gen_range(-1.0..1.0f32),
            ]);
        }
    }
    GaussianScene::new(means, scales, rots, ops, 1, sh).expect("generated scene is valid")
}
