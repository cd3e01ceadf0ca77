//! Dot-product adjoint identities for every linear piece of the forward
//! model: blur, keystone warp, decimation, spectral weighting, and the
//! composed per-channel operator. Each identity is checked over ten seeded
//! random trials at two image sizes and must hold to a relative 1e-8.

use keysr_core::operators::{
    convolve, convolve_adjoint, decimate, decimate_adjoint, make_gaussian_psf, make_rect_psf,
    warp_shift, warp_shift_adjoint, ChannelModel,
};
use keysr_core::raster::{ImageGrid, KeystoneModel};
use keysr_core::rng;

const SEEDS: u64 = 10;
const SIZES: [usize; 2] = [16, 32];
const REL_TOL: f64 = 1e-8;

fn rand_grid(rows: usize, cols: usize, seed: u64, stream: u64) -> ImageGrid {
    ImageGrid::from_fn(rows, cols, |r, c| {
        2.0 * rng::uniform(seed, stream, (r * cols + c) as u64) - 1.0
    })
}

fn dot(a: &ImageGrid, b: &ImageGrid) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

fn assert_identity(lhs: f64, rhs: f64, what: &str, seed: u64, n: usize) {
    let scale = lhs.abs().max(rhs.abs()).max(1e-12);
    assert!(
        (lhs - rhs).abs() <= REL_TOL * scale,
        "{what}: <u, Av> = {lhs} but <A'u, v> = {rhs} at {n}x{n}, seed {seed}"
    );
}

#[test]
fn blur_adjoint_identity() {
    for &n in &SIZES {
        for seed in 0..SEEDS {
            let psf = if seed % 2 == 0 {
                make_gaussian_psf(0.5 + 0.1 * seed as f64, 1 + (seed as usize % 3)).unwrap()
            } else {
                make_rect_psf(2 + seed as usize % 3).unwrap()
            };
            let v = rand_grid(n, n, seed, 1);
            let u = rand_grid(n, n, seed, 2);
            let lhs = dot(&u, &convolve(&v, &psf).unwrap());
            let rhs = dot(&convolve_adjoint(&u, &psf).unwrap(), &v);
            assert_identity(lhs, rhs, "blur", seed, n);
        }
    }
}

#[test]
fn warp_adjoint_identity() {
    for &n in &SIZES {
        for seed in 0..SEEDS {
            let shifts: Vec<(f64, f64)> = (0..n)
                .map(|c| {
                    let dx = 3.0 * rng::uniform(seed, 3, c as u64) - 1.5;
                    let dy = 3.0 * rng::uniform(seed, 4, c as u64) - 1.5;
                    (dx, dy)
                })
                .collect();
            let v = rand_grid(n, n, seed, 5);
            let u = rand_grid(n, n, seed, 6);
            let lhs = dot(&u, &warp_shift(&v, &shifts).unwrap());
            let rhs = dot(&warp_shift_adjoint(&u, &shifts).unwrap(), &v);
            assert_identity(lhs, rhs, "warp", seed, n);
        }
    }
}

#[test]
fn decimation_adjoint_identity() {
    for &n in &SIZES {
        for seed in 0..SEEDS {
            for scale in [2usize, 4] {
                let v = rand_grid(n, n, seed, 7);
                let u = rand_grid(n / scale, n / scale, seed, 8);
                let lhs = dot(&u, &decimate(&v, scale).unwrap());
                let rhs = dot(&decimate_adjoint(&u, scale).unwrap(), &v);
                assert_identity(lhs, rhs, "decimation", seed, n);
            }
        }
    }
}

#[test]
fn spectral_weight_adjoint_identity() {
    // With no blur, no shift, and scale 1 the channel operator reduces to the
    // diagonal coefficient multiply, which must be self-adjoint.
    for &n in &SIZES {
        for seed in 0..SEEDS {
            let keystone = KeystoneModel::zero(1, n, 0).unwrap();
            let coeffs = ImageGrid::from_fn(n, n, |r, c| {
                0.05 + 0.95 * rng::uniform(seed, 9, (r * n + c) as u64)
            });
            let model =
                ChannelModel::new(0, keysr_core::operators::Psf::identity(), &keystone, 1, coeffs)
                    .unwrap();
            let v = rand_grid(n, n, seed, 10);
            let u = rand_grid(n, n, seed, 11);
            let lhs = dot(&u, &model.forward(&v).unwrap());
            let rhs = dot(&model.adjoint(&u).unwrap(), &v);
            assert_identity(lhs, rhs, "spectral weighting", seed, n);
        }
    }
}

#[test]
fn composed_channel_adjoint_identity() {
    let scale = 2usize;
    for &n in &SIZES {
        let lr = n / scale;
        for seed in 0..SEEDS {
            let amplitude = 0.6 * (2.0 * rng::uniform(seed, 12, 0) - 1.0);
            let line_offset = 0.3 * (2.0 * rng::uniform(seed, 13, 0) - 1.0);
            let center = (lr - 1) as f64 / 2.0;
            let keystone = KeystoneModel::from_fn(2, lr, 0, |band, col| {
                if band == 1 {
                    (amplitude * (col as f64 - center) / center, line_offset)
                } else {
                    (0.0, 0.0)
                }
            })
            .unwrap();
            let psf = make_gaussian_psf(0.6 + 0.05 * seed as f64, 2).unwrap();
            let coeffs = ImageGrid::from_fn(lr, lr, |r, c| {
                0.05 + 0.95 * rng::uniform(seed, 14, (r * lr + c) as u64)
            });
            let model = ChannelModel::new(1, psf, &keystone, scale, coeffs).unwrap();
            let v = rand_grid(n, n, seed, 15);
            let u = rand_grid(lr, lr, seed, 16);
            let lhs = dot(&u, &model.forward(&v).unwrap());
            let rhs = dot(&model.adjoint(&u).unwrap(), &v);
            assert_identity(lhs, rhs, "composed channel", seed, n);
        }
    }
}
