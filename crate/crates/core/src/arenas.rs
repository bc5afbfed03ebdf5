//! Synthetic test arenas and random height-field terrains.
//!
//! The arenas are rebuilt from stated dimensions of common rescue-robot test
//! courses (17 cm / 16 degree ramps, 10 x 10 cm bars, 15 cm and 26.5 cm
//! steps, slanted boxes up to 35 cm); they are analogs, not survey data.

use nalgebra::{Point2, Point3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::{lit, Real};
use crate::sdf_map::{Bounds, Heightmap, MapError, Rise, SdfPrimitive, TerrainScene};

pub const RAMP_HEIGHT: f64 = 0.17;
pub const RAMP_INCLINE_DEG: f64 = 16.0;
pub const BAR_SIZE: f64 = 0.10;
pub const LOW_STEP: f64 = 0.15;
pub const HIGH_STEP: f64 = 0.265;
pub const MAX_BOX_HEIGHT: f64 = 0.35;

/// Names accepted by [`arena`].
pub const ARENA_NAMES: &[&str] = &["continuous-ramps", "curb", "hurdles", "elevated-ramps"];

/// Builds a named arena; `seed` only affects the randomized ones.
pub fn arena<T: Real>(name: &str, seed: u64) -> Result<TerrainScene<T>, MapError> {
    match name {
        "continuous-ramps" => continuous_ramps(),
        "curb" => curb(),
        "hurdles" => hurdles(),
        "elevated-ramps" => elevated_ramps(seed),
        other => Err(MapError::InvalidScene(format!("unknown arena '{other}'"))),
    }
}

fn bounds<T: Real>(x: f64, y: f64, z_lo: f64, z_hi: f64) -> Bounds<T> {
    Bounds::new(
        Point3::new(T::zero(), T::zero(), lit(z_lo)),
        Point3::new(lit(x), lit(y), lit(z_hi)),
    )
}

fn wedge<T: Real>(
    min: [f64; 2],
    max: [f64; 2],
    height: f64,
    rise: Rise,
) -> Result<SdfPrimitive<T>, MapError> {
    SdfPrimitive::slanted_box(
        [lit(min[0]), lit(min[1])],
        [lit(max[0]), lit(max[1])],
        T::zero(),
        T::zero(),
        lit(height),
        rise,
    )
}

/// Ridges made of two opposing 16 degree wedges, 17 cm high, on a 4 x 4
/// checkerboard of 1.2 m cells alternating between x- and y-aligned ridges.
pub fn continuous_ramps<T: Real>() -> Result<TerrainScene<T>, MapError> {
    let cell = 1.2;
    let run = RAMP_HEIGHT / RAMP_INCLINE_DEG.to_radians().tan();
    let margin = (cell - 2.0 * run) / 2.0;
    let mut prims = vec![SdfPrimitive::ground(T::zero())];
    for i in 0..4 {
        for j in 0..4 {
            let (x0, y0) = (i as f64 * cell, j as f64 * cell);
            if (i + j) % 2 == 0 {
                let a = x0 + margin;
                prims.push(wedge(
                    [a, y0],
                    [a + run, y0 + cell],
                    RAMP_HEIGHT,
                    Rise::PosX,
                )?);
                prims.push(wedge(
                    [a + run, y0],
                    [a + 2.0 * run, y0 + cell],
                    RAMP_HEIGHT,
                    Rise::NegX,
                )?);
            } else {
                let b = y0 + margin;
                prims.push(wedge(
                    [x0, b],
                    [x0 + cell, b + run],
                    RAMP_HEIGHT,
                    Rise::PosY,
                )?);
                prims.push(wedge(
                    [x0, b + run],
                    [x0 + cell, b + 2.0 * run],
                    RAMP_HEIGHT,
                    Rise::NegY,
                )?);
            }
        }
    }
    Ok(TerrainScene::new("continuous-ramps", prims).with_bounds(bounds(4.8, 4.8, -0.3, 1.5)))
}

/// Three 10 x 10 cm bars across the x direction, 0.8 m apart.
pub fn curb<T: Real>() -> Result<TerrainScene<T>, MapError> {
    let mut prims = vec![SdfPrimitive::ground(T::zero())];
    for k in 0..3 {
        let x = 1.2 + 0.8 * k as f64;
        prims.push(SdfPrimitive::cuboid(
            Point3::new(lit(x), lit(0.2), T::zero()),
            Point3::new(lit(x + BAR_SIZE), lit(2.0), lit(BAR_SIZE)),
        ));
    }
    Ok(TerrainScene::new("curb", prims).with_bounds(bounds(4.0, 2.2, -0.3, 1.5)))
}

/// A 15 cm and a 26.5 cm step, each 0.4 m deep, across the x direction.
pub fn hurdles<T: Real>() -> Result<TerrainScene<T>, MapError> {
    let prims = vec![
        SdfPrimitive::ground(T::zero()),
        SdfPrimitive::cuboid(
            Point3::new(lit(1.2), lit(0.2), T::zero()),
            Point3::new(lit(1.6), lit(2.0), lit(LOW_STEP)),
        ),
        SdfPrimitive::cuboid(
            Point3::new(lit(2.6), lit(0.2), T::zero()),
            Point3::new(lit(3.0), lit(2.0), lit(HIGH_STEP)),
        ),
    ];
    Ok(TerrainScene::new("hurdles", prims).with_bounds(bounds(4.2, 2.2, -0.3, 1.5)))
}

/// An 8 x 8 field of 0.6 m slanted boxes with 16 degree tops and random
/// heights (at most 35 cm) and rise directions.
pub fn elevated_ramps<T: Real>(seed: u64) -> Result<TerrainScene<T>, MapError> {
    let cell = 0.6;
    let rise_h = cell * RAMP_INCLINE_DEG.to_radians().tan();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs = [Rise::PosX, Rise::NegX, Rise::PosY, Rise::NegY];
    let mut prims = vec![SdfPrimitive::ground(T::zero())];
    for i in 0..8 {
        for j in 0..8 {
            let low = rng.gen_range(0.0..=MAX_BOX_HEIGHT - rise_h);
            let rise = dirs[rng.gen_range(0..dirs.len())];
            let (x0, y0) = (i as f64 * cell, j as f64 * cell);
            prims.push(SdfPrimitive::slanted_box(
                [lit(x0), lit(y0)],
                [lit(x0 + cell), lit(y0 + cell)],
                T::zero(),
                lit(low),
                lit(low + rise_h),
                rise,
            )?);
        }
    }
    Ok(TerrainScene::new("elevated-ramps", prims).with_bounds(bounds(4.8, 4.8, -0.3, 1.5)))
}

/// Shape of a random height-field terrain.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomTerrainParams {
    /// Side length of the square terrain (m).
    pub size: f64,
    pub cell_size: f64,
    /// Steepest slope of the smooth part (degrees).
    pub max_slope_deg: f64,
    /// Tallest step (m).
    pub max_step: f64,
    pub max_steps: usize,
    pub bumps: usize,
}

impl Default for RandomTerrainParams {
    fn default() -> Self {
        Self {
            size: 4.0,
            cell_size: 0.1,
            max_slope_deg: 25.0,
            max_step: HIGH_STEP,
            max_steps: 2,
            bumps: 6,
        }
    }
}

/// Smooth random hills, rescaled so that no grid slope exceeds the limit,
/// plus up to `max_steps` straight terrace steps.
pub fn random_heightmap<T: Real>(
    seed: u64,
    params: &RandomTerrainParams,
) -> Result<Heightmap<T>, MapError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (params.size / params.cell_size).round() as usize + 1;
    let h = params.cell_size;

    struct Bump {
        cx: f64,
        cy: f64,
        sigma: f64,
        amp: f64,
    }
    let bumps: Vec<Bump> = (0..params.bumps)
        .map(|_| Bump {
            cx: rng.gen_range(0.0..params.size),
            cy: rng.gen_range(0.0..params.size),
            sigma: rng.gen_range(0.4..1.2),
            amp: rng.gen_range(-0.4..0.4),
        })
        .collect();
    let mut smooth = vec![0.0f64; n * n];
    for j in 0..n {
        for i in 0..n {
            let (x, y) = (i as f64 * h, j as f64 * h);
            smooth[i + n * j] = bumps
                .iter()
                .map(|b| {
                    let r2 = (x - b.cx).powi(2) + (y - b.cy).powi(2);
                    b.amp * (-r2 / (2.0 * b.sigma * b.sigma)).exp()
                })
                .sum();
        }
    }
    let mut steepest = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            let z = smooth[i + n * j];
            if i + 1 < n {
                steepest = steepest.max((smooth[i + 1 + n * j] - z).abs() / h);
            }
            if j + 1 < n {
                steepest = steepest.max((smooth[i + n * (j + 1)] - z).abs() / h);
            }
        }
    }
    // Slopes along the triangle diagonals are bounded by the axis slopes
    // through the gradient norm, so the limit is applied to the norm bound.
    let limit = params.max_slope_deg.to_radians().tan() / std::f64::consts::SQRT_2;
    if steepest > limit {
        let s = limit / steepest;
        smooth.iter_mut().for_each(|z| *z *= s);
    }

    let steps = rng.gen_range(0..=params.max_steps);
    for _ in 0..steps {
        let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let (nx, ny) = (angle.cos(), angle.sin());
        let offset = rng.gen_range(0.3..0.7) * params.size;
        let height = rng.gen_range(0.05..=params.max_step);
        let c = params.size / 2.0;
        for j in 0..n {
            for i in 0..n {
                let (x, y) = (i as f64 * h - c, j as f64 * h - c);
                if nx * x + ny * y + c > offset {
                    smooth[i + n * j] += height;
                }
            }
        }
    }
    Heightmap::new(
        Point2::origin(),
        lit(h),
        n,
        n,
        smooth.into_iter().map(lit).collect(),
    )
}
