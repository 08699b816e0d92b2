use nalgebra::Vector2;

use super::grid::{Grid, MultiChannelImage};

/// Bilinear lookup at pixel coordinates `(x, y)` = (column, row).
///
/// Neighbors outside the raster contribute zero, so the value fades to zero
/// over the one-pixel band around the border and is exactly zero beyond it.
pub fn bilinear_at(grid: &Grid, x: f64, y: f64) -> f64 {
    if !x.is_finite() || !y.is_finite() {
        return 0.0;
    }
    let (h, w) = (grid.height() as isize, grid.width() as isize);
    let x0 = x.floor();
    let y0 = y.floor();
    let (fx, fy) = (x - x0, y - y0);
    let (x0, y0) = (x0 as isize, y0 as isize);

    let fetch = |r: isize, c: isize| -> f64 {
        if r < 0 || c < 0 || r >= h || c >= w {
            0.0
        } else {
            grid.get(r as usize, c as usize)
        }
    };

    let top = fetch(y0, x0) * (1.0 - fx) + fetch(y0, x0 + 1) * fx;
    let bottom = fetch(y0 + 1, x0) * (1.0 - fx) + fetch(y0 + 1, x0 + 1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Samples every channel of `map` at each point. One vector per point,
/// with one entry per channel.
pub fn bilinear_sample(map: &MultiChannelImage, points: &[Vector2<f64>]) -> Vec<Vec<f64>> {
    points
        .iter()
        .map(|p| map.channels().iter().map(|g| bilinear_at(g, p.x, p.y)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_on_integer_pixels() {
        let g = Grid::from_fn(6, 7, |r, c| (r * 7 + c) as f64 * 0.5).unwrap();
        let map = MultiChannelImage::new(vec![g.clone(), g.map(|v| -v)]).unwrap();
        let out = bilinear_sample(&map, &[Vector2::new(3.0, 4.0)]);
        assert_eq!(out[0], vec![g.get(4, 3), -g.get(4, 3)]);
    }

    #[test]
    fn midpoint_interpolates() {
        let g = Grid::new(1, 2, vec![0.0, 1.0]).unwrap();
        assert_eq!(bilinear_at(&g, 0.5, 0.0), 0.5);
    }

    #[test]
    fn reproduces_affine_fields() {
        let (h, w) = (12, 15);
        let g = Grid::from_fn(h, w, |r, c| 2.0 * c as f64 + 3.0 * r as f64).unwrap();
        let map = MultiChannelImage::new(vec![g]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let points: Vec<_> = (0..100)
            .map(|_| {
                Vector2::new(
                    rng.random_range(0.0..(w - 1) as f64),
                    rng.random_range(0.0..(h - 1) as f64),
                )
            })
            .collect();
        for (p, v) in points.iter().zip(bilinear_sample(&map, &points)) {
            assert!((v[0] - (2.0 * p.x + 3.0 * p.y)).abs() < 1e-9);
        }
    }

    #[test]
    fn out_of_bounds_is_zero() {
        let g = Grid::filled(4, 4, 1.0);
        assert_eq!(bilinear_at(&g, -1.5, 2.0), 0.0);
        assert_eq!(bilinear_at(&g, 2.0, 10.0), 0.0);
        assert_eq!(bilinear_at(&g, f64::NAN, 1.0), 0.0);
        // half a pixel past the border blends with the zero pad
        assert!((bilinear_at(&g, 3.5, 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn empty_point_list() {
        let map = MultiChannelImage::zeros(2, 3, 3);
        assert!(bilinear_sample(&map, &[]).is_empty());
    }

    #[test]
    fn continuous_with_bounded_slope() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let g = Grid::from_fn(8, 8, |_, _| rng.random_range(0.0..1.0)).unwrap();
        let mut max_grad: f64 = 0.0;
        for r in 0..8 {
            for c in 0..8 {
                let v = g.get(r, c);
                if c + 1 < 8 {
                    max_grad = max_grad.max((g.get(r, c + 1) - v).abs());
                }
                if r + 1 < 8 {
                    max_grad = max_grad.max((g.get(r + 1, c) - v).abs());
                }
            }
        }
        let eps = 1e-6;
        for _ in 0..200 {
            let x = rng.random_range(0.0..7.0);
            let y = rng.random_range(0.0..7.0);
            let dx = (bilinear_at(&g, x + eps, y) - bilinear_at(&g, x, y)) / eps;
            let dy = (bilinear_at(&g, x, y + eps) - bilinear_at(&g, x, y)) / eps;
            assert!(dx.abs() <= max_grad + 1e-6 && dy.abs() <= max_grad + 1e-6);
        }
    }
}
