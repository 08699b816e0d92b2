//! 2D convolution: an FFT fast path and a direct-sum reference.
//!
//! Both paths share one convention. The kernel's center pixel is
//! `(kh / 2, kw / 2)`, so a delta at the center is the identity and a delta
//! offset by `(dx, dy)` shifts the scene by `(dx, dy)`.
//!
//! * [`Padding::Linear`] zero-pads the scene and returns the central
//!   scene-sized crop of the full linear convolution.
//! * [`Padding::Circular`] treats the scene as periodic.
//!
//! The `_full` variants return the whole `(H + kh - 1) x (W + kw - 1)`
//! linear result.

use std::fmt;
use std::str::FromStr;

use rustfft::FftDirection;

use super::fft::{embed_centered_wrapped, embed_top_left, fft2_in_place};
use super::grid::Grid;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Padding {
    #[default]
    Linear,
    Circular,
}

impl fmt::Display for Padding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Padding::Linear => "linear",
            Padding::Circular => "circular",
        })
    }
}

impl FromStr for Padding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "linear" | "linear-zero-pad" => Ok(Padding::Linear),
            "circular" => Ok(Padding::Circular),
            other => Err(Error::Config(format!("unknown padding mode `{other}`"))),
        }
    }
}

fn check_dims(scene: &Grid, kernel: &Grid) -> Result<()> {
    if kernel.height() > scene.height() || kernel.width() > scene.width() {
        return Err(Error::shape(format!(
            "kernel {}x{} larger than scene {}x{}",
            kernel.height(),
            kernel.width(),
            scene.height(),
            scene.width()
        )));
    }
    Ok(())
}

pub fn fft_convolve_2d(scene: &Grid, kernel: &Grid, padding: Padding) -> Result<Grid> {
    check_dims(scene, kernel)?;
    match padding {
        Padding::Linear => {
            let full = fft_convolve_2d_full(scene, kernel)?;
            full.crop(kernel.height() / 2, kernel.width() / 2, scene.height(), scene.width())
        }
        Padding::Circular => {
            let (h, w) = scene.dims();
            let mut s = embed_top_left(scene, h, w);
            let mut k = embed_centered_wrapped(kernel, h, w);
            fft2_in_place(&mut s, h, w, FftDirection::Forward);
            fft2_in_place(&mut k, h, w, FftDirection::Forward);
            s.iter_mut().zip(&k).for_each(|(a, b)| *a *= b);
            fft2_in_place(&mut s, h, w, FftDirection::Inverse);
            Grid::new(h, w, s.into_iter().map(|z| z.re).collect())
        }
    }
}

/// Full linear convolution via zero-padded FFTs sized to the next power of two.
pub fn fft_convolve_2d_full(scene: &Grid, kernel: &Grid) -> Result<Grid> {
    let out_h = scene.height() + kernel.height() - 1;
    let out_w = scene.width() + kernel.width() - 1;
    let (ph, pw) = (out_h.next_power_of_two(), out_w.next_power_of_two());

    let mut s = embed_top_left(scene, ph, pw);
    let mut k = embed_top_left(kernel, ph, pw);
    fft2_in_place(&mut s, ph, pw, FftDirection::Forward);
    fft2_in_place(&mut k, ph, pw, FftDirection::Forward);
    s.iter_mut().zip(&k).for_each(|(a, b)| *a *= b);
    fft2_in_place(&mut s, ph, pw, FftDirection::Inverse);

    Grid::from_fn(out_h, out_w, |r, c| s[r * pw + c].re)
}

/// Direct-sum reference with the same contract as [`fft_convolve_2d`].
pub fn naive_convolve_2d(scene: &Grid, kernel: &Grid, padding: Padding) -> Result<Grid> {
    check_dims(scene, kernel)?;
    let (h, w) = scene.dims();
    let (kh, kw) = kernel.dims();
    let (ch, cw) = ((kh / 2) as isize, (kw / 2) as isize);
    Grid::from_fn(h, w, |r, c| {
        let mut acc = 0.0;
        for i in 0..kh {
            for j in 0..kw {
                let sr = r as isize - (i as isize - ch);
                let sc = c as isize - (j as isize - cw);
                let value = match padding {
                    Padding::Linear => {
                        if sr < 0 || sc < 0 || sr >= h as isize || sc >= w as isize {
                            continue;
                        }
                        scene.get(sr as usize, sc as usize)
                    }
                    Padding::Circular => {
                        scene.get(sr.rem_euclid(h as isize) as usize, sc.rem_euclid(w as isize) as usize)
                    }
                };
                acc += kernel.get(i, j) * value;
            }
        }
        acc
    })
}

pub fn naive_convolve_2d_full(scene: &Grid, kernel: &Grid) -> Result<Grid> {
    let (h, w) = scene.dims();
    let (kh, kw) = kernel.dims();
    Grid::from_fn(h + kh - 1, w + kw - 1, |r, c| {
        let mut acc = 0.0;
        for i in 0..kh {
            for j in 0..kw {
                let (sr, sc) = (r as isize - i as isize, c as isize - j as isize);
                if sr >= 0 && sc >= 0 && (sr as usize) < h && (sc as usize) < w {
                    acc += kernel.get(i, j) * scene.get(sr as usize, sc as usize);
                }
            }
        }
        acc
    })
}
