use std::path::Path;

use image::{ImageBuffer, Rgb};

use crate::error::{Error, Result};
use crate::numerics::{Grid, MultiChannelImage};

/// Loads an 8-bit image as three channels scaled to `[0, 1]`.
pub fn read_png_scene(path: impl AsRef<Path>) -> Result<MultiChannelImage> {
    let rgb = image::open(path.as_ref())?.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let channels = (0..3)
        .map(|c| Grid::from_fn(h, w, |r, col| rgb.get_pixel(col as u32, r as u32)[c] as f64 / 255.0))
        .collect::<Result<Vec<_>>>()?;
    MultiChannelImage::new(channels)
}

/// Writes a 1- or 3-channel image, clamping to `[0, 1]` and quantizing to 8 bits.
pub fn write_png(img: &MultiChannelImage, path: impl AsRef<Path>) -> Result<()> {
    let pick = match img.channel_count() {
        1 => [0, 0, 0],
        3 => [0, 1, 2],
        n => return Err(Error::shape(format!("cannot write {n}-channel image as png"))),
    };
    let (h, w) = img.dims();
    let quantize = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    let buf = ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        let (r, c) = (y as usize, x as usize);
        Rgb(pick.map(|ch| quantize(img.channel(ch).get(r, c))))
    });
    buf.save(path.as_ref())?;
    Ok(())
}
