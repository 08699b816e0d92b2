use super::simulate::Measurement;
use crate::error::{Error, Result};
use crate::numerics::Grid;

/// Side length of the square network input.
pub const NETWORK_INPUT_SIZE: usize = 224;

/// Window of the raw measurement kept by preprocessing, in raw pixels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CropWindow {
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
}

/// Center-crops the largest square and area-averages it down to
/// `224 x 224`. Inputs that are already `224 x 224` come back unchanged.
pub fn preprocess_measurement(raw: &Measurement) -> Result<Measurement> {
    let (h, w) = raw.dims();
    if h < NETWORK_INPUT_SIZE || w < NETWORK_INPUT_SIZE {
        return Err(Error::TooSmall {
            height: h,
            width: w,
            min: NETWORK_INPUT_SIZE,
        });
    }
    let side = h.min(w);
    let window = CropWindow {
        row: (h - side) / 2,
        col: (w - side) / 2,
        height: side,
        width: side,
    };
    let image = raw.image.map_channels(|g| {
        let square = g.crop(window.row, window.col, side, side)?;
        area_resize(&square, NETWORK_INPUT_SIZE, NETWORK_INPUT_SIZE)
    })?;
    let mut out = Measurement::new(image, raw.provenance, raw.noise_sigma)?;
    // an already-preprocessed input keeps the window measured on its raw capture
    out.crop = match raw.crop {
        Some(prev) if (h, w) == (NETWORK_INPUT_SIZE, NETWORK_INPUT_SIZE) => Some(prev),
        _ => Some(window),
    };
    Ok(out)
}

/// Per output sample, the input indices it covers and their area weights.
fn area_weights(in_len: usize, out_len: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = in_len as f64 / out_len as f64;
    (0..out_len)
        .map(|i| {
            let start = i as f64 * scale;
            let end = (i + 1) as f64 * scale;
            let first = start.floor() as usize;
            let last = (end.ceil() as usize).min(in_len);
            (first..last)
                .filter_map(|j| {
                    let overlap = end.min((j + 1) as f64) - start.max(j as f64);
                    (overlap > 0.0).then_some((j, overlap / scale))
                })
                .collect()
        })
        .collect()
}

/// Box-filter resampling where each output pixel averages the input area it covers.
pub(crate) fn area_resize(grid: &Grid, out_h: usize, out_w: usize) -> Result<Grid> {
    let rows = area_weights(grid.height(), out_h);
    let cols = area_weights(grid.width(), out_w);

    let horizontal = Grid::from_fn(grid.height(), out_w, |r, c| {
        cols[c].iter().map(|&(j, wt)| wt * grid.get(r, j)).sum()
    })?;
    Grid::from_fn(out_h, out_w, |r, c| {
        rows[r].iter().map(|&(i, wt)| wt * horizontal.get(i, c)).sum()
    })
}
