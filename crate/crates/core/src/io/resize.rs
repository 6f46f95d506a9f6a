use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::Matrix;

/// Overlap of `[a0, a1)` and `[b0, b1)`.
fn overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}

/// Area-weighted resampling of a row-major `h×w` image to `nh×nw`.
///
/// Each output pixel averages the source pixels it covers, weighted by the
/// covered area, so constant images stay constant and total mass scales by
/// the area ratio.
pub fn resize_area(img: &[f64], h: usize, w: usize, nh: usize, nw: usize) -> Result<Vec<f64>> {
    if img.len() != h * w || h == 0 || w == 0 || nh == 0 || nw == 0 {
        return Err(Error::dims(format!(
            "cannot resize {} pixels as {h}x{w} to {nh}x{nw}",
            img.len()
        )));
    }
    let sy = h as f64 / nh as f64;
    let sx = w as f64 / nw as f64;
    let mut out = vec![0.0; nh * nw];
    for oy in 0..nh {
        let (y0, y1) = (oy as f64 * sy, (oy + 1) as f64 * sy);
        for ox in 0..nw {
            let (x0, x1) = (ox as f64 * sx, (ox + 1) as f64 * sx);
            let mut acc = 0.0;
            for iy in (y0.floor() as usize)..(y1.ceil() as usize).min(h) {
                let wy = overlap(y0, y1, iy as f64, iy as f64 + 1.0);
                for ix in (x0.floor() as usize)..(x1.ceil() as usize).min(w) {
                    let wx = overlap(x0, x1, ix as f64, ix as f64 + 1.0);
                    acc += wy * wx * img[iy * w + ix];
                }
            }
            out[oy * nw + ox] = acc / (sy * sx);
        }
    }
    Ok(out)
}

/// Applies [`resize_area`] to every column of `images`.
pub fn resize_columns(images: &Matrix, h: usize, w: usize, nh: usize, nw: usize) -> Result<Matrix> {
    let mut out = DMatrix::zeros(nh * nw, images.ncols());
    for (j, col) in images.column_iter().enumerate() {
        let r = resize_area(col.as_slice(), h, w, nh, nw)?;
        out.column_mut(j).copy_from_slice(&r);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_factor_is_block_average() {
        let img: Vec<f64> = (0..16).map(|v| v as f64).collect();
        let r = resize_area(&img, 4, 4, 2, 2).unwrap();
        assert_eq!(r, vec![2.5, 4.5, 10.5, 12.5]);
    }

    #[test]
    fn constant_images_stay_constant() {
        let img = vec![0.7; 28 * 28];
        let r = resize_area(&img, 28, 28, 20, 20).unwrap();
        assert!(r.iter().all(|&v| (v - 0.7).abs() < 1e-12));
    }

    #[test]
    fn mass_scales_with_area() {
        let img: Vec<f64> = (0..28 * 28).map(|v| ((v * 37) % 255) as f64 / 255.0).collect();
        let r = resize_area(&img, 28, 28, 20, 20).unwrap();
        let ratio = (20.0 * 20.0) / (28.0 * 28.0);
        assert!((r.iter().sum::<f64>() - img.iter().sum::<f64>() * ratio).abs() < 1e-9);
        assert!(resize_area(&img, 27, 28, 20, 20).is_err());
    }
}
