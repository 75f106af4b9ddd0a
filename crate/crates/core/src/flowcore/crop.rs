use super::{FlowField, ImageFrame};
use crate::{Error, Result};

/// Rectangular cropping. Flow values are displacements, so a crop keeps them unchanged.
pub trait Crop: Sized {
    fn dims(&self) -> (usize, usize);
    fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<Self>;

    fn center_crop(&self, width: usize, height: usize) -> Result<Self> {
        let (w, h) = self.dims();
        if width > w || height > h {
            return Err(Error::Dimension(format!("cannot crop {w}x{h} to {width}x{height}")));
        }
        self.crop((w - width) / 2, (h - height) / 2, width, height)
    }
}

fn check_window(dims: (usize, usize), x0: usize, y0: usize, w: usize, h: usize) -> Result<()> {
    if w == 0 || h == 0 || x0 + w > dims.0 || y0 + h > dims.1 {
        return Err(Error::Dimension(format!("crop window {w}x{h}+{x0}+{y0} exceeds {}x{}", dims.0, dims.1)));
    }
    Ok(())
}

impl Crop for ImageFrame {
    fn dims(&self) -> (usize, usize) {
        (self.width(), self.height())
    }

    fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<Self> {
        check_window(self.dims(), x0, y0, width, height)?;
        let c = self.channels();
        let mut data = Vec::with_capacity(width * height * c);
        for y in y0..y0 + height {
            let start = (y * self.width() + x0) * c;
            data.extend_from_slice(&self.data()[start..start + width * c]);
        }
        ImageFrame::new(width, height, c, data)
    }
}

impl Crop for FlowField {
    fn dims(&self) -> (usize, usize) {
        (self.width(), self.height())
    }

    fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<Self> {
        check_window(self.dims(), x0, y0, width, height)?;
        let mut u = Vec::with_capacity(width * height);
        let mut v = Vec::with_capacity(width * height);
        for y in y0..y0 + height {
            let start = y * self.width() + x0;
            u.extend_from_slice(&self.u()[start..start + width]);
            v.extend_from_slice(&self.v()[start..start + width]);
        }
        FlowField::new(width, height, u, v)
    }
}

/// Center crop to the largest size whose sides are multiples of `m`.
pub fn crop_to_multiple<T: Crop + Clone>(input: &T, m: usize) -> Result<T> {
    if m == 0 {
        return Err(Error::InvalidConfig("crop multiple must be positive".into()));
    }
    let (w, h) = input.dims();
    if w < m || h < m {
        return Err(Error::Dimension(format!("{w}x{h} is smaller than the multiple {m}")));
    }
    let (tw, th) = (w / m * m, h / m * m);
    if (tw, th) == (w, h) {
        return Ok(input.clone());
    }
    input.center_crop(tw, th)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> ImageFrame {
        let data = (0..w * h).map(|i| i as f32 / (w * h) as f32).collect();
        ImageFrame::new(w, h, 1, data).unwrap()
    }

    #[test]
    fn multiple_of_64_is_unchanged() {
        let f = ImageFrame::filled(640, 448, 1, 0.5).unwrap();
        let c = crop_to_multiple(&f, 64).unwrap();
        assert_eq!((c.width(), c.height()), (640, 448));
        assert_eq!(c, f);
    }

    #[test]
    fn center_crop_offsets() {
        let f = ramp(650, 450);
        let c = crop_to_multiple(&f, 64).unwrap();
        assert_eq!((c.width(), c.height()), (640, 448));
        // offsets (5, 1)
        assert_eq!(c.get(0, 0, 0), f.get(5, 1, 0));
        assert_eq!(c.get(639, 447, 0), f.get(644, 448, 0));
        let flow = FlowField::from_fn(650, 450, |x, y| (x as f64, y as f64)).unwrap();
        let cf = crop_to_multiple(&flow, 64).unwrap();
        assert_eq!(cf.at(0, 0), (5.0, 1.0));
    }

    #[test]
    fn too_small_is_an_error() {
        let f = ImageFrame::filled(63, 63, 1, 0.0).unwrap();
        assert!(matches!(crop_to_multiple(&f, 64), Err(Error::Dimension(_))));
    }

    #[test]
    fn idempotent() {
        let f = ramp(100, 77);
        let once = crop_to_multiple(&f, 16).unwrap();
        let twice = crop_to_multiple(&once, 16).unwrap();
        assert_eq!(once, twice);
    }
}
