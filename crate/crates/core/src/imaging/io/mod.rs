//! Raster and perturbation file formats.
//!
//! 8-bit samples map to reals as `v / 255` on read and `round(v · 255)` on
//! write (round half away from zero).

mod png;
mod uapp;
mod y4m;

pub use self::png::{read_png, write_png};
pub use self::uapp::{read_perturbation, write_perturbation, UAPP_MAGIC, UAPP_VERSION};
pub use self::y4m::{read_y4m, write_y4m, Chroma};

#[inline]
pub fn u8_to_unit(v: u8) -> f64 {
    v as f64 / 255.0
}

#[inline]
pub fn unit_to_u8(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_bit_mapping() {
        assert_eq!(u8_to_unit(255), 1.0);
        assert_eq!(unit_to_u8(1.0), 255);
        assert_eq!(unit_to_u8(u8_to_unit(0)), 0);
        for v in 0..=255u8 {
            assert_eq!(unit_to_u8(u8_to_unit(v)), v);
        }
        // half away from zero
        assert_eq!(unit_to_u8(0.5 / 255.0), 1);
    }
}
