use super::{Field, ImageTensor, ImagingError, Shape, LUMA_WEIGHTS};

/// PSNR reported for identical inputs, in dB.
pub const DEFAULT_PSNR_CAP: f64 = 99.0;

/// Mean squared difference over all elements.
pub fn mse(reference: &Field, distorted: &Field) -> Result<f64, ImagingError> {
    reference.check_same_shape(distorted)?;
    let sum: f64 = reference
        .data()
        .iter()
        .zip(distorted.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / reference.data().len() as f64)
}

/// Peak signal-to-noise ratio for unit peak, capped at [`DEFAULT_PSNR_CAP`].
pub fn psnr(reference: &Field, distorted: &Field) -> Result<f64, ImagingError> {
    psnr_with_cap(reference, distorted, DEFAULT_PSNR_CAP)
}

/// `10·log10(1/mse)`, never above `cap` (identical inputs give exactly `cap`).
pub fn psnr_with_cap(reference: &Field, distorted: &Field, cap: f64) -> Result<f64, ImagingError> {
    let err = mse(reference, distorted)?;
    if err == 0.0 {
        return Ok(cap);
    }
    Ok((10.0 * (1.0 / err).log10()).min(cap))
}

pub fn clamp_unit(img: &Field) -> Result<ImageTensor, ImagingError> {
    ImageTensor::clamped(img.clone())
}

/// Rec. 601 luma plane (a single-channel field). Grayscale input is copied.
pub fn luminance(img: &Field) -> Field {
    let shape = img.shape();
    let out = Shape::new(shape.height, shape.width, 1);
    if shape.channels == 1 {
        return img.clone();
    }
    Field::from_fn(out, |y, x, _| {
        LUMA_WEIGHTS
            .iter()
            .enumerate()
            .map(|(c, w)| w * img.at(y, x, c))
            .sum()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(seed: u64, shape: Shape) -> ImageTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageTensor::from_fn(shape, |_, _, _| rng.random::<f64>()).unwrap()
    }

    fn mse_oracle(a: &Field, b: &Field) -> f64 {
        let s = a.shape();
        let mut total = 0.0;
        for y in 0..s.height {
            for x in 0..s.width {
                for c in 0..s.channels {
                    let d = a.at(y, x, c) - b.at(y, x, c);
                    total += d * d;
                }
            }
        }
        total / s.len() as f64
    }

    #[test]
    fn mse_identity_is_zero() {
        let x = random_image(1, Shape::new(8, 8, 3));
        assert_eq!(mse(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn mse_uniform_difference() {
        let s = Shape::new(4, 5, 3);
        let a = Field::zeros(s);
        let b = Field::filled(s, 0.1);
        assert!((mse(&a, &b).unwrap() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn mse_matches_element_loop() {
        let s = Shape::new(8, 8, 3);
        let a = random_image(11, s);
        let b = random_image(12, s);
        assert!((mse(&a, &b).unwrap() - mse_oracle(&a, &b)).abs() < 1e-12);
    }

    #[test]
    fn mse_rejects_shape_mismatch() {
        let a = Field::zeros(Shape::new(2, 2, 3));
        let b = Field::zeros(Shape::new(2, 3, 3));
        assert!(matches!(mse(&a, &b), Err(ImagingError::Shape { .. })));
        assert!(psnr(&a, &b).is_err());
    }

    #[test]
    fn psnr_cases() {
        let s = Shape::new(8, 8, 3);
        let x = random_image(3, s);
        assert_eq!(psnr(&x, &x).unwrap(), 99.0);
        let a = Field::filled(s, 0.2);
        let b = Field::filled(s, 0.3);
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-9);

        let y = random_image(4, s);
        let oracle = 10.0 * (1.0 / mse_oracle(&x, &y)).log10();
        assert!((psnr(&x, &y).unwrap() - oracle).abs() < 1e-9);
        assert_eq!(psnr_with_cap(&x, &x, 60.0).unwrap(), 60.0);
    }

    #[test]
    fn clamp_cases() {
        let f = Field::new(Shape::new(1, 3, 1), vec![1.07, -0.02, 0.5]).unwrap();
        let c = clamp_unit(&f).unwrap();
        assert_eq!(c.data(), &[1.0, 0.0, 0.5]);
        let x = random_image(5, Shape::new(4, 4, 3));
        let cx = clamp_unit(&x).unwrap();
        assert!(x
            .data()
            .iter()
            .zip(cx.data())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    proptest! {
        #[test]
        fn psnr_symmetric_and_mse_nonnegative(seed_a in 0u64..1000, seed_b in 0u64..1000) {
            let s = Shape::new(4, 4, 3);
            let a = random_image(seed_a, s);
            let b = random_image(seed_b, s);
            let m = mse(&a, &b).unwrap();
            prop_assert!(m >= 0.0);
            prop_assert_eq!(m == 0.0, a == b);
            prop_assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        }
    }
}
