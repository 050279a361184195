//! Separable Gaussian-family filters on [`ScalarField`]s with replicated borders.

use crate::imagio::ScalarField;

fn radius_for(sigma: f64) -> usize {
    (3.0 * sigma).ceil().max(1.0) as usize
}

/// Normalized sampled Gaussian.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = radius_for(sigma) as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// First derivative of the Gaussian, `d/dx G(x)`, scaled so that a unit ramp gives unit response.
pub fn gaussian_derivative_kernel(sigma: f64) -> Vec<f64> {
    let r = radius_for(sigma) as isize;
    // correlation taps: sum_i k[i] * i == 1, so a ramp f(x) = x responds with 1
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| {
            let x = i as f64;
            x * (-(x * x) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let moment: f64 = (-r..=r).zip(&k).map(|(i, v)| i as f64 * v).sum();
    k.iter_mut().for_each(|v| *v /= moment);
    k
}

/// Second derivative of the Gaussian, normalized to zero sum and unit response on `x^2 / 2`.
pub fn gaussian_second_derivative_kernel(sigma: f64) -> Vec<f64> {
    let r = radius_for(sigma) as isize;
    let s2 = sigma * sigma;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| {
            let x = i as f64;
            (x * x / s2 - 1.0) / s2 * (-(x * x) / (2.0 * s2)).exp()
        })
        .collect();
    let mean = k.iter().sum::<f64>() / k.len() as f64;
    k.iter_mut().for_each(|v| *v -= mean);
    let moment: f64 = (-r..=r).zip(&k).map(|(i, v)| 0.5 * (i * i) as f64 * v).sum();
    k.iter_mut().for_each(|v| *v /= moment);
    k
}

/// Correlates each row with `kernel` (centered).
pub fn filter_rows(field: &ScalarField, kernel: &[f64]) -> ScalarField {
    let (w, h) = (field.width(), field.height());
    let r = (kernel.len() / 2) as isize;
    ScalarField::from_fn(w, h, |x, y| {
        kernel
            .iter()
            .enumerate()
            .map(|(k, c)| c * field.get_clamped(x as isize + k as isize - r, y as isize))
            .sum()
    })
}

/// Correlates each column with `kernel` (centered).
pub fn filter_cols(field: &ScalarField, kernel: &[f64]) -> ScalarField {
    let (w, h) = (field.width(), field.height());
    let r = (kernel.len() / 2) as isize;
    ScalarField::from_fn(w, h, |x, y| {
        kernel
            .iter()
            .enumerate()
            .map(|(k, c)| c * field.get_clamped(x as isize, y as isize + k as isize - r))
            .sum()
    })
}

pub fn separable(field: &ScalarField, row_kernel: &[f64], col_kernel: &[f64]) -> ScalarField {
    filter_cols(&filter_rows(field, row_kernel), col_kernel)
}

pub fn gaussian_blur(field: &ScalarField, sigma: f64) -> ScalarField {
    let k = gaussian_kernel(sigma);
    separable(field, &k, &k)
}

/// Gaussian-derivative gradient `(dI/dx, dI/dy)`; y grows downward.
pub fn gaussian_gradient(field: &ScalarField, sigma: f64) -> (ScalarField, ScalarField) {
    let g = gaussian_kernel(sigma);
    let d = gaussian_derivative_kernel(sigma);
    (separable(field, &d, &g), separable(field, &g, &d))
}

/// Scale-normalized Laplacian of Gaussian, `sigma^2 * (Ixx + Iyy)`.
pub fn laplacian_of_gaussian(field: &ScalarField, sigma: f64) -> ScalarField {
    let g = gaussian_kernel(sigma);
    let dd = gaussian_second_derivative_kernel(sigma);
    let xx = separable(field, &dd, &g);
    let yy = separable(field, &g, &dd);
    let s2 = sigma * sigma;
    ScalarField::from_fn(field.width(), field.height(), |x, y| {
        s2 * (xx.get(x, y) + yy.get(x, y))
    })
}

/// Difference of Gaussians at `sigma`: `G(sigma) - G(2 sigma)`.
pub fn difference_of_gaussians(field: &ScalarField, sigma: f64) -> ScalarField {
    let fine = gaussian_blur(field, sigma);
    let coarse = gaussian_blur(field, 2.0 * sigma);
    ScalarField::from_fn(field.width(), field.height(), |x, y| {
        fine.get(x, y) - coarse.get(x, y)
    })
}
