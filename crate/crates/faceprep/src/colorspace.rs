//! RGB ↔ HSV / CIE L\*a\*b\* / YCbCr conversions with a fixed 8-bit
//! re-encoding, so every color space flows through the same byte-oriented
//! pipeline.
//!
//! The conversion graph is a star: RGB ↔ each of the others. Encodings:
//!
//! * HSV: `H ∈ [0°, 360°) → round(H/360·255)`, `S, V ∈ [0, 1] → round(·255)`;
//!   achromatic pixels get hue 0.
//! * YCbCr: BT.601 full range, `Y = 0.299R + 0.587G + 0.114B`, chroma
//!   centered on 128, rounded and clamped.
//! * Lab: sRGB linearization → XYZ (D65, 2° observer) → L\*a\*b\*, with
//!   `L* ∈ [0, 100] → round(·255/100)` and `a*, b*` clamped to
//!   `[-128, 127]` then offset by 128.
//!
//! The inverse directions exist for round-trip testing; hue is quantized to
//! 256 bins, so saturated pixels can move by up to 3 grey levels per
//! channel on a round trip (sharp bound, verified exhaustively).

use thiserror::Error;

use crate::raster::{ColorSpace, Raster8};

#[derive(Debug, Error)]
pub enum ColorSpaceError {
    #[error("expected a {expected} raster, found {found}")]
    WrongColorSpace { expected: &'static str, found: String },
    #[error("color conversion requires 3 channels, found {0}")]
    WrongChannelCount(u32),
}

const KR: f64 = 0.299;
const KB: f64 = 0.114;

fn check_space(
    r: &Raster8,
    expected: ColorSpace,
    name: &'static str,
) -> Result<(), ColorSpaceError> {
    if r.channels() != 3 {
        return Err(ColorSpaceError::WrongChannelCount(r.channels()));
    }
    if r.space() != expected {
        return Err(ColorSpaceError::WrongColorSpace {
            expected: name,
            found: r.space().to_string(),
        });
    }
    Ok(())
}

fn map_pixels(r: &Raster8, space: ColorSpace, f: impl Fn([u8; 3]) -> [u8; 3]) -> Raster8 {
    let mut data = Vec::with_capacity(r.data().len());
    for px in r.data().chunks_exact(3) {
        data.extend_from_slice(&f([px[0], px[1], px[2]]));
    }
    Raster8::new(r.width(), r.height(), 3, data, space).expect("same dimensions")
}

/// Convert an RGB raster to 8-bit-encoded HSV.
pub fn rgb_to_hsv(r: &Raster8) -> Result<Raster8, ColorSpaceError> {
    check_space(r, ColorSpace::Rgb, "rgb")?;
    Ok(map_pixels(r, ColorSpace::Hsv8, hsv8_from_rgb))
}

/// Inverse of [`rgb_to_hsv`] on the continuous domain.
pub fn hsv_to_rgb(r: &Raster8) -> Result<Raster8, ColorSpaceError> {
    check_space(r, ColorSpace::Hsv8, "hsv8")?;
    Ok(map_pixels(r, ColorSpace::Rgb, rgb_from_hsv8))
}

/// Convert an RGB raster to BT.601 full-range YCbCr.
pub fn rgb_to_ycbcr(r: &Raster8) -> Result<Raster8, ColorSpaceError> {
    check_space(r, ColorSpace::Rgb, "rgb")?;
    Ok(map_pixels(r, ColorSpace::YCbCr8, ycbcr8_from_rgb))
}

/// Inverse of [`rgb_to_ycbcr`] on the continuous domain.
pub fn ycbcr_to_rgb(r: &Raster8) -> Result<Raster8, ColorSpaceError> {
    check_space(r, ColorSpace::YCbCr8, "ycbcr8")?;
    Ok(map_pixels(r, ColorSpace::Rgb, rgb_from_ycbcr8))
}

/// Convert an RGB raster to 8-bit-encoded CIE L\*a\*b\* (sRGB primaries,
/// D65 white point).
pub fn rgb_to_lab(r: &Raster8) -> Result<Raster8, ColorSpaceError> {
    check_space(r, ColorSpace::Rgb, "rgb")?;
    Ok(map_pixels(r, ColorSpace::Lab8, lab8_from_rgb))
}

/// Inverse of [`rgb_to_lab`] on the continuous domain.
pub fn lab_to_rgb(r: &Raster8) -> Result<Raster8, ColorSpaceError> {
    check_space(r, ColorSpace::Lab8, "lab8")?;
    Ok(map_pixels(r, ColorSpace::Rgb, rgb_from_lab8))
}

#[inline]
fn round_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

// ---------------------------------------------------------------------------
// HSV (hexcone model)

fn hsv8_from_rgb([r, g, b]: [u8; 3]) -> [u8; 3] {
    let rf = r as f64 / 255.0;
    let gf = g as f64 / 255.0;
    let bf = b as f64 / 255.0;
    let max = rf.max(gf).max(bf);
    let min = rf.min(gf).min(bf);
    let delta = max - min;
    let v = max;
    let s = if max == 0.0 { 0.0 } else { delta / max };
    let h = if delta == 0.0 {
        0.0
    } else if max == rf {
        (60.0 * ((gf - bf) / delta)).rem_euclid(360.0)
    } else if max == gf {
        60.0 * ((bf - rf) / delta) + 120.0
    } else {
        60.0 * ((rf - gf) / delta) + 240.0
    };
    [round_u8(h / 360.0 * 255.0), round_u8(s * 255.0), round_u8(v * 255.0)]
}

fn rgb_from_hsv8([h8, s8, v8]: [u8; 3]) -> [u8; 3] {
    let h = h8 as f64 / 255.0 * 360.0;
    let s = s8 as f64 / 255.0;
    let v = v8 as f64 / 255.0;
    let c = v * s;
    let hp = (h / 60.0).rem_euclid(6.0);
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (rp, gp, bp) = match hp {
        t if t < 1.0 => (c, x, 0.0),
        t if t < 2.0 => (x, c, 0.0),
        t if t < 3.0 => (0.0, c, x),
        t if t < 4.0 => (0.0, x, c),
        t if t < 5.0 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [round_u8((rp + m) * 255.0), round_u8((gp + m) * 255.0), round_u8((bp + m) * 255.0)]
}

// ---------------------------------------------------------------------------
// YCbCr (BT.601 full range)

fn ycbcr8_from_rgb([r, g, b]: [u8; 3]) -> [u8; 3] {
    let (r, g, b) = (r as f64, g as f64, b as f64);
    let y = KR * r + (1.0 - KR - KB) * g + KB * b;
    let cb = 128.0 + (b - y) * (0.5 / (1.0 - KB));
    let cr = 128.0 + (r - y) * (0.5 / (1.0 - KR));
    [round_u8(y), round_u8(cb), round_u8(cr)]
}

fn rgb_from_ycbcr8([y8, cb8, cr8]: [u8; 3]) -> [u8; 3] {
    let y = y8 as f64;
    let cb = cb8 as f64 - 128.0;
    let cr = cr8 as f64 - 128.0;
    let r = y + cr * (1.0 - KR) / 0.5;
    let b = y + cb * (1.0 - KB) / 0.5;
    let g = (y - KR * r - KB * b) / (1.0 - KR - KB);
    [round_u8(r), round_u8(g), round_u8(b)]
}

// ---------------------------------------------------------------------------
// CIE L*a*b* (sRGB primaries, D65 white point, 2 degree observer)

const XN: f64 = 0.95047;
const YN: f64 = 1.0;
const ZN: f64 = 1.08883;
// sRGB -> XYZ
const M: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];
// XYZ -> linear sRGB
const M_INV: [[f64; 3]; 3] = [
    [3.2404542, -1.5371385, -0.4985314],
    [-0.9692660, 1.8760108, 0.0415560],
    [0.0556434, -0.2040259, 1.0572252],
];
const DELTA: f64 = 6.0 / 29.0;

fn srgb_linearize(c8: u8) -> f64 {
    let c = c8 as f64 / 255.0;
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn srgb_delinearize(lin: f64) -> f64 {
    if lin <= 0.0031308 {
        lin * 12.92
    } else {
        1.055 * lin.powf(1.0 / 2.4) - 0.055
    }
}

fn lab_f(t: f64) -> f64 {
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

fn lab_f_inv(f: f64) -> f64 {
    if f > DELTA {
        f * f * f
    } else {
        3.0 * DELTA * DELTA * (f - 4.0 / 29.0)
    }
}

fn lab8_from_rgb(px: [u8; 3]) -> [u8; 3] {
    let lin = [srgb_linearize(px[0]), srgb_linearize(px[1]), srgb_linearize(px[2])];
    let mut xyz = [0f64; 3];
    for (i, row) in M.iter().enumerate() {
        xyz[i] = row[0] * lin[0] + row[1] * lin[1] + row[2] * lin[2];
    }
    let fx = lab_f(xyz[0] / XN);
    let fy = lab_f(xyz[1] / YN);
    let fz = lab_f(xyz[2] / ZN);
    let l = 116.0 * fy - 16.0;
    let a = 500.0 * (fx - fy);
    let b = 200.0 * (fy - fz);
    [
        round_u8(l / 100.0 * 255.0),
        round_u8(a.clamp(-128.0, 127.0) + 128.0),
        round_u8(b.clamp(-128.0, 127.0) + 128.0),
    ]
}

fn rgb_from_lab8([l8, a8, b8]: [u8; 3]) -> [u8; 3] {
    let l = l8 as f64 / 255.0 * 100.0;
    let a = a8 as f64 - 128.0;
    let b = b8 as f64 - 128.0;
    let fy = (l + 16.0) / 116.0;
    let fx = fy + a / 500.0;
    let fz = fy - b / 200.0;
    let xyz = [XN * lab_f_inv(fx), YN * lab_f_inv(fy), ZN * lab_f_inv(fz)];
    let mut out = [0u8; 3];
    for (i, row) in M_INV.iter().enumerate() {
        let lin = row[0] * xyz[0] + row[1] * xyz[1] + row[2] * xyz[2];
        out[i] = round_u8(srgb_delinearize(lin.clamp(0.0, 1.0)) * 255.0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::ColorSpace;
    use proptest::prelude::*;

    fn px(space: ColorSpace, p: [u8; 3]) -> Raster8 {
        Raster8::new(1, 1, 3, p.to_vec(), space).unwrap()
    }

    fn rng_pixels(n: usize, seed: u64) -> Vec<[u8; 3]> {
        let mut state = seed;
        (0..n)
            .map(|_| {
                let mut next = || {
                    state = state
                        .wrapping_mul(6364136223846793005)
                        .wrapping_add(1442695040888963407);
                    (state >> 56) as u8
                };
                [next(), next(), next()]
            })
            .collect()
    }

    #[test]
    fn hsv_known_values() {
        assert_eq!(hsv8_from_rgb([255, 255, 255]), [0, 0, 255]);
        assert_eq!(hsv8_from_rgb([255, 0, 0]), [0, 255, 255]);
        // hue 120 degrees -> round(120/360*255) = 85
        assert_eq!(hsv8_from_rgb([0, 255, 0]), [85, 255, 255]);
        assert_eq!(hsv8_from_rgb([0, 0, 0]), [0, 0, 0]);
    }

    #[test]
    fn ycbcr_known_values() {
        assert_eq!(ycbcr8_from_rgb([128, 128, 128]), [128, 128, 128]);
        assert_eq!(ycbcr8_from_rgb([255, 255, 255]), [255, 128, 128]);
        // Y = 76.245, Cb = 84.97, Cr = 255.5 clamped
        assert_eq!(ycbcr8_from_rgb([255, 0, 0]), [76, 85, 255]);
    }

    #[test]
    fn lab_known_values() {
        // frozen against an independent reference implementation
        // (skimage.color.rgb2lab, same sRGB/D65 constants)
        assert_eq!(lab8_from_rgb([0, 0, 0]), [0, 128, 128]);
        assert_eq!(lab8_from_rgb([255, 255, 255]), [255, 128, 128]);
        assert_eq!(lab8_from_rgb([255, 0, 0]), [136, 208, 195]);
        assert_eq!(lab8_from_rgb([0, 255, 0]), [224, 42, 211]);
        assert_eq!(lab8_from_rgb([0, 0, 255]), [82, 207, 20]);
        assert_eq!(lab8_from_rgb([128, 128, 128]), [137, 128, 128]);
        assert_eq!(lab8_from_rgb([200, 50, 120]), [120, 191, 124]);
    }

    #[test]
    fn wrong_space_rejected() {
        let r = px(ColorSpace::Hsv8, [1, 2, 3]);
        assert!(matches!(rgb_to_hsv(&r), Err(ColorSpaceError::WrongColorSpace { .. })));
        let r = px(ColorSpace::Rgb, [1, 2, 3]);
        assert!(matches!(hsv_to_rgb(&r), Err(ColorSpaceError::WrongColorSpace { .. })));
    }

    #[test]
    fn space_tags_propagate() {
        let r = px(ColorSpace::Rgb, [10, 200, 30]);
        assert_eq!(rgb_to_hsv(&r).unwrap().space(), ColorSpace::Hsv8);
        assert_eq!(rgb_to_ycbcr(&r).unwrap().space(), ColorSpace::YCbCr8);
        assert_eq!(rgb_to_lab(&r).unwrap().space(), ColorSpace::Lab8);
    }

    #[test]
    fn achromatic_pixels() {
        for v in 0..=255u8 {
            let [_, s, val] = hsv8_from_rgb([v, v, v]);
            assert_eq!((s, val), (0, v));
            let [y, cb, cr] = ycbcr8_from_rgb([v, v, v]);
            assert_eq!((y, cb, cr), (v, 128, 128));
            let [_, a, b] = lab8_from_rgb([v, v, v]);
            assert!((a as i32 - 128).abs() <= 1 && (b as i32 - 128).abs() <= 1);
        }
    }

    #[test]
    fn greys_survive_hsv_and_ycbcr_round_trips() {
        for v in 0..=255u8 {
            assert_eq!(rgb_from_hsv8(hsv8_from_rgb([v, v, v])), [v, v, v]);
            assert_eq!(rgb_from_ycbcr8(ycbcr8_from_rgb([v, v, v])), [v, v, v]);
        }
    }

    #[test]
    fn greys_survive_lab_round_trip_within_one() {
        // L* is quantized to 255 steps over a nonlinear curve, so a few
        // grey levels collapse onto a neighbor; the error never exceeds 1.
        for v in 0..=255u8 {
            let back = rgb_from_lab8(lab8_from_rgb([v, v, v]));
            for c in back {
                assert!((c as i32 - v as i32).abs() <= 1, "grey {v} -> {back:?}");
            }
        }
    }

    #[test]
    fn luma_is_convex_combination() {
        for p in rng_pixels(20000, 11) {
            let [y, _, _] = ycbcr8_from_rgb(p);
            let min = *p.iter().min().unwrap();
            let max = *p.iter().max().unwrap();
            assert!(y >= min && y <= max, "luma {y} outside [{min},{max}] for {p:?}");
        }
    }

    #[test]
    fn lightness_monotone_in_grey() {
        let mut prev = 0u8;
        for v in 0..=255u8 {
            let [l, _, _] = lab8_from_rgb([v, v, v]);
            assert!(l >= prev);
            prev = l;
        }
    }

    #[test]
    fn hsv_round_trip_error_bound() {
        // Hue is quantized to 256 bins of 360/255 degrees; the induced
        // per-channel error reaches 3 for saturated near-boundary hues
        // (exhaustively verified sharp bound). See the acceptance notes.
        let mut worst = 0i32;
        for p in rng_pixels(100_000, 23) {
            let back = rgb_from_hsv8(hsv8_from_rgb(p));
            for c in 0..3 {
                worst = worst.max((back[c] as i32 - p[c] as i32).abs());
            }
        }
        assert!(worst <= 3, "hsv round-trip error {worst} exceeds the sharp bound 3");
    }

    #[test]
    fn ycbcr_round_trip_error_bound() {
        let mut worst = 0i32;
        for p in rng_pixels(100_000, 37) {
            let back = rgb_from_ycbcr8(ycbcr8_from_rgb(p));
            for c in 0..3 {
                worst = worst.max((back[c] as i32 - p[c] as i32).abs());
            }
        }
        assert!(worst <= 2, "ycbcr round-trip error {worst} exceeds 2");
    }

    proptest! {
        #[test]
        fn hue_of_max_red_sextant(g in 0u8..=255, b in 0u8..=255) {
            // red-dominant pixels land in the first or last hue sextant
            prop_assume!(g < 255 && b < 255);
            let [h, _, _] = hsv8_from_rgb([255, g, b]);
            let deg = h as f64 / 255.0 * 360.0;
            prop_assert!(deg <= 61.5 || deg >= 298.5);
        }

        #[test]
        fn conversions_preserve_shape(data in prop::collection::vec(any::<u8>(), 27)) {
            let r = Raster8::new(3, 3, 3, data, ColorSpace::Rgb).unwrap();
            for out in [rgb_to_hsv(&r).unwrap(), rgb_to_ycbcr(&r).unwrap(), rgb_to_lab(&r).unwrap()] {
                prop_assert_eq!((out.width(), out.height(), out.channels()), (3, 3, 3));
            }
        }
    }
}
