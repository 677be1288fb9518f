//! Neighborhood-homogeneity and bit-depth metrics for quantified claims
//! about what quantization does to an image.
//!
//! The primary metric is [`equal_neighbor_fraction`]: the share of
//! adjacent pixel pairs with exactly equal values. Because quantization is
//! a per-channel value remap, equal pixels stay equal and unequal pairs
//! can only merge, so this fraction never decreases under quantization —
//! the assertable form of the homogeneity hypothesis. A softer
//! co-occurrence metric ([`glcm_homogeneity`]) and level statistics
//! ([`level_stats`]) round out the report.

use thiserror::Error;

use crate::raster::Raster8;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("a 1x1 channel has no neighbor pairs")]
    DegenerateGeometry,
}

/// Neighbor structure to measure over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Connectivity {
    /// Horizontal and vertical neighbors.
    #[default]
    Four,
    /// Horizontal, vertical, and both diagonals.
    Eight,
}

/// Per-channel metric bundle; one of these per channel per image makes up
/// the CSV analysis report.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneityReport {
    pub equal_neighbor_fraction: f64,
    pub glcm_homogeneity: f64,
    pub distinct_levels: usize,
    pub effective_bits: u32,
    pub entropy_bits: f64,
}

fn neighbor_pairs(
    r: &Raster8,
    channel: u32,
    conn: Connectivity,
) -> Result<impl Iterator<Item = (u8, u8)> + '_, AnalysisError> {
    if r.width() < 2 && r.height() < 2 {
        return Err(AnalysisError::DegenerateGeometry);
    }
    let (w, h) = (r.width(), r.height());
    let horizontal = (0..h).flat_map(move |y| {
        (0..w.saturating_sub(1)).map(move |x| (r.sample(x, y, channel), r.sample(x + 1, y, channel)))
    });
    let vertical = (0..h.saturating_sub(1)).flat_map(move |y| {
        (0..w).map(move |x| (r.sample(x, y, channel), r.sample(x, y + 1, channel)))
    });
    let diagonal = (0..h.saturating_sub(1)).flat_map(move |y| {
        (0..w.saturating_sub(1)).flat_map(move |x| {
            [
                (r.sample(x, y, channel), r.sample(x + 1, y + 1, channel)),
                (r.sample(x + 1, y, channel), r.sample(x, y + 1, channel)),
            ]
        })
    });
    let diagonals_enabled = conn == Connectivity::Eight;
    Ok(horizontal
        .chain(vertical)
        .chain(diagonal.filter(move |_| diagonals_enabled)))
}

/// Fraction of adjacent pixel pairs with exactly equal values.
pub fn equal_neighbor_fraction(
    r: &Raster8,
    channel: u32,
    conn: Connectivity,
) -> Result<f64, AnalysisError> {
    let mut pairs = 0u64;
    let mut equal = 0u64;
    for (a, b) in neighbor_pairs(r, channel, conn)? {
        pairs += 1;
        equal += (a == b) as u64;
    }
    Ok(equal as f64 / pairs as f64)
}

/// Mean of `1 / (1 + |vᵢ − vⱼ|)` over adjacent pixel pairs, the local
/// form of the co-occurrence homogeneity statistic. 1 for a constant
/// channel, `1/256` for a 0/255 checkerboard.
pub fn glcm_homogeneity(
    r: &Raster8,
    channel: u32,
    conn: Connectivity,
) -> Result<f64, AnalysisError> {
    let mut pairs = 0u64;
    let mut sum = 0.0;
    for (a, b) in neighbor_pairs(r, channel, conn)? {
        pairs += 1;
        sum += 1.0 / (1.0 + (a as f64 - b as f64).abs());
    }
    Ok(sum / pairs as f64)
}

/// Distinct level count, effective bit depth `ceil(log2(distinct))`, and
/// Shannon entropy of the value histogram in bits.
pub fn level_stats(r: &Raster8, channel: u32) -> (usize, u32, f64) {
    let mut counts = [0u64; 256];
    for v in r.channel(channel) {
        counts[v as usize] += 1;
    }
    let distinct = counts.iter().filter(|&&c| c > 0).count();
    let effective_bits = usize::BITS - (distinct - 1).leading_zeros();
    let total = r.pixel_count() as f64;
    let entropy_bits = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum();
    (distinct, effective_bits, entropy_bits)
}

/// Assemble the full metric bundle for one channel.
pub fn homogeneity_report(
    r: &Raster8,
    channel: u32,
    conn: Connectivity,
) -> Result<HomogeneityReport, AnalysisError> {
    let (distinct_levels, effective_bits, entropy_bits) = level_stats(r, channel);
    Ok(HomogeneityReport {
        equal_neighbor_fraction: equal_neighbor_fraction(r, channel, conn)?,
        glcm_homogeneity: glcm_homogeneity(r, channel, conn)?,
        distinct_levels,
        effective_bits,
        entropy_bits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantize::{quantize_full, quantize_plane};
    use crate::raster::ColorSpace;
    use proptest::prelude::*;

    fn checkerboard(n: u32) -> Raster8 {
        let data = (0..n * n)
            .map(|i| {
                let (x, y) = (i % n, i / n);
                if (x + y) % 2 == 0 {
                    0
                } else {
                    255
                }
            })
            .collect();
        Raster8::new(n, n, 1, data, ColorSpace::Gray).unwrap()
    }

    #[test]
    fn constant_channel_is_fully_homogeneous() {
        let r = Raster8::constant(5, 4, 1, 9, ColorSpace::Gray);
        assert_eq!(equal_neighbor_fraction(&r, 0, Connectivity::Four).unwrap(), 1.0);
        assert_eq!(glcm_homogeneity(&r, 0, Connectivity::Four).unwrap(), 1.0);
    }

    #[test]
    fn checkerboard_extremes() {
        let r = checkerboard(6);
        assert_eq!(equal_neighbor_fraction(&r, 0, Connectivity::Four).unwrap(), 0.0);
        assert_eq!(glcm_homogeneity(&r, 0, Connectivity::Four).unwrap(), 1.0 / 256.0);
    }

    #[test]
    fn two_by_two_hand_count() {
        // rows [5,5] and [9,9]: horizontal pairs equal, vertical unequal
        let r = Raster8::new(2, 2, 1, vec![5, 5, 9, 9], ColorSpace::Gray).unwrap();
        assert_eq!(equal_neighbor_fraction(&r, 0, Connectivity::Four).unwrap(), 0.5);
    }

    #[test]
    fn degenerate_geometry_rejected() {
        let r = Raster8::constant(1, 1, 1, 3, ColorSpace::Gray);
        assert!(matches!(
            equal_neighbor_fraction(&r, 0, Connectivity::Four),
            Err(AnalysisError::DegenerateGeometry)
        ));
    }

    #[test]
    fn single_row_and_column_work() {
        let r = Raster8::new(4, 1, 1, vec![1, 1, 2, 2], ColorSpace::Gray).unwrap();
        assert!((equal_neighbor_fraction(&r, 0, Connectivity::Four).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        let c = Raster8::new(1, 3, 1, vec![7, 7, 7], ColorSpace::Gray).unwrap();
        assert_eq!(equal_neighbor_fraction(&c, 0, Connectivity::Four).unwrap(), 1.0);
    }

    #[test]
    fn glcm_matches_direct_pairwise_sum() {
        let mut state = 5u64;
        let data: Vec<u8> = (0..63)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                (state >> 48) as u8
            })
            .collect();
        let r = Raster8::new(7, 3, 3, data, ColorSpace::Rgb).unwrap();
        for c in 0..3 {
            let got = glcm_homogeneity(&r, c, Connectivity::Four).unwrap();
            // direct oracle over explicit index pairs
            let mut sum = 0.0;
            let mut n = 0u64;
            for y in 0..3u32 {
                for x in 0..7u32 {
                    if x + 1 < 7 {
                        sum += 1.0
                            / (1.0 + (r.sample(x, y, c) as f64 - r.sample(x + 1, y, c) as f64).abs());
                        n += 1;
                    }
                    if y + 1 < 3 {
                        sum += 1.0
                            / (1.0 + (r.sample(x, y, c) as f64 - r.sample(x, y + 1, c) as f64).abs());
                        n += 1;
                    }
                }
            }
            assert!((got - sum / n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn level_stats_known_values() {
        let constant = Raster8::constant(4, 4, 1, 8, ColorSpace::Gray);
        assert_eq!(level_stats(&constant, 0), (1, 0, 0.0));

        // uniform over 4 values -> entropy exactly 2 bits
        let r = Raster8::new(4, 1, 1, vec![0, 10, 20, 30], ColorSpace::Gray).unwrap();
        let (distinct, bits, entropy) = level_stats(&r, 0);
        assert_eq!((distinct, bits), (4, 2));
        assert!((entropy - 2.0).abs() < 1e-12);
    }

    #[test]
    fn quantized_channel_bit_depth() {
        let mut state = 1234u64;
        let data: Vec<u8> = (0..(16 * 16 * 3))
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                (state >> 43) as u8
            })
            .collect();
        let r = Raster8::new(16, 16, 3, data, ColorSpace::Rgb).unwrap();
        let q = quantize_plane(&r, 7).unwrap();
        for c in 0..3 {
            let (distinct, bits, entropy) = level_stats(&q, c);
            assert!(distinct <= 8);
            assert!(bits <= 3);
            assert!(entropy <= bits as f64 + 1e-12);
        }
    }

    proptest! {
        #[test]
        fn quantization_never_decreases_equal_neighbors(
            data in prop::collection::vec(any::<u8>(), 75),
            levels in 1usize..8,
        ) {
            let r = Raster8::new(5, 5, 3, data, ColorSpace::Rgb).unwrap();
            for q in [quantize_full(&r, levels).unwrap(), quantize_plane(&r, levels).unwrap()] {
                for c in 0..3 {
                    for conn in [Connectivity::Four, Connectivity::Eight] {
                        let before = equal_neighbor_fraction(&r, c, conn).unwrap();
                        let after = equal_neighbor_fraction(&q, c, conn).unwrap();
                        prop_assert!(after >= before);
                    }
                }
            }
        }

        #[test]
        fn entropy_bounded_by_log_distinct(data in prop::collection::vec(any::<u8>(), 36)) {
            let r = Raster8::new(6, 6, 1, data, ColorSpace::Gray).unwrap();
            let (distinct, bits, entropy) = level_stats(&r, 0);
            prop_assert!(entropy <= (distinct as f64).log2() + 1e-12);
            prop_assert!(entropy <= bits as f64 + 1e-12);
        }
    }
}
