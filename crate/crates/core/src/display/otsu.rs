//! Otsu threshold selection on a 256-bin grey histogram.

use super::DisplayError;

/// Keeps `(s0*n1 - s1*n0)^2 * n0*n1` inside 384 bits.
const MAX_TOTAL: u64 = 1 << 48;

/// Returns the threshold `t` that maximises the between-class variance of
/// `{<= t}` versus `{> t}`, taking the smallest `t` on ties.
///
/// The comparison is exact: with class counts `n0, n1` and grey sums `s0, s1`
/// the variance is proportional to `(s0*n1 - s1*n0)^2 / (n0*n1)`, so two
/// candidates are compared by cross-multiplying in 384-bit integers.
pub fn otsu_threshold(histogram: &[u64; 256]) -> Result<u8, DisplayError> {
    let total = histogram
        .iter()
        .try_fold(0u64, |acc, &c| acc.checked_add(c))
        .filter(|&t| t <= MAX_TOTAL)
        .ok_or_else(|| DisplayError::DegenerateImage("histogram total exceeds 2^48".into()))?;
    let occupied = histogram.iter().filter(|&&c| c > 0).count();
    if total == 0 || occupied < 2 {
        return Err(DisplayError::DegenerateImage(
            "histogram has fewer than two grey levels".into(),
        ));
    }
    let grey_sum: u128 = histogram
        .iter()
        .enumerate()
        .map(|(g, &c)| g as u128 * u128::from(c))
        .sum();

    let mut best: Option<(u8, Score)> = None;
    let (mut n0, mut s0) = (0u128, 0u128);
    for (t, &count) in histogram.iter().enumerate().take(255) {
        n0 += u128::from(count);
        s0 += t as u128 * u128::from(count);
        let n1 = u128::from(total) - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let s1 = grey_sum - s0;
        let score = Score::new(s0 * n1, s1 * n0, n0 * n1);
        if best.as_ref().is_none_or(|(_, b)| score.beats(b)) {
            best = Some((t as u8, score));
        }
    }
    // Two occupied levels guarantee at least one split with both classes.
    Ok(best.map(|(t, _)| t).expect("two occupied grey levels"))
}

/// `diff^2 / denom` kept as an exact fraction.
struct Score {
    diff: u128,
    denom: u128,
}

impl Score {
    fn new(a: u128, b: u128, denom: u128) -> Self {
        Self {
            diff: a.abs_diff(b),
            denom,
        }
    }

    fn beats(&self, other: &Score) -> bool {
        // self.diff^2 * other.denom > other.diff^2 * self.denom
        let lhs = mul3(self.diff, self.diff, other.denom);
        let rhs = mul3(other.diff, other.diff, self.denom);
        lhs > rhs
    }
}

/// Unsigned 384-bit product, most significant limb first.
fn mul3(a: u128, b: u128, c: u128) -> [u128; 3] {
    let (hi, lo) = mul_wide(a, b);
    let (lo_hi, lo_lo) = mul_wide(lo, c);
    let (hi_hi, hi_lo) = mul_wide(hi, c);
    let (mid, carry) = hi_lo.overflowing_add(lo_hi);
    [hi_hi + u128::from(carry), mid, lo_lo]
}

fn mul_wide(a: u128, b: u128) -> (u128, u128) {
    const MASK: u128 = u64::MAX as u128;
    let (a1, a0) = (a >> 64, a & MASK);
    let (b1, b0) = (b >> 64, b & MASK);
    let p00 = a0 * b0;
    let p01 = a0 * b1;
    let p10 = a1 * b0;
    let p11 = a1 * b1;
    let mid = (p00 >> 64) + (p01 & MASK) + (p10 & MASK);
    let lo = (p00 & MASK) | (mid << 64);
    let hi = p11 + (p01 >> 64) + (p10 >> 64) + (mid >> 64);
    (hi, lo)
}

pub fn grey_histogram(grey: &image::GrayImage) -> [u64; 256] {
    let mut h = [0u64; 256];
    for p in grey.as_raw() {
        h[usize::from(*p)] += 1;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bimodal_extremes_pick_smallest_threshold() {
        let mut h = [0u64; 256];
        h[0] = 10;
        h[255] = 10;
        assert_eq!(otsu_threshold(&h).unwrap(), 0);
    }

    #[test]
    fn two_levels_split_between_them() {
        let mut h = [0u64; 256];
        h[50] = 100;
        h[200] = 100;
        // Every t in [50, 199] separates the modes equally well.
        assert_eq!(otsu_threshold(&h).unwrap(), 50);
    }

    #[test]
    fn degenerate_histograms() {
        assert!(otsu_threshold(&[0; 256]).is_err());
        let mut h = [0u64; 256];
        h[17] = 1000;
        assert!(matches!(otsu_threshold(&h), Err(DisplayError::DegenerateImage(_))));
    }

    #[test]
    fn wide_multiply_matches_u128_when_it_fits() {
        for (a, b) in [(0u128, 5u128), (u64::MAX as u128, u64::MAX as u128), (123456789, 987654321)] {
            assert_eq!(mul_wide(a, b), (0, a * b));
        }
        let (hi, lo) = mul_wide(u128::MAX, 2);
        assert_eq!((hi, lo), (1, u128::MAX - 1));
    }

    #[test]
    fn huge_counts_do_not_overflow() {
        let mut h = [0u64; 256];
        h[10] = 1 << 46;
        h[240] = 1 << 46;
        h[100] = 7;
        let t = otsu_threshold(&h).unwrap();
        assert!((10..240).contains(&t));
        h[0] = 1 << 47;
        assert!(otsu_threshold(&h).is_err());
    }
}
