//! Property tests for the co-occurrence machinery: exact agreement with a
//! brute-force pair enumerator, simplex and symmetry invariants, and
//! 180-degree rotation invariance of the symmetrized matrix.

use proptest::prelude::*;

use edgema::features::{extract_values, FeatureGrid};
use edgema::frame::GrayFrame;
use edgema::glcm::{Angle, Glcm, GlcmOffset};

fn brute_force_counts(frame: &GrayFrame, offset: GlcmOffset, levels: usize) -> Vec<u64> {
    let (dr, dc) = offset.displacement();
    let mut counts = vec![0u64; levels * levels];
    for r in 0..frame.height() as isize {
        for c in 0..frame.width() as isize {
            let (r2, c2) = (r + dr, c + dc);
            if r2 < 0 || c2 < 0 || r2 >= frame.height() as isize || c2 >= frame.width() as isize {
                continue;
            }
            let i = frame.intensity(r as usize, c as usize) as usize;
            let j = frame.intensity(r2 as usize, c2 as usize) as usize;
            if i < levels && j < levels {
                counts[i * levels + j] += 1;
            }
        }
    }
    counts
}

fn arb_frame(levels: usize) -> impl Strategy<Value = GrayFrame> {
    (1usize..=32, 1usize..=32).prop_flat_map(move |(w, h)| {
        proptest::collection::vec(0..levels as u8, w * h)
            .prop_map(move |data| GrayFrame::new(w, h, data).unwrap())
    })
}

fn arb_offset() -> impl Strategy<Value = GlcmOffset> {
    ((0usize..4), 1u32..=5).prop_map(|(i, d)| GlcmOffset::new(Angle::ALL[i], d).unwrap())
}

proptest! {
    #[test]
    fn counts_equal_brute_force(
        levels in prop_oneof![Just(2usize), Just(8), Just(32)],
        frame_and_offset in (1usize..=32, 1usize..=32, 0usize..4, 1u32..=5, any::<u64>()),
    ) {
        let (w, h, angle_idx, d, seed) = frame_and_offset;
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<u8> = (0..w * h).map(|_| rng.random_range(0..levels as u16) as u8).collect();
        let frame = GrayFrame::new(w, h, data).unwrap();
        let offset = GlcmOffset::new(Angle::ALL[angle_idx], d).unwrap();
        let glcm = Glcm::compute(&frame, offset, levels);
        prop_assert_eq!(glcm.counts(), &brute_force_counts(&frame, offset, levels)[..]);
    }

    #[test]
    fn probs_form_a_symmetric_simplex(frame in arb_frame(8), offset in arb_offset()) {
        let glcm = Glcm::compute(&frame, offset, 8);
        let total: u64 = glcm.counts().iter().sum();
        let sum: f64 = glcm.probs().iter().sum();
        if total > 0 {
            prop_assert!((sum - 1.0).abs() < 1e-12);
        } else {
            prop_assert_eq!(sum, 0.0);
        }
        for i in 0..8 {
            for j in 0..8 {
                prop_assert_eq!(glcm.prob(i, j), glcm.prob(j, i));
            }
        }
    }

    #[test]
    fn rotation_by_180_preserves_probs(frame in arb_frame(8), offset in arb_offset()) {
        let rotated = GrayFrame::new(
            frame.width(),
            frame.height(),
            frame.intensities().iter().rev().copied().collect(),
        )
        .unwrap();
        let a = Glcm::compute(&frame, offset, 8);
        let b = Glcm::compute(&rotated, offset, 8);
        prop_assert_eq!(a.probs(), b.probs());
    }

    #[test]
    fn extraction_is_bit_deterministic(frame in arb_frame(32)) {
        prop_assume!(frame.width() >= 2 && frame.height() >= 2);
        let grid = FeatureGrid::reduced();
        let a = extract_values(&frame, &grid, 32).unwrap();
        let b = extract_values(&frame, &grid, 32).unwrap();
        let a_bits: Vec<u64> = a.iter().map(|v| v.to_bits()).collect();
        let b_bits: Vec<u64> = b.iter().map(|v| v.to_bits()).collect();
        prop_assert_eq!(a_bits, b_bits);
    }
}
