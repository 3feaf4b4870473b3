//! Property tests over task construction and splitting.

use cgcnn_core::fixtures;
use cgcnn_core::rng::derive_rng;
use cgcnn_core::sampler::{build_task, split_em, SampleMode, SampleSource, SamplerConfig};
use proptest::prelude::*;

fn cfg(groups: usize, per_group: usize, g: usize, gray: f64, jitter: f64) -> SamplerConfig {
    SamplerConfig {
        groups,
        per_group,
        patch_side: 7,
        channels: 3,
        slide_radius: g,
        gray_probability: gray,
        jitter_amplitude: jitter,
        mode: SampleMode::Rgb,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn tasks_have_exact_counts_windows_inside_and_offsets_in_ball(
        groups in 1usize..6,
        per_group in 1usize..8,
        g in 0usize..5,
        seed in 0u64..500,
    ) {
        let store = fixtures::synthetic_image_store(2, 40, 52, 77);
        let mut rng = derive_rng(seed, 0);
        let task = build_task(SampleSource::Rgb(&store), &cfg(groups, per_group, g, 0.4, 0.1), &mut rng).unwrap();
        prop_assert_eq!(task.len(), groups * per_group);
        prop_assert_eq!(task.classes, groups);

        for class in 0..groups {
            let members: Vec<_> = task.examples.iter().filter(|e| e.class == class).collect();
            prop_assert_eq!(members.len(), per_group);
            let seed_origin = members[0].origin; // instance one is the seed
            for e in &members {
                // window fully inside its image
                let img = &store.images()[e.plane];
                prop_assert!(e.origin.0 + 7 <= img.height());
                prop_assert!(e.origin.1 + 7 <= img.width());
                // offset within the L-infinity ball of radius g
                let dr = (e.origin.0 as i64 - seed_origin.0 as i64).unsigned_abs() as usize;
                let dc = (e.origin.1 as i64 - seed_origin.1 as i64).unsigned_abs() as usize;
                prop_assert!(dr <= g && dc <= g, "offset ({dr},{dc}) outside ball {g}");
                prop_assert_eq!(e.plane, members[0].plane);
            }
        }
    }

    #[test]
    fn grayscale_patches_have_exactly_equal_channels(seed in 0u64..200) {
        let store = fixtures::synthetic_image_store(1, 40, 40, 78);
        let mut rng = derive_rng(seed, 1);
        let task = build_task(
            SampleSource::Rgb(&store),
            &cfg(2, 6, 2, 1.0, 0.0), // always gray
            &mut rng,
        ).unwrap();
        for e in &task.examples {
            let d = e.patch.data();
            for r in 0..7 {
                for c in 0..7 {
                    prop_assert_eq!(d[[r, c, 0]], d[[r, c, 1]]);
                    prop_assert_eq!(d[[r, c, 1]], d[[r, c, 2]]);
                }
            }
        }
    }

    #[test]
    fn split_preserves_the_multiset(
        per_group in 2usize..10,
        e_fraction in 0.2f64..0.8,
        seed in 0u64..200,
    ) {
        let store = fixtures::synthetic_image_store(1, 40, 40, 79);
        let mut rng = derive_rng(seed, 2);
        let task = build_task(SampleSource::Rgb(&store), &cfg(3, per_group, 2, 0.4, 0.1), &mut rng).unwrap();
        let take = (per_group as f64 * e_fraction).round() as usize;
        prop_assume!(take > 0 && take < per_group);
        let (xe, xm) = split_em(&task, e_fraction, &mut rng).unwrap();
        prop_assert_eq!(xe.per_class, take);
        prop_assert_eq!(xm.per_class, per_group - take);

        let key = |e: &cgcnn_core::sampler::TaskExample| {
            (e.class, e.origin, e.patch.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>())
        };
        let mut union: Vec<_> = xe.examples.iter().chain(xm.examples.iter()).map(key).collect();
        let mut original: Vec<_> = task.examples.iter().map(key).collect();
        union.sort();
        original.sort();
        prop_assert_eq!(union, original);
    }
}
