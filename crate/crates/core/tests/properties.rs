use eccfm::backbone::{BackboneConfig, Checkpoint, ModelParams};
use eccfm::channel::modulate_bpsk;
use eccfm::codes::{derive_generator, parse_alist, serialize_alist, ParityCheckMatrix};
use eccfm::syndrome::{soft_syndrome, syndrome_error_sum};
use eccfm::trainer::{bce, cosine_lr, prop1_check};
use proptest::prelude::*;

/// Random m x n binary matrices without zero rows or columns.
fn matrix() -> impl Strategy<Value = ParityCheckMatrix> {
    (2usize..5, 3usize..6)
        .prop_flat_map(|(m, extra)| {
            let n = m + extra;
            prop::collection::vec(prop::collection::vec(0u8..2, n), m)
        })
        .prop_filter_map("zero row or column", |rows| ParityCheckMatrix::from_rows(rows).ok())
}

fn full_rank() -> impl Strategy<Value = ParityCheckMatrix> {
    matrix().prop_filter("rank deficient", |h| h.rank() == h.m())
}

fn xor(a: &[u8], b: &[u8]) -> Vec<u8> {
    a.iter().zip(b).map(|(x, y)| x ^ y).collect()
}

proptest! {
    #[test]
    fn alist_round_trip(h in matrix()) {
        let back = parse_alist(&serialize_alist(&h)).unwrap();
        prop_assert_eq!(back.rows(), h.rows());
        prop_assert_eq!(back.fingerprint(), h.fingerprint());
    }

    #[test]
    fn syndrome_is_linear(h in matrix(), seed in any::<u64>()) {
        let n = h.n();
        let a: Vec<u8> = (0..n).map(|i| ((seed >> i) & 1) as u8).collect();
        let b: Vec<u8> = (0..n).map(|i| ((seed >> (i + 20)) & 1) as u8).collect();
        let lhs = h.syndrome(&xor(&a, &b)).unwrap();
        let rhs = xor(&h.syndrome(&a).unwrap(), &h.syndrome(&b).unwrap());
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn encoded_words_have_zero_syndrome(h in full_rank(), index in any::<u64>()) {
        let g = derive_generator(&h).unwrap();
        let c = g.encode_index(index % (1u64 << g.k()));
        prop_assert!(h.syndrome(&c.bits).unwrap().iter().all(|&s| s == 0));
        let y = modulate_bpsk(&c.bits).unwrap();
        prop_assert_eq!(syndrome_error_sum(&y, &h).unwrap(), 0);
    }

    #[test]
    fn soft_syndrome_stays_in_unit_interval(
        h in matrix(),
        xs in prop::collection::vec(-3.0f64..3.0, 10),
        sigma in 0.05f64..3.0,
    ) {
        let x = &xs[..h.n()];
        let s = soft_syndrome(x, &h, sigma).unwrap();
        prop_assert!(s.values.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!(s.condition_clamped() >= 0.0);
    }

    #[test]
    fn consistency_bound_holds(p in 0.0f64..=1.0, q in 0.0f64..=1.0, bit in 0u8..2) {
        prop_assert!(prop1_check(&[p], &[q], &[bit])[0]);
        prop_assert!(bce(&[p], &[bit]).unwrap() >= 0.0);
    }

    #[test]
    fn cosine_schedule_is_bounded(epoch in 0usize..500, epochs in 1usize..500) {
        let lr = cosine_lr(epoch.min(epochs), epochs, 1e-3, 1e-6);
        prop_assert!((1e-6 - 1e-15..=1e-3 + 1e-15).contains(&lr));
    }

    #[test]
    fn checkpoint_bytes_round_trip(seed in any::<u64>()) {
        let params = ModelParams::init(BackboneConfig::mlp(7, 3), seed).unwrap();
        let ck = Checkpoint { params, training: None };
        prop_assert_eq!(Checkpoint::from_bytes(&ck.to_bytes()).unwrap(), ck);
    }
}
