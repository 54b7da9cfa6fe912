//! Optimized algorithms against exhaustive enumeration.

mod common;

use proptest::prelude::*;
use strumscribe::barlines::postprocess_barlines_detailed;
use strumscribe::decoder::transcription_cost;
use strumscribe::*;

#[test]
fn viterbi_matches_enumeration_including_ties() {
    let mut rng = common::rng(2024);
    let mut checked = 0;
    for _ in 0..300 {
        let (vocab, measures, cfg) = common::random_decoding_instance(&mut rng);
        let Some(oracle) = common::viterbi_oracle(&measures, &vocab, &cfg) else {
            assert!(matches!(decode(&measures, &vocab, &cfg), Err(Error::Infeasible { .. })));
            continue;
        };
        let t = decode(&measures, &vocab, &cfg).unwrap();
        assert!((t.total_cost - oracle.cost).abs() <= 1e-9);
        let ids: Vec<usize> = t.entries.iter().map(|e| vocab.index_of(&e.pattern_id).unwrap()).collect();
        assert_eq!(ids, oracle.per_measure);
        let recomputed = transcription_cost(&t, &measures, &vocab, &cfg).unwrap();
        assert!((recomputed - t.total_cost).abs() <= 1e-9);
        checked += 1;
    }
    assert!(checked >= 200, "only {checked} feasible instances");
}

#[test]
fn emission_matches_brute_force_nearest_neighbour() {
    let mut rng = common::rng(77);
    for _ in 0..300 {
        let (vocab, measures, cfg) = common::random_decoding_instance(&mut rng);
        for p in vocab.patterns() {
            if p.measures() > measures.len() {
                continue;
            }
            let span = &measures[..p.measures()];
            let obs: Vec<&[f64]> = span.iter().map(|m| m.positions.as_slice()).collect();
            let expected = common::oracle_emission(&obs, p, cfg.sigma);
            let got = emission_cost(span, p, &cfg).unwrap().value();
            assert_eq!(got, expected);
        }
    }
}

#[test]
fn two_measure_pattern_cannot_start_on_last_measure() {
    let vocab = Vocabulary::new(vec![
        common::pattern("long", "4/4", &[&[0.0, 0.5], &[0.0]]),
        common::pattern("short", "4/4", &[&[0.0, 0.25, 0.5]]),
    ])
    .unwrap();
    let measures = vec![MeasureStrums::new(0, vec![0.0, 0.5]).unwrap()];
    let cfg = DecoderConfig::default();
    let oracle = common::viterbi_oracle(&measures, &vocab, &cfg).unwrap();
    let t = decode(&measures, &vocab, &cfg).unwrap();
    assert_eq!(t.entries[0].pattern_id, "short");
    assert_eq!(vocab.patterns()[oracle.per_measure[0]].id(), "short");
}

fn small_track() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.2f64..3.0, 1..=9).prop_map(|gaps| {
        let mut t = vec![0.0];
        for g in gaps {
            let last = *t.last().unwrap();
            t.push(last + g);
        }
        t
    })
}

proptest! {
    #[test]
    fn barline_dp_matches_enumeration(
        times in small_track(),
        factors in prop::sample::subsequence(vec![1u32, 2, 3], 1..=3),
        deletion in 0.0f64..3.0,
        insertion in 0.0f64..2.0,
        tempo in 0.0f64..20.0,
    ) {
        let raw = BarlineTrack::new(times).unwrap();
        let n = raw.times().len();
        for look in [1, 2, 4, n - 1] {
            let cfg = PostprocConfig {
                subdivision_factors: factors.clone(),
                deletion_penalty: deletion,
                insertion_penalty: insertion,
                tempo_change_penalty: tempo,
                max_lookahead: look,
                ..Default::default()
            };
            let dp = postprocess_barlines_detailed(&raw, &cfg).unwrap();
            let oracle = common::oracle_postprocess_cost(&raw, &cfg);
            prop_assert!((dp.cost - oracle).abs() <= 1e-9, "dp {} oracle {}", dp.cost, oracle);
        }
    }

    #[test]
    fn matching_is_maximum(
        r in prop::collection::vec(0.0f64..2.0, 0..=10),
        e in prop::collection::vec(0.0f64..2.0, 0..=10),
        tol in 0.01f64..0.3,
    ) {
        let m = match_events(&r, &e, tol);
        prop_assert_eq!(m.true_positives, common::oracle_matching(&r, &e, tol));
    }
}
