use enumsm::enumerator::{DiscreteBound, DEFAULT_MAX_STAGE};
use enumsm::information::{self, info_finite, InfoContext, DEFAULT_CAP};
use enumsm::prefix::encode_pair;
use enumsm::Prefix;

/// Largest `I(a:b) − I((a,a'):b)` over strings of at most 4 bits at the
/// shipped stage.
const ADJUNCTION_CONSTANT: i64 = 3;

#[test]
fn information_is_monotone_under_adjunction() {
    let m = DiscreteBound::at_stage(DEFAULT_MAX_STAGE).unwrap();
    let xs: Vec<Prefix> = Prefix::all_up_to(4).collect();
    let mut worst = i64::MIN;
    for a in &xs {
        for a2 in &xs {
            for b in &xs {
                let before = info_finite(a, b, &m).i.finite();
                let after = info_finite(&encode_pair(a, a2), b, &m).i.finite();
                if let (Some(x), Some(y)) = (before, after) {
                    worst = worst.max(x - y);
                }
            }
        }
    }
    assert!(worst > i64::MIN);
    assert!(worst <= ADJUNCTION_CONSTANT, "{worst}");
}

/// Not guaranteed in general (an `I_t(x:y)` inside the i-sum can fall), but
/// holds on the shipped corpus.
#[test]
fn bounds_do_not_decrease_across_shipped_stages() {
    let t = DEFAULT_MAX_STAGE;
    let m = DiscreteBound::at_stage(t - 2).unwrap();
    let mut pairs = information::corpus(&m, 12, 500, 2024);
    pairs.sort();
    pairs.dedup();
    pairs.truncate(60);
    let reports: Vec<_> = (t - 2..=t)
        .map(|s| information::info_reports(&pairs, &InfoContext::at_stage(s).unwrap(), DEFAULT_CAP))
        .collect();
    for w in reports.windows(2) {
        for (a, b) in w[0].iter().zip(&w[1]) {
            assert!(a.lower.value <= b.lower.value, "{:?} {:?}", a.a, a.b);
            assert!(a.sup.value <= b.sup.value, "{:?} {:?}", a.a, a.b);
            assert!(a.lower.stage < b.lower.stage);
        }
    }
}
