use aqm_core::interferometer::{
    equivalence_report, equivalence_report_with, simulate, wave_probabilities, BuiltinPolicy,
    ChoicePolicy, Detector, DeviceConfig, FlightPhase, KernelDarkField, ParticleModel, Path,
    PhotonEvent, SplitterRatio,
};
use aqm_core::linalg::c;
use aqm_core::rng::TrialRng;
use aqm_core::Result;
use num_complex::Complex64;
use rand::Rng;

/// Amplitude sum over both paths, written out term by term.
fn oracle(m4: bool, phase_a: f64) -> (f64, f64) {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let (t, r, i) = (c(h, 0.0), c(0.0, h), c(0.0, 1.0));
    let pa = Complex64::from_polar(1.0, phase_a);
    // path A: transmitted at M1, reflected at M3; path B: reflected at M1, M2
    let amp_a = t * i * pa;
    let amp_b = r * i;
    if m4 {
        // at M4 path A reaches D_A by transmission, D_B by reflection
        let da = amp_a * t + amp_b * r;
        let db = amp_a * r + amp_b * t;
        (da.norm_sqr(), db.norm_sqr())
    } else {
        (amp_a.norm_sqr(), amp_b.norm_sqr())
    }
}

#[test]
fn wave_model_matches_hand_amplitudes() {
    for m4 in [false, true] {
        for phase in [0.0, 0.3, std::f64::consts::FRAC_PI_2, std::f64::consts::PI] {
            let cfg = DeviceConfig {
                path_a_phase: phase,
                ..DeviceConfig::position_a().with_m4(m4)
            };
            let (da, db) = wave_probabilities(&cfg).unwrap();
            let (oa, ob) = oracle(m4, phase);
            assert!(
                (da - oa).abs() < 1e-12 && (db - ob).abs() < 1e-12,
                "{m4} {phase}"
            );
        }
    }
}

#[test]
fn always_a_within_binomial_bound() {
    let r = equivalence_report(&BuiltinPolicy::Always { m4_present: false }, 100_000, 7).unwrap();
    let a = r.absent.as_ref().unwrap();
    assert!(r.present.is_none());
    assert!(r.max_deviation <= 0.0063, "{r:?}");
    assert!((a.freq_da - 0.5).abs() <= 0.005);
    assert!(r.pass);
}

#[test]
fn always_b_has_zero_deviation() {
    let r = equivalence_report(&BuiltinPolicy::Always { m4_present: true }, 10_000, 7).unwrap();
    assert_eq!(r.max_deviation, 0.0);
    assert!(r.pass);
}

#[test]
fn delayed_random_sub_ensembles() {
    let policy = BuiltinPolicy::DelayedRandom { p: 0.5, seed: 17 };
    let events = simulate(
        &KernelDarkField,
        &SplitterRatio::default(),
        &policy,
        100_000,
        3,
    )
    .unwrap();
    let present: Vec<&PhotonEvent> = events.iter().filter(|e| e.m4_at_arrival).collect();
    let absent: Vec<&PhotonEvent> = events.iter().filter(|e| !e.m4_at_arrival).collect();
    assert!(present.iter().all(|e| e.detector == Detector::DB));
    let da = absent.iter().filter(|e| e.detector == Detector::DA).count() as f64;
    assert!((da / absent.len() as f64 - 0.5).abs() <= 0.008);
    // the late coin is fair
    assert!((present.len() as f64 / 1e5 - 0.5).abs() <= 0.0063);
}

#[test]
fn every_builtin_policy_is_equivalent() {
    let policies = [
        BuiltinPolicy::Always { m4_present: false },
        BuiltinPolicy::Always { m4_present: true },
        BuiltinPolicy::DelayedRandom { p: 0.3, seed: 2 },
        BuiltinPolicy::DelayedAlternating,
    ];
    for p in policies {
        let r = equivalence_report(&p, 100_000, 11).unwrap();
        assert!(r.pass, "{p:?}: {r:?}");
    }
}

/// Agrees with `DelayedAlternating` after M1 and disagrees before it.
struct ContraryBeforeM1;

impl ChoicePolicy for ContraryBeforeM1 {
    fn m4_present(&self, event: u64, phase: FlightPhase) -> bool {
        match phase {
            FlightPhase::BeforeM1 => event % 2 == 0,
            FlightPhase::AfterM1 => event % 2 == 0,
        }
    }
}

#[test]
fn decisions_before_m1_do_not_change_outcomes() {
    let s = SplitterRatio::default();
    let a = simulate(
        &KernelDarkField,
        &s,
        &BuiltinPolicy::DelayedAlternating,
        20_000,
        5,
    )
    .unwrap();
    let b = simulate(&KernelDarkField, &s, &ContraryBeforeM1, 20_000, 5).unwrap();
    assert_eq!(a, b);
}

#[test]
fn kernel_locality_without_m4() {
    let policy = BuiltinPolicy::DelayedRandom { p: 0.5, seed: 1 };
    let events = simulate(
        &KernelDarkField,
        &SplitterRatio::default(),
        &policy,
        20_000,
        9,
    )
    .unwrap();
    for e in events.iter().filter(|e| !e.m4_at_arrival) {
        let expected = match e.kernel_path {
            Path::A => Detector::DA,
            Path::B => Detector::DB,
        };
        assert_eq!(e.detector, expected);
    }
}

#[test]
fn unequal_splitter_stays_normalized() {
    let theta = 0.37_f64;
    let s = SplitterRatio {
        t: c(theta.cos(), 0.0),
        r: c(0.0, theta.sin()),
    };
    let r = equivalence_report_with(
        &KernelDarkField,
        &s,
        &BuiltinPolicy::DelayedRandom { p: 0.5, seed: 4 },
        100_000,
        8,
    )
    .unwrap();
    assert!(r.pass, "{r:?}");
}

/// With M4 present, sends path-A kernels to D_A: the path leaks into the
/// outcome.
struct LeakyKernel;

impl ParticleModel for LeakyKernel {
    fn run(
        &self,
        splitter: &SplitterRatio,
        policy: &dyn ChoicePolicy,
        event: u64,
        rng: &mut TrialRng,
    ) -> Result<PhotonEvent> {
        let kernel_path = if rng.gen::<f64>() < splitter.t.norm_sqr() {
            Path::A
        } else {
            Path::B
        };
        let m4_at_arrival = policy.m4_present(event, FlightPhase::AfterM1);
        let detector = match kernel_path {
            Path::A => Detector::DA,
            Path::B => Detector::DB,
        };
        Ok(PhotonEvent {
            event,
            kernel_path,
            m4_at_arrival,
            detector,
            seed: rng.seed(),
        })
    }
}

#[test]
fn leaky_particle_model_fails_equivalence() {
    let r = equivalence_report_with(
        &LeakyKernel,
        &SplitterRatio::default(),
        &BuiltinPolicy::Always { m4_present: true },
        10_000,
        1,
    )
    .unwrap();
    assert!(!r.pass);
    assert!(r.max_deviation > 0.4);
}

#[test]
fn policy_config_round_trips_through_json() {
    let p = BuiltinPolicy::DelayedRandom { p: 0.25, seed: 3 };
    let text = serde_json::to_string(&p).unwrap();
    assert_eq!(text, r#"{"kind":"delayed-random","p":0.25,"seed":3}"#);
    assert_eq!(serde_json::from_str::<BuiltinPolicy>(&text).unwrap(), p);
    assert!(
        serde_json::from_str::<BuiltinPolicy>(r#"{"kind":"always","m4_present":true,"x":1}"#)
            .is_err()
    );
}
