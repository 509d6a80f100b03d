use std::ffi::CStr;
use std::ptr;

use aqm_ffi::*;

fn re(x: f64) -> AqmComplex {
    AqmComplex { re: x, im: 0.0 }
}

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    unsafe {
        aqm_last_error_message(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(aqm_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn measure_plus_state_in_z_basis() {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let amps = [re(h), re(h)];
    let z = [re(1.0), re(0.0), re(0.0), re(-1.0)];
    let id = c"Z";
    unsafe {
        let mut state = ptr::null_mut();
        assert_eq!(
            aqm_state_from_pure(amps.as_ptr(), 2, &mut state),
            AqmStatus::Ok
        );
        let mut ctx = ptr::null_mut();
        assert_eq!(
            aqm_context_from_observable(id.as_ptr(), z.as_ptr(), 2, &mut ctx),
            AqmStatus::Ok
        );
        let mut len = 0;
        assert_eq!(aqm_context_len(ctx, &mut len), AqmStatus::Ok);
        assert_eq!(len, 2);

        let mut probs = [0.0; 2];
        assert_eq!(
            aqm_born_distribution(state, ctx, probs.as_mut_ptr(), 2),
            AqmStatus::Ok
        );
        assert!((probs[0] - 0.5).abs() < 1e-12 && (probs[1] - 0.5).abs() < 1e-12);

        let mut value = 0.0;
        let mut branch = 0;
        let mut post = ptr::null_mut();
        assert_eq!(
            aqm_measure(
                state,
                z.as_ptr(),
                2,
                ctx,
                7,
                0,
                &mut value,
                &mut branch,
                &mut post
            ),
            AqmStatus::Ok
        );
        assert_eq!(value, if branch == 0 { 1.0 } else { -1.0 });
        let mut mean = AqmComplex::default();
        assert_eq!(
            aqm_state_expectation(post, z.as_ptr(), 2, &mut mean),
            AqmStatus::Ok
        );
        assert!((mean.re - value).abs() < 1e-12);

        aqm_state_free(post);
        aqm_context_free(ctx);
        aqm_state_free(state);
    }
}

#[test]
fn condition_and_errors() {
    unsafe {
        let rho = [re(0.5), re(0.0), re(0.0), re(0.5)];
        let mut state = ptr::null_mut();
        assert_eq!(
            aqm_state_from_density(rho.as_ptr(), 2, &mut state),
            AqmStatus::Ok
        );
        let mut dim = 0;
        assert_eq!(aqm_state_dim(state, &mut dim), AqmStatus::Ok);
        assert_eq!(dim, 2);

        let e = [re(1.0), re(0.0), re(0.0), re(0.0)];
        let mut post = ptr::null_mut();
        assert_eq!(
            aqm_condition_on_event(state, e.as_ptr(), 2, &mut post),
            AqmStatus::Ok
        );
        let mut p = AqmComplex::default();
        aqm_state_expectation(post, e.as_ptr(), 2, &mut p);
        assert!((p.re - 1.0).abs() < 1e-12);
        aqm_state_free(post);

        // zero-mass event
        let mut pure0 = ptr::null_mut();
        let amps = [re(1.0), re(0.0)];
        aqm_state_from_pure(amps.as_ptr(), 2, &mut pure0);
        let e1 = [re(0.0), re(0.0), re(0.0), re(1.0)];
        let mut none = ptr::null_mut();
        assert_eq!(
            aqm_condition_on_event(pure0, e1.as_ptr(), 2, &mut none),
            AqmStatus::ImpossibleEvent
        );
        assert!(none.is_null());
        assert!(last_error().contains("zero probability"));
        aqm_state_free(pure0);

        let not_herm = [re(0.0), re(1.0), re(0.0), re(0.0)];
        let mut ctx = ptr::null_mut();
        assert_eq!(
            aqm_context_from_observable(c"X".as_ptr(), not_herm.as_ptr(), 2, &mut ctx),
            AqmStatus::NotHermitian
        );
        assert_eq!(aqm_state_dim(ptr::null(), &mut dim), AqmStatus::NullPointer);
        assert_eq!(
            aqm_state_dim(state, ptr::null_mut()),
            AqmStatus::NullPointer
        );

        let mut small = [0.0; 1];
        let diag = [re(1.0), re(0.0), re(0.0), re(2.0)];
        aqm_context_from_observable(c"D".as_ptr(), diag.as_ptr(), 2, &mut ctx);
        assert_eq!(
            aqm_born_distribution(state, ctx, small.as_mut_ptr(), 1),
            AqmStatus::BufferTooSmall
        );
        aqm_context_free(ctx);
        aqm_state_free(state);
    }
}

#[test]
fn interferometer_positions() {
    unsafe {
        let (mut da, mut db) = (f64::NAN, f64::NAN);
        assert_eq!(
            aqm_wave_probabilities(true, 0.0, &mut da, &mut db),
            AqmStatus::Ok
        );
        assert_eq!((da, db), (0.0, 1.0));
        assert_eq!(
            aqm_wave_probabilities(true, std::f64::consts::PI, &mut da, &mut db),
            AqmStatus::Ok
        );
        assert!((da - 1.0).abs() < 1e-12 && db.abs() < 1e-12);

        let mut report = AqmEquivalence::default();
        assert_eq!(
            aqm_interferometer_equivalence(
                AqmPolicy::DelayedRandom,
                0.5,
                3,
                20_000,
                7,
                &mut report
            ),
            AqmStatus::Ok
        );
        assert!(report.pass);
        assert_eq!(report.absent_events + report.present_events, 20_000);
        assert_eq!(report.present_freq_db, 1.0);
        assert_eq!(
            aqm_interferometer_equivalence(AqmPolicy::DelayedRandom, 1.5, 3, 10, 7, &mut report),
            AqmStatus::InvalidArgument
        );
    }
}

#[test]
fn two_slit_pattern_and_screens() {
    let sites = 64;
    let a = [0usize, 1];
    let b = [32usize, 33];
    let mut da = vec![0.0; sites];
    let mut dbv = vec![0.0; sites];
    let mut int = vec![0.0; sites];
    let mut tot = vec![0.0; sites];
    unsafe {
        assert_eq!(
            aqm_two_slit_pattern(
                sites,
                a.as_ptr(),
                2,
                b.as_ptr(),
                2,
                ptr::null(),
                da.as_mut_ptr(),
                dbv.as_mut_ptr(),
                int.as_mut_ptr(),
                tot.as_mut_ptr(),
            ),
            AqmStatus::Ok
        );
    }
    for k in 0..sites {
        assert!((da[k] + dbv[k] + int[k] - tot[k]).abs() < 1e-12);
    }
    assert!((tot.iter().sum::<f64>() - 1.0).abs() < 1e-12);

    let mut hist = vec![0u64; sites];
    let (mut na, mut nb) = (0, 0);
    unsafe {
        assert_eq!(
            aqm_stacked_screens(
                sites,
                a.as_ptr(),
                2,
                b.as_ptr(),
                2,
                ptr::null(),
                10_000,
                7,
                hist.as_mut_ptr(),
                &mut na,
                &mut nb,
            ),
            AqmStatus::Ok
        );
    }
    assert_eq!(hist.iter().sum::<u64>(), 10_000);
    assert_eq!(na + nb, 10_000);

    let overlap = [1usize];
    unsafe {
        assert_eq!(
            aqm_stacked_screens(
                sites,
                a.as_ptr(),
                2,
                overlap.as_ptr(),
                1,
                ptr::null(),
                10,
                7,
                hist.as_mut_ptr(),
                &mut na,
                &mut nb,
            ),
            AqmStatus::InvalidGeometry
        );
    }
}

#[test]
fn header_declares_the_api() {
    let header = include_str!("../include/aqm.h");
    for name in [
        "AqmStatus",
        "typedef struct AqmState AqmState",
        "typedef struct AqmContext AqmContext",
        "aqm_version",
        "aqm_last_error_message",
        "aqm_state_from_pure",
        "aqm_state_from_density",
        "aqm_state_free",
        "aqm_context_from_observable",
        "aqm_born_distribution",
        "aqm_measure",
        "aqm_condition_on_event",
        "aqm_wave_probabilities",
        "aqm_interferometer_equivalence",
        "aqm_two_slit_pattern",
        "aqm_stacked_screens",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}
