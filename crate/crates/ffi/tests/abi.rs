use std::ffi::CStr;
use std::ptr;

use diffevo_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(diffevo_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(diffevo_version()) };
    assert_eq!(v.to_str().unwrap(), diffevo::VERSION);
}

#[test]
fn schedule_roundtrip() {
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(diffevo_schedule_new(DiffevoScheduleKind::Cosine, 10, 1.0, 1e-4, &mut s), DiffevoStatus::Ok);
        assert_eq!(diffevo_schedule_steps(s), 10);
        let mut a = 0.0;
        assert_eq!(diffevo_schedule_alpha(s, 5, &mut a), DiffevoStatus::Ok);
        assert!((a - 0.5).abs() < 1e-12);
        let mut sigma = -1.0;
        assert_eq!(diffevo_schedule_sigma(s, 0, &mut sigma), DiffevoStatus::InvalidArgument);
        assert_eq!(sigma, -1.0);
        assert!(last_error().contains("outside"));
        assert_eq!(diffevo_schedule_sigma(s, 3, &mut sigma), DiffevoStatus::Ok);
        assert!(sigma >= 0.0);
        assert!(last_error().is_empty());
        diffevo_schedule_free(s);
        diffevo_schedule_free(ptr::null_mut());
    }
}

#[test]
fn invalid_inputs_report_status() {
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(diffevo_schedule_new(DiffevoScheduleKind::Linear, 1, 1.0, 1e-4, &mut s), DiffevoStatus::InvalidArgument);
        assert!(s.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(
            diffevo_schedule_new(DiffevoScheduleKind::Linear, 5, 1.0, 1e-4, ptr::null_mut()),
            DiffevoStatus::NullPointer
        );
        assert_eq!(diffevo_schedule_alpha(ptr::null(), 0, &mut 0.0), DiffevoStatus::NullPointer);
    }
}

#[test]
fn estimate_origin_matches_core() {
    let members = [0.0, 0.0, 1.0, 0.0, 0.0, 2.0];
    let weights = [0.2, 0.5, 0.3];
    let x_t = [0.4, 0.3];
    let mut x0 = [0.0; 2];
    let status = unsafe { diffevo_estimate_origin(x_t.as_ptr(), members.as_ptr(), weights.as_ptr(), 3, 2, 0.6, x0.as_mut_ptr()) };
    assert_eq!(status, DiffevoStatus::Ok);
    let pop = diffevo::Population::new(0, 2, members.to_vec()).unwrap().with_fitness(weights.to_vec()).unwrap();
    let expect = diffevo::estimate_origin(&x_t, &pop, 0.6).unwrap();
    assert_eq!(x0.to_vec(), expect.x0_hat);
    let zero = [0.0; 3];
    let status = unsafe { diffevo_estimate_origin(x_t.as_ptr(), members.as_ptr(), zero.as_ptr(), 3, 2, 0.6, x0.as_mut_ptr()) };
    assert_eq!(status, DiffevoStatus::DegenerateWeights);
}

#[test]
fn cartpole_rollout_through_abi() {
    let zeros = vec![0.0; 58];
    let mut reward = 0u32;
    unsafe {
        assert_eq!(diffevo_cartpole_rollout(DiffevoArch::Small, zeros.as_ptr(), 58, 3, &mut reward), DiffevoStatus::Ok);
        assert!((1..100).contains(&reward));
        assert_eq!(diffevo_cartpole_rollout(DiffevoArch::Deep, zeros.as_ptr(), 58, 3, &mut reward), DiffevoStatus::InvalidArgument);
    }
}

#[test]
fn benchmark_run_through_abi() {
    unsafe {
        let mut l = ptr::null_mut();
        let mut s = ptr::null_mut();
        let mut r = ptr::null_mut();
        assert_eq!(diffevo_landscape_new(DiffevoBenchmark::Himmelblau, &mut l), DiffevoStatus::Ok);
        let (mut raw, mut fit) = (0.0, 0.0);
        assert_eq!(diffevo_landscape_eval(l, 3.0, 2.0, &mut raw, &mut fit), DiffevoStatus::Ok);
        assert_eq!((raw, fit), (0.0, 1.0));
        assert_eq!(diffevo_schedule_new(DiffevoScheduleKind::Cosine, 25, 1.0, 1e-4, &mut s), DiffevoStatus::Ok);
        assert_eq!(diffevo_run_benchmark(l, s, 256, 7, 4.0, &mut r), DiffevoStatus::Ok);
        let (mut n, mut d, mut evals) = (0, 0, 0);
        assert_eq!(diffevo_run_shape(r, &mut n, &mut d, &mut evals), DiffevoStatus::Ok);
        assert_eq!((n, d, evals), (256, 2, 256 * 24));
        let mut buf = vec![0.0; n * d];
        assert_eq!(diffevo_run_population(r, buf.as_mut_ptr(), buf.len()), DiffevoStatus::Ok);
        assert_eq!(diffevo_run_population(r, buf.as_mut_ptr(), 3), DiffevoStatus::InvalidArgument);
        let (mut mean, mut h) = (0.0, 0.0);
        assert_eq!(diffevo_run_elite_stats(r, l, 64, &mut mean, &mut h), DiffevoStatus::Ok);
        let land = diffevo::RescaledLandscape::standard(diffevo::Benchmark::Himmelblau).unwrap();
        let sched = diffevo::Schedule::cosine(25, 1.0, 1e-4).unwrap();
        let opts = diffevo::EvolveOptions { population: 256, seed: 7, ..Default::default() };
        let direct = diffevo::evolve(&land, &diffevo::DensityMap::Power { k: 4.0 }, &sched, &opts).unwrap();
        assert_eq!(buf, direct.population.members());
        let grid = diffevo::metrics::EntropyGrid::default();
        let (m, e, _) = diffevo::metrics::elite_statistics(&direct.population, &land, 64, &grid).unwrap();
        assert_eq!((mean, h), (m, e));
        diffevo_run_free(r);
        diffevo_schedule_free(s);
        diffevo_landscape_free(l);
    }
}
