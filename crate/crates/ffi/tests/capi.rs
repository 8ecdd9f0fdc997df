use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use zdmem_ffi::*;

unsafe fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    zd_last_error(buf.as_mut_ptr(), buf.len());
    CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
}

unsafe fn pd_game() -> *mut ZdGame {
    let mut g = ptr::null_mut();
    assert_eq!(zd_game_new_pd(3.0, 0.0, 5.0, 1.0, &mut g), ZdStatus::Ok);
    g
}

#[test]
fn tft_against_alld_absorbs_in_mutual_defection() {
    unsafe {
        let g = pd_game();
        let (mut tft, mut alld) = (ptr::null_mut(), ptr::null_mut());
        let name = CString::new("tft").unwrap();
        assert_eq!(zd_strategy_builtin(g, name.as_ptr(), 1, 1, &mut tft), ZdStatus::Ok);
        let name = CString::new("alld").unwrap();
        assert_eq!(zd_strategy_builtin(g, name.as_ptr(), 1, 2, &mut alld), ZdStatus::Ok);
        let strategies = [tft as *const ZdStrategy, alld as *const ZdStrategy];
        let mut chain = ptr::null_mut();
        assert_eq!(zd_chain_new(g, strategies.as_ptr(), 2, 0.0, &mut chain), ZdStatus::Ok);
        assert_eq!(zd_chain_num_states(chain), 4);
        let mut st = ptr::null_mut();
        assert_eq!(zd_chain_stationary(chain, &mut st), ZdStatus::Ok);
        assert_eq!(zd_stationary_count(st), 1);
        let mut pi = [0.0; 4];
        let mut needed = 0;
        assert_eq!(zd_stationary_copy(st, 0, pi.as_mut_ptr(), 4, &mut needed), ZdStatus::Ok);
        assert_eq!(pi, [0.0, 0.0, 0.0, 1.0]);
        let mut r = [1.0; 2];
        assert_eq!(
            zd_akin_residual(tft, st, 0, r.as_mut_ptr(), 2, &mut needed),
            ZdStatus::Ok
        );
        assert_eq!(r, [0.0, 0.0]);
        zd_stationary_free(st);
        zd_chain_free(chain);
        zd_strategy_free(tft);
        zd_strategy_free(alld);
        zd_game_free(g);
    }
}

#[test]
fn random_pair_satisfies_akin() {
    unsafe {
        let g = pd_game();
        let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(zd_strategy_random(g, 1, 2, 11, &mut a), ZdStatus::Ok);
        assert_eq!(zd_strategy_random(g, 2, 1, 12, &mut b), ZdStatus::Ok);
        let mut chain = ptr::null_mut();
        let s = [a as *const ZdStrategy, b as *const ZdStrategy];
        assert_eq!(zd_chain_new(g, s.as_ptr(), 2, 0.0, &mut chain), ZdStatus::Ok);
        let mut st = ptr::null_mut();
        assert_eq!(zd_chain_stationary(chain, &mut st), ZdStatus::Ok);
        for h in [a, b] {
            let mut r = [0.0; 2];
            assert_eq!(
                zd_akin_residual(h, st, 0, r.as_mut_ptr(), 2, ptr::null_mut()),
                ZdStatus::Ok
            );
            assert!(r.iter().all(|v| v.abs() < 1e-12));
        }
        zd_stationary_free(st);
        zd_chain_free(chain);
        zd_strategy_free(a);
        zd_strategy_free(b);
        zd_game_free(g);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    unsafe {
        let mut g = ptr::null_mut();
        assert_eq!(zd_game_new_pd(1.0, 0.0, 5.0, 3.0, &mut g), ZdStatus::InvalidArgument);
        assert!(g.is_null());
        assert!(!last_error().is_empty());

        let g = pd_game();
        let mut s = ptr::null_mut();
        let name = CString::new("nope").unwrap();
        assert_eq!(
            zd_strategy_builtin(g, name.as_ptr(), 1, 1, &mut s),
            ZdStatus::UnknownBuiltin
        );
        assert!(last_error().contains("nope"));

        let rows = [0.9, 0.0, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5];
        assert_eq!(
            zd_strategy_from_rows(g, 1, 1, rows.as_ptr(), 8, &mut s),
            ZdStatus::Infeasible
        );
        assert_eq!(
            zd_strategy_from_rows(g, 1, 1, rows.as_ptr(), 7, &mut s),
            ZdStatus::Dimension
        );
        assert_eq!(zd_strategy_builtin(g, ptr::null(), 1, 1, &mut s), ZdStatus::NullPointer);

        let good = [1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0];
        assert_eq!(zd_strategy_from_rows(g, 1, 1, good.as_ptr(), 8, &mut s), ZdStatus::Ok);
        let mut small = [0.0; 4];
        let mut needed = 0;
        assert_eq!(
            zd_strategy_probs(s, small.as_mut_ptr(), 4, &mut needed),
            ZdStatus::BufferTooSmall
        );
        assert_eq!(needed, 8);
        let mut big = [0.0; 8];
        assert_eq!(zd_strategy_probs(s, big.as_mut_ptr(), 8, &mut needed), ZdStatus::Ok);
        assert_eq!(big, good);
        assert_eq!(last_error(), "");
        zd_strategy_free(s);
        zd_game_free(g);
        zd_game_free(ptr::null_mut());
    }
}

#[test]
fn general_game_and_version() {
    unsafe {
        let actions = [2usize, 2];
        let payoffs = [3.0, 0.0, 5.0, 1.0, 3.0, 5.0, 0.0, 1.0];
        let mut g = ptr::null_mut();
        assert_eq!(zd_game_new(2, actions.as_ptr(), payoffs.as_ptr(), &mut g), ZdStatus::Ok);
        assert_eq!(zd_game_num_profiles(g), 4);
        let mut s = ptr::null_mut();
        let name = CString::new("tft").unwrap();
        assert_eq!(
            zd_strategy_builtin(g, name.as_ptr(), 1, 1, &mut s),
            ZdStatus::Unsupported
        );
        zd_game_free(g);
        let v = CStr::from_ptr(zd_version()).to_str().unwrap();
        assert_eq!(v, env!("CARGO_PKG_VERSION"));
    }
}

#[test]
fn header_is_generated_and_parses_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/zdmem.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in [
        "zd_game_new_pd",
        "zd_chain_stationary",
        "zd_akin_residual",
        "ZD_STATUS_BUFFER_TOO_SMALL",
        "typedef struct ZdGame",
    ] {
        assert!(text.contains(sym), "{sym} missing from header");
    }
    let Ok(status) = Command::new("cc")
        .args(["-fsyntax-only", "-std=c99", "-x", "c"])
        .arg(&header)
        .status()
    else {
        return;
    };
    assert!(status.success(), "header does not compile as C99");
}
