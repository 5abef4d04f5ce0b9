use std::ffi::{c_char, CString};
use std::ptr;

use strata_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    let n = unsafe { strata_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(511)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

fn parse(text: &str) -> *mut StrataDeck {
    let c = CString::new(text).unwrap();
    let mut deck = ptr::null_mut();
    assert_eq!(unsafe { strata_deck_parse(c.as_ptr(), &mut deck) }, StrataStatus::Ok);
    deck
}

#[test]
fn run_two_cells_to_completion() {
    let deck = parse(strata::testing::TWO_CELL_DECK);
    let mut count = usize::MAX;
    assert_eq!(unsafe { strata_deck_validate(deck, &mut count) }, StrataStatus::Ok);
    assert_eq!(count, 0);
    let mut sim = ptr::null_mut();
    assert_eq!(unsafe { strata_sim_new(deck, 0, StrataMethod::Fim, &mut sim) }, StrataStatus::Ok);
    unsafe { strata_deck_free(deck) };
    assert_eq!(unsafe { strata_sim_cell_count(sim) }, 2);
    assert_eq!(unsafe { strata_sim_phase_count(sim) }, 1);
    let mut done = false;
    let mut steps = 0;
    while !done {
        assert_eq!(unsafe { strata_sim_step(sim, &mut done) }, StrataStatus::Ok);
        steps += 1;
        assert!(steps < 10_000);
    }
    assert!((unsafe { strata_sim_time(sim) } - 10.0).abs() < 1e-9);
    let mut p = [0.0; 2];
    assert_eq!(unsafe { strata_sim_copy_pressure(sim, p.as_mut_ptr(), 2) }, StrataStatus::Ok);
    assert!(p.iter().all(|&v| v > 1e7));
    let mut s = [0.0; 2];
    assert_eq!(unsafe { strata_sim_copy_saturation(sim, s.as_mut_ptr(), 2) }, StrataStatus::Ok);
    assert_eq!(s, [1.0, 1.0]);
    let mut st = StrataStats::default();
    assert_eq!(unsafe { strata_sim_stats(sim, &mut st) }, StrataStatus::Ok);
    assert!(st.steps >= 1 && st.nr_iters >= st.steps);
    unsafe { strata_sim_free(sim) };
}

#[test]
fn short_buffer_is_reported() {
    let deck = parse(strata::testing::TWO_CELL_DECK);
    let mut sim = ptr::null_mut();
    assert_eq!(unsafe { strata_sim_new(deck, 1, StrataMethod::Deck, &mut sim) }, StrataStatus::Ok);
    let mut p = [0.0; 1];
    assert_eq!(
        unsafe { strata_sim_copy_pressure(sim, p.as_mut_ptr(), 1) },
        StrataStatus::BufferTooSmall
    );
    assert!(last_error().contains("2 needed"));
    unsafe {
        strata_sim_free(sim);
        strata_deck_free(deck);
    }
}

#[test]
fn parse_error_carries_line() {
    let text = strata::testing::TWO_CELL_DECK.replace("PORO\n 2*0.2", "PORO\n 2*x");
    let c = CString::new(text).unwrap();
    let mut deck = ptr::null_mut();
    assert_eq!(unsafe { strata_deck_parse(c.as_ptr(), &mut deck) }, StrataStatus::Parse);
    assert!(deck.is_null());
    assert!(last_error().starts_with("line 13"), "{}", last_error());
}

#[test]
fn null_handles() {
    let mut done = false;
    assert_eq!(unsafe { strata_sim_step(ptr::null_mut(), &mut done) }, StrataStatus::NullPointer);
    assert!(unsafe { strata_sim_time(ptr::null()) }.is_nan());
    unsafe {
        strata_sim_free(ptr::null_mut());
        strata_deck_free(ptr::null_mut());
    }
}

#[test]
fn missing_file_is_io() {
    let c = CString::new("/nonexistent/deck.data").unwrap();
    let mut deck = ptr::null_mut();
    assert_eq!(unsafe { strata_deck_load(c.as_ptr(), &mut deck) }, StrataStatus::Io);
}

#[test]
fn serialize_round_trips() {
    let deck = parse(strata::testing::TWO_CELL_DECK);
    let mut needed = 0;
    let status = unsafe { strata_deck_serialize(deck, ptr::null_mut(), 0, &mut needed) };
    assert_eq!(status, StrataStatus::BufferTooSmall);
    let mut buf = vec![0 as c_char; needed];
    assert_eq!(
        unsafe { strata_deck_serialize(deck, buf.as_mut_ptr(), needed, &mut needed) },
        StrataStatus::Ok
    );
    let again = parse(&String::from_utf8(buf[..needed - 1].iter().map(|&c| c as u8).collect()).unwrap());
    unsafe {
        strata_deck_free(deck);
        strata_deck_free(again);
    }
}

#[test]
fn header_declares_every_export() {
    let root = env!("CARGO_MANIFEST_DIR");
    let header = std::fs::read_to_string(format!("{root}/include/strata.h")).unwrap();
    let src = std::fs::read_to_string(format!("{root}/src/lib.rs")).unwrap();
    let mut n = 0;
    for line in src.lines() {
        if let Some(rest) = line.split("extern \"C\" fn ").nth(1) {
            let name = rest.split('(').next().unwrap();
            assert!(header.contains(&format!("{name}(")), "{name} missing from header");
            n += 1;
        }
    }
    assert!(n >= 15);
}

#[test]
fn header_compiles_as_c() {
    let root = env!("CARGO_MANIFEST_DIR");
    let Ok(out) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", &format!("{root}/include/strata.h")])
        .output()
    else {
        eprintln!("no C compiler; skipped");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
