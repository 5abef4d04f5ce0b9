//! Decks shared by unit tests, integration tests and the FFI crate tests.

/// Two water-filled cells side by side.
pub const TWO_CELL_DECK: &str = "\
-- two cells side by side
DIMENS
 2 1 1 /
DX
 10 10 /
DY
 10 /
DZ
 10 /
TOPS
 1000 /
PORO
 2*0.2 /
PERMX
 100 100 /
PHASES
 WATER /
FLUID
 WATER 200 55500 1000 4.5e-5 0.5 /
/
ROCK
 200 1e-5 /
INIT
 DEPTH 1005 /
 PRESSURE 200 /
/
SCHEDULE
TIME 0 /
TIME 10 /
END
";

/// Single-phase water box of 10 m cells.
pub fn box_deck(nx: usize, ny: usize, nz: usize) -> String {
    let n = nx * ny * nz;
    format!(
        "DIMENS\n {nx} {ny} {nz} /\nDX\n {nx}*10 /\nDY\n {ny}*10 /\nDZ\n {nz}*10 /\nTOPS\n 1000 /\n\
         PORO\n {n}*0.2 /\nPERMX\n {n}*100 /\nPHASES\n WATER /\n\
         FLUID\n WATER 200 55500 1000 4.5e-5 0.5 /\n/\nROCK\n 200 1e-5 /\n\
         INIT\n DEPTH 1000 /\n PRESSURE 200 /\n/\nSCHEDULE\nTIME 0 /\nTIME 10 /\nEND\n"
    )
}

pub fn box_model(nx: usize, ny: usize, nz: usize) -> crate::deck::DeckModel {
    crate::deck::parse_deck(&box_deck(nx, ny, nz)).expect("box deck parses")
}

pub fn box_grid(nx: usize, ny: usize, nz: usize) -> crate::grid::Grid {
    crate::grid::build_grid(&box_model(nx, ny, nz)).expect("box grid builds")
}

/// Corey water-oil table: connate water 0.2, residual oil 0.2, exponent 2.
pub fn swof_table() -> String {
    let mut t = String::from("SWOF\n");
    for k in 0..=12 {
        let sw = 0.2 + 0.6 * k as f64 / 12.0;
        let se = (sw - 0.2) / 0.6;
        t.push_str(&format!(" {sw:.6} {:.6} {:.6} 0 /\n", se * se, (1.0 - se) * (1.0 - se)));
    }
    t.push_str("/\n");
    t
}

/// Water injection into an oil box from corner (1,1) to corner (nx,ny):
/// injector at a fixed surface rate (m³/day), producer at 150 bar, reports
/// every `report` days up to `days`.
pub fn waterflood_deck(nx: usize, ny: usize, rate: f64, days: usize, report: usize, solver: &str) -> String {
    let n = nx * ny;
    let mut s = format!(
        "DIMENS\n {nx} {ny} 1 /\nDX\n {nx}*10 /\nDY\n {ny}*10 /\nDZ\n 10 /\nTOPS\n 2000 /\n\
         PORO\n {n}*0.2 /\nPERMX\n {n}*100 /\nPHASES\n WATER OIL /\n\
         FLUID\n WATER 200 55500 1000 4.5e-5 0.5 /\n OIL 200 5000 800 1e-4 2 /\n/\n{}\
         ROCK\n 200 1e-5 /\nINIT\n DEPTH 2005 /\n PRESSURE 200 /\n SWI 0.2 /\n/\n\
         WELSPECS\n INJ INJ 0.1 /\n PROD PROD 0.1 /\n/\nCOMPDAT\n INJ 1 1 1 1 /\n PROD {nx} {ny} 1 1 /\n/\n\
         SOLVER\n{solver}/\nSCHEDULE\nTIME 0 /\nWCONTROL\n INJ WATER RATE {rate} /\n PROD ALL BHP 150 /\n/\n",
        swof_table()
    );
    let mut t = report;
    while t <= days {
        s.push_str(&format!("TIME {t} /\n"));
        t += report;
    }
    s.push_str("END\n");
    s
}

/// Corey gas-oil table: critical gas 0, residual oil 0.2, exponent 2.
pub fn sgof_table() -> String {
    let mut t = String::from("SGOF\n");
    for k in 0..=12 {
        let sg = 0.6 * k as f64 / 12.0;
        let se = sg / 0.6;
        t.push_str(&format!(" {sg:.6} {:.6} {:.6} 0 /\n", se * se, (1.0 - se) * (1.0 - se)));
    }
    t.push_str("/\n");
    t
}

/// Three-phase `n`×`n` box with a central injector alternating gas and
/// water every 25 days over two 50-day cycles and four corner producers at
/// 150 bar. Reports every `report` days.
pub fn wag_deck(n: usize, rate: f64, report: usize, solver: &str) -> String {
    let cells = n * n;
    let c = n / 2;
    let mut s = format!(
        "DIMENS\n {n} {n} 1 /\nDX\n {n}*10 /\nDY\n {n}*10 /\nDZ\n 10 /\nTOPS\n 2000 /\n\
         PORO\n {cells}*0.2 /\nPERMX\n {cells}*100 /\nPHASES\n WATER OIL GAS /\n\
         FLUID\n WATER 200 55500 1000 4.5e-5 0.5 /\n OIL 200 5000 800 1e-4 2 /\n GAS 200 6900 150 5e-3 0.02 /\n/\n\
         {}{}ROCK\n 200 1e-5 /\nINIT\n DEPTH 2005 /\n PRESSURE 200 /\n SWI 0.2 /\n/\n\
         WELSPECS\n INJ INJ 0.1 /\n P1 PROD 0.1 /\n P2 PROD 0.1 /\n P3 PROD 0.1 /\n P4 PROD 0.1 /\n/\n\
         COMPDAT\n INJ {c} {c} 1 1 /\n P1 1 1 1 1 /\n P2 {n} 1 1 1 /\n P3 1 {n} 1 1 /\n P4 {n} {n} 1 1 /\n/\n\
         SOLVER\n{solver}/\nSCHEDULE\n",
        swof_table(),
        sgof_table()
    );
    let mut t = 0;
    while t <= 100 {
        s.push_str(&format!("TIME {t} /\n"));
        if t % 25 == 0 && t < 100 {
            let phase = if (t / 25) % 2 == 0 { "GAS" } else { "WATER" };
            s.push_str(&format!("WCONTROL\n INJ {phase} RATE {rate} /\n"));
            if t == 0 {
                for p in ["P1", "P2", "P3", "P4"] {
                    s.push_str(&format!(" {p} ALL BHP 150 /\n"));
                }
            }
            s.push_str("/\n");
        }
        t += report;
    }
    s.push_str("END\n");
    s
}
