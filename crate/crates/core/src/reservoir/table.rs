/// Piecewise-linear table over a strictly increasing abscissa, clamped to the
/// end values outside its range.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    x: Vec<f64>,
    cols: Vec<Vec<f64>>,
}

/// Position of a lookup within the table.
#[derive(Debug, Clone, Copy)]
pub struct Loc {
    seg: usize,
    t: f64,
    clamped: bool,
}

impl Table {
    pub fn new(x: Vec<f64>, cols: Vec<Vec<f64>>) -> Table {
        debug_assert!(cols.iter().all(|c| c.len() == x.len()));
        Table { x, cols }
    }

    pub fn locate(&self, x: f64) -> Loc {
        let n = self.x.len();
        if n == 1 || x < self.x[0] {
            return Loc { seg: 0, t: 0.0, clamped: true };
        }
        if x >= self.x[n - 1] {
            return Loc { seg: n - 1, t: 0.0, clamped: true };
        }
        // right segment at breakpoints: x[seg] <= x < x[seg + 1]
        let seg = self.x.partition_point(|&v| v <= x) - 1;
        let t = (x - self.x[seg]) / (self.x[seg + 1] - self.x[seg]);
        Loc { seg, t, clamped: false }
    }

    pub fn value(&self, col: usize, loc: Loc) -> f64 {
        let c = &self.cols[col];
        if loc.clamped || loc.t == 0.0 {
            c[loc.seg]
        } else {
            c[loc.seg] + loc.t * (c[loc.seg + 1] - c[loc.seg])
        }
    }

    pub fn slope(&self, col: usize, loc: Loc) -> f64 {
        if loc.clamped {
            return 0.0;
        }
        let c = &self.cols[col];
        (c[loc.seg + 1] - c[loc.seg]) / (self.x[loc.seg + 1] - self.x[loc.seg])
    }

    pub fn eval(&self, col: usize, x: f64) -> (f64, f64) {
        let loc = self.locate(x);
        (self.value(col, loc), self.slope(col, loc))
    }

    pub fn first(&self, col: usize) -> f64 {
        self.cols[col][0]
    }
}
