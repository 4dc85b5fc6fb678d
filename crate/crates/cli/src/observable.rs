//! Observables `h` for conditioned averages, written as short strings:
//! `one`, `x`, `y`, or `indicator:a:b` for `1_{[a,b)}` in the first coordinate.

use std::fmt;
use std::str::FromStr;

use qemlab::dynamics::CellPartition;
use qemlab::State;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Observable {
    One,
    Coordinate(usize),
    Indicator { lo: f64, hi: f64 },
}

impl FromStr for Observable {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "one" => return Ok(Observable::One),
            "x" => return Ok(Observable::Coordinate(0)),
            "y" => return Ok(Observable::Coordinate(1)),
            _ => {}
        }
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() == 3 && parts[0] == "indicator" {
            let lo: f64 = parts[1].parse().map_err(|_| s.to_string())?;
            let hi: f64 = parts[2].parse().map_err(|_| s.to_string())?;
            if lo < hi {
                return Ok(Observable::Indicator { lo, hi });
            }
        }
        Err(s.to_string())
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observable::One => f.write_str("one"),
            Observable::Coordinate(0) => f.write_str("x"),
            Observable::Coordinate(_) => f.write_str("y"),
            Observable::Indicator { lo, hi } => write!(f, "indicator:{lo}:{hi}"),
        }
    }
}

impl Observable {
    pub fn eval(&self, x: &State) -> f64 {
        match *self {
            Observable::One => 1.0,
            Observable::Coordinate(axis) => x[axis],
            Observable::Indicator { lo, hi } => f64::from(u8::from(lo <= x[0] && x[0] < hi)),
        }
    }

    /// Exact average of `h` over a cell (Lebesgue).
    pub fn cell_average(&self, partition: &CellPartition, cell: usize) -> f64 {
        let b = partition.cell_bounds(cell);
        match *self {
            Observable::One => 1.0,
            Observable::Coordinate(axis) => 0.5 * (b[axis].0 + b[axis].1),
            Observable::Indicator { lo, hi } => {
                let (a, c) = b[0];
                (hi.min(c) - lo.max(a)).max(0.0) / (c - a)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use qemlab::dynamics::StateSpace;

    use super::*;

    #[test]
    fn parse_and_display_round_trip() {
        for s in ["one", "x", "y", "indicator:0:0.25"] {
            let o: Observable = s.parse().unwrap();
            assert_eq!(o.to_string(), s);
        }
        assert!("indicator:0.5:0.25".parse::<Observable>().is_err());
        assert!("z".parse::<Observable>().is_err());
    }

    #[test]
    fn cell_averages() {
        let p = CellPartition::new(StateSpace::Interval, 8).unwrap();
        let ind: Observable = "indicator:0:0.3".parse().unwrap();
        assert_eq!(ind.cell_average(&p, 0), 1.0);
        assert!((ind.cell_average(&p, 2) - 0.4).abs() < 1e-12);
        assert_eq!(ind.cell_average(&p, 3), 0.0);
        assert_eq!(Observable::Coordinate(0).cell_average(&p, 0), 0.0625);
        assert_eq!(ind.eval(&[0.1, 0.0]), 1.0);
    }
}
