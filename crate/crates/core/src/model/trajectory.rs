use std::io::{BufRead, Write};

use super::ModelSpec;
use crate::error::{Error, Result};
use crate::rng::stream;

/// A simulated path x_{0:T} with its observations y_{0:T}.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub state_dim: usize,
    pub obs_dim: usize,
    /// Row-major, `state_dim` values per time step.
    pub states: Vec<f64>,
    /// Row-major, `obs_dim` values per time step.
    pub observations: Vec<f64>,
    pub seed: u64,
}

impl Trajectory {
    /// Number of time steps, T + 1.
    pub fn len(&self) -> usize {
        self.states.len() / self.state_dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.len() - 1
    }

    pub fn state(&self, t: usize) -> &[f64] {
        &self.states[t * self.state_dim..(t + 1) * self.state_dim]
    }

    pub fn observation(&self, t: usize) -> &[f64] {
        &self.observations[t * self.obs_dim..(t + 1) * self.obs_dim]
    }

    /// Writes `t,x_0..x_{nx-1},y_0..y_{ny-1}`, one row per time step.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend((0..self.state_dim).map(|i| format!("x_{i}")));
        header.extend((0..self.obs_dim).map(|i| format!("y_{i}")));
        writeln!(w, "{}", header.join(","))?;
        for t in 0..self.len() {
            let mut row = vec![t.to_string()];
            row.extend(self.state(t).iter().map(|&v| format_value(v)));
            row.extend(self.observation(t).iter().map(|&v| format_value(v)));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// 17 significant decimal digits, which round-trips every `f64`.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// Draws x_{0:T}, y_{0:T} from the joint law. Deterministic given `seed`.
pub fn simulate(model: &ModelSpec, horizon: usize, seed: u64) -> Trajectory {
    let (nx, ny) = (model.state_dim(), model.obs_dim());
    let mut rng = stream(seed);
    let mut states = vec![0.0; (horizon + 1) * nx];
    let mut observations = vec![0.0; (horizon + 1) * ny];
    model.sample_initial(&mut rng, &mut states[..nx]);
    model.dynamics().sample_observation(&states[..nx], &mut rng, &mut observations[..ny]);
    for t in 1..=horizon {
        let (prev, next) = states.split_at_mut(t * nx);
        model.sample_transition(&prev[(t - 1) * nx..], &mut rng, &mut next[..nx]);
        model
            .dynamics()
            .sample_observation(&next[..nx], &mut rng, &mut observations[t * ny..(t + 1) * ny]);
    }
    Trajectory { state_dim: nx, obs_dim: ny, states, observations, seed }
}

/// Streaming reader of the `y_*` columns of a trajectory-style CSV.
///
/// Rows are yielded one at a time so observations can be consumed as they
/// arrive. Files whose header has no `y_` column are read column-for-column.
pub struct ObservationRows<R> {
    reader: R,
    columns: Vec<usize>,
    line: String,
    line_no: usize,
}

impl<R: BufRead> ObservationRows<R> {
    pub fn new(mut reader: R) -> Result<Self> {
        let mut header = String::new();
        if reader.read_line(&mut header)? == 0 {
            return Err(Error::Parse("empty observation file".into()));
        }
        let names: Vec<&str> = header.trim().split(',').map(str::trim).collect();
        let mut columns: Vec<usize> =
            names.iter().enumerate().filter(|(_, n)| n.starts_with("y_")).map(|(i, _)| i).collect();
        if columns.is_empty() {
            columns = (0..names.len()).collect();
        }
        Ok(Self { reader, columns, line: String::new(), line_no: 1 })
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }
}

impl<R: BufRead> Iterator for ObservationRows<R> {
    type Item = Result<Vec<f64>>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.line.clear();
            self.line_no += 1;
            match self.reader.read_line(&mut self.line) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            if self.line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = self.line.trim().split(',').collect();
            let row = self
                .columns
                .iter()
                .map(|&c| {
                    let f = fields.get(c).ok_or_else(|| {
                        Error::Parse(format!("line {}: missing column {c}", self.line_no))
                    })?;
                    f.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("line {}: {e}", self.line_no)))
                })
                .collect();
            return Some(row);
        }
    }
}

/// Reads all observation rows into a flat buffer.
pub fn read_observation_rows<R: BufRead>(reader: R) -> Result<(usize, Vec<f64>)> {
    let rows = ObservationRows::new(reader)?;
    let width = rows.width();
    let mut flat = Vec::new();
    for row in rows {
        flat.extend(row?);
    }
    Ok((width, flat))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_lgssm, make_lgssm_for_simulation, LgssmParams};
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn horizon_zero_has_one_step() {
        let model = make_lgssm(LgssmParams::benchmark()).unwrap();
        let tr = simulate(&model, 0, 1);
        assert_eq!(tr.len(), 1);
        assert_eq!(tr.observations.len(), 1);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let model = make_lgssm(LgssmParams::benchmark()).unwrap();
        let a = simulate(&model, 50, 9);
        let b = simulate(&model, 50, 9);
        assert_eq!(a, b);
        assert_ne!(a.states, simulate(&model, 50, 10).states);
    }

    #[test]
    fn degenerate_noise_keeps_state_fixed() {
        let p = LgssmParams::scalar(1.0, 1.0, 0.0, 1.0)
            .with_initial(DVector::from_element(1, 2.5), DMatrix::zeros(1, 1));
        let model = make_lgssm_for_simulation(p).unwrap();
        let tr = simulate(&model, 20, 3);
        assert!(tr.states.iter().all(|&x| x == 2.5));
    }

    #[test]
    fn csv_round_trips_observations() {
        let model = make_lgssm(LgssmParams::benchmark()).unwrap();
        let tr = simulate(&model, 5, 2);
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x_0,y_0\n"));
        let (width, flat) = read_observation_rows(&buf[..]).unwrap();
        assert_eq!(width, 1);
        assert_eq!(flat, tr.observations);
    }

    #[test]
    fn format_has_seventeen_significant_digits() {
        let s = format_value(0.1);
        assert_eq!(s, "1.0000000000000001e-1");
        assert_eq!(s.parse::<f64>().unwrap(), 0.1);
    }
}
