use std::fs::File;
use std::io::{BufWriter, Write};

use serde::Serialize;

use super::telemetry::FanOut;
use super::{
    csv_header, AcquisitionConfig, DaqError, SampleBatch, Subscription, DEFAULT_BATCH_ROWS,
    DEFAULT_QUEUE_BATCHES,
};
use crate::plant::{PlantConfig, SensorReading};

/// Rows buffered before the CSV sink is flushed.
pub const FLUSH_EVERY_ROWS: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub rows_written: u64,
    /// Covered acquisition time, rows / sample_rate, s.
    pub duration: f64,
}

/// An active (or finished) acquisition run.
pub struct Session {
    config: AcquisitionConfig,
    decimation: u64,
    n_channels: usize,
    sink_name: String,
    sink: Option<BufWriter<Box<dyn Write + Send>>>,
    rows_written: u64,
    last_t: Option<f64>,
    batch: Vec<Vec<f64>>,
    batch_t0: f64,
    batch_rows: usize,
    fan_out: FanOut,
    summary: Option<Summary>,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("sink", &self.sink_name)
            .field("sample_rate", &self.config.sample_rate)
            .field("rows_written", &self.rows_written)
            .field("active", &self.is_active())
            .finish()
    }
}

impl Session {
    /// Creates the CSV file at `config.csv_path` and writes its header.
    pub fn start(config: AcquisitionConfig, plant: &PlantConfig) -> Result<Self, DaqError> {
        config.decimation(plant.step_rate(), plant.n_channels)?;
        let path = config.csv_path.display().to_string();
        let file = File::create(&config.csv_path).map_err(|source| DaqError::Io {
            path: path.clone(),
            source,
        })?;
        Self::with_sink(config, plant, Box::new(file), path)
    }

    /// Logs into an arbitrary writer instead of `config.csv_path`.
    pub fn with_writer(
        config: AcquisitionConfig,
        plant: &PlantConfig,
        writer: Box<dyn Write + Send>,
    ) -> Result<Self, DaqError> {
        Self::with_sink(config, plant, writer, "<writer>".into())
    }

    fn with_sink(
        config: AcquisitionConfig,
        plant: &PlantConfig,
        writer: Box<dyn Write + Send>,
        sink_name: String,
    ) -> Result<Self, DaqError> {
        let decimation = config.decimation(plant.step_rate(), plant.n_channels)?;
        let mut sink = BufWriter::new(writer);
        writeln!(sink, "{}", csv_header(plant.n_channels))
            .and_then(|_| sink.flush())
            .map_err(|source| DaqError::Io {
                path: sink_name.clone(),
                source,
            })?;
        Ok(Self {
            config,
            decimation,
            n_channels: plant.n_channels,
            sink_name,
            sink: Some(sink),
            rows_written: 0,
            last_t: None,
            batch: Vec::with_capacity(DEFAULT_BATCH_ROWS),
            batch_t0: 0.0,
            batch_rows: DEFAULT_BATCH_ROWS,
            fan_out: FanOut::default(),
            summary: None,
        })
    }

    pub fn config(&self) -> &AcquisitionConfig {
        &self.config
    }

    pub fn is_active(&self) -> bool {
        self.sink.is_some()
    }

    pub fn rows_written(&self) -> u64 {
        self.rows_written
    }

    /// Simulation steps per sample.
    pub fn decimation(&self) -> u64 {
        self.decimation
    }

    /// Whether the sample clock ticks after simulation step number `step`.
    pub fn is_due(&self, step: u64) -> bool {
        step.is_multiple_of(self.decimation)
    }

    /// Rows per telemetry batch for subscribers created after this call.
    pub fn set_batch_rows(&mut self, rows: usize) {
        self.batch_rows = rows.max(1);
    }

    fn io_error(&self, source: std::io::Error) -> DaqError {
        DaqError::Io {
            path: self.sink_name.clone(),
            source,
        }
    }

    pub fn sample(&mut self, readings: &[SensorReading], t: f64) -> Result<(), DaqError> {
        let row: Vec<f64> = readings.iter().map(|r| r.gauge).collect();
        self.sample_row(&row, t)
    }

    /// Appends one row of gauge pressures (kPa) taken at time `t`.
    pub fn sample_row(&mut self, row: &[f64], t: f64) -> Result<(), DaqError> {
        if !self.is_active() {
            return Err(DaqError::Inactive);
        }
        if row.len() != self.n_channels {
            return Err(DaqError::RowWidth {
                expected: self.n_channels,
                got: row.len(),
            });
        }
        if let Some(last) = self.last_t.filter(|&last| t <= last) {
            return Err(DaqError::NonMonotonic { t, last });
        }
        let sink = self.sink.as_mut().expect("active session has a sink");
        let mut line = format!("{t:.6}");
        for v in row {
            // + 0.0 folds a negative zero
            line.push_str(&format!(",{:.6}", v + 0.0));
        }
        line.push('\n');
        let mut result = sink.write_all(line.as_bytes());
        self.rows_written += 1;
        if result.is_ok() && self.rows_written.is_multiple_of(FLUSH_EVERY_ROWS) {
            result = sink.flush();
        }
        result.map_err(|e| self.io_error(e))?;
        self.last_t = Some(t);

        if !self.fan_out.is_empty() {
            if self.batch.is_empty() {
                self.batch_t0 = t;
            }
            self.batch.push(row.to_vec());
            if self.batch.len() >= self.batch_rows {
                self.publish_batch();
            }
        }
        Ok(())
    }

    fn publish_batch(&mut self) {
        if self.batch.is_empty() {
            return;
        }
        let batch = SampleBatch {
            t0: self.batch_t0,
            dt_sample: self.config.sample_period(),
            rows: std::mem::replace(&mut self.batch, Vec::with_capacity(self.batch_rows)),
        };
        self.fan_out.publish(&batch);
    }

    /// Opens a lossy telemetry stream of `SampleBatch` frames.
    pub fn subscribe(&mut self) -> Result<Subscription, DaqError> {
        self.subscribe_with_capacity(DEFAULT_QUEUE_BATCHES)
    }

    pub fn subscribe_with_capacity(&mut self, batches: usize) -> Result<Subscription, DaqError> {
        if !self.is_active() {
            return Err(DaqError::Inactive);
        }
        Ok(self.fan_out.subscribe(batches))
    }

    /// Flushes and closes the log, publishes any partial telemetry batch and
    /// ends all streams. Later calls return the same summary.
    pub fn stop(&mut self) -> Result<Summary, DaqError> {
        if let Some(summary) = self.summary {
            return Ok(summary);
        }
        self.publish_batch();
        self.fan_out.close();
        let mut sink = self.sink.take().expect("unstopped session has a sink");
        let summary = Summary {
            rows_written: self.rows_written,
            duration: self.rows_written as f64 / self.config.sample_rate as f64,
        };
        self.summary = Some(summary);
        sink.flush().map_err(|e| self.io_error(e))?;
        Ok(summary)
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        if self.summary.is_none() {
            let _ = self.stop();
        }
    }
}

#[cfg(test)]
mod tests {
    use std::sync::{Arc, Mutex};

    use super::*;

    /// Writer that shares its bytes with the test.
    #[derive(Clone, Default)]
    struct Shared(Arc<Mutex<Vec<u8>>>);

    impl Write for Shared {
        fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
            self.0.lock().unwrap().extend_from_slice(buf);
            Ok(buf.len())
        }
        fn flush(&mut self) -> std::io::Result<()> {
            Ok(())
        }
    }

    fn session() -> (Session, Shared) {
        let out = Shared::default();
        let s = Session::with_writer(
            AcquisitionConfig::default(),
            &PlantConfig::default(),
            Box::new(out.clone()),
        )
        .unwrap();
        (s, out)
    }

    fn text(out: &Shared) -> String {
        String::from_utf8(out.0.lock().unwrap().clone()).unwrap()
    }

    #[test]
    fn immediate_stop_leaves_header_only() {
        let (mut s, out) = session();
        let summary = s.stop().unwrap();
        assert_eq!(summary.rows_written, 0);
        assert_eq!(text(&out), "time_s,P1_kPa,P2_kPa,P3_kPa,P4_kPa,P5_kPa\n");
        assert_eq!(s.stop().unwrap(), summary);
        assert!(matches!(s.sample_row(&[0.0; 5], 1.0), Err(DaqError::Inactive)));
        assert!(s.subscribe().is_err());
    }

    #[test]
    fn row_format() {
        let (mut s, out) = session();
        s.sample_row(&[0.0, -0.0, 30.036630036630037, 1.5, 500.0], 0.001).unwrap();
        s.stop().unwrap();
        let body = text(&out);
        let row = body.lines().nth(1).unwrap();
        assert_eq!(row, "0.001000,0.000000,0.000000,30.036630,1.500000,500.000000");
    }

    #[test]
    fn rejects_bad_rows() {
        let (mut s, _) = session();
        assert!(matches!(s.sample_row(&[0.0; 4], 0.001), Err(DaqError::RowWidth { .. })));
        s.sample_row(&[0.0; 5], 0.002).unwrap();
        assert!(matches!(s.sample_row(&[0.0; 5], 0.002), Err(DaqError::NonMonotonic { .. })));
    }

    #[test]
    fn telemetry_batches_and_final_partial() {
        let (mut s, _) = session();
        let sub = s.subscribe().unwrap();
        for i in 1..=1020 {
            s.sample_row(&[i as f64; 5], i as f64 * 0.001).unwrap();
        }
        let full = sub.drain();
        assert_eq!(full.len(), 20);
        assert!(full.iter().all(|b| b.rows.len() == 50));
        assert_eq!(full[1].t0, 51.0 * 0.001);
        s.stop().unwrap();
        let rest = sub.drain();
        assert_eq!(rest.len(), 1);
        assert_eq!(rest[0].rows.len(), 20);
        assert!(sub.is_finished());
    }

    #[test]
    fn unwritable_path_errors() {
        let cfg = AcquisitionConfig {
            csv_path: "/nonexistent-dir/x/y.csv".into(),
            ..AcquisitionConfig::default()
        };
        assert!(matches!(Session::start(cfg, &PlantConfig::default()), Err(DaqError::Io { .. })));
    }

    #[test]
    fn decimated_clock() {
        let out = Shared::default();
        let cfg = AcquisitionConfig {
            sample_rate: 500,
            ..AcquisitionConfig::default()
        };
        let s = Session::with_writer(cfg, &PlantConfig::default(), Box::new(out)).unwrap();
        let due: Vec<u64> = (1..=6).filter(|&k| s.is_due(k)).collect();
        assert_eq!(due, vec![2, 4, 6]);
    }
}
