use serde::Serialize;

use super::DaqError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelStat {
    pub last: f64,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

/// Per-channel summary over a window of rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelStats {
    pub window: usize,
    pub channels: Vec<ChannelStat>,
}

/// Last/min/max/mean of each column over `rows`.
pub fn batch_stats<R: AsRef<[f64]>>(rows: &[R]) -> Result<ChannelStats, DaqError> {
    let first = rows.first().ok_or(DaqError::EmptyWindow)?.as_ref();
    let width = first.len();
    let mut channels: Vec<ChannelStat> = first
        .iter()
        .map(|&v| ChannelStat {
            last: v,
            min: v,
            max: v,
            mean: 0.0,
        })
        .collect();
    let mut sums = vec![0.0; width];
    for row in rows {
        let row = row.as_ref();
        if row.len() != width {
            return Err(DaqError::RowWidth {
                expected: width,
                got: row.len(),
            });
        }
        for ((stat, sum), &v) in channels.iter_mut().zip(&mut sums).zip(row) {
            stat.last = v;
            stat.min = stat.min.min(v);
            stat.max = stat.max.max(v);
            *sum += v;
        }
    }
    for (stat, sum) in channels.iter_mut().zip(sums) {
        stat.mean = (sum / rows.len() as f64).clamp(stat.min, stat.max);
    }
    Ok(ChannelStats {
        window: rows.len(),
        channels,
    })
}

impl super::SampleBatch {
    pub fn stats(&self) -> Result<ChannelStats, DaqError> {
        batch_stats(&self.rows)
    }
}
