use serde::{Deserialize, Serialize};

use super::ObjectiveError;
use crate::temporal::{Granularity, TimePoint};

/// Contiguous classes `start..=end` at granularity `g`; class `i` is the
/// `i`-th point after `start`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpace {
    granularity: Granularity,
    start: TimePoint,
    end: TimePoint,
    first_index: i64,
    size: usize,
}

impl LabelSpace {
    pub fn new(start: TimePoint, end: TimePoint, g: Granularity) -> Result<Self, ObjectiveError> {
        let start = start.truncate(g)?;
        let end = end.truncate(g)?;
        let (a, b) = (start.index(g)?, end.index(g)?);
        if a > b {
            return Err(ObjectiveError::EmptyRange { start, end });
        }
        Ok(LabelSpace {
            granularity: g,
            start,
            end,
            first_index: a,
            size: (b - a + 1) as usize,
        })
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn start(&self) -> TimePoint {
        self.start
    }

    pub fn end(&self) -> TimePoint {
        self.end
    }

    /// Number of classes K.
    pub fn size(&self) -> usize {
        self.size
    }

    /// Class index of `t` after truncation to the space's granularity.
    pub fn index(&self, t: &TimePoint) -> Result<usize, ObjectiveError> {
        let i = t.index(self.granularity)? - self.first_index;
        if i < 0 || i as usize >= self.size {
            return Err(ObjectiveError::OutOfLabelSpace {
                time: *t,
                start: self.start,
                end: self.end,
            });
        }
        Ok(i as usize)
    }

    pub fn point(&self, class: usize) -> Option<TimePoint> {
        (class < self.size)
            .then(|| TimePoint::from_index(self.first_index + class as i64, self.granularity))
    }

    pub fn points(&self) -> impl Iterator<Item = TimePoint> + '_ {
        (0..self.size).map(|i| TimePoint::from_index(self.first_index + i as i64, self.granularity))
    }
}

/// DTP class for a document timestamp.
pub fn dtp_label(timestamp: &TimePoint, space: &LabelSpace) -> Result<usize, ObjectiveError> {
    space.index(timestamp)
}
