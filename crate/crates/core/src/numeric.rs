//! Small numerical helpers shared by the estimator kernels.

/// Neumaier (improved Kahan) compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    #[inline]
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub(crate) fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = CompensatedSum::default();
    for v in values {
        s.add(v);
    }
    s.value()
}
