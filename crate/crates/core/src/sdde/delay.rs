/// Fixed-capacity history of a scalar signal sampled on the integration grid.
///
/// Holds the newest sample plus the `delay_steps` samples before it, so the
/// oldest slot is always the value `delay_steps` writes behind the newest one.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayBuffer {
    data: Vec<f64>,
    head: usize,
}

impl DelayBuffer {
    /// Buffer for a delay of `delay_steps` grid steps, pre-filled with `value`.
    pub fn filled(delay_steps: usize, value: f64) -> Self {
        Self {
            data: vec![value; delay_steps + 1],
            head: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.data.len()
    }

    pub fn delay_steps(&self) -> usize {
        self.data.len() - 1
    }

    pub fn push(&mut self, value: f64) {
        self.head += 1;
        if self.head == self.data.len() {
            self.head = 0;
        }
        self.data[self.head] = value;
    }

    pub fn newest(&self) -> f64 {
        self.data[self.head]
    }

    /// Value written exactly `delay_steps` pushes before the newest one.
    pub fn delayed(&self) -> f64 {
        let i = self.head + 1;
        self.data[if i == self.data.len() { 0 } else { i }]
    }

    /// Value written `lag` pushes before the newest one (`lag <= delay_steps`).
    pub fn lagged(&self, lag: usize) -> f64 {
        assert!(lag < self.data.len(), "lag {lag} exceeds buffer");
        let n = self.data.len();
        self.data[(self.head + n - lag) % n]
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sum of squares over the whole stored history.
    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn iter_oldest_first(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.data.len();
        (1..=n).map(move |k| self.data[(self.head + k) % n])
    }
}
