use serde::{Deserialize, Serialize};

/// Linear map between model coordinates and horizontal screen pixels,
/// `range[0] -> 1` and `range[1] -> width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreenMap {
    pub range: [f64; 2],
    pub width: u32,
}

impl Default for ScreenMap {
    fn default() -> Self {
        Self { range: [-3.0, 3.0], width: 1200 }
    }
}

impl ScreenMap {
    /// Nearest pixel, halves rounded away from zero, clamped to the screen.
    pub fn model_to_px(&self, x: f64) -> i32 {
        let [lo, hi] = self.range;
        let w = f64::from(self.width);
        if x.is_nan() {
            return 1;
        }
        let px = ((x - lo) / (hi - lo) * (w - 1.0) + 1.0).round();
        px.clamp(1.0, w) as i32
    }

    /// Model coordinate of pixel `px`, clamped to the screen first.
    pub fn px_to_model(&self, px: i32) -> f64 {
        let [lo, hi] = self.range;
        let px = px.clamp(1, self.width as i32);
        lo + f64::from(px - 1) / f64::from(self.width - 1) * (hi - lo)
    }

    pub fn clamp_px(&self, px: i32) -> i32 {
        px.clamp(1, self.width as i32)
    }

    /// Pixels per model unit.
    pub fn scale(&self) -> f64 {
        f64::from(self.width - 1) / (self.range[1] - self.range[0])
    }

    /// Rod ends at `centre ± length/2`, drawn a fixed whole number of pixels
    /// either side of the centre pixel so the separation never flickers.
    pub fn rod_px(&self, centre: f64, length: f64) -> [i32; 2] {
        let c = self.model_to_px(centre);
        let half = (0.5 * length * self.scale()).round() as i32;
        [c - half, c + half]
    }
}
