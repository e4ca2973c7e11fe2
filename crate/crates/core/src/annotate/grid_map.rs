use serde::{Deserialize, Serialize};

/// What a map holds. The numeric code is the `kind` field of the binary header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    PixelDensity = 1,
    PixelFeature = 2,
    GroundOccupancy = 3,
    GroundDensity = 4,
    GroundFused = 5,
    GroundFeature = 6,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapSpace {
    Pixel,
    Ground,
}

impl MapKind {
    pub fn code(self) -> u16 {
        self as u16
    }

    pub fn from_code(code: u16) -> Option<MapKind> {
        Some(match code {
            1 => MapKind::PixelDensity,
            2 => MapKind::PixelFeature,
            3 => MapKind::GroundOccupancy,
            4 => MapKind::GroundDensity,
            5 => MapKind::GroundFused,
            6 => MapKind::GroundFeature,
            _ => return None,
        })
    }

    pub fn space(self) -> MapSpace {
        match self {
            MapKind::PixelDensity | MapKind::PixelFeature => MapSpace::Pixel,
            _ => MapSpace::Ground,
        }
    }
}

/// Row-major 2-D field of 32-bit reals.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f32>,
    pub kind: MapKind,
}

impl GridMap {
    pub fn zeros(rows: usize, cols: usize, kind: MapKind) -> Self {
        GridMap {
            rows,
            cols,
            values: vec![0.0; rows * cols],
            kind,
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f32, kind: MapKind) -> Self {
        GridMap {
            rows,
            cols,
            values: vec![value; rows * cols],
            kind,
        }
    }

    pub fn from_values(rows: usize, cols: usize, values: Vec<f32>, kind: MapKind) -> Option<Self> {
        (values.len() == rows * cols && values.iter().all(|v| v.is_finite())).then_some(GridMap {
            rows,
            cols,
            values,
            kind,
        })
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.values[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f32) {
        self.values[row * self.cols + col] = value;
    }

    pub fn same_shape(&self, other: &GridMap) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    /// Sum accumulated in double precision.
    pub fn sum(&self) -> f64 {
        self.values.iter().map(|&v| v as f64).sum()
    }

    /// First cell holding the maximum value.
    pub fn argmax(&self) -> Option<(usize, usize)> {
        let mut best: Option<(usize, f32)> = None;
        for (i, &v) in self.values.iter().enumerate() {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        best.map(|(i, _)| (i / self.cols, i % self.cols))
    }

    /// Cells with value at least `min`, in row-major order.
    pub fn nonzero_cells(&self, min: f32) -> Vec<(usize, usize, f32)> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v >= min && **v != 0.0)
            .map(|(i, &v)| (i / self.cols, i % self.cols, v))
            .collect()
    }
}
