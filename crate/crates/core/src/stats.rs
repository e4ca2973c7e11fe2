//! Dataset statistics: per-frame count histogram, weather and time-of-day
//! shares, and a summary card, exported as CSV and SVG.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::annotate::DatasetManifest;
use crate::scene_synth::{EveningPeriod, Split, TimePart, Weather};

pub const DEFAULT_BIN_WIDTH: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    /// Inclusive lower edge.
    pub lo: usize,
    /// Exclusive upper edge.
    pub hi: usize,
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Share {
    pub label: String,
    pub frames: usize,
    pub share: f64,
    /// Configured probability, where one exists.
    pub expected: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetCard {
    pub scenes: usize,
    pub frames: usize,
    pub views_per_frame: usize,
    pub view_annotations: usize,
    pub total_persons: usize,
    pub min_count: usize,
    pub avg_count: f64,
    pub max_count: usize,
    /// Scenes per split, in train/val/test order.
    pub split_scenes: [usize; 3],
    pub split_frames: [usize; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub histogram: Vec<HistogramBin>,
    pub weather: Vec<Share>,
    pub time_parts: Vec<Share>,
    pub evening_periods: Vec<Share>,
    pub card: DatasetCard,
}

fn shares(labels: &[&str], counts: &[usize], total: usize, expected: Option<&[f64]>) -> Vec<Share> {
    labels
        .iter()
        .enumerate()
        .map(|(k, l)| Share {
            label: (*l).to_string(),
            frames: counts[k],
            share: if total == 0 {
                0.0
            } else {
                counts[k] as f64 / total as f64
            },
            expected: expected.map(|e| e[k]),
        })
        .collect()
}

impl DatasetStats {
    /// # Panics
    /// If `bin_width` is zero.
    pub fn from_manifest(m: &DatasetManifest, bin_width: usize) -> Self {
        assert!(bin_width > 0, "bin width must be positive");
        let counts: Vec<usize> = m.frames().map(|(_, f)| f.record.persons.len()).collect();
        let n = counts.len();
        let max = counts.iter().copied().max().unwrap_or(0);
        let histogram = (0..=max / bin_width)
            .map(|k| HistogramBin {
                lo: k * bin_width,
                hi: (k + 1) * bin_width,
                frames: counts.iter().filter(|&&c| c / bin_width == k).count(),
            })
            .collect();

        let mut weather = [0usize; 7];
        let mut expected = [0.0f64; 7];
        let mut parts = [0usize; 5];
        let mut evening = [0usize; 4];
        for (s, f) in m.frames() {
            let env = &f.record.environment;
            weather[Weather::ALL.iter().position(|w| *w == env.weather).unwrap()] += 1;
            parts[TimePart::ALL
                .iter()
                .position(|p| *p == env.time_part)
                .unwrap()] += 1;
            if let Some(e) = EveningPeriod::of_hour(env.hour) {
                evening[EveningPeriod::ALL.iter().position(|p| *p == e).unwrap()] += 1;
            }
            for (k, w) in Weather::ALL.iter().enumerate() {
                expected[k] += w.probability(&m.config.weather, s.thunder_prob);
            }
        }
        if n > 0 {
            expected.iter_mut().for_each(|e| *e /= n as f64);
        }
        let weather_labels: Vec<&str> = Weather::ALL.iter().map(|w| w.label()).collect();
        let part_labels: Vec<&str> = TimePart::ALL.iter().map(|p| p.label()).collect();
        let evening_labels: Vec<&str> = EveningPeriod::ALL.iter().map(|p| p.label()).collect();

        let split_index = |s: Split| Split::ALL.iter().position(|x| *x == s).unwrap();
        let mut split_scenes = [0; 3];
        let mut split_frames = [0; 3];
        for s in &m.scenes {
            split_scenes[split_index(s.split)] += 1;
            split_frames[split_index(s.split)] += s.frames.len();
        }
        let total: usize = counts.iter().sum();
        let card = DatasetCard {
            scenes: m.scenes.len(),
            frames: n,
            views_per_frame: m.scenes.first().map_or(0, |s| s.cameras.len()),
            view_annotations: m
                .scenes
                .iter()
                .map(|s| s.frames.len() * s.cameras.len())
                .sum(),
            total_persons: total,
            min_count: counts.iter().copied().min().unwrap_or(0),
            avg_count: if n == 0 { 0.0 } else { total as f64 / n as f64 },
            max_count: max,
            split_scenes,
            split_frames,
        };
        DatasetStats {
            histogram,
            weather: shares(&weather_labels, &weather, n, Some(&expected)),
            time_parts: shares(&part_labels, &parts, n, Some(&[0.2; 5])),
            evening_periods: shares(&evening_labels, &evening, n, Some(&[0.05; 4])),
            card,
        }
    }

    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("count_lo,count_hi,frames\n");
        for b in &self.histogram {
            let _ = writeln!(out, "{},{},{}", b.lo, b.hi, b.frames);
        }
        out
    }

    /// Weather, time-part and evening-period shares in one table.
    pub fn environment_csv(&self) -> String {
        let mut out = String::from("group,label,frames,share,expected\n");
        for (group, rows) in [
            ("weather", &self.weather),
            ("time_part", &self.time_parts),
            ("evening_period", &self.evening_periods),
        ] {
            for s in rows {
                let exp = s.expected.map(|e| format!("{e:.6}")).unwrap_or_default();
                let _ = writeln!(out, "{group},{},{},{:.6},{exp}", s.label, s.frames, s.share);
            }
        }
        out
    }

    pub fn card_csv(&self) -> String {
        let c = &self.card;
        let mut out = String::from("field,value\n");
        let rows: [(&str, String); 14] = [
            ("scenes", c.scenes.to_string()),
            ("frames", c.frames.to_string()),
            ("views_per_frame", c.views_per_frame.to_string()),
            ("view_annotations", c.view_annotations.to_string()),
            ("total_persons", c.total_persons.to_string()),
            ("min_count", c.min_count.to_string()),
            ("avg_count", format!("{:.2}", c.avg_count)),
            ("max_count", c.max_count.to_string()),
            ("train_scenes", c.split_scenes[0].to_string()),
            ("val_scenes", c.split_scenes[1].to_string()),
            ("test_scenes", c.split_scenes[2].to_string()),
            ("train_frames", c.split_frames[0].to_string()),
            ("val_frames", c.split_frames[1].to_string()),
            ("test_frames", c.split_frames[2].to_string()),
        ];
        for (k, v) in rows {
            let _ = writeln!(out, "{k},{v}");
        }
        out
    }

    pub fn histogram_svg(&self) -> String {
        let (w, h, pad) = (640.0, 320.0, 40.0);
        let bins = self.histogram.len().max(1) as f64;
        let peak = self
            .histogram
            .iter()
            .map(|b| b.frames)
            .max()
            .unwrap_or(0)
            .max(1) as f64;
        let bar_w = (w - 2.0 * pad) / bins;
        let mut svg = svg_open(w, h, "Frames per crowd count");
        for (k, b) in self.histogram.iter().enumerate() {
            let bh = (h - 2.0 * pad) * b.frames as f64 / peak;
            let x = pad + k as f64 * bar_w;
            let _ = writeln!(
                svg,
                r##"<rect x="{x:.2}" y="{:.2}" width="{:.2}" height="{bh:.2}" fill="#4878a8"><title>{}-{}: {}</title></rect>"##,
                h - pad - bh,
                (bar_w - 1.0).max(0.5),
                b.lo,
                b.hi - 1,
                b.frames
            );
        }
        let _ = writeln!(
            svg,
            r#"<line x1="{pad}" y1="{y}" x2="{x2}" y2="{y}" stroke="black"/>"#,
            y = h - pad,
            x2 = w - pad
        );
        if let (Some(first), Some(last)) = (self.histogram.first(), self.histogram.last()) {
            let _ = writeln!(
                svg,
                r#"<text x="{pad}" y="{}" font-size="11">{}</text>"#,
                h - pad + 15.0,
                first.lo
            );
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{}</text>"#,
                w - pad,
                h - pad + 15.0,
                last.hi
            );
        }
        svg.push_str("</svg>\n");
        svg
    }

    pub fn weather_svg(&self) -> String {
        pie_svg("Weather", &self.weather)
    }

    pub fn time_svg(&self) -> String {
        pie_svg("Time of day", &self.time_parts)
    }
}

fn svg_open(w: f64, h: f64, title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <text x=\"{}\" y=\"20\" font-size=\"14\" text-anchor=\"middle\">{title}</text>\n",
        w / 2.0
    )
}

const PALETTE: [&str; 8] = [
    "#4878a8", "#e49444", "#d1615d", "#85b6b2", "#6a9f58", "#e7ca60", "#a87c9f", "#967662",
];

pub fn pie_svg(title: &str, slices: &[Share]) -> String {
    let (w, h) = (480.0, 320.0);
    let (cx, cy, r) = (160.0, 170.0, 120.0);
    let total: usize = slices.iter().map(|s| s.frames).sum();
    let mut svg = svg_open(w, h, title);
    let mut angle = -std::f64::consts::FRAC_PI_2;
    for (k, s) in slices.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        if total > 0 && s.frames > 0 {
            let sweep = std::f64::consts::TAU * s.frames as f64 / total as f64;
            if s.frames == total {
                let _ = writeln!(
                    svg,
                    r#"<circle cx="{cx}" cy="{cy}" r="{r}" fill="{color}"/>"#
                );
            } else {
                let (x0, y0) = (cx + r * angle.cos(), cy + r * angle.sin());
                let end = angle + sweep;
                let (x1, y1) = (cx + r * end.cos(), cy + r * end.sin());
                let large = u8::from(sweep > std::f64::consts::PI);
                let _ = writeln!(
                    svg,
                    r#"<path d="M{cx},{cy} L{x0:.3},{y0:.3} A{r},{r} 0 {large} 1 {x1:.3},{y1:.3} Z" fill="{color}"/>"#
                );
            }
            angle += sweep;
        }
        let ly = 60.0 + 22.0 * k as f64;
        let _ = writeln!(
            svg,
            r#"<rect x="310" y="{}" width="12" height="12" fill="{color}"/>"#,
            ly - 10.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="328" y="{ly}" font-size="12">{} {:.1}%</text>"#,
            s.label,
            100.0 * s.share
        );
    }
    svg.push_str("</svg>\n");
    svg
}
