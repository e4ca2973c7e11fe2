use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::WeatherConfig;
use crate::rng::{rng_from_seed, SynthRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weather {
    Clear,
    ExtraSunny,
    Overcast,
    Clouds,
    Rain,
    Foggy,
    Thunder,
}

impl Weather {
    pub const ALL: [Weather; 7] = [
        Weather::Clear,
        Weather::ExtraSunny,
        Weather::Overcast,
        Weather::Clouds,
        Weather::Rain,
        Weather::Foggy,
        Weather::Thunder,
    ];

    /// Order of the configurable second-stage weights.
    pub const WEIGHTED: [Weather; 6] = [
        Weather::ExtraSunny,
        Weather::Clear,
        Weather::Overcast,
        Weather::Clouds,
        Weather::Rain,
        Weather::Foggy,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Weather::Clear => "clear",
            Weather::ExtraSunny => "extra_sunny",
            Weather::Overcast => "overcast",
            Weather::Clouds => "clouds",
            Weather::Rain => "rain",
            Weather::Foggy => "foggy",
            Weather::Thunder => "thunder",
        }
    }

    /// Marginal probability of this weather under `cfg` for a scene whose
    /// per-frame thunder probability is `thunder_prob`.
    pub fn probability(self, cfg: &WeatherConfig, thunder_prob: f64) -> f64 {
        if self == Weather::Thunder {
            return thunder_prob;
        }
        let total: f64 = cfg.weights.iter().sum();
        let k = Weather::WEIGHTED.iter().position(|w| *w == self).unwrap();
        let mut p = (1.0 - cfg.clear_share) * cfg.weights[k] / total;
        if self == Weather::Clear {
            p += cfg.clear_share;
        }
        p * (1.0 - thunder_prob)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimePart {
    Morning,
    Noon,
    Afternoon,
    Sunset,
    Evening,
}

impl TimePart {
    pub const ALL: [TimePart; 5] = [
        TimePart::Morning,
        TimePart::Noon,
        TimePart::Afternoon,
        TimePart::Sunset,
        TimePart::Evening,
    ];

    /// Morning 6–9, Noon 9–12, Afternoon 12–15, Sunset 15–18, Evening 18–6.
    pub fn of_hour(hour: u8) -> TimePart {
        match hour {
            6..=8 => TimePart::Morning,
            9..=11 => TimePart::Noon,
            12..=14 => TimePart::Afternoon,
            15..=17 => TimePart::Sunset,
            _ => TimePart::Evening,
        }
    }

    fn first_hour(self) -> u8 {
        match self {
            TimePart::Morning => 6,
            TimePart::Noon => 9,
            TimePart::Afternoon => 12,
            TimePart::Sunset => 15,
            TimePart::Evening => 18,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TimePart::Morning => "morning",
            TimePart::Noon => "noon",
            TimePart::Afternoon => "afternoon",
            TimePart::Sunset => "sunset",
            TimePart::Evening => "evening",
        }
    }
}

/// The four three-hour periods Evening is split into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EveningPeriod {
    Night,
    Nightfall,
    Midnight,
    EarlyMorning,
}

impl EveningPeriod {
    pub const ALL: [EveningPeriod; 4] = [
        EveningPeriod::Night,
        EveningPeriod::Nightfall,
        EveningPeriod::Midnight,
        EveningPeriod::EarlyMorning,
    ];

    pub fn of_hour(hour: u8) -> Option<EveningPeriod> {
        match hour {
            18..=20 => Some(EveningPeriod::Night),
            21..=23 => Some(EveningPeriod::Nightfall),
            0..=2 => Some(EveningPeriod::Midnight),
            3..=5 => Some(EveningPeriod::EarlyMorning),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            EveningPeriod::Night => "night",
            EveningPeriod::Nightfall => "nightfall",
            EveningPeriod::Midnight => "midnight",
            EveningPeriod::EarlyMorning => "early_morning",
        }
    }

    fn first_hour(self) -> u8 {
        match self {
            EveningPeriod::Night => 18,
            EveningPeriod::Nightfall => 21,
            EveningPeriod::Midnight => 0,
            EveningPeriod::EarlyMorning => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawEnvironment")]
pub struct EnvironmentSample {
    pub weather: Weather,
    pub hour: u8,
    pub time_part: TimePart,
}

#[derive(Deserialize)]
struct RawEnvironment {
    weather: Weather,
    hour: u8,
    time_part: TimePart,
}

impl TryFrom<RawEnvironment> for EnvironmentSample {
    type Error = String;

    fn try_from(raw: RawEnvironment) -> Result<Self, Self::Error> {
        let env = EnvironmentSample::new(raw.weather, raw.hour)?;
        if env.time_part != raw.time_part {
            return Err(format!(
                "time_part {:?} inconsistent with hour {}",
                raw.time_part, raw.hour
            ));
        }
        Ok(env)
    }
}

impl EnvironmentSample {
    pub fn new(weather: Weather, hour: u8) -> Result<Self, String> {
        if hour >= 24 {
            return Err(format!("hour {hour} outside [0, 24)"));
        }
        Ok(EnvironmentSample {
            weather,
            hour,
            time_part: TimePart::of_hour(hour),
        })
    }
}

fn pick(u: f64, n: usize) -> usize {
    ((u * n as f64) as usize).min(n - 1)
}

fn pick_weighted(u: f64, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return k;
        }
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

/// Draws one environment. Always consumes six uniforms, in order: thunder
/// gate, clear gate, weighted weather, time part, evening period, hour.
pub fn sample_environment_with(
    rng: &mut SynthRng,
    cfg: &WeatherConfig,
    thunder_prob: f64,
) -> EnvironmentSample {
    let u: [f64; 6] = std::array::from_fn(|_| rng.random::<f64>());
    let weather = if u[0] < thunder_prob {
        Weather::Thunder
    } else if u[1] < cfg.clear_share {
        Weather::Clear
    } else {
        Weather::WEIGHTED[pick_weighted(u[2], &cfg.weights)]
    };
    let part = TimePart::ALL[pick(u[3], TimePart::ALL.len())];
    let first = if part == TimePart::Evening {
        EveningPeriod::ALL[pick(u[4], EveningPeriod::ALL.len())].first_hour()
    } else {
        part.first_hour()
    };
    let hour = first + pick(u[5], 3) as u8;
    EnvironmentSample {
        weather,
        hour,
        time_part: TimePart::of_hour(hour),
    }
}

/// Environment for a seed under the default weather rule, without Thunder.
pub fn sample_environment(seed: u64) -> EnvironmentSample {
    sample_environment_with(&mut rng_from_seed(seed), &WeatherConfig::default(), 0.0)
}
