use serde::{Deserialize, Serialize};

use super::Pos;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Force {
    Blue,
    Red,
}

impl Force {
    pub const BOTH: [Force; 2] = [Force::Blue, Force::Red];

    pub fn opponent(self) -> Force {
        match self {
            Force::Blue => Force::Red,
            Force::Red => Force::Blue,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Force::Blue => "blue",
            Force::Red => "red",
        }
    }

    pub fn parse(s: &str) -> Option<Force> {
        match s {
            "blue" => Some(Force::Blue),
            "red" => Some(Force::Red),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitClass {
    Armor,
    MechInfantry,
    Mortar,
    Aviation,
    Artillery,
    AntiArmor,
    Infantry,
}

/// Per-class default attributes. Desk-scale estimates, chosen so that both
/// sides have something to fear from each other; every value can be
/// overridden per roster entry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassProfile {
    pub weapon_range_km: f64,
    pub weapon_damage: u32,
    pub shots_per_tick: u32,
    pub sensor_range_km: f64,
    pub speed_max_kmh: f64,
    pub strength: u32,
    pub ammo: u32,
    pub fuel_capacity: f64,
    /// Fuel units consumed per kilometer moved.
    pub fuel_rate: f64,
    pub indirect: bool,
}

impl UnitClass {
    pub const ALL: [UnitClass; 7] = [
        UnitClass::Armor,
        UnitClass::MechInfantry,
        UnitClass::Mortar,
        UnitClass::Aviation,
        UnitClass::Artillery,
        UnitClass::AntiArmor,
        UnitClass::Infantry,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            UnitClass::Armor => "armor",
            UnitClass::MechInfantry => "mech_infantry",
            UnitClass::Mortar => "mortar",
            UnitClass::Aviation => "aviation",
            UnitClass::Artillery => "artillery",
            UnitClass::AntiArmor => "anti_armor",
            UnitClass::Infantry => "infantry",
        }
    }

    pub fn parse(s: &str) -> Option<UnitClass> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }

    pub fn profile(self) -> ClassProfile {
        let p = |weapon_range_km,
                 weapon_damage,
                 shots_per_tick,
                 sensor_range_km,
                 speed_max_kmh,
                 strength,
                 ammo,
                 fuel_rate,
                 indirect| {
            ClassProfile {
                weapon_range_km,
                weapon_damage,
                shots_per_tick,
                sensor_range_km,
                speed_max_kmh,
                strength,
                ammo,
                fuel_capacity: 1000.0,
                fuel_rate,
                indirect,
            }
        };
        match self {
            UnitClass::Armor => p(3.0, 2, 1, 5.0, 50.0, 14, 40, 2.0, false),
            UnitClass::MechInfantry => p(2.0, 1, 2, 4.0, 55.0, 14, 60, 1.5, false),
            UnitClass::Mortar => p(6.0, 1, 2, 3.0, 40.0, 8, 30, 1.0, true),
            UnitClass::Aviation => p(5.0, 2, 1, 8.0, 200.0, 6, 20, 4.0, false),
            UnitClass::Artillery => p(20.0, 2, 2, 3.0, 30.0, 6, 24, 2.0, true),
            UnitClass::AntiArmor => p(3.5, 3, 1, 4.0, 40.0, 8, 20, 1.0, false),
            UnitClass::Infantry => p(1.0, 1, 1, 3.0, 5.0, 30, 60, 0.1, false),
        }
    }

    /// Largest `speed_max_kmh` among the class defaults; normalizer for the
    /// maximum-speed observation feature.
    pub fn global_max_speed_kmh() -> f64 {
        Self::ALL.iter().map(|c| c.profile().speed_max_kmh).fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UnitId(pub u32);

impl UnitId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for UnitId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Which bank of the crossing-region pair a unit last stood on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bank {
    Near,
    Far,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Unit {
    pub id: UnitId,
    pub force: Force,
    pub class: UnitClass,
    pub position: Pos,
    pub heading: f64,
    pub speed: f64,
    pub speed_max: f64,
    pub strength: u32,
    pub strength_max: u32,
    pub weapon_range: f64,
    pub weapon_damage: u32,
    pub shots_per_tick: u32,
    pub sensor_range: f64,
    pub ammo: u32,
    pub ammo_max: u32,
    pub fuel_consumed: f64,
    pub fuel_capacity: f64,
    pub fuel_rate: f64,
    pub passive: bool,
    pub indirect: bool,
    pub bank: Option<Bank>,
}

impl Unit {
    #[inline]
    pub fn alive(&self) -> bool {
        self.strength > 0
    }

    pub fn out_of_fuel(&self) -> bool {
        self.fuel_consumed >= self.fuel_capacity
    }
}
