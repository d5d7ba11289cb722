use super::schema::{ControllerSpec, Goals, Randomization, RewardScheme, Scenario, TerrainSpec, UnitSpec};
use crate::sim::{CellRect, Force, Pos, Region, UnitClass};

/// Desk-scale wadi-crossing battle: 64×64 cells of 0.5 km, a vertical
/// impassable wadi at x ∈ [30, 33] with two crossing corridors, Blue in the
/// west and Red in the east.
pub fn builtin_tigerclaw() -> Scenario {
    use Force::{Blue, Red};
    use UnitClass::*;
    let roster = vec![
        UnitSpec::new(Armor, Blue, Pos::new(24.5, 16.5)).count(2).symbol("SFGPUCA---"),
        UnitSpec::new(MechInfantry, Blue, Pos::new(24.5, 47.5)).count(2).symbol("SFGPUCIZ--"),
        UnitSpec::new(Mortar, Blue, Pos::new(18.5, 30.5)).symbol("SFGPUCFM--"),
        UnitSpec::new(Aviation, Blue, Pos::new(16.5, 32.5)).symbol("SFAPMHA---"),
        UnitSpec::new(Artillery, Blue, Pos::new(10.5, 32.5)).symbol("SFGPUCF---"),
        UnitSpec::new(AntiArmor, Blue, Pos::new(22.5, 36.5)).symbol("SFGPUCAA--"),
        UnitSpec::new(Infantry, Blue, Pos::new(26.5, 30.5)).symbol("SFGPUCI---"),
        UnitSpec::new(Armor, Red, Pos::new(40.5, 32.5)).symbol("SHGPUCA---"),
        UnitSpec::new(MechInfantry, Red, Pos::new(38.5, 16.5)).symbol("SHGPUCIZ--"),
        UnitSpec::new(MechInfantry, Red, Pos::new(38.5, 47.5)).symbol("SHGPUCIZ--"),
        UnitSpec::new(AntiArmor, Red, Pos::new(42.5, 30.5)).symbol("SHGPUCAA--"),
        UnitSpec::new(Infantry, Red, Pos::new(37.5, 24.5)).symbol("SHGPUCI---"),
        UnitSpec::new(Infantry, Red, Pos::new(37.5, 40.5)).symbol("SHGPUCI---"),
    ];
    let mut objectives = Region::new("objectives", vec![CellRect::new(48, 28, 57, 37)]);
    objectives.objective = true;
    Scenario {
        name: "tigerclaw-desk".into(),
        terrain: TerrainSpec::Wadi {
            width: 64,
            height: 64,
            band_x: 30,
            band_width: 4,
            crossings: vec![[14, 17], [46, 49]],
        },
        roster,
        regions: vec![
            Region::new("west_bank", vec![CellRect::new(0, 0, 29, 63)]),
            Region::new("east_bank", vec![CellRect::new(34, 0, 63, 63)]),
            objectives,
        ],
        crossing_pair: Some(("west_bank".into(), "east_bank".into())),
        goals: Goals { blue: Pos::new(52.5, 32.5), red: Pos::new(10.5, 32.5) },
        reward_scheme: RewardScheme::tigerclaw(),
        max_ticks: 400,
        red_controller: ControllerSpec::Bot { level: 5 },
        tick_seconds: 6.0,
        cell_km: 0.5,
        randomization: Some(Randomization {
            spawn_jitter: 1.5,
            attribute_noise: 0.1,
            stochastic_fire: true,
            accuracy: 0.8,
        }),
    }
}

/// Reduced 16×16 engagement: four Blue armored units against two Red units
/// under the attrition reward, sized for quick training runs.
pub fn builtin_skirmish() -> Scenario {
    use Force::{Blue, Red};
    use UnitClass::*;
    let mut blue_armor = UnitSpec::new(Armor, Blue, Pos::new(2.5, 5.5)).count(2);
    let mut blue_mech = UnitSpec::new(MechInfantry, Blue, Pos::new(2.5, 10.5)).count(2);
    blue_armor.passive = Some(false);
    blue_mech.passive = Some(false);
    let mut objective = Region::new("objective", vec![CellRect::new(12, 6, 15, 9)]);
    objective.objective = true;
    Scenario {
        name: "skirmish".into(),
        terrain: TerrainSpec::Open { width: 16, height: 16 },
        roster: vec![
            blue_armor,
            blue_mech,
            UnitSpec::new(AntiArmor, Red, Pos::new(9.5, 6.5)),
            UnitSpec::new(MechInfantry, Red, Pos::new(9.5, 9.5)),
        ],
        regions: vec![objective],
        crossing_pair: None,
        goals: Goals { blue: Pos::new(13.5, 8.0), red: Pos::new(2.5, 8.0) },
        reward_scheme: RewardScheme::attrition(),
        max_ticks: 40,
        red_controller: ControllerSpec::Doctrine { rules: None },
        tick_seconds: 30.0,
        cell_km: 0.5,
        randomization: Some(Randomization {
            spawn_jitter: 1.0,
            attribute_noise: 0.0,
            stochastic_fire: true,
            accuracy: 0.8,
        }),
    }
}
