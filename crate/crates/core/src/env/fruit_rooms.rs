//! FruitRooms: a chain of small rooms separated by locked doors, ending in a
//! room with an apple and a banana. Exactly one fruit is correct; which one is
//! the level's aleatoric parameter and stays hidden until the agent eats.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::codec::{ByteReader, ByteWriter, SimState, SNAPSHOT_MAGIC, SNAPSHOT_VERSION};
use super::level_text::Fields;
use super::{Action, Environment, Evidence, LevelDescriptor, LevelGenerator, Observation, StepOutcome};
use crate::error::{Error, Result};

pub const ACTION_UP: Action = 0;
pub const ACTION_DOWN: Action = 1;
pub const ACTION_LEFT: Action = 2;
pub const ACTION_RIGHT: Action = 3;
pub const ACTION_KICK: Action = 4;
pub const ACTION_EAT: Action = 5;
pub const NUM_ACTIONS: usize = 6;
pub const OBS_DIM: usize = 15;

/// Evidence index under which the correct fruit is disclosed.
pub const FRUIT_COMPONENT: usize = 0;

const SNAPSHOT_KIND: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fruit {
    Apple,
    Banana,
}

impl Fruit {
    pub fn code(self) -> u8 {
        match self {
            Fruit::Apple => 0,
            Fruit::Banana => 1,
        }
    }

    pub fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(Fruit::Apple),
            1 => Ok(Fruit::Banana),
            _ => Err(Error::decode(format!("invalid fruit code {c}"))),
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Fruit::Apple => "apple",
            Fruit::Banana => "banana",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FruitRoomsLevel {
    pub rooms: u8,
    pub layout_seed: u64,
    pub fruit: Fruit,
}

impl LevelDescriptor for FruitRoomsLevel {
    type Aleatoric = Fruit;

    fn to_line(&self) -> String {
        format!(
            "env=fruitrooms rooms={} layout={} fruit={}",
            self.rooms,
            self.layout_seed,
            self.fruit.as_str()
        )
    }

    fn from_line(line: &str) -> Result<Self> {
        let f = Fields::parse(line)?;
        f.expect_only(&["env", "rooms", "layout", "fruit"])?;
        if f.get("env")? != "fruitrooms" {
            return Err(Error::decode("not a fruitrooms level"));
        }
        let fruit = match f.get("fruit")? {
            "apple" => Fruit::Apple,
            "banana" => Fruit::Banana,
            other => return Err(Error::decode(format!("unknown fruit `{other}`"))),
        };
        Ok(FruitRoomsLevel {
            rooms: f.parse_as("rooms")?,
            layout_seed: f.parse_as("layout")?,
            fruit,
        })
    }

    fn aleatoric(&self) -> Fruit {
        self.fruit
    }

    fn with_aleatoric(&self, theta: Fruit) -> Self {
        FruitRoomsLevel {
            fruit: theta,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FruitRoomsConfig {
    pub reward_apple: f64,
    pub reward_banana: f64,
    pub width: u8,
    pub height: u8,
    pub step_budget: u32,
    /// Success probability of a single kick; a door needs
    /// `min(Geometric(p), kick_cap)` kicks.
    pub kick_success_prob: f64,
    pub kick_cap: u8,
}

impl Default for FruitRoomsConfig {
    fn default() -> Self {
        FruitRoomsConfig {
            reward_apple: 3.0,
            reward_banana: 10.0,
            width: 5,
            height: 5,
            step_budget: 250,
            kick_success_prob: 0.4,
            kick_cap: 5,
        }
    }
}

impl FruitRoomsConfig {
    pub fn reward_for(&self, fruit: Fruit) -> f64 {
        match fruit {
            Fruit::Apple => self.reward_apple,
            Fruit::Banana => self.reward_banana,
        }
    }
}

pub const MAX_ROOMS: u8 = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct FruitRoomsState {
    pub rooms: u8,
    pub door_rows: Vec<u8>,
    pub kicks_left: Vec<u8>,
    pub apple: (u8, u8),
    pub banana: (u8, u8),
    pub correct: Fruit,
    pub room: u8,
    pub x: u8,
    pub y: u8,
    pub steps: u32,
    pub done: bool,
    /// Fruit eaten at the terminal step, if any.
    pub eaten: Option<Fruit>,
}

impl FruitRoomsState {
    pub fn in_final_room(&self) -> bool {
        self.room + 1 == self.rooms
    }

    fn fruit_at(&self, x: u8, y: u8) -> Option<Fruit> {
        if !self.in_final_room() {
            None
        } else if (x, y) == self.apple {
            Some(Fruit::Apple)
        } else if (x, y) == self.banana {
            Some(Fruit::Banana)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct FruitRooms {
    pub cfg: FruitRoomsConfig,
}

/// Door rows, kick counts and fruit cells, all determined by the layout seed.
#[derive(Clone, Debug, PartialEq)]
pub struct FruitLayout {
    pub door_rows: Vec<u8>,
    pub kicks: Vec<u8>,
    pub apple: (u8, u8),
    pub banana: (u8, u8),
}

impl FruitRooms {
    pub fn new(cfg: FruitRoomsConfig) -> Self {
        FruitRooms { cfg }
    }

    pub fn layout(&self, rooms: u8, layout_seed: u64) -> FruitLayout {
        let mut rng = ChaCha8Rng::seed_from_u64(layout_seed);
        let (w, h) = (self.cfg.width, self.cfg.height);
        let doors = rooms.saturating_sub(1) as usize;
        let door_rows = (0..doors).map(|_| rng.random_range(0..h)).collect();
        let kicks = (0..doors)
            .map(|_| {
                let mut k = 1u8;
                while k < self.cfg.kick_cap && !rng.random_bool(self.cfg.kick_success_prob) {
                    k += 1;
                }
                k
            })
            .collect();
        // Fruit never sits in the two entry columns.
        let cell = |rng: &mut ChaCha8Rng| (rng.random_range(2..w), rng.random_range(0..h));
        let apple = cell(&mut rng);
        let mut banana = cell(&mut rng);
        while banana == apple {
            banana = cell(&mut rng);
        }
        FruitLayout {
            door_rows,
            kicks,
            apple,
            banana,
        }
    }

    /// Start row in room 0 as a function of the reset seed.
    pub fn start_row(&self, seed: u64) -> u8 {
        (splitmix64(seed) % self.cfg.height as u64) as u8
    }

    /// Builds the initial state of `level` with the agent at `(0, start_row)`.
    pub fn initial_state(&self, level: &FruitRoomsLevel, start_row: u8) -> Result<FruitRoomsState> {
        self.validate(level)?;
        let lay = self.layout(level.rooms, level.layout_seed);
        Ok(FruitRoomsState {
            rooms: level.rooms,
            door_rows: lay.door_rows,
            kicks_left: lay.kicks,
            apple: lay.apple,
            banana: lay.banana,
            correct: level.fruit,
            room: 0,
            x: 0,
            y: start_row.min(self.cfg.height - 1),
            steps: 0,
            done: false,
            eaten: None,
        })
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Environment for FruitRooms {
    type Level = FruitRoomsLevel;
    type State = FruitRoomsState;
    type Aleatoric = Fruit;

    fn name(&self) -> &'static str {
        "fruitrooms"
    }

    fn num_actions(&self) -> usize {
        NUM_ACTIONS
    }

    fn obs_dim(&self) -> usize {
        OBS_DIM
    }

    fn validate(&self, level: &FruitRoomsLevel) -> Result<()> {
        if level.rooms < 1 || level.rooms > MAX_ROOMS {
            return Err(Error::construction(format!(
                "room count {} outside [1, {MAX_ROOMS}]",
                level.rooms
            )));
        }
        if self.cfg.width < 3 || self.cfg.height < 1 {
            return Err(Error::construction("room must be at least 3 cells wide"));
        }
        Ok(())
    }

    fn reset(&self, level: &FruitRoomsLevel, seed: u64) -> Result<(FruitRoomsState, Observation)> {
        let s = self.initial_state(level, self.start_row(seed))?;
        let o = self.observe(&s);
        Ok((s, o))
    }

    fn step(&self, state: &FruitRoomsState, action: Action) -> Result<StepOutcome<FruitRoomsState>> {
        if state.done {
            return Err(Error::contract("step called on a terminal FruitRooms state"));
        }
        if action >= NUM_ACTIONS {
            return Err(Error::contract(format!("action {action} out of range")));
        }
        let mut s = state.clone();
        let (w, h) = (self.cfg.width, self.cfg.height);
        let mut reward = 0.0;
        let mut evidence = Evidence::new();
        s.steps += 1;

        let at_door = !s.in_final_room() && s.x == w - 1 && s.y == s.door_rows[s.room as usize];
        match action {
            ACTION_UP => s.y = s.y.saturating_sub(1),
            ACTION_DOWN => s.y = (s.y + 1).min(h - 1),
            ACTION_LEFT => s.x = s.x.saturating_sub(1),
            ACTION_RIGHT => {
                if s.x + 1 < w {
                    s.x += 1;
                } else if at_door && s.kicks_left[s.room as usize] == 0 {
                    s.room += 1;
                    s.x = 0;
                }
            }
            ACTION_KICK => {
                if at_door {
                    let k = &mut s.kicks_left[s.room as usize];
                    *k = k.saturating_sub(1);
                }
            }
            ACTION_EAT => {
                if let Some(f) = s.fruit_at(s.x, s.y) {
                    if f == s.correct {
                        reward = self.cfg.reward_for(f);
                    }
                    s.eaten = Some(f);
                    s.done = true;
                    evidence.insert(FRUIT_COMPONENT, s.correct.code())?;
                }
            }
            _ => unreachable!(),
        }
        if s.steps >= self.cfg.step_budget {
            s.done = true;
        }
        let observation = self.observe(&s);
        let done = s.done;
        Ok(StepOutcome {
            state: s,
            observation,
            reward,
            done,
            evidence,
        })
    }

    fn observe(&self, s: &FruitRoomsState) -> Observation {
        let wn = (self.cfg.width - 1).max(1) as f64;
        let hn = (self.cfg.height - 1).max(1) as f64;
        let x = s.x as f64;
        let y = s.y as f64;
        let final_room = s.in_final_room();
        let mut o = vec![0.0; OBS_DIM];
        o[0] = (s.rooms - 1 - s.room) as f64 / (MAX_ROOMS - 1) as f64;
        o[1] = final_room as u8 as f64;
        o[2] = x / wn;
        o[3] = y / hn;
        if !final_room {
            let dr = s.door_rows[s.room as usize] as f64;
            o[4] = (wn - x) / wn;
            o[5] = (dr - y) / hn;
            o[6] = (s.kicks_left[s.room as usize] > 0) as u8 as f64;
            o[7] = (s.x == self.cfg.width - 1 && s.y == s.door_rows[s.room as usize]) as u8 as f64;
        } else {
            o[8] = (s.apple.0 as f64 - x) / wn;
            o[9] = (s.apple.1 as f64 - y) / hn;
            o[10] = (s.banana.0 as f64 - x) / wn;
            o[11] = (s.banana.1 as f64 - y) / hn;
            o[12] = ((s.x, s.y) == s.apple) as u8 as f64;
            o[13] = ((s.x, s.y) == s.banana) as u8 as f64;
        }
        o[14] = s.steps as f64 / self.cfg.step_budget as f64;
        o
    }

    fn is_done(&self, s: &FruitRoomsState) -> bool {
        s.done
    }

    fn snapshot(&self, s: &FruitRoomsState) -> SimState {
        let mut w = ByteWriter::with_header(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, SNAPSHOT_KIND);
        w.u8(s.rooms);
        w.bytes(&s.door_rows);
        w.bytes(&s.kicks_left);
        w.u8(s.apple.0);
        w.u8(s.apple.1);
        w.u8(s.banana.0);
        w.u8(s.banana.1);
        w.u8(s.correct.code());
        w.u8(s.room);
        w.u8(s.x);
        w.u8(s.y);
        w.u32(s.steps);
        w.bool(s.done);
        w.u8(s.eaten.map_or(255, Fruit::code));
        SimState(w.finish())
    }

    fn restore(&self, snap: &SimState) -> Result<FruitRoomsState> {
        let mut r = ByteReader::open(snap.as_bytes(), SNAPSHOT_MAGIC, SNAPSHOT_VERSION, SNAPSHOT_KIND)?;
        let rooms = r.u8()?;
        let door_rows = r.bytes()?;
        let kicks_left = r.bytes()?;
        let apple = (r.u8()?, r.u8()?);
        let banana = (r.u8()?, r.u8()?);
        let correct = Fruit::from_code(r.u8()?)?;
        let room = r.u8()?;
        let x = r.u8()?;
        let y = r.u8()?;
        let steps = r.u32()?;
        let done = r.bool()?;
        let eaten = match r.u8()? {
            255 => None,
            c => Some(Fruit::from_code(c)?),
        };
        r.finish()?;
        let doors = rooms.saturating_sub(1) as usize;
        if rooms == 0
            || door_rows.len() != doors
            || kicks_left.len() != doors
            || room >= rooms
            || x >= self.cfg.width
            || y >= self.cfg.height
        {
            return Err(Error::decode("FruitRooms snapshot fields out of range"));
        }
        Ok(FruitRoomsState {
            rooms,
            door_rows,
            kicks_left,
            apple,
            banana,
            correct,
            room,
            x,
            y,
            steps,
            done,
            eaten,
        })
    }

    fn set_aleatoric(&self, state: &FruitRoomsState, theta: &Fruit, evidence: &Evidence) -> Result<FruitRoomsState> {
        let disclosed = evidence
            .get(FRUIT_COMPONENT)
            .or_else(|| state.eaten.map(|_| state.correct.code()));
        match disclosed {
            Some(v) if v != theta.code() => Err(Error::GroundingConsistency {
                index: FRUIT_COMPONENT,
                disclosed: v,
                proposed: theta.code(),
            }),
            _ => Ok(FruitRoomsState {
                correct: *theta,
                ..state.clone()
            }),
        }
    }

    fn aleatoric_of(&self, state: &FruitRoomsState) -> Fruit {
        state.correct
    }
}

/// Ground-truth level distribution: room count uniform in
/// `[min_rooms, max_rooms]`, fresh layout seed, apple correct with
/// probability `apple_prob`.
#[derive(Clone, Debug)]
pub struct FruitRoomsGenerator {
    pub min_rooms: u8,
    pub max_rooms: u8,
    pub apple_prob: f64,
}

impl LevelGenerator<FruitRoomsLevel> for FruitRoomsGenerator {
    fn sample(&self, rng: &mut dyn rand::RngCore) -> FruitRoomsLevel {
        let rooms = rng.random_range(self.min_rooms..=self.max_rooms);
        let layout_seed = rng.next_u64();
        let fruit = if rng.random_bool(self.apple_prob) {
            Fruit::Apple
        } else {
            Fruit::Banana
        };
        FruitRoomsLevel {
            rooms,
            layout_seed,
            fruit,
        }
    }
}

/// Scripted policy that walks to the doors, kicks them open and eats `target`.
/// Used for sanity checks of the reward algebra.
pub fn scripted_action(env: &FruitRooms, s: &FruitRoomsState, target: Fruit) -> Action {
    let w = env.cfg.width;
    let (tx, ty) = if s.in_final_room() {
        match target {
            Fruit::Apple => s.apple,
            Fruit::Banana => s.banana,
        }
    } else {
        (w - 1, s.door_rows[s.room as usize])
    };
    if (s.x, s.y) == (tx, ty) {
        if s.in_final_room() {
            ACTION_EAT
        } else if s.kicks_left[s.room as usize] > 0 {
            ACTION_KICK
        } else {
            ACTION_RIGHT
        }
    } else if s.y < ty {
        ACTION_DOWN
    } else if s.y > ty {
        ACTION_UP
    } else if s.x < tx {
        ACTION_RIGHT
    } else {
        ACTION_LEFT
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env() -> FruitRooms {
        FruitRooms::default()
    }

    fn level(rooms: u8, fruit: Fruit) -> FruitRoomsLevel {
        FruitRoomsLevel {
            rooms,
            layout_seed: 11,
            fruit,
        }
    }

    #[test]
    fn reset_single_room() {
        let (s, o) = env().reset(&level(1, Fruit::Banana), 0).unwrap();
        assert_eq!((s.room, s.x, s.steps), (0, 0, 0));
        assert_eq!(s.y, env().start_row(0));
        // final room: fruit features are populated
        assert_eq!(o[1], 1.0);
        assert!(o[8] != 0.0 || o[9] != 0.0);
    }

    #[test]
    fn malformed_room_counts_are_rejected() {
        for rooms in [0u8, 9] {
            let err = env().reset(&level(rooms, Fruit::Apple), 0).unwrap_err();
            assert!(matches!(err, Error::Construction { ref bound } if bound.contains("room count")));
        }
    }

    #[test]
    fn eating_correct_banana_pays_r_b() {
        let e = env();
        let (mut s, _) = e.reset(&level(1, Fruit::Banana), 0).unwrap();
        loop {
            let out = e.step(&s, scripted_action(&e, &s, Fruit::Banana)).unwrap();
            s = out.state;
            if out.done {
                assert_eq!(out.reward, 10.0);
                assert_eq!(out.evidence.get(FRUIT_COMPONENT), Some(Fruit::Banana.code()));
                break;
            }
            assert_eq!(out.reward, 0.0);
            assert!(out.evidence.is_empty());
        }
        assert!(e.step(&s, ACTION_UP).is_err());
    }

    #[test]
    fn wrong_fruit_pays_zero() {
        let e = env();
        let (mut s, _) = e.reset(&level(3, Fruit::Apple), 4).unwrap();
        let mut ret = 0.0;
        while !s.done {
            let out = e.step(&s, scripted_action(&e, &s, Fruit::Banana)).unwrap();
            ret += out.reward;
            s = out.state;
        }
        assert_eq!(ret, 0.0);
        assert_eq!(s.eaten, Some(Fruit::Banana));
    }

    #[test]
    fn kicks_follow_capped_geometric() {
        let e = env();
        let mut counts = [0usize; 6];
        for seed in 0..4000 {
            for k in e.layout(2, seed).kicks {
                counts[k as usize] += 1;
            }
        }
        // P(k=1) = 0.4, P(k=5) = 0.6^4
        assert!((counts[1] as f64 / 4000.0 - 0.4).abs() < 0.03);
        assert!((counts[5] as f64 / 4000.0 - 0.1296).abs() < 0.02);
        assert_eq!(counts[0], 0);
    }

    #[test]
    fn budget_terminates_with_zero() {
        let e = FruitRooms::new(FruitRoomsConfig {
            step_budget: 5,
            ..Default::default()
        });
        let (mut s, _) = e.reset(&level(2, Fruit::Apple), 0).unwrap();
        for i in 0..5 {
            let out = e.step(&s, ACTION_LEFT).unwrap();
            assert_eq!(out.done, i == 4);
            assert_eq!(out.reward, 0.0);
            s = out.state;
        }
    }

    #[test]
    fn swapping_fruit_does_not_change_navigation() {
        let e = env();
        let (s, _) = e.reset(&level(2, Fruit::Apple), 1).unwrap();
        let swapped = e.set_aleatoric(&s, &Fruit::Banana, &Evidence::new()).unwrap();
        for a in [ACTION_UP, ACTION_DOWN, ACTION_LEFT, ACTION_RIGHT, ACTION_KICK] {
            let x = e.step(&s, a).unwrap();
            let y = e.step(&swapped, a).unwrap();
            assert_eq!(x.observation, y.observation);
            assert_eq!(x.reward, y.reward);
            assert_eq!(x.done, y.done);
        }
    }

    #[test]
    fn set_aleatoric_rejects_contradiction() {
        let e = env();
        let (s, _) = e.reset(&level(1, Fruit::Apple), 0).unwrap();
        let ev = Evidence::from_entries([(FRUIT_COMPONENT, Fruit::Apple.code())]).unwrap();
        assert!(e.set_aleatoric(&s, &Fruit::Banana, &ev).is_err());
        assert_eq!(e.set_aleatoric(&s, &Fruit::Apple, &ev).unwrap(), s);
    }

    #[test]
    fn snapshot_roundtrip_and_corruption() {
        let e = env();
        let (s, _) = e.reset(&level(4, Fruit::Banana), 9).unwrap();
        let snap = e.snapshot(&s);
        assert_eq!(e.restore(&snap).unwrap(), s);
        let mut bad = snap.clone();
        bad.0[0] = b'X';
        assert!(matches!(e.restore(&bad), Err(Error::Decode(_))));
        let mut short = snap.clone();
        short.0.pop();
        assert!(e.restore(&short).is_err());
    }

    #[test]
    fn level_line_roundtrip() {
        let l = level(3, Fruit::Apple);
        let line = l.to_line();
        assert_eq!(line, "env=fruitrooms rooms=3 layout=11 fruit=apple");
        assert_eq!(FruitRoomsLevel::from_line(&line).unwrap(), l);
        assert!(FruitRoomsLevel::from_line("env=fruitrooms rooms=3 layout=1 fruit=kiwi").is_err());
        assert!(FruitRoomsLevel::from_line("env=fruitrooms rooms=3 layout=1 fruit=apple x=1").is_err());
    }
}
