//! The four bundled example charts and their test suites.

use crate::chart::{parse_chart, Chart};
use crate::sim::{parse_suite, Suite};

pub struct Model {
    pub name: &'static str,
    pub chart: Chart,
    pub suite: Suite,
}

macro_rules! model {
    ($fn:ident, $name:literal) => {
        pub fn $fn() -> Model {
            load(
                $name,
                include_str!(concat!("../../../corpus/", $name, ".chart.json")),
                include_str!(concat!("../../../corpus/", $name, ".suite.json")),
            )
        }
    };
}

model!(door, "door");
model!(elevator, "elevator");
model!(fridge, "fridge");
model!(pacemaker, "pacemaker");

pub const NAMES: [&str; 4] = ["door", "elevator", "fridge", "pacemaker"];

pub fn all() -> Vec<Model> {
    vec![door(), elevator(), fridge(), pacemaker()]
}

pub fn by_name(name: &str) -> Option<Model> {
    match name {
        "door" => Some(door()),
        "elevator" => Some(elevator()),
        "fridge" => Some(fridge()),
        "pacemaker" => Some(pacemaker()),
        _ => None,
    }
}

fn load(name: &'static str, chart: &str, suite: &str) -> Model {
    let chart = parse_chart(chart).unwrap_or_else(|e| panic!("bundled chart {name}: {e}"));
    let suite = parse_suite(suite, &chart).unwrap_or_else(|e| panic!("bundled suite {name}: {e}"));
    Model { name, chart, suite }
}
