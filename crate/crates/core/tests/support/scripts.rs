//! Seeded dialogue scripts in which required information is withheld for a
//! while, so the engine has to stop and ask before it may retrieve anything.

use rand::seq::SliceRandom;
use rand::Rng;

pub const BAKERY_IDEATION: [&str; 8] = [
    "I'm interested in starting a bakery in San Ysidro, San Diego County, California. What do I need to know?",
    "Let’s start with the market. What should I know about San Ysidro?",
    "That’s a good point. What adjustments would you recommend?",
    "Yes, I could include traditional Mexican baked goods like pan dulce. I’d also like to know how this impacts my budget.",
    "Let’s refine the budget. I estimate around $120,000 in startup costs, but I’m unsure about permit fees.",
    "Sure, let’s focus on the health permit. My layout includes areas for baking, cooling, and retail space.",
    "Yes, and I’ve secured a loan for $80,000. I’d like to understand how this affects my timeline.",
    "No, I think I have a clear picture now. Thanks for your help!",
];

const LOCATIONS: [&str; 3] = ["Chula Vista", "National City", "San Ysidro"];
const BUSINESSES: [&str; 3] = ["bakery", "catering business", "food truck"];
const FILLERS: [&str; 3] = ["What permits do I need?", "Hello, I need some advice.", "How much money will I need?"];

/// One generated script, user turns in order.
#[derive(Debug, Clone)]
pub struct Script {
    pub turns: Vec<String>,
}

pub fn random_script<R: Rng>(rng: &mut R) -> Script {
    let loc = *LOCATIONS.choose(rng).unwrap();
    let biz = *BUSINESSES.choose(rng).unwrap();
    let mut turns = Vec::new();
    match rng.gen_range(0..4) {
        0 => turns.push(format!("I want to open a {biz}. Where do I begin?")),
        1 => turns.push(format!("I'm looking at {loc}. What should I know?")),
        2 => turns.push("Hello, I need some advice.".to_string()),
        _ => {
            turns.extend(BAKERY_IDEATION[..7].iter().map(|t| t.to_string()));
            turns.push("What permits do I need to open?".to_string());
            return Script { turns };
        }
    }
    if rng.gen_bool(0.5) {
        turns.push(FILLERS.choose(rng).unwrap().to_string());
    }
    turns.push(format!("It's a {biz} in {loc}. What should I know about the market?"));
    if rng.gen_bool(0.5) {
        turns.push("What adjustments would you recommend?".to_string());
    }
    Script { turns }
}
