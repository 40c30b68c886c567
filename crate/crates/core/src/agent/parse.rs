use thiserror::Error;

use super::AgentAction;
use crate::world::{PerceptionQuery, PlaceQualifier, SkillCall, SpatialRelation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct ParseFailure(pub String);

fn fail<T>(msg: impl Into<String>) -> Result<T, ParseFailure> {
    Err(ParseFailure(msg.into()))
}

fn optional(slot: &str) -> Option<&str> {
    match slot {
        "" | "None" | "none" | "null" => None,
        s => Some(s),
    }
}

/// Parses a single call such as `Pick[cup_1]`.
pub fn parse_action(text: &str) -> Result<AgentAction, ParseFailure> {
    let text = text.trim().trim_end_matches('.').trim();
    let text = text.strip_prefix("Action:").map(str::trim).unwrap_or(text);
    let (name, inner) = match text.find('[') {
        Some(open) => {
            if !text.ends_with(']') {
                return fail(format!("missing closing bracket in {text:?}"));
            }
            (text[..open].trim(), &text[open + 1..text.len() - 1])
        }
        None => (text, ""),
    };
    let args: Vec<&str> = if inner.trim().is_empty() {
        Vec::new()
    } else {
        inner.split(',').map(str::trim).collect()
    };
    let one = |args: &[&str]| -> Result<String, ParseFailure> {
        match args {
            [a] if !a.is_empty() => Ok(a.to_string()),
            _ => fail(format!("{name} takes exactly one argument")),
        }
    };
    let skill = |c: SkillCall| Ok(AgentAction::Skill(c));
    match name {
        "Navigate" => skill(SkillCall::Navigate { target: one(&args)? }),
        "Pick" => skill(SkillCall::Pick { object: one(&args)? }),
        "Open" => skill(SkillCall::Open { target: one(&args)? }),
        "Close" => skill(SkillCall::Close { target: one(&args)? }),
        "Explore" => skill(SkillCall::Explore { target: one(&args)? }),
        "Wait" if args.is_empty() => skill(SkillCall::Wait),
        "Wait" => fail("Wait takes no arguments"),
        "Done" if args.is_empty() => Ok(AgentAction::Done),
        "Done" => fail("Done takes no arguments"),
        "Place" => {
            let [object, relation, receptacle, qualifier, reference] = args.as_slice() else {
                return fail(format!(
                    "Place takes exactly 5 slots, got {}; use None for unused slots",
                    args.len()
                ));
            };
            let relation = SpatialRelation::parse(relation)
                .ok_or_else(|| ParseFailure(format!("unknown spatial relation {relation:?}")))?;
            let qualifier = match optional(qualifier) {
                None => None,
                Some(q) => Some(
                    PlaceQualifier::parse(q).ok_or_else(|| ParseFailure(format!("unknown qualifier {q:?}")))?,
                ),
            };
            let reference = optional(reference).map(str::to_string);
            if qualifier.is_some() != reference.is_some() {
                return fail("qualifier and reference object must be given together");
            }
            if object.is_empty() || receptacle.is_empty() {
                return fail("Place needs an object and a receptacle");
            }
            skill(SkillCall::Place {
                object: object.to_string(),
                relation,
                receptacle: receptacle.to_string(),
                qualifier,
                reference,
            })
        }
        _ => {
            if inner.trim().is_empty() && PerceptionQuery::from_parts(name, "x").is_some() {
                return fail(format!("{name} needs a query"));
            }
            PerceptionQuery::from_parts(name, inner.trim())
                .map(AgentAction::Perceive)
                .ok_or_else(|| ParseFailure(format!("unknown skill {name:?}")))
        }
    }
}

/// Splits a model reply into its thought and action text.
pub fn parse_reply(reply: &str) -> (String, String) {
    let mut thought = Vec::new();
    let mut action = None;
    let mut in_thought = false;
    for line in reply.lines() {
        let l = line.trim();
        if let Some(rest) = l.strip_prefix("Thought:") {
            thought.push(rest.trim().to_string());
            in_thought = true;
        } else if let Some(rest) = l.strip_prefix("Action:") {
            if action.is_none() {
                action = Some(rest.trim().to_string());
            }
            in_thought = false;
        } else if in_thought && !l.is_empty() {
            thought.push(l.to_string());
        }
    }
    (thought.join(" "), action.unwrap_or_default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_table_examples() {
        assert_eq!(
            parse_action("Action: Pick[cup_1]").unwrap(),
            AgentAction::Skill(SkillCall::Pick { object: "cup_1".into() })
        );
        assert_eq!(
            parse_action("Place[book_0, on, table_2, None, None]").unwrap(),
            AgentAction::Skill(SkillCall::place("book_0", SpatialRelation::On, "table_2"))
        );
        assert_eq!(
            parse_action(" Place[ statue_0 , on, chest_of_drawers_54, next_to, plant_container_1 ] ").unwrap(),
            AgentAction::Skill(SkillCall::place_next_to("statue_0", "chest_of_drawers_54", "plant_container_1"))
        );
        assert_eq!(
            parse_action("FindObjectTool[toys on the floor, near the bed]").unwrap(),
            AgentAction::Perceive(PerceptionQuery::FindObjectTool("toys on the floor, near the bed".into()))
        );
        assert_eq!(parse_action("Wait[]").unwrap(), AgentAction::Skill(SkillCall::Wait));
        assert_eq!(parse_action("Done[]").unwrap(), AgentAction::Done);
    }

    #[test]
    fn rejects_bad_calls() {
        assert!(parse_action("Fly[moon]").is_err());
        assert!(parse_action("Place[book_0, on, table_2]").is_err());
        assert!(parse_action("Pick[]").is_err());
        assert!(parse_action("Pick[cup_1").is_err());
        assert!(parse_action("Place[a, on, b, next_to, None]").is_err());
    }

    #[test]
    fn round_trips_display() {
        for s in ["Navigate[counter_22]", "Place[book_0, on, table_2, None, None]", "DescribeObjectTool[cup_0]", "Done[]"] {
            assert_eq!(parse_action(s).unwrap().to_string(), s);
        }
    }

    #[test]
    fn splits_reply() {
        let (t, a) = parse_reply("Thought: I see a cup.\nIt is blue.\nAction: Pick[cup_0]\n");
        assert_eq!(t, "I see a cup. It is blue.");
        assert_eq!(a, "Pick[cup_0]");
    }
}
