use serde::{Deserialize, Serialize};

use super::{Granularity, KnowledgeSubtype, ProfileError};
use crate::providers::{ChatMessage, ChatProvider, ChatRequest};

const EXTRACT_SYSTEM: &str = include_str!("../../prompts/profile_extract.txt");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectElement {
    #[serde(alias = "text")]
    pub name: String,
    #[serde(default)]
    pub granularity: Granularity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationElement {
    pub name: String,
    #[serde(default)]
    pub expression: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ExtractedElement {
    Pattern {
        name: String,
        #[serde(default)]
        args: Vec<String>,
        #[serde(default)]
        object: Option<ObjectElement>,
        #[serde(default)]
        location: Option<LocationElement>,
    },
    Object(ObjectElement),
    Location(LocationElement),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedKnowledge {
    pub alias: String,
    pub subtype: KnowledgeSubtype,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub elements: Vec<ExtractedElement>,
}

impl ExtractedKnowledge {
    /// Query text for similarity search, matching knowledge node text.
    pub fn text(&self) -> String {
        format!("{} {}", self.alias, self.description).trim().to_string()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub knowledges: Vec<ExtractedKnowledge>,
}

impl ExtractionResult {
    /// Parses the first JSON object in a provider reply.
    pub fn parse(reply: &str) -> Result<Self, ProfileError> {
        let start = reply.find('{');
        let end = reply.rfind('}');
        let body = match (start, end) {
            (Some(s), Some(e)) if s < e => &reply[s..=e],
            _ => return Err(ProfileError::UnparseableExtraction(format!("no JSON object in {reply:?}"))),
        };
        let out: Self =
            serde_json::from_str(body).map_err(|e| ProfileError::UnparseableExtraction(e.to_string()))?;
        for k in &out.knowledges {
            if k.alias.trim().is_empty() {
                return Err(ProfileError::UnparseableExtraction("empty alias".into()));
            }
        }
        Ok(out)
    }
}

pub fn extract_knowledge(instruction: &str, provider: &dyn ChatProvider) -> Result<ExtractionResult, ProfileError> {
    let request = ChatRequest::new(vec![
        ChatMessage::system(EXTRACT_SYSTEM),
        ChatMessage::user(format!("Instruction: {instruction}")),
    ]);
    let reply = provider.chat(&request)?;
    ExtractionResult::parse(&reply.content)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::{ScriptedChat, Transcript};

    #[test]
    fn parses_fenced_reply() {
        let reply = "```json\n{\"knowledges\":[{\"alias\":\"my favorite cup\",\"subtype\":\"object_semantics\",\
            \"description\":\"a yellow cup with a wooden handle\",\"elements\":[{\"type\":\"object\",\"name\":\"cup\"},\
            {\"type\":\"location\",\"name\":\"table\"}]}]}\n```";
        let chat = ScriptedChat::new("x", Transcript::cursor([reply]));
        let r = extract_knowledge("Place my favorite cup on the table", &chat).unwrap();
        assert_eq!(r.knowledges.len(), 1);
        let k = &r.knowledges[0];
        assert_eq!((k.alias.as_str(), k.subtype), ("my favorite cup", KnowledgeSubtype::ObjectSemantics));
        assert_eq!(k.elements.len(), 2);
    }

    #[test]
    fn empty_is_valid_but_garbage_is_not() {
        assert!(ExtractionResult::parse(r#"{"knowledges": []}"#).unwrap().knowledges.is_empty());
        assert!(matches!(ExtractionResult::parse("no idea"), Err(ProfileError::UnparseableExtraction(_))));
        assert!(ExtractionResult::parse(r#"{"knowledges":[{"alias":"","subtype":"user_pattern"}]}"#).is_err());
    }
}
